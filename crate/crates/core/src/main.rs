use clap::Parser;

fn main() {
    let cli = wakevec::cli::Cli::parse();
    std::process::exit(wakevec::cli::run(cli));
}
