//! Steady actuator-disk wake solver with an immersed thrust-vectoring deflector.

pub mod analysis;
pub mod case;
pub mod cli;
pub mod forces;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod par;
pub mod solver;
