//! Ground-state toolkit for a spin-1/2 XXZ chain with a uniform
//! infinite-range XX coupling.

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod exactdiag;
pub mod linalg;
pub mod model;
pub mod spinwave;
pub mod sweep;
pub mod tensornet;
