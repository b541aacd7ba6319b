pub mod correlator;
pub mod dyadic;
pub mod fusion;
pub mod linalg;
pub mod models;
pub mod spectral;
pub mod thompson;
pub mod treestate;
