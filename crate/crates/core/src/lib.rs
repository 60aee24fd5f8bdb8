pub mod bdr;
pub mod cli;
pub mod data;
pub mod distributions;
pub mod lp;
pub mod numeric;
pub mod phi;
pub mod rng;
pub mod stats;
pub mod svm;
pub mod verify;
pub mod wasserstein;
