//! Robust error accumulation suppression (REAS) for layered Pauli-rotation
//! circuits: Pauli algebra, circuit IR, correlated dressing, noise models,
//! calibration and a dense simulator.

pub mod calibration;
pub mod circuit;
pub mod dress;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod rc;
pub mod rng;
pub mod sim;
