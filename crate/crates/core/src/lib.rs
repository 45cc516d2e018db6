//! Shot distribution across candidate circuit maps so that a circuit's
//! expected output error is low and roughly equal on every quantum computer
//! it could run on.
//!
//! The pipeline has three stages:
//!
//! 1. [`mapgen`] produces `m` candidate maps per device, half noise-adaptive
//!    and half random-walk.
//! 2. [`predictor`] estimates each map's TVD with a per-device regression
//!    forest over the two-number gate encoding from [`circuit`].
//! 3. [`lp`] solves a linear program that splits shots across maps, minimizing
//!    total predicted TVD while keeping every device within a `1 + ε` factor.
//!
//! [`sim`] is the ground-truth noisy simulator used for training labels and
//! evaluation, and [`pipeline`] runs the end-to-end experiments and baselines.

pub mod circuit;
pub mod device;
pub mod fleet;
pub mod lp;
pub mod mapgen;
pub mod pipeline;
pub mod predictor;
pub mod seed;
pub mod sim;

pub use circuit::{parse_circuit, Circuit, Gate};
pub use device::{load_device, CalibrationSnapshot, CouplingGraph, DeviceModel};
pub use mapgen::{CircuitMap, MapOrigin};
pub use sim::{tvd, Distribution, ShotResult};
