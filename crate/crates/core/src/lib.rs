//! Training binarized neural networks whose weights live in unreliable,
//! low-energy memory, with per-layer fault rates optimized jointly with the
//! weights.
//!
//! - [`faultmem`]: binary symmetric channel reads and the energy model.
//! - [`net`]: binary-connect networks, straight-through gradients, inner SGD.
//! - [`lanmax`]: the outer fault-rate optimizer and the joint training loop.
//! - [`eval`]: Monte-Carlo accuracy, uniform-noise sweeps, layer sensitivity.
//! - [`harness`]: configuration, datasets, experiment drivers, CSV and plots.

pub mod data;
pub mod error;
pub mod eval;
pub mod faultmem;
pub mod harness;
pub mod lanmax;
pub mod net;

pub use data::{Dataset, Split};
pub use error::{Error, Result};
pub use eval::{mc_accuracy, AccuracyEstimate, McConfig};
pub use faultmem::{network_energy, EnergyModel, FaultRate, NoiseVector};
pub use lanmax::{train_fixed_noise, train_lanmax, OuterConfig, TrainOutcome};
pub use net::{Architecture, BinaryNetwork, InnerOptConfig, InputShape, LayerSpec};
