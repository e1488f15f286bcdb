//! Kernel ridge regression, kernel gradient flow and kernel gradient descent
//! with a decreasing bandwidth, plus the tools to select hyperparameters,
//! check prediction bounds and compare estimators.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases
//! at the bottom fix it to `f64`.
//!
//! ```
//! use kgd_core::{kgd_decreasing_bandwidth, Dataset64, KernelFamily, KgdConfig64, Prior, Synthetic};
//!
//! let data: Dataset64 = Synthetic::LinearSine.train_test(0.2, 5, 7)?;
//! let traj = kgd_decreasing_bandwidth(&data, KernelFamily::Gaussian, &KgdConfig64::default(), &Prior::zero())?;
//! println!("{:?} after {} steps, final sigma {}", traj.stop, traj.len(), traj.sigmas.last().unwrap());
//! # Ok::<(), kgd_core::KgdError>(())
//! ```

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod error;
pub mod kernels;
pub mod kgd;
pub mod regression;
pub mod scalar;
pub mod selection;
pub mod spectral;
pub mod stats;

pub use data::{derive_seed, Dataset, SeededStream, Synthetic};
pub use error::{KgdError, Result};
pub use kernels::{KernelFamily, KernelSpec, Metric};
pub use kgd::{kgd_constant, kgd_decreasing_bandwidth, KgdConfig, StopReason, Trajectory};
pub use regression::{kgf_fit, krr_fit, Estimator, FitResult, KernelSystem, Prior};
pub use scalar::Real;
pub use selection::{gcv_select, mml_select, HyperGrid, MmlOptions, SelectionMethod, SelectionResult};
pub use spectral::SpectralDecomposition;
pub use stats::{wilcoxon_signed_rank, Alternative, WilcoxonResult};

pub type Dataset64 = Dataset<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type Metric64 = Metric<f64>;
pub type KgdConfig64 = KgdConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Prior64 = Prior<f64>;
pub type FitResult64 = FitResult<f64>;
pub type KernelSystem64 = KernelSystem<f64>;
pub type SpectralDecomposition64 = SpectralDecomposition<f64>;
pub type SelectionResult64 = SelectionResult<f64>;
