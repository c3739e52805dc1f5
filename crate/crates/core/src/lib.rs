//! Structured prediction through a least-squares surrogate.
//!
//! Learning reduces to one kernel ridge regression: for a query `x` the
//! fitted model returns weights `alpha(x) = (K + n*lambda*I)^-1 K_x`.
//! Prediction then minimizes the weighted loss `sum_i alpha_i(x) * loss(y, y_i)`
//! over the output space, using a decoder suited to that space:
//!
//! * exhaustive scan over a finite candidate list,
//! * greedy feedback-arc-set ordering for rankings under the rank loss,
//! * grid plus golden-section search for scalar (robust) regression,
//! * a closed form for histograms under the squared Hellinger distance.
//!
//! The [`theory`] module enumerates small finite problems exactly and checks
//! Fisher consistency, the comparison inequality and related identities
//! numerically. [`harness`] holds the synthetic data generators and
//! experiment runners, and [`cli`] the command-line front end.

pub mod cli;
pub mod decoders;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod losses;
pub mod model_selection;
pub mod surrogate;
pub mod theory;

pub use decoders::{predict, DecoderSpec};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, SpdFactor, SymMatrix};
pub use losses::{FiniteLossEmbedding, LossFunction, Output, Ranking, RatingProfile};
pub use model_selection::{cross_validate, kfold_split, CvPlan, CvReport};
pub use surrogate::{AlphaWeights, TrainedSurrogate};
