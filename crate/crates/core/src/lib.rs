//! Registration-based template tracking built from three interchangeable
//! parts: an appearance model (how patches are compared), a state-space model
//! (how the patch may move) and a search method (how the best warp is found).
//!
//! - [`image`]: grayscale frames, bilinear sampling, smoothing and sampling grids.
//! - [`ssm`]: translation through homography warps, SL(3) and corner parameterizations.
//! - [`am`]: SSD, NCC, ZNCC, SCV, RSCV, SSIM and SPSS with analytic derivatives.
//! - [`sm`]: Lucas-Kanade variants, ESM, nearest neighbour, particle filter,
//!   RANSAC and their composites.
//! - [`eval`]: alignment error, success-rate curves and the benchmark protocols.
//! - [`pipeline`]: sequence ingestion, synthetic sequences, configuration and the CLI.

pub mod am;
pub mod error;
pub mod eval;
pub mod image;
pub mod pipeline;
pub mod sm;
pub mod ssm;

pub use error::{Error, Result};
