//! Weighted poverty indices, their asymptotic theory, and inference on the
//! gap of decomposability across population strata.
//!
//! A weighted index such as Sen's is not additive over subgroups: the pooled
//! index differs from the share-weighted average of subgroup indices. This
//! crate estimates that gap from grouped survey data, attaches plug-in
//! variances and confidence intervals, and provides a Monte Carlo harness to
//! check the large-sample approximation.
//!
//! ```
//! use povgap::{decomposition::gap, indices::Measure, survey_data::GroupedSample};
//!
//! let sample = GroupedSample::from_labels(vec![1.0, 2.0, 3.0, 4.0, 5.0], &[1, 2, 2, 1, 2])?;
//! let g = gap(&sample, 3.5, Measure::Sen)?;
//! assert!((g.gd - 0.038095).abs() < 1e-6);
//! # Ok::<(), povgap::Error>(())
//! ```

pub mod asymptotics;
pub mod decomposition;
pub mod distribution;
pub mod error;
pub mod indices;
pub mod montecarlo;
pub mod normal;
pub mod quadrature;
pub mod survey_data;

pub use error::{Error, Result};
pub use indices::{Measure, MeasureSpec};
pub use survey_data::{EmpiricalDist, GroupedSample};
