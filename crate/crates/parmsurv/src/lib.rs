//! Flexible parametric survival regression.
//!
//! Fits survival models from the generalized gamma and generalized F
//! families (and their special cases: exponential, Weibull, gamma,
//! log-normal, log-logistic), the Gompertz distribution, and user-defined
//! distributions given as expressions, by maximum likelihood over right-,
//! left-, and interval-censored data. Any distribution parameter, not just
//! the location, can carry covariates through its link. Case weights,
//! stratified fitting with sample-size-weighted pooling, robust (sandwich)
//! covariance, and long-term survival/hazard extrapolation with pointwise
//! confidence bands are supported.

pub mod cli;
pub mod data;
pub mod design;
pub mod dist;
pub mod error;
pub mod expr;
pub mod fit;
pub mod inference;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod numdiff;
pub mod predict;
pub mod report;
pub mod special;
pub mod svg;

pub use data::{CensorKind, Observation, ObservationSet, ResponseBounds};
pub use dist::{Constraint, DistributionId, Family};
pub use error::{Error, Result};
pub use fit::{Algorithm, FitOptions, FitResult};
pub use likelihood::{LikelihoodContext, ThetaVector};
pub use model::{ModelSpec, ParameterLayout};
