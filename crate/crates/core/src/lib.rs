//! Non-parametric 2D image registration with a Gaussian-curvature
//! regularizer solved by an augmented Lagrangian splitting, plus linear
//! curvature, mean curvature and demons baselines.
//!
//! ```no_run
//! use gcreg::io::{make_fixture, FixtureKind, FixtureParams};
//! use gcreg::solver::{register_gc, RegistrationConfig};
//!
//! let fx = make_fixture(FixtureKind::GaussianShift, 64, &FixtureParams::default())?;
//! let res = register_gc(&fx.template, &fx.reference, &RegistrationConfig::default())?;
//! println!("epsilon {:.4}  min det J {:.4}", res.epsilon(), res.min_jac());
//! # Ok::<(), gcreg::Error>(())
//! ```

mod error;

pub mod cli;
pub mod curvature;
pub mod field;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod similarity;
pub mod solver;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField2};
pub use metrics::QualityReport;
pub use solver::RegistrationResult;
