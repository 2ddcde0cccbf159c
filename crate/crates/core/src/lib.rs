//! Bounded zero-noise extrapolation: model families with a physically
//! constrained zero-noise value, a box-constrained least-squares engine, a
//! synthetic benchmark generator and the paired statistics used to compare
//! bounded against unbounded fits.

pub mod cli;
pub mod engine;
pub mod io;
pub mod models;
pub mod optimizer;
pub mod stats;
pub mod synth;

pub use engine::{fit, fit_batch, fit_pair, FitResult, FitStatus, ScaleSeries};
pub use models::{Asymptote, Family, ModelSpec, ParamBox, ParamVector, Sign};
pub use optimizer::{minimize_box, SolveOutcome, SolveSettings, SolveStatus};
