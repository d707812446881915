//! Simulation of a three-wave-mixing Josephson traveling-wave parametric
//! amplifier made of an rf-SQUID ladder with periodic capacitance loadings.
//!
//! * [`physics`]: bias point and closed-form device relations.
//! * [`tmm`]: linear transfer-matrix analysis (band structure, mismatch, S-parameters).
//! * [`transient`]: nonlinear time-domain solver of the full ladder.
//! * [`spectral`]: DFT, tone extraction, gain and growth fits.
//! * [`scenarios`]: configs, batch runners and CSV/JSON artifacts.

pub mod error;
pub mod physics;
pub mod scenarios;
pub mod spectral;
pub mod tmm;
pub mod transient;
pub mod units;

pub use error::{Error, Result};
pub use physics::{BiasPoint, DerivedScales, LineSpec, LoadingProfile, SquidParams};
pub use tmm::{DispersionResult, LinearLine, MismatchCurve, SParameterSet, TransferMatrix};
pub use units::PHI0;
