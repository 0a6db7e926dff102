//! Survival probabilities of metastable states in scaling potentials
//! `V(x,t) = V̄(x/L(t))/L(t)²` with `L(t) = L₀ + v t`.
//!
//! The crate maps the moving problem onto a static one, evaluates closed-form
//! resonance parameters for a delta well and a square barrier, extracts them
//! numerically for arbitrary potentials, and checks everything against a
//! direct lab-frame time evolution.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod scaling_frame;
pub mod scattering;
pub mod transfer;
pub mod units;

pub use analytic::{general_gamma, BarrierModel, DeltaModel, Provenance, Resonance, SurvivalCurve};
pub use error::{Checked, Error, RegimeWarning, Result};
pub use scaling_frame::{
    lift_evolved_onto, lift_solution, superpose, unlift_solution, LabWaveSample,
    RescaledWaveSample, ScaleLaw,
};
pub use units::PhysicalConstants;
