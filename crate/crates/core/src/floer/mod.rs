//! Discretized Floer strips: the perturbed Cauchy–Riemann equation
//! `∂_s ũ + i ∂_t ũ + φ_T(s) ∇G_t(ũ) = 0` with the twist condition
//! `ũ(·, 1) = φ⁰₁(ũ(·, 0))`, its functionals, and continuation in `T`.

mod continuation;
mod cutoff;
mod solver;
mod strip;

pub use continuation::{continue_in_t, resume, ContinuationOptions, ContinuationState, StepRecord};
pub use cutoff::Cutoff;
pub use solver::{solve_strip, SolveReport, SolverOptions};
pub use strip::{
    action_profile, best_slice, diagnostics, ds_energy, energy, energy_identity, gauge_component,
    normal_split, residual, slice_defect, NormalSplit, Residual, StripDiagnostics, StripGrid,
};
