//! Rate-equation toolkit for ground-state cooling of a single trapped atom
//! when the photon recoil spans many trap quanta.
//!
//! The crate models the motional populations P_n of a harmonic trap driven by
//! sequences of detuned laser pulses. Transition rates between Fock levels
//! come from Franck-Condon amplitudes weighted by a Lorentzian over the
//! intermediate excited level and averaged over the spontaneous-emission
//! direction; populations evolve through the exact exponential of the
//! resulting generator. On top of that sit the pulse-protocol heuristics
//! (confinement pulses near the recoil sideband, blue-detuned emptying
//! pulses) and a deterministic coordinate-descent search over pulse detunings
//! and durations.
//!
//! Units: the trap frequency sets the frequency scale (detunings and
//! linewidths are in units of nu), rates are in units of Omega^2 / Gamma, and
//! pulse durations in units of Gamma / Omega^2, so rate x duration is
//! dimensionless.

pub mod dynamics;
pub mod fock;
pub mod protocol;
pub mod quad;
pub mod rates;

pub use dynamics::{
    evolve_pulse, run_sequence, thermal_populations, validity_check, Cycle, DynamicsError,
    PopulationVector, Pulse, SimulationTrace, Simulator, SnapshotCadence, TraceMeta,
    ValidityWarning,
};
pub use fock::{
    displacement_element, displacement_row, oracle_displacement_matrix, required_padding,
    DisplacementAmplitude, DisplacementMatrix, FockError, KickStrength,
};
pub use protocol::{
    build_cycle, confining_detunings, eta_hat_sq, fig2_durations, optimize_sequence,
    select_blue_detunings, BlueSelection, EvaluationRecord, OptimizationOutcome,
    OptimizationProblem, ProtocolError, PulseBounds, SchemeId,
};
pub use rates::{
    auto_n_max, auto_quad_order, build_rate_matrix, emptying_rate, emptying_rate_resonant,
    rate_nm, AngularDistribution, PhysicalParams, RateAssembler, RateMatrix, RatesError,
    ResonantSupport,
};
