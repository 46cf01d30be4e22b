//! Population dynamics: thermal initialization, exact pulse propagation of
//! the rate equations, and multi-cycle pulse sequences.
//!
//! A pulse applies exp(R t) to the population vector, where R is the
//! rate-equation generator for that pulse's detuning. The exponential is
//! evaluated by uniformization: exp(R t) = e^{-L t} sum_j (L t)^j / j! S^j
//! with S = I + R / L column-stochastic for L at least the largest outflow
//! rate. Every term is a convex combination of stochastic-matrix
//! applications, so populations stay nonnegative exactly and the total mass
//! deficit is bounded by the Poisson tail at which the series is cut.

use crate::rates::{PhysicalParams, RateAssembler, RateMatrix, RatesError};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Poisson tail mass at which the uniformization series stops.
const SERIES_TAIL: f64 = 1e-14;
/// Largest uniformized time constant handled in one series; longer pulses
/// are split into equal segments.
const MAX_SEGMENT: f64 = 128.0;
/// Entries counted by the running truncation check at the basis edge.
const TAIL_WINDOW: usize = 10;
/// Edge mass beyond which a run aborts. Recoil diffusion maintains a thin
/// quasi-stationary tail above the cooled bulk (decay length ~ sigma^2 / 2
/// drift, hundreds of states when the recoil spans many quanta), so the
/// abort level is set where edge mass could actually bias reported
/// observables rather than at the tail's intrinsic scale.
const TAIL_LIMIT: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("population vector invalid: {0}")]
    BadPopulation(String),
    #[error("n_max = {n_max} too small to hold a thermal state with nbar = {nbar} (truncated mean off by {mean_error:.3e})")]
    ThermalTruncation { nbar: f64, n_max: usize, mean_error: f64 },
    #[error("dimension mismatch: population has {population}, generator has {generator}")]
    DimensionMismatch { population: usize, generator: usize },
    #[error("uniformization series failed to converge within {max_terms} terms")]
    SeriesDiverged { max_terms: usize },
    #[error("basis-edge population {mass:.3e} exceeds 1e-5 at cycle {cycle}, pulse {pulse}; increase n_max")]
    TailMass { cycle: usize, pulse: usize, mass: f64 },
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error("invalid pulse: {0}")]
    BadPulse(String),
    #[error("invalid cycle: {0}")]
    BadCycle(String),
}

/// Probabilities over the truncated Fock basis 0..len-1.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    p: Vec<f64>,
}

impl PopulationVector {
    /// Validate and adopt an explicit distribution. Entries must be finite
    /// and nonnegative with total within 1e-9 of one; the total is then
    /// renormalized away.
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self, DynamicsError> {
        if p.is_empty() {
            return Err(DynamicsError::BadPopulation("empty vector".into()));
        }
        for (n, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(DynamicsError::BadPopulation(format!("entry {n} is {v}")));
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DynamicsError::BadPopulation(format!(
                "total probability {total} not within 1e-9 of 1"
            )));
        }
        let mut out = Self { p };
        out.renormalize();
        Ok(out)
    }

    fn renormalize(&mut self) {
        let total: f64 = self.p.iter().sum();
        self.p.iter_mut().for_each(|v| *v /= total);
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn ground_population(&self) -> f64 {
        self.p[0]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn mean_occupation(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, &v)| n as f64 * v).sum()
    }

    /// Mass sitting in the last [`TAIL_WINDOW`] basis entries.
    pub fn edge_mass(&self) -> f64 {
        let start = self.len().saturating_sub(TAIL_WINDOW);
        self.p[start..].iter().sum()
    }

    /// Smallest s such that the mass above s is below `tol`.
    pub fn support_at_tail(&self, tol: f64) -> usize {
        let mut tail = 0.0;
        for n in (0..self.len()).rev() {
            tail += self.p[n];
            if tail >= tol {
                return n;
            }
        }
        0
    }
}

/// Geometric (thermal) distribution with mean occupation `nbar`, truncated
/// to 0..=n_max and renormalized. Rejected when the truncation moves the
/// mean by more than 1e-6.
pub fn thermal_populations(nbar: f64, n_max: usize) -> Result<PopulationVector, DynamicsError> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(DynamicsError::BadPopulation(format!("nbar must be >= 0, got {nbar}")));
    }
    let q = nbar / (1.0 + nbar);
    let mut p = Vec::with_capacity(n_max + 1);
    let mut w = 1.0;
    for _ in 0..=n_max {
        p.push(w);
        w *= q;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    let vec = PopulationVector { p };
    let mean_error = (vec.mean_occupation() - nbar).abs();
    if mean_error > 1e-6 {
        return Err(DynamicsError::ThermalTruncation { nbar, n_max, mean_error });
    }
    Ok(vec)
}

/// One rectangular laser pulse: detuning in trap-frequency units, duration
/// in units of Gamma / Omega^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub delta: f64,
    pub duration: f64,
}

impl Pulse {
    pub fn new(delta: f64, duration: f64) -> Result<Self, DynamicsError> {
        if !delta.is_finite() {
            return Err(DynamicsError::BadPulse(format!("detuning {delta} not finite")));
        }
        if !duration.is_finite() || duration <= 0.0 {
            return Err(DynamicsError::BadPulse(format!("duration {duration} must be > 0")));
        }
        Ok(Self { delta, duration })
    }
}

/// An ordered pulse list applied `n_cycles` times.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub pulses: Vec<Pulse>,
    pub n_cycles: usize,
}

impl Cycle {
    pub fn new(pulses: Vec<Pulse>, n_cycles: usize) -> Result<Self, DynamicsError> {
        if pulses.is_empty() {
            return Err(DynamicsError::BadCycle("cycle has no pulses".into()));
        }
        if n_cycles == 0 {
            return Err(DynamicsError::BadCycle("n_cycles must be >= 1".into()));
        }
        Ok(Self { pulses, n_cycles })
    }

    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum::<f64>() * self.n_cycles as f64
    }
}

/// Apply exp(R * duration) to a population vector by uniformization.
/// Duration zero or an all-zero generator return the input unchanged.
pub fn evolve_pulse(
    p: &PopulationVector,
    r: &RateMatrix,
    duration: f64,
) -> Result<PopulationVector, DynamicsError> {
    if p.len() != r.dim() {
        return Err(DynamicsError::DimensionMismatch { population: p.len(), generator: r.dim() });
    }
    if !duration.is_finite() || duration < 0.0 {
        return Err(DynamicsError::BadPulse(format!("duration {duration} must be >= 0")));
    }
    let lambda = r.max_outflow();
    if lambda * duration == 0.0 {
        return Ok(p.clone());
    }
    let dim = r.dim();
    // Column-stochastic S = I + R / lambda, column-major so the matvec runs
    // as contiguous axpy passes.
    let entries = r.entries();
    let mut s = vec![0.0; dim * dim];
    for m in 0..dim {
        let col = &mut s[m * dim..(m + 1) * dim];
        for (n, slot) in col.iter_mut().enumerate() {
            *slot = entries[n * dim + m] / lambda;
        }
        col[m] += 1.0;
    }

    let segments = (lambda * duration / MAX_SEGMENT).ceil().max(1.0);
    let a = lambda * duration / segments;
    let max_terms = (a + 60.0 * (a + 1.0).sqrt() + 60.0) as usize;

    let mut state = p.p.clone();
    let mut current = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut acc = vec![0.0; dim];
    for _ in 0..segments as usize {
        let mut weight = (-a).exp();
        let mut cumulative = weight;
        current.copy_from_slice(&state);
        for (dst, src) in acc.iter_mut().zip(&current) {
            *dst = weight * src;
        }
        let mut converged = false;
        for j in 1..=max_terms {
            next.iter_mut().for_each(|v| *v = 0.0);
            for m in 0..dim {
                let x = current[m];
                if x == 0.0 {
                    continue;
                }
                let col = &s[m * dim..(m + 1) * dim];
                for (dst, &c) in next.iter_mut().zip(col) {
                    *dst += x * c;
                }
            }
            std::mem::swap(&mut current, &mut next);
            weight *= a / j as f64;
            cumulative += weight;
            for (dst, src) in acc.iter_mut().zip(&current) {
                *dst += weight * src;
            }
            if cumulative >= 1.0 - SERIES_TAIL && j as f64 >= a {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(DynamicsError::SeriesDiverged { max_terms });
        }
        state.copy_from_slice(&acc);
    }
    Ok(PopulationVector { p: state })
}

/// A validity condition of the rate-equation model that the supplied
/// parameters violate, with the measured ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidityWarning {
    /// Omega << Gamma is required for adiabatic elimination.
    WeakDrive { omega_over_linewidth: f64 },
    /// nu >> Omega^2 / Gamma separates pumping from the trap motion.
    SlowPumping { pump_rate_over_nu: f64 },
    /// Gamma < nu resolves the motional sidebands.
    StrongConfinement { linewidth_over_nu: f64 },
    /// gamma < nu keeps the Lorentzians narrower than the sideband spacing.
    HalfwidthVsTrap { halfwidth_over_nu: f64 },
}

impl fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityWarning::WeakDrive { omega_over_linewidth } => write!(
                f,
                "weak-drive condition Omega << Gamma violated: Omega/Gamma = {omega_over_linewidth:.3}"
            ),
            ValidityWarning::SlowPumping { pump_rate_over_nu } => write!(
                f,
                "rate hierarchy nu >> Omega^2/Gamma violated: (Omega^2/Gamma)/nu = {pump_rate_over_nu:.3}"
            ),
            ValidityWarning::StrongConfinement { linewidth_over_nu } => write!(
                f,
                "strong confinement Gamma < nu violated: Gamma/nu = {linewidth_over_nu:.3}"
            ),
            ValidityWarning::HalfwidthVsTrap { halfwidth_over_nu } => write!(
                f,
                "half-width gamma < nu violated: gamma/nu = {halfwidth_over_nu:.3}"
            ),
        }
    }
}

/// Check the rate-equation validity conditions; one warning per violated
/// inequality, never fatal. "Much less than" is read as a factor of ten.
pub fn validity_check(params: &PhysicalParams) -> Vec<ValidityWarning> {
    let mut warnings = Vec::new();
    let drive = params.rabi / params.linewidth;
    if drive > 0.1 {
        warnings.push(ValidityWarning::WeakDrive { omega_over_linewidth: drive });
    }
    let pump = params.rabi * params.rabi / params.linewidth;
    if pump > 0.1 {
        warnings.push(ValidityWarning::SlowPumping { pump_rate_over_nu: pump });
    }
    if params.linewidth >= 1.0 {
        warnings.push(ValidityWarning::StrongConfinement { linewidth_over_nu: params.linewidth });
    }
    if params.halfwidth >= 1.0 {
        warnings.push(ValidityWarning::HalfwidthVsTrap { halfwidth_over_nu: params.halfwidth });
    }
    warnings
}

/// When to record population snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotCadence {
    #[default]
    PerCycle,
    PerPulse,
}

/// Run-level metadata carried by every trace.
#[derive(Debug, Clone)]
pub struct TraceMeta {
    pub params: PhysicalParams,
    pub n_max: usize,
    pub quad_order: usize,
    pub warnings: Vec<ValidityWarning>,
}

/// Result of a pulse-sequence run: the initial state plus one snapshot per
/// cycle (or per pulse), the ground-state history after every pulse, and the
/// worst conservation diagnostics seen anywhere in the run.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub snapshots: Vec<PopulationVector>,
    pub p0_per_pulse: Vec<f64>,
    pub max_norm_drift: f64,
    pub max_edge_mass: f64,
    pub min_entry: f64,
    pub meta: TraceMeta,
}

impl SimulationTrace {
    pub fn final_population(&self) -> &PopulationVector {
        self.snapshots.last().expect("trace holds at least the initial snapshot")
    }

    pub fn final_ground_population(&self) -> f64 {
        self.final_population().ground_population()
    }
}

/// Drives pulse sequences for one parameter set, building each distinct
/// detuning's generator once. A simulator is single-threaded; concurrent
/// parameter scans should each own one.
pub struct Simulator {
    params: PhysicalParams,
    n_max: usize,
    quad_order: usize,
    cadence: SnapshotCadence,
    assembler: Option<RateAssembler>,
    cache: HashMap<u64, Arc<RateMatrix>>,
}

impl Simulator {
    pub fn new(params: PhysicalParams, n_max: usize, quad_order: usize) -> Self {
        Self {
            params,
            n_max,
            quad_order,
            cadence: SnapshotCadence::default(),
            assembler: None,
            cache: HashMap::new(),
        }
    }

    pub fn with_cadence(mut self, cadence: SnapshotCadence) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// The generator for one detuning, built on first use. Displacement
    /// tables are shared across detunings through one assembler.
    pub fn rate_matrix(&mut self, delta: f64) -> Result<Arc<RateMatrix>, DynamicsError> {
        if let Some(r) = self.cache.get(&delta.to_bits()) {
            return Ok(Arc::clone(r));
        }
        if self.assembler.is_none() {
            self.assembler = Some(RateAssembler::new(self.params, self.n_max, self.quad_order)?);
        }
        let assembler = self.assembler.as_mut().expect("assembler just created");
        let r = Arc::new(assembler.matrix(delta)?);
        self.cache.insert(delta.to_bits(), Arc::clone(&r));
        Ok(r)
    }

    /// Apply `cycle.n_cycles` repetitions of the pulse list to `initial`.
    ///
    /// After every pulse the total-probability drift is recorded, the vector
    /// is renormalized, and the basis-edge mass is checked against 1e-5.
    pub fn run(
        &mut self,
        initial: &PopulationVector,
        cycle: &Cycle,
    ) -> Result<SimulationTrace, DynamicsError> {
        if initial.len() != self.n_max + 1 {
            return Err(DynamicsError::DimensionMismatch {
                population: initial.len(),
                generator: self.n_max + 1,
            });
        }
        if cycle.pulses.is_empty() || cycle.n_cycles == 0 {
            return Err(DynamicsError::BadCycle("empty cycle".into()));
        }
        let matrices: Vec<Arc<RateMatrix>> = cycle
            .pulses
            .iter()
            .map(|p| self.rate_matrix(p.delta))
            .collect::<Result<_, _>>()?;

        let mut state = initial.clone();
        let mut snapshots = vec![state.clone()];
        let mut p0_per_pulse = Vec::with_capacity(cycle.n_cycles * cycle.pulses.len());
        let mut max_norm_drift = 0.0f64;
        let mut max_edge_mass = 0.0f64;
        let mut min_entry = state.p.iter().cloned().fold(f64::INFINITY, f64::min);

        for cycle_idx in 0..cycle.n_cycles {
            for (pulse_idx, (pulse, matrix)) in
                cycle.pulses.iter().zip(&matrices).enumerate()
            {
                state = evolve_pulse(&state, matrix, pulse.duration)?;
                min_entry =
                    min_entry.min(state.p.iter().cloned().fold(f64::INFINITY, f64::min));
                max_norm_drift = max_norm_drift.max((state.total() - 1.0).abs());
                state.renormalize();
                let edge = state.edge_mass();
                max_edge_mass = max_edge_mass.max(edge);
                if edge > TAIL_LIMIT {
                    return Err(DynamicsError::TailMass {
                        cycle: cycle_idx,
                        pulse: pulse_idx,
                        mass: edge,
                    });
                }
                p0_per_pulse.push(state.ground_population());
                if self.cadence == SnapshotCadence::PerPulse {
                    snapshots.push(state.clone());
                }
            }
            if self.cadence == SnapshotCadence::PerCycle {
                snapshots.push(state.clone());
            }
        }
        Ok(SimulationTrace {
            snapshots,
            p0_per_pulse,
            max_norm_drift,
            max_edge_mass,
            min_entry,
            meta: TraceMeta {
                params: self.params,
                n_max: self.n_max,
                quad_order: self.quad_order,
                warnings: validity_check(&self.params),
            },
        })
    }
}

/// One-shot convenience around [`Simulator`].
pub fn run_sequence(
    initial: &PopulationVector,
    cycle: &Cycle,
    params: &PhysicalParams,
    n_max: usize,
    quad_order: usize,
) -> Result<SimulationTrace, DynamicsError> {
    Simulator::new(*params, n_max, quad_order).run(initial, cycle)
}
