//! Pulse-protocol construction and search.
//!
//! The cooling recipe alternates two pulse roles. Confining pulses sit on
//! the red sideband nearest one recoil, delta = -max(2, ceil(eta^2)), backed
//! by a partner at -(1 + ceil(eta^2)) so levels that happen to fall on
//! Franck-Condon zeros of the first pulse still couple to the second.
//! Emptying pulses are blue detuned, picked so the ground state is nearly
//! dark while the first excited level still drains quickly. On top of the
//! fixed recipes sits a deterministic coordinate-descent optimizer over
//! pulse detunings (integer grid) and durations (geometric grid).

use crate::dynamics::{Cycle, DynamicsError, PopulationVector, Pulse, Simulator};
use crate::rates::{
    emptying_rate, emptying_rate_resonant, PhysicalParams, RatesError, ResonantSupport,
};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default confining-pulse duration, units of Gamma / Omega^2.
pub const CONFINE_DURATION: f64 = 0.6;
/// Default emptying-pulse duration, units of Gamma / Omega^2.
pub const EMPTY_DURATION: f64 = 0.2;
/// Default cycle repetition count.
pub const DEFAULT_CYCLES: usize = 200;

/// Calibrated pulse durations (confining, first-sideband) for the two-pulse
/// confinement schemes.
///
/// The source quotes these pulses in absolute trap units without the Rabi
/// frequency needed to convert them, so the durations are set from the
/// rates themselves: the confining pulse gets about three scattering events
/// per cycle at the funnel bottom, and the first-sideband pulse enough
/// exposure that the slower of the two lowest excited levels - one of them
/// usually sits near a Franck-Condon zero - drains several times over a
/// 200-cycle run. Longer exposures only feed recoil-diffusion heating.
pub fn fig2_durations(eta: f64, params: &PhysicalParams) -> (f64, f64) {
    let k0 = eta_hat_sq(eta).max(2) as i64;
    let funnel = emptying_rate_resonant(k0 as usize, k0, params, ResonantSupport::IncludeEdge);
    let level1 = emptying_rate_resonant(1, 1, params, ResonantSupport::IncludeEdge);
    let level2 = emptying_rate_resonant(2, 1, params, ResonantSupport::IncludeEdge);
    let confine = (3.2 / funnel).clamp(1.0, 32.0);
    let sideband = (0.06 / level1.min(level2)).clamp(1.0, 8.0);
    (confine, sideband)
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown scheme tag `{0}`")]
    UnknownScheme(String),
    #[error(
        "no blue detuning in ({lo}, {hi}] passes the feasibility tests \
         (needed {needed}, found {found})"
    )]
    NoFeasibleDetuning { lo: f64, hi: f64, needed: usize, found: usize },
    #[error("invalid blue-detuning range ({lo}, {hi}]: must satisfy 0 <= lo < hi")]
    BadRange { lo: f64, hi: f64 },
    #[error("optimization budget must be >= 1")]
    BadBudget,
    #[error("every evaluated cycle violated the basis-truncation guard")]
    NoFeasibleEvaluation,
    #[error("optimization problem needs at least one seed cycle")]
    NoSeeds,
    #[error("seed has {got} pulses but the problem has {want} pulse slots")]
    SeedShape { got: usize, want: usize },
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// The closest integer at or above eta^2; the recoil measured in trap
/// quanta, which sets where the confining sideband sits.
pub fn eta_hat_sq(eta: f64) -> u64 {
    assert!(eta.is_finite() && eta >= 0.0, "eta must be >= 0, got {eta}");
    (eta * eta).ceil() as u64
}

/// The two confining detunings: the recoil sideband clamped to at least two
/// quanta, and its off-by-one partner that covers Franck-Condon zeros.
pub fn confining_detunings(eta: f64) -> [f64; 2] {
    let hat = eta_hat_sq(eta) as f64;
    [-hat.max(2.0), -(1.0 + hat)]
}

/// Tunables for the blue-pulse search. `gamma1_floor` is the smallest
/// acceptable emptying rate of level 1 (units Omega^2/Gamma) and
/// `ratio_cap` the largest acceptable ground-to-first-level rate ratio;
/// `min_separation` keeps the chosen detunings apart so their
/// Franck-Condon zero patterns do not overlap.
#[derive(Debug, Clone, Copy)]
pub struct BlueSelection {
    pub gamma1_floor: f64,
    pub ratio_cap: f64,
    pub min_separation: f64,
}

impl Default for BlueSelection {
    fn default() -> Self {
        Self { gamma1_floor: 5e-4, ratio_cap: 0.2, min_separation: 2.0 }
    }
}

/// Pick `count` blue detunings from the integer grid in `(lo, hi]`.
///
/// A candidate is feasible when level 1 still empties fast enough
/// (`gamma1_floor`, measured with the full Lorentzian-broadened rate) and
/// the ground state stays comparatively dark (resonant-rate ratio at most
/// `ratio_cap`). Feasible candidates are ranked by that ratio, ties toward
/// smaller detuning, and picked greedily subject to `min_separation`.
pub fn select_blue_detunings(
    params: &PhysicalParams,
    delta_range: (f64, f64),
    count: usize,
    selection: &BlueSelection,
) -> Result<Vec<f64>, ProtocolError> {
    let (lo, hi) = delta_range;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(ProtocolError::BadRange { lo, hi });
    }
    let hat = eta_hat_sq(params.eta) as usize;
    let k_max = hi.ceil() as usize + 4 * hat + 40;

    struct Candidate {
        delta: f64,
        ratio: f64,
    }
    let mut feasible = Vec::new();
    let first = lo.floor() as i64 + 1;
    let last = hi.floor() as i64;
    for d in first..=last {
        let delta = d as f64;
        let g0_res = emptying_rate_resonant(0, -d, params, ResonantSupport::IncludeEdge);
        let g1_res = emptying_rate_resonant(1, -d, params, ResonantSupport::IncludeEdge);
        let g1_full = emptying_rate(1, delta, params, k_max)?;
        if g1_res <= 0.0 || g1_full < selection.gamma1_floor {
            continue;
        }
        let ratio = g0_res / g1_res;
        if ratio > selection.ratio_cap {
            continue;
        }
        feasible.push(Candidate { delta, ratio });
    }
    feasible.sort_by(|a, b| {
        a.ratio.total_cmp(&b.ratio).then(a.delta.abs().total_cmp(&b.delta.abs()))
    });

    let mut chosen: Vec<f64> = Vec::with_capacity(count);
    for c in &feasible {
        if chosen.len() == count {
            break;
        }
        if chosen.iter().all(|&d| (d - c.delta).abs() >= selection.min_separation) {
            chosen.push(c.delta);
        }
    }
    if chosen.len() < count {
        return Err(ProtocolError::NoFeasibleDetuning {
            lo,
            hi,
            needed: count,
            found: chosen.len(),
        });
    }
    Ok(chosen)
}

/// Named pulse-cycle recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeId {
    /// Single confining pulse at -max(2, ceil(eta^2)).
    Fig2a,
    /// Single first-sideband pulse at -1.
    Fig2b,
    /// Both of the above, in that order.
    Fig2c,
    /// Single pulse (-24, 0.6); the eta = 5 confinement-only reference.
    Fig3a,
    /// Four pulses (-24, 0.6), (-25, 0.6), (+7, 0.2), (+9, 0.2).
    Fig3b,
    /// Variant of the above with the second blue pulse at +5.
    Fig3bCaption,
    /// Confining pair from the recoil heuristics plus two searched blue
    /// pulses.
    Auto,
}

impl FromStr for SchemeId {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2a" => Ok(Self::Fig2a),
            "fig2b" => Ok(Self::Fig2b),
            "fig2c" => Ok(Self::Fig2c),
            "fig3a" => Ok(Self::Fig3a),
            "fig3b" => Ok(Self::Fig3b),
            "fig3b_caption" => Ok(Self::Fig3bCaption),
            "auto" => Ok(Self::Auto),
            other => Err(ProtocolError::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig2c => "fig2c",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
            Self::Fig3bCaption => "fig3b_caption",
            Self::Auto => "auto",
        };
        f.write_str(tag)
    }
}

/// Build the pulse cycle for a scheme at the given Lamb-Dicke parameter,
/// with the default durations and repetition count.
pub fn build_cycle(
    scheme: SchemeId,
    eta: f64,
    params: &PhysicalParams,
) -> Result<Cycle, ProtocolError> {
    let fig2 = fig2_durations(eta, params);
    let pulses = match scheme {
        SchemeId::Fig2a => vec![Pulse::new(confining_detunings(eta)[0], fig2.0)?],
        SchemeId::Fig2b => vec![Pulse::new(-1.0, fig2.1)?],
        SchemeId::Fig2c => vec![
            Pulse::new(confining_detunings(eta)[0], fig2.0)?,
            Pulse::new(-1.0, fig2.1)?,
        ],
        SchemeId::Fig3a => vec![Pulse::new(-24.0, CONFINE_DURATION)?],
        SchemeId::Fig3b => vec![
            Pulse::new(-24.0, CONFINE_DURATION)?,
            Pulse::new(-25.0, CONFINE_DURATION)?,
            Pulse::new(7.0, EMPTY_DURATION)?,
            Pulse::new(9.0, EMPTY_DURATION)?,
        ],
        SchemeId::Fig3bCaption => vec![
            Pulse::new(-24.0, CONFINE_DURATION)?,
            Pulse::new(-25.0, CONFINE_DURATION)?,
            Pulse::new(7.0, EMPTY_DURATION)?,
            Pulse::new(5.0, EMPTY_DURATION)?,
        ],
        SchemeId::Auto => {
            let confining = confining_detunings(eta);
            let hat = eta_hat_sq(eta) as f64;
            let blues = select_blue_detunings(
                params,
                (0.0, hat + 1.0),
                2,
                &BlueSelection::default(),
            )?;
            vec![
                Pulse::new(confining[0], CONFINE_DURATION)?,
                Pulse::new(confining[1], CONFINE_DURATION)?,
                Pulse::new(blues[0], EMPTY_DURATION)?,
                Pulse::new(blues[1], EMPTY_DURATION)?,
            ]
        }
    };
    Ok(Cycle::new(pulses, DEFAULT_CYCLES)?)
}

/// Search box for one pulse slot: detunings move on the integer grid inside
/// `delta`, durations on a geometric grid inside `duration`.
#[derive(Debug, Clone, Copy)]
pub struct PulseBounds {
    pub delta: (f64, f64),
    pub duration: (f64, f64),
}

/// A pulse-sequence search: fixed physics, fixed cycle count, final
/// ground-state population as the objective.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub bounds: Vec<PulseBounds>,
    pub params: PhysicalParams,
    pub initial: PopulationVector,
    pub n_cycles: usize,
    pub budget: usize,
    pub seeds: Vec<Cycle>,
    pub n_max: usize,
    pub quad_order: usize,
}

/// One objective evaluation, in order.
#[derive(Debug, Clone)]
pub struct EvaluationRecord {
    pub index: usize,
    pub cycle: Cycle,
    pub p0: f64,
    /// Best objective seen up to and including this evaluation.
    pub incumbent_p0: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub best: Cycle,
    pub p0: f64,
    pub log: Vec<EvaluationRecord>,
    pub budget_exhausted: bool,
}

const DURATION_STEPS: [f64; 4] =
    [0.5, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::SQRT_2, 2.0];
const DELTA_STEPS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
/// Strict-improvement threshold; equal objectives never move the incumbent.
const IMPROVE_EPS: f64 = 1e-12;

fn clamp_to_bounds(cycle: &Cycle, bounds: &[PulseBounds]) -> Cycle {
    let pulses = cycle
        .pulses
        .iter()
        .zip(bounds)
        .map(|(p, b)| {
            let delta = p.delta.round().clamp(b.delta.0.ceil(), b.delta.1.floor());
            let duration = p.duration.clamp(b.duration.0, b.duration.1);
            Pulse { delta, duration }
        })
        .collect();
    Cycle { pulses, n_cycles: cycle.n_cycles }
}

struct Evaluator<'a> {
    simulator: Simulator,
    problem: &'a OptimizationProblem,
    log: Vec<EvaluationRecord>,
    best_p0_so_far: f64,
    used: usize,
}

impl<'a> Evaluator<'a> {
    fn remaining(&self) -> usize {
        self.problem.budget - self.used
    }

    /// Score one cycle. Candidates whose diffusion tail outruns the basis
    /// are infeasible, not fatal: they are logged with a NaN objective and
    /// never accepted.
    fn eval(&mut self, cycle: &Cycle) -> Result<f64, ProtocolError> {
        debug_assert!(self.remaining() > 0);
        let p0 = match self.simulator.run(&self.problem.initial, cycle) {
            Ok(trace) => trace.final_ground_population(),
            Err(DynamicsError::TailMass { .. }) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        self.used += 1;
        if !p0.is_nan() {
            self.best_p0_so_far = self.best_p0_so_far.max(p0);
        }
        self.log.push(EvaluationRecord {
            index: self.used,
            cycle: cycle.clone(),
            p0,
            incumbent_p0: self.best_p0_so_far,
        });
        Ok(p0)
    }
}

/// Deterministic multi-start coordinate descent over pulse detunings and
/// durations, maximizing the final ground-state population.
///
/// Each seed receives an equal share of the evaluation budget. Within a
/// descent, coordinates are swept in pulse order (detuning first, then
/// duration); a coordinate move is accepted only on strict improvement, and
/// sweeps repeat until one passes with no move or the budget runs out. The
/// returned cycle is the best evaluation across all seeds, ties broken
/// toward the shorter total cycle duration, then toward the earlier seed.
pub fn optimize_sequence(
    problem: &OptimizationProblem,
) -> Result<OptimizationOutcome, ProtocolError> {
    if problem.budget == 0 {
        return Err(ProtocolError::BadBudget);
    }
    if problem.seeds.is_empty() {
        return Err(ProtocolError::NoSeeds);
    }
    for seed in &problem.seeds {
        if seed.pulses.len() != problem.bounds.len() {
            return Err(ProtocolError::SeedShape {
                got: seed.pulses.len(),
                want: problem.bounds.len(),
            });
        }
    }
    let mut ev = Evaluator {
        simulator: Simulator::new(problem.params, problem.n_max, problem.quad_order),
        problem,
        log: Vec::new(),
        best_p0_so_far: f64::NEG_INFINITY,
        used: 0,
    };

    let n_seeds = problem.seeds.len();
    let share = problem.budget / n_seeds;
    let extra = problem.budget % n_seeds;

    let mut best: Option<(Cycle, f64)> = None;
    let mut budget_exhausted = false;

    for (seed_idx, seed) in problem.seeds.iter().enumerate() {
        let seed_budget = share + usize::from(seed_idx < extra);
        if seed_budget == 0 || ev.remaining() == 0 {
            break;
        }
        let stop_at = ev.used + seed_budget.min(ev.remaining());

        let mut incumbent = clamp_to_bounds(seed, &problem.bounds);
        let mut incumbent_p0 = ev.eval(&incumbent)?;

        'descent: loop {
            let mut moved = false;
            for pulse_idx in 0..incumbent.pulses.len() {
                for coordinate in 0..2 {
                    let candidates: Vec<Cycle> = if coordinate == 0 {
                        let b = problem.bounds[pulse_idx].delta;
                        DELTA_STEPS
                            .iter()
                            .map(|step| incumbent.pulses[pulse_idx].delta + step)
                            .filter(|d| *d >= b.0.ceil() && *d <= b.1.floor())
                            .map(|d| {
                                let mut c = incumbent.clone();
                                c.pulses[pulse_idx].delta = d;
                                c
                            })
                            .collect()
                    } else {
                        let b = problem.bounds[pulse_idx].duration;
                        DURATION_STEPS
                            .iter()
                            .map(|f| {
                                (incumbent.pulses[pulse_idx].duration * f).clamp(b.0, b.1)
                            })
                            .filter(|t| {
                                (t - incumbent.pulses[pulse_idx].duration).abs() > 1e-15
                            })
                            .map(|t| {
                                let mut c = incumbent.clone();
                                c.pulses[pulse_idx].duration = t;
                                c
                            })
                            .collect()
                    };
                    let mut best_move: Option<(Cycle, f64)> = None;
                    for cand in candidates {
                        if ev.used == stop_at {
                            budget_exhausted = true;
                            break 'descent;
                        }
                        let p0 = ev.eval(&cand)?;
                        let improves = if incumbent_p0.is_nan() {
                            !p0.is_nan()
                        } else {
                            p0 > incumbent_p0 + IMPROVE_EPS
                        };
                        if improves && best_move.as_ref().is_none_or(|(_, b)| !(p0 <= *b)) {
                            best_move = Some((cand, p0));
                        }
                    }
                    if let Some((cand, p0)) = best_move {
                        incumbent = cand;
                        incumbent_p0 = p0;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }

        let better = match &best {
            None => true,
            Some((_, p0)) if p0.is_nan() => !incumbent_p0.is_nan(),
            Some(_) if incumbent_p0.is_nan() => false,
            Some((cycle, p0)) => {
                incumbent_p0 > *p0 + IMPROVE_EPS
                    || ((incumbent_p0 - p0).abs() <= IMPROVE_EPS
                        && incumbent.total_duration() < cycle.total_duration())
            }
        };
        if better {
            best = Some((incumbent, incumbent_p0));
        }
    }

    let (best, p0) = best.expect("budget >= 1 evaluates at least one seed");
    if p0.is_nan() {
        return Err(ProtocolError::NoFeasibleEvaluation);
    }
    Ok(OptimizationOutcome { best, p0, log: ev.log, budget_exhausted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::thermal_populations;
    use crate::rates::AngularDistribution;
    use proptest::prelude::*;

    fn params(eta: f64) -> PhysicalParams {
        PhysicalParams::with_halfwidth_ratio(eta, 0.1, 0.5, 0.01, AngularDistribution::Dipole)
            .unwrap()
    }

    #[test]
    fn eta_hat_examples() {
        assert_eq!(eta_hat_sq(1.0), 1);
        assert_eq!(eta_hat_sq(1.5), 3);
        assert_eq!(eta_hat_sq(5.0), 25);
        assert_eq!(eta_hat_sq(0.0), 0);
    }

    #[test]
    fn confining_examples() {
        assert_eq!(confining_detunings(1.0), [-2.0, -2.0]);
        assert_eq!(confining_detunings(5.0), [-25.0, -26.0]);
        assert_eq!(confining_detunings(0.3), [-2.0, -2.0]);
    }

    #[test]
    fn confining_clamp_binds_below_eta_1p4() {
        for eta in [0.1, 0.5, 0.9, 1.2, 1.4] {
            assert_eq!(confining_detunings(eta)[0], -2.0, "eta = {eta}");
        }
    }

    #[test]
    fn blue_selection_at_eta_five() {
        let p = params(5.0);
        let picked =
            select_blue_detunings(&p, (0.0, 26.0), 2, &BlueSelection::default()).unwrap();
        assert_eq!(picked, vec![7.0, 9.0]);
        // Safety: a 0.2-duration pulse excites the dark ground state by at
        // most 2e-2.
        for &d in &picked {
            let g0 = emptying_rate(0, d, &p, 200).unwrap();
            assert!(g0 * EMPTY_DURATION <= 0.02, "delta = {d}: {}", g0 * EMPTY_DURATION);
        }
    }

    #[test]
    fn blue_selection_fails_deep_in_lamb_dicke() {
        let p = params(0.1);
        let err = select_blue_detunings(&p, (0.0, 26.0), 1, &BlueSelection::default());
        assert!(matches!(err, Err(ProtocolError::NoFeasibleDetuning { .. })));
    }

    #[test]
    fn blue_selection_degenerate_range() {
        let p = params(5.0);
        let picked =
            select_blue_detunings(&p, (6.5, 7.5), 1, &BlueSelection::default()).unwrap();
        assert_eq!(picked, vec![7.0]);
        // The same single-candidate range fails when the candidate misses
        // the floor.
        let err = select_blue_detunings(&p, (1.5, 2.5), 1, &BlueSelection::default());
        assert!(matches!(err, Err(ProtocolError::NoFeasibleDetuning { .. })));
    }

    #[test]
    fn fig3b_cycle_is_exact() {
        let c = build_cycle(SchemeId::Fig3b, 5.0, &params(5.0)).unwrap();
        let got: Vec<(f64, f64)> = c.pulses.iter().map(|p| (p.delta, p.duration)).collect();
        assert_eq!(got, vec![(-24.0, 0.6), (-25.0, 0.6), (7.0, 0.2), (9.0, 0.2)]);
        assert_eq!(c.n_cycles, 200);
    }

    #[test]
    fn fig2_cycles() {
        let p = params(1.0);
        let a = build_cycle(SchemeId::Fig2a, 1.0, &p).unwrap();
        assert_eq!(a.pulses.len(), 1);
        assert_eq!(a.pulses[0].delta, -2.0);
        let b = build_cycle(SchemeId::Fig2b, 1.0, &p).unwrap();
        assert_eq!(b.pulses[0].delta, -1.0);
        let c = build_cycle(SchemeId::Fig2c, 1.0, &p).unwrap();
        let got: Vec<f64> = c.pulses.iter().map(|p| p.delta).collect();
        assert_eq!(got, vec![-2.0, -1.0]);
    }

    #[test]
    fn fig2_durations_scale_with_bottleneck_rates() {
        // Deep Lamb-Dicke: fast first sideband, weak recoil funnel.
        let (confine, sideband) = fig2_durations(0.5, &params(0.5));
        assert_eq!(confine, 32.0);
        assert_eq!(sideband, 1.0);
        // At eta = 1.5 level 2 sits near a Franck-Condon zero of the first
        // sideband; the emptying pulse gets the long exposure.
        let (confine, sideband) = fig2_durations(1.5, &params(1.5));
        assert!((15.0..=18.0).contains(&confine), "{confine}");
        assert_eq!(sideband, 8.0);
        // Beyond the Lamb-Dicke regime level 1 is the slow one.
        let (confine, sideband) = fig2_durations(2.5, &params(2.5));
        assert!((20.0..=25.0).contains(&confine), "{confine}");
        assert!((4.0..=6.0).contains(&sideband), "{sideband}");
    }

    #[test]
    fn auto_cycle_at_eta_five() {
        let p = params(5.0);
        let c = build_cycle(SchemeId::Auto, 5.0, &p).unwrap();
        let got: Vec<f64> = c.pulses.iter().map(|p| p.delta).collect();
        assert_eq!(got, vec![-25.0, -26.0, 7.0, 9.0]);
        let durations: Vec<f64> = c.pulses.iter().map(|p| p.duration).collect();
        assert_eq!(durations, vec![0.6, 0.6, 0.2, 0.2]);
    }

    #[test]
    fn scheme_tags_round_trip() {
        for tag in ["fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3b_caption", "auto"] {
            assert_eq!(tag.parse::<SchemeId>().unwrap().to_string(), tag);
        }
        assert!(matches!(
            "fig9".parse::<SchemeId>(),
            Err(ProtocolError::UnknownScheme(_))
        ));
    }

    #[test]
    fn optimizer_with_flat_objective_returns_seed() {
        // eta = 0: no motional transitions, every cycle scores the same.
        let p = PhysicalParams::new(0.0, 0.1, 0.05, 0.01, AngularDistribution::Dipole).unwrap();
        let initial = thermal_populations(0.5, 30).unwrap();
        let seed = Cycle::new(vec![Pulse::new(-2.0, 0.6).unwrap()], 3).unwrap();
        let problem = OptimizationProblem {
            bounds: vec![PulseBounds { delta: (-10.0, -1.0), duration: (0.1, 2.0) }],
            params: p,
            initial,
            n_cycles: 3,
            budget: 20,
            seeds: vec![seed.clone()],
            n_max: 30,
            quad_order: 32,
        };
        let out = optimize_sequence(&problem).unwrap();
        assert_eq!(out.best.pulses, seed.pulses);
        for rec in &out.log {
            assert_eq!(rec.p0, out.p0);
        }
    }

    #[test]
    fn optimizer_budget_one_returns_seed_score() {
        let p = params(0.5);
        let initial = thermal_populations(0.5, 40).unwrap();
        let seed = Cycle::new(vec![Pulse::new(-2.0, 0.6).unwrap()], 5).unwrap();
        let problem = OptimizationProblem {
            bounds: vec![PulseBounds { delta: (-6.0, -1.0), duration: (0.1, 2.0) }],
            params: p,
            initial: initial.clone(),
            n_cycles: 5,
            budget: 1,
            seeds: vec![seed.clone()],
            n_max: 40,
            quad_order: 32,
        };
        let out = optimize_sequence(&problem).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.best.pulses, seed.pulses);
        let direct = Simulator::new(p, 40, 32)
            .run(&initial, &seed)
            .unwrap()
            .final_ground_population();
        assert_eq!(out.p0, direct);
    }

    #[test]
    fn optimizer_log_is_monotone_and_improves() {
        let p = params(0.5);
        let initial = thermal_populations(0.5, 40).unwrap();
        // Deliberately poor seed duration; descent should find better.
        let seed = Cycle::new(vec![Pulse::new(-3.0, 0.05).unwrap()], 5).unwrap();
        let problem = OptimizationProblem {
            bounds: vec![PulseBounds { delta: (-6.0, -1.0), duration: (0.02, 3.0) }],
            params: p,
            initial,
            n_cycles: 5,
            budget: 25,
            seeds: vec![seed.clone()],
            n_max: 40,
            quad_order: 32,
        };
        let out = optimize_sequence(&problem).unwrap();
        let mut last = f64::NEG_INFINITY;
        for rec in &out.log {
            assert!(rec.incumbent_p0 >= last);
            last = rec.incumbent_p0;
        }
        assert!(out.p0 > out.log[0].p0, "descent should beat the bad seed");
    }

    #[test]
    fn optimizer_rejects_zero_budget() {
        let p = params(0.5);
        let initial = thermal_populations(0.5, 40).unwrap();
        let seed = Cycle::new(vec![Pulse::new(-2.0, 0.6).unwrap()], 5).unwrap();
        let problem = OptimizationProblem {
            bounds: vec![PulseBounds { delta: (-6.0, -1.0), duration: (0.1, 2.0) }],
            params: p,
            initial,
            n_cycles: 5,
            budget: 0,
            seeds: vec![seed],
            n_max: 40,
            quad_order: 32,
        };
        assert!(matches!(optimize_sequence(&problem), Err(ProtocolError::BadBudget)));
    }

    proptest! {
        #[test]
        fn eta_hat_is_ceiling(eta in 0.0f64..20.0) {
            let hat = eta_hat_sq(eta) as f64;
            prop_assert!(hat >= eta * eta);
            prop_assert!(hat - eta * eta < 1.0 || (eta * eta).fract() == 0.0);
        }
    }
}
