//! Fock-level transition rates for a driven two-level atom in a harmonic
//! trap, after adiabatic elimination of the excited state.
//!
//! The inelastic rate from motional level m to level n under a pulse of
//! detuning delta (trap-frequency units) is
//!
//! ```text
//! R(n <- m) = Int du N(u) | Sum_k gamma <n|e^{-i eta u X}|k><k|e^{i eta X}|m>
//!                               / (delta - (k - m) + i gamma) |^2
//! ```
//!
//! in units of Omega^2 / Gamma, with X = a + a', N(u) the angular density of
//! the emitted photon and the k-sum running over intermediate excited-state
//! levels. The emptying rate of a level collapses the emission side by
//! completeness, and on an exact sideband resonance it reduces to a single
//! Franck-Condon weight. `build_rate_matrix` assembles the full generator of
//! the population rate equations over a truncated basis.

use crate::fock::DisplacementMatrix;
use crate::quad::GaussLegendre;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

/// Relative size of the last intermediate-level term beyond which the k-sum
/// truncation is rejected.
const TAIL_LIMIT: f64 = 1e-12;
/// Same check at assembly level. The lost rate mass goes as the square of
/// the tested amplitude ratio, so 1e-4 of edge amplitude is at most 1e-8 of
/// rate, below the quadrature tolerance; grossly undersized bases show
/// ratios of 1e-2 and larger.
const MATRIX_TAIL_LIMIT: f64 = 1e-4;
/// Relative drift allowed when the quadrature order is doubled.
const QUAD_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RatesError {
    #[error("emission direction cosine {0} outside [-1, 1]")]
    AngularDomain(f64),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error(
        "intermediate-level sum not converged at the basis edge \
         (column {column}, tail ratio {ratio:.3e}, limit {limit:.0e}); increase n_max"
    )]
    Truncation { column: usize, ratio: f64, limit: f64 },
    #[error(
        "angular quadrature not converged: doubling order {order} shifts a rate \
         by {drift:.3e} relative (limit 1e-6); increase quad_order"
    )]
    Quadrature { order: usize, drift: f64 },
}

/// Angular density N(u) of the spontaneously emitted photon over the
/// direction cosine u relative to the trap axis, normalized on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngularDistribution {
    /// (3/8)(1 + u^2), the linear-dipole pattern.
    #[default]
    Dipole,
    /// Uniform 1/2.
    Isotropic,
}

impl AngularDistribution {
    pub fn density(self, u: f64) -> Result<f64, RatesError> {
        if !(-1.0..=1.0).contains(&u) {
            return Err(RatesError::AngularDomain(u));
        }
        Ok(self.density_unchecked(u))
    }

    fn density_unchecked(self, u: f64) -> f64 {
        match self {
            AngularDistribution::Dipole => 0.375 * (1.0 + u * u),
            AngularDistribution::Isotropic => 0.5,
        }
    }
}

/// Physical inputs in trap-frequency units. `linewidth` is the effective
/// excited-state decay rate Gamma; `halfwidth` is the Lorentzian half-width
/// gamma in the rate denominators (Gamma/2 unless configured otherwise);
/// `rabi` is the Rabi frequency Omega, which only enters validity
/// diagnostics because every rate is expressed in units of Omega^2 / Gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub eta: f64,
    pub linewidth: f64,
    pub halfwidth: f64,
    pub rabi: f64,
    pub angular: AngularDistribution,
}

impl PhysicalParams {
    pub fn new(
        eta: f64,
        linewidth: f64,
        halfwidth: f64,
        rabi: f64,
        angular: AngularDistribution,
    ) -> Result<Self, RatesError> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(RatesError::BadParams(format!("eta must be >= 0, got {eta}")));
        }
        for (name, v) in [("linewidth", linewidth), ("halfwidth", halfwidth), ("rabi", rabi)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(RatesError::BadParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if halfwidth > linewidth {
            return Err(RatesError::BadParams(format!(
                "halfwidth {halfwidth} exceeds linewidth {linewidth}"
            )));
        }
        Ok(Self { eta, linewidth, halfwidth, rabi, angular })
    }

    /// Same, with the half-width given as a fraction of the linewidth.
    pub fn with_halfwidth_ratio(
        eta: f64,
        linewidth: f64,
        ratio: f64,
        rabi: f64,
        angular: AngularDistribution,
    ) -> Result<Self, RatesError> {
        if !(0.0..=1.0).contains(&ratio) || ratio == 0.0 {
            return Err(RatesError::BadParams(format!(
                "halfwidth ratio must lie in (0, 1], got {ratio}"
            )));
        }
        Self::new(eta, linewidth, ratio * linewidth, rabi, angular)
    }
}

/// Generator of the population rate equations on levels 0..=n_max, in units
/// of Omega^2 / Gamma. Off-diagonal entries are the inelastic inflow rates
/// R(n <- m); each diagonal entry is minus its column's off-diagonal sum, so
/// columns sum to zero and total probability is conserved. The elastic
/// channel n = m cancels identically in the rate equations and is excluded.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    dim: usize,
    delta: f64,
    entries: Vec<f64>,
}

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Generator entry, diagonal included.
    pub fn entry(&self, n: usize, m: usize) -> f64 {
        self.entries[n * self.dim + m]
    }

    /// Total outflow rate of level m (the negated diagonal).
    pub fn column_outflow(&self, m: usize) -> f64 {
        -self.entry(m, m)
    }

    /// Column sum with the off-diagonal entries accumulated first; zero by
    /// construction, exactly, in floating point.
    pub fn column_sum(&self, m: usize) -> f64 {
        let off: f64 =
            (0..self.dim).filter(|&n| n != m).map(|n| self.entry(n, m)).sum();
        off + self.entry(m, m)
    }

    /// Largest outflow rate; the uniformization constant of the generator.
    pub fn max_outflow(&self) -> f64 {
        (0..self.dim).map(|m| self.column_outflow(m)).fold(0.0, f64::max)
    }

    pub(crate) fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[cfg(test)]
    pub(crate) fn from_raw_for_tests(dim: usize, entries: Vec<f64>) -> Self {
        Self { dim, delta: 0.0, entries }
    }
}

fn validate_quad_order(quad_order: usize) -> Result<(), RatesError> {
    if quad_order < 32 {
        return Err(RatesError::BadParams(format!(
            "quad_order must be at least 32, got {quad_order}"
        )));
    }
    Ok(())
}

fn validate_delta(delta: f64) -> Result<(), RatesError> {
    if !delta.is_finite() {
        return Err(RatesError::BadParams(format!("detuning must be finite, got {delta}")));
    }
    Ok(())
}

/// Complex coefficients gamma * <k|D(eta)|m> / (delta - (k - m) + i gamma),
/// row-major over k for the accumulation kernel.
struct AbsorptionKernel {
    re: Vec<f64>,
    im: Vec<f64>,
}

fn absorption_kernel(
    absorption: &DisplacementMatrix,
    delta: f64,
    halfwidth: f64,
    eta: f64,
) -> Result<AbsorptionKernel, RatesError> {
    let dim = absorption.dim();
    let g = halfwidth;
    let mut re = vec![0.0; dim * dim];
    let mut im = vec![0.0; dim * dim];
    let mut col_abs = vec![0.0; dim];
    for k in 0..dim {
        let br = absorption.row_re(k);
        let bi = absorption.row_im(k);
        let out_r = &mut re[k * dim..(k + 1) * dim];
        let out_i = &mut im[k * dim..(k + 1) * dim];
        for m in 0..dim {
            let gap = delta - (k as f64 - m as f64);
            let scale = g / (gap * gap + g * g);
            let cr = scale * (br[m] * gap + bi[m] * g);
            let ci = scale * (bi[m] * gap - br[m] * g);
            out_r[m] = cr;
            out_i[m] = ci;
            col_abs[m] += (cr * cr + ci * ci).sqrt();
        }
    }
    // Columns with a full padding's worth of headroom above them must have
    // converged intermediate sums; the lost rate mass is the square of the
    // amplitude ratio tested here. Columns inside the headroom band are
    // exempt: their absorption spread is allowed to touch the basis edge,
    // and the run-time edge-mass guard keeps them essentially unpopulated.
    if dim < 2 {
        return Ok(AbsorptionKernel { re, im });
    }
    let last = dim - 1;
    // Half again the unitarity padding: at that distance the absorption
    // amplitude has decayed well below the limit tested here, so the check
    // only fires on genuinely undersized bases.
    let pad = crate::fock::required_padding(eta);
    let strict_below = dim.saturating_sub(pad + pad / 2);
    for m in 0..strict_below.min(dim) {
        if col_abs[m] == 0.0 {
            continue;
        }
        let tail = (re[last * dim + m].powi(2) + im[last * dim + m].powi(2)).sqrt();
        let ratio = tail / col_abs[m];
        if ratio >= MATRIX_TAIL_LIMIT {
            return Err(RatesError::Truncation { column: m, ratio, limit: MATRIX_TAIL_LIMIT });
        }
    }
    Ok(AbsorptionKernel { re, im })
}

/// Emission rows processed per pass over the kernel; keeps each kernel row
/// in cache for several products.
const ROW_BLOCK: usize = 2;

/// A +/-u node pair of an emission set (or the lone u = 0 node when the
/// order is odd, with `weight_pos` zero). Both directions come from one
/// table: the kick flips sign with u, which conjugates the matrix.
struct EmissionPair {
    /// w N(u) for the u < 0 node, whose kick matches `table`.
    weight_neg: f64,
    /// w N(u) for the mirrored u > 0 node.
    weight_pos: f64,
    table: Arc<DisplacementMatrix>,
}

/// Emission displacement tables for one quadrature order, shared across all
/// detunings of an assembler.
struct EmissionSet {
    pairs: Vec<EmissionPair>,
}

impl EmissionSet {
    fn build(eta: f64, dim: usize, order: usize, angular: AngularDistribution) -> Self {
        let rule = GaussLegendre::new(order);
        let pairs = (0..order.div_ceil(2))
            .into_par_iter()
            .map(|i| {
                let u = rule.nodes()[i];
                let mirror = order - 1 - i;
                EmissionPair {
                    weight_neg: rule.weights()[i] * angular.density_unchecked(u),
                    weight_pos: if mirror == i {
                        0.0
                    } else {
                        rule.weights()[mirror]
                            * angular.density_unchecked(rule.nodes()[mirror])
                    },
                    table: Arc::new(DisplacementMatrix::build(-eta * u, dim)),
                }
            })
            .collect();
        Self { pairs }
    }
}

/// Contribution of a +/-u node pair, entrywise.
///
/// With E the pair's table and C the absorption kernel, the -u node needs
/// |E C|^2 and the +u node |conj(E) C|^2 = |E conj(C)|^2. Both are built
/// from the same four real accumulations P1 = Er Cr, P2 = Ei Ci,
/// P3 = Er Ci, P4 = Ei Cr:
///
/// ```text
/// |E C|^2       = (P1 - P2)^2 + (P3 + P4)^2
/// |conj(E) C|^2 = (P1 + P2)^2 + (P4 - P3)^2
/// ```
///
/// so the pair costs one sweep over the kernel. Emission rows advance in
/// blocks so each kernel row is read once per block.
fn pair_partial(pair: &EmissionPair, kernel: &AbsorptionKernel, dim: usize) -> Vec<f64> {
    let emission = &pair.table;
    let (w_neg, w_pos) = (pair.weight_neg, pair.weight_pos);
    let mut out = vec![0.0; dim * dim];
    let mut acc = vec![0.0; 4 * ROW_BLOCK * dim];
    for base in (0..dim).step_by(ROW_BLOCK) {
        let rows = ROW_BLOCK.min(dim - base);
        acc.iter_mut().for_each(|v| *v = 0.0);
        {
            let mut planes: Vec<&mut [f64]> = acc.chunks_mut(dim).collect();
            for k in 0..dim {
                let cr = &kernel.re[k * dim..(k + 1) * dim];
                let ci = &kernel.im[k * dim..(k + 1) * dim];
                for j in 0..rows {
                    let er = emission.row_re(base + j)[k];
                    let ei = emission.row_im(base + j)[k];
                    if er == 0.0 && ei == 0.0 {
                        continue;
                    }
                    let [p1, p2, p3, p4] = planes
                        .get_disjoint_mut([4 * j, 4 * j + 1, 4 * j + 2, 4 * j + 3])
                        .expect("disjoint plane indices");
                    for ((((q1, q2), (q3, q4)), &c_r), &c_i) in p1
                        .iter_mut()
                        .zip(p2.iter_mut())
                        .zip(p3.iter_mut().zip(p4.iter_mut()))
                        .zip(cr)
                        .zip(ci)
                    {
                        *q1 += er * c_r;
                        *q2 += ei * c_i;
                        *q3 += er * c_i;
                        *q4 += ei * c_r;
                    }
                }
            }
        }
        for j in 0..rows {
            let out_row = &mut out[(base + j) * dim..(base + j + 1) * dim];
            let p1 = &acc[(4 * j) * dim..(4 * j + 1) * dim];
            let p2 = &acc[(4 * j + 1) * dim..(4 * j + 2) * dim];
            let p3 = &acc[(4 * j + 2) * dim..(4 * j + 3) * dim];
            let p4 = &acc[(4 * j + 3) * dim..(4 * j + 4) * dim];
            for m in 0..dim {
                let neg = (p1[m] - p2[m]).powi(2) + (p3[m] + p4[m]).powi(2);
                let pos = (p1[m] + p2[m]).powi(2) + (p4[m] - p3[m]).powi(2);
                out_row[m] = w_neg * neg + w_pos * pos;
            }
        }
    }
    out
}

/// Generator factory for one parameter set and basis: the absorption table
/// and the per-order emission tables are built once and reused by every
/// detuning, which is where almost all of the assembly time goes.
pub struct RateAssembler {
    params: PhysicalParams,
    n_max: usize,
    quad_floor: usize,
    absorption: DisplacementMatrix,
    emission_sets: HashMap<usize, Arc<EmissionSet>>,
}

impl RateAssembler {
    pub fn new(
        params: PhysicalParams,
        n_max: usize,
        quad_order: usize,
    ) -> Result<Self, RatesError> {
        validate_quad_order(quad_order)?;
        let absorption = DisplacementMatrix::build(params.eta, n_max + 1);
        Ok(Self {
            params,
            n_max,
            quad_floor: quad_order,
            absorption,
            emission_sets: HashMap::new(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn emission_set(&mut self, order: usize) -> Arc<EmissionSet> {
        let dim = self.n_max + 1;
        let (eta, angular) = (self.params.eta, self.params.angular);
        Arc::clone(
            self.emission_sets
                .entry(order)
                .or_insert_with(|| Arc::new(EmissionSet::build(eta, dim, order, angular))),
        )
    }

    fn assemble(&mut self, delta: f64, order: usize) -> Result<Vec<f64>, RatesError> {
        let dim = self.n_max + 1;
        let kernel =
            absorption_kernel(&self.absorption, delta, self.params.halfwidth, self.params.eta)?;
        let set = self.emission_set(order);
        let partials: Vec<Vec<f64>> = set
            .pairs
            .par_iter()
            .map(|pair| pair_partial(pair, &kernel, dim))
            .collect();
        let mut total = vec![0.0; dim * dim];
        for partial in &partials {
            for (t, p) in total.iter_mut().zip(partial) {
                *t += p;
            }
        }
        Ok(total)
    }

    /// Assemble the generator for one detuning; see [`build_rate_matrix`].
    pub fn matrix(&mut self, delta: f64) -> Result<RateMatrix, RatesError> {
        validate_delta(delta)?;
        let dim = self.n_max + 1;
        let quad_order = auto_quad_order(self.params.eta, dim, self.quad_floor);
        let coarse = self.assemble(delta, quad_order)?;
        let fine = self.assemble(delta, 2 * quad_order)?;
        finish_generator(dim, delta, quad_order, coarse, fine)
    }
}

fn finish_generator(
    dim: usize,
    delta: f64,
    quad_order: usize,
    coarse: Vec<f64>,
    fine: Vec<f64>,
) -> Result<RateMatrix, RatesError> {
    let scale = fine.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (a, b) in coarse.iter().zip(&fine) {
        let drift = (a - b).abs();
        // The absolute guard keeps negligible entries from tripping the
        // relative test on pure rounding noise.
        if drift > QUAD_DRIFT_LIMIT * a.abs().max(b.abs()) + 1e-12 * scale {
            worst = worst.max(drift / b.abs().max(1e-30));
        }
    }
    if worst > 0.0 {
        return Err(RatesError::Quadrature { order: quad_order, drift: worst });
    }
    let mut entries = coarse;
    for m in 0..dim {
        entries[m * dim + m] = 0.0;
    }
    for m in 0..dim {
        let outflow: f64 = (0..dim).filter(|&n| n != m).map(|n| entries[n * dim + m]).sum();
        entries[m * dim + m] = -outflow;
    }
    Ok(RateMatrix { dim, delta, entries })
}

/// Inelastic transition rate R(n <- m) at detuning `delta`, units of
/// Omega^2 / Gamma. The intermediate sum runs to `n_max` with a tail check,
/// and the angular integral is re-evaluated at doubled order to certify
/// convergence.
pub fn rate_nm(
    n: usize,
    m: usize,
    delta: f64,
    params: &PhysicalParams,
    n_max: usize,
    quad_order: usize,
) -> Result<f64, RatesError> {
    if n > n_max || m > n_max {
        return Err(RatesError::BadParams(format!(
            "indices n={n}, m={m} exceed n_max={n_max}"
        )));
    }
    validate_quad_order(quad_order)?;
    validate_delta(delta)?;
    let coarse = rate_nm_at_order(n, m, delta, params, n_max, quad_order)?;
    let fine = rate_nm_at_order(n, m, delta, params, n_max, 2 * quad_order)?;
    let drift = (coarse - fine).abs();
    if drift > QUAD_DRIFT_LIMIT * fine.abs().max(1e-30) {
        return Err(RatesError::Quadrature { order: quad_order, drift: drift / fine.abs().max(1e-30) });
    }
    Ok(coarse)
}

fn rate_nm_at_order(
    n: usize,
    m: usize,
    delta: f64,
    params: &PhysicalParams,
    n_max: usize,
    quad_order: usize,
) -> Result<f64, RatesError> {
    let g = params.halfwidth;
    let absorb = crate::fock::displacement_row(
        m,
        crate::fock::KickStrength::new(params.eta).expect("eta validated finite"),
        n_max,
    );
    // gamma * <k|D|m> / (delta - (k - m) + i gamma)
    let coeff: Vec<num_complex::Complex64> = absorb
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let gap = delta - (k as f64 - m as f64);
            a.value * g / num_complex::Complex64::new(gap, g)
        })
        .collect();
    let rule = GaussLegendre::new(quad_order);
    let mut integral = 0.0;
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        let emit = crate::fock::displacement_row(
            n,
            crate::fock::KickStrength::new(-params.eta * u).expect("finite"),
            n_max,
        );
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        let mut abs_acc = 0.0;
        let mut last_abs = 0.0;
        for (e, c) in emit.iter().zip(&coeff) {
            let term = e.value * c;
            sum += term;
            last_abs = term.norm();
            abs_acc += last_abs;
        }
        if abs_acc > 0.0 && last_abs / abs_acc >= TAIL_LIMIT {
            return Err(RatesError::Truncation {
                column: m,
                ratio: last_abs / abs_acc,
                limit: TAIL_LIMIT,
            });
        }
        integral += w * params.angular.density_unchecked(u) * sum.norm_sqr();
    }
    Ok(integral)
}

/// Total rate at which level n is emptied at detuning `delta`: the
/// completeness-collapsed sum over intermediate levels, units of
/// Omega^2 / Gamma.
pub fn emptying_rate(
    n: usize,
    delta: f64,
    params: &PhysicalParams,
    n_max: usize,
) -> Result<f64, RatesError> {
    if n > n_max {
        return Err(RatesError::BadParams(format!("n={n} exceeds n_max={n_max}")));
    }
    validate_delta(delta)?;
    let g2 = params.halfwidth * params.halfwidth;
    let row = crate::fock::displacement_row(
        n,
        crate::fock::KickStrength::new(params.eta).expect("eta validated finite"),
        n_max,
    );
    let mut total = 0.0;
    let mut last = 0.0;
    for (k, a) in row.iter().enumerate() {
        let gap = delta - (k as f64 - n as f64);
        last = g2 * a.value.norm_sqr() / (gap * gap + g2);
        total += last;
    }
    if total > 0.0 && last / total >= TAIL_LIMIT {
        return Err(RatesError::Truncation { column: n, ratio: last / total, limit: TAIL_LIMIT });
    }
    Ok(total)
}

/// Which levels the sideband-resonant approximation treats as coupled when
/// the resonant target is the ground state itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResonantSupport {
    /// Nonzero for n >= k0; matches the small-halfwidth limit of
    /// [`emptying_rate`].
    #[default]
    IncludeEdge,
    /// Nonzero only for n > k0.
    StrictAbove,
}

/// Emptying rate of level n in the resonant approximation at detuning
/// -k0 (trap-frequency units): the single Franck-Condon weight
/// |<n-k0|D(eta)|n>|^2, or zero when the target level does not exist.
/// Negative k0 describes blue-detuned pulses.
pub fn emptying_rate_resonant(
    n: usize,
    k0: i64,
    params: &PhysicalParams,
    support: ResonantSupport,
) -> f64 {
    let target = n as i64 - k0;
    let allowed = match support {
        ResonantSupport::IncludeEdge => target >= 0,
        ResonantSupport::StrictAbove => target > 0,
    };
    if !allowed {
        return 0.0;
    }
    let kick = crate::fock::KickStrength::new(params.eta).expect("eta validated finite");
    crate::fock::displacement_element(target as usize, n, kick).magnitude().powi(2)
}

/// Basis size for a run: the initial support or the farthest sideband,
/// whichever is larger, plus recoil headroom. The additive margin covers the
/// transient diffusive tail that confinement pulses push above the initial
/// support before it drains back down.
pub fn auto_n_max(initial_support: usize, max_abs_delta: f64, eta: f64) -> usize {
    let eta_hat_sq = (eta * eta).ceil() as usize;
    initial_support.max(max_abs_delta.abs().ceil() as usize) + 4 * eta_hat_sq + 60
}

/// Angular quadrature order that resolves the emission kernel on a basis of
/// `dim` levels: the integrand oscillates up to roughly 4 eta sqrt(dim) in
/// the direction cosine, and a Gauss-Legendre rule needs half that many
/// nodes plus an Airy-scale margin before its error turns super-exponential.
/// `floor` is the caller's requested minimum.
pub fn auto_quad_order(eta: f64, dim: usize, floor: usize) -> usize {
    let bandwidth = 4.0 * eta * (dim as f64).sqrt();
    let wall = 0.5 * bandwidth + 4.0 * bandwidth.cbrt() + 8.0;
    floor.max(wall.ceil() as usize)
}

/// Assemble the rate-equation generator on levels 0..=n_max for one pulse
/// detuning.
///
/// `quad_order` acts as a floor: the angular order is raised automatically
/// to [`auto_quad_order`], since large bases far outside the Lamb-Dicke
/// regime oscillate faster than any fixed rule resolves. The quadrature is
/// then re-run at doubled order and the build is rejected if any
/// significant entry moves by more than 1e-6 relative.
///
/// When several detunings share one parameter set, [`RateAssembler`] reuses
/// the displacement tables between builds.
pub fn build_rate_matrix(
    delta: f64,
    params: &PhysicalParams,
    n_max: usize,
    quad_order: usize,
) -> Result<RateMatrix, RatesError> {
    RateAssembler::new(*params, n_max, quad_order)?.matrix(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn params(eta: f64) -> PhysicalParams {
        PhysicalParams::with_halfwidth_ratio(eta, 0.1, 0.5, 0.01, AngularDistribution::Dipole)
            .unwrap()
    }

    #[test]
    fn angular_values() {
        assert_abs_diff_eq!(
            AngularDistribution::Isotropic.density(0.7).unwrap(),
            0.5,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            AngularDistribution::Dipole.density(0.0).unwrap(),
            0.375,
            epsilon = 0.0
        );
        assert!(AngularDistribution::Dipole.density(1.2).is_err());
    }

    #[test]
    fn angular_normalization() {
        let rule = GaussLegendre::new(64);
        for dist in [AngularDistribution::Dipole, AngularDistribution::Isotropic] {
            let total = rule.integrate(|u| dist.density_unchecked(u));
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(PhysicalParams::new(5.0, 0.1, 0.2, 0.01, AngularDistribution::Dipole).is_err());
        assert!(PhysicalParams::new(-1.0, 0.1, 0.05, 0.01, AngularDistribution::Dipole).is_err());
        assert!(PhysicalParams::new(5.0, 0.1, 0.05, 0.0, AngularDistribution::Dipole).is_err());
        assert!(PhysicalParams::with_halfwidth_ratio(5.0, 0.1, 0.0, 0.01, AngularDistribution::Dipole)
            .is_err());
    }

    #[test]
    fn rate_nm_lamb_dicke_frozen_point() {
        // At eta = 0 the kick operator is the identity: only the elastic
        // channel survives, with the plain Lorentzian weight.
        let p = PhysicalParams::new(0.0, 0.1, 0.05, 0.01, AngularDistribution::Dipole).unwrap();
        let delta = -1.0;
        let g2 = 0.05f64 * 0.05;
        let elastic = rate_nm(3, 3, delta, &p, 40, 32).unwrap();
        assert_abs_diff_eq!(elastic, g2 / (delta * delta + g2), epsilon = 1e-13);
        let inelastic = rate_nm(2, 3, delta, &p, 40, 32).unwrap();
        assert_abs_diff_eq!(inelastic, 0.0, epsilon = 1e-300);
    }

    #[test]
    fn emptying_rate_eta_zero() {
        let p = PhysicalParams::new(0.0, 0.1, 0.05, 0.01, AngularDistribution::Dipole).unwrap();
        let g2 = 0.05f64 * 0.05;
        for n in [0usize, 3, 17] {
            let r = emptying_rate(n, -1.0, &p, 60).unwrap();
            assert_abs_diff_eq!(r, g2 / (1.0 + g2), epsilon = 1e-15);
        }
    }

    #[test]
    fn resonant_rate_below_sideband_is_zero() {
        let p = params(5.0);
        assert_eq!(emptying_rate_resonant(1, 2, &p, ResonantSupport::IncludeEdge), 0.0);
        assert_eq!(emptying_rate_resonant(1, 2, &p, ResonantSupport::StrictAbove), 0.0);
    }

    #[test]
    fn resonant_rate_at_edge_conventions() {
        let p = params(5.0);
        let edge = emptying_rate_resonant(25, 25, &p, ResonantSupport::IncludeEdge);
        // |<0|D(5)|25>|^2, fixed by the closed form and the spectral oracle.
        assert_abs_diff_eq!(edge, 0.07952295146806485, epsilon = 1e-10);
        assert_eq!(emptying_rate_resonant(25, 25, &p, ResonantSupport::StrictAbove), 0.0);
    }

    #[test]
    fn resonant_rate_ldl_first_sideband() {
        let p = params(0.1);
        let r = emptying_rate_resonant(5, 1, &p, ResonantSupport::IncludeEdge);
        // |<4|D(0.1)|5>|^2; the leading-order value eta^2 * 5 * e^{-eta^2}
        // overshoots by the O(eta^2 n) Laguerre correction.
        assert_abs_diff_eq!(r, 0.047551879835654356, epsilon = 1e-12);
        let leading = 0.1f64.powi(2) * 5.0 * (-0.01f64).exp();
        assert!((r - leading).abs() < 2.5e-3);
    }

    #[test]
    fn blue_resonance_uses_negative_k0() {
        let p = params(5.0);
        let r = emptying_rate_resonant(0, -7, &p, ResonantSupport::IncludeEdge);
        let direct = crate::fock::displacement_element(
            7,
            0,
            crate::fock::KickStrength::new(5.0).unwrap(),
        )
        .magnitude()
        .powi(2);
        assert_abs_diff_eq!(r, direct, epsilon = 0.0);
    }

    #[test]
    fn generator_vanishes_at_eta_zero() {
        let p = PhysicalParams::new(0.0, 0.1, 0.05, 0.01, AngularDistribution::Dipole).unwrap();
        let r = build_rate_matrix(-1.0, &p, 30, 32).unwrap();
        for n in 0..=30 {
            for m in 0..=30 {
                assert_eq!(r.entry(n, m), 0.0, "({n},{m})");
            }
        }
    }

    #[test]
    fn generator_structure() {
        let p = params(2.0);
        let r = build_rate_matrix(-4.0, &p, 60, 64).unwrap();
        for m in 0..r.dim() {
            assert_eq!(r.column_sum(m), 0.0, "column {m}");
            for n in 0..r.dim() {
                if n != m {
                    assert!(r.entry(n, m) >= 0.0, "({n},{m})");
                }
            }
            assert!(r.entry(m, m) <= 0.0);
        }
    }

    #[test]
    fn generator_entries_vanish_at_tiny_eta() {
        let p = PhysicalParams::new(1e-8, 0.1, 0.05, 0.01, AngularDistribution::Dipole).unwrap();
        let r = build_rate_matrix(-1.0, &p, 20, 32).unwrap();
        for n in 0..=20 {
            for m in 0..=20 {
                if n != m {
                    assert!(r.entry(n, m) < 1e-12, "({n},{m}) = {}", r.entry(n, m));
                }
            }
        }
    }

    #[test]
    fn truncation_rejected_when_basis_too_small() {
        // eta = 5 absorption from m = 20 reaches far beyond k = 25.
        let p = params(5.0);
        let err = emptying_rate(20, -25.0, &p, 25).unwrap_err();
        assert!(matches!(err, RatesError::Truncation { .. }));
    }

    #[test]
    fn auto_n_max_policy() {
        // thermal nbar=6 support at 1e-10 is 149; four-pulse run at eta=5.
        assert_eq!(auto_n_max(149, 26.0, 5.0), 149 + 100 + 60);
        assert_eq!(auto_n_max(10, 25.0, 5.0), 25 + 100 + 60);
    }

    #[test]
    fn quad_order_floor_enforced() {
        let p = params(1.0);
        assert!(matches!(
            rate_nm(0, 0, -1.0, &p, 20, 16),
            Err(RatesError::BadParams(_))
        ));
    }
}

/// Raw rate table at one order, no checks. Measurement hook for development.
#[doc(hidden)]
pub fn assemble_rates_for_tests(
    delta: f64,
    params: &PhysicalParams,
    n_max: usize,
    quad_order: usize,
) -> Vec<f64> {
    RateAssembler::new(*params, n_max, 32)
        .unwrap()
        .assemble(delta, quad_order)
        .unwrap()
}
