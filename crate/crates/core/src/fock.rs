//! Matrix elements of the momentum-kick operator exp(i kappa (a + a')) in the
//! harmonic-oscillator number basis.
//!
//! These are the Franck-Condon amplitudes that control how much the motional
//! state can change when a photon is absorbed or emitted. Everything else in
//! the crate is built on top of them, so this module carries both the fast
//! closed-form evaluation (generalized Laguerre polynomial with the factorial
//! prefactor folded in log space, so n ~ 200 and kappa ~ 8 stay finite) and a
//! brute-force spectral oracle used by the test suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("kick strength must be finite, got {0}")]
    NonFiniteKick(f64),
    #[error("oracle padding {got} below required {required} for kappa = {kappa}")]
    PaddingTooSmall { kappa: f64, required: usize, got: usize },
}

/// Dimensionless momentum kick kappa. Absorption along the laser axis uses
/// kappa = eta; emission at direction cosine u uses kappa = -eta * u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickStrength(f64);

impl KickStrength {
    pub fn new(kappa: f64) -> Result<Self, FockError> {
        if kappa.is_finite() {
            Ok(Self(kappa))
        } else {
            Err(FockError::NonFiniteKick(kappa))
        }
    }

    pub fn kappa(self) -> f64 {
        self.0
    }
}

/// One matrix element `<n| exp(i kappa (a + a')) |m>`.
///
/// For real kappa the value is i^|n-m| times a real number; the magnitude is
/// symmetric in (n, m) and never exceeds 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementAmplitude {
    pub value: Complex64,
    pub n: usize,
    pub m: usize,
}

impl DisplacementAmplitude {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

/// Generalized Laguerre L_s^{(d)}(x) by the ascending three-term recurrence,
/// rescaled on the fly so intermediates never overflow. Returns the signed
/// mantissa and the natural log of the applied scale. `recip[j]` must hold
/// 1 / (j + 1); divisions on the recurrence's critical path roughly double
/// its cost.
fn laguerre_scaled_recip(s: usize, d: usize, x: f64, recip: &[f64]) -> (f64, f64) {
    if s == 0 {
        return (1.0, 0.0);
    }
    let df = d as f64;
    let mut prev = 1.0;
    let mut cur = 1.0 + df - x;
    let mut scale_ln = 0.0;
    for j in 1..s {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + df - x) * cur - (jf + df) * prev) * recip[j];
        prev = cur;
        cur = next;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            prev *= 1e-250;
            scale_ln += 250.0 * std::f64::consts::LN_10;
        }
    }
    (cur, scale_ln)
}

fn laguerre_scaled(s: usize, d: usize, x: f64) -> (f64, f64) {
    if s == 0 {
        return (1.0, 0.0);
    }
    let recip: Vec<f64> = (0..s).map(|j| 1.0 / (j as f64 + 1.0)).collect();
    laguerre_scaled_recip(s, d, x, &recip)
}

/// i^d for d >= 0.
fn i_power(d: usize) -> Complex64 {
    match d % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Closed-form element with the half-log factorial ratio ln(s!/(s+d)!)/2
/// supplied by the caller.
fn element_with_ratio(n: usize, m: usize, kappa: f64, half_ln_fact_ratio: f64) -> Complex64 {
    let d = n.abs_diff(m);
    if kappa == 0.0 {
        return if d == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let s = n.min(m);
    let x = kappa * kappa;
    let (lag, lag_scale_ln) = laguerre_scaled(s, d, x);
    if lag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let ln_mag = -x / 2.0 + d as f64 * kappa.abs().ln() + half_ln_fact_ratio
        + lag.abs().ln()
        + lag_scale_ln;
    let mut sign = lag.signum();
    if kappa < 0.0 && d % 2 == 1 {
        sign = -sign;
    }
    i_power(d) * (sign * ln_mag.exp())
}

/// Closed-form element of exp(i kappa (a + a')), all prefactors in log space.
fn element(n: usize, m: usize, kappa: f64) -> Complex64 {
    let d = n.abs_diff(m);
    let s = n.min(m);
    // 0.5 * ln(s! / (s+d)!)
    let half_ln_fact_ratio: f64 =
        -0.5 * ((s + 1)..=(s + d)).map(|j| (j as f64).ln()).sum::<f64>();
    element_with_ratio(n, m, kappa, half_ln_fact_ratio)
}

/// `<n| exp(i kappa (a + a')) |m>` evaluated in log space; never NaN, exact
/// zero below the double-precision floor.
pub fn displacement_element(n: usize, m: usize, kick: KickStrength) -> DisplacementAmplitude {
    DisplacementAmplitude { value: element(n, m, kick.kappa()), n, m }
}

/// All elements `<n|D|m>` for n = 0..=n_max at fixed m.
///
/// Panics if `n_max < m`; the row would not contain the diagonal.
pub fn displacement_row(m: usize, kick: KickStrength, n_max: usize) -> Vec<DisplacementAmplitude> {
    assert!(n_max >= m, "displacement_row: n_max = {n_max} < m = {m}");
    (0..=n_max)
        .map(|n| DisplacementAmplitude { value: element(n, m, kick.kappa()), n, m })
        .collect()
}

/// Dense (dim x dim) table of exp(i kappa (a + a')) elements, stored as
/// separate real and imaginary planes for the rate-assembly kernels.
///
/// Every entry comes from the closed form; a shared log-factorial prefix
/// table keeps the cost at one Laguerre recurrence per element. Ladder
/// recurrences that would fill the table in O(dim^2) are amplifying near the
/// diagonal for large indices, so they are not used here.
#[derive(Debug, Clone)]
pub struct DisplacementMatrix {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl DisplacementMatrix {
    pub fn build(kappa: f64, dim: usize) -> Self {
        assert!(dim >= 1);
        assert!(kappa.is_finite());
        let mut re = vec![0.0; dim * dim];
        let mut im = vec![0.0; dim * dim];
        if kappa == 0.0 {
            for n in 0..dim {
                re[n * dim + n] = 1.0;
            }
            return Self { dim, re, im };
        }
        let x = kappa * kappa;
        let ln_abs_kappa = kappa.abs().ln();
        let half_ln: Vec<f64> = (0..=dim).map(|j| 0.5 * (j as f64).ln()).collect();
        let recip: Vec<f64> = (0..dim).map(|j| 1.0 / (j as f64 + 1.0)).collect();
        for m in 0..dim {
            // ln of e^{-x/2} |kappa|^d sqrt(m!/n!) along the column, updated
            // incrementally in n = m + d.
            let mut ln_pref = -x / 2.0;
            for n in m..dim {
                let d = n - m;
                if n > m {
                    ln_pref += ln_abs_kappa - half_ln[n];
                }
                let (lag, lag_scale_ln) = laguerre_scaled_recip(m, d, x, &recip);
                let value = if lag == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let mut sign = lag.signum();
                    if kappa < 0.0 && d % 2 == 1 {
                        sign = -sign;
                    }
                    i_power(d) * (sign * (ln_pref + lag.abs().ln() + lag_scale_ln).exp())
                };
                re[n * dim + m] = value.re;
                im[n * dim + m] = value.im;
                re[m * dim + n] = value.re;
                im[m * dim + n] = value.im;
            }
        }
        Self { dim, re, im }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        Complex64::new(self.re[n * self.dim + m], self.im[n * self.dim + m])
    }

    pub fn row_re(&self, n: usize) -> &[f64] {
        &self.re[n * self.dim..(n + 1) * self.dim]
    }

    pub fn row_im(&self, n: usize) -> &[f64] {
        &self.im[n * self.dim..(n + 1) * self.dim]
    }
}

/// Basis headroom needed before truncating exp(i kappa (a + a')): empirical
/// bound on the spectral spread, validated by the unitarity tests.
pub fn required_padding(kappa: f64) -> usize {
    (6.0 * kappa * kappa + 10.0 * kappa.abs() + 20.0).ceil() as usize
}

/// Brute-force displacement matrix by eigendecomposition of the tridiagonal
/// position operator on a padded basis, truncated back to (n_max+1)^2.
///
/// Deliberately shares no code with [`displacement_element`]; the test suites
/// use it as the independent reference.
pub fn oracle_displacement_matrix(
    kick: KickStrength,
    n_max: usize,
    padding: usize,
) -> Result<DMatrix<Complex64>, FockError> {
    let kappa = kick.kappa();
    let required = required_padding(kappa);
    if padding < required {
        return Err(FockError::PaddingTooSmall { kappa, required, got: padding });
    }
    let big = n_max + padding + 1;
    let mut x = DMatrix::<f64>::zeros(big, big);
    for j in 0..big - 1 {
        let b = ((j + 1) as f64).sqrt();
        x[(j, j + 1)] = b;
        x[(j + 1, j)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(x);
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| Complex64::from_polar(1.0, kappa * lambda))
        .collect();
    let dim = n_max + 1;
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 0..dim {
        for m in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, phase) in phases.iter().enumerate() {
                acc += phase * (eig.eigenvectors[(n, j)] * eig.eigenvectors[(m, j)]);
            }
            out[(n, m)] = acc;
        }
    }
    Ok(out)
}
