//! Shared oracle machinery for the integration suites. Everything here
//! deliberately avoids the crate's fast paths: displacement amplitudes come
//! from the spectral oracle, integrals from composite Simpson, and steady
//! states from a dense linear solve.

// Each integration target compiles this module and uses its own subset.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use trapcool::{
    oracle_displacement_matrix, required_padding, AngularDistribution, KickStrength,
    PhysicalParams, PopulationVector, RateMatrix,
};

pub fn fig3_params() -> PhysicalParams {
    PhysicalParams::with_halfwidth_ratio(5.0, 0.1, 0.5, 0.01, AngularDistribution::Dipole)
        .unwrap()
}

/// Dense displacement matrix on 0..=n_max via the eigendecomposition oracle.
pub fn oracle_matrix(kappa: f64, n_max: usize) -> DMatrix<Complex64> {
    let pad = required_padding(kappa);
    oracle_displacement_matrix(KickStrength::new(kappa).unwrap(), n_max, pad).unwrap()
}

/// Composite Simpson over [-1, 1] with an odd number of points.
pub fn simpson<F: FnMut(f64) -> f64>(points: usize, mut f: F) -> f64 {
    assert!(points >= 3 && points % 2 == 1);
    let h = 2.0 / (points - 1) as f64;
    let mut total = 0.0;
    for i in 0..points {
        let u = -1.0 + i as f64 * h;
        let w = if i == 0 || i == points - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * f(u);
    }
    total * h / 3.0
}

/// Transition rate by brute force: spectral amplitudes from one
/// eigendecomposition of the padded position operator, naive complex
/// arithmetic, Simpson angular integration.
pub fn brute_force_rate(
    n: usize,
    m: usize,
    delta: f64,
    params: &PhysicalParams,
    k_max: usize,
    simpson_points: usize,
) -> f64 {
    let big = k_max + required_padding(params.eta) + 1;
    let mut x = DMatrix::<f64>::zeros(big, big);
    for j in 0..big - 1 {
        let b = ((j + 1) as f64).sqrt();
        x[(j, j + 1)] = b;
        x[(j + 1, j)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(x);
    // <a| e^{i kappa X} |b> = sum_j V[a][j] e^{i kappa lambda_j} V[b][j]
    let spectral_row = |a: usize, kappa: f64| -> Vec<Complex64> {
        (0..=k_max)
            .map(|b| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..big {
                    let phase = Complex64::from_polar(1.0, kappa * eig.eigenvalues[j]);
                    acc += phase * (eig.eigenvectors[(a, j)] * eig.eigenvectors[(b, j)]);
                }
                acc
            })
            .collect()
    };
    let absorb = spectral_row(m, params.eta);
    let coeff: Vec<Complex64> = absorb
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let gap = delta - (k as f64 - m as f64);
            a * params.halfwidth / Complex64::new(gap, params.halfwidth)
        })
        .collect();
    let density = |u: f64| match params.angular {
        AngularDistribution::Dipole => 0.375 * (1.0 + u * u),
        AngularDistribution::Isotropic => 0.5,
    };
    simpson(simpson_points, |u| {
        let emit = spectral_row(n, -params.eta * u);
        let sum: Complex64 = emit.iter().zip(&coeff).map(|(e, c)| e * c).sum();
        density(u) * sum.norm_sqr()
    })
}

/// Emptying rate by brute force from the spectral oracle.
pub fn brute_force_emptying(n: usize, delta: f64, params: &PhysicalParams, k_max: usize) -> f64 {
    let absorb = oracle_matrix(params.eta, k_max);
    let g2 = params.halfwidth * params.halfwidth;
    (0..=k_max)
        .map(|k| {
            let gap = delta - (k as f64 - n as f64);
            g2 * absorb[(k, n)].norm_sqr() / (gap * gap + g2)
        })
        .sum()
}

/// Stationary distribution of a generator: solve R x = 0, sum x = 1.
pub fn stationary_distribution(r: &RateMatrix) -> PopulationVector {
    let dim = r.dim();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..dim {
        for m in 0..dim {
            a[(n, m)] = r.entry(n, m);
        }
    }
    for m in 0..dim {
        a[(0, m)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dim);
    b[0] = 1.0;
    let solved = a.lu().solve(&b).expect("generator has a one-dimensional kernel");
    // Rounding can leave tiny negative entries; clamp before normalizing.
    let clamped: Vec<f64> = solved.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    PopulationVector::from_probabilities(clamped.iter().map(|x| x / total).collect()).unwrap()
}
