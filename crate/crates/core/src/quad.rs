//! Gauss-Legendre quadrature on [-1, 1].
//!
//! Nodes are the roots of the Legendre polynomial P_n, found by Newton
//! iteration from the Chebyshev-like initial guess; weights follow from the
//! derivative at each root. An n-point rule integrates polynomials up to
//! degree 2n-1 exactly, which is what makes it converge spectrally on the
//! smooth angular integrands produced by the emission kernels.

/// A fixed Gauss-Legendre rule: `nodes[i]` in (-1, 1) ascending, with
/// matching `weights[i]` summing to 2.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Legendre P_n and its derivative at x, by the three-term recurrence.
fn legendre_pair(order: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for j in 2..=order {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    let dp = order as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

impl GaussLegendre {
    /// Build the `order`-point rule. Panics if `order` is zero.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        if order == 1 {
            return Self { nodes: vec![0.0], weights: vec![2.0] };
        }
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let half = order / 2;
        for i in 0..half {
            // Tricomi-style initial guess for the i-th root in (0, 1).
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75)
                / (order as f64 + 0.5))
                .cos();
            for _ in 0..100 {
                let (p, d) = legendre_pair(order, x);
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            // One clean-up step, then the derivative at the settled node.
            let (p, d) = legendre_pair(order, x);
            x -= p / d;
            let dp = legendre_pair(order, x).1;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[order - 1 - i] = x;
            nodes[i] = -x;
            weights[order - 1 - i] = w;
            weights[i] = w;
        }
        if order % 2 == 1 {
            let (_, dp) = legendre_pair(order, 0.0);
            nodes[half] = 0.0;
            weights[half] = 2.0 / (dp * dp);
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over [-1, 1].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
