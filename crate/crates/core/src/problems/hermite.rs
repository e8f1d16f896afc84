//! Gauss–Hermite quadrature (weight `exp(-s^2)` over the real line).
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of
//! the orthonormal Hermite recurrence, isolated by Sturm-count bisection
//! (robust at any order, unlike Newton from asymptotic guesses) and then
//! Newton-polished. Weights come from the derivative identity
//! `w = 2 / p_n'(x)^2`. For large rules the outermost weights underflow to
//! zero, which is harmless here: those nodes sit where the weight factor
//! has already decayed far below any tolerance this crate uses.

use crate::{Error, Result};

/// Nodes and weights of an n-point Gauss–Hermite rule.
#[derive(Clone, Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite value and derivative at `z`:
/// `p_0 = pi^{-1/4}`, `p_j = z sqrt(2/j) p_{j-1} - sqrt((j-1)/j) p_{j-2}`,
/// `p_n' = sqrt(2n) p_{n-1}`.
fn eval(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Number of eigenvalues of the Jacobi matrix strictly below `lambda`
/// (Sturm count via the LDL^T recurrence; diagonal is zero, squared
/// off-diagonals are `k/2`).
fn count_below(n: usize, lambda: f64) -> usize {
    let mut count = 0;
    let mut d = -lambda;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        d = -lambda - (k as f64 / 2.0) / d;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

impl HermiteRule {
    pub fn new(n: usize) -> Result<Self> {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Gershgorin: every eigenvalue within the row-sum bound
        let r = 2.0 * (((n.max(2) - 1) as f64) / 2.0).sqrt() + 1.0;
        let m = n / 2; // strictly positive roots; odd n has a zero in the middle
        for idx in 0..m {
            // eigenvalues ascending; index i is in the positive half
            let i = n - 1 - idx;
            let mut lo = 0.0;
            let mut hi = r;
            // invariant: count(lo) <= i < count(hi)
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if count_below(n, mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-13 {
                    break;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..20 {
                let (p, dp) = eval(n, z);
                pp = dp;
                let dz = p / dp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged || !z.is_finite() {
                return Err(Error::Numerical(format!(
                    "Gauss-Hermite root {idx} of {n} did not converge"
                )));
            }
            let w = 2.0 / (pp * pp); // underflows to 0 at extreme nodes of large rules
            nodes[n - 1 - idx] = z;
            nodes[idx] = -z;
            weights[n - 1 - idx] = w;
            weights[idx] = w;
        }
        if n % 2 == 1 {
            let (_, pp) = eval(n, 0.0);
            nodes[m] = 0.0;
            weights[m] = 2.0 / (pp * pp);
        }
        // descending order, largest node first
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f(s) * exp(-s^2)` over the real line.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }
}
