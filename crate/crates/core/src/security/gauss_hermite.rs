//! Gauss-Hermite quadrature nodes for the BIAWGN mutual-information integral.
//!
//! Nodes and weights for weight function `e^{-x^2}` are computed once in
//! `f64` by Newton iteration on the orthonormal Hermite recurrence and
//! cached; callers convert to their scalar type.

use std::sync::OnceLock;

/// Number of quadrature nodes used by the mutual-information integral.
pub const BIAWGN_NODES: usize = 256;

/// Computes the `n`-point Gauss-Hermite rule (physicists' convention,
/// weight `e^{-x^2}`). Nodes ascend; weights are positive and sum to
/// `sqrt(pi)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let pim4 = core::f64::consts::PI.powf(-0.25);
    let half = n.div_ceil(2);

    let mut x = 0.0f64;
    for i in 0..half {
        // initial guesses, largest root first
        x = match i {
            0 => ((2 * n + 1) as f64).sqrt() - 1.85575 * ((2 * n + 1) as f64).powf(-1.0 / 6.0),
            1 => x - 1.14 * (n as f64).powf(0.426) / x,
            2 => 1.86 * x - 0.86 * nodes[n - 1],
            3 => 1.91 * x - 0.91 * nodes[n - 2],
            _ => 2.0 * x - nodes[n - i + 1],
        };
        let mut pp = 0.0f64;
        for _ in 0..200 {
            // orthonormal recurrence: p_{j+1} = x sqrt(2/(j+1)) p_j - sqrt(j/(j+1)) p_{j-1}
            let mut p1 = pim4;
            let mut p2 = 0.0f64;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = 2.0 / (pp * pp);
        weights[i] = weights[n - 1 - i];
    }
    (nodes, weights)
}

/// Cached rule shared by all mutual-information evaluations.
pub fn biawgn_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(BIAWGN_NODES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_match_gaussian_integrals() {
        for &n in &[8usize, 64, 256] {
            let (x, w) = gauss_hermite(n);
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            let sqrt_pi = core::f64::consts::PI.sqrt();
            assert_abs_diff_eq!(m0, sqrt_pi, epsilon = 1e-12);
            assert_abs_diff_eq!(m2, sqrt_pi / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m4, 3.0 * sqrt_pi / 4.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn nodes_symmetric_and_sorted() {
        let (x, _) = gauss_hermite(256);
        for i in 0..128 {
            assert_abs_diff_eq!(x[i], -x[255 - i], epsilon = 1e-14);
        }
        for i in 1..256 {
            assert!(x[i] > x[i - 1]);
        }
    }
}
