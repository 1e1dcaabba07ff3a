//! Syndrome-constrained sum-product decoding on the factor graph.
//!
//! Flooding schedule in the log-likelihood domain. The decoder searches for
//! bits satisfying `H * bits = syndrome`, so the reference word is the coset
//! identified by the disclosed parity bits rather than the zero codeword.

use crate::reconcile::code::LdpcCode;

/// Message and channel-LLR clip magnitude.
pub const LLR_CLIP: f64 = 30.0;

/// Default iteration budget of the flooding schedule.
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Output of a decode attempt.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Hard decisions; satisfy the syndrome exactly when `converged`.
    pub bits: Vec<u8>,
    pub converged: bool,
    /// Iterations performed; 0 when the channel hard decision already
    /// satisfies the syndrome.
    pub iters: usize,
}

/// Precomputed edge structure reusable across frames of the same code.
struct EdgeLayout {
    /// Edge endpoints grouped by check: for check c, edges
    /// `check_start[c]..check_start[c+1]` with variable ids `edge_var[..]`.
    check_start: Vec<usize>,
    edge_var: Vec<u32>,
    /// For each variable, its edge ids (into the check-major arrays).
    var_edges: Vec<Vec<u32>>,
}

impl EdgeLayout {
    fn new(code: &LdpcCode) -> Self {
        let mut check_start = Vec::with_capacity(code.m_checks() + 1);
        let mut edge_var = Vec::with_capacity(code.num_edges());
        check_start.push(0usize);
        for c in 0..code.m_checks() {
            edge_var.extend_from_slice(code.check(c));
            check_start.push(edge_var.len());
        }
        let mut var_edges = vec![Vec::new(); code.n()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[v as usize].push(e as u32);
        }
        Self { check_start, edge_var, var_edges }
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

/// Decodes toward the coset fixed by `syndrome`.
///
/// `llrs[i] > 0` means bit `i` is more likely 1 (the convention of the
/// reconciliation layer); non-convergence returns the best-effort hard
/// decision with `converged = false`.
pub fn bp_decode(
    code: &LdpcCode,
    llrs: &[f64],
    syndrome: &[u8],
    max_iters: usize,
) -> DecodeResult {
    assert_eq!(llrs.len(), code.n(), "LLR length must equal code length");
    assert_eq!(syndrome.len(), code.m_checks(), "syndrome length mismatch");

    // internal convention: L = ln(p0/p1), so positive favours bit 0
    let channel: Vec<f64> = llrs.iter().map(|&l| clip(-l)).collect();

    let mut hard: Vec<u8> = channel.iter().map(|&l| u8::from(l < 0.0)).collect();
    if code.syndrome(&hard) == syndrome {
        return DecodeResult { bits: hard, converged: true, iters: 0 };
    }

    let layout = EdgeLayout::new(code);
    let n_edges = layout.edge_var.len();
    let mut v2c = vec![0.0f64; n_edges];
    let mut c2v = vec![0.0f64; n_edges];
    for (v, edges) in layout.var_edges.iter().enumerate() {
        for &e in edges {
            v2c[e as usize] = channel[v];
        }
    }

    let mut posterior = vec![0.0f64; code.n()];
    let mut tanh_buf: Vec<f64> = Vec::new();
    for iter in 1..=max_iters {
        // check-node update via prefix/suffix products (no division)
        for c in 0..code.m_checks() {
            let lo = layout.check_start[c];
            let hi = layout.check_start[c + 1];
            let deg = hi - lo;
            tanh_buf.clear();
            tanh_buf.extend((lo..hi).map(|e| (v2c[e] * 0.5).tanh()));
            let sign = if syndrome[c] == 1 { -1.0 } else { 1.0 };
            // prefix[i] = prod of tanh_buf[..i], suffix accumulated in place
            let mut prefix = 1.0f64;
            let mut prefixes = [0.0f64; 64];
            debug_assert!(deg <= 64, "check degree beyond buffer");
            for (i, &t) in tanh_buf.iter().enumerate() {
                prefixes[i] = prefix;
                prefix *= t;
            }
            let mut suffix = 1.0f64;
            for i in (0..deg).rev() {
                let excl = (prefixes[i] * suffix).clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
                c2v[lo + i] = clip(2.0 * sign * excl.atanh());
                suffix *= tanh_buf[i];
            }
        }

        // variable-node update and posterior
        for (v, edges) in layout.var_edges.iter().enumerate() {
            let mut total = channel[v];
            for &e in edges {
                total += c2v[e as usize];
            }
            posterior[v] = total;
            for &e in edges {
                v2c[e as usize] = clip(total - c2v[e as usize]);
            }
        }

        for (h, &p) in hard.iter_mut().zip(posterior.iter()) {
            *h = u8::from(p < 0.0);
        }
        if code.syndrome(&hard) == syndrome {
            return DecodeResult { bits: hard, converged: true, iters: iter };
        }
    }
    DecodeResult { bits: hard, converged: false, iters: max_iters }
}
