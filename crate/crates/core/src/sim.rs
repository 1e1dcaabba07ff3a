//! Monte-Carlo simulation of the prepare-and-measure rounds.
//!
//! The quantum channel is simulated at the quadrature level: every protocol
//! statistic consumed downstream is second-order, and the channel model is
//! Gaussian, so sampling `y = sqrt(T) a + N(0, 1 + xi_B)` is exact. Symbols
//! and bases are uniform; the generator is counter-based (ChaCha20) with the
//! 64-bit seed recorded in the batch, and disjoint index ranges draw from
//! independent streams so results do not depend on partitioning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::security::ChannelParams;
use crate::state_algebra::ModulationParams;
use crate::util::fmt_sig12;

/// Symbols per independent RNG stream; fixed so that chunked generation is
/// reproducible regardless of thread count.
const STREAM_CHUNK: usize = 8192;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parameter estimation needs at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Quadrature measured by Bob in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Q,
    P,
}

impl Basis {
    pub fn as_char(self) -> char {
        match self {
            Basis::Q => 'q',
            Basis::P => 'p',
        }
    }
}

/// Sign of the symbol's mean on the given quadrature.
///
/// Symbol `k` is the coherent state at phase `(2k+1) pi/4`, so the q-signs
/// run `+,-,-,+` and the p-signs `+,+,-,-` for `k = 0..3`.
pub fn quadrature_sign(symbol: u8, basis: Basis) -> f64 {
    debug_assert!(symbol < 4);
    let positive = match basis {
        Basis::Q => symbol == 0 || symbol == 3,
        Basis::P => symbol == 0 || symbol == 1,
    };
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// One simulated batch of protocol rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundBatch {
    /// Alice's symbol choices, uniform on {0,1,2,3}.
    pub symbols: Vec<u8>,
    /// Bob's quadrature choices.
    pub bases: Vec<Basis>,
    /// Alice's symbol mean projected on Bob's basis: `+-alpha*sqrt(2)`.
    pub alice_quad: Vec<f64>,
    /// Bob's homodyne outcomes.
    pub bob_y: Vec<f64>,
    /// Seed the batch was generated from.
    pub seed: u64,
}

impl RoundBatch {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Simulates `n` rounds: uniform symbols and bases, then
/// `y = sqrt(T) a + g` with `g ~ N(0, 1 + xi_B)`. Deterministic in `seed`.
pub fn simulate_batch(
    n: usize,
    modulation: &ModulationParams<f64>,
    ch: &ChannelParams<f64>,
    seed: u64,
) -> RoundBatch {
    let amp = modulation.quadrature_amplitude();
    let sqrt_t = ch.transmission().sqrt();
    let noise_sigma = (1.0 + ch.excess_noise_at_bob()).sqrt();
    let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");

    let n_chunks = n.div_ceil(STREAM_CHUNK);
    let mut chunks: Vec<(Vec<u8>, Vec<Basis>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(n_chunks);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk_idx| {
            let lo = chunk_idx * STREAM_CHUNK;
            let hi = ((chunk_idx + 1) * STREAM_CHUNK).min(n);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(chunk_idx as u64 + 1);
            let len = hi - lo;
            let mut symbols = Vec::with_capacity(len);
            let mut bases = Vec::with_capacity(len);
            let mut alice_quad = Vec::with_capacity(len);
            let mut bob_y = Vec::with_capacity(len);
            for _ in 0..len {
                let s: u8 = rng.random_range(0..4);
                let b = if rng.random_bool(0.5) { Basis::Q } else { Basis::P };
                let a = quadrature_sign(s, b) * amp;
                let y = sqrt_t * a + normal.sample(&mut rng);
                symbols.push(s);
                bases.push(b);
                alice_quad.push(a);
                bob_y.push(y);
            }
            (symbols, bases, alice_quad, bob_y)
        })
        .collect_into_vec(&mut chunks);

    let mut batch = RoundBatch {
        symbols: Vec::with_capacity(n),
        bases: Vec::with_capacity(n),
        alice_quad: Vec::with_capacity(n),
        bob_y: Vec::with_capacity(n),
        seed,
    };
    for (s, b, a, y) in chunks {
        batch.symbols.extend(s);
        batch.bases.extend(b);
        batch.alice_quad.extend(a);
        batch.bob_y.extend(y);
    }
    batch
}

/// Splits Bob's outcomes into raw-key bits and disclosed magnitudes.
///
/// The sign of `y` encodes the bit (the measure-zero tie `y = 0` maps to
/// bit 1), and `|y|` is revealed.
pub fn raw_key_split(bob_y: &[f64]) -> (Vec<u8>, Vec<f64>) {
    let bits = bob_y.iter().map(|&y| u8::from(y >= 0.0)).collect();
    let mags = bob_y.iter().map(|y| y.abs()).collect();
    (bits, mags)
}

/// Transmission and excess-noise estimates from disclosed rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub t_hat: f64,
    pub xi_hat: f64,
    pub n_samples: usize,
}

/// Minimum disclosed-subset size accepted by [`estimate_channel`].
pub const MIN_ESTIMATION_SAMPLES: usize = 1000;

/// Estimates `(T, xi_B)` from disclosed pairs:
/// `t_hat = (cov(a, y)/var(a))^2`, `xi_hat = var(y - sqrt(t_hat) a) - 1`.
pub fn estimate_channel(alice_quad: &[f64], bob_y: &[f64]) -> Result<ChannelEstimate, SimError> {
    if alice_quad.len() != bob_y.len() {
        return Err(SimError::LengthMismatch(format!(
            "{} alice values vs {} bob values",
            alice_quad.len(),
            bob_y.len()
        )));
    }
    let n = alice_quad.len();
    if n < MIN_ESTIMATION_SAMPLES {
        return Err(SimError::TooFewSamples { got: n, min: MIN_ESTIMATION_SAMPLES });
    }
    let nf = n as f64;
    let mean_a = alice_quad.iter().sum::<f64>() / nf;
    let mean_y = bob_y.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    for (&a, &y) in alice_quad.iter().zip(bob_y) {
        cov += (a - mean_a) * (y - mean_y);
        var_a += (a - mean_a) * (a - mean_a);
    }
    let slope = cov / var_a;
    let t_hat = slope * slope;
    let sqrt_t = slope.abs();
    let mut resid_mean = 0.0;
    for (&a, &y) in alice_quad.iter().zip(bob_y) {
        resid_mean += y - sqrt_t * a;
    }
    resid_mean /= nf;
    let mut resid_var = 0.0;
    for (&a, &y) in alice_quad.iter().zip(bob_y) {
        let r = y - sqrt_t * a - resid_mean;
        resid_var += r * r;
    }
    resid_var /= nf;
    Ok(ChannelEstimate { t_hat, xi_hat: resid_var - 1.0, n_samples: n })
}

/// Batch dump for interop testing: `index,symbol,basis,alice_quad,bob_y`.
pub fn batch_to_csv(batch: &RoundBatch) -> String {
    let mut out = String::from("index,symbol,basis,alice_quad,bob_y\n");
    for i in 0..batch.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            batch.symbols[i],
            batch.bases[i].as_char(),
            fmt_sig12(batch.alice_quad[i]),
            fmt_sig12(batch.bob_y[i]),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::security::NoiseRef;
    use approx::assert_abs_diff_eq;

    fn setup(v_a: f64, t: f64, xi: f64) -> (ModulationParams<f64>, ChannelParams<f64>) {
        (
            ModulationParams::from_variance(v_a).unwrap(),
            ChannelParams::from_transmission(t, xi, NoiseRef::BobInput).unwrap(),
        )
    }

    #[test]
    fn determinism_same_seed() {
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let a = simulate_batch(20_000, &m, &ch, 7);
        let b = simulate_batch(20_000, &m, &ch, 7);
        assert_eq!(a, b);
        let c = simulate_batch(20_000, &m, &ch, 8);
        assert_ne!(a.bob_y, c.bob_y);
    }

    #[test]
    fn prefix_stability_across_lengths() {
        // chunked streams: a longer batch extends a shorter one
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let a = simulate_batch(10_000, &m, &ch, 3);
        let b = simulate_batch(30_000, &m, &ch, 3);
        assert_eq!(a.bob_y[..], b.bob_y[..10_000]);
    }

    #[test]
    fn alice_quadrature_values() {
        let (m, ch) = setup(0.5, 1.0, 0.0);
        let amp = m.quadrature_amplitude();
        let batch = simulate_batch(4096, &m, &ch, 11);
        for i in 0..batch.len() {
            let expect = quadrature_sign(batch.symbols[i], batch.bases[i]) * amp;
            assert_eq!(batch.alice_quad[i], expect);
            assert!(batch.alice_quad[i].abs() == amp);
        }
    }

    #[test]
    fn noise_variance_matches_model() {
        // Var(y - sqrt(T) a) estimates 1 + xi
        let (m, ch) = setup(0.5, 1.0, 0.0);
        let n = 1_000_000;
        let batch = simulate_batch(n, &m, &ch, 21);
        let resid: Vec<f64> = batch
            .bob_y
            .iter()
            .zip(&batch.alice_quad)
            .map(|(y, a)| y - a)
            .collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
        assert!((0.995..=1.005).contains(&var), "residual variance {var}");
    }

    #[test]
    fn bob_variance_matches_covariance_block() {
        // sample Var(bob_y) within 5 CLT sigma of T V_A + 1 + xi
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let n = 1_000_000;
        let batch = simulate_batch(n, &m, &ch, 33);
        let mean = batch.bob_y.iter().sum::<f64>() / n as f64;
        let var = batch.bob_y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let expect = 0.25 * 0.5 + 1.01;
        let tol = 5.0 * (2.0 / n as f64).sqrt() * expect;
        assert!((var - expect).abs() <= tol, "var {var} vs {expect} +- {tol}");
    }

    #[test]
    fn symbol_uniformity_chi_square() {
        let (m, ch) = setup(0.5, 0.5, 0.0);
        let n = 1_000_000usize;
        let batch = simulate_batch(n, &m, &ch, 55);
        let mut counts = [0usize; 4];
        for &s in &batch.symbols {
            counts[s as usize] += 1;
        }
        let expect = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 3 dof: mean 3, sd sqrt(6)
        assert!(chi2 <= 3.0 + 5.0 * 6.0f64.sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn bit_balance() {
        let (m, ch) = setup(0.5, 0.5, 0.005);
        let batch = simulate_batch(1_000_000, &m, &ch, 77);
        let (bits, _) = raw_key_split(&batch.bob_y);
        let mean = bits.iter().map(|&b| b as f64).sum::<f64>() / bits.len() as f64;
        assert!((0.495..=0.505).contains(&mean), "bit mean {mean}");
    }

    #[test]
    fn raw_key_split_definition() {
        let y = [-0.3, 1.2, 0.0, -0.0];
        let (bits, mags) = raw_key_split(&y);
        assert_eq!(bits, vec![0, 1, 1, 1]);
        assert_eq!(mags, vec![0.3, 1.2, 0.0, 0.0]);
        // reconstruction identity
        for i in 0..y.len() {
            let rebuilt = (2.0 * bits[i] as f64 - 1.0) * mags[i];
            assert_eq!(rebuilt, if y[i] == 0.0 { 0.0 } else { y[i] });
        }
    }

    /// Kolmogorov-Smirnov against the conditional law N(sqrt(T) amp, 1+xi)
    /// among rounds where Alice's projection is positive.
    #[test]
    fn conditional_distribution_ks() {
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let batch = simulate_batch(200_000, &m, &ch, 99);
        let amp = m.quadrature_amplitude();
        let mu = 0.25f64.sqrt() * amp;
        let sigma = 1.01f64.sqrt();
        let mut xs: Vec<f64> = batch
            .bob_y
            .iter()
            .zip(&batch.alice_quad)
            .filter(|(_, &a)| a > 0.0)
            .map(|(&y, _)| y)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len();
        assert!(n > 90_000);
        let normal = statrs::distribution::Normal::new(mu, sigma).unwrap();
        use statrs::distribution::ContinuousCDF;
        let mut d = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = normal.cdf(x);
            d = d.max((cdf - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        // critical value at significance 1e-3
        let crit = (-(0.0005f64.ln()) / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d <= crit, "KS statistic {d} > {crit}");
    }

    #[test]
    fn estimator_recovers_channel() {
        let (m, ch) = setup(0.5, 0.25, 0.0);
        let batch = simulate_batch(100_000, &m, &ch, 13);
        let est = estimate_channel(&batch.alice_quad, &batch.bob_y).unwrap();
        assert!((0.23..=0.27).contains(&est.t_hat), "t_hat {}", est.t_hat);
        assert!((-0.02..=0.02).contains(&est.xi_hat), "xi_hat {}", est.xi_hat);
        assert_eq!(est.n_samples, 100_000);
    }

    #[test]
    fn estimator_rejects_small_sets() {
        match estimate_channel(&[0.1; 10], &[0.1; 10]) {
            Err(SimError::TooFewSamples { got: 10, .. }) => {}
            other => panic!("expected TooFewSamples, got {other:?}"),
        }
        assert!(estimate_channel(&[0.1; 2000], &[0.1; 1999]).is_err());
    }

    #[test]
    fn estimator_consistency_improves_with_n() {
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let mut err_small = Vec::new();
        let mut err_large = Vec::new();
        for seed in 0..20 {
            let b1 = simulate_batch(10_000, &m, &ch, 1000 + seed);
            let e1 = estimate_channel(&b1.alice_quad, &b1.bob_y).unwrap();
            err_small.push((e1.t_hat - 0.25).abs());
            let b2 = simulate_batch(1_000_000, &m, &ch, 2000 + seed);
            let e2 = estimate_channel(&b2.alice_quad, &b2.bob_y).unwrap();
            err_large.push((e2.t_hat - 0.25).abs());
        }
        err_small.sort_by(|a, b| a.partial_cmp(b).unwrap());
        err_large.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            err_large[10] < err_small[10],
            "median |t_hat - T| did not shrink: {} vs {}",
            err_large[10],
            err_small[10]
        );
    }

    #[test]
    fn csv_dump_deterministic() {
        let (m, ch) = setup(0.5, 0.25, 0.01);
        let batch = simulate_batch(100, &m, &ch, 5);
        let csv = batch_to_csv(&batch);
        assert_eq!(csv, batch_to_csv(&batch));
        assert!(csv.starts_with("index,symbol,basis,alice_quad,bob_y\n"));
        assert_eq!(csv.lines().count(), 101);
    }
}
