//! Reverse reconciliation at low SNR.
//!
//! Bob's raw key is one sign bit per block of `k_rep` homodyne outcomes;
//! the magnitudes and in-block relative signs are disclosed, so Alice sees
//! each block as a single BIAWGN use at `k_rep` times the per-symbol SNR.
//! Syndrome decoding of the LDPC outer code then corrects Alice's block
//! bits toward Bob's. The repetition factor converts a code of rate `R`
//! into one of rate `R/k` with a small, exactly-characterised efficiency
//! penalty.

pub mod code;
pub mod decoder;

use thiserror::Error;

pub use code::{peg_regular, systematic_ra, CodeError, LdpcCode};
pub use decoder::{bp_decode, DecodeResult, DEFAULT_MAX_ITERS, LLR_CLIP};

use crate::scalar::Real;
use crate::security::{ChannelParams, NoiseRef};
use crate::sim::{raw_key_split, simulate_batch};
use crate::state_algebra::ModulationParams;
use crate::util::{pack_bits, unpack_bits};

#[derive(Debug, Error)]
pub enum ReconcileError {
    #[error("data length {got} is not k_rep * n = {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("side info deserialization failed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Bob's reconciliation disclosure for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    /// `|y|` for all `N = k_rep * n` symbols.
    pub magnitudes: Vec<f64>,
    /// Per-block sign vectors `s_{i,j} = sign(y_first * y_j)`, with
    /// `s_{i,1} = +1` by construction. Flattened block-major.
    pub rel_signs: Vec<i8>,
    /// `H * Y` over GF(2), one bit per check.
    pub syndrome: Vec<u8>,
    pub k_rep: usize,
    /// 64-bit polynomial hash of Bob's block bits, for error detection.
    pub verify_tag: u64,
}

/// Number of classical bits disclosed by the tag.
pub const VERIFY_TAG_BITS: u64 = 64;

/// Polynomial hash over 0/1 block bits (Horner form, odd multiplier).
pub fn verify_tag(bits: &[u8]) -> u64 {
    const MULT: u64 = 0x9e37_79b9_7f4a_7c15;
    bits.iter().fold(0u64, |acc, &b| {
        acc.wrapping_mul(MULT).wrapping_add(u64::from(b) + 1)
    })
}

/// Sign with the tie at zero resolved upward, matching the raw-key rule.
fn sign_of(y: f64) -> i8 {
    if y >= 0.0 {
        1
    } else {
        -1
    }
}

/// Builds Bob's block bits and the side information for one frame.
///
/// `Y_i` is the sign bit of the first element of block `i`; the relative
/// signs let Alice reconstruct every symbol sign from `Y_i` alone.
pub fn make_side_info(
    bob_y: &[f64],
    code: &LdpcCode,
    k_rep: usize,
) -> Result<(Vec<u8>, SideInfo), ReconcileError> {
    let n = code.n();
    if k_rep == 0 || bob_y.len() != k_rep * n {
        return Err(ReconcileError::LengthMismatch { got: bob_y.len(), expected: k_rep * n });
    }
    let (_, magnitudes) = raw_key_split(bob_y);
    let mut y_bits = Vec::with_capacity(n);
    let mut rel_signs = Vec::with_capacity(bob_y.len());
    for block in bob_y.chunks_exact(k_rep) {
        let first = sign_of(block[0]);
        y_bits.push(u8::from(first > 0));
        for &y in block {
            rel_signs.push(first * sign_of(y));
        }
    }
    let syndrome = code.syndrome(&y_bits);
    let tag = verify_tag(&y_bits);
    Ok((
        y_bits,
        SideInfo { magnitudes, rel_signs, syndrome, k_rep, verify_tag: tag },
    ))
}

/// Per-block log-likelihood ratios for `Y_i = 1` versus `Y_i = 0`:
///
/// `LLR_i = sum_j 2 sqrt(t) s_{i,j} |y|_{i,j} a_{i,j} / (1 + xi)`,
///
/// the log ratio of Bob's Gaussian observation density under the two sign
/// hypotheses, summed over the block (matched-filter combining).
pub fn compute_llrs(alice_quad: &[f64], side: &SideInfo, t_hat: f64, xi_hat: f64) -> Vec<f64> {
    let k = side.k_rep;
    debug_assert_eq!(alice_quad.len(), side.magnitudes.len());
    let scale = 2.0 * t_hat.max(0.0).sqrt() / (1.0 + xi_hat);
    alice_quad
        .chunks_exact(k)
        .zip(side.magnitudes.chunks_exact(k))
        .zip(side.rel_signs.chunks_exact(k))
        .map(|((a, mag), s)| {
            let mut llr = 0.0;
            for j in 0..k {
                llr += scale * f64::from(s[j]) * mag[j] * a[j];
            }
            llr
        })
        .collect()
}

/// Efficiency of the repetition-lowered code: at SNR `s/k`, a repetition
/// factor `k` over a base code with efficiency `beta_ldpc` at SNR `s` gives
///
/// `beta_R(s/k) = log2(1+s) / (k log2(1+s/k)) * beta_ldpc`.
pub fn beta_repetition<R: Real>(s: R, k: u32, beta_ldpc: R) -> R {
    let kf = R::of(f64::from(k));
    (R::one() + s).log2() / (kf * (R::one() + s / kf).log2()) * beta_ldpc
}

/// Small-SNR approximation `beta_R ~ (1 - s/2) beta_ldpc`.
pub fn beta_repetition_approx<R: Real>(s: R, beta_ldpc: R) -> R {
    (R::one() - s / R::of(2.0)) * beta_ldpc
}

/// Outcome of an end-to-end reconciliation benchmark.
#[derive(Debug, Clone, Copy)]
pub struct EfficiencyReport {
    /// Per-symbol SNR of the benchmark.
    pub snr: f64,
    /// Net bits extracted per frame: `rate * n`.
    pub bits_extracted: usize,
    /// Symbols consumed per frame: `k_rep * n`.
    pub n_symbols: usize,
    /// `(rate * n) / (N * log2(1+snr)/2)`.
    pub beta_measured: f64,
    /// Frame error rate over the trials (tag mismatch or non-convergence).
    pub fer: f64,
    /// Prediction from the repetition identity at the block SNR.
    pub beta_predicted: f64,
    pub trials: usize,
}

/// Runs `trials` seeded frames end to end: simulate, disclose, decode,
/// verify. The synthetic channel is unit-noise BIAWGN at exactly the
/// requested per-symbol SNR.
pub fn measure_efficiency(
    code: &LdpcCode,
    k_rep: usize,
    snr: f64,
    trials: usize,
    seed: u64,
    max_iters: usize,
) -> EfficiencyReport {
    assert!(trials >= 1 && snr > 0.0);
    let n_symbols = k_rep * code.n();
    // V_A = snr on the identity channel gives y = +-sqrt(snr) + N(0,1)
    let modulation = ModulationParams::from_variance(snr).unwrap();
    let ch = ChannelParams::from_transmission(1.0, 0.0, NoiseRef::BobInput).unwrap();

    let mut failures = 0usize;
    for trial in 0..trials {
        let batch = simulate_batch(n_symbols, &modulation, &ch, seed.wrapping_add(trial as u64));
        let (y_bits, side) = make_side_info(&batch.bob_y, code, k_rep).expect("sized batch");
        let llrs = compute_llrs(&batch.alice_quad, &side, 1.0, 0.0);
        let dec = bp_decode(code, &llrs, &side.syndrome, max_iters);
        if !dec.converged || verify_tag(&dec.bits) != side.verify_tag {
            failures += 1;
        } else {
            debug_assert_eq!(dec.bits, y_bits);
        }
    }

    let i_gauss = 0.5 * (1.0 + snr).log2();
    let beta_measured = code.rate() * code.n() as f64 / (n_symbols as f64 * i_gauss);
    let s_block = snr * k_rep as f64;
    let beta_ldpc = code.rate() / (0.5 * (1.0 + s_block).log2());
    let beta_predicted = beta_repetition(s_block, k_rep as u32, beta_ldpc);
    EfficiencyReport {
        snr,
        bits_extracted: ((code.rate() * code.n() as f64).round()) as usize,
        n_symbols,
        beta_measured,
        fer: failures as f64 / trials as f64,
        beta_predicted,
        trials,
    }
}

// --- binary side-info serialization -------------------------------------
//
// Little-endian sections, each length-prefixed with u64:
//   [k_rep u64][verify_tag u64]
//   [n_mag u64][n_mag f64]
//   [n_sign_bits u64][packed sign bits, 1 = positive]
//   [n_syndrome_bits u64][packed syndrome bits]

impl SideInfo {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.magnitudes.len() * 8);
        out.extend_from_slice(&(self.k_rep as u64).to_le_bytes());
        out.extend_from_slice(&self.verify_tag.to_le_bytes());
        out.extend_from_slice(&(self.magnitudes.len() as u64).to_le_bytes());
        for m in &self.magnitudes {
            out.extend_from_slice(&m.to_le_bytes());
        }
        let sign_bits: Vec<u8> = self.rel_signs.iter().map(|&s| u8::from(s > 0)).collect();
        out.extend_from_slice(&(sign_bits.len() as u64).to_le_bytes());
        out.extend_from_slice(&pack_bits(&sign_bits));
        out.extend_from_slice(&(self.syndrome.len() as u64).to_le_bytes());
        out.extend_from_slice(&pack_bits(&self.syndrome));
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, ReconcileError> {
        let mut cur = Cursor { data, pos: 0 };
        let k_rep = cur.u64()? as usize;
        let verify_tag = cur.u64()?;
        let n_mag = cur.u64()? as usize;
        cur.check_remaining(n_mag.checked_mul(8).ok_or_else(|| overflow())?)?;
        let mut magnitudes = Vec::with_capacity(n_mag);
        for _ in 0..n_mag {
            magnitudes.push(f64::from_le_bytes(cur.array()?));
        }
        let n_signs = cur.u64()? as usize;
        let sign_bytes = cur.take(n_signs.div_ceil(8))?;
        let rel_signs: Vec<i8> = unpack_bits(sign_bytes, n_signs)
            .into_iter()
            .map(|b| if b == 1 { 1 } else { -1 })
            .collect();
        let n_synd = cur.u64()? as usize;
        let synd_bytes = cur.take(n_synd.div_ceil(8))?;
        let syndrome = unpack_bits(synd_bytes, n_synd);
        if cur.pos != data.len() {
            return Err(ReconcileError::Malformed("trailing bytes".into()));
        }
        if k_rep == 0 || n_signs != n_mag {
            return Err(ReconcileError::Malformed("inconsistent section sizes".into()));
        }
        Ok(SideInfo { magnitudes, rel_signs, syndrome, k_rep, verify_tag })
    }
}

fn overflow() -> ReconcileError {
    ReconcileError::Malformed("length overflow".into())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn check_remaining(&self, need: usize) -> Result<(), ReconcileError> {
        if self.pos + need > self.data.len() {
            return Err(ReconcileError::Malformed("truncated input".into()));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ReconcileError> {
        self.check_remaining(n)?;
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ReconcileError> {
        Ok(self.take(N)?.try_into().expect("sized take"))
    }

    fn u64(&mut self) -> Result<u64, ReconcileError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}
