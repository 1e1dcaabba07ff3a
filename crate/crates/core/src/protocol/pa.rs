//! Privacy amplification by Toeplitz-matrix universal hashing.
//!
//! The matrix is defined by a seeded ChaCha20 bitstream `d` of length
//! `out_len + in_len - 1`: row `i` reads `d[i + in_len - 1 - j]` at column
//! `j`, so output bit `i` is the parity of the input AND a sliding window
//! of the stream. Both endpoints derive identical keys from the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::SessionError;

/// Hashes `bits` (0/1 bytes) down to `out_len` bits.
pub fn privacy_amplification(
    bits: &[u8],
    seed: u64,
    out_len: usize,
) -> Result<Vec<u8>, SessionError> {
    if out_len > bits.len() {
        return Err(SessionError::Config(format!(
            "output length {out_len} exceeds input length {}",
            bits.len()
        )));
    }
    if out_len == 0 {
        return Ok(Vec::new());
    }
    let in_len = bits.len();
    let diag_len = out_len + in_len - 1;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // packed stream, LSB-first within each word
    let n_words = diag_len.div_ceil(64);
    let mut diag = vec![0u64; n_words + 1]; // sentinel word for window reads
    for w in diag.iter_mut().take(n_words) {
        *w = rng.random();
    }

    // pack the input reversed so row i is a plain dot product with the
    // stream window starting at bit offset i
    let mut rev = vec![0u64; in_len.div_ceil(64)];
    for (j, &b) in bits.iter().enumerate() {
        if b != 0 {
            let pos = in_len - 1 - j;
            rev[pos / 64] |= 1u64 << (pos % 64);
        }
    }

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let mut acc = 0u64;
        let word_off = i / 64;
        let bit_off = i % 64;
        for (w, &r) in rev.iter().enumerate() {
            let lo = diag[word_off + w] >> bit_off;
            let window = if bit_off == 0 {
                lo
            } else {
                lo | (diag[word_off + w + 1] << (64 - bit_off))
            };
            acc ^= window & r;
        }
        out.push((acc.count_ones() & 1) as u8);
    }
    Ok(out)
}
