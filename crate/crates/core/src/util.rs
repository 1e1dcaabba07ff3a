//! Small shared helpers: CSV number formatting and bit packing.

/// Formats a value in plain decimal notation with 12 significant digits.
///
/// Used by every CSV surface so that re-runs are byte-identical.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Packs bits (`0`/`1` bytes) LSB-first into bytes.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

/// Inverse of [`pack_bits`]; `n` is the number of valid bits.
pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(1.0), "1.00000000000");
        assert_eq!(fmt_sig12(0.0297029702970297), "0.0297029702970");
        assert_eq!(fmt_sig12(123456.0), "123456.000000");
    }

    #[test]
    fn bit_pack_roundtrip() {
        let bits: Vec<u8> = (0..19).map(|i| (i * 7 % 3 == 0) as u8).collect();
        assert_eq!(unpack_bits(&pack_bits(&bits), bits.len()), bits);
    }
}
