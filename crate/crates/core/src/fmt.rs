//! Output formatting shared by every serialized report.

use serde::Serializer;

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Serializes a probability with 12 significant digits.
pub fn sig12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig12(*x))
}

pub fn sig12_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| round_sig12(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round_sig12(0.123456789012345), 0.123456789012);
        assert_eq!(round_sig12(1.0), 1.0);
        assert_eq!(round_sig12(0.0), 0.0);
        assert_eq!(round_sig12(2.6e-300), 2.6e-300);
    }
}
