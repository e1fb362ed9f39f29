//! Sinusoidal positional encoding of 3D points.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Number of frequency octaves per coordinate.
    pub l_pos: usize,
    /// Whether the raw coordinates are prepended to the encoding.
    pub include_input: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            l_pos: 6,
            include_input: true,
        }
    }
}

impl EncodingConfig {
    /// Encoded dimension: `3 * include_input + 6 * l_pos`.
    pub fn encoded_dim(&self) -> usize {
        3 * usize::from(self.include_input) + 6 * self.l_pos
    }
}

/// Encode a point as `[x] ++ [sin(2^k pi x_d), cos(2^k pi x_d)]` with the
/// octave `k` as the outer loop and the coordinate `d` as the inner loop.
pub fn positional_encode(x: [f64; 3], cfg: &EncodingConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.encoded_dim());
    positional_encode_into(x, cfg, &mut out);
    out
}

/// Same as [`positional_encode`] but reuses `out` (cleared first).
pub fn positional_encode_into(x: [f64; 3], cfg: &EncodingConfig, out: &mut Vec<f64>) {
    out.clear();
    if cfg.include_input {
        out.extend_from_slice(&x);
    }
    let mut freq = std::f64::consts::PI;
    for _ in 0..cfg.l_pos {
        for d in 0..3 {
            let (s, c) = (freq * x[d]).sin_cos();
            out.push(s);
            out.push(c);
        }
        freq *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_point_is_all_sin_zero_cos_one() {
        let cfg = EncodingConfig {
            l_pos: 2,
            include_input: true,
        };
        let enc = positional_encode([0.0, 0.0, 0.0], &cfg);
        let expected = [
            0.0, 0.0, 0.0, // raw input
            0.0, 1.0, 0.0, 1.0, 0.0, 1.0, // k = 0
            0.0, 1.0, 0.0, 1.0, 0.0, 1.0, // k = 1
        ];
        assert_eq!(enc, expected);
    }

    #[test]
    fn first_pair_is_sin_cos_of_pi_x() {
        let cfg = EncodingConfig {
            l_pos: 1,
            include_input: false,
        };
        let enc = positional_encode([0.5, 0.0, 0.0], &cfg);
        assert_eq!(enc.len(), 6);
        assert!((enc[0] - 1.0).abs() < 1e-12); // sin(pi/2)
        assert!(enc[1].abs() < 1e-12); // cos(pi/2)
    }

    #[test]
    fn length_formula_holds_for_all_octave_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for l_pos in 0..=10 {
            for include_input in [false, true] {
                let cfg = EncodingConfig {
                    l_pos,
                    include_input,
                };
                let x = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                assert_eq!(positional_encode(x, &cfg).len(), cfg.encoded_dim());
            }
        }
        let cfg = EncodingConfig {
            l_pos: 6,
            include_input: true,
        };
        assert_eq!(cfg.encoded_dim(), 39);
    }
}
