use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::channel::{isotropic_unit_vector, vectorize, CMatrix, CVector};
use super::McError;

/// Largest codebook size accepted for explicit RVQ, in bits.
pub const MAX_RVQ_BITS: u32 = 16;

/// `2^bits` isotropic unit codewords of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    words: Vec<CVector>,
}

impl Codebook {
    pub fn random<R: Rng + ?Sized>(dim: usize, bits: u32, rng: &mut R) -> Result<Self, McError> {
        if bits > MAX_RVQ_BITS {
            return Err(McError::BitsTooLarge { bits, cap: MAX_RVQ_BITS });
        }
        let words = (0..1usize << bits).map(|_| isotropic_unit_vector(dim, rng)).collect();
        Ok(Self { words })
    }

    /// The codebook for `(bits, codebook_seed)`; the same pair always gives
    /// the same codewords.
    pub fn seeded(dim: usize, bits: u32, codebook_seed: u64) -> Result<Self, McError> {
        Self::random(dim, bits, &mut ChaCha8Rng::seed_from_u64(codebook_seed))
    }

    /// Codebook from explicit codewords, which are normalized.
    pub fn from_words(words: Vec<CVector>) -> Self {
        assert!(!words.is_empty());
        let words = words.into_iter().map(|w| w.normalize()).collect();
        Self { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> &CVector {
        &self.words[index]
    }

    pub fn dim(&self) -> usize {
        self.words[0].len()
    }

    /// Quantizes the direction of `h` to the codeword of largest
    /// `|h̃^H ĥ|^2` (first index on ties).
    pub fn quantize(&self, h: &CMatrix) -> Result<QuantizedCsi, McError> {
        let vec_h = vectorize(h);
        if vec_h.len() != self.dim() {
            return Err(McError::DimensionMismatch { expected: self.dim(), found: vec_h.len() });
        }
        let gain = vec_h.norm_squared();
        let direction = if gain > 0.0 { vec_h.unscale(gain.sqrt()) } else { self.words[0].clone() };
        let (index, corr) = self
            .words
            .iter()
            .map(|c| direction.dotc(c).norm_sqr())
            .enumerate()
            .fold((0, -1.0), |best, (i, c)| if c > best.1 { (i, c) } else { best });
        let hhat = self.words[index].clone();
        let a = (1.0 - corr).clamp(0.0, 1.0);
        let s = error_direction(&direction, &hhat);
        Ok(QuantizedCsi { hhat, a, s, gain, index, direction })
    }
}

/// Unit vector along the part of `direction` orthogonal to `hhat`; any unit
/// vector orthogonal to `hhat` when that part vanishes.
fn error_direction(direction: &CVector, hhat: &CVector) -> CVector {
    let residual = direction - hhat * hhat.dotc(direction);
    let norm = residual.norm();
    if norm > 1e-12 {
        return residual.unscale(norm);
    }
    (0..hhat.len())
        .map(|j| {
            let mut e = CVector::zeros(hhat.len());
            e[j] = Complex64::from(1.0);
            &e - hhat * hhat.dotc(&e)
        })
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .map(|v| v.normalize())
        .expect("dimension at least 1")
}

/// Feedback for one channel: `h̃ = e^{jφ} sqrt(1 - a) ĥ + sqrt(a) s`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCsi {
    /// Chosen codeword.
    pub hhat: CVector,
    /// `1 - |h̃^H ĥ|^2`.
    pub a: f64,
    /// Unit error direction, orthogonal to `hhat`.
    pub s: CVector,
    /// `‖h‖^2`.
    pub gain: f64,
    pub index: usize,
    /// `h̃ = vec(h) / ‖h‖`.
    pub direction: CVector,
}

/// RVQ of `h` with `2^bits` codewords drawn from `codebook_seed`.
pub fn quantize_rvq(h: &CMatrix, bits: u32, codebook_seed: u64) -> Result<QuantizedCsi, McError> {
    Codebook::seeded(h.len(), bits, codebook_seed)?.quantize(h)
}

/// One draw from the quantization-cell model.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSample {
    /// `a ‖h‖^2 ~ Gamma(dim - 1, 2^{-bits/(dim - 1)})`.
    pub a_times_gain: f64,
    /// Isotropic unit error direction, in coordinates of an orthonormal
    /// basis of the `(dim - 1)`-dimensional complement of `ĥ`.
    pub s: CVector,
}

pub fn sample_cell_approx<R: Rng + ?Sized>(bits: u32, dim: usize, rng: &mut R) -> CellSample {
    assert!(dim >= 2, "cell approximation needs dim >= 2");
    let m = (dim - 1) as f64;
    let scale = (-(bits as f64) / m).exp2();
    let a_times_gain = if scale > 0.0 {
        Gamma::new(m, scale).expect("positive Gamma parameters").sample(rng)
    } else {
        0.0
    };
    CellSample { a_times_gain, s: isotropic_unit_vector(dim - 1, rng) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcsim::channel::{complex_normal_matrix, unvectorize};

    #[test]
    fn codeword_equal_to_channel_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = complex_normal_matrix(2, 3, &mut rng);
        let mut words: Vec<CVector> = (0..7).map(|_| isotropic_unit_vector(6, &mut rng)).collect();
        words.insert(3, vectorize(&h) * Complex64::new(0.0, 2.0));
        let q = Codebook::from_words(words).quantize(&h).unwrap();
        assert_eq!(q.index, 3);
        assert!(q.a < 1e-12);
        assert!((q.s.norm() - 1.0).abs() < 1e-12);
        assert!(q.s.dotc(&q.hhat).norm() < 1e-12);
    }

    #[test]
    fn zero_bits_use_the_single_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_normal_matrix(2, 2, &mut rng);
        let q = quantize_rvq(&h, 0, 9).unwrap();
        let cb = Codebook::seeded(4, 0, 9).unwrap();
        assert_eq!(cb.len(), 1);
        let corr = q.direction.dotc(cb.word(0)).norm_sqr();
        assert!((q.a - (1.0 - corr)).abs() < 1e-14);
    }

    #[test]
    fn decomposition_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for bits in [0, 3, 8] {
            let h = complex_normal_matrix(3, 3, &mut rng);
            let q = quantize_rvq(&h, bits, 11).unwrap();
            assert!((q.hhat.norm() - 1.0).abs() < 1e-12);
            assert!((q.s.norm() - 1.0).abs() < 1e-12);
            assert!(q.s.dotc(&q.hhat).norm() < 1e-10);
            assert!((0.0..=1.0).contains(&q.a));
            // Reassemble h̃ from (ĥ, a, s) up to the phase of ĥ.
            let phase = q.hhat.dotc(&q.direction);
            let phase = phase / Complex64::from(phase.norm());
            let rebuilt = &q.hhat * (phase * (1.0 - q.a).sqrt()) + &q.s * Complex64::from(q.a.sqrt());
            assert!((rebuilt - &q.direction).norm() < 1e-10);
            assert!((unvectorize(&q.direction, 3, 3) * Complex64::from(q.gain.sqrt()) - &h).norm() < 1e-10);
        }
    }

    #[test]
    fn bits_cap() {
        assert!(matches!(Codebook::seeded(4, 17, 0), Err(McError::BitsTooLarge { bits: 17, cap: 16 })));
    }

    // E[a] for RVQ with n = 2^bits codewords in C^dim:
    // n B(n, dim/(dim-1)) = Π_{j=1}^{n} j / (j - 1 + dim/(dim-1)).
    fn exact_rvq_error(dim: usize, bits: u32) -> f64 {
        let x = dim as f64 / (dim - 1) as f64;
        (1..=1u64 << bits).map(|j| j as f64 / (j as f64 - 1.0 + x)).product()
    }

    fn mean_error_times_gain(rows: usize, cols: usize, bits: u32, rng: &mut ChaCha8Rng) -> f64 {
        let cb = Codebook::seeded(rows * cols, bits, 100 + bits as u64).unwrap();
        let trials = 10_000;
        (0..trials)
            .map(|_| {
                let q = cb.quantize(&complex_normal_matrix(rows, cols, rng)).unwrap();
                q.a * q.gain
            })
            .sum::<f64>()
            / trials as f64
    }

    #[test]
    fn rvq_error_matches_cell_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 16;
        let m = (dim - 1) as f64;
        for bits in [4u32, 8] {
            let mean = mean_error_times_gain(4, 4, bits, &mut rng);
            let cell = m * (-(bits as f64) / m).exp2();
            assert!((mean - cell).abs() <= 0.15 * cell, "bits {bits}: {mean} vs {cell}");
            let exact = dim as f64 * exact_rvq_error(dim, bits);
            assert!((mean - exact).abs() <= 0.02 * exact, "bits {bits}: {mean} vs {exact}");
        }
        // The cell model is optimistic at small dimensions; RVQ itself still
        // follows the exact mean.
        let mean = mean_error_times_gain(2, 2, 4, &mut rng);
        let exact = 4.0 * exact_rvq_error(4, 4);
        assert!((mean - exact).abs() <= 0.02 * exact, "{mean} vs {exact}");
    }

    #[test]
    fn cell_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (dim, bits) = (16usize, 12u32);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut proj = 0.0;
        let u = isotropic_unit_vector(dim - 1, &mut rng);
        for _ in 0..n {
            let c = sample_cell_approx(bits, dim, &mut rng);
            sum += c.a_times_gain;
            proj += c.s.dotc(&u).norm_sqr();
        }
        let m = (dim - 1) as f64;
        let want = m * (-(bits as f64) / m).exp2();
        assert!(((sum / n as f64) - want).abs() < 0.01 * want);
        assert!(((proj / n as f64) * m - 1.0).abs() < 0.02);
        assert!(sample_cell_approx(100_000, dim, &mut rng).a_times_gain < 1e-300);
    }
}
