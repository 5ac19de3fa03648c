use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ialf_core::NetworkScenario;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// One `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Uniformly distributed point on the unit sphere of `C^dim`.
pub fn isotropic_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-300 {
            return v / Complex64::from(norm);
        }
    }
}

/// Column-major vectorization, so that `v^H H w = (vec H)^T (w ⊗ conj v)`.
pub fn vectorize(h: &CMatrix) -> CVector {
    CVector::from_column_slice(h.as_slice())
}

pub fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// `conj(w) ⊗ v`, the vector with `|h^H T| = |v^H H w|` for `h = vec H`.
pub fn beam_pair_vector(w: &CVector, v: &CVector) -> CVector {
    let (nt, nr) = (w.len(), v.len());
    CVector::from_fn(nt * nr, |idx, _| w[idx / nr].conj() * v[idx % nr])
}

/// `H_{k,i}`, the `nr x nt` channel from transmitter `i` to receiver `k`,
/// for all `K^2` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    links: usize,
    nt: usize,
    nr: usize,
    h: Vec<CMatrix>,
}

impl ChannelSet {
    pub fn from_fn(links: usize, nr: usize, nt: usize, mut f: impl FnMut(usize, usize) -> CMatrix) -> Self {
        let mut h = Vec::with_capacity(links * links);
        for k in 0..links {
            for i in 0..links {
                let m = f(k, i);
                assert_eq!(m.shape(), (nr, nt), "channel ({k}, {i}) has the wrong shape");
                h.push(m);
            }
        }
        Self { links, nt, nr, h }
    }

    pub fn sample<R: Rng + ?Sized>(links: usize, nr: usize, nt: usize, rng: &mut R) -> Self {
        Self::from_fn(links, nr, nt, |_, _| complex_normal_matrix(nr, nt, rng))
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn get(&self, k: usize, i: usize) -> &CMatrix {
        &self.h[k * self.links + i]
    }

    /// Same directions with every `H_{k,i}` multiplied by `f(k, i)`.
    pub fn scaled(&self, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::from_fn(self.links, self.nr, self.nt, |k, i| self.get(k, i) * Complex64::from(f(k, i)))
    }
}

/// I.i.d. `CN(0, 1)` channels for the scenario, reproducible from `seed`.
pub fn sample_channels(scenario: &NetworkScenario, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelSet::sample(scenario.links(), scenario.nr(), scenario.nt(), &mut rng)
}
