use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use ialf_core::StreamProfile;

use super::channel::{complex_normal_matrix, ChannelSet, CMatrix};
use super::McError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaOptions {
    pub max_iterations: usize,
    /// Stop once one iteration lowers the leakage by less than this.
    pub tolerance: f64,
}

impl Default for IaOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-10 }
    }
}

/// Precoders `W_k` (`nt x d_k`) and combiners `V_k` (`nr x d_k`), both with
/// orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IaSolution {
    pub precoders: Vec<CMatrix>,
    pub combiners: Vec<CMatrix>,
    /// Interference power left on the design channels: cross-link terms
    /// `‖V_k^H H_{k,i} W_i‖_F^2` plus the off-diagonal part of
    /// `V_k^H H_{k,k} W_k`.
    pub leakage: f64,
    /// Cross-link leakage after each iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IaSolution {
    /// Whether the recorded leakage never rose by more than rounding.
    pub fn is_monotone(&self) -> bool {
        let floor = rounding_floor(&self.history);
        self.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + floor)
    }
}

// Leakage noise level once the iteration has driven it to rounding error.
fn rounding_floor(history: &[f64]) -> f64 {
    let peak = history.iter().copied().fold(0.0, f64::max);
    (1e-12 * peak).max(1e-24)
}

/// Eigenvectors of the `d` smallest eigenvalues of a Hermitian matrix.
pub(crate) fn min_eigenvectors(q: &CMatrix, d: usize) -> CMatrix {
    let herm = (q + q.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    CMatrix::from_fn(q.nrows(), d, |r, c| eig.eigenvectors[(r, order[c])])
}

fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let q = complex_normal_matrix(rows, cols, rng).qr().q();
    q.columns(0, cols).into_owned()
}

fn cross_leakage(channels: &ChannelSet, w: &[CMatrix], v: &[CMatrix]) -> f64 {
    let k_links = channels.links();
    let mut total = 0.0;
    for k in 0..k_links {
        for i in (0..k_links).filter(|&i| i != k) {
            total += (v[k].adjoint() * channels.get(k, i) * &w[i]).norm_squared();
        }
    }
    total
}

fn own_offdiagonal(channels: &ChannelSet, w: &[CMatrix], v: &[CMatrix]) -> f64 {
    (0..channels.links())
        .map(|k| {
            let m = v[k].adjoint() * channels.get(k, k) * &w[k];
            let diag: f64 = (0..m.nrows().min(m.ncols())).map(|j| m[(j, j)].norm_sqr()).sum();
            (m.norm_squared() - diag).max(0.0)
        })
        .sum()
}

/// Combiners minimizing the interference from `precoders` at each receiver.
pub fn best_combiners(channels: &ChannelSet, precoders: &[CMatrix], streams: &StreamProfile) -> Vec<CMatrix> {
    let k_links = channels.links();
    (0..k_links)
        .map(|k| {
            let mut q = CMatrix::zeros(channels.nr(), channels.nr());
            for i in (0..k_links).filter(|&i| i != k) {
                let hw = channels.get(k, i) * &precoders[i];
                q += &hw * hw.adjoint();
            }
            min_eigenvectors(&q, streams.get(k) as usize)
        })
        .collect()
}

/// Precoders minimizing the leakage into `combiners`, from the reciprocal
/// network.
fn best_precoders(channels: &ChannelSet, combiners: &[CMatrix], streams: &StreamProfile) -> Vec<CMatrix> {
    let k_links = channels.links();
    (0..k_links)
        .map(|i| {
            let mut q = CMatrix::zeros(channels.nt(), channels.nt());
            for k in (0..k_links).filter(|&k| k != i) {
                let hv = channels.get(k, i).adjoint() * &combiners[k];
                q += &hv * hv.adjoint();
            }
            min_eigenvectors(&q, streams.get(i) as usize)
        })
        .collect()
}

/// Rotates each `(V_k, W_k)` inside its subspace so that
/// `V_k^H H_{k,k} W_k` is diagonal. Cross-link leakage is unchanged.
pub fn diagonalize_direct_links(channels: &ChannelSet, precoders: &mut [CMatrix], combiners: &mut [CMatrix]) {
    for k in 0..channels.links() {
        let m = combiners[k].adjoint() * channels.get(k, k) * &precoders[k];
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        combiners[k] = &combiners[k] * u;
        precoders[k] = &precoders[k] * vt.adjoint();
    }
}

fn check_streams(channels: &ChannelSet, streams: &StreamProfile) -> Result<(), McError> {
    if streams.links() != channels.links() {
        return Err(McError::DimensionMismatch { expected: channels.links(), found: streams.links() });
    }
    if let Some(&d) = streams.as_slice().iter().find(|&&d| d as usize > channels.nt().min(channels.nr())) {
        return Err(McError::TooManyStreams { streams: d, nt: channels.nt(), nr: channels.nr() });
    }
    Ok(())
}

/// Alternating leakage minimization on `channels` (the CSI available for
/// design), starting from random orthonormal precoders. The direct links are
/// diagonalized at the end so that streams of one link do not interfere on
/// the design channels either.
pub fn solve_ia<R: Rng + ?Sized>(
    channels: &ChannelSet,
    streams: &StreamProfile,
    options: &IaOptions,
    rng: &mut R,
) -> Result<IaSolution, McError> {
    check_streams(channels, streams)?;
    let k_links = channels.links();
    let mut precoders: Vec<CMatrix> =
        (0..k_links).map(|i| random_orthonormal(channels.nt(), streams.get(i) as usize, rng)).collect();
    let mut combiners = best_combiners(channels, &precoders, streams);
    let mut history = vec![cross_leakage(channels, &precoders, &combiners)];
    let mut converged = k_links == 1 || history[0] == 0.0;
    let mut iterations = 0;
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        precoders = best_precoders(channels, &combiners, streams);
        combiners = best_combiners(channels, &precoders, streams);
        let leak = cross_leakage(channels, &precoders, &combiners);
        let prev = *history.last().expect("nonempty");
        debug_assert!(leak <= prev * (1.0 + 1e-9) + rounding_floor(&history), "leakage rose from {prev} to {leak}");
        history.push(leak);
        converged = (prev - leak).abs() < options.tolerance;
    }
    diagonalize_direct_links(channels, &mut precoders, &mut combiners);
    let leakage = cross_leakage(channels, &precoders, &combiners) + own_offdiagonal(channels, &precoders, &combiners);
    Ok(IaSolution { precoders, combiners, leakage, history, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve(links: usize, n: usize, d: u32, seed: u64) -> IaSolution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ChannelSet::sample(links, n, n, &mut rng);
        solve_ia(&h, &StreamProfile::symmetric(links, d).unwrap(), &IaOptions::default(), &mut rng).unwrap()
    }

    fn unit_columns(m: &CMatrix) -> bool {
        m.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-10)
    }

    #[test]
    fn three_user_two_antenna() {
        for seed in 0..5 {
            let sol = solve(3, 2, 1, seed);
            assert!(sol.leakage < 1e-8, "seed {seed}: {}", sol.leakage);
            assert!(sol.is_monotone());
            assert!(sol.precoders.iter().chain(&sol.combiners).all(unit_columns));
        }
    }

    #[test]
    fn four_user_eight_antenna_two_streams() {
        let sol = solve(4, 8, 2, 1);
        assert!(sol.leakage < 1e-6, "{}", sol.leakage);
        assert!(sol.is_monotone());
        assert!(sol.precoders.iter().chain(&sol.combiners).all(unit_columns));
    }

    #[test]
    fn no_cross_links_no_leakage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = ChannelSet::sample(3, 3, 3, &mut rng).scaled(|k, i| if k == i { 1.0 } else { 0.0 });
        let sol = solve_ia(&h, &StreamProfile::symmetric(3, 1).unwrap(), &IaOptions::default(), &mut rng).unwrap();
        assert!(sol.leakage < 1e-12);
    }

    #[test]
    fn too_many_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ChannelSet::sample(1, 2, 2, &mut rng);
        let err = solve_ia(&h, &StreamProfile::symmetric(1, 3).unwrap(), &IaOptions::default(), &mut rng);
        assert!(matches!(err, Err(McError::TooManyStreams { streams: 3, .. })));
    }

    #[test]
    fn direct_link_is_diagonal() {
        let sol = solve(3, 4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = ChannelSet::sample(3, 4, 4, &mut rng);
        let m = sol.combiners[0].adjoint() * h.get(0, 0) * &sol.precoders[0];
        assert!(m[(0, 1)].norm() < 1e-10 && m[(1, 0)].norm() < 1e-10);
    }
}
