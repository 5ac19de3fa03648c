//! Monte Carlo oracle for the closed-form rates.
//!
//! Two trial generators share one estimator:
//!
//! - [`McMode::Rvq`] draws Rayleigh channels, quantizes every channel with
//!   an explicit random codebook, designs IA on the quantized channels and
//!   measures SINR on the true ones.
//! - [`McMode::CellApprox`] skips the codebook and IA. Each residual gain
//!   `a ‖h‖^2` is drawn from `Gamma(nt nr - 1, 2^{-B/(nt nr - 1)})` with an
//!   isotropic error direction, and the desired gain is `κ Exp(1)`. This is
//!   the distribution model behind the closed form, usable at any budget.

mod channel;
mod ia;
mod quantize;

pub use channel::{
    beam_pair_vector, complex_normal, complex_normal_matrix, isotropic_unit_vector, sample_channels, unvectorize,
    vectorize, CMatrix, CVector, ChannelSet,
};
pub use ia::{best_combiners, diagonalize_direct_links, solve_ia, IaOptions, IaSolution};
pub use quantize::{quantize_rvq, sample_cell_approx, CellSample, Codebook, QuantizedCsi, MAX_RVQ_BITS};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use ialf_core::rate::RateReport;
use ialf_core::{FeedbackSplit, NetworkScenario, StreamProfile};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum McError {
    #[error("RVQ with {bits} bits exceeds the {cap}-bit codebook cap")]
    BitsTooLarge { bits: u32, cap: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{streams} streams do not fit {nt} transmit / {nr} receive antennas")]
    TooManyStreams { streams: u32, nt: usize, nr: usize },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Model(#[from] ialf_core::Error),
}

/// Quantized feedback for all `K^2` channels, indexed like [`ChannelSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSet {
    links: usize,
    csi: Vec<QuantizedCsi>,
}

impl CsiSet {
    pub fn get(&self, k: usize, i: usize) -> &QuantizedCsi {
        &self.csi[k * self.links + i]
    }

    /// `sqrt(α_{k,i}) unvec(ĥ_{k,i})`, the channels IA is designed on.
    pub fn design_channels(&self, scenario: &NetworkScenario) -> ChannelSet {
        let (nr, nt) = (scenario.nr(), scenario.nt());
        ChannelSet::from_fn(self.links, nr, nt, |k, i| {
            unvectorize(&self.get(k, i).hhat, nr, nt) * Complex64::from(scenario.path_loss(k, i).sqrt())
        })
    }
}

/// One codebook per channel `(k, i)`, sized by the split and derived from
/// `codebook_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    links: usize,
    books: Vec<Codebook>,
}

impl CodebookSet {
    pub fn new(scenario: &NetworkScenario, split: &FeedbackSplit, codebook_seed: u64) -> Result<Self, McError> {
        let links = scenario.links();
        if split.links() != links {
            return Err(McError::DimensionMismatch { expected: links, found: split.links() });
        }
        let dim = scenario.channel_dim();
        let mut books = Vec::with_capacity(links * links);
        for k in 0..links {
            for i in 0..links {
                let mut rng = ChaCha8Rng::seed_from_u64(codebook_seed);
                rng.set_stream((k * links + i) as u64);
                books.push(Codebook::random(dim, split.get(k, i), &mut rng)?);
            }
        }
        Ok(Self { links, books })
    }

    pub fn get(&self, k: usize, i: usize) -> &Codebook {
        &self.books[k * self.links + i]
    }

    pub fn quantize(&self, channels: &ChannelSet) -> Result<CsiSet, McError> {
        let mut csi = Vec::with_capacity(self.books.len());
        for k in 0..self.links {
            for i in 0..self.links {
                csi.push(self.get(k, i).quantize(channels.get(k, i))?);
            }
        }
        Ok(CsiSet { links: self.links, csi })
    }
}

/// `κ_{k,i} = P α_{k,i} / d_i`.
fn kappa(scenario: &NetworkScenario, streams: &StreamProfile, k: usize, i: usize) -> f64 {
    scenario.power() * scenario.path_loss(k, i) / streams.get(i) as f64
}

/// `signal / (residual + noise)`; `noise` may be zero.
pub fn link_sinr(signal: f64, residual: f64, noise: f64) -> f64 {
    signal / (residual + noise)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvaluation {
    pub signal: f64,
    pub residual: f64,
    pub sinr: f64,
    /// `log2(1 + sinr)`.
    pub inst_rate: f64,
    /// Largest `| |h̃^H T|^2 - a |s^H T|^2 |` over the interference terms of
    /// this stream; only computed when the design leakage is below `1e-8`.
    pub projection_gap: Option<f64>,
}

fn column(m: &CMatrix, j: usize) -> CVector {
    m.column(j).into_owned()
}

/// SINR of stream `j` of link `k` on the true channels, with the beams in
/// `ia` (designed from `csi` when given).
pub fn evaluate_link(
    channels: &ChannelSet,
    csi: Option<&CsiSet>,
    ia: &IaSolution,
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    k: usize,
    j: usize,
) -> Result<LinkEvaluation, McError> {
    let links = scenario.links();
    if channels.links() != links || streams.links() != links || ia.precoders.len() != links {
        return Err(McError::DimensionMismatch { expected: links, found: channels.links() });
    }
    if (channels.nr(), channels.nt()) != (scenario.nr(), scenario.nt()) {
        return Err(McError::DimensionMismatch { expected: scenario.channel_dim(), found: channels.nr() * channels.nt() });
    }
    if j >= streams.get(k) as usize || ia.combiners[k].ncols() <= j {
        return Err(McError::DimensionMismatch { expected: streams.get(k) as usize, found: j });
    }
    let v = column(&ia.combiners[k], j);
    let check_projection = csi.is_some() && ia.leakage < 1e-8;
    let mut projection_gap = check_projection.then_some(0.0f64);
    let mut signal = 0.0;
    let mut residual = 0.0;
    for i in 0..links {
        let h = channels.get(k, i);
        let kap = kappa(scenario, streams, k, i);
        for l in 0..streams.get(i) as usize {
            let w = column(&ia.precoders[i], l);
            let power = kap * (v.adjoint() * h * &w)[(0, 0)].norm_sqr();
            if i == k && l == j {
                signal = power;
                continue;
            }
            residual += power;
            if let (Some(gap), Some(csi)) = (projection_gap.as_mut(), csi) {
                let q = csi.get(k, i);
                let t = beam_pair_vector(&w, &v);
                let lhs = q.direction.dotc(&t).norm_sqr();
                let rhs = q.a * q.s.dotc(&t).norm_sqr();
                *gap = gap.max((lhs - rhs).abs());
            }
        }
    }
    let sinr = link_sinr(signal, residual, scenario.noise());
    Ok(LinkEvaluation { signal, residual, sinr, inst_rate: (1.0 + sinr).log2(), projection_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    Rvq,
    CellApprox,
}

/// Which CSI the receivers use for their combiners in RVQ mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombinerCsi {
    #[default]
    Quantized,
    True,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub mode: McMode,
    pub seed: u64,
    pub codebook_seed: u64,
    pub combiners: CombinerCsi,
    pub ia: IaOptions,
}

impl McConfig {
    pub fn new(trials: usize, mode: McMode, seed: u64) -> Self {
        Self {
            trials,
            mode,
            seed,
            codebook_seed: seed ^ 0x9e37_79b9_7f4a_7c15,
            combiners: CombinerCsi::Quantized,
            ia: IaOptions::default(),
        }
    }
}

/// Empirical rates with 95% normal-approximation half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub per_stream: Vec<Vec<f64>>,
    pub per_link: Vec<f64>,
    pub sum: f64,
    pub per_link_ci95: Vec<f64>,
    /// Infinite for a single trial.
    pub sum_ci95: f64,
    pub trials: usize,
    /// Mean design leakage over trials (RVQ mode).
    pub mean_leakage: f64,
    /// Trials whose IA iteration hit the limit (RVQ mode).
    pub ia_not_converged: usize,
    /// Largest projection-identity gap seen among trials where it was checked.
    pub max_projection_gap: Option<f64>,
}

impl McReport {
    pub fn ci_reliable(&self) -> bool {
        self.sum_ci95.is_finite()
    }

    pub fn to_rate_report(&self) -> RateReport {
        RateReport { per_stream: self.per_stream.clone(), per_link: self.per_link.clone(), sum: self.sum }
    }
}

struct TrialOutcome {
    per_stream: Vec<Vec<f64>>,
    leakage: f64,
    converged: bool,
    projection_gap: Option<f64>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn cell_trial<R: Rng>(scenario: &NetworkScenario, streams: &StreamProfile, split: &FeedbackSplit, rng: &mut R) -> TrialOutcome {
    let links = scenario.links();
    let dim = scenario.channel_dim();
    let mut per_stream = Vec::with_capacity(links);
    for k in 0..links {
        let dk = streams.get(k) as usize;
        let mut interference = vec![0.0; dk];
        for i in 0..links {
            let di = streams.get(i) as usize;
            let kap = kappa(scenario, streams, k, i);
            let own_only = i == k && di == 1;
            if kap == 0.0 || own_only {
                continue;
            }
            let cell = sample_cell_approx(split.get(k, i), dim, rng);
            // Beam-pair vectors T_{j,l} are orthonormal and orthogonal to ĥ;
            // give each (j, l) its own coordinate of the error direction.
            for (j, acc) in interference.iter_mut().enumerate() {
                for l in (0..di).filter(|&l| !(i == k && l == j)) {
                    *acc += kap * cell.a_times_gain * cell.s[j * di + l].norm_sqr();
                }
            }
        }
        let kap_kk = kappa(scenario, streams, k, k);
        let rates = interference
            .iter()
            .map(|&res| {
                let e: f64 = Exp1.sample(rng);
                (1.0 + link_sinr(kap_kk * e, res, scenario.noise())).log2()
            })
            .collect();
        per_stream.push(rates);
    }
    TrialOutcome { per_stream, leakage: 0.0, converged: true, projection_gap: None }
}

fn rvq_trial<R: Rng>(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    books: &CodebookSet,
    config: &McConfig,
    rng: &mut R,
) -> Result<TrialOutcome, McError> {
    let channels = ChannelSet::sample(scenario.links(), scenario.nr(), scenario.nt(), rng);
    let csi = books.quantize(&channels)?;
    let design = csi.design_channels(scenario);
    let mut ia = solve_ia(&design, streams, &config.ia, rng)?;
    if config.combiners == CombinerCsi::True {
        let truth = channels.scaled(|k, i| scenario.path_loss(k, i).sqrt());
        ia.combiners = best_combiners(&truth, &ia.precoders, streams);
        diagonalize_direct_links(&truth, &mut ia.precoders, &mut ia.combiners);
    }
    let mut per_stream = Vec::with_capacity(scenario.links());
    let mut projection_gap: Option<f64> = None;
    for k in 0..scenario.links() {
        let mut rates = Vec::with_capacity(streams.get(k) as usize);
        for j in 0..streams.get(k) as usize {
            let eval = evaluate_link(&channels, Some(&csi), &ia, scenario, streams, k, j)?;
            if let Some(g) = eval.projection_gap {
                projection_gap = Some(projection_gap.map_or(g, |x| x.max(g)));
            }
            rates.push(eval.inst_rate);
        }
        per_stream.push(rates);
    }
    Ok(TrialOutcome { per_stream, leakage: ia.leakage, converged: ia.converged, projection_gap })
}

fn mean_and_ci(samples: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = samples.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Empirical `E[log2(1 + γ_{k,j})]` over `config.trials` independent trials.
///
/// Trial `t` draws from a ChaCha stream keyed by `(seed, t)` and results are
/// reduced in trial order, so the output does not depend on thread count.
pub fn estimate_avg_rate(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    split: &FeedbackSplit,
    config: &McConfig,
) -> Result<McReport, McError> {
    let links = scenario.links();
    if config.trials == 0 {
        return Err(McError::NoTrials);
    }
    if streams.links() != links {
        return Err(McError::DimensionMismatch { expected: links, found: streams.links() });
    }
    if split.links() != links {
        return Err(McError::DimensionMismatch { expected: links, found: split.links() });
    }
    if scenario.channel_dim() < 2 {
        return Err(McError::Model(ialf_core::Error::InvalidScenario("Monte Carlo needs nt * nr >= 2")));
    }
    let books = match config.mode {
        McMode::Rvq => {
            let bits = split.max_entry();
            if bits > MAX_RVQ_BITS {
                return Err(McError::BitsTooLarge { bits, cap: MAX_RVQ_BITS });
            }
            Some(CodebookSet::new(scenario, split, config.codebook_seed)?)
        }
        McMode::CellApprox => {
            let d = streams.max_streams() as usize;
            if d * d > scenario.channel_dim() - 1 {
                return Err(McError::TooManyStreams { streams: d as u32, nt: scenario.nt(), nr: scenario.nr() });
            }
            None
        }
    };
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            match &books {
                Some(books) => rvq_trial(scenario, streams, books, config, &mut rng),
                None => Ok(cell_trial(scenario, streams, split, &mut rng)),
            }
        })
        .collect::<Result<_, _>>()?;

    let n = config.trials;
    let width = streams.max_streams() as usize;
    let mut per_stream = vec![vec![0.0; width]; links];
    let mut per_link = vec![0.0; links];
    let mut per_link_ci95 = vec![0.0; links];
    for k in 0..links {
        for (j, slot) in per_stream[k].iter_mut().take(streams.get(k) as usize).enumerate() {
            *slot = outcomes.iter().map(|o| o.per_stream[k][j]).sum::<f64>() / n as f64;
        }
        let (mean, ci) = mean_and_ci(outcomes.iter().map(|o| o.per_stream[k].iter().sum::<f64>()), n);
        per_link[k] = mean;
        per_link_ci95[k] = ci;
    }
    let (sum, sum_ci95) = mean_and_ci(outcomes.iter().map(|o| o.per_stream.iter().flatten().sum::<f64>()), n);
    let projection = outcomes.iter().filter_map(|o| o.projection_gap).fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
    Ok(McReport {
        per_stream,
        per_link,
        sum,
        per_link_ci95,
        sum_ci95,
        trials: n,
        mean_leakage: outcomes.iter().map(|o| o.leakage).sum::<f64>() / n as f64,
        ia_not_converged: outcomes.iter().filter(|o| !o.converged).count(),
        max_projection_gap: projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ialf_core::rate::{noise_limited_stream_rate, stream_rate};

    fn desk(power: f64) -> NetworkScenario {
        NetworkScenario::from_rows(4, 4, power, 1.0, &[&[1.0, 0.5, 0.1], &[0.55, 1.0, 0.45], &[0.1, 0.5, 1.0]], 12)
            .unwrap()
    }

    #[test]
    fn single_trial_ci_is_flagged() {
        let s = desk(10.0);
        let d = StreamProfile::symmetric(3, 1).unwrap();
        let r = estimate_avg_rate(&s, &d, &FeedbackSplit::uniform(3, 4), &McConfig::new(1, McMode::CellApprox, 1)).unwrap();
        assert!(!r.ci_reliable());
        let zero = estimate_avg_rate(&s, &d, &FeedbackSplit::uniform(3, 4), &McConfig::new(0, McMode::CellApprox, 1));
        assert_eq!(zero.unwrap_err(), McError::NoTrials);
    }

    #[test]
    fn rvq_bit_cap() {
        let s = desk(10.0);
        let d = StreamProfile::symmetric(3, 1).unwrap();
        let err = estimate_avg_rate(&s, &d, &FeedbackSplit::uniform(3, 17), &McConfig::new(4, McMode::Rvq, 1));
        assert_eq!(err.unwrap_err(), McError::BitsTooLarge { bits: 17, cap: 16 });
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let s = desk(100.0);
        let d = StreamProfile::symmetric(3, 1).unwrap();
        let split = FeedbackSplit::from_rows(&[&[0, 3, 3], &[3, 0, 3], &[3, 3, 0]]).unwrap();
        let c = McConfig::new(64, McMode::Rvq, 5);
        assert_eq!(estimate_avg_rate(&s, &d, &split, &c).unwrap(), estimate_avg_rate(&s, &d, &split, &c).unwrap());
        let c = McConfig::new(256, McMode::CellApprox, 5);
        assert_eq!(estimate_avg_rate(&s, &d, &split, &c).unwrap(), estimate_avg_rate(&s, &d, &split, &c).unwrap());
    }

    #[test]
    fn cell_mode_tracks_closed_form() {
        let s = desk(10.0);
        let d = StreamProfile::symmetric(3, 1).unwrap();
        let split = FeedbackSplit::uniform(3, 4);
        let mc = estimate_avg_rate(&s, &d, &split, &McConfig::new(40_000, McMode::CellApprox, 2)).unwrap();
        for k in 0..3 {
            let theory = stream_rate(&s, &d, &split, k).unwrap();
            assert!((mc.per_link[k] - theory).abs() < 0.03 * theory, "link {k}: {} vs {theory}", mc.per_link[k]);
        }
    }

    #[test]
    fn interference_free_link() {
        let s = NetworkScenario::new(1, 2, 2, 1.0, 1.0, vec![1.0], 0).unwrap();
        let d = StreamProfile::symmetric(1, 1).unwrap();
        let mc = estimate_avg_rate(&s, &d, &FeedbackSplit::zeros(1), &McConfig::new(40_000, McMode::Rvq, 3)).unwrap();
        let want = noise_limited_stream_rate(1.0, 1.0).unwrap();
        assert!((mc.sum - want).abs() < 0.02 * want, "{} vs {want}", mc.sum);
    }

    #[test]
    fn perfect_csi_nulls_interference() {
        let s = NetworkScenario::from_rows(2, 2, 100.0, 1.0, &[&[1.0, 0.6, 0.3], &[0.2, 1.0, 0.5], &[0.4, 0.7, 1.0]], 0)
            .unwrap();
        let d = StreamProfile::symmetric(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = sample_channels(&s, 9);
        let ia = solve_ia(&h.scaled(|k, i| s.path_loss(k, i).sqrt()), &d, &IaOptions::default(), &mut rng).unwrap();
        for k in 0..3 {
            let e = evaluate_link(&h, None, &ia, &s, &d, k, 0).unwrap();
            assert!(e.residual < 1e-8 * e.signal);
            assert!((e.sinr - e.signal / (e.residual + 1.0)).abs() < 1e-12 * e.sinr);
        }
        assert!(evaluate_link(&h, None, &ia, &s, &d, 0, 1).is_err());
    }

    #[test]
    fn zero_noise_sinr() {
        assert_eq!(link_sinr(3.0, 0.5, 0.0), 6.0);
    }

    #[test]
    fn hand_built_two_link_example() {
        // nt = nr = 2, d = 1, fixed beams; compare against explicit arithmetic.
        let s = NetworkScenario::from_rows(2, 2, 4.0, 0.5, &[&[1.0, 0.25], &[0.5, 2.0]], 0).unwrap();
        let d = StreamProfile::symmetric(2, 1).unwrap();
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let mats = [
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.5, -0.5), c(2.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), c(1.0, 1.0), c(0.3, 0.0), c(-1.0, 0.2)]),
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.1), c(0.0, 0.0), c(1.0, -1.0), c(0.4, 0.4)]),
            CMatrix::from_row_slice(2, 2, &[c(-0.2, 0.9), c(1.5, 0.0), c(0.0, 0.3), c(1.0, 0.0)]),
        ];
        let h = ChannelSet::from_fn(2, 2, 2, |k, i| mats[2 * k + i].clone());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let w = [CMatrix::from_column_slice(2, 1, &[c(r, 0.0), c(0.0, r)]), CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)])];
        let v = [CMatrix::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]), CMatrix::from_column_slice(2, 1, &[c(r, 0.0), c(-r, 0.0)])];
        let ia = IaSolution { precoders: w.to_vec(), combiners: v.to_vec(), leakage: 1.0, history: vec![], iterations: 0, converged: false };
        let e = evaluate_link(&h, None, &ia, &s, &d, 0, 0).unwrap();
        // Link 0: v = e2, w0 = (1, i)/√2, w1 = e1.
        // v^H H00 w0 = (0.5 - 0.5i + 2i)/√2 = (0.5 + 1.5i)/√2, |.|^2 = 1.25.
        // v^H H01 w1 = 0.3, |.|^2 = 0.09.
        let signal = 4.0 * 1.0 * 1.25;
        let residual = 4.0 * 0.25 * 0.09;
        assert!((e.signal - signal).abs() < 1e-12);
        assert!((e.residual - residual).abs() < 1e-12);
        assert!((e.sinr - signal / (residual + 0.5)).abs() < 1e-12);
        assert!((e.inst_rate - (1.0 + signal / (residual + 0.5)).log2()).abs() < 1e-12);
        assert_eq!(e.projection_gap, None);
    }
}
