//! Closed-form ergodic rates for IA under quantized CSI.
//!
//! For stream `j` of link `k`, the desired-signal power is exponential with
//! mean `κ_kk = P α_kk / d_k`. The residual interference from transmitter
//! `i` is Erlang with shape `d_i` (shape `d_k - 1` for the own link) and
//! scale `ϱ_ki = κ_ki 2^{-B_ki / (nt nr - 1)}`, all terms independent. The
//! rate `E[log2(1 + S / (I + σ²))]` splits into
//! `E[log2(S + I + σ²)] - E[log2(I + σ²)]`, each an Erlang-mixture
//! log-moment.
//!
//! Rates are per stream and independent of the stream index, so a link's
//! rate is `d_k` times the stream rate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::netmodel::{FeedbackSplit, NetworkScenario, StreamProfile};
use crate::specfun::{scaled_expn, ErlangComponent, ErlangMixture};
use crate::{Error, Result};

/// Per-link scales for receiver `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRateInputs {
    /// `κ_ki = P α_ki / d_i`.
    pub kappa: Vec<f64>,
    /// `ϱ_ki = κ_ki 2^{-B_ki / (nt nr - 1)}`.
    pub rho: Vec<f64>,
    /// `κ_kk`.
    pub kappa_signal: f64,
    pub sigma2: f64,
}

impl LinkRateInputs {
    /// Scales for receiver `k` spending `row[i]` bits on channel `i`.
    pub fn new(scenario: &NetworkScenario, streams: &StreamProfile, row: &[u32], k: usize) -> Result<Self> {
        let links = scenario.links();
        if streams.links() != links {
            return Err(Error::DimensionMismatch { expected: links, found: streams.links() });
        }
        if row.len() != links {
            return Err(Error::DimensionMismatch { expected: links, found: row.len() });
        }
        if k >= links {
            return Err(Error::DimensionMismatch { expected: links, found: k });
        }
        let dof = scenario.quantization_dof();
        if dof == 0 {
            return Err(Error::InvalidScenario("quantized feedback needs nt * nr >= 2"));
        }
        let kappa: Vec<f64> = (0..links)
            .map(|i| scenario.power() * scenario.path_loss(k, i) / streams.get(i) as f64)
            .collect();
        let rho = kappa
            .iter()
            .zip(row)
            .map(|(&kap, &bits)| kap * (-(bits as f64) / dof as f64).exp2())
            .collect();
        Ok(Self { kappa_signal: kappa[k], kappa, rho, sigma2: scenario.noise() })
    }
}

/// Desired-plus-interference and interference-only distributions at one
/// receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMixtures {
    pub signal_plus_interference: ErlangMixture,
    /// `None` when the link sees no interference at all.
    pub interference: Option<ErlangMixture>,
    link: usize,
}

impl LinkMixtures {
    pub fn interference(&self) -> Result<&ErlangMixture> {
        self.interference.as_ref().ok_or(Error::EmptyMixture)
    }
}

fn interference_components(inputs: &LinkRateInputs, streams: &StreamProfile, k: usize) -> Vec<ErlangComponent> {
    (0..inputs.rho.len())
        .filter_map(|i| {
            let shape = if i == k { streams.get(k) - 1 } else { streams.get(i) };
            let scale = inputs.rho[i];
            (shape > 0 && scale > 0.0).then(|| ErlangComponent::new(shape, scale))
        })
        .collect()
}

fn mixtures_for_row(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    row: &[u32],
    k: usize,
) -> Result<(LinkRateInputs, LinkMixtures)> {
    let inputs = LinkRateInputs::new(scenario, streams, row, k)?;
    let mut comps = interference_components(&inputs, streams, k);
    let interference = if comps.is_empty() { None } else { Some(ErlangMixture::new(&comps)?) };
    comps.push(ErlangComponent::new(1, inputs.kappa_signal));
    let signal_plus_interference = ErlangMixture::new(&comps)?;
    Ok((inputs, LinkMixtures { signal_plus_interference, interference, link: k }))
}

fn check_split(scenario: &NetworkScenario, split: &FeedbackSplit) -> Result<()> {
    if split.links() != scenario.links() {
        return Err(Error::DimensionMismatch { expected: scenario.links(), found: split.links() });
    }
    Ok(())
}

/// Builds the two mixtures for receiver `k`: components `(d_i, ϱ_ki)` for
/// `i != k`, `(d_k - 1, ϱ_kk)`, and for the first mixture also the desired
/// signal `(1, κ_kk)`. Zero-shape and zero-scale components are dropped.
pub fn build_link_mixtures(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    split: &FeedbackSplit,
    k: usize,
) -> Result<LinkMixtures> {
    check_split(scenario, split)?;
    Ok(mixtures_for_row(scenario, streams, split.row(k), k)?.1)
}

/// Noise-limited (interference-free) stream rate
/// `E[log2(1 + κ X / σ²)] = e^{σ²/κ} E_1(σ²/κ) / ln 2`, `X ~ Exp(1)`.
pub fn noise_limited_stream_rate(kappa_signal: f64, sigma2: f64) -> Result<f64> {
    if !(kappa_signal > 0.0 && kappa_signal.is_finite()) {
        return Err(Error::Domain { function: "noise_limited_stream_rate", value: kappa_signal });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain { function: "noise_limited_stream_rate", value: sigma2 });
    }
    Ok(scaled_expn(1, sigma2 / kappa_signal) / LN_2)
}

/// Stream rate of link `k` when receiver `k` spends `row` bits; the split
/// row does not have to exhaust the budget.
pub fn stream_rate_for_row(scenario: &NetworkScenario, streams: &StreamProfile, row: &[u32], k: usize) -> Result<f64> {
    let (inputs, mix) = mixtures_for_row(scenario, streams, row, k)?;
    let Some(interference) = mix.interference.as_ref() else {
        return noise_limited_stream_rate(inputs.kappa_signal, inputs.sigma2);
    };
    let with_signal = mix.signal_plus_interference.log_moment(inputs.sigma2)?;
    let without = interference.log_moment(inputs.sigma2)?;
    Ok(((with_signal - without) / LN_2).max(0.0))
}

/// Average rate of one stream of link `k`, in bits/s/Hz.
pub fn stream_rate(scenario: &NetworkScenario, streams: &StreamProfile, split: &FeedbackSplit, k: usize) -> Result<f64> {
    check_split(scenario, split)?;
    stream_rate_for_row(scenario, streams, split.row(k), k)
}

/// Per-stream, per-link and total average rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `per_stream[k][j]`; entries with `j >= d_k` are zero.
    pub per_stream: Vec<Vec<f64>>,
    /// `d_k` times the stream rate of link `k`.
    pub per_link: Vec<f64>,
    pub sum: f64,
}

impl RateReport {
    pub fn from_stream_rates(streams: &StreamProfile, stream_rates: &[f64]) -> Self {
        let width = streams.max_streams() as usize;
        let per_stream = stream_rates
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let mut row = vec![0.0; width];
                row[..streams.get(k) as usize].fill(r);
                row
            })
            .collect();
        let per_link: Vec<f64> =
            stream_rates.iter().enumerate().map(|(k, &r)| streams.get(k) as f64 * r).collect();
        let sum = per_link.iter().sum();
        Self { per_stream, per_link, sum }
    }
}

pub fn sum_rate(scenario: &NetworkScenario, streams: &StreamProfile, split: &FeedbackSplit) -> Result<RateReport> {
    check_split(scenario, split)?;
    let rates = (0..scenario.links())
        .map(|k| stream_rate_for_row(scenario, streams, split.row(k), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::from_stream_rates(streams, &rates))
}

/// Sum rate when the CSI is perfect and IA removes all interference.
pub fn perfect_csi_sum_rate(scenario: &NetworkScenario, streams: &StreamProfile) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..scenario.links() {
        let d = streams.get(k) as f64;
        let kappa = scenario.power() * scenario.path_loss(k, k) / d;
        sum += d * noise_limited_stream_rate(kappa, scenario.noise())?;
    }
    Ok(sum)
}

/// High-power stream rate `E[log2(S + I)] - E[log2 I]`, which does not
/// depend on `P`.
pub fn interference_limited_stream_rate(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    split: &FeedbackSplit,
    k: usize,
) -> Result<f64> {
    check_split(scenario, split)?;
    let (_, mix) = mixtures_for_row(scenario, streams, split.row(k), k)?;
    let interference = mix.interference.as_ref().ok_or(Error::NoInterference { link: k })?;
    let with_signal = mix.signal_plus_interference.log_moment(0.0)?;
    let without = interference.log_moment(0.0)?;
    Ok((with_signal - without) / LN_2)
}

/// Rate lost to quantized CSI at high power and large budgets, for one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLoss {
    /// `Σ Ξ ln(P 2^{-B_ki/(nt nr - 1)} α_ki / d_i) / ln 2`, dropping the
    /// `ψ(t) - ln ω` terms.
    pub approx: f64,
    /// `E[log2 I]` with the digamma terms kept.
    pub exact: f64,
}

pub fn high_power_rate_loss(
    scenario: &NetworkScenario,
    streams: &StreamProfile,
    split: &FeedbackSplit,
    k: usize,
) -> Result<RateLoss> {
    check_split(scenario, split)?;
    let (_, mix) = mixtures_for_row(scenario, streams, split.row(k), k)?;
    let interference = mix.interference.as_ref().ok_or(Error::NoInterference { link: mix.link })?;
    let approx = interference.expect(|_, scale| scale.ln()) / LN_2;
    let exact = interference.log_moment(0.0)? / LN_2;
    Ok(RateLoss { approx, exact })
}

/// Total rate loss for a common stream count `d`, written as
/// `d (ζ1 - ζ2 ln d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricRateLoss {
    pub zeta1: f64,
    pub zeta2: f64,
    /// `d (ζ1 - ζ2 ln d)`.
    pub total: f64,
    /// `d Σ_k approx_k` from [`high_power_rate_loss`].
    pub per_link_total: f64,
    /// `total - per_link_total`; zero up to rounding when `ζ1, ζ2` are
    /// evaluated at the same `d`.
    pub discrepancy: f64,
}

pub fn symmetric_rate_loss(scenario: &NetworkScenario, d: u32, split: &FeedbackSplit) -> Result<SymmetricRateLoss> {
    check_split(scenario, split)?;
    let streams = StreamProfile::symmetric(scenario.links(), d)?;
    let df = d as f64;
    let (mut zeta1, mut zeta2, mut per_link_total) = (0.0, 0.0, 0.0);
    for k in 0..scenario.links() {
        let (_, mix) = mixtures_for_row(scenario, &streams, split.row(k), k)?;
        let interference = mix.interference.as_ref().ok_or(Error::NoInterference { link: k })?;
        // ϱ d = P 2^{-B/(nt nr - 1)} α.
        zeta1 += interference.expect(|_, scale| (scale * df).ln()) / LN_2;
        zeta2 += interference.weight_sum() / LN_2;
        per_link_total += df * interference.expect(|_, scale| scale.ln()) / LN_2;
    }
    let total = df * (zeta1 - zeta2 * df.ln());
    Ok(SymmetricRateLoss { zeta1, zeta2, total, per_link_total, discrepancy: total - per_link_total })
}

/// Feedback needed to hold `P 2^{-B_ki/(nt nr - 1)} = θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantGapBits {
    /// `(nt nr - 1) log2(P / θ)`.
    pub per_channel: f64,
    /// `K (nt nr - 1) log2(P / θ)`.
    pub total: f64,
}

pub fn feedback_bits_for_constant_gap(scenario: &NetworkScenario, power: f64, theta: f64) -> Result<ConstantGapBits> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain { function: "feedback_bits_for_constant_gap", value: theta });
    }
    if !(power >= theta && power.is_finite()) {
        return Err(Error::Domain { function: "feedback_bits_for_constant_gap", value: power });
    }
    let per_channel = scenario.quantization_dof() as f64 * (power / theta).log2();
    Ok(ConstantGapBits { per_channel, total: scenario.links() as f64 * per_channel })
}

impl ConstantGapBits {
    /// Every entry of the split set to the rounded per-channel requirement.
    pub fn rounded_split(&self, links: usize) -> FeedbackSplit {
        FeedbackSplit::uniform(links, self.per_channel.round() as u32)
    }
}
