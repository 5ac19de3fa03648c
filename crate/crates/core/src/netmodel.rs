//! Network description shared by the rate engine, the allocators and the
//! Monte Carlo simulator.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Static description of a homogeneous K-link MIMO interference network.
///
/// `path_loss` is stored row-major: entry `(k, i)` is the large-scale gain
/// from transmitter `i` to receiver `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    links: usize,
    nt: usize,
    nr: usize,
    power: f64,
    noise: f64,
    path_loss: Vec<f64>,
    feedback_budget: u32,
}

impl NetworkScenario {
    pub fn new(
        links: usize,
        nt: usize,
        nr: usize,
        power: f64,
        noise: f64,
        path_loss: Vec<f64>,
        feedback_budget: u32,
    ) -> Result<Self> {
        if links == 0 {
            return Err(Error::InvalidScenario("link count must be at least 1"));
        }
        if nt == 0 || nr == 0 {
            return Err(Error::InvalidScenario("antenna counts must be at least 1"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidScenario("transmit power must be finite and positive"));
        }
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::InvalidScenario("noise power must be finite and positive"));
        }
        if path_loss.len() != links * links {
            return Err(Error::DimensionMismatch { expected: links * links, found: path_loss.len() });
        }
        for (idx, &a) in path_loss.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidScenario("path loss entries must be finite and nonnegative"));
            }
            if idx / links == idx % links && a <= 0.0 {
                return Err(Error::InvalidScenario("direct-link path loss must be positive"));
            }
        }
        Ok(Self { links, nt, nr, power, noise, path_loss, feedback_budget })
    }

    /// Builds a scenario from path-loss rows.
    pub fn from_rows(
        nt: usize,
        nr: usize,
        power: f64,
        noise: f64,
        rows: &[&[f64]],
        feedback_budget: u32,
    ) -> Result<Self> {
        let links = rows.len();
        let mut flat = Vec::with_capacity(links * links);
        for row in rows {
            if row.len() != links {
                return Err(Error::DimensionMismatch { expected: links, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Self::new(links, nt, nr, power, noise, flat, feedback_budget)
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

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn feedback_budget(&self) -> u32 {
        self.feedback_budget
    }

    pub fn path_loss(&self, k: usize, i: usize) -> f64 {
        self.path_loss[k * self.links + i]
    }

    pub fn path_loss_row(&self, k: usize) -> &[f64] {
        &self.path_loss[k * self.links..(k + 1) * self.links]
    }

    /// `10 log10(P / sigma^2)`.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.noise).log10()
    }

    /// Dimension of a vectorized channel matrix, `nt * nr`.
    pub fn channel_dim(&self) -> usize {
        self.nt * self.nr
    }

    /// Degrees of freedom of the quantization error, `nt * nr - 1`. Each
    /// feedback bit shrinks the residual-interference scale by
    /// `2^(-1 / (nt nr - 1))`.
    pub fn quantization_dof(&self) -> usize {
        self.nt * self.nr - 1
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidScenario("transmit power must be finite and positive"));
        }
        s.power = power;
        Ok(s)
    }

    /// Same network with `P = sigma^2 * 10^(snr_db / 10)`.
    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        self.with_power(self.noise * 10.0_f64.powf(snr_db / 10.0))
    }

    pub fn with_feedback_budget(&self, bits: u32) -> Self {
        let mut s = self.clone();
        s.feedback_budget = bits;
        s
    }

    pub fn with_path_loss(&self, path_loss: Vec<f64>) -> Result<Self> {
        Self::new(self.links, self.nt, self.nr, self.power, self.noise, path_loss, self.feedback_budget)
    }
}

/// Number of data streams carried by each link (the transmission mode).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamProfile {
    streams: Vec<u32>,
}

impl StreamProfile {
    pub fn new(streams: Vec<u32>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::InvalidScenario("stream profile must cover at least one link"));
        }
        if streams.iter().any(|&d| d == 0) {
            return Err(Error::InvalidScenario("every link must carry at least one stream"));
        }
        Ok(Self { streams })
    }

    /// `d` streams on each of `links` links.
    pub fn symmetric(links: usize, d: u32) -> Result<Self> {
        Self::new(vec![d; links])
    }

    pub fn links(&self) -> usize {
        self.streams.len()
    }

    pub fn get(&self, k: usize) -> u32 {
        self.streams[k]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.streams
    }

    pub fn max_streams(&self) -> u32 {
        self.streams.iter().copied().max().unwrap_or(0)
    }

    pub fn total_streams(&self) -> u32 {
        self.streams.iter().sum()
    }

    /// The common stream count, if every link carries the same number.
    pub fn common(&self) -> Option<u32> {
        let d = self.streams[0];
        self.streams.iter().all(|&x| x == d).then_some(d)
    }

    /// Checks the profile against the scenario. Symmetric profiles must
    /// satisfy `nt + nr - (K + 1) d >= 0`; asymmetric profiles are only
    /// checked for shape, since no general feasibility condition is known.
    pub fn check(&self, scenario: &NetworkScenario) -> Result<()> {
        if self.links() != scenario.links() {
            return Err(Error::DimensionMismatch { expected: scenario.links(), found: self.links() });
        }
        if let Some(d) = self.common() {
            if (scenario.links() + 1) * d as usize > scenario.nt() + scenario.nr() {
                return Err(infeasible(scenario, d));
            }
        }
        Ok(())
    }
}

fn infeasible(scenario: &NetworkScenario, streams: u32) -> Error {
    Error::InfeasibleNetwork {
        nt: scenario.nt(),
        nr: scenario.nr(),
        links: scenario.links(),
        streams,
    }
}

/// Per-receiver allocation of feedback bits; entry `(k, i)` is the number of
/// bits receiver `k` spends quantizing the channel from transmitter `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeedbackSplit {
    links: usize,
    bits: Vec<u32>,
}

impl FeedbackSplit {
    pub fn zeros(links: usize) -> Self {
        Self { links, bits: vec![0; links * links] }
    }

    pub fn from_rows(rows: &[&[u32]]) -> Result<Self> {
        let links = rows.len();
        let mut bits = Vec::with_capacity(links * links);
        for row in rows {
            if row.len() != links {
                return Err(Error::DimensionMismatch { expected: links, found: row.len() });
            }
            bits.extend_from_slice(row);
        }
        Ok(Self { links, bits })
    }

    /// Every entry equal to `bits`.
    pub fn uniform(links: usize, bits: u32) -> Self {
        Self { links, bits: vec![bits; links * links] }
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn get(&self, k: usize, i: usize) -> u32 {
        self.bits[k * self.links + i]
    }

    pub fn set(&mut self, k: usize, i: usize, bits: u32) {
        self.bits[k * self.links + i] = bits;
    }

    pub fn row(&self, k: usize) -> &[u32] {
        &self.bits[k * self.links..(k + 1) * self.links]
    }

    pub fn set_row(&mut self, k: usize, row: &[u32]) {
        self.bits[k * self.links..(k + 1) * self.links].copy_from_slice(row);
    }

    pub fn max_entry(&self) -> u32 {
        self.bits.iter().copied().max().unwrap_or(0)
    }
}

/// Largest symmetric stream count `floor((nt + nr) / (K + 1))`.
pub fn max_feasible_mode(scenario: &NetworkScenario) -> Result<u32> {
    let d = ((scenario.nt() + scenario.nr()) / (scenario.links() + 1)) as u32;
    if d == 0 {
        return Err(infeasible(scenario, 1));
    }
    Ok(d)
}

/// Checks that `split` is `K x K` and that every row spends exactly the
/// scenario's budget. Reports the first offending row.
pub fn validate_split(split: &FeedbackSplit, scenario: &NetworkScenario) -> Result<()> {
    if split.links() != scenario.links() {
        return Err(Error::DimensionMismatch { expected: scenario.links(), found: split.links() });
    }
    for k in 0..split.links() {
        let sum: u64 = split.row(k).iter().map(|&b| b as u64).sum();
        if sum != scenario.feedback_budget() as u64 {
            return Err(Error::SplitViolation { row: k, sum, expected: scenario.feedback_budget() });
        }
    }
    Ok(())
}
