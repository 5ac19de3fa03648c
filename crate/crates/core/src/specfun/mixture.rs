//! Density of a sum of independent Erlang variables as a finite weighted sum
//! of Erlang densities.
//!
//! For components `(η_h, ϱ_h)` with pairwise distinct scales, the sum has
//! density `Σ_i Σ_{t=1}^{η_i} Ξ(i, t) g(x, t, ϱ_i)`, `g` being the Erlang
//! density of shape `t` and scale `ϱ_i`. Partial fractions of the Laplace
//! transform `Π_h (1 + s ϱ_h)^{-η_h}` give
//!
//! ```text
//! Ξ(i, t) = Σ_{n_h >= 0, Σ n_h = η_i - t} Π_{h≠i} C(η_h + n_h - 1, n_h)
//!              · (ϱ_i / (ϱ_i - ϱ_h))^{η_h} · (ϱ_h / (ϱ_h - ϱ_i))^{n_h}
//! ```
//!
//! The nested sum over `n_h` (the cumulative indices `l_1 >= … >= l_{L-2} >= t`
//! of the usual statement) is evaluated as the degree-`η_i - t` coefficient
//! of a product of truncated power series. The ratios are scale free, so the
//! weights neither overflow nor depend on the units of `ϱ`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::dd::Dd;
use super::{digamma_int, ln_factorial, z_integral};
use crate::{Error, Result};

/// Components whose scales differ by less than this (relative) are merged.
const MERGE_REL: f64 = 1e-9;
/// Components closer than this (relative) are pushed apart by this much.
const PERTURB_REL: f64 = 1e-6;
/// Above this `Σ |Ξ|` the closed-form log-moment is replaced by the
/// transform-domain quadrature.
const CONDITION_LIMIT: f64 = 1e6;
/// Below this `Σ |Ξ|` densities are summed in plain `f64`; the cancellation
/// error is then under `1e-12` of the terms.
const PLAIN_LIMIT: f64 = 1e4;

/// One Erlang term: the sum of `shape` independent exponentials of mean
/// `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangComponent {
    pub shape: u32,
    pub scale: f64,
}

impl ErlangComponent {
    pub fn new(shape: u32, scale: f64) -> Self {
        Self { shape, scale }
    }
}

/// Weighted sum of Erlang densities describing a sum of independent Erlang
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ErlangMixture {
    components: Vec<ErlangComponent>,
    /// `weights[i][t - 1] = Ξ(i, t)`, rounded to `f64`.
    weights: Vec<Vec<f64>>,
    /// The same weights in double-double.
    exact: Vec<Vec<Dd>>,
    /// `Σ |Ξ|`.
    condition: f64,
}

/// Erlang density `x^{t-1} e^{-x/ϱ} / (ϱ^t (t-1)!)`.
pub fn erlang_pdf(x: f64, shape: u32, scale: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if shape == 1 { 1.0 / scale } else { 0.0 };
    }
    let t = shape as f64;
    ((t - 1.0) * x.ln() - x / scale - t * scale.ln() - ln_factorial(shape - 1)).exp()
}

/// Erlang distribution function `1 - e^{-x/ϱ} Σ_{n<t} (x/ϱ)^n / n!`.
pub fn erlang_cdf(x: f64, shape: u32, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = x / scale;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..shape {
        term *= y / n as f64;
        sum += term;
    }
    // 1 - e^{-y} sum, with the subtraction done as -expm1 where it matters.
    let tail = (-y + sum.ln()).exp();
    if tail > 0.5 {
        -(-y + sum.ln()).exp_m1()
    } else {
        1.0 - tail
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

/// Drops zero-shape terms, merges coincident scales and separates
/// near-coincident ones.
fn normalize(components: &[ErlangComponent]) -> Result<Vec<ErlangComponent>> {
    let mut merged: Vec<ErlangComponent> = Vec::with_capacity(components.len());
    for c in components {
        if !(c.scale.is_finite() && c.scale > 0.0) {
            return Err(Error::Domain { function: "mixture_weights", value: c.scale });
        }
        if c.shape == 0 {
            continue;
        }
        match merged.iter_mut().find(|m| relative_gap(m.scale, c.scale) < MERGE_REL) {
            Some(m) => m.shape += c.shape,
            None => merged.push(*c),
        }
    }
    if merged.is_empty() {
        return Err(Error::EmptyMixture);
    }
    // Push near pairs apart, lower scale down and higher scale up.
    let n = merged.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| merged[a].scale.total_cmp(&merged[b].scale));
    for w in 1..n {
        let (lo, hi) = (order[w - 1], order[w]);
        if relative_gap(merged[lo].scale, merged[hi].scale) < PERTURB_REL {
            merged[lo].scale *= 1.0 - 0.5 * PERTURB_REL;
            merged[hi].scale *= 1.0 + 0.5 * PERTURB_REL;
        }
    }
    Ok(merged)
}

/// Weights `Ξ(i, ·)` for component `i` against all others.
fn component_weights(components: &[ErlangComponent], i: usize) -> Vec<Dd> {
    let eta_i = components[i].shape as usize;
    let rho_i = components[i].scale;
    let degree = eta_i - 1;
    // product[n] accumulates the coefficient of z^n.
    let mut product = vec![Dd::ZERO; degree + 1];
    product[0] = Dd::ONE;
    let mut series = vec![Dd::ZERO; degree + 1];
    for (h, other) in components.iter().enumerate() {
        if h == i {
            continue;
        }
        let eta_h = other.shape;
        // ϱ_i - ϱ_h is exact in double-double.
        let gap = Dd::from_f64(rho_i) - other.scale;
        let r = Dd::from_f64(rho_i) / gap;
        let q = -(Dd::from_f64(other.scale) / gap);
        let mut coeff = r.powi(eta_h);
        for (n, slot) in series.iter_mut().enumerate() {
            if n > 0 {
                coeff = coeff * q * (eta_h as f64 + n as f64 - 1.0) / n as f64;
            }
            *slot = coeff;
        }
        for n in (0..=degree).rev() {
            product[n] = (0..=n).map(|m| product[m] * series[n - m]).sum();
        }
    }
    // Ξ(i, t) is the coefficient of z^{η_i - t}.
    (1..=eta_i).map(|t| product[eta_i - t]).collect()
}

// ln((t - 1)!) in double-double.
fn ln_factorial_dd(n: u32) -> Dd {
    (2..=n).map(|m| Dd::from_f64(m as f64).ln()).sum()
}

/// Erlang density in double-double, for `x > 0`.
fn erlang_pdf_dd(x: f64, shape: u32, scale: f64) -> Dd {
    let y = Dd::from_f64(x) / scale;
    let ln_g = y.ln() * (shape - 1) as f64 - y - Dd::from_f64(scale).ln() - ln_factorial_dd(shape - 1);
    ln_g.exp()
}

/// `e^{-y} Σ_{n<t} y^n / n!`, the Erlang survival function, for `x > 0`.
fn erlang_tail_dd(x: f64, shape: u32, scale: f64) -> Dd {
    let y = Dd::from_f64(x) / scale;
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    for n in 1..shape {
        term = term * y / n as f64;
        sum = sum + term;
    }
    (sum.ln() - y).exp()
}

/// Builds the mixture representation of `Σ_h Erlang(η_h, ϱ_h)`.
///
/// Zero-shape components are dropped; components with coincident scales are
/// merged (shapes added). Returns [`Error::EmptyMixture`] when nothing is
/// left.
pub fn mixture_weights(components: &[ErlangComponent]) -> Result<ErlangMixture> {
    let components = normalize(components)?;
    let exact: Vec<Vec<Dd>> = (0..components.len()).map(|i| component_weights(&components, i)).collect();
    let weights: Vec<Vec<f64>> = exact.iter().map(|w| w.iter().map(|x| x.to_f64()).collect()).collect();
    let condition = weights.iter().flatten().map(|w| w.abs()).sum();
    Ok(ErlangMixture { components, weights, exact, condition })
}

impl ErlangMixture {
    pub fn new(components: &[ErlangComponent]) -> Result<Self> {
        mixture_weights(components)
    }

    /// Components after dropping and merging.
    pub fn components(&self) -> &[ErlangComponent] {
        &self.components
    }

    /// `Ξ(i, t)` for component `i` (0-based) and order `t` (1-based).
    pub fn weight(&self, i: usize, t: u32) -> f64 {
        self.weights[i][t as usize - 1]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// Iterates `(component, order t, Ξ(i, t))`.
    pub fn terms(&self) -> impl Iterator<Item = (ErlangComponent, u32, f64)> + '_ {
        self.components
            .iter()
            .zip(&self.weights)
            .flat_map(|(c, w)| w.iter().enumerate().map(move |(t, &xi)| (*c, t as u32 + 1, xi)))
    }

    pub fn total_shape(&self) -> u32 {
        self.components.iter().map(|c| c.shape).sum()
    }

    /// `Σ Ξ`, accumulated in double-double; equals one up to rounding.
    pub fn weight_sum(&self) -> f64 {
        self.exact.iter().flatten().copied().sum::<Dd>().to_f64()
    }

    fn exact_sum(&self, mut f: impl FnMut(u32, f64) -> Dd) -> Dd {
        self.components
            .iter()
            .zip(&self.exact)
            .flat_map(|(c, w)| w.iter().enumerate().map(move |(t, &xi)| (*c, t as u32 + 1, xi)))
            .map(|(c, t, xi)| xi * f(t, c.scale))
            .sum()
    }

    /// `Σ |Ξ|`, a bound on the amplification of rounding errors when
    /// expectations are formed as `Σ Ξ E_t[f]`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn plain_sum(&self, mut f: impl FnMut(u32, f64) -> f64) -> f64 {
        self.terms().map(|(c, t, xi)| xi * f(t, c.scale)).sum()
    }

    /// `Σ Ξ(i, t) f(t, ϱ_i)`, accumulated in double-double. The rounding of
    /// each `f` value is amplified by up to `condition()`.
    pub fn expect<F: FnMut(u32, f64) -> f64>(&self, mut f: F) -> f64 {
        self.exact_sum(|t, scale| Dd::from_f64(f(t, scale))).to_f64()
    }

    /// `Σ Ξ(i, t) t ϱ_i`, the mean as reproduced by the weights. Equal to
    /// [`mean`](Self::mean) up to rounding.
    pub fn weighted_mean(&self) -> f64 {
        self.exact_sum(|t, scale| Dd::from_f64(scale) * t as f64).to_f64()
    }

    /// `Σ_h η_h ϱ_h`.
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.shape as f64 * c.scale).sum()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain { function: "mixture_pdf", value: x });
        }
        if self.condition < PLAIN_LIMIT {
            return Ok(self.plain_sum(|t, scale| erlang_pdf(x, t, scale)));
        }
        if x == 0.0 {
            return Ok(self.exact_sum(|t, scale| if t == 1 { Dd::ONE / scale } else { Dd::ZERO }).to_f64());
        }
        Ok(self.exact_sum(|t, scale| erlang_pdf_dd(x, t, scale)).to_f64())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.condition < PLAIN_LIMIT {
            return self.plain_sum(|t, scale| erlang_cdf(x, t, scale));
        }
        // Σ Ξ (1 - tail) = 1 - Σ Ξ tail, using Σ Ξ = 1.
        (Dd::ONE - self.exact_sum(|t, scale| erlang_tail_dd(x, t, scale))).to_f64()
    }

    /// Laplace transform `E[e^{-sX}] = Π_h (1 + s ϱ_h)^{-η_h}`, in log form.
    fn ln_laplace(&self, s: f64) -> f64 {
        self.components.iter().map(|c| -(c.shape as f64) * (s * c.scale).ln_1p()).sum()
    }

    /// `E[ln(X + c)]` for `c > 0`, or `E[ln X]` for `c = 0`.
    ///
    /// Uses the weighted closed form unless the weights are badly
    /// conditioned, in which case it falls back to
    /// [`log_moment_transform`](Self::log_moment_transform).
    pub fn log_moment(&self, c: f64) -> Result<f64> {
        if self.condition() > CONDITION_LIMIT {
            self.log_moment_transform(c)
        } else {
            self.log_moment_closed_form(c)
        }
    }

    /// `Σ Ξ Z(c, t, ϱ_i)` for `c > 0`, `Σ Ξ (ψ(t) + ln ϱ_i)` for `c = 0`.
    pub fn log_moment_closed_form(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain { function: "log_moment", value: c });
        }
        let mut acc = 0.0;
        for (comp, t, xi) in self.terms() {
            let e = if c == 0.0 {
                digamma_int(t)? + comp.scale.ln()
            } else {
                z_integral(c, t, comp.scale)?
            };
            acc += xi * e;
        }
        Ok(acc)
    }

    /// Log-moment from the Laplace transform, via Frullani's integral:
    ///
    /// `E[ln(X + c)] = ln c + ∫_0^∞ e^{-cs} (1 - M(s)) ds / s` and
    /// `E[ln X] = ∫_0^∞ (e^{-s} - M(s)) ds / s`,
    ///
    /// integrated by the trapezoidal rule in `u = ln s`, where the integrand
    /// is analytic and decays exponentially at both ends.
    pub fn log_moment_transform(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain { function: "log_moment", value: c });
        }
        const STEP: f64 = 0.125;
        const CUTOFF: f64 = 1e-19;
        let integrand = |u: f64| {
            let s = u.exp();
            let one_minus_m = -self.ln_laplace(s).exp_m1();
            if c > 0.0 {
                (-c * s).exp() * one_minus_m
            } else {
                one_minus_m + (-s).exp_m1()
            }
        };
        let scale = self.mean() + c + 1.0;
        let u_lo = (CUTOFF / scale).ln();
        let u_floor = if c > 0.0 { (45.0 / c).ln() } else { 45.0_f64.ln() };
        let mut sum = 0.5 * integrand(u_lo);
        let mut u = u_lo;
        loop {
            u += STEP;
            let f = integrand(u);
            sum += f;
            if u > u_floor && f.abs() < CUTOFF {
                break;
            }
            if u > 800.0 {
                break;
            }
        }
        let integral = sum * STEP;
        Ok(if c > 0.0 { c.ln() + integral } else { integral })
    }
}
