#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// `e^x E_n(x)` for `x > 0`, `n >= 1`, where `E_n(x) = ∫_1^∞ e^{-xw} w^{-n} dw`.
///
/// The scaling keeps the value representable for large `x`, where `E_n`
/// underflows but `e^x E_n(x) ~ 1 / (x + n)`. Uses the power series for
/// `x <= 1` and the Lentz continued fraction above.
pub fn scaled_expn(n: u32, x: f64) -> f64 {
    debug_assert!(n >= 1);
    if x > 1.0 {
        let nf = n as f64;
        let mut b = x + nf;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (nf - 1.0 + i as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    } else {
        let nm1 = n as i64 - 1;
        let mut ans = if nm1 != 0 { 1.0 / nm1 as f64 } else { -x.ln() - EULER_GAMMA };
        let mut fact = 1.0;
        for i in 1..MAX_ITER as i64 {
            fact *= -x / i as f64;
            let del = if i != nm1 {
                -fact / (i - nm1) as f64
            } else {
                let psi = -EULER_GAMMA + (1..=nm1).map(|m| 1.0 / m as f64).sum::<f64>();
                fact * (-x.ln() + psi)
            };
            ans += del;
            if del.abs() < ans.abs() * EPS {
                break;
            }
        }
        x.exp() * ans
    }
}

/// Exponential integral `Ei(x) = ∫_{-∞}^x e^t / t dt` for negative `x`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) || x.abs() < 1e-300 {
        return Err(Error::Domain { function: "exp_integral_ei", value: x });
    }
    let y = -x;
    Ok(-(-y).exp() * scaled_expn(1, y))
}

/// Digamma at a positive integer: `ψ(t) = -γ + Σ_{m=1}^{t-1} 1/m`.
pub fn digamma_int(t: u32) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain { function: "digamma_int", value: 0.0 });
    }
    // Sum smallest terms first.
    let harmonic: f64 = (1..t).rev().map(|m| 1.0 / m as f64).sum();
    Ok(harmonic - EULER_GAMMA)
}

fn check_z_args(x: f64, t: u32, z: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain { function: "z_integral", value: x });
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain { function: "z_integral", value: z });
    }
    if t == 0 {
        return Err(Error::Domain { function: "z_integral", value: 0.0 });
    }
    Ok(())
}

/// `E[ln(X + x)]` for `X ~ Erlang(shape t, scale z)`.
///
/// Evaluated as `ln x + Σ_{s=1}^{t} e^μ E_s(μ)` with `μ = x / z`. Every term
/// is positive, so there is no cancellation for large `μ` or `t`; the sum
/// telescopes into the `Ei`-plus-polynomial form of
/// [`z_integral_closed_form`].
pub fn z_integral(x: f64, t: u32, z: f64) -> Result<f64> {
    check_z_args(x, t, z)?;
    let mu = x / z;
    let tail: f64 = (1..=t).map(|s| scaled_expn(s, mu)).sum();
    Ok(x.ln() + tail)
}

/// The alternating-sign closed form of `E[ln(X + x)]`:
///
/// `ln x + Σ_{ϑ=0}^{t-1} 1/Γ(t-ϑ) [ (-1)^{t-ϑ-2} μ^{t-ϑ-1} e^μ Ei(-μ)
///        + Σ_{ν=1}^{t-ϑ-1} Γ(ν) (-μ)^{t-ϑ-ν-1} ]`, `μ = x / z`.
///
/// Loses roughly `μ^{t-2} / (t-1)!` relative digits to cancellation; kept as
/// a reference for [`z_integral`].
pub fn z_integral_closed_form(x: f64, t: u32, z: f64) -> Result<f64> {
    check_z_args(x, t, z)?;
    let mu = x / z;
    // e^μ Ei(-μ) = -e^μ E_1(μ)
    let exp_ei = -scaled_expn(1, mu);
    let t = t as i32;
    let mut acc = 0.0;
    let mut gamma_nu = [1.0f64; 64];
    for nu in 2..64 {
        gamma_nu[nu] = gamma_nu[nu - 1] * (nu - 1) as f64;
    }
    for theta in 0..t {
        let order = t - theta; // t - ϑ >= 1
        let inv_gamma = 1.0 / gamma_nu[order as usize];
        let sign = if (order - 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut inner = sign * mu.powi(order - 1) * exp_ei;
        for nu in 1..order {
            inner += gamma_nu[nu as usize] * (-mu).powi(order - nu - 1);
        }
        acc += inv_gamma * inner;
    }
    Ok(x.ln() + acc)
}
