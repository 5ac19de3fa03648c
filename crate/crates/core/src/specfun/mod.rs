//! Special functions used by the closed-form rate expressions.

mod dd;
mod expint;
mod mixture;

pub use expint::{digamma_int, exp_integral_ei, scaled_expn, z_integral, z_integral_closed_form, EULER_GAMMA};
pub use mixture::{erlang_cdf, erlang_pdf, mixture_weights, ErlangComponent, ErlangMixture};

/// `ln((n)!)` for small integers, by direct summation.
pub(crate) fn ln_factorial(n: u32) -> f64 {
    #[cfg(not(feature = "std"))]
    use num_traits::Float;
    (2..=n).map(|m| (m as f64).ln()).sum()
}
