//! Moment-based Chebyshev algorithm carried out in double-double
//! arithmetic.
//!
//! The map from ordinary moments to recurrence coefficients is
//! exponentially ill-conditioned, so both the moments and the algorithm
//! run at ~32 digits. This path exists as an independent cross-check of
//! the Stieltjes coefficients.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::potential::{EvenPolynomial, NormalizedPotential};

/// Relative change between trapezoid refinements accepted as converged.
const MOMENT_TOL: f64 = 1e-30;
/// `ln` of the neglected tail relative to the moments.
const MOMENT_TAIL: f64 = 110.0;

fn phi_dd(coeffs: &[f64], x: DoubleDouble) -> DoubleDouble {
    let y = x * x;
    coeffs
        .iter()
        .rev()
        .fold(DoubleDouble::ZERO, |acc, c| acc * y + DoubleDouble::from_f64(*c))
}

/// Ordinary moments `mu_j = int x^j e^-phi dx`, `j < count`, in
/// double-double precision. Odd moments vanish by parity.
pub fn moments_dd(p: &NormalizedPotential, count: usize) -> Result<Vec<DoubleDouble>> {
    let jmax = count.saturating_sub(1) as f64;
    let mut l = p.truncation_radius().max(1.0);
    while p.eval(l) - jmax * l.ln() < MOMENT_TAIL {
        l *= 1.05;
    }
    // exact power-of-two fractions of l
    let coeffs = p.coeffs();
    let mut intervals = 512usize;
    let mut prev: Option<Vec<DoubleDouble>> = None;
    loop {
        if intervals > 1 << 18 {
            return Err(Error::IntegrationFailure(
                "double-double moment quadrature did not converge".into(),
            ));
        }
        let h = l / intervals as f64;
        let mut acc = vec![DoubleDouble::ZERO; count];
        // trapezoid on [0, l]; the origin carries half weight and the
        // far end is negligible by construction of l
        for i in 0..=intervals {
            let x = DoubleDouble::from_f64(i as f64) * DoubleDouble::from_f64(h);
            let w = (-phi_dd(coeffs, x)).exp();
            let w = if i == 0 { w.ldexp(-1) } else { w };
            let x2 = x * x;
            let mut xp = w;
            for j in (0..count).step_by(2) {
                acc[j] += xp;
                xp *= x2;
            }
        }
        let two_h = DoubleDouble::from_f64(2.0 * h);
        let cur: Vec<DoubleDouble> = acc.into_iter().map(|s| s * two_h).collect();
        if let Some(pm) = &prev {
            let worst = cur
                .iter()
                .zip(pm)
                .step_by(2)
                .map(|(c, q)| ((*c - *q) / *c).to_f64().abs())
                .fold(0.0f64, f64::max);
            if worst <= MOMENT_TOL {
                return Ok(cur);
            }
        }
        prev = Some(cur);
        intervals *= 2;
    }
}

/// Recurrence coefficients `a_0..a_n` from moments `mu_0..mu_{2n+1}`.
pub fn chebyshev_from_moments(mu: &[DoubleDouble], n: usize) -> Result<Vec<DoubleDouble>> {
    let len = 2 * n + 2;
    if mu.len() < len {
        return Err(Error::InvalidArgument(format!(
            "need {len} moments for {} coefficients, have {}",
            n + 1,
            mu.len()
        )));
    }
    let zero = DoubleDouble::ZERO;
    let mut alpha = vec![zero; n + 1];
    let mut beta = vec![zero; n + 1];
    if mu[0].hi <= 0.0 {
        return Err(Error::PrecisionFailure {
            method: "chebyshev",
            index: 0,
        });
    }
    alpha[0] = mu[1] / mu[0];
    beta[0] = mu[0];

    let mut sig_km2 = vec![zero; len];
    let mut sig_km1: Vec<DoubleDouble> = mu[..len].to_vec();
    for k in 1..=n {
        let mut sig_k = vec![zero; len];
        for l in k..len - k {
            sig_k[l] = sig_km1[l + 1] - alpha[k - 1] * sig_km1[l] - beta[k - 1] * sig_km2[l];
        }
        if !(sig_k[k].hi > 0.0) || !sig_k[k].is_finite() {
            return Err(Error::PrecisionFailure {
                method: "chebyshev",
                index: k,
            });
        }
        alpha[k] = sig_k[k + 1] / sig_k[k] - sig_km1[k] / sig_km1[k - 1];
        beta[k] = sig_k[k] / sig_km1[k - 1];
        sig_km2 = sig_km1;
        sig_km1 = sig_k;
    }
    Ok(beta.into_iter().map(DoubleDouble::sqrt).collect())
}

pub(crate) fn chebyshev_extended(p: &NormalizedPotential, n_max: usize) -> Result<Vec<f64>> {
    let mu = moments_dd(p, 2 * n_max + 2)?;
    let a = chebyshev_from_moments(&mu, n_max)?;
    Ok(a.into_iter().map(DoubleDouble::to_f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{normalize_potential, RawPotential};

    #[test]
    fn gaussian_moments_are_double_factorials() {
        let p = normalize_potential(&RawPotential::harmonic(), 1e-13).unwrap();
        let mu = moments_dd(&p, 12).unwrap();
        // the normalized potential differs from the exact Gaussian by
        // the normalization residual only
        let mut df = 1.0;
        for j in (0..12).step_by(2) {
            if j > 0 {
                df *= (j - 1) as f64;
            }
            assert!(((mu[j].to_f64() - df) / df).abs() < 1e-12, "j={j}");
            assert_eq!(mu[j + 1].to_f64(), 0.0);
        }
    }

    #[test]
    fn exact_gaussian_moments_give_sqrt_k() {
        let mut mu = vec![DoubleDouble::ZERO; 62];
        let mut df = DoubleDouble::ONE;
        for j in (0..62).step_by(2) {
            if j > 0 {
                df *= DoubleDouble::from_f64((j - 1) as f64);
            }
            mu[j] = df;
        }
        let a = chebyshev_from_moments(&mu, 30).unwrap();
        for (k, ak) in a.iter().enumerate().skip(1) {
            let exact = DoubleDouble::from_f64(k as f64).sqrt();
            assert!(((*ak - exact) / exact).to_f64().abs() < 1e-20, "k={k}");
        }
    }

    #[test]
    fn breakdown_is_reported_with_index() {
        // moments of a two-point measure: the third coefficient breaks down
        let mu: Vec<DoubleDouble> = (0..8)
            .map(|j| DoubleDouble::from_f64(if j % 2 == 0 { 2.0 } else { 0.0 }))
            .collect();
        match chebyshev_from_moments(&mu, 3) {
            Err(Error::PrecisionFailure { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
    }
}
