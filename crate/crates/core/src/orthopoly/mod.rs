//! Orthonormal polynomials for the weight `rho = exp(-phi)`.
//!
//! The family satisfies `x P_n = a_{n+1} P_{n+1} + a_n P_{n-1}` with
//! `P_0 = 1/a_0`, `P_{-1} = 0`; the weight is even so there is no diagonal
//! term.

mod chebyshev;
mod stieltjes;

use std::io::{self, Write};

pub use chebyshev::{chebyshev_from_moments, moments_dd};

use crate::error::{Error, Result};
use crate::potential::{EvenPolynomial, NormalizedPotential};
use crate::quadrature::{QuadratureKind, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceMethod {
    /// Discretized Stieltjes procedure in double precision.
    Stieltjes,
    /// Chebyshev algorithm on ordinary moments in double-double precision.
    ChebyshevExtended,
}

#[derive(Debug, Clone)]
pub struct RecurrenceTable {
    a: Vec<f64>,
    pub method: RecurrenceMethod,
    pub potential: NormalizedPotential,
}

/// Default recurrence length for a spatial truncation `n`.
pub fn default_n_max(n: usize) -> usize {
    (2 * n).max(200)
}

pub fn build_recurrence(
    p: &NormalizedPotential,
    n_max: usize,
    method: RecurrenceMethod,
    tol: f64,
) -> Result<RecurrenceTable> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let a = match method {
        RecurrenceMethod::Stieltjes => stieltjes::stieltjes(p, n_max, tol)?,
        RecurrenceMethod::ChebyshevExtended => chebyshev::chebyshev_extended(p, n_max)?,
    };
    if let Some(k) = a.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::PrecisionFailure {
            method: "recurrence",
            index: k,
        });
    }
    Ok(RecurrenceTable {
        a,
        method,
        potential: p.clone(),
    })
}

impl RecurrenceTable {
    /// Table from known coefficients (e.g. closed forms).
    pub fn from_coefficients(a: Vec<f64>, method: RecurrenceMethod, potential: NormalizedPotential) -> Self {
        Self { a, method, potential }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n > self.n_max() {
            Err(Error::IndexOutOfRange {
                index: n,
                max: self.n_max(),
            })
        } else {
            Ok(())
        }
    }

    /// `P_n(x)` by forward recurrence.
    pub fn eval_poly(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        let mut prev = 0.0;
        let mut cur = 1.0 / self.a[0];
        for k in 0..n {
            let ak = if k == 0 { 0.0 } else { self.a[k] };
            let next = (x * cur - ak * prev) / self.a[k + 1];
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// `[P_0(x), ..., P_n(x)]`.
    pub fn eval_poly_all(&self, n: usize, x: f64) -> Result<Vec<f64>> {
        self.check_index(n)?;
        let mut out = Vec::with_capacity(n + 1);
        out.push(1.0 / self.a[0]);
        for k in 0..n {
            let ak = if k == 0 { 0.0 } else { self.a[k] };
            let pm1 = if k == 0 { 0.0 } else { out[k - 1] };
            out.push((x * out[k] - ak * pm1) / self.a[k + 1]);
        }
        Ok(out)
    }

    /// Values and first derivatives of `P_0..P_n` at `x`.
    pub fn eval_poly_and_deriv_all(&self, n: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.eval_poly_all(n, x)?;
        let mut d = Vec::with_capacity(n + 1);
        d.push(0.0);
        for k in 0..n {
            let ak = if k == 0 { 0.0 } else { self.a[k] };
            let dm1 = if k == 0 { 0.0 } else { d[k - 1] };
            d.push((p[k] + x * d[k] - ak * dm1) / self.a[k + 1]);
        }
        Ok((p, d))
    }

    /// `<f, P_n>` for `n = 0..=n_top` under `q`.
    pub fn inner_products<F: Fn(f64) -> f64>(&self, q: &QuadratureRule, f: F, n_top: usize) -> Result<Vec<f64>> {
        inner_products(self, q, f, n_top)
    }

    /// Writes `n,a_n` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,a_n")?;
        for (n, a) in self.a.iter().enumerate() {
            writeln!(out, "{n},{a:.16e}")?;
        }
        Ok(())
    }
}

/// `<f, P_n>` for `n = 0..=n_top`, accumulated node by node.
pub fn inner_products<F: Fn(f64) -> f64>(
    t: &RecurrenceTable,
    q: &QuadratureRule,
    f: F,
    n_top: usize,
) -> Result<Vec<f64>> {
    let mut acc = vec![crate::quadrature::CompensatedSum::new(); n_top + 1];
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        let fx = w * f(*x);
        if fx == 0.0 {
            continue;
        }
        let p = t.eval_poly_all(n_top, *x)?;
        for (s, pn) in acc.iter_mut().zip(&p) {
            s.add(fx * pn);
        }
    }
    Ok(acc.iter().map(|s| s.value()).collect())
}

/// Quadrature against `rho`. `resolution` is the panel count for the
/// composite rule and the node count for the Gauss rule.
pub fn build_quadrature(
    p: &NormalizedPotential,
    kind: QuadratureKind,
    resolution: usize,
    table: Option<&RecurrenceTable>,
) -> Result<QuadratureRule> {
    match kind {
        QuadratureKind::CompositeWeddle => {
            QuadratureRule::composite_weddle(p.truncation_radius(), resolution, |x| p.weight(x))
        }
        QuadratureKind::GaussFromJacobi => {
            let t = table.ok_or_else(|| Error::InvalidArgument("Gauss quadrature needs a recurrence table".into()))?;
            QuadratureRule::gauss_from_jacobi(t.coefficients(), resolution)
        }
    }
}

/// Leading-order constant `c` in `a_n ~ c n^(1/2m)` for a potential of
/// degree `2m` with leading coefficient `lead`.
pub fn magnus_constant(m: usize, lead: f64) -> f64 {
    let fact = |k: usize| (1..=k).fold(1.0f64, |acc, i| acc * i as f64);
    let num = fact(m - 1).powi(2);
    let den = 2.0 * lead * fact(2 * m - 1);
    (num / den).powf(1.0 / (2 * m) as f64)
}

/// `a_n / (c n^(1/2m))` for `n` in `range`.
pub fn magnus_ratios(t: &RecurrenceTable, range: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    let m = t.potential.half_degree();
    let c = magnus_constant(m, t.potential.leading());
    range
        .filter(|n| *n >= 1 && *n <= t.n_max())
        .map(|n| t.a(n) / (c * (n as f64).powf(1.0 / (2 * m) as f64)))
        .collect()
}
