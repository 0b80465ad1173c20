//! Galerkin estimates of the operator norms that the hypocoercivity
//! argument needs to be bounded independently of `N`:
//!
//! - `kn0 = |Omega^-1/2 Pi_N d/dx*|`
//! - `kn1 = |Omega^-1 d/dx Pi_N d/dx*|`
//! - `kn2 = |Omega^-1 Pi_N d/dx* Pi_N d/dx*|`
//! - `kn3 = |Omega^-1 Pi_N d/dx* d/dx|`
//!
//! each restricted to inputs in `X_N = span(P_0..P_N)`. The ambient space
//! is truncated at `M_big` and the truncation is grown until the values
//! settle.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::{build_omega_matrix, build_phi_matrix};
use crate::orthopoly::RecurrenceTable;
use crate::potential::EvenPolynomial;

/// Relative change between successive ambient sizes accepted as converged.
pub const GALERKIN_TOL: f64 = 0.01;

/// Dense operator matrices on the leading `M_big` basis functions.
#[derive(Debug, Clone)]
pub struct KnOperators {
    pub m_big: usize,
    /// `d/dx*`, strictly lower.
    pub adjoint: DMatrix<f64>,
    /// `d/dx`, strictly upper.
    pub deriv: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    half_degree: usize,
}

impl KnOperators {
    pub fn build(t: &RecurrenceTable, m_big: usize) -> Result<Self> {
        let phi = build_phi_matrix(t, &t.potential, m_big)?;
        let omega = build_omega_matrix(&phi, m_big)?.to_dense();
        Ok(Self {
            m_big,
            adjoint: phi.lower_part().to_dense(),
            deriv: phi.upper_part().to_dense(),
            omega,
            half_degree: t.potential.half_degree(),
        })
    }

    /// Smallest ambient size with room for `d/dx*` twice on `X_N`.
    pub fn min_size(&self, n: usize) -> usize {
        n + 4 * self.half_degree
    }
}

/// How `Omega^-1/2` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseRoot {
    /// Symmetric eigendecomposition of `Omega`.
    Eigen,
    /// Cholesky inverse followed by a Denman-Beavers square root.
    CholeskyDenmanBeavers,
}

fn inverse_root_eigen(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = omega.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite(min));
    }
    let q = &eig.eigenvectors;
    let half = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let full = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok((q * half * q.transpose(), q * full * q.transpose()))
}

/// Principal square root by the Denman-Beavers iteration.
pub fn denman_beavers_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::EigenFailure("singular iterate".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::EigenFailure("singular iterate".into()))?;
        let next = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
        let change = (&next - &y).amax() / next.amax();
        y = next;
        if change < 1e-15 {
            return Ok(y);
        }
    }
    Err(Error::EigenFailure("Denman-Beavers iteration did not converge".into()))
}

fn inverse_root_cholesky(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(omega.clone().symmetric_eigenvalues().min()))?;
    let inv = chol.inverse();
    let root = denman_beavers_sqrt(&inv)?;
    Ok((root, inv))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// The four norms at the ambient size of `ops`.
pub fn estimate_kn(ops: &KnOperators, n: usize, root: InverseRoot) -> Result<[f64; 4]> {
    let m = ops.m_big;
    if m < ops.min_size(n) {
        return Err(Error::OperatorTooSmall {
            needed: ops.min_size(n),
            available: m,
        });
    }
    let (inv_half, inv) = match root {
        InverseRoot::Eigen => inverse_root_eigen(&ops.omega)?,
        InverseRoot::CholeskyDenmanBeavers => inverse_root_cholesky(&ops.omega)?,
    };
    // inputs live in X_N: keep the first N+1 columns
    let embed = |a: &DMatrix<f64>| a.columns(0, n + 1).into_owned();
    let project = |mut a: DMatrix<f64>| {
        for i in n + 1..a.nrows() {
            a.row_mut(i).fill(0.0);
        }
        a
    };
    let adj_n = project(embed(&ops.adjoint));
    let t0 = &inv_half * &adj_n;
    let t1 = &inv * (&ops.deriv * &adj_n);
    let t2 = &inv * project(&ops.adjoint * &adj_n);
    let t3 = &inv * project(&ops.adjoint * embed(&ops.deriv));
    Ok([t0, t1, t2, t3].map(|t| spectral_norm(&t)))
}

/// Ambient sizes tried for a given `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MBigSchedule {
    pub offset: usize,
    pub levels: usize,
}

impl Default for MBigSchedule {
    fn default() -> Self {
        Self { offset: 16, levels: 3 }
    }
}

impl MBigSchedule {
    /// `(N + offset) 2^j` for `j < levels`, raised to at least `floor`.
    pub fn sizes(&self, n: usize, floor: usize) -> Vec<usize> {
        (0..self.levels).map(|j| ((n + self.offset) << j).max(floor)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnReport {
    pub n: usize,
    /// Largest ambient size used; `kn` is the value there.
    pub m_big: usize,
    pub kn: [f64; 4],
    pub converged: bool,
    /// `(M_big, kn)` for every size in the schedule.
    pub history: Vec<(usize, [f64; 4])>,
}

fn relative_change(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// One report for `n`, growing the ambient size over the schedule.
pub fn kn_report(t: &RecurrenceTable, n: usize, schedule: &MBigSchedule) -> Result<KnReport> {
    let floor = n + 4 * t.potential.half_degree();
    let mut history = Vec::new();
    for m in schedule.sizes(n, floor) {
        let ops = KnOperators::build(t, m)?;
        history.push((m, estimate_kn(&ops, n, InverseRoot::Eigen)?));
    }
    let (m_big, kn) = *history
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty ambient-size schedule".into()))?;
    let converged = history.len() >= 2 && relative_change(&history[history.len() - 2].1, &kn) <= GALERKIN_TOL;
    Ok(KnReport {
        n,
        m_big,
        kn,
        converged,
        history,
    })
}

/// Reports for every entry of `ns`, computed concurrently.
pub fn kn_sweep(t: &RecurrenceTable, ns: &[usize], schedule: &MBigSchedule) -> Result<Vec<KnReport>> {
    let results: Vec<Result<KnReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = ns.iter().map(|&n| s.spawn(move || kn_report(t, n, schedule))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("kn worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Recurrence length needed by [`kn_sweep`] for these `N`.
pub fn required_recurrence(ns: &[usize], schedule: &MBigSchedule, half_degree: usize) -> usize {
    ns.iter()
        .flat_map(|&n| schedule.sizes(n, n + 4 * half_degree))
        .max()
        .map_or(0, |m| m + 2 * half_degree)
}

/// `N,M_big,kn0,kn1,kn2,kn3,converged`, one row per `(N, M_big)`; the flag
/// marks agreement with the previous ambient size.
pub fn write_kn_csv<W: Write>(reports: &[KnReport], mut out: W) -> io::Result<()> {
    writeln!(out, "N,M_big,kn0,kn1,kn2,kn3,converged")?;
    for r in reports {
        let mut prev: Option<&[f64; 4]> = None;
        for (m, kn) in &r.history {
            let ok = prev.is_some_and(|p| relative_change(p, kn) <= GALERKIN_TOL);
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.n, m, kn[0], kn[1], kn[2], kn[3], ok
            )?;
            prev = Some(kn);
        }
    }
    Ok(())
}
