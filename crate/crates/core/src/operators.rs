//! Matrices of `d/dx`, its adjoint `d/dx* = -d/dx + phi'`, multiplication by
//! `phi'` and `Omega = d/dx* d/dx + 1` in the orthonormal basis `P_n`.
//!
//! With `Phi[k][l] = <phi' P_l, P_k>`, the adjoint `d/dx*` is the strictly
//! lower triangle of `Phi` and `d/dx` the strictly upper one.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::orthopoly::RecurrenceTable;
use crate::potential::{EvenPolynomial, NormalizedPotential};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    Lower,
    Upper,
    General,
}

/// Square band matrix, row-major band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator {
    size: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
    pub symmetry: Symmetry,
}

impl BandedOperator {
    pub fn zeros(size: usize, lower: usize, upper: usize, symmetry: Symmetry) -> Self {
        Self {
            size,
            lower,
            upper,
            data: vec![0.0; size * (lower + upper + 1)],
            symmetry,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Largest `|i - j|` that may hold a non-zero.
    pub fn bandwidth(&self) -> usize {
        self.lower.max(self.upper)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.size || j >= self.size {
            return None;
        }
        if j + self.lower < i || i + self.upper < j {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (j + self.lower - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside the band of a {}x{} operator", self.size, self.size));
        self.data[s] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }

    /// Leading `size x size` block.
    pub fn truncate(&self, size: usize) -> Self {
        let size = size.min(self.size);
        let mut out = Self::zeros(size, self.lower, self.upper, self.symmetry);
        for i in 0..size {
            for j in i.saturating_sub(self.lower)..(i + self.upper + 1).min(size) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Strictly lower triangle.
    pub fn lower_part(&self) -> Self {
        let mut out = Self::zeros(self.size, self.lower, 0, Symmetry::Lower);
        for i in 0..self.size {
            for j in i.saturating_sub(self.lower)..i {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Strictly upper triangle.
    pub fn upper_part(&self) -> Self {
        let mut out = Self::zeros(self.size, 0, self.upper, Symmetry::Upper);
        for i in 0..self.size {
            for j in (i + 1)..(i + self.upper + 1).min(self.size) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper + 1).min(self.size);
                (lo..hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }
}

/// `A[r][n] = <d/dx P_r, P_n>` for `r, n <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivCouplings {
    pub a: DMatrix<f64>,
    /// Degree of the potential the couplings were built for.
    pub degree: usize,
}

impl DerivCouplings {
    pub fn n(&self) -> usize {
        self.a.nrows() - 1
    }
}

/// `Phi[k][l] = <phi' P_l, P_k>` for `k, l < size`, from the polynomial
/// `phi'` applied to the Jacobi matrix of the recurrence. The Jacobi
/// matrix is exact on the retained block because the table reaches
/// `size + 2m`.
pub fn build_phi_matrix(t: &RecurrenceTable, p: &NormalizedPotential, size: usize) -> Result<BandedOperator> {
    let m = p.half_degree();
    let deg_dphi = 2 * m - 1;
    if t.n_max() < size + 2 * m {
        return Err(Error::InsufficientRecurrence {
            needed: size + 2 * m,
            available: t.n_max(),
        });
    }
    let reach = size + deg_dphi;
    let a = t.coefficients();
    let c = p.coeffs();
    let mut phi = BandedOperator::zeros(size, deg_dphi, deg_dphi, Symmetry::Symmetric);
    for l in 0..size {
        // v_j = J^j e_l, accumulate sum_i 2i c_i J^(2i-1) e_l
        let mut v = vec![0.0; reach + 1];
        v[l] = 1.0;
        let mut col = vec![0.0; reach + 1];
        for j in 1..=deg_dphi {
            let mut next = vec![0.0; reach + 1];
            let lo = l.saturating_sub(j);
            let hi = (l + j).min(reach);
            for k in lo..=hi {
                let mut s = 0.0;
                if k >= 1 {
                    s += a[k] * v[k - 1];
                }
                if k < reach {
                    s += a[k + 1] * v[k + 1];
                }
                next[k] = s;
            }
            v = next;
            if j % 2 == 1 {
                let i = j.div_ceil(2);
                let coef = 2.0 * i as f64 * c[i];
                for k in lo..=hi {
                    col[k] += coef * v[k];
                }
            }
        }
        // lower triangle only, mirrored
        for k in l..(l + deg_dphi + 1).min(size) {
            if (k - l) % 2 == 1 {
                phi.set(k, l, col[k]);
                phi.set(l, k, col[k]);
            }
        }
    }
    Ok(phi)
}

/// Gauss rule large enough to integrate `P_r' P_n` exactly for `r, n <= n`.
pub fn coupling_rule(t: &RecurrenceTable, n: usize) -> Result<QuadratureRule> {
    QuadratureRule::gauss_from_jacobi(t.coefficients(), n + 2)
}

/// `A[r][n] = <P_r', P_n>` by quadrature; entries that vanish structurally
/// (`n >= r`, even `r - n`, or `r - n` beyond the band of `phi'`) are
/// stored as exact zeros.
pub fn build_deriv_couplings(
    t: &RecurrenceTable,
    q: &QuadratureRule,
    n: usize,
    degree: usize,
) -> Result<DerivCouplings> {
    if t.n_max() < n {
        return Err(Error::InsufficientRecurrence {
            needed: n,
            available: t.n_max(),
        });
    }
    let band = degree.saturating_sub(1);
    let mut acc = vec![crate::quadrature::CompensatedSum::new(); (n + 1) * (n + 1)];
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        let (p, d) = t.eval_poly_and_deriv_all(n, *x)?;
        for r in 1..=n {
            let lo = r.saturating_sub(band);
            for k in (lo..r).filter(|k| (r - k) % 2 == 1) {
                acc[r * (n + 1) + k].add(w * d[r] * p[k]);
            }
        }
    }
    let a = DMatrix::from_fn(n + 1, n + 1, |r, k| acc[r * (n + 1) + k].value());
    Ok(DerivCouplings { a, degree })
}

/// `Omega = U^T U + I` on the leading `size` block, `U` the strict upper
/// triangle of `Phi`.
pub fn build_omega_matrix(phi: &BandedOperator, size: usize) -> Result<BandedOperator> {
    if phi.size() < size {
        return Err(Error::OperatorTooSmall {
            needed: size,
            available: phi.size(),
        });
    }
    let bw = phi.bandwidth();
    let half = bw.saturating_sub(1);
    let mut omega = BandedOperator::zeros(size, half, half, Symmetry::Symmetric);
    for i in 0..size {
        for j in i..(i + half + 1).min(size) {
            // sum_k U[k][i] U[k][j], k < i
            let lo = j.saturating_sub(bw);
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in lo..i {
                s += phi.get(k, i) * phi.get(k, j);
            }
            omega.set(i, j, s);
            omega.set(j, i, s);
        }
    }
    Ok(omega)
}
