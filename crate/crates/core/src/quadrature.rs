//! Quadrature against the weight `rho = exp(-phi)`.
//!
//! Two rules share one representation: a composite Weddle rule on a
//! truncated interval (weights already multiplied by `rho`), and a Gauss
//! rule obtained from the eigen-decomposition of the Jacobi matrix of the
//! recurrence coefficients.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Node cap for composite refinement.
pub const MAX_COMPOSITE_NODES: usize = 1 << 22;

/// Closed Newton-Cotes weights on six sub-intervals, in units of `3h/10`.
const WEDDLE: [f64; 7] = [1.0, 5.0, 1.0, 6.0, 1.0, 5.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    CompositeWeddle,
    GaussFromJacobi,
}

/// Neumaier-compensated running sum; order of accumulation is fixed by
/// the caller so results are reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

/// Nodes and (unweighted) composite Weddle weights on `[a, b]`.
pub fn weddle_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = panels.max(1);
    let intervals = 6 * panels;
    let h = (b - a) / intervals as f64;
    let scale = 0.3 * h;
    let mut nodes = Vec::with_capacity(intervals + 1);
    let mut weights = vec![0.0; intervals + 1];
    for i in 0..=intervals {
        // symmetric placement keeps even integrands exactly even
        let x = if 2 * i <= intervals {
            a + i as f64 * h
        } else {
            b - (intervals - i) as f64 * h
        };
        nodes.push(x);
    }
    for p in 0..panels {
        for (j, w) in WEDDLE.iter().enumerate() {
            weights[6 * p + j] += w * scale;
        }
    }
    (nodes, weights)
}

/// Composite Weddle integration of a vector-valued integrand on `[a, b]`,
/// doubling the panel count until successive values differ by less than
/// `tol` relative to the largest component.
pub fn weddle_adaptive<const K: usize, F>(f: F, a: f64, b: f64, tol: f64) -> Result<[f64; K]>
where
    F: Fn(f64) -> [f64; K],
{
    let mut panels = 16usize;
    let mut prev: Option<[f64; K]> = None;
    loop {
        if 6 * panels + 1 > MAX_COMPOSITE_NODES {
            return Err(Error::IntegrationFailure(format!(
                "composite Weddle rule on [{a}, {b}] not converged at {} nodes",
                MAX_COMPOSITE_NODES
            )));
        }
        let (nodes, weights) = weddle_nodes(a, b, panels);
        let mut acc = [CompensatedSum::new(); K];
        for (x, w) in nodes.iter().zip(&weights) {
            let v = f(*x);
            for k in 0..K {
                acc[k].add(w * v[k]);
            }
        }
        let cur: [f64; K] = std::array::from_fn(|k| acc[k].value());
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure(format!("non-finite integrand on [{a}, {b}]")));
        }
        if let Some(p) = prev {
            let scale = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = cur.iter().zip(&p).fold(0.0f64, |m, (c, q)| m.max((c - q).abs()));
            if diff <= tol * scale {
                return Ok(cur);
            }
        }
        prev = Some(cur);
        panels *= 2;
    }
}

/// A rule integrating `f` against `rho`: `sum_i w_i f(x_i) ~ int f rho dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
}

impl QuadratureRule {
    /// Composite Weddle rule on `[-half_width, half_width]` with the weight
    /// function folded into the weights.
    pub fn composite_weddle<W: Fn(f64) -> f64>(half_width: f64, panels: usize, weight: W) -> Result<Self> {
        if panels < 1 {
            return Err(Error::InvalidArgument("quadrature resolution must be >= 1".into()));
        }
        if 6 * panels + 1 > MAX_COMPOSITE_NODES {
            return Err(Error::InvalidArgument(format!(
                "{panels} panels exceed the node cap {MAX_COMPOSITE_NODES}"
            )));
        }
        let (nodes, mut weights) = weddle_nodes(-half_width, half_width, panels);
        for (w, x) in weights.iter_mut().zip(&nodes) {
            *w *= weight(*x);
        }
        Ok(Self {
            nodes,
            weights,
            kind: QuadratureKind::CompositeWeddle,
        })
    }

    /// Gauss rule of `size` nodes from the Jacobi matrix with zero diagonal
    /// and off-diagonal `a[1..size]`; total mass `a[0]^2`.
    pub fn gauss_from_jacobi(a: &[f64], size: usize) -> Result<Self> {
        if size < 1 {
            return Err(Error::InvalidArgument("quadrature resolution must be >= 1".into()));
        }
        if a.len() < size {
            return Err(Error::InsufficientRecurrence {
                needed: size,
                available: a.len().saturating_sub(1),
            });
        }
        let mut jac = DMatrix::<f64>::zeros(size, size);
        for i in 1..size {
            jac[(i - 1, i)] = a[i];
            jac[(i, i - 1)] = a[i];
        }
        let eig = SymmetricEigen::try_new(jac, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EigenFailure(format!("Jacobi matrix of size {size}")))?;
        let mass = a[0] * a[0];
        let mut pairs: Vec<(f64, f64)> = (0..size)
            .map(|j| {
                let v0 = eig.eigenvectors[(0, j)];
                (eig.eigenvalues[j], mass * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            kind: QuadratureKind::GaussFromJacobi,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)))
    }
}
