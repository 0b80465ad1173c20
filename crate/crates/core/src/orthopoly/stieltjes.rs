//! Discretized Stieltjes procedure in orthonormal form.
//!
//! The weight is replaced by a composite Weddle discretization on
//! `[-L, L]`; the orthonormal polynomials are carried as vectors of nodal
//! values and each coefficient is the discrete norm of the next
//! unnormalized iterate. The discretization is refined until two
//! successive resolutions agree, and the window is widened until every
//! computed polynomial is negligible at the window edges.

use crate::error::{Error, Result};
use crate::potential::NormalizedPotential;
use crate::quadrature::{weddle_nodes, CompensatedSum, MAX_COMPOSITE_NODES};

/// Edge value of `p_n^2 rho` (times the window width) regarded as zero.
const EDGE_TOL: f64 = 1e-30;

struct Discrete {
    a: Vec<f64>,
    edge: f64,
}

fn discrete_stieltjes(p: &NormalizedPotential, n_max: usize, half_width: f64, panels: usize) -> Discrete {
    let (nodes, mut w) = weddle_nodes(-half_width, half_width, panels);
    for (wi, x) in w.iter_mut().zip(&nodes) {
        *wi *= p.weight(*x);
    }
    let last = nodes.len() - 1;
    let edge_weight = p.weight(half_width) * 2.0 * half_width;

    let mut a = Vec::with_capacity(n_max + 1);
    let mut mass = CompensatedSum::new();
    for wi in &w {
        mass.add(*wi);
    }
    let a0 = mass.value().sqrt();
    a.push(a0);

    let mut prev = vec![0.0; nodes.len()];
    let mut cur = vec![1.0 / a0; nodes.len()];
    let mut edge = 0.0f64;
    for n in 0..n_max {
        // q = x p_n - a_n p_{n-1}; the even weight makes the diagonal vanish
        let an = if n == 0 { 0.0 } else { a[n] };
        let mut norm = CompensatedSum::new();
        for i in 0..nodes.len() {
            let q = nodes[i] * cur[i] - an * prev[i];
            prev[i] = q;
            norm.add(w[i] * q * q);
        }
        let next = norm.value().sqrt();
        a.push(next);
        for v in prev.iter_mut() {
            *v /= next;
        }
        std::mem::swap(&mut prev, &mut cur);
        let e = cur[0].abs().max(cur[last].abs());
        edge = edge.max(e * e * edge_weight);
    }
    Discrete { a, edge }
}

pub(crate) fn stieltjes(p: &NormalizedPotential, n_max: usize, tol: f64) -> Result<Vec<f64>> {
    let mut half_width = p.truncation_radius();
    for _widen in 0..80 {
        let mut panels = 32usize.max(n_max);
        let mut prev: Option<Vec<f64>> = None;
        let converged = loop {
            if 6 * panels + 1 > MAX_COMPOSITE_NODES {
                return Err(Error::IntegrationFailure(format!(
                    "Stieltjes discretization not converged at {MAX_COMPOSITE_NODES} nodes (n_max = {n_max})"
                )));
            }
            let d = discrete_stieltjes(p, n_max, half_width, panels);
            if d.edge > EDGE_TOL {
                // the edge values are resolved long before the
                // coefficients are, so widen without refining further
                break None;
            }
            if let Some(pa) = &prev {
                let diff =
                    d.a.iter()
                        .zip(pa)
                        .map(|(x, y)| ((x - y) / x).abs())
                        .fold(0.0f64, f64::max);
                if diff <= tol {
                    break Some(d);
                }
            }
            prev = Some(d.a);
            panels *= 2;
        };
        if let Some(d) = converged {
            return Ok(d.a);
        }
        half_width *= 1.1;
    }
    Err(Error::IntegrationFailure(format!(
        "no integration window found that contains the degree-{n_max} polynomials"
    )))
}
