//! Norms, conserved functionals, decay fits and phase-space snapshots.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::orthopoly::{inner_products, RecurrenceTable};
use crate::potential::EvenPolynomial;
use crate::quadrature::{CompensatedSum, QuadratureRule};
use crate::scheme::SpectralState;

/// `<phi, P_n>` and `<x, P_n>` for `n <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProducts {
    pub phi: Vec<f64>,
    pub x: Vec<f64>,
    pub harmonic: bool,
}

impl InnerProducts {
    /// Exact up to rounding: a Gauss rule with enough nodes for `phi P_N`.
    pub fn compute(t: &RecurrenceTable, n: usize) -> Result<Self> {
        let p = &t.potential;
        let nodes = (n + p.degree()) / 2 + 2;
        let q = QuadratureRule::gauss_from_jacobi(t.coefficients(), nodes)?;
        let mut phi = inner_products(t, &q, |x| p.eval(x), n)?;
        let mut x = inner_products(t, &q, |x| x, n)?;
        // entries that vanish by parity or degree are set exactly
        for (k, v) in phi.iter_mut().enumerate() {
            if k % 2 == 1 || k > p.degree() {
                *v = 0.0;
            }
        }
        for (k, v) in x.iter_mut().enumerate() {
            if k != 1 {
                *v = 0.0;
            }
        }
        Ok(Self {
            phi,
            x,
            harmonic: p.harmonic,
        })
    }
}

/// Functionals that are constant along the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedSet {
    pub mass: f64,
    pub energy_plus: f64,
    pub harmonic: Option<HarmonicExtras>,
}

/// Additional invariants of the quadratic potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicExtras {
    pub rx: f64,
    pub m0: f64,
    pub mx: f64,
    pub energy_minus: f64,
}

impl ConservedSet {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mass, self.energy_plus];
        if let Some(h) = self.harmonic {
            v.extend([h.rx, h.m0, h.mx, h.energy_minus]);
        }
        v
    }

    /// Largest absolute value over the active functionals.
    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn dot(c: &[f64], w: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for (a, b) in c.iter().zip(w) {
        s.add(a * b);
    }
    s.value()
}

pub fn conserved_functionals(state: &SpectralState, ip: &InnerProducts, harmonic: bool) -> Result<ConservedSet> {
    if harmonic && !ip.harmonic {
        return Err(Error::InvalidArgument(
            "harmonic invariants requested for a non-quadratic potential".into(),
        ));
    }
    let frac = std::f64::consts::FRAC_1_SQRT_2;
    let e = state.get(2, 0) * frac;
    let c0 = state.mode(0);
    let phi_r = dot(c0, &ip.phi);
    let extras = harmonic.then(|| {
        let c1 = if state.k() >= 1 { state.mode(1) } else { &[][..] };
        HarmonicExtras {
            rx: dot(c0, &ip.x),
            m0: state.get(1, 0),
            mx: dot(c1, &ip.x),
            energy_minus: e - phi_r,
        }
    });
    Ok(ConservedSet {
        mass: state.get(0, 0),
        energy_plus: e + phi_r,
        harmonic: extras,
    })
}

pub fn l2_norm(state: &SpectralState) -> f64 {
    state.norm()
}

/// Norms of each Hermite mode `C_k`.
pub fn mode_norms(state: &SpectralState) -> Vec<f64> {
    (0..=state.k())
        .map(|k| state.mode(k).iter().map(|c| c * c).sum::<f64>().sqrt())
        .collect()
}

/// Time series collected along a run.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub mode_norms: Vec<Vec<f64>>,
    pub conserved: Vec<ConservedSet>,
}

impl DiagnosticsSeries {
    pub fn record(&mut self, state: &SpectralState, ip: &InnerProducts) -> Result<()> {
        self.times.push(state.t);
        self.norms.push(state.norm());
        self.mode_norms.push(mode_norms(state));
        self.conserved.push(conserved_functionals(state, ip, ip.harmonic)?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|functional|` over all samples.
    pub fn max_conserved_drift(&self) -> f64 {
        self.conserved.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    /// True if no recorded norm exceeds its predecessor by more than
    /// `rel` relative.
    pub fn norm_is_monotone(&self, rel: f64) -> bool {
        self.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel))
    }

    pub fn fit(&self, t_start: f64, t_end: f64) -> Result<DecayFit> {
        fit_decay_rate(&self.times, &self.norms, t_start, t_end)
    }
}

/// Least-squares line through `(t, ln norm)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// `None` when the window has no variance in `ln norm`.
    pub r_squared: Option<f64>,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_decay_rate(times: &[f64], norms: &[f64], t_start: f64, t_end: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= t_start && **t <= t_end)
        .map(|(t, n)| (*t, *n))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::DecayFit(format!(
            "{} samples in [{t_start}, {t_end}], need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, n)) = pts.iter().find(|(_, n)| !(*n > 0.0)) {
        return Err(Error::DecayFit(format!("norm {n} at t = {t} has no logarithm")));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, n) in &pts {
        let (dt, dy) = (t - mt, n.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::DecayFit("all samples at one time".into()));
    }
    let slope = sty / stt;
    let r_squared = (syy > 0.0).then(|| (sty * sty / (stt * syy)).min(1.0));
    Ok(DecayFit {
        rate: -slope,
        intercept: my - slope * mt,
        r_squared,
        samples: pts.len(),
    })
}

/// `H_k(v)` for `k <= k_max`, orthonormal for the standard Gaussian.
pub fn hermite_all(k_max: usize, v: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(k_max + 1);
    h.push(1.0);
    if k_max >= 1 {
        h.push(v);
    }
    for k in 1..k_max {
        let next = (v * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// `n` equispaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `h(x_i, v_j)` as a `x.len() x v.len()` matrix.
pub fn snapshot(state: &SpectralState, x: &[f64], v: &[f64], t: &RecurrenceTable) -> Result<DMatrix<f64>> {
    let (kk, nn) = (state.k(), state.n());
    let mut px = DMatrix::zeros(x.len(), nn + 1);
    for (i, xi) in x.iter().enumerate() {
        for (n, p) in t.eval_poly_all(nn, *xi)?.into_iter().enumerate() {
            px[(i, n)] = p;
        }
    }
    let mut hv = DMatrix::zeros(kk + 1, v.len());
    for (j, vj) in v.iter().enumerate() {
        for (k, h) in hermite_all(kk, *vj).into_iter().enumerate() {
            hv[(k, j)] = h;
        }
    }
    let ct = DMatrix::from_fn(nn + 1, kk + 1, |n, k| state.get(k, n));
    Ok(px * ct * hv)
}

/// `int_{x<0} P_n rho dx` for `n <= n_top`, composite Weddle on `[-L, 0]`.
pub fn half_line_moments(t: &RecurrenceTable, n_top: usize, panels: usize) -> Result<Vec<f64>> {
    let p = &t.potential;
    let (nodes, w) = crate::quadrature::weddle_nodes(-p.truncation_radius(), 0.0, panels);
    let mut acc = vec![CompensatedSum::new(); n_top + 1];
    for (x, wi) in nodes.iter().zip(&w) {
        let f = wi * p.weight(*x);
        for (s, pn) in acc.iter_mut().zip(t.eval_poly_all(n_top, *x)?) {
            s.add(f * pn);
        }
    }
    Ok(acc.iter().map(|s| s.value()).collect())
}

/// `int_{x<0} C_0(x) rho(x) dx`: the spatial density on the left well.
pub fn left_mass(state: &SpectralState, moments: &[f64]) -> f64 {
    dot(state.mode(0), moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::{build_recurrence, RecurrenceMethod};
    use crate::potential::{normalize_potential, RawPotential};
    use crate::scheme::{Discretization, InitialPreset};

    fn dw() -> Discretization {
        Discretization::new(&RawPotential::double_well(), 4, 8, Default::default()).unwrap()
    }

    #[test]
    fn inner_products_match_composite_quadrature() {
        let d = dw();
        let q = crate::orthopoly::build_quadrature(
            &d.potential,
            crate::quadrature::QuadratureKind::CompositeWeddle,
            4000,
            None,
        )
        .unwrap();
        let phi = inner_products(&d.table, &q, |x| d.potential.eval(x), 8).unwrap();
        for n in 0..=8 {
            assert!((phi[n] - d.inner.phi[n]).abs() < 1e-11, "{n}");
        }
        // parity
        assert!(d.inner.phi[1].abs() < 1e-14 && d.inner.x[2].abs() < 1e-14);
        // <x, P_1> = a_0 a_1 with a_0 = 1
        assert!((d.inner.x[1] - d.table.a(1)).abs() < 1e-13);
    }

    #[test]
    fn zero_state_has_zero_functionals() {
        let d = Discretization::new(&RawPotential::harmonic(), 3, 4, Default::default()).unwrap();
        let c = conserved_functionals(&SpectralState::zeros(3, 4), &d.inner, true).unwrap();
        assert_eq!(c.to_vec(), vec![0.0; 6]);
    }

    #[test]
    fn harmonic_extras_need_harmonic_potential() {
        let d = dw();
        assert!(conserved_functionals(&SpectralState::zeros(4, 8), &d.inner, true).is_err());
        let c = conserved_functionals(&SpectralState::zeros(4, 8), &d.inner, false).unwrap();
        assert!(c.harmonic.is_none());
    }

    #[test]
    fn mass_is_integral_of_density() {
        let d = dw();
        let mut s = SpectralState::zeros(4, 8);
        s.set(0, 0, 1.0).unwrap();
        s.set(0, 2, 0.4).unwrap();
        let c = conserved_functionals(&s, &d.inner, false).unwrap();
        let l = d.potential.truncation_radius();
        let q = QuadratureRule::composite_weddle(l, 3000, |x| d.potential.weight(x)).unwrap();
        let direct = q.integrate(|x| d.table.eval_poly(0, x).unwrap() + 0.4 * d.table.eval_poly(2, x).unwrap());
        assert!((c.mass - direct).abs() < 1e-12);
        assert_eq!(c.mass, 1.0);
    }

    #[test]
    fn harmonic_rx_uses_a1() {
        let d = Discretization::new(&RawPotential::harmonic(), 3, 4, Default::default()).unwrap();
        let mut s = SpectralState::zeros(3, 4);
        s.set(0, 1, 2.0).unwrap();
        s.set(1, 1, 3.0).unwrap();
        let h = conserved_functionals(&s, &d.inner, true).unwrap().harmonic.unwrap();
        assert!((h.rx - 2.0 * d.table.a(1)).abs() < 1e-13);
        assert!((h.mx - 3.0 * d.table.a(1)).abs() < 1e-13);
    }

    #[test]
    fn norm_examples() {
        let mut s = SpectralState::zeros(3, 4);
        assert_eq!(l2_norm(&s), 0.0);
        s.set(2, 3, 3.0).unwrap();
        assert_eq!(l2_norm(&s), 3.0);
    }

    #[test]
    fn norm_matches_phase_space_quadrature() {
        let d = dw();
        let mut s = SpectralState::zeros(4, 8);
        for (i, v) in [0.3, -0.2, 0.5, 0.1, -0.4].iter().enumerate() {
            s.set(i % 5, (3 * i) % 9, *v).unwrap();
        }
        let qx = QuadratureRule::gauss_from_jacobi(d.table.coefficients(), 20).unwrap();
        let sqrt_k: Vec<f64> = (0..30).map(|k| if k == 0 { 1.0 } else { (k as f64).sqrt() }).collect();
        let qv = QuadratureRule::gauss_from_jacobi(&sqrt_k, 12).unwrap();
        let grid = snapshot(&s, &qx.nodes, &qv.nodes, &d.table).unwrap();
        let mut acc = 0.0;
        for i in 0..qx.len() {
            for j in 0..qv.len() {
                acc += qx.weights[i] * qv.weights[j] * grid[(i, j)].powi(2);
            }
        }
        assert!((acc.sqrt() - s.norm()).abs() < 1e-8 * s.norm());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let t = uniform_grid(0.0, 5.0, 51);
        let n: Vec<f64> = t.iter().map(|t| 5.0 * (-2.0 * t).exp()).collect();
        let f = fit_decay_rate(&t, &n, 0.0, 5.0).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
        assert!((f.r_squared.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_constant_series_has_no_r_squared() {
        let t = uniform_grid(0.0, 1.0, 20);
        let f = fit_decay_rate(&t, &[2.0; 20], 0.0, 1.0).unwrap();
        assert_eq!(f.rate, 0.0);
        assert!(f.r_squared.is_none());
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let t = uniform_grid(0.0, 1.0, 20);
        assert!(fit_decay_rate(&t, &[1.0; 20], 2.0, 3.0).is_err());
        let mut n = vec![1.0; 20];
        n[10] = 0.0;
        assert!(fit_decay_rate(&t, &n, 0.0, 1.0).is_err());
    }

    #[test]
    fn snapshot_constant_state() {
        let d = dw();
        let mut s = SpectralState::zeros(4, 8);
        let x = uniform_grid(-4.0, 4.0, 7);
        let v = uniform_grid(-4.0, 4.0, 5);
        assert!(snapshot(&s, &x, &v, &d.table).unwrap().iter().all(|h| *h == 0.0));
        s.set(0, 0, 1.0).unwrap();
        for h in snapshot(&s, &x, &v, &d.table).unwrap().iter() {
            assert!((h - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn snapshot_matches_naive_double_sum() {
        let d = dw();
        let s = d.initial_state(InitialPreset::TwoWell).unwrap();
        let (x, v) = (0.37, -1.3);
        let grid = snapshot(&s, &[x], &[v], &d.table).unwrap();
        let h = hermite_all(4, v);
        let mut naive = 0.0;
        for k in 0..=4 {
            for n in 0..=8 {
                naive += s.get(k, n) * d.table.eval_poly(n, x).unwrap() * h[k];
            }
        }
        assert!((grid[(0, 0)] - naive).abs() < 1e-12);
    }

    #[test]
    fn hermite_low_orders() {
        let v = 0.7f64;
        let h = hermite_all(3, v);
        assert!((h[2] - (v * v - 1.0) / 2f64.sqrt()).abs() < 1e-15);
        assert!((h[3] - (v.powi(3) - 3.0 * v) / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_line_moments_converge() {
        let p = normalize_potential(&RawPotential::double_well(), 1e-13).unwrap();
        let t = build_recurrence(&p, 40, RecurrenceMethod::Stieltjes, 1e-13).unwrap();
        let a = half_line_moments(&t, 8, 500).unwrap();
        let b = half_line_moments(&t, 8, 1000).unwrap();
        for n in 0..=8 {
            assert!((a[n] - b[n]).abs() < 1e-13);
        }
        assert!((a[0] - 0.5).abs() < 1e-12);
        assert!(a[2].abs() < 1e-12 && a[1] < 0.0);
    }
}
