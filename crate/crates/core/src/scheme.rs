//! Semi-discrete generator on the `(K+1)(N+1)` Hermite x orthopoly
//! coefficients and its implicit Euler time stepping.
//!
//! Coefficients are stored k-major: `(k, n) -> k (N+1) + n`, so the
//! generator is block tridiagonal in `k`.

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{conserved_functionals, ConservedSet, InnerProducts};
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, CsrMatrix};
use crate::operators::{build_deriv_couplings, coupling_rule, DerivCouplings};
use crate::orthopoly::{build_recurrence, default_n_max, RecurrenceMethod, RecurrenceTable};
use crate::potential::{normalize_potential, EvenPolynomial, NormalizedPotential, RawPotential};

/// Relative residual accepted for each linear solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    k: usize,
    n: usize,
    coeffs: Vec<f64>,
    pub t: f64,
}

impl SpectralState {
    pub fn zeros(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            coeffs: vec![0.0; (k + 1) * (n + 1)],
            t: 0.0,
        }
    }

    pub fn from_vec(k: usize, n: usize, coeffs: Vec<f64>, t: f64) -> Result<Self> {
        if coeffs.len() != (k + 1) * (n + 1) {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for K = {k}, N = {n}",
                coeffs.len()
            )));
        }
        Ok(Self { k, n, coeffs, t })
    }

    /// Hermite truncation `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Spatial truncation `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, k: usize, n: usize) -> usize {
        k * (self.n + 1) + n
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        if k > self.k || n > self.n {
            return 0.0;
        }
        self.coeffs[self.index(k, n)]
    }

    pub fn set(&mut self, k: usize, n: usize, v: f64) -> Result<()> {
        if k > self.k {
            return Err(Error::IndexOutOfRange { index: k, max: self.k });
        }
        if n > self.n {
            return Err(Error::IndexOutOfRange { index: n, max: self.n });
        }
        let i = self.index(k, n);
        self.coeffs[i] = v;
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// Spatial coefficients of Hermite mode `k`.
    pub fn mode(&self, k: usize) -> &[f64] {
        let s = k * (self.n + 1);
        &self.coeffs[s..s + self.n + 1]
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `a * self + b * other` with this state's time stamp.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!((self.k, self.n), (other.k, other.n));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self { coeffs, ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    k: usize,
    n: usize,
    matrix: CsrMatrix,
}

impl Generator {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        (self.k + 1) * (self.n + 1)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, s: &SpectralState) -> Vec<f64> {
        self.matrix.matvec(s.as_slice())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// Assembles the generator for truncation `(k_max, n_max)`. Requires the
/// spatial truncation to hold the potential (`N >= deg phi`).
pub fn assemble_generator(dc: &DerivCouplings, k_max: usize, n_max: usize) -> Result<Generator> {
    if n_max < dc.degree {
        return Err(Error::TruncationTooSmall {
            n: n_max,
            degree: dc.degree,
        });
    }
    if dc.n() < n_max {
        return Err(Error::OperatorTooSmall {
            needed: n_max + 1,
            available: dc.n() + 1,
        });
    }
    let a = &dc.a;
    let stride = n_max + 1;
    let mut rows = Vec::with_capacity((k_max + 1) * stride);
    for k in 0..=k_max {
        for n in 0..=n_max {
            let mut row = Vec::new();
            if k < k_max {
                let s = ((k + 1) as f64).sqrt();
                for r in 0..n {
                    let v = a[(n, r)];
                    if v != 0.0 {
                        row.push(((k + 1) * stride + r, s * v));
                    }
                }
            }
            if k >= 1 {
                let s = (k as f64).sqrt();
                for r in n + 1..=n_max {
                    let v = a[(r, n)];
                    if v != 0.0 {
                        row.push(((k - 1) * stride + r, -s * v));
                    }
                }
            }
            if k >= 3 {
                row.push((k * stride + n, -1.0));
            }
            rows.push(row);
        }
    }
    Ok(Generator {
        k: k_max,
        n: n_max,
        matrix: CsrMatrix::from_rows((k_max + 1) * stride, rows),
    })
}

/// Implicit Euler with `I - dt M` factored once.
#[derive(Debug, Clone)]
pub struct SteppingPlan {
    dt: f64,
    generator: Generator,
    lu: BandedLu,
    steps_taken: usize,
}

impl SteppingPlan {
    pub fn new(generator: &Generator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let lu = BandedLu::factor_shifted(generator.matrix(), 1.0, -dt)?;
        Ok(Self {
            dt,
            generator: generator.clone(),
            lu,
            steps_taken: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mx = self.generator.matrix().matvec(x);
        b.iter()
            .zip(x)
            .zip(&mx)
            .map(|((bi, xi), mi)| bi - (xi - self.dt * mi))
            .collect()
    }

    /// Solves `(I - dt M) x = b` with one refinement pass if needed.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bnorm = l2(b);
        let mut x = b.to_vec();
        self.lu.solve_in_place(&mut x);
        let mut r = self.residual(&x, b);
        if l2(&r) > SOLVE_RESIDUAL_TOL * bnorm {
            self.lu.solve_in_place(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            r = self.residual(&x, b);
            let rn = l2(&r);
            if rn > SOLVE_RESIDUAL_TOL * bnorm {
                return Err(Error::SolveResidual {
                    residual: rn / bnorm,
                    tolerance: SOLVE_RESIDUAL_TOL,
                });
            }
        }
        Ok(x)
    }

    pub fn step(&mut self, state: &SpectralState) -> Result<SpectralState> {
        if (state.k(), state.n()) != (self.generator.k(), self.generator.n()) {
            return Err(Error::ShapeMismatch(format!(
                "state (K, N) = ({}, {}) but plan was built for ({}, {})",
                state.k(),
                state.n(),
                self.generator.k(),
                self.generator.n()
            )));
        }
        let x = self.solve(state.as_slice())?;
        self.steps_taken += 1;
        SpectralState::from_vec(state.k(), state.n(), x, state.t + self.dt)
    }

    /// Takes `steps` steps, handing each new state to `observe`.
    pub fn advance<F>(&mut self, state: &SpectralState, steps: usize, mut observe: F) -> Result<SpectralState>
    where
        F: FnMut(&SpectralState) -> Result<()>,
    {
        let mut s = state.clone();
        for _ in 0..steps {
            s = self.step(&s)?;
            observe(&s)?;
        }
        Ok(s)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// State with the listed `(k, n, value)` coefficients; later entries for
/// the same slot overwrite earlier ones.
pub fn project_initial_condition(k_max: usize, n_max: usize, entries: &[(usize, usize, f64)]) -> Result<SpectralState> {
    let mut s = SpectralState::zeros(k_max, n_max);
    for &(k, n, v) in entries {
        s.set(k, n, v)?;
    }
    Ok(s)
}

/// Built-in initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    /// `C_1 = P_2`, `C_2 = P_1`.
    Mixed,
    /// `C_2 = P_1`.
    EnergyOdd,
    /// `C_0 = P_1 + P_2`, `C_2 = -sqrt2 <phi, P_2> + P_1`.
    TwoWell,
}

impl InitialPreset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mixed => "mixed",
            Self::EnergyOdd => "energy_odd",
            Self::TwoWell => "two_well",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Mixed, Self::EnergyOdd, Self::TwoWell]
            .into_iter()
            .find(|p| p.name() == s)
    }

    pub fn coefficients(self, ip: &InnerProducts) -> Vec<(usize, usize, f64)> {
        match self {
            Self::Mixed => vec![(1, 2, 1.0), (2, 1, 1.0)],
            Self::EnergyOdd => vec![(2, 1, 1.0)],
            Self::TwoWell => {
                let phi2 = ip.phi.get(2).copied().unwrap_or(0.0);
                vec![
                    (0, 1, 1.0),
                    (0, 2, 1.0),
                    (2, 0, -std::f64::consts::SQRT_2 * phi2),
                    (2, 1, 1.0),
                ]
            }
        }
    }
}

/// Steady modes whose functionals span the conserved set.
fn steady_modes(k_max: usize, n_max: usize, ip: &InnerProducts) -> Vec<SpectralState> {
    let frac = std::f64::consts::FRAC_1_SQRT_2;
    let mk = |entries: Vec<(usize, usize, f64)>| {
        let mut s = SpectralState::zeros(k_max, n_max);
        for (k, n, v) in entries {
            // slots outside the truncation are dropped; the pseudo-solve
            // copes with the resulting rank loss
            let _ = s.set(k, n, v);
        }
        s
    };
    let maxwellian = mk(vec![(0, 0, 1.0)]);
    let mut energy = vec![(2, 0, frac)];
    for (n, v) in ip.phi.iter().enumerate().skip(1).take(n_max) {
        energy.push((0, n, *v));
    }
    let mut modes = vec![maxwellian, mk(energy)];
    if ip.harmonic {
        modes.push(mk(vec![(0, 1, 1.0)]));
        modes.push(mk(vec![(1, 0, 1.0)]));
        modes.push(mk(vec![(1, 1, 1.0)]));
        modes.push(mk(vec![(0, 2, frac), (2, 0, -frac)]));
    }
    modes
}

/// Removes the components along the steady modes so that every conserved
/// functional of the result vanishes.
pub fn purge_equilibrium_components(state: &SpectralState, ip: &InnerProducts) -> Result<SpectralState> {
    let modes = steady_modes(state.k(), state.n(), ip);
    let values = |s: &SpectralState| -> Result<Vec<f64>> {
        conserved_functionals(s, ip, ip.harmonic).map(|c: ConservedSet| c.to_vec())
    };
    let target = values(state)?;
    if target.iter().all(|v| *v == 0.0) {
        return Ok(state.clone());
    }
    let cols: Vec<Vec<f64>> = modes.iter().map(values).collect::<Result<_>>()?;
    let f = DMatrix::from_fn(target.len(), modes.len(), |i, j| cols[j][i]);
    let alpha = f
        .svd(true, true)
        .solve(&DVector::from_vec(target), 1e-14)
        .map_err(|e| Error::EigenFailure(e.to_string()))?;
    let mut out = state.clone();
    for (m, a) in modes.iter().zip(alpha.iter()) {
        out = out.combine(1.0, m, -a);
    }
    Ok(out)
}

/// Settings for [`Discretization::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationOptions {
    pub quad_tol: f64,
    pub method: RecurrenceMethod,
    /// Recurrence length; defaults to [`default_n_max`].
    pub n_max: Option<usize>,
}

impl Default for DiscretizationOptions {
    fn default() -> Self {
        Self {
            quad_tol: 1e-13,
            method: RecurrenceMethod::Stieltjes,
            n_max: None,
        }
    }
}

/// Everything needed to run the scheme for one potential and `(K, N)`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub potential: NormalizedPotential,
    pub table: RecurrenceTable,
    pub couplings: DerivCouplings,
    pub inner: InnerProducts,
    pub generator: Generator,
}

impl Discretization {
    pub fn new(raw: &RawPotential, k_max: usize, n_max: usize, opts: DiscretizationOptions) -> Result<Self> {
        if n_max < raw.degree() {
            return Err(Error::TruncationTooSmall {
                n: n_max,
                degree: raw.degree(),
            });
        }
        let potential = normalize_potential(raw, opts.quad_tol)?;
        let len = opts
            .n_max
            .unwrap_or_else(|| default_n_max(n_max))
            .max(n_max + potential.degree() + 2);
        let table = build_recurrence(&potential, len, opts.method, opts.quad_tol)?;
        let rule = coupling_rule(&table, n_max)?;
        let couplings = build_deriv_couplings(&table, &rule, n_max, potential.degree())?;
        let inner = InnerProducts::compute(&table, n_max)?;
        let generator = assemble_generator(&couplings, k_max, n_max)?;
        Ok(Self {
            potential,
            table,
            couplings,
            inner,
            generator,
        })
    }

    pub fn initial_state(&self, preset: InitialPreset) -> Result<SpectralState> {
        project_initial_condition(
            self.generator.k(),
            self.generator.n(),
            &preset.coefficients(&self.inner),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(k: usize, n: usize) -> Discretization {
        Discretization::new(&RawPotential::harmonic(), k, n, Default::default()).unwrap()
    }

    fn double_well(k: usize, n: usize) -> Discretization {
        Discretization::new(&RawPotential::double_well(), k, n, Default::default()).unwrap()
    }

    #[test]
    fn harmonic_k1_n1_hand_oracle() {
        // N = 1 is below the degree, so build the couplings directly
        let mut a = DMatrix::zeros(2, 2);
        a[(1, 0)] = 1.0;
        let dc = DerivCouplings { a, degree: 1 };
        let g = assemble_generator(&dc, 1, 1).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_eq!(g.to_dense(), expected);
    }

    #[test]
    fn harmonic_couplings_assemble_to_the_same_4x4() {
        let d = harmonic(1, 2);
        let g = &d.generator;
        // (0,1) <- (1,0) and (1,0) <- (0,1), both of magnitude a_1 = 1
        assert!((g.matrix().get(1, 3) - 1.0).abs() < 1e-12);
        assert!((g.matrix().get(3, 1) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_h_is_enforced() {
        let d = double_well(3, 4);
        assert!(matches!(
            assemble_generator(&d.couplings, 3, 3),
            Err(Error::TruncationTooSmall { n: 3, degree: 4 })
        ));
        assert!(Discretization::new(&RawPotential::double_well(), 3, 2, Default::default()).is_err());
    }

    #[test]
    fn transport_part_is_skew() {
        let d = double_well(6, 8);
        let m = d.generator.to_dense();
        let s = &m + m.transpose();
        let stride = 9;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let want = if i == j && i / stride >= 3 { -2.0 } else { 0.0 };
                assert_eq!(s[(i, j)], want, "({i}, {j})");
            }
        }
    }

    #[test]
    fn k2_generator_is_exactly_skew() {
        let d = double_well(2, 6);
        let m = d.generator.to_dense();
        assert_eq!(&m + m.transpose(), DMatrix::zeros(m.nrows(), m.ncols()));
    }

    #[test]
    fn k1_input_lands_in_k0_and_k2() {
        let d = double_well(4, 6);
        let mut s = SpectralState::zeros(4, 6);
        for n in 0..=6 {
            s.set(1, n, 1.0 + n as f64).unwrap();
        }
        let out = d.generator.apply(&s);
        for (i, v) in out.iter().enumerate() {
            let k = i / 7;
            if k != 0 && k != 2 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(out[..7].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn nnz_bound() {
        let d = double_well(5, 10);
        let nnz_a = d.couplings.a.iter().filter(|v| **v != 0.0).count();
        assert!(d.generator.matrix().nnz() <= 6 * (2 * nnz_a + 11));
    }

    #[test]
    fn zero_state_stays_zero() {
        let d = double_well(5, 5);
        let mut plan = SteppingPlan::new(&d.generator, 0.1).unwrap();
        let z = SpectralState::zeros(5, 5);
        let next = plan.step(&z).unwrap();
        assert!(next.as_slice().iter().all(|v| *v == 0.0));
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn step_solves_the_implicit_system_densely() {
        let d = double_well(5, 5);
        let dt = 0.05;
        let mut plan = SteppingPlan::new(&d.generator, dt).unwrap();
        let s = d.initial_state(InitialPreset::TwoWell).unwrap();
        let next = plan.step(&s).unwrap();
        let a = DMatrix::identity(36, 36) - d.generator.to_dense() * dt;
        let dense = a.lu().solve(&DVector::from_column_slice(s.as_slice())).unwrap();
        for (x, y) in next.as_slice().iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn one_step_close_to_matrix_exponential() {
        let d = harmonic(5, 5);
        let dt = 1e-3;
        let mut plan = SteppingPlan::new(&d.generator, dt).unwrap();
        let s = d.initial_state(InitialPreset::Mixed).unwrap();
        let next = plan.step(&s).unwrap();
        let e = (d.generator.to_dense() * dt).exp() * DVector::from_column_slice(s.as_slice());
        let diff = (DVector::from_column_slice(next.as_slice()) - &e).norm();
        assert!(diff / e.norm() < 1e-5, "{diff}");
    }

    #[test]
    fn skew_step_loses_exactly_dt_squared_norm() {
        // for skew M: |x0|^2 = |x1|^2 + dt^2 |M x1|^2
        let d = double_well(2, 8);
        let dt = 1e-3;
        let mut plan = SteppingPlan::new(&d.generator, dt).unwrap();
        let mut s = SpectralState::zeros(2, 8);
        for i in 0..27 {
            s.coeffs[i] = ((i * 7 % 11) as f64 - 5.0) / 5.0;
        }
        let next = plan.step(&s).unwrap();
        let mx = l2(&d.generator.apply(&next));
        let lhs = s.norm().powi(2);
        let rhs = next.norm().powi(2) + dt * dt * mx * mx;
        assert!((lhs - rhs).abs() < 1e-13 * lhs);
        assert!(next.norm() < s.norm());
    }

    #[test]
    fn implicit_euler_norm_within_dt_squared_of_rk4() {
        let d = double_well(2, 8);
        let dt = 1e-3;
        let m = d.generator.to_dense();
        let mut plan = SteppingPlan::new(&d.generator, dt).unwrap();
        let s = d.initial_state(InitialPreset::TwoWell).unwrap();
        let x0 = DVector::from_column_slice(s.as_slice());
        let k1 = &m * &x0;
        let k2 = &m * (&x0 + &k1 * (dt / 2.0));
        let k3 = &m * (&x0 + &k2 * (dt / 2.0));
        let k4 = &m * (&x0 + &k3 * dt);
        let rk4 = &x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let ie = plan.step(&s).unwrap().norm().powi(2);
        let gap = (ie - rk4.norm_squared()).abs() / x0.norm_squared();
        let bound = dt * dt * m.norm_squared();
        assert!(gap <= bound, "{gap} > {bound}");
        assert!(gap > 0.0);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let d = double_well(3, 4);
        let mut plan = SteppingPlan::new(&d.generator, 0.1).unwrap();
        assert!(plan.step(&SpectralState::zeros(3, 5)).is_err());
        assert!(SteppingPlan::new(&d.generator, 0.0).is_err());
    }

    #[test]
    fn presets_place_coefficients() {
        let d = double_well(4, 6);
        let s = d.initial_state(InitialPreset::Mixed).unwrap();
        assert_eq!(s.get(1, 2), 1.0);
        assert_eq!(s.get(2, 1), 1.0);
        assert!((s.norm() - 2f64.sqrt()).abs() < 1e-15);
        let s = d.initial_state(InitialPreset::TwoWell).unwrap();
        let want = -std::f64::consts::SQRT_2 * d.inner.phi[2];
        assert_eq!(s.get(2, 0), want);
        assert!(project_initial_condition(2, 4, &[(3, 0, 1.0)]).is_err());
        assert!(project_initial_condition(2, 4, &[]).unwrap().norm() == 0.0);
    }

    #[test]
    fn purge_zeroes_mass_and_energy() {
        let d = double_well(4, 6);
        let mut s = SpectralState::zeros(4, 6);
        s.set(0, 0, 1.0).unwrap();
        s.set(2, 0, 0.3).unwrap();
        s.set(0, 3, 0.7).unwrap();
        let p = purge_equilibrium_components(&s, &d.inner).unwrap();
        let c = conserved_functionals(&p, &d.inner, false).unwrap();
        assert!(c.mass.abs() < 1e-14);
        assert!(c.energy_plus.abs() < 1e-14);
        assert_eq!(p.get(0, 3), 0.7);
    }

    #[test]
    fn purge_harmonic_momentum() {
        let d = harmonic(4, 4);
        let mut s = SpectralState::zeros(4, 4);
        s.set(1, 0, 1.0).unwrap();
        let p = purge_equilibrium_components(&s, &d.inner).unwrap();
        let c = conserved_functionals(&p, &d.inner, true).unwrap();
        for v in c.to_vec() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn purge_leaves_compliant_state_alone() {
        let d = harmonic(4, 4);
        let s = d.initial_state(InitialPreset::Mixed).unwrap();
        assert_eq!(purge_equilibrium_components(&s, &d.inner).unwrap(), s);
    }
}
