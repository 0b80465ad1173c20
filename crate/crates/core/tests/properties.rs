use std::sync::OnceLock;

use bgk_spectral::conjecture::{estimate_kn, InverseRoot, KnOperators};
use bgk_spectral::dd::DoubleDouble;
use bgk_spectral::diagnostics::{conserved_functionals, mode_norms};
use bgk_spectral::linalg::{BandedLu, CsrMatrix};
use bgk_spectral::orthopoly::{build_recurrence, RecurrenceMethod};
use bgk_spectral::potential::{normalize_potential, RawPotential};
use bgk_spectral::scheme::{purge_equilibrium_components, Discretization, SpectralState, SteppingPlan};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const K: usize = 8;
const N: usize = 12;

fn double_well() -> &'static Discretization {
    static D: OnceLock<Discretization> = OnceLock::new();
    D.get_or_init(|| Discretization::new(&RawPotential::double_well(), K, N, Default::default()).unwrap())
}

fn harmonic() -> &'static Discretization {
    static D: OnceLock<Discretization> = OnceLock::new();
    D.get_or_init(|| Discretization::new(&RawPotential::harmonic(), K, N, Default::default()).unwrap())
}

fn sextic() -> &'static Discretization {
    static D: OnceLock<Discretization> = OnceLock::new();
    D.get_or_init(|| {
        Discretization::new(
            &RawPotential::new(vec![0.0, 1.0, -0.5, 0.2]).unwrap(),
            K,
            N,
            Default::default(),
        )
        .unwrap()
    })
}

fn state_strategy() -> impl Strategy<Value = SpectralState> {
    prop::collection::vec(-1.0f64..1.0, (K + 1) * (N + 1)).prop_map(|c| SpectralState::from_vec(K, N, c, 0.0).unwrap())
}

fn pick(which: usize) -> &'static Discretization {
    match which % 3 {
        0 => double_well(),
        1 => harmonic(),
        _ => sextic(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_symmetric_part_is_the_damping(which in 0usize..3) {
        let m = pick(which).generator.matrix();
        let t = m.transpose();
        for (i, j, v) in m.triplets() {
            let want = if i == j && i / (N + 1) >= 3 { -2.0 } else { 0.0 };
            prop_assert_eq!(v + t.get(i, j), want);
        }
        for (i, j, v) in t.triplets() {
            let want = if i == j && i / (N + 1) >= 3 { -2.0 } else { 0.0 };
            prop_assert_eq!(v + m.get(i, j), want);
        }
    }

    #[test]
    fn dissipation_is_the_k_ge_3_energy(which in 0usize..3, u in state_strategy()) {
        let d = pick(which);
        let mu = d.generator.apply(&u);
        let q: f64 = u.as_slice().iter().zip(&mu).map(|(a, b)| a * b).sum();
        let want: f64 = -(3..=K).map(|k| u.mode(k).iter().map(|c| c * c).sum::<f64>()).sum::<f64>();
        prop_assert!((q - want).abs() <= 1e-12 * u.norm().powi(2).max(1.0));
    }

    #[test]
    fn implicit_euler_never_increases_the_norm(
        which in 0usize..3,
        u in state_strategy(),
        log_dt in -4.0f64..1.0,
    ) {
        let d = pick(which);
        let mut plan = SteppingPlan::new(&d.generator, 10f64.powf(log_dt)).unwrap();
        let next = plan.step(&u).unwrap();
        prop_assert!(next.norm() <= u.norm());
    }

    #[test]
    fn purged_data_keeps_invariants_through_a_step(
        which in 0usize..3,
        u in state_strategy(),
        log_dt in -3.0f64..0.0,
    ) {
        let d = pick(which);
        let p = purge_equilibrium_components(&u, &d.inner).unwrap();
        let c0 = conserved_functionals(&p, &d.inner, d.inner.harmonic).unwrap();
        prop_assert!(c0.max_abs() <= 1e-13 * u.norm().max(1.0));
        let mut plan = SteppingPlan::new(&d.generator, 10f64.powf(log_dt)).unwrap();
        let next = plan.advance(&p, 5, |_| Ok(())).unwrap();
        let c = conserved_functionals(&next, &d.inner, d.inner.harmonic).unwrap();
        prop_assert!(c.max_abs() <= 1e-11 * p.norm().max(1e-300), "{:?}", c);
    }

    #[test]
    fn functionals_are_linear(
        which in 0usize..3,
        u in state_strategy(),
        w in state_strategy(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let d = pick(which);
        let h = d.inner.harmonic;
        let f = |s: &SpectralState| conserved_functionals(s, &d.inner, h).unwrap().to_vec();
        let lhs = f(&u.combine(a, &w, b));
        let (fu, fw) = (f(&u), f(&w));
        for i in 0..lhs.len() {
            let rhs = a * fu[i] + b * fw[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn parseval_between_norm_and_mode_norms(u in state_strategy()) {
        let total: f64 = mode_norms(&u).iter().map(|m| m * m).sum();
        let n2 = u.norm().powi(2);
        prop_assert!((total - n2).abs() <= 1e-14 * n2);
    }

    #[test]
    fn harmonic_kn0_closed_form(n in 1usize..=32) {
        static T: OnceLock<bgk_spectral::orthopoly::RecurrenceTable> = OnceLock::new();
        let t = T.get_or_init(|| {
            let p = normalize_potential(&RawPotential::harmonic(), 1e-13).unwrap();
            build_recurrence(&p, 120, RecurrenceMethod::Stieltjes, 1e-13).unwrap()
        });
        let ops = KnOperators::build(t, n + 16).unwrap();
        let kn = estimate_kn(&ops, n, InverseRoot::Eigen).unwrap();
        let nf = n as f64;
        prop_assert!((kn[0] - (nf / (nf + 1.0)).sqrt()).abs() < 1e-10);
        prop_assert!((kn[3] - nf / (nf + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn banded_lu_solves_like_dense(
        vals in prop::collection::vec(-1.0f64..1.0, 20 * 7),
        b in prop::collection::vec(-1.0f64..1.0, 20),
        shift in 0.5f64..5.0,
    ) {
        let n: usize = 20;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| (0..7).filter_map(|o| {
                let j = (i + o).checked_sub(3)?;
                (j < n).then(|| (j, vals[i * 7 + o]))
            }).collect())
            .collect();
        let a = CsrMatrix::from_rows(n, rows);
        let lu = BandedLu::factor_shifted(&a, shift, 1.0).unwrap();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let dense = DMatrix::identity(n, n) * shift + a.to_dense();
        let r = dense * DVector::from_vec(x) - DVector::from_vec(b);
        prop_assert!(r.amax() < 1e-10);
    }

    #[test]
    fn double_double_sum_is_exact(a in -1e10f64..1e10, b in -1e-10f64..1e-10) {
        let s = DoubleDouble::from(a) + DoubleDouble::from(b);
        prop_assert_eq!(s.hi + s.lo, a + b);
        let back = s - DoubleDouble::from(a);
        prop_assert_eq!(back.hi, b);
    }
}
