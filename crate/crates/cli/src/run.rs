//! Executes a validated configuration and writes its CSV artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use bgk_spectral::conjecture::{kn_sweep, required_recurrence, write_kn_csv, KnReport, MBigSchedule};
use bgk_spectral::diagnostics::{half_line_moments, left_mass, snapshot, uniform_grid, DecayFit, DiagnosticsSeries};
use bgk_spectral::orthopoly::default_n_max;
use bgk_spectral::potential::EvenPolynomial;
use bgk_spectral::scheme::{
    project_initial_condition, purge_equilibrium_components, Discretization, DiscretizationOptions, InitialPreset,
    SpectralState, SteppingPlan,
};
use nalgebra::DMatrix;

use crate::config::{InitialCondition, Output, RunConfig, Sweep};
use crate::CliError;

/// Panels for the left-well moments.
const HALF_LINE_PANELS: usize = 2000;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub h: DMatrix<f64>,
    /// `int_{x<0} C_0 rho dx` at this time.
    pub left_mass: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub discretization: Discretization,
    pub initial: SpectralState,
    pub series: Option<DiagnosticsSeries>,
    /// Every step's norm, regardless of `record_every`.
    pub step_norms: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub snapshots: Vec<Snapshot>,
    pub kn: Option<Vec<KnReport>>,
}

fn numerical(context: &'static str) -> impl Fn(bgk_spectral::Error) -> CliError {
    move |source| CliError::Numerical { context, source }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let raw = cfg.raw_potential()?;
    let m = raw.half_degree();
    let schedule = MBigSchedule::default();
    let mut len = default_n_max(cfg.n);
    if cfg.wants(Output::Kn) {
        len = len.max(required_recurrence(&cfg.kn_n, &schedule, m));
    }
    let opts = DiscretizationOptions {
        quad_tol: cfg.quad_tol,
        method: cfg.recurrence_method.into(),
        n_max: Some(len),
    };
    let d = Discretization::new(&raw, cfg.k, cfg.n, opts).map_err(numerical("discretization"))?;

    let mut initial = match &cfg.initial {
        InitialCondition::Preset(name) => {
            let p = InitialPreset::from_name(name).expect("validated");
            d.initial_state(p)
        }
        InitialCondition::Coefficients(c) => project_initial_condition(cfg.k, cfg.n, c),
    }
    .map_err(numerical("initial condition"))?;
    if cfg.purge {
        initial = purge_equilibrium_components(&initial, &d.inner).map_err(numerical("purge"))?;
    }

    let mut series = None;
    let mut step_norms = Vec::new();
    let mut snapshots = Vec::new();
    let mut fit = None;
    if cfg.evolves() {
        let mut s = DiagnosticsSeries::default();
        let x = uniform_grid(cfg.x_range[0], cfg.x_range[1], cfg.x_points);
        let v = uniform_grid(cfg.v_range[0], cfg.v_range[1], cfg.v_points);
        let moments = if cfg.wants(Output::Snapshots) {
            half_line_moments(&d.table, cfg.n, HALF_LINE_PANELS).map_err(numerical("left-well moments"))?
        } else {
            vec![]
        };
        let mut snap_steps: Vec<(u64, f64)> = cfg.snapshot_times.iter().map(|t| (cfg.snapshot_step(*t), *t)).collect();
        snap_steps.sort_by_key(|s| s.0);

        let mut take = |step: u64, st: &SpectralState, s: &mut DiagnosticsSeries| -> Result<(), CliError> {
            let mut stamped = st.clone();
            stamped.t = step as f64 * cfg.dt;
            if step.is_multiple_of(cfg.record_every as u64) || step == cfg.steps() {
                s.record(&stamped, &d.inner).map_err(numerical("diagnostics"))?;
            }
            if cfg.wants(Output::Snapshots) {
                for &(_, t) in snap_steps.iter().filter(|(k, _)| *k == step) {
                    let h = snapshot(&stamped, &x, &v, &d.table).map_err(numerical("snapshot"))?;
                    snapshots.push(Snapshot {
                        t,
                        x: x.clone(),
                        v: v.clone(),
                        h,
                        left_mass: left_mass(&stamped, &moments),
                    });
                }
            }
            Ok(())
        };

        take(0, &initial, &mut s)?;
        step_norms.push(initial.norm());
        let mut plan = SteppingPlan::new(&d.generator, cfg.dt).map_err(numerical("factorization"))?;
        let mut state = initial.clone();
        for step in 1..=cfg.steps() {
            state = plan.step(&state).map_err(numerical("time step"))?;
            step_norms.push(state.norm());
            take(step, &state, &mut s)?;
        }
        if cfg.wants(Output::Norms) {
            let [a, b] = cfg.fit_window();
            fit = Some(s.fit(a, b).map_err(numerical("decay fit"))?);
        }
        series = Some(s);
    }

    let kn = if cfg.wants(Output::Kn) {
        Some(kn_sweep(&d.table, &cfg.kn_n, &schedule).map_err(numerical("operator norms"))?)
    } else {
        None
    };

    Ok(RunOutput {
        config: cfg.clone(),
        discretization: d,
        initial,
        series,
        step_norms,
        fit,
        snapshots,
        kn,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let cfg = &out.config;
    if let Some(s) = &out.series {
        if cfg.wants(Output::Norms) {
            let mut w = create(dir, "norms.csv")?;
            writeln!(w, "t,norm")?;
            for (t, n) in s.times.iter().zip(&s.norms) {
                writeln!(w, "{t:.16e},{n:.16e}")?;
            }
            w.flush()?;
        }
        if cfg.wants(Output::Conserved) {
            let mut w = create(dir, "conserved.csv")?;
            writeln!(w, "t,mass,energy_plus,rx,m0,mx,energy_minus")?;
            for (t, c) in s.times.iter().zip(&s.conserved) {
                let h = c.harmonic;
                writeln!(
                    w,
                    "{t:.16e},{:.16e},{:.16e},{},{},{},{}",
                    c.mass,
                    c.energy_plus,
                    cell(h.map(|h| h.rx)),
                    cell(h.map(|h| h.m0)),
                    cell(h.map(|h| h.mx)),
                    cell(h.map(|h| h.energy_minus)),
                )?;
            }
            w.flush()?;
        }
    }
    for snap in &out.snapshots {
        let mut w = create(dir, &format!("snapshot_{}.csv", snap.t))?;
        writeln!(w, "x,v,h")?;
        for (i, x) in snap.x.iter().enumerate() {
            for (j, v) in snap.v.iter().enumerate() {
                writeln!(w, "{x:.16e},{v:.16e},{:.16e}", snap.h[(i, j)])?;
            }
        }
        w.flush()?;
    }
    if cfg.wants(Output::Recurrence) {
        let mut w = create(dir, "recurrence.csv")?;
        out.discretization.table.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(kn) = &out.kn {
        let mut w = create(dir, "kn_table.csv")?;
        write_kn_csv(kn, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// One-line description of a finished run.
pub fn summary(out: &RunOutput) -> String {
    let cfg = &out.config;
    let mut parts = vec![format!("K={} N={}", cfg.k, cfg.n)];
    if let Some(s) = &out.series {
        parts.push(format!("steps={}", cfg.steps()));
        if let Some(f) = out.fit {
            let [a, b] = cfg.fit_window();
            parts.push(format!("kappa={:.6e} window=[{a}, {b}]", f.rate));
            parts.push(match f.r_squared {
                Some(r) => format!("r2={r:.6}"),
                None => "r2=n/a".into(),
            });
        }
        let init = out.initial.norm().max(f64::MIN_POSITIVE);
        parts.push(format!("max_drift={:.3e}", s.max_conserved_drift() / init));
        parts.push(format!("final_norm={:.6e}", s.norms.last().copied().unwrap_or(0.0)));
    }
    if let Some(kn) = &out.kn {
        let ok = kn.iter().filter(|r| r.converged).count();
        parts.push(format!("kn_rows={} converged={ok}/{}", kn.len(), kn.len()));
    }
    parts.join(" ")
}

/// Runs `cfg`, or each variant of its sweep concurrently in
/// `out_dir/param=value`. Every variant is validated before any runs.
pub fn run(cfg: &RunConfig, sweep: Option<&Sweep>, out_dir: &Path) -> Result<Vec<(String, RunOutput)>, CliError> {
    let owned;
    let sweep = match (sweep, &cfg.sweep) {
        (Some(s), _) => Some(s),
        (None, Some(text)) => {
            owned = Sweep::parse(text)?;
            Some(&owned)
        }
        (None, None) => None,
    };
    let variants = match sweep {
        Some(s) => s.expand(cfg)?,
        None => vec![(String::new(), cfg.clone())],
    };
    for (label, c) in &variants {
        c.validate().map_err(|e| match e {
            CliError::Config(m) if !label.is_empty() => CliError::Config(format!("[{label}] {m}")),
            other => other,
        })?;
    }
    let results: Vec<Result<RunOutput, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = variants.iter().map(|(_, c)| s.spawn(move || execute(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run worker panicked"))
            .collect()
    });
    let mut done = Vec::with_capacity(results.len());
    for ((label, _), r) in variants.into_iter().zip(results) {
        done.push((label, r?));
    }
    for (label, out) in &done {
        write_artifacts(out, &out_dir.join(label))?;
    }
    Ok(done)
}
