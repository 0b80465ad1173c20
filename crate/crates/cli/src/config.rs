//! Run configuration, built-in presets and validation.

use std::fmt::Write as _;

use bgk_spectral::orthopoly::RecurrenceMethod;
use bgk_spectral::potential::{EvenPolynomial, RawPotential};
use bgk_spectral::scheme::InitialPreset;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MAX_STEPS: u64 = 10_000_000;

/// `(k, n, value)`
pub type Coefficient = (usize, usize, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Norms,
    Conserved,
    Snapshots,
    Recurrence,
    Kn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Preset(String),
    Coefficients(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Stieltjes,
    Chebyshev,
}

impl From<MethodName> for RecurrenceMethod {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Stieltjes => RecurrenceMethod::Stieltjes,
            MethodName::Chebyshev => RecurrenceMethod::ChebyshevExtended,
        }
    }
}

fn default_quad_tol() -> f64 {
    1e-13
}

fn default_one() -> usize {
    1
}

fn default_range() -> [f64; 2] {
    [-4.0, 4.0]
}

fn default_points() -> usize {
    201
}

fn default_method() -> MethodName {
    MethodName::Stieltjes
}

/// One experiment. Coefficients of the potential are in increasing powers
/// of `x^2` and are normalized before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Vec<f64>,
    pub k: usize,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub purge: bool,
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_range")]
    pub x_range: [f64; 2],
    #[serde(default = "default_points")]
    pub x_points: usize,
    #[serde(default = "default_range")]
    pub v_range: [f64; 2],
    #[serde(default = "default_points")]
    pub v_points: usize,
    /// Defaults to `[0.2 T, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_method")]
    pub recurrence_method: MethodName,
    /// Spatial truncations for the operator-norm table.
    #[serde(default)]
    pub kn_n: Vec<usize>,
    /// Record diagnostics every this many steps.
    #[serde(default = "default_one")]
    pub record_every: usize,
    /// `param=v1,v2,...`, same syntax as `--sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
}

pub const PRESETS: [&str; 5] = [
    "harmonic_fig1",
    "doublewell_fig3",
    "doublewell_fig4",
    "harmonic_kn",
    "doublewell_kn",
];

fn harmonic_coeffs() -> Vec<f64> {
    RawPotential::harmonic().coeffs().to_vec()
}

fn double_well_coeffs() -> Vec<f64> {
    RawPotential::double_well().coeffs().to_vec()
}

impl RunConfig {
    fn decay(potential: Vec<f64>, initial: InitialPreset) -> Self {
        Self {
            potential,
            k: 20,
            n: 5,
            dt: 1e-2,
            t_final: 10.0,
            initial: InitialCondition::Preset(initial.name().into()),
            purge: false,
            outputs: vec![Output::Norms, Output::Conserved, Output::Recurrence],
            snapshot_times: vec![],
            x_range: default_range(),
            x_points: default_points(),
            v_range: default_range(),
            v_points: default_points(),
            fit_window: None,
            quad_tol: default_quad_tol(),
            recurrence_method: default_method(),
            kn_n: vec![],
            record_every: 1,
            sweep: Some("n=5,30".into()),
        }
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let c = match name {
            "harmonic_fig1" => Self::decay(harmonic_coeffs(), InitialPreset::Mixed),
            "doublewell_fig3" => Self::decay(double_well_coeffs(), InitialPreset::EnergyOdd),
            "doublewell_fig4" => Self {
                n: 30,
                t_final: 20.0,
                outputs: vec![Output::Norms, Output::Conserved, Output::Snapshots],
                snapshot_times: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0],
                sweep: None,
                ..Self::decay(double_well_coeffs(), InitialPreset::TwoWell)
            },
            "harmonic_kn" => Self {
                outputs: vec![Output::Kn],
                kn_n: (1..=32).collect(),
                sweep: None,
                ..Self::decay(harmonic_coeffs(), InitialPreset::Mixed)
            },
            "doublewell_kn" => Self {
                outputs: vec![Output::Kn],
                kn_n: vec![4, 8, 16, 32],
                sweep: None,
                ..Self::decay(double_well_coeffs(), InitialPreset::EnergyOdd)
            },
            _ => {
                return Err(CliError::Config(format!(
                    "unknown preset `{name}`; available: {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    /// Whether time stepping is needed at all.
    pub fn evolves(&self) -> bool {
        self.wants(Output::Norms) || self.wants(Output::Conserved) || self.wants(Output::Snapshots)
    }

    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn fit_window(&self) -> [f64; 2] {
        self.fit_window.unwrap_or([0.2 * self.t_final, self.t_final])
    }

    pub fn raw_potential(&self) -> Result<RawPotential, CliError> {
        RawPotential::new(self.potential.clone()).map_err(|e| CliError::Config(format!("field `potential`: {e}")))
    }

    pub fn initial_coefficients(&self) -> Result<Option<Vec<Coefficient>>, CliError> {
        match &self.initial {
            InitialCondition::Preset(name) => InitialPreset::from_name(name).map(|_| None).ok_or_else(|| {
                CliError::Config(format!(
                    "field `initial`: unknown preset `{name}` (mixed, energy_odd, two_well)"
                ))
            }),
            InitialCondition::Coefficients(c) => Ok(Some(c.clone())),
        }
    }

    /// Step index of snapshot time `t`.
    pub fn snapshot_step(&self, t: f64) -> u64 {
        (t / self.dt).round() as u64
    }

    /// Checks every field; returns all problems at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = String::new();
        let mut bad = |msg: String| {
            let _ = writeln!(errs, "{msg}");
        };
        let deg = match self.raw_potential() {
            Ok(p) => Some(p.degree()),
            Err(e) => {
                bad(e.to_string());
                None
            }
        };
        if let Some(d) = deg {
            if self.n < d {
                bad(format!("field `n`: N = {} is below the potential degree {d}", self.n));
            }
            for &kn in &self.kn_n {
                if kn > 256 {
                    bad(format!("field `kn_n`: N = {kn} exceeds 256"));
                }
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            bad(format!("field `dt`: must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            bad(format!("field `t_final`: must be positive, got {}", self.t_final));
        }
        if self.dt > 0.0 && self.t_final > 0.0 {
            let ratio = self.t_final / self.dt;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                bad(format!("field `t_final`: T/dt = {ratio} is not an integer"));
            } else if ratio.round() as u64 > MAX_STEPS {
                bad(format!("field `t_final`: {} steps exceeds {MAX_STEPS}", ratio.round()));
            }
            for &t in &self.snapshot_times {
                let r = t / self.dt;
                if !(t >= 0.0) || t > self.t_final * (1.0 + 1e-12) || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                    bad(format!("field `snapshot_times`: {t} is not a step time in [0, T]"));
                }
            }
            if self.wants(Output::Norms) {
                let [a, b] = self.fit_window();
                let samples =
                    ((b.min(self.t_final) - a.max(0.0)) / (self.dt * self.record_every.max(1) as f64)).floor();
                if !(a < b) || !(samples >= 9.0) {
                    bad(format!("field `fit_window`: [{a}, {b}] holds fewer than 10 samples"));
                }
            }
        }
        if self.outputs.is_empty() {
            bad("field `outputs`: nothing requested".into());
        }
        if self.wants(Output::Snapshots) && self.snapshot_times.is_empty() {
            bad("field `snapshot_times`: snapshots requested but no times given".into());
        }
        if self.wants(Output::Kn) && self.kn_n.is_empty() {
            bad("field `kn_n`: kn table requested but no N given".into());
        }
        for (name, r, pts) in [("x", self.x_range, self.x_points), ("v", self.v_range, self.v_points)] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                bad(format!("field `{name}_range`: [{}, {}] is not an interval", r[0], r[1]));
            }
            if pts < 2 {
                bad(format!("field `{name}_points`: need at least 2"));
            }
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1e-3) {
            bad(format!("field `quad_tol`: {} not in (0, 1e-3)", self.quad_tol));
        }
        if self.record_every == 0 {
            bad("field `record_every`: must be >= 1".into());
        }
        match self.initial_coefficients() {
            Err(e) => bad(e.to_string()),
            Ok(Some(c)) => {
                for (k, n, v) in c {
                    if k > self.k || n > self.n || !v.is_finite() {
                        bad(format!(
                            "field `initial`: entry ({k}, {n}, {v}) outside K = {}, N = {}",
                            self.k, self.n
                        ));
                    }
                }
            }
            Ok(None) => {}
        }
        if let Some(s) = &self.sweep {
            if let Err(e) = Sweep::parse(s) {
                bad(format!("field `sweep`: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs.trim_end().to_string()))
        }
    }
}

/// One parameter varied over a list of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

const SWEEPABLE: [&str; 6] = ["k", "n", "dt", "t_final", "quad_tol", "purge"];

impl Sweep {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (param, list) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("sweep `{s}` is not of the form param=v1,v2")))?;
        let param = param.trim().to_string();
        if !SWEEPABLE.contains(&param.as_str()) {
            return Err(CliError::Config(format!(
                "sweep parameter `{param}` not one of {}",
                SWEEPABLE.join(", ")
            )));
        }
        let values: Vec<String> = list
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("sweep `{s}` has no values")));
        }
        Ok(Self { param, values })
    }

    /// Variant of `base` for each value, labelled `param=value`.
    pub fn expand(&self, base: &RunConfig) -> Result<Vec<(String, RunConfig)>, CliError> {
        self.values
            .iter()
            .map(|v| {
                let mut c = base.clone();
                c.sweep = None;
                let err = || CliError::Config(format!("sweep value `{v}` invalid for `{}`", self.param));
                match self.param.as_str() {
                    "k" => c.k = v.parse().map_err(|_| err())?,
                    "n" => c.n = v.parse().map_err(|_| err())?,
                    "dt" => c.dt = v.parse().map_err(|_| err())?,
                    "t_final" => c.t_final = v.parse().map_err(|_| err())?,
                    "quad_tol" => c.quad_tol = v.parse().map_err(|_| err())?,
                    "purge" => c.purge = v.parse().map_err(|_| err())?,
                    _ => return Err(err()),
                }
                Ok((format!("{}={v}", self.param), c))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c, "{name}");
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn hypothesis_h_is_a_config_error() {
        let mut c = RunConfig::preset("doublewell_fig3").unwrap();
        c.n = 3;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("field `n`"), "{e}");
    }

    #[test]
    fn all_problems_are_reported() {
        let mut c = RunConfig::preset("harmonic_fig1").unwrap();
        c.dt = -1.0;
        c.x_points = 1;
        c.initial = InitialCondition::Coefficients(vec![(99, 0, 1.0)]);
        let e = c.validate().unwrap_err().to_string();
        for f in ["`dt`", "`x_points`", "`initial`"] {
            assert!(e.contains(f), "{f} missing in {e}");
        }
    }

    #[test]
    fn step_count_must_be_integral_and_bounded() {
        let mut c = RunConfig::preset("harmonic_fig1").unwrap();
        c.t_final = 10.005;
        assert!(c.validate().is_err());
        c.t_final = 1e6;
        c.dt = 1e-2;
        assert!(c.validate().unwrap_err().to_string().contains("exceeds"));
    }

    #[test]
    fn explicit_coefficients_parse() {
        let text = r#"
            potential = [1, -2, 1]
            k = 4
            n = 6
            dt = 0.1
            t_final = 2.0
            initial = [[0, 1, 1.0], [2, 1, 0.5]]
            outputs = ["norms"]
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.initial_coefficients().unwrap().unwrap()[1], (2, 1, 0.5));
        assert_eq!(c.fit_window(), [0.4, 2.0]);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let mut text = RunConfig::preset("harmonic_fig1").unwrap().to_toml();
        text.push_str("bogus = 1\n");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("n=5, 30").unwrap();
        assert_eq!(s.values, vec!["5", "30"]);
        let base = RunConfig::preset("harmonic_fig1").unwrap();
        let v = s.expand(&base).unwrap();
        assert_eq!(v[1].0, "n=30");
        assert_eq!(v[1].1.n, 30);
        assert!(Sweep::parse("colour=red").is_err());
        assert!(Sweep::parse("n").is_err());
        assert!(Sweep::parse("n=five").unwrap().expand(&base).is_err());
    }
}
