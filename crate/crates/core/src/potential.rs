//! Even polynomial confinement potentials `phi(x) = sum_i g_i x^(2i)` and
//! their normalization to `int e^-phi = int phi'' e^-phi = 1`.

use crate::error::{Error, Result};
use crate::quadrature::weddle_adaptive;

/// Level at which the weight tail `e^-phi` is treated as zero.
pub const TAIL_LEVEL: f64 = 80.0;

/// Evaluation of an even polynomial given by its even-power coefficients.
pub trait EvenPolynomial {
    /// Coefficients `[g_0, g_1, ..., g_m]` of `x^0, x^2, ..., x^(2m)`.
    fn coeffs(&self) -> &[f64];

    fn degree(&self) -> usize {
        2 * (self.coeffs().len() - 1)
    }

    fn half_degree(&self) -> usize {
        self.coeffs().len() - 1
    }

    fn eval(&self, x: f64) -> f64 {
        let y = x * x;
        self.coeffs().iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    /// `phi'(x) = x * sum_{i>=1} 2i g_i x^(2i-2)`
    fn eval_d1(&self, x: f64) -> f64 {
        let y = x * x;
        let c = self.coeffs();
        let s = (1..c.len()).rev().fold(0.0, |acc, i| acc * y + 2.0 * i as f64 * c[i]);
        x * s
    }

    fn eval_d2(&self, x: f64) -> f64 {
        let y = x * x;
        let c = self.coeffs();
        (1..c.len()).rev().fold(0.0, |acc, i| {
            let i = i as f64;
            acc * y + 2.0 * i * (2.0 * i - 1.0) * c[i as usize]
        })
    }

    fn eval_d3(&self, x: f64) -> f64 {
        let y = x * x;
        let c = self.coeffs();
        let s = (2..c.len()).rev().fold(0.0, |acc, i| {
            let f = i as f64;
            acc * y + 2.0 * f * (2.0 * f - 1.0) * (2.0 * f - 2.0) * c[i]
        });
        x * s
    }
}

/// A potential as supplied by the user, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPotential {
    coeffs: Vec<f64>,
}

impl RawPotential {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidPotential(format!(
                "need at least [g0, g1] (degree >= 2), got {} coefficient(s)",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        let lead = *coeffs.last().unwrap();
        if lead <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient must be positive, got {lead}"
            )));
        }
        Ok(Self { coeffs })
    }

    /// `(x - 1)^2 (x + 1)^2 = x^4 - 2x^2 + 1`
    pub fn double_well() -> Self {
        Self {
            coeffs: vec![1.0, -2.0, 1.0],
        }
    }

    /// `(x^2 + ln 2pi) / 2`, already normalized.
    pub fn harmonic() -> Self {
        Self {
            coeffs: vec![0.5 * (2.0 * std::f64::consts::PI).ln(), 0.5],
        }
    }
}

impl EvenPolynomial for RawPotential {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// A potential with `<1> = <phi''> = 1` under `rho = e^-phi`.
///
/// `phi_normalized(x) = phi_raw(scale * x) + log_shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPotential {
    coeffs: Vec<f64>,
    pub scale: f64,
    pub log_shift: f64,
    pub harmonic: bool,
    /// `|<1> - 1|` and `|<phi''> - 1|` measured after normalization.
    pub residuals: [f64; 2],
}

impl EvenPolynomial for NormalizedPotential {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl NormalizedPotential {
    pub fn weight(&self, x: f64) -> f64 {
        (-self.eval(x)).exp()
    }

    /// Leading coefficient `g_m` of `x^(2m)`.
    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Half-width of the integration window: smallest `L` with
    /// `phi(x) >= TAIL_LEVEL` for all `|x| >= L`.
    pub fn truncation_radius(&self) -> f64 {
        tail_radius(self, 0.0, TAIL_LEVEL)
    }

    /// `c = e^log_shift`
    pub fn c(&self) -> f64 {
        self.log_shift.exp()
    }
}

/// Radius beyond which `phi` is monotone increasing (Cauchy bound on the
/// positive roots of `phi'(x)/x` as a polynomial in `x^2`).
fn monotone_radius<P: EvenPolynomial + ?Sized>(p: &P) -> f64 {
    let c = p.coeffs();
    let m = c.len() - 1;
    let lead = 2.0 * m as f64 * c[m];
    let bound = (1..m)
        .map(|i| (2.0 * i as f64 * c[i]).abs() / lead)
        .fold(0.0f64, f64::max);
    (1.0 + bound).sqrt()
}

/// Approximate minimum of an even polynomial over the real line.
fn approx_min<P: EvenPolynomial + ?Sized>(p: &P) -> f64 {
    let r = monotone_radius(p);
    let samples = 4096;
    (0..=samples)
        .map(|i| p.eval(r * i as f64 / samples as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `L` such that `phi(x) - floor >= level` for all `|x| >= L`.
fn tail_radius<P: EvenPolynomial + ?Sized>(p: &P, floor: f64, level: f64) -> f64 {
    let above = |x: f64| p.eval(x) - floor >= level;
    let r = monotone_radius(p);
    let (mut lo, mut hi);
    if above(r) {
        // last crossing lies inside [0, r]; scan downward
        let samples = 4096;
        let mut last_below = None;
        for i in (0..=samples).rev() {
            let x = r * i as f64 / samples as f64;
            if !above(x) {
                last_below = Some(x);
                break;
            }
        }
        match last_below {
            None => return 0.0,
            Some(x) => {
                lo = x;
                hi = (x + r / samples as f64).min(r);
            }
        }
    } else {
        lo = r;
        hi = 2.0 * r;
        while !above(hi) {
            lo = hi;
            hi *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Rescale and shift `raw` so that `int e^-phi = 1` and
/// `int phi'' e^-phi = 1`, with both integrals computed by adaptive
/// composite Weddle quadrature to relative tolerance `quad_tol`.
pub fn normalize_potential(raw: &RawPotential, quad_tol: f64) -> Result<NormalizedPotential> {
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quad_tol must be positive, got {quad_tol}"
        )));
    }
    // integrate e^-(phi - floor) to stay clear of under/overflow
    let floor = approx_min(raw);
    let l = tail_radius(raw, floor, TAIL_LEVEL);
    let [i0, i2] = weddle_adaptive(
        |x| {
            let w = (-(raw.eval(x) - floor)).exp();
            [w, raw.eval_d2(x) * w]
        },
        -l,
        l,
        quad_tol,
    )?;
    if !(i0 > 0.0 && i2 > 0.0) {
        return Err(Error::IntegrationFailure(format!(
            "non-positive normalization integrals ({i0:e}, {i2:e})"
        )));
    }
    let scale = (i0 / i2).sqrt();
    let log_shift = 0.5 * (i0 * i2).ln() - floor;

    let coeffs: Vec<f64> = raw
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = c * scale.powi(2 * i as i32);
            if i == 0 {
                s + log_shift
            } else {
                s
            }
        })
        .collect();

    let mut p = NormalizedPotential {
        harmonic: coeffs.len() == 2,
        coeffs,
        scale,
        log_shift,
        residuals: [0.0; 2],
    };
    let l = p.truncation_radius();
    let [m0, m2] = weddle_adaptive(
        |x| {
            let w = p.weight(x);
            [w, p.eval_d2(x) * w]
        },
        -l,
        l,
        quad_tol,
    )?;
    p.residuals = [(m0 - 1.0).abs(), (m2 - 1.0).abs()];
    Ok(p)
}
