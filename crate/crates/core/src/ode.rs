//! Adaptive Dormand–Prince 5(4) integration of backward flows
//! `dy/ds = f(y, s)`, `y(t) = y₀`, for fields that are constant in `s` on the
//! segments of a breakpoint grid.
//!
//! Integration restarts exactly at every breakpoint. All components of the
//! state vector share one step sequence, which makes the numerical flow map a
//! single analytic function of the initial data (the PGF coefficient
//! extraction relies on this).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Breakpoints;

/// A field that is autonomous on each segment of a breakpoint grid.
pub trait PiecewiseField: Sync {
    fn breakpoints(&self) -> &Breakpoints;

    /// Right-hand side `dy/ds` on segment `segment`.
    fn rhs(&self, segment: usize, y: Complex64) -> Result<Complex64>;

    /// Whether `y` lies in the open domain of the flow.
    fn admissible(&self, y: Complex64) -> bool;

    fn domain_name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings { rtol: 1e-10, atol: 1e-14, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

impl StepSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Parameter(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.max_step > 0.0) || self.max_steps == 0 {
            return Err(Error::Parameter("max_step and max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FlowStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Sum of the absolute local error estimates over accepted steps.
    pub error_estimate: f64,
}

/// Accepted steps of a scalar solve, ordered from `s = t` down to `s`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub s: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `dv/ds` at each recorded point (for Hermite dense output).
    pub slopes: Vec<Complex64>,
    pub steps: Vec<f64>,
    pub local_errors: Vec<f64>,
}

impl SolveTrace {
    fn push(&mut self, s: f64, v: Complex64, slope: Complex64, step: f64, err: f64) {
        self.s.push(s);
        self.values.push(v);
        self.slopes.push(slope);
        self.steps.push(step);
        self.local_errors.push(err);
    }

    /// Cubic Hermite interpolation between recorded points.
    pub fn interpolate(&self, s: f64) -> Option<Complex64> {
        let n = self.s.len();
        if n == 0 {
            return None;
        }
        // s-grid is decreasing
        let (first, last) = (self.s[0], self.s[n - 1]);
        if s > first || s < last {
            return None;
        }
        for k in 0..n.saturating_sub(1) {
            let (s0, s1) = (self.s[k], self.s[k + 1]);
            if s <= s0 && s >= s1 {
                let h = s1 - s0;
                if h == 0.0 {
                    return Some(self.values[k]);
                }
                let x = (s - s0) / h;
                let h00 = 2.0 * x * x * x - 3.0 * x * x + 1.0;
                let h10 = x * x * x - 2.0 * x * x + x;
                let h01 = -2.0 * x * x * x + 3.0 * x * x;
                let h11 = x * x * x - x * x;
                return Some(
                    self.values[k] * h00
                        + self.slopes[k] * (h * h10)
                        + self.values[k + 1] * h01
                        + self.slopes[k + 1] * (h * h11),
                );
            }
        }
        Some(self.values[n - 1])
    }

    /// CSV with columns `s,re_v,im_v,step,local_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,re_v,im_v,step,local_error\n");
        for k in 0..self.s.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.s[k], self.values[k].re, self.values[k].im, self.steps[k], self.local_errors[k]
            ));
        }
        out
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

enum StageFailure {
    Domain,
    Hard(Error),
}

/// Integrates `dy/ds = f(y, s)` backward from `y(t) = ys` to `s`, in place.
pub fn backward_flow<F: PiecewiseField + ?Sized>(
    field: &F,
    settings: &StepSettings,
    ys: &mut [Complex64],
    s: f64,
    t: f64,
    mut trace: Option<&mut SolveTrace>,
) -> Result<FlowStats> {
    settings.validate()?;
    if !(s >= 0.0 && t >= s && t.is_finite()) {
        return Err(Error::Domain(format!("need 0 <= s <= t < inf, got s = {s}, t = {t}")));
    }
    for &y in ys.iter() {
        if !field.admissible(y) {
            return Err(Error::Domain(format!("initial value {y} is outside {}", field.domain_name())));
        }
    }
    let mut stats = FlowStats::default();
    let pieces = field.breakpoints().pieces(s, t);
    if let Some(tr) = trace.as_deref_mut() {
        let slope = if ys.len() == 1 {
            field.rhs(pieces.last().map(|p| p.index).unwrap_or(0), ys[0])?
        } else {
            Complex64::new(0.0, 0.0)
        };
        tr.push(t, ys.first().copied().unwrap_or_default(), slope, 0.0, 0.0);
    }
    for piece in pieces.iter().rev() {
        integrate_segment(field, settings, ys, piece.index, piece.hi, piece.len(), &mut stats, trace.as_deref_mut())?;
    }
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn integrate_segment<F: PiecewiseField + ?Sized>(
    field: &F,
    settings: &StepSettings,
    ys: &mut [Complex64],
    segment: usize,
    s_hi: f64,
    length: f64,
    stats: &mut FlowStats,
    mut trace: Option<&mut SolveTrace>,
) -> Result<()> {
    let m = ys.len();
    // dy/dτ = -f(y) with τ = s_hi - s running forward
    let g = |y: Complex64, stats: &mut FlowStats| -> std::result::Result<Complex64, StageFailure> {
        stats.evaluations += 1;
        if !field.admissible(y) {
            return Err(StageFailure::Domain);
        }
        match field.rhs(segment, y) {
            Ok(v) if v.re.is_finite() && v.im.is_finite() => Ok(-v),
            Ok(_) => Err(StageFailure::Domain),
            Err(Error::Domain(_)) => Err(StageFailure::Domain),
            Err(e) => Err(StageFailure::Hard(e)),
        }
    };
    let eval_all =
        |ys: &[Complex64], out: &mut [Complex64], stats: &mut FlowStats| -> std::result::Result<(), StageFailure> {
            for (o, &y) in out.iter_mut().zip(ys) {
                *o = g(y, stats)?;
            }
            Ok(())
        };

    let mut k1 = vec![Complex64::default(); m];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut tmp = k1.clone();
    let mut y_new = k1.clone();

    match eval_all(ys, &mut k1, stats) {
        Ok(()) => {}
        Err(StageFailure::Hard(e)) => return Err(e),
        Err(StageFailure::Domain) => {
            return Err(Error::SolverEscape { at: s_hi, detail: format!("state left {}", field.domain_name()) })
        }
    }

    let mut tau = 0.0;
    let mut h = initial_step(ys, &k1, settings).min(length).min(settings.max_step);
    let min_step = 1e-15 * length.max(1.0);
    let mut last_reject_domain = false;
    let mut steps = 0usize;

    while tau < length {
        steps += 1;
        if steps > settings.max_steps {
            return Err(Error::Stiffness { at: s_hi - tau, step: h });
        }
        let last = tau + h >= length * (1.0 - 1e-15);
        if last {
            h = length - tau;
        }
        if h < min_step {
            let at = s_hi - tau;
            return Err(if last_reject_domain {
                Error::SolverEscape {
                    at,
                    detail: format!("step size collapsed while keeping the state in {}", field.domain_name()),
                }
            } else {
                Error::Stiffness { at, step: h }
            });
        }

        let attempt = (|| -> std::result::Result<f64, StageFailure> {
            for i in 0..m {
                tmp[i] = ys[i] + h * A21 * k1[i];
            }
            eval_all(&tmp, &mut k2, stats)?;
            for i in 0..m {
                tmp[i] = ys[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            eval_all(&tmp, &mut k3, stats)?;
            for i in 0..m {
                tmp[i] = ys[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            eval_all(&tmp, &mut k4, stats)?;
            for i in 0..m {
                tmp[i] = ys[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            eval_all(&tmp, &mut k5, stats)?;
            for i in 0..m {
                tmp[i] = ys[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            eval_all(&tmp, &mut k6, stats)?;
            for i in 0..m {
                y_new[i] = ys[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            eval_all(&y_new, &mut k7, stats)?;
            let mut err = 0.0f64;
            for i in 0..m {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = settings.atol + settings.rtol * ys[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }
            Ok(err)
        })();

        match attempt {
            Err(StageFailure::Hard(e)) => return Err(e),
            Err(StageFailure::Domain) => {
                stats.rejected += 1;
                last_reject_domain = true;
                h *= 0.25;
            }
            Ok(err) if err.is_finite() && err <= 1.0 => {
                tau = if last { length } else { tau + h };
                let abs_err = err_abs(&k1, &k3, &k4, &k5, &k6, &k7, h);
                stats.accepted += 1;
                stats.error_estimate += abs_err;
                ys.copy_from_slice(&y_new);
                std::mem::swap(&mut k1, &mut k7);
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(s_hi - tau, ys[0], -k1[0], h, abs_err);
                }
                last_reject_domain = false;
                let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                h = (h * fac).min(settings.max_step);
            }
            Ok(err) => {
                stats.rejected += 1;
                last_reject_domain = false;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h *= fac;
            }
        }
    }
    Ok(())
}

fn err_abs(
    k1: &[Complex64],
    k3: &[Complex64],
    k4: &[Complex64],
    k5: &[Complex64],
    k6: &[Complex64],
    k7: &[Complex64],
    h: f64,
) -> f64 {
    (0..k1.len())
        .map(|i| (h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])).norm())
        .fold(0.0, f64::max)
}

fn initial_step(ys: &[Complex64], f0: &[Complex64], settings: &StepSettings) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (y, f) in ys.iter().zip(f0) {
        let sc = settings.atol + settings.rtol * y.norm();
        d0 = d0.max(y.norm() / sc);
        d1 = d1.max(f.norm() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    // an order-5 local error of roughly rtol for linear growth
    h.max(1e-12)
}
