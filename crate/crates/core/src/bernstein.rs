//! Bernstein functions as holomorphic self-maps of the right half-plane.
//!
//! The central abstraction is [`PositiveMap`]: anything that can be evaluated
//! on `Re ζ > 0` and is non-negative and non-decreasing on `(0, ∞)`. Triplets,
//! the closed-form Feller semigroup, compositions and solver-backed evolution
//! maps all implement it, so fixed-point classification works uniformly.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{DiscretizedMeasure, Kernel};
use crate::util::ser_f64;

/// `f'(0)` is reported as `+∞` above this value.
pub const DERIVATIVE_OVERFLOW_GUARD: f64 = 1e15;

/// Derivatives within this distance of 1 are treated as ties.
pub const DERIVATIVE_TIE_TOLERANCE: f64 = 1e-9;

/// Geometric ladder `10^0, …, 10^8` used for limits at infinity.
pub const LADDER_EXPONENTS: std::ops::RangeInclusive<i32> = 0..=8;

/// Successive relative change below which a ladder counts as converged.
pub const LADDER_CONVERGENCE: f64 = 1e-6;

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A holomorphic map of the right half-plane that is a Bernstein function
/// on the positive axis.
pub trait PositiveMap: Send + Sync {
    fn eval(&self, zeta: Complex64) -> Result<Complex64>;

    fn eval_real(&self, theta: f64) -> Result<f64> {
        Ok(self.eval(real(theta))?.re)
    }

    /// `f(0) = lim_{θ→0+} f(θ)`, by linear Richardson extrapolation from
    /// `θ = 1e-12`.
    fn value_at_zero(&self) -> Result<f64> {
        let h = 1e-12;
        let v1 = self.eval_real(h)?;
        let v2 = self.eval_real(2.0 * h)?;
        Ok((2.0 * v1 - v2).max(0.0))
    }

    /// `f'(0)`; `+∞` when the one-sided difference quotient overflows the guard.
    fn derivative_at_zero(&self) -> Result<f64> {
        let h = 1e-6;
        let f0 = self.value_at_zero()?;
        let d1 = (self.eval_real(h)? - f0) / h;
        let d2 = (self.eval_real(2.0 * h)? - f0) / (2.0 * h);
        let d = 2.0 * d1 - d2;
        Ok(if d > DERIVATIVE_OVERFLOW_GUARD { f64::INFINITY } else { d })
    }

    /// `f'(∞) = lim f(θ)/θ`, from a secant far out on the axis.
    fn derivative_at_infinity(&self) -> Result<f64> {
        let (a, b) = (1e7, 1e8);
        let d = (self.eval_real(b)? - self.eval_real(a)?) / (b - a);
        Ok(d.max(0.0))
    }

    /// `f'(θ)` by a five-point centred difference.
    fn derivative(&self, theta: f64) -> Result<f64> {
        let h = 1e-3 * theta.max(1e-6);
        let f = |x: f64| self.eval_real(x);
        Ok((f(theta - 2.0 * h)? - 8.0 * f(theta - h)? + 8.0 * f(theta + h)? - f(theta + 2.0 * h)?) / (12.0 * h))
    }

    fn value_at_infinity(&self) -> Result<LadderLimit> {
        let values = LADDER_EXPONENTS.map(|k| self.eval_real(10f64.powi(k))).collect::<Result<Vec<_>>>()?;
        ladder_limit(&values)
    }
}

impl<T: PositiveMap + ?Sized> PositiveMap for Arc<T> {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        (**self).eval(zeta)
    }
    fn value_at_zero(&self) -> Result<f64> {
        (**self).value_at_zero()
    }
    fn derivative_at_zero(&self) -> Result<f64> {
        (**self).derivative_at_zero()
    }
    fn derivative_at_infinity(&self) -> Result<f64> {
        (**self).derivative_at_infinity()
    }
    fn derivative(&self, theta: f64) -> Result<f64> {
        (**self).derivative(theta)
    }
    fn value_at_infinity(&self) -> Result<LadderLimit> {
        (**self).value_at_infinity()
    }
}

/// Outcome of a limit along the geometric θ ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LadderLimit {
    Finite { value: f64, converged: bool, last_relative_change: f64 },
    Diverged,
}

impl LadderLimit {
    pub fn value(&self) -> f64 {
        match *self {
            LadderLimit::Finite { value, .. } => value,
            LadderLimit::Diverged => f64::INFINITY,
        }
    }
}

/// Limit of a non-decreasing sequence sampled on a geometric ladder.
///
/// Values must be non-decreasing up to a relative slack of `1e-9`. A final
/// step that at least doubles the value is read as divergence. Otherwise the
/// tail is extrapolated under geometric decay of the increments when the last
/// two increments shrink by at least half.
pub fn ladder_limit(values: &[f64]) -> Result<LadderLimit> {
    if values.len() < 2 {
        return Err(Error::Extrapolation("ladder needs at least two values".into()));
    }
    for w in values.windows(2) {
        if w[1].is_infinite() {
            return Ok(LadderLimit::Diverged);
        }
        if !(w[1] >= w[0] - 1e-9 * w[0].abs().max(1e-300)) {
            return Err(Error::Extrapolation(format!("ladder is not monotone: {} followed by {}", w[0], w[1])));
        }
    }
    let n = values.len();
    let last = values[n - 1];
    let prev = values[n - 2];
    if prev > 0.0 && last >= 2.0 * prev {
        return Ok(LadderLimit::Diverged);
    }
    let d_last = last - prev;
    let rel = if last != 0.0 { d_last.abs() / last.abs() } else { 0.0 };
    let mut value = last;
    if n >= 3 {
        let d_prev = prev - values[n - 3];
        if d_last > 0.0 && d_prev > 0.0 {
            let rho = d_last / d_prev;
            if rho <= 0.5 {
                value = last + d_last * rho / (1.0 - rho);
            }
        }
    }
    Ok(LadderLimit::Finite { value, converged: rel < LADDER_CONVERGENCE, last_relative_change: rel })
}

/// `(α, β, τ)` with `f(ζ) = α + βζ + ∫(1 - e^{-ζx}) τ(dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinTriplet {
    kill: f64,
    drift: f64,
    jumps: DiscretizedMeasure,
}

impl BernsteinTriplet {
    pub fn new(kill: f64, drift: f64, jumps: DiscretizedMeasure) -> Result<Self> {
        if !(kill >= 0.0 && kill.is_finite()) {
            return Err(Error::Parameter(format!("killing term {kill} must be non-negative")));
        }
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(Error::Parameter(format!("drift {drift} must be non-negative")));
        }
        jumps.validate()?;
        jumps.functional(Kernel::MinOneX)?;
        Ok(BernsteinTriplet { kill, drift, jumps })
    }

    pub fn identity() -> Self {
        BernsteinTriplet { kill: 0.0, drift: 1.0, jumps: DiscretizedMeasure::empty() }
    }

    pub fn kill(&self) -> f64 {
        self.kill
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn jumps(&self) -> &DiscretizedMeasure {
        &self.jumps
    }

    pub fn is_zero(&self) -> bool {
        self.kill == 0.0 && self.drift == 0.0 && self.jumps.is_empty()
    }

    /// `(f(0), f'(0), f'(∞), f(∞))`.
    pub fn boundary_data(&self) -> BoundaryData {
        let first_moment = self.jumps.functional(Kernel::FirstMoment).unwrap_or(f64::INFINITY);
        let d0 = self.drift + first_moment;
        BoundaryData {
            at_zero: self.kill,
            derivative_at_zero: if d0 > DERIVATIVE_OVERFLOW_GUARD { f64::INFINITY } else { d0 },
            derivative_at_infinity: self.drift,
            at_infinity: if self.drift > 0.0 { f64::INFINITY } else { self.kill + self.jumps.total_mass() },
        }
    }
}

impl PositiveMap for BernsteinTriplet {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        if !(zeta.re > 0.0) {
            return Err(Error::Domain(format!("Bernstein functions are evaluated on Re ζ > 0, got {zeta}")));
        }
        Ok(self.kill + self.drift * zeta + self.jumps.integrate_kernel(Kernel::OneMinusExp, zeta)?)
    }

    fn value_at_zero(&self) -> Result<f64> {
        Ok(self.kill)
    }

    fn derivative_at_zero(&self) -> Result<f64> {
        Ok(self.boundary_data().derivative_at_zero)
    }

    fn derivative_at_infinity(&self) -> Result<f64> {
        Ok(self.drift)
    }

    fn derivative(&self, theta: f64) -> Result<f64> {
        Ok(self.drift + self.jumps.laplace_moment(1, theta))
    }

    fn value_at_infinity(&self) -> Result<LadderLimit> {
        let at_inf = self.boundary_data().at_infinity;
        Ok(if at_inf.is_finite() {
            LadderLimit::Finite { value: at_inf, converged: true, last_relative_change: 0.0 }
        } else {
            LadderLimit::Diverged
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryData {
    pub at_zero: f64,
    #[serde(serialize_with = "ser_f64")]
    pub derivative_at_zero: f64,
    pub derivative_at_infinity: f64,
    #[serde(serialize_with = "ser_f64")]
    pub at_infinity: f64,
}

/// Identity map of the half-plane.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl PositiveMap for IdentityMap {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        Ok(zeta)
    }
    fn value_at_zero(&self) -> Result<f64> {
        Ok(0.0)
    }
    fn derivative_at_zero(&self) -> Result<f64> {
        Ok(1.0)
    }
    fn derivative_at_infinity(&self) -> Result<f64> {
        Ok(1.0)
    }
    fn derivative(&self, _theta: f64) -> Result<f64> {
        Ok(1.0)
    }
}

/// Numeric composition `outer ∘ inner`.
#[derive(Clone)]
pub struct Composition {
    outer: Arc<dyn PositiveMap>,
    inner: Arc<dyn PositiveMap>,
}

pub fn compose(outer: Arc<dyn PositiveMap>, inner: Arc<dyn PositiveMap>) -> Composition {
    Composition { outer, inner }
}

impl PositiveMap for Composition {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        self.outer.eval(self.inner.eval(zeta)?)
    }

    fn value_at_zero(&self) -> Result<f64> {
        let g0 = self.inner.value_at_zero()?;
        if g0 == 0.0 {
            self.outer.value_at_zero()
        } else {
            self.outer.eval_real(g0)
        }
    }

    fn derivative_at_zero(&self) -> Result<f64> {
        let g0 = self.inner.value_at_zero()?;
        let outer = if g0 == 0.0 { self.outer.derivative_at_zero()? } else { self.outer.derivative(g0)? };
        Ok(outer * self.inner.derivative_at_zero()?)
    }

    fn derivative_at_infinity(&self) -> Result<f64> {
        let inner = self.inner.derivative_at_infinity()?;
        if inner == 0.0 {
            return Ok(0.0);
        }
        Ok(self.outer.derivative_at_infinity()? * inner)
    }

    fn derivative(&self, theta: f64) -> Result<f64> {
        let g = self.inner.eval_real(theta)?;
        Ok(self.outer.derivative(g)? * self.inner.derivative(theta)?)
    }
}

/// Closed-form semigroup generated by `φ(ζ) = aζ + bζ²`:
/// `v_t(ζ) = e^{-at} ζ / (1 + κ(t) ζ)` with `κ(t) = (b/a)(1 - e^{-at})`
/// (and `κ(t) = bt` when `a = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerSemigroup {
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

/// `κ(Δ) = (b/a)(1 - e^{-aΔ})`, continuous at `a = 0`.
pub fn feller_kappa(a: f64, b: f64, dt: f64) -> f64 {
    if a == 0.0 {
        b * dt
    } else {
        -b * (-a * dt).exp_m1() / a
    }
}

pub fn feller_semigroup(a: f64, b: f64, t: f64) -> Result<FellerSemigroup> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Parameter(format!("Feller coefficient b = {b} must be positive")));
    }
    if !(t >= 0.0 && t.is_finite()) || !a.is_finite() {
        return Err(Error::Parameter(format!("Feller time t = {t} must be non-negative")));
    }
    Ok(FellerSemigroup { a, b, t })
}

impl FellerSemigroup {
    pub fn kappa(&self) -> f64 {
        feller_kappa(self.a, self.b, self.t)
    }

    pub fn contraction(&self) -> f64 {
        (-self.a * self.t).exp()
    }

    /// Triplet `(0, 0, (e^{-at}/κ²) e^{-x/κ} dx)`, discretized on log panels
    /// out to `60 κ`; the identity triplet at `t = 0`.
    pub fn to_triplet(&self, panels: usize, order: usize) -> Result<BernsteinTriplet> {
        if self.t == 0.0 {
            return Ok(BernsteinTriplet::identity());
        }
        let kappa = self.kappa();
        let scale = self.contraction() / (kappa * kappa);
        let jumps = DiscretizedMeasure::from_density_log_panels(
            |x| scale * (-x / kappa).exp(),
            1e-3 * kappa,
            60.0 * kappa,
            panels,
            order,
        )?;
        BernsteinTriplet::new(0.0, 0.0, jumps)
    }
}

impl PositiveMap for FellerSemigroup {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        if !(zeta.re > 0.0) {
            return Err(Error::Domain(format!("evaluation point {zeta} not in Re ζ > 0")));
        }
        Ok(self.contraction() * zeta / (1.0 + self.kappa() * zeta))
    }
    fn value_at_zero(&self) -> Result<f64> {
        Ok(0.0)
    }
    fn derivative_at_zero(&self) -> Result<f64> {
        Ok(self.contraction())
    }
    fn derivative_at_infinity(&self) -> Result<f64> {
        Ok(if self.t == 0.0 { 1.0 } else { 0.0 })
    }
    fn derivative(&self, theta: f64) -> Result<f64> {
        let k = self.kappa();
        Ok(self.contraction() / ((1.0 + k * theta) * (1.0 + k * theta)))
    }
    fn value_at_infinity(&self) -> Result<LadderLimit> {
        Ok(if self.t == 0.0 {
            LadderLimit::Diverged
        } else {
            LadderLimit::Finite { value: self.contraction() / self.kappa(), converged: true, last_relative_change: 0.0 }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DwLocation {
    Zero,
    Interior { theta: f64, derivative: f64 },
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryFixedPoint {
    pub is_brfp: bool,
    #[serde(serialize_with = "ser_f64")]
    pub derivative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub dw_location: DwLocation,
    pub brfp_at_zero: BoundaryFixedPoint,
    pub brfp_at_infinity: BoundaryFixedPoint,
    pub value_at_zero: f64,
}

const PROBE_GRID: [f64; 9] = [1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e4, 1e6];

/// Denjoy–Wolff point and boundary regular fixed points of a Bernstein map.
///
/// `∞` is the DW-point iff `f'(∞) ≥ 1`; otherwise `0` is the DW-point iff
/// `f(0) = 0` and `f'(0) ≤ 1` (ties at 1 resolve to zero); otherwise the
/// interior fixed point is bracketed on `[1e-8, 1e8]` and bisected to a
/// relative width of `1e-12`.
pub fn classify_fixed_points(f: &dyn PositiveMap) -> Result<FixedPointReport> {
    let at_zero = f.value_at_zero()?;
    let d_zero = f.derivative_at_zero()?;
    let d_inf = f.derivative_at_infinity()?;

    let zero_is_fixed = at_zero <= 1e-12;
    let brfp_at_zero = BoundaryFixedPoint { is_brfp: zero_is_fixed && d_zero.is_finite(), derivative: d_zero };
    let brfp_at_infinity = BoundaryFixedPoint { is_brfp: d_inf > 0.0, derivative: d_inf };

    let expands = d_inf >= 1.0 - DERIVATIVE_TIE_TOLERANCE;
    let dominates_identity = PROBE_GRID
        .iter()
        .map(|&th| f.eval_real(th).map(|v| v >= th * (1.0 - 1e-9)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|ok| ok);

    let dw_location = if expands {
        if !dominates_identity {
            return Err(Error::AmbiguousClassification(format!(
                "f'(∞) = {d_inf} suggests DW-point at ∞ but f(θ) < θ somewhere on the probe grid"
            )));
        }
        DwLocation::Infinity
    } else if zero_is_fixed && d_zero <= 1.0 + DERIVATIVE_TIE_TOLERANCE {
        DwLocation::Zero
    } else {
        let (theta, derivative) = interior_fixed_point(f).map_err(|e| {
            Error::AmbiguousClassification(format!("f(0) = {at_zero}, f'(0) = {d_zero}, f'(∞) = {d_inf}: {e}"))
        })?;
        DwLocation::Interior { theta, derivative }
    };

    Ok(FixedPointReport { dw_location, brfp_at_zero, brfp_at_infinity, value_at_zero: at_zero })
}

fn interior_fixed_point(f: &dyn PositiveMap) -> Result<(f64, f64)> {
    let g = |x: f64| f.eval_real(x).map(|v| v - x);
    let (mut lo, mut hi) = (1e-8, 1e8);
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::AmbiguousClassification(format!(
            "no sign change of f(θ) - θ on [1e-8, 1e8] (g(lo) = {g_lo:e}, g(hi) = {g_hi:e})"
        )));
    }
    while hi - lo > 1e-12 * hi {
        // geometric midpoint while the bracket spans orders of magnitude
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    Ok((theta, f.derivative(theta)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_density_triplet() -> BernsteinTriplet {
        let m = DiscretizedMeasure::from_density_log_panels(|x| (-x).exp(), 1e-3, 60.0, 40, 16).unwrap();
        BernsteinTriplet::new(0.0, 0.0, m).unwrap()
    }

    #[test]
    fn eval_examples() {
        let id = BernsteinTriplet::new(0.0, 1.0, DiscretizedMeasure::empty()).unwrap();
        assert_eq!(id.eval_real(2.0).unwrap(), 2.0);
        let atom = BernsteinTriplet::new(0.0, 0.0, DiscretizedMeasure::dirac(1.0, 1.0).unwrap()).unwrap();
        assert!((atom.eval_real(1.0).unwrap() - 0.6321206).abs() < 1e-7);
        let affine = BernsteinTriplet::new(0.5, 0.5, DiscretizedMeasure::empty()).unwrap();
        assert!((affine.eval_real(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_closed_half_plane_boundary() {
        let id = BernsteinTriplet::identity();
        assert!(matches!(id.eval(Complex64::new(0.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_data_examples() {
        let atom = BernsteinTriplet::new(0.0, 0.0, DiscretizedMeasure::dirac(1.0, 1.0).unwrap()).unwrap();
        let bd = atom.boundary_data();
        assert_eq!(
            (bd.at_zero, bd.derivative_at_zero, bd.derivative_at_infinity, bd.at_infinity),
            (0.0, 1.0, 0.0, 1.0)
        );
        let bd = BernsteinTriplet::identity().boundary_data();
        assert_eq!((bd.at_zero, bd.derivative_at_zero, bd.derivative_at_infinity), (0.0, 1.0, 1.0));
        assert!(bd.at_infinity.is_infinite());
        let constant = BernsteinTriplet::new(0.3, 0.0, DiscretizedMeasure::empty()).unwrap();
        let bd = constant.boundary_data();
        assert_eq!(
            (bd.at_zero, bd.derivative_at_zero, bd.derivative_at_infinity, bd.at_infinity),
            (0.3, 0.0, 0.0, 0.3)
        );
    }

    #[test]
    fn huge_first_moment_reports_infinite_derivative() {
        let m = DiscretizedMeasure::dirac(1e20, 1e-3).unwrap();
        let f = BernsteinTriplet::new(0.0, 0.0, m).unwrap();
        assert!(f.boundary_data().derivative_at_zero.is_infinite());
    }

    #[test]
    fn classify_examples() {
        let r = classify_fixed_points(&exp_density_triplet()).unwrap();
        assert_eq!(r.dw_location, DwLocation::Zero);
        assert!((r.brfp_at_zero.derivative - 1.0).abs() < 1e-10);

        let double = BernsteinTriplet::new(0.0, 2.0, DiscretizedMeasure::empty()).unwrap();
        let r = classify_fixed_points(&double).unwrap();
        assert_eq!(r.dw_location, DwLocation::Infinity);
        assert_eq!(r.brfp_at_infinity.derivative, 2.0);

        let affine = BernsteinTriplet::new(0.5, 0.5, DiscretizedMeasure::empty()).unwrap();
        let r = classify_fixed_points(&affine).unwrap();
        match r.dw_location {
            DwLocation::Interior { theta, derivative } => {
                assert!((theta - 1.0).abs() < 1e-10);
                assert!((derivative - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!((r.value_at_zero - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_over_one_plus_theta_matches_closed_form() {
        let f = exp_density_triplet();
        for th in [0.01, 0.5, 1.0, 7.0, 100.0] {
            let v = f.eval_real(th).unwrap();
            assert!((v - th / (1.0 + th)).abs() < 1e-12, "{th}: {v}");
        }
    }

    #[test]
    fn compose_examples() {
        let f: Arc<dyn PositiveMap> =
            Arc::new(BernsteinTriplet::new(0.3, 0.2, DiscretizedMeasure::dirac(2.0, 1.0).unwrap()).unwrap());
        let c = compose(Arc::new(IdentityMap), f.clone());
        for th in [0.1, 1.0, 10.0] {
            assert_eq!(c.eval_real(th).unwrap(), f.eval_real(th).unwrap());
        }
        let v1: Arc<dyn PositiveMap> = Arc::new(feller_semigroup(0.0, 1.0, 1.0).unwrap());
        let v2 = compose(v1.clone(), v1);
        assert!((v2.eval_real(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let atom: Arc<dyn PositiveMap> =
            Arc::new(BernsteinTriplet::new(0.0, 0.0, DiscretizedMeasure::dirac(1.0, 1.0).unwrap()).unwrap());
        let aa = compose(atom.clone(), atom);
        let expected = 1.0 - (-(1.0 - (-1.0f64).exp())).exp();
        assert!((aa.eval_real(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.4685364).abs() < 1e-7);
    }

    #[test]
    fn feller_examples() {
        let v = feller_semigroup(0.0, 1.0, 1.0).unwrap();
        assert!((v.eval_real(1.0).unwrap() - 0.5).abs() < 1e-15);
        let v = feller_semigroup(1.0, 1.0, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((v.eval_real(1.0).unwrap() - e / (2.0 - e)).abs() < 1e-15);
        assert!((v.eval_real(1.0).unwrap() - 0.2254003).abs() < 1e-6);
        let v0 = feller_semigroup(1.3, 0.7, 0.0).unwrap();
        for th in [0.1, 1.0, 50.0] {
            assert_eq!(v0.eval_real(th).unwrap(), th);
        }
        assert!(matches!(feller_semigroup(0.0, 0.0, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn feller_triplet_agrees_with_closed_form() {
        for (a, b, t) in [(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (-0.5, 2.0, 0.7)] {
            let v = feller_semigroup(a, b, t).unwrap();
            let trip = v.to_triplet(40, 16).unwrap();
            for th in [0.01, 1.0, 30.0] {
                let (x, y) = (v.eval_real(th).unwrap(), trip.eval_real(th).unwrap());
                assert!((x - y).abs() < 1e-11 * (1.0 + x), "{a} {b} {t} {th}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn supercritical_feller_has_interior_fixed_point() {
        let v = feller_semigroup(-1.0, 1.0, 0.8).unwrap();
        let r = classify_fixed_points(&v).unwrap();
        match r.dw_location {
            DwLocation::Interior { theta, .. } => {
                assert!((v.eval_real(theta).unwrap() - theta).abs() <= 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ladder_limit_cases() {
        let feller: Vec<f64> = LADDER_EXPONENTS
            .map(|k| {
                let th = 10f64.powi(k);
                th / (1.0 + th)
            })
            .collect();
        match ladder_limit(&feller).unwrap() {
            LadderLimit::Finite { value, converged, .. } => {
                assert!(converged);
                assert!((value - 1.0).abs() < 1e-12);
            }
            LadderLimit::Diverged => panic!(),
        }
        let linear: Vec<f64> = LADDER_EXPONENTS.map(|k| 10f64.powi(k)).collect();
        assert_eq!(ladder_limit(&linear).unwrap(), LadderLimit::Diverged);
        assert!(matches!(ladder_limit(&[1.0, 0.5, 0.7]), Err(Error::Extrapolation(_))));
    }
}
