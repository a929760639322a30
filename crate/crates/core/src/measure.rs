//! Discretized non-negative measures on `(0, ∞)`.
//!
//! A [`DiscretizedMeasure`] is a finite collection of point masses plus
//! quadrature panels that approximate absolutely continuous parts. Every
//! integral against such a measure is a finite sum, so jump measures of
//! Bernstein functions and Lévy measures of branching mechanisms share a
//! single evaluation path.
//!
//! Density panels use Gauss–Legendre rules. For a rule of order `n` on a
//! panel of width `h`, the error for an integrand `g` is bounded by
//! `h^(2n+1) (n!)^4 / ((2n+1) ((2n)!)^3) * max |g^(2n)|`; the panel builder
//! additionally records the empirical discrepancy between order `n` and order
//! `2n` for the panel mass.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integrands that appear in the Lévy–Khintchine type representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    /// `1 - e^{-ζx}`
    OneMinusExp,
    /// `e^{-ζx} - 1 + ζx 1_{(0,1)}(x)`
    Silverstein,
    /// `e^{-ζx} - 1 + ζx`
    Compensated,
    /// `e^{-ζx} - 1`
    Plain,
    /// `min{1, x}`
    MinOneX,
    /// `min{x², 1}`
    MinSquareOne,
    /// `x 1_{[1,∞)}(x)`
    LargeJumpMoment,
    /// `x 1_{(0,1)}(x)`
    SmallJumpMoment,
    /// `x`
    FirstMoment,
    /// `x²`
    SecondMoment,
}

impl Kernel {
    pub fn eval(self, zeta: Complex64, x: f64) -> Complex64 {
        let w = zeta * x;
        match self {
            Kernel::OneMinusExp => one_minus_exp_neg(w),
            Kernel::Silverstein => {
                if x < 1.0 {
                    exp_neg_minus_one_plus(w)
                } else {
                    -one_minus_exp_neg(w)
                }
            }
            Kernel::Compensated => exp_neg_minus_one_plus(w),
            Kernel::Plain => -one_minus_exp_neg(w),
            Kernel::MinOneX => Complex64::new(x.min(1.0), 0.0),
            Kernel::MinSquareOne => Complex64::new((x * x).min(1.0), 0.0),
            Kernel::LargeJumpMoment => Complex64::new(if x >= 1.0 { x } else { 0.0 }, 0.0),
            Kernel::SmallJumpMoment => Complex64::new(if x < 1.0 { x } else { 0.0 }, 0.0),
            Kernel::FirstMoment => Complex64::new(x, 0.0),
            Kernel::SecondMoment => Complex64::new(x * x, 0.0),
        }
    }

    /// Whether the kernel depends on the evaluation point at all.
    pub fn is_functional(self) -> bool {
        matches!(
            self,
            Kernel::MinOneX
                | Kernel::MinSquareOne
                | Kernel::LargeJumpMoment
                | Kernel::SmallJumpMoment
                | Kernel::FirstMoment
                | Kernel::SecondMoment
        )
    }
}

const SERIES_RADIUS: f64 = 0.1;

/// `1 - e^{-w}` without cancellation near `w = 0`.
pub fn one_minus_exp_neg(w: Complex64) -> Complex64 {
    if w.norm() < SERIES_RADIUS {
        // w - w²/2! + w³/3! - ...
        let mut term = w;
        let mut sum = w;
        for k in 2..16 {
            term = -term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        Complex64::new(1.0, 0.0) - (-w).exp()
    }
}

/// `e^{-w} - 1 + w` without cancellation near `w = 0`.
pub fn exp_neg_minus_one_plus(w: Complex64) -> Complex64 {
    if w.norm() < SERIES_RADIUS {
        let mut term = w * w / 2.0;
        let mut sum = term;
        for k in 3..18 {
            term = -term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        (-w).exp() - 1.0 + w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Quadrature panel approximating `∫_{lo}^{hi} g(x) ρ(x) dx` by `Σ wᵢ g(xᵢ)`.
///
/// The weights already include the density values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySegment {
    pub lo: f64,
    pub hi: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// |mass(order n) - mass(order 2n)| recorded at construction; 0 when
    /// the panel was supplied as raw nodes and weights.
    #[serde(default)]
    pub mass_error_estimate: f64,
}

impl DensitySegment {
    /// Gauss–Legendre panel of the given order for the density `rho` on `[lo, hi]`.
    pub fn from_density<F: Fn(f64) -> f64>(rho: F, lo: f64, hi: f64, order: usize) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Parameter(format!("density panel [{lo}, {hi}] must satisfy 0 <= lo < hi < inf")));
        }
        if order == 0 {
            return Err(Error::Parameter("quadrature order must be positive".into()));
        }
        let (nodes, weights) = panel_rule(&rho, lo, hi, order)?;
        let (_, fine) = panel_rule(&rho, lo, hi, 2 * order)?;
        let coarse_mass: f64 = weights.iter().sum();
        let fine_mass: f64 = fine.iter().sum();
        Ok(DensitySegment { lo, hi, nodes, weights, mass_error_estimate: (coarse_mass - fine_mass).abs() })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::Parameter(format!(
                "density panel [{}, {}] is not a bounded subinterval of [0, inf)",
                self.lo, self.hi
            )));
        }
        if self.nodes.len() != self.weights.len() {
            return Err(Error::Parameter("density panel nodes/weights length mismatch".into()));
        }
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if !(x > 0.0 && x >= self.lo && x <= self.hi) {
                return Err(Error::Parameter(format!("quadrature node {x} outside panel ({}, {}]", self.lo, self.hi)));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("negative or non-finite quadrature weight {w}")));
            }
        }
        Ok(())
    }
}

fn panel_rule<F: Fn(f64) -> f64>(rho: &F, lo: f64, hi: f64, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (xs, ws) = gauss_legendre(order);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for (x, w) in xs.into_iter().zip(ws) {
        let node = mid + half * x;
        let density = rho(node);
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::Parameter(format!(
                "density must be non-negative and finite, got {density} at x = {node}"
            )));
        }
        nodes.push(node);
        weights.push(half * w * density);
    }
    Ok((nodes, weights))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Finite non-negative measure on `(0, ∞)`: atoms plus density panels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedMeasure {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    segments: Vec<DensitySegment>,
}

impl DiscretizedMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>, segments: Vec<DensitySegment>) -> Result<Self> {
        let m = DiscretizedMeasure { atoms, segments };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(location: f64, mass: f64) -> Result<Self> {
        Self::new(vec![Atom { location, mass }], Vec::new())
    }

    pub fn from_atoms<I: IntoIterator<Item = (f64, f64)>>(atoms: I) -> Result<Self> {
        Self::new(atoms.into_iter().map(|(location, mass)| Atom { location, mass }).collect(), Vec::new())
    }

    /// Discretizes a density on `(0, x_max]`: one panel on `(0, x_min]` and
    /// `panels` geometrically spaced panels on `[x_min, x_max]`.
    pub fn from_density_log_panels<F: Fn(f64) -> f64>(
        rho: F,
        x_min: f64,
        x_max: f64,
        panels: usize,
        order: usize,
    ) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) || panels == 0 {
            return Err(Error::Parameter(format!(
                "log panels need 0 < x_min < x_max < inf and panels > 0 (got {x_min}, {x_max}, {panels})"
            )));
        }
        let mut segments = Vec::with_capacity(panels + 1);
        segments.push(DensitySegment::from_density(&rho, 0.0, x_min, order)?);
        let ratio = (x_max / x_min).powf(1.0 / panels as f64);
        let mut lo = x_min;
        for k in 0..panels {
            let hi = if k + 1 == panels { x_max } else { lo * ratio };
            segments.push(DensitySegment::from_density(&rho, lo, hi, order)?);
            lo = hi;
        }
        Self::new(Vec::new(), segments)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[DensitySegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0) && self.segments.iter().all(|s| s.weights.iter().all(|&w| w == 0.0))
    }

    /// All `(location, weight)` pairs, atoms first.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms
            .iter()
            .map(|a| (a.location, a.mass))
            .chain(self.segments.iter().flat_map(|s| s.nodes.iter().copied().zip(s.weights.iter().copied())))
    }

    /// Sum of the recorded per-panel mass discrepancies.
    pub fn quadrature_error_estimate(&self) -> f64 {
        self.segments.iter().map(|s| s.mass_error_estimate).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            if !(a.location > 0.0 && a.location.is_finite()) {
                return Err(Error::Parameter(format!("atom {i}: location {} must be positive and finite", a.location)));
            }
            if !(a.mass >= 0.0 && a.mass.is_finite()) {
                return Err(Error::Parameter(format!("atom {i}: mass {} must be non-negative and finite", a.mass)));
            }
        }
        for s in &self.segments {
            s.validate()?;
        }
        for kernel in [Kernel::MinOneX, Kernel::MinSquareOne] {
            self.functional(kernel)?;
        }
        Ok(())
    }

    /// Integral of `kernel(ζ, ·)`; `ζ` must lie in the closed right half-plane.
    pub fn integrate_kernel(&self, kernel: Kernel, zeta: Complex64) -> Result<Complex64> {
        if !(zeta.re >= 0.0) || !zeta.im.is_finite() {
            return Err(Error::Domain(format!(
                "kernel evaluation point {zeta} is outside the closed right half-plane"
            )));
        }
        let total: Complex64 = self.points().map(|(x, w)| kernel.eval(zeta, x) * w).sum();
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::MeasureIntegrability(format!("integral of {kernel:?} at {zeta} is not finite")));
        }
        Ok(total)
    }

    /// Real-valued functional (moment-type kernels).
    pub fn functional(&self, kernel: Kernel) -> Result<f64> {
        Ok(self.integrate_kernel(kernel, Complex64::new(0.0, 0.0))?.re)
    }

    pub fn total_mass(&self) -> f64 {
        self.points().map(|(_, w)| w).sum()
    }

    /// `∫ x^k e^{-θx} m(dx)` for real `θ ≥ 0`.
    pub fn laplace_moment(&self, k: i32, theta: f64) -> f64 {
        self.points().map(|(x, w)| w * x.powi(k) * (-theta * x).exp()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!("scale factor {factor} must be non-negative")));
        }
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.mass *= factor;
        }
        for s in &mut out.segments {
            for w in &mut s.weights {
                *w *= factor;
            }
            s.mass_error_estimate *= factor;
        }
        Ok(out)
    }
}
