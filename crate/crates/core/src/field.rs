//! Piecewise-constant Herglotz vector fields in `Gen(BF)`.
//!
//! The canonical storage is a [`LevyFamily`]: on each interval
//! `[t_i, t_{i+1})` of an explicit breakpoint grid the field is
//!
//! ```text
//! φ(ζ) = -q + aζ + bζ² + ∫ (e^{-ζx} - 1 + ζx 1_{(0,1)}(x)) π(dx)
//! ```
//!
//! and the last segment repeats for all later times. The DW-at-0 and
//! BRFP-at-∞ parameterizations are converters into and out of this form.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{DiscretizedMeasure, Kernel};
use crate::pgf::GeneratingFamily;
use crate::util::ser_f64;

/// Segment start times `0 = t_0 < t_1 < … < t_m`; segment `m` extends to `∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints(Vec<f64>);

/// The part of a segment that overlaps a query interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub index: usize,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Breakpoints {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Parameter("breakpoints must start at 0".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Parameter(format!(
                    "breakpoints must be strictly increasing and finite ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Breakpoints(times))
    }

    pub fn single() -> Self {
        Breakpoints(vec![0.0])
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the segment whose interval `[t_i, t_{i+1})` contains `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        self.0.partition_point(|&b| b <= t).saturating_sub(1)
    }

    /// Segment pieces covering `[s, t]`, in increasing time order.
    pub fn pieces(&self, s: f64, t: f64) -> Vec<Piece> {
        let mut out = Vec::new();
        if !(t > s) {
            return out;
        }
        let mut i = self.segment_index(s);
        let mut lo = s;
        loop {
            let end = self.0.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let hi = end.min(t);
            if hi > lo {
                out.push(Piece { lo, hi, index: i });
            }
            if end >= t {
                break;
            }
            lo = end;
            i += 1;
        }
        out
    }

    /// Exact integral of a per-segment constant over `[s, t]`.
    pub fn integrate_step<F: Fn(usize) -> f64>(&self, s: f64, t: f64, value: F) -> f64 {
        self.pieces(s, t).iter().map(|p| value(p.index) * p.len()).sum()
    }
}

fn check_nonneg(name: &str, i: usize, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("segment {i}: {name} = {x} must be non-negative and finite")))
    }
}

fn check_finite(name: &str, i: usize, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("segment {i}: {name} = {x} must be finite")))
    }
}

fn check_segment_count(bp: &Breakpoints, n: usize) -> Result<()> {
    if bp.len() != n {
        return Err(Error::Parameter(format!(
            "{} breakpoints but {} segments; each segment starts at one breakpoint",
            bp.len(),
            n
        )));
    }
    Ok(())
}

/// Lévy quadruple `(q, a, b, π)` of a single segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LevySegment {
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub jumps: DiscretizedMeasure,
}

impl LevySegment {
    pub fn new(q: f64, a: f64, b: f64, jumps: DiscretizedMeasure) -> Self {
        LevySegment { q, a, b, jumps }
    }

    pub fn quadratic(a: f64, b: f64) -> Self {
        Self::new(0.0, a, b, DiscretizedMeasure::empty())
    }

    fn validate(&self, i: usize) -> Result<()> {
        check_nonneg("q", i, self.q)?;
        check_finite("a", i, self.a)?;
        check_nonneg("b", i, self.b)?;
        self.jumps.validate()?;
        self.jumps
            .functional(Kernel::MinSquareOne)
            .map_err(|e| Error::MeasureIntegrability(format!("segment {i}: {e}")))?;
        Ok(())
    }

    pub fn phi(&self, zeta: Complex64) -> Result<Complex64> {
        Ok(-self.q + self.a * zeta + self.b * zeta * zeta + self.jumps.integrate_kernel(Kernel::Silverstein, zeta)?)
    }

    /// `φ''(θ)` on the positive axis.
    pub fn phi_second(&self, theta: f64) -> f64 {
        2.0 * self.b + self.jumps.laplace_moment(2, theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyFamily {
    breakpoints: Breakpoints,
    segments: Vec<LevySegment>,
}

impl LevyFamily {
    pub fn new(breakpoints: Breakpoints, segments: Vec<LevySegment>) -> Result<Self> {
        check_segment_count(&breakpoints, segments.len())?;
        for (i, s) in segments.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(LevyFamily { breakpoints, segments })
    }

    pub fn homogeneous(segment: LevySegment) -> Result<Self> {
        Self::new(Breakpoints::single(), vec![segment])
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[LevySegment] {
        &self.segments
    }
}

/// `(c, b, π)` with `φ(ζ) = cζ + bζ² + ∫(e^{-ζx} - 1 + ζx) π(dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dw0Segment {
    pub c: f64,
    pub b: f64,
    pub jumps: DiscretizedMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dw0Family {
    breakpoints: Breakpoints,
    segments: Vec<Dw0Segment>,
}

impl Dw0Family {
    pub fn new(breakpoints: Breakpoints, segments: Vec<Dw0Segment>) -> Result<Self> {
        check_segment_count(&breakpoints, segments.len())?;
        for (i, s) in segments.iter().enumerate() {
            check_nonneg("c", i, s.c)?;
            check_nonneg("b", i, s.b)?;
            s.jumps.validate()?;
            let small = s.jumps.functional(Kernel::MinSquareOne)?;
            let large = s.jumps.functional(Kernel::LargeJumpMoment)?;
            if !(small + large).is_finite() {
                return Err(Error::MeasureIntegrability(format!("segment {i}: ∫min(λ², λ) π(dλ) is not finite")));
            }
        }
        Ok(Dw0Family { breakpoints, segments })
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Dw0Segment] {
        &self.segments
    }

    pub fn phi(&self, zeta: Complex64, t: f64) -> Result<Complex64> {
        let s = &self.segments[self.breakpoints.segment_index(t)];
        Ok(s.c * zeta + s.b * zeta * zeta + s.jumps.integrate_kernel(Kernel::Compensated, zeta)?)
    }
}

/// `(q, d, π)` with `φ(ζ) = -q + dζ + ∫(e^{-ζx} - 1) π(dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrfpInfSegment {
    pub q: f64,
    pub d: f64,
    pub jumps: DiscretizedMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrfpInfFamily {
    breakpoints: Breakpoints,
    segments: Vec<BrfpInfSegment>,
}

impl BrfpInfFamily {
    pub fn new(breakpoints: Breakpoints, segments: Vec<BrfpInfSegment>) -> Result<Self> {
        check_segment_count(&breakpoints, segments.len())?;
        for (i, s) in segments.iter().enumerate() {
            check_nonneg("q", i, s.q)?;
            check_finite("d", i, s.d)?;
            s.jumps.validate()?;
            let m = s.jumps.functional(Kernel::MinOneX)?;
            if !m.is_finite() {
                return Err(Error::MeasureIntegrability(format!("segment {i}: ∫min(x, 1) π(dx) is not finite")));
            }
        }
        Ok(BrfpInfFamily { breakpoints, segments })
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[BrfpInfSegment] {
        &self.segments
    }

    /// The DW-point of every `v_{s,t}` is `∞` iff `d ≤ 0` throughout.
    pub fn dw_infinity(&self) -> bool {
        self.segments.iter().all(|s| s.d <= 0.0)
    }

    pub fn phi(&self, zeta: Complex64, t: f64) -> Result<Complex64> {
        let s = &self.segments[self.breakpoints.segment_index(t)];
        Ok(-s.q + s.d * zeta + s.jumps.integrate_kernel(Kernel::Plain, zeta)?)
    }

    /// `v'_{s,t}(∞) = exp(-∫_s^t d_r dr)`, exact for step families.
    pub fn derivative_at_infinity(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= s) {
            return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        Ok((-self.breakpoints.integrate_step(s, t, |i| self.segments[i].d)).exp())
    }
}

/// Per-segment boundary behaviour of `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldBoundary {
    /// `φ(0, t) = -q_t`
    pub phi_at_zero: f64,
    /// `φ'(0, t) = a_t - ∫_{[1,∞)} x π_t(dx)`; `-∞` if the moment diverges.
    #[serde(serialize_with = "ser_f64")]
    pub phi_prime_at_zero: f64,
    /// `φ''(∞, t) = 2 b_t`
    pub phi_second_at_infinity: f64,
    /// `φ''(0, t) = 2 b_t + ∫ x² π_t(dx)`
    #[serde(serialize_with = "ser_f64")]
    pub phi_second_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteMeanReport {
    pub finite_mean: bool,
    pub reasons: Vec<String>,
    /// `∫_{[1,∞)} x π(dx)` per segment.
    pub large_jump_moments: Vec<f64>,
}

/// A Herglotz vector field in canonical Lévy form with cached boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzFieldBF {
    family: LevyFamily,
    boundary: Vec<FieldBoundary>,
}

impl HerglotzFieldBF {
    pub fn new(family: LevyFamily) -> Self {
        let boundary = family
            .segments
            .iter()
            .map(|s| {
                let large = s.jumps.functional(Kernel::LargeJumpMoment).unwrap_or(f64::INFINITY);
                let second = s.jumps.functional(Kernel::SecondMoment).unwrap_or(f64::INFINITY);
                FieldBoundary {
                    phi_at_zero: -s.q,
                    phi_prime_at_zero: s.a - large,
                    phi_second_at_infinity: 2.0 * s.b,
                    phi_second_at_zero: 2.0 * s.b + second,
                }
            })
            .collect();
        HerglotzFieldBF { family, boundary }
    }

    /// Single-segment quadratic mechanism `aζ + bζ²`.
    pub fn feller(a: f64, b: f64) -> Result<Self> {
        Ok(Self::new(LevyFamily::homogeneous(LevySegment::quadratic(a, b))?))
    }

    pub fn family(&self) -> &LevyFamily {
        &self.family
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.family.breakpoints
    }

    pub fn segments(&self) -> &[LevySegment] {
        &self.family.segments
    }

    pub fn segment_at(&self, t: f64) -> &LevySegment {
        &self.family.segments[self.breakpoints().segment_index(t)]
    }

    pub fn phi_eval(&self, zeta: Complex64, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time {t} must be non-negative")));
        }
        if !(zeta.re > 0.0) {
            return Err(Error::Domain(format!("φ is defined on Re ζ > 0, got {zeta}")));
        }
        self.segment_at(t).phi(zeta)
    }

    pub fn segment_boundary(&self, index: usize) -> FieldBoundary {
        self.boundary[index]
    }

    pub fn boundary_data(&self, t: f64) -> FieldBoundary {
        self.boundary[self.breakpoints().segment_index(t)]
    }

    pub fn finite_mean_check(&self) -> FiniteMeanReport {
        self.finite_mean_report((0..self.segments().len()).collect())
    }

    /// Finite-mean check restricted to the segments meeting `[s, t]`.
    pub fn finite_mean_check_on(&self, s: f64, t: f64) -> FiniteMeanReport {
        let mut idx: Vec<usize> = self.breakpoints().pieces(s, t).iter().map(|p| p.index).collect();
        if idx.is_empty() {
            idx.push(self.breakpoints().segment_index(s));
        }
        self.finite_mean_report(idx)
    }

    fn finite_mean_report(&self, indices: Vec<usize>) -> FiniteMeanReport {
        let mut reasons = Vec::new();
        let mut moments = Vec::new();
        for i in indices {
            let s = &self.segments()[i];
            if s.q > 0.0 {
                reasons.push(format!("segment {i}: killing present (q = {})", s.q));
            }
            let m = s.jumps.functional(Kernel::LargeJumpMoment).unwrap_or(f64::INFINITY);
            if !m.is_finite() {
                reasons.push(format!("segment {i}: ∫_[1,∞) x π(dx) diverges"));
            }
            moments.push(m);
        }
        FiniteMeanReport { finite_mean: reasons.is_empty(), reasons, large_jump_moments: moments }
    }

    pub fn from_dw0(f: &Dw0Family) -> Result<Self> {
        let segments = f
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let large = s
                    .jumps
                    .functional(Kernel::LargeJumpMoment)
                    .map_err(|e| Error::MeasureIntegrability(format!("segment {i}: {e}")))?;
                Ok(LevySegment::new(0.0, s.c + large, s.b, s.jumps.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(LevyFamily::new(f.breakpoints.clone(), segments)?))
    }

    pub fn from_brfp_inf(f: &BrfpInfFamily) -> Result<Self> {
        let segments = f
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let small = s
                    .jumps
                    .functional(Kernel::SmallJumpMoment)
                    .map_err(|e| Error::MeasureIntegrability(format!("segment {i}: {e}")))?;
                Ok(LevySegment::new(s.q, s.d - small, 0.0, s.jumps.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(LevyFamily::new(f.breakpoints.clone(), segments)?))
    }

    /// Lift of a generating family through `φ(ζ, s) = -e^ζ Φ(e^{-ζ}, s)`:
    /// the quadruple `(q_s, 0, 0, Σ_k α_s(k+1) δ_k)`.
    pub fn from_generating_family(gf: &GeneratingFamily) -> Result<Self> {
        let segments = gf
            .segments()
            .iter()
            .enumerate()
            .map(|(i, pair)| {
                let death = pair.alpha(0);
                if death > 0.0 {
                    return Err(Error::NotEmbeddable(format!("segment {i}: α(0) = {death} > 0, so F_(s,t)(0) > 0")));
                }
                let atoms = pair.offspring().filter(|&(n, w)| n >= 2 && w > 0.0).map(|(n, w)| ((n - 1) as f64, w));
                Ok(LevySegment::new(pair.q(), 0.0, 0.0, DiscretizedMeasure::from_atoms(atoms)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(LevyFamily::new(gf.breakpoints().clone(), segments)?))
    }

    /// DW-at-0 form, available when `q ≡ 0` and `c = φ'(0) ≥ 0` on every segment.
    pub fn as_dw0(&self) -> Option<Dw0Family> {
        let segments = self
            .segments()
            .iter()
            .zip(&self.boundary)
            .map(|(s, bd)| {
                (s.q == 0.0 && bd.phi_prime_at_zero >= 0.0).then(|| Dw0Segment {
                    c: bd.phi_prime_at_zero,
                    b: s.b,
                    jumps: s.jumps.clone(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Dw0Family::new(self.breakpoints().clone(), segments).ok()
    }

    /// BRFP-at-∞ form, available when `b ≡ 0`.
    pub fn as_brfp_inf(&self) -> Option<BrfpInfFamily> {
        let segments = self
            .segments()
            .iter()
            .map(|s| {
                let small = s.jumps.functional(Kernel::SmallJumpMoment).ok()?;
                (s.b == 0.0).then(|| BrfpInfSegment { q: s.q, d: s.a + small, jumps: s.jumps.clone() })
            })
            .collect::<Option<Vec<_>>>()?;
        BrfpInfFamily::new(self.breakpoints().clone(), segments).ok()
    }

    /// Whether every segment is a pure quadratic mechanism `aζ + bζ²`.
    pub fn is_quadratic(&self) -> bool {
        self.segments().iter().all(|s| s.q == 0.0 && s.jumps.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::{GeneratingFamily, GeneratingPair};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn single(q: f64, a: f64, b: f64, jumps: DiscretizedMeasure) -> HerglotzFieldBF {
        HerglotzFieldBF::new(LevyFamily::homogeneous(LevySegment::new(q, a, b, jumps)).unwrap())
    }

    #[test]
    fn breakpoint_pieces() {
        let bp = Breakpoints::new(vec![0.0, 1.0, 2.5]).unwrap();
        assert_eq!(bp.segment_index(0.0), 0);
        assert_eq!(bp.segment_index(1.0), 1);
        assert_eq!(bp.segment_index(99.0), 2);
        let p = bp.pieces(0.5, 3.0);
        assert_eq!(p.len(), 3);
        assert_eq!((p[0].lo, p[0].hi, p[0].index), (0.5, 1.0, 0));
        assert_eq!((p[2].lo, p[2].hi, p[2].index), (2.5, 3.0, 2));
        assert!(bp.pieces(1.0, 1.0).is_empty());
        assert_eq!(bp.pieces(1.0, 2.0), vec![Piece { lo: 1.0, hi: 2.0, index: 1 }]);
        assert!(Breakpoints::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Breakpoints::new(vec![0.5]).is_err());
    }

    #[test]
    fn phi_eval_examples() {
        let f = single(0.0, 1.0, 1.0, DiscretizedMeasure::empty());
        assert_eq!(f.phi_eval(c(1.0), 0.0).unwrap(), c(2.0));
        let f = single(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(2.0, 1.0).unwrap());
        let v = f.phi_eval(c(1.0), 3.0).unwrap().re;
        assert!((v - ((-2.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((v + 0.8646647).abs() < 1e-7);
        let f = single(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(0.5, 1.0).unwrap());
        let v = f.phi_eval(c(1.0), 0.0).unwrap().re;
        assert!((v - 0.1065307).abs() < 1e-7);
        assert!(matches!(f.phi_eval(c(0.0), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_data_examples() {
        let bd = single(0.0, 1.0, 1.0, DiscretizedMeasure::empty()).boundary_data(0.0);
        assert_eq!((bd.phi_at_zero, bd.phi_prime_at_zero, bd.phi_second_at_infinity), (0.0, 1.0, 2.0));
        let bd = single(0.3, 0.0, 0.0, DiscretizedMeasure::empty()).boundary_data(0.0);
        assert_eq!((bd.phi_at_zero, bd.phi_prime_at_zero, bd.phi_second_at_infinity), (-0.3, 0.0, 0.0));
        let bd = single(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(2.0, 1.0).unwrap()).boundary_data(0.0);
        assert_eq!((bd.phi_at_zero, bd.phi_prime_at_zero, bd.phi_second_at_infinity), (0.0, -2.0, 0.0));
    }

    #[test]
    fn converters() {
        let dw0 = Dw0Family::new(
            Breakpoints::single(),
            vec![Dw0Segment { c: 0.0, b: 1.0, jumps: DiscretizedMeasure::empty() }],
        )
        .unwrap();
        let f = HerglotzFieldBF::from_dw0(&dw0).unwrap();
        let s = &f.segments()[0];
        assert_eq!((s.q, s.a, s.b), (0.0, 0.0, 1.0));
        assert!(s.jumps.is_empty());

        let brfp = |x: f64| {
            BrfpInfFamily::new(
                Breakpoints::single(),
                vec![BrfpInfSegment { q: 0.0, d: 0.0, jumps: DiscretizedMeasure::dirac(x, 1.0).unwrap() }],
            )
            .unwrap()
        };
        let f = HerglotzFieldBF::from_brfp_inf(&brfp(1.0)).unwrap();
        assert_eq!(f.segments()[0].a, 0.0);
        let f = HerglotzFieldBF::from_brfp_inf(&brfp(0.5)).unwrap();
        assert_eq!(f.segments()[0].a, -0.5);
        for th in [0.2, 1.0, 4.0] {
            let want = brfp(0.5).phi(c(th), 0.0).unwrap();
            assert!((f.phi_eval(c(th), 0.0).unwrap() - want).norm() < 1e-13 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn finite_mean_examples() {
        assert!(single(0.0, 1.0, 1.0, DiscretizedMeasure::empty()).finite_mean_check().finite_mean);
        let r = single(0.1, 0.0, 0.0, DiscretizedMeasure::empty()).finite_mean_check();
        assert!(!r.finite_mean);
        assert!(r.reasons[0].contains("killing present"));
        let r = single(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(2.0, 1.0).unwrap()).finite_mean_check();
        assert!(r.finite_mean);
        assert_eq!(r.large_jump_moments, vec![2.0]);
    }

    #[test]
    fn generating_family_lift() {
        let yule = GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(2, 1.0)]).unwrap());
        let f = HerglotzFieldBF::from_generating_family(&yule).unwrap();
        let s = &f.segments()[0];
        assert_eq!((s.q, s.a, s.b), (0.0, 0.0, 0.0));
        assert_eq!(s.jumps.atoms(), &[crate::measure::Atom { location: 1.0, mass: 1.0 }]);

        let critical = GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(0, 1.0), (2, 1.0)]).unwrap());
        assert!(matches!(HerglotzFieldBF::from_generating_family(&critical), Err(Error::NotEmbeddable(_))));

        let explode = GeneratingFamily::homogeneous(GeneratingPair::new(0.4, []).unwrap());
        let f = HerglotzFieldBF::from_generating_family(&explode).unwrap();
        let s = &f.segments()[0];
        assert_eq!((s.q, s.a, s.b), (0.4, 0.0, 0.0));
        assert!(s.jumps.is_empty());
    }

    #[test]
    fn lift_matches_pgf_field() {
        let gf = GeneratingFamily::homogeneous(GeneratingPair::new(0.3, [(2, 0.7), (4, 0.2)]).unwrap());
        let f = HerglotzFieldBF::from_generating_family(&gf).unwrap();
        for th in [0.1f64, 1.0, 3.0] {
            let z = c((-th).exp());
            let want = -c(th).exp() * gf.phi_pgf_eval(z, 0.0).unwrap();
            assert!((f.phi_eval(c(th), 0.0).unwrap() - want).norm() < 1e-13);
        }
    }

    #[test]
    fn special_forms() {
        let quad = single(0.0, 0.0, 1.0, DiscretizedMeasure::empty());
        assert!(quad.as_dw0().is_some());
        assert!(quad.as_brfp_inf().is_none());
        let yule = single(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(1.0, 1.0).unwrap());
        let b = yule.as_brfp_inf().unwrap();
        assert_eq!(b.segments()[0].d, 0.0);
        assert!(b.dw_infinity());
        // φ'(0) = -1 < 0: no DW-at-0 representation
        assert!(yule.as_dw0().is_none());
    }

    #[test]
    fn rejects_negative_rates() {
        let r = LevyFamily::homogeneous(LevySegment::new(-0.1, 0.0, 0.0, DiscretizedMeasure::empty()));
        assert!(matches!(r, Err(Error::Parameter(_))));
        let r = LevyFamily::new(Breakpoints::new(vec![0.0, 1.0]).unwrap(), vec![LevySegment::quadratic(0.0, 1.0)]);
        assert!(r.is_err());
    }
}
