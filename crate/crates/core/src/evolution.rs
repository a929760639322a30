//! Reverse evolution families `v_{s,t}` from the backward Loewner–Kufarev ODE
//! `∂_s v = φ(v, s)`, `v(t) = ζ`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::bernstein::{ladder_limit, real, LadderLimit, PositiveMap, LADDER_EXPONENTS};
use crate::error::{Error, Result};
use crate::field::{Breakpoints, BrfpInfFamily, HerglotzFieldBF};
use crate::ode::{backward_flow, FlowStats, PiecewiseField, SolveTrace, StepSettings};

impl PiecewiseField for HerglotzFieldBF {
    fn breakpoints(&self) -> &Breakpoints {
        HerglotzFieldBF::breakpoints(self)
    }

    fn rhs(&self, segment: usize, y: Complex64) -> Result<Complex64> {
        self.segments()[segment].phi(y)
    }

    fn admissible(&self, y: Complex64) -> bool {
        y.re > 0.0 && y.re.is_finite() && y.im.is_finite()
    }

    fn domain_name(&self) -> &'static str {
        "the right half-plane"
    }
}

/// Evaluation point for `v(0)`; refined by linear Richardson extrapolation.
const ZERO_PROBE: f64 = 1e-12;

/// Solver handle: an immutable field plus step-control settings. Each call
/// owns its integration state, so a handle can be shared across threads.
#[derive(Debug, Clone)]
pub struct EvolutionSolver {
    field: Arc<HerglotzFieldBF>,
    settings: StepSettings,
}

impl EvolutionSolver {
    pub fn new(field: Arc<HerglotzFieldBF>, settings: StepSettings) -> Result<Self> {
        settings.validate()?;
        Ok(EvolutionSolver { field, settings })
    }

    pub fn with_defaults(field: Arc<HerglotzFieldBF>) -> Self {
        EvolutionSolver { field, settings: StepSettings::default() }
    }

    pub fn field(&self) -> &Arc<HerglotzFieldBF> {
        &self.field
    }

    pub fn settings(&self) -> &StepSettings {
        &self.settings
    }

    pub fn with_settings(&self, settings: StepSettings) -> Result<Self> {
        Self::new(self.field.clone(), settings)
    }

    fn check_point(zeta: Complex64, s: f64, t: f64) -> Result<()> {
        if !(zeta.re > 0.0) {
            return Err(Error::Domain(format!("ζ = {zeta} must satisfy Re ζ > 0")));
        }
        if !(s >= 0.0 && t >= s) {
            return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        Ok(())
    }

    /// `v_{s,t}(ζ)`.
    pub fn evolve_point(&self, zeta: Complex64, s: f64, t: f64) -> Result<Complex64> {
        Ok(self.evolve_with_stats(zeta, s, t)?.0)
    }

    pub fn evolve_real(&self, theta: f64, s: f64, t: f64) -> Result<f64> {
        Ok(self.evolve_point(real(theta), s, t)?.re)
    }

    pub fn evolve_with_stats(&self, zeta: Complex64, s: f64, t: f64) -> Result<(Complex64, FlowStats)> {
        Self::check_point(zeta, s, t)?;
        let mut y = [zeta];
        let stats = backward_flow(&*self.field, &self.settings, &mut y, s, t, None)?;
        Ok((y[0], stats))
    }

    pub fn evolve_traced(&self, zeta: Complex64, s: f64, t: f64) -> Result<(Complex64, SolveTrace)> {
        Self::check_point(zeta, s, t)?;
        let mut y = [zeta];
        let mut trace = SolveTrace::default();
        backward_flow(&*self.field, &self.settings, &mut y, s, t, Some(&mut trace))?;
        Ok((y[0], trace))
    }

    /// Joint solve of several initial values with a shared step sequence.
    pub fn evolve_many(&self, zetas: &[Complex64], s: f64, t: f64) -> Result<Vec<Complex64>> {
        for &z in zetas {
            Self::check_point(z, s, t)?;
        }
        let mut ys = zetas.to_vec();
        backward_flow(&*self.field, &self.settings, &mut ys, s, t, None)?;
        Ok(ys)
    }

    /// `max |v_{s,u}(ζ) - v_{s,t}(v_{t,u}(ζ))|` over the probes.
    pub fn composition_residual(&self, s: f64, t: f64, u: f64, probes: &[Complex64]) -> Result<f64> {
        if !(s >= 0.0 && s <= t && t <= u) {
            return Err(Error::Domain(format!("need 0 <= s <= t <= u, got ({s}, {t}, {u})")));
        }
        let mut worst = 0.0f64;
        for &z in probes {
            let direct = self.evolve_point(z, s, u)?;
            let inner = self.evolve_point(z, t, u)?;
            let composed = self.evolve_point(inner, s, t)?;
            worst = worst.max((direct - composed).norm());
        }
        Ok(worst)
    }

    /// `v'_{s,t}(0) = exp(-∫_s^t φ'(0, r) dr)`, exact for step fields.
    pub fn derivative_at_zero(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= s) {
            return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        let report = self.field.finite_mean_check_on(s, t);
        if !report.finite_mean {
            return Err(Error::FiniteMean(report.reasons.join("; ")));
        }
        Ok((-self.integrated_phi_prime_at_zero(s, t)).exp())
    }

    pub(crate) fn integrated_phi_prime_at_zero(&self, s: f64, t: f64) -> f64 {
        self.field.breakpoints().integrate_step(s, t, |i| self.field.segment_boundary(i).phi_prime_at_zero)
    }

    /// `v_{s,t}(0)` from `θ = 1e-12` with Richardson refinement.
    pub fn value_at_zero(&self, s: f64, t: f64) -> Result<f64> {
        let v = self.evolve_many(&[real(ZERO_PROBE), real(2.0 * ZERO_PROBE)], s, t)?;
        Ok((2.0 * v[0].re - v[1].re).max(0.0))
    }

    /// `v_{s,t}(∞)` along the ladder `θ = 10^0 … 10^8`.
    pub fn evolve_limit_at_infinity(&self, s: f64, t: f64) -> Result<LadderLimit> {
        if s == t {
            return Ok(LadderLimit::Diverged);
        }
        let values = LADDER_EXPONENTS.map(|k| self.evolve_real(10f64.powi(k), s, t)).collect::<Result<Vec<_>>>()?;
        ladder_limit(&values)
    }

    /// `v'_{s,t}(∞)`: `exp(-∫ d)` when every segment on `[s, t]` has `b = 0`,
    /// and `0` otherwise (a quadratic part makes `v_{s,t}(∞)` finite).
    pub fn derivative_at_infinity(&self, s: f64, t: f64) -> Result<f64> {
        if let Some(brfp) = self.field.as_brfp_inf() {
            return derivative_at_infinity(&brfp, s, t);
        }
        let pieces = self.field.breakpoints().pieces(s, t);
        if pieces.iter().any(|p| self.field.segments()[p.index].b > 0.0) {
            return Ok(0.0);
        }
        Ok(1.0)
    }

    /// `v_{s,t}` as a [`PositiveMap`].
    pub fn map(&self, s: f64, t: f64) -> Result<EvolutionMap> {
        if !(s >= 0.0 && t >= s) {
            return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        Ok(EvolutionMap { solver: self.clone(), s, t })
    }
}

/// `v'_{s,t}(∞) = exp(-∫_s^t d_r dr)` for a BRFP-at-∞ family.
pub fn derivative_at_infinity(f: &BrfpInfFamily, s: f64, t: f64) -> Result<f64> {
    f.derivative_at_infinity(s, t)
}

/// A single element `v_{s,t}` of the evolution family.
#[derive(Debug, Clone)]
pub struct EvolutionMap {
    solver: EvolutionSolver,
    s: f64,
    t: f64,
}

impl PositiveMap for EvolutionMap {
    fn eval(&self, zeta: Complex64) -> Result<Complex64> {
        self.solver.evolve_point(zeta, self.s, self.t)
    }

    fn value_at_zero(&self) -> Result<f64> {
        if self.solver.field.finite_mean_check_on(self.s, self.t).finite_mean {
            return Ok(0.0);
        }
        self.solver.value_at_zero(self.s, self.t)
    }

    fn derivative_at_zero(&self) -> Result<f64> {
        match self.solver.derivative_at_zero(self.s, self.t) {
            Ok(d) => Ok(d),
            Err(Error::FiniteMean(_)) => {
                let h = 1e-6;
                let v0 = self.solver.value_at_zero(self.s, self.t)?;
                let v = self.solver.evolve_many(&[real(h), real(2.0 * h)], self.s, self.t)?;
                Ok(2.0 * (v[0].re - v0) / h - (v[1].re - v0) / (2.0 * h))
            }
            Err(e) => Err(e),
        }
    }

    fn derivative_at_infinity(&self) -> Result<f64> {
        self.solver.derivative_at_infinity(self.s, self.t)
    }

    fn value_at_infinity(&self) -> Result<LadderLimit> {
        self.solver.evolve_limit_at_infinity(self.s, self.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::feller_semigroup;
    use crate::field::{BrfpInfSegment, LevyFamily, LevySegment};
    use crate::measure::DiscretizedMeasure;

    fn solver(field: HerglotzFieldBF) -> EvolutionSolver {
        EvolutionSolver::with_defaults(Arc::new(field))
    }

    fn jump_field(x: f64) -> HerglotzFieldBF {
        HerglotzFieldBF::new(
            LevyFamily::homogeneous(LevySegment::new(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(x, 1.0).unwrap()))
                .unwrap(),
        )
    }

    #[test]
    fn evolve_examples() {
        let s = solver(HerglotzFieldBF::feller(0.0, 1.0).unwrap());
        let z = Complex64::new(0.3, 0.8);
        assert_eq!(s.evolve_point(z, 0.7, 0.7).unwrap(), z);
        assert!((s.evolve_real(1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-8);
        let s = solver(HerglotzFieldBF::feller(1.0, 1.0).unwrap());
        let want = feller_semigroup(1.0, 1.0, 1.0).unwrap().eval_real(1.0).unwrap();
        assert!((s.evolve_real(1.0, 0.0, 1.0).unwrap() - want).abs() < 1e-8);
        assert!((want - 0.2253996735605641).abs() < 1e-15);
    }

    #[test]
    fn complex_arguments_follow_closed_form() {
        let s = solver(HerglotzFieldBF::feller(0.5, 2.0).unwrap());
        let v = feller_semigroup(0.5, 2.0, 1.3).unwrap();
        let z = Complex64::new(0.4, -2.0);
        assert!((s.evolve_point(z, 0.2, 1.5).unwrap() - v.eval(z).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn composition_residual_examples() {
        let probes: Vec<Complex64> = [0.1, 1.0, 10.0].iter().map(|&x| real(x)).collect();
        let s = solver(HerglotzFieldBF::feller(0.0, 1.0).unwrap());
        assert_eq!(s.composition_residual(0.5, 0.5, 0.5, &probes).unwrap(), 0.0);
        assert!(s.composition_residual(0.0, 0.5, 1.0, &probes).unwrap() <= 1e-7);
        let s = solver(jump_field(1.0));
        assert!(s.composition_residual(0.0, 0.5, 1.0, &probes).unwrap() <= 1e-7);
    }

    #[test]
    fn derivative_at_zero_examples() {
        let s = solver(HerglotzFieldBF::feller(1.0, 1.0).unwrap());
        assert_eq!(s.derivative_at_zero(0.4, 0.4).unwrap(), 1.0);
        assert!((s.derivative_at_zero(0.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let two = HerglotzFieldBF::new(
            LevyFamily::new(
                Breakpoints::new(vec![0.0, 1.0]).unwrap(),
                vec![LevySegment::quadratic(1.0, 1.0), LevySegment::quadratic(2.0, 1.0)],
            )
            .unwrap(),
        );
        let s = solver(two);
        assert!((s.derivative_at_zero(0.0, 2.0).unwrap() - (-3.0f64).exp()).abs() < 1e-15);
        let killed = HerglotzFieldBF::new(
            LevyFamily::homogeneous(LevySegment::new(1.0, 0.0, 0.0, DiscretizedMeasure::empty())).unwrap(),
        );
        assert!(matches!(solver(killed).derivative_at_zero(0.0, 1.0), Err(Error::FiniteMean(_))));
    }

    #[test]
    fn derivative_at_infinity_examples() {
        let fam = |d: f64| {
            BrfpInfFamily::new(
                Breakpoints::single(),
                vec![BrfpInfSegment { q: 0.0, d, jumps: DiscretizedMeasure::dirac(1.0, 1.0).unwrap() }],
            )
            .unwrap()
        };
        assert_eq!(derivative_at_infinity(&fam(-1.0), 0.3, 0.3).unwrap(), 1.0);
        assert_eq!(derivative_at_infinity(&fam(0.0), 0.0, 1.0).unwrap(), 1.0);
        assert!((derivative_at_infinity(&fam(-1.0), 0.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn limit_at_infinity_examples() {
        let s = solver(HerglotzFieldBF::feller(0.0, 1.0).unwrap());
        let lim = s.evolve_limit_at_infinity(0.0, 1.0).unwrap();
        assert!((lim.value() - 1.0).abs() < 1e-6, "{lim:?}");
        let drift = solver(HerglotzFieldBF::new(LevyFamily::homogeneous(LevySegment::quadratic(0.7, 0.0)).unwrap()));
        assert_eq!(drift.evolve_limit_at_infinity(0.0, 1.0).unwrap(), LadderLimit::Diverged);
        assert_eq!(solver(jump_field(1.0)).evolve_limit_at_infinity(0.0, 1.0).unwrap(), LadderLimit::Diverged);
    }

    #[test]
    fn pure_killing_value_at_zero() {
        let killed = solver(HerglotzFieldBF::new(
            LevyFamily::homogeneous(LevySegment::new(1.0, 0.0, 0.0, DiscretizedMeasure::empty())).unwrap(),
        ));
        assert!((killed.value_at_zero(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = solver(HerglotzFieldBF::feller(0.0, 1.0).unwrap());
        assert!(matches!(s.evolve_point(real(-1.0), 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(s.evolve_point(real(1.0), 1.0, 0.0), Err(Error::Domain(_))));
    }
}
