//! Branching-process quantities read off the Laplace exponents `v_{s,t}`:
//! `E^{(s,x)}[e^{-θ Z_t}] = exp(-x v_{s,t}(θ))`.

use std::sync::Arc;

use serde::Serialize;

use crate::bernstein::LadderLimit;
use crate::error::{Error, Result};
use crate::evolution::EvolutionSolver;
use crate::field::HerglotzFieldBF;
use crate::ode::StepSettings;
use crate::util::ser_f64;

/// Threshold on `v_{0,t}(0)` for the numeric conservativeness check.
pub const CONSERVATIVE_TOLERANCE: f64 = 1e-9;
/// Relative slack in `v_{s,t}(θ) ≥ θ` and in the comparison bound.
pub const COMPARISON_SLACK: f64 = 1e-8;
/// Probes for the comparison bound `v ≤ θ / (1 + b(s,t) θ)`.
pub const COMPARISON_PROBES: [f64; 3] = [1.0, 10.0, 1e3];

#[derive(Debug, Clone)]
pub struct CSBPModel {
    field: Arc<HerglotzFieldBF>,
    solver: EvolutionSolver,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativeReport {
    pub conservative: bool,
    /// `grey` (single segment), `finite_mean`, or `numeric`.
    pub method: &'static str,
    pub max_value_at_zero: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    CertifiedExtinct,
    CertifiedNever,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionPoint {
    pub t: f64,
    /// `v_{s,t}(∞)`; infinite when the ladder diverges.
    #[serde(serialize_with = "ser_f64")]
    pub v_infinity: f64,
    pub ladder_converged: bool,
    pub probability: f64,
    /// `1 / b(s,t)` when the comparison bound applies.
    #[serde(serialize_with = "crate::util::ser_opt_f64")]
    pub comparison_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub s: f64,
    pub x: f64,
    pub points: Vec<ExtinctionPoint>,
    /// Probability at the last grid time.
    pub horizon_estimate: f64,
    /// Whether the last two grid probabilities agree to `1e-6`.
    pub horizon_converged: bool,
    /// `P[T₀ < ∞]`, reported only under a certificate.
    #[serde(serialize_with = "crate::util::ser_opt_f64")]
    pub limit: Option<f64>,
    pub certificate: Certificate,
    pub witness: String,
    /// Whether `v ≤ θ/(1 + b θ)` held at every probe (certified_extinct only).
    pub comparison_verified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub non_decreasing: bool,
    /// `min (v_{s,t}(θ) - θ) / θ` over the sampled `(s, t, θ)`.
    pub worst_relative_margin: f64,
    /// `(s, t, v'_{s,t}(∞))`, present when the field has a BRFP-∞ form.
    pub ess_inf_ratios: Option<Vec<(f64, f64, f64)>>,
}

impl CSBPModel {
    pub fn new(field: Arc<HerglotzFieldBF>, settings: StepSettings) -> Result<Self> {
        let solver = EvolutionSolver::new(field.clone(), settings)?;
        Ok(CSBPModel { field, solver })
    }

    pub fn with_defaults(field: HerglotzFieldBF) -> Self {
        let field = Arc::new(field);
        CSBPModel { solver: EvolutionSolver::with_defaults(field.clone()), field }
    }

    pub fn field(&self) -> &HerglotzFieldBF {
        &self.field
    }

    pub fn solver(&self) -> &EvolutionSolver {
        &self.solver
    }

    fn check(s: f64, t: f64, x: f64) -> Result<()> {
        if !(s >= 0.0 && t >= s) {
            return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("initial state x = {x} must be finite and non-negative")));
        }
        Ok(())
    }

    /// `exp(-x v_{s,t}(θ))`.
    pub fn transition_laplace(&self, s: f64, t: f64, x: f64, theta: f64) -> Result<f64> {
        Self::check(s, t, x)?;
        if !(theta > 0.0) {
            return Err(Error::Domain(format!("θ = {theta} must be positive")));
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        Ok((-x * self.solver.evolve_real(theta, s, t)?).exp())
    }

    /// `P^{(s,x)}[Z_t < ∞] = exp(-x v_{s,t}(0))`.
    pub fn survival_probability(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        Self::check(s, t, x)?;
        if x == 0.0 {
            return Ok(1.0);
        }
        Ok((-x * self.solver.value_at_zero(s, t)?).exp())
    }

    pub fn conservative(&self, horizon: f64) -> Result<ConservativeReport> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon {horizon} must be positive and finite")));
        }
        if self.field.segments().len() == 1 {
            // ∫_0^ε dθ/|φ(θ)| diverges iff φ(0) = 0: every discretized measure
            // has all moments, so φ is C² at 0.
            let q = self.field.segments()[0].q;
            return Ok(ConservativeReport {
                conservative: q == 0.0,
                method: "grey",
                max_value_at_zero: if q == 0.0 { 0.0 } else { self.solver.value_at_zero(0.0, horizon)? },
            });
        }
        if self.field.finite_mean_check_on(0.0, horizon).finite_mean {
            return Ok(ConservativeReport { conservative: true, method: "finite_mean", max_value_at_zero: 0.0 });
        }
        let mut worst = 0.0f64;
        for k in 1..=8 {
            let t = horizon * k as f64 / 8.0;
            worst = worst.max(self.solver.value_at_zero(0.0, t)?);
        }
        Ok(ConservativeReport {
            conservative: worst <= CONSERVATIVE_TOLERANCE,
            method: "numeric",
            max_value_at_zero: worst,
        })
    }

    /// `E^{(s,x)}[Z_t] = x exp(-∫_s^t φ'(0, r) dr)`.
    pub fn mean(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        Self::check(s, t, x)?;
        Ok(x * self.solver.derivative_at_zero(s, t)?)
    }

    /// `Var = E[Z_t] ∫_s^t φ''(0, r) v'_{r,t}(0) dr`, integrated exactly per segment.
    pub fn variance(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        let mean = self.mean(s, t, x)?;
        let pieces = self.field.breakpoints().pieces(s, t);
        let mut integral = 0.0;
        // ∫_{hi}^t φ'(0), accumulated from the right.
        let mut tail = 0.0f64;
        for p in pieces.iter().rev() {
            let bd = self.field.segment_boundary(p.index);
            let c = bd.phi_prime_at_zero;
            let len = p.len();
            let weight = if c == 0.0 { len } else { -(-c * len).exp_m1() / c };
            integral += bd.phi_second_at_zero * (-tail).exp() * weight;
            tail += c * len;
        }
        Ok(mean * integral)
    }

    /// Extinction probabilities `exp(-x v_{s,t}(∞))` on a horizon grid, with
    /// a certificate for the `t → ∞` limit.
    pub fn extinction_report(&self, s: f64, x: f64, horizon: &[f64]) -> Result<ExtinctionReport> {
        Self::check(s, s, x)?;
        if horizon.iter().any(|&t| !(t >= s && t.is_finite())) {
            return Err(Error::Domain(format!("horizon times must be finite and >= s = {s}")));
        }
        let mut grid = horizon.to_vec();
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let dw0 = self.field.as_dw0();
        let tail_b = self.field.segments().last().map_or(0.0, |seg| seg.b);
        let (certificate, witness) = if dw0.is_some() && tail_b > 0.0 {
            (
                Certificate::CertifiedExtinct,
                format!("DW-at-0 form with φ''(∞) = {} on the unbounded last segment", 2.0 * tail_b),
            )
        } else if self.field.as_brfp_inf().is_some() {
            (Certificate::CertifiedNever, "BRFP-at-∞ form (b ≡ 0)".to_string())
        } else {
            (Certificate::Inconclusive, String::new())
        };

        let mut points = Vec::with_capacity(grid.len());
        let mut verified = true;
        for &t in &grid {
            let (v_inf, converged) = match self.solver.evolve_limit_at_infinity(s, t)? {
                LadderLimit::Finite { value, converged, .. } => (value, converged),
                LadderLimit::Diverged => (f64::INFINITY, true),
            };
            let probability = if x == 0.0 { 1.0 } else { (-x * v_inf).exp() };
            let mut bound = None;
            if certificate == Certificate::CertifiedExtinct {
                let b_st = self.field.breakpoints().integrate_step(s, t, |i| self.field.segments()[i].b);
                if b_st > 0.0 {
                    let inv = 1.0 / b_st;
                    verified &= v_inf <= inv * (1.0 + COMPARISON_SLACK);
                    bound = Some(inv);
                }
                for th in COMPARISON_PROBES {
                    let v = self.solver.evolve_real(th, s, t)?;
                    verified &= v <= th / (1.0 + b_st * th) * (1.0 + COMPARISON_SLACK);
                }
            }
            points.push(ExtinctionPoint {
                t,
                v_infinity: v_inf,
                ladder_converged: converged,
                probability,
                comparison_bound: bound,
            });
        }
        let horizon_estimate = points.last().map_or(if x == 0.0 { 1.0 } else { 0.0 }, |p| p.probability);
        let horizon_converged = match points.len() {
            0 => false,
            1 => points[0].probability == 1.0 || points[0].probability == 0.0,
            n => (points[n - 1].probability - points[n - 2].probability).abs() < 1e-6,
        };
        let limit = match certificate {
            Certificate::CertifiedExtinct => Some(1.0),
            Certificate::CertifiedNever => Some(if x == 0.0 { 1.0 } else { 0.0 }),
            Certificate::Inconclusive => None,
        };
        Ok(ExtinctionReport {
            s,
            x,
            points,
            horizon_estimate,
            horizon_converged,
            limit,
            certificate,
            witness,
            comparison_verified: (certificate == Certificate::CertifiedExtinct).then_some(verified),
        })
    }

    /// Checks `v_{s,t}(θ) ≥ θ` on the probe grid for every sampled pair.
    pub fn monotonicity_class(&self, pairs: &[(f64, f64)], thetas: &[f64]) -> Result<MonotonicityReport> {
        let mut worst = f64::INFINITY;
        for &(s, t) in pairs {
            for &th in thetas {
                let v = self.solver.evolve_real(th, s, t)?;
                worst = worst.min((v - th) / th);
            }
        }
        let ess_inf_ratios = match self.field.as_brfp_inf() {
            Some(brfp) => Some(
                pairs
                    .iter()
                    .map(|&(s, t)| Ok((s, t, brfp.derivative_at_infinity(s, t)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(MonotonicityReport {
            non_decreasing: worst >= -COMPARISON_SLACK,
            worst_relative_margin: if worst.is_finite() { worst } else { 0.0 },
            ess_inf_ratios,
        })
    }

    /// View of `(a(t) Z_t)` for a positive step function `a` on the field's breakpoints.
    pub fn rescale_state(&self, scales: &[f64]) -> Result<RescaledModel> {
        if scales.len() != self.field.breakpoints().len() {
            return Err(Error::Parameter(format!(
                "expected {} scale values (one per segment), got {}",
                self.field.breakpoints().len(),
                scales.len()
            )));
        }
        if let Some(a) = scales.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Parameter(format!("scale {a} must be positive and finite")));
        }
        Ok(RescaledModel { model: self.clone(), scales: scales.to_vec() })
    }
}

/// Laplace exponents `v̂_{s,t}(θ) = v_{s,t}(a(t) θ) / a(s)`.
#[derive(Debug, Clone)]
pub struct RescaledModel {
    model: CSBPModel,
    scales: Vec<f64>,
}

impl RescaledModel {
    pub fn scale_at(&self, t: f64) -> f64 {
        self.scales[self.model.field.breakpoints().segment_index(t)]
    }

    pub fn laplace_exponent(&self, s: f64, t: f64, theta: f64) -> Result<f64> {
        let v = self.model.solver.evolve_real(self.scale_at(t) * theta, s, t)?;
        Ok(v / self.scale_at(s))
    }

    pub fn transition_laplace(&self, s: f64, t: f64, x: f64, theta: f64) -> Result<f64> {
        CSBPModel::check(s, t, x)?;
        if x == 0.0 {
            return Ok(1.0);
        }
        Ok((-x * self.laplace_exponent(s, t, theta)?).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Breakpoints, LevyFamily, LevySegment};
    use crate::measure::DiscretizedMeasure;

    fn feller(a: f64, b: f64) -> CSBPModel {
        CSBPModel::with_defaults(HerglotzFieldBF::feller(a, b).unwrap())
    }

    fn yule_lift() -> CSBPModel {
        CSBPModel::with_defaults(HerglotzFieldBF::new(
            LevyFamily::homogeneous(LevySegment::new(0.0, 0.0, 0.0, DiscretizedMeasure::dirac(1.0, 1.0).unwrap()))
                .unwrap(),
        ))
    }

    #[test]
    fn transition_laplace_examples() {
        let m = feller(0.0, 1.0);
        assert_eq!(m.transition_laplace(0.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!((m.transition_laplace(0.0, 1.0, 1.0, 1.0).unwrap() - 0.6065307).abs() < 1e-7);
        assert!((m.transition_laplace(0.5, 0.5, 2.0, 1.5).unwrap() - (-3.0f64).exp()).abs() < 1e-15);
        let a = m.transition_laplace(0.0, 1.0, 0.7, 1.2).unwrap();
        let b = m.transition_laplace(0.0, 1.0, 1.1, 1.2).unwrap();
        let ab = m.transition_laplace(0.0, 1.0, 1.8, 1.2).unwrap();
        assert!((a * b - ab).abs() < 1e-14);
    }

    #[test]
    fn survival_examples() {
        let m = feller(0.3, 1.0);
        for t in [0.5, 1.0, 4.0] {
            assert!((m.survival_probability(0.0, t, 2.0).unwrap() - 1.0).abs() < 1e-12);
        }
        let killed = CSBPModel::with_defaults(HerglotzFieldBF::new(
            LevyFamily::homogeneous(LevySegment::new(1.0, 0.0, 0.0, DiscretizedMeasure::empty())).unwrap(),
        ));
        assert!((killed.survival_probability(0.0, 1.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-10);
        assert_eq!(killed.survival_probability(0.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(!killed.conservative(2.0).unwrap().conservative);
        assert!(m.conservative(2.0).unwrap().conservative);
    }

    #[test]
    fn moment_examples() {
        let m = feller(0.0, 1.0);
        assert!((m.mean(0.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.variance(0.0, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        let m = feller(1.0, 1.0);
        let e = (-1.0f64).exp();
        assert!((m.mean(0.0, 1.0, 1.0).unwrap() - e).abs() < 1e-15);
        assert!((m.variance(0.0, 1.0, 1.0).unwrap() - 2.0 * e * (1.0 - e)).abs() < 1e-14);
        assert!((m.variance(0.0, 1.0, 1.0).unwrap() - 0.4651).abs() < 1e-4);
        assert_eq!(feller(0.8, 0.0).variance(0.0, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn variance_across_breakpoints() {
        let two = CSBPModel::with_defaults(HerglotzFieldBF::new(
            LevyFamily::new(
                Breakpoints::new(vec![0.0, 1.0]).unwrap(),
                vec![LevySegment::quadratic(1.0, 1.0), LevySegment::quadratic(0.0, 0.5)],
            )
            .unwrap(),
        ));
        // Second segment contributes ∫_1^2 1 dr; first contributes ∫_0^1 2 e^{-(1-r)} dr.
        let e = (-1.0f64).exp();
        let want = e * (1.0 + 2.0 * (1.0 - e));
        assert!((two.variance(0.0, 2.0, 1.0).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn extinction_examples() {
        let m = feller(0.0, 1.0);
        let r = m.extinction_report(0.0, 1.0, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.certificate, Certificate::CertifiedExtinct);
        assert_eq!(r.comparison_verified, Some(true));
        for p in &r.points {
            assert!((p.probability - (-1.0 / p.t).exp()).abs() < 1e-6, "{p:?}");
        }
        assert!(r.points.windows(2).all(|w| w[0].probability <= w[1].probability));
        assert_eq!(r.limit, Some(1.0));
        let r = yule_lift().extinction_report(0.0, 1.0, &[1.0]).unwrap();
        assert_eq!(r.certificate, Certificate::CertifiedNever);
        assert_eq!(r.points[0].probability, 0.0);
        let r = m.extinction_report(0.0, 0.0, &[1.0, 2.0]).unwrap();
        assert!(r.points.iter().all(|p| p.probability == 1.0));
    }

    #[test]
    fn monotonicity_examples() {
        let pairs = [(0.0, 1.0), (0.5, 2.0)];
        let r = yule_lift().monotonicity_class(&pairs, &[0.1, 1.0, 10.0]).unwrap();
        assert!(r.non_decreasing);
        assert!(r.ess_inf_ratios.unwrap().iter().all(|&(_, _, v)| v == 1.0));
        let r = feller(0.0, 1.0).monotonicity_class(&pairs, &[0.1, 1.0, 10.0]).unwrap();
        assert!(!r.non_decreasing);
        assert!(r.ess_inf_ratios.is_none());
        let r = feller(0.0, 1.0).monotonicity_class(&[(1.0, 1.0)], &[0.1, 1.0]).unwrap();
        assert!(r.non_decreasing);
        assert_eq!(r.worst_relative_margin, 0.0);
    }

    #[test]
    fn rescale_examples() {
        let m = feller(0.0, 1.0);
        let id = m.rescale_state(&[1.0]).unwrap();
        assert_eq!(id.laplace_exponent(0.0, 1.0, 1.0).unwrap(), m.solver().evolve_real(1.0, 0.0, 1.0).unwrap());
        let two = m.rescale_state(&[2.0]).unwrap();
        assert!((two.laplace_exponent(0.0, 1.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!((two.laplace_exponent(0.7, 0.7, 1.3).unwrap() - 1.3).abs() < 1e-15);
        assert!(matches!(m.rescale_state(&[0.0]), Err(Error::Parameter(_))));
    }
}
