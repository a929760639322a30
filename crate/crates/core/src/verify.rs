//! Built-in cross-module property suite behind `loewner-branch verify`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bernstein::{feller_semigroup, real, PositiveMap};
use crate::error::Result;
use crate::evolution::EvolutionSolver;
use crate::field::{Breakpoints, HerglotzFieldBF, LevyFamily, LevySegment};
use crate::measure::DiscretizedMeasure;
use crate::montecarlo::{estimate_mean, estimate_pgf, simulate_discrete, simulate_feller, FellerSchedule, SeedPlan};
use crate::ode::StepSettings;
use crate::pgf::{
    evolve_pgf, extract_coefficients, mean_discrete, round_trip_check, GeneratingFamily, GeneratingPair, DEFAULT_ORDER,
    DEFAULT_RADIUS,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub quick: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,value,threshold,passed\n");
        for c in &self.checks {
            out.push_str(&format!("{},{:e},{:e},{}\n", c.name, c.value, c.threshold, c.passed));
        }
        out
    }
}

/// Step field on `[0, t₁), [t₁, t₂), [t₂, ∞)` with `q, a, b ∈ [0, 2]` and
/// one to three atoms located in `[0.1, 5]` with masses in `[0.1, 2]`.
pub fn random_levy_family<R: Rng>(rng: &mut R) -> HerglotzFieldBF {
    let t1 = rng.random_range(0.2..1.0);
    let t2 = t1 + rng.random_range(0.2..1.0);
    let segments = (0..3)
        .map(|_| {
            let atoms: Vec<(f64, f64)> = (0..rng.random_range(1..=3))
                .map(|_| (rng.random_range(0.1..5.0), rng.random_range(0.1..2.0)))
                .collect();
            LevySegment::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                DiscretizedMeasure::from_atoms(atoms).expect("valid atoms"),
            )
        })
        .collect();
    let bp = Breakpoints::new(vec![0.0, t1, t2]).expect("increasing breakpoints");
    HerglotzFieldBF::new(LevyFamily::new(bp, segments).expect("valid family"))
}

/// Sorted random triple `s ≤ t ≤ u` in `[0, 3]`.
pub fn random_triple<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let mut v = [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
    v.sort_by(f64::total_cmp);
    (v[0], v[1], v[2])
}

fn check(name: &str, value: f64, threshold: f64) -> Check {
    Check { name: name.to_string(), value, threshold, passed: value <= threshold }
}

/// Runs the suite. `quick` shrinks path counts and sample sizes.
pub fn run(quick: bool) -> Result<VerifyReport> {
    let settings = StepSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for a in [0.0, 1.0, 2.0] {
        let solver = EvolutionSolver::with_defaults(Arc::new(HerglotzFieldBF::feller(a, 1.0)?));
        for (s, t) in [(0.0, 1.0), (0.3, 2.0), (1.0, 4.0)] {
            let closed = feller_semigroup(a, 1.0, t - s)?;
            for th in [0.1, 1.0, 10.0] {
                worst = worst.max((solver.evolve_real(th, s, t)? - closed.eval_real(th)?).abs());
            }
        }
    }
    checks.push(check("feller_closed_form", worst, 1e-8));

    let (fields, samples) = if quick { (3, 5) } else { (10, 20) };
    let mut worst = 0.0f64;
    for _ in 0..fields {
        let solver = EvolutionSolver::new(Arc::new(random_levy_family(&mut rng)), settings)?;
        for _ in 0..samples {
            let (s, t, u) = random_triple(&mut rng);
            let th = 10f64.powf(rng.random_range(-1.0..1.0));
            worst = worst.max(solver.composition_residual(s, t, u, &[real(th)])?);
        }
    }
    checks.push(check("composition_residual", worst, 1e-7));

    let yule = GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(2, 1.0)])?);
    let critical = GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(0, 1.0), (2, 1.0)])?);
    let rt = round_trip_check(&yule, &settings, 0.0, 1.0, &[0.5, 1.0, 2.0])?.max(round_trip_check(
        &yule,
        &settings,
        0.3,
        1.7,
        &[0.5, 1.0, 2.0],
    )?);
    checks.push(check("yule_round_trip", rt, 1e-7));

    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        worst = worst.max((evolve_pgf(&critical, &settings, real(0.0), 0.0, t)?.re - t / (1.0 + t)).abs());
    }
    checks.push(check("critical_binary_closed_form", worst, 1e-8));

    for (name, gf) in [("yule", &yule), ("critical_binary", &critical)] {
        let c = extract_coefficients(gf, &settings, 0.0, 1.0, DEFAULT_ORDER, DEFAULT_RADIUS)?;
        let negative = c.coefficients.iter().fold(0.0f64, |m, &p| m.max(-p));
        checks.push(check(&format!("{name}_coefficients_nonnegative"), negative, 1e-10));
        checks.push(check(&format!("{name}_coefficients_total"), c.total() - 1.0, 1e-10));
        let gap = (c.mean() - mean_discrete(gf, 0.0, 1.0)?).abs();
        checks.push(check(&format!("{name}_mean_vs_coefficients"), gap, c.aliasing_bound + 1e-6));
    }

    let paths = if quick { 20_000 } else { 100_000 };
    let sample = simulate_discrete(&critical, 1, 0.0, 1.0, SeedPlan::new(11), paths, u64::MAX)?;
    let est = estimate_pgf(&sample, 0.0)?;
    checks.push(check("mc_critical_extinction_sigma", est.z_score(0.5).abs(), est.multiplier));

    let schedule = FellerSchedule::from_field(&HerglotzFieldBF::feller(0.0, 1.0)?)?;
    let z = simulate_feller(&schedule, 1.0, 0.0, 1.0, SeedPlan::new(12), paths)?;
    let est = estimate_mean(&z);
    checks.push(check("mc_feller_mean_sigma", est.z_score(1.0).abs(), est.multiplier));

    Ok(VerifyReport { quick, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_family_respects_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_levy_family(&mut rng);
            assert_eq!(f.breakpoints().len(), 3);
            for s in f.segments() {
                assert!((0.0..2.0).contains(&s.q) && (0.0..2.0).contains(&s.a) && (0.0..2.0).contains(&s.b));
                assert!(s.jumps.atoms().iter().all(|a| (0.1..5.0).contains(&a.location)));
            }
        }
    }

    #[test]
    fn quick_suite_passes() {
        let r = run(true).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
    }
}
