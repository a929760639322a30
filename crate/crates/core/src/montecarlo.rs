//! Exact path simulation, used as an independent check on the analytics.
//!
//! Discrete-state paths use population-level exponential clocks, constant on
//! each segment. An event picks `n` offspring with probability `α(n)/λ` or,
//! with probability `q/λ`, sends the whole path to `∞`. Continuous-state
//! paths are restricted to quadratic mechanisms, where each segment has the
//! exact Poisson–Gamma transition
//! `Z' = Σ_{i ≤ N} E_i`, `N ~ Poisson(Z e^{-aΔ}/κ)`, `E_i ~ Exp(mean κ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::feller_kappa;
use crate::error::{Error, Result};
use crate::field::{Breakpoints, HerglotzFieldBF};
use crate::pgf::GeneratingFamily;

/// Environment variable capping the simulation thread count.
pub const THREADS_ENV: &str = "LOEWNER_BRANCH_THREADS";
pub const DEFAULT_POPULATION_CAP: u64 = 1 << 40;
pub const DEFAULT_MULTIPLIER: f64 = 3.0;

/// Master seed; path `i` draws from ChaCha8 stream `i` of that seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedPlan {
    pub master: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        SeedPlan { master }
    }

    pub fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(path);
        rng
    }
}

fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Runs `f(0..paths)` in parallel and returns results in path order.
fn fan_out<T: Send, F: Fn(u64) -> T + Sync + Send>(paths: usize, f: F) -> Vec<T> {
    let run = || (0..paths as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match thread_limit() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    pub multiplier: f64,
}

impl MCEstimate {
    /// Whether `value` lies within `multiplier` standard errors.
    pub fn covers(&self, value: f64) -> bool {
        let diff = (self.estimate - value).abs();
        if self.std_error == 0.0 {
            return diff <= 1e-12 * value.abs().max(1.0);
        }
        diff <= self.multiplier * self.std_error
    }

    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value) / self.std_error
    }
}

/// Sample mean with standard error `sd / √n`.
pub fn estimate_mean(values: &[f64]) -> MCEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    MCEstimate { estimate: mean, std_error: (var / n as f64).sqrt(), paths: n, multiplier: DEFAULT_MULTIPLIER }
}

/// Unbiased sample variance; its standard error comes from the fourth
/// central moment, `Var(s²) ≈ (m₄ - (n-3)/(n-1) s⁴) / n`.
pub fn estimate_variance(values: &[f64]) -> MCEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let s2 = m2 * n / (n - 1.0);
    let var_s2 = ((m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0);
    MCEstimate { estimate: s2, std_error: var_s2.sqrt(), paths: values.len(), multiplier: DEFAULT_MULTIPLIER }
}

/// Empirical `E[e^{-θ Z}]`.
pub fn estimate_laplace(values: &[f64], theta: f64) -> MCEstimate {
    let t: Vec<f64> = values.iter().map(|z| (-theta * z).exp()).collect();
    estimate_mean(&t)
}

/// Empirical `P[Z = 0]`.
pub fn estimate_zero(values: &[f64]) -> MCEstimate {
    let t: Vec<f64> = values.iter().map(|&z| if z == 0.0 { 1.0 } else { 0.0 }).collect();
    estimate_mean(&t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteState {
    Finite(u64),
    Infinite,
    /// Population passed the cap; the path is flagged and counts toward the defect.
    Capped,
}

impl DiscreteState {
    pub fn pgf_term(self, z: f64) -> f64 {
        match self {
            DiscreteState::Finite(n) => z.powf(n as f64),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePath {
    pub event_times: Vec<f64>,
    /// State after each event, preceded by the initial state.
    pub states: Vec<DiscreteState>,
}

impl DiscretePath {
    pub fn final_state(&self) -> DiscreteState {
        *self.states.last().expect("path has an initial state")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSample {
    pub states: Vec<DiscreteState>,
}

impl DiscreteSample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capped(&self) -> usize {
        self.states.iter().filter(|s| **s == DiscreteState::Capped).count()
    }

    /// Fraction of paths at `∞` or over the cap.
    pub fn defect(&self) -> f64 {
        let lost = self.states.iter().filter(|s| !matches!(s, DiscreteState::Finite(_))).count();
        lost as f64 / self.states.len() as f64
    }

    pub fn ensure_uncapped(&self, cap: u64) -> Result<()> {
        match self.capped() {
            0 => Ok(()),
            paths => Err(Error::ExplosionCap { paths, cap }),
        }
    }

    /// Finite final sizes as floats (absorbed and capped paths dropped).
    pub fn finite_values(&self) -> Vec<f64> {
        self.states
            .iter()
            .filter_map(|s| match s {
                DiscreteState::Finite(n) => Some(*n as f64),
                _ => None,
            })
            .collect()
    }

    /// CSV with columns `path_id,final_state,absorbed_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path_id,final_state,absorbed_flag\n");
        for (i, s) in self.states.iter().enumerate() {
            let (state, flag) = match s {
                DiscreteState::Finite(0) => ("0".to_string(), "zero"),
                DiscreteState::Finite(n) => (n.to_string(), "none"),
                DiscreteState::Infinite => ("inf".to_string(), "infinity"),
                DiscreteState::Capped => ("inf".to_string(), "capped"),
            };
            out.push_str(&format!("{i},{state},{flag}\n"));
        }
        out
    }
}

/// Per-segment event tables: total rate and cumulative channel weights.
struct EventTable {
    rate: f64,
    q: f64,
    offspring: Vec<(u64, f64)>,
}

fn event_tables(gf: &GeneratingFamily) -> Vec<EventTable> {
    gf.segments()
        .iter()
        .map(|p| {
            let mut acc = p.q();
            let offspring = p
                .offspring()
                .map(|(n, w)| {
                    acc += w;
                    (n as u64, acc)
                })
                .collect();
            EventTable { rate: p.total_rate(), q: p.q(), offspring }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_discrete<R: Rng>(
    gf: &GeneratingFamily,
    tables: &[EventTable],
    n0: u64,
    s: f64,
    t: f64,
    cap: u64,
    rng: &mut R,
    mut record: impl FnMut(f64, DiscreteState),
) -> DiscreteState {
    let mut n = n0;
    for piece in gf.breakpoints().pieces(s, t) {
        let table = &tables[piece.index];
        let mut now = piece.lo;
        while n > 0 && table.rate > 0.0 {
            let wait: f64 = Exp1.sample(rng);
            now += wait / (n as f64 * table.rate);
            if now >= piece.hi {
                break;
            }
            let u = rng.random::<f64>() * table.rate;
            if u < table.q {
                record(now, DiscreteState::Infinite);
                return DiscreteState::Infinite;
            }
            let k = table.offspring.iter().find(|&&(_, c)| u < c).or(table.offspring.last()).map_or(1, |&(k, _)| k);
            n = n - 1 + k;
            if n > cap {
                record(now, DiscreteState::Capped);
                return DiscreteState::Capped;
            }
            record(now, DiscreteState::Finite(n));
        }
    }
    DiscreteState::Finite(n)
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= s && t.is_finite()) {
        return Err(Error::Domain(format!("need 0 <= s <= t < inf, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// One recorded path of the discrete process.
pub fn simulate_discrete_path(
    gf: &GeneratingFamily,
    n0: u64,
    s: f64,
    t: f64,
    plan: SeedPlan,
    path: u64,
    cap: u64,
) -> Result<DiscretePath> {
    check_times(s, t)?;
    let tables = event_tables(gf);
    let mut rng = plan.rng(path);
    let mut out = DiscretePath { event_times: Vec::new(), states: vec![DiscreteState::Finite(n0)] };
    run_discrete(gf, &tables, n0, s, t, cap, &mut rng, |time, state| {
        out.event_times.push(time);
        out.states.push(state);
    });
    Ok(out)
}

/// Final states `N_t` of `paths` independent paths started from `N_s = n0`.
pub fn simulate_discrete(
    gf: &GeneratingFamily,
    n0: u64,
    s: f64,
    t: f64,
    plan: SeedPlan,
    paths: usize,
    cap: u64,
) -> Result<DiscreteSample> {
    check_times(s, t)?;
    if paths == 0 {
        return Err(Error::Parameter("path count must be positive".into()));
    }
    let tables = event_tables(gf);
    let states = fan_out(paths, |i| {
        let mut rng = plan.rng(i);
        run_discrete(gf, &tables, n0, s, t, cap, &mut rng, |_, _| {})
    });
    Ok(DiscreteSample { states })
}

/// Empirical `E[z^{N_t} 1_{N_t < ∞}]`.
pub fn estimate_pgf(sample: &DiscreteSample, z: f64) -> Result<MCEstimate> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("z = {z} must lie in [0, 1)")));
    }
    let terms: Vec<f64> = sample.states.iter().map(|s| s.pgf_term(z)).collect();
    Ok(estimate_mean(&terms))
}

/// Step functions `a, b` of a quadratic mechanism `a ζ + b ζ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FellerSchedule {
    breakpoints: Breakpoints,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FellerSchedule {
    pub fn new(breakpoints: Breakpoints, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != breakpoints.len() || b.len() != breakpoints.len() {
            return Err(Error::Parameter("a and b need one value per segment".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) || b.iter().any(|&v| v < 0.0) {
            return Err(Error::Parameter("a must be finite and b finite and non-negative".into()));
        }
        Ok(FellerSchedule { breakpoints, a, b })
    }

    pub fn from_field(field: &HerglotzFieldBF) -> Result<Self> {
        if !field.is_quadratic() {
            return Err(Error::Parameter(
                "exact continuous-state sampling needs q = 0 and no jumps on every segment".into(),
            ));
        }
        Self::new(
            field.breakpoints().clone(),
            field.segments().iter().map(|s| s.a).collect(),
            field.segments().iter().map(|s| s.b).collect(),
        )
    }

    fn step<R: Rng>(&self, z: f64, s: f64, t: f64, rng: &mut R) -> f64 {
        let mut z = z;
        for piece in self.breakpoints.pieces(s, t) {
            if z == 0.0 {
                break;
            }
            let (a, b, dt) = (self.a[piece.index], self.b[piece.index], piece.len());
            let c = (-a * dt).exp();
            if b == 0.0 {
                z *= c;
                continue;
            }
            let kappa = feller_kappa(a, b, dt);
            let n: f64 = Poisson::new(z * c / kappa).map_or(0.0, |p| p.sample(rng));
            z = if n == 0.0 { 0.0 } else { Gamma::new(n, kappa).expect("positive shape and scale").sample(rng) };
        }
        z
    }
}

/// Exact samples of `Z_t` given `Z_s = x`.
pub fn simulate_feller(
    schedule: &FellerSchedule,
    x: f64,
    s: f64,
    t: f64,
    plan: SeedPlan,
    paths: usize,
) -> Result<Vec<f64>> {
    check_times(s, t)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("initial state x = {x} must be finite and non-negative")));
    }
    if paths == 0 {
        return Err(Error::Parameter("path count must be positive".into()));
    }
    Ok(fan_out(paths, |i| {
        let mut rng = plan.rng(i);
        schedule.step(x, s, t, &mut rng)
    }))
}

/// CSV with columns `path_id,final_state,absorbed_flag` for continuous samples.
pub fn feller_csv(values: &[f64]) -> String {
    let mut out = String::from("path_id,final_state,absorbed_flag\n");
    for (i, v) in values.iter().enumerate() {
        let flag = if *v == 0.0 { "zero" } else { "none" };
        out.push_str(&format!("{i},{v:e},{flag}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::GeneratingPair;

    fn family(q: f64, alpha: &[(u32, f64)]) -> GeneratingFamily {
        GeneratingFamily::homogeneous(GeneratingPair::new(q, alpha.iter().copied()).unwrap())
    }

    #[test]
    fn frozen_family_is_deterministic() {
        let gf = family(0.0, &[]);
        let sample = simulate_discrete(&gf, 3, 0.0, 2.0, SeedPlan::new(1), 100, DEFAULT_POPULATION_CAP).unwrap();
        assert!(sample.states.iter().all(|&s| s == DiscreteState::Finite(3)));
        let est = estimate_pgf(&sample, 0.4).unwrap();
        assert!((est.estimate - 0.064).abs() < 1e-15);
        assert!(est.std_error < 1e-15);
    }

    #[test]
    fn reproducible_from_seed() {
        let gf = family(0.0, &[(0, 1.0), (2, 1.0)]);
        let a = simulate_discrete(&gf, 1, 0.0, 1.0, SeedPlan::new(7), 500, DEFAULT_POPULATION_CAP).unwrap();
        let b = simulate_discrete(&gf, 1, 0.0, 1.0, SeedPlan::new(7), 500, DEFAULT_POPULATION_CAP).unwrap();
        let c = simulate_discrete(&gf, 1, 0.0, 1.0, SeedPlan::new(8), 500, DEFAULT_POPULATION_CAP).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn absorbing_states_are_final() {
        let gf = family(0.3, &[(0, 1.0), (2, 1.2), (3, 0.2)]);
        for i in 0..200 {
            let p = simulate_discrete_path(&gf, 2, 0.0, 3.0, SeedPlan::new(3), i, DEFAULT_POPULATION_CAP).unwrap();
            if let Some(pos) =
                p.states.iter().position(|s| matches!(s, DiscreteState::Finite(0) | DiscreteState::Infinite))
            {
                assert_eq!(pos, p.states.len() - 1, "{p:?}");
            }
        }
    }

    #[test]
    fn q_channel_sends_path_to_infinity() {
        let gf = family(2.0, &[]);
        let sample = simulate_discrete(&gf, 1, 0.0, 1.0, SeedPlan::new(5), 20_000, DEFAULT_POPULATION_CAP).unwrap();
        let est = estimate_pgf(&sample, 0.0 + 1e-300).unwrap();
        assert!(est.estimate < 1e-200);
        let survive = 1.0 - sample.defect();
        assert!((survive - (-2.0f64).exp()).abs() < 4.0 * ((-2.0f64).exp() / 20_000.0).sqrt());
    }

    #[test]
    fn population_cap_flags_paths() {
        let gf = family(0.0, &[(2, 5.0)]);
        let sample = simulate_discrete(&gf, 1, 0.0, 3.0, SeedPlan::new(2), 50, 20).unwrap();
        assert!(sample.capped() > 0);
        assert!(matches!(sample.ensure_uncapped(20), Err(Error::ExplosionCap { .. })));
        assert!(sample.defect() > 0.0);
    }

    #[test]
    fn drift_only_feller_is_deterministic() {
        let sched = FellerSchedule::from_field(&HerglotzFieldBF::feller(1.0, 0.0).unwrap()).unwrap();
        let z = simulate_feller(&sched, 1.0, 0.0, 1.0, SeedPlan::new(0), 10).unwrap();
        assert!(z.iter().all(|&v| (v - (-1.0f64).exp()).abs() < 1e-15));
        let zero = simulate_feller(&sched, 0.0, 0.0, 1.0, SeedPlan::new(0), 10).unwrap();
        assert!(estimate_laplace(&zero, 1.0).estimate == 1.0);
    }

    #[test]
    fn variance_estimator_on_known_sample() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let e = estimate_variance(&v);
        assert!((e.estimate - 5.0 / 3.0).abs() < 1e-15);
        let m = estimate_mean(&v);
        assert!((m.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_columns() {
        let s = DiscreteSample {
            states: vec![DiscreteState::Finite(0), DiscreteState::Finite(4), DiscreteState::Infinite],
        };
        assert_eq!(s.to_csv(), "path_id,final_state,absorbed_flag\n0,0,zero\n1,4,none\n2,inf,infinity\n");
    }
}
