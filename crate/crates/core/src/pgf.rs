//! Discrete-state side: generating families, the PGF field
//! `Φ(z, t) = q_t z + Σ α_t(n)(z - zⁿ)`, and the backward flow for `F_{s,t}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bernstein::{ladder_limit, real, LadderLimit};
use crate::error::{Error, Result};
use crate::evolution::EvolutionSolver;
use crate::field::{Breakpoints, HerglotzFieldBF};
use crate::ode::{backward_flow, PiecewiseField, StepSettings};

/// Default truncation order for coefficient extraction.
pub const DEFAULT_ORDER: usize = 60;
/// Default sampling radius. Coefficient `n` is recovered as `c_n / rⁿ`, so
/// round-off grows like `r^{-N}`; `0.9` keeps it below `1e3` at `N = 60`.
pub const DEFAULT_RADIUS: f64 = 0.9;
/// Largest tolerated aliasing bound before [`Error::Truncation`].
pub const DEFAULT_ALIAS_TOLERANCE: f64 = 1e-10;
/// Numeric threshold for `F_{s,t}(0) = 0` in the embeddability test.
pub const EMBED_TOLERANCE: f64 = 1e-12;

/// Per-segment generating pair `(q, α)` with `α` supported on `ℕ₀ ∖ {1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratingPair {
    q: f64,
    alpha: BTreeMap<u32, f64>,
}

impl GeneratingPair {
    pub fn new<I: IntoIterator<Item = (u32, f64)>>(q: f64, alpha: I) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Parameter(format!("q = {q} must be finite and non-negative")));
        }
        let mut map = BTreeMap::new();
        for (n, w) in alpha {
            if n == 1 {
                return Err(Error::Parameter("α(1) is not part of a generating pair".into()));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("α({n}) = {w} must be finite and non-negative")));
            }
            if w > 0.0 {
                *map.entry(n).or_insert(0.0) += w;
            }
        }
        Ok(GeneratingPair { q, alpha: map })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self, n: u32) -> f64 {
        self.alpha.get(&n).copied().unwrap_or(0.0)
    }

    /// `(n, α(n))` for the non-zero weights, ascending in `n`.
    pub fn offspring(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.alpha.iter().map(|(&n, &w)| (n, w))
    }

    /// Total event rate per individual, `q + Σ α(n)`.
    pub fn total_rate(&self) -> f64 {
        self.q + self.alpha.values().sum::<f64>()
    }

    /// `Φ'(1) = q + Σ α(n)(1 - n)`.
    pub fn phi_prime_at_one(&self) -> f64 {
        self.q + self.offspring().map(|(n, w)| w * (1.0 - n as f64)).sum::<f64>()
    }

    pub fn phi(&self, z: Complex64) -> Complex64 {
        self.offspring().fold(self.q * z, |acc, (n, w)| acc + w * (z - z.powu(n)))
    }
}

/// Step family of generating pairs on a breakpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingFamily {
    breakpoints: Breakpoints,
    segments: Vec<GeneratingPair>,
}

impl GeneratingFamily {
    pub fn new(breakpoints: Breakpoints, segments: Vec<GeneratingPair>) -> Result<Self> {
        if segments.len() != breakpoints.len() {
            return Err(Error::Parameter(format!(
                "{} breakpoints need {} generating pairs, got {}",
                breakpoints.len(),
                breakpoints.len(),
                segments.len()
            )));
        }
        Ok(GeneratingFamily { breakpoints, segments })
    }

    pub fn homogeneous(pair: GeneratingPair) -> Self {
        GeneratingFamily { breakpoints: Breakpoints::single(), segments: vec![pair] }
    }

    pub fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[GeneratingPair] {
        &self.segments
    }

    pub fn segment_at(&self, t: f64) -> &GeneratingPair {
        &self.segments[self.breakpoints.segment_index(t)]
    }

    pub fn phi_pgf_eval(&self, z: Complex64, t: f64) -> Result<Complex64> {
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("Φ is evaluated on |z| < 1, got {z}")));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time {t} must be non-negative")));
        }
        Ok(self.segment_at(t).phi(z))
    }

    /// Whether `α(0) = 0` on every segment.
    pub fn death_free(&self) -> bool {
        self.segments.iter().all(|p| p.alpha(0) == 0.0)
    }
}

impl PiecewiseField for GeneratingFamily {
    fn breakpoints(&self) -> &Breakpoints {
        &self.breakpoints
    }

    fn rhs(&self, segment: usize, y: Complex64) -> Result<Complex64> {
        Ok(self.segments[segment].phi(y))
    }

    fn admissible(&self, y: Complex64) -> bool {
        y.norm() < 1.0
    }

    fn domain_name(&self) -> &'static str {
        "the open unit disk"
    }
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= s && t.is_finite()) {
        return Err(Error::Domain(format!("need 0 <= s <= t < inf, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// `F_{s,t}(z)`.
pub fn evolve_pgf(gf: &GeneratingFamily, settings: &StepSettings, z: Complex64, s: f64, t: f64) -> Result<Complex64> {
    Ok(evolve_pgf_many(gf, settings, &[z], s, t)?[0])
}

/// Joint solve of several points with one step sequence.
pub fn evolve_pgf_many(
    gf: &GeneratingFamily,
    settings: &StepSettings,
    zs: &[Complex64],
    s: f64,
    t: f64,
) -> Result<Vec<Complex64>> {
    check_times(s, t)?;
    if let Some(z) = zs.iter().find(|z| !(z.norm() < 1.0)) {
        return Err(Error::Domain(format!("F is evolved on |z| < 1, got {z}")));
    }
    let mut ys = zs.to_vec();
    backward_flow(gf, settings, &mut ys, s, t, None)?;
    Ok(ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PGFCoefficients {
    pub order: usize,
    pub radius: f64,
    pub samples: usize,
    /// `p_0 … p_N`
    pub coefficients: Vec<f64>,
    /// `1 - Σ_{n≤N} p_n`: mass at `∞` plus the truncated tail.
    pub defect: f64,
    /// Bound `r^M / (1 - r^M)` on the aliasing error of each `p_n`.
    pub aliasing_bound: f64,
    /// Largest imaginary part discarded from the Fourier coefficients.
    pub imaginary_residual: f64,
}

impl PGFCoefficients {
    pub fn total(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.coefficients.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Upper limit on circle samples; beyond it the request is a [`Error::Truncation`].
pub const MAX_SAMPLES: usize = 1 << 16;

/// Number of circle samples: the smallest power of two `M ≥ 4(N+1)` with
/// aliasing bound `r^M / (1 - r^M)` at most `tolerance`, capped at [`MAX_SAMPLES`].
pub fn sample_count(order: usize, radius: f64, tolerance: f64) -> usize {
    let needed = (tolerance / (1.0 + tolerance)).ln() / radius.ln();
    let m = if needed.is_finite() && needed < MAX_SAMPLES as f64 { needed.ceil() as usize } else { MAX_SAMPLES };
    m.max(4 * (order + 1)).next_power_of_two()
}

fn aliasing_bound(radius: f64, samples: usize) -> f64 {
    let rm = radius.powi(samples as i32);
    rm / (1.0 - rm)
}

/// Taylor coefficients of `F_{s,t}` from an FFT of samples on `|z| = r`.
pub fn extract_coefficients(
    gf: &GeneratingFamily,
    settings: &StepSettings,
    s: f64,
    t: f64,
    order: usize,
    radius: f64,
) -> Result<PGFCoefficients> {
    extract_coefficients_with(gf, settings, s, t, order, radius, DEFAULT_ALIAS_TOLERANCE)
}

pub fn extract_coefficients_with(
    gf: &GeneratingFamily,
    settings: &StepSettings,
    s: f64,
    t: f64,
    order: usize,
    radius: f64,
    alias_tolerance: f64,
) -> Result<PGFCoefficients> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Parameter(format!("radius r = {radius} must lie in (0, 1)")));
    }
    if order == 0 {
        return Err(Error::Parameter("truncation order N must be at least 1".into()));
    }
    let m = sample_count(order, radius, alias_tolerance);
    let alias = aliasing_bound(radius, m);
    if alias > alias_tolerance || m > MAX_SAMPLES {
        return Err(Error::Truncation { bound: alias, tolerance: alias_tolerance });
    }
    let zs: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / m as f64)).collect();
    let mut values = evolve_pgf_many(gf, settings, &zs, s, t)?;
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut values);
    let mut imaginary_residual = 0.0f64;
    let mut scale = 1.0 / m as f64;
    let coefficients: Vec<f64> = values[..=order]
        .iter()
        .map(|c| {
            let v = c * scale;
            scale /= radius;
            imaginary_residual = imaginary_residual.max(v.im.abs());
            v.re
        })
        .collect();
    let defect = 1.0 - coefficients.iter().sum::<f64>();
    Ok(PGFCoefficients { order, radius, samples: m, coefficients, defect, aliasing_bound: alias, imaginary_residual })
}

/// `E[N_t] = exp(-∫_s^t Φ'(1, r) dr)` for `N_s = 1`.
pub fn mean_discrete(gf: &GeneratingFamily, s: f64, t: f64) -> Result<f64> {
    check_times(s, t)?;
    let pieces = gf.breakpoints.pieces(s, t);
    if let Some(p) = pieces.iter().find(|p| gf.segments[p.index].q > 0.0) {
        return Err(Error::FiniteMean(format!(
            "segment {}: q = {} > 0 allows explosion",
            p.index, gf.segments[p.index].q
        )));
    }
    let integral = gf.breakpoints.integrate_step(s, t, |i| gf.segments[i].phi_prime_at_one());
    Ok((-integral).exp())
}

/// `F_{s,t}(1) = P[N_t < ∞]` as the limit along `z = 1 - 10^{-k}`, `k = 1..8`.
pub fn pgf_at_one(gf: &GeneratingFamily, settings: &StepSettings, s: f64, t: f64) -> Result<LadderLimit> {
    check_times(s, t)?;
    let zs: Vec<Complex64> = (1..=8).map(|k| real(1.0 - 10f64.powi(-k))).collect();
    let values: Vec<f64> = evolve_pgf_many(gf, settings, &zs, s, t)?.iter().map(|v| v.re).collect();
    ladder_limit(&values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddabilityVerdict {
    pub embeddable: bool,
    /// `(s, t, F_{s,t}(0))` at the sampled pairs.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Time pairs for the numeric check: consecutive breakpoints, plus one pair
/// running from 0 past the last breakpoint.
fn embedding_pairs(gf: &GeneratingFamily) -> Vec<(f64, f64)> {
    let times = gf.breakpoints.times();
    let mut pairs: Vec<(f64, f64)> = times.windows(2).map(|w| (w[0], w[1])).collect();
    pairs.push((0.0, times[times.len() - 1] + 1.0));
    pairs
}

/// Symbolic `α ≡ 0` at `n = 0` against numeric `F_{s,t}(0) = 0`.
pub fn embeddability_test(gf: &GeneratingFamily, settings: &StepSettings) -> Result<EmbeddabilityVerdict> {
    let symbolic = gf.death_free();
    let mut samples = Vec::new();
    for (s, t) in embedding_pairs(gf) {
        let f0 = evolve_pgf(gf, settings, real(0.0), s, t)?.re;
        samples.push((s, t, f0));
    }
    let numeric = samples.iter().all(|&(_, _, f0)| f0.abs() < EMBED_TOLERANCE);
    if symbolic != numeric {
        return Err(Error::Inconsistency(format!("symbolic check says {symbolic}, numeric F(0) samples {samples:?}")));
    }
    Ok(EmbeddabilityVerdict { embeddable: symbolic, samples })
}

/// `max |exp(-v_{s,t}(θ)) - F_{s,t}(e^{-θ})|` through the lifted field.
pub fn round_trip_check(gf: &GeneratingFamily, settings: &StepSettings, s: f64, t: f64, thetas: &[f64]) -> Result<f64> {
    let lift = HerglotzFieldBF::from_generating_family(gf)?;
    let solver = EvolutionSolver::new(std::sync::Arc::new(lift), *settings)?;
    let mut worst = 0.0f64;
    for &th in thetas {
        let v = solver.evolve_point(real(th), s, t)?;
        let f = evolve_pgf(gf, settings, real((-th).exp()), s, t)?;
        worst = worst.max(((-v).exp() - f).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yule() -> GeneratingFamily {
        GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(2, 1.0)]).unwrap())
    }

    fn critical() -> GeneratingFamily {
        GeneratingFamily::homogeneous(GeneratingPair::new(0.0, [(0, 1.0), (2, 1.0)]).unwrap())
    }

    fn yule_closed(z: f64, t: f64) -> f64 {
        let e = (-t).exp();
        z * e / (1.0 - (1.0 - e) * z)
    }

    fn st() -> StepSettings {
        StepSettings::default()
    }

    #[test]
    fn phi_examples() {
        let q = GeneratingFamily::homogeneous(GeneratingPair::new(1.0, []).unwrap());
        assert_eq!(q.phi_pgf_eval(real(0.5), 0.0).unwrap(), real(0.5));
        assert_eq!(yule().phi_pgf_eval(real(0.5), 0.0).unwrap(), real(0.25));
        assert_eq!(critical().phi_pgf_eval(real(0.5), 0.0).unwrap(), real(-0.25));
        assert!(matches!(yule().phi_pgf_eval(real(1.0), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_invalid_pairs() {
        assert!(GeneratingPair::new(0.0, [(1, 1.0)]).is_err());
        assert!(GeneratingPair::new(-1.0, []).is_err());
        assert!(GeneratingPair::new(0.0, [(3, -0.5)]).is_err());
    }

    #[test]
    fn evolve_examples() {
        let z = Complex64::new(0.2, 0.3);
        assert_eq!(evolve_pgf(&yule(), &st(), z, 0.4, 0.4).unwrap(), z);
        for t in [0.5, 1.0, 2.0] {
            let f = evolve_pgf(&critical(), &st(), real(0.0), 0.0, t).unwrap();
            assert!((f.re - t / (1.0 + t)).abs() < 1e-8);
        }
        let f = evolve_pgf(&yule(), &st(), real(0.5), 0.0, 1.0).unwrap();
        assert!((f.re - 0.2689414).abs() < 1e-7);
        assert!((f.re - yule_closed(0.5, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn coefficient_examples() {
        let id = extract_coefficients(&yule(), &st(), 0.5, 0.5, 8, DEFAULT_RADIUS).unwrap();
        assert!((id.coefficients[1] - 1.0).abs() < 1e-12);
        for (n, p) in id.coefficients.iter().enumerate() {
            if n != 1 {
                assert!(p.abs() < 1e-12, "p_{n} = {p}");
            }
        }
        let y = extract_coefficients(&yule(), &st(), 0.0, 1.0, DEFAULT_ORDER, DEFAULT_RADIUS).unwrap();
        let e = (-1.0f64).exp();
        assert!((y.coefficients[1] - e).abs() < 1e-8);
        assert!((y.coefficients[2] - e * (1.0 - e)).abs() < 1e-8);
        let c = extract_coefficients(&critical(), &st(), 0.0, 1.0, DEFAULT_ORDER, DEFAULT_RADIUS).unwrap();
        assert!((c.coefficients[0] - 0.5).abs() < 1e-8);
        assert!(c.coefficients.iter().all(|&p| p >= -1e-10));
        assert!(c.total() <= 1.0 + 1e-10);
    }

    #[test]
    fn coefficient_bounds() {
        assert!(matches!(extract_coefficients(&yule(), &st(), 0.0, 1.0, 4, 0.99999), Err(Error::Truncation { .. })));
        assert!(extract_coefficients(&yule(), &st(), 0.0, 1.0, 4, 1.0).is_err());
        assert!(extract_coefficients(&yule(), &st(), 0.0, 1.0, 0, 0.5).is_err());
    }

    #[test]
    fn mean_examples() {
        assert!((mean_discrete(&critical(), 0.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((mean_discrete(&yule(), 0.2, 1.2).unwrap() - std::f64::consts::E).abs() < 1e-14);
        let frozen = GeneratingFamily::homogeneous(GeneratingPair::new(0.0, []).unwrap());
        assert_eq!(mean_discrete(&frozen, 0.0, 5.0).unwrap(), 1.0);
        let leaky = GeneratingFamily::homogeneous(GeneratingPair::new(0.5, []).unwrap());
        assert!(matches!(mean_discrete(&leaky, 0.0, 1.0), Err(Error::FiniteMean(_))));
    }

    #[test]
    fn pgf_at_one_sees_explosion() {
        let leaky = GeneratingFamily::homogeneous(GeneratingPair::new(0.5, []).unwrap());
        let lim = pgf_at_one(&leaky, &st(), 0.0, 1.0).unwrap();
        assert!((lim.value() - (-0.5f64).exp()).abs() < 1e-7, "{lim:?}");
        let lim = pgf_at_one(&critical(), &st(), 0.0, 1.0).unwrap();
        assert!((lim.value() - 1.0).abs() < 1e-6, "{lim:?}");
    }

    #[test]
    fn embeddability_examples() {
        assert!(embeddability_test(&yule(), &st()).unwrap().embeddable);
        assert!(!embeddability_test(&critical(), &st()).unwrap().embeddable);
        let q = GeneratingFamily::homogeneous(GeneratingPair::new(0.7, []).unwrap());
        assert!(embeddability_test(&q, &st()).unwrap().embeddable);
    }

    #[test]
    fn round_trip_examples() {
        assert!(round_trip_check(&yule(), &st(), 0.5, 0.5, &[1.0]).unwrap() < 1e-15);
        assert!(round_trip_check(&yule(), &st(), 0.0, 1.0, &[1.0]).unwrap() <= 1e-7);
        let v = evolve_pgf(&yule(), &st(), real((-1.0f64).exp()), 0.0, 1.0).unwrap();
        assert!((v.re - 0.1763427624349498).abs() < 1e-9);
        let q = GeneratingFamily::homogeneous(GeneratingPair::new(0.7, []).unwrap());
        assert!(round_trip_check(&q, &st(), 0.0, 2.0, &[0.5, 1.0, 2.0]).unwrap() <= 1e-10);
        assert!(matches!(round_trip_check(&critical(), &st(), 0.0, 1.0, &[1.0]), Err(Error::NotEmbeddable(_))));
    }
}
