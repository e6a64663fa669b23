//! Single-species reaction networks `jA -> lA` and their continuous-time
//! Markov chain: rate generator, truncated master-equation integration and
//! exact stochastic simulation.

mod master;
mod ssa;

pub use master::{
    default_generator, default_n_max, master_evolve, master_evolve_with, master_trajectory, MasterOptions, MasterResult,
};
pub use ssa::{ssa_ensemble, ssa_snapshots, EmpiricalDistribution, SsaEnsemble, SsaEvent, SsaSnapshot};

use crate::error::{Error, Result};
use crate::moments::FactorialMoments;
use crate::stats::{binomial, falling_factorial};

/// One channel `j A -> l A` firing at rate `rate * C(n, j)` in state `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionChannel {
    pub j: u32,
    pub l: u32,
    pub rate: f64,
}

impl ReactionChannel {
    pub fn new(j: u32, l: u32, rate: f64) -> Result<Self> {
        if j == l {
            return Err(Error::InvalidChannel(format!(
                "reactant and product counts are equal (j = l = {j})"
            )));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidChannel(format!(
                "rate must be positive and finite, got {rate}"
            )));
        }
        Ok(Self { j, l, rate })
    }

    /// Propensity in state `n`: `rate * C(n, j)`.
    pub fn propensity(&self, n: u64) -> f64 {
        self.rate * binomial(n, self.j as u64)
    }

    /// Net change in particle count when the channel fires.
    pub fn delta(&self) -> i64 {
        self.l as i64 - self.j as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionSpec {
    channels: Vec<ReactionChannel>,
}

impl ReactionSpec {
    pub fn new(channels: Vec<ReactionChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidSpec("at least one channel is required".into()));
        }
        for (a, ca) in channels.iter().enumerate() {
            for cb in &channels[a + 1..] {
                if ca.j == cb.j && ca.l == cb.l {
                    return Err(Error::InvalidSpec(format!("duplicate channel ({}, {})", ca.j, ca.l)));
                }
            }
        }
        Ok(Self { channels })
    }

    /// `A + A -> 0` at rate `lambda`.
    pub fn annihilation(lambda: f64) -> Result<Self> {
        Self::new(vec![ReactionChannel::new(2, 0, lambda)?])
    }

    /// `A -> 0` at rate `lambda`.
    pub fn pure_death(lambda: f64) -> Result<Self> {
        Self::new(vec![ReactionChannel::new(1, 0, lambda)?])
    }

    /// `A -> 0` (alpha), `0 -> A` (beta), `A -> 2A` (gamma).
    pub fn birth_death_immigration(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![
            ReactionChannel::new(1, 0, alpha)?,
            ReactionChannel::new(0, 1, beta)?,
            ReactionChannel::new(1, 2, gamma)?,
        ])
    }

    pub fn channels(&self) -> &[ReactionChannel] {
        &self.channels
    }

    pub fn max_reactants(&self) -> usize {
        self.channels.iter().map(|c| c.j as usize).max().unwrap_or(0)
    }

    /// True when no channel increases the particle count.
    pub fn is_consuming(&self) -> bool {
        self.channels.iter().all(|c| c.l < c.j)
    }

    pub fn total_propensity(&self, n: u64) -> f64 {
        self.channels.iter().map(|c| c.propensity(n)).sum()
    }

    /// The single rate if this spec is exactly `{(2, 0, lambda)}`.
    pub fn annihilation_rate(&self) -> Option<f64> {
        match self.channels.as_slice() {
            [c] if c.j == 2 && c.l == 0 => Some(c.rate),
            _ => None,
        }
    }
}

/// Default tolerance on `|sum P_n - 1|` for constructed distributions.
pub const DEFAULT_SUM_TOL: f64 = 1e-9;
/// Entries below this are rejected; entries in `[-1e-12, 0)` are round-off.
pub const NEGATIVE_FLOOR: f64 = -1e-12;

/// Truncated probability vector `P_0..P_{n_max}` at time `time`.
///
/// `tail_mass` records probability known to lie above `n_max` (discarded
/// Poisson tail, or overflow accumulated during master integration).
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    probs: Vec<f64>,
    time: f64,
    tail_mass: f64,
}

impl CountDistribution {
    pub fn new(probs: Vec<f64>, time: f64) -> Result<Self> {
        Self::with_tolerance(probs, time, DEFAULT_SUM_TOL)
    }

    pub fn with_tolerance(probs: Vec<f64>, time: f64, sum_tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "time must be finite and >= 0, got {time}"
            )));
        }
        if let Some((n, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < NEGATIVE_FLOOR)
        {
            return Err(Error::InvalidDistribution(format!(
                "P_{n} = {p} is negative or not finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > sum_tol {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}, outside tolerance {sum_tol:e}"
            )));
        }
        Ok(Self {
            probs,
            time,
            tail_mass: 0.0,
        })
    }

    pub(crate) fn from_parts_unchecked(probs: Vec<f64>, time: f64, tail_mass: f64) -> Self {
        Self { probs, time, tail_mass }
    }

    pub fn point_mass(n0: usize, n_max: usize) -> Result<Self> {
        if n0 > n_max {
            return Err(Error::InvalidArgument(format!("n0 = {n0} exceeds n_max = {n_max}")));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n0] = 1.0;
        Ok(Self::from_parts_unchecked(probs, 0.0, 0.0))
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn with_tail_mass(mut self, tail_mass: f64) -> Self {
        self.tail_mass = tail_mass;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Largest `n` with nonzero probability.
    pub fn support_max(&self) -> usize {
        self.probs.iter().rposition(|&p| p != 0.0).unwrap_or(0)
    }

    /// Copy zero-padded to a larger truncation.
    pub fn padded(&self, n_max: usize) -> Self {
        let mut probs = self.probs.clone();
        if n_max + 1 > probs.len() {
            probs.resize(n_max + 1, 0.0);
        }
        Self {
            probs,
            time: self.time,
            tail_mass: self.tail_mass,
        }
    }

    /// Probabilities with round-off negatives clipped to zero.
    pub fn exported_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.max(0.0)).collect()
    }

    /// CSV with columns `n,prob,stderr_optional`.
    pub fn to_csv(&self, stderr: Option<&[f64]>) -> String {
        let mut out = String::from("n,prob,stderr_optional\n");
        for (n, p) in self.exported_probs().iter().enumerate() {
            let se = stderr
                .and_then(|s| s.get(n))
                .map(|v| crate::io::fmt_f64(*v))
                .unwrap_or_default();
            out.push_str(&format!("{n},{},{se}\n", crate::io::fmt_f64(*p)));
        }
        out
    }
}

/// Initial-data descriptor for [`sample_initial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    Deterministic(usize),
    TruncatedPoisson(f64),
}

/// Default bound on the discarded Poisson tail.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Builds an initial distribution on `0..=n_max`.
///
/// The Poisson option is renormalized after truncation and records the
/// discarded tail; a tail above `tail_tol` is an error naming the smallest
/// adequate `n_max`.
pub fn sample_initial(kind: InitialKind, n_max: usize, tail_tol: f64) -> Result<CountDistribution> {
    match kind {
        InitialKind::Deterministic(n0) => CountDistribution::point_mass(n0, n_max),
        InitialKind::TruncatedPoisson(mu) => {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "Poisson mean must be positive, got {mu}"
                )));
            }
            let pmf = poisson_pmf(mu, n_max);
            let kept: f64 = pmf.iter().sum();
            let tail = poisson_tail(mu, n_max);
            if tail > tail_tol {
                let mut required = n_max + 1;
                while poisson_tail(mu, required) > tail_tol {
                    required += 1;
                }
                return Err(Error::TruncationOverflow {
                    n_max,
                    mass: tail,
                    tolerance: tail_tol,
                    required,
                });
            }
            let probs = pmf.into_iter().map(|p| p / kept).collect();
            Ok(CountDistribution::from_parts_unchecked(probs, 0.0, tail))
        }
    }
}

/// Poisson pmf on `0..=n_max` by the recurrence `P_{n+1} = P_n mu / (n+1)`.
pub fn poisson_pmf(mu: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = (-mu).exp();
    for n in 0..=n_max {
        out.push(p);
        p *= mu / (n + 1) as f64;
    }
    out
}

/// `P(N > n_max)` for `N ~ Poisson(mu)`, summed upward until terms vanish.
pub fn poisson_tail(mu: f64, n_max: usize) -> f64 {
    let mut p = (-mu).exp();
    for n in 0..=n_max {
        p *= mu / (n + 1) as f64;
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    while p > tail * 1e-17 && p > 0.0 {
        tail += p;
        n += 1;
        p *= mu / n as f64;
        if n > n_max + 100_000 {
            break;
        }
    }
    tail
}

/// Destination of a transition out of a truncated state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    State(usize),
    /// Landed above `n_max`; accumulated in the overflow counter.
    Overflow,
}

/// Sparse transition-rate table of the truncated chain.
#[derive(Debug, Clone)]
pub struct RateGenerator {
    n_max: usize,
    transitions: Vec<Vec<(Target, f64)>>,
    outflow: Vec<f64>,
    redirections: usize,
}

/// Builds the truncated generator of `spec` on `0..=n_max`.
pub fn build_generator(spec: &ReactionSpec, n_max: usize) -> Result<RateGenerator> {
    let required = spec.max_reactants();
    if n_max < required {
        return Err(Error::InvalidTruncation { n_max, required });
    }
    let mut transitions = vec![Vec::new(); n_max + 1];
    let mut outflow = vec![0.0; n_max + 1];
    let mut redirections = 0;
    for n in 0..=n_max {
        for c in spec.channels() {
            let rate = c.propensity(n as u64);
            if rate == 0.0 {
                continue;
            }
            let dest = n as i64 + c.delta();
            let target = if dest as usize > n_max {
                redirections += 1;
                Target::Overflow
            } else {
                Target::State(dest as usize)
            };
            transitions[n].push((target, rate));
            outflow[n] += rate;
        }
    }
    Ok(RateGenerator {
        n_max,
        transitions,
        outflow,
        redirections,
    })
}

impl RateGenerator {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Outgoing transitions of state `n` as `(target, rate)`.
    pub fn transitions(&self, n: usize) -> &[(Target, f64)] {
        &self.transitions[n]
    }

    /// Total outflow rate of state `n`.
    pub fn outflow(&self, n: usize) -> f64 {
        self.outflow[n]
    }

    /// Number of transitions redirected into the overflow counter.
    pub fn overflow_redirections(&self) -> usize {
        self.redirections
    }

    /// Applies the forward equation: writes `dP/dt` into `dp[..=n_max]` and
    /// the overflow inflow rate into `dp[n_max + 1]` when present.
    pub fn apply(&self, p: &[f64], dp: &mut [f64]) {
        dp.fill(0.0);
        let mut overflow = 0.0;
        for n in 0..=self.n_max {
            let pn = p[n];
            if pn == 0.0 {
                continue;
            }
            dp[n] -= self.outflow[n] * pn;
            for &(target, rate) in &self.transitions[n] {
                match target {
                    Target::State(m) => dp[m] += rate * pn,
                    Target::Overflow => overflow += rate * pn,
                }
            }
        }
        if dp.len() > self.n_max + 1 {
            dp[self.n_max + 1] = overflow;
        }
    }

    /// Largest |row sum| over states, counting overflow as a sink state.
    pub fn max_row_imbalance(&self) -> f64 {
        (0..=self.n_max)
            .map(|n| {
                let off: f64 = self.transitions[n].iter().map(|(_, r)| r).sum();
                (off - self.outflow[n]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Factorial moments `M_m = sum_n n(n-1)...(n-m+1) P_n` for `m = 0..=m_max`.
///
/// The returned rate is 1; use [`FactorialMoments::with_rate`] to attach one.
pub fn factorial_moments(dist: &CountDistribution, m_max: usize) -> FactorialMoments {
    let values = (0..=m_max)
        .map(|m| {
            dist.probs()
                .iter()
                .enumerate()
                .map(|(n, p)| falling_factorial(n as u64, m as u64) * p)
                .sum()
        })
        .collect();
    FactorialMoments::new(values, 1.0, dist.time())
}

/// Even-minus-odd probability mass.
pub fn parity(dist: &CountDistribution) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_validation() {
        assert!(ReactionChannel::new(2, 2, 1.0).is_err());
        assert!(ReactionChannel::new(2, 0, 0.0).is_err());
        assert!(ReactionChannel::new(2, 0, -1.0).is_err());
        assert!(ReactionSpec::new(vec![]).is_err());
        let c = ReactionChannel::new(2, 0, 1.0).unwrap();
        assert!(ReactionSpec::new(vec![c, c]).is_err());
    }

    #[test]
    fn annihilation_outflow_from_four() {
        let g = build_generator(&ReactionSpec::annihilation(1.5).unwrap(), 6).unwrap();
        assert_eq!(g.transitions(4), &[(Target::State(2), 6.0 * 1.5)]);
        assert_eq!(g.outflow(4), 9.0);
    }

    #[test]
    fn pure_death_zero_is_absorbing() {
        let g = build_generator(&ReactionSpec::pure_death(1.0).unwrap(), 5).unwrap();
        assert!(g.transitions(0).is_empty());
        assert_eq!(g.outflow(0), 0.0);
    }

    #[test]
    fn coagulation_from_three() {
        let spec = ReactionSpec::new(vec![ReactionChannel::new(2, 1, 0.7).unwrap()]).unwrap();
        let g = build_generator(&spec, 5).unwrap();
        // three unordered pairs out of three particles
        assert_eq!(g.transitions(3), &[(Target::State(2), 3.0 * 0.7)]);
    }

    #[test]
    fn truncation_below_reactant_count() {
        let spec = ReactionSpec::new(vec![ReactionChannel::new(3, 1, 1.0).unwrap()]).unwrap();
        assert_eq!(
            build_generator(&spec, 2).unwrap_err(),
            Error::InvalidTruncation { n_max: 2, required: 3 }
        );
    }

    #[test]
    fn births_above_truncation_are_redirected() {
        let spec = ReactionSpec::birth_death_immigration(1.0, 1.0, 1.0).unwrap();
        let g = build_generator(&spec, 4).unwrap();
        assert_eq!(g.overflow_redirections(), 2);
        assert!(g.transitions(4).iter().any(|(t, _)| *t == Target::Overflow));
        assert!(g.max_row_imbalance() < 1e-13);
    }

    #[test]
    fn generator_matches_annihilation_master_equation() {
        // inflow (n+2)(n+1)/2 from n+2, outflow n(n-1)/2, exactly
        let lambda = 0.75;
        let n_max = 20;
        let g = build_generator(&ReactionSpec::annihilation(lambda).unwrap(), n_max).unwrap();
        for n in 0..=n_max {
            let mut p = vec![0.0; n_max + 1];
            p[n] = 1.0;
            let mut dp = vec![0.0; n_max + 1];
            g.apply(&p, &mut dp);
            let out = (n * n.saturating_sub(1) / 2) as f64 * lambda;
            assert_eq!(dp[n], -out);
            if n >= 2 {
                assert_eq!(dp[n - 2], out);
            }
            let m = n as f64;
            let inflow_coeff = ((m + 2.0) * (m + 1.0) / 2.0) * lambda;
            if n + 2 <= n_max {
                let mut p2 = vec![0.0; n_max + 1];
                p2[n + 2] = 1.0;
                g.apply(&p2, &mut dp);
                assert_eq!(dp[n], inflow_coeff);
            }
        }
    }

    #[test]
    fn moments_and_parity_of_simple_distributions() {
        let d3 = CountDistribution::point_mass(3, 5).unwrap();
        assert_eq!(factorial_moments(&d3, 2).values()[2], 6.0);
        let d2 = CountDistribution::point_mass(2, 5).unwrap();
        assert_eq!(factorial_moments(&d2, 3).values()[3], 0.0);
        assert_eq!(factorial_moments(&d2, 3).values()[0], 1.0);

        let d = CountDistribution::new(vec![0.25, 0.25, 0.5], 0.0).unwrap();
        assert_eq!(parity(&d), 0.5);
        assert_eq!(parity(&CountDistribution::point_mass(5, 5).unwrap()), -1.0);
        assert_eq!(parity(&CountDistribution::point_mass(0, 5).unwrap()), 1.0);
    }

    #[test]
    fn truncated_poisson_second_factorial_moment() {
        let d = sample_initial(InitialKind::TruncatedPoisson(1.0), 40, DEFAULT_TAIL_TOL).unwrap();
        let m = factorial_moments(&d, 2);
        assert!((m.values()[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sample_initial_variants() {
        let d = sample_initial(InitialKind::Deterministic(2), 10, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(d.probs()[2], 1.0);
        assert_eq!(d.n_max(), 10);

        let p = sample_initial(InitialKind::TruncatedPoisson(1.0), 20, DEFAULT_TAIL_TOL).unwrap();
        assert!(((p.probs()[0] - (-1.0f64).exp()) / (-1.0f64).exp()).abs() < 1e-15);
        for n in 0..20 {
            let ratio = p.probs()[n + 1] / p.probs()[n];
            assert!((ratio - 1.0 / (n + 1) as f64).abs() < 1e-14);
        }
        assert!(p.tail_mass() > 0.0 && p.tail_mass() < 1e-18);

        let mu = 3.5;
        let q = sample_initial(InitialKind::TruncatedPoisson(mu), 30, DEFAULT_TAIL_TOL).unwrap();
        for n in 0..30 {
            assert!((q.probs()[n + 1] / q.probs()[n] - mu / (n + 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn poisson_tail_too_heavy_names_required_truncation() {
        match sample_initial(InitialKind::TruncatedPoisson(5.0), 10, 1e-12) {
            Err(Error::TruncationOverflow { required, .. }) => {
                assert!(poisson_tail(5.0, required) <= 1e-12);
                assert!(poisson_tail(5.0, required - 1) > 1e-12);
            }
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(CountDistribution::new(vec![0.5, 0.4], 0.0).is_err());
        assert!(CountDistribution::new(vec![1.0 + 1e-11, -1e-11], 0.0).is_err());
        assert!(CountDistribution::new(vec![1.1, -0.1], 0.0).is_err());
        let d = CountDistribution::new(vec![1.0 + 5e-13, -5e-13], 0.0).unwrap();
        assert_eq!(d.exported_probs()[1], 0.0);
    }
}
