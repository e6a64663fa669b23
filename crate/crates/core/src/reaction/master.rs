use super::{build_generator, poisson_tail, CountDistribution, RateGenerator, ReactionSpec};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeStats, OdeTolerance};

#[derive(Debug, Clone, Copy)]
pub struct MasterOptions {
    pub tol: OdeTolerance,
    /// Largest overflow mass tolerated before reporting a truncation error.
    pub tail_tol: f64,
}

impl MasterOptions {
    pub fn absolute(tol: f64) -> Self {
        Self {
            tol: OdeTolerance::absolute(tol),
            tail_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterResult {
    pub dist: CountDistribution,
    /// Probability that left `0..=n_max` through redirected transitions.
    pub overflow_mass: f64,
    pub stats: OdeStats,
}

/// Evolves `p0` under the truncated forward equation to `t_end`, with
/// absolute local-error tolerance `tol`.
pub fn master_evolve(gen: &RateGenerator, p0: &CountDistribution, t_end: f64, tol: f64) -> Result<CountDistribution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    master_evolve_with(gen, p0, t_end, MasterOptions::absolute(tol)).map(|r| r.dist)
}

pub fn master_evolve_with(
    gen: &RateGenerator,
    p0: &CountDistribution,
    t_end: f64,
    opts: MasterOptions,
) -> Result<MasterResult> {
    let mut out = master_trajectory(gen, p0, &[t_end], opts)?;
    Ok(out.pop().expect("one requested time"))
}

/// Evolves `p0` through each time of the increasing grid `times` (absolute
/// times, measured from `p0.time()` = 0) and returns one result per entry.
pub fn master_trajectory(
    gen: &RateGenerator,
    p0: &CountDistribution,
    times: &[f64],
    opts: MasterOptions,
) -> Result<Vec<MasterResult>> {
    let n_max = gen.n_max();
    if p0.n_max() > n_max {
        if p0.probs()[n_max + 1..].iter().any(|&p| p != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial distribution has mass above generator truncation {n_max}"
            )));
        }
    }
    // state = P_0..P_{n_max} followed by the overflow counter
    let mut y: Vec<f64> = p0.probs().iter().take(n_max + 1).copied().collect();
    y.resize(n_max + 2, 0.0);
    let mut t = 0.0;
    let mut results = Vec::with_capacity(times.len());
    for &target in times {
        if !(target >= t) {
            return Err(Error::InvalidArgument(format!(
                "time grid must be nondecreasing and >= 0, got {target}"
            )));
        }
        let stats = integrate(|p, dp| gen.apply(p, dp), &mut y, target - t, opts.tol)?;
        t = target;
        let overflow = y[n_max + 1];
        if overflow > opts.tail_tol {
            return Err(Error::TruncationOverflow {
                n_max,
                mass: overflow,
                tolerance: opts.tail_tol,
                required: suggest_n_max(&y[..=n_max]).max(2 * n_max),
            });
        }
        let dist =
            CountDistribution::from_parts_unchecked(y[..=n_max].to_vec(), target, p0.tail_mass() + overflow.max(0.0));
        results.push(MasterResult {
            dist,
            overflow_mass: overflow,
            stats,
        });
    }
    Ok(results)
}

fn suggest_n_max(p: &[f64]) -> usize {
    let mean: f64 = p.iter().enumerate().map(|(n, q)| n as f64 * q).sum();
    poisson_quantile(mean.max(1.0), 1e-12) * 2
}

fn poisson_quantile(mu: f64, tail: f64) -> usize {
    let mut n = mu.ceil() as usize;
    while poisson_tail(mu, n) > tail {
        n += 1;
    }
    n
}

/// Default truncation for evolving `init` under `spec` up to `t_end`.
///
/// Pure consumption never raises the count, so the largest initial support
/// suffices. Otherwise the mean is bounded by integrating the production
/// channels alone (mean-field, consumption ignored), and the truncation is
/// twice the point where a Poisson tail at that mean drops below 1e-12.
pub fn default_n_max(spec: &ReactionSpec, init: &CountDistribution, t_end: f64) -> usize {
    let support = init.support_max().max(spec.max_reactants());
    if spec.is_consuming() {
        return support;
    }
    let mut mu = support as f64;
    let steps = 1000;
    let h = t_end / steps as f64;
    for _ in 0..steps {
        let growth: f64 = spec
            .channels()
            .iter()
            .filter(|c| c.l > c.j)
            .map(|c| c.rate * c.delta() as f64 * mu.powi(c.j as i32) / crate::stats::factorial(c.j as u64))
            .sum();
        mu += h * growth;
        if !mu.is_finite() || mu > 1e6 {
            return 1_000_000;
        }
    }
    let n = 2 * poisson_quantile(mu.max(1.0), 1e-12);
    n.max(support).max(spec.max_reactants())
}

/// Convenience: generator sized by [`default_n_max`].
pub fn default_generator(spec: &ReactionSpec, init: &CountDistribution, t_end: f64) -> Result<RateGenerator> {
    build_generator(spec, default_n_max(spec, init, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{parity, ReactionChannel};

    #[test]
    fn two_particle_annihilation_half_life() {
        let spec = ReactionSpec::annihilation(1.0).unwrap();
        let g = build_generator(&spec, 2).unwrap();
        let p0 = CountDistribution::point_mass(2, 2).unwrap();
        let p = master_evolve(&g, &p0, 2f64.ln(), 1e-12).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-8);
        assert!((p.probs()[2] - 0.5).abs() < 1e-8);
        assert_eq!(p.time(), 2f64.ln());
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = ReactionSpec::birth_death_immigration(1.0, 2.0, 0.5).unwrap();
        let g = build_generator(&spec, 30).unwrap();
        let p0 = CountDistribution::new(vec![0.2, 0.3, 0.5], 0.0).unwrap();
        let p = master_evolve(&g, &p0, 0.0, 1e-10).unwrap();
        assert_eq!(&p.probs()[..3], p0.probs());
        assert!(p.probs()[3..].iter().all(|&q| q == 0.0));
    }

    #[test]
    fn pure_death_survival() {
        let g = build_generator(&ReactionSpec::pure_death(1.0).unwrap(), 1).unwrap();
        let p = master_evolve(&g, &CountDistribution::point_mass(1, 1).unwrap(), 1.0, 1e-12).unwrap();
        assert!((p.probs()[1] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn overflow_is_reported_with_a_larger_truncation() {
        let spec = ReactionSpec::new(vec![ReactionChannel::new(0, 1, 5.0).unwrap()]).unwrap();
        let g = build_generator(&spec, 3).unwrap();
        let err = master_evolve(&g, &CountDistribution::point_mass(0, 3).unwrap(), 2.0, 1e-10).unwrap_err();
        match err {
            Error::TruncationOverflow { n_max, required, .. } => {
                assert_eq!(n_max, 3);
                assert!(required > 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conservation_of_probability_and_parity() {
        let spec = ReactionSpec::annihilation(1.3).unwrap();
        let g = build_generator(&spec, 9).unwrap();
        let p0 = CountDistribution::new(vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.0, 0.0, 0.2, 0.0, 0.1], 0.0).unwrap();
        let tol = 1e-10;
        for &t in &[0.1, 0.7, 2.0] {
            let p = master_evolve(&g, &p0, t, tol).unwrap();
            assert!((p.total_mass() - 1.0).abs() <= 10.0 * tol * t);
            assert!((parity(&p) - parity(&p0)).abs() <= 10.0 * tol * t);
        }
    }

    #[test]
    fn default_truncation() {
        let ann = ReactionSpec::annihilation(1.0).unwrap();
        let d = CountDistribution::point_mass(6, 10).unwrap();
        assert_eq!(default_n_max(&ann, &d, 5.0), 6);
        let bdi = ReactionSpec::birth_death_immigration(1.0, 1.0, 1.0).unwrap();
        let n = default_n_max(&bdi, &CountDistribution::point_mass(0, 0).unwrap(), 0.3);
        assert!(n >= 20, "{n}");
    }
}
