use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use super::{CountDistribution, ReactionSpec};
use crate::error::{Error, Result};
use crate::rng::{path_rng, StreamTag};
use crate::stats::{falling_factorial, mean_stderr, MeanEstimate};

/// One fired reaction in a path's event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsaEvent {
    pub time: f64,
    pub channel: usize,
    pub count_after: u64,
}

/// Per-path counts at one snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaSnapshot {
    pub time: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SsaEnsemble {
    pub seed: u64,
    pub snapshots: Vec<SsaSnapshot>,
    pub event_logs: Option<Vec<Vec<SsaEvent>>>,
}

/// Empirical distribution with per-bin standard errors `sqrt(p(1-p)/N)`.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    pub dist: CountDistribution,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
}

impl SsaEnsemble {
    pub fn n_paths(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.counts.len())
    }

    pub fn empirical(&self, snapshot: usize) -> EmpiricalDistribution {
        let snap = &self.snapshots[snapshot];
        let n_paths = snap.counts.len();
        let top = snap.counts.iter().copied().max().unwrap_or(0) as usize;
        let mut hits = vec![0u64; top + 1];
        for &c in &snap.counts {
            hits[c as usize] += 1;
        }
        let probs: Vec<f64> = hits.iter().map(|&h| h as f64 / n_paths as f64).collect();
        let stderr = probs.iter().map(|p| (p * (1.0 - p) / n_paths as f64).sqrt()).collect();
        EmpiricalDistribution {
            dist: CountDistribution::from_parts_unchecked(probs, snap.time, 0.0),
            stderr,
            n_paths,
        }
    }

    /// Sample mean of `f(n)` over paths at a snapshot.
    pub fn sample_mean<F: Fn(u64) -> f64>(&self, snapshot: usize, f: F) -> MeanEstimate {
        let xs: Vec<f64> = self.snapshots[snapshot].counts.iter().map(|&n| f(n)).collect();
        mean_stderr(&xs)
    }

    /// Estimated factorial moment `E[n(n-1)...(n-m+1)]`.
    pub fn factorial_moment(&self, snapshot: usize, m: u64) -> MeanEstimate {
        self.sample_mean(snapshot, |n| falling_factorial(n, m))
    }

    /// Estimated generating function `E[x^n]`.
    pub fn generating_function(&self, snapshot: usize, x: f64) -> MeanEstimate {
        self.sample_mean(snapshot, |n| x.powi(n as i32))
    }
}

/// Runs `n_paths` exact Gillespie paths to `t_end` and returns the empirical
/// distribution of the final counts.
pub fn ssa_ensemble(
    spec: &ReactionSpec,
    init: &CountDistribution,
    t_end: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let ens = ssa_snapshots(spec, init, &[t_end], n_paths, seed, false)?;
    Ok(ens.empirical(0))
}

/// Exact stochastic simulation recording the count of every path at each
/// time of the nondecreasing grid `times`. Path `i` draws only from its own
/// `(seed, i)` substream, so results do not depend on the worker count.
pub fn ssa_snapshots(
    spec: &ReactionSpec,
    init: &CountDistribution,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    record_events: bool,
) -> Result<SsaEnsemble> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument(
            "snapshot times must be finite, >= 0 and nondecreasing".into(),
        ));
    }
    let cdf: Vec<f64> = init
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.max(0.0);
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().expect("nonempty distribution");

    let paths: Vec<(Vec<u64>, Vec<SsaEvent>)> = (0..n_paths)
        .into_par_iter()
        .map(|i| simulate_path(spec, &cdf, total, times, seed, i as u64, record_events))
        .collect();

    let mut snapshots: Vec<SsaSnapshot> = times
        .iter()
        .map(|&time| SsaSnapshot {
            time,
            counts: Vec::with_capacity(n_paths),
        })
        .collect();
    let mut logs = record_events.then(|| Vec::with_capacity(n_paths));
    for (counts, events) in paths {
        for (snap, c) in snapshots.iter_mut().zip(counts) {
            snap.counts.push(c);
        }
        if let Some(l) = logs.as_mut() {
            l.push(events);
        }
    }
    Ok(SsaEnsemble {
        seed,
        snapshots,
        event_logs: logs,
    })
}

fn simulate_path(
    spec: &ReactionSpec,
    cdf: &[f64],
    total: f64,
    times: &[f64],
    seed: u64,
    path: u64,
    record_events: bool,
) -> (Vec<u64>, Vec<SsaEvent>) {
    let mut rng = path_rng(seed, StreamTag::Ssa, path);
    let u: f64 = rng.random::<f64>() * total;
    let mut n = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64;
    let channels = spec.channels();
    let mut props = vec![0.0; channels.len()];
    let mut out = Vec::with_capacity(times.len());
    let mut events = Vec::new();
    let mut t = 0.0;
    for &stop in times {
        loop {
            let mut a0 = 0.0;
            for (p, c) in props.iter_mut().zip(channels) {
                *p = c.propensity(n);
                a0 += *p;
            }
            if a0 == 0.0 {
                break;
            }
            let wait: f64 = Exp1.sample(&mut rng);
            let next = t + wait / a0;
            if next > stop {
                break;
            }
            t = next;
            let target = rng.random::<f64>() * a0;
            let mut acc = 0.0;
            let mut chosen = channels.len() - 1;
            for (k, p) in props.iter().enumerate() {
                acc += p;
                if target < acc {
                    chosen = k;
                    break;
                }
            }
            // a zero-propensity channel can only be picked through round-off
            while props[chosen] == 0.0 {
                chosen -= 1;
            }
            n = (n as i64 + channels[chosen].delta()) as u64;
            if record_events {
                events.push(SsaEvent {
                    time: t,
                    channel: chosen,
                    count_after: n,
                });
            }
        }
        // memoryless: discarding the overshooting wait is exact
        t = stop;
        out.push(n);
    }
    (out, events)
}
