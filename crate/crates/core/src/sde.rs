//! Monte-Carlo engines for `dphi = -phi^2 dt + i phi dW` and for the two
//! solvable real-noise diffusions.
//!
//! The complex equation is simulated as the real system in
//! `(z1, z2) = (Re phi, Im phi)`. All times here are rescaled times
//! `tau = lambda t`; [`SdeConfig::rescale`] does the conversion.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{path_rng, StreamTag};
use crate::stats::{mean_stderr, variance_stderr, MeanEstimate};

/// Below this `|1/phi|` a reciprocal path is treated as a blow-up.
pub const RECIPROCAL_FLOOR: f64 = 1e-12;

/// Minimum number of unflagged paths for moment and Cauchy estimates.
pub const MIN_ALIVE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub lambda: f64,
    pub blowup_threshold: f64,
    /// Drive both complex schemes from one Brownian stream.
    pub shared_noise: bool,
    /// Test hook: with `false` every increment `dW` is zero.
    pub noise: bool,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_paths: 10_000,
            seed: 0,
            lambda: 1.0,
            blowup_threshold: 1e6,
            shared_noise: false,
            noise: true,
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.blowup_threshold >= 1e3) {
            return Err(Error::InvalidArgument(format!(
                "blowup_threshold must be >= 1e3, got {}",
                self.blowup_threshold
            )));
        }
        Ok(())
    }

    /// Physical time to rescaled time.
    pub fn rescale(&self, t: f64) -> f64 {
        self.lambda * t
    }

    fn stream(&self, own: StreamTag) -> StreamTag {
        if self.shared_noise {
            StreamTag::SharedNoise
        } else {
            own
        }
    }
}

/// Sample points of the complex SDE at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnsemble {
    points: Vec<Complex64>,
    alive: Vec<bool>,
    time: f64,
    seed: u64,
}

impl ComplexEnsemble {
    pub fn new(points: Vec<Complex64>, alive: Vec<bool>, time: f64, seed: u64) -> Result<Self> {
        if points.len() != alive.len() {
            return Err(Error::InvalidArgument("points and alive mask differ in length".into()));
        }
        Ok(Self {
            points,
            alive,
            time,
            seed,
        })
    }

    /// All paths alive.
    pub fn from_points(points: Vec<Complex64>, time: f64) -> Self {
        let alive = vec![true; points.len()];
        Self {
            points,
            alive,
            time,
            seed: 0,
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.points.len()
    }

    pub fn n_flagged(&self) -> usize {
        self.alive.iter().filter(|a| !**a).count()
    }

    pub fn n_alive(&self) -> usize {
        self.n_paths() - self.n_flagged()
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.n_flagged() as f64 / self.n_paths().max(1) as f64
    }

    pub fn alive_points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.points
            .iter()
            .zip(&self.alive)
            .filter(|(_, a)| **a)
            .map(|(z, _)| *z)
    }

    /// Largest modulus over unflagged points.
    pub fn max_modulus(&self) -> f64 {
        self.alive_points().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sample mean of `f(phi)` over unflagged points, per component.
    pub fn complex_mean<F: Fn(Complex64) -> Complex64>(&self, f: F) -> (MeanEstimate, MeanEstimate) {
        let (re, im): (Vec<f64>, Vec<f64>) = self
            .alive_points()
            .map(|z| {
                let v = f(z);
                (v.re, v.im)
            })
            .unzip();
        (mean_stderr(&re), mean_stderr(&im))
    }

    /// CSV with columns `path,t,z1,z2,flagged`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,t,z1,z2,flagged\n");
        write_rows(&mut out, self);
        out
    }
}

fn write_rows(out: &mut String, e: &ComplexEnsemble) {
    use crate::io::fmt_f64;
    for (i, (z, a)) in e.points.iter().zip(&e.alive).enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            fmt_f64(e.time),
            fmt_f64(z.re),
            fmt_f64(z.im),
            u8::from(!a)
        ));
    }
}

/// Several snapshots in one CSV.
pub fn snapshots_to_csv(snaps: &[ComplexEnsemble]) -> String {
    let mut out = String::from("path,t,z1,z2,flagged\n");
    for s in snaps {
        write_rows(&mut out, s);
    }
    out
}

/// Estimated `E[phi^m]` with componentwise standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub m: usize,
    pub value: Complex64,
    /// `sqrt(stderr_re^2 + stderr_im^2)`.
    pub stderr: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// CSV with columns `m,re,im,stderr`.
pub fn moments_to_csv(ms: &[MomentEstimate]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("m,re,im,stderr\n");
    for e in ms {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.m,
            fmt_f64(e.value.re),
            fmt_f64(e.value.im),
            fmt_f64(e.stderr)
        ));
    }
    out
}

/// Sample means of `phi^m` for `m = 0..=m_max` over unflagged paths.
pub fn ensemble_complex_moments(ens: &ComplexEnsemble, m_max: usize) -> Result<Vec<MomentEstimate>> {
    let alive = ens.n_alive();
    if alive < MIN_ALIVE {
        return Err(Error::InsufficientEnsemble {
            alive,
            required: MIN_ALIVE,
        });
    }
    let pts: Vec<Complex64> = ens.alive_points().collect();
    let mut powers = vec![Complex64::new(1.0, 0.0); pts.len()];
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(MomentEstimate {
        m: 0,
        value: Complex64::new(1.0, 0.0),
        stderr: 0.0,
        stderr_re: 0.0,
        stderr_im: 0.0,
    });
    for m in 1..=m_max {
        for (p, z) in powers.iter_mut().zip(&pts) {
            *p *= z;
        }
        let re: Vec<f64> = powers.iter().map(|p| p.re).collect();
        let im: Vec<f64> = powers.iter().map(|p| p.im).collect();
        let (r, i) = (mean_stderr(&re), mean_stderr(&im));
        out.push(MomentEstimate {
            m,
            value: Complex64::new(r.mean, i.mean),
            stderr: r.stderr.hypot(i.stderr),
            stderr_re: r.stderr,
            stderr_im: i.stderr,
        });
    }
    Ok(out)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument(
            "snapshot times must be finite, >= 0 and nondecreasing".into(),
        ));
    }
    Ok(())
}

/// Step sizes covering `[from, to]` with steps no longer than `dt`.
fn substeps(from: f64, to: f64, dt: f64) -> (usize, f64) {
    let span = to - from;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let k = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (k, span / k as f64)
}

fn increment(rng: &mut ChaCha8Rng, h: f64, noise: bool) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if noise {
        z * h.sqrt()
    } else {
        0.0
    }
}

/// Tamed Euler-Maruyama ensemble at `tau_end`.
pub fn simulate_tamed_em<F>(phi0: F, cfg: &SdeConfig, tau_end: f64) -> Result<ComplexEnsemble>
where
    F: Fn(&mut ChaCha8Rng) -> Complex64 + Sync,
{
    let mut snaps = simulate_tamed_em_snapshots(phi0, cfg, &[tau_end])?;
    Ok(snaps.pop().expect("one snapshot"))
}

/// Tamed Euler-Maruyama: drift `-phi^2` damped by `1/(1 + dt |phi|^2)`,
/// diffusion column `(-z2, z1) dW`. Paths past `blowup_threshold` are frozen
/// and flagged from then on.
pub fn simulate_tamed_em_snapshots<F>(phi0: F, cfg: &SdeConfig, times: &[f64]) -> Result<Vec<ComplexEnsemble>>
where
    F: Fn(&mut ChaCha8Rng) -> Complex64 + Sync,
{
    cfg.validate()?;
    check_times(times)?;
    let tag = cfg.stream(StreamTag::TamedEm);
    let paths: Vec<Vec<(Complex64, bool)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, tag, i as u64);
            let z = phi0(&mut rng);
            let (mut a, mut b) = (z.re, z.im);
            let mut alive = true;
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &stop in times {
                let (k, h) = substeps(t, stop, cfg.dt);
                for _ in 0..k {
                    let dw = increment(&mut rng, h, cfg.noise);
                    if !alive {
                        continue;
                    }
                    let r2 = a * a + b * b;
                    let tame = h / (1.0 + h * r2);
                    let na = a - tame * (a * a - b * b) - b * dw;
                    let nb = b - tame * 2.0 * a * b + a * dw;
                    a = na;
                    b = nb;
                    if !(a.is_finite() && b.is_finite()) || a.hypot(b) > cfg.blowup_threshold {
                        alive = false;
                    }
                }
                t = stop;
                out.push((Complex64::new(a, b), alive));
            }
            out
        })
        .collect();
    assemble(paths, times, cfg.seed)
}

fn assemble(paths: Vec<Vec<(Complex64, bool)>>, times: &[f64], seed: u64) -> Result<Vec<ComplexEnsemble>> {
    let n = paths.len();
    let mut snaps: Vec<ComplexEnsemble> = times
        .iter()
        .map(|&time| ComplexEnsemble {
            points: Vec::with_capacity(n),
            alive: Vec::with_capacity(n),
            time,
            seed,
        })
        .collect();
    for path in paths {
        for (s, (z, a)) in snaps.iter_mut().zip(path) {
            s.points.push(z);
            s.alive.push(a);
        }
    }
    if let Some(last) = snaps.last() {
        if last.n_alive() == 0 {
            return Err(Error::EmptyEnsemble {
                flagged: last.n_flagged(),
            });
        }
    }
    Ok(snaps)
}

/// Per-step state of a reciprocal path: `xi = 1/phi` at rescaled time `tau`.
struct ReciprocalPath {
    xi0: Complex64,
    w: f64,
    s: f64,
    /// trapezoidal value of `int_0^s exp(u/2 + i W_u) du`
    integral: Complex64,
    f_prev: Complex64,
}

impl ReciprocalPath {
    fn new(xi0: Complex64) -> Self {
        Self {
            xi0,
            w: 0.0,
            s: 0.0,
            integral: Complex64::new(0.0, 0.0),
            f_prev: Complex64::new(1.0, 0.0),
        }
    }

    fn step(&mut self, h: f64, dw: f64) -> Complex64 {
        self.s += h;
        self.w += dw;
        let f = Complex64::from_polar((0.5 * self.s).exp(), self.w);
        self.integral += 0.5 * h * (self.f_prev + f);
        self.f_prev = f;
        (self.xi0 + self.integral) / f
    }
}

/// Exact-in-law sampler through `xi = 1/phi`, which solves the linear
/// equation `dxi = (1 - xi) dt - i xi dW`, so
/// `xi(t) = exp(-t/2 - i W_t) (xi0 + int_0^t exp(s/2 + i W_s) ds)`.
/// Only the time integral is discretized. Paths with `|xi| < 1e-12` are flagged.
pub fn simulate_reciprocal_exact(phi0: Complex64, cfg: &SdeConfig, tau_end: f64) -> Result<ComplexEnsemble> {
    let mut snaps = simulate_reciprocal_snapshots(phi0, cfg, &[tau_end])?;
    Ok(snaps.pop().expect("one snapshot"))
}

pub fn simulate_reciprocal_snapshots(phi0: Complex64, cfg: &SdeConfig, times: &[f64]) -> Result<Vec<ComplexEnsemble>> {
    let paths = reciprocal_paths::<(), _>(phi0, cfg, times, |_, _| {})?;
    assemble(paths.into_iter().map(|(p, _)| p).collect(), times, cfg.seed)
}

/// Runs reciprocal paths calling `observe(tau, xi)` after every step; the
/// per-path observer state is returned next to the snapshots.
fn reciprocal_paths<S, O>(
    phi0: Complex64,
    cfg: &SdeConfig,
    times: &[f64],
    observe: O,
) -> Result<Vec<(Vec<(Complex64, bool)>, S)>>
where
    S: Default + Send,
    O: Fn(&mut S, (f64, Complex64)) + Sync,
{
    cfg.validate()?;
    check_times(times)?;
    if phi0.norm() == 0.0 || !phi0.is_finite() {
        return Err(Error::InvalidArgument(
            "reciprocal sampler needs a finite phi0 != 0".into(),
        ));
    }
    let xi0 = phi0.inv();
    let tag = cfg.stream(StreamTag::Reciprocal);
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, tag, i as u64);
            let mut path = ReciprocalPath::new(xi0);
            let mut xi = xi0;
            let mut alive = true;
            let mut state = S::default();
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &stop in times {
                let (k, h) = substeps(t, stop, cfg.dt);
                for _ in 0..k {
                    let dw = increment(&mut rng, h, cfg.noise);
                    if !alive {
                        continue;
                    }
                    xi = path.step(h, dw);
                    if !(xi.norm() >= RECIPROCAL_FLOOR) || !xi.is_finite() {
                        alive = false;
                        continue;
                    }
                    observe(&mut state, (path.s, xi));
                }
                t = stop;
                out.push((xi.inv(), alive));
            }
            (out, state)
        })
        .collect())
}

/// Pathwise modulus extremes of the reciprocal sampler.
#[derive(Debug, Clone, Default)]
pub struct PathExtremes {
    /// min `|phi|` over all steps, per path
    pub min_modulus: Vec<f64>,
    /// min `|phi|` over steps inside the window, per path
    pub window_min: Vec<f64>,
    pub alive: Vec<bool>,
}

/// Runs the reciprocal sampler to `window.1`, tracking the smallest `|phi|`
/// over the whole path and over `window` (rescaled times, inclusive).
pub fn reciprocal_path_extremes(phi0: Complex64, cfg: &SdeConfig, window: (f64, f64)) -> Result<PathExtremes> {
    #[derive(Default)]
    struct Mins {
        all: Option<f64>,
        win: Option<f64>,
    }
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::InvalidArgument("window must satisfy lo <= hi".into()));
    }
    let tol = 1e-9 * hi.max(1.0);
    let start = phi0.norm();
    let runs = reciprocal_paths::<Mins, _>(phi0, cfg, &[hi], |m, (s, xi)| {
        let r = 1.0 / xi.norm();
        m.all = Some(m.all.map_or(r, |v: f64| v.min(r)));
        if s >= lo - tol && s <= hi + tol {
            m.win = Some(m.win.map_or(r, |v: f64| v.min(r)));
        }
    })?;
    let mut out = PathExtremes::default();
    for (snap, mins) in runs {
        out.alive.push(snap[0].1);
        out.min_modulus.push(mins.all.unwrap_or(start).min(start));
        out.window_min
            .push(mins.win.unwrap_or(if lo <= 0.0 { start } else { f64::NAN }));
    }
    Ok(out)
}

/// `E[1/phi(t)] = 1 + (xi0 - 1) e^{-t}`.
pub fn expected_reciprocal(xi0: Complex64, t: f64) -> Complex64 {
    1.0 + (xi0 - 1.0) * (-t).exp()
}

/// Pathwise modulus sandwich starting from `|phi| = mod_star`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusBounds {
    pub lower: f64,
    /// `+inf` at and beyond the pole at `blowup_floor`.
    pub upper: f64,
    pub blowup_floor: f64,
}

/// Bounds on `|phi(t* + delta)|` given `|phi(t*)| = mod_star`, from comparing
/// `d|phi|/dt = |phi|(1 - 2 Re phi)/2` with `r/2 -+ r^2`.
pub fn modulus_bounds(mod_star: f64, delta_t: f64) -> ModulusBounds {
    let m = mod_star;
    let g = (0.5 * delta_t).exp();
    let lower = m * g / (1.0 + 2.0 * m * (g - 1.0));
    let den = 1.0 - 2.0 * m * (g - 1.0);
    let upper = if den > 0.0 { m * g / den } else { f64::INFINITY };
    let blowup_floor = if m > 0.0 {
        2.0 * (1.0 + 1.0 / (2.0 * m)).ln()
    } else {
        f64::INFINITY
    };
    ModulusBounds {
        lower,
        upper,
        blowup_floor,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundsReport {
    pub paths_checked: usize,
    pub sandwich_violations: usize,
    pub persistence_violations: usize,
    /// Paths with at least one violation of either kind.
    pub violating_paths: usize,
}

/// Checks every unflagged path against the modulus sandwich measured from
/// the first snapshot, and checks that `|phi| >= 1/2` persists (within `tol`)
/// once reached.
pub fn check_path_bounds(snaps: &[ComplexEnsemble], tol: f64) -> Result<BoundsReport> {
    let Some(first) = snaps.first() else {
        return Ok(BoundsReport::default());
    };
    let n = first.n_paths();
    if snaps.iter().any(|s| s.n_paths() != n) {
        return Err(Error::Alignment("snapshots have different path counts".into()));
    }
    let mut rep = BoundsReport::default();
    for i in 0..n {
        if snaps.iter().any(|s| !s.alive[i]) {
            continue;
        }
        rep.paths_checked += 1;
        let m = first.points[i].norm();
        let mut reached = m >= 0.5;
        let mut bad = false;
        for s in &snaps[1..] {
            let r = s.points[i].norm();
            let b = modulus_bounds(m, s.time - first.time);
            if r < b.lower - tol || r > b.upper + tol {
                rep.sandwich_violations += 1;
                bad = true;
            }
            if reached && r < 0.5 - tol {
                rep.persistence_violations += 1;
                bad = true;
            }
            reached |= r >= 0.5;
        }
        rep.violating_paths += usize::from(bad);
    }
    Ok(rep)
}

/// Real-valued ensemble of one of the solvable diffusions.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEnsemble {
    pub values: Vec<f64>,
    pub time: f64,
    pub seed: u64,
}

impl RealEnsemble {
    pub fn mean(&self) -> MeanEstimate {
        mean_stderr(&self.values)
    }

    pub fn variance(&self) -> MeanEstimate {
        variance_stderr(&self.values)
    }

    pub fn sample_mean<F: Fn(f64) -> f64>(&self, f: F) -> MeanEstimate {
        let xs: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        mean_stderr(&xs)
    }

    /// Monte-Carlo generating function `E[exp(phi (x - 1))]`.
    pub fn generating_function(&self, x: f64) -> MeanEstimate {
        self.sample_mean(|p| (p * (x - 1.0)).exp())
    }
}

/// Euler-Maruyama with full truncation for `dphi = alpha dt + sqrt(2 alpha phi) dW`,
/// reporting `max(phi, 0)`.
pub fn simulate_sqbessel(alpha: f64, phi0: f64, cfg: &SdeConfig, t_end: f64) -> Result<RealEnsemble> {
    cfg.validate()?;
    if !(alpha > 0.0) || !(phi0 >= 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("need alpha > 0, phi0 >= 0, t_end >= 0".into()));
    }
    let (k, h) = substeps(0.0, t_end, cfg.dt);
    let values = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, StreamTag::SquaredBessel, i as u64);
            let mut x = phi0;
            for _ in 0..k {
                let dw = increment(&mut rng, h, cfg.noise);
                x += alpha * h + (2.0 * alpha * x.max(0.0)).sqrt() * dw;
            }
            x.max(0.0)
        })
        .collect();
    Ok(RealEnsemble {
        values,
        time: t_end,
        seed: cfg.seed,
    })
}

/// Exact samples of `(sqrt(phi0) + sqrt(beta) W_t)^2`.
pub fn simulate_appendix_d(beta: f64, phi0: f64, cfg: &SdeConfig, t_end: f64) -> Result<RealEnsemble> {
    cfg.validate()?;
    if !(beta > 0.0) || !(phi0 >= 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("need beta > 0, phi0 >= 0, t_end >= 0".into()));
    }
    let root = phi0.sqrt();
    let scale = (beta * t_end).sqrt();
    let values = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, StreamTag::AppendixD, i as u64);
            let z: f64 = rng.sample(StandardNormal);
            if scale == 0.0 {
                return phi0;
            }
            let y = root + scale * z;
            y * y
        })
        .collect();
    Ok(RealEnsemble {
        values,
        time: t_end,
        seed: cfg.seed,
    })
}

/// Sampler for a fixed start point.
pub fn fixed(z: Complex64) -> impl Fn(&mut ChaCha8Rng) -> Complex64 + Sync {
    move |_| z
}
