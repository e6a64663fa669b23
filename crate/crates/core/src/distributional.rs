//! Distribution-valued amplitudes.
//!
//! A finite comb `Psi = sum_n c_n delta^(n)` is paired with test functions by
//! `<delta^(n), f> = (-1)^n f^(n)(0)`. Combs built from factorial moments use
//! `c_n = (-1)^n M_n / n!`, so that `<Psi, s^m> = M_m` and
//! `<Psi, exp(s (x - 1))> = G(x)`. The Cauchy representation of such a comb
//! is `-(1/2 pi i) sum_n M_n phi^-(n+1)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::genfunc::Polynomial;
use crate::io::fmt_f64;
use crate::moments::FactorialMoments;
use crate::reaction::CountDistribution;
use crate::sde::{ComplexEnsemble, MIN_ALIVE};
use crate::stats::{binomial, factorial, ln_factorial, mean_stderr};

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaComb {
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl DeltaComb {
    pub fn new(coeffs: Vec<f64>, time: f64) -> Self {
        Self { coeffs, time }
    }

    /// `delta_0`.
    pub fn vacuum() -> Self {
        Self::new(vec![1.0], 0.0)
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Moments `<Psi, s^n> = (-1)^n n! c_n`.
    pub fn moments(&self) -> FactorialMoments {
        let values = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| sign(n) * factorial(n as u64) * c)
            .collect();
        FactorialMoments::new(values, 1.0, self.time)
    }

    /// CSV with columns `n,c_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,c_n\n");
        for (n, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{n},{}\n", fmt_f64(*c)));
        }
        out
    }
}

fn sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn comb_from_moments(m: &FactorialMoments) -> DeltaComb {
    let coeffs = m
        .values()
        .iter()
        .enumerate()
        .map(|(n, v)| sign(n) * v / factorial(n as u64))
        .collect();
    DeltaComb::new(coeffs, m.time())
}

/// `binom(a, m)` for any integer `a`, with `binom(-n, m) = (-1)^m binom(n + m - 1, m)`.
fn binom_signed(a: i64, m: u64) -> f64 {
    if a >= 0 {
        binomial(a as u64, m)
    } else {
        let n = (-a) as u64;
        sign(m as usize) * binomial(n + m - 1, m)
    }
}

/// Explicit amplitude for exactly `2 k0` initial particles:
///
/// ```text
/// Psi = delta + sum_{k=1}^{k0} A_k e^{-k(2k-1) lambda t} [
///     sum_{j=0}^{2k}   2^-j binom(2k, j)   binom(-2k-1, j) delta^(j)
///   - sum_{j=0}^{2k-2} 2^-j binom(2k-2, j) binom(-2k+1, j) delta^(j) ]
/// A_k = 2^{2k} (2k0)! (k0+k)! / ((2k0+2k)! (k0-k)!)
/// ```
pub fn appendix_c_comb(k0: u32, lambda: f64, t: f64) -> Result<DeltaComb> {
    if k0 == 0 {
        return Err(Error::InvalidArgument("k0 must be at least 1".into()));
    }
    let k0 = k0 as u64;
    let mut coeffs = vec![0.0; 2 * k0 as usize + 1];
    coeffs[0] = 1.0;
    for k in 1..=k0 {
        let ln_a = (2 * k) as f64 * 2f64.ln() + ln_factorial(2 * k0) + ln_factorial(k0 + k)
            - ln_factorial(2 * k0 + 2 * k)
            - ln_factorial(k0 - k);
        let amp = (ln_a - (k * (2 * k - 1)) as f64 * lambda * t).exp();
        for j in 0..=2 * k {
            coeffs[j as usize] +=
                amp * 0.5f64.powi(j as i32) * binomial(2 * k, j) * binom_signed(-(2 * k as i64) - 1, j);
        }
        for j in 0..=2 * k - 2 {
            coeffs[j as usize] -=
                amp * 0.5f64.powi(j as i32) * binomial(2 * k - 2, j) * binom_signed(-(2 * k as i64) + 1, j);
        }
    }
    Ok(DeltaComb::new(coeffs, t))
}

/// `<Psi, exp(s (x - 1))> = sum_n c_n (-1)^n (x - 1)^n`.
pub fn pair_exponential(comb: &DeltaComb, x: f64) -> f64 {
    let y = 1.0 - x;
    // sum c_n (1 - x)^n by Horner
    comb.coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// `<Psi, p> = sum_n c_n (-1)^n n! p_n`.
pub fn pair_polynomial(comb: &DeltaComb, p: &Polynomial) -> f64 {
    comb.coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c * sign(n) * factorial(n as u64) * p.coeff(n))
        .sum()
}

/// Expands `<Psi, exp(s (x - 1))>` as a polynomial in `x`; its coefficients
/// are the probabilities the comb encodes.
pub fn comb_generating_polynomial(comb: &DeltaComb) -> Polynomial {
    let k = comb.coeffs.len();
    let mut out = vec![0.0; k];
    for (n, c) in comb.coeffs.iter().enumerate() {
        // c_n (1 - x)^n
        for i in 0..=n {
            out[i] += c * binomial(n as u64, i as u64) * sign(i);
        }
    }
    Polynomial::new(out)
}

/// Probabilities encoded by a comb, as a distribution on `0..=K`.
pub fn comb_to_distribution(comb: &DeltaComb) -> Result<CountDistribution> {
    let p = comb_generating_polynomial(comb);
    let mut probs = p.coeffs().to_vec();
    probs.resize(comb.coeffs.len().max(1), 0.0);
    Ok(CountDistribution::new(probs, comb.time)?)
}

/// Anything with a Cauchy representation evaluable off the real axis.
pub trait CauchyFunction {
    fn cauchy(&self, phi: Complex64) -> Result<Complex64>;
}

impl<F: Fn(Complex64) -> Complex64> CauchyFunction for F {
    fn cauchy(&self, phi: Complex64) -> Result<Complex64> {
        Ok(self(phi))
    }
}

/// Truncated Laurent series `-(1/2 pi i) sum_{n<=N} M_n phi^-(n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentRep {
    moments: Vec<f64>,
    radius: f64,
    exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaurentValue {
    pub value: Complex64,
    pub remainder_bound: f64,
}

/// Laurent representation using all stored moments and convergence radius `radius`.
pub fn laurent_from_moments(m: &FactorialMoments, radius: f64) -> Result<LaurentRep> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok(LaurentRep {
        moments: m.values().to_vec(),
        radius,
        exact: false,
    })
}

/// Laurent representation truncated to `n_terms` moments.
pub fn laurent_truncated(m: &FactorialMoments, n_terms: usize, radius: f64) -> Result<LaurentRep> {
    let mut rep = laurent_from_moments(m, radius)?;
    rep.moments.truncate(n_terms);
    Ok(rep)
}

/// Cauchy representation of a finite comb. The series is finite, so there
/// is no remainder and it is defined for every `phi != 0`.
pub fn laurent_from_comb(comb: &DeltaComb) -> LaurentRep {
    LaurentRep {
        moments: comb.moments().values().to_vec(),
        radius: 0.0,
        exact: true,
    }
}

impl LaurentRep {
    pub fn n_terms(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, phi: Complex64) -> Result<LaurentValue> {
        let modulus = phi.norm();
        if !(modulus > self.radius) {
            return Err(Error::Divergence {
                modulus,
                radius: self.radius,
            });
        }
        let w = phi.inv();
        // sum M_n w^(n+1) by Horner
        let s = self
            .moments
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, m| (acc + m) * w);
        let value = -s / Complex64::new(0.0, 2.0 * PI);
        let remainder_bound = if self.exact {
            0.0
        } else {
            let r = modulus / self.radius;
            let big = self.moments.iter().map(|m| m.abs()).fold(0.0, f64::max);
            big * r.powi(-(self.moments.len() as i32)) / (1.0 - 1.0 / r)
        };
        Ok(LaurentValue { value, remainder_bound })
    }

    /// CSV with columns `re_phi,im_phi,re_value,im_value,remainder_bound`.
    pub fn to_csv(&self, points: &[Complex64]) -> Result<String> {
        let mut out = String::from("re_phi,im_phi,re_value,im_value,remainder_bound\n");
        for z in points {
            let v = self.eval(*z)?;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(v.value.re),
                fmt_f64(v.value.im),
                fmt_f64(v.remainder_bound)
            ));
        }
        Ok(out)
    }
}

impl CauchyFunction for LaurentRep {
    fn cauchy(&self, phi: Complex64) -> Result<Complex64> {
        self.eval(phi).map(|v| v.value)
    }
}

/// `int [F(s + i eps) - F(s - i eps)] f(s) ds` over `range`, by Simpson's rule
/// after the substitution `s = eps sinh(u)`, which resolves the width-`eps`
/// peak at the origin. Errors when the range-truncation estimate
/// `|range| * max endpoint |integrand|` exceeds `tol`.
pub fn boundary_jump_pair<C: CauchyFunction + ?Sized>(
    rep: &C,
    f: &Polynomial,
    eps: f64,
    range: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let (a, b) = range;
    if !(eps > 0.0) || !(a < b) {
        return Err(Error::InvalidArgument("need eps > 0 and a nonempty range".into()));
    }
    let integrand = |s: f64| -> Result<f64> {
        let up = rep.cauchy(Complex64::new(s, eps))?;
        let down = rep.cauchy(Complex64::new(s, -eps))?;
        Ok((up - down).re * f.eval(s))
    };
    let estimate = (b - a) * integrand(a)?.abs().max(integrand(b)?.abs());
    if estimate > tol {
        return Err(Error::Range {
            estimate,
            tolerance: tol,
        });
    }
    let (ua, ub) = ((a / eps).asinh(), (b / eps).asinh());
    let intervals = 8000;
    let h = (ub - ua) / intervals as f64;
    let mut sum = 0.0;
    for i in 0..=intervals {
        let u = ua + h * i as f64;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * integrand(eps * u.sinh())? * eps * u.cosh();
    }
    Ok(sum * h / 3.0)
}

/// Default schedule of regularization widths.
pub const EPS_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSchedule {
    /// `(eps, value)` per schedule entry.
    pub values: Vec<(f64, f64)>,
    /// Linear extrapolation to `eps = 0` from the last two entries.
    pub richardson: Option<f64>,
}

pub fn boundary_jump_schedule<C: CauchyFunction + ?Sized>(
    rep: &C,
    f: &Polynomial,
    schedule: &[f64],
    range: (f64, f64),
    tol: f64,
) -> Result<JumpSchedule> {
    let values = schedule
        .iter()
        .map(|&e| boundary_jump_pair(rep, f, e, range, tol).map(|v| (e, v)))
        .collect::<Result<Vec<_>>>()?;
    let richardson = match values.as_slice() {
        [.., (e1, v1), (e2, v2)] if e1 != e2 => Some((e1 * v2 - e2 * v1) / (e1 - e2)),
        _ => None,
    };
    Ok(JumpSchedule { values, richardson })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Monte-Carlo Cauchy transform `(1/2 pi i) E[1/(z - phi)]` over unflagged points.
/// `phi` must lie outside the modulus hull of the points with a 10% margin.
pub fn mc_cauchy(ens: &ComplexEnsemble, phi: Complex64) -> Result<CauchyEstimate> {
    let alive = ens.n_alive();
    if alive < MIN_ALIVE {
        return Err(Error::InsufficientEnsemble {
            alive,
            required: MIN_ALIVE,
        });
    }
    let hull = ens.max_modulus();
    if !(phi.norm() > 1.1 * hull) {
        return Err(Error::Proximity {
            point: format!("{phi}"),
            hull,
        });
    }
    let k = Complex64::new(0.0, 2.0 * PI).inv();
    let (re, im): (Vec<f64>, Vec<f64>) = ens
        .alive_points()
        .map(|z| {
            let v = k * (z - phi).inv();
            (v.re, v.im)
        })
        .unzip();
    let (r, i) = (mean_stderr(&re), mean_stderr(&im));
    Ok(CauchyEstimate {
        value: Complex64::new(r.mean, i.mean),
        stderr: r.stderr.hypot(i.stderr),
        stderr_re: r.stderr,
        stderr_im: i.stderr,
    })
}

/// Nonnegative density sampled on `[0, phi_max]` with Simpson weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl GridDensity {
    /// Needs an odd number (>= 3) of strictly increasing nodes starting at 0.
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 || nodes.len() % 2 == 0 || nodes.len() != values.len() {
            return Err(Error::InvalidArgument(
                "density grid needs an odd number >= 3 of nodes, one value each".into(),
            ));
        }
        if nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "density nodes must start at 0 and increase".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let mut weights = vec![0.0; nodes.len()];
        for i in (0..nodes.len() - 2).step_by(2) {
            let h0 = nodes[i + 1] - nodes[i];
            let h1 = nodes[i + 2] - nodes[i + 1];
            let s = h0 + h1;
            weights[i] += s / 6.0 * (2.0 - h1 / h0);
            weights[i + 1] += s * s * s / (6.0 * h0 * h1);
            weights[i + 2] += s / 6.0 * (2.0 - h0 / h1);
        }
        Ok(Self { nodes, values, weights })
    }

    /// Uniform grid with `intervals` (even) intervals on `[0, phi_max]`.
    pub fn from_fn<F: Fn(f64) -> f64>(phi_max: f64, intervals: usize, f: F) -> Result<Self> {
        let nodes: Vec<f64> = (0..=intervals).map(|i| phi_max * i as f64 / intervals as f64).collect();
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(nodes, values)
    }

    /// Smallest `phi_max > n_max` at which `exp(-phi) phi^n_max / n_max!` drops below 1e-14.
    pub fn default_phi_max(n_max: usize) -> f64 {
        let n = n_max as f64;
        let lnf = ln_factorial(n_max as u64);
        let mut x = n.max(1.0);
        while n * x.ln() - x - lnf > (1e-14f64).ln() {
            x += 0.5;
        }
        x
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * v.abs()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct PoissonTransform {
    pub dist: CountDistribution,
    pub output_l1: f64,
    pub input_l1: f64,
}

/// `P_n = (1/n!) int phi^n e^{-phi} Psi(phi) dphi` for `n <= n_max`.
///
/// The kernel for index `n` peaks at `phi = n` with width `sqrt(n)`; every
/// interval below `n_max + 10 sqrt(n_max) + 10` must be at most a quarter of
/// the local width `max(1, sqrt(phi))`.
pub fn poisson_transform(density: &GridDensity, n_max: usize) -> Result<PoissonTransform> {
    let reach = n_max as f64 + 10.0 * (n_max as f64).sqrt() + 10.0;
    for w in density.nodes.windows(2) {
        if w[0] > reach {
            break;
        }
        let limit = 0.25 * w[0].sqrt().max(1.0);
        if w[1] - w[0] > limit {
            return Err(Error::Resolution {
                n_max,
                spacing: w[1] - w[0],
                limit,
            });
        }
    }
    let mut probs = vec![0.0; n_max + 1];
    for ((&x, &v), &w) in density.nodes.iter().zip(&density.values).zip(&density.weights) {
        if v == 0.0 || w == 0.0 {
            continue;
        }
        if x == 0.0 {
            probs[0] += w * v;
            continue;
        }
        let lx = x.ln();
        for (n, p) in probs.iter_mut().enumerate() {
            *p += w * v * (n as f64 * lx - x - ln_factorial(n as u64)).exp();
        }
    }
    let output_l1 = probs.iter().map(|p| p.abs()).sum();
    Ok(PoissonTransform {
        dist: CountDistribution::from_parts_unchecked(probs, 0.0, 0.0),
        output_l1,
        input_l1: density.l1_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::solve_closed;

    #[test]
    fn vacuum_comb() {
        let c = comb_from_moments(&FactorialMoments::new(vec![1.0, 0.0, 0.0], 1.0, 0.0));
        assert_eq!(c.coeffs, vec![1.0, 0.0, 0.0]);
        assert_eq!(pair_exponential(&c, 0.3), 1.0);
        assert_eq!(pair_polynomial(&c, &Polynomial::constant(1.0)), 1.0);
    }

    #[test]
    fn two_particle_comb() {
        let t = 0.4;
        let e = (-t as f64).exp();
        let c = comb_from_moments(&FactorialMoments::new(vec![1.0, 2.0 * e, 2.0 * e], 1.0, t));
        assert_eq!(c.coeffs, vec![1.0, -2.0 * e, e]);
        let a = appendix_c_comb(1, 1.0, t).unwrap();
        for (x, y) in a.coeffs.iter().zip(&c.coeffs) {
            assert!((x - y).abs() < 1e-15);
        }
        for x in [-1.0, 0.0, 0.5, 1.0] {
            assert!((pair_exponential(&a, x) - (1.0 + e * (x * x - 1.0))).abs() < 1e-14);
        }
        assert!((pair_polynomial(&c, &Polynomial::monomial(2)) - 2.0 * e).abs() < 1e-15);
    }

    #[test]
    fn appendix_c_initial_condition_and_decay() {
        let c = appendix_c_comb(1, 1.0, 0.0).unwrap();
        let p = comb_generating_polynomial(&c);
        assert!((p.coeff(2) - 1.0).abs() < 1e-14 && p.coeff(0).abs() < 1e-14 && p.coeff(1).abs() < 1e-14);
        let late = appendix_c_comb(3, 1.0, 60.0).unwrap();
        assert_eq!(late.coeffs[0], 1.0);
        assert!(late.coeffs[1..].iter().all(|c| c.abs() < 1e-20));
    }

    #[test]
    fn appendix_c_agrees_with_moment_solution() {
        for k0 in 1..=3u32 {
            for t in [0.0, 0.2, 1.0] {
                let m0 = FactorialMoments::point_mass(2 * k0 as u64, 1.0);
                let c = comb_from_moments(&solve_closed(&m0, t));
                let a = appendix_c_comb(k0, 1.0, t).unwrap();
                assert_eq!(a.coeffs.len(), c.coeffs.len());
                for (x, y) in a.coeffs.iter().zip(&c.coeffs) {
                    assert!((x - y).abs() < 1e-10, "k0={k0} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn comb_to_distribution_round_trip() {
        let t = 0.7;
        let d = comb_to_distribution(&appendix_c_comb(1, 1.0, t).unwrap()).unwrap();
        assert!((d.probs()[2] - (-t as f64).exp()).abs() < 1e-14);
        assert!(d.probs()[1].abs() < 1e-14);
    }

    #[test]
    fn pairing_second_derivative() {
        let c = DeltaComb::new(vec![0.0, 0.0, 1.0], 0.0);
        assert_eq!(pair_polynomial(&c, &Polynomial::monomial(2)), 2.0);
    }

    #[test]
    fn laurent_examples() {
        let delta = laurent_from_comb(&DeltaComb::vacuum());
        let z = Complex64::new(0.3, 2.0);
        let v = delta.eval(z).unwrap();
        let expect = -(Complex64::new(0.0, 2.0 * PI) * z).inv();
        assert!((v.value - expect).norm() < 1e-15);
        assert_eq!(v.remainder_bound, 0.0);

        // point mass at s = 1
        let m = FactorialMoments::new(vec![1.0; 40], 1.0, 0.0);
        let rep = laurent_from_moments(&m, 1.0).unwrap();
        let phi = Complex64::new(3.0, 1.0);
        let v = rep.eval(phi).unwrap();
        let direct = Complex64::new(0.0, 2.0 * PI).inv() / (1.0 - phi);
        assert!((v.value - direct).norm() <= v.remainder_bound + 1e-15);
        assert!(matches!(
            rep.eval(Complex64::new(0.5, 0.0)),
            Err(Error::Divergence { .. })
        ));

        let doubled = laurent_from_moments(&FactorialMoments::new(vec![2.0; 40], 1.0, 0.0), 1.0).unwrap();
        assert!((doubled.eval(phi).unwrap().value - 2.0 * v.value).norm() < 1e-15);
    }

    #[test]
    fn boundary_jump_examples() {
        let delta = laurent_from_comb(&DeltaComb::vacuum());
        let one = boundary_jump_pair(&delta, &Polynomial::constant(1.0), 1e-3, (-1.0, 1.0), 1e-2).unwrap();
        assert!((one - 1.0).abs() < 1e-2, "{one}");
        let zero = boundary_jump_pair(&delta, &Polynomial::constant(0.0), 1e-3, (-1.0, 1.0), 1e-2).unwrap();
        assert_eq!(zero, 0.0);
        let rep = laurent_from_comb(&appendix_c_comb(1, 1.0, 0.5).unwrap());
        let sched = boundary_jump_schedule(&rep, &Polynomial::monomial(2), &EPS_SCHEDULE, (-1.0, 1.0), 1e-1).unwrap();
        let target = 2.0 * (-0.5f64).exp();
        let errs: Vec<f64> = sched.values.iter().map(|(_, v)| (v - target).abs()).collect();
        assert!(errs[1] / target < 1e-2);
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn mc_cauchy_examples() {
        let ens = ComplexEnsemble::from_points(vec![Complex64::new(1.0, 0.0); 100], 0.0);
        let phi = Complex64::new(0.0, 2.0);
        let v = mc_cauchy(&ens, phi).unwrap();
        let expect = Complex64::new(0.0, 2.0 * PI).inv() / (Complex64::new(1.0, 0.0) - phi);
        assert!((v.value - expect).norm() < 1e-15);
        assert!(matches!(
            mc_cauchy(&ens, Complex64::new(1.05, 0.0)),
            Err(Error::Proximity { .. })
        ));
    }

    #[test]
    fn exponential_density_transform() {
        let d = GridDensity::from_fn(40.0, 4000, |x| (-x).exp()).unwrap();
        let t = poisson_transform(&d, 30).unwrap();
        for n in 0..=30 {
            assert!((t.dist.probs()[n] - 0.5f64.powi(n as i32 + 1)).abs() < 1e-6);
        }
    }

    #[test]
    fn narrow_bump_gives_poisson() {
        let mu = 2.0;
        let w = 0.01;
        let d = GridDensity::from_fn(10.0, 20000, |x| {
            (-(x - mu).powi(2) / (2.0 * w * w)).exp() / (w * (2.0 * PI).sqrt())
        })
        .unwrap();
        let t = poisson_transform(&d, 12).unwrap();
        let pois = crate::reaction::poisson_pmf(mu, 12);
        for n in 0..=12 {
            assert!((t.dist.probs()[n] - pois[n]).abs() < 1e-3);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let d = GridDensity::from_fn(40.0, 40, |x| (-x).exp()).unwrap();
        assert!(matches!(poisson_transform(&d, 10), Err(Error::Resolution { .. })));
    }
}
