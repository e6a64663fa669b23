//! Generating functions `G(x, t) = sum_n P_n(t) x^n`.

use crate::error::{Error, Result};
use crate::reaction::{build_generator, CountDistribution, ReactionChannel, ReactionSpec};
use crate::stats::{factorial, falling_factorial};

/// Real polynomial, coefficient `n` multiplies `x^n`. Trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `k`-th derivative, computed exactly from the coefficients.
    pub fn derivative(&self, k: usize) -> Self {
        if k > self.degree() {
            return Self::constant(0.0);
        }
        let c = (k..self.coeffs.len())
            .map(|n| self.coeffs[n] * falling_factorial(n as u64, k as u64))
            .collect();
        Self::new(c)
    }

    /// Product with `x^shift`.
    pub fn shifted(&self, shift: usize) -> Self {
        let mut c = vec![0.0; shift];
        c.extend_from_slice(&self.coeffs);
        Self::new(c)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|n| self.coeff(n) - other.coeff(n)).collect())
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_gf(self, x)
    }
}

/// Polynomial with coefficient `n` equal to `P_n`.
pub fn gf_from_distribution(dist: &CountDistribution) -> Polynomial {
    Polynomial::new(dist.probs().to_vec())
}

/// Horner evaluation.
pub fn eval_gf(p: &Polynomial, x: f64) -> f64 {
    p.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Pure death `A -> 0`: `G(x, t) = G0(1 + (x - 1) e^{-lambda t})`.
pub fn closed_pure_death(g0: &Polynomial, lambda: f64, t: f64, x: f64) -> f64 {
    eval_gf(g0, 1.0 + (x - 1.0) * (-lambda * t).exp())
}

/// Birth-death-immigration with all three rates equal to `alpha`.
pub fn closed_triplet_equal(g0: &Polynomial, alpha: f64, t: f64, x: f64) -> Result<f64> {
    let d = 1.0 - alpha * t * (x - 1.0);
    if d.abs() < 1e-14 {
        return Err(Error::Domain(format!(
            "pole of the closed form at x = {x}, alpha t = {}",
            alpha * t
        )));
    }
    let arg = (x - alpha * t * (x - 1.0)) / d;
    Ok(eval_gf(g0, arg) / d)
}

/// Birth-death-immigration with `alpha = gamma = 2 beta`.
pub fn closed_triplet_two_beta(g0: &Polynomial, beta: f64, t: f64, x: f64) -> Result<f64> {
    let d = 1.0 - 2.0 * beta * t * (x - 1.0);
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "square root branch violated: 1 - 2 beta t (x - 1) = {d}"
        )));
    }
    let arg = (x - 2.0 * beta * t * (x - 1.0)) / d;
    Ok(eval_gf(g0, arg) / d.sqrt())
}

/// Values of `G` on a grid of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GFGrid {
    nodes: Vec<f64>,
    values: Vec<f64>,
    time: f64,
}

impl GFGrid {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, time: f64) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidArgument(
                "grid needs >= 2 nodes and one value per node".into(),
            ));
        }
        if nodes[0] != -1.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument("grid must start at -1 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self { nodes, values, time })
    }

    /// `n` equally spaced nodes including both endpoints.
    pub fn uniform_nodes(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        v[0] = -1.0;
        v[n - 1] = 1.0;
        v
    }

    /// Chebyshev-Lobatto nodes, clustered towards the degenerate endpoints.
    pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n)
            .map(|i| -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        v[0] = -1.0;
        v[n - 1] = 1.0;
        v
    }

    pub fn from_polynomial(p: &Polynomial, nodes: Vec<f64>, time: f64) -> Result<Self> {
        let values = nodes.iter().map(|&x| eval_gf(p, x)).collect();
        Self::new(nodes, values, time)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Max `|G - p|` over the nodes.
    pub fn max_deviation(&self, p: &Polynomial) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, v)| (v - eval_gf(p, x)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x,G`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,G\n");
        for (x, g) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", crate::io::fmt_f64(*x), crate::io::fmt_f64(*g)));
        }
        out
    }
}

/// Crank-Nicolson for `dG/dt = (lambda/2)(1 - x^2) G_xx` with both endpoint
/// values held fixed. Steps are `t_end / ceil(t_end / dt)` long.
pub fn pde_solve_annihilation(g0: &GFGrid, lambda: f64, t_end: f64, dt: f64) -> Result<GFGrid> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument("need dt > 0, t_end >= 0, lambda > 0".into()));
    }
    let n = g0.nodes.len();
    if n < 66 {
        return Err(Error::InvalidArgument(format!(
            "need at least 64 interior nodes, got {}",
            n.saturating_sub(2)
        )));
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut u = g0.values.clone();
    if steps == 0 {
        return Ok(GFGrid {
            time: g0.time + t_end,
            ..g0.clone()
        });
    }
    let h = t_end / steps as f64;
    let x = &g0.nodes;

    // L u_i = lo_i u_{i-1} + di_i u_i + up_i u_{i+1} on interior nodes
    let m = n - 2;
    let mut lo = vec![0.0; m];
    let mut di = vec![0.0; m];
    let mut up = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let a = 0.5 * lambda * (1.0 - x[i] * x[i]);
        lo[k] = a * 2.0 / (hm * (hm + hp));
        up[k] = a * 2.0 / (hp * (hm + hp));
        di[k] = -(lo[k] + up[k]);
    }
    let r = 0.5 * h;
    // implicit matrix I - r L, factorized once
    let a_lo: Vec<f64> = lo.iter().map(|v| -r * v).collect();
    let a_up: Vec<f64> = up.iter().map(|v| -r * v).collect();
    let a_di: Vec<f64> = di.iter().map(|v| 1.0 - r * v).collect();
    let mut c_prime = vec![0.0; m];
    let mut denom = vec![0.0; m];
    for k in 0..m {
        let d = if k == 0 {
            a_di[0]
        } else {
            a_di[k] - a_lo[k] * c_prime[k - 1]
        };
        denom[k] = d;
        c_prime[k] = if k + 1 < m { a_up[k] / d } else { 0.0 };
    }

    let left = u[0];
    let right = u[n - 1];
    let limit = 10.0 * g0.sup_norm().max(f64::MIN_POSITIVE);
    let mut rhs = vec![0.0; m];
    for step in 0..steps {
        for k in 0..m {
            let i = k + 1;
            let lu = lo[k] * u[i - 1] + di[k] * u[i] + up[k] * u[i + 1];
            rhs[k] = u[i] + r * lu;
        }
        // fixed boundary values enter the implicit side as known terms
        rhs[0] += r * lo[0] * left;
        rhs[m - 1] += r * up[m - 1] * right;
        // Thomas sweep
        rhs[0] /= denom[0];
        for k in 1..m {
            rhs[k] = (rhs[k] - a_lo[k] * rhs[k - 1]) / denom[k];
        }
        for k in (0..m - 1).rev() {
            rhs[k] -= c_prime[k] * rhs[k + 1];
        }
        u[1..n - 1].copy_from_slice(&rhs);
        let sup = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(sup <= limit) {
            return Err(Error::StepSize(format!(
                "solution grew to {sup:e} (> 10x initial sup) at step {}; reduce dt",
                step + 1
            )));
        }
    }
    Ok(GFGrid {
        nodes: g0.nodes.clone(),
        values: u,
        time: g0.time + t_end,
    })
}

/// Max over a sample grid in `(-1, 1)` of
/// `|dG/dt - (lambda/j!)(x^l - x^j) d^j G/dx^j|`, where `dG/dt` comes from the
/// chain generator applied to `dist`.
pub fn general_rhs_residual(channel: &ReactionChannel, dist: &CountDistribution) -> Result<f64> {
    let spec = ReactionSpec::new(vec![*channel])?;
    let j = channel.j as usize;
    let l = channel.l as usize;
    let n_max = dist.n_max().max(j) + l.saturating_sub(j);
    let gen = build_generator(&spec, n_max)?;
    let p = dist.padded(n_max);
    let mut dp = vec![0.0; n_max + 1];
    gen.apply(p.probs(), &mut dp);
    let lhs = Polynomial::new(dp);

    let g = gf_from_distribution(dist);
    let dj = g.derivative(j);
    let rhs = dj
        .shifted(l)
        .sub(&dj.shifted(j))
        .scaled(channel.rate / factorial(j as u64));
    let diff = lhs.sub(&rhs);
    let samples = 201;
    Ok((1..samples)
        .map(|i| -1.0 + 2.0 * i as f64 / samples as f64)
        .map(|x| eval_gf(&diff, x).abs())
        .fold(0.0, f64::max))
}
