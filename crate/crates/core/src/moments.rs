//! Factorial-moment dynamics of binary annihilation.
//!
//! For `A + A -> 0` at rate `lambda` the factorial moments obey the
//! triangular system
//!
//! ```text
//! dM_m/dt = -lambda * ( m(m-1)/2 * M_m + m * M_{m+1} )
//! ```
//!
//! which closes exactly when the initial counts are bounded, and the same
//! coefficients govern `E[phi^m]` for `dphi = -phi^2 dt + i phi dW`.

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeTolerance};

/// `M_0..M_max` of a count distribution at `time`, under rate `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialMoments {
    values: Vec<f64>,
    rate: f64,
    time: f64,
}

impl FactorialMoments {
    pub fn new(values: Vec<f64>, rate: f64, time: f64) -> Self {
        Self { values, rate, time }
    }

    /// Moments of the point mass at `n0`: `M_m = n0!/(n0-m)!`.
    pub fn point_mass(n0: u64, rate: f64) -> Self {
        let values = (0..=n0).map(|m| crate::stats::falling_factorial(n0, m)).collect();
        Self::new(values, rate, 0.0)
    }

    /// Moments of Poisson(mu) data: `M_m = mu^m`, stored up to `m_max`.
    pub fn poisson(mu: f64, m_max: usize, rate: f64) -> Self {
        Self::new((0..=m_max).map(|m| mu.powi(m as i32)).collect(), rate, 0.0)
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `M_m`, zero beyond the stored range.
    pub fn get(&self, m: usize) -> f64 {
        self.values.get(m).copied().unwrap_or(0.0)
    }

    /// Largest index with a nonzero moment.
    pub fn support(&self) -> usize {
        self.values.iter().rposition(|&v| v != 0.0).unwrap_or(0)
    }

    /// CSV with columns `m,M_m,t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,M_m,t\n");
        for (m, v) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{m},{},{}\n",
                crate::io::fmt_f64(*v),
                crate::io::fmt_f64(self.time)
            ));
        }
        out
    }
}

/// Right-hand side of the moment system; entries past the stored range are zero.
pub fn moment_rhs(m: &FactorialMoments) -> Vec<f64> {
    let mut out = vec![0.0; m.values.len()];
    rhs_into(m.rate, &m.values, &mut out);
    out
}

fn rhs_into(rate: f64, values: &[f64], out: &mut [f64]) {
    let len = values.len();
    for k in 0..len {
        let kf = k as f64;
        let next = if k + 1 < len { values[k + 1] } else { 0.0 };
        out[k] = -rate * (kf * (kf - 1.0) / 2.0 * values[k] + kf * next);
    }
}

/// Decay exponent `k(k-1)/2` of mode `k`.
fn mode_exponent(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Closed-form solution of the finite moment system as sums of exponentials:
/// `M_m(t) = sum_{k=m}^{N} coeff[m][k-m] * exp(-lambda k(k-1)/2 t)`.
#[derive(Debug, Clone)]
pub struct ClosedMomentSolution {
    rate: f64,
    start: f64,
    coeffs: Vec<Vec<f64>>,
}

impl ClosedMomentSolution {
    pub fn new(m0: &FactorialMoments) -> Self {
        let n = m0.support();
        let mut coeffs: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        coeffs[n] = vec![m0.get(n)];
        for m in (0..n).rev() {
            let mut row = vec![0.0; n - m + 1];
            if m == 0 {
                // M_0 decouples: dM_0/dt = 0
                row[0] = m0.get(0);
            } else {
                let em = mode_exponent(m);
                let mut particular = 0.0;
                for (offset, &b) in coeffs[m + 1].iter().enumerate() {
                    let k = m + 1 + offset;
                    let c = -(m as f64) * b / (em - mode_exponent(k));
                    row[k - m] = c;
                    particular += c;
                }
                row[0] = m0.get(m) - particular;
            }
            coeffs[m] = row;
        }
        Self {
            rate: m0.rate(),
            start: m0.time(),
            coeffs,
        }
    }

    pub fn eval(&self, t: f64) -> FactorialMoments {
        let values = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, row)| {
                row.iter()
                    .enumerate()
                    .map(|(off, c)| c * (-self.rate * mode_exponent(m + off) * t).exp())
                    .sum()
            })
            .collect();
        FactorialMoments::new(values, self.rate, self.start + t)
    }
}

/// Exact moments after elapsed time `t` for compactly supported data.
pub fn solve_closed(m0: &FactorialMoments, t: f64) -> FactorialMoments {
    if t == 0.0 {
        return m0.clone();
    }
    ClosedMomentSolution::new(m0).eval(t)
}

#[derive(Debug, Clone)]
pub struct TruncatedMoments {
    pub moments: FactorialMoments,
    /// `|M_{m_max}(t)|`, the size of the last retained component.
    pub closure_diagnostic: f64,
    /// Set when the diagnostic exceeds the requested tolerance.
    pub closure_warning: bool,
}

/// Integrates the moment system truncated by `M_{m_max+1} = 0`.
pub fn solve_truncated(m0: &FactorialMoments, m_max: usize, t: f64, tol: f64) -> Result<TruncatedMoments> {
    if m_max < 2 {
        return Err(Error::InvalidArgument(format!("m_max must be >= 2, got {m_max}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut y: Vec<f64> = (0..=m_max).map(|m| m0.get(m)).collect();
    let rate = m0.rate();
    integrate(
        |v, dv| rhs_into(rate, v, dv),
        &mut y,
        t,
        OdeTolerance { abs: tol, rel: tol },
    )?;
    let diag = y[m_max].abs();
    Ok(TruncatedMoments {
        moments: FactorialMoments::new(y, rate, m0.time() + t),
        closure_diagnostic: diag,
        closure_warning: diag > tol,
    })
}

/// Solution `phi0 / (1 + lambda phi0 t)` of `dphi/dt = -lambda phi^2`.
pub fn mean_field(phi0: f64, lambda: f64, t: f64) -> f64 {
    phi0 / (1.0 + lambda * phi0 * t)
}

/// Coefficients `(c1, c2)` with `d E[phi^m]/dt = c1 E[phi^m] + c2 E[phi^{m+1}]`
/// for `dphi = -phi^2 dt + i phi dW`, read off the Itô generator
/// `-phi^2 (f' + f''/2)` applied to `f = phi^m`.
pub fn ito_generator_coeffs(m: u64) -> (f64, f64) {
    // -phi^2 * (m phi^{m-1} + m(m-1)/2 phi^{m-2}) = -m phi^{m+1} - m(m-1)/2 phi^m
    let pair = (m * m.saturating_sub(1) / 2) as i64;
    (-(pair as f64), -(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        let m = FactorialMoments::new(vec![1.0, 2.0, 2.0, 0.0], 1.0, 0.0);
        let d = moment_rhs(&m);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], -2.0);
        assert_eq!(d[2], -2.0);
        // m = 1 sees only the pair count
        let m = FactorialMoments::new(vec![1.0, 5.0, 3.0], 2.0, 0.0);
        assert_eq!(moment_rhs(&m)[1], -2.0 * 3.0);
    }

    #[test]
    fn rhs_is_triangular() {
        let base = FactorialMoments::new(vec![1.0, 0.3, 0.7, 0.2, 0.9, 0.1], 1.0, 0.0);
        let d0 = moment_rhs(&base);
        for j in 0..6 {
            let mut v = base.values().to_vec();
            v[j] += 1.0;
            let d = moment_rhs(&FactorialMoments::new(v, 1.0, 0.0));
            for m in 0..6 {
                let depends = d[m] != d0[m];
                assert_eq!(depends, (j == m && m >= 2) || (j == m + 1 && m >= 1), "m={m} j={j}");
            }
        }
    }

    #[test]
    fn closed_two_particles() {
        for &t in &[0.0, 0.3, 1.7] {
            let m = solve_closed(&FactorialMoments::point_mass(2, 1.0), t);
            assert!((m.get(1) - 2.0 * (-t as f64).exp()).abs() < 1e-14);
            assert!((m.get(2) - 2.0 * (-t as f64).exp()).abs() < 1e-14);
            assert_eq!(m.get(0), 1.0);
        }
    }

    #[test]
    fn closed_single_particle_is_frozen() {
        let m = solve_closed(&FactorialMoments::point_mass(1, 1.0), 3.0);
        assert_eq!(m.get(1), 1.0);
    }

    #[test]
    fn closed_zero_time_identity() {
        let m0 = FactorialMoments::point_mass(2, 1.0);
        assert_eq!(solve_closed(&m0, 0.0), m0);
    }

    #[test]
    fn closed_solution_satisfies_the_system() {
        let m0 = FactorialMoments::point_mass(7, 0.8);
        let sol = ClosedMomentSolution::new(&m0);
        let h = 1e-5;
        for &t in &[0.05, 0.4, 1.1] {
            let fwd = sol.eval(t + h);
            let bwd = sol.eval(t - h);
            let mid = sol.eval(t);
            let rhs = moment_rhs(&mid);
            for m in 0..=7 {
                let fd = (fwd.get(m) - bwd.get(m)) / (2.0 * h);
                assert!((fd - rhs[m]).abs() < 1e-6 * (1.0 + rhs[m].abs()), "m={m} t={t}");
            }
        }
    }

    #[test]
    fn truncated_matches_closed_for_compact_data() {
        let m0 = FactorialMoments::point_mass(6, 1.0);
        let tr = solve_truncated(&m0, 10, 0.8, 1e-13).unwrap();
        let cl = solve_closed(&m0, 0.8);
        for m in 0..=6 {
            assert!((tr.moments.get(m) - cl.get(m)).abs() < 1e-10);
        }
        assert!(!tr.closure_warning);
    }

    #[test]
    fn truncated_zero_time_identity() {
        let m0 = FactorialMoments::poisson(1.0, 20, 1.0);
        let tr = solve_truncated(&m0, 20, 0.0, 1e-10).unwrap();
        assert_eq!(tr.moments.values(), m0.values());
    }

    #[test]
    fn truncated_rejects_tiny_closure_order() {
        assert!(solve_truncated(&FactorialMoments::poisson(1.0, 5, 1.0), 1, 0.1, 1e-8).is_err());
    }

    #[test]
    fn mean_field_values() {
        assert_eq!(mean_field(1.0, 1.0, 1.0), 0.5);
        assert_eq!(mean_field(0.0, 1.0, 7.0), 0.0);
        assert!((mean_field(200.0, 0.01, 1.0) - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ito_coefficients() {
        assert_eq!(ito_generator_coeffs(2), (-1.0, -2.0));
        assert_eq!(ito_generator_coeffs(0), (0.0, 0.0));
        assert_eq!(ito_generator_coeffs(1), (0.0, -1.0));
    }
}
