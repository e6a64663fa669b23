//! Adaptive Dormand–Prince 5(4) integrator for autonomous linear-ish systems.

use crate::error::{Error, Result};

/// Mixed absolute/relative error control. The local error of every component
/// must satisfy `|e_i| <= abs + rel * max(|y_i|, |y_new_i|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl OdeTolerance {
    pub fn absolute(tol: f64) -> Self {
        Self { abs: tol, rel: 0.0 }
    }

    /// Relative control for quantities that decay over many orders of magnitude.
    pub fn relative(tol: f64) -> Self {
        Self { abs: 1e-300, rel: tol }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(y)` from `t = 0` to `t_end` in place.
///
/// `rhs(y, dy)` writes the derivative into `dy`. Step rejection keeps every
/// accepted local error inside `tol`.
pub fn integrate<F>(mut rhs: F, y: &mut [f64], t_end: f64, tol: OdeTolerance) -> Result<OdeStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_end must be finite and >= 0, got {t_end}"
        )));
    }
    if !(tol.abs > 0.0) || tol.rel < 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut stats = OdeStats::default();
    if t_end == 0.0 {
        return Ok(stats);
    }
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(y, &mut k[0]);
    let scale0 = y
        .iter()
        .map(|v| tol.abs + tol.rel * v.abs())
        .fold(f64::INFINITY, f64::min);
    let d0 = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let d1 = k[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut h = if d1 > 0.0 {
        (0.01 * d0.max(scale0) / d1).min(t_end)
    } else {
        t_end
    };
    h = h.max(t_end * 1e-12);

    let mut t = 0.0;
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let ks = |k: &Vec<Vec<f64>>, tmp: &mut Vec<f64>, y: &[f64], coeffs: &[(usize, f64)]| {
            for i in 0..n {
                let mut acc = y[i];
                for &(s, a) in coeffs {
                    acc += h * a * k[s][i];
                }
                tmp[i] = acc;
            }
        };
        ks(&k, &mut tmp, y, &[(0, A21)]);
        rhs(&tmp, &mut k[1]);
        ks(&k, &mut tmp, y, &[(0, A31), (1, A32)]);
        rhs(&tmp, &mut k[2]);
        ks(&k, &mut tmp, y, &[(0, A41), (1, A42), (2, A43)]);
        rhs(&tmp, &mut k[3]);
        ks(&k, &mut tmp, y, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        rhs(&tmp, &mut k[4]);
        ks(&k, &mut tmp, y, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        rhs(&tmp, &mut k[5]);
        ks(&k, &mut y_new, y, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
        rhs(&y_new, &mut k[6]);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integration("non-finite error estimate".into()));
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        // components born at high order in h need tiny first steps under
        // relative control, so only a step that cannot advance t is fatal
        if t < t_end && (t + h == t || h < f64::MIN_POSITIVE) {
            return Err(Error::Integration(format!("step size underflow at t={t}")));
        }
    }
    Ok(stats)
}
