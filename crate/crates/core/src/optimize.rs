//! Damped Gauss–Newton (Levenberg–Marquardt) least squares with a
//! central-difference Jacobian and Marquardt diagonal scaling.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative reduction of the cost below which iteration stops.
    pub ftol: f64,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Typical magnitude of each parameter (sets the difference step for
    /// parameters that are near zero). Defaults to 1.
    pub typical: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, ftol: 1e-16, xtol: 1e-13, fd_step: 1e-6, typical: None }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub rss: f64,
    /// One-sigma errors from `s² (JᵀJ)⁻¹`, `s² = rss / (m - n)`.
    pub stderr: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub n_residuals: usize,
}

pub fn jacobian<F>(f: &F, x: &[f64], r0_len: usize, opts: &LmOptions) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(r0_len, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let typ = opts.typical.as_ref().map_or(1.0, |t| t[j].abs());
        let h = opts.fd_step * x[j].abs().max(typ).max(f64::MIN_POSITIVE);
        xp[j] = x[j] + h;
        let rp = f(&xp)?;
        xp[j] = x[j] - h;
        let rm = f(&xp)?;
        xp[j] = x[j];
        if rp.len() != r0_len || rm.len() != r0_len {
            return Err(Error::Dimension("residual length changed between evaluations".into()));
        }
        for i in 0..r0_len {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimize `Σ r_i(x)²` starting from `x0`.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let m = r.len();
    if m < n {
        return Err(Error::InvalidParameter(format!("{m} residuals for {n} parameters")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite residual at the initial guess".into()));
    }
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut jac = jacobian(&f, &x, m, opts)?;
    let mut converged = c == 0.0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let diag: Vec<f64> = (0..n).map(|k| a[(k, k)].max(1e-300)).collect();
        let mut stepped = false;
        for _ in 0..60 {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * diag[k];
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rn = match f(&xn) {
                Ok(v) if v.iter().all(|z| z.is_finite()) => v,
                _ => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let cn = cost(&rn);
            // predicted reduction of the quadratic model
            let pred = -(2.0 * g.dot(&delta) + (&jac * &delta).norm_squared());
            let rho = if pred > 0.0 { (c - cn) / pred } else { -1.0 };
            if cn < c {
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = delta.norm() <= opts.xtol * (xnorm + opts.xtol);
                let small_gain = (c - cn) <= opts.ftol * c;
                x = xn;
                r = rn;
                c = cn;
                lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                lambda = lambda.max(1e-15);
                nu = 2.0;
                stepped = true;
                converged = small_step || small_gain || c == 0.0;
                break;
            } else {
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if delta.norm() <= opts.xtol * (xnorm + opts.xtol) {
                    // no further progress is representable
                    converged = true;
                    break;
                }
                lambda *= nu;
                nu *= 2.0;
            }
        }
        if converged {
            break;
        }
        if !stepped {
            return Err(Error::NonConvergence(format!("no descent step found after {iterations} iterations (cost {c:.3e})")));
        }
        jac = jacobian(&f, &x, m, opts)?;
    }
    if !converged {
        return Err(Error::NonConvergence(format!("iteration limit {} reached (cost {c:.3e})", opts.max_iter)));
    }
    let jac = jacobian(&f, &x, m, opts)?;
    let dof = (m - n).max(1) as f64;
    let s2 = c / dof;
    let covariance = pseudo_inverse(&(jac.transpose() * &jac)) * s2;
    let stderr = (0..n).map(|k| covariance[(k, k)].max(0.0).sqrt()).collect();
    Ok(LmResult { params: x, rss: c, stderr, covariance, iterations, n_residuals: m })
}

/// Pseudo-inverse of a normal matrix after Jacobi scaling, so that
/// parameters of very different magnitude (seconds next to rad/s) are not
/// cut off by the relative singular-value threshold.
fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|k| if a[(k, k)] > 0.0 { 1.0 / a[(k, k)].sqrt() } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * d[i] * d[j]);
    let svd = scaled.svd(true, true);
    let max = svd.singular_values.max();
    match svd.pseudo_inverse(max * 1e-14) {
        Ok(p) => DMatrix::from_fn(n, n, |i, j| p[(i, j)] * d[i] * d[j]),
        Err(_) => DMatrix::from_element(n, n, f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fits_exponential_exactly() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.2).collect();
        let res = levenberg_marquardt(
            |p| Ok(t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y).collect()),
            &[1.0, 0.5, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(res.params[0], 2.5, max_relative = 1e-9);
        assert_relative_eq!(res.params[1], 1.3, max_relative = 1e-9);
        assert_relative_eq!(res.params[2], 0.2, max_relative = 1e-9);
    }

    #[test]
    fn standard_errors_survive_disparate_parameter_scales() {
        // straight line with a 1e-8-scale abscissa: slope ~1e9, intercept ~1
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 1e-9).collect();
        let y: Vec<f64> = t.iter().enumerate().map(|(k, t)| 3e8 * t + 0.7 + 1e-3 * ((k * 7919) % 13) as f64).collect();
        let res = levenberg_marquardt(
            |p| Ok(t.iter().zip(&y).map(|(t, y)| p[0] * t + p[1] - y).collect()),
            &[1e8, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        let n = t.len() as f64;
        let mt = t.iter().sum::<f64>() / n;
        let sxx: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
        let s2 = res.rss / (n - 2.0);
        assert_relative_eq!(res.stderr[0], (s2 / sxx).sqrt(), max_relative = 1e-6);
        assert_relative_eq!(res.stderr[1], (s2 * (1.0 / n + mt * mt / sxx)).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn rosenbrock_residuals() {
        let res = levenberg_marquardt(
            |p| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]),
            &[-1.2, 1.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(res.params[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(res.params[1], 1.0, epsilon = 1e-8);
    }
}
