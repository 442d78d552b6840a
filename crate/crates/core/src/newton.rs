//! Damped Newton-Raphson for small dense nonlinear systems with a
//! forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Convergence threshold on the residual infinity norm.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative forward-difference perturbation.
    pub rel_perturbation: f64,
    /// Step halvings allowed per iteration before giving up.
    pub max_backtracks: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 50,
            rel_perturbation: 1e-7,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub residual_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual_norm:e})")]
    NotConverged {
        iterations: usize,
        residual_norm: f64,
    },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("residual undefined at the initial guess")]
    InvalidStart,
    #[error("line search failed at iteration {iteration} (residual {residual_norm:e})")]
    LineSearch {
        iteration: usize,
        residual_norm: f64,
    },
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `f(x) = 0`. `f` returns `None` where the residual is undefined; the
/// step is then halved. `x_scale` sets the perturbation floor per unknown.
pub fn solve<F>(
    mut f: F,
    x0: &[f64],
    x_scale: &[f64],
    settings: &NewtonSettings,
) -> Result<NewtonReport, NewtonError>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut evals = 1;
    let mut r = f(&x).ok_or(NewtonError::InvalidStart)?;
    let mut norm = inf_norm(&r);
    if !norm.is_finite() {
        return Err(NewtonError::InvalidStart);
    }
    for iter in 0..settings.max_iters {
        if norm <= settings.tol {
            return Ok(NewtonReport {
                x,
                residual_norm: norm,
                iterations: iter,
                residual_evals: evals,
            });
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let h = settings.rel_perturbation * x[j].abs().max(x_scale[j]);
            let mut xp = x.clone();
            xp[j] += h;
            evals += 1;
            let rp = match f(&xp) {
                Some(rp) => rp,
                None => {
                    // one-sided backward difference near the edge of the domain
                    xp[j] = x[j] - h;
                    evals += 1;
                    let rm = f(&xp).ok_or(NewtonError::SingularJacobian { iteration: iter })?;
                    for i in 0..m {
                        jac[(i, j)] = (r[i] - rm[i]) / h;
                    }
                    continue;
                }
            };
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rhs = DVector::from_iterator(m, r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(NewtonError::SingularJacobian { iteration: iter })?;

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=settings.max_backtracks {
            let trial: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            evals += 1;
            if let Some(rt) = f(&trial) {
                let nt = inf_norm(&rt);
                if nt.is_finite() && nt < norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NewtonError::LineSearch {
                iteration: iter,
                residual_norm: norm,
            });
        }
    }
    if norm <= settings.tol {
        return Ok(NewtonReport {
            x,
            residual_norm: norm,
            iterations: settings.max_iters,
            residual_evals: evals,
        });
    }
    Err(NewtonError::NotConverged {
        iterations: settings.max_iters,
        residual_norm: norm,
    })
}
