//! Damped Gauss-Newton (Levenberg-Marquardt) fits of the three trend models
//! relating the reward trade-off to the evaluation metrics.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Parametric families fitted against the sweep metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendModel {
    /// `f = a + (1 - a) / (1 + lambda^b)` — success rate.
    LogisticSuccess,
    /// `f = a + b * lambda^(-c)` — average cross-track error.
    PowerCte,
    /// `f = a - b * log10(lambda)` — average episode length.
    LoglinearLength,
}

impl TrendModel {
    pub fn id(&self) -> &'static str {
        match self {
            TrendModel::LogisticSuccess => "logistic-success",
            TrendModel::PowerCte => "power-cte",
            TrendModel::LoglinearLength => "loglinear-length",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            TrendModel::LogisticSuccess => 2,
            TrendModel::PowerCte => 3,
            TrendModel::LoglinearLength => 2,
        }
    }

    pub fn eval(&self, p: &[f64], lambda: f64) -> f64 {
        match self {
            TrendModel::LogisticSuccess => p[0] + (1.0 - p[0]) / (1.0 + lambda.powf(p[1])),
            TrendModel::PowerCte => p[0] + p[1] * lambda.powf(-p[2]),
            TrendModel::LoglinearLength => p[0] - p[1] * lambda.log10(),
        }
    }

    fn jacobian_row(&self, p: &[f64], lambda: f64, row: &mut [f64]) {
        match self {
            TrendModel::LogisticSuccess => {
                let lb = lambda.powf(p[1]);
                let denom = 1.0 + lb;
                row[0] = 1.0 - 1.0 / denom;
                row[1] = -(1.0 - p[0]) * lb * lambda.ln() / (denom * denom);
            }
            TrendModel::PowerCte => {
                let lc = lambda.powf(-p[2]);
                row[0] = 1.0;
                row[1] = lc;
                row[2] = -p[1] * lc * lambda.ln();
            }
            TrendModel::LoglinearLength => {
                row[0] = 1.0;
                row[1] = -lambda.log10();
            }
        }
    }

    /// Data-driven starting point; `data` is (lambda, y), already filtered.
    fn initial_guess(&self, data: &[(f64, f64)]) -> Vec<f64> {
        // Endpoints of the lambda range anchor the guesses.
        let (l_hi, y_hi) = data
            .iter()
            .copied()
            .fold((f64::MIN, 0.0), |acc, d| if d.0 > acc.0 { d } else { acc });
        let (l_lo, y_lo) = data
            .iter()
            .copied()
            .fold((f64::MAX, 0.0), |acc, d| if d.0 < acc.0 { d } else { acc });
        match self {
            TrendModel::LogisticSuccess => {
                // f(1) = (1 + a) / 2.
                let a0 = (2.0 * y_hi - 1.0).clamp(-0.99, 0.99);
                vec![a0, 1.0]
            }
            TrendModel::PowerCte => {
                let c0 = 0.1;
                let denom = l_lo.powf(-c0) - l_hi.powf(-c0);
                let b0 = if denom.abs() > 1e-12 { (y_lo - y_hi) / denom } else { 1.0 };
                vec![y_hi - b0 * l_hi.powf(-c0), b0, c0]
            }
            TrendModel::LoglinearLength => {
                let denom = l_lo.log10() - l_hi.log10();
                let b0 = if denom.abs() > 1e-12 { -(y_lo - y_hi) / denom } else { 0.0 };
                vec![y_hi + b0 * l_hi.log10(), b0]
            }
        }
    }
}

impl std::str::FromStr for TrendModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic-success" => Ok(TrendModel::LogisticSuccess),
            "power-cte" => Ok(TrendModel::PowerCte),
            "loglinear-length" => Ok(TrendModel::LoglinearLength),
            other => Err(format!("unknown trend model {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} points for {model}, got {got}")]
    TooFewPoints {
        model: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("all lambda values must be positive")]
    NonPositiveLambda,
    #[error("normal equations became singular")]
    Singular,
}

/// Converged parameter estimate with diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: TrendModel,
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const GRAD_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 200;

/// Nonlinear least squares with adaptive damping and analytic Jacobians.
/// `exclude` lists data indices left out of the residuals.
pub fn lm_fit(model: TrendModel, data: &[(f64, f64)], exclude: &[usize]) -> Result<FitResult, FitError> {
    let pts: Vec<(f64, f64)> = data
        .iter()
        .enumerate()
        .filter(|(i, _)| !exclude.contains(i))
        .map(|(_, &d)| d)
        .collect();
    if pts.len() < model.n_params() {
        return Err(FitError::TooFewPoints {
            model: model.id(),
            needed: model.n_params(),
            got: pts.len(),
        });
    }
    if pts.iter().any(|(l, _)| *l <= 0.0) {
        return Err(FitError::NonPositiveLambda);
    }

    let n = pts.len();
    let m = model.n_params();
    let mut params = model.initial_guess(&pts);
    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(n, pts.iter().map(|(l, y)| model.eval(p, *l) - y))
    };
    let mut r = residuals(&params);
    let mut cost = r.norm_squared();
    let mut mu = 0.0; // set after the first Jacobian
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..MAX_ITERS {
        let mut jac = DMatrix::zeros(n, m);
        let mut row = vec![0.0; m];
        for (i, (l, _)) in pts.iter().enumerate() {
            model.jacobian_row(&params, *l, &mut row);
            for (j, v) in row.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        if jtr.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        if mu == 0.0 {
            mu = 1e-8 * (0..m).map(|j| jtj[(j, j)]).fold(1e-300, f64::max);
        }

        let mut stepped = false;
        for _ in 0..20 {
            let mut damped = jtj.clone();
            for j in 0..m {
                damped[(j, j)] += mu * jtj[(j, j)].max(1e-12);
            }
            let delta = match damped.lu().solve(&(-&jtr)) {
                Some(d) => d,
                None => return Err(FitError::Singular),
            };
            let trial: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p + d).collect();
            let trial_r = residuals(&trial);
            let trial_cost = trial_r.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let step_rel = delta.norm()
                    / (params.iter().map(|p| p * p).sum::<f64>().sqrt() + 1e-12);
                params = trial;
                r = trial_r;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-14);
                stepped = true;
                if step_rel < STEP_TOL {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        iterations += 1;
        if converged || !stepped {
            break;
        }
    }

    Ok(FitResult {
        model,
        params,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    })
}

/// `model,a,b,c,residual_norm,iterations,converged` rows; the `c` column is
/// empty for two-parameter models.
pub fn fit_csv(results: &[FitResult]) -> String {
    let mut out = String::from("model,a,b,c,residual_norm,iterations,converged\n");
    for f in results {
        let c = if f.params.len() > 2 { f.params[2].to_string() } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.model.id(),
            f.params[0],
            f.params[1],
            c,
            f.residual_norm,
            f.iterations,
            f.converged
        ));
    }
    out
}

/// Sampled fitted curve, ready for plotting.
pub fn fit_curve_csv(fit: &FitResult, lambdas: &[f64]) -> String {
    let mut out = String::from("lambda,fitted\n");
    for &l in lambdas {
        out.push_str(&format!("{},{}\n", l, fit.model.eval(&fit.params, l)));
    }
    out
}
