use serde::{Deserialize, Serialize};

use super::iv::{prepare_system, Prepared};
use super::{
    residual_covariance, residuals, ColumnSource, EstimationError, EstimationResult, Fit, Method,
    SystemSpec,
};
use crate::linalg::{Cholesky, Matrix, ScaledSpd, CONDITION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    Under,
    Just,
    Over,
}

/// Order-condition counts for one equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub equation: String,
    pub status: Identification,
    pub excluded_exogenous: usize,
    pub included_endogenous: usize,
}

/// Order condition: an equation needs at least as many excluded exogenous
/// variables as it has endogenous regressors.
pub fn identification_check(system: &SystemSpec) -> Vec<IdentificationReport> {
    system
        .equations
        .iter()
        .enumerate()
        .map(|(i, eq)| {
            let excluded = system
                .instruments
                .iter()
                .filter(|z| !eq.regressors.contains(z))
                .count();
            let endogenous = eq.endogenous.len();
            let status = match excluded.cmp(&endogenous) {
                std::cmp::Ordering::Less => Identification::Under,
                std::cmp::Ordering::Equal => Identification::Just,
                std::cmp::Ordering::Greater => Identification::Over,
            };
            IdentificationReport {
                equation: eq.label(i),
                status,
                excluded_exogenous: excluded,
                included_endogenous: endogenous,
            }
        })
        .collect()
}

/// Cross-equation covariance used in the GLS step.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaChoice {
    /// From the 2SLS residuals, denominator n.
    Estimated,
    /// Caller-supplied; must be m × m and positive definite.
    Fixed(Matrix),
}

pub fn three_sls(
    system: &SystemSpec,
    data: &impl ColumnSource,
) -> Result<EstimationResult, EstimationError> {
    three_sls_with(system, data, SigmaChoice::Estimated)
}

/// Three-stage least squares.
///
/// Stage 1 projects every regressor on the instruments, stage 2 runs 2SLS
/// per equation to estimate Σ̂, stage 3 solves the stacked GLS system
/// `[X'(Σ̂⁻¹⊗P_Z)X] δ = X'(Σ̂⁻¹⊗P_Z)y`. The Kronecker product is never
/// formed: block (i, j) is `σ^{ij} X̂ᵢ'X̂ⱼ`.
///
/// A singular Σ̂ falls back to the 2SLS estimates with a warning.
pub fn three_sls_with(
    system: &SystemSpec,
    data: &impl ColumnSource,
    sigma: SigmaChoice,
) -> Result<EstimationResult, EstimationError> {
    let prepared = prepare_system(system, data)?;
    let m = prepared.len();
    let n = data.n_rows();

    let mut first_pass = Vec::with_capacity(m);
    let mut resids = Vec::with_capacity(m);
    for p in &prepared {
        let eq = p.two_sls()?;
        resids.push(residuals(&p.y, &p.x, &eq.coefficients));
        first_pass.push(eq);
    }

    let sigma_hat = match sigma {
        SigmaChoice::Estimated => residual_covariance(&resids),
        SigmaChoice::Fixed(s) => {
            if s.rows() != m || s.cols() != m {
                return Err(EstimationError::Spec(format!(
                    "fixed sigma is {}x{}, system has {m} equations",
                    s.rows(),
                    s.cols()
                )));
            }
            s
        }
    };

    let sigma_inv = match Cholesky::new(&sigma_hat) {
        Ok(ch) if ch.condition_estimate() <= CONDITION_LIMIT => ch.inverse(),
        _ => {
            return Ok(EstimationResult {
                method: Method::TwoSls,
                n,
                equations: first_pass,
                sigma_hat,
                warnings: vec![
                    "residual covariance is singular; reporting equation-by-equation 2SLS instead of 3SLS"
                        .into(),
                ],
            })
        }
    };

    let (lhs, rhs, offsets) = stacked_normal_equations(&prepared, &sigma_inv)?;
    let factor = ScaledSpd::new(&lhs)?;
    let delta = factor.solve(&rhs);
    let cov = factor.inverse();

    let equations = prepared
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (start, k) = (offsets[i], p.x.cols());
            let mut block = Matrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    block[(a, b)] = cov[(start + a, start + b)];
                }
            }
            Fit {
                name: p.name.clone(),
                dependent: p.spec.dependent.clone(),
                regressors: &p.spec.regressors,
                y: &p.y,
                x: &p.x,
                coefficients: delta[start..start + k].to_vec(),
                covariance: block,
            }
            .finish()
        })
        .collect();

    Ok(EstimationResult {
        method: Method::ThreeSls,
        n,
        equations,
        sigma_hat,
        warnings: Vec::new(),
    })
}

type Stacked = (Matrix, Vec<f64>, Vec<usize>);

fn stacked_normal_equations(
    prepared: &[Prepared],
    sigma_inv: &Matrix,
) -> Result<Stacked, EstimationError> {
    let mut offsets = Vec::with_capacity(prepared.len());
    let mut total = 0;
    for p in prepared {
        offsets.push(total);
        total += p.x.cols();
    }
    let mut lhs = Matrix::zeros(total, total);
    let mut rhs = vec![0.0; total];
    for (i, pi) in prepared.iter().enumerate() {
        for (j, pj) in prepared.iter().enumerate() {
            let w = sigma_inv[(i, j)];
            let cross = pi.x_hat.t_matmul(&pj.x_hat)?;
            for a in 0..cross.rows() {
                for b in 0..cross.cols() {
                    lhs[(offsets[i] + a, offsets[j] + b)] = w * cross[(a, b)];
                }
            }
            let xy = pi.x_hat.t_matvec(&pj.y)?;
            for (a, v) in xy.into_iter().enumerate() {
                rhs[offsets[i] + a] += w * v;
            }
        }
    }
    Ok((lhs, rhs, offsets))
}
