use super::{
    design, fetch, residual_covariance, residuals, ColumnSource, EstimationError,
    EstimationResult, EquationResult, Fit, Method, SystemSpec,
};
use crate::linalg::{LinalgError, Matrix, Qr};

/// Least-squares fit of one equation with classical standard errors
/// `s²(X'X)⁻¹`, `s² = SSR/(n − k)`.
///
/// With exactly as many observations as parameters the fit is exact and the
/// standard errors are undefined (NaN).
pub fn ols(y: &[f64], x: &Matrix, names: &[String]) -> Result<EstimationResult, EstimationError> {
    let eq = fit_equation("ols".into(), "y".into(), y, x, names)?;
    let u = residuals(y, x, &eq.coefficients);
    Ok(EstimationResult {
        method: Method::Ols,
        n: y.len(),
        equations: vec![eq],
        sigma_hat: residual_covariance(&[u]),
        warnings: Vec::new(),
    })
}

/// OLS on every equation of a system, ignoring any endogeneity markers.
pub fn ols_system(
    system: &SystemSpec,
    data: &impl ColumnSource,
) -> Result<EstimationResult, EstimationError> {
    let mut equations = Vec::new();
    let mut resids = Vec::new();
    for (i, spec) in system.equations.iter().enumerate() {
        spec.validate()?;
        let y = fetch(data, &spec.dependent)?;
        let x = design(data, &spec.regressors)?;
        let eq = fit_equation(spec.label(i), spec.dependent.clone(), &y, &x, &spec.regressors)?;
        resids.push(residuals(&y, &x, &eq.coefficients));
        equations.push(eq);
    }
    Ok(EstimationResult {
        method: Method::Ols,
        n: data.n_rows(),
        equations,
        sigma_hat: residual_covariance(&resids),
        warnings: Vec::new(),
    })
}

pub(crate) fn fit_equation(
    name: String,
    dependent: String,
    y: &[f64],
    x: &Matrix,
    names: &[String],
) -> Result<EquationResult, EstimationError> {
    let (n, k) = (x.rows(), x.cols());
    if names.len() != k || y.len() != n {
        return Err(EstimationError::Spec(format!(
            "{} names and {} responses for a {n}x{k} design",
            names.len(),
            y.len()
        )));
    }
    if n < k {
        return Err(EstimationError::InsufficientData { n, k });
    }
    let qr = Qr::new(x)?;
    check_rank(&qr, names)?;
    let coefficients = qr.solve_least_squares(y)?;
    let u = residuals(y, x, &coefficients);
    let ssr: f64 = u.iter().map(|v| v * v).sum();
    let s2 = if n > k { ssr / (n - k) as f64 } else { f64::NAN };
    let mut covariance = qr.gram_inverse()?;
    for i in 0..k {
        for j in 0..k {
            covariance[(i, j)] *= s2;
        }
    }
    Ok(Fit {
        name,
        dependent,
        regressors: names,
        y,
        x,
        coefficients,
        covariance,
    }
    .finish())
}

pub(crate) fn check_rank(qr: &Qr, names: &[String]) -> Result<(), EstimationError> {
    let bad = qr.deficient_columns();
    if !bad.is_empty() {
        return Err(EstimationError::SingularDesign {
            columns: bad.into_iter().map(|j| names[j].clone()).collect(),
            condition: qr.condition_estimate(),
        });
    }
    let condition = qr.condition_estimate();
    if condition > crate::linalg::CONDITION_LIMIT {
        return Err(EstimationError::Linalg(LinalgError::Singular { condition }));
    }
    Ok(())
}
