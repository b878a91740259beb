use super::ols::check_rank;
use super::system::{identification_check, Identification};
use super::{
    centered_ss, design, fetch, residual_covariance, residuals, ColumnSource, EquationResult,
    EquationSpec, EstimationError, EstimationResult, Fit, Method, SystemSpec,
};
use crate::linalg::{Matrix, Qr};

/// First-stage R² below which an endogenous column counts as unexplained.
const WEAK_FIRST_STAGE: f64 = 1e-10;

/// Instrument matrix factored once and reused for every projection.
pub(crate) struct Instruments {
    qr: Qr,
}

impl Instruments {
    pub fn new(names: &[String], data: &impl ColumnSource) -> Result<Self, EstimationError> {
        let z = design(data, names)?;
        if z.rows() < z.cols() {
            return Err(EstimationError::InsufficientData {
                n: z.rows(),
                k: z.cols(),
            });
        }
        let qr = Qr::new(&z)?;
        let bad = qr.deficient_columns();
        if !bad.is_empty() {
            let cols: Vec<&str> = bad.iter().map(|&j| names[j].as_str()).collect();
            return Err(EstimationError::DegenerateInstrument(format!(
                "instrument column(s) {cols:?} are zero or collinear"
            )));
        }
        Ok(Self { qr })
    }

    pub fn project(&self, x: &Matrix) -> Matrix {
        self.qr.project_matrix(x)
    }
}

/// One equation with its data pulled out and regressors projected.
pub(crate) struct Prepared {
    pub name: String,
    pub spec: EquationSpec,
    pub y: Vec<f64>,
    pub x: Matrix,
    pub x_hat: Matrix,
}

impl Prepared {
    pub fn new(
        index: usize,
        spec: &EquationSpec,
        instruments: &Instruments,
        data: &impl ColumnSource,
    ) -> Result<Self, EstimationError> {
        let y = fetch(data, &spec.dependent)?;
        let x = design(data, &spec.regressors)?;
        let (n, k) = (x.rows(), x.cols());
        if n < k {
            return Err(EstimationError::InsufficientData { n, k });
        }
        let x_hat = instruments.project(&x);
        for e in &spec.endogenous {
            let j = spec.regressors.iter().position(|r| r == e).expect("validated");
            let col = x.column(j);
            let sst = centered_ss(&col);
            let unexplained: f64 = col
                .iter()
                .zip(x_hat.column(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let r2 = if sst > 0.0 { 1.0 - unexplained / sst } else { 0.0 };
            if !(r2 >= WEAK_FIRST_STAGE) {
                return Err(EstimationError::DegenerateInstrument(format!(
                    "first stage for `{e}` has R² = {r2:.3e}"
                )));
            }
        }
        Ok(Self {
            name: spec.label(index),
            spec: spec.clone(),
            y,
            x,
            x_hat,
        })
    }

    /// 2SLS: regress y on the projected regressors; residuals and s² come
    /// from the structural regressors.
    pub fn two_sls(&self) -> Result<EquationResult, EstimationError> {
        let (n, k) = (self.x.rows(), self.x.cols());
        let qr = Qr::new(&self.x_hat)?;
        check_rank(&qr, &self.spec.regressors)?;
        let coefficients = qr.solve_least_squares(&self.y)?;
        let u = residuals(&self.y, &self.x, &coefficients);
        let ssr: f64 = u.iter().map(|v| v * v).sum();
        let s2 = if n > k { ssr / (n - k) as f64 } else { f64::NAN };
        let mut covariance = qr.gram_inverse()?;
        for i in 0..k {
            for j in 0..k {
                covariance[(i, j)] *= s2;
            }
        }
        Ok(Fit {
            name: self.name.clone(),
            dependent: self.spec.dependent.clone(),
            regressors: &self.spec.regressors,
            y: &self.y,
            x: &self.x,
            coefficients,
            covariance,
        }
        .finish())
    }
}

pub(crate) fn prepare_system(
    system: &SystemSpec,
    data: &impl ColumnSource,
) -> Result<Vec<Prepared>, EstimationError> {
    system.validate()?;
    for report in identification_check(system) {
        if report.status == Identification::Under {
            return Err(EstimationError::Identification {
                equation: report.equation,
                excluded: report.excluded_exogenous,
                endogenous: report.included_endogenous,
            });
        }
    }
    let instruments = Instruments::new(&system.instruments, data)?;
    system
        .equations
        .iter()
        .enumerate()
        .map(|(i, eq)| Prepared::new(i, eq, &instruments, data))
        .collect()
}

/// Two-stage least squares for a single equation.
pub fn two_sls(
    eq: &EquationSpec,
    instruments: &[String],
    data: &impl ColumnSource,
) -> Result<EstimationResult, EstimationError> {
    let system = SystemSpec {
        equations: vec![eq.clone()],
        instruments: instruments.to_vec(),
    };
    two_sls_system(&system, data)
}

/// Equation-by-equation 2SLS over a system.
pub fn two_sls_system(
    system: &SystemSpec,
    data: &impl ColumnSource,
) -> Result<EstimationResult, EstimationError> {
    let prepared = prepare_system(system, data)?;
    let mut equations = Vec::with_capacity(prepared.len());
    let mut resids = Vec::with_capacity(prepared.len());
    for p in &prepared {
        let eq = p.two_sls()?;
        resids.push(residuals(&p.y, &p.x, &eq.coefficients));
        equations.push(eq);
    }
    Ok(EstimationResult {
        method: Method::TwoSls,
        n: data.n_rows(),
        equations,
        sigma_hat: residual_covariance(&resids),
        warnings: Vec::new(),
    })
}
