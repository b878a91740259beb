//! Linear single-equation and system estimators: OLS, 2SLS and 3SLS.
//!
//! Estimators read named columns through [`ColumnSource`], so they work on a
//! [`Dataset`] as well as on ad-hoc tables. The name [`INTERCEPT`] denotes a
//! column of ones.

mod iv;
mod ols;
mod system;
mod table;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{chi_squared_sf, two_sided_p};
use crate::linalg::{LinalgError, Matrix, ScaledSpd};
use crate::market_data::{Dataset, Variable};

pub use iv::{two_sls, two_sls_system};
pub use ols::{ols, ols_system};
pub use system::{
    identification_check, three_sls, three_sls_with, Identification, IdentificationReport,
    SigmaChoice,
};
pub use table::render_table;

/// Regressor name for the constant term.
pub const INTERCEPT: &str = "const";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("insufficient data: {n} observations for {k} parameters")]
    InsufficientData { n: usize, k: usize },
    #[error("singular design: column(s) {columns:?} are collinear or constant zero (condition estimate {condition:.3e})")]
    SingularDesign { columns: Vec<String>, condition: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid model specification: {0}")]
    Spec(String),
    #[error("equation `{equation}` is underidentified: {excluded} excluded exogenous for {endogenous} endogenous regressor(s)")]
    Identification {
        equation: String,
        excluded: usize,
        endogenous: usize,
    },
    #[error("degenerate instruments: {0}")]
    DegenerateInstrument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Anything that can hand out named numeric columns of equal length.
pub trait ColumnSource {
    fn n_rows(&self) -> usize;
    fn column(&self, name: &str) -> Option<Vec<f64>>;
}

impl ColumnSource for Dataset {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        name.parse::<Variable>().ok().map(|v| Dataset::column(self, v))
    }
}

/// Free-form named columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnTable {
    columns: BTreeMap<String, Vec<f64>>,
    n: usize,
}

impl ColumnTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Self {
        self.insert(name, values);
        self
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) {
        if self.columns.is_empty() {
            self.n = values.len();
        }
        assert_eq!(values.len(), self.n, "column `{name}` has the wrong length");
        self.columns.insert(name.to_string(), values);
    }
}

impl ColumnSource for ColumnTable {
    fn n_rows(&self) -> usize {
        self.n
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.columns.get(name).cloned()
    }
}

pub(crate) fn fetch(source: &impl ColumnSource, name: &str) -> Result<Vec<f64>, EstimationError> {
    if name == INTERCEPT {
        return Ok(vec![1.0; source.n_rows()]);
    }
    source
        .column(name)
        .ok_or_else(|| EstimationError::UnknownVariable(name.to_string()))
}

pub(crate) fn design(source: &impl ColumnSource, names: &[String]) -> Result<Matrix, EstimationError> {
    let cols = names
        .iter()
        .map(|n| fetch(source, n))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    if refs.is_empty() {
        return Err(EstimationError::Spec("empty regressor list".into()));
    }
    Ok(Matrix::from_columns(&refs)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub dependent: String,
    pub regressors: Vec<String>,
    #[serde(default)]
    pub endogenous: Vec<String>,
}

impl EquationSpec {
    pub fn label(&self, index: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("eq{}:{}", index + 1, self.dependent))
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.regressors.is_empty() {
            return Err(EstimationError::Spec(format!(
                "equation for `{}` has no regressors",
                self.dependent
            )));
        }
        for (i, r) in self.regressors.iter().enumerate() {
            if self.regressors[..i].contains(r) {
                return Err(EstimationError::Spec(format!("regressor `{r}` listed twice")));
            }
            if *r == self.dependent {
                return Err(EstimationError::Spec(format!(
                    "`{r}` is both dependent and regressor"
                )));
            }
        }
        for e in &self.endogenous {
            if !self.regressors.contains(e) {
                return Err(EstimationError::Spec(format!(
                    "endogenous `{e}` is not among the regressors"
                )));
            }
        }
        Ok(())
    }

    pub fn exogenous_regressors(&self) -> impl Iterator<Item = &String> {
        self.regressors
            .iter()
            .filter(move |r| !self.endogenous.contains(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub equations: Vec<EquationSpec>,
    pub instruments: Vec<String>,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.equations.is_empty() {
            return Err(EstimationError::Spec("no equations".into()));
        }
        for (i, z) in self.instruments.iter().enumerate() {
            if self.instruments[..i].contains(z) {
                return Err(EstimationError::Spec(format!("instrument `{z}` listed twice")));
            }
        }
        for (i, eq) in self.equations.iter().enumerate() {
            eq.validate()?;
            for r in eq.exogenous_regressors() {
                if !self.instruments.contains(r) {
                    return Err(EstimationError::Spec(format!(
                        "exogenous regressor `{r}` of {} is missing from the instruments",
                        eq.label(i)
                    )));
                }
            }
            for e in &eq.endogenous {
                if self.instruments.contains(e) {
                    return Err(EstimationError::Spec(format!(
                        "endogenous `{e}` cannot also be an instrument"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EstimationError> {
        let s: SystemSpec =
            serde_json::from_str(text).map_err(|e| EstimationError::Spec(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "2SLS")]
    TwoSls,
    #[serde(rename = "3SLS")]
    ThreeSls,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ols => "OLS",
            Method::TwoSls => "2SLS",
            Method::ThreeSls => "3SLS",
        })
    }
}

/// Per-equation coefficient table plus fit and joint-significance measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationResult {
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z: Vec<f64>,
    pub p_values: Vec<f64>,
    /// 1 − SSR/SST from structural residuals; may be negative for IV fits.
    pub r_squared: f64,
    /// Wald statistic for all non-intercept coefficients being zero.
    pub wald_chi2: f64,
    pub wald_df: usize,
    pub wald_p_value: f64,
    pub ssr: f64,
}

impl EquationResult {
    fn index(&self, regressor: &str) -> Option<usize> {
        self.regressors.iter().position(|r| r == regressor)
    }

    pub fn coefficient(&self, regressor: &str) -> Option<f64> {
        self.index(regressor).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, regressor: &str) -> Option<f64> {
        self.index(regressor).map(|i| self.std_errors[i])
    }

    pub fn z_value(&self, regressor: &str) -> Option<f64> {
        self.index(regressor).map(|i| self.z[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub n: usize,
    pub equations: Vec<EquationResult>,
    /// Cross-equation residual covariance, residuals' inner products over n.
    pub sigma_hat: Matrix,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EstimationResult {
    pub fn equation(&self, name: &str) -> Option<&EquationResult> {
        self.equations.iter().find(|e| e.name == name)
    }
}

/// Inputs for building one row of an [`EquationResult`].
pub(crate) struct Fit<'a> {
    pub name: String,
    pub dependent: String,
    pub regressors: &'a [String],
    pub y: &'a [f64],
    pub x: &'a Matrix,
    pub coefficients: Vec<f64>,
    pub covariance: Matrix,
}

pub(crate) fn residuals(y: &[f64], x: &Matrix, coef: &[f64]) -> Vec<f64> {
    let fitted = x.matvec(coef).expect("design and coefficients agree");
    y.iter().zip(fitted).map(|(a, b)| a - b).collect()
}

pub(crate) fn centered_ss(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

impl Fit<'_> {
    pub fn finish(self) -> EquationResult {
        let u = residuals(self.y, self.x, &self.coefficients);
        let ssr: f64 = u.iter().map(|v| v * v).sum();
        let sst = centered_ss(self.y);
        let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
        let k = self.coefficients.len();
        let std_errors: Vec<f64> = (0..k)
            .map(|i| {
                let v = self.covariance[(i, i)];
                if v >= 0.0 {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect();
        let z: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&std_errors)
            .map(|(c, s)| c / s)
            .collect();
        let p_values = z.iter().map(|&z| two_sided_p(z)).collect();
        let (wald_chi2, wald_df) = wald_slopes(self.regressors, &self.coefficients, &self.covariance);
        let wald_p_value = if wald_df > 0 {
            chi_squared_sf(wald_chi2, wald_df)
        } else {
            f64::NAN
        };
        EquationResult {
            name: self.name,
            dependent: self.dependent,
            regressors: self.regressors.to_vec(),
            coefficients: self.coefficients,
            std_errors,
            z,
            p_values,
            r_squared,
            wald_chi2,
            wald_df,
            wald_p_value,
            ssr,
        }
    }
}

/// b' V⁻¹ b over the non-intercept coefficients.
fn wald_slopes(names: &[String], coef: &[f64], cov: &Matrix) -> (f64, usize) {
    let idx: Vec<usize> = (0..coef.len()).filter(|&i| names[i] != INTERCEPT).collect();
    let df = idx.len();
    if df == 0 {
        return (f64::NAN, 0);
    }
    let mut sub = Matrix::zeros(df, df);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            sub[(a, b)] = cov[(i, j)];
        }
    }
    let b: Vec<f64> = idx.iter().map(|&i| coef[i]).collect();
    match ScaledSpd::new(&sub) {
        Ok(f) => {
            let w = f.solve(&b);
            (b.iter().zip(&w).map(|(x, y)| x * y).sum(), df)
        }
        Err(_) => (f64::NAN, df),
    }
}

/// `U'U / n` for the residual columns of each equation.
pub(crate) fn residual_covariance(resids: &[Vec<f64>]) -> Matrix {
    let m = resids.len();
    let n = resids.first().map_or(1, Vec::len) as f64;
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = resids[i].iter().zip(&resids[j]).map(|(a, b)| a * b).sum::<f64>() / n;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}
