//! Synthetic cross-country data and parameter-recovery experiments.
//!
//! Exogenous variables are drawn as a correlated normal vector matched to
//! target means, standard deviations and correlations; structural shocks are
//! drawn from the parameters' covariance; price and penetration come from
//! the market-clearing solve. Replications are seeded independently so they
//! can run in any order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econometrics::{
    three_sls, EquationResult, EstimationError, EstimationResult, SystemSpec, INTERCEPT,
};
use crate::equilibrium::{
    comparative_statics, solve_equilibrium, EquilibriumError, ExogenousProfile,
    StructuralParameters,
};
use crate::exec::{map_indices, Execution};
use crate::linalg::{symmetric_eigen, Cholesky, LinalgError, Matrix};
use crate::market_data::{Dataset, DomainCheck, MarketDataError, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("invalid moment target: {0}")]
    Target(String),
    #[error("infeasible target: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Data(#[from] MarketDataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMoments {
    pub name: Variable,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Marginal moments and correlations for the seven exogenous variables,
/// in the order CL, COMP, POPD, W, pF, INC, TDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub variables: Vec<VariableMoments>,
    pub correlation: Matrix,
    /// Reference moments of the endogenous columns; not used for sampling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub endogenous: Vec<VariableMoments>,
}

impl MomentTarget {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let names: Vec<Variable> = self.variables.iter().map(|v| v.name).collect();
        if names != Variable::EXOGENOUS {
            return Err(MonteCarloError::Target(format!(
                "variables must be {:?} in that order",
                Variable::EXOGENOUS.map(Variable::name)
            )));
        }
        for v in &self.variables {
            if ![v.mean, v.sd, v.min, v.max].iter().all(|x| x.is_finite()) {
                return Err(MonteCarloError::Target(format!("{}: non-finite moment", v.name)));
            }
            if v.sd < 0.0 {
                return Err(MonteCarloError::Target(format!("{}: negative sd", v.name)));
            }
            if v.min > v.max {
                return Err(MonteCarloError::Target(format!("{}: min > max", v.name)));
            }
        }
        let c = &self.correlation;
        if c.rows() != 7 || c.cols() != 7 {
            return Err(MonteCarloError::Target("correlation must be 7x7".into()));
        }
        if !c.is_finite() || !c.is_symmetric(1e-12) {
            return Err(MonteCarloError::Target("correlation must be finite and symmetric".into()));
        }
        for i in 0..7 {
            if (c[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(MonteCarloError::Target("correlation diagonal must be 1".into()));
            }
            for j in 0..7 {
                if c[(i, j)].abs() > 1.0 {
                    return Err(MonteCarloError::Target(
                        "correlation entries must lie in [-1, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MonteCarloError> {
        let t: Self =
            serde_json::from_str(text).map_err(|e| MonteCarloError::Target(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn moments(&self, v: Variable) -> Option<&VariableMoments> {
        self.variables
            .iter()
            .chain(&self.endogenous)
            .find(|m| m.name == v)
    }

    /// Profile at the target means.
    pub fn mean_profile(&self) -> ExogenousProfile {
        let m = |i: usize| self.variables[i].mean;
        ExogenousProfile {
            license_fee: m(0),
            concentration: m(1),
            population_density: m(2),
            wage: m(3),
            fixed_price: m(4),
            income: m(5),
            teledensity: m(6),
        }
    }
}

/// Eigenvalue floor used when a target correlation is not positive definite.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Returns the matrix unchanged if it is positive definite; otherwise clips
/// eigenvalues at [`EIGEN_FLOOR`] and rescales back to a unit diagonal.
/// The flag reports whether a repair happened.
pub fn repair_correlation(c: &Matrix) -> Result<(Matrix, bool), MonteCarloError> {
    if Cholesky::new(c).is_ok() {
        return Ok((c.clone(), false));
    }
    let n = c.rows();
    let (vals, vecs) = symmetric_eigen(c)?;
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = (0..n)
                .map(|k| vecs[(i, k)] * vals[k].max(EIGEN_FLOOR) * vecs[(j, k)])
                .sum();
        }
    }
    let d: Vec<f64> = (0..n).map(|i| r[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] /= d[i] * d[j];
        }
        r[(i, i)] = 1.0;
    }
    Cholesky::new(&r).map_err(|_| {
        MonteCarloError::Target("correlation target cannot be repaired to positive definite".into())
    })?;
    Ok((r, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    /// Resample exogenous draws falling outside the targets' [min, max].
    pub truncate: bool,
    /// Attempts per row before the target is declared infeasible.
    pub max_tries_per_row: usize,
    #[serde(default)]
    pub domain: DomainPolicy,
}

/// Handling of rows whose equilibrium penetration falls outside (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    /// Redraw the shocks, then (if needed) the whole row.
    #[default]
    ResampleShocks,
    /// Redraw the whole row.
    ResampleRow,
    /// Keep the draw as generated.
    Keep,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            truncate: false,
            max_tries_per_row: 100,
            domain: DomainPolicy::ResampleShocks,
        }
    }
}

/// Lower factor of a 2×2 PSD covariance, tolerating zero variances.
fn shock_factor(s: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l11 = s[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { s[1][0] / l11 } else { 0.0 };
    let l22 = (s[1][1] - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

/// Draws a synthetic dataset. Deterministic in `seed`.
///
/// With truncation on, exogenous draws outside the target range are redrawn.
/// A row whose equilibrium penetration falls outside (0, 1] gets fresh
/// shocks (up to `max_tries_per_row`); only if none works is the exogenous
/// profile itself redrawn.
/// The returned dataset is only checked for finiteness: untruncated normal
/// marginals can produce negative fees or densities.
pub fn gen_data(
    targets: &MomentTarget,
    params: &StructuralParameters,
    n: usize,
    seed: u64,
    options: GenOptions,
) -> Result<Dataset, MonteCarloError> {
    targets.validate()?;
    params.validate()?;
    params.slope_gap()?;
    if n < 2 {
        return Err(MonteCarloError::Config("need at least 2 observations".into()));
    }
    if options.max_tries_per_row == 0 {
        return Err(MonteCarloError::Config("max_tries_per_row must be positive".into()));
    }
    let (corr, _) = repair_correlation(&targets.correlation)?;
    let chol = Cholesky::new(&corr)?;
    let lower = chol.lower();
    let shock = shock_factor(&params.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut observations = Vec::with_capacity(n);
    let mut draws = 0usize;
    for row in 0..n {
        let mut accepted = None;
        'profile: for _ in 0..options.max_tries_per_row {
            let z: [f64; 7] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let x: [f64; 7] = std::array::from_fn(|i| {
                let correlated: f64 = (0..=i).map(|k| lower[(i, k)] * z[k]).sum();
                targets.variables[i].mean + targets.variables[i].sd * correlated
            });
            if options.truncate
                && targets
                    .variables
                    .iter()
                    .zip(&x)
                    .any(|(m, v)| *v < m.min || *v > m.max)
            {
                continue;
            }
            let profile = ExogenousProfile {
                license_fee: x[0],
                concentration: x[1],
                population_density: x[2],
                wage: x[3],
                fixed_price: x[4],
                income: x[5],
                teledensity: x[6],
            };
            // Redraw only the shocks first so the exogenous marginals are not
            // conditioned on the penetration domain.
            for _ in 0..options.max_tries_per_row {
                draws += 1;
                let u: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let eps1 = shock[0][0] * u[0];
                let eps2 = shock[1][0] * u[0] + shock[1][1] * u[1];
                let point = solve_equilibrium(params, &profile, (eps1, eps2))?;
                if point.in_domain() || options.domain == DomainPolicy::Keep {
                    accepted = Some(profile.observation(&point));
                    break 'profile;
                }
                if options.domain == DomainPolicy::ResampleRow {
                    continue 'profile;
                }
            }
        }
        match accepted {
            Some(obs) => observations.push(obs),
            None => {
                return Err(MonteCarloError::Infeasible(format!(
                    "row {row}: no acceptable draw in {} tries",
                    options.max_tries_per_row
                )))
            }
        }
    }
    let rejection = 1.0 - n as f64 / draws as f64;
    if rejection > 0.9 {
        return Err(MonteCarloError::Infeasible(format!(
            "{:.1}% of draws rejected",
            100.0 * rejection
        )));
    }
    Ok(Dataset::new(observations, None, DomainCheck::FiniteOnly)?)
}

/// Version tag of the replication seed derivation.
pub const SEEDING_SCHEME: &str = "splitmix64-v1";

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r`: the (r+1)-th output of a SplitMix64 stream
/// started at `master`.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(replication.wrapping_add(1))))
}

/// Which structural equation an estimated equation corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Supply,
    Demand,
}

impl Side {
    pub fn of(eq: &EquationResult) -> Option<Side> {
        match eq.name.as_str() {
            "supply" => Some(Side::Supply),
            "demand" => Some(Side::Demand),
            _ if eq.regressors.iter().any(|r| r == "CL") => Some(Side::Supply),
            _ if eq.regressors.iter().any(|r| r == "INC") => Some(Side::Demand),
            _ => None,
        }
    }
}

/// True value of a structural coefficient, by equation side and regressor name.
pub fn structural_coefficient(params: &StructuralParameters, side: Side, regressor: &str) -> Option<f64> {
    let b = &params.beta;
    match (side, regressor) {
        (Side::Supply, "pW") => Some(b[0]),
        (Side::Supply, "CL") => Some(b[1]),
        (Side::Supply, "COMP") => Some(b[2]),
        (Side::Supply, "POPD") => Some(b[3]),
        (Side::Supply, "W") => Some(b[4]),
        (Side::Supply, INTERCEPT) => Some(params.alpha0),
        (Side::Demand, "pW") => Some(b[5]),
        (Side::Demand, "INC") => Some(b[6]),
        (Side::Demand, "pF") => Some(b[7]),
        (Side::Demand, "TDF") => Some(b[8]),
        (Side::Demand, INTERCEPT) => Some(params.alpha1),
        _ => None,
    }
}

/// Reads α and β back out of a two-equation estimate.
pub fn estimated_parameters(result: &EstimationResult) -> Option<StructuralParameters> {
    let supply = result.equations.iter().find(|e| Side::of(e) == Some(Side::Supply))?;
    let demand = result.equations.iter().find(|e| Side::of(e) == Some(Side::Demand))?;
    let s = |r: &str| supply.coefficient(r);
    let d = |r: &str| demand.coefficient(r);
    Some(StructuralParameters {
        alpha0: s(INTERCEPT).unwrap_or(0.0),
        alpha1: d(INTERCEPT).unwrap_or(0.0),
        beta: [
            s("pW")?,
            s("CL")?,
            s("COMP").unwrap_or(0.0),
            s("POPD").unwrap_or(0.0),
            s("W").unwrap_or(0.0),
            d("pW")?,
            d("INC").unwrap_or(0.0),
            d("pF").unwrap_or(0.0),
            d("TDF").unwrap_or(0.0),
        ],
        sigma: [[0.0; 2]; 2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub gen: GenOptions,
}

impl RecoveryConfig {
    /// Draws are kept as generated ([`DomainPolicy::Keep`]). Redrawing rows
    /// with penetration outside (0, 1] selects shocks on the regressors,
    /// which biases every estimator of the untruncated model and would make
    /// the experiment measure that selection instead of the estimator.
    pub fn new(n: usize, replications: usize, seed: u64) -> Self {
        Self {
            n,
            replications,
            seed,
            gen: GenOptions {
                domain: DomainPolicy::Keep,
                ..GenOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub equation: String,
    pub regressor: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub mean_abs_error: f64,
    /// Share of replications whose nominal 95% interval covers the truth.
    pub coverage: f64,
    /// Share of replications whose estimate has the same sign as the truth.
    pub sign_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub seeding: String,
    pub n: usize,
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    pub coefficients: Vec<CoefficientReport>,
}

impl ExperimentReport {
    pub fn coefficient(&self, equation: &str, regressor: &str) -> Option<&CoefficientReport> {
        self.coefficients
            .iter()
            .find(|c| c.equation == equation && c.regressor == regressor)
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub error: Option<String>,
}

/// Two-sided 95% normal critical value.
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
struct CoefficientSlot {
    equation: String,
    regressor: String,
    truth: f64,
}

fn coefficient_slots(
    system: &SystemSpec,
    truth: &StructuralParameters,
) -> Result<Vec<CoefficientSlot>, MonteCarloError> {
    let mut slots = Vec::new();
    for (i, eq) in system.equations.iter().enumerate() {
        let name = eq.label(i);
        let side = match name.as_str() {
            "supply" => Side::Supply,
            "demand" => Side::Demand,
            _ if eq.regressors.iter().any(|r| r == "CL") => Side::Supply,
            _ => Side::Demand,
        };
        for r in &eq.regressors {
            let value = structural_coefficient(truth, side, r).ok_or_else(|| {
                MonteCarloError::Config(format!("no true value for `{r}` in {name}"))
            })?;
            slots.push(CoefficientSlot {
                equation: name.clone(),
                regressor: r.clone(),
                truth: value,
            });
        }
    }
    Ok(slots)
}

/// Column labels (`equation.regressor`) of the per-replication estimates.
pub fn coefficient_labels(system: &SystemSpec) -> Vec<String> {
    system
        .equations
        .iter()
        .enumerate()
        .flat_map(|(i, eq)| {
            let name = eq.label(i);
            eq.regressors
                .iter()
                .map(move |r| format!("{name}.{r}"))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn flatten(result: &EstimationResult) -> (Vec<f64>, Vec<f64>) {
    let est = result
        .equations
        .iter()
        .flat_map(|e| e.coefficients.iter().copied())
        .collect();
    let se = result
        .equations
        .iter()
        .flat_map(|e| e.std_errors.iter().copied())
        .collect();
    (est, se)
}

/// Repeatedly generates data from `truth` and re-estimates `system` by 3SLS.
///
/// Replication `r` uses [`replication_seed`]`(seed, r)`; the report depends
/// only on the inputs, not on `execution`.
pub fn recovery_experiment(
    targets: &MomentTarget,
    truth: &StructuralParameters,
    system: &SystemSpec,
    config: &RecoveryConfig,
    execution: Execution,
) -> Result<(ExperimentReport, Vec<ReplicationRecord>), MonteCarloError> {
    if config.replications == 0 {
        return Err(MonteCarloError::Config("at least one replication required".into()));
    }
    targets.validate()?;
    truth.validate()?;
    system.validate()?;
    let slots = coefficient_slots(system, truth)?;

    let records = map_indices(execution, config.replications, |r| {
        let seed = replication_seed(config.seed, r as u64);
        let outcome = gen_data(targets, truth, config.n, seed, config.gen)
            .and_then(|data| Ok(three_sls(system, &data)?));
        match outcome {
            Ok(result) if result.warnings.is_empty() => {
                let (estimates, std_errors) = flatten(&result);
                ReplicationRecord {
                    replication: r,
                    seed,
                    estimates,
                    std_errors,
                    error: None,
                }
            }
            Ok(result) => ReplicationRecord {
                replication: r,
                seed,
                estimates: Vec::new(),
                std_errors: Vec::new(),
                error: Some(result.warnings.join("; ")),
            },
            Err(e) => ReplicationRecord {
                replication: r,
                seed,
                estimates: Vec::new(),
                std_errors: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    });

    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let successes = ok.len();
    let coefficients = slots
        .iter()
        .enumerate()
        .map(|(k, slot)| {
            let count = successes.max(1) as f64;
            let (mut sum, mut abs_err, mut covered, mut agree) = (0.0, 0.0, 0usize, 0usize);
            for rec in &ok {
                let (est, se) = (rec.estimates[k], rec.std_errors[k]);
                sum += est;
                abs_err += (est - slot.truth).abs();
                if (est - slot.truth).abs() <= Z_975 * se {
                    covered += 1;
                }
                if est.signum() == slot.truth.signum() {
                    agree += 1;
                }
            }
            let rate = |c: usize| if successes == 0 { f64::NAN } else { c as f64 / count };
            CoefficientReport {
                equation: slot.equation.clone(),
                regressor: slot.regressor.clone(),
                truth: slot.truth,
                mean_estimate: if successes == 0 { f64::NAN } else { sum / count },
                mean_abs_error: if successes == 0 { f64::NAN } else { abs_err / count },
                coverage: rate(covered),
                sign_agreement: rate(agree),
            }
        })
        .collect();

    let report = ExperimentReport {
        seed: config.seed,
        seeding: SEEDING_SCHEME.to_string(),
        n: config.n,
        replications: config.replications,
        successes,
        failures: config.replications - successes,
        coefficients,
    };
    Ok((report, records))
}

/// Per-replication estimates as CSV: `replication,seed,status,<labels...>`.
pub fn write_replications_csv<W: Write>(
    records: &[ReplicationRecord],
    labels: &[String],
    writer: W,
) -> Result<(), MonteCarloError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| MonteCarloError::Config(e.to_string());
    let mut header = vec!["replication".to_string(), "seed".into(), "status".into()];
    header.extend(labels.iter().cloned());
    wtr.write_record(&header).map_err(err)?;
    for rec in records {
        let mut row = vec![
            rec.replication.to_string(),
            rec.seed.to_string(),
            if rec.error.is_none() { "ok".into() } else { "failed".into() },
        ];
        if rec.error.is_none() {
            row.extend(rec.estimates.iter().map(f64::to_string));
        } else {
            row.extend(labels.iter().map(|_| String::new()));
        }
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| MonteCarloError::Config(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Implied ∂p/∂CL > 0 and ∂q/∂CL < 0.
    Satisfied,
    Violated,
    /// Estimated supply and demand price slopes coincide.
    Degenerate,
}

/// Whether estimated coefficients imply that fees raise prices and lower
/// penetration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub verdict: Verdict,
    pub dp_dcl: Option<f64>,
    pub dq_dcl: Option<f64>,
    pub supply_price_coefficient: f64,
    pub supply_price_z: f64,
    pub license_fee_coefficient: f64,
    pub license_fee_z: f64,
    pub demand_price_coefficient: f64,
    pub demand_price_z: f64,
    pub note: String,
}

const DELTA_NOTE: &str = "signs follow from point estimates; standard errors are per coefficient, \
no delta-method interval is computed for the implied derivatives";

pub fn hypothesis_report(result: &EstimationResult) -> Result<HypothesisReport, MonteCarloError> {
    let params = estimated_parameters(result).ok_or_else(|| {
        MonteCarloError::Config(
            "result lacks a supply equation with pW and CL and a demand equation with pW".into(),
        )
    })?;
    let supply = result
        .equations
        .iter()
        .find(|e| Side::of(e) == Some(Side::Supply))
        .expect("checked above");
    let demand = result
        .equations
        .iter()
        .find(|e| Side::of(e) == Some(Side::Demand))
        .expect("checked above");
    let z = |e: &EquationResult, r: &str| e.z_value(r).unwrap_or(f64::NAN);
    let (verdict, dp, dq) = match comparative_statics(&params) {
        Ok(cs) => (
            if cs.fee_raises_price_lowers_quantity() {
                Verdict::Satisfied
            } else {
                Verdict::Violated
            },
            Some(cs.dp_dcl),
            Some(cs.dq_dcl),
        ),
        Err(EquilibriumError::Degenerate { .. }) => (Verdict::Degenerate, None, None),
        Err(e) => return Err(e.into()),
    };
    Ok(HypothesisReport {
        verdict,
        dp_dcl: dp,
        dq_dcl: dq,
        supply_price_coefficient: params.beta[0],
        supply_price_z: z(supply, "pW"),
        license_fee_coefficient: params.beta[1],
        license_fee_z: z(supply, "CL"),
        demand_price_coefficient: params.beta[5],
        demand_price_z: z(demand, "pW"),
        note: DELTA_NOTE.into(),
    })
}
