//! Checked-in reference inputs, embedded at compile time.
//!
//! * `tables_3_4.json`: exogenous moments and correlations of the
//!   18-country sample, plus the endogenous qS/pW moments for reference.
//! * `paper_model.json`: the two-equation supply/demand system.
//! * `table5_params.json`: the published 3SLS point estimates as structural
//!   parameters. The error covariance is not published; it is set to
//!   `(1 − R²)·sd(qS)²` per equation with the reported R² values and the
//!   sample sd of qS, uncorrelated across equations.
//! * `table1_regimes.json`: GSM/PCS licensing fees. Subscriber counts are
//!   back-solved from the published totals and per-subscriber fees and
//!   rounded to the nearest thousand.

use crate::econometrics::SystemSpec;
use crate::equilibrium::StructuralParameters;
use crate::market_data::LicenseRegime;
use crate::montecarlo::MomentTarget;

pub const TABLES_3_4_JSON: &str = include_str!("../data/tables_3_4.json");
pub const PAPER_MODEL_JSON: &str = include_str!("../data/paper_model.json");
pub const TABLE5_PARAMS_JSON: &str = include_str!("../data/table5_params.json");
pub const TABLE1_REGIMES_JSON: &str = include_str!("../data/table1_regimes.json");

pub fn moment_targets() -> MomentTarget {
    MomentTarget::from_json(TABLES_3_4_JSON).expect("embedded moment targets are valid")
}

pub fn paper_model() -> SystemSpec {
    SystemSpec::from_json(PAPER_MODEL_JSON).expect("embedded model spec is valid")
}

pub fn table5_params() -> StructuralParameters {
    StructuralParameters::from_json(TABLE5_PARAMS_JSON).expect("embedded parameters are valid")
}

pub fn table1_regimes() -> Vec<LicenseRegime> {
    LicenseRegime::list_from_json(TABLE1_REGIMES_JSON).expect("embedded regimes are valid")
}
