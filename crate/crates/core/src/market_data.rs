//! Licensing-fee arithmetic, market concentration, and the cross-country
//! estimation dataset.
//!
//! Money is carried as `f64` in thousands of USD unless a function says
//! otherwise; per-subscriber figures are converted to USD at the edges.

use std::borrow::Cow;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketDataError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no observations")]
    Empty,
    #[error("line {line}, column {column}: {message}")]
    Load {
        line: usize,
        column: String,
        message: String,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("need at least {needed} observations, have {have}")]
    TooFewObservations { needed: usize, have: usize },
}

fn non_negative(name: &str, v: f64) -> Result<(), MarketDataError> {
    if !v.is_finite() || v < 0.0 {
        return Err(MarketDataError::Validation(format!(
            "{name} must be a finite non-negative number, got {v}"
        )));
    }
    Ok(())
}

/// Cumulative licensing cost after `years`: the upfront payment plus the
/// recurring fee paid once per year.
pub fn total_cost_horizon(initial: f64, recurring: f64, years: u32) -> Result<f64, MarketDataError> {
    non_negative("initial payment", initial)?;
    non_negative("recurring fee", recurring)?;
    Ok(initial + f64::from(years) * recurring)
}

/// Licensing cost per subscriber. Both arguments in the same money unit.
pub fn fee_per_subscriber(total: f64, subscribers: u64) -> Result<f64, MarketDataError> {
    non_negative("total fee", total)?;
    if subscribers == 0 {
        return Err(MarketDataError::Domain(
            "fee per subscriber undefined for zero subscribers".into(),
        ));
    }
    Ok(total / subscribers as f64)
}

/// Level annual payment over `years` with present value `upfront` at `rate`.
pub fn annuitize(upfront: f64, rate: f64, years: u32) -> Result<f64, MarketDataError> {
    non_negative("upfront payment", upfront)?;
    non_negative("discount rate", rate)?;
    if years == 0 {
        return Err(MarketDataError::Domain("annuity over zero years".into()));
    }
    let t = f64::from(years);
    if rate == 0.0 {
        return Ok(upfront / t);
    }
    Ok(upfront * rate / (1.0 - (1.0 + rate).powf(-t)))
}

/// Tolerance on the sum of market shares.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;

/// Herfindahl–Hirschman index in points (0–10,000) from fractional shares.
pub fn hhi(shares: &[f64]) -> Result<f64, MarketDataError> {
    if shares.is_empty() {
        return Err(MarketDataError::Validation("no market shares".into()));
    }
    for (i, &s) in shares.iter().enumerate() {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(MarketDataError::Validation(format!(
                "share {i} = {s} is outside [0, 1]"
            )));
        }
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > SHARE_SUM_TOLERANCE {
        return Err(MarketDataError::Validation(format!(
            "shares sum to {total}, expected 1"
        )));
    }
    Ok(shares.iter().map(|s| (100.0 * s).powi(2)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LicensingMethod {
    Administrative,
    SmrAuction,
    SealedBidAuction,
    BeautyContest,
}

/// One licensing record (a row of a fee table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LicenseRegime {
    #[serde(rename = "country")]
    pub country_label: String,
    /// Thousands of USD.
    #[serde(rename = "initial")]
    pub initial_payment: f64,
    /// Thousands of USD per year.
    #[serde(rename = "recurring")]
    pub recurring_annual_fee: f64,
    #[serde(rename = "years")]
    pub horizon_years: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscribers: Option<u64>,
    #[serde(rename = "method")]
    pub licensing_method: LicensingMethod,
}

impl LicenseRegime {
    pub fn validate(&self) -> Result<(), MarketDataError> {
        non_negative("initial", self.initial_payment)?;
        non_negative("recurring", self.recurring_annual_fee)?;
        if self.horizon_years < 1 {
            return Err(MarketDataError::Validation(format!(
                "{}: horizon must be at least one year",
                self.country_label
            )));
        }
        if self.subscribers == Some(0) {
            return Err(MarketDataError::Validation(format!(
                "{}: subscriber count must be positive",
                self.country_label
            )));
        }
        Ok(())
    }

    /// Total over the regime's horizon, thousands of USD.
    pub fn total_cost(&self) -> Result<f64, MarketDataError> {
        total_cost_horizon(
            self.initial_payment,
            self.recurring_annual_fee,
            self.horizon_years,
        )
    }

    /// Horizon total per subscriber in USD, if the subscriber count is known.
    pub fn fee_per_subscriber_usd(&self) -> Result<Option<f64>, MarketDataError> {
        match self.subscribers {
            None => Ok(None),
            Some(n) => fee_per_subscriber(self.total_cost()? * 1000.0, n).map(Some),
        }
    }

    /// Parses a JSON array of regimes and validates each.
    pub fn list_from_json(text: &str) -> Result<Vec<LicenseRegime>, MarketDataError> {
        let regimes: Vec<LicenseRegime> =
            serde_json::from_str(text).map_err(|e| MarketDataError::Validation(e.to_string()))?;
        for r in &regimes {
            r.validate()?;
        }
        Ok(regimes)
    }
}

/// Columns of the estimation dataset, in canonical file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    /// qS: subscribers per capita.
    #[serde(rename = "qS")]
    Penetration,
    /// pW: annual wireless basket price.
    #[serde(rename = "pW")]
    WirelessPrice,
    /// CL: license fee per subscriber.
    #[serde(rename = "CL")]
    LicenseFee,
    /// COMP: HHI points.
    #[serde(rename = "COMP")]
    Concentration,
    /// POPD: persons per km².
    #[serde(rename = "POPD")]
    PopulationDensity,
    /// W: wage-level index.
    #[serde(rename = "W")]
    Wage,
    /// pF: annual fixed-line basket price.
    #[serde(rename = "pF")]
    FixedPrice,
    /// INC: GDP per capita (PPP).
    #[serde(rename = "INC")]
    Income,
    /// TDF: fixed lines per 100 inhabitants.
    #[serde(rename = "TDF")]
    Teledensity,
}

impl Variable {
    pub const ALL: [Variable; 9] = [
        Variable::Penetration,
        Variable::WirelessPrice,
        Variable::LicenseFee,
        Variable::Concentration,
        Variable::PopulationDensity,
        Variable::Wage,
        Variable::FixedPrice,
        Variable::Income,
        Variable::Teledensity,
    ];

    /// The seven exogenous variables, in moment-target order.
    pub const EXOGENOUS: [Variable; 7] = [
        Variable::LicenseFee,
        Variable::Concentration,
        Variable::PopulationDensity,
        Variable::Wage,
        Variable::FixedPrice,
        Variable::Income,
        Variable::Teledensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Penetration => "qS",
            Variable::WirelessPrice => "pW",
            Variable::LicenseFee => "CL",
            Variable::Concentration => "COMP",
            Variable::PopulationDensity => "POPD",
            Variable::Wage => "W",
            Variable::FixedPrice => "pF",
            Variable::Income => "INC",
            Variable::Teledensity => "TDF",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = MarketDataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| MarketDataError::Validation(format!("unknown variable `{s}`")))
    }
}

/// One country row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketObservation {
    #[serde(rename = "qS")]
    pub penetration: f64,
    #[serde(rename = "pW")]
    pub wireless_price: f64,
    #[serde(rename = "CL")]
    pub license_fee: f64,
    #[serde(rename = "COMP")]
    pub concentration: f64,
    #[serde(rename = "POPD")]
    pub population_density: f64,
    #[serde(rename = "W")]
    pub wage: f64,
    #[serde(rename = "pF")]
    pub fixed_price: f64,
    #[serde(rename = "INC")]
    pub income: f64,
    #[serde(rename = "TDF")]
    pub teledensity: f64,
}

impl MarketObservation {
    pub fn get(&self, v: Variable) -> f64 {
        match v {
            Variable::Penetration => self.penetration,
            Variable::WirelessPrice => self.wireless_price,
            Variable::LicenseFee => self.license_fee,
            Variable::Concentration => self.concentration,
            Variable::PopulationDensity => self.population_density,
            Variable::Wage => self.wage,
            Variable::FixedPrice => self.fixed_price,
            Variable::Income => self.income,
            Variable::Teledensity => self.teledensity,
        }
    }

    pub fn set(&mut self, v: Variable, value: f64) {
        match v {
            Variable::Penetration => self.penetration = value,
            Variable::WirelessPrice => self.wireless_price = value,
            Variable::LicenseFee => self.license_fee = value,
            Variable::Concentration => self.concentration = value,
            Variable::PopulationDensity => self.population_density = value,
            Variable::Wage => self.wage = value,
            Variable::FixedPrice => self.fixed_price = value,
            Variable::Income => self.income = value,
            Variable::Teledensity => self.teledensity = value,
        }
    }

    /// Returns the first variable that is non-finite.
    pub fn check_finite(&self) -> Result<(), (Variable, String)> {
        for v in Variable::ALL {
            if !self.get(v).is_finite() {
                return Err((v, format!("non-finite value {}", self.get(v))));
            }
        }
        Ok(())
    }

    /// Range checks for a real-world row. Returns the offending variable.
    pub fn check_domain(&self) -> Result<(), (Variable, String)> {
        self.check_finite()?;
        let checks: [(Variable, bool, &str); 5] = [
            (
                Variable::Penetration,
                self.penetration > 0.0 && self.penetration <= 1.0,
                "(0, 1]",
            ),
            (Variable::LicenseFee, self.license_fee >= 0.0, "[0, inf)"),
            (
                Variable::Concentration,
                self.concentration > 0.0 && self.concentration <= 10_000.0,
                "(0, 10000]",
            ),
            (
                Variable::PopulationDensity,
                self.population_density > 0.0,
                "(0, inf)",
            ),
            (
                Variable::Teledensity,
                self.teledensity > 0.0 && self.teledensity <= 100.0,
                "(0, 100]",
            ),
        ];
        for (v, ok, range) in checks {
            if !ok {
                return Err((v, format!("value {} outside {range}", self.get(v))));
            }
        }
        Ok(())
    }
}

/// How strictly rows are checked when a dataset is built or loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainCheck {
    /// Finite values within the documented variable ranges.
    #[default]
    Strict,
    /// Finite values only; for synthetic draws whose normal marginals spill
    /// outside the real-world ranges (e.g. negative fees).
    FiniteOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<MarketObservation>,
    labels: Option<Vec<String>>,
}

const LABEL_COLUMN: &str = "country";

impl Dataset {
    pub fn new(
        observations: Vec<MarketObservation>,
        labels: Option<Vec<String>>,
        check: DomainCheck,
    ) -> Result<Self, MarketDataError> {
        if let Some(l) = &labels {
            if l.len() != observations.len() {
                return Err(MarketDataError::Validation(format!(
                    "{} labels for {} observations",
                    l.len(),
                    observations.len()
                )));
            }
        }
        for (i, obs) in observations.iter().enumerate() {
            let res = match check {
                DomainCheck::Strict => obs.check_domain(),
                DomainCheck::FiniteOnly => obs.check_finite(),
            };
            if let Err((v, message)) = res {
                return Err(MarketDataError::Load {
                    line: i + 2,
                    column: v.name().into(),
                    message,
                });
            }
        }
        Ok(Self {
            observations,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[MarketObservation] {
        &self.observations
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn column(&self, v: Variable) -> Vec<f64> {
        self.observations.iter().map(|o| o.get(v)).collect()
    }

    /// Reads a CSV table with canonical headers (any order) and an optional
    /// `country` label column.
    pub fn load<R: Read>(reader: R, check: DomainCheck) -> Result<Self, MarketDataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| MarketDataError::Csv(e.to_string()))?
            .clone();
        let mut slots: Vec<Option<Variable>> = Vec::with_capacity(headers.len());
        let mut label_idx = None;
        for (idx, h) in headers.iter().enumerate() {
            if h == LABEL_COLUMN {
                label_idx = Some(idx);
                slots.push(None);
                continue;
            }
            let v = h.parse::<Variable>().map_err(|_| MarketDataError::Load {
                line: 1,
                column: h.to_string(),
                message: "unknown column".into(),
            })?;
            if slots.contains(&Some(v)) {
                return Err(MarketDataError::Load {
                    line: 1,
                    column: h.to_string(),
                    message: "duplicate column".into(),
                });
            }
            slots.push(Some(v));
        }
        for v in Variable::ALL {
            if !slots.contains(&Some(v)) {
                return Err(MarketDataError::Load {
                    line: 1,
                    column: v.name().into(),
                    message: "missing column".into(),
                });
            }
        }

        let mut observations = Vec::new();
        let mut labels = label_idx.map(|_| Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| MarketDataError::Csv(format!("line {line}: {e}")))?;
            let mut obs = MarketObservation {
                penetration: f64::NAN,
                wireless_price: f64::NAN,
                license_fee: f64::NAN,
                concentration: f64::NAN,
                population_density: f64::NAN,
                wage: f64::NAN,
                fixed_price: f64::NAN,
                income: f64::NAN,
                teledensity: f64::NAN,
            };
            for (idx, cell) in record.iter().enumerate() {
                match slots.get(idx).copied().flatten() {
                    Some(v) => {
                        if cell.is_empty() {
                            return Err(MarketDataError::Load {
                                line,
                                column: v.name().into(),
                                message: "missing value".into(),
                            });
                        }
                        let value = cell.parse::<f64>().map_err(|_| MarketDataError::Load {
                            line,
                            column: v.name().into(),
                            message: format!("not a number: `{cell}`"),
                        })?;
                        obs.set(v, value);
                    }
                    None => {
                        if let Some(l) = labels.as_mut() {
                            l.push(cell.to_string());
                        }
                    }
                }
            }
            let res = match check {
                DomainCheck::Strict => obs.check_domain(),
                DomainCheck::FiniteOnly => obs.check_finite(),
            };
            if let Err((v, message)) = res {
                return Err(MarketDataError::Load {
                    line,
                    column: v.name().into(),
                    message,
                });
            }
            observations.push(obs);
        }
        if observations.is_empty() {
            return Err(MarketDataError::Empty);
        }
        Ok(Self {
            observations,
            labels,
        })
    }

    /// Writes the dataset as CSV. Values use the shortest representation that
    /// parses back to the same `f64`.
    pub fn save<W: Write>(&self, writer: W) -> Result<(), MarketDataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| MarketDataError::Csv(e.to_string());
        let mut header: Vec<&str> = Vec::new();
        if self.labels.is_some() {
            header.push(LABEL_COLUMN);
        }
        header.extend(Variable::ALL.iter().map(|v| v.name()));
        wtr.write_record(&header).map_err(csv_err)?;
        for (i, obs) in self.observations.iter().enumerate() {
            let mut row: Vec<String> = Vec::with_capacity(10);
            if let Some(l) = &self.labels {
                row.push(l[i].clone());
            }
            row.extend(Variable::ALL.iter().map(|&v| obs.get(v).to_string()));
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush()
            .map_err(|e| MarketDataError::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Descriptive statistics for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub observations: usize,
    pub mean: f64,
    /// Sample (n − 1) standard deviation; `None` when n < 2.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl ColumnSummary {
    pub fn from_values(values: &[f64]) -> Result<Self, MarketDataError> {
        if values.is_empty() {
            return Err(MarketDataError::Empty);
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Keep min ≤ mean ≤ max exact under rounding.
        let mean = mean.clamp(min, max);
        Ok(Self {
            observations: n,
            mean,
            sd,
            min,
            max,
        })
    }

    pub fn std_dev(&self) -> Result<f64, MarketDataError> {
        self.sd.ok_or(MarketDataError::TooFewObservations {
            needed: 2,
            have: self.observations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub variables: Vec<(Variable, ColumnSummary)>,
}

impl SummaryStats {
    pub fn get(&self, v: Variable) -> Option<&ColumnSummary> {
        self.variables.iter().find(|(x, _)| *x == v).map(|(_, s)| s)
    }
}

pub fn summary_stats(data: &Dataset) -> Result<SummaryStats, MarketDataError> {
    let variables = Variable::ALL
        .into_iter()
        .map(|v| Ok((v, ColumnSummary::from_values(&data.column(v))?)))
        .collect::<Result<_, MarketDataError>>()?;
    Ok(SummaryStats { variables })
}

/// Pearson correlation; `None` if either column has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric correlation table. Undefined entries (constant columns) are
/// `None` and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn from_columns(
        labels: Vec<String>,
        columns: &[Cow<'_, [f64]>],
    ) -> Result<Self, MarketDataError> {
        let k = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        if n < 3 {
            return Err(MarketDataError::TooFewObservations { needed: 3, have: n });
        }
        let mut entries = vec![vec![None; k]; k];
        for i in 0..k {
            let constant = pearson(&columns[i], &columns[i]).is_none();
            entries[i][i] = (!constant).then_some(1.0);
            for j in 0..i {
                let r = pearson(&columns[i], &columns[j]);
                entries[i][j] = r;
                entries[j][i] = r;
            }
        }
        Ok(Self { labels, entries })
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.entries[i][j]
    }
}

pub fn correlation(data: &Dataset) -> Result<CorrelationMatrix, MarketDataError> {
    let columns: Vec<Cow<'_, [f64]>> = Variable::ALL
        .iter()
        .map(|&v| Cow::Owned(data.column(v)))
        .collect();
    CorrelationMatrix::from_columns(
        Variable::ALL.iter().map(|v| v.name().to_string()).collect(),
        &columns,
    )
}
