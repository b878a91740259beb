//! Linear structural model of the post-licensing market.
//!
//! Supply:  q = α₀ + β₁·pW + β₂·CL + β₃·COMP + β₄·POPD + β₅·W + ε₁
//! Demand:  q = α₁ + β₆·pW + β₇·INC + β₈·pF + β₉·TDF + ε₂
//!
//! Market clearing gives the price in closed form; everything else in this
//! module (reduced form, comparative statics, externality fixed point,
//! diffusion paths) is built on top of that solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::accurate_dot;
use crate::market_data::{MarketObservation, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("degenerate model: supply and demand price slopes coincide (beta1 = {beta1}, beta6 = {beta6})")]
    Degenerate { beta1: f64, beta6: f64 },
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("invalid exogenous profile: {0}")]
    Profile(String),
    #[error("externality iteration did not converge after {iterations} iterations (amplification {amplification:.3}); last q = {}", last.q)]
    NonConvergence {
        iterations: usize,
        amplification: f64,
        last: EquilibriumPoint,
    },
    #[error("invalid diffusion dynamics: {0}")]
    Dynamics(String),
}

/// Relative tolerance on |β₁ − β₆| against |β₁| + |β₆|.
pub const SLOPE_SEPARATION: f64 = 1e-12;

/// α₀, α₁, β₁…β₉ and the covariance of (ε₁, ε₂).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralParameters {
    pub alpha0: f64,
    pub alpha1: f64,
    /// β₁…β₉: supply on (pW, CL, COMP, POPD, W), demand on (pW, INC, pF, TDF).
    pub beta: [f64; 9],
    #[serde(default = "zero_sigma")]
    pub sigma: [[f64; 2]; 2],
}

fn zero_sigma() -> [[f64; 2]; 2] {
    [[0.0; 2]; 2]
}

impl StructuralParameters {
    pub fn validate(&self) -> Result<(), EquilibriumError> {
        if !self.alpha0.is_finite()
            || !self.alpha1.is_finite()
            || self.beta.iter().any(|b| !b.is_finite())
        {
            return Err(EquilibriumError::Parameters("non-finite coefficient".into()));
        }
        let s = &self.sigma;
        if s.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EquilibriumError::Parameters("non-finite sigma".into()));
        }
        if (s[0][1] - s[1][0]).abs() > 1e-12 * (1.0 + s[0][1].abs()) {
            return Err(EquilibriumError::Parameters("sigma is not symmetric".into()));
        }
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if s[0][0] < 0.0 || s[1][1] < 0.0 || det < -1e-12 * (s[0][0] * s[1][1]).max(1e-300) {
            return Err(EquilibriumError::Parameters(
                "sigma is not positive semidefinite".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EquilibriumError> {
        let p: Self = serde_json::from_str(text)
            .map_err(|e| EquilibriumError::Parameters(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn supply_price_slope(&self) -> f64 {
        self.beta[0]
    }

    pub fn demand_price_slope(&self) -> f64 {
        self.beta[5]
    }

    /// β₁ − β₆, checked for separation.
    pub fn slope_gap(&self) -> Result<f64, EquilibriumError> {
        let (b1, b6) = (self.beta[0], self.beta[5]);
        let gap = b1 - b6;
        if !(gap.abs() > SLOPE_SEPARATION * (b1.abs() + b6.abs())) {
            return Err(EquilibriumError::Degenerate { beta1: b1, beta6: b6 });
        }
        Ok(gap)
    }

    /// Supply intercept at a given profile: everything except β₁·pW.
    pub fn supply_shift(&self, x: &ExogenousProfile, eps1: f64) -> f64 {
        let b = &self.beta;
        self.alpha0 + b[1] * x.license_fee + b[2] * x.concentration
            + b[3] * x.population_density
            + b[4] * x.wage
            + eps1
    }

    /// Demand intercept at a given profile: everything except β₆·pW.
    pub fn demand_shift(&self, x: &ExogenousProfile, eps2: f64) -> f64 {
        let b = &self.beta;
        self.alpha1 + b[6] * x.income + b[7] * x.fixed_price + b[8] * x.teledensity + eps2
    }

    /// Coefficients of (1, 1, CL, COMP, POPD, W, INC, pF, TDF) in the
    /// numerator of the clearing price, demand shift minus supply shift.
    fn price_numerator(&self) -> [f64; 9] {
        let b = &self.beta;
        [self.alpha1, -self.alpha0, -b[1], -b[2], -b[3], -b[4], b[6], b[7], b[8]]
    }

    pub fn supply(&self, price: f64, x: &ExogenousProfile, eps1: f64) -> f64 {
        self.supply_shift(x, eps1) + self.beta[0] * price
    }

    pub fn demand(&self, price: f64, x: &ExogenousProfile, eps2: f64) -> f64 {
        self.demand_shift(x, eps2) + self.beta[5] * price
    }
}

/// Right-hand-side exogenous variables of the two structural equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExogenousProfile {
    #[serde(rename = "CL")]
    pub license_fee: f64,
    #[serde(rename = "COMP")]
    pub concentration: f64,
    #[serde(rename = "POPD")]
    pub population_density: f64,
    #[serde(rename = "W")]
    pub wage: f64,
    #[serde(rename = "INC")]
    pub income: f64,
    #[serde(rename = "pF")]
    pub fixed_price: f64,
    #[serde(rename = "TDF")]
    pub teledensity: f64,
}

impl ExogenousProfile {
    /// Same ranges as a loaded observation.
    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let vals = [
            ("CL", self.license_fee),
            ("COMP", self.concentration),
            ("POPD", self.population_density),
            ("W", self.wage),
            ("INC", self.income),
            ("pF", self.fixed_price),
            ("TDF", self.teledensity),
        ];
        if let Some((name, v)) = vals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(EquilibriumError::Profile(format!("{name} is not finite ({v})")));
        }
        if self.license_fee < 0.0 {
            return Err(EquilibriumError::Profile("CL must be >= 0".into()));
        }
        if !(self.concentration > 0.0 && self.concentration <= 10_000.0) {
            return Err(EquilibriumError::Profile("COMP must be in (0, 10000]".into()));
        }
        if self.population_density <= 0.0 {
            return Err(EquilibriumError::Profile("POPD must be > 0".into()));
        }
        if !(self.teledensity > 0.0 && self.teledensity <= 100.0) {
            return Err(EquilibriumError::Profile("TDF must be in (0, 100]".into()));
        }
        Ok(())
    }

    pub fn get(&self, v: Variable) -> Option<f64> {
        match v {
            Variable::LicenseFee => Some(self.license_fee),
            Variable::Concentration => Some(self.concentration),
            Variable::PopulationDensity => Some(self.population_density),
            Variable::Wage => Some(self.wage),
            Variable::Income => Some(self.income),
            Variable::FixedPrice => Some(self.fixed_price),
            Variable::Teledensity => Some(self.teledensity),
            Variable::Penetration | Variable::WirelessPrice => None,
        }
    }

    pub fn with_license_fee(mut self, fee: f64) -> Self {
        self.license_fee = fee;
        self
    }

    /// Builds an observation from this profile and an equilibrium.
    pub fn observation(&self, point: &EquilibriumPoint) -> MarketObservation {
        MarketObservation {
            penetration: point.q,
            wireless_price: point.p,
            license_fee: self.license_fee,
            concentration: self.concentration,
            population_density: self.population_density,
            wage: self.wage,
            fixed_price: self.fixed_price,
            income: self.income,
            teledensity: self.teledensity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainWarning {
    /// Equilibrium penetration is not in (0, 1].
    PenetrationOutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub p: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<DomainWarning>,
}

impl EquilibriumPoint {
    pub fn in_domain(&self) -> bool {
        self.warning.is_none()
    }
}

/// (demand shift − supply shift) / (β₁ − β₆), with the numerator summed
/// accurately: the shifts are often large and nearly cancel.
fn clearing_price(numerator: &[f64; 9], gap: f64, x: &ExogenousProfile, shocks: (f64, f64)) -> f64 {
    let terms = [numerator.as_slice(), &[1.0, -1.0]].concat();
    let values = [
        1.0,
        1.0,
        x.license_fee,
        x.concentration,
        x.population_density,
        x.wage,
        x.income,
        x.fixed_price,
        x.teledensity,
        shocks.1,
        shocks.0,
    ];
    accurate_dot(&terms, &values) / gap
}

/// Market-clearing price and quantity for given structural shocks.
pub fn solve_equilibrium(
    params: &StructuralParameters,
    x: &ExogenousProfile,
    shocks: (f64, f64),
) -> Result<EquilibriumPoint, EquilibriumError> {
    let gap = params.slope_gap()?;
    let p = clearing_price(&params.price_numerator(), gap, x, shocks);
    let q = params.supply_shift(x, shocks.0) + params.beta[0] * p;
    let warning = (!(q > 0.0 && q <= 1.0)).then_some(DomainWarning::PenetrationOutOfRange);
    Ok(EquilibriumPoint { p, q, warning })
}

/// Response of the equilibrium to the license fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparativeStatics {
    pub dp_dcl: f64,
    pub dq_dcl: f64,
}

impl ComparativeStatics {
    /// Fees raise prices and lower quantities.
    pub fn fee_raises_price_lowers_quantity(&self) -> bool {
        self.dp_dcl > 0.0 && self.dq_dcl < 0.0
    }
}

pub fn comparative_statics(
    params: &StructuralParameters,
) -> Result<ComparativeStatics, EquilibriumError> {
    let gap = params.slope_gap()?;
    let dp_dcl = -params.beta[1] / gap;
    Ok(ComparativeStatics {
        dp_dcl,
        dq_dcl: params.beta[5] * dp_dcl,
    })
}

/// Equilibrium price as a linear function of the exogenous variables.
///
/// `coefficients` are the literal slopes on (CL, COMP, POPD, W, INC, pF, TDF);
/// [`ReducedForm::xi`] gives the conventional presentation in which the first
/// four enter with a minus sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedForm {
    pub gamma: f64,
    pub coefficients: [f64; 7],
    /// Multiplier on (ε₂ − ε₁) giving the reduced-form disturbance ψ.
    pub disturbance_scale: f64,
    /// Undivided numerator coefficients of (1, 1, CL, COMP, POPD, W, INC,
    /// pF, TDF) and the slope gap β₁ − β₆; used to evaluate prices without
    /// the rounding of the divided coefficients.
    pub numerator: [f64; 9],
    pub slope_gap: f64,
}

impl ReducedForm {
    pub const ORDER: [Variable; 7] = [
        Variable::LicenseFee,
        Variable::Concentration,
        Variable::PopulationDensity,
        Variable::Wage,
        Variable::Income,
        Variable::FixedPrice,
        Variable::Teledensity,
    ];

    /// ξ₁…ξ₇ such that p = γ − ξ₁CL − ξ₂COMP − ξ₃POPD − ξ₄W + ξ₅INC + ξ₆pF + ξ₇TDF + ψ.
    pub fn xi(&self) -> [f64; 7] {
        let c = &self.coefficients;
        [-c[0], -c[1], -c[2], -c[3], c[4], c[5], c[6]]
    }

    pub fn psi(&self, shocks: (f64, f64)) -> f64 {
        (shocks.1 - shocks.0) * self.disturbance_scale
    }

    pub fn price(&self, x: &ExogenousProfile, shocks: (f64, f64)) -> f64 {
        clearing_price(&self.numerator, self.slope_gap, x, shocks)
    }
}

pub fn reduced_form(params: &StructuralParameters) -> Result<ReducedForm, EquilibriumError> {
    let gap = params.slope_gap()?;
    let b = &params.beta;
    Ok(ReducedForm {
        gamma: (params.alpha1 - params.alpha0) / gap,
        coefficients: [
            -b[1] / gap,
            -b[2] / gap,
            -b[3] / gap,
            -b[4] / gap,
            b[6] / gap,
            b[7] / gap,
            b[8] / gap,
        ],
        disturbance_scale: 1.0 / gap,
        numerator: params.price_numerator(),
        slope_gap: gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalitySettings {
    /// Coefficient on the installed base in the demand equation.
    pub beta10: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Weight on the new iterate, in (0, 1].
    pub damping: f64,
}

impl Default for ExternalitySettings {
    fn default() -> Self {
        Self {
            beta10: 0.0,
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: EquilibriumPoint,
    pub iterations: usize,
}

/// Slope of the map q ↦ q*(demand shifted by β₁₀·q).
pub fn externality_amplification(
    params: &StructuralParameters,
    beta10: f64,
) -> Result<f64, EquilibriumError> {
    let gap = params.slope_gap()?;
    Ok(beta10 * params.beta[0] / gap)
}

/// Equilibrium with demand shifted by β₁₀ times the installed base, iterated
/// with damping until the installed base is self-consistent.
pub fn externality_fixed_point(
    params: &StructuralParameters,
    x: &ExogenousProfile,
    settings: ExternalitySettings,
) -> Result<FixedPoint, EquilibriumError> {
    if !(settings.tol > 0.0) {
        return Err(EquilibriumError::Parameters("tolerance must be > 0".into()));
    }
    if !(settings.damping > 0.0 && settings.damping <= 1.0) {
        return Err(EquilibriumError::Parameters("damping must be in (0, 1]".into()));
    }
    let base = solve_equilibrium(params, x, (0.0, 0.0))?;
    if settings.beta10 == 0.0 {
        return Ok(FixedPoint {
            point: base,
            iterations: 1,
        });
    }
    let amplification = externality_amplification(params, settings.beta10)?;
    if amplification.abs() >= 1.0 {
        return Err(EquilibriumError::NonConvergence {
            iterations: 1,
            amplification,
            last: base,
        });
    }
    let mut q = base.q;
    let mut last = base;
    for it in 2..=settings.max_iter {
        let target = solve_equilibrium(params, x, (0.0, settings.beta10 * q))?;
        let next = q + settings.damping * (target.q - q);
        let done = (next - q).abs() < settings.tol;
        q = next;
        last = solve_equilibrium(params, x, (0.0, settings.beta10 * q))?;
        if done {
            return Ok(FixedPoint {
                point: last,
                iterations: it,
            });
        }
    }
    Err(EquilibriumError::NonConvergence {
        iterations: settings.max_iter,
        amplification,
        last,
    })
}

/// One-period update rule for the adoption path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionScheme {
    /// q ← q + r·q·(1 − q/q̄).
    #[default]
    Discrete,
    /// Exact one-period flow of dq/dt = r·q·(1 − q/q̄) with q̄ held fixed.
    Continuous,
}

/// Logistic adoption with saturation q̄(p) = `saturation_base`·exp(−`price_sensitivity`·p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionDynamics {
    pub rate: f64,
    pub initial: f64,
    pub saturation_base: f64,
    pub price_sensitivity: f64,
    /// Installed-base effect on demand (0 disables the feedback).
    #[serde(default)]
    pub network_effect: f64,
    #[serde(default)]
    pub scheme: DiffusionScheme,
}

impl Default for DiffusionDynamics {
    /// Saturation 0.56 at the sample-mean equilibrium price (≈290).
    fn default() -> Self {
        Self {
            rate: 0.3,
            initial: 0.01,
            saturation_base: 1.0,
            price_sensitivity: 0.002,
            network_effect: 0.0,
            scheme: DiffusionScheme::Discrete,
        }
    }
}

impl DiffusionDynamics {
    pub fn saturation(&self, price: f64) -> f64 {
        self.saturation_base * (-self.price_sensitivity * price).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionStep {
    pub t: usize,
    pub q: f64,
    pub p: f64,
    /// (q_{t+1} − q_t) / q_t.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub steps: Vec<DiffusionStep>,
    pub mean_growth: f64,
    /// Starting at or above saturation: growth is zero or negative throughout.
    pub saturated_start: bool,
}

pub fn simulate_diffusion(
    params: &StructuralParameters,
    x: &ExogenousProfile,
    dynamics: &DiffusionDynamics,
    periods: usize,
) -> Result<DiffusionPath, EquilibriumError> {
    let d = dynamics;
    if !(d.rate > 0.0) || !d.rate.is_finite() {
        return Err(EquilibriumError::Dynamics("rate must be > 0".into()));
    }
    if !(d.initial > 0.0 && d.initial <= 1.0) {
        return Err(EquilibriumError::Dynamics("initial penetration must be in (0, 1]".into()));
    }
    if !(d.saturation_base > 0.0 && d.saturation_base <= 1.0) {
        return Err(EquilibriumError::Dynamics("saturation base must be in (0, 1]".into()));
    }
    if !d.price_sensitivity.is_finite() || !d.network_effect.is_finite() {
        return Err(EquilibriumError::Dynamics("non-finite dynamics parameter".into()));
    }
    if periods == 0 {
        return Err(EquilibriumError::Dynamics("at least one period required".into()));
    }

    let price_at = |q: f64| -> Result<f64, EquilibriumError> {
        Ok(solve_equilibrium(params, x, (0.0, d.network_effect * q))?.p)
    };
    let mut q = d.initial;
    let p0 = price_at(q)?;
    let saturated_start = q >= d.saturation(p0);
    let mut steps = Vec::with_capacity(periods);
    for t in 0..periods {
        let p = price_at(q)?;
        let cap = d.saturation(p);
        let next = match d.scheme {
            DiffusionScheme::Discrete => q + d.rate * q * (1.0 - q / cap),
            DiffusionScheme::Continuous => {
                let e = d.rate.exp();
                cap * q * e / (cap + q * (e - 1.0))
            }
        };
        if !(next > 0.0 && next <= 1.0) {
            return Err(EquilibriumError::Dynamics(format!(
                "penetration left (0, 1] at t = {}: {next}",
                t + 1
            )));
        }
        steps.push(DiffusionStep {
            t,
            q,
            p,
            g: (next - q) / q,
        });
        q = next;
    }
    let mean_growth = steps.iter().map(|s| s.g).sum::<f64>() / steps.len() as f64;
    Ok(DiffusionPath {
        steps,
        mean_growth,
        saturated_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(cl: f64) -> ExogenousProfile {
        ExogenousProfile {
            license_fee: cl,
            concentration: 1.0,
            population_density: 1.0,
            wage: 1.0,
            income: 1.0,
            fixed_price: 1.0,
            teledensity: 1.0,
        }
    }

    /// supply q = p, demand q = 10 − p.
    fn toy() -> StructuralParameters {
        let mut beta = [0.0; 9];
        beta[0] = 1.0;
        beta[5] = -1.0;
        StructuralParameters {
            alpha0: 0.0,
            alpha1: 10.0,
            beta,
            sigma: [[0.0; 2]; 2],
        }
    }

    #[test]
    fn toy_equilibrium() {
        let e = solve_equilibrium(&toy(), &profile(0.0), (0.0, 0.0)).unwrap();
        assert_eq!((e.p, e.q), (5.0, 5.0));
        // 5 is outside the penetration range: flagged, not rejected.
        assert_eq!(e.warning, Some(DomainWarning::PenetrationOutOfRange));
    }

    #[test]
    fn degenerate_slopes_rejected() {
        let mut p = toy();
        p.beta[5] = p.beta[0];
        assert!(matches!(
            solve_equilibrium(&p, &profile(0.0), (0.0, 0.0)),
            Err(EquilibriumError::Degenerate { .. })
        ));
        assert!(comparative_statics(&p).is_err());
        assert!(reduced_form(&p).is_err());
    }

    #[test]
    fn toy_reduced_form() {
        let rf = reduced_form(&toy()).unwrap();
        assert_eq!(rf.gamma, 5.0);
        assert!(rf.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn statics_sign_algebra() {
        let mut p = toy();
        assert_eq!(
            comparative_statics(&p).unwrap(),
            ComparativeStatics {
                dp_dcl: 0.0,
                dq_dcl: 0.0
            }
        );
        p.beta[1] = 0.5;
        let cs = comparative_statics(&p).unwrap();
        assert!(cs.dp_dcl < 0.0);
        p.beta[1] = -0.5;
        let cs = comparative_statics(&p).unwrap();
        assert!(cs.fee_raises_price_lowers_quantity());
    }

    #[test]
    fn externality_zero_matches_plain_solve() {
        let base = solve_equilibrium(&toy(), &profile(0.0), (0.0, 0.0)).unwrap();
        let fp = externality_fixed_point(&toy(), &profile(0.0), ExternalitySettings::default())
            .unwrap();
        assert_eq!(fp.iterations, 1);
        assert_eq!(fp.point, base);
    }

    #[test]
    fn positive_externality_raises_quantity() {
        let settings = ExternalitySettings {
            beta10: 0.2,
            ..Default::default()
        };
        let fp = externality_fixed_point(&toy(), &profile(0.0), settings).unwrap();
        let base = solve_equilibrium(&toy(), &profile(0.0), (0.0, 0.0)).unwrap();
        assert!(fp.point.q > base.q);
        // self-consistency: q = q*(β10·q)
        let again = solve_equilibrium(&toy(), &profile(0.0), (0.0, 0.2 * fp.point.q)).unwrap();
        assert!((again.q - fp.point.q).abs() < 1e-10);
        // closed form: q = 5 + β10·q/2 → q = 5 / (1 − 0.1)
        assert!((fp.point.q - 5.0 / 0.9).abs() < 1e-10);
    }

    #[test]
    fn explosive_externality_rejected() {
        let settings = ExternalitySettings {
            beta10: 3.0,
            ..Default::default()
        };
        assert!((externality_amplification(&toy(), 3.0).unwrap() - 1.5).abs() < 1e-15);
        match externality_fixed_point(&toy(), &profile(0.0), settings) {
            Err(EquilibriumError::NonConvergence { amplification, .. }) => {
                assert!((amplification - 1.5).abs() < 1e-15)
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn max_iter_exhaustion_carries_last_iterate() {
        let settings = ExternalitySettings {
            beta10: 1.8,
            tol: 1e-15,
            max_iter: 3,
            damping: 0.1,
        };
        match externality_fixed_point(&toy(), &profile(0.0), settings) {
            Err(EquilibriumError::NonConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 3);
                assert!(last.q > 5.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    fn flat_dynamics(q0: f64, cap: f64) -> DiffusionDynamics {
        DiffusionDynamics {
            rate: 0.5,
            initial: q0,
            saturation_base: cap,
            price_sensitivity: 0.0,
            network_effect: 0.0,
            scheme: DiffusionScheme::Discrete,
        }
    }

    #[test]
    fn saturated_start_has_zero_growth() {
        let path = simulate_diffusion(&toy(), &profile(0.0), &flat_dynamics(0.6, 0.6), 10).unwrap();
        assert!(path.saturated_start);
        assert!(path.steps.iter().all(|s| s.g == 0.0));
    }

    #[test]
    fn discrete_scheme_matches_recurrence() {
        let path = simulate_diffusion(&toy(), &profile(0.0), &flat_dynamics(0.01, 0.8), 40).unwrap();
        let mut q = 0.01_f64;
        for s in &path.steps {
            assert!((s.q - q).abs() < 1e-15);
            q += 0.5 * q * (1.0 - q / 0.8);
        }
    }

    #[test]
    fn continuous_scheme_matches_closed_form_logistic() {
        let mut d = flat_dynamics(0.01, 0.8);
        d.scheme = DiffusionScheme::Continuous;
        let path = simulate_diffusion(&toy(), &profile(0.0), &d, 40).unwrap();
        for s in &path.steps {
            let t = s.t as f64;
            let exact = 0.8 / (1.0 + (0.8 / 0.01 - 1.0) * (-0.5 * t).exp());
            assert!((s.q - exact).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn diffusion_rejects_bad_dynamics() {
        let mut d = flat_dynamics(0.01, 0.8);
        d.rate = 0.0;
        assert!(simulate_diffusion(&toy(), &profile(0.0), &d, 5).is_err());
        let d = flat_dynamics(0.0, 0.8);
        assert!(simulate_diffusion(&toy(), &profile(0.0), &d, 5).is_err());
    }

    fn arb_params() -> impl Strategy<Value = StructuralParameters> {
        (
            -2.0f64..2.0,
            -2.0f64..2.0,
            0.05f64..3.0,
            prop::array::uniform4(-1.0f64..1.0),
            -3.0f64..-0.05,
            prop::array::uniform3(-1.0f64..1.0),
        )
            .prop_map(|(a0, a1, b1, s, b6, d)| StructuralParameters {
                alpha0: a0,
                alpha1: a1,
                beta: [b1, s[0], s[1], s[2], s[3], b6, d[0], d[1], d[2]],
                sigma: [[0.0; 2]; 2],
            })
    }

    fn arb_profile() -> impl Strategy<Value = ExogenousProfile> {
        prop::array::uniform7(0.01f64..10.0).prop_map(|v| ExogenousProfile {
            license_fee: v[0],
            concentration: v[1],
            population_density: v[2],
            wage: v[3],
            income: v[4],
            fixed_price: v[5],
            teledensity: v[6],
        })
    }

    proptest! {
        #[test]
        fn clearing_residual(p in arb_params(), x in arb_profile(), e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
            let eq = solve_equilibrium(&p, &x, (e1, e2)).unwrap();
            let gap = (p.supply(eq.p, &x, e1) - p.demand(eq.p, &x, e2)).abs();
            prop_assert!(gap < 1e-10);
        }

        #[test]
        fn shock_homogeneity(p in arb_params(), x in arb_profile(), e1 in -1.0f64..1.0, e2 in -1.0f64..1.0, lambda in -3.0f64..3.0) {
            let base = solve_equilibrium(&p, &x, (0.0, 0.0)).unwrap().p;
            let one = solve_equilibrium(&p, &x, (e1, e2)).unwrap().p - base;
            let scaled = solve_equilibrium(&p, &x, (lambda * e1, lambda * e2)).unwrap().p - base;
            let gap = p.beta[0] - p.beta[5];
            prop_assert!((one - (e2 - e1) / gap).abs() < 1e-9);
            prop_assert!((scaled - lambda * one).abs() < 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn reduced_form_agrees(p in arb_params(), x in arb_profile(), e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
            let eq = solve_equilibrium(&p, &x, (e1, e2)).unwrap();
            let rf = reduced_form(&p).unwrap();
            prop_assert!((rf.price(&x, (e1, e2)) - eq.p).abs() <= 1e-12 * eq.p.abs().max(1.0));
            prop_assert_eq!(rf.coefficients[0], comparative_statics(&p).unwrap().dp_dcl);
        }

        #[test]
        fn h0a_signs(p in arb_params()) {
            let mut p = p;
            p.beta[1] = -p.beta[1].abs() - 0.01;
            let cs = comparative_statics(&p).unwrap();
            prop_assert!(cs.dp_dcl > 0.0 && cs.dq_dcl < 0.0);
        }
    }
}
