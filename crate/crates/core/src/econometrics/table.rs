use std::fmt::Write;

use super::{EstimationResult, Method, INTERCEPT};

fn number(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    if x.abs() >= 1e-4 && x.abs() < 1e7 {
        format!("{x:.7}")
    } else {
        format!("{x:.3e}")
    }
}

fn fixed(x: f64, decimals: usize) -> String {
    if x.is_finite() {
        format!("{x:.decimals$}")
    } else {
        "n/a".into()
    }
}

/// Plain-text coefficient table: one block per equation with columns
/// Coefficient / Standard error / z / P > z and an R², P(χ²) footer.
pub fn render_table(result: &EstimationResult) -> String {
    let title = match result.method {
        Method::ThreeSls => "3SLS structural equation estimation results",
        Method::TwoSls => "2SLS equation-by-equation estimation results",
        Method::Ols => "OLS estimation results",
    };
    let mut out = String::new();
    let _ = writeln!(out, "{title} (n = {})", result.n);
    for w in &result.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<14}{:>16}{:>16}{:>10}{:>8}",
        "", "Coefficient", "Standard error", "z", "P > z"
    );
    for eq in &result.equations {
        let _ = writeln!(out, "{} ({})", eq.name, eq.dependent);
        for i in 0..eq.coefficients.len() {
            let label = if eq.regressors[i] == INTERCEPT {
                "Constant"
            } else {
                eq.regressors[i].as_str()
            };
            let _ = writeln!(
                out,
                "  {:<12}{:>16}{:>16}{:>10}{:>8}",
                label,
                number(eq.coefficients[i]),
                number(eq.std_errors[i]),
                fixed(eq.z[i], 3),
                fixed(eq.p_values[i], 3)
            );
        }
        let _ = writeln!(
            out,
            "  {:<12}{:>16}{:>16}{:>10}",
            "R²",
            fixed(eq.r_squared, 4),
            "P(χ²)",
            fixed(eq.wald_p_value, 4)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_numbers_switch_to_scientific() {
        assert_eq!(number(0.0003566), "0.0003566");
        assert_eq!(number(6.02e-6), "6.020e-6");
        assert_eq!(number(f64::NAN), "n/a");
    }
}
