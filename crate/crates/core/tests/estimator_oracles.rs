use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectrum_core::econometrics::{
    ols, ols_system, three_sls, three_sls_with, two_sls, two_sls_system, ColumnTable,
    EquationSpec, Method, SigmaChoice, SystemSpec, INTERCEPT,
};
use spectrum_core::linalg::Matrix;

/// Solves A x = b by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            gauss_solve(a.to_vec(), e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// β = (X'X)⁻¹X'y and se = sqrt(diag(s²(X'X)⁻¹)) from explicit normal equations.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, k) = (x.len(), x[0].len());
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| (0..n).map(|i| x[i][a] * x[i][b]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..k).map(|a| (0..n).map(|i| x[i][a] * y[i]).sum()).collect();
    let beta = gauss_solve(xtx.clone(), xty);
    let ssr: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..k).map(|a| x[i][a] * beta[a]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    let s2 = ssr / (n - k) as f64;
    let inv = inverse(&xtx);
    let se = (0..k).map(|a| (s2 * inv[a][a]).sqrt()).collect();
    (beta, se)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("x{i}")).collect()
}

#[test]
fn ols_matches_normal_equations_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(15..200);
        let k = rng.random_range(2..7);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..k).map(|_| rng.random_range(-2.0..2.0)));
                r
            })
            .collect();
        let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()
                    + 0.5 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let (b_ref, se_ref) = normal_equations(&rows, &y);
        let x = Matrix::from_rows(&rows).unwrap();
        let fit = ols(&y, &x, &names(k)).unwrap();
        let eq = &fit.equations[0];
        for j in 0..k {
            assert!(rel_err(eq.coefficients[j], b_ref[j]) <= 1e-10, "coef {j}");
            assert!(rel_err(eq.std_errors[j], se_ref[j]) <= 1e-10, "se {j}");
        }
    }
}

/// Two-equation simultaneous system with one endogenous regressor `p`.
fn simultaneous_data(n: usize, seed: u64) -> ColumnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: [Vec<f64>; 6] = Default::default();
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z3: f64 = rng.sample(StandardNormal);
        let e1: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
        let e2: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal) + 0.3 * e1;
        // supply: q = 1 + 0.8 p + 0.5 z1 + e1 ; demand: q = 4 − 1.0 p + 0.7 z2 − 0.4 z3 + e2
        let p = (4.0 + 0.7 * z2 - 0.4 * z3 + e2 - 1.0 - 0.5 * z1 - e1) / (0.8 + 1.0);
        let q = 1.0 + 0.8 * p + 0.5 * z1 + e1;
        for (c, v) in cols.iter_mut().zip([q, p, z1, z2, z3, 0.0]) {
            c.push(v);
        }
    }
    let [q, p, z1, z2, z3, _] = cols;
    ColumnTable::new()
        .with("q", q)
        .with("p", p)
        .with("z1", z1)
        .with("z2", z2)
        .with("z3", z3)
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn simultaneous_system() -> SystemSpec {
    SystemSpec {
        equations: vec![
            EquationSpec {
                name: Some("supply".into()),
                dependent: "q".into(),
                regressors: s(&["p", "z1", INTERCEPT]),
                endogenous: s(&["p"]),
            },
            EquationSpec {
                name: Some("demand".into()),
                dependent: "q".into(),
                regressors: s(&["p", "z2", "z3", INTERCEPT]),
                endogenous: s(&["p"]),
            },
        ],
        instruments: s(&["z1", "z2", "z3", INTERCEPT]),
    }
}

#[test]
fn three_sls_with_identity_sigma_equals_2sls() {
    let data = simultaneous_data(300, 1);
    let sys = simultaneous_system();
    let a = three_sls_with(&sys, &data, SigmaChoice::Fixed(Matrix::identity(2))).unwrap();
    let b = two_sls_system(&sys, &data).unwrap();
    assert_eq!(a.method, Method::ThreeSls);
    for (ea, eb) in a.equations.iter().zip(&b.equations) {
        for (x, y) in ea.coefficients.iter().zip(&eb.coefficients) {
            assert!(rel_err(*x, *y) <= 1e-10, "{x} vs {y}");
        }
    }
}

#[test]
fn sur_with_identical_exogenous_regressors_equals_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 250;
    let x1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut y1 = Vec::new();
    let mut y2 = Vec::new();
    for i in 0..n {
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample::<f64, _>(StandardNormal) + 0.8 * u;
        y1.push(1.0 + 2.0 * x1[i] - 0.5 * x2[i] + u);
        y2.push(-3.0 + 0.3 * x1[i] + 1.5 * x2[i] + v);
    }
    let data = ColumnTable::new()
        .with("y1", y1)
        .with("y2", y2)
        .with("x1", x1)
        .with("x2", x2);
    let regs = s(&["x1", "x2", INTERCEPT]);
    let sys = SystemSpec {
        equations: vec![
            EquationSpec {
                name: None,
                dependent: "y1".into(),
                regressors: regs.clone(),
                endogenous: vec![],
            },
            EquationSpec {
                name: None,
                dependent: "y2".into(),
                regressors: regs.clone(),
                endogenous: vec![],
            },
        ],
        instruments: regs,
    };
    let a = three_sls(&sys, &data).unwrap();
    let b = ols_system(&sys, &data).unwrap();
    assert_eq!(a.method, Method::ThreeSls);
    for (ea, eb) in a.equations.iter().zip(&b.equations) {
        for (x, y) in ea.coefficients.iter().zip(&eb.coefficients) {
            assert!(rel_err(*x, *y) <= 1e-10, "{x} vs {y}");
        }
    }
}

#[test]
fn instrumenting_removes_simultaneity_bias() {
    let data = simultaneous_data(10_000, 17);
    let sys = simultaneous_system();
    let iv = two_sls(&sys.equations[1], &sys.instruments, &data).unwrap();
    let ls = ols_system(
        &SystemSpec {
            equations: vec![sys.equations[1].clone()],
            instruments: sys.instruments.clone(),
        },
        &data,
    )
    .unwrap();
    let b_iv = iv.equations[0].coefficient("p").unwrap();
    let b_ls = ls.equations[0].coefficient("p").unwrap();
    assert!((b_iv + 1.0).abs() < 0.05, "2SLS {b_iv}");
    assert!((b_ls + 1.0).abs() > 3.0 * (b_iv + 1.0).abs(), "OLS {b_ls}");
    // 3SLS is consistent as well.
    let full = three_sls(&sys, &data).unwrap();
    let d = full.equation("demand").unwrap().coefficient("p").unwrap();
    let s = full.equation("supply").unwrap().coefficient("p").unwrap();
    assert!((d + 1.0).abs() < 0.05 && (s - 0.8).abs() < 0.05);
}

#[test]
fn three_sls_reports_table_quantities() {
    let data = simultaneous_data(500, 5);
    let r = three_sls(&simultaneous_system(), &data).unwrap();
    assert_eq!(r.n, 500);
    for eq in &r.equations {
        assert_eq!(eq.wald_df, eq.coefficients.len() - 1);
        assert!(eq.wald_p_value >= 0.0 && eq.wald_p_value <= 1.0);
        assert!(eq.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        for j in 0..eq.coefficients.len() {
            assert!((eq.z[j] - eq.coefficients[j] / eq.std_errors[j]).abs() < 1e-9);
        }
    }
    assert!(r.sigma_hat.is_symmetric(1e-12));
}

#[test]
fn singular_residual_covariance_falls_back_to_2sls() {
    // Both equations identical → residuals identical → Σ̂ singular.
    let data = simultaneous_data(200, 8);
    let mut sys = simultaneous_system();
    sys.equations[1] = sys.equations[0].clone();
    sys.equations[1].name = Some("copy".into());
    let r = three_sls(&sys, &data).unwrap();
    assert_eq!(r.method, Method::TwoSls);
    assert!(!r.warnings.is_empty());
}

fn scaled(data: &ColumnTable, name: &str, c: f64, base: &[&str]) -> ColumnTable {
    let mut out = ColumnTable::new();
    use spectrum_core::econometrics::ColumnSource;
    for n in base {
        let mut v = data.column(n).unwrap();
        if *n == name {
            v.iter_mut().for_each(|x| *x *= c);
        }
        out.insert(n, v);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rescaling_an_exogenous_column_rescales_its_coefficient(
        seed in 0u64..1000,
        c in prop_oneof![-50.0..-0.02f64, 0.02..50.0f64],
        which in 0usize..3,
    ) {
        let data = simultaneous_data(120, seed);
        let var = ["z1", "z2", "z3"][which];
        let cols = ["q", "p", "z1", "z2", "z3"];
        let data2 = scaled(&data, var, c, &cols);
        let sys = simultaneous_system();
        type Est = fn(&SystemSpec, &ColumnTable) -> Result<spectrum_core::econometrics::EstimationResult, spectrum_core::econometrics::EstimationError>;
        let estimators: [Est; 3] = [
            |s, d| ols_system(s, d),
            |s, d| two_sls_system(s, d),
            |s, d| three_sls(s, d),
        ];
        for est in estimators {
            let a = est(&sys, &data).unwrap();
            let b = est(&sys, &data2).unwrap();
            for (ea, eb) in a.equations.iter().zip(&b.equations) {
                for (j, r) in ea.regressors.iter().enumerate() {
                    let expect = if r == var { ea.coefficients[j] / c } else { ea.coefficients[j] };
                    prop_assert!(rel_err(eb.coefficients[j], expect) < 1e-8,
                        "{r}: {} vs {}", eb.coefficients[j], expect);
                }
                prop_assert!((ea.r_squared - eb.r_squared).abs() < 1e-8);
                prop_assert!((ea.wald_chi2 - eb.wald_chi2).abs() < 1e-6 * ea.wald_chi2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_regressors(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 40;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(0.0..10.0)]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let m = Matrix::from_rows(&x).unwrap();
        let fit = ols(&y, &m, &names(3)).unwrap();
        let b = &fit.equations[0].coefficients;
        for j in 0..3 {
            let g: f64 = (0..n).map(|i| x[i][j] * (y[i] - (0..3).map(|a| x[i][a] * b[a]).sum::<f64>())).sum();
            prop_assert!(g.abs() < 1e-9);
        }
    }
}
