use std::fs;
use std::io::Write;

use serde::Serialize;
use spectrum_core::auction::{run_auction, AuctionConfig, Bidder, RunOptions, Straightforward};
use spectrum_core::econometrics::{ols_system, render_table, three_sls, two_sls_system};
use spectrum_core::equilibrium::{
    comparative_statics, simulate_diffusion, solve_equilibrium, ComparativeStatics,
    DiffusionDynamics, DiffusionScheme, EquilibriumPoint,
};
use spectrum_core::exec::Execution;
use spectrum_core::fixtures;
use spectrum_core::market_data::{correlation, summary_stats, LicenseRegime};
use spectrum_core::montecarlo::{
    coefficient_labels, gen_data, hypothesis_report, recovery_experiment,
    write_replications_csv, DomainPolicy, GenOptions, RecoveryConfig,
};

use crate::error::{CliError, CliResult};
use crate::{chart, io};
use crate::{
    AuctionArgs, ChartArgs, Command, CurvesArgs, DiffusionArgs, Domain, EstimateArgs, FeesArgs,
    Format, GenArgs, GenDataArgs, MarketCommand, MethodArg, MonteCarloArgs, ReplicateArgs,
    Scheme, StatsArgs,
};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Auction(a) => auction(a),
        Command::Market(MarketCommand::Fees(a)) => fees(a),
        Command::Market(MarketCommand::Curves(a)) => curves(a),
        Command::Diffusion(a) => diffusion(a),
        Command::GenData(a) => gen_data_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Stats(a) => stats(a),
        Command::Replicate(a) => replicate(a),
        Command::Chart(a) => chart_cmd(a),
    }
}

fn auction(a: AuctionArgs) -> CliResult<()> {
    let config = io::read_json(&a.config, AuctionConfig::from_json)?;
    let bidders = io::read_json(&a.bidders, |t| Bidder::list_from_json(t, &config))?;
    let outcome = run_auction(
        &config,
        &bidders,
        &Straightforward,
        RunOptions {
            seed: a.seed,
            trace: a.trace,
        },
    )?;
    io::write_json(a.out.as_deref(), &outcome)
}

fn fees(a: FeesArgs) -> CliResult<()> {
    let regimes = match &a.regimes {
        Some(p) => io::read_json(p, LicenseRegime::list_from_json)?,
        None => fixtures::table1_regimes(),
    };
    let mut w = csv::Writer::from_writer(io::writer(a.out.as_deref())?);
    w.write_record([
        "country",
        "initial",
        "recurring",
        "years",
        "total",
        "subscribers",
        "fee_per_subscriber_usd",
        "method",
    ])?;
    for r in &regimes {
        let total = r.total_cost()?;
        let per_sub = r.fee_per_subscriber_usd()?;
        let method = serde_json::to_value(r.licensing_method)?;
        w.write_record([
            r.country_label.clone(),
            r.initial_payment.to_string(),
            r.recurring_annual_fee.to_string(),
            r.horizon_years.to_string(),
            total.to_string(),
            r.subscribers.map(|s| s.to_string()).unwrap_or_default(),
            per_sub.map(|f| format!("{f:.2}")).unwrap_or_default(),
            method.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurvesSummary {
    base_cl: f64,
    fee_cl: f64,
    base: EquilibriumPoint,
    fee: EquilibriumPoint,
    statics: ComparativeStatics,
}

fn curves(a: CurvesArgs) -> CliResult<()> {
    let params = io::params(a.model.params.as_deref())?;
    let x = io::profile(a.model.profile.as_deref())?;
    if a.points < 2 {
        return Err(CliError::new("validation", "--points must be at least 2"));
    }
    let base_x = x.with_license_fee(a.cl);
    let fee_x = x.with_license_fee(a.compare_cl);
    let base = solve_equilibrium(&params, &base_x, (0.0, 0.0))?;
    let fee = solve_equilibrium(&params, &fee_x, (0.0, 0.0))?;
    let p_max = a.p_max.unwrap_or(2.0 * base.p.max(fee.p));
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(CliError::new("validation", "price grid upper bound must be positive"));
    }
    let mut w = csv::Writer::from_writer(io::writer(a.out.as_deref())?);
    w.write_record(["p", "demand", "supply_base", "supply_fee"])?;
    for i in 0..a.points {
        let p = p_max * i as f64 / (a.points - 1) as f64;
        w.write_record([
            p.to_string(),
            params.demand(p, &base_x, 0.0).to_string(),
            params.supply(p, &base_x, 0.0).to_string(),
            params.supply(p, &fee_x, 0.0).to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &a.summary {
        let summary = CurvesSummary {
            base_cl: a.cl,
            fee_cl: a.compare_cl,
            base,
            fee,
            statics: comparative_statics(&params)?,
        };
        io::write_json(Some(path), &summary)?;
    }
    Ok(())
}

fn diffusion(a: DiffusionArgs) -> CliResult<()> {
    let params = io::params(a.model.params.as_deref())?;
    let mut x = io::profile(a.model.profile.as_deref())?;
    if let Some(cl) = a.cl {
        x = x.with_license_fee(cl);
    }
    let dynamics = DiffusionDynamics {
        rate: a.rate,
        initial: a.initial,
        saturation_base: a.saturation,
        price_sensitivity: a.eta,
        network_effect: a.network_effect,
        scheme: match a.scheme {
            Scheme::Discrete => DiffusionScheme::Discrete,
            Scheme::Continuous => DiffusionScheme::Continuous,
        },
    };
    let mut paths = vec![(x.license_fee, simulate_diffusion(&params, &x, &dynamics, a.periods)?)];
    if let Some(cl) = a.compare_cl {
        let alt = x.with_license_fee(cl);
        paths.push((cl, simulate_diffusion(&params, &alt, &dynamics, a.periods)?));
    }
    let labelled = paths.len() > 1;
    let mut w = csv::Writer::from_writer(io::writer(a.out.as_deref())?);
    if labelled {
        w.write_record(["path", "t", "q", "p", "g"])?;
    } else {
        w.write_record(["t", "q", "p", "g"])?;
    }
    for (cl, path) in &paths {
        for s in &path.steps {
            let mut row = Vec::with_capacity(5);
            if labelled {
                row.push(format!("CL={cl}"));
            }
            row.extend([s.t.to_string(), s.q.to_string(), s.p.to_string(), s.g.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    for (cl, path) in &paths {
        let note = if path.saturated_start {
            " (saturated start)"
        } else {
            ""
        };
        eprintln!("CL={cl}: mean growth {:.6}{note}", path.mean_growth);
    }
    Ok(())
}

fn gen_options(g: &GenArgs, default_domain: DomainPolicy) -> GenOptions {
    GenOptions {
        truncate: g.truncate,
        max_tries_per_row: g.max_tries,
        domain: match g.domain {
            Some(Domain::ResampleShocks) => DomainPolicy::ResampleShocks,
            Some(Domain::ResampleRow) => DomainPolicy::ResampleRow,
            Some(Domain::Keep) => DomainPolicy::Keep,
            None => default_domain,
        },
    }
}

fn gen_data_cmd(a: GenDataArgs) -> CliResult<()> {
    let targets = io::targets(a.gen.targets.as_deref())?;
    let params = io::params(a.gen.params.as_deref())?;
    let opts = gen_options(&a.gen, DomainPolicy::ResampleShocks);
    let data = gen_data(&targets, &params, a.n, a.seed, opts)?;
    let mut w = io::writer(a.out.as_deref())?;
    data.save(&mut w)?;
    w.flush()?;
    Ok(())
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let data = io::dataset(&a.data, a.lenient)?;
    let system = io::system(a.spec.as_deref())?;
    let result = match a.method {
        MethodArg::Ols => ols_system(&system, &data)?,
        MethodArg::TwoSls => two_sls_system(&system, &data)?,
        MethodArg::ThreeSls => three_sls(&system, &data)?,
    };
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match a.format {
        Format::Table => io::write_text(a.out.as_deref(), &render_table(&result)),
        Format::Json => io::write_json(a.out.as_deref(), &result),
    }
}

fn montecarlo(a: MonteCarloArgs) -> CliResult<()> {
    let targets = io::targets(a.gen.targets.as_deref())?;
    let truth = io::params(a.gen.params.as_deref())?;
    let system = io::system(a.spec.as_deref())?;
    let mut config = RecoveryConfig::new(a.n, a.replications, a.seed);
    config.gen = gen_options(&a.gen, config.gen.domain);
    let execution = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let (report, records) = recovery_experiment(&targets, &truth, &system, &config, execution)?;
    if let Some(path) = &a.estimates {
        let w = io::writer(Some(path))?;
        write_replications_csv(&records, &coefficient_labels(&system), w)?;
    }
    io::write_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct StatsReport {
    summary: spectrum_core::market_data::SummaryStats,
    correlation: spectrum_core::market_data::CorrelationMatrix,
}

fn stats(a: StatsArgs) -> CliResult<()> {
    let data = io::dataset(&a.data, a.lenient)?;
    let report = StatsReport {
        summary: summary_stats(&data)?,
        correlation: correlation(&data)?,
    };
    io::write_json(a.out.as_deref(), &report)
}

fn replicate(a: ReplicateArgs) -> CliResult<()> {
    let targets = fixtures::moment_targets();
    let truth = fixtures::table5_params();
    let system = fixtures::paper_model();
    let opts = GenOptions {
        truncate: !a.no_truncate,
        max_tries_per_row: 1000,
        ..GenOptions::default()
    };
    let data = gen_data(&targets, &truth, a.n, a.seed, opts)?;
    let result = three_sls(&system, &data)?;
    let hypothesis = hypothesis_report(&result)?;

    fs::create_dir_all(&a.out).map_err(|e| CliError::from(e).in_file(&a.out))?;
    let mut w = io::writer(Some(&io::join(&a.out, "data.csv")))?;
    data.save(&mut w)?;
    w.flush()?;
    io::write_json(Some(&io::join(&a.out, "estimates.json")), &result)?;
    io::write_text(Some(&io::join(&a.out, "table.txt")), &render_table(&result))?;
    io::write_json(Some(&io::join(&a.out, "hypothesis.json")), &hypothesis)?;
    Ok(())
}

fn chart_cmd(a: ChartArgs) -> CliResult<()> {
    let text = io::read_text(&a.series)?;
    let svg = match a.kind {
        crate::ChartKind::SupplyDemand => chart::supply_demand(&text),
        crate::ChartKind::Diffusion => chart::diffusion(&text),
        crate::ChartKind::McHistogram => {
            let column = a.column.as_deref().ok_or_else(|| {
                CliError::new("validation", "--column is required for mc-histogram")
            })?;
            chart::histogram(&text, column, a.bins, a.reference)
        }
    }
    .map_err(|e| e.in_file(&a.series))?;
    io::write_text(Some(&a.out), &svg)
}
