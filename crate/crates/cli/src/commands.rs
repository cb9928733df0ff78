use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use hsbqr::density::write_density_grids;
use hsbqr::gar::{self, PanelSchema, RollingPlan, SyntheticSpec};
use hsbqr::manifest::RunManifest;
use hsbqr::mc::{self, DgpConfig, Estimator};
use hsbqr::sampler::{fit_standardized, run_chain, Prior};
use hsbqr::{QuantileGrid, QuantileSpec, RngHandle};

use crate::{EvalArgs, FitArgs, ForecastArgs, McArgs};

const FIT_TAG: u64 = 0x0066_6974;

pub enum CliError {
    /// Bad arguments or unreadable inputs; exit code 2.
    Usage(String),
    /// The run itself failed; exit code 1.
    Run(hsbqr::Error),
}

impl From<hsbqr::Error> for CliError {
    fn from(e: hsbqr::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn prior_name(p: Prior) -> &'static str {
    match p {
        Prior::Horseshoe => "horseshoe",
        Prior::Lasso => "lasso",
    }
}

fn check_quantiles(ps: &[f64]) -> CliResult {
    for &p in ps {
        QuantileSpec::new(p).map_err(usage)?;
    }
    Ok(())
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file '{}' not found", path.display())))
    }
}

fn prepare_out(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create '{}': {e}", dir.display())))
}

fn config_echo(args: &impl Serialize) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(args).map_err(|e| CliError::Run(e.into()))
}

fn finish(mut manifest: RunManifest, out: &Path, started: Instant, record: bool) -> CliResult {
    if record {
        manifest.record_timing("total", started.elapsed().as_secs_f64());
    }
    manifest.write(&out.join("manifest.json"))?;
    log::info!("wrote {}", out.join("manifest.json").display());
    Ok(())
}

pub fn mc(a: McArgs) -> CliResult {
    let started = Instant::now();
    check_quantiles(&a.quantiles)?;
    let mut cfg = DgpConfig::new(a.design, a.error, a.train as usize);
    cfg.holdout = a.holdout as usize;
    cfg.t_total = cfg.n_train() + cfg.holdout;
    cfg.n_replications = a.reps as usize;
    cfg.seed = a.chain.seed;
    cfg.pattern_width = a.width as usize;
    cfg.validate().map_err(usage)?;
    let estimators: Vec<Estimator> = a
        .prior
        .iter()
        .map(|&p| Estimator {
            name: prior_name(p).to_string(),
            sampler: a.chain.sampler(p),
        })
        .collect();
    for e in &estimators {
        e.sampler.validate().map_err(usage)?;
    }
    prepare_out(&a.out)?;

    let study = mc::run_mc_study(&cfg, &estimators, &a.quantiles, a.chain.threads)?;
    for f in &study.failures {
        log::warn!(
            "{} replication {} at p={}: {}",
            f.estimator,
            f.replication,
            f.quantile,
            f.message
        );
    }
    if study.scores.iter().all(|s| s.n_ok == 0) {
        return Err(CliError::Run(hsbqr::Error::Numerical(
            "every chain failed; see the log for details".into(),
        )));
    }
    mc::write_tables_csv(&a.out.join("tables.csv"), &study)?;
    let failures = serde_json::to_string_pretty(&study.failures).map_err(|e| CliError::Run(e.into()))?;
    std::fs::write(a.out.join("failures.json"), failures + "\n").map_err(|e| CliError::Run(e.into()))?;

    let mut manifest = RunManifest::new("mc", a.chain.seed, config_echo(&a)?);
    manifest.add_output("tables.csv");
    manifest.add_output("failures.json");
    finish(manifest, &a.out, started, a.chain.record_timings)
}

/// Column names, regressor matrix and target vector.
type RegressionData = (Vec<String>, DMatrix<f64>, DVector<f64>);

/// Target vector and regressor matrix from a headed numeric CSV.
fn read_regression_csv(path: &Path, target: &str, intercept: bool) -> Result<RegressionData, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let t_col = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| usage(format!("column '{target}' not in {}", path.display())))?;
    let mut names: Vec<String> = Vec::new();
    if intercept {
        names.push("intercept".into());
    }
    names.extend(header.iter().enumerate().filter(|(j, _)| *j != t_col).map(|(_, h)| h.clone()));
    let mut y = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Run(hsbqr::Error::Ingestion(format!("line {line}: {e}"))))?;
        let parse = |j: usize| -> Result<f64, CliError> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Run(hsbqr::Error::Ingestion(format!(
                    "line {line}, column '{}': '{s}' is not a finite number",
                    header[j]
                )))
            })
        };
        y.push(parse(t_col)?);
        if intercept {
            rows.push(1.0);
        }
        for j in (0..header.len()).filter(|&j| j != t_col) {
            rows.push(parse(j)?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Run(hsbqr::Error::Ingestion(format!("{}: no data rows", path.display()))));
    }
    let x = DMatrix::from_row_slice(y.len(), names.len(), &rows);
    Ok((names, x, DVector::from_vec(y)))
}

pub fn fit(a: FitArgs) -> CliResult {
    let started = Instant::now();
    check_quantiles(&a.quantiles)?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    let cfg = a.chain.sampler(a.prior);
    cfg.validate().map_err(usage)?;
    require_file(&a.input)?;
    let (names, x, y) = read_regression_csv(&a.input, &a.target, !a.no_intercept)?;
    prepare_out(&a.out)?;

    let jobs: Vec<usize> = (0..a.quantiles.len()).collect();
    let fits = hsbqr::par::with_threads(a.chain.threads, || {
        hsbqr::par::par_map(&jobs, |&q| {
            let mut rng = RngHandle::for_job(a.chain.seed, &[FIT_TAG, q as u64]);
            let p = a.quantiles[q];
            let draws = if a.no_standardize {
                run_chain(&mut rng, &x, &y, p, &cfg)
            } else {
                fit_standardized(&mut rng, &x, &y, p, &cfg)
            }?;
            draws.summary(a.level)
        })
    });
    let summaries = fits.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::Writer::from_path(a.out.join("coefficients.csv")).map_err(|e| CliError::Run(e.into()))?;
    let csv_err = |e: csv::Error| CliError::Run(e.into());
    w.write_record(["p", "name", "mean", "lower", "upper"]).map_err(csv_err)?;
    for s in &summaries {
        for (j, name) in names.iter().enumerate() {
            w.write_record([
                s.p.to_string(),
                name.clone(),
                format!("{:.8}", s.mean[j]),
                format!("{:.8}", s.lower[j]),
                format!("{:.8}", s.upper[j]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Run(e.into()))?;

    #[derive(Serialize)]
    struct FitSummary<'a> {
        names: &'a [String],
        fits: &'a [hsbqr::sampler::PosteriorSummary],
    }
    let text = serde_json::to_string_pretty(&FitSummary {
        names: &names,
        fits: &summaries,
    })
    .map_err(|e| CliError::Run(e.into()))?;
    std::fs::write(a.out.join("fit_summary.json"), text + "\n").map_err(|e| CliError::Run(e.into()))?;

    let mut manifest = RunManifest::new("fit", a.chain.seed, config_echo(&a)?);
    manifest.add_output("coefficients.csv");
    manifest.add_output("fit_summary.json");
    finish(manifest, &a.out, started, a.chain.record_timings)
}

pub fn forecast(a: ForecastArgs) -> CliResult {
    let started = Instant::now();
    let cfg = a.chain.sampler(a.prior);
    cfg.validate().map_err(usage)?;
    let grid = QuantileGrid::equidistant(a.grid).map_err(usage)?;
    if grid.position(0.5).is_none() {
        return Err(usage(format!("--grid {} has no median level; use an odd count", a.grid)));
    }
    if a.horizons.is_empty() || a.horizons.contains(&0) {
        return Err(usage("--h needs horizons of at least 1"));
    }
    if a.density_points < 2 {
        return Err(usage("--density-points must be at least 2"));
    }

    let mut manifest = RunManifest::new("forecast", a.chain.seed, config_echo(&a)?);
    let mut panels = Vec::new();
    match (&a.input, a.synthetic) {
        (Some(path), _) => {
            require_file(path)?;
            let mut schema = PanelSchema::new(a.target.clone().unwrap_or_default());
            schema.target_growth = a.growth;
            schema.apply_transform_codes = !a.no_transform_codes;
            schema.start = match &a.start {
                Some(s) => Some(gar::parse_date(s).ok_or_else(|| usage(format!("cannot parse --start '{s}'")))?),
                None => None,
            };
            let panel = gar::load_panel(path, &schema)?;
            for note in &panel.transform_log {
                log::info!("{note}");
            }
            for &h in &a.horizons {
                panels.push((h, panel.clone()));
            }
        }
        (None, Some(periods)) => {
            for &h in &a.horizons {
                let mut spec = SyntheticSpec::new(periods);
                spec.horizon = h;
                let panel = gar::synthetic_panel(a.chain.seed, &spec)?;
                let name = format!("panel_h{h}.csv");
                gar::write_panel(&a.out_dir()?.join(&name), &panel)?;
                manifest.add_output(name);
                panels.push((h, panel));
            }
        }
        (None, None) => return Err(usage("either --input or --synthetic is required")),
    }
    prepare_out(&a.out)?;

    let mut reports = Vec::new();
    for (h, panel) in &panels {
        let plan = RollingPlan::new(panel.len(), a.window, *h, a.expanding).map_err(usage)?;
        log::info!("h={h}: {} origins", plan.origins.len());
        let run = gar::rolling_forecast(panel, &plan, &grid, &cfg, a.chain.seed, a.chain.threads)?;
        for (label, msg) in &run.failed {
            log::warn!("h={h} {label}: {msg}");
        }
        if run.set.is_empty() {
            return Err(CliError::Run(hsbqr::Error::Numerical(format!(
                "no origin produced a forecast at h={h}"
            ))));
        }
        let name = format!("forecasts_h{h}.csv");
        gar::write_forecasts_csv(&a.out.join(&name), &run.set, &run.realizations)?;
        manifest.add_output(name);
        let densities = run.set.densities()?;
        let name = format!("densities_h{h}.csv");
        write_density_grids(&a.out.join(&name), &run.set.labels, &densities, a.density_points)?;
        manifest.add_output(name);
        reports.push((format!("h{h}"), gar::evaluate_run(&run.set, &run.realizations, None)?));
    }
    gar::write_report_csv(&a.out.join("report.csv"), &reports)?;
    manifest.add_output("report.csv");
    finish(manifest, &a.out, started, a.chain.record_timings)
}

impl ForecastArgs {
    fn out_dir(&self) -> Result<&Path, CliError> {
        prepare_out(&self.out)?;
        Ok(&self.out)
    }
}

pub fn eval(a: EvalArgs) -> CliResult {
    let started = Instant::now();
    require_file(&a.forecasts)?;
    if let Some(b) = &a.benchmark {
        require_file(b)?;
    }
    if a.density_points < 2 {
        return Err(usage("--density-points must be at least 2"));
    }
    let (set, ys) = gar::read_forecasts_csv(&a.forecasts)?;
    let bench = match &a.benchmark {
        Some(b) => {
            let (bset, bys) = gar::read_forecasts_csv(b)?;
            if let Some(i) = (0..set.len().min(bset.len())).find(|&i| set.labels[i] != bset.labels[i] || ys[i] != bys[i]) {
                return Err(CliError::Run(hsbqr::Error::Dimension(format!(
                    "row {}: forecast '{}' does not line up with benchmark '{}'",
                    i + 1,
                    set.labels[i],
                    bset.labels[i]
                ))));
            }
            Some(bset)
        }
        None => None,
    };
    prepare_out(&a.out)?;
    let report = gar::evaluate_run(&set, &ys, bench.as_ref())?;
    gar::write_report_csv(&a.out.join("report.csv"), &[(format!("h{}", set.horizon), report)])?;
    write_density_grids(&a.out.join("densities.csv"), &set.labels, &set.densities()?, a.density_points)?;

    let mut manifest = RunManifest::new("eval", 0, config_echo(&a)?);
    manifest.add_output("report.csv");
    manifest.add_output("densities.csv");
    finish(manifest, &a.out, started, false)
}
