//! Panel ingestion and rolling-origin quantile forecasting.
//!
//! Forecasts are direct projections: at origin `τ` the chain is fitted on
//! pairs `(x_t, y_{t+h})` whose indices both lie in the window ending at `τ`,
//! and the forecast of `y_{τ+h}` is `x_τ' β̄(p)`. Columns are standardized
//! with statistics of the training rows only.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::{
    avg_log_score, dm_test, ks_grid_coverage, ks_uniformity, pit, pseudo_r2, sort_quantiles, DmResult,
    KsResult, QuantileForecastSet,
};
use crate::error::{Error, Result};
use crate::par;
use crate::quantile::QuantileGrid;
use crate::rng::RngHandle;
use crate::sampler::{fit_standardized, SamplerConfig};

const FORECAST_TAG: u64 = 0x666f_7265;
const PANEL_TAG: u64 = 0x7061_6e65;

/// Levels reported in the pseudo-R² columns.
pub const REPORT_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// How the target's levels become growth rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    /// `400 · Δ ln x_t`
    AnnualizedLog,
    /// `400 · (x_t / x_{t−1} − 1)`
    AnnualizedSimple,
    /// `100 · ((x_t / x_{t−1})⁴ − 1)`
    AnnualizedCompound,
}

/// Quarter-on-quarter growth of a positive level series (one shorter than
/// the input).
pub fn growth_transform(levels: &[f64], mode: GrowthMode) -> Result<Vec<f64>> {
    if let Some((i, v)) = levels.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("level at position {i} is {v}; growth needs positive levels")));
    }
    Ok(levels
        .windows(2)
        .map(|w| {
            let ratio = w[1] / w[0];
            match mode {
                GrowthMode::AnnualizedLog => 400.0 * ratio.ln(),
                GrowthMode::AnnualizedSimple => 400.0 * (ratio - 1.0),
                GrowthMode::AnnualizedCompound => 100.0 * (ratio.powi(4) - 1.0),
            }
        })
        .collect())
}

/// Stationarity transform by code: 1 none, 2 Δ, 3 Δ², 4 log, 5 Δlog,
/// 6 Δ²log, 7 Δ(x_t/x_{t−1} − 1). Undefined entries become NaN.
pub fn apply_transform_code(x: &[f64], code: u8) -> Result<Vec<f64>> {
    let log = |v: f64| if v > 0.0 { v.ln() } else { f64::NAN };
    let diff = |v: &[f64]| {
        let mut out = vec![f64::NAN; v.len()];
        for t in 1..v.len() {
            out[t] = v[t] - v[t - 1];
        }
        out
    };
    Ok(match code {
        1 => x.to_vec(),
        2 => diff(x),
        3 => diff(&diff(x)),
        4 => x.iter().map(|&v| log(v)).collect(),
        5 => diff(&x.iter().map(|&v| log(v)).collect::<Vec<_>>()),
        6 => diff(&diff(&x.iter().map(|&v| log(v)).collect::<Vec<_>>())),
        7 => {
            let mut pct = vec![f64::NAN; x.len()];
            for t in 1..x.len() {
                pct[t] = x[t] / x[t - 1] - 1.0;
            }
            diff(&pct)
        }
        other => return Err(Error::Ingestion(format!("unknown transform code {other}"))),
    })
}

fn lost_rows(code: u8) -> usize {
    match code {
        2 | 5 => 1,
        3 | 6 | 7 => 2,
        _ => 0,
    }
}

/// Quarterly panel: `target[t]` and `regressors[(t, ·)]` share `dates[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPanel {
    pub dates: Vec<NaiveDate>,
    pub target_name: String,
    pub target: Vec<f64>,
    pub regressor_names: Vec<String>,
    /// `T × N`
    pub regressors: DMatrix<f64>,
    /// Human-readable record of transforms and dropped columns.
    pub transform_log: Vec<String>,
}

impl MacroPanel {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// `[1, regressors]` row for period `t`.
    fn design_row(&self, t: usize) -> Vec<f64> {
        std::iter::once(1.0).chain(self.regressors.row(t).iter().copied()).collect()
    }
}

/// What to read from a panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub target: String,
    /// Convert target levels to growth with this rule; `None` keeps the
    /// column as it is.
    pub target_growth: Option<GrowthMode>,
    /// Rows dated before this are dropped.
    pub start: Option<NaiveDate>,
    /// Use the file's `transform` row when present.
    pub apply_transform_codes: bool,
}

impl PanelSchema {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            target_growth: None,
            start: None,
            apply_transform_codes: true,
        }
    }
}

/// Parse `YYYY-MM-DD`, `M/D/YYYY` or `YYYYQn` (first day of the quarter).
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%m/%d/%Y") {
        return Some(d);
    }
    let (y, q) = s.split_once(['Q', 'q'])?;
    let q: u32 = q.parse().ok().filter(|q| (1..=4).contains(q))?;
    NaiveDate::from_ymd_opt(y.parse().ok()?, 3 * q - 2, 1)
}

fn parse_value(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Some(f64::NAN);
    }
    s.parse().ok()
}

/// Read a delimited panel: header row of names (first column = dates),
/// optional `factors` row (skipped) and `transform` row (codes), then data.
pub fn load_panel(path: &Path, schema: &PanelSchema) -> Result<MacroPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Ingestion("empty panel file".into()))?
        .map_err(|e| Error::Ingestion(e.to_string()))?;
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let target_col = names
        .iter()
        .position(|n| *n == schema.target)
        .ok_or_else(|| Error::Ingestion(format!("target column '{}' not found", schema.target)))?;

    let mut codes: Option<Vec<u8>> = None;
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Ingestion(format!("line {line}: {e}")))?;
        let first = rec.get(0).unwrap_or("").trim();
        if first.is_empty() && rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if first.eq_ignore_ascii_case("factors") {
            continue;
        }
        if first.eq_ignore_ascii_case("transform") {
            let parsed = (0..names.len())
                .map(|j| {
                    let c = rec.get(j + 1).unwrap_or("").trim();
                    if c.is_empty() {
                        Ok(1)
                    } else {
                        c.parse::<f64>()
                            .ok()
                            .map(|v| v as u8)
                            .ok_or_else(|| Error::Ingestion(format!("line {line}: bad transform code '{c}'")))
                    }
                })
                .collect::<Result<Vec<u8>>>()?;
            codes = Some(parsed);
            continue;
        }
        let date = parse_date(first)
            .ok_or_else(|| Error::Ingestion(format!("line {line}: malformed date '{first}'")))?;
        dates.push(date);
        for (j, col) in columns.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            let v = parse_value(cell)
                .ok_or_else(|| Error::Ingestion(format!("line {line}, column '{}': bad number '{cell}'", names[j])))?;
            col.push(v);
        }
    }
    if dates.is_empty() {
        return Err(Error::Ingestion("panel has no data rows".into()));
    }

    let mut log_lines = Vec::new();
    let mut lost = 0;
    let mut target = columns[target_col].clone();
    if let Some(mode) = schema.target_growth {
        let pos = target.iter().map(|v| if *v > 0.0 { *v } else { f64::NAN }).collect::<Vec<_>>();
        let mut g = vec![f64::NAN];
        g.extend(pos.windows(2).map(|w| growth_transform(w, mode).map(|v| v[0]).unwrap_or(f64::NAN)));
        target = g;
        lost = 1;
        log_lines.push(format!("target '{}': growth {mode:?}", schema.target));
    }

    let mut kept_names = Vec::new();
    let mut kept_cols = Vec::new();
    for (j, name) in names.iter().enumerate() {
        if j == target_col {
            continue;
        }
        let code = match (&codes, schema.apply_transform_codes) {
            (Some(c), true) => c[j],
            _ => 1,
        };
        let col = apply_transform_code(&columns[j], code)
            .map_err(|e| Error::Ingestion(format!("column '{name}': {e}")))?;
        if code != 1 {
            log_lines.push(format!("'{name}': transform code {code}"));
        }
        lost = lost.max(lost_rows(code));
        kept_names.push(name.clone());
        kept_cols.push(col);
    }
    if codes.is_none() && schema.apply_transform_codes {
        log_lines.push("no transform row; regressors used as-is".into());
    }

    // Rows lost to differencing, then the start-date trim.
    let mut first = lost;
    if let Some(start) = schema.start {
        first = first.max(dates.iter().position(|d| *d >= start).unwrap_or(dates.len()));
    }
    if first >= dates.len() {
        return Err(Error::Ingestion("no rows left after the start trim".into()));
    }
    let dates = dates[first..].to_vec();
    let target = target[first..].to_vec();
    if let Some(t) = target.iter().position(|v| !v.is_finite()) {
        return Err(Error::Ingestion(format!(
            "target '{}' is missing at {}",
            schema.target, dates[t]
        )));
    }
    let mut names_out = Vec::new();
    let mut cols_out: Vec<Vec<f64>> = Vec::new();
    for (name, col) in kept_names.into_iter().zip(kept_cols) {
        let col = col[first..].to_vec();
        let missing = col.iter().filter(|v| !v.is_finite()).count();
        if missing > 0 {
            log::info!("dropping column '{name}': {missing} missing values after trim");
            log_lines.push(format!("dropped '{name}': {missing} missing values"));
        } else {
            names_out.push(name);
            cols_out.push(col);
        }
    }
    let t = dates.len();
    let regressors = DMatrix::from_fn(t, cols_out.len(), |i, j| cols_out[j][i]);
    Ok(MacroPanel {
        dates,
        target_name: schema.target.clone(),
        target,
        regressor_names: names_out,
        regressors,
        transform_log: log_lines,
    })
}

/// Write a panel in the loader's format (no transform row).
pub fn write_panel(path: &Path, panel: &MacroPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_string(), panel.target_name.clone()];
    header.extend(panel.regressor_names.iter().cloned());
    w.write_record(&header)?;
    for t in 0..panel.len() {
        let mut row = vec![panel.dates[t].format("%Y-%m-%d").to_string(), format!("{}", panel.target[t])];
        row.extend(panel.regressors.row(t).iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Known data-generating process behind [`synthetic_panel`]:
/// `y_{t+h} = intercept + x_t'slopes + scale·ε_{t+h}`, `ε ~ N(0,1)`, with
/// regressors following independent AR(1) processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub periods: usize,
    pub horizon: usize,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub scale: f64,
    pub persistence: f64,
}

impl SyntheticSpec {
    pub fn new(periods: usize) -> Self {
        Self {
            periods,
            horizon: 1,
            intercept: 0.0,
            slopes: vec![1.0, -0.5, 0.0, 0.0],
            scale: 1.0,
            persistence: 0.5,
        }
    }

    /// True conditional `p`-quantile of `y_{t+h}` given `x_t`.
    pub fn true_quantile(&self, x: &[f64], p: f64) -> f64 {
        let loc: f64 = self.intercept + x.iter().zip(&self.slopes).map(|(a, b)| a * b).sum::<f64>();
        loc + self.scale * crate::quantile::std_normal_inv_cdf(p)
    }
}

/// Simulate a quarterly panel (starting 1970Q1) from a [`SyntheticSpec`].
pub fn synthetic_panel(seed: u64, spec: &SyntheticSpec) -> Result<MacroPanel> {
    let (t, n, h) = (spec.periods, spec.slopes.len(), spec.horizon);
    if t <= h || n == 0 {
        return Err(Error::Input("synthetic panel needs more periods than the horizon and a regressor".into()));
    }
    let mut rng = RngHandle::for_job(seed, &[PANEL_TAG]);
    let innov = (1.0 - spec.persistence * spec.persistence).sqrt();
    let mut x = DMatrix::zeros(t, n);
    for j in 0..n {
        let mut prev = rng.standard_normal();
        for i in 0..t {
            if i > 0 {
                prev = spec.persistence * prev + innov * rng.standard_normal();
            }
            x[(i, j)] = prev;
        }
    }
    let mut y = vec![0.0; t];
    for (i, yi) in y.iter_mut().enumerate() {
        let e = rng.standard_normal();
        *yi = if i >= h {
            let row: Vec<f64> = x.row(i - h).iter().copied().collect();
            spec.true_quantile(&row, 0.5) + spec.scale * e
        } else {
            spec.intercept + spec.scale * e
        };
    }
    let start = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    let dates = (0..t)
        .map(|i| start.checked_add_months(chrono::Months::new(3 * i as u32)).expect("date in range"))
        .collect();
    Ok(MacroPanel {
        dates,
        target_name: "y".into(),
        target: y,
        regressor_names: (1..=n).map(|j| format!("x{j}")).collect(),
        regressors: x,
        transform_log: vec!["synthetic".into()],
    })
}

/// Forecast origins for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingPlan {
    pub window: usize,
    pub horizon: usize,
    /// Grow the window from its first origin instead of rolling it.
    pub expanding: bool,
    /// Origin indices `τ`; the forecast targets period `τ + h`.
    pub origins: Vec<usize>,
}

impl RollingPlan {
    /// Origins `τ = window−1, …, T−1−h`, i.e. `T − window − h + 1` of them.
    pub fn new(t_available: usize, window: usize, horizon: usize, expanding: bool) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Input("horizon must be at least 1".into()));
        }
        if window <= horizon + 1 {
            return Err(Error::Input(format!(
                "window {window} leaves no training pairs at horizon {horizon}"
            )));
        }
        if t_available < window + horizon {
            return Err(Error::Input(format!(
                "{t_available} periods cannot hold a window of {window} plus horizon {horizon}"
            )));
        }
        Ok(Self {
            window,
            horizon,
            expanding,
            origins: (window - 1..t_available - horizon).collect(),
        })
    }

    /// Indices `t` of the training pairs `(x_t, y_{t+h})` at origin `τ`.
    pub fn training_rows(&self, origin: usize) -> std::ops::Range<usize> {
        let first = if self.expanding { 0 } else { origin + 1 - self.window };
        first..origin + 1 - self.horizon
    }
}

#[derive(Debug, Clone)]
pub struct RollingOutput {
    pub set: QuantileForecastSet,
    pub realizations: Vec<f64>,
    /// Origins whose forecasts were not produced, with the reason.
    pub failed: Vec<(String, String)>,
}

/// Fit every grid quantile at every origin and collect the forecasts.
pub fn rolling_forecast(
    panel: &MacroPanel,
    plan: &RollingPlan,
    grid: &QuantileGrid,
    cfg: &SamplerConfig,
    seed: u64,
    threads: Option<usize>,
) -> Result<RollingOutput> {
    cfg.validate()?;
    if plan.origins.last().is_some_and(|&o| o + plan.horizon >= panel.len()) {
        return Err(Error::Input("plan extends beyond the panel".into()));
    }
    let levels = grid.levels();
    let jobs: Vec<(usize, usize)> = plan
        .origins
        .iter()
        .flat_map(|&o| (0..levels.len()).map(move |q| (o, q)))
        .collect();
    let k = panel.regressors.ncols() + 1;
    let fits = par::with_threads(threads, || {
        par::par_map(&jobs, |&(origin, q)| {
            let rows = plan.training_rows(origin);
            let x = DMatrix::from_fn(rows.len(), k, |i, j| {
                if j == 0 {
                    1.0
                } else {
                    panel.regressors[(rows.start + i, j - 1)]
                }
            });
            let y = DVector::from_fn(rows.len(), |i, _| panel.target[rows.start + i + plan.horizon]);
            let mut rng = RngHandle::for_job(seed, &[FORECAST_TAG, plan.horizon as u64, origin as u64, q as u64]);
            fit_standardized(&mut rng, &x, &y, levels[q], cfg).map(|d| {
                let beta = d.mean_beta();
                panel.design_row(origin).iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>()
            })
        })
    });

    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut realizations = Vec::new();
    let mut failed = Vec::new();
    let mut fits = fits.into_iter();
    for &origin in &plan.origins {
        let label = panel.dates[origin + plan.horizon].format("%Y-%m-%d").to_string();
        // Drain the whole chunk before short-circuiting on an error.
        let chunk: Vec<Result<f64>> = fits.by_ref().take(levels.len()).collect();
        let row: Result<Vec<f64>> = chunk.into_iter().collect();
        match row {
            Ok(r) => {
                labels.push(label);
                values.push(r);
                realizations.push(panel.target[origin + plan.horizon]);
            }
            Err(e) => {
                log::warn!("origin {label}: {e}");
                failed.push((label, e.to_string()));
            }
        }
    }
    Ok(RollingOutput {
        set: QuantileForecastSet::new(grid.clone(), plan.horizon, labels, values)?,
        realizations,
        failed,
    })
}

/// Evaluation of one forecast run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub horizon: usize,
    pub n: usize,
    /// KS of the PITs over all origins.
    pub ks_pit: KsResult,
    /// KS on the quantile grid (coverage by level).
    pub ks_grid: KsResult,
    pub pseudo_r2: Vec<(f64, f64)>,
    pub log_score: f64,
    pub median_rmsfe: f64,
    pub crossings: usize,
    /// Against a benchmark's median forecasts; positive means this run is worse.
    pub dm: Option<DmResult>,
}

fn median_errors(set: &QuantileForecastSet, realizations: &[f64]) -> Result<Vec<f64>> {
    let med = set
        .column(0.5)
        .ok_or_else(|| Error::Input("grid has no 0.5 level".into()))?;
    Ok(med.iter().zip(realizations).map(|(f, y)| (f - y) * (f - y)).collect())
}

/// KS, pseudo-R² at [`REPORT_LEVELS`], log score, median RMSFE and an
/// optional Diebold-Mariano comparison.
pub fn evaluate_run(
    set: &QuantileForecastSet,
    realizations: &[f64],
    benchmark: Option<&QuantileForecastSet>,
) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::Input("no forecasts to evaluate".into()));
    }
    if set.len() != realizations.len() {
        return Err(Error::Dimension(format!(
            "{} forecast rows but {} realizations",
            set.len(),
            realizations.len()
        )));
    }
    let densities = set.densities()?;
    let pits: Vec<f64> = densities.iter().zip(realizations).map(|(d, &y)| pit(d, y)).collect();
    let crossings = set.values.iter().map(|r| sort_quantiles(r).1).sum();
    let mut r2 = Vec::new();
    for &p in &REPORT_LEVELS {
        if let Some(j) = set.grid.position(p) {
            // Rearranged forecasts, as used for the densities.
            let v: Vec<f64> = set.values.iter().map(|r| sort_quantiles(r).0[j]).collect();
            r2.push((p, pseudo_r2(&v, realizations, p)?));
        }
    }
    let errs = median_errors(set, realizations)?;
    let median_rmsfe = (errs.iter().sum::<f64>() / errs.len() as f64).sqrt();
    let dm = match benchmark {
        Some(b) => {
            if b.len() != set.len() {
                return Err(Error::Dimension(format!(
                    "benchmark has {} rows, run has {}",
                    b.len(),
                    set.len()
                )));
            }
            Some(dm_test(&errs, &median_errors(b, realizations)?, set.horizon.max(1))?)
        }
        None => None,
    };
    Ok(EvalReport {
        horizon: set.horizon,
        n: set.len(),
        ks_pit: ks_uniformity(&pits)?,
        ks_grid: ks_grid_coverage(set, realizations)?,
        pseudo_r2: r2,
        log_score: avg_log_score(&densities, realizations)?,
        median_rmsfe,
        crossings,
        dm,
    })
}

/// Forecast CSV: `label, horizon, realization, q<p>…`.
pub fn write_forecasts_csv(path: &Path, set: &QuantileForecastSet, realizations: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string(), "horizon".into(), "realization".into()];
    header.extend(set.grid.levels().iter().map(|p| format!("q{p}")));
    w.write_record(&header)?;
    for (i, row) in set.values.iter().enumerate() {
        let mut rec = vec![set.labels[i].clone(), set.horizon.to_string(), format!("{}", realizations[i])];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_forecasts_csv`].
pub fn read_forecasts_csv(path: &Path) -> Result<(QuantileForecastSet, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 4 || &header[0] != "label" || &header[2] != "realization" {
        return Err(Error::Ingestion(format!("{}: not a forecast file", path.display())));
    }
    let levels = header
        .iter()
        .skip(3)
        .map(|h| {
            h.strip_prefix('q')
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Ingestion(format!("bad quantile column '{h}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let grid = QuantileGrid::new(levels)?;
    let (mut labels, mut values, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    let mut horizon = 1;
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Ingestion(format!(
                "line {line}: {} fields, expected {}",
                rec.len(),
                header.len()
            )));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Ingestion(format!("line {line}: bad number '{s}'")))
        };
        labels.push(rec[0].to_string());
        horizon = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Ingestion(format!("line {line}: bad horizon '{}'", &rec[1])))?;
        ys.push(num(&rec[2])?);
        values.push(rec.iter().skip(3).map(num).collect::<Result<Vec<f64>>>()?);
    }
    if values.is_empty() {
        return Err(Error::Ingestion(format!("{}: no forecast rows", path.display())));
    }
    Ok((QuantileForecastSet::new(grid, horizon, labels, values)?, ys))
}

/// One-row report CSV in the layout `h, n, KS, KS crit 10%, KS grid,
/// R²(p)…, log score, median RMSFE, DM, DM stars`.
pub fn write_report_csv(path: &Path, reports: &[(String, EvalReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["run", "h", "n", "ks_pit", "ks_pit_crit10", "ks_grid", "ks_grid_crit10"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(REPORT_LEVELS.iter().map(|p| format!("r2_{p}")));
    header.extend(["log_score", "median_rmsfe", "crossings", "dm_stat", "dm_sig"].map(String::from));
    w.write_record(&header)?;
    for (name, r) in reports {
        let mut row = vec![
            name.clone(),
            r.horizon.to_string(),
            r.n.to_string(),
            format!("{:.4}", r.ks_pit.statistic),
            format!("{:.4}", r.ks_pit.crit_10),
            format!("{:.4}", r.ks_grid.statistic),
            format!("{:.4}", r.ks_grid.crit_10),
        ];
        for p in REPORT_LEVELS {
            let v = r.pseudo_r2.iter().find(|(q, _)| (q - p).abs() < 1e-9).map(|x| x.1);
            row.push(v.map(|v| format!("{v:.4}")).unwrap_or_default());
        }
        row.push(format!("{:.4}", r.log_score));
        row.push(format!("{:.4}", r.median_rmsfe));
        row.push(r.crossings.to_string());
        match &r.dm {
            Some(d) => {
                row.push(format!("{:.4}", d.statistic));
                row.push(d.stars().to_string());
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Year and quarter of a date, e.g. `(2008, 4)`.
pub fn year_quarter(d: NaiveDate) -> (i32, u32) {
    (d.year(), (d.month() - 1) / 3 + 1)
}
