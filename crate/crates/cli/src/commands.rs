use std::collections::BTreeSet;
use std::fs::File;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use traderank::analysis::{
    correlator, fit_power_law, fit_power_law_sorted, spindle_histogram, velocity_aggregate,
    velocity_sq, write_summary_csv, yearly_summary, RankTrajectories, SpindlePoint,
};
use traderank::google_matrix::Direction;
use traderank::rank::{rank_snapshot, PowerIteration, RankSnapshot};
use traderank::rmwtn::{ensemble_run, write_ensemble_csv, RmwtnConfig};
use traderank::spectrum::{full_spectrum, verify_alpha_scaling};
use traderank::trade_graph::{mirror_fill, read_records, TradeFlowRecord};
use traderank::{GoogleMatrix, MoneyMatrix};

use crate::output::OutputDir;
use crate::{
    Common, CorrelatorArgs, Format, InputError, RankArgs, RmwtnArgs, SpectrumArgs, SpindleArgs,
    SummaryArgs, VelocityArgs,
};

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

struct Dataset {
    records: Vec<TradeFlowRecord>,
    imports: Vec<TradeFlowRecord>,
}

impl Common {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(input_err(format!(
                "--alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(input_err(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    fn power_iteration(&self) -> PowerIteration {
        PowerIteration {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn load(&self) -> Result<Dataset> {
        self.validate()?;
        if self.input.is_empty() {
            return Err(input_err("--input is required"));
        }
        let read_all = |paths: &[std::path::PathBuf]| -> Result<Vec<TradeFlowRecord>> {
            let mut out = Vec::new();
            for path in paths {
                let file =
                    File::open(path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
                let records = read_records(file)
                    .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
                out.extend(records);
            }
            Ok(out)
        };
        Ok(Dataset {
            records: read_all(&self.input)?,
            imports: read_all(&self.imports)?,
        })
    }
}

impl Dataset {
    /// Years with flows for the commodity, restricted to the requested range.
    fn years(&self, common: &Common) -> Vec<i32> {
        let years: BTreeSet<i32> = self
            .records
            .iter()
            .filter(|r| r.commodity == common.commodity)
            .map(|r| r.year)
            .filter(|y| common.year.is_none_or(|r| (r.first..=r.last).contains(y)))
            .collect();
        years.into_iter().collect()
    }

    fn single_year(&self, common: &Common) -> Result<i32> {
        match self.years(common).as_slice() {
            [y] => Ok(*y),
            [] => Err(input_err(format!(
                "no flows for commodity {:?} in the requested years",
                common.commodity
            ))),
            many => Err(input_err(format!(
                "data covers {} years; pick one with --year",
                many.len()
            ))),
        }
    }

    fn snapshot(&self, year: i32, commodity: &str) -> Result<MoneyMatrix> {
        let m = MoneyMatrix::from_records(&self.records, year, commodity)
            .map_err(|e| input_err(e.to_string()))?;
        Ok(if self.imports.is_empty() {
            m
        } else {
            mirror_fill(&m, &self.imports)
        })
    }

    fn snapshots(&self, common: &Common, at_least: usize) -> Result<Vec<MoneyMatrix>> {
        let years = self.years(common);
        if years.len() < at_least {
            return Err(input_err(format!(
                "need at least {at_least} yearly snapshots, found {}",
                years.len()
            )));
        }
        years
            .par_iter()
            .map(|&y| self.snapshot(y, &common.commodity))
            .collect()
    }
}

/// Writes the `<command>.meta.json` sidecar.
fn finish<C: Serialize>(
    out: &mut OutputDir,
    command: &str,
    config: &C,
    common: &Common,
    results: Value,
    started: Instant,
) -> Result<()> {
    let mut meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "outputs": out.written(),
        "results": results,
    });
    if common.timings {
        meta["elapsed_ms"] = json!(started.elapsed().as_secs_f64() * 1e3);
    }
    out.write_json(&format!("{command}.meta.json"), &meta)
}

fn rank_all(snapshots: &[MoneyMatrix], common: &Common) -> Result<Vec<RankSnapshot>> {
    let opts = common.power_iteration();
    snapshots
        .par_iter()
        .map(|m| {
            rank_snapshot(m, common.alpha, opts)
                .with_context(|| format!("ranking {} {}", m.year(), m.commodity()))
        })
        .collect()
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let m = data.snapshot(data.single_year(common)?, &common.commodity)?;
    let snap = rank_snapshot(&m, common.alpha, common.power_iteration())
        .with_context(|| format!("ranking {} {}", m.year(), m.commodity()))?;

    let mut out = OutputDir::create(&common.out)?;
    let ext = common.ext();
    let top = snap.table.top(args.top);
    for (name, table) in [
        ("rank_table", &snap.table),
        (&format!("rank_top{}", args.top) as &str, &top),
    ] {
        match common.format {
            Format::Csv => out.write(&format!("{name}.{ext}"), |w| Ok(table.write_csv(w)?))?,
            Format::Json => out.write_json(&format!("{name}.{ext}"), table)?,
        }
    }

    let mut fits = Vec::new();
    if let Some(span) = args.fit_range {
        for (label, v) in [
            ("pagerank", &snap.pagerank),
            ("cheirank", &snap.cheirank),
            ("import", &snap.import),
            ("export", &snap.export),
        ] {
            let fit = fit_power_law(v, span.0, span.1)
                .map_err(|e| input_err(format!("{label} fit: {e}")))?;
            fits.push((label, fit));
        }
        match common.format {
            Format::Csv => out.write(&format!("rank_fits.{ext}"), |w| {
                writeln!(w, "vector,beta,stderr,k_min,k_max,r_squared")?;
                for (label, f) in &fits {
                    writeln!(
                        w,
                        "{label},{},{},{},{},{}",
                        f.beta, f.stderr, f.k_min, f.k_max, f.r_squared
                    )?;
                }
                Ok(())
            })?,
            Format::Json => {
                let v: Vec<Value> = fits
                    .iter()
                    .map(|(label, f)| json!({"vector": label, "fit": f}))
                    .collect();
                out.write_json(&format!("rank_fits.{ext}"), &v)?
            }
        }
    }

    let results = json!({
        "year": m.year(),
        "commodity": m.commodity(),
        "n": m.n(),
        "pagerank_iterations": snap.pagerank.iterations(),
        "pagerank_residual": snap.pagerank.residual(),
        "cheirank_iterations": snap.cheirank.iterations(),
        "cheirank_residual": snap.cheirank.residual(),
        "kappa": correlator(&snap.pagerank, &snap.cheirank)?,
        "kappa_tilde": correlator(&snap.import, &snap.export)?,
    });
    finish(&mut out, "rank", args, common, results, started)
}

pub fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let m = data.snapshot(data.single_year(common)?, &common.commodity)?;
    let g = GoogleMatrix::from_money(&m, common.alpha, Direction::Direct)?;
    let sp = full_spectrum(&g)?.with_tags(m.year(), m.commodity());
    let undamped = full_spectrum(&g.with_alpha(1.0)?)?;
    let quasi: Vec<[f64; 2]> = undamped
        .quasi_degenerate(args.gap)
        .iter()
        .map(|z| [z.re, z.im])
        .collect();
    let scaling = if common.alpha < 1.0 {
        match verify_alpha_scaling(g.stochastic(), common.alpha) {
            Ok(r) => json!({"passed": true, "max_mismatch": r.max_mismatch}),
            Err(traderank::SpectrumError::ScalingMismatch { max_mismatch, .. }) => {
                log::warn!("damping scaling mismatch {max_mismatch:e}");
                json!({"passed": false, "max_mismatch": max_mismatch})
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        Value::Null
    };

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => out.write("spectrum.csv", |w| Ok(sp.write_csv(w)?))?,
        Format::Json => out.write("spectrum.json", |w| {
            writeln!(w, "{}", sp.to_json())?;
            Ok(())
        })?,
    }
    let sum = sp.sum();
    let results = json!({
        "year": m.year(),
        "commodity": m.commodity(),
        "n": m.n(),
        "alpha": common.alpha,
        "leading": sp.leading().map(|z| [z.re, z.im]),
        "trace": g.trace(),
        "eigenvalue_sum": [sum.re, sum.im],
        "max_abs_imag": sp.max_abs_imag(),
        "quasi_degenerate_gap": args.gap,
        "quasi_degenerate_alpha1": quasi,
        "alpha_scaling": scaling,
    });
    finish(&mut out, "spectrum", args, common, results, started)
}

pub fn spindle(args: &SpindleArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let snapshots = data.snapshots(common, 1)?;
    let ranked = rank_all(&snapshots, common)?;
    let points: Vec<SpindlePoint> = ranked
        .iter()
        .flat_map(|s| {
            let n = s.pagerank.len();
            s.pagerank
                .ranks()
                .iter()
                .zip(s.cheirank.ranks())
                .map(move |(&k, &k_star)| SpindlePoint { k, k_star, n })
        })
        .collect();
    let hist = spindle_histogram(&points, args.binning.to_core())?;

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => out.write("spindle.csv", |w| Ok(hist.write_csv(w)?))?,
        Format::Json => out.write_json("spindle.json", &hist)?,
    }
    let results = json!({
        "years": snapshots.iter().map(MoneyMatrix::year).collect::<Vec<_>>(),
        "points": hist.total,
        "x_asymmetry": hist.x_asymmetry(),
        "columns": hist.columns,
        "rows": hist.rows,
    });
    finish(&mut out, "spindle", args, common, results, started)
}

pub fn velocity(args: &VelocityArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let snapshots = data.snapshots(common, 2)?;
    let ranked = rank_all(&snapshots, common)?;
    let tables: Vec<_> = ranked.into_iter().map(|s| s.table).collect();
    let series = velocity_sq(&RankTrajectories::from_tables(&tables));
    let bands: Vec<(usize, usize)> = args.bands.iter().map(|s| (s.0, s.1)).collect();
    let agg =
        velocity_aggregate(&series, &bands, args.window).map_err(|e| input_err(e.to_string()))?;

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => {
            out.write("velocity_samples.csv", |w| Ok(series.write_csv(w)?))?;
            out.write("velocity_curve.csv", |w| Ok(agg.write_curve_csv(w)?))?;
            out.write("velocity_bands.csv", |w| Ok(agg.write_bands_csv(w)?))?;
        }
        Format::Json => {
            out.write_json(
                "velocity.json",
                &json!({"samples": series, "aggregate": agg}),
            )?;
        }
    }
    let results = json!({
        "years": snapshots.iter().map(MoneyMatrix::year).collect::<Vec<_>>(),
        "samples": series.samples.len(),
    });
    finish(&mut out, "velocity", args, common, results, started)
}

#[derive(Serialize)]
struct CorrelatorRow {
    year: i32,
    n: usize,
    kappa: f64,
    kappa_tilde: f64,
}

pub fn correlators(args: &CorrelatorArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let snapshots = data.snapshots(common, 1)?;
    let ranked = rank_all(&snapshots, common)?;
    let rows = snapshots
        .iter()
        .zip(&ranked)
        .map(|(m, s)| {
            Ok(CorrelatorRow {
                year: m.year(),
                n: m.n(),
                kappa: correlator(&s.pagerank, &s.cheirank)?,
                kappa_tilde: correlator(&s.import, &s.export)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => out.write("correlator.csv", |w| {
            writeln!(w, "year,n,kappa,kappa_tilde")?;
            for r in &rows {
                writeln!(w, "{},{},{},{}", r.year, r.n, r.kappa, r.kappa_tilde)?;
            }
            Ok(())
        })?,
        Format::Json => out.write_json("correlator.json", &rows)?,
    }
    finish(
        &mut out,
        "correlator",
        args,
        common,
        json!({"years": rows.len()}),
        started,
    )
}

pub fn summary(args: &SummaryArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    let data = common.load()?;
    let snapshots = data.snapshots(common, 2)?;
    let rows = yearly_summary(&snapshots);

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => out.write("summary.csv", |w| Ok(write_summary_csv(&rows, w)?))?,
        Format::Json => out.write_json("summary.json", &rows)?,
    }
    finish(
        &mut out,
        "summary",
        args,
        common,
        json!({"years": rows.len()}),
        started,
    )
}

pub fn rmwtn(args: &RmwtnArgs) -> Result<()> {
    let started = Instant::now();
    let common = &args.common;
    common.validate()?;
    if args.n < 2 {
        return Err(input_err("--n must be at least 2"));
    }
    if args.realizations == 0 {
        return Err(input_err("--realizations must be at least 1"));
    }
    let cfg = RmwtnConfig::new(args.n, args.seed, args.variant.into());
    let runs = ensemble_run(
        &cfg,
        args.realizations,
        common.alpha,
        common.power_iteration(),
    )?;

    let points: Vec<SpindlePoint> = runs.iter().flat_map(|r| r.spindle_points()).collect();
    let hist = spindle_histogram(&points, args.binning.to_core())?;

    let (k_min, k_max) = args
        .fit_range
        .map(|s| (s.0, s.1))
        .unwrap_or((1, args.n.div_ceil(2)));
    let slopes = runs
        .iter()
        .map(|r| fit_power_law_sorted(&r.import_by_rank, k_min, k_max).map(|f| -f.beta))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| input_err(format!("import fit: {e}")))?;
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;

    let mut out = OutputDir::create(&common.out)?;
    match common.format {
        Format::Csv => {
            out.write("rmwtn_ensemble.csv", |w| Ok(write_ensemble_csv(&runs, w)?))?;
            out.write("rmwtn_spindle.csv", |w| Ok(hist.write_csv(w)?))?;
        }
        Format::Json => {
            out.write_json("rmwtn_ensemble.json", &runs)?;
            out.write_json("rmwtn_spindle.json", &hist)?;
        }
    }
    let results = json!({
        "model": cfg,
        "points": hist.total,
        "x_asymmetry": hist.x_asymmetry(),
        "import_fit_range": [k_min, k_max],
        "import_slope_mean": mean_slope,
        "realization_seeds": runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
    });
    finish(&mut out, "rmwtn", args, common, results, started)
}
