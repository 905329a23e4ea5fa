use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cirprof::bench::{cdf_table, median, run_bench, write_cdf_csv, EstimateMethod, Pipeline};
use cirprof::channel::{generate_dataset, read_dataset, write_dataset, DatasetMeta, DatasetRecord};
use cirprof::esprit::{esprit_delays, ls_amp_phase, EspritConfig};
use cirprof::initializer::WeightBundle;
use cirprof::model_order::{
    hosvd_singular_values, model_order_features, nn_model_order_modes, select_model_order_modes, write_features_csv,
    OrderScenario,
};
use cirprof::predictor::{run_scenario, write_horizon_csv, HorizonSummary, ObservationMode, Scenario, SplineBoundary};
use cirprof::{DatasetSpec, MpcParamSet, SearchSchedule, SystemConfig};

use crate::{Cli, Command, Failure, Global};

const SCHEMA_VERSION: u32 = 1;

type Result<T> = std::result::Result<T, Failure>;

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let pool = match g.workers {
        Some(0) => return Err(Failure::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {n} workers: {e}")))?,
        None => rayon::ThreadPoolBuilder::new().build().map_err(|e| Failure::Usage(e.to_string()))?,
    };
    pool.install(|| match cli.command {
        Command::Generate { spec, n_channels, snr_db } => generate(&g, spec, n_channels, snr_db),
        Command::Estimate { dataset, method, weights, refine, schedule } => {
            estimate(&g, &dataset, &method, weights, refine, &schedule)
        }
        Command::Track { scenario, schedule } => track(&g, &scenario, &schedule),
        Command::Bench { dataset, trials, weights, schedule } => bench(&g, &dataset, trials, weights, &schedule),
        Command::Predict { scenario, observe, horizon, truth, boundary, schedule } => {
            predict(&g, &scenario, observe, horizon, truth, &boundary, &schedule)
        }
        Command::Esprit { dataset, subarray_length, no_fb } => esprit(&g, &dataset, subarray_length, !no_fb),
        Command::ModelOrder { dataset, scenario, floor_db, modes, weights } => {
            model_order(&g, &dataset, scenario, floor_db, &modes, weights)
        }
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn system_config(g: &Global) -> Result<SystemConfig> {
    let cfg = match &g.config {
        Some(p) => read_json(p)?,
        None => SystemConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Output path inside `--out-dir`; refuses to replace a file without
/// `--force`.
fn output(g: &Global, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&g.out_dir)?;
    let p = g.out_dir.join(name);
    if p.exists() && !g.force {
        return Err(Failure::Usage(format!("{} exists; pass --force to replace it", p.display())));
    }
    Ok(p)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<(DatasetMeta, Vec<DatasetRecord>)> {
    let (meta, recs) = read_dataset(dir)?;
    meta.config.validate()?;
    Ok((meta, recs))
}

fn load_weights(path: Option<PathBuf>) -> Result<Option<WeightBundle>> {
    path.map(|p| WeightBundle::load(&p).map_err(Failure::from)).transpose()
}

fn generate(g: &Global, spec: Option<PathBuf>, n_channels: Option<usize>, snr_db: Option<f64>) -> Result<()> {
    let cfg = system_config(g)?;
    let mut spec: DatasetSpec = match spec {
        Some(p) => read_json(&p)?,
        None => DatasetSpec::default(),
    };
    if let Some(n) = n_channels {
        spec.n_channels = n;
    }
    if snr_db.is_some() {
        spec.snr_db = snr_db;
    }
    if let Some(s) = g.seed {
        spec.rng_seed = s;
    }
    spec.validate(&cfg)?;
    output(g, "dataset.json")?;
    output(g, "records.bin")?;
    let records = generate_dataset(&spec, &cfg)?;
    let meta = DatasetMeta::new(&spec, &cfg, records.len());
    write_dataset(&g.out_dir, &meta, &records, true)?;
    println!("wrote {} channels to {}", records.len(), g.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ChannelResult {
    index: usize,
    loss_db: f64,
    elapsed_s: f64,
    theta_hat: MpcParamSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    ill_conditioned: Option<bool>,
}

#[derive(Serialize)]
struct EstimateOutput {
    schema_version: u32,
    method: String,
    refine: bool,
    n_channels: usize,
    median_loss_db: f64,
    channels: Vec<ChannelResult>,
}

fn write_estimates(g: &Global, stem: &str, out: &EstimateOutput) -> Result<()> {
    let json = output(g, &format!("{stem}.json"))?;
    let csv = output(g, &format!("{stem}_cdf.csv"))?;
    write_json(&json, out)?;
    let losses: Vec<f64> = out.channels.iter().map(|c| c.loss_db).collect();
    write_cdf_csv(BufWriter::new(fs::File::create(&csv)?), &cdf_table(&losses))?;
    println!(
        "{}: {} channels, median loss {:.2} dB -> {}",
        out.method,
        out.n_channels,
        out.median_loss_db,
        json.display()
    );
    Ok(())
}

fn with_channel<T>(i: usize, r: cirprof::Result<T>) -> Result<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        let msg = format!("channel {i}: {f}");
        match f {
            Failure::Usage(_) => Failure::Usage(msg),
            Failure::Data(_) => Failure::Data(msg),
            Failure::Numeric(_) => Failure::Numeric(msg),
        }
    })
}

fn estimate(
    g: &Global,
    dataset: &Path,
    method: &str,
    weights: Option<PathBuf>,
    refine: bool,
    schedule: &str,
) -> Result<()> {
    let method: EstimateMethod = method.parse()?;
    let (meta, recs) = load_dataset(dataset)?;
    let weights = load_weights(weights)?;
    if method == EstimateMethod::Nn && weights.is_none() {
        return Err(Failure::Usage(
            "method nn needs --weights; without a trained bundle use --method peak".into(),
        ));
    }
    let mut p = Pipeline::new(&meta, SearchSchedule::preset(schedule, &meta.config)?)?;
    p.weights = weights.as_ref();
    p.refine = refine;
    let channels = recs
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let t0 = Instant::now();
            let theta_hat = with_channel(i, p.estimate(r, i, method))?;
            let elapsed_s = t0.elapsed().as_secs_f64();
            let loss_db = with_channel(i, p.score_db(r, &theta_hat))?;
            Ok(ChannelResult { index: i, loss_db, elapsed_s, theta_hat, ill_conditioned: None })
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = channels.iter().map(|c| c.loss_db).collect();
    let name = serde_json::to_value(method)?.as_str().unwrap_or_default().to_string();
    let out = EstimateOutput {
        schema_version: SCHEMA_VERSION,
        method: name,
        refine,
        n_channels: channels.len(),
        median_loss_db: median(&losses),
        channels,
    };
    write_estimates(g, "estimate", &out)
}

fn esprit(g: &Global, dataset: &Path, subarray_length: Option<usize>, fb: bool) -> Result<()> {
    let (meta, recs) = load_dataset(dataset)?;
    let p = Pipeline::new(&meta, SearchSchedule::for_config(&meta.config))?;
    let cfg = &meta.config;
    let channels = recs
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let ec = EspritConfig { subarray_length, use_forward_backward: fb, model_order: r.theta.len() };
            let h = p.observed_freq_response(r, i);
            let t0 = Instant::now();
            let delays = with_channel(i, esprit_delays(&h, &ec, cfg))?;
            let fit = with_channel(i, ls_amp_phase(&delays, &h, cfg))?;
            let elapsed_s = t0.elapsed().as_secs_f64();
            let loss_db = with_channel(i, p.score_db(r, &fit.theta))?;
            Ok(ChannelResult {
                index: i,
                loss_db,
                elapsed_s,
                theta_hat: fit.theta,
                ill_conditioned: Some(fit.ill_conditioned),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let losses: Vec<f64> = channels.iter().map(|c| c.loss_db).collect();
    let out = EstimateOutput {
        schema_version: SCHEMA_VERSION,
        method: "esprit".into(),
        refine: false,
        n_channels: channels.len(),
        median_loss_db: median(&losses),
        channels,
    };
    write_estimates(g, "esprit", &out)
}

fn scenario(g: &Global, path: &Path) -> Result<Scenario> {
    let mut scn: Scenario = read_json(path)?;
    if let Some(s) = g.seed {
        scn.seed = s;
    }
    Ok(scn)
}

#[derive(Serialize)]
struct TrackOutput {
    schema_version: u32,
    observed: [i64; 2],
    loss_db: Vec<f64>,
    track_lost: Vec<bool>,
    theta_hat: Vec<MpcParamSet>,
}

fn track(g: &Global, path: &Path, schedule: &str) -> Result<()> {
    let cfg = system_config(g)?;
    let mut scn = scenario(g, path)?;
    scn.horizon = 0;
    let sched = SearchSchedule::preset(schedule, &cfg)?;
    let p = pipeline_parts(&cfg)?;
    let run = run_scenario(&scn, ObservationMode::Estimated, SplineBoundary::Natural, &cfg, &p.0, &p.1, &sched)?;
    let track_lost = run
        .observed_loss_db
        .iter()
        .enumerate()
        .map(|(k, &l)| k > 0 && l > sched.track_lost_db)
        .collect();
    let json = output(g, "track.json")?;
    let csv = output(g, "track.csv")?;
    let mut w = BufWriter::new(fs::File::create(&csv)?);
    writeln!(w, "t_index,loss_db")?;
    for (t, l) in (scn.observe[0]..).zip(&run.observed_loss_db) {
        writeln!(w, "{t},{l}")?;
    }
    w.flush()?;
    let out = TrackOutput {
        schema_version: SCHEMA_VERSION,
        observed: scn.observe,
        loss_db: run.observed_loss_db,
        track_lost,
        theta_hat: run.observed,
    };
    write_json(&json, &out)?;
    let worst = out.loss_db.iter().copied().fold(f64::MIN, f64::max);
    println!("tracked {} instants, worst loss {worst:.2} dB -> {}", out.loss_db.len(), json.display());
    Ok(())
}

fn pipeline_parts(cfg: &SystemConfig) -> Result<(cirprof::QuantizerSpec, cirprof::SincBank)> {
    Ok((cirprof::QuantizerSpec::for_config(cfg), cirprof::SincBank::for_config(cfg)?))
}

fn bench(g: &Global, dataset: &Path, trials: usize, weights: Option<PathBuf>, schedule: &str) -> Result<()> {
    let (meta, recs) = load_dataset(dataset)?;
    let weights = load_weights(weights)?;
    let mut p = Pipeline::new(&meta, SearchSchedule::preset(schedule, &meta.config)?)?;
    p.weights = weights.as_ref();
    let json = output(g, "bench.json")?;
    let report = run_bench(&p, &recs, trials)?;
    write_json(&json, &report)?;
    println!("{:<22} {:>14} {:>14} {:>7}", "method", "median_s", "median_loss_db", "trials");
    for r in &report.rows {
        println!(
            "{:<22} {:>14.6e} {:>14.2} {:>7}",
            r.method.name(),
            r.median_elapsed_s,
            r.median_loss_db,
            r.n_trials
        );
    }
    for (m, why) in &report.skipped {
        println!("{:<22} skipped: {why}", m.name());
    }
    let o = report.latency_ordering;
    println!(
        "latency ordering init < tracking < start: {} ({:.3e} s, {:.3e} s, {:.3e} s)",
        if o.holds { "holds" } else { "violated" },
        o.init_s,
        o.tracking_s,
        o.start_s
    );
    Ok(())
}

fn parse_range(s: &str) -> Result<[i64; 2]> {
    let bad = || Failure::Usage(format!("--observe expects A..B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

fn predict(
    g: &Global,
    path: &Path,
    observe: Option<String>,
    horizon: Option<usize>,
    truth: bool,
    boundary: &str,
    schedule: &str,
) -> Result<()> {
    let cfg = system_config(g)?;
    let mut scn = scenario(g, path)?;
    if let Some(r) = observe {
        scn.observe = parse_range(&r)?;
    }
    if let Some(h) = horizon {
        scn.horizon = h;
    }
    let boundary = match boundary {
        "natural" => SplineBoundary::Natural,
        "not-a-knot" => SplineBoundary::NotAKnot,
        other => return Err(Failure::Usage(format!("unknown spline boundary {other:?} (natural, not-a-knot)"))),
    };
    let mode = if truth { ObservationMode::Truth } else { ObservationMode::Estimated };
    let sched = SearchSchedule::preset(schedule, &cfg)?;
    let (q, bank) = pipeline_parts(&cfg)?;
    scn.validate()?;
    let json = output(g, "horizon.json")?;
    let csv = output(g, "horizon.csv")?;
    let run = run_scenario(&scn, mode, boundary, &cfg, &q, &bank, &sched)?;
    write_horizon_csv(BufWriter::new(fs::File::create(&csv)?), &run.rows, scn.spacing_ms)?;
    let summary = HorizonSummary::new(scn.observe, scn.spacing_ms, run.rows);
    write_json(&json, &summary)?;
    match summary.median_loss_db {
        Some(m) => println!(
            "predicted {} instants, median loss {m:.2} dB, {} model violations -> {}",
            summary.horizon,
            summary.violations,
            csv.display()
        ),
        None => println!("empty horizon -> {}", csv.display()),
    }
    Ok(())
}

#[derive(Serialize)]
struct OrderChannel {
    index: usize,
    true_order: usize,
    selected: usize,
}

#[derive(Serialize)]
struct OrderOutput {
    schema_version: u32,
    scenario: OrderScenario,
    modes: Vec<usize>,
    classifier: bool,
    accuracy: f64,
    channels: Vec<OrderChannel>,
}

fn model_order(
    g: &Global,
    dataset: &Path,
    scenario: Option<PathBuf>,
    floor_db: Option<f64>,
    modes: &str,
    weights: Option<PathBuf>,
) -> Result<()> {
    let (meta, recs) = load_dataset(dataset)?;
    let mut scn: OrderScenario = match scenario {
        Some(p) => read_json(&p)?,
        None => OrderScenario::default(),
    };
    if let Some(s) = g.seed {
        scn.seed = s;
    }
    if let Some(f) = floor_db {
        scn.noise_floor_db = f;
    }
    let modes: Vec<usize> = modes
        .split(',')
        .map(|m| m.trim().parse::<usize>().ok().filter(|&d| d < 3))
        .collect::<Option<_>>()
        .ok_or_else(|| Failure::Usage(format!("--modes expects indices in 0..3, got {modes:?}")))?;
    let weights = load_weights(weights)?;
    let json = output(g, "model_order.json")?;
    let csv = output(g, "features.csv")?;
    let cfg = &meta.config;
    let rows = recs
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let h = with_channel(i, scn.tensor(&r.theta, i, cfg))?;
            let sv = with_channel(i, hosvd_singular_values(&h))?;
            let selected = match &weights {
                Some(w) => with_channel(i, nn_model_order_modes(&sv, w, &modes))?,
                None => select_model_order_modes(&sv, scn.noise_floor_db, &modes),
            };
            let features = model_order_features(&sv, &modes);
            Ok((OrderChannel { index: i, true_order: r.theta.len(), selected }, features))
        })
        .collect::<Result<Vec<_>>>()?;
    let labelled: Vec<(Option<usize>, Vec<f64>)> = rows.iter().map(|(c, f)| (Some(c.true_order), f.clone())).collect();
    write_features_csv(BufWriter::new(fs::File::create(&csv)?), &labelled)?;
    let correct = rows.iter().filter(|(c, _)| c.selected == c.true_order).count();
    let out = OrderOutput {
        schema_version: SCHEMA_VERSION,
        scenario: scn,
        modes,
        classifier: weights.is_some(),
        accuracy: correct as f64 / rows.len().max(1) as f64,
        channels: rows.into_iter().map(|(c, _)| c).collect(),
    };
    write_json(&json, &out)?;
    println!("model order: {correct}/{} correct -> {}", out.channels.len(), json.display());
    Ok(())
}
