mod manifest;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hqmt_core::baselines::{build_ml_table, MwpmDecoder};
use hqmt_core::eval::{
    estimate_ler, estimate_pseudothreshold, exact_point, exact_sweep, parse_grid, parse_variants,
    run_ablation, sweep, tabulate, Decoder, EvalSettings, HqmtDecoder, LerPoint, Pseudothreshold,
    SweepResult, TableDecoder,
};
use hqmt_core::kv::KvMap;
use hqmt_core::model::{checkpoint_hash, load_checkpoint, save_checkpoint, Hqmt};
use hqmt_core::noise::{write_dataset_file, NoiseSource};
use hqmt_core::parallel::default_workers;
use hqmt_core::stabilizer::build_layout;
use hqmt_core::train::{train_with, write_log, DataRef, TrainConfig, TrainData};

use manifest::{manifest_path, RunManifest};

/// Bad flag combinations and values detected after parsing; exit code 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

#[derive(Parser, Debug)]
#[command(name = "hqmt", version, about = "Surface-code decoding workbench")]
struct Cli {
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = "HQMT_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Upper bound on worker threads for sampling and evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Single-threaded, producer-free execution.
    #[arg(long, global = true)]
    strict_deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a labeled syndrome dataset.
    Gen(GenArgs),
    /// Train a decoder.
    Train(TrainArgs),
    /// Logical error rate over a p-grid.
    Eval(EvalArgs),
    /// Crossing of a sweep with the un-coded line.
    Pseudothreshold(ThresholdArgs),
    /// Train and compare architectural variants.
    Ablate(AblateArgs),
    /// Exhaustive maximum-likelihood table for d = 3.
    Table(TableArgs),
}

fn parse_distance(s: &str) -> std::result::Result<usize, String> {
    let d: usize = s.parse().map_err(|_| format!("not an integer: {s:?}"))?;
    if d < 3 || d % 2 == 0 {
        return Err("distance must be odd ≥ 3".into());
    }
    Ok(d)
}

fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(0.0..1.0).contains(&p) {
        return Err("physical error rate must lie in [0, 1)".into());
    }
    Ok(p)
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let (lo, hi) = (parse_rate(lo)?, parse_rate(hi)?);
    if lo > hi {
        return Err("empty range".into());
    }
    Ok((lo, hi))
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = parse_distance)]
    d: usize,
    #[arg(long, value_parser = parse_rate, conflicts_with = "p_range", required_unless_present = "p_range")]
    p: Option<f64>,
    /// Per-sample p drawn uniformly from `lo:hi`.
    #[arg(long, value_parser = parse_range)]
    p_range: Option<(f64, f64)>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Store each sample's physical error alongside its syndrome.
    #[arg(long)]
    keep_errors: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_ckpt: Option<PathBuf>,
    /// Training log CSV (default: next to the checkpoint).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_parser = parse_distance)]
    d: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = parse_rate)]
    p: Option<f64>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print a progress line every this many steps (0 silences).
    #[arg(long, default_value_t = 100)]
    progress_every: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, conflicts_with = "decoder", required_unless_present = "decoder")]
    ckpt: Option<PathBuf>,
    #[arg(long, value_parser = ["ml", "mwpm"])]
    decoder: Option<String>,
    #[arg(long, value_parser = parse_distance)]
    d: Option<usize>,
    /// `lo:hi:count`, log-spaced.
    #[arg(long, default_value = "0.02:0.18:14")]
    p_grid: String,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact summation over all errors instead of sampling (d = 3 only).
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Sweep CSV or JSON.
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated variants: `full`, `stage1_only`, `stage2_only`, `N=<blocks>`.
    #[arg(long, default_value = "full,stage1_only,stage2_only")]
    modes: String,
    #[arg(long, default_value = "0.02:0.18:14")]
    p_grid: String,
    /// Trials per point when d > 3.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    eval_seed: u64,
    /// Output directory (default: `<out-dir>/ablation`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, value_parser = parse_distance, default_value_t = 3)]
    d: usize,
    #[arg(long, value_parser = parse_rate)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Ctx {
    out_dir: PathBuf,
    workers: usize,
    strict: bool,
}

impl Ctx {
    fn default_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str, man: &mut RunManifest) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    man.output(path);
    Ok(())
}

/// Runs `body` and writes the manifest whatever the outcome.
fn with_manifest(
    man: &mut RunManifest,
    path: &Path,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    let result = body(man);
    let err = result.as_ref().err().map(|e| format!("{e:#}"));
    man.finish(path, err.as_deref())?;
    result
}

fn cmd_gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let out = a
        .out
        .unwrap_or_else(|| ctx.default_path(&format!("dataset_d{}.qsd", a.d)));
    let source = match (a.p, a.p_range) {
        (Some(p), _) => NoiseSource::Fixed(p),
        (None, Some((lo, hi))) => NoiseSource::Uniform { lo, hi },
        (None, None) => return usage("one of --p or --p-range is required"),
    };
    let mut man = RunManifest::new("gen");
    man.seed(a.seed);
    man.set("d", a.d);
    man.set("source", format!("{source:?}"));
    man.set("count", a.count);
    man.set("keep_errors", a.keep_errors);
    man.set("workers", ctx.workers);
    with_manifest(&mut man, &manifest_path(&out), |man| {
        let layout = build_layout(a.d)?;
        ensure_parent(&out)?;
        write_dataset_file(&out, &layout, &source, a.count as usize, a.seed, a.keep_errors, ctx.workers)
            .with_context(|| format!("writing {}", out.display()))?;
        man.output(&out);
        man.output(&hqmt_core::noise::sidecar_path(&out));
        eprintln!("wrote {} samples to {}", a.count, out.display());
        Ok(())
    })
}

fn read_kv_file(path: &Path) -> Result<KvMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(KvMap::parse(&text)?)
}

fn apply_overrides(cfg: &mut TrainConfig, overrides: &[String]) -> Result<()> {
    let mut kv = KvMap::new();
    for o in overrides {
        let Some((k, v)) = o.split_once('=') else {
            return usage(format!("--set expects KEY=VALUE, got {o:?}"));
        };
        kv.set(k.trim(), v.trim());
    }
    cfg.apply_kv(&kv)?;
    Ok(())
}

/// Defaults, then the config file, then flags.
fn resolve_train_config(ctx: &Ctx, config: Option<&Path>, a: Option<&TrainArgs>, overrides: &[String]) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = config {
        cfg.apply_kv(&read_kv_file(path)?)?;
    }
    if let Some(a) = a {
        let mut kv = KvMap::new();
        if let Some(d) = a.d {
            kv.set("distance", d);
        }
        if let Some(v) = a.steps {
            kv.set("steps", v);
        }
        if let Some(v) = a.seed {
            kv.set("seed", v);
        }
        if let Some(v) = a.lr {
            kv.set("lr", v);
        }
        if let Some(v) = a.batch_size {
            kv.set("batch_size", v);
        }
        cfg.apply_kv(&kv)?;
        if let Some(p) = a.p {
            cfg.data = DataRef::OnTheFly(NoiseSource::Fixed(p));
        }
        if let Some(path) = &a.dataset {
            cfg.data = DataRef::Dataset(path.clone());
        }
    }
    apply_overrides(&mut cfg, overrides)?;
    if ctx.strict {
        cfg.strict_deterministic = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn record_config(man: &mut RunManifest, cfg: &TrainConfig) {
    for (k, v) in cfg.to_kv().iter() {
        man.set(k, v);
    }
    man.seed(cfg.seed);
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(ctx, a.config.as_deref(), Some(&a), &a.overrides)?;
    let ckpt = a.out_ckpt.clone().unwrap_or_else(|| ctx.default_path("model.hqmt"));
    let log_path = a.log.clone().unwrap_or_else(|| ckpt.with_extension("log.csv"));
    let mut man = RunManifest::new("train");
    record_config(&mut man, &cfg);
    if let Some(c) = &a.config {
        man.input(c);
    }
    with_manifest(&mut man, &manifest_path(&ckpt), |man| {
        let data = TrainData::resolve(&cfg.data, cfg.model.distance)?;
        if let DataRef::Dataset(p) = &cfg.data {
            man.input(p);
        }
        let model = Hqmt::new(cfg.model.clone(), cfg.seed)?;
        eprintln!(
            "training d={} with {} parameters for {} steps",
            cfg.model.distance,
            model.params().num_scalars(),
            cfg.steps
        );
        let every = a.progress_every;
        let out = train_with(model, &cfg, &data, |e| {
            if every > 0 && (e.step % every == 0 || e.step == cfg.steps) {
                let val = e.val_ler.map(|v| format!(" val_ler={v:.5}")).unwrap_or_default();
                eprintln!(
                    "step {:>6} loss={:.5} acc={:.4}{} ({:.1}s)",
                    e.step, e.loss, e.acc, val, e.seconds
                );
            }
        })?;
        ensure_parent(&ckpt)?;
        save_checkpoint(&out.model, &ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
        man.output(&ckpt);
        man.set("checkpoint_hash", checkpoint_hash(&out.model));
        ensure_parent(&log_path)?;
        write_log(&out.log, &log_path)?;
        man.output(&log_path);
        if let Some(dir) = &cfg.checkpoint_dir {
            man.output(dir);
        }
        Ok(())
    })
}

/// Builds one point for `decoder_name` at rate `p`.
fn eval_point(
    ctx: &Ctx,
    a: &EvalArgs,
    layout: &hqmt_core::stabilizer::CodeLayout,
    decoder: &dyn Decoder,
    p: f64,
) -> Result<LerPoint> {
    if a.exact {
        let table: TableDecoder = tabulate(decoder, layout)?;
        Ok(exact_point(layout, &table, p)?)
    } else {
        Ok(estimate_ler(decoder, layout, p, a.trials, a.seed, ctx.workers)?)
    }
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let grid = parse_grid(&a.p_grid).map_err(|e| Usage(e.to_string()))?;
    let mut man = RunManifest::new("eval");
    man.seed(a.seed);
    man.set("p_grid", &a.p_grid);
    man.set("trials", a.trials);
    man.set("exact", a.exact);
    man.set("workers", ctx.workers);

    let model = match &a.ckpt {
        Some(path) => {
            man.input(path);
            let m = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(d) = a.d {
                if d != m.config().distance {
                    return Err(hqmt_core::Error::DistanceMismatch {
                        checkpoint: m.config().distance,
                        requested: d,
                    }
                    .into());
                }
            }
            Some(m)
        }
        None => None,
    };
    let d = match (&model, a.d) {
        (Some(m), _) => m.config().distance,
        (None, Some(d)) => d,
        (None, None) => return usage("--d is required with --decoder"),
    };
    let id = model.as_ref().map(|_| "hqmt").or(a.decoder.as_deref()).unwrap_or("hqmt");
    if (id == "ml" || a.exact) && d != 3 {
        return usage(format!("{} requires --d 3", if a.exact { "--exact" } else { "--decoder ml" }));
    }
    man.set("decoder", id);
    man.set("d", d);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| ctx.default_path(&format!("sweep_{id}_d{d}.csv")));

    with_manifest(&mut man, &manifest_path(&out), |man| {
        let layout = build_layout(d)?;
        let mut result = match (id, &model) {
            ("ml", _) => {
                let points = grid
                    .iter()
                    .map(|&p| eval_point(ctx, &a, &layout, &build_ml_table(&layout, p)?, p))
                    .collect::<Result<Vec<_>>>()?;
                SweepResult {
                    decoder: "ml".into(),
                    d,
                    seed: a.seed,
                    checkpoint_hash: None,
                    config: None,
                    points,
                }
            }
            ("mwpm", _) => {
                let dec = MwpmDecoder::new(&layout);
                if a.exact {
                    exact_sweep(&layout, &tabulate(&dec, &layout)?, &grid)?
                } else {
                    sweep(&dec, &layout, &grid, a.trials, a.seed, ctx.workers)?
                }
            }
            (_, Some(m)) => {
                let dec = HqmtDecoder::new(m);
                let mut r = if a.exact {
                    exact_sweep(&layout, &tabulate(&dec, &layout)?, &grid)?
                } else {
                    sweep(&dec, &layout, &grid, a.trials, a.seed, ctx.workers)?
                };
                r.checkpoint_hash = Some(checkpoint_hash(m));
                r.config = Some(m.config().to_kv().to_text());
                r
            }
            _ => bail!("no decoder selected"),
        };
        result.seed = a.seed;
        write_file(&out, &result.to_csv(), man)?;
        write_file(&out.with_extension("json"), &result.to_json(), man)?;
        if let Some(svg) = &a.svg {
            write_file(svg, &result.to_svg(), man)?;
        }
        for pt in &result.points {
            println!("p={:.5} ler={:.6} [{:.6}, {:.6}]", pt.p, pt.ler, pt.ci_lo, pt.ci_hi);
        }
        Ok(())
    })
}

fn read_sweep(path: &Path) -> Result<SweepResult> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let sweep = if path.extension().is_some_and(|e| e == "json") {
        SweepResult::from_json(&text)?
    } else {
        SweepResult::from_csv(&text)?
    };
    Ok(sweep)
}

fn cmd_pseudothreshold(_ctx: &Ctx, a: ThresholdArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| {
        let mut s = a.sweep.as_os_str().to_owned();
        s.push(".threshold.json");
        PathBuf::from(s)
    });
    let mut man = RunManifest::new("pseudothreshold");
    man.input(&a.sweep);
    with_manifest(&mut man, &manifest_path(&out), |man| {
        let sweep = read_sweep(&a.sweep)?;
        let thr = estimate_pseudothreshold(&sweep);
        let value = serde_json::json!({
            "decoder": sweep.decoder,
            "d": sweep.d,
            "pseudothreshold": thr.value(),
            "result": thr,
        });
        write_file(&out, &serde_json::to_string_pretty(&value)?, man)?;
        match thr {
            Pseudothreshold::Crossing { p, .. } => println!("{p:.6}"),
            Pseudothreshold::NoCrossing => println!("no crossing in range"),
        }
        Ok(())
    })
}

fn cmd_ablate(ctx: &Ctx, a: AblateArgs) -> Result<()> {
    let variants = parse_variants(&a.modes).map_err(|e| Usage(e.to_string()))?;
    if variants.is_empty() {
        return usage("--modes lists no variants");
    }
    let grid = parse_grid(&a.p_grid).map_err(|e| Usage(e.to_string()))?;
    let base = resolve_train_config(ctx, a.config.as_deref(), None, &a.overrides)?;
    let dir = a.out.clone().unwrap_or_else(|| ctx.default_path("ablation"));
    let mut man = RunManifest::new("ablate");
    record_config(&mut man, &base);
    man.set("modes", &a.modes);
    man.set("p_grid", &a.p_grid);
    if let Some(c) = &a.config {
        man.input(c);
    }
    with_manifest(&mut man, &dir.join("manifest.json"), |man| {
        fs::create_dir_all(&dir)?;
        let data = TrainData::resolve(&base.data, base.model.distance)?;
        let eval = EvalSettings {
            trials: a.trials,
            seed: a.eval_seed,
            workers: ctx.workers,
        };
        let outcomes = run_ablation(&base, &data, &variants, &grid, &eval);
        let mut summary = String::from("variant,status,pseudothreshold\n");
        let mut failed = Vec::new();
        for o in outcomes {
            let name = o.variant.to_string().replace('=', "");
            match o.result {
                Ok(run) => {
                    let stem = dir.join(&name);
                    write_file(&stem.with_extension("csv"), &run.sweep.to_csv(), man)?;
                    write_file(&stem.with_extension("json"), &run.sweep.to_json(), man)?;
                    write_file(&stem.with_extension("log.csv"), &run.log.to_csv(), man)?;
                    let ck = stem.with_extension("hqmt");
                    save_checkpoint(&run.model, &ck)?;
                    man.output(&ck);
                    let thr = estimate_pseudothreshold(&run.sweep)
                        .value()
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "none".into());
                    summary.push_str(&format!("{},ok,{}\n", o.variant, thr));
                    println!("{}: pseudothreshold {}", o.variant, thr);
                }
                Err(e) => {
                    eprintln!("{}: failed: {e}", o.variant);
                    summary.push_str(&format!("{},failed,\n", o.variant));
                    failed.push(o.variant.to_string());
                }
            }
        }
        write_file(&dir.join("summary.csv"), &summary, man)?;
        if !failed.is_empty() {
            bail!("variants failed: {}", failed.join(", "));
        }
        Ok(())
    })
}

fn cmd_table(ctx: &Ctx, a: TableArgs) -> Result<()> {
    if a.d != 3 {
        return usage(format!("the exhaustive table requires d = 3 (got {})", a.d));
    }
    let out = a.out.clone().unwrap_or_else(|| ctx.default_path("ml_table_d3.csv"));
    let mut man = RunManifest::new("table");
    man.set("d", a.d);
    man.set("p", a.p);
    with_manifest(&mut man, &manifest_path(&out), |man| {
        let layout = build_layout(a.d)?;
        let table = build_ml_table(&layout, a.p)?;
        write_file(&out, &table.to_csv(), man)?;
        println!("exact ML logical error rate at p={}: {:.8}", a.p, table.exact_ler());
        Ok(())
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<hqmt_core::Error>() {
        Some(
            hqmt_core::Error::InvalidDistance(_)
            | hqmt_core::Error::InvalidArgument(_)
            | hqmt_core::Error::Config(_)
            | hqmt_core::Error::DistanceMismatch { .. }
            | hqmt_core::Error::ExhaustiveTooLarge(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let workers = if cli.strict_deterministic {
        1
    } else {
        cli.workers.unwrap_or_else(default_workers).max(1)
    };
    let ctx = Ctx {
        out_dir: cli.out_dir,
        workers,
        strict: cli.strict_deterministic,
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Pseudothreshold(a) => cmd_pseudothreshold(&ctx, a),
        Command::Ablate(a) => cmd_ablate(&ctx, a),
        Command::Table(a) => cmd_table(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
