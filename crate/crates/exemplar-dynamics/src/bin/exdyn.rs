//! Command-line front end: run scenarios, list presets, run the
//! convergence study, classify finished series, and self-check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use exemplar_dynamics::config::{parse_config, serialize_scenario};
use exemplar_dynamics::engine::{engine_by_name, Engine, RunOutput};
use exemplar_dynamics::error::{Error, Result};
use exemplar_dynamics::field::Grid;
use exemplar_dynamics::output::{
    exemplar_snapshot_csv, field_snapshot_text, fmt_num, series_csv, write_recorded, FileEntry,
    RunManifest, MANIFEST_NAME,
};
use exemplar_dynamics::point::Point;
use exemplar_dynamics::scenarios::{
    classify_outcome, convergence_study, preset, EngineChoice, Scenario, DEFAULT_THETA_DRIFT,
    PRESET_NAMES,
};
use exemplar_dynamics::stats::DiagnosticsRow;
use exemplar_dynamics::validate::run_all;

/// Simulate word pronunciation dynamics in phonetic space.
#[derive(Parser)]
#[command(name = "exdyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or preset and write its outputs.
    Run(RunArgs),
    /// List the built-in presets.
    PresetList,
    /// Compare stochastic runs against the field solution across
    /// production rates.
    Converge(ConvergeArgs),
    /// Classify a finished series as merged, stable, or drifting.
    Classify(ClassifyArgs),
    /// Run the built-in invariant suite.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (see `preset-list`).
    #[arg(long)]
    preset: Option<String>,
    /// Engine override: exemplar, field, or both.
    #[arg(long)]
    engine: Option<String>,
    /// Categorization regime override.
    #[arg(long)]
    regime: Option<String>,
    /// Selection parameter override (a number or "inf").
    #[arg(long)]
    p: Option<String>,
    /// Single seed override.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid override, `min:max:n` (applied to every axis).
    #[arg(long)]
    grid: Option<String>,
    /// Output directory root.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Base scenario preset.
    #[arg(long, default_value = "validate-regime2")]
    preset: String,
    /// Ascending production rates to test.
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 1000.0, 10000.0])]
    nu: Vec<f64>,
    /// Seeds for the stochastic runs.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    /// Write the result table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Series CSV produced by `run`.
    series: PathBuf,
    /// Terminal window length; defaults to 20% of the series span.
    #[arg(long)]
    window: Option<f64>,
    /// Separation threshold; defaults per word pair to the sum of the
    /// two terminal dispersions.
    #[arg(long = "theta-sep")]
    theta_sep: Option<f64>,
    /// Drift threshold in phonetic units per unit time.
    #[arg(long = "theta-drift", default_value_t = DEFAULT_THETA_DRIFT)]
    theta_drift: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Toml(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::PresetList => cmd_preset_list(),
        Command::Converge(args) => cmd_converge(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Validate => cmd_validate(),
    }
}

fn cmd_preset_list() -> Result<ExitCode> {
    for name in PRESET_NAMES {
        let sc = preset(name)?;
        println!("{name:24} {}", sc.note.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

fn resolve_scenario(args: &RunArgs) -> Result<Scenario> {
    let mut sc = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            parse_config(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "run",
                "give either --config or --preset, not both",
            ))
        }
        (None, None) => {
            return Err(Error::config("run", "one of --config or --preset is required"))
        }
    };
    if let Some(engine) = &args.engine {
        sc.engine = engine.parse()?;
    }
    if let Some(regime) = &args.regime {
        sc.params.regime = regime.parse()?;
    }
    if let Some(p) = &args.p {
        sc.params.p = p.parse()?;
    }
    if let Some(seed) = args.seed {
        sc.seeds = vec![seed];
    }
    if let Some(t_max) = args.t_max {
        sc.t_max = t_max;
    }
    if let Some(dt) = args.dt {
        sc.dt = dt;
    }
    if let Some(spec) = &args.grid {
        sc.grid = parse_grid_spec(spec, sc.params.dim())?;
    }
    if let Some(dir) = &args.out_dir {
        sc.out_dir = Some(dir.display().to_string());
    }
    sc.validate()?;
    Ok(sc)
}

/// `min:max:n`, applied to every axis of the model's dimension.
fn parse_grid_spec(spec: &str, dim: usize) -> Result<Grid> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || Error::config("grid", format!("expected `min:max:n`, got `{spec}`"));
    let [min, max, n] = parts.as_slice() else {
        return Err(err());
    };
    let min: f64 = min.parse().map_err(|_| err())?;
    let max: f64 = max.parse().map_err(|_| err())?;
    let n: usize = n.parse().map_err(|_| err())?;
    match dim {
        1 => Grid::d1(min, max, n),
        _ => Grid::d2([min, min], [max, max], [n, n]),
    }
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn output_root(sc: &Scenario) -> PathBuf {
    if let Some(dir) = &sc.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("EXDYN_OUT_DIR") {
        return PathBuf::from(dir);
    }
    PathBuf::from("runs")
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let sc = resolve_scenario(&args)?;
    let root = output_root(&sc);
    let engines: Vec<&'static dyn Engine> = match sc.engine {
        EngineChoice::Exemplar => vec![engine_by_name("exemplar")?],
        EngineChoice::Field => vec![engine_by_name("field")?],
        EngineChoice::Both => vec![engine_by_name("exemplar")?, engine_by_name("field")?],
    };
    for engine in engines {
        // without initial-peak perturbation the field solution is
        // seed-independent, so one run covers every seed
        let seeds: &[u64] = if engine.name() == "field" && sc.perturb_cells == 0.0 {
            &sc.seeds[..1]
        } else {
            &sc.seeds
        };
        for &seed in seeds {
            let dir = root.join(&sc.name).join(format!("{}-seed{}", engine.name(), seed));
            std::fs::create_dir_all(&dir)?;
            let started = unix_ms();
            let out = engine.run(&sc, seed)?;
            let finished = unix_ms();
            write_run(&dir, &sc, engine.name(), seed, &out, started, finished)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} seed {} -> {}", engine.name(), seed, dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// A snapshot time as a filename-friendly tag, absorbing integration
/// roundoff (`4.999999999999938` tags as `5`).
fn time_tag(t: f64) -> String {
    let rounded = (t * 1e4).round() / 1e4;
    let mut s = format!("{rounded:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn write_run(
    dir: &Path,
    sc: &Scenario,
    engine: &str,
    seed: u64,
    out: &RunOutput,
    started: u128,
    finished: u128,
) -> Result<()> {
    let dim = sc.params.dim();
    let names: Vec<String> = sc.params.words.iter().map(|w| w.name.clone()).collect();
    let mut files: Vec<FileEntry> = Vec::new();
    let config_text = serialize_scenario(sc);
    write_recorded(dir, "config.toml", &config_text, &mut files)?;
    write_recorded(dir, "series.csv", &series_csv(&out.series, &names, dim), &mut files)?;
    for (t, rows) in &out.exemplar_snapshots {
        let name = format!("snapshot_t{}.csv", time_tag(*t));
        write_recorded(dir, &name, &exemplar_snapshot_csv(rows, &names, dim), &mut files)?;
    }
    for snap in &out.field_snapshots {
        let name = format!("field_t{}.txt", time_tag(snap.t));
        write_recorded(dir, &name, &field_snapshot_text(snap, &sc.grid, &names), &mut files)?;
    }
    let manifest = RunManifest {
        tool: "exdyn".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config_text,
        engine: engine.into(),
        seed,
        started_unix_ms: started,
        finished_unix_ms: finished,
        files,
    };
    std::fs::write(dir.join(MANIFEST_NAME), manifest.to_json())?;
    Ok(())
}

fn cmd_converge(args: ConvergeArgs) -> Result<ExitCode> {
    let base = preset(&args.preset)?;
    let rows = convergence_study(&base, &args.nu, &args.seeds)?;
    let names: Vec<String> = base.params.words.iter().map(|w| w.name.clone()).collect();
    let mut table = String::from("nu,word,median_mean_dev,median_disp_dev\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{}\n",
            fmt_num(r.nu),
            names[r.word],
            fmt_num(r.median_mean_dev),
            fmt_num(r.median_disp_dev),
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Parse a series CSV back into diagnostics rows; word names map to ids
/// in order of first appearance.
fn parse_series_csv(text: &str) -> Result<(Vec<DiagnosticsRow>, Vec<String>)> {
    let bad = |line: usize, msg: &str| Error::config("series", format!("line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let dim = match columns.len() {
        7 => 1,
        8 => 2,
        _ => return Err(bad(0, "unrecognized header")),
    };
    let mut names: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != columns.len() {
            return Err(bad(i, "wrong column count"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| bad(i, &format!("bad number `{s}`")))
        };
        let word = match names.iter().position(|n| n == f[1]) {
            Some(w) => w,
            None => {
                names.push(f[1].to_string());
                names.len() - 1
            }
        };
        let mean = if dim == 1 {
            Point::d1(num(f[2])?)
        } else {
            Point::d2(num(f[2])?, num(f[3])?)
        };
        rows.push(DiagnosticsRow {
            t: num(f[0])?,
            word,
            mean,
            dispersion: num(f[2 + dim])?,
            total_weight: num(f[3 + dim])?,
            live_count: f[4 + dim].parse().ok(),
            discard_count: f[5 + dim].parse().ok(),
        });
    }
    Ok((rows, names))
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.series)?;
    let (rows, _) = parse_series_csv(&text)?;
    let span = rows.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max)
        - rows.iter().map(|r| r.t).fold(f64::INFINITY, f64::min);
    let window = args.window.unwrap_or(0.2 * span);
    let (verdict, ev) = classify_outcome(&rows, window, args.theta_sep, args.theta_drift)?;
    println!("{verdict}");
    println!(
        "separation = {:.6} (theta_sep = {:.6}), drift = {:.6e} per unit time (theta_drift = {:.6e}), window = {:.6}",
        ev.terminal_separation, ev.theta_sep, ev.drift_rate, ev.theta_drift, ev.window
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate() -> Result<ExitCode> {
    let results = run_all()?;
    let mut all_ok = true;
    for r in &results {
        println!("{} {:28} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: {} invariant check(s) failed", results.iter().filter(|r| !r.passed).count());
        Ok(ExitCode::from(2))
    }
}
