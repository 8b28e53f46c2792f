//! Command-line front end. Every subcommand reads its inputs from flags,
//! calls into the library and prints one JSON document (or a CSV table).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::benchmarks::{
    constant_price_equilibrium, constant_price_finite, full_information_deviation, naive_maxmin_uniform,
    no_gap_folk_support, sophisticated_discrete_two_period,
};
use crate::coase::{solve_on, GameConfig, Horizon, Tolerances};
use crate::dist::{check_lipschitz, press, DistSpec, SaleCurve, ValueDistribution};
use crate::error::{invalid, Result};
use crate::nature::{
    check_prm, commitment_regime_switch, compare_series, prm_neighborhood, worst_case_partitional, SearchOptions,
};
use crate::robust::solve_robust;
use crate::sim::{audit_all, commitment_profile, equilibrium_profile, simulate, StrategyProfile};

#[derive(Parser, Debug)]
#[command(name = "robust-coase", version, about = "Durable-goods monopoly with worst-case information")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit tabular results as CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Seed for commands that draw random numbers.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for parallel sweeps (default: logical cores, or ROBUST_COASE_JOBS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Root-finding tolerance.
    #[arg(long, global = true)]
    tol_root: Option<f64>,
    /// Quadrature tolerance.
    #[arg(long, global = true)]
    tol_int: Option<f64>,
    /// Cells of the solver's state grid.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct GameArgs {
    /// Prior as inline JSON or a path to a JSON file.
    #[arg(long)]
    dist: String,
    #[arg(long)]
    delta: f64,
    /// Number of periods, or `inf`.
    #[arg(long, default_value = "inf")]
    horizon: Horizon,
    /// Allow an infinite horizon when the support starts at zero.
    #[arg(long)]
    no_gap: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pressed distribution of a prior.
    Press {
        #[arg(long)]
        dist: String,
        /// Points where the pressed CDF is evaluated (default: an even grid).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eval: Vec<f64>,
        /// Size of the default grid.
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Known-values equilibrium.
    Solve {
        #[command(flatten)]
        game: GameArgs,
        /// Press the prior before solving.
        #[arg(long)]
        pressed: bool,
    },
    /// Robust equilibrium with its threshold information process.
    Robust {
        #[command(flatten)]
        game: GameArgs,
    },
    /// Nature's minimum profit against a fixed declining price path.
    WorstCase {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        delta: f64,
        /// Comma-separated prices, one per period.
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        /// Points per threshold in each grid pass.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        refinements: usize,
    },
    /// Baseline profit against nature-commitment profit over a grid of discount factors (CSV).
    Compare {
        #[arg(long)]
        dist: String,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.05:0.95:0.05")]
        delta_grid: String,
        /// Emit JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Structural checks on a prior.
    Check {
        #[arg(long)]
        dist: String,
        /// Pressed-ratio monotonicity, with a neighborhood of the lower support point where it holds.
        #[arg(long)]
        prm: bool,
        /// Lipschitz test of the quantile function at the lower support point.
        #[arg(long)]
        lipschitz: bool,
    },
    /// Benchmark constructions.
    #[command(subcommand)]
    Benchmarks(Bench),
    /// Monte Carlo play of a strategy profile.
    Simulate {
        /// `equilibrium`, `commitment`, inline JSON or a path to a profile file.
        #[arg(long, default_value = "equilibrium")]
        profile: String,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Also run the seller, nature and buyer audits.
        #[arg(long)]
        audit: bool,
        /// Grid intervals of the seller and nature audits.
        #[arg(long, default_value_t = 256)]
        audit_grid: usize,
        /// Write the profile that was played to this file.
        #[arg(long)]
        save_profile: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Bench {
    /// Maxmin seller who ignores future information, uniform prior on [0, 2].
    Naive {
        #[arg(long)]
        delta: f64,
    },
    /// Two-type example: values 0 and 1 with probability q of the high type.
    Discrete {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Constant price at the prior mean with random purchase timing.
    ConstantPrice {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        vstar: f64,
        /// Check a finite horizon period by period instead of the infinite game.
        #[arg(long)]
        periods: Option<usize>,
        /// Punishment profit; defaults to the infinite-horizon robust profit.
        #[arg(long)]
        punishment: Option<f64>,
    },
    /// Feasibility certificate for constant-price play without a gap.
    Nogap {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        vstar: Option<f64>,
        /// JSON list of `[a, b]` cells (default: the whole support).
        #[arg(long)]
        partition: Option<String>,
        /// Exponent of the power-envelope regularity test.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

/// What a command produced.
enum Report {
    Json(Value),
    Csv(String),
}

/// Runs the command line `argv` (program name first), writing results to
/// `stdout` and diagnostics to `stderr`. Returns the process exit status.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{}", line.trim());
            return 2;
        }
    };
    match execute(&cli).and_then(|r| emit(&cli.common, r, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Entry point of the binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn execute(cli: &Cli) -> Result<Report> {
    let jobs = match cli.common.jobs {
        Some(j) => j,
        None => match std::env::var("ROBUST_COASE_JOBS") {
            Ok(s) => s.trim().parse().map_err(|_| invalid(format!("ROBUST_COASE_JOBS must be a positive integer, got '{s}'")))?,
            Err(_) => 0,
        },
    };
    if cli.common.jobs == Some(0) {
        return Err(invalid("--jobs must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn tolerances(c: &Common) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(r) = c.tol_root {
        tol.root = r;
    }
    if let Some(i) = c.tol_int {
        tol.integral = i;
    }
    if let Some(n) = c.grid_n {
        tol.grid_n = n;
    }
    tol.validate()?;
    Ok(tol)
}

fn read_json_arg(arg: &str) -> Result<String> {
    let t = arg.trim();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(t.to_string())
    } else {
        std::fs::read_to_string(Path::new(t)).map_err(|e| invalid(format!("cannot read '{t}': {e}")))
    }
}

fn parse_dist(arg: &str) -> Result<ValueDistribution> {
    let spec: DistSpec = serde_json::from_str(&read_json_arg(arg)?)?;
    ValueDistribution::from_spec(spec)
}

fn game_config(g: &GameArgs, c: &Common) -> Result<GameConfig> {
    let mut cfg = GameConfig::new(parse_dist(&g.dist)?, g.delta, g.horizon);
    cfg.tolerances = tolerances(c)?;
    cfg.tolerances.allow_no_gap = g.no_gap;
    cfg.validate()?;
    Ok(cfg)
}

fn json<T: Serialize>(x: &T) -> Result<Report> {
    Ok(Report::Json(serde_json::to_value(x)?))
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn dispatch(cli: &Cli) -> Result<Report> {
    let c = &cli.common;
    match &cli.command {
        Command::Press { dist, eval, points } => {
            let f = parse_dist(dist)?;
            let g = press(&f)?;
            let (lo, top) = g.support();
            let ws = if eval.is_empty() {
                if *points < 2 {
                    return Err(invalid("--points must be at least 2"));
                }
                (0..*points).map(|i| lo + (top - lo) * i as f64 / (*points - 1) as f64).collect()
            } else {
                eval.clone()
            };
            let rows: Vec<[f64; 4]> = ws
                .iter()
                .map(|&w| {
                    let y = if w < lo { lo } else { g.threshold(w.min(top))? };
                    Ok([w, g.cdf(w), g.pdf(w), y])
                })
                .collect::<Result<_>>()?;
            if c.csv {
                return Ok(Report::Csv(csv_table(&["w", "cdf", "pdf", "threshold"], rows.iter().map(|r| r.to_vec()))));
            }
            let pts: Vec<Value> = rows
                .iter()
                .map(|r| serde_json::json!({"w": r[0], "cdf": r[1], "pdf": r[2], "threshold": r[3]}))
                .collect();
            Ok(Report::Json(serde_json::json!({
                "support": [lo, top],
                "mean": g.mean(),
                "points": pts,
            })))
        }
        Command::Solve { game, pressed } => {
            let cfg = game_config(game, c)?;
            cfg.dist.require_continuous("the known-values solver")?;
            let eq = if *pressed {
                solve_on(&press(&cfg.dist)?, cfg.delta, cfg.horizon, &cfg.tolerances)?
            } else {
                solve_on(&cfg.dist, cfg.delta, cfg.horizon, &cfg.tolerances)?
            };
            if c.csv {
                let rows = (0..eq.prices.len()).map(|t| vec![(t + 1) as f64, eq.prices[t], eq.cutoffs[t]]);
                return Ok(Report::Csv(csv_table(&["period", "price", "cutoff"], rows)));
            }
            Ok(Report::Json(serde_json::json!({
                "prices": eq.prices,
                "cutoffs": eq.cutoffs,
                "profit": eq.profit,
                "surplus": eq.surplus,
                "clearing_time": eq.clearing_time,
                "pressed": pressed,
                "multiplicity": eq.multiplicity,
            })))
        }
        Command::Robust { game } => {
            let cfg = game_config(game, c)?;
            let eq = solve_robust(&cfg)?;
            if c.csv {
                let p = &eq.process;
                let rows = (0..eq.prices.len())
                    .map(|t| vec![(t + 1) as f64, eq.prices[t], eq.cutoffs[t], p.thresholds[t], p.obedience_residuals[t]]);
                return Ok(Report::Csv(csv_table(&["period", "price", "cutoff", "threshold", "residual"], rows)));
            }
            Ok(Report::Json(serde_json::json!({
                "prices": eq.prices,
                "cutoffs": eq.cutoffs,
                "thresholds": eq.process.thresholds,
                "residuals": eq.process.obedience_residuals,
                "profit": eq.profit,
                "surplus": eq.surplus,
                "clearing_time": eq.clearing_time,
                "warnings": eq.warnings,
            })))
        }
        Command::WorstCase { dist, delta, prices, grid, refinements } => {
            let f = parse_dist(dist)?;
            let opts = SearchOptions { grid: *grid, refinements: *refinements, ..SearchOptions::default() };
            json(&worst_case_partitional(&f, prices, *delta, &opts)?)
        }
        Command::Compare { dist, delta_grid, json: as_json } => {
            let f = parse_dist(dist)?;
            let deltas = parse_grid(delta_grid)?;
            let series = compare_series(&f, &deltas, &tolerances(c)?)?;
            if *as_json {
                let switch = commitment_regime_switch(&f, deltas[0], deltas[deltas.len() - 1], 1e-6)?;
                return Ok(Report::Json(serde_json::json!({ "series": series, "regime_switch": switch })));
            }
            let rows = series.iter().map(|p| vec![p.delta, p.baseline_profit, p.commitment_profit]);
            Ok(Report::Csv(csv_table(&["delta", "baseline_profit", "commitment_profit"], rows)))
        }
        Command::Check { dist, prm, lipschitz } => {
            if !prm && !lipschitz {
                return Err(invalid("choose at least one check: --prm or --lipschitz"));
            }
            let f = parse_dist(dist)?;
            let mut out = serde_json::Map::new();
            if *prm {
                out.insert("prm".into(), serde_json::to_value(check_prm(&f)?)?);
                let nb = if f.has_gap() { Some(prm_neighborhood(&f)?) } else { None };
                out.insert("prm_neighborhood".into(), serde_json::to_value(nb)?);
            }
            if *lipschitz {
                out.insert("lipschitz".into(), serde_json::to_value(check_lipschitz(&f, f64::INFINITY, false)?)?);
            }
            Ok(Report::Json(Value::Object(out)))
        }
        Command::Benchmarks(b) => bench(b, c),
        Command::Simulate { profile, game, paths, audit, audit_grid, save_profile } => {
            let cfg = game_config(game, c)?;
            let profile = load_profile(profile, &cfg)?;
            if let Some(path) = save_profile {
                let text = to_string_sig(&serde_json::to_value(&profile)?)?;
                std::fs::write(path, text + "\n")?;
            }
            let mut report = simulate(&profile, &cfg, *paths, c.seed)?;
            if *audit {
                report.attach_audits(&audit_all(&profile, &cfg, *audit_grid)?);
            }
            if c.csv {
                let total = report.n_paths as f64;
                let rows = report
                    .sale_time_histogram
                    .iter()
                    .enumerate()
                    .map(|(t, &k)| vec![(t + 1) as f64, k as f64, k as f64 / total]);
                return Ok(Report::Csv(csv_table(&["period", "sales", "share"], rows)));
            }
            json(&report)
        }
    }
}

fn bench(b: &Bench, c: &Common) -> Result<Report> {
    match b {
        Bench::Naive { delta } => json(&naive_maxmin_uniform(*delta)?),
        Bench::Discrete { q, delta } => {
            let d = sophisticated_discrete_two_period(*q, *delta)?;
            let fi = full_information_deviation(*q, *delta, d.p1, d.p2);
            Ok(Report::Json(serde_json::json!({
                "sophisticated": d,
                "static_price": crate::benchmarks::binary_static_price(*q),
                "static_profit": crate::benchmarks::binary_static_profit(*q),
                "full_information": fi,
            })))
        }
        Bench::ConstantPrice { dist, delta, vstar, periods, punishment } => {
            let f = parse_dist(dist)?;
            let tol = tolerances(c)?;
            if let Some(k) = periods {
                return json(&constant_price_finite(&f, *delta, *vstar, *k, &tol)?);
            }
            let punish = match punishment {
                Some(p) => *p,
                None => {
                    let mut cfg = GameConfig::new(f.clone(), *delta, Horizon::Infinite);
                    cfg.tolerances = tol;
                    cfg.tolerances.allow_no_gap = true;
                    solve_robust(&cfg)?.profit
                }
            };
            let r = constant_price_equilibrium(&f, *delta, *vstar, punish)?;
            Ok(Report::Json(serde_json::json!({
                "price": r.price,
                "rho": r.rho,
                "valid": r.valid,
                "violated": r.violated,
                "punishment": punish,
            })))
        }
        Bench::Nogap { dist, delta, vstar, partition, alpha } => {
            let f = parse_dist(dist)?;
            let cells: Vec<(f64, f64)> = match partition {
                Some(p) => serde_json::from_str(&read_json_arg(p)?)?,
                None => vec![f.support()],
            };
            json(&no_gap_folk_support(&f, *delta, &cells, *vstar, *alpha, &tolerances(c)?)?)
        }
    }
}

fn load_profile(arg: &str, cfg: &GameConfig) -> Result<StrategyProfile> {
    match arg.trim() {
        "equilibrium" => equilibrium_profile(&solve_robust(cfg)?, cfg),
        "commitment" => commitment_profile(&cfg.dist, cfg.delta),
        other => {
            let p: StrategyProfile = serde_json::from_str(&read_json_arg(other)?)?;
            p.validate(cfg.horizon)?;
            Ok(p)
        }
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number '{t}' in grid '{s}'")));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0 && b >= a) {
                return Err(invalid(format!("grid '{s}' needs start <= stop and a positive step")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| sig12(a + step * i as f64)).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(invalid(format!("grid '{s}' is neither start:stop:step nor a list"))),
    };
    if grid.is_empty() {
        return Err(invalid("empty grid"));
    }
    Ok(grid)
}

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn fmt_num(x: f64) -> String {
    format!("{}", sig12(x))
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(sig12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_string_sig(v: &Value) -> Result<String> {
    let mut v = v.clone();
    round_value(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}

fn emit(c: &Common, report: Report, stdout: &mut dyn Write) -> Result<()> {
    let text = match report {
        Report::Json(v) => to_string_sig(&v)? + "\n",
        Report::Csv(s) => s,
    };
    match &c.out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("robust-coase").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    const U02: &str = r#"{"kind":"uniform","lo":0,"hi":2}"#;

    #[test]
    fn significant_digits() {
        assert_eq!(sig12(0.1 + 0.2), 0.3);
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(-2.0e-20 / 3.0), -6.66666666667e-21);
        assert!(sig12(f64::NAN).is_nan());
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.05:0.95:0.05").unwrap();
        assert_eq!(g.len(), 19);
        assert_eq!(g[18], 0.95);
        assert_eq!(parse_grid("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        assert!(parse_grid("0.5:0.1:0.1").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn robust_two_periods() {
        let (code, out, _) = run(&["robust", "--dist", U02, "--delta", "0.5", "--horizon", "2"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        let close = |key: &str, want: &[f64]| {
            let got: Vec<f64> = v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-9, "{key}: {got:?}");
            }
        };
        close("prices", &[0.45, 0.3]);
        close("thresholds", &[1.2, 0.6]);
        assert!((v["profit"].as_f64().unwrap() - 0.225).abs() < 1e-9);
    }

    #[test]
    fn press_eval() {
        let (code, out, _) = run(&["press", "--dist", U02, "--eval", "0.7"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["points"][0]["cdf"].as_f64().unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn error_codes() {
        let (code, _, err) = run(&["robust", "--dist", "{not json", "--delta", "0.5"]);
        assert_eq!(code, 2);
        assert_eq!(err.lines().count(), 1);
        let (code, _, err) = run(&["solve", "--bogus"]);
        assert_eq!(code, 2);
        assert_eq!(err.lines().count(), 1);
        let (code, _, _) = run(&["robust", "--dist", U02, "--delta", "0.5", "--horizon", "2", "--tol-root", "-1"]);
        assert_eq!(code, 2);
        let (code, _, _) = run(&["frobnicate"]);
        assert_eq!(code, 2);
        // Without a gap the infinite game needs the no-gap mode.
        let (code, _, _) = run(&["robust", "--dist", U02, "--delta", "0.5"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        for cmd in ["press", "solve", "robust", "worst-case", "compare", "check", "benchmarks", "simulate"] {
            assert!(out.contains(cmd), "{cmd}");
        }
    }

    #[test]
    fn compare_csv_header() {
        let (code, out, _) = run(&["compare", "--dist", U02, "--delta-grid", "0.5:0.9:0.2", "--jobs", "2"]);
        assert_eq!(code, 0, "{out}");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "delta,baseline_profit,commitment_profit");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.5,"));
    }
}
