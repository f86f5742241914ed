mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use crbeam::model::{build_embedding, channel_gain, embed_complex, SymbolFrame};
use crbeam::montecarlo::{run_mc, run_rng, write_csv, write_report, CsvContext, McReport};
use crbeam::solvers::{approx_wsusep, conventional_maxmin, feasibility_start, wsusep_barrier, ConventionalSolution};
use crbeam::specfun::{alpha_star, Correlation};
use crbeam::{Error, Method, PskOrder};
use serde::Serialize;

use config::{Axis, ExperimentConfig, Range, RawConfig};

#[derive(Parser)]
#[command(name = "crbeam", version, about = "Constructive-interference beamforming for underlay cognitive radio")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convexity thresholds α*(r̄) for every supported PSK order.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one channel/frame realisation with every selected method.
    Solve(Common),
    /// Monte-Carlo WUSER over a grid of one parameter.
    Sweep(Common),
    /// Received samples, ψ histogram and ζ samples at one operating point.
    Hist(Common),
    /// Monte-Carlo evaluation at one operating point.
    Mc(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated: conventional, wsusep, approx.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    axis: Option<String>,
    /// start:stop:step, inclusive. The modulation axis is in log2 M.
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Config(String),
    Infeasible(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Solver(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Infeasible(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Dimension(_) | Error::Io(_) => Failure::Config(e.to_string()),
            Error::Infeasible(_) | Error::IllPosed { .. } => Failure::Infeasible(e.to_string()),
            Error::Unbounded(_) | Error::Solver(_) => Failure::Solver(e.to_string()),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut raw = match &common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    if let Some(s) = common.seed {
        raw.set("seed", s);
    }
    if let Some(r) = common.runs {
        raw.set("runs", r);
    }
    if let Some(m) = &common.methods {
        raw.set("methods", m);
    }
    if let Some(o) = &common.out {
        raw.set("out", o.display());
    }
    if let Some(a) = &common.axis {
        raw.set("axis", a);
    }
    if let Some(r) = &common.range {
        raw.set("range", r);
    }
    if let Some(w) = common.workers {
        raw.set("workers", w);
    }
    Ok(ExperimentConfig::from_raw(&raw)?)
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

/// Empty tables still get their header line.
fn csv_file<R: Serialize + Default>(path: &Path, rows: &[R]) -> Result<(), Failure> {
    let f = std::fs::File::create(path).map_err(|e| io_failure(path, e))?;
    if !rows.is_empty() {
        return write_csv(f, rows).map_err(|e| io_failure(path, e));
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, &[R::default()]).map_err(|e| io_failure(path, e))?;
    let end = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
    std::io::Write::write_all(&mut { f }, &buf[..end]).map_err(|e| io_failure(path, e))
}

#[derive(Serialize, Default)]
struct Table1Row {
    #[serde(rename = "M")]
    m: u32,
    rbar: f64,
    alpha_star: f64,
    sep_bound: f64,
}

fn table1_rows() -> Result<Vec<Table1Row>, Failure> {
    PskOrder::SUPPORTED
        .iter()
        .map(|&m| {
            let order = PskOrder::new(m)?;
            let rbar: f64 = order.noise_correlation();
            let a = alpha_star(Correlation::new(rbar)?)?;
            Ok(Table1Row {
                m,
                rbar,
                alpha_star: a.alpha_star,
                sep_bound: a.sep_bound,
            })
        })
        .collect()
}

fn cmd_table1(out: Option<PathBuf>) -> Result<(), Failure> {
    let rows = table1_rows()?;
    match out {
        Some(dir) => {
            create_out(&dir)?;
            csv_file(&dir.join("table1.csv"), &rows)
        }
        None => write_csv(std::io::stdout().lock(), &rows).map_err(|e| Failure::Config(e.to_string())),
    }
}

#[derive(Serialize, Default)]
struct SolveRow {
    method: String,
    rho: f64,
    upsilon: f64,
    gamma: f64,
    power_slack: f64,
    min_interference_slack: f64,
    min_margin: f64,
}

fn cmd_solve(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let mc = cfg.mc_config()?;
    let scenario = mc.frame_scenario(0)?;
    let constellation = scenario.constellation();
    let mut rng = run_rng(cfg.seed, 0);
    let frame = SymbolFrame::random(&constellation, scenario.num_sus(), &mut rng);
    let emb = build_embedding(&scenario, &frame)?;

    let indices: Vec<String> = frame.indices.iter().map(|i| i.to_string()).collect();
    println!("symbols: {}", indices.join(" "));
    if let Ok(fs) = feasibility_start(&emb, &scenario) {
        let thr: f64 = emb.sigma_tilde * alpha_star(Correlation::new(emb.rbar)?)?.alpha_star;
        println!("feasibility start: z* = {:.6e}, convexity threshold = {thr:.6e}", fs.z_star);
    }

    let mut rows = Vec::new();
    let mut worst: Option<Failure> = None;
    let mut conv: Option<ConventionalSolution<f64>> = None;
    for &method in &cfg.methods {
        let t = Instant::now();
        let res = match method {
            Method::Conventional => conventional_maxmin(&scenario).map(|c| {
                let b = c.beam(&frame, &emb);
                conv = Some(c);
                b
            }),
            Method::Wsusep => wsusep_barrier(&emb, &scenario, &cfg.barrier),
            Method::Approx => approx_wsusep(&emb, &scenario),
        };
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(sol) => {
                let gamma = if method == Method::Conventional {
                    conv.as_ref().map_or(f64::NAN, |c| c.gamma)
                } else {
                    f64::NAN
                };
                let power_slack = scenario.power - sol.transmit_power();
                let min_int = scenario
                    .pu_channels
                    .iter()
                    .zip(&scenario.eps)
                    .map(|(g, e)| e - channel_gain(g, &sol.x).norm_sqr())
                    .fold(f64::INFINITY, f64::min);
                let min_margin = emb.margins(&embed_complex(&sol.x)).into_iter().fold(f64::INFINITY, f64::min);
                println!(
                    "{method:>12}: rho = {:.6e}  upsilon = {:.6}  gamma = {gamma:.6}  power slack = {power_slack:.3e}  \
                     interference slack = {min_int:.3e}  min margin = {min_margin:.6e}",
                    sol.rho, sol.upsilon
                );
                eprintln!("{method:>12}: {:.3} ms, {} iterations", secs * 1e3, sol.stats.iterations);
                rows.push(SolveRow {
                    method: method.to_string(),
                    rho: sol.rho,
                    upsilon: sol.upsilon,
                    gamma,
                    power_slack,
                    min_interference_slack: min_int,
                    min_margin,
                });
            }
            Err(e) => {
                eprintln!("{method}: {e}");
                let f = Failure::from(e);
                if worst.as_ref().is_none_or(|w| f.code() > w.code()) {
                    worst = Some(f);
                }
            }
        }
    }
    if let Some(dir) = &cfg.out {
        create_out(dir)?;
        csv_file(&dir.join("solve.csv"), &rows)?;
    }
    match worst {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn ctx(cfg: &ExperimentConfig) -> CsvContext {
    CsvContext {
        p_dbw: cfg.p_dbw,
        eps_dbw: cfg.eps_dbw.first().copied().unwrap_or(f64::NAN),
    }
}

fn print_summary(report: &McReport) {
    let s = &report.stats;
    println!(
        "runs: {} effective, {} excluded{}",
        s.runs_effective,
        s.excluded,
        if s.valid { "" } else { " (report flagged invalid: exclusions exceed 1%)" }
    );
    for m in &s.methods {
        let viol: Vec<String> = (0..m.violations.len())
            .map(|l| format!("{:.4}", m.violation_fraction(l)))
            .collect();
        println!(
            "{:>12}: wuser = {:.4e} ± {:.1e}  analytic = {:.4e}  zeta violations = [{}]  fallbacks = {}",
            m.method.to_string(),
            m.wuser,
            m.stderr,
            m.analytic_mean,
            viol.join(", "),
            m.fallbacks
        );
    }
    for t in &report.timing {
        eprintln!("{:>12}: mean {:.3} ms over {} solves", t.method, t.mean_s * 1e3, t.solves);
    }
}

fn run_point(cfg: &ExperimentConfig) -> Result<McReport, Failure> {
    let mc = cfg.mc_config()?;
    Ok(run_mc(&mc)?)
}

fn cmd_mc(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let report = run_point(cfg)?;
    let out = cfg.out_dir();
    write_report(&out, &report, &cfg.scenario()?, ctx(cfg)).map_err(|e| io_failure(&out, e))?;
    print_summary(&report);
    Ok(())
}

#[derive(Serialize, Default)]
struct ReceivedRow<'a> {
    method: &'a str,
    run: usize,
    user: usize,
    re: f64,
    im: f64,
}

fn cmd_hist(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let report = run_point(cfg)?;
    let out = cfg.out_dir();
    write_report(&out, &report, &cfg.scenario()?, ctx(cfg)).map_err(|e| io_failure(&out, e))?;
    let rows: Vec<ReceivedRow> = report
        .stats
        .received
        .iter()
        .map(|r| ReceivedRow {
            method: &r.method,
            run: r.run,
            user: r.user,
            re: r.re,
            im: r.im,
        })
        .collect();
    csv_file(&out.join("received.csv"), &rows)?;
    print_summary(&report);
    Ok(())
}

#[derive(Serialize, Default)]
struct SweepRow {
    axis: &'static str,
    value: f64,
    method: String,
    #[serde(rename = "P_dBW")]
    p_dbw: f64,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: u32,
    eps_dbw: f64,
    runs: usize,
    wuser: f64,
    stderr: f64,
    analytic_mean: f64,
    max_user_ser: f64,
}

#[derive(Serialize, Default)]
struct SweepTimingRow {
    axis: &'static str,
    value: f64,
    method: String,
    solves: usize,
    mean_s: f64,
    p50_s: f64,
    p95_s: f64,
}

#[derive(Serialize, Default)]
struct SweepFailureRow {
    axis: &'static str,
    value: f64,
    error: String,
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let axis: Axis = cfg
        .axis
        .ok_or_else(|| Failure::Config("sweep needs an axis (--axis power|users|modulation|epsilon)".into()))?;
    let range: Range = cfg.range.ok_or_else(|| Failure::Config("sweep needs --range start:stop:step".into()))?;
    // validate every grid point before spending time on any of them
    let points = range
        .values()
        .into_iter()
        .map(|v| cfg.at(axis, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let out = cfg.out_dir();
    create_out(&out)?;

    let (mut rows, mut timing, mut failures) = (Vec::new(), Vec::new(), Vec::new());
    for (value, point) in &points {
        log::info!("sweep {axis} = {value}");
        let report = match run_point(point) {
            Ok(r) => r,
            Err(f) => {
                eprintln!("{axis} = {value}: {}", f.message());
                failures.push(SweepFailureRow {
                    axis: axis.as_str(),
                    value: *value,
                    error: f.message().to_string(),
                });
                continue;
            }
        };
        let scenario = point.scenario()?;
        for w in report.wuser_rows(&scenario, ctx(point)) {
            println!("{axis} = {value}: {} wuser = {:.4e} ± {:.1e}", w.method, w.wuser, w.stderr);
            rows.push(SweepRow {
                axis: axis.as_str(),
                value: *value,
                method: w.method,
                p_dbw: w.p_dbw,
                k: w.k,
                m: w.m,
                eps_dbw: w.eps_dbw,
                runs: w.runs,
                wuser: w.wuser,
                stderr: w.stderr,
                analytic_mean: w.analytic_mean,
                max_user_ser: w.max_user_ser,
            });
        }
        for t in report.timing {
            timing.push(SweepTimingRow {
                axis: axis.as_str(),
                value: *value,
                method: t.method,
                solves: t.solves,
                mean_s: t.mean_s,
                p50_s: t.p50_s,
                p95_s: t.p95_s,
            });
        }
    }
    csv_file(&out.join("sweep.csv"), &rows)?;
    csv_file(&out.join("sweep_timing.csv"), &timing)?;
    csv_file(&out.join("sweep_failures.csv"), &failures)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CRBEAM_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Table1 { out } => cmd_table1(out),
        Cmd::Solve(c) => load(&c).and_then(|cfg| cmd_solve(&cfg)),
        Cmd::Sweep(c) => load(&c).and_then(|cfg| cmd_sweep(&cfg)),
        Cmd::Hist(c) => load(&c).and_then(|cfg| cmd_hist(&cfg)),
        Cmd::Mc(c) => load(&c).and_then(|cfg| cmd_mc(&cfg)),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
