//! Monte-Carlo harness: per-frame solves, noisy reception, PSK detection and
//! the aggregate metrics (worst-user SER, ψ histograms, normalised
//! interference ζ, timing).
//!
//! Runs are grouped into frames of `symbols_per_frame` channel uses that share
//! one channel realisation. Every run draws from its own ChaCha stream keyed
//! by `(seed, run)`, and every frame's channel from `(seed, frame)`, so the
//! deterministic part of the report does not depend on the worker count.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    build_embedding, channel_gain, detect_psk, embed_complex, psi_angle, superpose, ula_channel, BeamSolution,
    Method, RealEmbedding, Scenario, SymbolFrame,
};
use crate::solvers::{
    analytic_wsusep, approx_wsusep, conventional_maxmin, per_user_sep, wsusep_barrier, BarrierParams,
    ConventionalSolution,
};

/// Block size B: channel uses per downlink frame.
pub const DEFAULT_SYMBOLS_PER_FRAME: usize = 70;
pub const DEFAULT_PSI_BINS: usize = 72;
/// ζ above `1 + ZETA_TOL` counts as a violation.
pub const ZETA_TOL: f64 = 1e-6;
/// Reports with more excluded runs than this fraction are flagged invalid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

const CHANNEL_STREAM_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelMode {
    /// Use the scenario's channels for every run.
    Fixed,
    /// Redraw ULA channels once per frame, each angle jittered uniformly by
    /// up to `jitter_deg` around its base value.
    Redraw {
        su_angles: Vec<f64>,
        pu_angles: Vec<f64>,
        jitter_deg: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub runs: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub scenario: Scenario<f64>,
    pub symbols_per_frame: usize,
    pub channel_mode: ChannelMode,
    pub psi_bins: usize,
    /// Keep received samples for the first this many runs.
    pub received_runs: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    pub barrier: BarrierParams<f64>,
    /// When the exact design is ill-posed on a frame, transmit its
    /// feasibility-start vector instead of dropping the run.
    pub ill_posed_fallback: bool,
}

impl McConfig {
    pub fn new(scenario: Scenario<f64>, methods: Vec<Method>, runs: usize, seed: u64) -> Self {
        Self {
            runs,
            seed,
            methods,
            scenario,
            symbols_per_frame: DEFAULT_SYMBOLS_PER_FRAME,
            channel_mode: ChannelMode::Fixed,
            psi_bins: DEFAULT_PSI_BINS,
            received_runs: 0,
            workers: None,
            barrier: BarrierParams::default(),
            ill_posed_fallback: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::InvalidArgument("symbols_per_frame must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if self.psi_bins < 2 {
            return Err(Error::InvalidArgument("psi_bins must be at least 2".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        if let ChannelMode::Redraw { su_angles, pu_angles, jitter_deg } = &self.channel_mode {
            if su_angles.len() != self.scenario.num_sus() || pu_angles.len() != self.scenario.num_pus() {
                return Err(Error::Dimension("redraw angles do not match the scenario's user counts".into()));
            }
            if !(*jitter_deg >= 0.0) {
                return Err(Error::InvalidArgument("jitter must be nonnegative".into()));
            }
        }
        self.barrier.validate()
    }
}

/// `|g_lᵀx|²/ε_l`.
pub fn zeta(x: &[Complex<f64>], g: &[Complex<f64>], eps: f64) -> f64 {
    channel_gain(g, x).norm_sqr() / eps
}

/// ζ for beamformers `w` carrying `symbols`.
pub fn zeta_beamformers(w: &[Vec<Complex<f64>>], symbols: &[Complex<f64>], g: &[Complex<f64>], eps: f64) -> f64 {
    zeta(&superpose(w, symbols), g, eps)
}

/// Equal-width bins over `(−π, π]`; bin `k` is `(−π + k·w, −π + (k+1)·w]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiHistogram {
    pub counts: Vec<u64>,
}

impl PsiHistogram {
    pub fn new(bins: usize) -> Self {
        Self { counts: vec![0; bins] }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        std::f64::consts::TAU / self.bins() as f64
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let w = self.width();
        let lo = -std::f64::consts::PI + k as f64 * w;
        (lo, lo + w)
    }

    pub fn add(&mut self, psi: f64) {
        let n = self.bins();
        let pos = (psi + std::f64::consts::PI) / self.width();
        // right-closed bins: an exact edge belongs to the bin on its left
        let k = (pos.ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
        self.counts[k] += 1;
    }

    pub fn merge(&mut self, other: &PsiHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn psi_histogram(samples: &[f64], bins: usize) -> Result<PsiHistogram> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    let mut h = PsiHistogram::new(bins);
    for &s in samples {
        h.add(s);
    }
    Ok(h)
}

/// Deterministic per-method statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    pub runs: usize,
    /// Runs in which that run's analytically worst SU was detected wrongly.
    pub worst_errors: u64,
    /// Empirical worst-user SER: `worst_errors / runs`.
    pub wuser: f64,
    /// Binomial standard error of `wuser`.
    pub stderr: f64,
    /// `max_i` of the per-user empirical SER.
    pub max_user_ser: f64,
    pub user_errors: Vec<u64>,
    /// Per-user count of `|ψ| > θ`.
    pub psi_error: Vec<u64>,
    /// Mean over runs of the analytic worst-user SEP at the transmitted x.
    pub analytic_mean: f64,
    /// Mean of the ρ each solver reported.
    pub reported_mean: f64,
    /// Per PU: `(run, ζ_l)` for every effective run.
    pub zeta: Vec<Vec<(usize, f64)>>,
    pub violations: Vec<usize>,
    pub psi: PsiHistogram,
    pub failures: usize,
    /// Ill-posed frames served by the feasibility-start vector.
    pub fallbacks: usize,
}

impl MethodStats {
    pub fn violation_fraction(&self, pu: usize) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.violations[pu] as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceivedSample {
    pub method: String,
    pub run: usize,
    pub user: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub methods: Vec<MethodStats>,
    pub runs_requested: usize,
    pub runs_effective: usize,
    /// Runs dropped because some selected method failed on them.
    pub excluded: usize,
    /// False when `excluded` exceeds 1% of the requested runs.
    pub valid: bool,
    pub received: Vec<ReceivedSample>,
}

impl McStats {
    pub fn method(&self, m: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodTiming {
    pub method: String,
    pub solves: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
}

/// `stats` is a pure function of the configuration; `timing` is wall-clock.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub stats: McStats,
    pub timing: Vec<MethodTiming>,
}

/// Circular complex Gaussian with `E|n|² = sigma2`, by Box–Muller.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex<f64> {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    let r = (sigma2 / 2.0).sqrt() * (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    Complex::new(r * c, r * s)
}

/// RNG stream for run `run`: symbols first, then noise.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn channel_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CHANNEL_STREAM_BASE + frame as u64);
    rng
}

impl McConfig {
    /// Channel realisation used by frame `frame`.
    pub fn frame_scenario(&self, frame: usize) -> Result<Scenario<f64>> {
        frame_scenario(self, frame)
    }
}

fn frame_scenario(cfg: &McConfig, frame: usize) -> Result<Scenario<f64>> {
    match &cfg.channel_mode {
        ChannelMode::Fixed => Ok(cfg.scenario.clone()),
        ChannelMode::Redraw { su_angles, pu_angles, jitter_deg } => {
            let mut rng = channel_rng(cfg.seed, frame);
            let n = cfg.scenario.n_antennas;
            let mut draw = |a: f64| {
                let j = if *jitter_deg > 0.0 {
                    rng.random_range(-*jitter_deg..=*jitter_deg)
                } else {
                    0.0
                };
                ula_channel(a + j, n)
            };
            let h = su_angles.iter().map(|&a| draw(a)).collect();
            let g = pu_angles.iter().map(|&a| draw(a)).collect();
            let s = &cfg.scenario;
            Scenario::new(h, g, s.sigma2, s.power, s.eps.clone(), s.order)
        }
    }
}

struct MethodRun {
    errors: Vec<bool>,
    worst_error: bool,
    analytic: f64,
    reported: f64,
    zeta: Vec<f64>,
    psi: Vec<Option<f64>>,
    received: Vec<Complex<f64>>,
    seconds: Option<f64>,
    fallback: bool,
}

struct RunOut {
    run: usize,
    /// `None` when some method failed on this run.
    methods: Option<Vec<MethodRun>>,
    failed: Vec<bool>,
}

struct FrameOut {
    runs: Vec<RunOut>,
    conventional_seconds: Option<f64>,
}

fn solve_method(
    cfg: &McConfig,
    method: Method,
    scenario: &Scenario<f64>,
    frame: &SymbolFrame<f64>,
    emb: &RealEmbedding<f64>,
    conventional: Option<&ConventionalSolution<f64>>,
) -> Option<(BeamSolution<f64>, bool)> {
    let res = match method {
        Method::Conventional => return conventional.map(|c| (c.beam(frame, emb), false)),
        Method::Approx => approx_wsusep(emb, scenario),
        Method::Wsusep => match wsusep_barrier(emb, scenario, &cfg.barrier) {
            Err(Error::IllPosed { .. }) if cfg.ill_posed_fallback => {
                // the approximate design transmits exactly the feasibility-start vector
                return approx_wsusep(emb, scenario).ok().map(|sol| (sol, true));
            }
            r => r,
        },
    };
    match res {
        Ok(sol) if sol.stats.status == crate::model::SolveStatus::Optimal => Some((sol, false)),
        Ok(_) => {
            log::debug!("{method} hit its iteration budget");
            None
        }
        Err(e) => {
            log::debug!("{method} failed: {e}");
            None
        }
    }
}

fn simulate_frame(cfg: &McConfig, frame_idx: usize, shared_conv: Option<&ConventionalSolution<f64>>) -> FrameOut {
    let start = frame_idx * cfg.symbols_per_frame;
    let end = (start + cfg.symbols_per_frame).min(cfg.runs);
    let scenario = frame_scenario(cfg, frame_idx);
    let wants_conv = cfg.methods.contains(&Method::Conventional);

    let mut conventional_seconds = None;
    let local_conv = match (&scenario, wants_conv, &cfg.channel_mode) {
        (Ok(s), true, ChannelMode::Redraw { .. }) => {
            let t = Instant::now();
            let c = conventional_maxmin(s).ok();
            conventional_seconds = Some(t.elapsed().as_secs_f64());
            c
        }
        _ => None,
    };
    let conv = local_conv.as_ref().or(shared_conv);
    let constellation = cfg.scenario.constellation();
    let k = cfg.scenario.num_sus();

    let runs = (start..end)
        .map(|run| {
            let fail_all = || RunOut {
                run,
                methods: None,
                failed: vec![true; cfg.methods.len()],
            };
            let Ok(scenario) = &scenario else {
                return fail_all();
            };
            let mut rng = run_rng(cfg.seed, run);
            let frame = SymbolFrame::random(&constellation, k, &mut rng);
            let noise: Vec<Complex<f64>> = (0..k).map(|_| complex_gaussian(&mut rng, scenario.sigma2)).collect();
            let Ok(emb) = build_embedding(scenario, &frame) else {
                return fail_all();
            };

            let mut failed = vec![false; cfg.methods.len()];
            let mut outs = Vec::with_capacity(cfg.methods.len());
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let t = Instant::now();
                let Some((sol, fallback)) = solve_method(cfg, method, scenario, &frame, &emb, conv) else {
                    failed[mi] = true;
                    continue;
                };
                let seconds = (method != Method::Conventional).then(|| t.elapsed().as_secs_f64());
                let xbar = embed_complex(&sol.x);
                let seps = per_user_sep(&emb, &xbar);
                let worst = seps
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &p)| if p > seps[best] { i } else { best });
                let mut errors = Vec::with_capacity(k);
                let mut psi = Vec::with_capacity(k);
                let mut received = Vec::with_capacity(k);
                for i in 0..k {
                    let y = channel_gain(&scenario.su_channels[i], &sol.x) + noise[i];
                    let detected = detect_psk(y, &constellation);
                    errors.push(detected != Some(frame.indices[i]));
                    psi.push(psi_angle(y, frame.symbols[i]));
                    received.push(y);
                }
                let zeta: Vec<f64> = scenario
                    .pu_channels
                    .iter()
                    .zip(&scenario.eps)
                    .map(|(g, &e)| zeta(&sol.x, g, e))
                    .collect();
                outs.push(MethodRun {
                    worst_error: errors[worst],
                    errors,
                    analytic: analytic_wsusep(&emb, &xbar),
                    reported: sol.rho,
                    zeta,
                    psi,
                    received,
                    seconds,
                    fallback,
                });
            }
            RunOut {
                run,
                methods: failed.iter().all(|f| !f).then_some(outs),
                failed,
            }
        })
        .collect();
    FrameOut {
        runs,
        conventional_seconds,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn summarize_timing(method: Method, mut samples: Vec<f64>) -> MethodTiming {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    MethodTiming {
        method: method.to_string(),
        solves: n,
        mean_s: if n == 0 { 0.0 } else { samples.iter().sum::<f64>() / n as f64 },
        p50_s: percentile(&samples, 0.5),
        p95_s: percentile(&samples, 0.95),
    }
}

pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let pool = match cfg.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Solver(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    match &pool {
        Some(p) => p.install(|| run_mc_inner(cfg)),
        None => run_mc_inner(cfg),
    }
}

fn run_mc_inner(cfg: &McConfig) -> Result<McReport> {
    let frames = cfg.runs.div_ceil(cfg.symbols_per_frame);
    let wants_conv = cfg.methods.contains(&Method::Conventional);
    let mut conv_times = Vec::new();

    let shared_conv = if wants_conv && cfg.channel_mode == ChannelMode::Fixed {
        let t = Instant::now();
        let c = conventional_maxmin(&cfg.scenario)?;
        conv_times.push(t.elapsed().as_secs_f64());
        Some(c)
    } else {
        None
    };

    let outs: Vec<FrameOut> = (0..frames)
        .into_par_iter()
        .map(|f| simulate_frame(cfg, f, shared_conv.as_ref()))
        .collect();

    let k = cfg.scenario.num_sus();
    let l = cfg.scenario.num_pus();
    let theta = cfg.scenario.order.half_angle::<f64>();
    let nm = cfg.methods.len();

    let mut worst = vec![0u64; nm];
    let mut user_err = vec![vec![0u64; k]; nm];
    let mut psi_err = vec![vec![0u64; k]; nm];
    let mut analytic = vec![0f64; nm];
    let mut reported = vec![0f64; nm];
    let mut zetas = vec![vec![Vec::new(); l]; nm];
    let mut viol = vec![vec![0usize; l]; nm];
    let mut hists = vec![PsiHistogram::new(cfg.psi_bins); nm];
    let mut failures = vec![0usize; nm];
    let mut fallbacks = vec![0usize; nm];
    let mut times = vec![Vec::new(); nm];
    let mut received = Vec::new();
    let mut effective = 0usize;
    let mut excluded = 0usize;

    for fo in outs {
        if let Some(s) = fo.conventional_seconds {
            conv_times.push(s);
        }
        for ro in fo.runs {
            for (mi, &f) in ro.failed.iter().enumerate() {
                failures[mi] += usize::from(f);
            }
            let Some(ms) = ro.methods else {
                excluded += 1;
                continue;
            };
            effective += 1;
            for (mi, mr) in ms.into_iter().enumerate() {
                worst[mi] += u64::from(mr.worst_error);
                fallbacks[mi] += usize::from(mr.fallback);
                analytic[mi] += mr.analytic;
                reported[mi] += mr.reported;
                for i in 0..k {
                    user_err[mi][i] += u64::from(mr.errors[i]);
                    match mr.psi[i] {
                        Some(p) => {
                            hists[mi].add(p);
                            psi_err[mi][i] += u64::from(p.abs() > theta);
                        }
                        None => psi_err[mi][i] += 1,
                    }
                }
                for (pl, &z) in mr.zeta.iter().enumerate() {
                    zetas[mi][pl].push((ro.run, z));
                    viol[mi][pl] += usize::from(z > 1.0 + ZETA_TOL);
                }
                if let Some(s) = mr.seconds {
                    times[mi].push(s);
                }
                if ro.run < cfg.received_runs {
                    for (i, y) in mr.received.iter().enumerate() {
                        received.push(ReceivedSample {
                            method: cfg.methods[mi].to_string(),
                            run: ro.run,
                            user: i,
                            re: y.re,
                            im: y.im,
                        });
                    }
                }
            }
        }
    }

    let n = effective.max(1) as f64;
    let methods = (0..nm)
        .map(|mi| {
            let wuser = worst[mi] as f64 / n;
            let max_user = user_err[mi].iter().copied().max().unwrap_or(0) as f64 / n;
            MethodStats {
                method: cfg.methods[mi],
                runs: effective,
                worst_errors: worst[mi],
                wuser,
                stderr: (wuser * (1.0 - wuser) / n).sqrt(),
                max_user_ser: max_user,
                user_errors: user_err[mi].clone(),
                psi_error: psi_err[mi].clone(),
                analytic_mean: analytic[mi] / n,
                reported_mean: reported[mi] / n,
                zeta: std::mem::take(&mut zetas[mi]),
                violations: viol[mi].clone(),
                psi: hists[mi].clone(),
                failures: failures[mi],
                fallbacks: fallbacks[mi],
            }
        })
        .collect();

    let timing = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let samples = if m == Method::Conventional {
                conv_times.clone()
            } else {
                std::mem::take(&mut times[mi])
            };
            summarize_timing(m, samples)
        })
        .collect();

    Ok(McReport {
        stats: McStats {
            methods,
            runs_requested: cfg.runs,
            runs_effective: effective,
            excluded,
            valid: (excluded as f64) <= MAX_EXCLUDED_FRACTION * cfg.runs as f64,
            received,
        },
        timing,
    })
}

// ---------------------------------------------------------------------------
// CSV output

/// Sweep coordinates attached to each `wuser.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvContext {
    pub p_dbw: f64,
    pub eps_dbw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WuserRow {
    pub method: String,
    #[serde(rename = "P_dBW")]
    pub p_dbw: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: u32,
    pub eps_dbw: f64,
    pub runs: usize,
    pub wuser: f64,
    pub stderr: f64,
    pub analytic_mean: f64,
    pub max_user_ser: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaRow {
    pub method: String,
    pub pu_index: usize,
    pub run: usize,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiRow {
    pub method: String,
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

impl McReport {
    pub fn wuser_rows(&self, scenario: &Scenario<f64>, ctx: CsvContext) -> Vec<WuserRow> {
        self.stats
            .methods
            .iter()
            .map(|s| WuserRow {
                method: s.method.to_string(),
                p_dbw: ctx.p_dbw,
                k: scenario.num_sus(),
                m: scenario.order.get(),
                eps_dbw: ctx.eps_dbw,
                runs: s.runs,
                wuser: s.wuser,
                stderr: s.stderr,
                analytic_mean: s.analytic_mean,
                max_user_ser: s.max_user_ser,
            })
            .collect()
    }

    pub fn zeta_rows(&self) -> Vec<ZetaRow> {
        let mut out = Vec::new();
        for s in &self.stats.methods {
            for (pl, samples) in s.zeta.iter().enumerate() {
                out.extend(samples.iter().map(|&(run, zeta)| ZetaRow {
                    method: s.method.to_string(),
                    pu_index: pl,
                    run,
                    zeta,
                }));
            }
        }
        out
    }

    pub fn psi_rows(&self) -> Vec<PsiRow> {
        let mut out = Vec::new();
        for s in &self.stats.methods {
            for (k, &count) in s.psi.counts.iter().enumerate() {
                let (bin_left, bin_right) = s.psi.edges(k);
                out.push(PsiRow {
                    method: s.method.to_string(),
                    bin_left,
                    bin_right,
                    count,
                });
            }
        }
        out
    }
}

/// Writes `rows` as CSV with a header line.
pub fn write_csv<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `wuser.csv`, `zeta.csv`, `psi.csv` and `timing.csv` into `dir`.
pub fn write_report(dir: &std::path::Path, report: &McReport, scenario: &Scenario<f64>, ctx: CsvContext) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let open = |name: &str| std::fs::File::create(dir.join(name));
    write_csv(open("wuser.csv")?, &report.wuser_rows(scenario, ctx))?;
    write_csv(open("zeta.csv")?, &report.zeta_rows())?;
    write_csv(open("psi.csv")?, &report.psi_rows())?;
    write_csv(open("timing.csv")?, &report.timing)?;
    Ok(())
}
