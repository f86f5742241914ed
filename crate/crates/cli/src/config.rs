//! Experiment configuration: a flat `key = value` file, overridden by flags.
//! Decibel quantities are converted to linear exactly once, here.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crbeam::model::{db_to_linear, read_channel_file, PU_BASE_ANGLES_DEG, SU_BASE_ANGLES_DEG};
use crbeam::{BarrierParams, ChannelMode, Method, PskOrder, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Power,
    Users,
    Modulation,
    Epsilon,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Power => "power",
            Axis::Users => "users",
            Axis::Modulation => "modulation",
            Axis::Epsilon => "epsilon",
        }
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "power" | "p" => Ok(Axis::Power),
            "users" | "k" => Ok(Axis::Users),
            "modulation" | "m" => Ok(Axis::Modulation),
            "epsilon" | "eps" => Ok(Axis::Epsilon),
            other => Err(format!("unknown sweep axis `{other}` (power|users|modulation|epsilon)")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive `start:stop:step` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Range {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}` in range `{s}`"));
        let r = match parts.as_slice() {
            [a] => {
                let v = num(a)?;
                Range { start: v, stop: v, step: 1.0 }
            }
            [a, b] => Range { start: num(a)?, stop: num(b)?, step: 1.0 },
            [a, b, c] => Range { start: num(a)?, stop: num(b)?, step: num(c)? },
            _ => return Err(format!("range `{s}` is not start:stop:step")),
        };
        if !(r.step > 0.0) || !(r.stop >= r.start) || !r.start.is_finite() || !r.stop.is_finite() {
            return Err(format!("range `{s}` is empty or has a nonpositive step"));
        }
        Ok(r)
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

pub const KEYS: &[&str] = &[
    "n",
    "k",
    "l",
    "m",
    "sigma2",
    "p_dbw",
    "eps_dbw",
    "su_angles",
    "pu_angles",
    "su_channels_file",
    "pu_channels_file",
    "jitter",
    "jitter_deg",
    "seed",
    "methods",
    "runs",
    "workers",
    "symbols_per_frame",
    "psi_bins",
    "received_runs",
    "ill_posed_fallback",
    "mu",
    "delta_t",
    "axis",
    "range",
    "out",
];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`, got `{line}`", i + 1));
            };
            let k = k.trim().to_ascii_lowercase();
            if !KEYS.contains(&k.as_str()) {
                return err(format!("line {}: unknown key `{k}`", i + 1));
            }
            raw.entries.insert(k, (v.trim().to_string(), Some(i + 1)));
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Flag override; wins over the file.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), None));
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.parse::<T>().map(Some).map_err(|_| {
            let at = line.map_or_else(|| "flag".to_string(), |l| format!("line {l}"));
            ConfigError(format!("{at}: invalid value `{v}` for `{key}`"))
        })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|t| t.trim())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<T>().map_err(|_| {
                    let at = line.map_or_else(|| "flag".to_string(), |l| format!("line {l}"));
                    ConfigError(format!("{at}: invalid list item `{t}` for `{key}`"))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Channel source: ULA directions or explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Channels {
    Directions { su: Vec<f64>, pu: Vec<f64>, jitter_deg: Option<f64> },
    Files { su: PathBuf, pu: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub order: PskOrder,
    pub sigma2: f64,
    pub p_dbw: f64,
    pub power: f64,
    pub eps_dbw: Vec<f64>,
    pub eps: Vec<f64>,
    pub channels: Channels,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub runs: usize,
    pub workers: Option<usize>,
    pub symbols_per_frame: usize,
    pub psi_bins: usize,
    pub received_runs: usize,
    pub ill_posed_fallback: bool,
    pub barrier: BarrierParams,
    pub axis: Option<Axis>,
    pub range: Option<Range>,
    /// `None` means "not given": `solve` then writes no CSV and the other
    /// commands use `./out`.
    pub out: Option<PathBuf>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Defaults: N=10, K=8, L=2, QPSK, σ²=0.1, P=5 dBW, ε=−2 dBW.
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let k: Option<usize> = raw.get("k")?;
        let l: Option<usize> = raw.get("l")?;
        let mut n: usize = raw.get("n")?.unwrap_or(10);
        let m: u32 = raw.get("m")?.unwrap_or(4);
        let order = PskOrder::new(m).map_err(|e| ConfigError(format!("m: {e}")))?;
        let sigma2: f64 = raw.get("sigma2")?.unwrap_or(0.1);
        let p_dbw: f64 = raw.get("p_dbw")?.unwrap_or(5.0);
        let jitter = match raw.entries.get("jitter") {
            None => false,
            Some((v, _)) => parse_bool(v).ok_or_else(|| ConfigError(format!("invalid value `{v}` for `jitter`")))?,
        };
        let jitter_deg: f64 = raw.get("jitter_deg")?.unwrap_or(crbeam::model::DIRECTION_JITTER_DEG);

        let (k, l, channels) = match raw.get::<PathBuf>("su_channels_file")? {
            Some(su) => {
                let pu: Option<PathBuf> = raw.get("pu_channels_file")?;
                let hs = read_channel_file::<f64>(&su).map_err(|e| ConfigError(format!("{}: {e}", su.display())))?;
                let gl = match &pu {
                    Some(p) => {
                        read_channel_file::<f64>(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
                    }
                    None => Vec::new(),
                };
                let file_n = hs.first().map_or(0, Vec::len);
                if k.is_some_and(|k| k != hs.len()) || l.is_some_and(|l| l != gl.len()) {
                    return err("k/l disagree with the channel files");
                }
                if raw.entries.contains_key("n") && n != file_n {
                    return err("n disagrees with the channel files");
                }
                n = file_n;
                (hs.len(), gl.len(), Channels::Files { su, pu })
            }
            None => {
                let k = k.unwrap_or(8);
                let l = l.unwrap_or(2);
                let su = match raw.list::<f64>("su_angles")? {
                    Some(a) => a,
                    None if k <= SU_BASE_ANGLES_DEG.len() => SU_BASE_ANGLES_DEG[..k].to_vec(),
                    None => return err(format!("k = {k} needs explicit su_angles (only 10 defaults)")),
                };
                let pu = match raw.list::<f64>("pu_angles")? {
                    Some(a) => a,
                    None if l <= PU_BASE_ANGLES_DEG.len() => PU_BASE_ANGLES_DEG[..l].to_vec(),
                    None => return err(format!("l = {l} needs explicit pu_angles (only 2 defaults)")),
                };
                if su.len() != k || pu.len() != l {
                    return err(format!("expected {k} SU and {l} PU angles, got {} and {}", su.len(), pu.len()));
                }
                let jitter_deg = jitter.then_some(jitter_deg);
                (k, l, Channels::Directions { su, pu, jitter_deg })
            }
        };

        let eps_dbw = match raw.list::<f64>("eps_dbw")? {
            None => vec![-2.0; l],
            Some(v) if v.len() == 1 => vec![v[0]; l],
            Some(v) if v.len() == l => v,
            Some(v) => return err(format!("eps_dbw has {} entries for {l} PUs", v.len())),
        };
        let methods = match raw.list::<Method>("methods")? {
            Some(v) if !v.is_empty() => v,
            Some(_) => return err("methods list is empty"),
            None => Method::ALL.to_vec(),
        };
        let workers: Option<usize> = raw.get("workers")?;
        if workers == Some(0) {
            return err("workers must be at least 1");
        }
        let ill_posed_fallback = match raw.entries.get("ill_posed_fallback") {
            None => true,
            Some((v, _)) => {
                parse_bool(v).ok_or_else(|| ConfigError(format!("invalid value `{v}` for `ill_posed_fallback`")))?
            }
        };
        let mut barrier = BarrierParams::default();
        if let Some(mu) = raw.get("mu")? {
            barrier.mu = mu;
        }
        if let Some(d) = raw.get("delta_t")? {
            barrier.delta_t = d;
        }
        barrier.validate().map_err(|e| ConfigError(e.to_string()))?;

        let cfg = Self {
            n,
            k,
            l,
            order,
            sigma2,
            p_dbw,
            power: db_to_linear(p_dbw),
            eps: eps_dbw.iter().map(|&e| db_to_linear(e)).collect(),
            eps_dbw,
            channels,
            seed: raw.get("seed")?.unwrap_or(1),
            methods,
            runs: raw.get("runs")?.unwrap_or(1000),
            workers,
            symbols_per_frame: raw.get("symbols_per_frame")?.unwrap_or(crbeam::montecarlo::DEFAULT_SYMBOLS_PER_FRAME),
            psi_bins: raw.get("psi_bins")?.unwrap_or(crbeam::montecarlo::DEFAULT_PSI_BINS),
            received_runs: raw.get("received_runs")?.unwrap_or(20),
            ill_posed_fallback,
            barrier,
            axis: raw.get("axis")?,
            range: raw.get("range")?,
            out: raw.get("out")?,
        };
        cfg.scenario().map_err(|e| ConfigError(format!("invalid scenario: {e}")))?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Base scenario (unjittered directions or file channels).
    pub fn scenario(&self) -> crbeam::Result<Scenario> {
        match &self.channels {
            Channels::Directions { su, pu, .. } => {
                Scenario::from_directions(self.n, su, pu, self.sigma2, self.power, self.eps.clone(), self.order)
            }
            Channels::Files { su, pu } => {
                let h = read_channel_file(su)?;
                let g = match pu {
                    Some(p) => read_channel_file(p)?,
                    None => Vec::new(),
                };
                Scenario::new(h, g, self.sigma2, self.power, self.eps.clone(), self.order)
            }
        }
    }

    pub fn mc_config(&self) -> crbeam::Result<crbeam::McConfig> {
        let mut mc = crbeam::McConfig::new(self.scenario()?, self.methods.clone(), self.runs, self.seed);
        if let Channels::Directions { su, pu, jitter_deg: Some(j) } = &self.channels {
            mc.channel_mode = ChannelMode::Redraw {
                su_angles: su.clone(),
                pu_angles: pu.clone(),
                jitter_deg: *j,
            };
        }
        mc.symbols_per_frame = self.symbols_per_frame;
        mc.psi_bins = self.psi_bins;
        mc.received_runs = self.received_runs;
        mc.workers = self.workers;
        mc.barrier = self.barrier;
        mc.ill_posed_fallback = self.ill_posed_fallback;
        Ok(mc)
    }

    /// Copy with one sweep coordinate applied.
    pub fn at(&self, axis: Axis, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        match axis {
            Axis::Power => {
                c.p_dbw = value;
                c.power = db_to_linear(value);
            }
            Axis::Epsilon => {
                c.eps_dbw = vec![value; c.l];
                c.eps = c.eps_dbw.iter().map(|&e| db_to_linear(e)).collect();
            }
            Axis::Modulation => {
                // grid is over log2 M
                let m = 2f64.powf(value).round() as u32;
                c.order = PskOrder::new(m).map_err(|e| ConfigError(format!("sweep point {value}: {e}")))?;
            }
            Axis::Users => {
                let k = value.round() as usize;
                let Channels::Directions { su, .. } = &mut c.channels else {
                    return err("a users sweep needs direction-based channels");
                };
                if k == 0 || k > SU_BASE_ANGLES_DEG.len().max(su.len()) {
                    return err(format!("users sweep point {k} outside 1..={}", su.len().max(10)));
                }
                *su = if k <= su.len() {
                    su[..k].to_vec()
                } else {
                    SU_BASE_ANGLES_DEG[..k].to_vec()
                };
                c.k = k;
            }
        }
        Ok(c)
    }
}
