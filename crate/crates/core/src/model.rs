//! Scenario data, PSK geometry, ULA channels and the real-valued embedding
//! that turns the complex beamforming problems into real vector programs.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::scalar::Real;

/// Base SU directions in degrees (ten users).
pub const SU_BASE_ANGLES_DEG: [f64; 10] = [3.0, 35.0, 10.0, 39.0, 17.0, 74.0, 24.0, 86.0, 30.0, 80.0];
/// Base PU directions in degrees.
pub const PU_BASE_ANGLES_DEG: [f64; 2] = [50.0, 57.0];
/// Half-width of the uniform direction jitter, degrees.
pub const DIRECTION_JITTER_DEG: f64 = 1.0;

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// PSK constellation order; `M ≥ 4` and a power of two up to 64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PskOrder(u32);

impl PskOrder {
    pub const SUPPORTED: [u32; 5] = [4, 8, 16, 32, 64];

    pub fn new(m: u32) -> Result<Self> {
        if Self::SUPPORTED.contains(&m) {
            Ok(Self(m))
        } else {
            Err(Error::InvalidArgument(format!(
                "PSK order must be one of {:?}, got {m}",
                Self::SUPPORTED
            )))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Decision half-angle `θ = π/M`.
    pub fn half_angle<T: Real>(self) -> T {
        T::PI() / T::from_u32(self.0).expect("small integer")
    }

    /// Correlation `r̄ = −cos 2θ` of the paired transformed noise terms.
    pub fn noise_correlation<T: Real>(self) -> T {
        let r = -(T::lit(2.0) * self.half_angle::<T>()).cos();
        // cos(π/2) is not exactly zero in floating point.
        if r.abs() < T::lit(8.0) * T::epsilon() {
            T::zero()
        } else {
            r
        }
    }
}

impl fmt::Display for PskOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unit-magnitude M-PSK points `exp(j2πk/M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    pub order: PskOrder,
    pub theta: T,
    pub points: Vec<Complex<T>>,
}

impl<T: Real> Constellation<T> {
    pub fn new(order: PskOrder) -> Self {
        let m = order.get() as usize;
        let step = T::TAU() / T::from_usize_lossy(m);
        let points = (0..m)
            .map(|k| Complex::from_polar(T::one(), step * T::from_usize_lossy(k)))
            .collect();
        Self {
            order,
            theta: order.half_angle(),
            points,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One PSK symbol per SU for a single channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex<T>>,
}

impl<T: Real> SymbolFrame<T> {
    pub fn new(constellation: &Constellation<T>, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&k| k >= constellation.len()) {
            return Err(Error::InvalidArgument(format!(
                "symbol index {bad} outside constellation of size {}",
                constellation.len()
            )));
        }
        let symbols = indices.iter().map(|&k| constellation.points[k]).collect();
        Ok(Self { indices, symbols })
    }

    pub fn random<R: Rng + ?Sized>(constellation: &Constellation<T>, users: usize, rng: &mut R) -> Self {
        let m = constellation.len();
        let indices: Vec<usize> = (0..users).map(|_| rng.random_range(0..m)).collect();
        let symbols = indices.iter().map(|&k| constellation.points[k]).collect();
        Self { indices, symbols }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Downlink scenario: SBS antennas, SU/PU channels and budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub n_antennas: usize,
    /// `h_i`, one per SU.
    pub su_channels: Vec<Vec<Complex<T>>>,
    /// `g_l`, one per PU.
    pub pu_channels: Vec<Vec<Complex<T>>>,
    /// Noise variance σ².
    pub sigma2: T,
    /// Instantaneous transmit power budget P (linear).
    pub power: T,
    /// Interference thresholds ε_l (linear), one per PU.
    pub eps: Vec<T>,
    pub order: PskOrder,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        su_channels: Vec<Vec<Complex<T>>>,
        pu_channels: Vec<Vec<Complex<T>>>,
        sigma2: T,
        power: T,
        eps: Vec<T>,
        order: PskOrder,
    ) -> Result<Self> {
        let n = su_channels.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one SU and one antenna".into()));
        }
        for (i, h) in su_channels.iter().chain(pu_channels.iter()).enumerate() {
            if h.len() != n {
                return Err(Error::Dimension(format!(
                    "channel {i} has length {}, expected {n}",
                    h.len()
                )));
            }
            if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("channel {i} has non-finite entries")));
            }
        }
        if eps.len() != pu_channels.len() {
            return Err(Error::Dimension(format!(
                "{} interference thresholds for {} PUs",
                eps.len(),
                pu_channels.len()
            )));
        }
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
        }
        if !(power > T::zero()) || !power.is_finite() {
            return Err(Error::InvalidArgument(format!("power budget must be positive, got {power}")));
        }
        if let Some(e) = eps.iter().find(|e| !(**e >= T::zero()) || !e.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "interference thresholds must be finite and nonnegative, got {e}"
            )));
        }
        Ok(Self {
            n_antennas: n,
            su_channels,
            pu_channels,
            sigma2,
            power,
            eps,
            order,
        })
    }

    /// ULA scenario from direction angles in degrees.
    pub fn from_directions(
        n_antennas: usize,
        su_angles_deg: &[f64],
        pu_angles_deg: &[f64],
        sigma2: T,
        power: T,
        eps: Vec<T>,
        order: PskOrder,
    ) -> Result<Self> {
        let h = su_angles_deg.iter().map(|&a| ula_channel(a, n_antennas)).collect();
        let g = pu_angles_deg.iter().map(|&a| ula_channel(a, n_antennas)).collect();
        Self::new(h, g, sigma2, power, eps, order)
    }

    #[inline]
    pub fn num_sus(&self) -> usize {
        self.su_channels.len()
    }

    #[inline]
    pub fn num_pus(&self) -> usize {
        self.pu_channels.len()
    }

    pub fn constellation(&self) -> Constellation<T> {
        Constellation::new(self.order)
    }

    /// Same scenario with a different power budget.
    pub fn with_power(&self, power: T) -> Self {
        Self {
            power,
            ..self.clone()
        }
    }
}

/// `hᵀx` (plain transpose, no conjugation).
pub fn channel_gain<T: Real>(h: &[Complex<T>], x: &[Complex<T>]) -> Complex<T> {
    h.iter()
        .zip(x)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
}

/// ULA steering vector, element `n` = `exp(jπ·n·sin ω)` for `n = 0..N`.
pub fn ula_channel<T: Real>(angle_deg: f64, n: usize) -> Vec<Complex<T>> {
    let s = angle_deg.to_radians().sin();
    (0..n)
        .map(|k| {
            let phase = std::f64::consts::PI * k as f64 * s;
            Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
        })
        .collect()
}

/// SU and PU direction angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Directions {
    pub su: Vec<f64>,
    pub pu: Vec<f64>,
}

/// Base directions plus Uniform[−1°, 1°] jitter drawn from `seed`; `None`
/// returns the base angles unchanged.
pub fn default_directions(seed: Option<u64>) -> Directions {
    match seed {
        None => Directions {
            su: SU_BASE_ANGLES_DEG.to_vec(),
            pu: PU_BASE_ANGLES_DEG.to_vec(),
        },
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            jittered_directions(&mut rng)
        }
    }
}

pub(crate) fn jittered_directions<R: Rng + ?Sized>(rng: &mut R) -> Directions {
    let mut jitter = |base: f64| base + rng.random_range(-DIRECTION_JITTER_DEG..=DIRECTION_JITTER_DEG);
    let su = SU_BASE_ANGLES_DEG.iter().map(|&a| jitter(a)).collect();
    let pu = PU_BASE_ANGLES_DEG.iter().map(|&a| jitter(a)).collect();
    Directions { su, pu }
}

/// `x̄ = [Re x; Im x]`.
pub fn embed_complex<T: Real>(x: &[Complex<T>]) -> Vec<T> {
    x.iter().map(|c| c.re).chain(x.iter().map(|c| c.im)).collect()
}

/// Inverse of [`embed_complex`].
pub fn unembed<T: Real>(xbar: &[T]) -> Vec<Complex<T>> {
    let n = xbar.len() / 2;
    (0..n).map(|k| Complex::new(xbar[k], xbar[n + k])).collect()
}

/// Real-valued form of one symbol frame's constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEmbedding<T> {
    /// `t_1 … t_2K`, each of length 2N; user `i` owns `t[2i]` and `t[2i+1]`.
    pub t: Vec<Vec<T>>,
    /// `B_l`, 2×2N, with `‖B_l x̄‖ = |g_lᵀx|`.
    pub b: Vec<Mat<T>>,
    /// `σ_ñ = σ/(√2·cos θ)`.
    pub sigma_tilde: T,
    /// `r̄ = −cos 2θ`.
    pub rbar: T,
    /// `Π = [[0, −I], [I, 0]]`, 2N×2N.
    pub pi: Mat<T>,
    /// `h̄_i = [Im(b_i* h_i); Re(b_i* h_i)]`.
    pub hbar: Vec<Vec<T>>,
    pub theta: T,
    /// Noise standard deviation σ.
    pub sigma: T,
    /// Symbols `b_i` the embedding was built for.
    pub symbols: Vec<Complex<T>>,
}

impl<T: Real> RealEmbedding<T> {
    #[inline]
    pub fn num_users(&self) -> usize {
        self.hbar.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.pi.rows()
    }

    /// `t_jᵀx̄` for all `j`.
    pub fn margins(&self, xbar: &[T]) -> Vec<T> {
        self.t.iter().map(|t| dot(t, xbar)).collect()
    }
}

fn selection_matrix<T: Real>(n: usize) -> Mat<T> {
    let mut pi = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        pi[(k, n + k)] = -T::one();
        pi[(n + k, k)] = T::one();
    }
    pi
}

/// Builds the real embedding of `scenario` for the symbols in `frame`.
pub fn build_embedding<T: Real>(scenario: &Scenario<T>, frame: &SymbolFrame<T>) -> Result<RealEmbedding<T>> {
    if frame.len() != scenario.num_sus() {
        return Err(Error::Dimension(format!(
            "frame has {} symbols for {} SUs",
            frame.len(),
            scenario.num_sus()
        )));
    }
    let n = scenario.n_antennas;
    let theta: T = scenario.order.half_angle();
    let tan = theta.tan();
    let sigma = scenario.sigma2.sqrt();

    let mut hbar = Vec::with_capacity(frame.len());
    let mut t = Vec::with_capacity(2 * frame.len());
    for (h, b) in scenario.su_channels.iter().zip(&frame.symbols) {
        let c: Vec<Complex<T>> = h.iter().map(|hk| b.conj() * hk).collect();
        let hb: Vec<T> = c.iter().map(|z| z.im).chain(c.iter().map(|z| z.re)).collect();
        // Πᵀ h̄ = [Re c; −Im c]
        let pt: Vec<T> = c.iter().map(|z| z.re).chain(c.iter().map(|z| -z.im)).collect();
        t.push(hb.iter().zip(&pt).map(|(&a, &p)| -a + tan * p).collect());
        t.push(hb.iter().zip(&pt).map(|(&a, &p)| a + tan * p).collect());
        hbar.push(hb);
    }

    let b = scenario
        .pu_channels
        .iter()
        .map(|g| {
            let mut m = Mat::zeros(2, 2 * n);
            for k in 0..n {
                m[(0, k)] = g[k].re;
                m[(0, n + k)] = -g[k].im;
                m[(1, k)] = g[k].im;
                m[(1, n + k)] = g[k].re;
            }
            m
        })
        .collect();

    Ok(RealEmbedding {
        t,
        b,
        sigma_tilde: sigma / (T::SQRT_2() * theta.cos()),
        rbar: scenario.order.noise_correlation(),
        pi: selection_matrix(n),
        hbar,
        theta,
        sigma,
        symbols: frame.symbols.clone(),
    })
}

/// Paired transformed noise `(ñ_{2i−1}, ñ_{2i})` for symbol `b` and noise `n`.
pub fn transformed_noise<T: Real>(b: Complex<T>, n: Complex<T>, theta: T) -> (T, T) {
    let z = b.conj() * n;
    let tan = theta.tan();
    (z.im - z.re * tan, -z.im - z.re * tan)
}

/// Angle `ψ = arg(y·b*)` in `(−π, π]`; `None` when `y = 0`.
pub fn psi_angle<T: Real>(y: Complex<T>, b: Complex<T>) -> Option<T> {
    if y.re == T::zero() && y.im == T::zero() {
        return None;
    }
    let z = y * b.conj();
    let a = z.im.atan2(z.re);
    Some(if a <= -T::PI() { T::PI() } else { a })
}

/// Nearest-angle M-PSK detector; ties go to the lower index. `None` for `y = 0`.
pub fn detect_psk<T: Real>(y: Complex<T>, constellation: &Constellation<T>) -> Option<usize> {
    if y.re == T::zero() && y.im == T::zero() {
        return None;
    }
    let mut best = 0usize;
    let mut best_dist = T::infinity();
    for (k, p) in constellation.points.iter().enumerate() {
        let d = (y * p.conj()).arg().abs();
        if d < best_dist {
            best = k;
            best_dist = d;
        }
    }
    Some(best)
}

/// `w_i = x·b_i*/K`, so that `Σ w_i b_i = x` for unit-modulus symbols.
pub fn beamformers_from_x<T: Real>(x: &[Complex<T>], symbols: &[Complex<T>]) -> Vec<Vec<Complex<T>>> {
    let k = T::from_usize_lossy(symbols.len());
    symbols
        .iter()
        .map(|b| x.iter().map(|xn| xn * b.conj() / k).collect())
        .collect()
}

/// `Σ_i w_i b_i`.
pub fn superpose<T: Real>(w: &[Vec<Complex<T>>], symbols: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = w.first().map_or(0, Vec::len);
    let mut x = vec![Complex::new(T::zero(), T::zero()); n];
    for (wi, b) in w.iter().zip(symbols) {
        for (xn, wn) in x.iter_mut().zip(wi) {
            *xn = *xn + wn * b;
        }
    }
    x
}

/// Beamformer design that produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Conventional,
    Wsusep,
    Approx,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Conventional, Method::Wsusep, Method::Approx];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Wsusep => "wsusep",
            Method::Approx => "approx",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conventional" | "conv" => Ok(Method::Conventional),
            "wsusep" | "barrier" => Ok(Method::Wsusep),
            "approx" | "approxi" => Ok(Method::Approx),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Newton steps (barrier solvers) or bisection steps (conventional).
    pub iterations: usize,
    pub seconds: f64,
    pub status: SolveStatus,
}

/// Transmit vector and per-user beamformers for one symbol frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution<T> {
    pub x: Vec<Complex<T>>,
    pub w: Vec<Vec<Complex<T>>>,
    /// Reported worst-user symbol error probability.
    pub rho: T,
    /// Noise margin Υ (NaN for the conventional design, which has none).
    pub upsilon: T,
    pub method: Method,
    pub stats: SolveStats,
}

impl<T: Real> BeamSolution<T> {
    /// `‖x‖²`.
    pub fn transmit_power(&self) -> T {
        self.x.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|g_lᵀx|²` per PU.
    pub fn interference(&self, scenario: &Scenario<T>) -> Vec<T> {
        scenario
            .pu_channels
            .iter()
            .map(|g| channel_gain(g, &self.x).norm_sqr())
            .collect()
    }
}

/// Parses channels from CSV: one row per user, `re,im` interleaved per antenna.
pub fn read_channel_csv<T: Real, R: Read>(reader: R) -> Result<Vec<Vec<Complex<T>>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "channel row {} has an odd number of fields ({})",
                line + 1,
                rec.len()
            )));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("channel row {}: '{f}': {e}", line + 1)))
            })
            .collect::<Result<_>>()?;
        out.push(vals.chunks(2).map(|p| Complex::new(T::lit(p[0]), T::lit(p[1]))).collect());
    }
    Ok(out)
}

pub fn read_channel_file<T: Real>(path: &Path) -> Result<Vec<Vec<Complex<T>>>> {
    let f = std::fs::File::open(path)?;
    read_channel_csv(f)
}
