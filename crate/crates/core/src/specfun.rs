//! Normal-distribution special functions.
//!
//! The univariate functions sit on a port of the FreeBSD `s_erf.c` rational
//! approximations (one ulp in `f64`). The bivariate CDF uses the conditional
//! 1-D reduction
//!
//! ```text
//! Φ₂(a, b; r) = ∫_{-∞}^{a} φ(t) · Φ((b − r·t)/√(1−r²)) dt
//! ```
//!
//! on `[-9, min(a, 9)]` with composite 16-point Gauss–Legendre panels. The
//! panels are refined around `t = b/r`, where the conditional CDF switches
//! from 0 to 1 over a width of `√(1−r²)/|r|`, so accuracy holds up for the
//! strongly negative correlations of high-order PSK.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Arguments beyond this many standard deviations are treated as ±∞.
pub const TAIL_CLIP: f64 = 9.0;

/// Correlation coefficient of a standardised bivariate normal, `|r| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Correlation<T>(T);

impl<T: Real> Correlation<T> {
    pub fn new(r: T) -> Result<Self> {
        if !r.is_finite() || r.abs() >= T::one() {
            return Err(Error::InvalidArgument(format!(
                "correlation must satisfy |r| < 1, got {r}"
            )));
        }
        Ok(Self(r))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `√(1 − r²)`.
    #[inline]
    pub fn conditional_scale(self) -> T {
        (T::one() - self.0 * self.0).sqrt()
    }
}

/// Convexity threshold for the joint-concavity region of the bivariate CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaResult<T> {
    /// Smallest `α ≥ 0` with `α·Φ(αc)/φ(αc) ≥ c`, `c = (1−r)/√(1−r²)`.
    pub alpha_star: T,
    /// Constraint slack `α·Φ(αc)/φ(αc) − c` at `alpha_star`.
    pub residual: T,
    /// `1 − Φ(alpha_star)`: the largest per-user error probability for which
    /// the barrier problem is guaranteed convex.
    pub sep_bound: T,
}

fn check_finite<T: Real>(name: &str, u: T) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {u}")))
    }
}

// ---------------------------------------------------------------------------
// erf / erfc

const ERX: f64 = 8.45062911510467529297e-01;
const EFX: f64 = 1.28379167095512586316e-01;
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 5] = [
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 6] = [
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 8] = [
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 7] = [
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

/// `c[0] + z·c[1] + z²·c[2] + …`
#[inline]
fn horner<T: Real>(z: T, c: &[f64]) -> T {
    c.iter().rev().fold(T::zero(), |acc, &ci| acc * z + T::lit(ci))
}

/// `1 + z·c[0] + z²·c[1] + …`
#[inline]
fn horner1<T: Real>(z: T, c: &[f64]) -> T {
    T::one() + z * horner(z, c)
}

/// Core of the tail branch: `erfc(x)` for `1.25 ≤ x < 28`.
#[inline]
fn erfc_tail<T: Real>(x: T) -> T {
    let s = T::one() / (x * x);
    let (r, q) = if x < T::lit(1.0 / 0.35) {
        (horner(s, &RA), horner1(s, &SA))
    } else {
        (horner(s, &RB), horner1(s, &SB))
    };
    let z = x.truncate_single();
    let e = (-z * z - T::lit(0.5625)).exp() * ((z - x) * (z + x) + r / q).exp();
    e / x
}

/// Gauss error function.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let v = if ax < T::lit(0.84375) {
        if ax < T::lit(3.7252902984619140625e-9) {
            ax + T::lit(EFX) * ax
        } else {
            let z = ax * ax;
            ax + ax * (horner(z, &PP) / horner1(z, &QQ))
        }
    } else if ax < T::lit(1.25) {
        let s = ax - T::one();
        T::lit(ERX) + horner(s, &PA) / horner1(s, &QA)
    } else if ax >= T::lit(6.0) {
        T::one()
    } else {
        T::one() - erfc_tail(ax)
    };
    if x < T::zero() {
        -v
    } else {
        v
    }
}

/// Complementary error function `1 − erf(x)`, accurate in the upper tail.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let two = T::lit(2.0);
    let neg = x < T::zero();
    let ax = x.abs();
    if ax < T::lit(0.84375) {
        let z = ax * ax;
        let y = horner(z, &PP) / horner1(z, &QQ);
        let t = if ax < T::lit(0.25) {
            ax + ax * y
        } else {
            T::lit(0.5) + (ax * y + (ax - T::lit(0.5)))
        };
        return if neg { T::one() + t } else { T::one() - t };
    }
    if ax < T::lit(1.25) {
        let s = ax - T::one();
        let pq = horner(s, &PA) / horner1(s, &QA);
        return if neg {
            T::one() + T::lit(ERX) + pq
        } else {
            T::one() - T::lit(ERX) - pq
        };
    }
    if ax < T::lit(28.0) {
        if neg && ax > T::lit(6.0) {
            return two;
        }
        let r = erfc_tail(ax);
        return if neg { two - r } else { r };
    }
    if neg {
        two
    } else {
        T::zero()
    }
}

/// Inverse error function on `(−1, 1)`.
///
/// A single-precision rational estimate (Giles' form) refined by Newton steps
/// on `erf` near the centre and on `erfc` near the edges.
pub fn erf_inv<T: Real>(p: T) -> Result<T> {
    if !p.is_finite() || p.abs() >= T::one() {
        return Err(Error::InvalidArgument(format!(
            "erf_inv requires -1 < p < 1, got {p}"
        )));
    }
    if p == T::zero() {
        return Ok(T::zero());
    }
    let mut w = -((T::one() - p) * (T::one() + p)).ln();
    let guess = if w < T::lit(5.0) {
        w -= T::lit(2.5);
        let c = [
            1.50140941,
            0.246640727,
            -0.00417768164,
            -0.00125372503,
            0.00021858087,
            -4.39150654e-06,
            -3.5233877e-06,
            3.43273939e-07,
            2.81022636e-08,
        ];
        horner(w, &c) * p
    } else {
        w = w.sqrt() - T::lit(3.0);
        let c = [
            2.83297682,
            1.00167406,
            0.00943887047,
            -0.0076224613,
            0.00573950773,
            -0.00367342844,
            0.00134934322,
            0.000100950558,
            -0.000200214257,
        ];
        horner(w, &c) * p
    };

    let sign = if p < T::zero() { -T::one() } else { T::one() };
    let ap = p.abs();
    let mut x = guess.abs();
    let two_over_sqrt_pi = T::lit(std::f64::consts::FRAC_2_SQRT_PI);
    // Residual in the better-conditioned form: erfc near the edges.
    let use_erfc = ap > T::lit(0.5);
    let q = T::one() - ap;
    for _ in 0..4 {
        let d = two_over_sqrt_pi * (-x * x).exp();
        if d == T::zero() {
            break;
        }
        let step = if use_erfc {
            -(erfc(x) - q) / d
        } else {
            (erf(x) - ap) / d
        };
        // Halley correction: f'' / f' = −2x.
        let step = step / (T::one() + x * step);
        x -= step;
        if step.abs() <= T::epsilon() * x.abs() {
            break;
        }
    }
    Ok(sign * x)
}

// ---------------------------------------------------------------------------
// univariate normal

#[inline]
pub(crate) fn pdf<T: Real>(u: T) -> T {
    T::lit(0.398_942_280_401_432_7) * (-(u * u) * T::lit(0.5)).exp()
}

#[inline]
pub(crate) fn cdf<T: Real>(u: T) -> T {
    T::lit(0.5) * erfc(-u * T::FRAC_1_SQRT_2())
}

/// `1 − Φ(u)`, accurate in the upper tail.
#[inline]
pub(crate) fn upper_tail<T: Real>(u: T) -> T {
    T::lit(0.5) * erfc(u * T::FRAC_1_SQRT_2())
}

/// Standard normal density.
pub fn std_normal_pdf<T: Real>(u: T) -> Result<T> {
    check_finite("u", u)?;
    Ok(pdf(u))
}

/// Standard normal CDF, `Φ(u) = (1 + erf(u/√2))/2` evaluated through `erfc`
/// so the lower tail keeps relative accuracy.
pub fn std_normal_cdf<T: Real>(u: T) -> Result<T> {
    check_finite("u", u)?;
    Ok(cdf(u))
}

/// `1 − Φ(u)`.
pub fn std_normal_sf<T: Real>(u: T) -> Result<T> {
    check_finite("u", u)?;
    Ok(upper_tail(u))
}

/// Per-coordinate concavity threshold of the bivariate CDF for `r ≤ 0`:
/// `√(φ(1) / (2Φ(1) + φ(1)))`. Superseded operationally by [`alpha_star`].
pub fn single_variable_concavity_threshold<T: Real>() -> T {
    let p1 = pdf(T::one());
    (p1 / (T::lit(2.0) * cdf(T::one()) + p1)).sqrt()
}

// ---------------------------------------------------------------------------
// bivariate normal

const GL_ORDER: usize = 16;

/// Gauss–Legendre nodes/weights on [-1, 1]; positive half only (the rule is symmetric).
fn gauss_legendre() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = Vec::with_capacity(n / 2);
        for i in 1..=n / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out.push((x, w));
        }
        out
    })
}

/// Integrates `f` over `[lo, hi]` with panels no longer than `h`.
fn composite_gl<T: Real>(lo: T, hi: T, h: T, f: &impl Fn(T) -> T) -> T {
    let len = hi - lo;
    if !(len > T::zero()) {
        return T::zero();
    }
    let panels = (len / h).ceil().to_usize().unwrap_or(1).max(1);
    let width = len / T::from_usize_lossy(panels);
    let half = width * T::lit(0.5);
    let table = gauss_legendre();
    let mut total = T::zero();
    for p in 0..panels {
        let mid = lo + width * T::from_usize_lossy(p) + half;
        let mut s = T::zero();
        for &(x, w) in table {
            let dx = half * T::lit(x);
            s += T::lit(w) * (f(mid - dx) + f(mid + dx));
        }
        total += s * half;
    }
    total
}

/// Φ₂(a, b; r) for `a ≤ b`, no validation.
fn bvn_ordered<T: Real>(a: T, b: T, r: T) -> T {
    let clip = T::lit(TAIL_CLIP);
    if r == T::zero() {
        return cdf(a) * cdf(b);
    }
    let lo = -clip;
    let hi = a.min(clip);
    if hi <= lo {
        return T::zero();
    }
    let s = (T::one() - r * r).sqrt();
    let integrand = |t: T| pdf(t) * cdf((b - r * t) / s);

    let two = T::lit(2.0);
    let width = s / r.abs();
    let centre = b / r;
    let z_lo = (centre - T::lit(8.0) * width).max(lo);
    let z_hi = (centre + T::lit(8.0) * width).min(hi);
    let fine = (two * width).min(two);
    if z_lo >= z_hi {
        return composite_gl(lo, hi, two, &integrand);
    }
    composite_gl(lo, z_lo, two, &integrand)
        + composite_gl(z_lo, z_hi, fine, &integrand)
        + composite_gl(z_hi, hi, two, &integrand)
}

#[inline]
fn ordered<T: Real>(u1: T, u2: T) -> (T, T) {
    if u1 <= u2 {
        (u1, u2)
    } else {
        (u2, u1)
    }
}

fn check_pair<T: Real>(u1: T, u2: T) -> Result<()> {
    check_finite("u1", u1)?;
    check_finite("u2", u2)
}

pub(crate) fn bvn_cdf_unchecked<T: Real>(u1: T, u2: T, r: T) -> T {
    let (a, b) = ordered(u1, u2);
    bvn_ordered(a, b, r).max(T::zero()).min(T::one())
}

/// `1 − Φ₂`, through `Q(u1) + Q(u2) − Φ₂(−u1, −u2; r)` so that small error
/// probabilities do not cancel.
pub(crate) fn bvn_complement_unchecked<T: Real>(u1: T, u2: T, r: T) -> T {
    let joint_upper = bvn_cdf_unchecked(-u1, -u2, r);
    (upper_tail(u1) + upper_tail(u2) - joint_upper)
        .max(T::zero())
        .min(T::one())
}

pub(crate) fn bvn_grad_unchecked<T: Real>(u1: T, u2: T, r: T) -> (T, T) {
    let s = (T::one() - r * r).sqrt();
    (
        pdf(u1) * cdf((u2 - r * u1) / s),
        pdf(u2) * cdf((u1 - r * u2) / s),
    )
}

pub(crate) fn bvn_hess_unchecked<T: Real>(u1: T, u2: T, r: T) -> [[T; 2]; 2] {
    let s = (T::one() - r * r).sqrt();
    let (g1, g2) = bvn_grad_unchecked(u1, u2, r);
    let mixed = pdf(u1) * pdf((u2 - r * u1) / s) / s;
    let d11 = -r * mixed - u1 * g1;
    let d22 = -r * mixed - u2 * g2;
    [[d11, mixed], [mixed, d22]]
}

/// Standard bivariate normal CDF `Pr(X ≤ u1, Y ≤ u2)` with correlation `rho`.
///
/// Symmetric in its arguments bit-for-bit. Absolute accuracy is around
/// `1e-13` for `|rho| ≤ 0.999`.
pub fn bvn_cdf<T: Real>(u1: T, u2: T, rho: Correlation<T>) -> Result<T> {
    check_pair(u1, u2)?;
    Ok(bvn_cdf_unchecked(u1, u2, rho.value()))
}

/// `1 − Φ₂(u1, u2; rho)`, accurate when the result is small.
pub fn bvn_cdf_complement<T: Real>(u1: T, u2: T, rho: Correlation<T>) -> Result<T> {
    check_pair(u1, u2)?;
    Ok(bvn_complement_unchecked(u1, u2, rho.value()))
}

/// `(∂Φ₂/∂u1, ∂Φ₂/∂u2)`, using `∂Φ₂/∂u1 = φ(u1)·Φ((u2 − ρu1)/√(1−ρ²))`.
pub fn bvn_cdf_grad<T: Real>(u1: T, u2: T, rho: Correlation<T>) -> Result<(T, T)> {
    check_pair(u1, u2)?;
    Ok(bvn_grad_unchecked(u1, u2, rho.value()))
}

/// Hessian of Φ₂ in `(u1, u2)`.
pub fn bvn_cdf_hess<T: Real>(u1: T, u2: T, rho: Correlation<T>) -> Result<[[T; 2]; 2]> {
    check_pair(u1, u2)?;
    Ok(bvn_hess_unchecked(u1, u2, rho.value()))
}

// ---------------------------------------------------------------------------
// concavity threshold

/// `α·Φ(αc)/φ(αc) − c`.
fn alpha_constraint<T: Real>(alpha: T, c: T) -> T {
    let x = alpha * c;
    let ratio = cdf(x) / pdf(x);
    if alpha == T::zero() {
        return -c;
    }
    alpha * ratio - c
}

/// Smallest `α ≥ 0` such that both arguments above `α` put Φ₂ in its jointly
/// concave region. Only defined for `−1 < ρ ≤ 0`.
pub fn alpha_star<T: Real>(rho: Correlation<T>) -> Result<AlphaResult<T>> {
    let r = rho.value();
    if r > T::zero() {
        return Err(Error::InvalidArgument(format!(
            "alpha_star needs rho <= 0, got {r}"
        )));
    }
    let c = (T::one() - r) / rho.conditional_scale();
    let (mut lo, mut hi) = (T::zero(), T::lit(10.0));

    // The left-hand side must be nondecreasing on the bracket for bisection
    // to return the smallest feasible α.
    let grid = 400;
    let mut prev = alpha_constraint(lo, c);
    for i in 1..=grid {
        let a = hi * T::from_usize_lossy(i) / T::from_usize_lossy(grid);
        let v = alpha_constraint(a, c);
        if v < prev {
            return Err(Error::Solver(format!(
                "alpha_star constraint not monotone near alpha = {a}"
            )));
        }
        prev = v;
    }
    if alpha_constraint(hi, c) < T::zero() {
        return Err(Error::Solver("alpha_star root not bracketed by [0, 10]".into()));
    }

    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if alpha_constraint(mid, c) >= T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(AlphaResult {
        alpha_star: hi,
        residual: alpha_constraint(hi, c),
        sep_bound: upper_tail(hi),
    })
}
