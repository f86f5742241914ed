//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's numerical kernels.

#![allow(dead_code)]

use crbeam::linalg::Mat;
use crbeam::model::{db_to_linear, default_directions, PskOrder, Scenario};
use crbeam::socp::ConeProgram;
use num_complex::Complex;
use rand::Rng;

// ---------------------------------------------------------------------------
// quadrature

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// G7–K15 on one interval: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

const LOWER: f64 = -12.0;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(u) by quadrature of the density.
pub fn normal_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        integrate(normal_pdf, LOWER.min(u), u, 1e-15)
    } else {
        1.0 - integrate(normal_pdf, u, (-LOWER).max(u), 1e-15)
    }
}

fn bvn_density(x: f64, y: f64, r: f64) -> f64 {
    let q = 1.0 - r * r;
    (-(x * x - 2.0 * r * x * y + y * y) / (2.0 * q)).exp() / (2.0 * std::f64::consts::PI * q.sqrt())
}

/// `integrate` with extra breakpoints, so narrow peaks are never skipped by the first panel.
pub fn integrate_split(f: impl Fn(f64) -> f64, a: f64, b: f64, cuts: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], tol)).sum()
}

/// Φ₂(u1, u2; r) by nested adaptive quadrature of the joint density.
pub fn bvn_cdf(u1: f64, u2: f64, r: f64) -> f64 {
    let (u1, u2) = (u1.clamp(LOWER, -LOWER), u2.clamp(LOWER, -LOWER));
    // for |r| near 1 the mass sits on a ridge y ≈ r x of width √(1 − r²)
    let s = (1.0 - r * r).sqrt();
    let ridge = |c: f64, w: f64| [c - 8.0 * w, c - 2.0 * w, c, c + 2.0 * w, c + 8.0 * w];
    let outer = if r.abs() > 1e-12 { ridge(u2 / r, s / r.abs()) } else { [0.0; 5] };
    integrate_split(
        |x| integrate_split(|y| bvn_density(x, y, r), LOWER, u2, &ridge(r * x, s), 1e-15),
        LOWER,
        u1,
        &outer,
        1e-13,
    )
}

// ---------------------------------------------------------------------------
// root finding and differentiation

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Gradient of `f` at `x` by central differences with step `h` per coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// SOCP oracle: projected gradient over box ∩ ball ∩ shifted Lorentz cone,
// projections onto the intersection by Dykstra's algorithm

#[derive(Debug, Clone)]
pub struct ConvexInstance {
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    /// `‖z[..n−1] − apex‖ ≤ z[n−1] − shift`.
    pub apex: Vec<f64>,
    pub shift: f64,
}

impl ConvexInstance {
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lo = p.iter().map(|v| v - rng.random_range(0.5..2.0)).collect();
        let hi = p.iter().map(|v| v + rng.random_range(0.5..2.0)).collect();
        let center: Vec<f64> = p.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let radius = dist(&p, &center) + rng.random_range(0.3..1.5);
        let apex: Vec<f64> = p[..n - 1].iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        let shift = p[n - 1] - dist(&p[..n - 1], &apex) - rng.random_range(0.2..1.0);
        let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { c, lo, hi, center, radius, apex, shift }
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    fn project_box(&self, z: &mut [f64]) {
        for ((v, lo), hi) in z.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn project_ball(&self, z: &mut [f64]) {
        let d = dist(z, &self.center);
        if d > self.radius {
            for (v, c) in z.iter_mut().zip(&self.center) {
                *v = c + (*v - c) * self.radius / d;
            }
        }
    }

    fn project_cone(&self, z: &mut [f64]) {
        let n = z.len();
        let u = z[n - 1] - self.shift;
        let nv = dist(&z[..n - 1], &self.apex);
        if nv <= u {
            return;
        }
        if nv <= -u {
            z[..n - 1].copy_from_slice(&self.apex);
            z[n - 1] = self.shift;
            return;
        }
        let t = 0.5 * (nv + u);
        for (v, a) in z[..n - 1].iter_mut().zip(&self.apex) {
            *v = a + (*v - a) * t / nv;
        }
        z[n - 1] = self.shift + t;
    }

    /// Euclidean projection onto the intersection (Dykstra).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut z = x.to_vec();
        let mut incr = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for _ in 0..20_000 {
            let before = z.clone();
            for (k, p) in incr.iter_mut().enumerate() {
                let mut y: Vec<f64> = z.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
                let pre = y.clone();
                match k {
                    0 => self.project_box(&mut y),
                    1 => self.project_ball(&mut y),
                    _ => self.project_cone(&mut y),
                }
                for i in 0..n {
                    p[i] = pre[i] - y[i];
                }
                z = y;
            }
            if dist(&z, &before) < 1e-14 {
                break;
            }
        }
        z
    }

    /// Fixed-step projected gradient; for a linear objective its fixed points
    /// are exactly the minimisers.
    pub fn oracle_minimum(&self) -> (Vec<f64>, f64) {
        let n = self.c.len();
        let step = 0.5 / self.c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut z = self.project(&vec![0.0; n]);
        for _ in 0..100_000 {
            let trial: Vec<f64> = z.iter().zip(&self.c).map(|(a, b)| a - step * b).collect();
            let next = self.project(&trial);
            let moved = dist(&next, &z);
            z = next;
            if moved < 1e-11 {
                break;
            }
        }
        let obj = self.objective(&z);
        (z, obj)
    }

    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut v: f64 = 0.0;
        for i in 0..n {
            v = v.max(self.lo[i] - z[i]).max(z[i] - self.hi[i]);
        }
        v = v.max(dist(z, &self.center) - self.radius);
        v.max(dist(&z[..n - 1], &self.apex) - (z[n - 1] - self.shift))
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Box, ball and shifted cone of `inst` as a cone program.
pub fn program(inst: &ConvexInstance) -> ConeProgram<f64> {
    let n = inst.c.len();
    let mut p = ConeProgram::new(inst.c.clone());
    for i in 0..n {
        p.add_lin(unit(n, i), inst.hi[i]);
        p.add_lin(unit(n, i).iter().map(|v| -v).collect(), -inst.lo[i]);
    }
    p.add_soc(Mat::identity(n), inst.center.iter().map(|v| -v).collect(), vec![0.0; n], inst.radius);
    let mut a = Mat::zeros(n - 1, n);
    for i in 0..n - 1 {
        a[(i, i)] = 1.0;
    }
    p.add_soc(a, inst.apex.iter().map(|v| -v).collect(), unit(n, n - 1), -inst.shift);
    p
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// scenarios

/// Reference operating point: N=10, K=8, L=2, QPSK, σ²=0.1, P=5 dBW,
/// ε=−2 dBW, base directions.
pub fn reference_scenario() -> Scenario<f64> {
    let d = default_directions(None);
    let eps = db_to_linear(-2.0);
    Scenario::from_directions(
        10,
        &d.su[..8],
        &d.pu,
        0.1,
        db_to_linear(5.0),
        vec![eps, eps],
        PskOrder::new(4).unwrap(),
    )
    .unwrap()
}

/// N=1, K=1, L=0, h=1, QPSK, σ²=0.1, P=1.
pub fn toy_scenario() -> Scenario<f64> {
    Scenario::new(
        vec![vec![Complex::new(1.0, 0.0)]],
        vec![],
        0.1,
        1.0,
        vec![],
        PskOrder::new(4).unwrap(),
    )
    .unwrap()
}

/// Random ULA scenario with angles uniform in [0°, 90°].
pub fn random_ula_scenario<R: Rng>(
    rng: &mut R,
    n: usize,
    k: usize,
    l: usize,
    m: u32,
    p_dbw: f64,
    eps_dbw: f64,
) -> Scenario<f64> {
    let su: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..90.0)).collect();
    let pu: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..90.0)).collect();
    Scenario::from_directions(
        n,
        &su,
        &pu,
        0.1,
        db_to_linear(p_dbw),
        vec![db_to_linear(eps_dbw); l],
        PskOrder::new(m).unwrap(),
    )
    .unwrap()
}
