//! Beamformer designs: conventional max-min SINR balancing, exact
//! worst-user SEP minimisation by a barrier method, and its SOCP
//! approximation.

use std::time::Instant;

use log::debug;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, orthogonal_complement, row_space_basis, Mat};
use crate::model::{
    beamformers_from_x, channel_gain, embed_complex, superpose, unembed, BeamSolution, Method, RealEmbedding,
    Scenario, SolveStats, SolveStatus, SymbolFrame,
};
use crate::scalar::Real;
use crate::socp::{self, damped_newton, ConeProgram, NewtonSettings};
use crate::specfun::{
    alpha_star, bvn_complement_unchecked, bvn_grad_unchecked, bvn_hess_unchecked, erf, Correlation,
};

/// Schedule for the exact WSUSEP barrier method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams<T> {
    pub s0: T,
    pub mu: T,
    /// Outer stopping tolerance on consecutive iterates (and on the gap bound).
    pub delta_t: T,
    pub max_outer: usize,
    /// Newton steps allowed per centering.
    pub max_inner: usize,
}

impl<T: Real> Default for BarrierParams<T> {
    fn default() -> Self {
        Self {
            s0: T::one(),
            mu: T::lit(10.0),
            delta_t: T::lit(1e-8),
            max_outer: 40,
            max_inner: 500,
        }
    }
}

impl<T: Real> BarrierParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::one()) {
            return Err(Error::InvalidArgument(format!("mu must exceed 1, got {}", self.mu)));
        }
        if !(self.delta_t > T::zero()) || !(self.s0 > T::zero()) {
            return Err(Error::InvalidArgument("delta_t and s0 must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// conventional max-min fair design

#[derive(Debug, Clone, PartialEq)]
pub struct ConventionalSolution<T> {
    /// One beamformer per SU.
    pub w: Vec<Vec<Complex<T>>>,
    /// Largest γ certified feasible; `w` achieves it.
    pub gamma: T,
    /// Smallest γ found infeasible (upper end of the final bracket).
    pub gamma_infeasible: T,
    pub bisection_iters: usize,
    pub seconds: f64,
}

impl<T: Real> ConventionalSolution<T> {
    /// Transmit vector and stats for one symbol frame.
    pub fn beam(&self, frame: &SymbolFrame<T>, emb: &RealEmbedding<T>) -> BeamSolution<T> {
        let x = superpose(&self.w, &frame.symbols);
        let rho = analytic_wsusep(emb, &embed_complex(&x));
        BeamSolution {
            x,
            w: self.w.clone(),
            rho,
            upsilon: T::nan(),
            method: Method::Conventional,
            stats: SolveStats {
                iterations: self.bisection_iters,
                seconds: self.seconds,
                status: SolveStatus::Optimal,
            },
        }
    }
}

/// `|h_iᵀw_i|² / (Σ_{j≠i} |h_iᵀw_j|² + σ²)` per SU.
pub fn sinr<T: Real>(scenario: &Scenario<T>, w: &[Vec<Complex<T>>]) -> Vec<T> {
    scenario
        .su_channels
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut interf = scenario.sigma2;
            let mut signal = T::zero();
            for (j, wj) in w.iter().enumerate() {
                let p = channel_gain(h, wj).norm_sqr();
                if i == j {
                    signal = p;
                } else {
                    interf += p;
                }
            }
            signal / interf
        })
        .collect()
}

/// `[Re(hᵀw), Im(hᵀw)]` as rows acting on `[Re w; Im w]`.
fn complex_rows<T: Real>(h: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
    let re = h.iter().map(|c| c.re).chain(h.iter().map(|c| -c.im)).collect();
    let im = h.iter().map(|c| c.im).chain(h.iter().map(|c| c.re)).collect();
    (re, im)
}

fn place<T: Real>(row: &[T], block: usize, total: usize) -> Vec<T> {
    let mut out = vec![T::zero(); total];
    out[block * row.len()..(block + 1) * row.len()].copy_from_slice(row);
    out
}

/// Real-embedded max-min feasibility program at SINR target `gamma`. The
/// variable stacks `[Re w_i; Im w_i]` for `i = 1..K`.
fn conventional_program<T: Real>(scenario: &Scenario<T>, gamma: T) -> ConeProgram<T> {
    let n = scenario.n_antennas;
    let k = scenario.num_sus();
    let dim = 2 * n * k;
    let sigma = scenario.sigma2.sqrt();
    let scale = (T::one() + T::one() / gamma).sqrt();
    let mut prog = ConeProgram::new(vec![T::zero(); dim]);

    for (i, h) in scenario.su_channels.iter().enumerate() {
        let (re, im) = complex_rows(h);
        let mut rows = Vec::with_capacity(2 * k + 1);
        for j in 0..k {
            rows.push(place(&re, j, dim));
            rows.push(place(&im, j, dim));
        }
        rows.push(vec![T::zero(); dim]);
        let mut b = vec![T::zero(); 2 * k + 1];
        b[2 * k] = sigma;
        let d: Vec<T> = place(&re, i, dim).into_iter().map(|v| v * scale).collect();
        prog.add_soc(Mat::from_rows(&rows), b, d, T::zero());
        prog.add_eq(place(&im, i, dim), T::zero());
    }

    prog.add_soc(Mat::identity(dim), vec![T::zero(); dim], vec![T::zero(); dim], scenario.power.sqrt());

    for (g, &eps) in scenario.pu_channels.iter().zip(&scenario.eps) {
        let (re, im) = complex_rows(g);
        let rows: Vec<Vec<T>> = (0..k).flat_map(|j| [place(&re, j, dim), place(&im, j, dim)]).collect();
        if eps > T::zero() {
            prog.add_soc(Mat::from_rows(&rows), vec![T::zero(); 2 * k], vec![T::zero(); dim], eps.sqrt());
        } else {
            for r in rows {
                prog.add_eq(r, T::zero());
            }
        }
    }
    prog
}

fn unstack<T: Real>(z: &[T], n: usize, k: usize) -> Vec<Vec<Complex<T>>> {
    (0..k)
        .map(|i| {
            let blk = &z[2 * n * i..2 * n * (i + 1)];
            (0..n).map(|m| Complex::new(blk[m], blk[n + m])).collect()
        })
        .collect()
}

/// Feasible point at `gamma`, `None` if infeasible.
fn conventional_feasible<T: Real>(scenario: &Scenario<T>, gamma: T) -> Result<Option<Vec<T>>> {
    match socp::phase1(&conventional_program(scenario, gamma)) {
        Ok(p) => Ok(Some(p.z)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub const GAMMA_LO: f64 = 1e-6;
/// Target `‖∇(ρ + Ψ/s)‖` at each barrier centre.
pub const GRADIENT_TOL: f64 = 1e-7;

/// Smallest feasibility margin, relative to `√P max‖t_k‖`, treated as positive.
pub const MARGIN_TOL: f64 = 1e-9;
const GAMMA_REL_WIDTH: f64 = 1e-4;

/// Max-min fair SINR balancing by bisection over γ with one SOCP
/// feasibility test per step.
pub fn conventional_maxmin<T: Real>(scenario: &Scenario<T>) -> Result<ConventionalSolution<T>> {
    let start = Instant::now();
    let n = scenario.n_antennas;
    let k = scenario.num_sus();
    let mut lo = T::lit(GAMMA_LO);
    let mut best = conventional_feasible(scenario, lo)?.ok_or_else(|| {
        Error::Infeasible("no beamformer meets the power and interference constraints at any SINR".into())
    })?;
    let max_gain = scenario
        .su_channels
        .iter()
        .map(|h| h.iter().map(|c| c.norm_sqr()).sum::<T>())
        .fold(T::zero(), T::max);
    let mut hi = scenario.power * max_gain / scenario.sigma2;
    let mut iters = 0usize;
    if hi <= lo {
        hi = lo * T::lit(1.0 + GAMMA_REL_WIDTH);
    }
    while hi > lo * T::lit(1.0 + GAMMA_REL_WIDTH) {
        let mid = (lo * hi).sqrt();
        iters += 1;
        match conventional_feasible(scenario, mid)? {
            Some(z) => {
                lo = mid;
                best = z;
            }
            None => hi = mid,
        }
    }
    debug!("conventional bisection: gamma in [{lo:e}, {hi:e}] after {iters} steps");
    Ok(ConventionalSolution {
        w: unstack(&best, n, k),
        gamma: lo,
        gamma_infeasible: hi,
        bisection_iters: iters,
        seconds: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// feasibility start and the SOCP approximation

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityStart<T> {
    /// `max min_j t_jᵀx̄` over the power/interference set.
    pub z_star: T,
    pub xbar: Vec<T>,
    pub newton_iters: usize,
}

/// Maximises `z` subject to `z ≤ t_jᵀx̄`, `‖x̄‖ ≤ √P`, `‖B_l x̄‖ ≤ √ε_l`
/// (`B_l x̄ = 0` when `ε_l = 0`).
pub fn feasibility_start<T: Real>(emb: &RealEmbedding<T>, scenario: &Scenario<T>) -> Result<FeasibilityStart<T>> {
    let n2 = emb.dim();
    let mut c = vec![T::zero(); n2 + 1];
    c[n2] = -T::one();
    let mut prog = ConeProgram::new(c);
    for t in &emb.t {
        let mut f: Vec<T> = t.iter().map(|&v| -v).collect();
        f.push(T::one());
        prog.add_lin(f, T::zero());
    }
    let mut ball = Mat::zeros(n2, n2 + 1);
    for i in 0..n2 {
        ball[(i, i)] = T::one();
    }
    prog.add_soc(ball, vec![T::zero(); n2], vec![T::zero(); n2 + 1], scenario.power.sqrt());
    for (b, &eps) in emb.b.iter().zip(&scenario.eps) {
        let mut a = Mat::zeros(2, n2 + 1);
        for r in 0..2 {
            a.row_mut(r)[..n2].copy_from_slice(b.row(r));
        }
        if eps > T::zero() {
            prog.add_soc(a, vec![T::zero(); 2], vec![T::zero(); n2 + 1], eps.sqrt());
        } else {
            prog.add_eq(a.row(0).to_vec(), T::zero());
            prog.add_eq(a.row(1).to_vec(), T::zero());
        }
    }
    let sol = socp::solve(&prog, None)?;
    match sol.status {
        socp::ConeStatus::Optimal => {}
        socp::ConeStatus::Infeasible => {
            return Err(Error::Infeasible("power/interference set is empty".into()));
        }
        socp::ConeStatus::MaxIter => {
            return Err(Error::Solver("feasibility-start SOCP hit its iteration budget".into()));
        }
    }
    let xbar = sol.z[..n2].to_vec();
    let z_star = emb.margins(&xbar).into_iter().fold(T::infinity(), T::min);
    Ok(FeasibilityStart {
        z_star,
        xbar,
        newton_iters: sol.newton_iters,
    })
}

/// `1 − erf(Υ)`, clamped to `[0, 1]`.
pub fn rho_from_upsilon<T: Real>(upsilon: T) -> T {
    (T::one() - erf(upsilon)).max(T::zero()).min(T::one())
}

/// Maximises the noise margin Υσ with one SOCP and reports `ρ = 1 − erf(Υ*)`.
pub fn approx_wsusep<T: Real>(emb: &RealEmbedding<T>, scenario: &Scenario<T>) -> Result<BeamSolution<T>> {
    let start = Instant::now();
    let fs = feasibility_start(emb, scenario)?;
    // margins at rounding level of the largest reachable one are zero
    let reach = emb.t.iter().map(|t| norm(t)).fold(T::zero(), T::max) * scenario.power.sqrt();
    if !(fs.z_star > T::lit(MARGIN_TOL) * reach) {
        return Err(Error::Infeasible(format!(
            "no transmit vector puts every SU inside its decision region (z* = {:.6e})",
            fs.z_star
        )));
    }
    let upsilon = fs.z_star * emb.theta.cos() / emb.sigma;
    Ok(finish(emb, fs.xbar, rho_from_upsilon(upsilon), upsilon, Method::Approx, fs.newton_iters, start))
}

fn finish<T: Real>(
    emb: &RealEmbedding<T>,
    xbar: Vec<T>,
    rho: T,
    upsilon: T,
    method: Method,
    iterations: usize,
    start: Instant,
) -> BeamSolution<T> {
    let x = unembed(&xbar);
    BeamSolution {
        w: beamformers_from_x(&x, &emb.symbols),
        x,
        rho,
        upsilon,
        method,
        stats: SolveStats {
            iterations,
            seconds: start.elapsed().as_secs_f64(),
            status: SolveStatus::Optimal,
        },
    }
}

// ---------------------------------------------------------------------------
// exact WSUSEP

/// Per-SU `1 − Φ₂(t_{2i−1}ᵀx̄/σ_ñ, t_{2i}ᵀx̄/σ_ñ; r̄)`.
pub fn per_user_sep<T: Real>(emb: &RealEmbedding<T>, xbar: &[T]) -> Vec<T> {
    let m = emb.margins(xbar);
    m.chunks(2)
        .map(|p| bvn_complement_unchecked(p[0] / emb.sigma_tilde, p[1] / emb.sigma_tilde, emb.rbar))
        .collect()
}

/// Worst-user symbol error probability of transmit vector `xbar`.
pub fn analytic_wsusep<T: Real>(emb: &RealEmbedding<T>, xbar: &[T]) -> T {
    per_user_sep(emb, xbar).into_iter().fold(T::zero(), T::max)
}

/// `ρ + Ψ(x̄, ρ)/s` for the exact problem, on `v = [x̄; ρ]`.
///
/// Ψ collects `−ln(ρ − (1 − Φ_i))` per SU, `−ln(P − ‖x̄‖²)`,
/// `−ln(ε_l − ‖B_l x̄‖²)` for every PU with `ε_l > 0`, and
/// `−ln(t_jᵀx̄ − σ_ñα*)` keeping iterates where the CDF is jointly concave.
pub struct WsusepBarrier<'a, T> {
    emb: &'a RealEmbedding<T>,
    power: T,
    interference: Vec<(Mat<T>, T)>,
    region: T,
}

impl<'a, T: Real> WsusepBarrier<'a, T> {
    pub fn new(emb: &'a RealEmbedding<T>, scenario: &Scenario<T>) -> Result<Self> {
        let alpha = alpha_star(Correlation::new(emb.rbar)?)?.alpha_star;
        let interference = emb
            .b
            .iter()
            .zip(&scenario.eps)
            .filter(|(_, &e)| e > T::zero())
            .map(|(b, &e)| (b.gram(), e))
            .collect();
        Ok(Self {
            emb,
            power: scenario.power,
            interference,
            region: emb.sigma_tilde * alpha,
        })
    }

    /// `σ_ñ·α*(r̄)`.
    pub fn region_threshold(&self) -> T {
        self.region
    }

    /// Barrier parameter ν (one per log term).
    pub fn weight(&self) -> usize {
        self.emb.num_users() + 1 + self.interference.len() + self.emb.t.len()
    }

    pub fn psi(&self, v: &[T]) -> Option<T> {
        let n2 = self.emb.dim();
        let (x, rho) = (&v[..n2], v[n2]);
        let mut psi = T::zero();
        for q in per_user_sep(self.emb, x) {
            let d = rho - q;
            if !(d > T::zero()) {
                return None;
            }
            psi -= d.ln();
        }
        let sp = self.power - dot(x, x);
        if !(sp > T::zero()) {
            return None;
        }
        psi -= sp.ln();
        for (bb, eps) in &self.interference {
            let si = *eps - dot(x, &bb.mul_vec(x));
            if !(si > T::zero()) {
                return None;
            }
            psi -= si.ln();
        }
        for m in self.emb.margins(x) {
            let sr = m - self.region;
            if !(sr > T::zero()) {
                return None;
            }
            psi -= sr.ln();
        }
        psi.is_finite().then_some(psi)
    }

    /// Gradient and Hessian of Ψ at an interior point.
    pub fn psi_derivatives(&self, v: &[T]) -> (Vec<T>, Mat<T>) {
        let emb = self.emb;
        let n2 = emb.dim();
        let dim = n2 + 1;
        let (x, rho) = (&v[..n2], v[n2]);
        let mut g = vec![T::zero(); dim];
        let mut h = Mat::zeros(dim, dim);
        let two = T::lit(2.0);
        let st = emb.sigma_tilde;
        let margins = emb.margins(x);

        for i in 0..emb.num_users() {
            let (ta, tb) = (&emb.t[2 * i], &emb.t[2 * i + 1]);
            let (u1, u2) = (margins[2 * i] / st, margins[2 * i + 1] / st);
            let q = bvn_complement_unchecked(u1, u2, emb.rbar);
            let d = rho - q;
            let (g1, g2) = bvn_grad_unchecked(u1, u2, emb.rbar);
            let hp = bvn_hess_unchecked(u1, u2, emb.rbar);
            // ∇D = [(g1 t_a + g2 t_b)/σ_ñ; 1], ∇²D = T·H·Tᵀ/σ_ñ² on the x̄ block
            let mut gd = vec![T::zero(); dim];
            axpy(g1 / st, ta, &mut gd[..n2]);
            axpy(g2 / st, tb, &mut gd[..n2]);
            gd[n2] = T::one();
            axpy(-T::one() / d, &gd, &mut g);
            h.add_outer(T::one() / (d * d), &gd, &gd);
            let c = -T::one() / (d * st * st);
            let mut ta_ext = ta.clone();
            ta_ext.push(T::zero());
            let mut tb_ext = tb.clone();
            tb_ext.push(T::zero());
            h.add_outer(c * hp[0][0], &ta_ext, &ta_ext);
            h.add_outer(c * hp[0][1], &ta_ext, &tb_ext);
            h.add_outer(c * hp[1][0], &tb_ext, &ta_ext);
            h.add_outer(c * hp[1][1], &tb_ext, &tb_ext);
        }

        let mut xe = x.to_vec();
        xe.push(T::zero());
        let sp = self.power - dot(x, x);
        axpy(two / sp, &xe, &mut g);
        h.add_outer(T::lit(4.0) / (sp * sp), &xe, &xe);
        for k in 0..n2 {
            h[(k, k)] += two / sp;
        }

        for (bb, eps) in &self.interference {
            let mut bx = bb.mul_vec(x);
            let si = *eps - dot(x, &bx);
            for v in bx.iter_mut() {
                *v *= two;
            }
            bx.push(T::zero());
            axpy(T::one() / si, &bx, &mut g);
            h.add_outer(T::one() / (si * si), &bx, &bx);
            for a in 0..n2 {
                for b in 0..n2 {
                    h[(a, b)] += two * bb[(a, b)] / si;
                }
            }
        }

        for (t, m) in emb.t.iter().zip(margins) {
            let sr = m - self.region;
            let mut te = t.clone();
            te.push(T::zero());
            axpy(-T::one() / sr, &te, &mut g);
            h.add_outer(T::one() / (sr * sr), &te, &te);
        }
        (g, h)
    }

    /// `ρ + Ψ/s`.
    pub fn value(&self, v: &[T], s: T) -> Option<T> {
        self.psi(v).map(|p| v[v.len() - 1] + p / s)
    }

    pub fn gradient(&self, v: &[T], s: T) -> Vec<T> {
        let (mut g, _) = self.psi_derivatives(v);
        for x in g.iter_mut() {
            *x /= s;
        }
        let last = g.len() - 1;
        g[last] += T::one();
        g
    }

    pub fn hessian(&self, v: &[T], s: T) -> Mat<T> {
        let (_, h) = self.psi_derivatives(v);
        let mut out = Mat::zeros(h.rows(), h.cols());
        out.add_scaled(T::one() / s, &h);
        out
    }
}

/// Why the outer barrier loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStop {
    /// Consecutive centres closer than δ_t.
    Step,
    /// Gap bound ν/s below δ_t.
    Gap,
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierTrace<T> {
    pub stop: BarrierStop,
    pub s_final: T,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub xbar: Vec<T>,
    /// Barrier variable ρ at the final centre.
    pub rho_var: T,
    /// `‖∇(ρ + Ψ/s)‖` at the final centre, in the reduced coordinates.
    pub gradient_norm: T,
    pub z_star: T,
    pub threshold: T,
}

/// Basis for `{x̄ : B_l x̄ = 0 for every ε_l = 0}` as columns (2N×p).
fn zero_interference_basis<T: Real>(emb: &RealEmbedding<T>, scenario: &Scenario<T>) -> Mat<T> {
    let n2 = emb.dim();
    let rows: Vec<Vec<T>> = emb
        .b
        .iter()
        .zip(&scenario.eps)
        .filter(|(_, &e)| e == T::zero())
        .flat_map(|(b, _)| [b.row(0).to_vec(), b.row(1).to_vec()])
        .collect();
    if rows.is_empty() {
        return Mat::identity(n2);
    }
    let (basis, _) = row_space_basis(&rows, T::lit(1e-10));
    let comp = orthogonal_complement(&basis, n2);
    if comp.is_empty() {
        Mat::zeros(n2, 0)
    } else {
        Mat::from_rows(&comp).transpose()
    }
}

/// Exact WSUSEP minimisation by the barrier method.
pub fn wsusep_barrier<T: Real>(
    emb: &RealEmbedding<T>,
    scenario: &Scenario<T>,
    params: &BarrierParams<T>,
) -> Result<BeamSolution<T>> {
    wsusep_barrier_traced(emb, scenario, params).map(|(s, _)| s)
}

pub fn wsusep_barrier_traced<T: Real>(
    emb: &RealEmbedding<T>,
    scenario: &Scenario<T>,
    params: &BarrierParams<T>,
) -> Result<(BeamSolution<T>, BarrierTrace<T>)> {
    params.validate()?;
    let start = Instant::now();
    let fs = feasibility_start(emb, scenario)?;
    let obj = WsusepBarrier::new(emb, scenario)?;
    let thr = obj.region_threshold();
    if !(fs.z_star > thr) {
        return Err(Error::IllPosed {
            z_star: fs.z_star.to_f64_lossy(),
            threshold: thr.to_f64_lossy(),
        });
    }

    // Shrink towards the origin for strict power/interference slack while
    // staying strictly inside the concavity region.
    let ratio = thr / fs.z_star;
    let lambda = if ratio < T::lit(0.98) {
        T::lit(0.99)
    } else {
        (T::one() + ratio) * T::lit(0.5)
    };
    let x0: Vec<T> = fs.xbar.iter().map(|&v| v * lambda).collect();
    let q0 = analytic_wsusep(emb, &x0);
    let rho0 = q0 * T::lit(1.1) + T::min_positive_value() * T::lit(1e10);

    let f = zero_interference_basis(emb, scenario);
    let p = f.cols();
    let lift = |y: &[T]| -> Vec<T> {
        let mut v = f.mul_vec(&y[..p]);
        v.push(y[p]);
        v
    };
    let mut y = f.tr_mul_vec(&x0);
    y.push(rho0);

    let nu = T::from_usize_lossy(obj.weight());
    let st = NewtonSettings {
        tol: T::lit(1e-10),
        armijo: T::lit(0.25),
        shrink: T::lit(0.5),
        budget: usize::MAX,
        grad_tol: T::infinity(),
    };
    let reduce_derivs = |v: &[T], s: T| -> (Vec<T>, Mat<T>) {
        let (gv, hv) = obj.psi_derivatives(v);
        let n2 = emb.dim();
        // pull back through v = [F y_x; ρ]
        let mut g = f.tr_mul_vec(&gv[..n2]);
        g.push(gv[n2] + s);
        let mut h = Mat::zeros(p + 1, p + 1);
        let mut hx = Mat::zeros(n2, n2);
        let mut hr = vec![T::zero(); n2];
        for a in 0..n2 {
            for b in 0..n2 {
                hx[(a, b)] = hv[(a, b)];
            }
            hr[a] = hv[(a, n2)];
        }
        let hf = f.transpose().mul(&hx).mul(&f);
        let fr = f.tr_mul_vec(&hr);
        for a in 0..p {
            for b in 0..p {
                h[(a, b)] = hf[(a, b)];
            }
            h[(a, p)] = fr[a];
            h[(p, a)] = fr[a];
        }
        h[(p, p)] = hv[(n2, n2)];
        (g, h)
    };

    let mut s = params.s0;
    let mut newton = 0usize;
    let mut prev: Option<Vec<T>> = None;
    let mut stop = BarrierStop::Budget;
    let mut outer = 0usize;
    while outer < params.max_outer {
        outer += 1;
        let mut inner = 0usize;
        // the reported stationarity is ‖∇(ρ + Ψ/s)‖ = ‖∇(sρ + Ψ)‖/s
        let st_outer = NewtonSettings {
            budget: params.max_inner,
            grad_tol: T::lit(GRADIENT_TOL) * s,
            ..st
        };
        let mut lin = vec![T::zero(); p + 1];
        lin[p] = s;
        damped_newton(
            &mut y,
            &lin,
            |y| obj.psi(&lift(y)),
            |y| reduce_derivs(&lift(y), s),
            &st_outer,
            &mut inner,
        );
        newton += inner;
        let v = lift(&y);
        debug!(
            "wsusep outer {outer}: s = {s:e}, rho = {:e}, newton = {inner}",
            v[v.len() - 1]
        );
        if let Some(pv) = &prev {
            let step: T = pv.iter().zip(&v).map(|(a, b)| (*a - *b).powi(2)).sum();
            if step < params.delta_t * params.delta_t {
                stop = BarrierStop::Step;
                break;
            }
        }
        if nu / s <= params.delta_t {
            stop = BarrierStop::Gap;
            break;
        }
        prev = Some(v);
        if outer < params.max_outer {
            s *= params.mu;
        }
    }

    let v = lift(&y);
    let n2 = emb.dim();
    let xbar = v[..n2].to_vec();
    let (g, _) = reduce_derivs(&v, s);
    let gradient_norm = norm(&g) / s;
    let rho = analytic_wsusep(emb, &xbar);
    let zmin = emb.margins(&xbar).into_iter().fold(T::infinity(), T::min);
    let upsilon = zmin * emb.theta.cos() / emb.sigma;
    let mut sol = finish(emb, xbar.clone(), rho, upsilon, Method::Wsusep, newton, start);
    if stop == BarrierStop::Budget {
        sol.stats.status = SolveStatus::MaxIter;
    }
    let trace = BarrierTrace {
        stop,
        s_final: s,
        outer_iters: outer,
        newton_iters: newton,
        xbar,
        rho_var: v[n2],
        gradient_norm,
        z_star: fs.z_star,
        threshold: thr,
    };
    Ok((sol, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_embedding, PskOrder};

    fn toy(sigma2: f64, power: f64) -> (Scenario<f64>, SymbolFrame<f64>, RealEmbedding<f64>) {
        let order = PskOrder::new(4).unwrap();
        let s = Scenario::new(vec![vec![Complex::new(1.0, 0.0)]], vec![], sigma2, power, vec![], order).unwrap();
        let f = SymbolFrame::new(&s.constellation(), vec![0]).unwrap();
        let e = build_embedding(&s, &f).unwrap();
        (s, f, e)
    }

    #[test]
    fn feasibility_toy() {
        let (s, _, e) = toy(0.1, 1.0);
        let fs = feasibility_start(&e, &s).unwrap();
        assert!((fs.z_star - 1.0).abs() < 1e-6);
        assert!((fs.xbar[0] - 1.0).abs() < 1e-6 && fs.xbar[1].abs() < 1e-6);
        let fs4 = feasibility_start(&e, &s.with_power(4.0)).unwrap();
        assert!((fs4.z_star - 2.0).abs() < 1e-6);
    }

    #[test]
    fn approx_toy() {
        let (s, _, e) = toy(0.1, 1.0);
        let sol = approx_wsusep(&e, &s).unwrap();
        assert!((sol.upsilon - 2.2361).abs() < 1e-4);
        assert!((sol.rho - 1.565e-3).abs() < 1e-6);
        let (s2, _, e2) = toy(0.05, 1.0);
        let sol2 = approx_wsusep(&e2, &s2).unwrap();
        assert!((sol2.upsilon / sol.upsilon - 2f64.sqrt()).abs() < 1e-6);
        assert!((sol2.x[0] - sol.x[0]).norm() < 1e-6);
    }

    #[test]
    fn barrier_toy() {
        let (s, _, e) = toy(0.1, 1.0);
        let (sol, tr) = wsusep_barrier_traced(&e, &s, &BarrierParams::default()).unwrap();
        let phi = crate::specfun::std_normal_cdf(10f64.sqrt()).unwrap();
        let truth = 1.0 - phi * phi;
        assert!((sol.rho - truth).abs() < 1e-6, "{} vs {truth}", sol.rho);
        assert!((tr.xbar[0] - 1.0).abs() < 1e-5 && tr.xbar[1].abs() < 1e-5, "{:?}", tr.xbar);
        assert!(sol.transmit_power() <= 1.0 + 1e-8);
    }

    #[test]
    fn analytic_zero_signal() {
        let (_, _, e) = toy(0.1, 1.0);
        assert!((analytic_wsusep(&e, &[0.0, 0.0]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn conventional_single_user_matched_filter() {
        let order = PskOrder::new(4).unwrap();
        let h = vec![Complex::new(1.0f64, 0.0), Complex::new(1.0, 0.0)];
        let s = Scenario::new(vec![h.clone()], vec![], 0.1, 1.0, vec![], order).unwrap();
        let sol = conventional_maxmin(&s).unwrap();
        assert!((sol.gamma - 20.0).abs() < 0.1, "{}", sol.gamma);
        assert!(sol.gamma_infeasible <= sol.gamma * (1.0 + 1e-4) + 1e-12);
        let w = &sol.w[0];
        let p: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        assert!((p - 1.0).abs() < 1e-3);
        // matched direction: w ∝ conj(h)
        assert!((w[0] - w[1]).norm() < 1e-3);
    }

    #[test]
    fn params_validation() {
        let mut p = BarrierParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.mu = 1.0;
        assert!(p.validate().is_err());
    }
}
