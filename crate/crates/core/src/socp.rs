//! Dense second-order cone programming: phase-1 feasibility search plus a
//! primal log-barrier method with damped Newton steps.
//!
//! Standard form: minimise `cᵀz` subject to `‖A_k z + b_k‖ ≤ d_kᵀz + e_k`,
//! `f_jᵀz ≤ g_j` and `E z = h`. Equalities are removed up front by writing
//! `z = z_p + F y` with `F` an orthonormal basis of the null space of `E`, so
//! both phases run on the reduced variable `y`.

use log::{debug, trace};

use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_solve, dot, norm, orthogonal_complement, row_space_basis, Mat};
use crate::scalar::Real;

/// `‖A z + b‖ ≤ dᵀz + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock<T> {
    pub a: Mat<T>,
    pub b: Vec<T>,
    pub d: Vec<T>,
    pub e: T,
}

impl<T: Real> SocBlock<T> {
    /// `dᵀz + e − ‖Az + b‖`; positive in the interior.
    pub fn slack(&self, z: &[T]) -> T {
        let mut v = self.a.mul_vec(z);
        axpy(T::one(), &self.b, &mut v);
        dot(&self.d, z) + self.e - norm(&v)
    }
}

/// `fᵀz ≤ g`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinConstraint<T> {
    pub f: Vec<T>,
    pub g: T,
}

impl<T: Real> LinConstraint<T> {
    pub fn slack(&self, z: &[T]) -> T {
        self.g - dot(&self.f, z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram<T> {
    pub n: usize,
    pub c: Vec<T>,
    pub soc: Vec<SocBlock<T>>,
    pub lin: Vec<LinConstraint<T>>,
    /// `(row, rhs)` meaning `rowᵀz = rhs`.
    pub eq: Vec<(Vec<T>, T)>,
}

impl<T: Real> ConeProgram<T> {
    pub fn new(c: Vec<T>) -> Self {
        Self {
            n: c.len(),
            c,
            soc: Vec::new(),
            lin: Vec::new(),
            eq: Vec::new(),
        }
    }

    pub fn add_soc(&mut self, a: Mat<T>, b: Vec<T>, d: Vec<T>, e: T) -> &mut Self {
        self.soc.push(SocBlock { a, b, d, e });
        self
    }

    pub fn add_lin(&mut self, f: Vec<T>, g: T) -> &mut Self {
        self.lin.push(LinConstraint { f, g });
        self
    }

    pub fn add_eq(&mut self, row: Vec<T>, rhs: T) -> &mut Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |what: String| Err(Error::Dimension(what));
        if self.c.len() != n {
            return bad(format!("objective has length {}, expected {n}", self.c.len()));
        }
        for (k, s) in self.soc.iter().enumerate() {
            if s.a.cols() != n || s.d.len() != n || s.a.rows() != s.b.len() {
                return bad(format!(
                    "cone {k}: A is {}×{}, b has {}, d has {} (n = {n})",
                    s.a.rows(),
                    s.a.cols(),
                    s.b.len(),
                    s.d.len()
                ));
            }
        }
        for (k, l) in self.lin.iter().enumerate() {
            if l.f.len() != n {
                return bad(format!("linear constraint {k} has length {}", l.f.len()));
            }
        }
        for (k, (row, _)) in self.eq.iter().enumerate() {
            if row.len() != n {
                return bad(format!("equality {k} has length {}", row.len()));
            }
        }
        let finite = self.c.iter().all(|v| v.is_finite())
            && self.soc.iter().all(|s| {
                s.e.is_finite()
                    && s.b.iter().chain(&s.d).all(|v| v.is_finite())
                    && (0..s.a.rows()).all(|i| s.a.row(i).iter().all(|v| v.is_finite()))
            })
            && self.lin.iter().all(|l| l.g.is_finite() && l.f.iter().all(|v| v.is_finite()))
            && self.eq.iter().all(|(r, h)| h.is_finite() && r.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidArgument("cone program has non-finite data".into()));
        }
        Ok(())
    }

    pub fn objective(&self, z: &[T]) -> T {
        dot(&self.c, z)
    }

    /// Smallest inequality slack at `z` (`+∞` with no inequalities).
    pub fn min_slack(&self, z: &[T]) -> T {
        self.soc
            .iter()
            .map(|s| s.slack(z))
            .chain(self.lin.iter().map(|l| l.slack(z)))
            .fold(T::infinity(), T::min)
    }

    /// Largest violation over all constraints, zero when feasible.
    pub fn max_violation(&self, z: &[T]) -> T {
        let ineq = (-self.min_slack(z)).max(T::zero());
        self.eq
            .iter()
            .map(|(r, h)| (dot(r, z) - *h).abs())
            .fold(ineq, T::max)
    }

    /// Barrier parameter `ν`: 2 per cone, 1 per halfspace.
    pub fn barrier_weight(&self) -> usize {
        2 * self.soc.len() + self.lin.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution<T> {
    pub z: Vec<T>,
    pub objective: T,
    pub status: ConeStatus,
    /// Newton steps over both phases.
    pub newton_iters: usize,
    /// `ν/s` at the last completed centering.
    pub duality_gap_bound: T,
    /// `cᵀz` after each outer barrier iteration of phase 2.
    pub outer_objectives: Vec<T>,
}

/// Result of a successful phase-1 search.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Point<T> {
    pub z: Vec<T>,
    pub min_slack: T,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub s0: T,
    pub mu: T,
    pub gap_tol: T,
    /// Stop centering once `λ²/2` falls below this.
    pub newton_tol: T,
    pub armijo: T,
    pub shrink: T,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Minimum slack a phase-1 point must have.
    pub slack_margin: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            s0: T::one(),
            mu: T::lit(10.0),
            gap_tol: T::lit(1e-8),
            newton_tol: T::lit(1e-10),
            armijo: T::lit(0.25),
            shrink: T::lit(0.5),
            max_outer: 60,
            max_newton: 5000,
            slack_margin: T::lit(1e-9),
        }
    }
}

const MAX_HALVINGS: usize = 80;
const SLOPE_MIN_STEP: f64 = 1.0 / 1024.0;

struct RCone<T> {
    a: Mat<T>,
    b: Vec<T>,
    d: Vec<T>,
    e: T,
    /// `ddᵀ − AᵀA`, the constant half-Hessian of `u² − ‖v‖²`.
    g: Mat<T>,
}

impl<T: Real> RCone<T> {
    fn new(a: Mat<T>, b: Vec<T>, d: Vec<T>, e: T) -> Self {
        let mut g = a.gram();
        for x in 0..g.rows() {
            for y in 0..g.cols() {
                g[(x, y)] = d[x] * d[y] - g[(x, y)];
            }
        }
        Self { a, b, d, e, g }
    }

    /// `(u, v)` with `u = dᵀy + e`, `v = Ay + b`.
    fn eval(&self, y: &[T]) -> (T, Vec<T>) {
        let mut v = self.a.mul_vec(y);
        axpy(T::one(), &self.b, &mut v);
        (dot(&self.d, y) + self.e, v)
    }
}

struct RLin<T> {
    f: Vec<T>,
    g: T,
}

/// Inequality-only barrier problem in reduced coordinates.
struct Core<T> {
    p: usize,
    c: Vec<T>,
    cones: Vec<RCone<T>>,
    lins: Vec<RLin<T>>,
}

impl<T: Real> Core<T> {
    fn nu(&self) -> T {
        T::from_usize_lossy(2 * self.cones.len() + self.lins.len())
    }

    /// Component of `c` along directions no constraint sees. The feasible set
    /// contains whole lines along it, so a nonzero value means unboundedness.
    fn free_objective(&self) -> T {
        let mut rows: Vec<Vec<T>> = self.lins.iter().map(|l| l.f.clone()).collect();
        for k in &self.cones {
            rows.extend((0..k.a.rows()).map(|i| k.a.row(i).to_vec()));
            rows.push(k.d.clone());
        }
        let (basis, _) = row_space_basis(&rows, T::lit(1e-10));
        let mut r = self.c.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        norm(&r)
    }

    fn min_slack(&self, y: &[T]) -> T {
        let mut m = T::infinity();
        for k in &self.cones {
            let (u, v) = k.eval(y);
            m = m.min(u - norm(&v));
        }
        for l in &self.lins {
            m = m.min(l.g - dot(&l.f, y));
        }
        m
    }

    /// Barrier value, `None` outside the interior.
    fn barrier(&self, y: &[T]) -> Option<T> {
        let mut phi = T::zero();
        for k in &self.cones {
            let (u, v) = k.eval(y);
            let nv = norm(&v);
            if !(u > nv) {
                return None;
            }
            phi -= ((u - nv) * (u + nv)).ln();
        }
        for l in &self.lins {
            let s = l.g - dot(&l.f, y);
            if !(s > T::zero()) {
                return None;
            }
            phi -= s.ln();
        }
        phi.is_finite().then_some(phi)
    }

    /// Gradient and Hessian of the barrier at an interior point.
    fn derivatives(&self, y: &[T]) -> (Vec<T>, Mat<T>) {
        let p = self.p;
        let mut grad = vec![T::zero(); p];
        let mut hess = Mat::zeros(p, p);
        let two = T::lit(2.0);
        for k in &self.cones {
            let (u, v) = k.eval(y);
            let nv = norm(&v);
            let delta = (u - nv) * (u + nv);
            // ∇Δ = 2u·d − 2Aᵀv
            let mut gd = k.a.tr_mul_vec(&v);
            for (gi, &di) in gd.iter_mut().zip(&k.d) {
                *gi = two * (u * di - *gi);
            }
            axpy(-T::one() / delta, &gd, &mut grad);
            hess.add_outer(T::one() / (delta * delta), &gd, &gd);
            hess.add_scaled(-two / delta, &k.g);
        }
        for l in &self.lins {
            let s = l.g - dot(&l.f, y);
            axpy(T::one() / s, &l.f, &mut grad);
            hess.add_outer(T::one() / (s * s), &l.f, &l.f);
        }
        (grad, hess)
    }
}

enum PathEnd {
    Gap,
    Stopped,
    Budget,
    Diverged,
}

struct PathOutcome<T> {
    end: PathEnd,
    s: T,
    newton_iters: usize,
    history: Vec<T>,
}

/// Damped Newton settings shared by every barrier solver in the crate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonSettings<T> {
    pub tol: T,
    pub armijo: T,
    pub shrink: T,
    pub budget: usize,
    /// Keep stepping while `‖∇‖` exceeds this even if the decrement is small.
    pub grad_tol: T,
}

/// Minimises `linᵀy + Φ(y)` from an interior `y`, where `barrier` returns
/// Φ or `None` outside the domain and Φ is convex there. The two parts are
/// differenced separately so that a large linear weight does not swamp the
/// Armijo test in rounding. Returns `false` when the Newton budget ran out.
pub(crate) fn damped_newton<T: Real>(
    y: &mut Vec<T>,
    lin: &[T],
    barrier: impl Fn(&[T]) -> Option<T>,
    derivs: impl Fn(&[T]) -> (Vec<T>, Mat<T>),
    st: &NewtonSettings<T>,
    iters: &mut usize,
) -> bool {
    loop {
        if *iters >= st.budget {
            return false;
        }
        let (g, h) = derivs(y);
        let dir: Vec<T> = match cholesky(&h) {
            Some(l) => cholesky_solve(&l, &g).into_iter().map(|v| -v).collect(),
            None => g.iter().map(|&v| -v).collect(),
        };
        let lambda2 = -dot(&g, &dir);
        if !(lambda2 > T::zero()) || !lambda2.is_finite() || (lambda2 * T::lit(0.5) <= st.tol && norm(&g) <= st.grad_tol) {
            return true;
        }
        let Some(phi0) = barrier(y) else {
            return true;
        };
        let lin_dir = dot(lin, &dir);
        let floor = T::epsilon() * (T::one() + norm(y));
        let dnorm = norm(&dir);
        let mut t = T::one();
        let mut accepted = false;
        let mut trial = y.clone();
        for _ in 0..MAX_HALVINGS {
            if t * dnorm <= floor {
                break;
            }
            for ((ti, &yi), &di) in trial.iter_mut().zip(y.iter()).zip(&dir) {
                *ti = yi + t * di;
            }
            if let Some(phi) = barrier(&trial) {
                let decrease = t * lin_dir + (phi - phi0);
                if decrease < T::zero() && decrease <= -st.armijo * t * lambda2 {
                    accepted = true;
                    break;
                }
                // Near the rounding level of Φ (slacks of 1e-8 lose half their
                // digits to cancellation) the values cannot certify descent,
                // but for a convex objective a nonpositive slope at the trial
                // point does. Only near-full steps qualify; a tiny accepted t
                // would just crawl along a poor direction.
                if t >= T::lit(SLOPE_MIN_STEP) && (phi - phi0).abs() <= T::lit(1e-6) * (T::one() + phi0.abs()) {
                    let slope = dot(&derivs(&trial).0, &dir);
                    if slope <= T::zero() {
                        accepted = true;
                        break;
                    }
                }
            }
            t *= st.shrink;
        }
        if !accepted {
            // Rounding floor: the decrease can no longer be resolved.
            trace!("line search stalled at lambda^2 = {lambda2:e}");
            return true;
        }
        std::mem::swap(y, &mut trial);
        *iters += 1;
    }
}

fn center<T: Real>(core: &Core<T>, y: &mut Vec<T>, s: T, opts: &SolverOptions<T>, iters: &mut usize) -> bool {
    let st = NewtonSettings {
        tol: opts.newton_tol,
        armijo: opts.armijo,
        shrink: opts.shrink,
        budget: opts.max_newton,
        grad_tol: T::infinity(),
    };
    let lin: Vec<T> = core.c.iter().map(|&v| s * v).collect();
    damped_newton(
        y,
        &lin,
        |y| core.barrier(y),
        |y| {
            let (mut g, h) = core.derivatives(y);
            axpy(s, &core.c, &mut g);
            (g, h)
        },
        &st,
        iters,
    )
}

fn run_path<T: Real>(
    core: &Core<T>,
    y: &mut Vec<T>,
    opts: &SolverOptions<T>,
    guard: T,
    mut stop: impl FnMut(&[T], T) -> bool,
) -> PathOutcome<T> {
    let nu = core.nu();
    let mut s = opts.s0;
    let mut iters = 0usize;
    let mut history = Vec::new();
    for outer in 0..opts.max_outer {
        let ok = center(core, y, s, opts, &mut iters);
        if norm(y) > guard {
            return PathOutcome { end: PathEnd::Diverged, s, newton_iters: iters, history };
        }
        history.push(dot(&core.c, y));
        debug!(
            "barrier outer {outer}: s = {s:e}, objective = {:e}, gap <= {:e}, newton = {iters}",
            history[history.len() - 1],
            nu / s
        );
        if !ok {
            return PathOutcome { end: PathEnd::Budget, s, newton_iters: iters, history };
        }
        if stop(y, s) {
            return PathOutcome { end: PathEnd::Stopped, s, newton_iters: iters, history };
        }
        if nu / s <= opts.gap_tol {
            return PathOutcome { end: PathEnd::Gap, s, newton_iters: iters, history };
        }
        s *= opts.mu;
    }
    PathOutcome { end: PathEnd::Budget, s, newton_iters: iters, history }
}

/// Program with equalities eliminated: `z = z_p + F y`.
struct Reduced<T> {
    core: Core<T>,
    z_p: Vec<T>,
    /// n×p, orthonormal columns.
    f: Mat<T>,
    scale: T,
}

impl<T: Real> Reduced<T> {
    fn lift(&self, y: &[T]) -> Vec<T> {
        let mut z = self.f.mul_vec(y);
        axpy(T::one(), &self.z_p, &mut z);
        z
    }

    fn project(&self, z: &[T]) -> Vec<T> {
        let diff: Vec<T> = z.iter().zip(&self.z_p).map(|(&a, &b)| a - b).collect();
        self.f.tr_mul_vec(&diff)
    }
}

fn data_scale<T: Real>(prog: &ConeProgram<T>) -> T {
    let mut m = T::one();
    for s in &prog.soc {
        m = m.max(s.e.abs()).max(norm(&s.b));
    }
    for l in &prog.lin {
        m = m.max(l.g.abs());
    }
    for (_, h) in &prog.eq {
        m = m.max(h.abs());
    }
    m
}

/// `Ok(None)` when the equalities are inconsistent.
fn reduce<T: Real>(prog: &ConeProgram<T>) -> Result<Option<Reduced<T>>> {
    prog.validate()?;
    let n = prog.n;
    let rows: Vec<Vec<T>> = prog.eq.iter().map(|(r, _)| r.clone()).collect();
    let (basis, picked) = row_space_basis(&rows, T::lit(1e-10));

    let mut z_p = vec![T::zero(); n];
    if !picked.is_empty() {
        let ep = Mat::from_rows(&picked.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>());
        let gram = ep.mul(&ep.transpose());
        let rhs: Vec<T> = picked.iter().map(|&i| prog.eq[i].1).collect();
        let l = cholesky(&gram).ok_or_else(|| Error::Solver("equality rows are numerically dependent".into()))?;
        // min-norm solution plus one refinement pass
        for _ in 0..2 {
            let res: Vec<T> = rhs.iter().zip(ep.mul_vec(&z_p)).map(|(&h, v)| h - v).collect();
            let alpha = cholesky_solve(&l, &res);
            axpy(T::one(), &ep.tr_mul_vec(&alpha), &mut z_p);
        }
        let zn = norm(&z_p);
        for (row, h) in &prog.eq {
            let tol = T::lit(1e-9) * (T::one() + h.abs() + norm(row) * zn);
            if (dot(row, &z_p) - *h).abs() > tol {
                return Ok(None);
            }
        }
    }

    let comp = orthogonal_complement(&basis, n);
    let p = comp.len();
    let f = if p == 0 {
        Mat::zeros(n, 0)
    } else {
        Mat::from_rows(&comp).transpose()
    };

    let c = f.tr_mul_vec(&prog.c);
    let cones = prog
        .soc
        .iter()
        .map(|s| {
            let mut b = s.a.mul_vec(&z_p);
            axpy(T::one(), &s.b, &mut b);
            RCone::new(s.a.mul(&f), b, f.tr_mul_vec(&s.d), s.e + dot(&s.d, &z_p))
        })
        .collect();
    let lins = prog
        .lin
        .iter()
        .map(|l| RLin {
            f: f.tr_mul_vec(&l.f),
            g: l.g - dot(&l.f, &z_p),
        })
        .collect();
    Ok(Some(Reduced {
        core: Core { p, c, cones, lins },
        z_p,
        f,
        scale: data_scale(prog),
    }))
}

/// Auxiliary problem over `(y, τ)`: maximise τ with every slack ≥ τ, τ ≤ 1
/// and `‖y‖ ≤ radius`.
fn auxiliary<T: Real>(core: &Core<T>, radius: T) -> Core<T> {
    let p = core.p;
    let widen = |v: &[T], last: T| {
        let mut w = v.to_vec();
        w.push(last);
        w
    };
    let mut c = vec![T::zero(); p + 1];
    c[p] = -T::one();
    let mut cones: Vec<RCone<T>> = core
        .cones
        .iter()
        .map(|k| {
            let mut a = Mat::zeros(k.a.rows(), p + 1);
            for i in 0..k.a.rows() {
                a.row_mut(i)[..p].copy_from_slice(k.a.row(i));
            }
            RCone::new(a, k.b.clone(), widen(&k.d, -T::one()), k.e)
        })
        .collect();
    let mut ball = Mat::zeros(p, p + 1);
    for i in 0..p {
        ball[(i, i)] = T::one();
    }
    cones.push(RCone::new(ball, vec![T::zero(); p], vec![T::zero(); p + 1], radius));
    let mut lins: Vec<RLin<T>> = core
        .lins
        .iter()
        .map(|l| RLin {
            f: widen(&l.f, T::one()),
            g: l.g,
        })
        .collect();
    let mut cap = vec![T::zero(); p + 1];
    cap[p] = T::one();
    lins.push(RLin { f: cap, g: T::one() });
    Core {
        p: p + 1,
        c,
        cones,
        lins,
    }
}

enum Phase1<T> {
    Feasible { y: Vec<T>, iters: usize },
    Infeasible { y: Vec<T>, iters: usize },
}

fn phase1_reduced<T: Real>(red: &Reduced<T>, opts: &SolverOptions<T>) -> Result<Phase1<T>> {
    let core = &red.core;
    let y0 = vec![T::zero(); core.p];
    let s0 = core.min_slack(&y0);
    if s0 > opts.slack_margin {
        return Ok(Phase1::Feasible { y: y0, iters: 0 });
    }
    let radius = T::lit(1e7) * (T::one() + red.scale);
    let aux = auxiliary(core, radius);
    let mut w = y0;
    w.push(s0.min(T::one()) - T::one());
    let nu = aux.nu();
    let mut infeasible = false;
    let margin = opts.slack_margin;
    let out = run_path(&aux, &mut w, opts, radius * T::lit(2.0), |w, s| {
        let y = &w[..w.len() - 1];
        if core.min_slack(y) > margin {
            return true;
        }
        if w[w.len() - 1] + nu / s <= T::zero() {
            infeasible = true;
            return true;
        }
        false
    });
    let y = w[..core.p].to_vec();
    let slack = core.min_slack(&y);
    if slack > margin {
        return Ok(Phase1::Feasible { y, iters: out.newton_iters });
    }
    if norm(&y) > T::lit(0.9) * radius {
        return Err(Error::Unbounded("phase-1 iterates reached the guard radius".into()));
    }
    match out.end {
        PathEnd::Gap | PathEnd::Stopped => {
            debug_assert!(infeasible || matches!(out.end, PathEnd::Gap));
            Ok(Phase1::Infeasible { y, iters: out.newton_iters })
        }
        PathEnd::Budget => Err(Error::Solver("phase 1 exhausted its iteration budget".into())),
        PathEnd::Diverged => Err(Error::Unbounded("phase-1 iterates diverged".into())),
    }
}

/// Finds a point with every inequality slack above the margin and the
/// equalities satisfied to rounding.
pub fn phase1<T: Real>(prog: &ConeProgram<T>) -> Result<Phase1Point<T>> {
    phase1_with(prog, &SolverOptions::default())
}

pub fn phase1_with<T: Real>(prog: &ConeProgram<T>, opts: &SolverOptions<T>) -> Result<Phase1Point<T>> {
    let red = reduce(prog)?.ok_or_else(|| Error::Infeasible("inconsistent equality constraints".into()))?;
    match phase1_reduced(&red, opts)? {
        Phase1::Feasible { y, iters, .. } => {
            let z = red.lift(&y);
            Ok(Phase1Point {
                min_slack: prog.min_slack(&z),
                z,
                newton_iters: iters,
            })
        }
        Phase1::Infeasible { .. } => Err(Error::Infeasible("no strictly feasible point".into())),
    }
}

pub fn solve<T: Real>(prog: &ConeProgram<T>, start: Option<&[T]>) -> Result<ConeSolution<T>> {
    solve_with(prog, start, &SolverOptions::default())
}

pub fn solve_with<T: Real>(prog: &ConeProgram<T>, start: Option<&[T]>, opts: &SolverOptions<T>) -> Result<ConeSolution<T>> {
    let infeasible = |z: Vec<T>, iters: usize| {
        let objective = prog.objective(&z);
        ConeSolution {
            z,
            objective,
            status: ConeStatus::Infeasible,
            newton_iters: iters,
            duality_gap_bound: T::infinity(),
            outer_objectives: Vec::new(),
        }
    };
    let Some(red) = reduce(prog)? else {
        return Ok(infeasible(vec![T::zero(); prog.n], 0));
    };
    let core = &red.core;

    let (mut y, phase1_iters) = match start {
        Some(z0) => {
            if z0.len() != prog.n {
                return Err(Error::Dimension(format!("start has length {}, expected {}", z0.len(), prog.n)));
            }
            let y = red.project(z0);
            let tol = T::lit(1e-8) * (T::one() + red.scale);
            if !(core.min_slack(&y) > T::zero()) || prog.max_violation(z0) > tol {
                return Err(Error::InvalidArgument("start point is not strictly feasible".into()));
            }
            (y, 0)
        }
        None => match phase1_reduced(&red, opts)? {
            Phase1::Feasible { y, iters, .. } => (y, iters),
            Phase1::Infeasible { y, iters } => return Ok(infeasible(red.lift(&y), iters)),
        },
    };

    if core.p == 0 || (core.cones.is_empty() && core.lins.is_empty()) {
        if norm(&core.c) > T::lit(1e-12) * (T::one() + norm(&prog.c)) {
            return Err(Error::Unbounded("objective is unbounded below on the affine set".into()));
        }
        let z = red.lift(&y);
        return Ok(ConeSolution {
            objective: prog.objective(&z),
            z,
            status: ConeStatus::Optimal,
            newton_iters: phase1_iters,
            duality_gap_bound: T::zero(),
            outer_objectives: Vec::new(),
        });
    }

    if core.free_objective() > T::lit(1e-12) * (T::one() + norm(&core.c)) {
        return Err(Error::Unbounded("objective decreases along a direction no constraint restricts".into()));
    }

    let guard = T::lit(1e10) * (T::one() + norm(&y) + red.scale);
    let out = run_path(core, &mut y, opts, guard, |_, _| false);
    if matches!(out.end, PathEnd::Diverged) {
        return Err(Error::Unbounded("barrier iterates left the guard region".into()));
    }
    let z = red.lift(&y);
    let status = match out.end {
        PathEnd::Gap => ConeStatus::Optimal,
        _ => ConeStatus::MaxIter,
    };
    let sol = ConeSolution {
        objective: prog.objective(&z),
        status,
        newton_iters: phase1_iters + out.newton_iters,
        duality_gap_bound: core.nu() / out.s,
        outer_objectives: out
            .history
            .iter()
            .map(|&o| o + dot(&prog.c, &red.z_p))
            .collect(),
        z,
    };
    debug_assert!(
        sol.status != ConeStatus::Optimal || prog.max_violation(&sol.z) <= T::lit(1e-8) * (T::one() + red.scale),
        "optimal point violates constraints by {}",
        prog.max_violation(&sol.z)
    );
    Ok(sol)
}
