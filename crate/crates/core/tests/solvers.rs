mod common;

use common::{fd_gradient, reference_scenario, normal_cdf, random_ula_scenario, toy_scenario};
use crbeam::model::*;
use crbeam::solvers::*;
use crbeam::{Complex64, Error};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame(s: &Scenario<f64>, idx: Vec<usize>) -> SymbolFrame<f64> {
    SymbolFrame::new(&s.constellation(), idx).unwrap()
}

fn emb_for(s: &Scenario<f64>, idx: Vec<usize>) -> RealEmbedding<f64> {
    build_embedding(s, &frame(s, idx)).unwrap()
}

fn random_emb(s: &Scenario<f64>, rng: &mut ChaCha8Rng) -> RealEmbedding<f64> {
    let f = SymbolFrame::random(&s.constellation(), s.num_sus(), rng);
    build_embedding(s, &f).unwrap()
}

// Toy: one antenna, h = 1, QPSK at 45°, σ² = 0.1, P = 1. The best x puts the
// symbol at full amplitude, so each margin is |x| = 1, Υ = cos(π/4)/σ = √5 and
// the exact error is 1 − Φ(1/σ_ñ)² with σ_ñ = σ/(√2 cos θ) = √0.1.

#[test]
fn toy_feasibility_margin_scales_with_sqrt_power() {
    let s = toy_scenario();
    for k in 0..4 {
        let e = emb_for(&s, vec![k]);
        let fs = feasibility_start(&e, &s).unwrap();
        assert!((fs.z_star - 1.0).abs() < 1e-6, "z* = {}", fs.z_star);
        let s4 = s.with_power(4.0);
        let e4 = emb_for(&s4, vec![k]);
        let fs4 = feasibility_start(&e4, &s4).unwrap();
        assert!((fs4.z_star - 2.0).abs() < 1e-6);
    }
}

#[test]
fn toy_approx_noise_margin() {
    let s = toy_scenario();
    let a = approx_wsusep(&emb_for(&s, vec![1]), &s).unwrap();
    assert!((a.upsilon - 5f64.sqrt()).abs() < 1e-4, "{}", a.upsilon);
    assert!((a.transmit_power() - 1.0).abs() < 1e-6);
    let s2 = s.with_power(2.0);
    let a2 = approx_wsusep(&emb_for(&s2, vec![1]), &s2).unwrap();
    assert!((a2.upsilon / a.upsilon - 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn toy_barrier_matches_closed_form() {
    let s = toy_scenario();
    let q = normal_cdf(10f64.sqrt());
    let expected = 1.0 - q * q;
    for k in 0..4 {
        let e = emb_for(&s, vec![k]);
        let b = wsusep_barrier(&e, &s, &BarrierParams::default()).unwrap();
        assert!((b.rho - expected).abs() < 1e-6, "ρ = {:e}, want {expected:e}", b.rho);
        let analytic = analytic_wsusep(&e, &embed_complex(&b.x));
        assert!((analytic - expected).abs() < 1e-6);
    }
}

#[test]
fn analytic_sep_at_origin_and_monotone_in_scale() {
    let s = toy_scenario();
    let e = emb_for(&s, vec![2]);
    assert!((analytic_wsusep(&e, &[0.0, 0.0]) - 0.75).abs() < 1e-12);
    let fs = feasibility_start(&e, &s).unwrap();
    let mut last = 1.0;
    for k in 1..=10 {
        let x: Vec<f64> = fs.xbar.iter().map(|v| v * k as f64 / 10.0).collect();
        let q = analytic_wsusep(&e, &x);
        assert!(q < last, "not decreasing at scale {k}");
        last = q;
    }
}

#[test]
fn conventional_single_user_matches_mrt() {
    for (n, p) in [(1usize, 1.0), (4, 1.0), (6, 2.5)] {
        let s: Scenario<f64> = Scenario::from_directions(n, &[25.0], &[], 0.1, p, vec![], PskOrder::new(4).unwrap()).unwrap();
        let c = conventional_maxmin(&s).unwrap();
        let want = p * n as f64 / 0.1;
        assert!((c.gamma / want - 1.0).abs() < 5e-3, "γ = {}, want {want}", c.gamma);
        assert!(c.gamma_infeasible <= c.gamma * (1.0 + 1e-4) * (1.0 + 1e-12));
        // the optimum is matched filtering: w ∝ conj(h)
        let h = &s.su_channels[0];
        let w = &c.w[0];
        let hw: Complex64 = h.iter().zip(w).map(|(a, b)| a * b).sum();
        let nw = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((hw.norm() / (nw * (n as f64).sqrt()) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn conventional_ignores_slack_interference_budgets() {
    let d = default_directions(None);
    let order = PskOrder::new(4).unwrap();
    let free: Scenario<f64> = Scenario::from_directions(6, &d.su[..3], &[], 0.1, 2.0, vec![], order).unwrap();
    let loose: Scenario<f64> = Scenario::from_directions(6, &d.su[..3], &d.pu, 0.1, 2.0, vec![1e6, 1e6], order).unwrap();
    let a = conventional_maxmin(&free).unwrap();
    let b = conventional_maxmin(&loose).unwrap();
    assert!((a.gamma / b.gamma - 1.0).abs() < 2e-4);
}

#[test]
fn conventional_certificate_and_bracket() {
    let s = reference_scenario();
    let c = conventional_maxmin(&s).unwrap();
    assert!(c.gamma_infeasible > c.gamma);
    assert!(c.gamma_infeasible - c.gamma <= 1e-4 * c.gamma * (1.0 + 1e-9));
    let sinr = sinr(&s, &c.w);
    let worst = sinr.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(worst >= c.gamma * (1.0 - 1e-6), "{worst} < {}", c.gamma);
    let pw: f64 = c.w.iter().flatten().map(|v| v.norm_sqr()).sum();
    assert!(pw <= s.power * (1.0 + 1e-8));
    for (g, eps) in s.pu_channels.iter().zip(&s.eps) {
        let i: f64 = c.w.iter().map(|w| channel_gain(g, w).norm_sqr()).sum();
        assert!(i <= eps * (1.0 + 1e-8));
    }
}

#[test]
fn aligned_primary_user_binds_the_interference_budget() {
    // the PU sits on the SU direction, so its budget caps the SU signal
    let order = PskOrder::new(4).unwrap();
    let mk = |eps: f64| -> Scenario<f64> { Scenario::from_directions(4, &[30.0], &[30.0], 0.1, 10.0, vec![eps], order).unwrap() };
    let s = mk(0.5);
    let e = emb_for(&s, vec![0]);
    let a = approx_wsusep(&e, &s).unwrap();
    let i = a.interference(&s)[0];
    assert!((i - 0.5).abs() < 1e-6, "interference {i}");
    let b = wsusep_barrier(&e, &s, &BarrierParams::default()).unwrap();
    assert!(b.interference(&s)[0] <= 0.5 * (1.0 + 1e-8));

    let s2 = mk(0.55);
    let e2 = emb_for(&s2, vec![0]);
    assert!(approx_wsusep(&e2, &s2).unwrap().rho < a.rho);
    assert!(wsusep_barrier(&e2, &s2, &BarrierParams::default()).unwrap().rho < b.rho);

    let z = mk(0.0);
    let ez = emb_for(&z, vec![0]);
    assert!(matches!(approx_wsusep(&ez, &z), Err(Error::Infeasible(_))));
}

#[test]
fn inner_approximation_ordering_and_compliance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..25 {
        let s = random_ula_scenario(&mut rng, 6, 3, 2, 4, 8.0, -2.0);
        let e = random_emb(&s, &mut rng);
        let Ok(a) = approx_wsusep(&e, &s) else { continue };
        let xa = embed_complex(&a.x);
        assert!(analytic_wsusep(&e, &xa) <= rho_from_upsilon(a.upsilon) + 1e-9);
        for sol in std::iter::once(&a).chain(wsusep_barrier(&e, &s, &BarrierParams::default()).as_ref().ok()) {
            assert!(sol.transmit_power() <= s.power * (1.0 + 1e-8));
            for (i, eps) in sol.interference(&s).iter().zip(&s.eps) {
                assert!(*i <= eps * (1.0 + 1e-8));
            }
        }
        if let Ok(b) = wsusep_barrier(&e, &s, &BarrierParams::default()) {
            assert!(a.rho >= b.rho - 1e-6, "approx {} < exact {}", a.rho, b.rho);
            checked += 1;
        }
    }
    assert!(checked >= 15, "only {checked} instances solved by both");
}

#[test]
fn barrier_gradient_and_hessian_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut points = 0;
    while points < 100 {
        let s = random_ula_scenario(&mut rng, 4, 2, 1, 4, 8.0, 0.0);
        let e = random_emb(&s, &mut rng);
        let Ok(fs) = feasibility_start(&e, &s) else { continue };
        let obj = WsusepBarrier::new(&e, &s).unwrap();
        let r = obj.region_threshold() / fs.z_star;
        if !(r < 0.9) {
            continue;
        }
        let lam = r + (1.0 - r) * rng.random_range(0.3..0.95);
        let mut v: Vec<f64> = fs.xbar.iter().map(|x| x * lam).collect();
        let q = analytic_wsusep(&e, &v);
        v.push(q + rng.random_range(1e-3..0.2));
        let Some(_) = obj.psi(&v) else { continue };
        let (g, h) = obj.psi_derivatives(&v);
        let step = 1e-6;
        let fd = fd_gradient(|y| obj.psi(y).unwrap(), &v, step);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "grad {a} vs fd {b}");
        }
        for j in 0..v.len() {
            let col = fd_gradient(
                |y| {
                    let mut w = v.clone();
                    w[j] = y[0];
                    obj.psi_derivatives(&w).0.iter().sum::<f64>()
                },
                &[v[j]],
                step,
            )[0];
            let want: f64 = (0..v.len()).map(|i| h[(i, j)]).sum();
            assert!((want - col).abs() <= 1e-4 * (1.0 + want.abs()), "hess col {j}: {want} vs {col}");
        }
        let s_par = 7.0;
        let gs = obj.gradient(&v, s_par);
        for (a, b) in gs.iter().zip(&g) {
            let want = b / s_par;
            assert!((a - want).abs() <= 1e-15 * (1.0 + want.abs()) || (a - want - 1.0).abs() < 1e-12);
        }
        points += 1;
    }
}

#[test]
fn barrier_converges_to_stationary_point_on_low_error_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = 0;
    for _ in 0..40 {
        let s = random_ula_scenario(&mut rng, 6, 3, 2, 4, 10.0, 0.0);
        let e = random_emb(&s, &mut rng);
        let Ok((b, tr)) = wsusep_barrier_traced(&e, &s, &BarrierParams::default()) else { continue };
        assert_eq!(b.stats.status, SolveStatus::Optimal);
        // above ρ ≈ 0.05 the rounding of ρ − Q_i at s = 1e10 sets a floor of a few 1e-6
        let tol = if b.rho <= 1e-2 { 1e-6 } else { 1e-5 };
        assert!(tr.gradient_norm <= tol, "‖∇‖ = {:e} at ρ = {:e}", tr.gradient_norm, b.rho);
        seen += usize::from(b.rho <= 1e-2);
    }
    assert!(seen >= 10, "only {seen} low-error instances");
}

#[test]
fn ill_posed_frames_are_reported() {
    // power so low that no symbol reaches the concavity region
    let s = reference_scenario().with_power(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = random_emb(&s, &mut rng);
    match wsusep_barrier(&e, &s, &BarrierParams::default()) {
        Err(Error::IllPosed { z_star, threshold }) => assert!(z_star < threshold),
        Err(Error::Infeasible(_)) => {}
        other => panic!("expected an ill-posed frame, got {other:?}"),
    }
}

#[test]
fn barrier_params_are_validated() {
    let s = toy_scenario();
    let e = emb_for(&s, vec![0]);
    let bad = BarrierParams { mu: 1.0, ..BarrierParams::default() };
    assert!(matches!(wsusep_barrier(&e, &s, &bad), Err(Error::InvalidArgument(_))));
    let bad = BarrierParams { delta_t: 0.0, ..BarrierParams::default() };
    assert!(wsusep_barrier(&e, &s, &bad).is_err());
}

#[test]
fn higher_order_psk_costs_more_margin() {
    let mut last = 0.0;
    for m in [4u32, 8, 16] {
        let s = Scenario::new(
            vec![vec![Complex::new(1.0, 0.0)]],
            vec![],
            0.1,
            1.0,
            vec![],
            PskOrder::new(m).unwrap(),
        )
        .unwrap();
        let a = approx_wsusep(&emb_for(&s, vec![0]), &s).unwrap();
        assert!(a.rho > last);
        last = a.rho;
    }
}
