mod common;

use std::collections::BTreeMap;

use common::random_ula_scenario;
use crbeam::model::*;
use crbeam::montecarlo::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn small_scenario(p_dbw: f64, sigma2: f64) -> Scenario<f64> {
    let d = default_directions(None);
    let eps = db_to_linear(-2.0);
    Scenario::from_directions(6, &d.su[..3], &d.pu, sigma2, db_to_linear(p_dbw), vec![eps, eps], PskOrder::new(4).unwrap())
        .unwrap()
}

#[test]
fn noiseless_links_never_err() {
    let cfg = McConfig::new(small_scenario(5.0, 1e-12), Method::ALL.to_vec(), 1000, 3);
    let r = run_mc(&cfg).unwrap();
    assert!(r.stats.valid);
    for m in &r.stats.methods {
        assert_eq!(m.worst_errors, 0, "{}", m.method);
        assert_eq!(m.wuser, 0.0);
        assert!(m.user_errors.iter().all(|&e| e == 0));
    }
}

#[test]
fn statistics_do_not_depend_on_worker_count() {
    let s = small_scenario(5.0, 0.1);
    let d = default_directions(None);
    let mut cfg = McConfig::new(s, Method::ALL.to_vec(), 300, 17);
    cfg.symbols_per_frame = 40;
    cfg.received_runs = 5;
    cfg.channel_mode = ChannelMode::Redraw {
        su_angles: d.su[..3].to_vec(),
        pu_angles: d.pu.clone(),
        jitter_deg: 2.0,
    };
    cfg.workers = Some(1);
    let one = run_mc(&cfg).unwrap();
    cfg.workers = Some(8);
    let eight = run_mc(&cfg).unwrap();
    assert_eq!(one.stats, eight.stats);
    cfg.seed = 18;
    assert_ne!(run_mc(&cfg).unwrap().stats, one.stats);
}

#[test]
fn proposed_designs_respect_every_interference_budget() {
    let cfg = McConfig::new(small_scenario(8.0, 0.1), Method::ALL.to_vec(), 400, 5);
    let r = run_mc(&cfg).unwrap();
    for m in [Method::Approx, Method::Wsusep] {
        let st = r.stats.method(m).unwrap();
        for per_pu in &st.zeta {
            assert_eq!(per_pu.len(), r.stats.runs_effective);
            for &(_, z) in per_pu {
                assert!(z <= 1.0 + ZETA_TOL, "{m}: ζ = {z}");
            }
        }
        assert!(st.violations.iter().all(|&v| v == 0));
    }
}

#[test]
fn accounting_is_consistent() {
    let mut cfg = McConfig::new(small_scenario(5.0, 0.1), Method::ALL.to_vec(), 250, 8);
    cfg.received_runs = 7;
    let r = run_mc(&cfg).unwrap();
    let st = &r.stats;
    assert_eq!(st.runs_effective + st.excluded, st.runs_requested);
    assert_eq!(st.received.len(), 7 * 3 * cfg.methods.len());
    for m in &st.methods {
        assert_eq!(m.runs, st.runs_effective);
        assert_eq!(m.psi.total(), (3 * st.runs_effective) as u64);
        // wrong detection is exactly a phase deviation beyond the half-angle
        assert_eq!(m.psi_error, m.user_errors);
        let max = *m.user_errors.iter().max().unwrap();
        assert_eq!(m.max_user_ser, max as f64 / m.runs as f64);
        assert!(m.worst_errors <= m.user_errors.iter().sum::<u64>());
        let n = m.runs as f64;
        assert!((m.stderr - (m.wuser * (1.0 - m.wuser) / n).sqrt()).abs() < 1e-15);
    }
    for t in &r.timing {
        assert!(t.solves > 0 && t.p50_s <= t.p95_s);
    }
}

#[test]
fn pure_noise_phase_is_uniform() {
    // with negligible transmit power the received phase is that of the noise
    let s = small_scenario(-100.0, 0.1);
    let mut cfg = McConfig::new(s, vec![Method::Approx], 4000, 21);
    cfg.psi_bins = 24;
    let r = run_mc(&cfg).unwrap();
    let h = &r.stats.methods[0].psi;
    let n = h.total() as f64;
    let p = 1.0 / h.bins() as f64;
    let sd = (n * p * (1.0 - p)).sqrt();
    for (k, &c) in h.counts.iter().enumerate() {
        assert!((c as f64 - n * p).abs() <= 4.0 * sd, "bin {k}: {c} vs {}", n * p);
    }
    // and 3/4 of QPSK symbols are then wrong
    let st = &r.stats.methods[0];
    let ser = st.user_errors.iter().sum::<u64>() as f64 / n;
    assert!((ser - 0.75).abs() < 4.0 * (0.75 * 0.25 / n).sqrt());
}

#[test]
fn empirical_error_tracks_the_analytic_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = random_ula_scenario(&mut rng, 6, 3, 1, 4, 3.0, 0.0);
    let cfg = McConfig::new(s, vec![Method::Approx, Method::Wsusep], 3000, 31);
    let r = run_mc(&cfg).unwrap();
    for m in &r.stats.methods {
        let tol = 4.0 * (m.analytic_mean * (1.0 - m.analytic_mean) / m.runs as f64).sqrt() + 1e-3;
        assert!((m.wuser - m.analytic_mean).abs() <= tol, "{}: {} vs {}", m.method, m.wuser, m.analytic_mean);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let s = small_scenario(5.0, 0.1);
    let base = McConfig::new(s, vec![Method::Approx], 10, 0);
    let bad = [
        McConfig { runs: 0, ..base.clone() },
        McConfig { methods: vec![], ..base.clone() },
        McConfig { psi_bins: 1, ..base.clone() },
        McConfig { workers: Some(0), ..base.clone() },
        McConfig { symbols_per_frame: 0, ..base.clone() },
        McConfig {
            channel_mode: ChannelMode::Redraw { su_angles: vec![0.0], pu_angles: vec![], jitter_deg: 1.0 },
            ..base.clone()
        },
    ];
    for c in &bad {
        assert!(run_mc(c).is_err());
    }
}

#[derive(Debug, Deserialize)]
struct Wuser {
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

#[derive(Debug, Deserialize)]
struct Zeta {
    method: String,
    pu_index: usize,
    run: usize,
    zeta: f64,
}

#[derive(Debug, Deserialize)]
struct Psi {
    method: String,
    bin_left: f64,
    bin_right: f64,
    count: u64,
}

#[derive(Debug, Deserialize)]
struct Timing {
    method: String,
    solves: usize,
    mean_s: f64,
    p50_s: f64,
    p95_s: f64,
}

fn read<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Vec<T> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn csv_report_round_trips() {
    let s = small_scenario(5.0, 0.1);
    let mut cfg = McConfig::new(s.clone(), Method::ALL.to_vec(), 140, 2);
    cfg.psi_bins = 12;
    let r = run_mc(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(dir.path(), &r, &s, CsvContext { p_dbw: 5.0, eps_dbw: -2.0 }).unwrap();

    let w: Vec<Wuser> = read(&dir.path().join("wuser.csv"));
    assert_eq!(w.len(), 3);
    for (row, m) in w.iter().zip(&r.stats.methods) {
        assert_eq!(row.method, m.method.to_string());
        assert_eq!((row.p_dbw, row.k, row.m, row.eps_dbw, row.runs), (5.0, 3, 4, -2.0, m.runs));
        assert_eq!((row.wuser, row.stderr, row.analytic_mean, row.max_user_ser), (m.wuser, m.stderr, m.analytic_mean, m.max_user_ser));
    }

    let z: Vec<Zeta> = read(&dir.path().join("zeta.csv"));
    assert_eq!(z.len(), 3 * 2 * r.stats.runs_effective);
    let mut by_key = BTreeMap::new();
    for row in &z {
        by_key.insert((row.method.clone(), row.pu_index, row.run), row.zeta);
    }
    for m in &r.stats.methods {
        for (pl, per) in m.zeta.iter().enumerate() {
            for &(run, v) in per {
                assert_eq!(by_key[&(m.method.to_string(), pl, run)], v);
            }
        }
    }

    let p: Vec<Psi> = read(&dir.path().join("psi.csv"));
    assert_eq!(p.len(), 3 * 12);
    for (chunk, m) in p.chunks(12).zip(&r.stats.methods) {
        assert!(chunk.iter().all(|row| row.method == m.method.to_string()));
        assert!((chunk[0].bin_left + std::f64::consts::PI).abs() < 1e-15);
        assert!((chunk[11].bin_right - std::f64::consts::PI).abs() < 1e-12);
        let counts: Vec<u64> = chunk.iter().map(|row| row.count).collect();
        assert_eq!(counts, m.psi.counts);
    }

    let t: Vec<Timing> = read(&dir.path().join("timing.csv"));
    assert_eq!(t.len(), 3);
    assert!(t.iter().all(|row| row.solves > 0 && row.mean_s >= 0.0 && row.p50_s <= row.p95_s));
    assert_eq!(t[0].method, "conventional");
}

#[test]
fn per_run_streams_are_reproducible() {
    let mut a = run_rng(5, 12);
    let mut b = run_rng(5, 12);
    let mut c = run_rng(5, 13);
    let xa = complex_gaussian(&mut a, 1.0);
    assert_eq!(xa, complex_gaussian(&mut b, 1.0));
    assert_ne!(xa, complex_gaussian(&mut c, 1.0));
}
