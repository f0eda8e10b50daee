use monoslope::chernoff::{
    argmax_drifted, draw_argmax, load_cached, load_or_estimate, simulate_path, CacheKey,
    DriftedProfile,
};
use monoslope::experiments::{read_rows_csv, run, summarize, with_threads, write_rows_csv};
use monoslope::rng::stream;
use monoslope::stats::{ks_critical_two_sample, ks_two_sample, mean, std_error};
use monoslope::{estimate_constants, ChernoffSettings, ExperimentConfig, ExperimentKind};

#[test]
fn brownian_increments_have_variance_step() {
    let h = 0.01;
    let mut at_one = Vec::new();
    let mut at_minus_one = Vec::new();
    for r in 0..2000 {
        let path = simulate_path(2.0, h, &mut stream(1, "bm", 0, r)).unwrap();
        assert_eq!(path.at(0), 0.0);
        at_one.push(path.at(100));
        at_minus_one.push(path.at(-100));
    }
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    assert!((var(&at_one) - 1.0).abs() < 0.1);
    assert!((var(&at_minus_one) - 1.0).abs() < 0.1);
    let cross = at_one.iter().zip(&at_minus_one).map(|(a, b)| a * b).sum::<f64>() / 2000.0;
    assert!(cross.abs() < 0.1, "two sides must be independent: {cross}");
}

#[test]
fn hull_argmax_matches_brute_force() {
    for r in 0..30 {
        let path = simulate_path(3.0, 5e-3, &mut stream(2, "hull", 0, r)).unwrap();
        let profile = DriftedProfile::new(&path, 1.0).unwrap();
        for a in [-1.0, 0.0, 0.35, 1.2, 2.0] {
            assert_eq!(profile.argmax(a), argmax_drifted(&path, a), "rep {r}, a {a}");
        }
    }
}

#[test]
fn refinement_keeps_first_moment() {
    let coarse = ChernoffSettings {
        reps: 4000,
        batches: 40,
        a_max: 2.0,
        a_step: 0.5,
        ..ChernoffSettings::default()
    };
    let fine = ChernoffSettings {
        half_width: coarse.half_width + 2.0,
        step: coarse.step / 2.0,
        ..coarse.clone()
    };
    let a = estimate_constants(1.0, &coarse, 3).unwrap();
    let b = estimate_constants(1.0, &fine, 4).unwrap();
    let se = (a.moment_p_se.powi(2) + b.moment_p_se.powi(2)).sqrt();
    assert!((a.moment_p - b.moment_p).abs() < 3.0 * se, "{} vs {}", a.moment_p, b.moment_p);
    assert!(a.mean_x0.abs() < 4.0 * a.mean_x0_se);
    assert!(a.k_p > -2.0 * a.k_p_se);
}

#[test]
fn scaled_argmax_matches_at_small_scale() {
    let x0 = draw_argmax(6.0, 2e-3, 1.0, &[0.0], 2000, 7, "ref").unwrap().remove(0);
    for c in [0.5f64, 2.0] {
        let xc: Vec<f64> = draw_argmax(8.0, 2e-3, c, &[0.0], 2000, 7, &format!("c{c}"))
            .unwrap()
            .remove(0)
            .into_iter()
            .map(|x| x * c.powf(2.0 / 3.0))
            .collect();
        let d = ks_two_sample(&x0, &xc);
        assert!(d < ks_critical_two_sample(0.01, 2000, 2000), "c = {c}: {d}");
    }
    assert!(mean(&x0).abs() < 4.0 * std_error(&x0));
}

#[test]
fn cache_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let s = ChernoffSettings {
        reps: 200,
        batches: 10,
        a_max: 1.0,
        a_step: 0.5,
        half_width: 4.0,
        step: 1e-2,
    };
    let key = CacheKey::new(1.0, &s, 5);
    assert!(load_cached(dir.path(), &key).is_err());
    let first = load_or_estimate(dir.path(), 1.0, &s, 5).unwrap();
    assert!(key.path_in(dir.path()).exists());
    assert_eq!(load_cached(dir.path(), &key).unwrap(), first);
    let other = CacheKey::new(1.0, &ChernoffSettings { batches: 20, ..s.clone() }, 5);
    assert_ne!(other.file_name(), key.file_name());
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(kind);
    cfg.replicates = 6;
    cfg.n_grid = match kind {
        ExperimentKind::Clt | ExperimentKind::Gof => vec![2000],
        _ => vec![1000, 2000, 4000],
    };
    cfg
}

#[test]
fn rows_are_thread_count_independent_and_summaries_recompute() {
    let c = monoslope::chernoff::ChernoffEstimate {
        p: 1.0,
        moment_p: 0.41,
        moment_p_se: 0.001,
        k_p: 0.022,
        k_p_se: 0.0005,
        mean_x0: 0.0,
        mean_x0_se: 0.001,
        boundary_rate: 0.0,
        reps: 1000,
        batches: 10,
        h: 2e-3,
        t_half_width: 6.0,
        a_max: 4.0,
        a_step: 0.1,
        seed: 0,
        covariance: vec![],
    };
    for kind in [
        ExperimentKind::Risk,
        ExperimentKind::Boundary,
        ExperimentKind::Clt,
        ExperimentKind::Gof,
        ExperimentKind::Modulus,
    ] {
        let cfg = small(kind);
        let csv = |threads| {
            let res = with_threads(Some(threads), || run(kind, &cfg, std::slice::from_ref(&c)))
                .unwrap()
                .unwrap();
            let mut buf = Vec::new();
            write_rows_csv(&res.rows, &mut buf).unwrap();
            (buf, res)
        };
        let (serial, res) = csv(1);
        let (parallel, _) = csv(3);
        assert_eq!(serial, parallel, "{kind:?}");
        let rows = read_rows_csv(serial.as_slice()).unwrap();
        assert_eq!(rows, res.rows);
        assert_eq!(summarize(kind, &cfg, &rows).unwrap(), res.summary, "{kind:?}");
    }
}
