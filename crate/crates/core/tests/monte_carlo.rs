use condhill::bandwidth::BandwidthRule;
use condhill::mc::{run_mc, run_mc_with_workers, McStudy};
use condhill::simulate::Dependence;
use condhill::{build_sim, hill_trace, risk_profile, GammaFn, Kernel, PairedSeries, SimModel, SimSpec};
use rayon::prelude::*;

fn iid_pareto(n: usize, seed: u64) -> SimSpec {
    SimSpec::new(SimModel::CondPareto { phi_x: 0.0, phi_u: 0.0 }, n, seed)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

#[test]
fn iid_pareto_bias_is_small() {
    let study = McStudy::new(iid_pareto(10_000, 11), 0.6, vec![0.05, 0.1, 0.2, 0.3], BandwidthRule::FixedRule);
    let res = run_mc(&study).unwrap();
    for row in &res.rows {
        assert!(row.bias.abs() < 0.05, "k/n {}: bias {}", row.k_frac, row.bias);
        assert_eq!(row.n_missing, 0);
        assert!(row.mse >= row.bias * row.bias - 1e-12);
    }
}

#[test]
fn constant_index_is_unbiased_and_covered() {
    let spec = iid_pareto(10_000, 12).with_gamma(GammaFn::Constant(0.5));
    let study = McStudy::new(spec, 0.6, vec![0.05, 0.1, 0.2], BandwidthRule::FixedRule);
    let res = run_mc(&study).unwrap();
    for row in &res.rows {
        assert!(row.bias.abs() < 0.03, "bias {}", row.bias);
        assert!((0.90..=0.99).contains(&row.coverage), "coverage {}", row.coverage);
    }
}

#[test]
fn plug_in_error_shrinks_with_k() {
    let mut study = McStudy::new(
        iid_pareto(2_000, 13),
        0.6,
        vec![0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
        BandwidthRule::FixedRule,
    );
    study.replications = 100;
    let res = run_mc(&study).unwrap();
    assert!(res.rows.windows(2).all(|w| w[1].mean_se < w[0].mean_se));
}

#[test]
fn single_replication_and_worker_invariance() {
    let mut study = McStudy::new(iid_pareto(1_000, 14), 0.4, vec![0.05, 0.2], BandwidthRule::FixedRule);
    study.replications = 1;
    let one = run_mc(&study).unwrap();
    for row in &one.rows {
        assert_eq!(row.mse, row.bias * row.bias);
    }
    study.replications = 40;
    study.kernel = Kernel::Biweight;
    let a = run_mc_with_workers(&study, 1).unwrap();
    let b = run_mc_with_workers(&study, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trace_centres_on_constant_index() {
    let ks: Vec<usize> = vec![500, 1_000, 2_000, 3_000];
    let gamma = GammaFn::Constant(0.5);
    let traces: Vec<Vec<f64>> = (1..=200u64)
        .into_par_iter()
        .map(|r| {
            let s = build_sim(&iid_pareto(10_000, 500 + r).with_gamma(gamma.clone())).unwrap();
            hill_trace(&s, 0.5, Kernel::Epanechnikov, &ks, &BandwidthRule::FixedRule, 0.95)
                .unwrap()
                .iter()
                .map(|p| p.estimate.as_ref().unwrap().gamma_hat)
                .collect()
        })
        .collect();
    for (col, k) in ks.iter().enumerate() {
        let v: Vec<f64> = traces.iter().map(|t| t[col]).collect();
        let (m, _) = mean_sd(&v);
        assert!((m - 0.5).abs() < 0.05, "k {k}: {m}");
    }
}

#[test]
fn trace_at_full_k_uses_window_minimum() {
    let y = [2.0, 5.0, 1.5, 9.0, 3.0];
    let s = PairedSeries::new(vec![0.0; 5], y.to_vec()).unwrap();
    let t = hill_trace(&s, 0.0, Kernel::Uniform, &[5], &BandwidthRule::Manual(1.0), 0.95).unwrap();
    let e = t[0].estimate.as_ref().unwrap();
    assert_eq!(e.q_hat, 1.5);
    let expected = y.iter().map(|v| (v / 1.5).ln()).sum::<f64>() / 5.0;
    assert!((e.gamma_hat - expected).abs() < 1e-12);

    let c = PairedSeries::new(vec![0.0; 5], vec![4.0; 5]).unwrap();
    let t = hill_trace(&c, 0.0, Kernel::Uniform, &[2, 3, 5], &BandwidthRule::Manual(1.0), 0.95).unwrap();
    assert!(t.iter().all(|p| p.estimate.as_ref().unwrap().gamma_hat == 0.0));
}

#[test]
fn profile_tracks_quadratic_index_and_is_symmetric() {
    let grid = [0.2, 0.5, 0.8];
    let truth = [0.52, 0.25, 0.52];
    let reps = 100u64;
    let rows: Vec<Vec<(f64, f64)>> = (1..=reps)
        .into_par_iter()
        .map(|r| {
            let s = build_sim(&SimSpec::new(SimModel::cond_frechet(Dependence::Low), 10_000, 900 + r)).unwrap();
            risk_profile(&s, &grid, 1_000, Kernel::Epanechnikov, &BandwidthRule::FixedRule, 0.95)
                .unwrap()
                .iter()
                .map(|p| {
                    let e = p.estimate.as_ref().unwrap();
                    (e.gamma_hat, e.std_error.unwrap())
                })
                .collect()
        })
        .collect();
    let mut means = [0.0; 3];
    let mut ses = [0.0; 3];
    for c in 0..3 {
        let v: Vec<f64> = rows.iter().map(|row| row[c].0).collect();
        let (m, sd) = mean_sd(&v);
        means[c] = m;
        ses[c] = sd / (reps as f64).sqrt();
        assert!((m - truth[c]).abs() < 0.07, "x {}: {m}", grid[c]);
    }
    let pooled = (ses[0].powi(2) + ses[2].powi(2)).sqrt();
    assert!((means[0] - means[2]).abs() < 2.0 * pooled.max(1e-3), "{} vs {}", means[0], means[2]);
}

#[test]
fn profile_single_point_matches_estimator() {
    let s = build_sim(&SimSpec::new(SimModel::cond_pareto(Dependence::Low), 3_000, 4)).unwrap();
    let p = risk_profile(&s, &[0.35], 300, Kernel::Triangular, &BandwidthRule::FixedRule, 0.9).unwrap();
    let h = condhill::bandwidth::bw_fixed(3_000, 300).unwrap();
    let cfg = condhill::EstimatorConfig::new(0.35, 300, h, Kernel::Triangular).with_ci_level(0.9);
    assert_eq!(p[0].estimate.as_ref().unwrap(), &condhill::cond_hill(&s, &cfg).unwrap());
}
