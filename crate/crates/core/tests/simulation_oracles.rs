use coxmeas::asymptotics::{CensorLaw, CovariateLaw, Truth, Weight};
use coxmeas::estimator::{fit_stage1, FitConfig};
use coxmeas::simulation::diagnostics::{ks_critical_1pct, ks_statistic};
use coxmeas::simulation::{functional_statistic, run_consistency_study, sample_dataset, StudyConfig};
use coxmeas::{ErrorModel, ParamBox, SplineHazard};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_exponential(tau: f64) -> Truth {
    let x = CovariateLaw::Finite { atoms: vec![vec![-1.0], vec![1.0]], probs: vec![0.5, 0.5] };
    let h = SplineHazard::constant(tau, 1.0, 1.0).unwrap();
    Truth::new(h, vec![0.0], x, CensorLaw::fixed(tau), ErrorModel::none(1)).unwrap()
}

#[test]
fn event_times_are_exponential_below_tau() {
    let tau = 3.0;
    let truth = unit_exponential(tau);
    let d = sample_dataset(&truth, 10_000, 42).unwrap();
    let events: Vec<f64> = (0..d.len()).filter(|&i| d.delta()[i]).map(|i| d.y()[i]).collect();
    let mass = 1.0 - (-tau).exp();
    let ks = ks_statistic(&events, |t| (1.0 - (-t).exp()) / mass);
    assert!(ks < ks_critical_1pct(events.len()), "KS {ks}");
    // censored records sit exactly at tau
    assert!((0..d.len()).filter(|&i| !d.delta()[i]).all(|i| d.y()[i] == tau));
    let share = events.len() as f64 / d.len() as f64;
    assert!((share - mass).abs() < 4.0 * (mass * (1.0 - mass) / 1e4).sqrt());
}

#[test]
fn lifetime_survival_matches_sampled_frequencies() {
    let truth = Truth::default_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<_> = (0..40_000).map(|_| truth.sample_latent(&mut rng).unwrap()).collect();
    let n = draws.len() as f64;
    for k in 1..=10 {
        let t = k as f64 / 10.0;
        let want = [-1.0, 0.0, 1.0].iter().map(|&x| truth.lifetime_survival(t, &[x])).sum::<f64>() / 3.0;
        let got = draws.iter().filter(|r| r.t.is_none_or(|s| s > t)).count() as f64 / n;
        let se = (want * (1.0 - want) / n).sqrt();
        assert!((got - want).abs() < 3.0 * se, "t={t}: {got} vs {want}");
    }
}

#[test]
fn fixed_censoring_observes_every_event_before_tau() {
    let truth = unit_exponential(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let r = truth.sample_latent(&mut rng).unwrap();
        assert_eq!(r.c, 1.0);
        assert_eq!(r.delta(), r.t.is_some_and(|t| t <= 1.0));
        assert_eq!(r.y(), r.t.map_or(1.0, |t| t.min(1.0)));
        assert_eq!(r.w(), r.x);
    }
}

#[test]
fn zero_weight_functional_vanishes() {
    let truth = Truth::default_fixture();
    let hat = SplineHazard::interp(1.0, 1.0, &[0.0, 0.4, 1.0], &[0.3, 0.7, 0.6]).unwrap();
    assert_eq!(functional_statistic(&hat, &truth, &Weight::Grid { values: vec![0.0, 0.0] }, 100), 0.0);
    assert_eq!(functional_statistic(truth.hazard(), &truth, &Weight::One, 100), 0.0);
}

#[test]
fn vanishing_error_is_continuous_with_no_error() {
    let truth = Truth::default_fixture().with_error(ErrorModel::none(1)).unwrap();
    let bx = ParamBox::new(vec![-1.0], vec![3.0]).unwrap();
    let mut cfg = FitConfig::new(bx, 1.0, 1.0);
    cfg.outer.starts = 4;
    for seed in 0..4 {
        let d = sample_dataset(&truth, 200, seed).unwrap();
        let a = fit_stage1(&d, &ErrorModel::none(1), &cfg).unwrap();
        let b = fit_stage1(&d, &ErrorModel::isotropic(1, 1e-4).unwrap(), &cfg).unwrap();
        assert!((a.beta[0] - b.beta[0]).abs() < 1e-3, "{} vs {}", a.beta[0], b.beta[0]);
    }
}

#[test]
fn known_beta_still_gives_consistent_hazard() {
    let mut cfg = StudyConfig::default_fixture(vec![100, 400, 1600], 20);
    cfg.fit.param_box = ParamBox::new(vec![0.7], vec![0.7]).unwrap();
    let report = run_consistency_study(&cfg).unwrap();
    let trend = report.trend.unwrap();
    assert!(trend.supnorm_full_decreasing && trend.supnorm_trim_decreasing, "{:?}", report.sizes);
    assert!(report.replicates.iter().all(|r| r.beta == vec![0.7]));
}

#[test]
fn large_sample_beta_is_close() {
    let mut cfg = StudyConfig::default_fixture(vec![5000], 10);
    cfg.fit.outer.starts = 2;
    let truth = Truth::default_fixture();
    let mut errs: Vec<f64> = (0..10)
        .map(|seed| {
            let d = sample_dataset(&truth, 5000, 100 + seed).unwrap();
            (fit_stage1(&d, truth.error(), &cfg.fit).unwrap().beta[0] - 0.7).abs()
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[4] + errs[5]);
    assert!(median < 0.1, "median error {median}");
}

#[test]
fn doubling_replications_shrinks_covariance_error() {
    let se_at = |reps| {
        let mut cfg = StudyConfig::default_fixture(vec![50, 100, 200], reps);
        cfg.fit.outer.starts = 2;
        let report = run_consistency_study(&cfg).unwrap();
        report.sizes[2].empirical_cov_se.as_ref().unwrap()[0][0]
    };
    let ratio = se_at(100) / se_at(200);
    assert!((ratio - 2f64.sqrt()).abs() < 0.35, "{ratio}");
}
