use bhs_core::analysis::{batch_means, discretize, time_average, BURN_IN_FRACTION};
use bhs_core::kernels::BounceVariant;
use bhs_core::model::{GaussianTarget, GuideField, Matrix, State, Vector};
use bhs_core::samplers::{run_bhs, run_cbhs, run_gibbs_truncated_mvn, SamplerConfig, SamplerOutput};
use bhs_core::{ConstraintSet, Problem, SamplerRegistry, Skeleton, TargetModel};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn correlated() -> GaussianTarget {
    GaussianTarget::new(v(&[0.5, -1.0]), Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap()
}

/// Mean and second moment of each coordinate within `k` batch-means standard errors.
fn moments_within(sk: &Skeleton, target: &GaussianTarget, k: f64) {
    let chain = discretize(sk, sk.config.delta, false).unwrap().burn_in(BURN_IN_FRACTION);
    for i in 0..target.dim() {
        let mu = target.mean()[i];
        let second = target.covariance()[(i, i)] + mu * mu;
        let xs = chain.coordinate(i);
        let m = batch_means(&xs, 50).unwrap();
        assert!((m.mean - mu).abs() < k * m.std_error, "{}: mean {} vs {mu} ± {}", sk.sampler, m.mean, m.std_error);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let s = batch_means(&sq, 50).unwrap();
        assert!((s.mean - second).abs() < k * s.std_error, "{}: E x² {} vs {second} ± {}", sk.sampler, s.mean, s.std_error);
    }
}

#[test]
fn family_members_recover_gaussian_moments() {
    let target = correlated();
    let model: TargetModel = target.clone().into();
    let init = State::new(v(&[0.0, 0.0]), v(&[1.0, -1.0]));
    let base = |g: GuideField, seed: u64| SamplerConfig::new(g).with_time(20_000.0, 0.1).with_seed(seed);
    let mut stochastic = base(GuideField::GradU, 3);
    stochastic.bounce_kernel.variant = BounceVariant::Stochastic;
    let mut partial = base(GuideField::Zero, 4);
    partial.bounce_kernel.refresh_angle = 0.7;
    for cfg in [base(GuideField::Zero, 1), base(GuideField::GradU, 2), stochastic, partial] {
        moments_within(&run_bhs(&model, &cfg, &init).unwrap(), &target, 4.5);
    }
    moments_within(&run_cbhs(&model, &base(GuideField::GradU, 5), &init).unwrap(), &target, 4.5);
}

#[test]
fn zig_zag_extra_rate_keeps_the_target() {
    let target = GaussianTarget::diagonal(v(&[1.0, -2.0]), &[0.5, 3.0]).unwrap();
    let model: TargetModel = target.clone().into();
    let init = State::new(v(&[0.0, 0.0]), v(&[1.0, 1.0]));
    let mut cfg = SamplerConfig::bps().with_time(20_000.0, 0.1).with_seed(9);
    cfg.cbhs_gamma = vec![0.5, 2.0];
    let sk = run_cbhs(&model, &cfg, &init).unwrap();
    moments_within(&sk, &target, 4.5);
    let mut plain = cfg.clone();
    plain.cbhs_gamma.clear();
    let base = run_cbhs(&model, &plain, &init).unwrap();
    assert!(sk.count("coord_flip") > base.count("coord_flip"));
}

#[test]
fn time_average_of_odd_function_vanishes() {
    let target = GaussianTarget::standard(2).unwrap();
    let model: TargetModel = target.into();
    let cfg = SamplerConfig::rhmc().with_time(20_000.0, 0.1).with_seed(21);
    let sk = run_bhs(&model, &cfg, &State::new(v(&[2.0, 0.0]), v(&[0.0, 1.0]))).unwrap();
    let chain = discretize(&sk, 0.1, false).unwrap().burn_in(BURN_IN_FRACTION);
    let avg = time_average(&chain, |x| x[0] * x[1] + x[0].powi(3)).unwrap();
    let vals: Vec<f64> = chain.positions.iter().map(|x| x[0] * x[1] + x[0].powi(3)).collect();
    let bm = batch_means(&vals, 50).unwrap();
    assert!((avg - bm.mean).abs() < 1e-12);
    assert!(avg.abs() < 4.0 * bm.std_error, "{avg} ± {}", bm.std_error);
}

#[test]
fn gibbs_without_walls_matches_the_target() {
    let target = correlated();
    let draws = run_gibbs_truncated_mvn(&target, &ConstraintSet::empty(2), 40_000, 8, &v(&[0.0, 0.0])).unwrap();
    let n = draws.len() as f64;
    let mean = draws.iter().fold(Vector::zeros(2), |acc, x| acc + x) / n;
    assert!((&mean - target.mean()).amax() < 0.05);
    let cov = draws.iter().fold(Matrix::zeros(2, 2), |acc, x| {
        let c = x - &mean;
        acc + &c * c.transpose()
    }) / n;
    assert!((cov - target.covariance()).amax() < 0.08);
}

#[test]
fn registry_selects_by_name() {
    let reg = SamplerRegistry::with_defaults();
    assert_eq!(reg.names().collect::<Vec<_>>(), ["bhs", "cbhs", "gibbs", "qbhs"]);
    assert!(reg.get("hmc").is_err());
    let problem = Problem::unconstrained(GaussianTarget::standard(2).unwrap().into());
    let cfg = SamplerConfig::bps().with_time(50.0, 0.1).with_seed(1);
    let init = State::new(v(&[0.0, 0.0]), v(&[1.0, 1.0]));
    for name in ["bhs", "cbhs"] {
        match reg.get(name).unwrap().run(&problem, &cfg, &init).unwrap() {
            SamplerOutput::Trajectory(sk) => assert_eq!(sk.sampler, name),
            SamplerOutput::Draws(_) => panic!("{name} returned draws"),
        }
    }
    // qbhs needs its frame and constant
    assert!(reg.get("qbhs").unwrap().run(&problem, &cfg, &init).is_err());
    let mut gibbs_cfg = cfg.clone();
    gibbs_cfg.n_draws = 10;
    assert!(matches!(
        reg.get("gibbs").unwrap().run(&problem, &gibbs_cfg, &init).unwrap(),
        SamplerOutput::Draws(d) if d.len() == 10
    ));
}
