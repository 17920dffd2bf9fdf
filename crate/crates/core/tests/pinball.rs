use extremeq::pinball::{fit_quantile_model, ModelKind, RegressionData, TrainConfig};
use extremeq::Rng;

fn linear_data(n: usize, seed: u64) -> RegressionData {
    let mut rng = Rng::new(seed);
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let x = rng.standard_normal();
        xs.push(vec![x]);
        ys.push(1.0 + 2.0 * x + rng.standard_normal());
    }
    RegressionData::new(xs, ys).unwrap()
}

#[test]
fn mlp_matches_linear_risk_on_linear_data() {
    let data = linear_data(10_000, 42);
    let cfg = TrainConfig { seed: 42, ..Default::default() };
    let lin = fit_quantile_model(&data, 0.9, ModelKind::Linear, &cfg).unwrap();
    let mlp = fit_quantile_model(&data, 0.9, ModelKind::Mlp, &cfg).unwrap();
    assert!(mlp.train_loss <= 1.02 * lin.train_loss, "mlp {} linear {}", mlp.train_loss, lin.train_loss);
    assert_eq!(mlp.risk(&data).unwrap(), mlp.train_loss);
}

#[test]
fn per_tau_fits_are_independent() {
    let data = linear_data(2_000, 7);
    let cfg = TrainConfig::default();
    let lo = fit_quantile_model(&data, 0.1, ModelKind::Linear, &cfg).unwrap();
    let hi = fit_quantile_model(&data, 0.9, ModelKind::Linear, &cfg).unwrap();
    for x in [-2.0, 0.0, 2.0] {
        assert!(lo.predict(&[x]).unwrap() < hi.predict(&[x]).unwrap());
    }
}
