use levydam::config::RunConfig;
use levydam::cost::{self, CostSpec, Dam, Numerics, PenaltyTable, Policy};
use levydam::mc::{self, SimConfig};
use levydam::scale::build_scale_table;
use levydam::{JumpDist, JumpMeasure, LevyModel};
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = LevyModel> {
    let brownian = (-1.0..1.0f64, 0.2..3.0f64, any::<bool>())
        .prop_map(|(mu, s2, refl)| LevyModel::brownian(mu, s2, refl).unwrap());
    let cp = (0.2..2.0f64, 0.5..3.0f64, 0.1..0.9f64, any::<bool>()).prop_map(|(rate, b, load, refl)| {
        let drift = rate / (b * load);
        LevyModel::bounded_variation(drift, JumpMeasure::CompoundPoisson { rate, dist: JumpDist::Exponential { b } }, refl)
            .unwrap()
    });
    let gamma = (0.3..2.0f64, 0.5..3.0f64, 0.1..0.9f64).prop_map(|(a, b, load)| {
        LevyModel::bounded_variation(a / (b * load), JumpMeasure::Gamma { a, b }, false).unwrap()
    });
    prop_oneof![brownian, cp, gamma]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn root_solves_exponent(m in model_strategy(), alpha in 0.0..3.0f64) {
        let eta = m.eta_root(alpha).unwrap();
        prop_assert!(eta >= 0.0);
        let phi = m.laplace_exponent(eta).unwrap();
        prop_assert!((phi - alpha).abs() <= 1e-10 * alpha.max(1.0));
        let eta_up = m.eta_root(alpha + 0.1).unwrap();
        prop_assert!(eta_up > eta);
    }

    #[test]
    fn root_positive_iff_upward_drift(m in model_strategy()) {
        let eta = m.eta_root(0.0).unwrap();
        prop_assert_eq!(eta > 0.0, m.mean_rate() > 0.0);
    }

    #[test]
    fn scale_function_shape(m in model_strategy(), alpha in 0.0..2.0f64) {
        let t = build_scale_table(&m, alpha, 4.0, None).unwrap();
        let mut prev = 0.0;
        for x in t.nodes() {
            let w = t.eval_w(x).unwrap();
            prop_assert!(w >= prev - 1e-12, "W not monotone at {}", x);
            prop_assert!(t.eval_z(x).unwrap() >= 1.0 - 1e-12);
            prop_assert!(t.eval_wbar(x).unwrap() >= 0.0);
            prev = w;
        }
    }

    #[test]
    fn fill_transform_bounds_and_killing(
        m in model_strategy(),
        alpha in 0.05..2.0f64,
        lambda in 0.5..2.0f64,
        frac in 0.0..1.0f64,
    ) {
        prop_assume!(m.eta_root(alpha).unwrap() * lambda <= 6.0);
        let policy = Policy::new(lambda, 0.0, 1.0, lambda + 1.0).unwrap();
        let dam = Dam::new(m, policy, Numerics::default()).unwrap().with_penalty_floor(-1.0);
        let x = frac * lambda;
        let lt = dam.lt_fill(alpha, x).unwrap();
        prop_assert!(lt > 0.0 && lt <= 1.0 + 1e-12);
        let lt_closer = dam.lt_fill(alpha, (x + lambda) / 2.0).unwrap();
        prop_assert!(lt_closer >= lt - 1e-12);
        let u = dam.potential_fill(alpha, x).unwrap();
        prop_assert!((alpha * u.total_mass() + lt - 1.0).abs() < 1e-8);
    }

    #[test]
    fn release_killing_identity(
        m in model_strategy(),
        alpha in 0.05..2.0f64,
        rate in 1.0..4.0f64,
        frac in 0.01..1.0f64,
    ) {
        let policy = Policy::new(1.0, 0.3, rate, 2.0).unwrap();
        let dam = Dam::new(m, policy, Numerics::default()).unwrap();
        let x = 0.3 + frac * 1.7;
        let lt = dam.lt_release(alpha, x).unwrap();
        prop_assert!(lt > 0.0 && lt <= 1.0);
        let u = dam.potential_release(alpha, x).unwrap();
        prop_assert!((alpha * u.total_mass() + lt - 1.0).abs() < 1e-8);
    }

    #[test]
    fn penalty_table_stays_within_its_values(
        ys in prop::collection::vec(0.0..5.0f64, 1..6),
        x in -2.0..8.0f64,
    ) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let g = PenaltyTable::new(&pts).unwrap();
        let v = g.eval(x);
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
    }

    #[test]
    fn constant_penalty_is_its_own_average(c in 0.01..3.0f64, lambda in 0.6..1.5f64) {
        let m = LevyModel::brownian(0.1, 1.0, true).unwrap();
        let policy = Policy::new(lambda, 0.2, 1.5, 2.0).unwrap();
        let dam = Dam::new(m, policy, Numerics::default()).unwrap();
        let spec = CostSpec {
            k1: 0.0,
            k2: 0.0,
            r: 0.0,
            alpha: 0.0,
            g: PenaltyTable::constant(c).unwrap(),
            g_star: PenaltyTable::constant(c).unwrap(),
        };
        let avg = cost::longrun_average_cost(&dam, &spec).unwrap();
        prop_assert!((avg - c).abs() < 1e-8 * c.max(1.0));
    }
}

#[test]
fn unresolvable_fill_transform_is_an_error() {
    let m = LevyModel::bounded_variation(
        0.16,
        JumpMeasure::CompoundPoisson { rate: 0.2, dist: JumpDist::Exponential { b: 2.65 } },
        false,
    )
    .unwrap();
    let policy = Policy::new(4.0, 0.0, 1.0, 5.0).unwrap();
    let dam = Dam::new(m, policy, Numerics::default()).unwrap().with_penalty_floor(-1.0);
    let err = dam.lt_fill(1.5, 0.0).unwrap_err();
    assert!(matches!(err, levydam::Error::Numerical(_)), "{err}");
}

#[test]
fn zero_spec_costs_nothing() {
    let m = LevyModel::bounded_variation(
        2.0,
        JumpMeasure::CompoundPoisson { rate: 1.0, dist: JumpDist::Exponential { b: 1.0 } },
        true,
    )
    .unwrap();
    let policy = Policy::new(1.0, 0.2, 1.0, 2.5).unwrap();
    let spec = CostSpec { k1: 0.0, k2: 0.0, r: 0.0, alpha: 0.2, g: PenaltyTable::zero(), g_star: PenaltyTable::zero() };
    let dam = Dam::new(m.clone(), policy, Numerics::default()).unwrap();
    assert_eq!(cost::cycle_cost(&dam, &spec, 0.2).unwrap(), 0.0);
    let cfg = SimConfig { n_paths: 2000, ..SimConfig::default() };
    let sim = mc::simulate_cycle(&m, &policy, &spec, 0.2, &cfg).unwrap();
    assert_eq!(sim.cost.mean, 0.0);
    assert_eq!(sim.cost_undiscounted.mean, 0.0);
}

#[test]
fn switching_only_average_is_renewal_reward() {
    let m = LevyModel::brownian(0.0, 2.0, true).unwrap();
    let policy = Policy::new(1.0, 0.0, 1.0, 2.0).unwrap();
    let spec = CostSpec { k1: 1.0, k2: 1.0, r: 0.0, alpha: 0.0, g: PenaltyTable::zero(), g_star: PenaltyTable::zero() };
    let dam = Dam::new(m.clone(), policy, Numerics::default()).unwrap();
    let want = 2.0 / dam.mean_cycle().unwrap();
    assert!((cost::longrun_average_cost(&dam, &spec).unwrap() - want).abs() < 1e-12);
    let cfg = SimConfig { n_paths: 4000, dt: 2e-3, ..SimConfig::default() };
    let est = mc::simulate_longrun(&m, &policy, &spec, 4000.0, &cfg).unwrap();
    assert!(est.z_score(want).abs() < 3.5, "{est:?} vs {want}");
}

#[test]
fn longrun_needs_enough_cycles() {
    let m = LevyModel::brownian(0.0, 1.0, true).unwrap();
    let policy = Policy::new(1.0, 0.0, 1.0, 2.0).unwrap();
    let spec = CostSpec { k1: 1.0, k2: 1.0, r: 0.0, alpha: 0.0, g: PenaltyTable::zero(), g_star: PenaltyTable::zero() };
    let err = mc::simulate_longrun(&m, &policy, &spec, 5.0, &SimConfig::default()).unwrap_err();
    assert!(matches!(err, levydam::Error::InsufficientData(_)));
}

#[test]
fn antithetic_agrees_with_plain_sampling() {
    let m = LevyModel::brownian(0.0, 1.0, true).unwrap();
    let base = SimConfig { n_paths: 20_000, dt: 2e-3, seed: 11, ..SimConfig::default() };
    let plain = mc::simulate_fill(&m, 1.0, 0.0, &[1.0], None, &base).unwrap();
    let anti = mc::simulate_fill(&m, 1.0, 0.0, &[1.0], None, &SimConfig { antithetic: true, ..base }).unwrap();
    let (a, b) = (plain.lt[0], anti.lt[0]);
    assert!((a.mean - b.mean).abs() < 2.0 * a.stderr.hypot(b.stderr));
}

#[test]
fn halving_the_step_moves_less_than_one_standard_error() {
    let m = LevyModel::brownian(0.3, 1.0, true).unwrap();
    let coarse = SimConfig { n_paths: 20_000, dt: 2e-3, seed: 5, ..SimConfig::default() };
    let fine = SimConfig { dt: 1e-3, ..coarse };
    let a = mc::simulate_fill(&m, 1.0, 0.2, &[0.5], None, &coarse).unwrap();
    let b = mc::simulate_fill(&m, 1.0, 0.2, &[0.5], None, &fine).unwrap();
    assert!((a.mean_time.mean - b.mean_time.mean).abs() < a.mean_time.stderr.max(b.mean_time.stderr) * 1.5);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["brownian_ref", "brownian_free_ref", "cp_ref"] {
        let cfg = RunConfig::from_path(&dir.join(format!("{name}.json"))).unwrap();
        let sc = cfg.build().unwrap();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(sc.cost.alpha > 0.0);
    }
}
