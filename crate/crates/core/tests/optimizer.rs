use mdi_keyrate::optimizer::{
    adaptive_descent, optimize_point, random_candidate, rate_objective, Mode, Scored,
    SearchConfig, SearchSpace,
};
use mdi_keyrate::{evaluate, ChannelParams, FiniteKeySettings, SampleSize, SecurityBudget};

fn mao() -> ChannelParams {
    ChannelParams {
        misalignment: 0.015,
        dark_count: 6.02e-6,
        attenuation_db_per_km: 0.2,
        detector_efficiency: 0.145,
        length_a_km: 0.0,
        length_b_km: 0.0,
    }
}

fn settings() -> FiniteKeySettings {
    FiniteKeySettings {
        sample: SampleSize::PulsePairs(1e10),
        budget: SecurityBudget::RatioFixed(1e-10),
        eps_cor: 1e-10,
        f_ec: 1.16,
    }
}

fn quick() -> SearchConfig {
    SearchConfig {
        samples: 2_000,
        descent_starts: 2,
        descent_iterations: 200,
        ..SearchConfig::default()
    }
}

#[test]
fn reported_rate_matches_fresh_evaluation() {
    let space = SearchSpace::new(3, 2, Mode::G).unwrap();
    let p = optimize_point(0.0, &mao(), &settings(), &space, &quick()).unwrap();
    let c = p.candidate.clone().expect("feasible point at zero distance");
    assert!(c.is_feasible(&space));
    let fresh = evaluate(&c.protocol().unwrap(), &mao().with_distance(0.0), &settings()).unwrap();
    assert_eq!(fresh.rate, p.rate());
    assert!(p.rate() > 0.0);
}

#[test]
fn search_is_deterministic() {
    let space = SearchSpace::new(3, 2, Mode::G).unwrap();
    let cfg = SearchConfig { samples: 500, descent_iterations: 50, ..quick() };
    let a = optimize_point(10.0, &mao(), &settings(), &space, &cfg).unwrap();
    let b = optimize_point(10.0, &mao(), &settings(), &space, &cfg).unwrap();
    assert_eq!(a.candidate, b.candidate);
    assert_eq!(a.rate(), b.rate());
}

#[test]
fn descent_never_loses_ground() {
    let space = SearchSpace::new(3, 2, Mode::G).unwrap();
    let channel = mao().with_distance(0.0);
    let objective = |c: &_| rate_objective(c, &channel, &settings());
    let cfg = SearchConfig { descent_iterations: 30, ..quick() };
    for index in 0..20 {
        let candidate = random_candidate(&space, 4, index);
        let value = objective(&candidate);
        let start = Scored { candidate, value };
        let end = adaptive_descent(&start, &space, &cfg, &objective);
        assert!(end.value >= start.value || !start.value.is_finite());
        assert!(end.candidate.is_feasible(&space));
    }
}

#[test]
fn beyond_reach_gives_zero() {
    let space = SearchSpace::new(3, 2, Mode::G).unwrap();
    let cfg = SearchConfig { samples: 300, descent_iterations: 20, ..quick() };
    let p = optimize_point(400.0, &mao(), &settings(), &space, &cfg).unwrap();
    assert_eq!(p.rate(), 0.0);
}

#[test]
fn shared_ladder_does_not_beat_independent_ladders() {
    let g = SearchSpace::new(3, 3, Mode::G).unwrap();
    let r = SearchSpace::new(3, 3, Mode::R).unwrap();
    let rg = optimize_point(0.0, &mao(), &settings(), &g, &quick()).unwrap().rate();
    let rr = optimize_point(0.0, &mao(), &settings(), &r, &quick()).unwrap().rate();
    assert!(rr <= rg, "R {rr:e} > G {rg:e}");
}
