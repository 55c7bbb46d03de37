//! Monte Carlo calibration of the tests and of the study drivers.

use rand_distr::{Distribution, Normal};
use splitlab_core::designs;
use splitlab_core::estimators::{paired_permutation_test, switchback_estimator, two_sample_t_test};
use splitlab_core::harness::studies::{run_bias_study, run_power_curve};
use splitlab_core::harness::{ScenarioConfig, StudyContext};
use splitlab_core::models::CarryoverModel;
use splitlab_core::outcome::{Arm, Estimand, PeriodTotal};
use splitlab_core::seed::derived_rng;

#[test]
fn welch_size_under_null() {
    let reps = 100_000;
    let normal = Normal::new(10.0, 3.0).unwrap();
    let mut rejected = 0;
    for r in 0..reps {
        let mut rng = derived_rng(17, "welch-null", r);
        let a: Vec<f64> = (0..40).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..60).map(|_| normal.sample(&mut rng)).collect();
        if two_sample_t_test(&a, &b).unwrap().p_value <= 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / reps as f64;
    assert!((rate - 0.05).abs() <= 0.005, "{rate}");
}

#[test]
fn permutation_p_values_are_super_uniform() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let reps = 10_000;
    let mut hits = [0u32; 3];
    let alphas = [0.05, 0.1, 0.25];
    for r in 0..reps {
        let mut rng = derived_rng(5, "perm-null", r);
        let d: Vec<f64> = (0..7).map(|_| normal.sample(&mut rng)).collect();
        let p = paired_permutation_test(&d, r).p_value;
        for (h, a) in hits.iter_mut().zip(alphas) {
            *h += u32::from(p <= a);
        }
    }
    for (h, a) in hits.iter().zip(alphas) {
        let rate = *h as f64 / reps as f64;
        assert!(rate <= a + 0.01, "alpha {a}: {rate}");
    }
}

#[test]
fn zero_carryover_switchback_is_unbiased() {
    let model = CarryoverModel { periods: 12, base: 50.0, effect: 3.0, carryover: 0.0, noise_sd: 4.0 };
    let reps = 10_000;
    let ests: Vec<f64> = (0..reps)
        .map(|s| {
            let plan = designs::switchback(12, s, true).unwrap();
            let designs::Assignment::Switchback { schedule } = &plan.assignment else { unreachable!() };
            let periods = model.period_totals(schedule, s + 1_000_000).unwrap();
            switchback_estimator(&periods, Estimand::DeliveredValue, s).unwrap().total_estimate
        })
        .collect();
    let mean = ests.iter().sum::<f64>() / reps as f64;
    let var = ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let se = (var / reps as f64).sqrt();
    assert!((mean - model.ground_truth()).abs() < 4.0 * se, "{mean} vs {}", model.ground_truth());
}

#[test]
fn unpaired_schedules_still_estimate() {
    let p = |t: usize, a: u8, v: f64| PeriodTotal { period: t, arm: Arm::from_bit(a), delivered: v, revenue: v };
    let r = switchback_estimator(&[p(0, 1, 4.0), p(1, 1, 6.0), p(2, 0, 1.0), p(3, 0, 3.0)], Estimand::Revenue, 0).unwrap();
    assert_eq!(r.total_estimate, 4.0 * (5.0 - 2.0));
    assert_eq!(r.p_value, 1.0);
}

fn ctx(toml: &str) -> StudyContext {
    StudyContext::new(&ScenarioConfig::from_toml_str(toml).unwrap()).unwrap()
}

#[test]
fn supplement_bias_study_examples() {
    let c = ctx("[marketplace]\nmembers = 20\n[model]\nkind = \"supplement_s1\"\nnoise_sd = 1.0\n[study]\nreps = 400\n");
    let rows = run_bias_study(&c).unwrap();
    let per_member = rows[0].bias / 20.0;
    let half = (rows[0].ci_hi - rows[0].ci_lo) / 2.0 / 20.0;
    assert!((per_member - 1.0).abs() <= half.max(1e-9) + 1e-9, "{rows:?}");
    assert!(rows[1].ci_lo <= 0.0 && 0.0 <= rows[1].ci_hi, "{rows:?}");

    let null = ctx(
        "[marketplace]\nmembers = 20\n[[marketplace.campaigns]]\ncount = 4\n[model]\nkind = \"supplement_s1\"\ntau = 0\ngamma = 0\nnoise_sd = 1.0\n\
         [study]\nreps = 400\ndesigns = [\"member_cr\", \"campaign_cr\", \"budget_split\"]\n",
    );
    for r in run_bias_study(&null).unwrap() {
        assert!(r.ci_lo <= 0.0 && 0.0 <= r.ci_hi, "{r:?}");
    }
}

#[test]
fn power_is_monotone_and_sized() {
    let c = ctx(
        "[marketplace]\nmembers = 60\n[model]\nkind = \"supplement_s1\"\ngamma = 0\nnoise_sd = 1.0\n\
         [study]\nreps = 1000\neffect_sizes = [0.0, 0.2, 0.4, 0.8, 1.6]\ndesigns = [\"member_cr\", \"budget_split\"]\n",
    );
    let rows = run_power_curve(&c).unwrap();
    for design in [designs::DesignKind::MemberCr, designs::DesignKind::BudgetSplit] {
        let curve: Vec<_> = rows.iter().filter(|r| r.design == design).collect();
        assert!((curve[0].power - 0.05).abs() <= 3.0 * (0.05f64 * 0.95 / 1000.0).sqrt(), "{curve:?}");
        for w in curve.windows(2) {
            assert!(w[1].power + 3.0 * w[1].mc_se >= w[0].power, "{curve:?}");
        }
        assert!(curve.last().unwrap().power > 0.99);
    }
}
