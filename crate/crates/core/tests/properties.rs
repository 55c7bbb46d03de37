use proptest::prelude::*;
use splitlab_core::designs::{self, Assignment};
use splitlab_core::engine::{simulate, split_marketplace, Budget, Marketplace};
use splitlab_core::harness::ScenarioConfig;
use splitlab_core::models::{ground_truth_tau, AnalyticKind, AnalyticModel, MechanisticModel, OutcomeModelRef};
use splitlab_core::outcome::Estimand;

fn scenario(seed: u64, n: usize, m: usize, budget: i64, rate: f64, fraction: f64, reserve: i64, first_price: bool) -> Marketplace {
    let toml = format!(
        "seed = {seed}\n[marketplace]\nmembers = {n}\nhorizon = 6\nrequest_rate = {rate}\nreserve_cents = {reserve}\n\
         auction = \"{}\"\naffinity = {{ kind = \"lognormal\", sigma = 0.6 }}\n\
         [[marketplace.campaigns]]\ncount = {m}\nbudget_cents = {budget}\ntarget_fraction = {fraction}\nvalue_rate_cents = 120\nbid_shading = 0.8\n",
        if first_price { "first_price" } else { "second_price" }
    );
    let cfg = ScenarioConfig::from_toml_str(&toml).unwrap();
    cfg.build_marketplace(seed).unwrap()
}

fn plan_for(kind: u8, n: usize, m: usize, seed: u64) -> designs::AssignmentPlan {
    match kind {
        0 => designs::member_cr(n, (n / 2).max(1), seed).unwrap(),
        1 => designs::campaign_cr(m, (m / 2).max(1), seed).unwrap(),
        2 => designs::switchback(3, seed, true).unwrap(),
        _ => designs::budget_split(n, 0.5, seed).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delivery_respects_revenue_bounds(
        seed in 0u64..10_000,
        n in 2usize..12,
        m in 1usize..4,
        budget in 0i64..5000,
        rate in 0.0f64..3.0,
        fraction in 0.3f64..1.0,
        reserve in 0i64..150,
        first_price: bool,
        kind in 0u8..4,
        lift in 0.0f64..1.5,
    ) {
        let mk = scenario(seed, n, m, budget, rate, fraction, reserve, first_price);
        let plan = plan_for(kind, n, m, seed);
        let model = OutcomeModelRef::Mechanistic(MechanisticModel { lift });
        let del = simulate(&mk, &plan, &model).unwrap();
        for r in &del.outcomes.records {
            prop_assert!(r.revenue >= 0.0 && r.revenue <= r.delivered);
        }
        for (c, total) in del.outcomes.campaign_totals(Estimand::Revenue) {
            prop_assert!(total <= budget as f64, "campaign {c} revenue {total} > {budget}");
        }
        for (_, ledger) in del.tracker.iter() {
            prop_assert!(ledger.spend_cents <= budget);
        }
    }

    #[test]
    fn simulation_is_a_pure_function(seed in 0u64..1000, kind in 0u8..4) {
        let mk = scenario(seed, 8, 3, 900, 1.2, 0.8, 10, false);
        let plan = plan_for(kind, 8, 3, seed);
        let model = OutcomeModelRef::Mechanistic(MechanisticModel { lift: 0.25 });
        let a = simulate(&mk, &plan, &model).unwrap();
        let b = simulate(&mk, &plan, &model).unwrap();
        prop_assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn buckets_are_isolated(seed in 0u64..1000, bump in 0.1f64..3.0) {
        let mk = scenario(seed, 10, 2, 1500, 1.0, 1.0, 0, false);
        let plan = designs::budget_split(10, 0.5, seed).unwrap();
        let Assignment::BudgetSplit { d, .. } = &plan.assignment else { unreachable!() };
        let mut other = mk.clone();
        for (i, member) in other.members.iter_mut().enumerate() {
            if d[i] == 1 {
                member.affinity.iter_mut().for_each(|a| *a *= bump);
            }
        }
        let model = OutcomeModelRef::Mechanistic(MechanisticModel { lift: 0.3 });
        let a = simulate(&mk, &plan, &model).unwrap().buckets.unwrap();
        let b = simulate(&other, &plan, &model).unwrap().buckets.unwrap();
        prop_assert_eq!(a.0, b.0);
    }

    #[test]
    fn full_budget_utilization_never_gains_revenue(seed in 0u64..1000, tau in 0.0f64..3.0, noise in 0.0f64..1.0) {
        let mk = scenario(seed, 9, 3, 2000, 1.0, 0.7, 0, false);
        let model = OutcomeModelRef::Analytic(AnalyticModel { mu: 5.0, tau, gamma: 0.0, noise_sd: noise, kind: AnalyticKind::FullBudgetUtilization });
        let truth = ground_truth_tau(&mk, &model).unwrap();
        prop_assert!(truth.tau_star <= 1e-9);
    }

    #[test]
    fn split_budgets_sum_to_parent(seed in 0u64..1000, n in 2usize..15, budget in 0i64..100_000) {
        let mk = scenario(seed, n, 2, budget, 1.0, 1.0, 0, false);
        let plan = designs::budget_split(n, 0.5, seed).unwrap();
        let Assignment::BudgetSplit { d, .. } = &plan.assignment else { unreachable!() };
        let (b0, b1) = split_marketplace(&mk, d).unwrap();
        for ((p, x), y) in mk.campaigns.iter().zip(&b0.campaigns).zip(&b1.campaigns) {
            let (Budget::Cents(bp), Budget::Cents(bx), Budget::Cents(by)) = (p.budget, x.budget, y.budget) else { unreachable!() };
            prop_assert_eq!(bx + by, bp);
        }
    }
}

#[test]
fn no_op_treatment_has_zero_truth() {
    let mk = scenario(4, 10, 3, 2000, 1.0, 0.8, 0, false);
    let t = ground_truth_tau(&mk, &OutcomeModelRef::Mechanistic(MechanisticModel { lift: 0.0 })).unwrap();
    assert_eq!((t.tau, t.tau_star), (0.0, 0.0));
}

#[test]
fn supplement_truth_is_n_times_tau_minus_gamma() {
    for n in [3, 10, 25] {
        let mk = scenario(1, n, 1, 1000, 1.0, 1.0, 0, false);
        let t = ground_truth_tau(&mk, &OutcomeModelRef::Analytic(AnalyticModel::supplement(5.0, 2.0, 1.0, 0.0))).unwrap();
        assert!((t.tau - n as f64).abs() < 1e-9);
    }
}

#[test]
fn example_one_revenue_truth_not_positive() {
    let cfg = ScenarioConfig::from_toml_str(
        "seed = 11\n[marketplace]\nmembers = 200\nhorizon = 10\nrequest_rate = 0.5\nreserve_cents = 2000\n\
         affinity = { kind = \"uniform\", low = 0.5, high = 1.5 }\n[[marketplace.campaigns]]\nbudget_cents = 10000\nvalue_rate_cents = 2000\n",
    )
    .unwrap();
    for seed in 0..20 {
        let mk = cfg.build_marketplace(seed).unwrap();
        let t = ground_truth_tau(&mk, &OutcomeModelRef::Mechanistic(MechanisticModel { lift: 0.5 })).unwrap();
        assert!(t.tau_star <= 0.0, "seed {seed}: {}", t.tau_star);
    }
}
