//! Brute-force checks: exact expectations by enumerating every admissible
//! assignment, and Monte Carlo validation of the stable-system assumption
//! through proportionally restricted marketplaces.

use std::io::Write;

use itertools::Itertools;
use rayon::prelude::*;

use crate::designs::{self, Assignment, AssignmentPlan, DesignKind};
use crate::engine::{restrict_marketplace, simulate, simulate_uniform_sub, Marketplace};
use crate::error::{config, validation, Error, Result};
use crate::estimators::{estimate, SplitMode};
use crate::models::{ground_truth_tau, OutcomeModelRef};
use crate::outcome::{Arm, Estimand};
use crate::seed::derive_seed;

pub const DEFAULT_LIMIT: u128 = 1_000_000;

/// Which assignments to enumerate.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    MemberCr { n1: usize },
    CampaignCr { m1: usize },
    /// Balanced: `2^ceil(T/2)` pairwise schedules. Unbalanced: all `2^T`
    /// schedules except the two single-arm ones.
    Switchback { periods: usize, balanced: bool },
    /// Half split with bucket 1 taking the odd member; coin weighted by `p`.
    BudgetSplit { treat_prob: f64 },
    /// A single given plan.
    Fixed(AssignmentPlan),
}

impl DesignSpec {
    pub fn kind(&self) -> DesignKind {
        match self {
            DesignSpec::MemberCr { .. } => DesignKind::MemberCr,
            DesignSpec::CampaignCr { .. } => DesignKind::CampaignCr,
            DesignSpec::Switchback { .. } => DesignKind::Switchback,
            DesignSpec::BudgetSplit { .. } => DesignKind::BudgetSplit,
            DesignSpec::Fixed(plan) => plan.kind(),
        }
    }
}

/// Engine randomness across enumerated assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedMode {
    /// Mechanistic runs of assignment rank `r` use seed
    /// `derive_seed(seed, "assignment", r)`.
    #[default]
    PerAssignment,
    /// Every assignment runs with the marketplace's own seed (common random
    /// numbers), so the expectation is over assignments only.
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumOptions {
    pub estimand: Estimand,
    pub split_mode: SplitMode,
    pub seed_mode: SeedMode,
    pub limit: u128,
    /// Skip the size guard.
    pub force: bool,
    /// Mechanistic models simulate the engine once per assignment.
    pub allow_mechanistic: bool,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            estimand: Estimand::DeliveredValue,
            split_mode: SplitMode::Member,
            seed_mode: SeedMode::PerAssignment,
            limit: DEFAULT_LIMIT,
            force: false,
            allow_mechanistic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub design: DesignKind,
    pub exact_mean: f64,
    pub ground_truth: f64,
    pub bias: f64,
    pub assignments_evaluated: u64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn pow2(e: usize) -> u128 {
    if e >= 127 { u128::MAX } else { 1u128 << e }
}

/// Number of assignments `spec` enumerates on a marketplace of size `(n, m)`.
pub fn enumeration_size(spec: &DesignSpec, n: usize, m: usize) -> u128 {
    match spec {
        DesignSpec::MemberCr { n1 } => binomial(n, *n1),
        DesignSpec::CampaignCr { m1 } => binomial(m, *m1),
        DesignSpec::Switchback { periods, balanced: true } => pow2(periods.div_ceil(2)),
        DesignSpec::Switchback { periods, balanced: false } => pow2(*periods).saturating_sub(2),
        DesignSpec::BudgetSplit { .. } => binomial(n, n - n / 2).saturating_mul(2),
        DesignSpec::Fixed(_) => 1,
    }
}

fn ones_at(len: usize, idx: &[usize]) -> Vec<u8> {
    let mut v = vec![0u8; len];
    idx.iter().for_each(|&i| v[i] = 1);
    v
}

/// Every admissible assignment in lexicographic order with its weight.
fn assignments(spec: &DesignSpec, n: usize, m: usize) -> Result<Vec<(Assignment, f64)>> {
    let out = match spec {
        DesignSpec::MemberCr { n1 } => {
            if *n1 < 1 || *n1 > n {
                return Err(validation(format!("treated count {n1} outside [1, {n}]")));
            }
            (0..n).combinations(*n1).map(|c| (Assignment::MemberCr { w: ones_at(n, &c) }, 1.0)).collect()
        }
        DesignSpec::CampaignCr { m1 } => {
            if *m1 < 1 || *m1 > m {
                return Err(validation(format!("treated count {m1} outside [1, {m}]")));
            }
            (0..m).combinations(*m1).map(|c| (Assignment::CampaignCr { w: ones_at(m, &c) }, 1.0)).collect()
        }
        DesignSpec::Switchback { periods, balanced } => {
            let t = *periods;
            if t < 2 {
                return Err(validation(format!("switchback needs at least 2 periods, got {t}")));
            }
            if *balanced {
                let bits = t.div_ceil(2);
                (0..1u64 << bits)
                    .map(|mask| {
                        let schedule: Vec<u8> = (0..t)
                            .map(|p| {
                                let b = (mask >> (bits - 1 - p / 2) & 1) as u8;
                                if p % 2 == 0 { b } else { 1 - b }
                            })
                            .collect();
                        (Assignment::Switchback { schedule }, 1.0)
                    })
                    .collect()
            } else {
                (1..(1u64 << t) - 1)
                    .map(|mask| {
                        let schedule = (0..t).map(|p| (mask >> (t - 1 - p) & 1) as u8).collect();
                        (Assignment::Switchback { schedule }, 1.0)
                    })
                    .collect()
            }
        }
        DesignSpec::BudgetSplit { treat_prob } => {
            if n < 2 {
                return Err(validation(format!("budget_split needs at least 2 members, got {n}")));
            }
            if !(0.0..=1.0).contains(treat_prob) {
                return Err(validation(format!("treatment probability {treat_prob} outside [0, 1]")));
            }
            let p = *treat_prob;
            (0..n)
                .combinations(n - n / 2)
                .flat_map(|c| {
                    let d = ones_at(n, &c);
                    [(0u8, 1.0 - p), (1u8, p)]
                        .map(|(coin, wt)| (Assignment::BudgetSplit { d: d.clone(), coin, treat_prob: p }, wt))
                })
                .collect()
        }
        DesignSpec::Fixed(plan) => vec![(plan.assignment.clone(), 1.0)],
    };
    Ok(out)
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Exact average of the design's estimator over every admissible
/// assignment, against the all-treated minus all-control truth.
/// `Fixed` plans always run with the marketplace's own seed.
pub fn enumerate_expectation(
    market: &Marketplace,
    model: &OutcomeModelRef,
    spec: &DesignSpec,
    opts: &EnumOptions,
) -> Result<EnumerationResult> {
    market.validate()?;
    if model.is_mechanistic() && !opts.allow_mechanistic {
        return Err(config("enumerating a mechanistic model simulates the engine per assignment; set allow_mechanistic"));
    }
    let size = enumeration_size(spec, market.n_members(), market.n_campaigns());
    if size > opts.limit && !opts.force {
        return Err(Error::EnumerationTooLarge {
            size,
            limit: opts.limit,
            hint: "pass force to enumerate anyway".into(),
        });
    }
    let all = assignments(spec, market.n_members(), market.n_campaigns())?;
    // analytic potential outcomes are fixed; only engine runs are re-seeded
    let common = matches!(spec, DesignSpec::Fixed(_)) || opts.seed_mode == SeedMode::Common || !model.is_mechanistic();
    let estimates: Vec<(f64, f64)> = all
        .par_iter()
        .enumerate()
        .map(|(rank, (assignment, weight))| {
            let plan_seed = derive_seed(market.seed, "assignment", rank as u64);
            let plan = AssignmentPlan { assignment: assignment.clone(), seed: plan_seed };
            let world = if common { market.clone() } else { Marketplace { seed: plan_seed, ..market.clone() } };
            let delivery = simulate(&world, &plan, model)?;
            let est = estimate(&delivery, &plan, opts.estimand, opts.split_mode, plan_seed)?;
            Ok((est.total_estimate, *weight))
        })
        .collect::<Result<_>>()?;
    let total_weight = neumaier_sum(estimates.iter().map(|e| e.1));
    let exact_mean = neumaier_sum(estimates.iter().map(|(v, w)| v * w)) / total_weight;
    let ground_truth = ground_truth_tau(market, model)?.get(opts.estimand);
    Ok(EnumerationResult {
        design: spec.kind(),
        exact_mean,
        ground_truth,
        bias: exact_mean - ground_truth,
        assignments_evaluated: estimates.len() as u64,
    })
}

pub fn write_enumeration_csv<W: Write>(rows: &[EnumerationResult], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["design", "assignments_evaluated", "exact_mean", "ground_truth", "bias"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.design.name().to_string(),
            r.assignments_evaluated.to_string(),
            r.exact_mean.to_string(),
            r.ground_truth.to_string(),
            r.bias.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-`K` relative gap between restricted and full per-member outcomes,
/// averaged over random restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub k: usize,
    /// Over all campaigns, all-treated world.
    pub treated: f64,
    /// Over all campaigns, all-control world.
    pub control: f64,
    /// Largest single-campaign gap in the all-treated world.
    pub worst_campaign: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        ((a - b) / b).abs()
    }
}

/// For each `K`, restricts every campaign to the same `K` random members
/// (budget `floor(K B / N)`) and compares `(1/K) sum_i Y_ij` in the
/// restricted world with `(1/N) sum_i Y_ij` in the full one. The engine
/// seed is held fixed across restrictions; restriction `r` of size `K` is
/// drawn from `derive_seed(seed, "restriction", K * 2^32 + r)`.
pub fn validate_stable_system(
    market: &Marketplace,
    model: &OutcomeModelRef,
    k_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<StabilityRow>> {
    market.validate()?;
    let n = market.n_members();
    if reps == 0 {
        return Err(validation("stability check needs at least one repetition"));
    }
    if let Some(&k) = k_grid.iter().find(|&&k| k < 1 || k > n) {
        return Err(validation(format!("restriction size {k} outside [1, {n}]")));
    }
    let m = market.n_campaigns();
    let per_member = |arm: Arm, mk: &Marketplace, size: usize| -> Result<Vec<f64>> {
        let totals = simulate_uniform_sub(mk, arm, model)?.campaign_totals(Estimand::DeliveredValue);
        Ok((0..m).map(|j| totals.get(&(j as u32)).copied().unwrap_or(0.0) / size as f64).collect())
    };
    let full = [per_member(Arm::Control, market, n)?, per_member(Arm::Treatment, market, n)?];

    k_grid
        .iter()
        .map(|&k| {
            let sums: Vec<[Vec<f64>; 2]> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let plan = designs::member_cr(n, k, derive_seed(seed, "restriction", ((k as u64) << 32) + r as u64))?;
                    let Assignment::MemberCr { w } = plan.assignment else { unreachable!() };
                    let keep: Vec<bool> = w.iter().map(|&b| b == 1).collect();
                    let sub = restrict_marketplace(market, &keep)?;
                    Ok([per_member(Arm::Control, &sub, k)?, per_member(Arm::Treatment, &sub, k)?])
                })
                .collect::<Result<_>>()?;
            let mean = |arm: usize, j: usize| neumaier_sum(sums.iter().map(|s| s[arm][j])) / reps as f64;
            let gap = |arm: usize| {
                let restricted = neumaier_sum((0..m).map(|j| mean(arm, j)));
                relative(restricted, neumaier_sum(full[arm].iter().copied()))
            };
            let worst = (0..m).map(|j| relative(mean(1, j), full[1][j])).fold(0.0, f64::max);
            Ok(StabilityRow { k, treated: gap(1), control: gap(0), worst_campaign: worst })
        })
        .collect()
}
