//! Point estimators and tests for each design.
//!
//! Every estimate is scaled to the full population: a bucket or arm total
//! is divided by the share of units it covers.

mod permutation;
mod ttest;

pub use permutation::{paired_permutation_test, PermutationTest, EXACT_PAIRS, RESAMPLES};
pub use ttest::{two_sample_t_test, TTest};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::designs::{Assignment, AssignmentPlan};
use crate::engine::{CampaignId, Delivery};
use crate::error::{config, validation, Error, Result};
use crate::outcome::{Arm, Estimand, OutcomeMatrix, PeriodTotal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NaivePlugin,
    CampaignLevel,
    BudgetSplitMember,
    BudgetSplitCampaign,
    SwitchbackPaired,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NaivePlugin => "naive_plugin",
            Method::CampaignLevel => "campaign_level",
            Method::BudgetSplitMember => "budget_split_me",
            Method::BudgetSplitCampaign => "budget_split_ce",
            Method::SwitchbackPaired => "switchback_paired",
        }
    }
}

/// Unit of the budget-split t-test: member totals (ME) or campaign-clone
/// totals (CE).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Member,
    Campaign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimand: Estimand,
    pub total_estimate: f64,
    /// Empty for switchback, which only sees marketplace-wide period totals.
    pub per_campaign: Vec<(CampaignId, f64)>,
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

impl EstimateReport {
    fn from_per_campaign(estimand: Estimand, per_campaign: Vec<(CampaignId, f64)>, test: TTest, method: Method) -> Self {
        EstimateReport {
            estimand,
            total_estimate: per_campaign.iter().map(|(_, v)| v).sum(),
            per_campaign,
            statistic: test.statistic,
            p_value: test.p_value,
            method,
        }
    }

    /// `key: value` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method: {}", self.method.name())?;
        writeln!(out, "estimand: {}", self.estimand.name())?;
        writeln!(out, "total_estimate: {}", self.total_estimate)?;
        writeln!(out, "statistic: {}", self.statistic)?;
        writeln!(out, "p_value: {}", self.p_value)?;
        for (c, v) in &self.per_campaign {
            writeln!(out, "campaign {c}: {v}")?;
        }
        Ok(())
    }

    /// `campaign_id,estimate` rows; the total goes last with id `total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["campaign_id", "estimate"]).map_err(io)?;
        for (c, v) in &self.per_campaign {
            w.write_record([c.to_string(), v.to_string()]).map_err(io)?;
        }
        w.write_record(["total".to_string(), self.total_estimate.to_string()]).map_err(io)?;
        w.flush()?;
        Ok(())
    }
}

fn arm_counts(w: &[u8], what: &str) -> Result<(usize, usize)> {
    let n1 = w.iter().filter(|&&b| b == 1).count();
    let n0 = w.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedContrast(format!("{what}: {n1} treated and {n0} control units")));
    }
    Ok((n1, n0))
}

fn t_test_or_flat(treat: &[f64], control: &[f64]) -> TTest {
    // single-unit arms still get a point estimate; the test is then void
    two_sample_t_test(treat, control).unwrap_or(TTest { statistic: f64::NAN, p_value: 1.0, df: f64::NAN, degenerate: true })
}

/// Member-level plug-in estimator: per campaign,
/// `sum_treated Y / (N1/N) - sum_control Y / (N0/N)`. Tested with Welch on
/// member totals.
pub fn naive_plugin(outcomes: &OutcomeMatrix, plan: &AssignmentPlan, estimand: Estimand) -> Result<EstimateReport> {
    let Assignment::MemberCr { w } = &plan.assignment else {
        return Err(config("naive_plugin needs a member_cr plan"));
    };
    let (n1, n0) = arm_counts(w, "naive_plugin")?;
    let n = w.len() as f64;
    let (s1, s0) = (n / n1 as f64, n / n0 as f64);
    let mut per: BTreeMap<CampaignId, f64> = BTreeMap::new();
    let mut member_tot = vec![0.0; w.len()];
    for r in &outcomes.records {
        let i = r.member as usize;
        if i >= w.len() {
            return Err(config(format!("outcome for member {i} outside the plan")));
        }
        let v = r.value(estimand);
        *per.entry(r.campaign).or_insert(0.0) += if w[i] == 1 { v * s1 } else { -v * s0 };
        member_tot[i] += v;
    }
    let (treat, control): (Vec<_>, Vec<_>) = member_tot.iter().zip(w).partition(|(_, &b)| b == 1);
    let treat: Vec<f64> = treat.into_iter().map(|(v, _)| *v).collect();
    let control: Vec<f64> = control.into_iter().map(|(v, _)| *v).collect();
    Ok(EstimateReport::from_per_campaign(
        estimand,
        per.into_iter().collect(),
        t_test_or_flat(&treat, &control),
        Method::NaivePlugin,
    ))
}

/// Campaign-level CR estimator: per campaign `+Y_j M/M1` if treated,
/// `-Y_j M/M0` otherwise, so the total is `M * (mean_t - mean_c)`.
pub fn campaign_level_estimator(outcomes: &OutcomeMatrix, plan: &AssignmentPlan, estimand: Estimand) -> Result<EstimateReport> {
    let Assignment::CampaignCr { w } = &plan.assignment else {
        return Err(config("campaign_level_estimator needs a campaign_cr plan"));
    };
    let (m1, m0) = arm_counts(w, "campaign_level_estimator")?;
    let totals = outcomes.campaign_totals(estimand);
    if let Some((&c, _)) = totals.iter().find(|(&c, _)| c as usize >= w.len()) {
        return Err(config(format!("outcome for campaign {c} outside the plan")));
    }
    let m = w.len() as f64;
    let ys: Vec<f64> = (0..w.len()).map(|j| totals.get(&(j as CampaignId)).copied().unwrap_or(0.0)).collect();
    let per: Vec<(CampaignId, f64)> = ys
        .iter()
        .zip(w)
        .enumerate()
        .map(|(j, (&y, &b))| (j as CampaignId, if b == 1 { y * m / m1 as f64 } else { -y * m / m0 as f64 }))
        .collect();
    let treat: Vec<f64> = ys.iter().zip(w).filter(|(_, &b)| b == 1).map(|(y, _)| *y).collect();
    let control: Vec<f64> = ys.iter().zip(w).filter(|(_, &b)| b == 0).map(|(y, _)| *y).collect();
    Ok(EstimateReport::from_per_campaign(estimand, per, t_test_or_flat(&treat, &control), Method::CampaignLevel))
}

/// Budget-split estimator: per campaign, treated-bucket clone total over
/// `N_t/N` minus control-bucket clone total over `N_c/N`.
pub fn budget_split_estimator(
    outcomes0: &OutcomeMatrix,
    outcomes1: &OutcomeMatrix,
    plan: &AssignmentPlan,
    estimand: Estimand,
    mode: SplitMode,
) -> Result<EstimateReport> {
    let Assignment::BudgetSplit { d, .. } = &plan.assignment else {
        return Err(config("budget_split_estimator needs a budget_split plan"));
    };
    let n1 = d.iter().filter(|&&b| b == 1).count();
    let sizes = [d.len() - n1, n1];
    if sizes.contains(&0) {
        return Err(validation(format!("bucket sizes {sizes:?} must both be positive")));
    }
    let n = d.len() as f64;
    let buckets = [outcomes0, outcomes1];
    let treated = if plan.bucket_arm(1) == Some(Arm::Treatment) { 1 } else { 0 };
    let control = 1 - treated;
    let scale = |l: usize| n / sizes[l] as f64;

    let tot = [buckets[0].campaign_totals(estimand), buckets[1].campaign_totals(estimand)];
    let mut ids: Vec<CampaignId> = tot[0].keys().chain(tot[1].keys()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let clone = |l: usize, c: CampaignId| tot[l].get(&c).copied().unwrap_or(0.0) * scale(l);
    let per: Vec<(CampaignId, f64)> = ids.iter().map(|&c| (c, clone(treated, c) - clone(control, c))).collect();

    let test = match mode {
        SplitMode::Member => {
            let member_list = |l: usize| -> Vec<f64> {
                let totals = buckets[l].member_totals(estimand);
                d.iter()
                    .enumerate()
                    .filter(|(_, &b)| b as usize == l)
                    .map(|(i, _)| totals.get(&(i as u32)).copied().unwrap_or(0.0))
                    .collect()
            };
            t_test_or_flat(&member_list(treated), &member_list(control))
        }
        SplitMode::Campaign => {
            let clones = |l: usize| -> Vec<f64> { ids.iter().map(|&c| clone(l, c)).collect() };
            t_test_or_flat(&clones(treated), &clones(control))
        }
    };
    let method = match mode {
        SplitMode::Member => Method::BudgetSplitMember,
        SplitMode::Campaign => Method::BudgetSplitCampaign,
    };
    Ok(EstimateReport::from_per_campaign(estimand, per, test, method))
}

/// Switchback estimate `(mean treated - mean control) * T`. The paired
/// permutation test uses consecutive periods `(2k, 2k+1)` holding one
/// period of each arm; other pairs are dropped from the test.
pub fn switchback_estimator(periods: &[PeriodTotal], estimand: Estimand, seed: u64) -> Result<EstimateReport> {
    let mut ps: Vec<&PeriodTotal> = periods.iter().collect();
    ps.sort_by_key(|p| p.period);
    let pick = |arm: Arm| -> Vec<f64> { ps.iter().filter(|p| p.arm == arm).map(|p| p.value(estimand)).collect() };
    let (t, c) = (pick(Arm::Treatment), pick(Arm::Control));
    if t.is_empty() || c.is_empty() {
        return Err(Error::UndefinedContrast(format!("switchback: {} treated and {} control periods", t.len(), c.len())));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let estimate = (mean(&t) - mean(&c)) * ps.len() as f64;
    let diffs: Vec<f64> = ps
        .chunks_exact(2)
        .filter(|pair| pair[0].arm != pair[1].arm)
        .map(|pair| {
            let (a, b) = (pair[0].value(estimand), pair[1].value(estimand));
            if pair[0].arm == Arm::Treatment { a - b } else { b - a }
        })
        .collect();
    let test = paired_permutation_test(&diffs, seed);
    Ok(EstimateReport {
        estimand,
        total_estimate: estimate,
        per_campaign: Vec::new(),
        statistic: test.statistic,
        p_value: test.p_value,
        method: Method::SwitchbackPaired,
    })
}

/// Applies the estimator that matches the plan's design.
pub fn estimate(delivery: &Delivery, plan: &AssignmentPlan, estimand: Estimand, mode: SplitMode, seed: u64) -> Result<EstimateReport> {
    match &plan.assignment {
        Assignment::MemberCr { .. } => naive_plugin(&delivery.outcomes, plan, estimand),
        Assignment::CampaignCr { .. } => campaign_level_estimator(&delivery.outcomes, plan, estimand),
        Assignment::BudgetSplit { .. } => {
            let (o0, o1) = delivery
                .buckets
                .as_ref()
                .ok_or_else(|| config("budget-split delivery is missing its bucket outcomes"))?;
            budget_split_estimator(o0, o1, plan, estimand, mode)
        }
        Assignment::Switchback { .. } => switchback_estimator(&delivery.outcomes.periods, estimand, seed),
    }
}
