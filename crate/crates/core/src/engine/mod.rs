//! Mechanistic delivery engine: request generation, auctions, pacing at
//! campaign-arm granularity, and outcome tracking.

mod auction;
mod delivery;
mod market;
mod pacing;
mod split;

pub use auction::{run_auction, AdRequest, AuctionResult, CampaignBidState};
pub use delivery::{run_engine, EngineRun, Exposure};
pub use market::{
    AuctionConfig, AuctionRule, Budget, Campaign, CampaignId, CampaignParams, Marketplace, MemberId, MemberProfile,
    PacingParams,
};
pub use pacing::{pacing_step, ArmLedger, ArmTag, TrackerKey, TrackerState};
pub use split::{restrict_marketplace, split_marketplace};

use crate::designs::{Assignment, AssignmentPlan};
use crate::error::{config, Error, Result};
use crate::models::OutcomeModelRef;
use crate::outcome::{Arm, OutcomeMatrix};

/// Full result of a simulated assignment; budget-split plans keep the two
/// bucket matrices apart.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub outcomes: OutcomeMatrix,
    /// `(bucket 0, bucket 1)` outcomes for budget-split plans.
    pub buckets: Option<(OutcomeMatrix, OutcomeMatrix)>,
    pub tracker: TrackerState,
}

/// Checks that `plan` fits the marketplace dimensions.
pub fn check_plan(market: &Marketplace, plan: &AssignmentPlan) -> Result<()> {
    let (n, m) = (market.n_members(), market.n_campaigns());
    match &plan.assignment {
        Assignment::MemberCr { w } if w.len() != n => {
            Err(config(format!("member vector has length {} for {n} members", w.len())))
        }
        Assignment::CampaignCr { w } if w.len() != m => {
            Err(config(format!("campaign vector has length {} for {m} campaigns", w.len())))
        }
        Assignment::BudgetSplit { d, .. } if d.len() != n => {
            Err(config(format!("bucket vector has length {} for {n} members", d.len())))
        }
        Assignment::Switchback { schedule } if schedule.len() > market.horizon as usize => Err(config(format!(
            "switchback has {} periods but the horizon has only {} ticks",
            schedule.len(),
            market.horizon
        ))),
        _ => Ok(()),
    }
}

/// Simulates `plan` on `market` under `model`.
pub fn simulate_delivery(market: &Marketplace, plan: &AssignmentPlan, model: &OutcomeModelRef) -> Result<OutcomeMatrix> {
    Ok(simulate(market, plan, model)?.outcomes)
}

/// Like [`simulate_delivery`] but also returns the per-bucket matrices and
/// the tracker.
pub fn simulate(market: &Marketplace, plan: &AssignmentPlan, model: &OutcomeModelRef) -> Result<Delivery> {
    market.validate()?;
    check_plan(market, plan)?;
    match model {
        OutcomeModelRef::Mechanistic(mech) => simulate_mechanistic(market, plan, mech.lift),
        OutcomeModelRef::Analytic(analytic) => analytic.simulate(market, plan),
    }
}

fn simulate_mechanistic(market: &Marketplace, plan: &AssignmentPlan, lift: f64) -> Result<Delivery> {
    let delivery = match &plan.assignment {
        Assignment::BudgetSplit { d, .. } => {
            let (m0, m1) = split_marketplace(market, d)?;
            let arm0 = plan.bucket_arm(0).expect("budget split");
            let arm1 = plan.bucket_arm(1).expect("budget split");
            let r0 = run_engine(&m0, Exposure::Uniform(arm0), lift, ArmTag::Arm(arm0));
            let r1 = run_engine(&m1, Exposure::Uniform(arm1), lift, ArmTag::Arm(arm1));
            ensure_revenue_bounds(&r0.outcomes, &m0)?;
            ensure_revenue_bounds(&r1.outcomes, &m1)?;
            let mut tracker = r0.tracker;
            tracker.absorb(r1.tracker);
            Delivery {
                outcomes: OutcomeMatrix::merge([r0.outcomes.clone(), r1.outcomes.clone()]),
                buckets: Some((r0.outcomes, r1.outcomes)),
                tracker,
            }
        }
        other => {
            let exposure = match other {
                Assignment::MemberCr { w } => Exposure::Members(w),
                Assignment::CampaignCr { w } => Exposure::Campaigns(w),
                Assignment::Switchback { schedule } => Exposure::Schedule(schedule),
                Assignment::BudgetSplit { .. } => unreachable!(),
            };
            let run = run_engine(market, exposure, lift, ArmTag::Pooled);
            ensure_revenue_bounds(&run.outcomes, market)?;
            Delivery { outcomes: run.outcomes, buckets: None, tracker: run.tracker }
        }
    };
    Ok(delivery)
}

/// Runs the all-`arm` world with the marketplace's own seed.
pub fn simulate_uniform(market: &Marketplace, arm: Arm, model: &OutcomeModelRef) -> Result<OutcomeMatrix> {
    market.validate()?;
    uniform_world(market, arm, model)
}

/// [`simulate_uniform`] for split or restricted marketplaces, whose member
/// ids no longer match positions.
pub fn simulate_uniform_sub(market: &Marketplace, arm: Arm, model: &OutcomeModelRef) -> Result<OutcomeMatrix> {
    market.validate_values()?;
    uniform_world(market, arm, model)
}

fn uniform_world(market: &Marketplace, arm: Arm, model: &OutcomeModelRef) -> Result<OutcomeMatrix> {
    match model {
        OutcomeModelRef::Mechanistic(mech) => {
            let run = run_engine(market, Exposure::Uniform(arm), mech.lift, ArmTag::Pooled);
            ensure_revenue_bounds(&run.outcomes, market)?;
            Ok(run.outcomes)
        }
        OutcomeModelRef::Analytic(analytic) => analytic.simulate_uniform(market, arm),
    }
}

fn ensure_revenue_bounds(outcomes: &OutcomeMatrix, market: &Marketplace) -> Result<()> {
    let violations = outcomes.violations(market);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!("{violations:?}")))
    }
}
