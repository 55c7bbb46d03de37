//! Potential-outcome backends.
//!
//! [`OutcomeModelRef`] selects either the mechanistic engine or a
//! closed-form [`AnalyticModel`]. Two aggregate models, [`CarryoverModel`]
//! and [`FactorModel`], generate design-level totals directly and are used
//! by the switchback and power studies.

mod analytic;
mod carryover;
mod factor;

pub use analytic::{analytic_outcome, diminishing_returns_outcome, AnalyticKind, AnalyticModel};
pub use carryover::CarryoverModel;
pub use factor::{FactorMarket, FactorModel};

use crate::engine::{simulate_uniform, CampaignId, Marketplace};
use crate::error::Result;
use crate::outcome::{Arm, Estimand};

/// Treatment multiplies the value (and hence the bid) of every treated
/// (member, campaign) pair by `1 + lift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanisticModel {
    pub lift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeModelRef {
    Mechanistic(MechanisticModel),
    Analytic(AnalyticModel),
}

impl OutcomeModelRef {
    /// Same model with its effect-size knob set to `effect` (`lift` for the
    /// engine, `tau` for analytic models).
    pub fn with_effect(&self, effect: f64) -> OutcomeModelRef {
        match *self {
            OutcomeModelRef::Mechanistic(_) => OutcomeModelRef::Mechanistic(MechanisticModel { lift: effect }),
            OutcomeModelRef::Analytic(a) => OutcomeModelRef::Analytic(AnalyticModel { tau: effect, ..a }),
        }
    }

    pub fn is_mechanistic(&self) -> bool {
        matches!(self, OutcomeModelRef::Mechanistic(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignTruth {
    pub campaign: CampaignId,
    pub tau: f64,
    pub tau_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Effect on total delivered value.
    pub tau: f64,
    /// Effect on total revenue.
    pub tau_star: f64,
    pub per_campaign: Vec<CampaignTruth>,
}

impl GroundTruth {
    pub fn get(&self, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::DeliveredValue => self.tau,
            Estimand::Revenue => self.tau_star,
        }
    }
}

/// All-treatment world minus all-control world, both run with the
/// marketplace's own seed.
pub fn ground_truth_tau(market: &Marketplace, model: &OutcomeModelRef) -> Result<GroundTruth> {
    let treated = simulate_uniform(market, Arm::Treatment, model)?;
    let control = simulate_uniform(market, Arm::Control, model)?;
    let (t_val, c_val) = (treated.campaign_totals(Estimand::DeliveredValue), control.campaign_totals(Estimand::DeliveredValue));
    let (t_rev, c_rev) = (treated.campaign_totals(Estimand::Revenue), control.campaign_totals(Estimand::Revenue));
    let per_campaign: Vec<CampaignTruth> = market
        .campaigns
        .iter()
        .map(|c| {
            let get = |m: &std::collections::BTreeMap<CampaignId, f64>| m.get(&c.id).copied().unwrap_or(0.0);
            CampaignTruth { campaign: c.id, tau: get(&t_val) - get(&c_val), tau_star: get(&t_rev) - get(&c_rev) }
        })
        .collect();
    Ok(GroundTruth {
        tau: per_campaign.iter().map(|c| c.tau).sum(),
        tau_star: per_campaign.iter().map(|c| c.tau_star).sum(),
        per_campaign,
    })
}
