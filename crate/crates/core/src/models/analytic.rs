//! Closed-form outcome models with exactly computable ground truth.
//!
//! - `SupplementS1`: `mu + tau*w - gamma*(e^(f-1) - 1/e)/(1 - 1/e) + eps`,
//!   `f` the treated fraction of the member's own marketplace. The naive
//!   contrast is `tau` for every `f` while the true effect is `tau - gamma`.
//! - `DiminishingReturns`: `mu + tau*w - gamma*K/(n-1) + eps`, `K` the number
//!   of other treated units. With `tau > gamma > 0` every control outcome is
//!   below every treated one and both arms decrease in `K`.
//! - `FullBudgetUtilization`: a campaign with finite budget `B` spends all of
//!   it, split across its targeted members in proportion to an attention
//!   weight `(1 + tau*w) * exp(eps)`. Treatment moves spend between members
//!   but cannot raise the total. With an unlimited budget each member is
//!   worth `mu * weight`.
//!
//! `eps` is one `Normal(0, noise_sd)` draw per member, shared by all of its
//! potential outcomes and campaigns, from stream `(seed, "analytic-noise", id)`.
//! These models have no time dimension. Budgets enter only through
//! `FullBudgetUtilization`; for the other two, revenue equals value.

use rand_distr::{Distribution, Normal};

use crate::designs::{Assignment, AssignmentPlan};
use crate::engine::{split_marketplace, Budget, Delivery, Marketplace, TrackerState};
use crate::error::{config, validation, Result};
use crate::outcome::{Arm, OutcomeMatrix, OutcomeRecord};
use crate::seed::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticKind {
    SupplementS1,
    DiminishingReturns,
    FullBudgetUtilization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticModel {
    pub mu: f64,
    pub tau: f64,
    pub gamma: f64,
    pub noise_sd: f64,
    pub kind: AnalyticKind,
}

impl AnalyticModel {
    pub fn supplement(mu: f64, tau: f64, gamma: f64, noise_sd: f64) -> Self {
        AnalyticModel { mu, tau, gamma, noise_sd, kind: AnalyticKind::SupplementS1 }
    }

    /// One admissible instance of the diminishing-returns ordering:
    /// base 5, `tau` 2, slope 1.
    pub fn diminishing_default() -> Self {
        AnalyticModel { mu: 5.0, tau: 2.0, gamma: 1.0, noise_sd: 0.0, kind: AnalyticKind::DiminishingReturns }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(validation(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(validation(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        Ok(())
    }
}

/// Supplement model value for one member.
pub fn analytic_outcome(model: &AnalyticModel, w: u8, treated_fraction: f64, noise: f64) -> f64 {
    let e_inv = (-1.0f64).exp();
    let crowding = ((treated_fraction - 1.0).exp() - e_inv) / (1.0 - e_inv);
    model.mu + model.tau * w as f64 - model.gamma * crowding + noise
}

/// Diminishing-returns value for one unit with `treated_count_excl` other
/// treated units among `n`.
pub fn diminishing_returns_outcome(model: &AnalyticModel, w: u8, treated_count_excl: usize, n: usize) -> Result<f64> {
    if n == 0 || treated_count_excl > n - 1 {
        return Err(validation(format!("treated count {treated_count_excl} outside [0, {}]", n.saturating_sub(1))));
    }
    let share = if n > 1 { treated_count_excl as f64 / (n - 1) as f64 } else { 0.0 };
    Ok(model.mu + model.tau * w as f64 - model.gamma * share)
}

/// How arms are laid out in one isolated world.
enum Layout<'a> {
    /// Indexed by member id.
    Members(&'a [u8]),
    /// Indexed by campaign id.
    Campaigns(&'a [u8]),
    All(Arm),
}

impl AnalyticModel {
    fn noise(&self, market: &Marketplace) -> Vec<f64> {
        let max_id = market.members.iter().map(|m| m.id as usize).max().unwrap_or(0);
        let mut eps = vec![0.0; max_id + 1];
        if self.noise_sd > 0.0 {
            let normal = Normal::new(0.0, self.noise_sd).expect("validated noise");
            for m in &market.members {
                eps[m.id as usize] = normal.sample(&mut derived_rng(market.seed, "analytic-noise", m.id as u64));
            }
        }
        eps
    }

    pub(crate) fn simulate(&self, market: &Marketplace, plan: &AssignmentPlan) -> Result<Delivery> {
        self.validate()?;
        let eps = self.noise(market);
        let (outcomes, buckets) = match &plan.assignment {
            Assignment::MemberCr { w } => (self.world(market, &Layout::Members(w), &eps)?, None),
            Assignment::CampaignCr { w } => (self.world(market, &Layout::Campaigns(w), &eps)?, None),
            Assignment::BudgetSplit { d, .. } => {
                let (m0, m1) = split_marketplace(market, d)?;
                let o0 = self.world(&m0, &Layout::All(plan.bucket_arm(0).expect("split")), &eps)?;
                let o1 = self.world(&m1, &Layout::All(plan.bucket_arm(1).expect("split")), &eps)?;
                (OutcomeMatrix::merge([o0.clone(), o1.clone()]), Some((o0, o1)))
            }
            Assignment::Switchback { .. } => {
                return Err(config("analytic outcome models have no time dimension; switchback needs the mechanistic engine or the carryover model"));
            }
        };
        Ok(Delivery { outcomes, buckets, tracker: TrackerState::new() })
    }

    pub(crate) fn simulate_uniform(&self, market: &Marketplace, arm: Arm) -> Result<OutcomeMatrix> {
        self.validate()?;
        let eps = self.noise(market);
        self.world(market, &Layout::All(arm), &eps)
    }

    fn world(&self, market: &Marketplace, layout: &Layout<'_>, eps: &[f64]) -> Result<OutcomeMatrix> {
        let n = market.n_members();
        let m = market.n_campaigns();
        let member_arm = |id: u32| -> Option<u8> {
            match layout {
                Layout::Members(w) => Some(w[id as usize]),
                Layout::All(a) => Some(a.bit()),
                Layout::Campaigns(_) => None,
            }
        };
        let treated_members = market.members.iter().filter(|mb| member_arm(mb.id) == Some(1)).count();
        let treated_campaigns = match layout {
            Layout::Campaigns(w) => w.iter().filter(|&&b| b == 1).count(),
            _ => 0,
        };

        let mut records = Vec::new();
        for c in &market.campaigns {
            let arm_of = |i: usize| -> u8 {
                match layout {
                    Layout::Campaigns(w) => w[c.id as usize],
                    _ => member_arm(market.members[i].id).unwrap_or(0),
                }
            };
            // (population size, treated units in it) seen by this pair
            let population = |w: u8| -> (usize, usize) {
                match layout {
                    Layout::Campaigns(_) => (m, treated_campaigns - w as usize),
                    _ => (n, treated_members - w as usize),
                }
            };
            let values: Vec<f64> = match self.kind {
                AnalyticKind::SupplementS1 => c
                    .target
                    .iter()
                    .map(|&i| {
                        let w = arm_of(i);
                        let (size, others) = population(w);
                        let f = (others + w as usize) as f64 / size as f64;
                        analytic_outcome(self, w, f, eps[market.members[i].id as usize])
                    })
                    .collect(),
                AnalyticKind::DiminishingReturns => c
                    .target
                    .iter()
                    .map(|&i| {
                        let w = arm_of(i);
                        let (size, others) = population(w);
                        Ok(diminishing_returns_outcome(self, w, others, size)? + eps[market.members[i].id as usize])
                    })
                    .collect::<Result<_>>()?,
                AnalyticKind::FullBudgetUtilization => {
                    let weights: Vec<f64> = c
                        .target
                        .iter()
                        .map(|&i| (1.0 + self.tau * arm_of(i) as f64) * eps[market.members[i].id as usize].exp())
                        .collect();
                    match c.budget {
                        Budget::Cents(b) => {
                            let total: f64 = weights.iter().sum();
                            weights.iter().map(|wt| if total > 0.0 { b as f64 * wt / total } else { 0.0 }).collect()
                        }
                        Budget::Unlimited => weights.iter().map(|wt| self.mu * wt).collect(),
                    }
                }
            };
            for (&i, v) in c.target.iter().zip(values) {
                let member = market.members[i].id;
                records.push(OutcomeRecord {
                    member,
                    campaign: c.id,
                    arm: Some(Arm::from_bit(arm_of(i))),
                    delivered: v,
                    revenue: v,
                });
            }
        }
        Ok(OutcomeMatrix::new(records))
    }
}
