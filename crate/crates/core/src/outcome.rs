//! Realized outcomes: delivered value `Y` and charged revenue `Y*` per
//! (member, campaign) pair, in cents.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Budget, CampaignId, Marketplace, MemberId};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn from_bit(bit: u8) -> Arm {
        if bit == 0 {
            Arm::Control
        } else {
            Arm::Treatment
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn flip(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    DeliveredValue,
    Revenue,
}

impl Estimand {
    pub fn name(self) -> &'static str {
        match self {
            Estimand::DeliveredValue => "delivered_value",
            Estimand::Revenue => "revenue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeRecord {
    pub member: MemberId,
    pub campaign: CampaignId,
    /// Arm of the pair, `None` when it was exposed to both (switchback).
    pub arm: Option<Arm>,
    pub delivered: f64,
    pub revenue: f64,
}

impl OutcomeRecord {
    pub fn value(&self, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::DeliveredValue => self.delivered,
            Estimand::Revenue => self.revenue,
        }
    }
}

/// Marketplace-wide totals for one switchback period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodTotal {
    pub period: usize,
    pub arm: Arm,
    pub delivered: f64,
    pub revenue: f64,
}

impl PeriodTotal {
    pub fn value(&self, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::DeliveredValue => self.delivered,
            Estimand::Revenue => self.revenue,
        }
    }
}

/// One record per targeted (member, campaign) pair, ordered by campaign
/// then member. Untargeted pairs are implicitly zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeMatrix {
    pub records: Vec<OutcomeRecord>,
    pub periods: Vec<PeriodTotal>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeRevenue { member: MemberId, campaign: CampaignId },
    RevenueAboveValue { member: MemberId, campaign: CampaignId },
    OverBudget { campaign: CampaignId, revenue: f64, budget: i64 },
    Untargeted { member: MemberId, campaign: CampaignId },
}

impl OutcomeMatrix {
    pub fn new(mut records: Vec<OutcomeRecord>) -> Self {
        records.sort_by_key(|r| (r.campaign, r.member));
        OutcomeMatrix { records, periods: Vec::new() }
    }

    pub fn get(&self, member: MemberId, campaign: CampaignId) -> Option<&OutcomeRecord> {
        self.records
            .binary_search_by_key(&(campaign, member), |r| (r.campaign, r.member))
            .ok()
            .map(|idx| &self.records[idx])
    }

    pub fn campaign_totals(&self, estimand: Estimand) -> BTreeMap<CampaignId, f64> {
        let mut totals = BTreeMap::new();
        for r in &self.records {
            *totals.entry(r.campaign).or_insert(0.0) += r.value(estimand);
        }
        totals
    }

    pub fn member_totals(&self, estimand: Estimand) -> BTreeMap<MemberId, f64> {
        let mut totals = BTreeMap::new();
        for r in &self.records {
            *totals.entry(r.member).or_insert(0.0) += r.value(estimand);
        }
        totals
    }

    pub fn total(&self, estimand: Estimand) -> f64 {
        self.records.iter().map(|r| r.value(estimand)).sum()
    }

    /// Concatenates the records of disjoint matrices (e.g. the two buckets).
    pub fn merge(parts: impl IntoIterator<Item = OutcomeMatrix>) -> OutcomeMatrix {
        let mut records = Vec::new();
        let mut periods = Vec::new();
        for p in parts {
            records.extend(p.records);
            periods.extend(p.periods);
        }
        let mut merged = OutcomeMatrix::new(records);
        merged.periods = periods;
        merged
    }

    /// Checks `0 <= Y* <= Y`, `sum_i Y*_ij <= B_j` and that every record
    /// belongs to a targeted pair of `market`.
    pub fn violations(&self, market: &Marketplace) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut spend: BTreeMap<CampaignId, f64> = BTreeMap::new();
        for r in &self.records {
            if r.revenue < 0.0 {
                out.push(Violation::NegativeRevenue { member: r.member, campaign: r.campaign });
            }
            if r.revenue > r.delivered {
                out.push(Violation::RevenueAboveValue { member: r.member, campaign: r.campaign });
            }
            *spend.entry(r.campaign).or_insert(0.0) += r.revenue;
        }
        for c in &market.campaigns {
            let targeted: std::collections::BTreeSet<MemberId> =
                c.target.iter().map(|&i| market.members[i].id).collect();
            for r in self.records.iter().filter(|r| r.campaign == c.id) {
                if !targeted.contains(&r.member) && (r.delivered != 0.0 || r.revenue != 0.0) {
                    out.push(Violation::Untargeted { member: r.member, campaign: c.id });
                }
            }
            if let Budget::Cents(b) = c.budget {
                let s = spend.get(&c.id).copied().unwrap_or(0.0);
                if s > b as f64 {
                    out.push(Violation::OverBudget { campaign: c.id, revenue: s, budget: b });
                }
            }
        }
        out
    }

    /// CSV with columns `member_id,campaign_id,arm,delivered_value_cents,revenue_cents`.
    /// `arm` is 0, 1, or `mixed` for switchback exposure.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            member_id: MemberId,
            campaign_id: CampaignId,
            arm: String,
            delivered_value_cents: String,
            revenue_cents: String,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                member_id: r.member,
                campaign_id: r.campaign,
                arm: r.arm.map_or_else(|| "mixed".to_string(), |a| a.bit().to_string()),
                delivered_value_cents: format_amount(r.delivered),
                revenue_cents: format_amount(r.revenue),
            })
            .map_err(|e| crate::Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integral amounts print without a fractional part; others use the
/// shortest round-trip representation.
pub fn format_amount(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
