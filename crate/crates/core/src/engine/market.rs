//! Marketplace description: members (sellers), campaigns (buyers) and
//! the auction settings shared by every request.

use crate::error::{validation, Result};

pub type MemberId = u32;
pub type CampaignId = u32;

/// Campaign budget in integer cents. `Unlimited` disables the pacing stop
/// and the revenue cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Cents(i64),
    Unlimited,
}

impl Budget {
    pub fn is_finite(&self) -> bool {
        matches!(self, Budget::Cents(_))
    }

    pub fn cents(&self) -> Option<i64> {
        match self {
            Budget::Cents(c) => Some(*c),
            Budget::Unlimited => None,
        }
    }

    /// `floor(cents * part / whole)`; unlimited budgets stay unlimited.
    pub fn scaled(&self, part: usize, whole: usize) -> Budget {
        match self {
            Budget::Cents(c) => {
                let scaled = (*c as i128 * part as i128) / whole as i128;
                Budget::Cents(scaled as i64)
            }
            Budget::Unlimited => Budget::Unlimited,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberProfile {
    pub id: MemberId,
    /// Expected ad requests per tick.
    pub request_rate: f64,
    /// Multiplicative value weight, one entry per campaign position.
    pub affinity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingParams {
    /// Participation rate used at tick 0.
    pub initial_rate: f64,
    /// Multiplicative step of the feedback controller.
    pub step: f64,
}

impl Default for PacingParams {
    fn default() -> Self {
        PacingParams { initial_rate: 1.0, step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignParams {
    /// Value in cents of one impression on a member with affinity 1.
    pub value_rate_cents: f64,
    /// Bid as a fraction of value, in (0, 1].
    pub bid_shading: f64,
    pub pacing: PacingParams,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams { value_rate_cents: 100.0, bid_shading: 1.0, pacing: PacingParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub id: CampaignId,
    pub budget: Budget,
    /// Indices into `Marketplace::members`, sorted and unique.
    pub target: Vec<usize>,
    pub params: CampaignParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuctionRule {
    SecondPrice,
    FirstPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuctionConfig {
    pub rule: AuctionRule,
    pub reserve_cents: i64,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        AuctionConfig { rule: AuctionRule::SecondPrice, reserve_cents: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marketplace {
    pub members: Vec<MemberProfile>,
    pub campaigns: Vec<Campaign>,
    /// Number of simulation ticks.
    pub horizon: u32,
    pub seed: u64,
    pub auction: AuctionConfig,
    /// Stream index for arrival and participation randomness. Zero for a
    /// top-level marketplace; sub-marketplaces created by a split get
    /// their own index so the two buckets never share a stream.
    pub stream: u64,
}

impl Marketplace {
    pub fn new(members: Vec<MemberProfile>, campaigns: Vec<Campaign>, horizon: u32, seed: u64) -> Self {
        Marketplace { members, campaigns, horizon, seed, auction: AuctionConfig::default(), stream: 0 }
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_campaigns(&self) -> usize {
        self.campaigns.len()
    }

    /// Checks a top-level marketplace: ids equal positions and every
    /// campaign targets at least one member.
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(validation("marketplace needs at least one member"));
        }
        if self.campaigns.is_empty() {
            return Err(validation("marketplace needs at least one campaign"));
        }
        for (pos, m) in self.members.iter().enumerate() {
            if m.id as usize != pos {
                return Err(validation(format!("member at position {pos} has id {}; ids must equal positions", m.id)));
            }
        }
        for (pos, c) in self.campaigns.iter().enumerate() {
            if c.id as usize != pos {
                return Err(validation(format!("campaign at position {pos} has id {}; ids must equal positions", c.id)));
            }
            if c.target.is_empty() {
                return Err(validation(format!("campaign {} has an empty target set", c.id)));
            }
        }
        self.validate_values()
    }

    /// Range checks shared by top-level and split marketplaces.
    pub(crate) fn validate_values(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(validation("horizon must be at least one tick"));
        }
        if self.auction.reserve_cents < 0 {
            return Err(validation("reserve price must be non-negative"));
        }
        let m = self.campaigns.len();
        for member in &self.members {
            if !(member.request_rate >= 0.0 && member.request_rate.is_finite()) {
                return Err(validation(format!("member {} has invalid request rate {}", member.id, member.request_rate)));
            }
            if member.affinity.len() != m {
                return Err(validation(format!(
                    "member {} has {} affinity weights for {m} campaigns",
                    member.id,
                    member.affinity.len()
                )));
            }
            if member.affinity.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(validation(format!("member {} has a negative or non-finite affinity", member.id)));
            }
        }
        for c in &self.campaigns {
            if let Budget::Cents(b) = c.budget {
                if b < 0 {
                    return Err(validation(format!("campaign {} has negative budget {b}", c.id)));
                }
            }
            if c.target.windows(2).any(|w| w[0] >= w[1]) {
                return Err(validation(format!("campaign {} target must be sorted and unique", c.id)));
            }
            if c.target.iter().any(|&i| i >= self.members.len()) {
                return Err(validation(format!("campaign {} targets a member outside [0, N)", c.id)));
            }
            let p = &c.params;
            if !(p.value_rate_cents >= 0.0 && p.value_rate_cents.is_finite()) {
                return Err(validation(format!("campaign {} has invalid value rate", c.id)));
            }
            if !(p.bid_shading > 0.0 && p.bid_shading <= 1.0) {
                return Err(validation(format!("campaign {} bid shading must lie in (0, 1]", c.id)));
            }
            if !(0.0..=1.0).contains(&p.pacing.initial_rate) || !(0.0..1.0).contains(&p.pacing.step) {
                return Err(validation(format!("campaign {} has invalid pacing parameters", c.id)));
            }
        }
        Ok(())
    }
}
