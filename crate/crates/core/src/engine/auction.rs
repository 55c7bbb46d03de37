//! Single-slot sealed-bid auction.
//!
//! Highest bid wins; ties go to the lowest campaign id, and only if two
//! bids share both amount and id does a seeded coin decide. Second-price
//! clears at `max(reserve, runner-up bid)`, first-price at the winning bid.

use rand::Rng;

use super::market::{AuctionConfig, AuctionRule, CampaignId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdRequest {
    pub member: usize,
    pub tick: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignBidState {
    /// Position of the campaign in its marketplace.
    pub campaign: usize,
    pub id: CampaignId,
    pub bid_cents: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuctionResult {
    /// Index into the `eligible` slice passed to [`run_auction`].
    pub winner: Option<usize>,
    pub price_cents: i64,
}

impl AuctionResult {
    pub const NO_WINNER: AuctionResult = AuctionResult { winner: None, price_cents: 0 };
}

pub fn run_auction<R: Rng + ?Sized>(
    config: &AuctionConfig,
    _request: &AdRequest,
    eligible: &[CampaignBidState],
    tie_rng: &mut R,
) -> AuctionResult {
    let reserve = config.reserve_cents.max(0);
    let qualifies = |b: &CampaignBidState| b.bid_cents > 0 && b.bid_cents >= reserve;

    let mut best: Option<usize> = None;
    let mut collided: Vec<usize> = Vec::new();
    for (idx, bid) in eligible.iter().enumerate().filter(|(_, b)| qualifies(b)) {
        match best {
            None => best = Some(idx),
            Some(cur) => {
                let c = &eligible[cur];
                if bid.bid_cents > c.bid_cents || (bid.bid_cents == c.bid_cents && bid.id < c.id) {
                    best = Some(idx);
                    collided.clear();
                } else if bid.bid_cents == c.bid_cents && bid.id == c.id {
                    if collided.is_empty() {
                        collided.push(cur);
                    }
                    collided.push(idx);
                }
            }
        }
    }
    let Some(mut winner) = best else {
        return AuctionResult::NO_WINNER;
    };
    if collided.len() > 1 && collided.contains(&winner) {
        winner = collided[tie_rng.random_range(0..collided.len())];
    }

    let top = eligible[winner].bid_cents;
    let price = match config.rule {
        AuctionRule::FirstPrice => top,
        AuctionRule::SecondPrice => {
            let runner_up = eligible
                .iter()
                .enumerate()
                .filter(|(idx, b)| *idx != winner && qualifies(b))
                .map(|(_, b)| b.bid_cents)
                .max()
                .unwrap_or(0);
            runner_up.max(reserve)
        }
    };
    AuctionResult { winner: Some(winner), price_cents: price.min(top) }
}
