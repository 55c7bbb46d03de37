//! The ad-server tick loop.
//!
//! Random streams, all `ChaCha8Rng` via [`crate::seed::derive_seed`]:
//! - request counts: `(seed, "requests", member id)`, one `Poisson(rate)`
//!   draw per tick, so a member's requests do not depend on which
//!   marketplace or bucket it sits in;
//! - arrival order: `(seed, "arrivals", stream)`, one shuffle of the
//!   tick's request queue;
//! - participation: `(seed, "participation", stream)`, one uniform per
//!   (request, targeting campaign) whether or not the campaign can bid;
//! - tie coin: `(seed, "ties", stream)`, only touched on full collisions.
//!
//! None of the draw counts depend on the treatment exposure, so the same
//! seed yields common random numbers across assignments.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::auction::{run_auction, AdRequest, CampaignBidState};
use super::market::{Budget, Marketplace};
use super::pacing::{pacing_step, ArmTag, TrackerKey, TrackerState};
use crate::outcome::{Arm, OutcomeMatrix, OutcomeRecord, PeriodTotal};
use crate::seed::derived_rng;

/// Which (member, campaign, tick) triples see the treatment.
#[derive(Debug, Clone, Copy)]
pub enum Exposure<'a> {
    Uniform(Arm),
    /// Indexed by member id.
    Members(&'a [u8]),
    /// Indexed by campaign id.
    Campaigns(&'a [u8]),
    /// Indexed by period; ticks map to periods by `tick * T / horizon`.
    Schedule(&'a [u8]),
}

impl Exposure<'_> {
    fn record_arm(&self, member: u32, campaign: u32) -> Option<Arm> {
        match self {
            Exposure::Uniform(a) => Some(*a),
            Exposure::Members(w) => Some(Arm::from_bit(w[member as usize])),
            Exposure::Campaigns(w) => Some(Arm::from_bit(w[campaign as usize])),
            Exposure::Schedule(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineRun {
    pub outcomes: OutcomeMatrix,
    pub tracker: TrackerState,
}

/// Runs one marketplace to the horizon. `lift` multiplies the value of
/// every treated (member, campaign) pair by `1 + lift`; `tag` keys the
/// tracker entries.
pub fn run_engine(market: &Marketplace, exposure: Exposure<'_>, lift: f64, tag: ArmTag) -> EngineRun {
    let n = market.n_members();
    let horizon = market.horizon as usize;

    // targeting[i] = (campaign position, slot of i in that campaign's target)
    let mut targeting: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, c) in market.campaigns.iter().enumerate() {
        for (slot, &i) in c.target.iter().enumerate() {
            targeting[i].push((k, slot));
        }
    }

    let mut counts = vec![0u32; n * horizon];
    for (i, member) in market.members.iter().enumerate() {
        if member.request_rate <= 0.0 {
            continue;
        }
        let mut rng = derived_rng(market.seed, "requests", member.id as u64);
        let poisson = Poisson::new(member.request_rate).expect("validated request rate");
        for t in 0..horizon {
            counts[i * horizon + t] = poisson.sample(&mut rng) as u32;
        }
    }

    let mut arrivals = derived_rng(market.seed, "arrivals", market.stream);
    let mut coins = derived_rng(market.seed, "participation", market.stream);
    let mut ties = derived_rng(market.seed, "ties", market.stream);

    let keys: Vec<TrackerKey> =
        market.campaigns.iter().map(|c| TrackerKey { campaign: c.id, arm: tag }).collect();
    let mut tracker = TrackerState::new();
    for (c, key) in market.campaigns.iter().zip(&keys) {
        tracker.register(*key, &c.params.pacing);
    }

    let mut delivered: Vec<Vec<i64>> = market.campaigns.iter().map(|c| vec![0; c.target.len()]).collect();
    let mut revenue: Vec<Vec<i64>> = delivered.clone();

    let periods = match exposure {
        Exposure::Schedule(s) => s.len(),
        _ => 0,
    };
    let mut period_totals: Vec<(i64, i64)> = vec![(0, 0); periods];

    let mut queue: Vec<usize> = Vec::new();
    let mut eligible: Vec<CampaignBidState> = Vec::new();
    let mut values: Vec<i64> = Vec::new();
    let mut rates = vec![0.0; market.n_campaigns()];

    for t in 0..horizon {
        let tick = t as u32;
        for (k, c) in market.campaigns.iter().enumerate() {
            rates[k] = pacing_step(&mut tracker, keys[k], tick, market.horizon, c.budget, &c.params.pacing);
        }
        let tick_treated = match exposure {
            Exposure::Schedule(s) => {
                let period = t * periods / horizon;
                Some((period, s[period] == 1))
            }
            _ => None,
        };

        queue.clear();
        for i in 0..n {
            for _ in 0..counts[i * horizon + t] {
                queue.push(i);
            }
        }
        queue.shuffle(&mut arrivals);

        for &i in &queue {
            let member = &market.members[i];
            eligible.clear();
            values.clear();
            for &(k, _) in &targeting[i] {
                let u: f64 = coins.random();
                let c = &market.campaigns[k];
                let spent = tracker.spend(&keys[k]);
                if let Budget::Cents(b) = c.budget {
                    if spent >= b {
                        continue;
                    }
                }
                if u >= rates[k] {
                    continue;
                }
                let treated = match exposure {
                    Exposure::Uniform(a) => a == Arm::Treatment,
                    Exposure::Members(w) => w[member.id as usize] == 1,
                    Exposure::Campaigns(w) => w[c.id as usize] == 1,
                    Exposure::Schedule(_) => tick_treated.is_some_and(|(_, on)| on),
                };
                let mut value = c.params.value_rate_cents * member.affinity[k];
                if treated {
                    value *= 1.0 + lift;
                }
                let value_cents = value.floor() as i64;
                let bid_cents = (value * c.params.bid_shading).floor().min(value_cents as f64) as i64;
                eligible.push(CampaignBidState { campaign: k, id: c.id, bid_cents });
                values.push(value_cents);
            }
            let request = AdRequest { member: i, tick };
            let result = run_auction(&market.auction, &request, &eligible, &mut ties);
            let Some(w) = result.winner else { continue };
            let k = eligible[w].campaign;
            let c = &market.campaigns[k];
            let charged = match c.budget {
                Budget::Cents(b) => result.price_cents.min(b - tracker.spend(&keys[k])),
                Budget::Unlimited => result.price_cents,
            };
            tracker.record_impression(keys[k], charged);
            let slot = targeting[i].iter().find(|(kk, _)| *kk == k).map(|(_, s)| *s).expect("targeted");
            delivered[k][slot] += values[w];
            revenue[k][slot] += charged;
            if let Some((period, _)) = tick_treated {
                period_totals[period].0 += values[w];
                period_totals[period].1 += charged;
            }
        }
    }

    let mut records = Vec::with_capacity(delivered.iter().map(Vec::len).sum());
    for (k, c) in market.campaigns.iter().enumerate() {
        for (slot, &i) in c.target.iter().enumerate() {
            let member = market.members[i].id;
            records.push(OutcomeRecord {
                member,
                campaign: c.id,
                arm: exposure.record_arm(member, c.id),
                delivered: delivered[k][slot] as f64,
                revenue: revenue[k][slot] as f64,
            });
        }
    }
    let mut outcomes = OutcomeMatrix::new(records);
    if let Exposure::Schedule(s) = exposure {
        outcomes.periods = period_totals
            .iter()
            .enumerate()
            .map(|(p, &(d, r))| PeriodTotal { period: p, arm: Arm::from_bit(s[p]), delivered: d as f64, revenue: r as f64 })
            .collect();
    }
    EngineRun { outcomes, tracker }
}
