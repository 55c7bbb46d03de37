//! Tracker and budget pacing.
//!
//! The tracker tallies spend and impressions per `(campaign, arm)` key. The
//! pacer is a multiplicative feedback controller on the auction
//! participation rate: once per tick it compares cumulative spend with the
//! linear schedule `budget * tick / horizon` and scales the rate by
//! `1 + step` when behind, `1 - step` when ahead, clamped to `[0, 1]`.
//! Spend at or above the arm budget stops serving for the rest of the
//! flight (there is no resume).

use std::collections::BTreeMap;

use super::market::{Budget, CampaignId, PacingParams};
use crate::outcome::Arm;

/// Which slice of a campaign a tracker entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArmTag {
    /// Campaign-level pacing in an unsplit marketplace.
    Pooled,
    Arm(Arm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackerKey {
    pub campaign: CampaignId,
    pub arm: ArmTag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmLedger {
    pub spend_cents: i64,
    pub impressions: u64,
    /// Current participation rate of the controller.
    pub participation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerState {
    entries: BTreeMap<TrackerKey, ArmLedger>,
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &TrackerKey) -> Option<&ArmLedger> {
        self.entries.get(key)
    }

    pub fn spend(&self, key: &TrackerKey) -> i64 {
        self.entries.get(key).map_or(0, |l| l.spend_cents)
    }

    pub fn impressions(&self, key: &TrackerKey) -> u64 {
        self.entries.get(key).map_or(0, |l| l.impressions)
    }

    pub fn register(&mut self, key: TrackerKey, params: &PacingParams) -> &mut ArmLedger {
        self.entries
            .entry(key)
            .or_insert(ArmLedger { spend_cents: 0, impressions: 0, participation: params.initial_rate })
    }

    pub fn record_impression(&mut self, key: TrackerKey, charged_cents: i64) {
        let ledger = self
            .entries
            .entry(key)
            .or_insert(ArmLedger { spend_cents: 0, impressions: 0, participation: 1.0 });
        ledger.spend_cents += charged_cents;
        ledger.impressions += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrackerKey, &ArmLedger)> {
        self.entries.iter()
    }

    /// Folds another tracker in; keys are expected to be disjoint.
    pub fn absorb(&mut self, other: TrackerState) {
        self.entries.extend(other.entries);
    }
}

/// One controller update for `key` at the start of `tick`; returns the
/// participation probability to use during that tick.
pub fn pacing_step(
    tracker: &mut TrackerState,
    key: TrackerKey,
    tick: u32,
    horizon: u32,
    arm_budget: Budget,
    params: &PacingParams,
) -> f64 {
    let Budget::Cents(budget) = arm_budget else {
        return 1.0;
    };
    let ledger = tracker.register(key, params);
    if ledger.spend_cents >= budget {
        ledger.participation = 0.0;
        return 0.0;
    }
    if tick == 0 || horizon == 0 {
        ledger.participation = ledger.participation.clamp(0.0, 1.0);
        return ledger.participation;
    }
    let tick = tick.min(horizon) as i128;
    // spend vs budget * tick / horizon, compared exactly
    let lhs = ledger.spend_cents as i128 * horizon as i128;
    let rhs = budget as i128 * tick;
    let rate = ledger.participation;
    let next = if lhs < rhs {
        rate * (1.0 + params.step)
    } else if lhs > rhs {
        rate * (1.0 - params.step)
    } else {
        rate
    };
    ledger.participation = next.clamp(0.0, 1.0);
    ledger.participation
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: TrackerKey = TrackerKey { campaign: 0, arm: ArmTag::Pooled };

    #[test]
    fn exhausted_budget_stops() {
        let mut t = TrackerState::new();
        let p = PacingParams::default();
        t.register(KEY, &p);
        t.record_impression(KEY, 500);
        assert_eq!(pacing_step(&mut t, KEY, 3, 10, Budget::Cents(500), &p), 0.0);
    }

    #[test]
    fn zero_budget_never_serves() {
        let mut t = TrackerState::new();
        let p = PacingParams::default();
        assert_eq!(pacing_step(&mut t, KEY, 0, 10, Budget::Cents(0), &p), 0.0);
    }

    #[test]
    fn fresh_campaign_starts_at_initial_rate() {
        let mut t = TrackerState::new();
        let p = PacingParams { initial_rate: 1.0, step: 0.1 };
        assert_eq!(pacing_step(&mut t, KEY, 0, 10, Budget::Cents(1000), &p), 1.0);
        let p = PacingParams { initial_rate: 0.4, step: 0.1 };
        let key = TrackerKey { campaign: 1, arm: ArmTag::Pooled };
        assert_eq!(pacing_step(&mut t, key, 0, 10, Budget::Cents(1000), &p), 0.4);
    }

    #[test]
    fn unlimited_budget_is_unpaced() {
        let mut t = TrackerState::new();
        let p = PacingParams { initial_rate: 0.3, step: 0.1 };
        assert_eq!(pacing_step(&mut t, KEY, 5, 10, Budget::Unlimited, &p), 1.0);
    }

    #[test]
    fn on_schedule_spend_keeps_rate() {
        // budget 1000 over 10 ticks: exactly 100 per tick keeps the rate at r0.
        let mut t = TrackerState::new();
        let p = PacingParams { initial_rate: 0.5, step: 0.1 };
        for tick in 0..10 {
            let r = pacing_step(&mut t, KEY, tick, 10, Budget::Cents(1000), &p);
            assert!((0.45..=0.55).contains(&r), "tick {tick}: {r}");
            t.record_impression(KEY, 100);
        }
    }

    #[test]
    fn behind_raises_and_ahead_lowers() {
        let p = PacingParams { initial_rate: 0.5, step: 0.1 };
        let mut t = TrackerState::new();
        pacing_step(&mut t, KEY, 0, 10, Budget::Cents(1000), &p);
        // nothing spent by tick 1: behind schedule
        let r = pacing_step(&mut t, KEY, 1, 10, Budget::Cents(1000), &p);
        assert!((r - 0.55).abs() < 1e-12);
        t.record_impression(KEY, 900);
        let r = pacing_step(&mut t, KEY, 2, 10, Budget::Cents(1000), &p);
        assert!((r - 0.495).abs() < 1e-12);
    }

    #[test]
    fn rate_is_clamped_to_one() {
        let p = PacingParams { initial_rate: 1.0, step: 0.5 };
        let mut t = TrackerState::new();
        pacing_step(&mut t, KEY, 0, 10, Budget::Cents(1000), &p);
        assert_eq!(pacing_step(&mut t, KEY, 5, 10, Budget::Cents(1000), &p), 1.0);
    }

    #[test]
    fn tracker_counts_are_monotone() {
        let mut t = TrackerState::new();
        let mut last = (0, 0);
        for charge in [3, 0, 7, 1] {
            t.record_impression(KEY, charge);
            let now = (t.spend(&KEY), t.impressions(&KEY));
            assert!(now.0 >= last.0 && now.1 > last.1);
            last = now;
        }
    }
}
