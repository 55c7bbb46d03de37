//! Randomization generators.
//!
//! Sampling without replacement shuffles `0..n` with
//! `rand::seq::SliceRandom::shuffle` (Fisher-Yates) on a `ChaCha8Rng`
//! seeded by the plan seed, and takes the leading block. Crate versions are
//! pinned by the lockfile, so a seed maps to the same plan on every
//! platform.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::outcome::Arm;
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    MemberCr,
    CampaignCr,
    Switchback,
    BudgetSplit,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::MemberCr => "member_cr",
            DesignKind::CampaignCr => "campaign_cr",
            DesignKind::Switchback => "switchback",
            DesignKind::BudgetSplit => "budget_split",
        }
    }
}

/// Randomized assignment. Each variant carries exactly the vectors its
/// design needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// `w[i]` is the arm of member `i`.
    MemberCr { w: Vec<u8> },
    /// `w[j]` is the arm of campaign `j`.
    CampaignCr { w: Vec<u8> },
    /// `schedule[t]` is the arm of the whole marketplace in period `t`.
    Switchback { schedule: Vec<u8> },
    /// `d[i]` is the bucket of member `i`; bucket 1 is treated iff `coin == 1`.
    BudgetSplit { d: Vec<u8>, coin: u8, treat_prob: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPlan {
    pub assignment: Assignment,
    pub seed: u64,
}

impl AssignmentPlan {
    pub fn kind(&self) -> DesignKind {
        match self.assignment {
            Assignment::MemberCr { .. } => DesignKind::MemberCr,
            Assignment::CampaignCr { .. } => DesignKind::CampaignCr,
            Assignment::Switchback { .. } => DesignKind::Switchback,
            Assignment::BudgetSplit { .. } => DesignKind::BudgetSplit,
        }
    }

    /// Arm of bucket `l` under a budget-split plan.
    pub fn bucket_arm(&self, bucket: u8) -> Option<Arm> {
        match &self.assignment {
            Assignment::BudgetSplit { coin, .. } => {
                let treated_bucket = *coin;
                Some(if bucket == treated_bucket { Arm::Treatment } else { Arm::Control })
            }
            _ => None,
        }
    }

    /// Budget-split plans away from an exact half split or a fair coin
    /// carry no unbiasedness guarantee.
    pub fn outside_unbiased_regime(&self) -> bool {
        match &self.assignment {
            Assignment::BudgetSplit { d, treat_prob, .. } => {
                let n1 = d.iter().filter(|&&b| b == 1).count();
                2 * n1 != d.len() || *treat_prob != 0.5
            }
            _ => false,
        }
    }

    /// Writes `unit_id,arm`. For budget-split plans the unit is the member
    /// and the arm is that of its bucket.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["unit_id", "arm"]).map_err(|e| crate::Error::Io(e.to_string()))?;
        let rows: Vec<(usize, u8)> = match &self.assignment {
            Assignment::MemberCr { w } | Assignment::CampaignCr { w } => w.iter().copied().enumerate().collect(),
            Assignment::Switchback { schedule } => schedule.iter().copied().enumerate().collect(),
            Assignment::BudgetSplit { d, .. } => d
                .iter()
                .enumerate()
                .map(|(i, &b)| (i, self.bucket_arm(b).map_or(0, Arm::bit)))
                .collect(),
        };
        for (unit, arm) in rows {
            w.write_record([unit.to_string(), arm.to_string()]).map_err(|e| crate::Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn shuffled_indices(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn completely_randomized(n: usize, treated: usize, seed: u64, what: &str) -> Result<Vec<u8>> {
    if treated < 1 || treated > n {
        return Err(validation(format!("{what}: treated count {treated} outside [1, {n}]")));
    }
    let mut rng = rng_from(seed);
    let mut w = vec![0u8; n];
    for &i in &shuffled_indices(n, &mut rng)[..treated] {
        w[i] = 1;
    }
    Ok(w)
}

/// Member-level completely randomized design: exactly `n1` of `n` members treated.
pub fn member_cr(n: usize, n1: usize, seed: u64) -> Result<AssignmentPlan> {
    let w = completely_randomized(n, n1, seed, "member_cr")?;
    Ok(AssignmentPlan { assignment: Assignment::MemberCr { w }, seed })
}

/// Campaign-level completely randomized design: exactly `m1` of `m` campaigns treated.
pub fn campaign_cr(m: usize, m1: usize, seed: u64) -> Result<AssignmentPlan> {
    let w = completely_randomized(m, m1, seed, "campaign_cr")?;
    Ok(AssignmentPlan { assignment: Assignment::CampaignCr { w }, seed })
}

/// Switchback schedule over `periods`.
///
/// Balanced schedules randomize within consecutive pairs `(2k, 2k+1)`: one
/// of the two is treated, each order with probability 1/2; an odd final
/// period gets a fair coin. Unbalanced schedules flip a fair coin per period.
pub fn switchback(periods: usize, seed: u64, balanced: bool) -> Result<AssignmentPlan> {
    if periods < 2 {
        return Err(validation(format!("switchback needs at least 2 periods, got {periods}")));
    }
    let mut rng = rng_from(seed);
    let mut schedule = Vec::with_capacity(periods);
    if balanced {
        for _ in 0..periods / 2 {
            let first: u8 = rng.random_range(0..2);
            schedule.push(first);
            schedule.push(1 - first);
        }
        if periods % 2 == 1 {
            schedule.push(rng.random_range(0..2));
        }
    } else {
        schedule.extend((0..periods).map(|_| rng.random_range(0..2u8)));
    }
    Ok(AssignmentPlan { assignment: Assignment::Switchback { schedule }, seed })
}

/// Budget-split design with a half split: bucket 0 gets `floor(n/2)` members,
/// bucket 1 the rest; the treated bucket is chosen by a `Bernoulli(p)` coin.
pub fn budget_split(n: usize, treat_prob: f64, seed: u64) -> Result<AssignmentPlan> {
    budget_split_sized(n, n / 2, treat_prob, seed)
}

/// Budget-split design with an explicit bucket-0 size.
pub fn budget_split_sized(n: usize, n0: usize, treat_prob: f64, seed: u64) -> Result<AssignmentPlan> {
    if n < 2 {
        return Err(validation(format!("budget_split needs at least 2 members, got {n}")));
    }
    if n0 == 0 || n0 >= n {
        return Err(validation(format!("bucket 0 size {n0} must lie in [1, {})", n)));
    }
    if !(0.0..=1.0).contains(&treat_prob) {
        return Err(validation(format!("treatment probability {treat_prob} outside [0, 1]")));
    }
    let mut rng = rng_from(seed);
    let mut d = vec![1u8; n];
    for &i in &shuffled_indices(n, &mut rng)[..n0] {
        d[i] = 0;
    }
    let coin = u8::from(rng.random::<f64>() < treat_prob);
    Ok(AssignmentPlan { assignment: Assignment::BudgetSplit { d, coin, treat_prob }, seed })
}
