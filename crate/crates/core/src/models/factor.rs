//! Aggregate marketplace for large power studies.
//!
//! Instead of simulating auctions for `10^5` members, unit totals are drawn
//! from a multiplicative factor model. Campaign `j` has size `s_j`, member
//! `i` has activity `a_i`, both normalized to mean 1; `v` is the value in
//! cents of one unit of attention. With relative effect `delta`:
//!
//! - member total: `a_i * S * v * (1 + delta * w_i) * (1 + sd * z_i)`
//! - campaign total: `s_j * A * v * (1 + delta * w_j) * (1 + sd * z_j)`
//! - period total: `g_t * v * S * A / T * (1 + delta * x_t)`
//!
//! where `S = sum s_j`, `A = sum a_i`, `z ~ Normal(0, 1)` and `g_t` is a
//! mean-one lognormal period shock. Campaign sizes sit at lognormal
//! quantiles `exp(sigma * Phi^-1((j + 0.5) / M))`, so every replication sees
//! the same heavy-tailed campaign mix. Member activity is lognormal, drawn
//! once from the marketplace seed.

use rand_distr::{Distribution, LogNormal, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{validation, Result};
use crate::outcome::{Arm, PeriodTotal};
use crate::seed::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorModel {
    pub members: usize,
    pub campaigns: usize,
    pub periods: usize,
    pub campaign_sigma: f64,
    pub member_sigma: f64,
    pub unit_noise_sd: f64,
    pub period_sigma: f64,
    pub value_cents: f64,
}

impl Default for FactorModel {
    fn default() -> Self {
        FactorModel {
            members: 100_000,
            campaigns: 20,
            periods: 24,
            campaign_sigma: 0.5,
            member_sigma: 1.0,
            unit_noise_sd: 0.1,
            period_sigma: 0.2,
            value_cents: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorMarket {
    pub model: FactorModel,
    pub activity: Vec<f64>,
    pub sizes: Vec<f64>,
}

fn normalize_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x /= mean);
}

impl FactorModel {
    pub fn validate(&self) -> Result<()> {
        if self.members < 2 || self.campaigns < 2 || self.periods < 2 {
            return Err(validation("factor model needs at least 2 members, campaigns and periods"));
        }
        for (name, v) in [
            ("campaign_sigma", self.campaign_sigma),
            ("member_sigma", self.member_sigma),
            ("unit_noise_sd", self.unit_noise_sd),
            ("period_sigma", self.period_sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(validation(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if !(self.value_cents > 0.0) {
            return Err(validation(format!("value_cents must be positive, got {}", self.value_cents)));
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<FactorMarket> {
        self.validate()?;
        let std = StdNormal::new(0.0, 1.0).expect("standard normal");
        let m = self.campaigns as f64;
        let mut sizes: Vec<f64> = (0..self.campaigns)
            .map(|j| (self.campaign_sigma * std.inverse_cdf((j as f64 + 0.5) / m)).exp())
            .collect();
        normalize_mean(&mut sizes);
        let mut rng = derived_rng(seed, "member-activity", 0);
        let ln = LogNormal::new(0.0, self.member_sigma).expect("validated sigma");
        let mut activity: Vec<f64> = (0..self.members).map(|_| ln.sample(&mut rng)).collect();
        normalize_mean(&mut activity);
        Ok(FactorMarket { model: *self, activity, sizes })
    }
}

impl FactorMarket {
    fn scale(&self) -> (f64, f64) {
        (self.sizes.iter().sum(), self.activity.iter().sum())
    }

    fn unit_totals(&self, weights: &[f64], scale: f64, w: &[u8], delta: f64, seed: u64, label: &str) -> Result<Vec<f64>> {
        if w.len() != weights.len() {
            return Err(validation(format!("assignment has length {} for {} units", w.len(), weights.len())));
        }
        let mut rng = derived_rng(seed, label, 0);
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let sd = self.model.unit_noise_sd;
        Ok(weights
            .iter()
            .zip(w)
            .map(|(&wt, &x)| {
                let z: f64 = normal.sample(&mut rng);
                wt * scale * self.model.value_cents * (1.0 + delta * x as f64) * (1.0 + sd * z)
            })
            .collect())
    }

    /// Member totals; `w[i]` is the arm seen by member `i`.
    pub fn member_totals(&self, w: &[u8], delta: f64, seed: u64) -> Result<Vec<f64>> {
        let (s, _) = self.scale();
        self.unit_totals(&self.activity, s, w, delta, seed, "member-noise")
    }

    /// Campaign totals; `w[j]` is the arm of campaign `j`.
    pub fn campaign_totals(&self, w: &[u8], delta: f64, seed: u64) -> Result<Vec<f64>> {
        let (_, a) = self.scale();
        self.unit_totals(&self.sizes, a, w, delta, seed, "campaign-noise")
    }

    pub fn period_totals(&self, schedule: &[u8], delta: f64, seed: u64) -> Result<Vec<PeriodTotal>> {
        let t = self.model.periods;
        if schedule.len() != t {
            return Err(validation(format!("schedule has {} periods, model has {t}", schedule.len())));
        }
        let (s, a) = self.scale();
        let sigma = self.model.period_sigma;
        let shock = LogNormal::new(-sigma * sigma / 2.0, sigma).expect("validated sigma");
        let mut rng = derived_rng(seed, "period-shock", 0);
        Ok(schedule
            .iter()
            .enumerate()
            .map(|(p, &x)| {
                let g = shock.sample(&mut rng);
                let v = g * self.model.value_cents * s * a / t as f64 * (1.0 + delta * x as f64);
                PeriodTotal { period: p, arm: Arm::from_bit(x), delivered: v, revenue: v }
            })
            .collect())
    }

    /// Expected all-treated minus all-control total.
    pub fn ground_truth(&self, delta: f64) -> f64 {
        let (s, a) = self.scale();
        delta * self.model.value_cents * s * a
    }
}
