//! Period-level model for switchback studies.
//!
//! The marketplace total in period `t` is
//! `base + effect * x_t + carryover * x_{t-1} + noise_t`, with `x_{-1} = 0`
//! and `noise_t ~ Normal(0, noise_sd)` drawn in period order from
//! `(seed, "period-noise", 0)`. A positive `carryover` lets the previous
//! period's arm leak into the current one.

use rand_distr::{Distribution, Normal};

use crate::error::{validation, Result};
use crate::outcome::{Arm, PeriodTotal};
use crate::seed::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarryoverModel {
    pub periods: usize,
    pub base: f64,
    pub effect: f64,
    pub carryover: f64,
    pub noise_sd: f64,
}

impl Default for CarryoverModel {
    fn default() -> Self {
        CarryoverModel { periods: 24, base: 100.0, effect: 2.0, carryover: 0.0, noise_sd: 5.0 }
    }
}

impl CarryoverModel {
    pub fn validate(&self) -> Result<()> {
        if self.periods < 2 {
            return Err(validation(format!("carryover model needs at least 2 periods, got {}", self.periods)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(validation(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        Ok(())
    }

    pub fn period_totals(&self, schedule: &[u8], seed: u64) -> Result<Vec<PeriodTotal>> {
        self.validate()?;
        if schedule.len() != self.periods {
            return Err(validation(format!("schedule has {} periods, model has {}", schedule.len(), self.periods)));
        }
        let mut rng = derived_rng(seed, "period-noise", 0);
        let normal = Normal::new(0.0, self.noise_sd).expect("validated noise");
        let mut prev = 0u8;
        let mut out = Vec::with_capacity(schedule.len());
        for (t, &x) in schedule.iter().enumerate() {
            let noise = if self.noise_sd > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let v = self.base + self.effect * x as f64 + self.carryover * prev as f64 + noise;
            out.push(PeriodTotal { period: t, arm: Arm::from_bit(x), delivered: v, revenue: v });
            prev = x;
        }
        Ok(out)
    }

    /// All-treated minus all-control horizon total.
    pub fn ground_truth(&self) -> f64 {
        self.periods as f64 * self.effect + (self.periods as f64 - 1.0) * self.carryover
    }
}
