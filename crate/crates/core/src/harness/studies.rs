//! Study drivers. Replications fan out over rayon and are collected in
//! replication order, so outputs do not depend on the worker count.
//!
//! Seeds: replication `r` of design `D` at effect index `e` draws its plan
//! from `derive_seed(seed, "plan:D:e", r)` and any model noise from
//! `derive_seed(seed, "noise:D:e", r)`. The bias study uses `e = 0`.

use rayon::prelude::*;

use super::config::{EngineSeeds, ScenarioConfig, StudyModel};
use crate::designs::{Assignment, AssignmentPlan, DesignKind};
use crate::engine::{simulate, Delivery, Marketplace};
use crate::error::{config, Error, Result};
use crate::estimators::{estimate, switchback_estimator, two_sample_t_test, EstimateReport, SplitMode};
use crate::models::{ground_truth_tau, FactorMarket, OutcomeModelRef};
use crate::oracle::{enumerate_expectation, validate_stable_system, DesignSpec, EnumOptions, EnumerationResult, StabilityRow};
use crate::outcome::Arm;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub design: DesignKind,
    pub mean_estimate: f64,
    pub ground_truth: f64,
    pub bias: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub effect_size: f64,
    pub design: DesignKind,
    pub power: f64,
    pub reps: usize,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepOutcome {
    pub estimate: f64,
    pub truth: f64,
    pub p_value: f64,
}

/// Everything that stays fixed across replications.
pub struct StudyContext {
    pub config: ScenarioConfig,
    pub model: StudyModel,
    market: Option<Marketplace>,
    factor: Option<FactorMarket>,
}

impl StudyContext {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model.resolve()?;
        let (market, factor) = match &model {
            StudyModel::Outcome(_) => (Some(config.build_marketplace(config.seed)?), None),
            StudyModel::Factor(f) => (None, Some(f.build(config.seed)?)),
            StudyModel::Carryover(_) => (None, None),
        };
        Ok(StudyContext { config: config.clone(), model, market, factor })
    }

    pub fn marketplace(&self) -> Option<&Marketplace> {
        self.market.as_ref()
    }

    fn engine_seed(&self, rep: usize) -> u64 {
        match self.config.study.engine_seeds {
            EngineSeeds::PerRep => derive_seed(self.config.seed, "engine", rep as u64),
            EngineSeeds::Fixed => self.config.seed,
        }
    }

    fn units(&self) -> (usize, usize) {
        match (&self.market, &self.factor) {
            (Some(m), _) => (m.n_members(), m.n_campaigns()),
            (_, Some(f)) => (f.activity.len(), f.sizes.len()),
            _ => (0, 0),
        }
    }

    pub fn plan(&self, design: DesignKind, effect_index: usize, rep: usize) -> Result<AssignmentPlan> {
        let (n, m) = self.units();
        let seed = derive_seed(self.config.seed, &format!("plan:{}:{effect_index}", design.name()), rep as u64);
        self.config.draw_plan(design, n, m, seed)
    }

    /// One replication. `effect` overrides the model's effect knob.
    pub fn replicate(&self, design: DesignKind, effect: Option<f64>, effect_index: usize, rep: usize) -> Result<RepOutcome> {
        self.check_design(design)?;
        let plan = self.plan(design, effect_index, rep)?;
        let noise_seed = derive_seed(self.config.seed, &format!("noise:{}:{effect_index}", design.name()), rep as u64);
        let study = &self.config.study;
        match &self.model {
            StudyModel::Outcome(base) => {
                let model = effect.map_or(*base, |e| base.with_effect(e));
                let market = Marketplace { seed: self.engine_seed(rep), ..self.market.clone().expect("outcome market") };
                let delivery = simulate(&market, &plan, &model)?;
                let report = estimate(&delivery, &plan, study.estimand, self.config.design.split_mode, noise_seed)?;
                let truth = ground_truth_tau(&market, &model)?.get(study.estimand);
                Ok(RepOutcome { estimate: report.total_estimate, truth, p_value: report.p_value })
            }
            StudyModel::Carryover(base) => {
                let Assignment::Switchback { schedule } = &plan.assignment else {
                    return Err(config("the carryover model only supports the switchback design"));
                };
                let model = effect.map_or(*base, |e| crate::models::CarryoverModel { effect: e, ..*base });
                let periods = model.period_totals(schedule, noise_seed)?;
                let report = switchback_estimator(&periods, study.estimand, noise_seed)?;
                Ok(RepOutcome { estimate: report.total_estimate, truth: model.ground_truth(), p_value: report.p_value })
            }
            StudyModel::Factor(_) => {
                let fm = self.factor.as_ref().expect("factor market");
                let delta = effect.unwrap_or(0.0);
                let truth = fm.ground_truth(delta);
                let out = |estimate: f64, p_value: f64| RepOutcome { estimate, truth, p_value };
                match &plan.assignment {
                    Assignment::MemberCr { w } => {
                        let (e, p) = scaled_contrast(&fm.member_totals(w, delta, noise_seed)?, w)?;
                        Ok(out(e, p))
                    }
                    Assignment::CampaignCr { w } => {
                        let (e, p) = scaled_contrast(&fm.campaign_totals(w, delta, noise_seed)?, w)?;
                        Ok(out(e, p))
                    }
                    Assignment::BudgetSplit { d, .. } => {
                        if self.config.design.split_mode == SplitMode::Campaign {
                            return Err(config("the factor model supports budget_split only with split_mode = \"member\""));
                        }
                        let w: Vec<u8> = d.iter().map(|&b| plan.bucket_arm(b).map_or(0, Arm::bit)).collect();
                        let (e, p) = scaled_contrast(&fm.member_totals(&w, delta, noise_seed)?, &w)?;
                        Ok(out(e, p))
                    }
                    Assignment::Switchback { schedule } => {
                        let periods = fm.period_totals(schedule, delta, noise_seed)?;
                        let r = switchback_estimator(&periods, study.estimand, noise_seed)?;
                        Ok(out(r.total_estimate, r.p_value))
                    }
                }
            }
        }
    }

    fn check_design(&self, design: DesignKind) -> Result<()> {
        if matches!(self.model, StudyModel::Carryover(_)) && design != DesignKind::Switchback {
            return Err(config("the carryover model only supports the switchback design"));
        }
        Ok(())
    }

    /// Single replication with full output, for `simulate`.
    pub fn simulate_once(&self) -> Result<(AssignmentPlan, Option<Delivery>, EstimateReport, f64)> {
        let design = self.config.design.kind;
        self.check_design(design)?;
        let plan = self.plan(design, 0, 0)?;
        let seed = derive_seed(self.config.seed, &format!("noise:{}:0", design.name()), 0);
        let estimand = self.config.study.estimand;
        match &self.model {
            StudyModel::Outcome(model) => {
                let market = Marketplace { seed: self.engine_seed(0), ..self.market.clone().expect("outcome market") };
                let delivery = simulate(&market, &plan, model)?;
                let report = estimate(&delivery, &plan, estimand, self.config.design.split_mode, seed)?;
                let truth = ground_truth_tau(&market, model)?.get(estimand);
                Ok((plan, Some(delivery), report, truth))
            }
            StudyModel::Carryover(model) => {
                let Assignment::Switchback { schedule } = &plan.assignment else {
                    return Err(config("the carryover model only supports the switchback design"));
                };
                let periods = model.period_totals(schedule, seed)?;
                let report = switchback_estimator(&periods, estimand, seed)?;
                Ok((plan, None, report, model.ground_truth()))
            }
            StudyModel::Factor(_) => Err(config("simulate is not available for the factor model; use power-curve or bias-study")),
        }
    }
}

/// Full-population contrast `sum_t y * n/n1 - sum_c y * n/n0` with a Welch test.
fn scaled_contrast(y: &[f64], w: &[u8]) -> Result<(f64, f64)> {
    let treat: Vec<f64> = y.iter().zip(w).filter(|(_, &b)| b == 1).map(|(v, _)| *v).collect();
    let control: Vec<f64> = y.iter().zip(w).filter(|(_, &b)| b == 0).map(|(v, _)| *v).collect();
    if treat.is_empty() || control.is_empty() {
        return Err(Error::UndefinedContrast("one arm is empty".into()));
    }
    let n = y.len() as f64;
    let est = treat.iter().sum::<f64>() * n / treat.len() as f64 - control.iter().sum::<f64>() * n / control.len() as f64;
    let p = two_sample_t_test(&treat, &control).map(|t| t.p_value).unwrap_or(1.0);
    Ok((est, p))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = crate::oracle::neumaier_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = crate::oracle::neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Monte Carlo mean estimate per design against the ground truth, with a
/// normal 95% interval for the bias.
pub fn run_bias_study(ctx: &StudyContext) -> Result<Vec<BiasRow>> {
    let reps = ctx.config.study.reps;
    ctx.config
        .study
        .designs
        .iter()
        .map(|&design| {
            let outs: Vec<RepOutcome> =
                (0..reps).into_par_iter().map(|r| ctx.replicate(design, None, 0, r)).collect::<Result<_>>()?;
            let est: Vec<f64> = outs.iter().map(|o| o.estimate).collect();
            let truth: Vec<f64> = outs.iter().map(|o| o.truth).collect();
            let diffs: Vec<f64> = outs.iter().map(|o| o.estimate - o.truth).collect();
            let (bias, se) = mean_and_se(&diffs);
            Ok(BiasRow {
                design,
                mean_estimate: mean_and_se(&est).0,
                ground_truth: mean_and_se(&truth).0,
                bias,
                ci_lo: bias - 1.96 * se,
                ci_hi: bias + 1.96 * se,
            })
        })
        .collect()
}

/// Rejection rate per (effect size, design) at the study's `alpha`.
pub fn run_power_curve(ctx: &StudyContext) -> Result<Vec<PowerRow>> {
    let study = &ctx.config.study;
    if study.effect_sizes.is_empty() {
        return Err(config("study.effect_sizes must not be empty"));
    }
    let mut rows = Vec::new();
    for (e_idx, &effect) in study.effect_sizes.iter().enumerate() {
        for &design in &study.designs {
            let rejected: usize = (0..study.reps)
                .into_par_iter()
                .map(|r| ctx.replicate(design, Some(effect), e_idx, r).map(|o| usize::from(o.p_value <= study.alpha)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            let power = rejected as f64 / study.reps as f64;
            rows.push(PowerRow {
                effect_size: effect,
                design,
                power,
                reps: study.reps,
                mc_se: (power * (1.0 - power) / study.reps as f64).sqrt(),
            });
        }
    }
    Ok(rows)
}

fn enumeration_spec(ctx: &StudyContext, design: DesignKind) -> Result<DesignSpec> {
    let cfg = &ctx.config;
    let market = ctx.marketplace().ok_or_else(|| config("enumeration needs a marketplace outcome model"))?;
    Ok(match design {
        DesignKind::MemberCr => DesignSpec::MemberCr { n1: cfg.treated_count(market.n_members()) },
        DesignKind::CampaignCr => DesignSpec::CampaignCr { m1: cfg.treated_count(market.n_campaigns()) },
        DesignKind::Switchback => DesignSpec::Switchback { periods: cfg.switchback_periods(), balanced: cfg.design.balanced },
        DesignKind::BudgetSplit => DesignSpec::BudgetSplit { treat_prob: cfg.design.treat_prob },
    })
}

fn enum_options(ctx: &StudyContext) -> EnumOptions {
    let s = &ctx.config.study;
    EnumOptions {
        estimand: s.estimand,
        split_mode: ctx.config.design.split_mode,
        seed_mode: s.seed_mode.into(),
        force: s.force,
        allow_mechanistic: s.allow_mechanistic,
        ..EnumOptions::default()
    }
}

/// Exact expectation of every study design by enumeration.
pub fn run_oracle_check(ctx: &StudyContext) -> Result<Vec<EnumerationResult>> {
    let StudyModel::Outcome(model) = &ctx.model else {
        return Err(config("oracle-check needs the mechanistic engine or an analytic model"));
    };
    let market = ctx.marketplace().expect("outcome market");
    let opts = enum_options(ctx);
    ctx.config
        .study
        .designs
        .iter()
        .map(|&d| enumerate_expectation(market, model, &enumeration_spec(ctx, d)?, &opts))
        .collect()
}

/// Enumeration for the analytic designs that fit under the size guard;
/// others are skipped.
pub fn bias_study_enumeration(ctx: &StudyContext) -> Result<Vec<EnumerationResult>> {
    let StudyModel::Outcome(model @ OutcomeModelRef::Analytic(_)) = &ctx.model else {
        return Ok(Vec::new());
    };
    let market = ctx.marketplace().expect("outcome market");
    let opts = EnumOptions { force: false, ..enum_options(ctx) };
    let mut out = Vec::new();
    for &d in &ctx.config.study.designs {
        if d == DesignKind::Switchback {
            continue;
        }
        match enumerate_expectation(market, model, &enumeration_spec(ctx, d)?, &opts) {
            Ok(r) => out.push(r),
            Err(Error::EnumerationTooLarge { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Stable-system table over `study.k_grid` (default `N/4, N/2, N`).
pub fn run_validate_assumptions(ctx: &StudyContext) -> Result<Vec<StabilityRow>> {
    let StudyModel::Outcome(model) = &ctx.model else {
        return Err(config("validate-assumptions needs the mechanistic engine or an analytic model"));
    };
    let market = ctx.marketplace().expect("outcome market");
    let n = market.n_members();
    let grid = if ctx.config.study.k_grid.is_empty() {
        let mut g = vec![(n / 4).max(1), (n / 2).max(1), n];
        g.dedup();
        g
    } else {
        ctx.config.study.k_grid.clone()
    };
    validate_stable_system(market, model, &grid, ctx.config.study.stability_reps, derive_seed(ctx.config.seed, "stability", 0))
}
