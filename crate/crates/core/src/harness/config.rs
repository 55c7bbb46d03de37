//! Scenario configuration.
//!
//! Scenarios are TOML (or JSON) documents with four tables: `marketplace`,
//! `model`, `design` and `study`, plus a top-level `seed`. Every key has a
//! default; unknown keys are rejected all at once. The README lists them.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::designs::{self, AssignmentPlan, DesignKind};
use crate::engine::{
    AuctionConfig, AuctionRule, Budget, Campaign, CampaignParams, Marketplace, MemberProfile, PacingParams,
};
use crate::error::{config, Result};
use crate::estimators::SplitMode;
use crate::models::{AnalyticKind, AnalyticModel, CarryoverModel, FactorModel, MechanisticModel, OutcomeModelRef};
use crate::oracle::SeedMode;
use crate::outcome::Estimand;
use crate::seed::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub marketplace: MarketplaceSpec,
    pub model: ModelSpec,
    pub design: DesignSpecConfig,
    pub study: StudySpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            marketplace: MarketplaceSpec::default(),
            model: ModelSpec::default(),
            design: DesignSpecConfig::default(),
            study: StudySpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuctionKind {
    SecondPrice,
    FirstPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityKind {
    Constant,
    Uniform,
    Lognormal,
}

/// Per-(member, campaign) value weights, drawn from `(seed, "affinity", member)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffinitySpec {
    pub kind: AffinityKind,
    /// Used by `constant`.
    pub value: f64,
    /// Bounds for `uniform`.
    pub low: f64,
    pub high: f64,
    /// Log-scale sd for `lognormal` (location 0).
    pub sigma: f64,
}

impl Default for AffinitySpec {
    fn default() -> Self {
        AffinitySpec { kind: AffinityKind::Constant, value: 1.0, low: 0.5, high: 1.5, sigma: 0.5 }
    }
}

/// Either a number of cents or the string `"unlimited"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetSpec {
    Cents(i64),
    Keyword(String),
}

impl BudgetSpec {
    fn resolve(&self) -> Result<Budget> {
        match self {
            BudgetSpec::Cents(c) => Ok(Budget::Cents(*c)),
            BudgetSpec::Keyword(k) if k == "unlimited" => Ok(Budget::Unlimited),
            BudgetSpec::Keyword(k) => Err(config(format!("budget_cents must be an integer or \"unlimited\", got {k:?}"))),
        }
    }
}

/// `count` identical campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignGroup {
    pub count: usize,
    pub budget_cents: BudgetSpec,
    pub value_rate_cents: f64,
    pub bid_shading: f64,
    /// Share of members targeted, drawn from `(seed, "targets", campaign)`.
    pub target_fraction: f64,
    pub initial_rate: f64,
    pub pacing_step: f64,
}

impl Default for CampaignGroup {
    fn default() -> Self {
        CampaignGroup {
            count: 1,
            budget_cents: BudgetSpec::Cents(10_000),
            value_rate_cents: 100.0,
            bid_shading: 1.0,
            target_fraction: 1.0,
            initial_rate: 1.0,
            pacing_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketplaceSpec {
    pub members: usize,
    pub horizon: u32,
    pub auction: AuctionKind,
    pub reserve_cents: i64,
    pub request_rate: f64,
    pub affinity: AffinitySpec,
    pub campaigns: Vec<CampaignGroup>,
}

impl Default for MarketplaceSpec {
    fn default() -> Self {
        MarketplaceSpec {
            members: 100,
            horizon: 24,
            auction: AuctionKind::SecondPrice,
            reserve_cents: 0,
            request_rate: 1.0,
            affinity: AffinitySpec::default(),
            campaigns: vec![CampaignGroup::default()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mechanistic,
    SupplementS1,
    DiminishingReturns,
    FullBudgetUtilization,
    Carryover,
    Factor,
}

/// Flat parameter table; each kind reads only its own keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// mechanistic: relative value lift of treated pairs.
    pub lift: f64,
    /// analytic
    pub mu: f64,
    pub tau: f64,
    pub gamma: f64,
    /// analytic and carryover
    pub noise_sd: f64,
    /// carryover and factor
    pub periods: usize,
    /// carryover
    pub base: f64,
    pub effect: f64,
    pub carryover: f64,
    /// factor
    pub members: usize,
    pub campaigns: usize,
    pub campaign_sigma: f64,
    pub member_sigma: f64,
    pub unit_noise_sd: f64,
    pub period_sigma: f64,
    pub value_cents: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let f = FactorModel::default();
        let c = CarryoverModel::default();
        ModelSpec {
            kind: ModelKind::Mechanistic,
            lift: 0.1,
            mu: 5.0,
            tau: 2.0,
            gamma: 1.0,
            noise_sd: 0.0,
            periods: f.periods,
            base: c.base,
            effect: c.effect,
            carryover: c.carryover,
            members: f.members,
            campaigns: f.campaigns,
            campaign_sigma: f.campaign_sigma,
            member_sigma: f.member_sigma,
            unit_noise_sd: f.unit_noise_sd,
            period_sigma: f.period_sigma,
            value_cents: f.value_cents,
        }
    }
}

/// Resolved model.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyModel {
    Outcome(OutcomeModelRef),
    Carryover(CarryoverModel),
    Factor(FactorModel),
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<StudyModel> {
        let analytic = |kind| AnalyticModel { mu: self.mu, tau: self.tau, gamma: self.gamma, noise_sd: self.noise_sd, kind };
        let model = match self.kind {
            ModelKind::Mechanistic => StudyModel::Outcome(OutcomeModelRef::Mechanistic(MechanisticModel { lift: self.lift })),
            ModelKind::SupplementS1 => StudyModel::Outcome(OutcomeModelRef::Analytic(analytic(AnalyticKind::SupplementS1))),
            ModelKind::DiminishingReturns => {
                StudyModel::Outcome(OutcomeModelRef::Analytic(analytic(AnalyticKind::DiminishingReturns)))
            }
            ModelKind::FullBudgetUtilization => {
                StudyModel::Outcome(OutcomeModelRef::Analytic(analytic(AnalyticKind::FullBudgetUtilization)))
            }
            ModelKind::Carryover => StudyModel::Carryover(CarryoverModel {
                periods: self.periods,
                base: self.base,
                effect: self.effect,
                carryover: self.carryover,
                noise_sd: self.noise_sd,
            }),
            ModelKind::Factor => StudyModel::Factor(FactorModel {
                members: self.members,
                campaigns: self.campaigns,
                periods: self.periods,
                campaign_sigma: self.campaign_sigma,
                member_sigma: self.member_sigma,
                unit_noise_sd: self.unit_noise_sd,
                period_sigma: self.period_sigma,
                value_cents: self.value_cents,
            }),
        };
        match &model {
            StudyModel::Outcome(OutcomeModelRef::Analytic(a)) => a.validate()?,
            StudyModel::Carryover(c) => c.validate()?,
            StudyModel::Factor(f) => f.validate()?,
            StudyModel::Outcome(OutcomeModelRef::Mechanistic(m)) => {
                if !(m.lift > -1.0 && m.lift.is_finite()) {
                    return Err(config(format!("lift must be finite and above -1, got {}", m.lift)));
                }
            }
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignSpecConfig {
    pub kind: DesignKind,
    /// Share of units treated by `member_cr` and `campaign_cr`.
    pub treated_fraction: f64,
    /// Switchback periods; defaults to the model's periods or the horizon.
    pub periods: Option<usize>,
    pub balanced: bool,
    pub treat_prob: f64,
    pub split_mode: SplitMode,
}

impl Default for DesignSpecConfig {
    fn default() -> Self {
        DesignSpecConfig {
            kind: DesignKind::MemberCr,
            treated_fraction: 0.5,
            periods: None,
            balanced: true,
            treat_prob: 0.5,
            split_mode: SplitMode::Member,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineSeeds {
    /// Replication `r` runs the engine with `derive_seed(seed, "engine", r)`.
    PerRep,
    /// Every replication uses `seed`; only the assignment varies.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedModeSpec {
    PerAssignment,
    Common,
}

impl From<SeedModeSpec> for SeedMode {
    fn from(s: SeedModeSpec) -> Self {
        match s {
            SeedModeSpec::PerAssignment => SeedMode::PerAssignment,
            SeedModeSpec::Common => SeedMode::Common,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySpec {
    pub designs: Vec<DesignKind>,
    pub reps: usize,
    pub effect_sizes: Vec<f64>,
    pub alpha: f64,
    pub estimand: Estimand,
    pub engine_seeds: EngineSeeds,
    pub k_grid: Vec<usize>,
    pub stability_reps: usize,
    pub seed_mode: SeedModeSpec,
    pub allow_mechanistic: bool,
    pub force: bool,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            designs: vec![DesignKind::MemberCr, DesignKind::BudgetSplit],
            reps: 200,
            effect_sizes: vec![0.0, 0.1, 0.2],
            alpha: 0.05,
            estimand: Estimand::DeliveredValue,
            engine_seeds: EngineSeeds::PerRep,
            k_grid: Vec::new(),
            stability_reps: 20,
            seed_mode: SeedModeSpec::PerAssignment,
            allow_mechanistic: false,
            force: false,
        }
    }
}

fn collect_unknown<'de, D: serde::Deserializer<'de>>(de: D) -> Result<ScenarioConfig>
where
    D::Error: std::fmt::Display,
{
    let mut unknown = Vec::new();
    let cfg: ScenarioConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| config(format!("invalid scenario: {e}")))?;
    if !unknown.is_empty() {
        return Err(config(format!("unknown keys: {}", unknown.join(", "))));
    }
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg = collect_unknown(toml::Deserializer::parse(s).map_err(|e| config(format!("invalid TOML: {e}")))?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        let cfg = collect_unknown(&mut de)?;
        de.end().map_err(|e| config(format!("invalid JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `.toml`, `.json`, or a run manifest (`.csv`) by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            Some("csv") => super::report::config_from_manifest(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks everything that does not need a simulation.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let m = &self.marketplace;
        if m.members == 0 {
            problems.push("marketplace.members must be positive".to_string());
        }
        if m.horizon == 0 {
            problems.push("marketplace.horizon must be positive".to_string());
        }
        if m.reserve_cents < 0 {
            problems.push("marketplace.reserve_cents must be non-negative".to_string());
        }
        if !(m.request_rate >= 0.0 && m.request_rate.is_finite()) {
            problems.push("marketplace.request_rate must be a non-negative number".to_string());
        }
        let a = &m.affinity;
        if a.kind == AffinityKind::Uniform && !(a.low >= 0.0 && a.low <= a.high && a.high.is_finite()) {
            problems.push("marketplace.affinity needs 0 <= low <= high".to_string());
        }
        if a.kind == AffinityKind::Constant && !(a.value >= 0.0 && a.value.is_finite()) {
            problems.push("marketplace.affinity.value must be non-negative".to_string());
        }
        if a.kind == AffinityKind::Lognormal && !(a.sigma >= 0.0 && a.sigma.is_finite()) {
            problems.push("marketplace.affinity.sigma must be non-negative".to_string());
        }
        if m.campaigns.iter().map(|g| g.count).sum::<usize>() == 0 {
            problems.push("marketplace.campaigns must define at least one campaign".to_string());
        }
        for (k, g) in m.campaigns.iter().enumerate() {
            match g.budget_cents.resolve() {
                Ok(Budget::Cents(c)) if c < 0 => problems.push(format!("marketplace.campaigns[{k}].budget_cents is negative")),
                Err(e) => problems.push(format!("marketplace.campaigns[{k}]: {e}")),
                _ => {}
            }
            if !(g.target_fraction > 0.0 && g.target_fraction <= 1.0) {
                problems.push(format!("marketplace.campaigns[{k}].target_fraction must lie in (0, 1]"));
            }
            if !(g.bid_shading > 0.0 && g.bid_shading <= 1.0) {
                problems.push(format!("marketplace.campaigns[{k}].bid_shading must lie in (0, 1]"));
            }
            if !(g.value_rate_cents >= 0.0 && g.value_rate_cents.is_finite()) {
                problems.push(format!("marketplace.campaigns[{k}].value_rate_cents must be non-negative"));
            }
            if !(0.0..=1.0).contains(&g.initial_rate) {
                problems.push(format!("marketplace.campaigns[{k}].initial_rate must lie in [0, 1]"));
            }
            if !(g.pacing_step >= 0.0 && g.pacing_step.is_finite()) {
                problems.push(format!("marketplace.campaigns[{k}].pacing_step must be non-negative"));
            }
        }
        if let Err(e) = self.model.resolve() {
            problems.push(format!("model: {e}"));
        }
        let d = &self.design;
        if !(d.treated_fraction > 0.0 && d.treated_fraction < 1.0) {
            problems.push("design.treated_fraction must lie in (0, 1)".to_string());
        }
        if !(0.0..=1.0).contains(&d.treat_prob) {
            problems.push("design.treat_prob must lie in [0, 1]".to_string());
        }
        if matches!(d.periods, Some(p) if p < 2) {
            problems.push("design.periods must be at least 2".to_string());
        }
        let s = &self.study;
        if s.reps == 0 {
            problems.push("study.reps must be positive".to_string());
        }
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            problems.push("study.alpha must lie in (0, 1)".to_string());
        }
        if s.designs.is_empty() {
            problems.push("study.designs must not be empty".to_string());
        }
        if s.effect_sizes.iter().any(|e| !e.is_finite()) {
            problems.push("study.effect_sizes must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config(problems.join("; ")))
        }
    }

    pub fn n_campaigns(&self) -> usize {
        self.marketplace.campaigns.iter().map(|g| g.count).sum()
    }

    /// Builds the marketplace; structure (affinity, targets) comes from
    /// `self.seed`, engine randomness from `engine_seed`.
    pub fn build_marketplace(&self, engine_seed: u64) -> Result<Marketplace> {
        let spec = &self.marketplace;
        let n = spec.members;
        let m = self.n_campaigns();
        let a = spec.affinity;
        let members = (0..n)
            .map(|i| {
                let mut rng = derived_rng(self.seed, "affinity", i as u64);
                let affinity = match a.kind {
                    AffinityKind::Constant => vec![a.value; m],
                    AffinityKind::Uniform => {
                        let u = Uniform::new_inclusive(a.low, a.high).map_err(|e| config(e.to_string()))?;
                        (0..m).map(|_| u.sample(&mut rng)).collect()
                    }
                    AffinityKind::Lognormal => {
                        let ln = LogNormal::new(0.0, a.sigma).map_err(|e| config(e.to_string()))?;
                        (0..m).map(|_| ln.sample(&mut rng)).collect()
                    }
                };
                Ok(MemberProfile { id: i as u32, request_rate: spec.request_rate, affinity })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut campaigns = Vec::with_capacity(m);
        for g in &spec.campaigns {
            let budget = g.budget_cents.resolve()?;
            for _ in 0..g.count {
                let id = campaigns.len();
                let k = ((g.target_fraction * n as f64).ceil() as usize).clamp(1, n);
                let target = if k == n {
                    (0..n).collect()
                } else {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut derived_rng(self.seed, "targets", id as u64));
                    let mut t = idx[..k].to_vec();
                    t.sort_unstable();
                    t
                };
                campaigns.push(Campaign {
                    id: id as u32,
                    budget,
                    target,
                    params: CampaignParams {
                        value_rate_cents: g.value_rate_cents,
                        bid_shading: g.bid_shading,
                        pacing: PacingParams { initial_rate: g.initial_rate, step: g.pacing_step },
                    },
                });
            }
        }
        let mut market = Marketplace::new(members, campaigns, spec.horizon, engine_seed);
        market.auction = AuctionConfig {
            rule: match spec.auction {
                AuctionKind::SecondPrice => AuctionRule::SecondPrice,
                AuctionKind::FirstPrice => AuctionRule::FirstPrice,
            },
            reserve_cents: spec.reserve_cents,
        };
        market.validate()?;
        Ok(market)
    }

    /// Switchback periods for this scenario.
    pub fn switchback_periods(&self) -> usize {
        self.design.periods.unwrap_or(match self.model.kind {
            ModelKind::Carryover | ModelKind::Factor => self.model.periods,
            _ => self.marketplace.horizon as usize,
        })
    }

    /// Treated units out of `units` for the completely randomized designs,
    /// kept inside `[1, units - 1]` when possible.
    pub fn treated_count(&self, units: usize) -> usize {
        ((self.design.treated_fraction * units as f64).round() as usize).clamp(1, units.max(2) - 1)
    }

    /// Draws a plan of design `kind` for `n` members and `m` campaigns.
    pub fn draw_plan(&self, kind: DesignKind, n: usize, m: usize, seed: u64) -> Result<AssignmentPlan> {
        match kind {
            DesignKind::MemberCr => designs::member_cr(n, self.treated_count(n), seed),
            DesignKind::CampaignCr => designs::campaign_cr(m, self.treated_count(m), seed),
            DesignKind::Switchback => designs::switchback(self.switchback_periods(), seed, self.design.balanced),
            DesignKind::BudgetSplit => designs::budget_split(n, self.design.treat_prob, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn defaults_parse_from_empty_document() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = ScenarioConfig::from_toml_str("sed = 3\n[marketplace]\nmembrs = 4\n[study]\nrep = 2\n").unwrap_err();
        let Error::Config(msg) = err else { panic!("{err:?}") };
        for key in ["sed", "marketplace.membrs", "study.rep"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn json_and_toml_agree() {
        let toml = "seed = 9\n[marketplace]\nmembers = 12\n[[marketplace.campaigns]]\ncount = 3\nbudget_cents = \"unlimited\"\n";
        let a = ScenarioConfig::from_toml_str(toml).unwrap();
        let b = ScenarioConfig::from_json_str(&a.to_json()).unwrap();
        assert_eq!(a, b);
        let market = a.build_marketplace(a.seed).unwrap();
        assert_eq!(market.n_campaigns(), 3);
        assert!(market.campaigns.iter().all(|c| c.budget == Budget::Unlimited));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ScenarioConfig::from_toml_str("[study]\nreps = 0\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[[marketplace.campaigns]]\nbudget_cents = \"lots\"\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[model]\nkind = \"supplement_s1\"\ngamma = -1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[design]\nkind = \"cluster\"\n").is_err());
    }

    #[test]
    fn targets_follow_fraction() {
        let cfg = ScenarioConfig::from_toml_str(
            "[marketplace]\nmembers = 40\n[[marketplace.campaigns]]\ncount = 2\ntarget_fraction = 0.25\n",
        )
        .unwrap();
        let market = cfg.build_marketplace(5).unwrap();
        assert!(market.campaigns.iter().all(|c| c.target.len() == 10));
        assert_eq!(market, cfg.build_marketplace(5).unwrap());
    }
}
