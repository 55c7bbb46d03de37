//! CSV writers, the run manifest and the command dispatcher shared by the
//! CLI.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use super::config::ScenarioConfig;
use super::studies::{
    bias_study_enumeration, run_bias_study, run_oracle_check, run_power_curve, run_validate_assumptions, BiasRow,
    PowerRow, StudyContext,
};
use crate::error::{config, Error, Result};
use crate::oracle::{write_enumeration_csv, StabilityRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    BiasStudy,
    PowerCurve,
    OracleCheck,
    ValidateAssumptions,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::BiasStudy => "bias-study",
            Command::PowerCurve => "power-curve",
            Command::OracleCheck => "oracle-check",
            Command::ValidateAssumptions => "validate-assumptions",
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_bias_csv<W: Write>(rows: &[BiasRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["design", "mean_estimate", "ground_truth", "bias", "ci_lo", "ci_hi"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.design.name().to_string(),
            r.mean_estimate.to_string(),
            r.ground_truth.to_string(),
            r.bias.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_power_csv<W: Write>(rows: &[PowerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["effect_size", "design", "power", "reps", "mc_se"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.effect_size.to_string(),
            r.design.name().to_string(),
            r.power.to_string(),
            r.reps.to_string(),
            r.mc_se.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stability_csv<W: Write>(rows: &[StabilityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "treated_discrepancy", "control_discrepancy", "worst_campaign"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.k.to_string(), r.treated.to_string(), r.control.to_string(), r.worst_campaign.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `key,value` rows: the command, every resolved config key, and the full
/// config as JSON under `resolved_config`.
pub fn write_manifest<W: Write>(cfg: &ScenarioConfig, command: Command, out: W) -> Result<()> {
    let mut rows = vec![("command".to_string(), command.name().to_string())];
    let value = serde_json::to_value(cfg).expect("config serializes");
    flatten("", &value, &mut rows);
    rows.push(("resolved_config".to_string(), cfg.to_json()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        w.write_record([k, v]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn config_from_manifest(text: &str) -> Result<ScenarioConfig> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.map_err(|e| config(format!("invalid manifest: {e}")))?;
        if rec.get(0) == Some("resolved_config") {
            return ScenarioConfig::from_json_str(rec.get(1).unwrap_or(""));
        }
    }
    Err(config("manifest has no resolved_config entry"))
}

/// Runs `command`, writes its outputs and `manifest.csv` under `out_dir`,
/// and returns a short text summary.
pub fn run_command(command: Command, cfg: &ScenarioConfig, out_dir: &Path) -> Result<String> {
    let ctx = StudyContext::new(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut summary = String::new();
    match command {
        Command::Simulate => {
            let (plan, delivery, report, truth) = ctx.simulate_once()?;
            plan.write_csv(create(out_dir, "assignment.csv")?)?;
            if let Some(d) = &delivery {
                d.outcomes.write_csv(create(out_dir, "outcomes.csv")?)?;
            }
            report.write_csv(create(out_dir, "estimate.csv")?)?;
            let mut text = Vec::new();
            report.write_text(&mut text)?;
            writeln!(text, "ground_truth: {truth}")?;
            if plan.outside_unbiased_regime() {
                writeln!(text, "note: budget split away from a half split or fair coin")?;
            }
            create(out_dir, "estimate.txt")?.write_all(&text)?;
            summary.push_str(&String::from_utf8_lossy(&text));
        }
        Command::BiasStudy => {
            let rows = run_bias_study(&ctx)?;
            write_bias_csv(&rows, create(out_dir, "bias.csv")?)?;
            let exact = bias_study_enumeration(&ctx)?;
            if !exact.is_empty() {
                write_enumeration_csv(&exact, create(out_dir, "oracle.csv")?)?;
            }
            for r in &rows {
                let _ = writeln!(
                    summary,
                    "{:<13} mean {:>14.4} truth {:>14.4} bias {:>12.4} [{:.4}, {:.4}]",
                    r.design.name(),
                    r.mean_estimate,
                    r.ground_truth,
                    r.bias,
                    r.ci_lo,
                    r.ci_hi
                );
            }
        }
        Command::PowerCurve => {
            if cfg.study.reps < 100 {
                return Err(config(format!("power-curve needs at least 100 reps, got {}", cfg.study.reps)));
            }
            let rows = run_power_curve(&ctx)?;
            write_power_csv(&rows, create(out_dir, "power.csv")?)?;
            for r in &rows {
                let _ = writeln!(summary, "effect {:<8} {:<13} power {:.4} (se {:.4})", r.effect_size, r.design.name(), r.power, r.mc_se);
            }
        }
        Command::OracleCheck => {
            let rows = run_oracle_check(&ctx)?;
            write_enumeration_csv(&rows, create(out_dir, "oracle.csv")?)?;
            for r in &rows {
                let _ = writeln!(
                    summary,
                    "{:<13} n={:<8} exact_mean {:.6} truth {:.6} bias {:.6}",
                    r.design.name(),
                    r.assignments_evaluated,
                    r.exact_mean,
                    r.ground_truth,
                    r.bias
                );
            }
        }
        Command::ValidateAssumptions => {
            let rows = run_validate_assumptions(&ctx)?;
            write_stability_csv(&rows, create(out_dir, "stability.csv")?)?;
            for r in &rows {
                let _ = writeln!(
                    summary,
                    "K={:<8} treated {:.6} control {:.6} worst {:.6}",
                    r.k, r.treated, r.control, r.worst_campaign
                );
            }
        }
    }
    write_manifest(cfg, command, create(out_dir, "manifest.csv")?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let cfg = ScenarioConfig::from_toml_str("seed = 77\n[marketplace]\nmembers = 9\n[study]\nk_grid = [3, 9]\n").unwrap();
        let mut buf = Vec::new();
        write_manifest(&cfg, Command::BiasStudy, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("key,value\ncommand,bias-study\n"));
        assert!(text.contains("marketplace.members,9\n"));
        assert!(text.contains("study.k_grid[1],9\n"));
        assert_eq!(config_from_manifest(&text).unwrap(), cfg);
    }

    #[test]
    fn bias_csv_header() {
        let mut buf = Vec::new();
        write_bias_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "design,mean_estimate,ground_truth,bias,ci_lo,ci_hi\n");
    }
}
