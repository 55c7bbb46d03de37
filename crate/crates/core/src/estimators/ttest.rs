use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub statistic: f64,
    pub p_value: f64,
    /// Welch-Satterthwaite degrees of freedom, `NaN` when degenerate.
    pub df: f64,
    /// Both samples had zero variance; `p_value` is then 1 if the means are
    /// equal and 0 otherwise.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch two-sample t-test, two-sided.
pub fn two_sample_t_test(treat: &[f64], control: &[f64]) -> Result<TTest> {
    if treat.len() < 2 || control.len() < 2 {
        return Err(validation(format!(
            "t-test needs at least 2 units per arm, got {} treated and {} control",
            treat.len(),
            control.len()
        )));
    }
    let (mt, vt) = mean_var(treat);
    let (mc, vc) = mean_var(control);
    let (at, ac) = (vt / treat.len() as f64, vc / control.len() as f64);
    let se2 = at + ac;
    if !(se2 > 0.0) {
        let equal = mt == mc;
        return Ok(TTest {
            statistic: if equal { 0.0 } else { (mt - mc).signum() * f64::INFINITY },
            p_value: if equal { 1.0 } else { 0.0 },
            df: f64::NAN,
            degenerate: true,
        });
    }
    let t = (mt - mc) / se2.sqrt();
    let df = se2 * se2 / (at * at / (treat.len() as f64 - 1.0) + ac * ac / (control.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| validation(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest { statistic: t, p_value: p, df, degenerate: false })
}
