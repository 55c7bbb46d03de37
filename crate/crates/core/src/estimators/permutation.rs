use rand::Rng;

use crate::seed::derived_rng;

/// Pairs up to this many are enumerated exactly.
pub const EXACT_PAIRS: usize = 12;
pub const RESAMPLES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    /// Mean paired difference.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided sign-flip test on paired differences. Exact over all `2^n`
/// flips for `n <= EXACT_PAIRS`; otherwise `RESAMPLES` random flips from
/// `(seed, "permutation", 0)` with `p = (1 + hits) / (1 + RESAMPLES)`.
pub fn paired_permutation_test(diffs: &[f64], seed: u64) -> PermutationTest {
    let n = diffs.len();
    if n == 0 {
        return PermutationTest { statistic: 0.0, p_value: 1.0, exact: true };
    }
    let observed: f64 = diffs.iter().sum();
    let scale = diffs.iter().map(|d| d.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let tol = 1e-9 * scale;
    let at_least = |s: f64| s.abs() >= observed.abs() - tol;
    let statistic = observed / n as f64;
    if n <= EXACT_PAIRS {
        let total = 1u64 << n;
        let hits = (0..total)
            .filter(|mask| {
                let s: f64 = diffs.iter().enumerate().map(|(k, d)| if mask >> k & 1 == 1 { -d } else { *d }).sum();
                at_least(s)
            })
            .count() as u64;
        PermutationTest { statistic, p_value: hits as f64 / total as f64, exact: true }
    } else {
        let mut rng = derived_rng(seed, "permutation", 0);
        let mut hits = 0u64;
        for _ in 0..RESAMPLES {
            let s: f64 = diffs.iter().map(|d| if rng.random::<bool>() { -d } else { *d }).sum();
            if at_least(s) {
                hits += 1;
            }
        }
        PermutationTest { statistic, p_value: (1 + hits) as f64 / (1 + RESAMPLES) as f64, exact: false }
    }
}
