//! Mann-Whitney U test.
//!
//! `u1` is the U statistic of the first sample: the number of cross-sample
//! pairs in which the first sample's value is larger, ties counting one
//! half. It equals `R1 - n1(n1 + 1)/2` where `R1` is the first sample's rank
//! sum in the pooled ranking. `u2 = n1*n2 - u1`, and the smaller of the two
//! drives p-values and the critical-value decision.

mod critical_values;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Largest `n1 + n2` for which exact p-values are computed.
pub const EXACT_MAX_TOTAL: usize = 30;

/// Largest sample size covered by the embedded critical-value tables.
pub const TABLE_MAX_N: usize = 20;

// Beyond this total the exact arrangement counts no longer fit in u64.
const EXACT_CRITICAL_MAX_TOTAL: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("sample `{label}` is empty")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample `{label}` contains non-finite value {v}"
            )));
        }
        Ok(Sample { label, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// 1-based ranks; tied values share the mean of their rank span.
pub fn rank_with_ties(pooled: &[f64]) -> Result<Vec<f64>> {
    if pooled.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot rank an empty sequence".into(),
        ));
    }
    if let Some(v) = pooled.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v}")));
    }
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Sum of `t^3 - t` over groups of tied values.
pub fn tie_correction_term(pooled: &[f64]) -> f64 {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

fn has_ties(pooled: &[f64]) -> bool {
    tie_correction_term(pooled) > 0.0
}

/// `(u1, u2)` for samples `a` and `b`.
pub fn u_statistic(a: &Sample, b: &Sample) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "both samples must be non-empty".into(),
        ));
    }
    let pooled: Vec<f64> = a.values.iter().chain(&b.values).copied().collect();
    let ranks = rank_with_ties(&pooled)?;
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    Ok((u1, n1 * n2 - u1))
}

/// Null distribution of U for sample sizes `(n1, n2)` without ties.
///
/// Built from the recurrence on which sample holds the largest pooled rank:
/// `c(m, n, u) = c(m - 1, n, u - n) + c(m, n - 1, u)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    n1: usize,
    n2: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ExactDistribution {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 + n2 > EXACT_CRITICAL_MAX_TOTAL {
            return Err(Error::InvalidArgument(format!(
                "exact distribution limited to n1 + n2 <= {EXACT_CRITICAL_MAX_TOTAL}"
            )));
        }
        // row[n] holds the counts for (m, n) while sweeping m upward.
        let mut row: Vec<Vec<u64>> = vec![vec![1]; n2 + 1];
        for m in 1..=n1 {
            let mut next: Vec<Vec<u64>> = Vec::with_capacity(n2 + 1);
            next.push(vec![1]);
            for n in 1..=n2 {
                let mut c = vec![0u64; m * n + 1];
                for (u, &v) in row[n].iter().enumerate() {
                    c[u + n] += v;
                }
                for (u, &v) in next[n - 1].iter().enumerate() {
                    c[u] += v;
                }
                next.push(c);
            }
            row = next;
        }
        let counts = row.swap_remove(n2);
        let total = counts.iter().sum();
        Ok(ExactDistribution {
            n1,
            n2,
            counts,
            total,
        })
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Number of rank arrangements giving each U value `0..=n1*n2`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `P(U <= u)` under the null.
    pub fn cdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        let upto = (u.floor() as usize).min(self.counts.len() - 1);
        let hits: u64 = self.counts[..=upto].iter().sum();
        hits as f64 / self.total as f64
    }

    /// Largest u with `P(U <= u) <= level`, if any.
    pub fn critical_value(&self, level: f64) -> Option<u32> {
        let mut acc = 0u64;
        let mut best = None;
        for (u, &c) in self.counts.iter().enumerate() {
            acc += c;
            // Small relative slack so levels like 0.025 match exact rationals.
            if acc as f64 <= level * self.total as f64 * (1.0 + 1e-12) {
                best = Some(u as u32);
            } else {
                break;
            }
        }
        best
    }
}

/// Two-tailed exact p-value `2 P(U <= u)`, capped at 1.
///
/// Either `u1` or `u2` may be passed; a fractional `u` means the data had
/// ties and is refused.
pub fn exact_p_value(u: f64, n1: usize, n2: usize) -> Result<f64> {
    if u.fract() != 0.0 {
        return Err(Error::TiesPresent);
    }
    if n1 == 0 || n2 == 0 || n1 + n2 > EXACT_MAX_TOTAL {
        return Err(Error::InvalidArgument(format!(
            "exact p-value needs 1 <= n1, n2 and n1 + n2 <= {EXACT_MAX_TOTAL}"
        )));
    }
    let dist = ExactDistribution::new(n1, n2)?;
    let u = u.min((n1 * n2) as f64 - u);
    Ok((2.0 * dist.cdf(u)).min(1.0))
}

/// Two-tailed normal-approximation p-value with continuity correction.
///
/// `tie_correction` is the sum of `t^3 - t` over tie groups in the pooled
/// data (see [`tie_correction_term`]); pass 0 for tie-free data.
pub fn approx_p_value(u: f64, n1: usize, n2: usize, tie_correction: f64) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(
            "sample sizes must be positive".into(),
        ));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mut variance = n1f * n2f * (n + 1.0) / 12.0;
    if n > 1.0 {
        variance -= n1f * n2f * tie_correction / (12.0 * n * (n - 1.0));
    }
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mean = n1f * n2f / 2.0;
    let u = u.min(n1f * n2f - u);
    let z = (u + 0.5 - mean) / variance.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * normal.cdf(z)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    One,
    Two,
}

/// Critical U from the embedded tables (`alpha` 0.05 or 0.01, sizes 1..=20).
pub fn critical_value_lookup(n1: usize, n2: usize, alpha: f64, tails: Tails) -> Result<u32> {
    let table = match (tails, alpha) {
        (Tails::Two, 0.05) => &critical_values::TWO_TAILED_05,
        (Tails::Two, 0.01) => &critical_values::TWO_TAILED_01,
        (Tails::One, 0.05) => &critical_values::ONE_TAILED_05,
        (Tails::One, 0.01) => &critical_values::ONE_TAILED_01,
        _ => {
            return Err(Error::NoCriticalValue {
                n1,
                n2,
                alpha,
                reason: "alpha not tabulated (0.05 or 0.01)",
            })
        }
    };
    if !(1..=TABLE_MAX_N).contains(&n1) || !(1..=TABLE_MAX_N).contains(&n2) {
        return Err(Error::NoCriticalValue {
            n1,
            n2,
            alpha,
            reason: "sample sizes outside 1..=20",
        });
    }
    match table[n1 - 1][n2 - 1] {
        critical_values::NA => Err(Error::NoCriticalValue {
            n1,
            n2,
            alpha,
            reason: "samples too small for any rejection",
        }),
        v => Ok(v as u32),
    }
}

/// Critical U computed directly from the exact distribution, for any alpha.
pub fn critical_value_exact(n1: usize, n2: usize, alpha: f64, tails: Tails) -> Result<Option<u32>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let level = match tails {
        Tails::One => alpha,
        Tails::Two => alpha / 2.0,
    };
    Ok(ExactDistribution::new(n1, n2)?.critical_value(level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    Exact,
    NormalApproximation,
}

impl fmt::Display for PMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PMethod::Exact => "exact",
            PMethod::NormalApproximation => "normal-approximation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    FailToReject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Reject => "Reject",
            Decision::FailToReject => "Fail to Reject",
        })
    }
}

impl FromStr for Tails {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Tails::One),
            "two" => Ok(Tails::Two),
            other => Err(Error::InvalidArgument(format!("unknown tails `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTestOutcome {
    pub label_a: String,
    pub label_b: String,
    pub n1: usize,
    pub n2: usize,
    pub u1: f64,
    pub u2: f64,
    pub u: f64,
    pub p_two_tailed: f64,
    pub p_method: PMethod,
    pub critical_value: Option<u32>,
    pub alpha: f64,
    pub decision: Decision,
}

/// Two-tailed Mann-Whitney test of `a` against `b`.
///
/// Uses the exact p-value for tie-free data with `n1 + n2 <= 30`, otherwise
/// the tie-corrected normal approximation. The decision is `Reject` iff
/// `u <= critical_value`; tabulated alphas use the embedded tables, other
/// alphas the exact distribution. When no critical value exists because the
/// samples are too small, the null cannot be rejected; when the samples are
/// too large for an exact critical value, the decision falls back to
/// `p <= alpha`.
pub fn mann_whitney_test(a: &Sample, b: &Sample, alpha: f64) -> Result<UTestOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let (u1, u2) = u_statistic(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let u = u1.min(u2);
    let pooled: Vec<f64> = a.values.iter().chain(&b.values).copied().collect();
    let ties = tie_correction_term(&pooled);

    let (p_two_tailed, p_method) = if !has_ties(&pooled) && n1 + n2 <= EXACT_MAX_TOTAL {
        (exact_p_value(u, n1, n2)?, PMethod::Exact)
    } else {
        (
            approx_p_value(u, n1, n2, ties)?,
            PMethod::NormalApproximation,
        )
    };

    let tabulated = alpha == 0.05 || alpha == 0.01;
    let in_table = n1 <= TABLE_MAX_N && n2 <= TABLE_MAX_N;
    let (critical_value, decision) = if tabulated && in_table {
        match critical_value_lookup(n1, n2, alpha, Tails::Two) {
            Ok(c) => (Some(c), decide(u, c)),
            Err(Error::NoCriticalValue { .. }) => (None, Decision::FailToReject),
            Err(e) => return Err(e),
        }
    } else if n1 + n2 <= EXACT_CRITICAL_MAX_TOTAL {
        match critical_value_exact(n1, n2, alpha, Tails::Two)? {
            Some(c) => (Some(c), decide(u, c)),
            None => (None, Decision::FailToReject),
        }
    } else {
        let d = if p_two_tailed <= alpha {
            Decision::Reject
        } else {
            Decision::FailToReject
        };
        (None, d)
    };

    Ok(UTestOutcome {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        n1,
        n2,
        u1,
        u2,
        u,
        p_two_tailed,
        p_method,
        critical_value,
        alpha,
        decision,
    })
}

fn decide(u: f64, critical: u32) -> Decision {
    if u <= critical as f64 {
        Decision::Reject
    } else {
        Decision::FailToReject
    }
}
