use serde::{Deserialize, Serialize};

use super::StatsError;

/// Year count used as the CAGR exponent for a span of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CagrConvention {
    /// Both endpoint years count: 2006..=2018 is 13 years.
    #[default]
    Inclusive,
    /// Number of intervals: 2006..=2018 is 12 years.
    Interval,
}

impl CagrConvention {
    pub fn years(self, first: i32, last: i32) -> u32 {
        let span = (last - first).unsigned_abs();
        match self {
            Self::Inclusive => span + 1,
            Self::Interval => span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub measure: String,
    pub v_start: f64,
    pub v_end: f64,
    pub n_years: u32,
    pub rate: f64,
}

/// `(v_end / v_start)^(1 / n_years) - 1`.
pub fn cagr(v_start: f64, v_end: f64, n_years: u32) -> Result<f64, StatsError> {
    if !v_start.is_finite() || v_start <= 0.0 {
        return Err(StatsError::UndefinedRate(v_start));
    }
    if !v_end.is_finite() || v_end < 0.0 {
        return Err(StatsError::InvalidValue(v_end));
    }
    if n_years == 0 {
        return Err(StatsError::ZeroYears);
    }
    Ok((v_end / v_start).powf(1.0 / f64::from(n_years)) - 1.0)
}

/// CAGR between two calendar years of a series.
pub fn cagr_between(
    measure: &str,
    (first_year, v_start): (i32, f64),
    (last_year, v_end): (i32, f64),
    convention: CagrConvention,
) -> Result<GrowthRate, StatsError> {
    let n_years = convention.years(first_year, last_year);
    Ok(GrowthRate {
        measure: measure.to_string(),
        v_start,
        v_end,
        n_years,
        rate: cagr(v_start, v_end, n_years)?,
    })
}

fn check_values(values: &[f64]) -> Result<(), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySeries);
    }
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(bad) => Err(StatsError::InvalidValue(*bad)),
        None => Ok(()),
    }
}

/// Gini coefficient from the sorted-rank identity
/// `G = 2 Σ i·x(i) / (n Σ x) − (n + 1) / n`, i = 1..n.
pub fn gini(values: &[f64]) -> Result<f64, StatsError> {
    check_values(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sum: f64 = sorted.iter().sum();
    if sum == 0.0 {
        return Err(StatsError::AllZero);
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i as f64 + 1.0) * x)
        .sum();
    Ok((2.0 * weighted / (n * sum) - (n + 1.0) / n).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Order statistic `k` (0-based), rearranging `values` in place.
fn order_stat(values: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Inclusive linear-interpolation percentile: position `(n − 1)·p`.
fn percentile(values: &mut [f64], p: f64) -> f64 {
    let h = (values.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = order_stat(values, lo);
    if frac == 0.0 || lo + 1 >= values.len() {
        return a;
    }
    // After selecting `lo`, the next order statistic is the minimum of the
    // right partition.
    let b = values[lo + 1..]
        .iter()
        .copied()
        .min_by(f64::total_cmp)
        .unwrap_or(a);
    a + frac * (b - a)
}

pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySeries);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::InvalidValue(*bad));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut work = values.to_vec();
    let min = work.iter().copied().fold(f64::INFINITY, f64::min);
    let max = work.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DistributionSummary {
        n,
        mean,
        std,
        min,
        p25: percentile(&mut work, 0.25),
        p50: percentile(&mut work, 0.50),
        p75: percentile(&mut work, 0.75),
        max,
    })
}
