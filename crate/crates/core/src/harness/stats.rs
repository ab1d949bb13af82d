//! Chi-square tests with small-bin pooling.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Upper tail probability of a chi-square variable.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return if statistic <= 1e-12 { 1.0 } else { 0.0 };
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(statistic).clamp(0.0, 1.0)
}

/// Groups bins so every group has expected count >= 5: small bins are merged
/// into one pool, and a pool that is still too small joins the smallest
/// remaining bin. Returns index groups.
fn pool_bins(expected: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pool: Vec<usize> = Vec::new();
    let mut pool_mass = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        if e <= 0.0 {
            continue;
        }
        if e < 5.0 {
            pool.push(i);
            pool_mass += e;
        } else {
            groups.push(vec![i]);
        }
    }
    if !pool.is_empty() {
        if pool_mass < 5.0 && !groups.is_empty() {
            let smallest = (0..groups.len())
                .min_by(|&a, &b| {
                    let ea: f64 = groups[a].iter().map(|&i| expected[i]).sum();
                    let eb: f64 = groups[b].iter().map(|&i| expected[i]).sum();
                    ea.partial_cmp(&eb).unwrap()
                })
                .unwrap();
            groups[smallest].extend(pool);
        } else {
            groups.push(pool);
        }
    }
    groups
}

/// Pearson goodness of fit of `observed` counts against `probs`.
/// Observations in zero-probability bins make the statistic infinite.
pub fn goodness_of_fit(observed: &[u64], probs: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    if observed.iter().zip(probs).any(|(&o, &p)| p <= 0.0 && o > 0) {
        return ChiSquareResult { statistic: f64::INFINITY, df: 0, p_value: 0.0 };
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let groups = pool_bins(&expected);
    let statistic: f64 = groups
        .iter()
        .map(|g| {
            let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
            let e: f64 = g.iter().map(|&i| expected[i]).sum();
            (o - e).powi(2) / e
        })
        .sum();
    let df = groups.len().saturating_sub(1);
    ChiSquareResult { statistic, df, p_value: chi_square_sf(statistic, df) }
}

/// Two-sample chi-square homogeneity test on count vectors over the same bins.
pub fn two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    // expected count of the smaller sample drives the pooling rule
    let expected: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x + y) as f64 * na.min(nb) as f64 / total)
        .collect();
    let groups = pool_bins(&expected);
    let mut statistic = 0.0;
    for g in &groups {
        let x: f64 = g.iter().map(|&i| a[i] as f64).sum();
        let y: f64 = g.iter().map(|&i| b[i] as f64).sum();
        let row = x + y;
        let ea = row * na as f64 / total;
        let eb = row * nb as f64 / total;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = groups.len().saturating_sub(1);
    ChiSquareResult { statistic, df, p_value: chi_square_sf(statistic, df) }
}

/// Total variation distance between the empirical distributions of two count vectors.
pub fn empirical_tv(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}
