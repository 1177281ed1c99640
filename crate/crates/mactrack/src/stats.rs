//! Rank correlation for trend checks over sweep grids.

use itertools::Itertools;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Largest sample size for which the permutation distribution is enumerated.
pub const EXACT_MAX_N: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanTest {
    pub rho: f64,
    /// One-sided p-value for the requested trend.
    pub p_value: f64,
    pub exact: bool,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let order: Vec<usize> = (0..x.len()).sorted_by(|&i, &j| x[i].total_cmp(&x[j])).collect();
    let mut r = vec![0.0; x.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && x[order[end + 1]] == x[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &order[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Spearman test of a monotone trend of `y` in `x`. Small samples use the
/// exact permutation distribution; larger ones the usual t approximation.
pub fn spearman_test(x: &[f64], y: &[f64], trend: Trend) -> SpearmanTest {
    assert_eq!(x.len(), y.len(), "spearman_test needs paired samples");
    let n = x.len();
    let rho = spearman_rho(x, y);
    let signed = match trend {
        Trend::Increasing => rho,
        Trend::Decreasing => -rho,
    };
    if n < 3 {
        return SpearmanTest {
            rho,
            p_value: 1.0,
            exact: true,
        };
    }
    if n <= EXACT_MAX_N {
        let rx = ranks(x);
        let ry = ranks(y);
        let mut hits = 0u64;
        let mut total = 0u64;
        for perm in (0..n).permutations(n) {
            let py: Vec<f64> = perm.iter().map(|&i| ry[i]).collect();
            let r = pearson(&rx, &py);
            let r = if trend == Trend::Increasing { r } else { -r };
            total += 1;
            if r >= signed - 1e-12 {
                hits += 1;
            }
        }
        return SpearmanTest {
            rho,
            p_value: hits as f64 / total as f64,
            exact: true,
        };
    }
    let df = (n - 2) as f64;
    let t = if signed.abs() >= 1.0 {
        signed.signum() * f64::INFINITY
    } else {
        signed * (df / (1.0 - signed * signed)).sqrt()
    };
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    SpearmanTest {
        rho,
        p_value: 1.0 - dist.cdf(t),
        exact: false,
    }
}
