//! Goodness-of-fit checks used to validate simulated statistics:
//! two-sample Kolmogorov-Smirnov and Pearson chi-square tests.

use crate::error::{CorankError, Result};
use crate::special::chi_sq_sf;

/// Kolmogorov limiting survival function `2 sum (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    // below 0.2 the series converges slowly and the value is 1 within 1e-12
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value with the small-sample correction
/// `(sqrt(m) + 0.12 + 0.11 / sqrt(m)) D`, `m = n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let d = ks_statistic(a, b);
    let m = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let en = m.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareCheck {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `observed` counts to cell probabilities.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareCheck> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(CorankError::InvalidInput("need matching counts and probabilities over two or more cells".into()));
    }
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        if !(p > 0.0) {
            return Err(CorankError::InvalidInput("cell probabilities must be positive".into()));
        }
        let e = p * total as f64;
        statistic += (o as f64 - e).powi(2) / e;
    }
    let dof = (observed.len() - 1) as f64;
    Ok(ChiSquareCheck { statistic, dof, p_value: chi_sq_sf(dof, statistic)? })
}

/// Pearson test of independence for a contingency table (rows x columns).
/// Empty rows or columns are dropped.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareCheck> {
    let cols = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != cols) {
        return Err(CorankError::InvalidInput("ragged contingency table".into()));
    }
    let row_tot: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: u64 = row_tot.iter().sum();
    let rows_used = row_tot.iter().filter(|&&t| t > 0).count();
    let cols_used = col_tot.iter().filter(|&&t| t > 0).count();
    if rows_used < 2 || cols_used < 2 {
        return Err(CorankError::InvalidInput("contingency table needs two non-empty rows and columns".into()));
    }
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            if row_tot[i] == 0 || col_tot[j] == 0 {
                continue;
            }
            let e = row_tot[i] as f64 * col_tot[j] as f64 / total as f64;
            statistic += (o as f64 - e).powi(2) / e;
        }
    }
    let dof = ((rows_used - 1) * (cols_used - 1)) as f64;
    Ok(ChiSquareCheck { statistic, dof, p_value: chi_sq_sf(dof, statistic)? })
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
