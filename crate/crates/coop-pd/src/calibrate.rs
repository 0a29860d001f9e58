//! Estimation of the correction factor K(α): detect the empirical frontier
//! per (δ, r, ε) series, then grid-search c = 1/K minimizing the mean
//! squared distance between ln(ε/c) and the detected frontiers.

use std::collections::BTreeMap;

use crate::harness::ResultRow;

pub const C_GRID_MIN: f64 = 0.005;
pub const C_GRID_MAX: f64 = 0.05;
pub const C_GRID_POINTS: usize = 1000;
pub const DEFAULT_D_IC_MIN: f64 = 0.35;

/// Published correction factors, stored as c = 1/K per learning rate.
pub const PUBLISHED_INVERSE_K: [(f64, f64); 10] = [
    (0.01, 0.0320),
    (0.02, 0.0152),
    (0.03, 0.008),
    (0.04, 0.0051),
    (0.05, 0.0030),
    (0.06, 0.0022),
    (0.07, 0.0015),
    (0.08, 0.0011),
    (0.09, 0.0009),
    (0.10, 0.0007),
];

/// K(α) for the nearest tabulated learning rate.
pub fn published_k(alpha: f64) -> f64 {
    let (_, c) = PUBLISHED_INVERSE_K
        .iter()
        .min_by(|a, b| (a.0 - alpha).abs().total_cmp(&(b.0 - alpha).abs()))
        .copied()
        .expect("table nonempty");
    1.0 / c
}

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("need at least 2 points to detect a frontier, got {0}")]
    TooFewPoints(usize),
    #[error("no eligible series (after d_ic filter and degeneracy exclusion)")]
    NoEligibleSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedFrontier {
    pub klr_star: f64,
    /// Set when the series shows no increase anywhere; the midpoint returned
    /// is then meaningless and the series should be excluded downstream.
    pub degenerate: bool,
}

/// Midpoint of the adjacent klr pair with the maximum forward share
/// difference; ties break toward the smaller klr. Points must be sorted by
/// klr ascending.
pub fn detect_klr_star(points: &[(f64, f64)]) -> Result<DetectedFrontier, CalibrationError> {
    if points.len() < 2 {
        return Err(CalibrationError::TooFewPoints(points.len()));
    }
    let mut best_jump = f64::NEG_INFINITY;
    let mut best_mid = 0.0;
    for pair in points.windows(2) {
        let jump = pair[1].1 - pair[0].1;
        if jump > best_jump {
            best_jump = jump;
            best_mid = 0.5 * (pair[0].0 + pair[1].0);
        }
    }
    Ok(DetectedFrontier {
        klr_star: best_mid,
        degenerate: best_jump <= 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub alpha: f64,
    pub k: f64,
    pub inverse_k: f64,
    pub mse: f64,
    /// Number of series entering the MSE (D in the estimator).
    pub cells_used: usize,
    pub series_skipped: usize,
}

fn c_grid() -> impl Iterator<Item = f64> {
    (0..C_GRID_POINTS).map(|i| {
        C_GRID_MIN + (C_GRID_MAX - C_GRID_MIN) * i as f64 / (C_GRID_POINTS - 1) as f64
    })
}

/// Estimates K for one learning rate from simulated results. Rows are
/// grouped into (δ, r, ε) series, series near the binding constraint
/// (d^ic ≤ d_ic_min) or with flat share curves are dropped, and the grid
/// point minimizing the pooled MSE is returned (ties toward smaller c).
pub fn estimate_k(
    rows: &[ResultRow],
    alpha: f64,
    d_ic_min: f64,
) -> Result<CalibrationResult, CalibrationError> {
    let mut series: BTreeMap<(u64, u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.alpha == alpha) {
        series
            .entry((row.delta.to_bits(), row.r.to_bits(), row.epsilon.to_bits()))
            .or_default()
            .push((row.klr, row.share_coop));
    }

    let mut detected: Vec<(f64, f64)> = Vec::new(); // (epsilon, klr_star)
    let mut skipped = 0usize;
    for ((delta_bits, r_bits, eps_bits), mut points) in series {
        let d_ic = points_d_ic(rows, delta_bits, r_bits);
        if d_ic <= d_ic_min || points.len() < 2 {
            skipped += 1;
            continue;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let frontier = detect_klr_star(&points)?;
        if frontier.degenerate {
            skipped += 1;
            continue;
        }
        detected.push((f64::from_bits(eps_bits), frontier.klr_star));
    }
    if detected.is_empty() {
        return Err(CalibrationError::NoEligibleSeries);
    }

    let d = detected.len() as f64;
    let mut best = (f64::INFINITY, C_GRID_MIN); // (mse, c)
    for c in c_grid() {
        let mse = detected
            .iter()
            .map(|&(eps, star)| {
                let err = (eps / c).ln() - star;
                err * err
            })
            .sum::<f64>()
            / d;
        // Strict comparison keeps the smaller c on ties (grid is ascending).
        if mse < best.0 {
            best = (mse, c);
        }
    }
    let (mse, c) = best;
    Ok(CalibrationResult {
        alpha,
        k: 1.0 / c,
        inverse_k: c,
        mse,
        cells_used: detected.len(),
        series_skipped: skipped,
    })
}

fn points_d_ic(rows: &[ResultRow], delta_bits: u64, r_bits: u64) -> f64 {
    rows.iter()
        .find(|r| r.delta.to_bits() == delta_bits && r.r.to_bits() == r_bits)
        .map(|r| r.d_ic)
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_table_lookup() {
        assert_eq!(published_k(0.1), 1.0 / 0.0007);
        assert_eq!(published_k(0.01), 1.0 / 0.0320);
        assert_eq!(published_k(0.033), 1.0 / 0.008); // nearest: 0.03
    }

    #[test]
    fn correction_term_range() {
        let upper = (published_k(0.1) * 0.1).ln();
        let lower = (published_k(0.01) * 0.01).ln();
        assert!((upper - 4.96).abs() <= 0.01, "{upper}");
        assert!((lower - (-1.16)).abs() <= 0.01, "{lower}");
    }

    #[test]
    fn detect_unique_jump() {
        let points = [(1.0, 0.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)];
        let f = detect_klr_star(&points).unwrap();
        assert_eq!(f.klr_star, 2.5);
        assert!(!f.degenerate);
    }

    #[test]
    fn detect_constant_is_degenerate_first_midpoint() {
        let points = [(0.0, 0.4), (1.0, 0.4), (2.0, 0.4)];
        let f = detect_klr_star(&points).unwrap();
        assert_eq!(f.klr_star, 0.5);
        assert!(f.degenerate);
    }

    #[test]
    fn detect_tie_breaks_toward_smaller_klr() {
        let points = [(0.0, 0.0), (1.0, 0.5), (2.0, 0.5), (3.0, 1.0)];
        assert_eq!(detect_klr_star(&points).unwrap().klr_star, 0.5);
    }

    #[test]
    fn detect_rejects_single_point() {
        assert!(matches!(
            detect_klr_star(&[(1.0, 0.5)]),
            Err(CalibrationError::TooFewPoints(1))
        ));
    }

    #[test]
    fn detect_logistic_curve() {
        let points: Vec<(f64, f64)> = (0..61)
            .map(|i| {
                let klr = -3.0 + 0.2 * i as f64;
                (klr, 1.0 / (1.0 + (-(klr - 3.0) / 0.1).exp()))
            })
            .collect();
        let f = detect_klr_star(&points).unwrap();
        assert!((f.klr_star - 3.0).abs() <= 0.2);
    }

    fn synthetic_rows(alpha: f64, c0: f64) -> Vec<ResultRow> {
        // For each ε, a series with a share jump exactly at ln(ε/c0).
        let mut rows = Vec::new();
        for i in 1..=10 {
            let epsilon = 0.01 * i as f64;
            let star = (epsilon / c0).ln();
            for j in 0..15 {
                let klr = star - 3.75 + 0.5 * j as f64; // midpoints hit star
                rows.push(ResultRow {
                    alpha,
                    epsilon,
                    delta: 0.95,
                    r: 0.95,
                    s: 1.0,
                    d_ic: 0.636,
                    klr,
                    offset: 0.0,
                    periods: 1,
                    replications: 1,
                    base_seed: 0,
                    share_coop: if klr > star { 1.0 } else { 0.0 },
                    share_allc: 0.0,
                    share_wsls: 0.0,
                    share_osc: 0.0,
                    share_other_coop: 0.0,
                    share_alld: 0.0,
                    share_gt: 0.0,
                    share_expl: 0.0,
                    share_other_noncoop: 0.0,
                    tie_rate: 0.0,
                });
            }
        }
        rows
    }

    #[test]
    fn recovers_grid_member_exactly() {
        // 0.0095 = 0.005 + 100 * grid step, an exact member.
        let step = (C_GRID_MAX - C_GRID_MIN) / (C_GRID_POINTS - 1) as f64;
        let c0 = C_GRID_MIN + 100.0 * step;
        let res = estimate_k(&synthetic_rows(0.05, c0), 0.05, DEFAULT_D_IC_MIN).unwrap();
        assert_eq!(res.inverse_k, c0);
        assert!(res.mse <= 1e-20);
        assert_eq!(res.cells_used, 10);
    }

    #[test]
    fn off_grid_member_within_one_step() {
        let step = (C_GRID_MAX - C_GRID_MIN) / (C_GRID_POINTS - 1) as f64;
        let c0 = C_GRID_MIN + 100.4 * step;
        let res = estimate_k(&synthetic_rows(0.05, c0), 0.05, DEFAULT_D_IC_MIN).unwrap();
        assert!((res.inverse_k - c0).abs() <= step);
    }

    #[test]
    fn order_invariant() {
        let mut rows = synthetic_rows(0.05, 0.01);
        let forward = estimate_k(&rows, 0.05, DEFAULT_D_IC_MIN).unwrap();
        rows.reverse();
        let backward = estimate_k(&rows, 0.05, DEFAULT_D_IC_MIN).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn returned_mse_is_global_minimum() {
        let rows = synthetic_rows(0.05, 0.0123);
        let res = estimate_k(&rows, 0.05, DEFAULT_D_IC_MIN).unwrap();
        let detected: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let eps = 0.01 * i as f64;
                (eps, (eps / 0.0123f64).ln())
            })
            .collect();
        for c in c_grid() {
            let mse = detected
                .iter()
                .map(|&(e, s)| ((e / c).ln() - s).powi(2))
                .sum::<f64>()
                / detected.len() as f64;
            assert!(res.mse <= mse + 1e-15);
        }
    }

    #[test]
    fn filters_near_binding_series() {
        let mut rows = synthetic_rows(0.05, 0.01);
        for r in rows.iter_mut() {
            r.d_ic = 0.1; // inside the excluded band
        }
        assert!(matches!(
            estimate_k(&rows, 0.05, DEFAULT_D_IC_MIN),
            Err(CalibrationError::NoEligibleSeries)
        ));
    }

    #[test]
    fn skips_degenerate_series() {
        let mut rows = synthetic_rows(0.05, 0.01);
        // Flatten the ε = 0.01 series.
        for r in rows.iter_mut().filter(|r| r.epsilon == 0.01) {
            r.share_coop = 0.5;
        }
        let res = estimate_k(&rows, 0.05, DEFAULT_D_IC_MIN).unwrap();
        assert_eq!(res.cells_used, 9);
        assert_eq!(res.series_skipped, 1);
    }
}
