//! Bundled laboratory treatment table, verification of its derived columns,
//! ingestion of external human cooperation rates, treatment-to-cell matching
//! and Pearson correlations.

use serde::Deserialize;
use std::path::Path;
use std::sync::OnceLock;

use crate::analytics::{AnalyticsError, PotentialStats};
use crate::game::GameParams;
use crate::harness::ResultRow;

const TREATMENTS_CSV: &str = include_str!("../data/treatments.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Treatment {
    pub study: String,
    pub n: u32,
    pub delta: f64,
    pub r: f64,
    pub s: f64,
    #[serde(rename = "klr")]
    pub published_klr: f64,
    #[serde(rename = "size_good")]
    pub published_size_good: f64,
    #[serde(rename = "d_ic")]
    pub published_d_ic: f64,
    #[serde(rename = "duplicate", deserialize_with = "bool_from_int")]
    pub duplicate_flag: bool,
}

fn bool_from_int<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    Ok(u8::deserialize(d)? != 0)
}

#[derive(Debug, thiserror::Error)]
pub enum MetaError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("matching needs at least 100 simulated cells, got {0}")]
    TooFewCells(usize),
    #[error("correlation needs equal-length inputs of at least 2, got {0} and {1}")]
    BadLengths(usize, usize),
    #[error("correlation undefined: zero variance in an input")]
    ZeroVariance,
}

/// The treatment table, verbatim as published (duplicates still present).
pub fn bundled_treatments() -> &'static [Treatment] {
    static CACHE: OnceLock<Vec<Treatment>> = OnceLock::new();
    CACHE.get_or_init(|| {
        csv::Reader::from_reader(TREATMENTS_CSV.as_bytes())
            .deserialize()
            .collect::<Result<Vec<Treatment>, _>>()
            .expect("bundled table parses")
    })
}

/// Collapses identical (δ, r, s) keys, summing first-round observation
/// counts; the first occurrence supplies study name and published stats.
pub fn aggregate_duplicates(treatments: &[Treatment]) -> Vec<Treatment> {
    let mut out: Vec<Treatment> = Vec::new();
    for t in treatments {
        if let Some(existing) = out
            .iter_mut()
            .find(|e| e.delta == t.delta && e.r == t.r && e.s == t.s)
        {
            existing.n += t.n;
        } else {
            out.push(t.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub treatment: Treatment,
    pub computed_klr: f64,
    pub computed_size_good: f64,
    pub computed_d_ic: f64,
    pub residual_klr: f64,
    pub residual_size_good: f64,
    pub residual_d_ic: f64,
}

impl ResidualReport {
    pub fn within(&self, tol_klr: f64, tol_size_good: f64, tol_d_ic: f64) -> bool {
        self.residual_klr <= tol_klr
            && self.residual_size_good <= tol_size_good
            && self.residual_d_ic <= tol_d_ic
    }
}

/// Recomputes the derived columns from (δ, r, s) and reports absolute
/// residuals against the published values, row by row.
pub fn verify_treatment_stats() -> Result<Vec<ResidualReport>, MetaError> {
    bundled_treatments()
        .iter()
        .map(|t| {
            let g = GameParams::new(t.r, t.s, t.delta)?;
            let stats = PotentialStats::compute(&g)?;
            Ok(ResidualReport {
                treatment: t.clone(),
                computed_klr: stats.klr,
                computed_size_good: stats.size_good,
                computed_d_ic: stats.d_ic,
                residual_klr: (stats.klr - t.published_klr).abs(),
                residual_size_good: (stats.size_good - t.published_size_good).abs(),
                residual_d_ic: (stats.d_ic - t.published_d_ic).abs(),
            })
        })
        .collect()
}

/// Worst-case-normalized residual minimized over the rounding box of the
/// printed inputs: each of (δ, r, s) may sit anywhere within ±`half_width`
/// of its two-decimal printed value. Returns the smallest achievable
/// max(res_klr/tol_klr, res_sg/tol_sg, res_dic/tol_dic); a value ≤ 1 means
/// the published row is consistent with some unrounded input.
pub fn rounding_box_score(t: &Treatment, half_width: f64) -> f64 {
    const TOL: (f64, f64, f64) = (0.05, 0.01, 0.01);
    let score = |delta: f64, r: f64, s: f64| -> f64 {
        let Ok(g) = GameParams::new(r, s, delta) else {
            return f64::INFINITY;
        };
        let Ok(stats) = PotentialStats::compute(&g) else {
            return f64::INFINITY;
        };
        let k = (stats.klr - t.published_klr).abs() / TOL.0;
        let sg = (stats.size_good - t.published_size_good).abs() / TOL.1;
        let d = (stats.d_ic - t.published_d_ic).abs() / TOL.2;
        k.max(sg).max(d)
    };

    let mut center = (t.delta, t.r, t.s);
    let mut width = half_width;
    let mut best = score(center.0, center.1, center.2);
    // Coarse-to-fine grid search; the objective is smooth inside the box.
    for _ in 0..4 {
        const N: i32 = 10;
        for i in -N..=N {
            for j in -N..=N {
                for l in -N..=N {
                    let delta = center.0 + width * i as f64 / N as f64;
                    let r = center.1 + width * j as f64 / N as f64;
                    let s = center.2 + width * l as f64 / N as f64;
                    // Stay inside the original box.
                    if (delta - t.delta).abs() > half_width + 1e-15
                        || (r - t.r).abs() > half_width + 1e-15
                        || (s - t.s).abs() > half_width + 1e-15
                    {
                        continue;
                    }
                    let v = score(delta, r, s);
                    if v < best {
                        best = v;
                        center = (delta, r, s);
                    }
                }
            }
        }
        width /= N as f64;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HumanRate {
    pub delta: f64,
    pub r: f64,
    pub s: f64,
    pub game_index: u32,
    pub coop_rate: f64,
    pub n: u32,
}

pub fn read_human_rates(path: &Path) -> Result<Vec<HumanRate>, MetaError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rates = Vec::new();
    for record in reader.deserialize() {
        rates.push(record?);
    }
    Ok(rates)
}

/// Mean cooperative share of the 100 simulated cells nearest to the
/// treatment in (d^ic, offset) space. The treatment's own offset uses a
/// correction term of zero, i.e. its raw kinetic log-ratio.
pub fn match_algorithm_rate(
    delta: f64,
    r: f64,
    s: f64,
    rows: &[ResultRow],
) -> Result<f64, MetaError> {
    if rows.len() < 100 {
        return Err(MetaError::TooFewCells(rows.len()));
    }
    let g = GameParams::new(r, s, delta)?;
    let stats = PotentialStats::compute(&g)?;
    let mut by_distance: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let dd = row.d_ic - stats.d_ic;
            let doff = row.offset - stats.klr;
            ((dd * dd + doff * doff).sqrt(), i)
        })
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mean = by_distance
        .iter()
        .take(100)
        .map(|&(_, i)| rows[i].share_coop)
        .sum::<f64>()
        / 100.0;
    Ok(mean)
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64, MetaError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MetaError::BadLengths(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetaError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameCorrelation {
    pub game_index: u32,
    pub pearson: f64,
    pub treatments: usize,
}

/// Per-game-index Pearson correlation between human first-round cooperation
/// rates and the matched algorithmic rates.
pub fn correlate(
    human: &[HumanRate],
    rows: &[ResultRow],
) -> Result<Vec<GameCorrelation>, MetaError> {
    use std::collections::BTreeMap;
    let mut by_game: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for h in human {
        let algo = match_algorithm_rate(h.delta, h.r, h.s, rows)?;
        let entry = by_game.entry(h.game_index).or_default();
        entry.0.push(h.coop_rate);
        entry.1.push(algo);
    }
    by_game
        .into_iter()
        .map(|(game_index, (hx, ax))| {
            Ok(GameCorrelation {
                game_index,
                pearson: pearson_correlation(&hx, &ax)?,
                treatments: hx.len(),
            })
        })
        .collect()
}
