//! Parameter grids, stratified s-sampling, parallel Monte Carlo cell
//! execution and the scatter/contour/bin aggregations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::analytics::{solve_s_for_klr, AnalyticsError, PotentialStats};
use crate::calibrate::published_k;
use crate::classify::{classify_tables, StrategyLabel};
use crate::game::{is_prisoners_dilemma, GameParams};
use crate::numfmt::format_g;
use crate::qlearn::{derive_seed, run_match, InitMode, LearnerConfig, MatchConfig};

/// Seed-derivation domains, so s-sampling streams and cell base seeds never
/// collide even at equal indices.
const DOMAIN_S_SAMPLE: u64 = 0x5;
const DOMAIN_CELL: u64 = 0xce11;

pub const S_STRATA: std::ops::Range<i64> = -5..10;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error(transparent)]
    QLearn(#[from] crate::qlearn::QLearnError),
    #[error("replications must be positive")]
    ZeroReplications,
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One unit interval of the kinetic log-ratio per stratum: draw a target
/// uniformly inside [k, k+1) and invert it to an s value.
pub fn stratified_s_sample<R: Rng>(
    delta: f64,
    r: f64,
    rng: &mut R,
) -> Result<Vec<f64>, AnalyticsError> {
    S_STRATA
        .map(|k| {
            let target = k as f64 + rng.gen::<f64>();
            solve_s_for_klr(delta, r, target)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub rs: Vec<f64>,
    pub replications: u32,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCell {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub r: f64,
    pub s: f64,
    pub stats: PotentialStats,
    pub replications: u32,
    pub base_seed: u64,
}

/// Expands a grid spec into cells: every (α, ε, δ, r) tuple crossed with the
/// 15 stratified s-values of its (δ, r) pair. Tuples violating the dilemma
/// conditions or with d^ic ≤ 0 are excluded up front.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<ParameterCell>, HarnessError> {
    let s_root = derive_seed(spec.master_seed, DOMAIN_S_SAMPLE);
    let cell_root = derive_seed(spec.master_seed, DOMAIN_CELL);

    let mut s_samples = Vec::with_capacity(spec.deltas.len() * spec.rs.len());
    for (i, &delta) in spec.deltas.iter().enumerate() {
        for (j, &r) in spec.rs.iter().enumerate() {
            let dr_index = (i * spec.rs.len() + j) as u64;
            if delta + r <= 1.0 {
                s_samples.push(None);
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s_root, dr_index));
            s_samples.push(Some(stratified_s_sample(delta, r, &mut rng)?));
        }
    }

    let mut cells = Vec::new();
    let mut cell_index: u64 = 0;
    for &alpha in &spec.alphas {
        for &epsilon in &spec.epsilons {
            for (i, &delta) in spec.deltas.iter().enumerate() {
                for (j, &r) in spec.rs.iter().enumerate() {
                    let Some(s_values) = &s_samples[i * spec.rs.len() + j] else {
                        continue;
                    };
                    for &s in s_values {
                        let g = GameParams::new(r, s, delta)?;
                        if !is_prisoners_dilemma(&g) {
                            cell_index += 1;
                            continue;
                        }
                        let stats = PotentialStats::compute(&g)?;
                        cells.push(ParameterCell {
                            alpha,
                            epsilon,
                            delta,
                            r,
                            s,
                            stats,
                            replications: spec.replications,
                            base_seed: derive_seed(cell_root, cell_index),
                        });
                        cell_index += 1;
                    }
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Shares indexed by `StrategyLabel::ALL` order.
    pub label_shares: [f64; 8],
    pub share_cooperative: f64,
    /// Fraction of replications in which either final policy carried a
    /// greedy tie.
    pub tie_rate: f64,
    pub replications: u32,
}

pub fn run_cell(
    cell: &ParameterCell,
    periods: u64,
    init_mode: InitMode,
) -> Result<CellResult, HarnessError> {
    if cell.replications == 0 {
        return Err(HarnessError::ZeroReplications);
    }
    let g = GameParams::new(cell.r, cell.s, cell.delta)?;
    let learner = LearnerConfig {
        alpha: cell.alpha,
        epsilon: cell.epsilon,
        delta: cell.delta,
        init_mode,
    };
    learner.validate()?;
    let mut counts = [0u32; 8];
    let mut ties = 0u32;
    for rep in 0..cell.replications {
        let mc = MatchConfig {
            periods,
            seed: derive_seed(cell.base_seed, rep as u64),
        };
        let outcome = run_match(&g, &learner, &mc);
        let (row, col, _, label) = classify_tables(&outcome.q_row, &outcome.q_col);
        counts[label.index()] += 1;
        if row.has_tie() || col.has_tie() {
            ties += 1;
        }
    }
    let n = cell.replications as f64;
    let label_shares = counts.map(|c| c as f64 / n);
    let share_cooperative = StrategyLabel::ALL
        .iter()
        .zip(label_shares.iter())
        .filter(|(l, _)| l.cooperative())
        .map(|(_, &s)| s)
        .sum();
    Ok(CellResult {
        label_shares,
        share_cooperative,
        tie_rate: ties as f64 / n,
        replications: cell.replications,
    })
}

/// One row of the results CSV; column order is frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub r: f64,
    pub s: f64,
    pub d_ic: f64,
    pub klr: f64,
    pub offset: f64,
    pub periods: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub share_coop: f64,
    pub share_allc: f64,
    pub share_wsls: f64,
    pub share_osc: f64,
    pub share_other_coop: f64,
    pub share_alld: f64,
    pub share_gt: f64,
    pub share_expl: f64,
    pub share_other_noncoop: f64,
    pub tie_rate: f64,
}

pub const RESULT_COLUMNS: [&str; 21] = [
    "alpha",
    "epsilon",
    "delta",
    "r",
    "s",
    "d_ic",
    "klr",
    "offset",
    "periods",
    "replications",
    "base_seed",
    "share_coop",
    "share_allc",
    "share_wsls",
    "share_osc",
    "share_other_coop",
    "share_alld",
    "share_gt",
    "share_expl",
    "share_other_noncoop",
    "tie_rate",
];

pub fn result_row(cell: &ParameterCell, res: &CellResult, periods: u64) -> ResultRow {
    let s = &res.label_shares;
    ResultRow {
        alpha: cell.alpha,
        epsilon: cell.epsilon,
        delta: cell.delta,
        r: cell.r,
        s: cell.s,
        d_ic: cell.stats.d_ic,
        klr: cell.stats.klr,
        offset: cell.stats.klr - (published_k(cell.alpha) * cell.epsilon).ln(),
        periods,
        replications: res.replications,
        base_seed: cell.base_seed,
        share_coop: res.share_cooperative,
        share_allc: s[0],
        share_wsls: s[1],
        share_osc: s[2],
        share_other_coop: s[3],
        share_alld: s[4],
        share_gt: s[5],
        share_expl: s[6],
        share_other_noncoop: s[7],
        tie_rate: res.tie_rate,
    }
}

/// Runs every cell in parallel; `workers` 0 uses the default thread count.
/// Output order equals input order, so results are schedule-independent.
pub fn run_grid(
    cells: &[ParameterCell],
    periods: u64,
    init_mode: InitMode,
    workers: usize,
) -> Result<Vec<ResultRow>, HarnessError> {
    let body = || {
        cells
            .par_iter()
            .map(|cell| run_cell(cell, periods, init_mode).map(|r| result_row(cell, &r, periods)))
            .collect::<Result<Vec<_>, _>>()
    };
    if workers == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(body)
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.write_record([
            format_g(row.alpha),
            format_g(row.epsilon),
            format_g(row.delta),
            format_g(row.r),
            format_g(row.s),
            format_g(row.d_ic),
            format_g(row.klr),
            format_g(row.offset),
            row.periods.to_string(),
            row.replications.to_string(),
            row.base_seed.to_string(),
            format_g(row.share_coop),
            format_g(row.share_allc),
            format_g(row.share_wsls),
            format_g(row.share_osc),
            format_g(row.share_other_coop),
            format_g(row.share_alld),
            format_g(row.share_gt),
            format_g(row.share_expl),
            format_g(row.share_other_noncoop),
            format_g(row.tie_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    write_results(rows, std::io::BufWriter::new(file))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Mean,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Median => "median",
            Statistic::Mean => "mean",
        }
    }

    fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Statistic::Median => {
                values.sort_by(|a, b| a.total_cmp(b));
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationSpec {
    pub ball_radius: f64,
    pub offsets_per_level: usize,
    pub statistic: Statistic,
}

impl Default for AggregationSpec {
    fn default() -> Self {
        AggregationSpec {
            ball_radius: 0.05,
            offsets_per_level: 50,
            statistic: Statistic::Median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggRecord {
    pub d_ic_norm: f64,
    pub offset_norm: f64,
    pub statistic: Statistic,
    /// None when the ball around the grid point contains no results.
    pub value: Option<f64>,
    pub neighbor_count: usize,
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Open-ball aggregation over min-max-normalized (d^ic, offset) coordinates.
/// Grid points are the distinct normalized d^ic levels crossed with equally
/// spaced offsets spanning [0, 1].
pub fn aggregate_neighborhood(
    rows: &[ResultRow],
    spec: &AggregationSpec,
) -> Result<Vec<AggRecord>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let (d_lo, d_hi) = min_max(rows.iter().map(|r| r.d_ic));
    let (o_lo, o_hi) = min_max(rows.iter().map(|r| r.offset));
    let points: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                normalize(r.d_ic, d_lo, d_hi),
                normalize(r.offset, o_lo, o_hi),
                r.share_coop,
            )
        })
        .collect();

    let mut levels: Vec<f64> = points.iter().map(|p| p.0).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();

    let m = spec.offsets_per_level;
    let mut records = Vec::with_capacity(levels.len() * m);
    for &level in &levels {
        for i in 0..m {
            let offset = if m == 1 {
                0.0
            } else {
                i as f64 / (m - 1) as f64
            };
            let mut inside: Vec<f64> = points
                .iter()
                .filter(|(d, o, _)| {
                    let dd = d - level;
                    let oo = o - offset;
                    (dd * dd + oo * oo).sqrt() < spec.ball_radius
                })
                .map(|&(_, _, share)| share)
                .collect();
            let neighbor_count = inside.len();
            let value = if inside.is_empty() {
                None
            } else {
                Some(spec.statistic.apply(&mut inside))
            };
            records.push(AggRecord {
                d_ic_norm: level,
                offset_norm: offset,
                statistic: spec.statistic,
                value,
                neighbor_count,
            });
        }
    }
    Ok(records)
}

pub fn write_aggregation<W: Write>(records: &[AggRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d_ic_norm", "offset_norm", "statistic", "value", "neighbor_count"])?;
    for rec in records {
        w.write_record([
            format_g(rec.d_ic_norm),
            format_g(rec.offset_norm),
            rec.statistic.as_str().to_string(),
            rec.value.map(format_g).unwrap_or_default(),
            rec.neighbor_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlrBin {
    pub alpha: f64,
    pub d_ic: f64,
    /// Midpoint of the unit interval [k, k+1).
    pub midpoint: f64,
    pub mean_share: f64,
    pub count: usize,
}

/// Mean cooperative share per unit-integer KLR bin, grouped by (α, d^ic).
pub fn bin_by_unit_klr(rows: &[ResultRow]) -> Result<Vec<KlrBin>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(u64, u64, i64), (f64, usize)> = BTreeMap::new();
    for row in rows {
        let k = row.klr.floor() as i64;
        let entry = groups
            .entry((row.alpha.to_bits(), row.d_ic.to_bits(), k))
            .or_insert((0.0, 0));
        entry.0 += row.share_coop;
        entry.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|((alpha_bits, d_bits, k), (sum, count))| KlrBin {
            alpha: f64::from_bits(alpha_bits),
            d_ic: f64::from_bits(d_bits),
            midpoint: k as f64 + 0.5,
            mean_share: sum / count as f64,
            count,
        })
        .collect())
}

pub fn write_bins<W: Write>(bins: &[KlrBin], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "d_ic", "klr_midpoint", "mean_share", "count"])?;
    for b in bins {
        w.write_record([
            format_g(b.alpha),
            format_g(b.d_ic),
            format_g(b.midpoint),
            format_g(b.mean_share),
            b.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub delta: f64,
    /// s on the KLR frontier (KLR = ln(K·ε)); None where no s attains it.
    pub s_klr: Option<f64>,
    /// s on the sizeBAD = 0.5 isoline: r/(1−δ) − 1; None where negative.
    pub s_sizebad: Option<f64>,
}

/// Analytic isolines for the δ–s plane sweep at fixed r.
pub fn frontier_lines(r: f64, k: f64, epsilon: f64, deltas: &[f64]) -> Vec<FrontierPoint> {
    let target = (k * epsilon).ln();
    deltas
        .iter()
        .map(|&delta| {
            let s_klr = if delta + r > 1.0 {
                solve_s_for_klr(delta, r, target).ok()
            } else {
                None
            };
            let s_bad = r / (1.0 - delta) - 1.0;
            FrontierPoint {
                delta,
                s_klr,
                s_sizebad: (s_bad > 0.0).then_some(s_bad),
            }
        })
        .collect()
}
