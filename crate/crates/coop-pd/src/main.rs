use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

use coop_pd::analytics::PotentialStats;
use coop_pd::calibrate::{estimate_k, published_k, DEFAULT_D_IC_MIN};
use coop_pd::classify::classify_tables;
use coop_pd::config::{parse_init, RunConfig};
use coop_pd::game::{GameParams, State};
use coop_pd::harness::{
    aggregate_neighborhood, bin_by_unit_klr, build_grid, frontier_lines, read_results, run_grid,
    stratified_s_sample, write_aggregation, write_bins, write_results, AggregationSpec, GridSpec,
    Statistic, S_STRATA,
};
use coop_pd::meta::{bundled_treatments, correlate, read_human_rates, verify_treatment_stats};
use coop_pd::numfmt::format_g;
use coop_pd::qlearn::QTable;
use rand_chacha::rand_core::SeedableRng;

#[derive(Parser)]
#[command(name = "coop-pd", version, about = "Cooperation frontiers of Q-learning agents in the repeated prisoner's dilemma", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicator-potential statistics for one game
    Analytics {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified s-sample covering unit KLR intervals of [-5, 10)
    SampleS {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation grid and write the results CSV
    Simulate(SimulateArgs),
    /// Classify a pair of final Q-tables
    Classify {
        /// Row player's table: 8 values, states CC CD DC DD × actions C D
        #[arg(long, num_args = 8, value_name = "Q")]
        row: Vec<f64>,
        /// Column player's table, same layout
        #[arg(long, num_args = 8, value_name = "Q")]
        col: Vec<f64>,
    },
    /// Open-ball scatter/contour aggregation of a results CSV
    Aggregate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "median")]
        statistic: String,
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean cooperative share per unit-integer KLR bin
    Bins {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the correction factor K per learning rate
    Calibrate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = DEFAULT_D_IC_MIN)]
        d_ic_min: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic frontier isolines over the δ–s plane at fixed r
    Frontier {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Learning rate selecting the published K
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.525)]
        delta_min: f64,
        #[arg(long, default_value_t = 0.975)]
        delta_max: f64,
        #[arg(long, default_value_t = 37)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled treatment table operations
    Meta {
        #[command(subcommand)]
        command: MetaCommand,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in grid preset used when no config file is given
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    periods: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// optimistic | pessimistic
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MetaCommand {
    /// Recompute the derived columns and report residuals
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate human cooperation rates with matched simulated cells
    Correlate {
        #[arg(long)]
        human: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Analytics { delta, r, s, out } => {
            let g = GameParams::new(r, s, delta)?;
            let stats = PotentialStats::compute(&g)?;
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record([
                "delta", "r", "s", "a", "b", "p_star", "ke_c", "ke_d", "klr", "size_bad",
                "size_good", "d_ic",
            ])?;
            w.write_record(
                [
                    delta,
                    r,
                    s,
                    stats.a,
                    stats.b,
                    stats.p_star,
                    stats.ke_c,
                    stats.ke_d,
                    stats.klr,
                    stats.size_bad,
                    stats.size_good,
                    stats.d_ic,
                ]
                .map(format_g),
            )?;
            w.flush()?;
        }
        Command::SampleS { delta, r, seed, out } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sample = stratified_s_sample(delta, r, &mut rng)?;
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record(["stratum", "s", "klr"])?;
            for (k, &s) in S_STRATA.zip(&sample) {
                let g = GameParams::new(r, s, delta)?;
                let stats = PotentialStats::compute(&g)?;
                w.write_record([k.to_string(), format_g(s), format_g(stats.klr)])?;
            }
            w.flush()?;
        }
        Command::Simulate(args) => simulate(args)?,
        Command::Classify { row, col } => {
            let q_row = table_from_flat(&row)?;
            let q_col = table_from_flat(&col)?;
            let (p_row, p_col, dynamics, label) = classify_tables(&q_row, &q_col);
            let out = std::io::stdout().lock();
            let mut out = std::io::BufWriter::new(out);
            writeln!(out, "label: {}", label.as_str())?;
            writeln!(out, "cooperative: {}", label.cooperative())?;
            writeln!(
                out,
                "ties: row={:?} col={:?}",
                State::ALL.map(|s| p_row.tie(s)),
                State::ALL.map(|s| p_col.tie(s))
            )?;
            for (start, stats) in State::ALL.iter().zip(&dynamics.per_start) {
                writeln!(
                    out,
                    "from {:?}: cycle {:?}, sucker_row={}, sucker_col={}",
                    start,
                    stats.cycle,
                    format_g(stats.sucker_row),
                    format_g(stats.sucker_col)
                )?;
            }
        }
        Command::Aggregate {
            results,
            statistic,
            radius,
            out,
        } => {
            let rows = read_results(&results)?;
            let statistic = match statistic.as_str() {
                "median" => Statistic::Median,
                "mean" => Statistic::Mean,
                other => bail!("unknown statistic {other:?} (expected median|mean)"),
            };
            let spec = AggregationSpec {
                ball_radius: radius,
                statistic,
                ..AggregationSpec::default()
            };
            let records = aggregate_neighborhood(&rows, &spec)?;
            write_aggregation(&records, out_writer(&out)?)?;
        }
        Command::Bins { results, out } => {
            let rows = read_results(&results)?;
            let bins = bin_by_unit_klr(&rows)?;
            write_bins(&bins, out_writer(&out)?)?;
        }
        Command::Calibrate {
            results,
            d_ic_min,
            out,
        } => {
            let rows = read_results(&results)?;
            let mut alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
            alphas.sort_by(|a, b| a.total_cmp(b));
            alphas.dedup();
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record(["alpha", "k", "inverse_k", "mse", "cells_used", "series_skipped"])?;
            for alpha in alphas {
                let res = estimate_k(&rows, alpha, d_ic_min)?;
                w.write_record([
                    format_g(res.alpha),
                    format_g(res.k),
                    format_g(res.inverse_k),
                    format_g(res.mse),
                    res.cells_used.to_string(),
                    res.series_skipped.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Command::Frontier {
            r,
            epsilon,
            alpha,
            delta_min,
            delta_max,
            steps,
            out,
        } => {
            if steps < 2 {
                bail!("steps must be at least 2");
            }
            let deltas: Vec<f64> = (0..steps)
                .map(|i| delta_min + (delta_max - delta_min) * i as f64 / (steps - 1) as f64)
                .collect();
            let points = frontier_lines(r, published_k(alpha), epsilon, &deltas);
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record(["delta", "s_klr_frontier", "s_sizebad_half"])?;
            for p in points {
                w.write_record([
                    format_g(p.delta),
                    p.s_klr.map(format_g).unwrap_or_default(),
                    p.s_sizebad.map(format_g).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        Command::Meta { command } => meta(command)?,
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => match args.preset.as_str() {
            "desk" => RunConfig::desk_preset(),
            "paper" => RunConfig::paper_preset(),
            other => bail!("unknown preset {other:?} (expected desk|paper)"),
        },
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.periods {
        cfg.periods = v;
    }
    if let Some(v) = args.replications {
        cfg.replications = v;
    }
    if let Some(v) = &args.init {
        cfg.init = parse_init(v)?;
    }
    if let Some(v) = &args.out {
        cfg.out = v.display().to_string();
    }

    let spec = GridSpec {
        alphas: cfg.alphas.clone(),
        epsilons: cfg.epsilons.clone(),
        deltas: cfg.deltas.clone(),
        rs: cfg.rs.clone(),
        replications: cfg.replications,
        master_seed: cfg.seed,
    };
    let cells = build_grid(&spec)?;
    eprintln!(
        "running {} cells × {} replications × {} periods",
        cells.len(),
        cfg.replications,
        cfg.periods
    );
    let rows = run_grid(&cells, cfg.periods, cfg.init, cfg.workers)?;
    let file = std::fs::File::create(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out))?;
    write_results(&rows, std::io::BufWriter::new(file))?;
    eprintln!("wrote {} rows to {}", rows.len(), cfg.out);
    Ok(())
}

fn meta(command: MetaCommand) -> Result<()> {
    match command {
        MetaCommand::Verify { out } => {
            let reports = verify_treatment_stats()?;
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record([
                "study",
                "delta",
                "r",
                "s",
                "computed_klr",
                "computed_size_good",
                "computed_d_ic",
                "residual_klr",
                "residual_size_good",
                "residual_d_ic",
            ])?;
            for rep in &reports {
                w.write_record([
                    rep.treatment.study.clone(),
                    format_g(rep.treatment.delta),
                    format_g(rep.treatment.r),
                    format_g(rep.treatment.s),
                    format_g(rep.computed_klr),
                    format_g(rep.computed_size_good),
                    format_g(rep.computed_d_ic),
                    format_g(rep.residual_klr),
                    format_g(rep.residual_size_good),
                    format_g(rep.residual_d_ic),
                ])?;
            }
            w.flush()?;
            eprintln!(
                "{} rows, {} distinct treatment keys",
                bundled_treatments().len(),
                coop_pd::meta::aggregate_duplicates(bundled_treatments()).len()
            );
        }
        MetaCommand::Correlate {
            human,
            results,
            out,
        } => {
            let rates = read_human_rates(&human)?;
            let rows = read_results(&results)?;
            let report = correlate(&rates, &rows)?;
            let mut w = csv::Writer::from_writer(out_writer(&out)?);
            w.write_record(["game_index", "pearson", "treatments"])?;
            for rec in report {
                w.write_record([
                    rec.game_index.to_string(),
                    format_g(rec.pearson),
                    rec.treatments.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn table_from_flat(values: &[f64]) -> Result<QTable> {
    if values.len() != 8 {
        bail!("expected 8 Q-values (4 states × 2 actions), got {}", values.len());
    }
    let mut entries = [[0.0; 2]; 4];
    for (i, chunk) in values.chunks(2).enumerate() {
        entries[i] = [chunk[0], chunk[1]];
    }
    Ok(QTable::from_values(entries))
}
