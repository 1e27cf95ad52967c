use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use revsplit::dataio::{
    load_bids_csv, load_similarity_csv, load_subject_areas, split_reviewer_copies,
    subject_overlap_similarity, write_similarity_csv,
};
use revsplit::harness::{
    generate, load_dataset, run_bounds_sweep, run_split_experiment, write_report, ExperimentConfig,
    Format, StageLoads, Variant,
};
use revsplit::{
    draw_split, oracle_optimal, oracle_paper_split, paper_split_value, solve, split_value,
    DrawMode, DrawParams, Error, MatchSpec, PapMode, SimilarityMatrix,
};

#[derive(Parser)]
#[command(name = "revsplit", version, about = "Two-stage reviewer assignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single assignment over the whole matrix.
    Assign(AssignArgs),
    /// Compare a random or explicit split against the oracle.
    Oracle(OracleArgs),
    /// Run the random-split experiment over a list of betas.
    Simulate(SimulateArgs),
    /// Evaluate lower bounds over load scales against a Monte Carlo estimate.
    Bounds(BoundsArgs),
    /// Write a synthetic similarity matrix.
    Gen(GenArgs),
    /// Convert bids or subject areas into a similarity CSV.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn writer(&self) -> revsplit::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn json(&self, value: &impl Serialize) -> revsplit::Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    AtMost,
    FloorCeil,
}

#[derive(Args)]
struct AssignArgs {
    /// Dataset: similarity CSV, `bids:<path>` or `gen:<spec>`.
    dataset: String,
    #[arg(long, default_value_t = 1)]
    ell_rev: u32,
    #[arg(long, default_value_t = 1.0)]
    ell_pap: f64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct OracleArgs {
    dataset: String,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value = "2,2,6")]
    loads: StageLoads,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit second-stage papers (comma-separated indices); drawn
    /// uniformly when omitted.
    #[arg(long, value_delimiter = ',')]
    p2: Option<Vec<usize>>,
    /// Explicit second-stage reviewers (comma-separated indices).
    #[arg(long, value_delimiter = ',')]
    r2: Option<Vec<usize>>,
    #[arg(long, default_value = "standard")]
    variant: Variant,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    dataset: String,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1.0")]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2,2,6")]
    loads: StageLoads,
    #[arg(long, default_value = "uniform")]
    p2_mode: DrawMode,
    #[arg(long, default_value = "standard")]
    variant: Variant,
    /// Number of second-stage papers (score modes).
    #[arg(long)]
    p2_count: Option<usize>,
    /// `paper_id,score` file for score-based modes.
    #[arg(long)]
    scores: Option<String>,
    #[arg(long, default_value_t = 63.0)]
    percentile: f64,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Omit the wall-clock runtime so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BoundsArgs {
    dataset: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    mu: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "json")]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec, e.g. `thm2:n=200,beta=1` or `lowrank:n=60,lambda=120,k=5,seed=1`.
    spec: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvertFrom {
    Bids,
    Subjects,
    Similarity,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: ConvertFrom,
    /// Bids CSV, reviewer subject-area file, or similarity CSV.
    input: PathBuf,
    /// Paper subject-area file (`--from subjects`).
    #[arg(long)]
    papers: Option<PathBuf>,
    /// Total number of subject areas (`--from subjects`).
    #[arg(long)]
    areas: Option<usize>,
    /// Split every reviewer into this many copies.
    #[arg(long, default_value_t = 1)]
    copies: usize,
    #[command(flatten)]
    output: Output,
}

fn write_matrix(s: &SimilarityMatrix, output: &Output) -> revsplit::Result<()> {
    let mut w = output.writer()?;
    write_similarity_csv(s, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> revsplit::Result<()> {
    match cli.command {
        Command::Assign(a) => {
            let s = load_dataset(&a.dataset)?;
            let mode = match a.mode {
                ModeArg::Exact => PapMode::Exact,
                ModeArg::AtMost => PapMode::AtMost,
                ModeArg::FloorCeil => PapMode::FloorCeil,
            };
            let mut spec = MatchSpec::full(&s, a.ell_rev, 1).with_mode(mode);
            spec.ell_pap = a.ell_pap;
            let asg = solve(&s, &spec)?;
            a.output.json(&asg)
        }
        Command::Oracle(a) => {
            let s = load_dataset(&a.dataset)?;
            let loads = a.loads.with_beta(a.beta)?;
            let mut params = DrawParams::default();
            let mode = if a.p2.is_some() || a.r2.is_some() {
                let drawn = draw_split(&s, &loads, DrawMode::UniformFixedSize, &params, a.seed)?;
                params.explicit_r2 = a.r2.unwrap_or(drawn.r2);
                params.explicit_p2 = a.p2.unwrap_or(drawn.p2);
                DrawMode::Explicit
            } else {
                DrawMode::UniformFixedSize
            };
            let split = draw_split(&s, &loads, mode, &params, a.seed)?;
            let result = match a.variant {
                Variant::Standard => {
                    let q_star = oracle_optimal(&s, &split.p2, &loads)?.mean_sim;
                    split_value(&s, &split.r2, &split.p2, &loads)?.with_oracle(q_star)
                }
                Variant::PaperSplit => {
                    let q_star = oracle_paper_split(&s, &split.p2, &loads)?.mean_sim;
                    paper_split_value(&s, &split.r2, &split.p2, &loads)?.with_oracle(q_star)
                }
            };
            #[derive(Serialize)]
            struct OracleOut<'a> {
                r2: &'a [usize],
                p2: &'a [usize],
                q: f64,
                q_star: Option<f64>,
                fraction_of_oracle: Option<f64>,
            }
            a.output.json(&OracleOut {
                r2: &split.r2,
                p2: &split.p2,
                q: result.mean_sim,
                q_star: result.oracle_mean_sim,
                fraction_of_oracle: result.fraction_of_oracle,
            })
        }
        Command::Simulate(a) => {
            let cfg = ExperimentConfig {
                dataset: a.dataset,
                betas: a.beta,
                trials: a.trials,
                loads: a.loads,
                p2_mode: a.p2_mode,
                seed: a.seed,
                variant: a.variant,
                p2_count: a.p2_count,
                scores: a.scores,
                percentile: a.percentile,
            };
            let mut report = run_split_experiment(&cfg)?;
            if a.no_timing {
                report = report.without_timing();
            }
            let mut w = a.output.writer()?;
            write_report(&report, &mut w, a.format)?;
            w.flush()?;
            Ok(())
        }
        Command::Bounds(a) => {
            let s = load_dataset(&a.dataset)?;
            let table = run_bounds_sweep(&s, &a.mu, a.trials, a.seed)?;
            match a.format {
                Format::Json => a.output.json(&table),
                Format::Csv => {
                    let mut w = a.output.writer()?;
                    {
                        let mut c = csv::Writer::from_writer(&mut w);
                        for row in &table.rows {
                            c.serialize(row).map_err(|e| Error::Io(e.into()))?;
                        }
                        c.flush()?;
                    }
                    w.flush()?;
                    Ok(())
                }
            }
        }
        Command::Gen(a) => write_matrix(&generate(&a.spec)?, &a.output),
        Command::Convert(a) => {
            let s = match a.from {
                ConvertFrom::Bids => load_bids_csv(&a.input)?,
                ConvertFrom::Similarity => load_similarity_csv(&a.input)?,
                ConvertFrom::Subjects => {
                    let papers = a
                        .papers
                        .as_ref()
                        .ok_or_else(|| Error::InvalidConfig("--papers is required".into()))?;
                    let areas = a
                        .areas
                        .ok_or_else(|| Error::InvalidConfig("--areas is required".into()))?;
                    let (rids, rareas): (Vec<_>, Vec<_>) =
                        load_subject_areas(&a.input)?.into_iter().unzip();
                    let (pids, pareas): (Vec<_>, Vec<_>) =
                        load_subject_areas(papers)?.into_iter().unzip();
                    let m = subject_overlap_similarity(&rareas, &pareas, areas)?;
                    SimilarityMatrix::new(rids, pids, m.to_rows())?
                }
            };
            write_matrix(&split_reviewer_copies(&s, a.copies)?, &a.output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
