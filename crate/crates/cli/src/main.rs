//! `specdec`: train desk-scale models, decode with a draft model, and check
//! the sampler against its closed-form analysis.

mod commands;
mod config_file;
mod model_spec;
mod trace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use model_spec::{ModelSpec, TokenizerMode};

#[derive(Debug, Parser)]
#[command(name = "specdec", version, about = "Speculative decoding with exact-distribution sampling")]
struct Cli {
    /// Flat `key = value` file of flags for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "SPECDEC_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an n-gram model on a text corpus.
    Train(TrainArgs),
    /// Generate tokens with a target and a draft model.
    Decode(DecodeArgs),
    /// Run a verification suite; exits 1 when it fails.
    Verify(VerifyArgs),
    /// Emit closed-form analysis tables as CSV.
    Sweep(SweepArgs),
    /// Charge decoding traces against a cost model.
    Simulate(SimulateArgs),
    /// Compare speculative and standard beam search.
    Beam(BeamArgs),
    /// Estimate the acceptance rate of a model pair.
    Alpha(AlphaArgs),
}

const SUBCOMMANDS: [&str; 7] = ["train", "decode", "verify", "sweep", "simulate", "beam", "alpha"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainTokenizer {
    Byte,
    Word,
    Ids,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Corpus file; each non-empty line is one sequence.
    pub corpus: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = specdec::models::DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    #[arg(long, value_enum, default_value_t = TrainTokenizer::Byte)]
    pub tokenizer: TrainTokenizer,
    /// Vocabulary size for `ids` corpora (default: largest id + 1).
    #[arg(long)]
    pub vocab: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorChoice {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Args, Serialize)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub argmax: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DecodeArgs {
    /// Model file or built-in (`stateless:P0,P1,..`, `random-ngram:SEED:VOCAB[:ORDER]`).
    #[arg(long)]
    pub target: ModelSpec,
    /// Model file or built-in (`same`, `uniform`, `copy[:MIN:MASS]`, `stateless:..`, `random-ngram:..`).
    #[arg(long, default_value = "copy")]
    pub draft: ModelSpec,
    #[arg(long, default_value = "")]
    pub prompt: String,
    #[arg(long, default_value_t = 4)]
    pub gamma: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lenience: f64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = 64)]
    pub max_tokens: usize,
    /// Stop after this token id.
    #[arg(long)]
    pub stop_token: Option<u32>,
    /// Stop after the tokenizer's end-of-sequence token.
    #[arg(long)]
    pub stop_at_eos: bool,
    #[arg(long, value_enum, default_value_t = TokenizerMode::Auto)]
    pub tokenizer: TokenizerMode,
    /// Print one colored line per step.
    #[arg(long)]
    pub trace: bool,
    /// Print the full result as JSON.
    #[arg(long, conflicts_with = "trace")]
    pub json: bool,
    #[arg(long, value_enum, default_value_t = ColorChoice::Auto)]
    pub color: ColorChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Exactness,
    Equivalence,
    Geometric,
    Rejection,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Engine fault to inject (equivalence suite only).
    #[arg(long, default_value = "none")]
    pub mutate: String,
    /// Random pairs for the exactness and rejection suites.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Largest vocabulary for random pairs and the equivalence models.
    #[arg(long, default_value_t = 16)]
    pub vocab: usize,
    /// Lenience for the exactness suite; below 1 checks the p/l bound.
    #[arg(long, default_value_t = 1.0)]
    pub lenience: f64,
    /// Samples per context and arm for the equivalence suite.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub contexts: usize,
    #[arg(long)]
    pub gamma: Option<usize>,
    /// Acceptance rate for the geometric suite.
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    /// Steps for the geometric suite.
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    #[arg(long, default_value_t = specdec::harness::DEFAULT_P_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// fig2 (tokens per step), fig3 (optimal gamma), fig4 (speedup and operations) or table1.
    pub kind: Option<String>,
    /// `START:STOP:STEP` or a comma list.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long)]
    pub cs: Option<String>,
    #[arg(long)]
    pub gamma_max: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the six-row operations/speed table.
    #[arg(long)]
    pub table1: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub target: ModelSpec,
    #[arg(long, default_value = "same")]
    pub draft: ModelSpec,
    #[arg(long, default_value_t = 4)]
    pub gamma: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lenience: f64,
    /// Draft-to-target walltime ratio.
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    /// Draft-to-target operations ratio (default: same as c).
    #[arg(long)]
    pub c_hat: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub n_tokens: usize,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Label for the task column.
    #[arg(long, default_value = "desk")]
    pub task: String,
    /// Also write the Exp/Emp table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BeamArgs {
    #[arg(long)]
    pub target: ModelSpec,
    #[arg(long, default_value = "same")]
    pub draft: ModelSpec,
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, default_value_t = 4)]
    pub draft_width: usize,
    #[arg(long, default_value_t = 3)]
    pub gamma: usize,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value = "")]
    pub prompt: String,
    /// Check this many seeded random prompts instead of `--prompt`.
    #[arg(long, default_value_t = 0)]
    pub random_prompts: usize,
    #[arg(long, value_enum, default_value_t = TokenizerMode::Auto)]
    pub tokenizer: TokenizerMode,
}

#[derive(Debug, Args, Serialize)]
pub struct AlphaArgs {
    #[arg(long)]
    pub target: ModelSpec,
    #[arg(long)]
    pub draft: ModelSpec,
    #[arg(long, default_value_t = 10_000)]
    pub n_tokens: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lenience: f64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Score this text instead of target samples.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TokenizerMode::Auto)]
    pub tokenizer: TokenizerMode,
}

/// Outcome of a command that ran to completion.
pub enum Verdict {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let args = match config_file::expand(std::env::args().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let matches = Cli::command().args_override_self(true).get_matches_from(args);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let seed = cli.seed;
    let result = match &cli.command {
        Command::Train(a) => commands::train(a, seed),
        Command::Decode(a) => commands::decode(a, seed),
        Command::Verify(a) => commands::verify(a, seed),
        Command::Sweep(a) => commands::sweep(a, seed),
        Command::Simulate(a) => commands::simulate(a, seed),
        Command::Beam(a) => commands::beam(a, seed),
        Command::Alpha(a) => commands::alpha(a, seed),
    };
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
