//! `disco`: the pipeline as subcommands.
//!
//! Settings come from built-in defaults, then `--config <file.json>`, then
//! flags. Exit codes: 0 ok, 1 usage, 2 data, 3 backend.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "disco", version, about = "Disfluent in-car dialog corpus toolkit")]
pub struct Cli {
    /// JSON pipeline config. `${VAR}` references are read from the environment.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Print failures as a JSON envelope on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate scenario descriptions per domain.
    Scenarios(ScenariosArgs),
    /// Simulate one dialog per scenario.
    Simulate(SimulateArgs),
    /// Add post-hoc disfluencies to driver turns, or undo them.
    Inject(InjectArgs),
    /// Re-run the rule-based tagger over driver turns or a single utterance.
    Tag(TagArgs),
    /// Corpus-level metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Draw an evaluation sample.
    Sample(SampleArgs),
    /// Build a blind pairwise annotation session from two aligned samples.
    Pair(PairArgs),
    /// Summarize a rating log.
    Aggregate(AggregateArgs),
    /// Select the in-car subset of an external dataset.
    Filter(FilterArgs),
    /// Score model generations with BLEU-1..4, ROUGE-L and METEOR.
    Score(ScoreArgs),
    /// Check a corpus against the schema.
    Validate(ValidateArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct SeedArg {
    /// Seed for every random choice in this stage.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BackendArgs {
    /// Backend kind.
    #[arg(long, value_enum)]
    pub backend: Option<BackendFlag>,
    /// Base URL of an OpenAI-compatible API (http backend).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent with each request.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable that holds the bearer token.
    #[arg(long, value_name = "VAR")]
    pub auth_env: Option<String>,
    /// Concurrent requests allowed against the backend.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendFlag {
    Mock,
    Http,
}

#[derive(Args, Debug)]
pub struct ScenariosArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Domain to generate for; repeatable. Default: all seven.
    #[arg(long = "domain")]
    pub domains: Vec<String>,
    /// Unique scenarios per domain.
    #[arg(long)]
    pub count: Option<usize>,
    /// Scenarios requested per backend call (1..=25).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Directory of `<domain>.json` few-shot banks.
    #[arg(long)]
    pub fewshot_dir: Option<PathBuf>,
    /// Output JSONL, one scenario per line.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Scenario JSONL from `disco scenarios`.
    pub scenarios: PathBuf,
    /// Output corpus JSONL.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Turn-count schedule: `stratified`, `uniform`, or a fixed count.
    #[arg(long)]
    pub lengths: Option<String>,
    /// Prior turns shown to each role.
    #[arg(long)]
    pub history_window: Option<usize>,
    #[arg(long)]
    pub driver_temperature: Option<f64>,
    #[arg(long)]
    pub ai_temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Directory of role prompt templates.
    #[arg(long)]
    pub prompts_dir: Option<PathBuf>,
    /// Directory of lexicon files for the tagger.
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InjectArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    /// Input corpus JSONL.
    pub input: PathBuf,
    /// Output corpus JSONL.
    pub output: PathBuf,
    /// Probability that a driver turn is modified.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Comma-separated ops: repetition, replacement, restart.
    #[arg(long, value_delimiter = ',')]
    pub ops: Vec<String>,
    /// Probability of an interregnum cue on replacements.
    #[arg(long)]
    pub cue_probability: Option<f64>,
    /// Undo a previous injection using the traces stored in the corpus.
    #[arg(long, conflicts_with_all = ["rate", "ops", "cue_probability"])]
    pub revert: bool,
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TagArgs {
    /// Input corpus JSONL.
    #[arg(required_unless_present = "text")]
    pub input: Option<PathBuf>,
    /// Output corpus JSONL (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Tag one utterance and print its spans.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum MetricsCommand {
    /// Distinct-1..n over one or more corpora, one column each.
    Distinct(DistinctArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeakerFilter {
    All,
    Driver,
    CarAi,
}

#[derive(Args, Debug)]
pub struct DistinctArgs {
    /// Highest n-gram order.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Which turns count as utterances.
    #[arg(long, value_enum, default_value_t = SpeakerFilter::All)]
    pub speaker: SpeakerFilter,
    /// Keep case when tokenizing.
    #[arg(long)]
    pub keep_case: bool,
    /// Corpus JSONL files.
    #[arg(required = true)]
    pub corpora: Vec<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// 140 dialogs stratified by domain and length.
    Stratified,
    /// 100/20/20 from train/valid/test.
    External,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, value_enum, default_value_t = SampleMode::Stratified)]
    pub mode: SampleMode,
    /// Corpus to sample (stratified mode).
    #[arg(required_if_eq("mode", "stratified"))]
    pub input: Option<PathBuf>,
    /// Train split corpus (external mode).
    #[arg(long, required_if_eq("mode", "external"))]
    pub train: Option<PathBuf>,
    #[arg(long, required_if_eq("mode", "external"))]
    pub valid: Option<PathBuf>,
    #[arg(long, required_if_eq("mode", "external"))]
    pub test: Option<PathBuf>,
    /// Output corpus JSONL.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    /// First sample (corpus JSONL).
    pub first: PathBuf,
    /// Second sample, index-aligned with the first.
    pub second: PathBuf,
    /// Evaluator ids, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub evaluators: Vec<String>,
    /// Display names of the two sources (default: file stems).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub sources: Vec<String>,
    /// Session id to request from the service.
    #[arg(long)]
    pub session_id: Option<String>,
    /// Output session spec JSON, ready to POST to /sessions.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    /// Rating log (ratings.jsonl from the annotation store).
    pub ratings: PathBuf,
    /// Only records from this session.
    #[arg(long)]
    pub session: Option<String>,
    /// z multiplier for the confidence half-width.
    #[arg(long)]
    pub ci_z: Option<f64>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalFormat {
    /// MultiWOZ 2.2 / SGD layout.
    SchemaGuided,
    Kvret,
    /// Already in corpus JSONL; no service labels.
    Jsonl,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleFlag {
    All,
    Any,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[command(flatten)]
    pub seed: SeedArg,
    /// Dataset file or directory.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ExternalFormat::SchemaGuided)]
    pub format: ExternalFormat,
    /// Allowed services, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub whitelist: Vec<String>,
    /// Keep at most this many dialogs.
    #[arg(long, default_value_t = 220)]
    pub cap: usize,
    /// Whether all or any of a dialog's services must be allowed.
    #[arg(long, value_enum, default_value_t = RuleFlag::All)]
    pub rule: RuleFlag,
    /// Keep only this fraction of the filtered set (rounded).
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Output corpus JSONL.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Generation JSONL: `{"context", "reference", "hypothesis"}` per line.
    pub generations: PathBuf,
    /// Highest BLEU order.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Disable add-k smoothing of BLEU precisions.
    #[arg(long)]
    pub no_smoothing: bool,
    /// Average sentence BLEU instead of pooling counts.
    #[arg(long)]
    pub sentence_bleu: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Corpus JSONL.
    pub input: PathBuf,
    /// Report non-standard turn counts as warnings.
    #[arg(long)]
    pub lenient: bool,
    /// Print at most this many violations.
    #[arg(long, default_value_t = 50)]
    pub show: usize,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Directory for session manifests and the rating log.
    #[arg(long)]
    pub root: PathBuf,
    /// Built annotator UI to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let msg = msg.trim_end().strip_prefix("error: ").unwrap_or(msg.trim_end());
            return CliError::Usage(msg.to_string()).report(json_errors);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(json_errors),
    }
}
