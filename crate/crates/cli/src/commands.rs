use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use disco_core::annotation::{read_rating_log, AnnotationStore, EvalMode, SessionItem, SessionSpec};
use disco_core::backend::{build_backend, BackendKind};
use disco_core::config::PipelineConfig;
use disco_core::corpus::{read_corpus, validate_corpus, write_corpus, Severity, ValidationPolicy};
use disco_core::disfluency::{inject_corpus, revert_injection, tag_disfluencies, InjectOp, InjectionPlan, SpanSource};
use disco_core::eval::{
    aggregate_likert, aggregate_pairwise, filter_incar_subset, pair_for_comparison,
    pairwise_majority, read_kvret, read_schema_guided, sample_discodrive, sample_external, split_fraction,
    EvalError, LabeledDialog, RatingRecord, RatingValue, ServiceRule, DEFAULT_WHITELIST,
};
use disco_core::metrics::{corpus_report, distinct_n, parse_generations, BleuMode, Smoothing};
use disco_core::scenario::{generate_scenarios, FewShotBank};
use disco_core::sim::{generate_corpus, LengthSchedule, PromptTemplates};
use disco_core::text::metric_tokens;
use disco_core::{Corpus, Dialog, DomainTag, LexiconSet, Scenario, Speaker};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::*;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Scenarios(a) => scenarios(cfg, a),
        Command::Simulate(a) => simulate(cfg, a),
        Command::Inject(a) => inject(cfg, a),
        Command::Tag(a) => tag(cfg, a),
        Command::Metrics(MetricsCommand::Distinct(a)) => distinct(cfg, a),
        Command::Sample(a) => sample(cfg, a),
        Command::Pair(a) => pair(cfg, a),
        Command::Aggregate(a) => aggregate(cfg, a),
        Command::Filter(a) => filter(cfg, a),
        Command::Score(a) => score(cfg, a),
        Command::Validate(a) => validate(a),
        Command::Serve(a) => serve(cfg, a),
    }
}

/// Stochastic stages need a seed from the flag or the config file.
fn require_seed(flag: &SeedArg, cfg: &PipelineConfig, command: &str) -> Result<u64> {
    flag.seed
        .or(cfg.seed)
        .ok_or_else(|| CliError::Usage(format!("`disco {command}` is stochastic and needs --seed (or \"seed\" in the config)")))
}

fn apply_backend(cfg: &mut PipelineConfig, a: &BackendArgs) {
    let b = &mut cfg.backend;
    if let Some(kind) = a.backend {
        b.kind = match kind {
            BackendFlag::Mock => BackendKind::Mock,
            BackendFlag::Http => BackendKind::Http,
        };
    }
    if let Some(e) = &a.endpoint {
        b.endpoint_url = Some(e.clone());
    }
    if let Some(m) = &a.model {
        b.model_name = m.clone();
    }
    if let Some(v) = &a.auth_env {
        b.auth_token_env = Some(v.clone());
    }
    if let Some(n) = a.max_in_flight {
        b.max_in_flight = n;
    }
}

fn lexicons(cfg: &PipelineConfig, flag: &Option<PathBuf>) -> Result<LexiconSet> {
    match flag.as_ref().or(cfg.paths.lexicon_dir.as_ref()) {
        Some(dir) => Ok(LexiconSet::load_dir(dir)?),
        None => Ok(LexiconSet::bundled()),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        _ => Ok(()),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    create_parent(path)?;
    Ok(write_corpus(corpus, path)?)
}

fn scenarios(mut cfg: PipelineConfig, a: ScenariosArgs) -> Result<()> {
    let seed = require_seed(&a.seed, &cfg, "scenarios")?;
    apply_backend(&mut cfg, &a.backend);
    if !a.domains.is_empty() {
        cfg.domains = a
            .domains
            .iter()
            .map(|d| d.parse::<DomainTag>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_>>()?;
    }
    if let Some(n) = a.count {
        cfg.scenarios_per_domain = n;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if a.fewshot_dir.is_some() {
        cfg.paths.fewshot_dir = a.fewshot_dir.clone();
    }
    cfg.validate()?;
    let backend = build_backend(&cfg.backend)?;
    let mut out = Vec::new();
    for domain in &cfg.domains {
        let bank = match &cfg.paths.fewshot_dir {
            Some(dir) => FewShotBank::load(dir, *domain)?,
            None => FewShotBank::bundled(*domain),
        };
        let s = generate_scenarios(
            backend.as_ref(),
            &bank,
            cfg.scenarios_per_domain,
            disco_core::rng::derive_seed(seed, domain.as_str()),
            cfg.batch_size,
        )?;
        eprintln!("{}: {} scenarios", domain.as_str(), s.len());
        for sc in s {
            out.extend(serde_json::to_vec(&sc).expect("scenarios serialize"));
            out.push(b'\n');
        }
    }
    write_bytes(&a.output, &out)?;
    eprintln!("wrote {} scenarios to {}", out.iter().filter(|&&b| b == b'\n').count(), a.output.display());
    Ok(())
}

fn read_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let f = fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(CliError::data)?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Scenario = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(s);
    }
    Ok(out)
}

fn parse_lengths(s: &str) -> Result<LengthSchedule> {
    match s {
        "stratified" => Ok(LengthSchedule::Stratified),
        "uniform" => Ok(LengthSchedule::Uniform),
        n => n
            .parse()
            .map(LengthSchedule::Fixed)
            .map_err(|_| CliError::Usage(format!("--lengths must be stratified, uniform, or a turn count; got `{n}`"))),
    }
}

fn simulate(mut cfg: PipelineConfig, a: SimulateArgs) -> Result<()> {
    let seed = require_seed(&a.seed, &cfg, "simulate")?;
    apply_backend(&mut cfg, &a.backend);
    let plan = &mut cfg.generation;
    plan.seed = seed;
    if let Some(l) = &a.lengths {
        plan.lengths = parse_lengths(l)?;
    }
    if let Some(w) = a.history_window {
        plan.history_window = w;
    }
    if let Some(t) = a.driver_temperature {
        plan.driver_temperature = t;
    }
    if let Some(t) = a.ai_temperature {
        plan.ai_temperature = t;
    }
    if let Some(m) = a.max_tokens {
        plan.max_tokens = m;
    }
    cfg.validate()?;
    let templates = match a.prompts_dir.as_ref().or(cfg.paths.prompts_dir.as_ref()) {
        Some(dir) => PromptTemplates::load_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?,
        None => PromptTemplates::default(),
    };
    let lex = lexicons(&cfg, &a.lexicon_dir)?;
    let scenarios = read_scenarios(&a.scenarios)?;
    let backend = build_backend(&cfg.backend)?;
    let outcome = generate_corpus(backend.as_ref(), &templates, &lex, &scenarios, &cfg.generation)?;
    for f in &outcome.failures {
        eprintln!("scenario {} failed at turn {}: {}", f.scenario_id, f.turn, f.message);
    }
    if outcome.corpus.is_empty() && !outcome.failures.is_empty() {
        return Err(CliError::Backend(format!("all {} scenarios failed", outcome.failures.len())));
    }
    save_corpus(&outcome.corpus, &a.output)?;
    eprintln!(
        "wrote {} dialogs to {} ({} failed)",
        outcome.corpus.len(),
        a.output.display(),
        outcome.failures.len()
    );
    Ok(())
}

fn inject(cfg: PipelineConfig, a: InjectArgs) -> Result<()> {
    let corpus = read_corpus(&a.input)?;
    if a.revert {
        let restored = revert_injection(&corpus)?;
        save_corpus(&restored, &a.output)?;
        eprintln!("reverted {} dialogs", restored.len());
        return Ok(());
    }
    let seed = require_seed(&a.seed, &cfg, "inject")?;
    let mut plan = cfg.injection.clone().unwrap_or_else(|| InjectionPlan::new(0.5, InjectOp::ALL));
    if !a.ops.is_empty() {
        let ops: Vec<InjectOp> = a
            .ops
            .iter()
            .map(|o| o.trim().parse().map_err(CliError::Usage))
            .collect::<Result<_>>()?;
        plan.ops = ops.into_iter().map(|op| (op, 1.0)).collect();
    }
    if let Some(r) = a.rate {
        plan.rate = r;
    }
    if let Some(c) = a.cue_probability {
        plan.cue_probability = c;
    }
    let lex = lexicons(&cfg, &a.lexicon_dir)?;
    let (out, stats) = inject_corpus(&corpus, &plan, &lex, seed)?;
    save_corpus(&out, &a.output)?;
    let per_op: Vec<String> = stats.modified.iter().map(|(op, n)| format!("{}={n}", op.as_str())).collect();
    eprintln!(
        "modified {} of {} driver turns ({})",
        stats.modified_total(),
        stats.driver_turns,
        per_op.join(", ")
    );
    Ok(())
}

fn tag(cfg: PipelineConfig, a: TagArgs) -> Result<()> {
    let lex = lexicons(&cfg, &a.lexicon_dir)?;
    if let Some(text) = &a.text {
        for s in tag_disfluencies(text, &lex) {
            println!("{:<12} {:>4}..{:<4} {:?}", s.kind.as_str(), s.start, s.end, s.slice(text));
        }
        return Ok(());
    }
    let input = a.input.as_ref().expect("clap enforces input or --text");
    let mut corpus = read_corpus(input)?;
    let mut total = 0usize;
    for d in &mut corpus.dialogs {
        for t in d.turns.iter_mut().filter(|t| t.speaker == Speaker::Driver) {
            t.disfluency_spans.retain(|s| s.source == SpanSource::Injected);
            let fresh: Vec<_> = tag_disfluencies(&t.text, &lex)
                .into_iter()
                .filter(|s| !t.disfluency_spans.iter().any(|o| o.overlaps(s)))
                .collect();
            total += fresh.len();
            t.disfluency_spans.extend(fresh);
            t.disfluency_spans.sort_by_key(|s| (s.start, s.end));
        }
    }
    match &a.output {
        Some(p) => save_corpus(&corpus, p)?,
        None => {
            let bytes = disco_core::corpus::corpus_to_jsonl(&corpus)?;
            std::io::stdout().write_all(&bytes).map_err(CliError::data)?;
        }
    }
    eprintln!("tagged {total} spans");
    Ok(())
}

fn utterances(corpus: &Corpus, who: SpeakerFilter, lowercase: bool) -> Vec<Vec<String>> {
    corpus
        .dialogs
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| match who {
            SpeakerFilter::All => true,
            SpeakerFilter::Driver => t.speaker == Speaker::Driver,
            SpeakerFilter::CarAi => t.speaker == Speaker::CarAi,
        })
        .map(|t| metric_tokens(&t.text, lowercase))
        .collect()
}

fn distinct(_cfg: PipelineConfig, a: DistinctArgs) -> Result<()> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut columns = Vec::new();
    for path in &a.corpora {
        let corpus = read_corpus(path)?;
        let utts = utterances(&corpus, a.speaker, !a.keep_case);
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let vals = (1..=a.n)
            .map(|n| distinct_n(&utts, n).map_err(|e| CliError::data(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        columns.push((name, vals));
    }
    let widths: Vec<usize> = columns.iter().map(|(n, _)| n.len().max(8)).collect();
    let mut out = format!("{:<8}", "N-Gram");
    for ((name, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {name:>w$}"));
    }
    out.push('\n');
    for n in 0..a.n {
        out.push_str(&format!("{:<8}", format!("{}-gram", n + 1)));
        for ((_, vals), w) in columns.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$.4}", vals[n]));
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn tag_split(mut d: Dialog, split: &str) -> Dialog {
    d.extra.insert("split".into(), json!(split));
    d
}

fn sample(cfg: PipelineConfig, a: SampleArgs) -> Result<()> {
    let seed = require_seed(&a.seed, &cfg, "sample")?;
    let mut out = match a.mode {
        SampleMode::Stratified => {
            let path = a
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("stratified sampling needs an input corpus".into()))?;
            let corpus = read_corpus(path)?;
            Corpus::new(sample_discodrive(&corpus.dialogs, seed)?)
        }
        SampleMode::External => {
            let read = |p: &Option<PathBuf>, split: &str| -> Result<Vec<Dialog>> {
                let p = p
                    .as_ref()
                    .ok_or_else(|| CliError::Usage(format!("external sampling needs --{split}")))?;
                let c = read_corpus(p)?;
                Ok(c.dialogs.into_iter().map(|d| tag_split(d, split)).collect())
            };
            let (tr, va, te) = (read(&a.train, "train")?, read(&a.valid, "valid")?, read(&a.test, "test")?);
            Corpus::new(sample_external(&tr, &va, &te, seed)?)
        }
    };
    out.provenance.insert("sample_seed".into(), json!(seed));
    out.provenance.insert(
        "sample_mode".into(),
        json!(match a.mode {
            SampleMode::Stratified => "stratified",
            SampleMode::External => "external",
        }),
    );
    save_corpus(&out, &a.output)?;
    eprintln!("sampled {} dialogs", out.len());
    Ok(())
}

fn pair(cfg: PipelineConfig, a: PairArgs) -> Result<()> {
    let seed = require_seed(&a.seed, &cfg, "pair")?;
    let first = read_corpus(&a.first)?.dialogs;
    let second = read_corpus(&a.second)?.dialogs;
    let pairs = pair_for_comparison(&first, &second, seed)?;
    let stem = |p: &Path| p.file_stem().map_or_else(|| "source".to_string(), |s| s.to_string_lossy().into_owned());
    let sources = match a.sources.as_slice() {
        [x, y] => [x.clone(), y.clone()],
        _ => [stem(&a.first), stem(&a.second)],
    };
    let spec = SessionSpec {
        mode: EvalMode::Pairwise,
        items: pairs
            .into_iter()
            .map(|p| SessionItem::Pair { id: p.pair_id, a: p.shown_a, b: p.shown_b, swapped: p.swapped })
            .collect(),
        evaluators: a.evaluators.clone(),
        seed,
        sources: Some(sources),
        id: a.session_id.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&spec).expect("specs serialize");
    bytes.push(b'\n');
    write_bytes(&a.output, &bytes)?;
    eprintln!("wrote {} pairs to {}", spec.items.len(), a.output.display());
    Ok(())
}

fn aggregate(mut cfg: PipelineConfig, a: AggregateArgs) -> Result<()> {
    if let Some(z) = a.ci_z {
        cfg.aggregation.ci_z = z;
    }
    let records: Vec<RatingRecord> = read_rating_log(&a.ratings)?
        .into_iter()
        .filter(|(s, _)| a.session.as_ref().is_none_or(|want| want == s))
        .map(|(_, r)| r)
        .collect();
    if records.is_empty() {
        return Err(CliError::Data("no rating records".into()));
    }
    // Metrics with a single value are reported, not fatal.
    let mut likert = BTreeMap::new();
    let mut insufficient = Vec::new();
    let mut by_metric: BTreeMap<&str, Vec<RatingRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| matches!(r.value, RatingValue::Likert(_))) {
        by_metric.entry(&r.metric).or_default().push(r.clone());
    }
    for (m, rs) in &by_metric {
        match aggregate_likert(rs, &cfg.aggregation) {
            Ok(s) => likert.extend(s),
            Err(EvalError::InsufficientData { .. }) => insufficient.push(m.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    let raw = aggregate_pairwise(&records);
    let majority = pairwise_majority(&records);
    if a.json {
        let v = json!({
            "records": records.len(),
            "likert": likert,
            "likert_rendered": likert.iter().map(|(k, v)| (k.clone(), v.to_string())).collect::<BTreeMap<_, _>>(),
            "insufficient": insufficient,
            "pairwise": raw,
            "pairwise_majority": majority,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
        return Ok(());
    }
    if !likert.is_empty() {
        println!("{:<22} {:>5}  mean (±95% CI)", "metric", "n");
        for (m, s) in &likert {
            println!("{m:<22} {:>5}  {s}", s.n);
        }
    }
    for m in &insufficient {
        println!("{m:<22} {:>5}  (too few ratings)", 1);
    }
    if !raw.is_empty() {
        println!("{:<22} {:>6} {:>6} {:>8} {:>8} {:>6}", "pairwise", "A", "B", "maj. A", "maj. B", "ties");
        for (m, c) in &raw {
            let mj = majority.get(m).copied().unwrap_or_default();
            println!("{m:<22} {:>6} {:>6} {:>8} {:>8} {:>6}", c.a, c.b, mj.a, mj.b, mj.ties);
        }
    }
    Ok(())
}

fn filter(cfg: PipelineConfig, a: FilterArgs) -> Result<()> {
    let seed = require_seed(&a.seed, &cfg, "filter")?;
    let dialogs: Vec<LabeledDialog> = match a.format {
        ExternalFormat::SchemaGuided => read_schema_guided(&a.input)?,
        ExternalFormat::Kvret => read_kvret(&a.input)?,
        ExternalFormat::Jsonl => read_corpus(&a.input)?
            .dialogs
            .into_iter()
            .map(|d| LabeledDialog {
                services: d
                    .extra
                    .get("services")
                    .and_then(Value::as_array)
                    .map(|v| v.iter().filter_map(Value::as_str).map(str::to_string).collect())
                    .unwrap_or_default(),
                id: d.id,
                turns: d.turns,
            })
            .collect(),
    };
    let whitelist: Vec<&str> = if a.whitelist.is_empty() {
        DEFAULT_WHITELIST.to_vec()
    } else {
        a.whitelist.iter().map(String::as_str).collect()
    };
    let rule = match a.rule {
        RuleFlag::All => ServiceRule::All,
        RuleFlag::Any => ServiceRule::Any,
    };
    let report = filter_incar_subset(&dialogs, &whitelist, a.cap, rule, seed);
    let mut kept = report.kept.clone();
    if let Some(f) = a.fraction {
        kept = split_fraction(&kept, f, seed)?;
    }
    let mut corpus = Corpus::new(kept.iter().map(LabeledDialog::to_dialog).collect());
    corpus.provenance.insert("filter_seed".into(), json!(seed));
    corpus.provenance.insert("whitelist".into(), json!(whitelist));
    save_corpus(&corpus, &a.output)?;
    eprintln!(
        "{} dialogs read, {} qualifying, {} excluded, {} unlabeled; kept {}",
        dialogs.len(),
        report.qualifying,
        report.excluded,
        report.unlabeled,
        corpus.len()
    );
    Ok(())
}

fn score(mut cfg: PipelineConfig, a: ScoreArgs) -> Result<()> {
    let p = &mut cfg.metrics;
    if let Some(n) = a.max_n {
        p.max_n = n;
    }
    if a.no_smoothing {
        p.bleu_smoothing = Smoothing::None;
    }
    if a.sentence_bleu {
        p.bleu_mode = BleuMode::SentenceAverage;
    }
    let f = fs::File::open(&a.generations).map_err(|e| CliError::data(format!("{}: {e}", a.generations.display())))?;
    let records = parse_generations(BufReader::new(f))?;
    let report = corpus_report(&records, &cfg.metrics)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
    } else {
        print!("{}", report.render());
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let corpus = read_corpus(&a.input)?;
    let policy = if a.lenient { ValidationPolicy::LENIENT } else { ValidationPolicy::STRICT };
    let reports = validate_corpus(&corpus, policy);
    let mut errors = 0usize;
    let mut warnings = 0usize;
    let mut shown = 0usize;
    for r in &reports {
        for v in &r.violations {
            match v.severity {
                Severity::Error => errors += 1,
                Severity::Warning => warnings += 1,
            }
            if shown < a.show {
                shown += 1;
                let turn = v.turn.map_or(String::new(), |t| format!(" turn {t}"));
                println!("{}{turn}: {:?} {:?}: {}", r.dialog_id, v.severity, v.code, v.message);
            }
        }
    }
    println!("{} dialogs, {errors} violations, {warnings} warnings", corpus.len());
    if errors > 0 {
        return Err(CliError::Data(format!("{errors} violations in {}", a.input.display())));
    }
    Ok(())
}

fn serve(cfg: PipelineConfig, a: ServeArgs) -> Result<()> {
    let store = Arc::new(AnnotationStore::open(&a.root)?);
    let rt = tokio::runtime::Runtime::new().map_err(CliError::data)?;
    rt.block_on(disco_server::serve(a.addr, store, a.static_dir, cfg.aggregation))
        .map_err(|e| CliError::Data(format!("server: {e}")))
}
