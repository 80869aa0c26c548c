//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use disco_core::annotation::{
    metric_names, read_rating_log, AnnotationError, AnnotationStore, EvalMode, SessionItem,
    SessionSpec, RATINGS_FILE,
};
use disco_core::backend::{Backend, BackendError, ChatRequest, MockBackend};
use disco_core::corpus::{corpus_to_jsonl, validate_corpus, ValidationPolicy, TURN_LENGTHS};
use disco_core::disfluency::{
    inject_repetition, inject_replacement, inject_restart, repeat_span, replace_at, restart_at,
    tag_disfluencies, CuePlacement, ReplacementChoice,
};
use disco_core::eval::{
    aggregate_likert, aggregate_pairwise, filter_incar_subset, sample_discodrive, sample_external,
    split_fraction, AggregationParams, Choice, EvalError, LabeledDialog, RatingRecord, RatingValue,
    ServiceRule, DEFAULT_WHITELIST,
};
use disco_core::metrics::{
    bleu, distinct_n, meteor, rouge_l, BleuMode, MetricError, MetricParams, Smoothing,
};
use disco_core::rng::derive_seed;
use disco_core::scenario::{generate_scenarios, FewShotBank, DEFAULT_BATCH};
use disco_core::sim::{generate_corpus, GenerationPlan, PromptTemplates};
use disco_core::{Dialog, DisfluencyType, DomainTag, LexiconSet, Scenario, Speaker, Turn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= TOL, "{what}: got {a}, oracle {b}");
}

fn toks(s: &str) -> Vec<String> {
    oracle::words(&s.to_lowercase())
}

const HAND_SUITE: [(&str, &str); 20] = [
    (
        "turn on the air conditioning",
        "turn on the air conditioning",
    ),
    (
        "show me the nearest gas station",
        "show me the closest gas station",
    ),
    ("the the the the", "the cat is on the mat"),
    ("driving to work", "drive to work"),
    ("check the tire pressures", "check tire pressure"),
    ("hello", "hello"),
    ("hello", "goodbye"),
    ("", "play some music"),
    ("music some play", "play some music"),
    (
        "navigate to the nearest charging station please",
        "please navigate to the closest charging station",
    ),
    (
        "what is the weather like tomorrow in boston",
        "what will the weather be in boston tomorrow",
    ),
    (
        "set the temperature to seventy two degrees",
        "set temperature to 72 degrees",
    ),
    ("call mom", "please call my mom on her cell phone now"),
    (
        "i think i think we should take the next exit",
        "we should take the next exit",
    ),
    ("reminds reminding reminder", "remind reminded reminders"),
    (
        "find a quiet restaurant nearby with parking",
        "find a nearby restaurant with parking that is quiet",
    ),
    (
        "turn left turn left turn right",
        "turn right then turn left",
    ),
    ("a b c d e f g h", "h g f e d c b a"),
    ("open the sunroof halfway", "close the sunroof completely"),
    (
        "how long until we arrive at the hotel",
        "how long until we get to the hotel",
    ),
];

fn distinct_agrees(utts: &[Vec<String>], n: usize) {
    match (distinct_n(utts, n), oracle::distinct(utts, n)) {
        (Ok(v), Some(o)) => assert!(v == o, "distinct-{n}: got {v}, oracle {o} on {utts:?}"),
        (Err(MetricError::Undefined(_)), None) => {}
        (got, want) => panic!("distinct-{n}: got {got:?}, oracle {want:?} on {utts:?}"),
    }
}

fn metric_oracle_equivalence() -> String {
    let hyps: Vec<Vec<String>> = HAND_SUITE.iter().map(|(h, _)| toks(h)).collect();
    let refs: Vec<Vec<String>> = HAND_SUITE.iter().map(|(_, r)| toks(r)).collect();
    let p = MetricParams::default();
    let mut checks = 0;
    for (i, (h, r)) in hyps.iter().zip(&refs).enumerate() {
        for smooth in [true, false] {
            let params = MetricParams {
                bleu_smoothing: if smooth {
                    Smoothing::AddK
                } else {
                    Smoothing::None
                },
                ..p
            };
            let got = bleu(std::slice::from_ref(h), std::slice::from_ref(r), &params).unwrap().scores;
            let want = oracle::bleu_corpus(std::slice::from_ref(h), std::slice::from_ref(r), 4, smooth);
            for n in 0..4 {
                close(
                    got[n],
                    want[n],
                    &format!("case {i} BLEU-{} smooth={smooth}", n + 1),
                );
                checks += 1;
            }
        }
        close(
            rouge_l(h, r, p.rouge_beta),
            oracle::rouge_l(h, r, 1.0),
            &format!("case {i} ROUGE-L"),
        );
        close(
            meteor(h, r, &p).score,
            oracle::meteor(h, r, p.meteor_alpha, p.meteor_beta, p.meteor_gamma),
            &format!("case {i} METEOR"),
        );
        for n in 1..=4 {
            distinct_agrees(std::slice::from_ref(h), n);
        }
        checks += 6;
    }
    for smooth in [true, false] {
        for mode in [BleuMode::Corpus, BleuMode::SentenceAverage] {
            let params = MetricParams {
                bleu_smoothing: if smooth {
                    Smoothing::AddK
                } else {
                    Smoothing::None
                },
                bleu_mode: mode,
                ..p
            };
            let got = bleu(&hyps, &refs, &params).unwrap().scores;
            let want = match mode {
                BleuMode::Corpus => oracle::bleu_corpus(&hyps, &refs, 4, smooth),
                BleuMode::SentenceAverage => oracle::bleu_sentence_avg(&hyps, &refs, 4, smooth),
            };
            for n in 0..4 {
                close(
                    got[n],
                    want[n],
                    &format!("suite BLEU-{} {mode:?} smooth={smooth}", n + 1),
                );
                checks += 1;
            }
        }
    }
    for n in 1..=4 {
        distinct_agrees(&hyps, n);
        distinct_agrees(&refs, n);
        checks += 2;
    }
    format!("{} pairs, {checks} comparisons", HAND_SUITE.len())
}

fn trivial_anchors() -> String {
    let p = MetricParams::default();
    let sentence = "please find the nearest charging station on my route today";
    let words = toks(sentence);
    for (i, (h, _)) in HAND_SUITE
        .iter()
        .enumerate()
        .filter(|(_, (h, _))| !h.is_empty())
    {
        let h = toks(h);
        let scores = bleu(std::slice::from_ref(&h), std::slice::from_ref(&h), &p).unwrap().scores;
        for (n, s) in scores.iter().enumerate() {
            assert!(
                s * 100.0 == 100.0,
                "case {i}: BLEU-{} = {}",
                n + 1,
                s * 100.0
            );
        }
        assert!(
            rouge_l(&h, &h, p.rouge_beta) * 100.0 == 100.0,
            "case {i}: ROUGE-L"
        );
    }
    for len in 1..=10 {
        let h = words[..len].to_vec();
        let got = meteor(&h, &h, &p).score * 100.0;
        let want = 100.0 * (1.0 - 0.5 * (1.0 / len as f64).powi(3));
        assert!(
            got == want,
            "METEOR(h,h) for |h|={len}: got {got}, want {want}"
        );
    }
    "BLEU/ROUGE-L = 100 on identical text, METEOR exact for |h| = 1..10".into()
}

fn distinct_brute_force() -> String {
    let vocab = ["go", "left", "right", "stop", "now", "the"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut undefined = 0;
    for _ in 0..50 {
        let utts: Vec<Vec<String>> = (0..rng.gen_range(0..=10))
            .map(|_| {
                (0..rng.gen_range(0..=12))
                    .map(|_| vocab.choose(&mut rng).unwrap().to_string())
                    .collect()
            })
            .collect();
        for n in 1..=4 {
            if oracle::distinct(&utts, n).is_none() {
                undefined += 1;
            }
            distinct_agrees(&utts, n);
        }
    }
    format!("50 corpora x 4 orders, {undefined} undefined cases agreed")
}

const COVERED: [&str; 8] = [
    "closest",
    "route",
    "restaurant",
    "music",
    "show",
    "find",
    "place",
    "fast",
];
const PLAIN: [&str; 12] = [
    "please", "me", "the", "a", "to", "near", "here", "now", "my", "we", "can", "you",
];

fn random_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=12);
    let mut words: Vec<String> = (0..n)
        .map(|_| {
            let w = if rng.gen_bool(0.3) {
                COVERED.choose(rng)
            } else {
                PLAIN.choose(rng)
            };
            w.unwrap().to_string()
        })
        .collect();
    let k = rng.gen_range(0..n);
    words[k] = COVERED.choose(rng).unwrap().to_string();
    if rng.gen_bool(0.3) {
        words[0] = capitalize(&words[0]);
    }
    if n > 3 && rng.gen_bool(0.3) {
        words[1].push(',');
    }
    let mut s = words.join(" ");
    s.push_str(["", ".", "?", "!"].choose(rng).unwrap());
    s
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn injector_roundtrip() -> String {
    let lex = LexiconSet::bundled();
    let mut counts = [0usize; 3];
    for trial in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial, "roundtrip"));
        let original = random_sentence(&mut rng);
        let second = random_sentence(&mut rng);
        let placement = if trial % 2 == 0 {
            CuePlacement::AfterSubstitute
        } else {
            CuePlacement::BeforeSubstitute
        };
        let results = [
            inject_repetition(&original, &mut rng),
            inject_replacement(&original, &lex, 0.8, placement, &mut rng),
            inject_restart(&original, &second, &mut rng),
        ];
        for (op, r) in results.into_iter().enumerate() {
            let (out, trace) =
                r.unwrap_or_else(|e| panic!("trial {trial} op {op} on {original:?}: {e}"));
            assert_ne!(
                out, original,
                "trial {trial} op {op} left the text unchanged"
            );
            assert_eq!(
                trace.apply().unwrap(),
                out,
                "trial {trial} op {op}: replay differs"
            );
            assert_eq!(
                trace.invert(&out).unwrap(),
                original,
                "trial {trial} op {op}: inverse differs"
            );
            counts[op] += 1;
        }
    }
    format!(
        "repetition {}, replacement {}, restart {} trials",
        counts[0], counts[1], counts[2]
    )
}

fn injection_fixtures() -> String {
    let text = "will it be raining in the next 7 days.";
    let (out, trace) = repeat_span(text, 7, 2).unwrap();
    assert_eq!(out, "will it be raining in the next 7 days 7 days.");
    assert_eq!(trace.invert(&out).unwrap(), text);

    let text = "show me the closest location where i can get chinese food.";
    let choice = ReplacementChoice {
        token: 6,
        substitute: "the nearest restaurant",
        cue: Some("no sorry"),
        placement: CuePlacement::AfterSubstitute,
    };
    let (out, trace) = replace_at(text, &choice).unwrap();
    assert_eq!(
        out,
        "show me the closest location where the nearest restaurant no sorry where i can get chinese food."
    );
    assert_eq!(trace.invert(&out).unwrap(), text);

    let first = "Set a reminder that I have a lab appointment with my aunt next Wednesday at 1pm.";
    let second = "Check to see if it will be windy in brentwood the next few days.";
    let (out, trace) = restart_at(first, second, 5).unwrap();
    assert_eq!(
        out,
        "Set a reminder that I Check to see if it will be windy in brentwood the next few days."
    );
    assert_eq!(trace.invert(&out).unwrap(), first);
    "repetition, replacement and restart reproduced verbatim".into()
}

const TAGGED_EXAMPLES: [(&str, DisfluencyType); 10] = [
    (
        "I think, I think we should take the next exit.",
        DisfluencyType::Repetition,
    ),
    (
        "We could\u{2014}actually, let\u{2019}s try the other route.",
        DisfluencyType::FalseStart,
    ),
    (
        "Can you, um, check the tire pressure?",
        DisfluencyType::Filler,
    ),
    (
        "I think we\u{2019}ll be there... um, soon.",
        DisfluencyType::Pause,
    ),
    (
        "Turn left\u{2014}no, wait, I mean right.",
        DisfluencyType::Correction,
    ),
    (
        "I feel like, I feel like we\u{2019}re going in the wrong direction.",
        DisfluencyType::Repetition,
    ),
    (
        "I was planning to\u{2014}actually, wait, do we need gas first?",
        DisfluencyType::FalseStart,
    ),
    (
        "So, we\u{2019}re going to... um, the restaurant?",
        DisfluencyType::Pause,
    ),
    (
        "I\u{2019}ll pick you up at 6\u{2014}oh, no, sorry, 6:30.",
        DisfluencyType::Correction,
    ),
    (
        "Can you, um, tell me how far we are from the destination?",
        DisfluencyType::Filler,
    ),
];

const FLUENT: [&str; 20] = [
    "Turn on the air conditioning.",
    "Navigate to the nearest gas station.",
    "What is the weather forecast for tomorrow?",
    "Play my road trip playlist.",
    "How much charge is left in the battery?",
    "Find a coffee shop along the route.",
    "Call my sister when we get on the highway.",
    "Set the cabin temperature to seventy degrees.",
    "Is there heavy traffic on the bridge this evening?",
    "Remind me to buy milk on the way home.",
    "Open the sunroof halfway, please.",
    "How long until we reach the hotel?",
    "Read my latest text message out loud.",
    "Lower the volume a little.",
    "Show me parking garages near the stadium.",
    "Will it snow in Denver this weekend?",
    "Switch the headlights to automatic mode.",
    "What time does the museum close today?",
    "Add a stop at the pharmacy before dinner.",
    "Check whether the tires need more air.",
];

fn tagger_soundness() -> String {
    let lex = LexiconSet::bundled();
    for (text, kind) in TAGGED_EXAMPLES {
        let spans = tag_disfluencies(text, &lex);
        assert!(
            spans.iter().any(|s| s.kind == kind),
            "{text:?}: expected {kind}, got {:?}",
            spans.iter().map(|s| s.kind).collect::<Vec<_>>()
        );
    }
    for text in FLUENT {
        let spans = tag_disfluencies(text, &lex);
        assert!(spans.is_empty(), "fluent control {text:?} tagged {spans:?}");
    }
    "10 examples tagged, 20 fluent controls clean".into()
}

/// Records every request keyed by its seed, then answers with the mock.
struct Recorder {
    inner: MockBackend,
    seen: Mutex<HashMap<u64, (String, String)>>,
}

impl Backend for Recorder {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        if let Some(seed) = request.seed {
            let system = request.messages[0].content.clone();
            let user = request.messages[1].content.clone();
            self.seen.lock().unwrap().insert(seed, (system, user));
        }
        self.inner.complete(request)
    }

    fn id(&self) -> String {
        self.inner.id()
    }
}

fn history_lines(user: &str) -> usize {
    match user.split_once("Conversation so far:\n") {
        None => 0,
        Some((_, rest)) => rest.split("\n\n").next().unwrap_or("").lines().count(),
    }
}

fn pipeline_validity() -> String {
    let mock = MockBackend::new(11);
    let mut scenarios: Vec<Scenario> = Vec::new();
    for domain in DomainTag::ALL {
        let got = generate_scenarios(
            &mock,
            &FewShotBank::bundled(domain),
            72,
            derive_seed(11, domain.as_str()),
            DEFAULT_BATCH,
        )
        .unwrap();
        assert_eq!(
            got.len(),
            72,
            "{domain:?}: only {} unique scenarios",
            got.len()
        );
        scenarios.extend(got);
    }
    scenarios.truncate(500);
    let templates = PromptTemplates::default();
    let lex = LexiconSet::bundled();
    let plan = GenerationPlan {
        seed: 2024,
        ..GenerationPlan::default()
    };
    let recorder = Recorder {
        inner: MockBackend::new(11),
        seen: Mutex::new(HashMap::new()),
    };
    let outcome = generate_corpus(&recorder, &templates, &lex, &scenarios, &plan).unwrap();
    assert!(
        outcome.failures.is_empty(),
        "{} dialogs failed",
        outcome.failures.len()
    );
    let corpus = outcome.corpus;
    assert_eq!(corpus.len(), 500);

    let reports = validate_corpus(&corpus, ValidationPolicy::STRICT);
    let dirty: Vec<_> = reports
        .iter()
        .filter(|r| !r.violations.is_empty())
        .collect();
    assert!(
        dirty.is_empty(),
        "{} dialogs have violations, first: {:?}",
        dirty.len(),
        dirty[0]
    );

    let domains: BTreeSet<_> = corpus.dialogs.iter().map(|d| d.domain).collect();
    let lengths: BTreeSet<_> = corpus.dialogs.iter().map(|d| d.num_turns).collect();
    assert_eq!(domains.len(), DomainTag::ALL.len());
    assert_eq!(lengths.into_iter().collect::<Vec<_>>(), TURN_LENGTHS);

    let seen = recorder.seen.lock().unwrap();
    let mut prompts = 0;
    for d in &corpus.dialogs {
        let sim_seed = d.extra["sim_seed"].as_u64().unwrap();
        let n = d.num_turns;
        for i in 0..n {
            let (system, user) = seen
                .get(&derive_seed(sim_seed, &format!("turn/{i}")))
                .unwrap_or_else(|| panic!("{} turn {i}: no request recorded", d.id));
            let lines = history_lines(user);
            assert!(lines <= 6, "{} turn {i}: {lines} history lines", d.id);
            assert_eq!(lines, i.min(6), "{} turn {i}: window", d.id);
            let concluding = match d.turns[i].speaker {
                Speaker::Driver => system.as_str() == templates.driver_concluding.trim_end(),
                Speaker::CarAi => system.as_str() == templates.ai_concluding.trim_end(),
            };
            assert_eq!(
                concluding,
                i >= n - 2,
                "{} turn {i} of {n}: concluding={concluding}",
                d.id
            );
            prompts += 1;
        }
    }
    drop(seen);

    let first = corpus_to_jsonl(&corpus).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let again = pool
        .install(|| generate_corpus(&MockBackend::new(11), &templates, &lex, &scenarios, &plan))
        .unwrap();
    assert!(
        corpus_to_jsonl(&again.corpus).unwrap() == first,
        "second run differs"
    );
    format!(
        "500 dialogs clean, {prompts} prompts checked, {} bytes identical",
        first.len()
    )
}

fn synthetic_dialog(id: String, domain: DomainTag, num_turns: usize) -> Dialog {
    let turns = (0..num_turns)
        .map(|i| {
            let speaker = if i % 2 == 0 {
                Speaker::Driver
            } else {
                Speaker::CarAi
            };
            Turn::new(i, speaker, format!("line {i}"))
        })
        .collect();
    Dialog::new(
        id.clone(),
        Scenario::new(format!("{id}-s"), domain, "a trip"),
        turns,
    )
}

fn sampling_protocol() -> String {
    let mut corpus = Vec::new();
    for domain in DomainTag::ALL {
        for len in TURN_LENGTHS {
            for k in 0..5 {
                corpus.push(synthetic_dialog(
                    format!("{}-{len}-{k}", domain.as_str()),
                    domain,
                    len,
                ));
            }
        }
    }
    let sample = sample_discodrive(&corpus, 3).unwrap();
    assert_eq!(sample.len(), 140);
    let mut per_domain: BTreeMap<DomainTag, usize> = BTreeMap::new();
    let mut per_stratum: BTreeMap<(DomainTag, usize), usize> = BTreeMap::new();
    for d in &sample {
        *per_domain.entry(d.domain).or_default() += 1;
        *per_stratum.entry((d.domain, d.num_turns)).or_default() += 1;
    }
    assert!(
        per_domain.len() == 7 && per_domain.values().all(|&c| c == 20),
        "{per_domain:?}"
    );
    assert!(
        per_stratum.len() == 35 && per_stratum.values().all(|&c| c == 4),
        "{per_stratum:?}"
    );
    let unique: BTreeSet<_> = sample.iter().map(|d| &d.id).collect();
    assert_eq!(unique.len(), 140);

    let short: Vec<Dialog> = corpus
        .iter()
        .filter(|d| {
            !(d.domain == DomainTag::Weather && d.num_turns == 10 && d.id.ends_with(['3', '4']))
        })
        .cloned()
        .collect();
    match sample_discodrive(&short, 3) {
        Err(EvalError::Understocked {
            domain,
            num_turns: 10,
            available: 3,
            required: 4,
        }) if domain == "weather" => {}
        other => panic!("expected an understocked weather/10 stratum, got {other:?}"),
    }

    let split = |name: &str, n: usize| (0..n).map(|i| format!("{name}-{i}")).collect::<Vec<_>>();
    let (train, valid, test) = (split("train", 150), split("valid", 30), split("test", 25));
    let ext = sample_external(&train, &valid, &test, 3).unwrap();
    assert_eq!(ext.len(), 140);
    assert!(ext[..100].iter().all(|s| s.starts_with("train-")));
    assert!(ext[100..120].iter().all(|s| s.starts_with("valid-")));
    assert!(ext[120..].iter().all(|s| s.starts_with("test-")));
    match sample_external(&train, &valid[..19], &test, 3) {
        Err(EvalError::ShortSplit {
            split,
            available: 19,
            required: 20,
        }) if split == "valid" => {}
        other => panic!("expected a short valid split, got {other:?}"),
    }
    "140 = 7 x 20 = 35 x 4; external 100/20/20; understocked errors raised".into()
}

fn likert_records(metric: &str, values: &[u8]) -> Vec<RatingRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| RatingRecord {
            evaluator_id: format!("e{}", i % 3),
            item_id: format!("item-{i}"),
            metric: metric.into(),
            value: RatingValue::Likert(v),
            timestamp: None,
            seq: None,
        })
        .collect()
}

fn aggregation() -> String {
    // (values, mean, sample variance, rendered)
    let fixtures: [(&[u8], f64, f64, &str); 5] = [
        (&[1, 2, 3, 4, 5], 3.0, 2.5, "3.0 (±1.39)"),
        (&[4, 4, 4, 4], 4.0, 0.0, "4.0 (±0.00)"),
        (&[3, 5], 4.0, 2.0, "4.0 (±1.96)"),
        (&[5, 4, 4, 3, 5, 4], 25.0 / 6.0, 17.0 / 30.0, "4.2 (±0.60)"),
        (&[1, 5, 1, 5, 3, 3, 2, 4], 3.0, 18.0 / 7.0, "3.0 (±1.11)"),
    ];
    let params = AggregationParams::default();
    let mut records = Vec::new();
    for (k, (values, mean, var, rendered)) in fixtures.iter().enumerate() {
        let metric = format!("m{k}");
        let recs = likert_records(&metric, values);
        let got = &aggregate_likert(&recs, &params).unwrap()[&metric];
        let n = values.len() as f64;
        let hw = 1.96 * (var / n).sqrt();
        close(got.mean, *mean, &format!("fixture {k} mean"));
        close(got.half_width, hw, &format!("fixture {k} half-width"));
        let floats: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let (om, oh) = oracle::likert(&floats, 1.96);
        close(got.mean, om, &format!("fixture {k} oracle mean"));
        close(
            got.half_width,
            oh,
            &format!("fixture {k} oracle half-width"),
        );
        assert_eq!(got.to_string(), *rendered, "fixture {k} rendering");
        records.extend(recs);
    }
    let pooled = aggregate_likert(&records, &params).unwrap();
    assert_eq!(pooled.len(), 5);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairwise = Vec::new();
    let metrics = metric_names(EvalMode::Pairwise);
    for i in 0..97 {
        let metric = metrics[i % metrics.len()];
        let choice = if rng.gen_bool(0.6) {
            Choice::A
        } else {
            Choice::B
        };
        pairwise.push(RatingRecord {
            evaluator_id: format!("e{}", i % 4),
            item_id: format!("pair-{}", i / 4),
            metric: metric.into(),
            value: RatingValue::Choice(choice),
            timestamp: None,
            seq: None,
        });
    }
    let counts = aggregate_pairwise(&pairwise);
    for m in &metrics {
        let expected = pairwise.iter().filter(|r| r.metric == *m).count();
        let c = counts.get(*m).copied().unwrap_or_default();
        assert_eq!(c.a + c.b, expected, "pairwise counts for {m}");
    }
    "5 fixtures match, rendering ok, pairwise counts sum per metric".into()
}

fn labeled(id: String, services: &[&str]) -> LabeledDialog {
    LabeledDialog {
        id,
        services: services.iter().map(|s| s.to_string()).collect(),
        turns: vec![
            Turn::new(0, Speaker::Driver, "hi"),
            Turn::new(1, Speaker::CarAi, "hello"),
        ],
    }
}

fn subset_filter() -> String {
    let allowed = [
        "Restaurants_1",
        "Restaurants_2",
        "Hotels_2",
        "Hotels_3",
        "Weather_1",
        "Travel_1",
        "navigate",
        "weather",
        "restaurant",
        "hotel",
        "attraction",
    ];
    // "Travel_1" is not whitelisted; keep it out of the qualifying pool.
    let allowed: Vec<&str> = allowed.into_iter().filter(|s| *s != "Travel_1").collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dialogs = Vec::new();
    for i in 0..300 {
        let k = rng.gen_range(1..=3);
        let services: Vec<&str> = (0..k).map(|_| *allowed.choose(&mut rng).unwrap()).collect();
        let services: Vec<&str> = services
            .into_iter()
            .map(|s| if s == "navigate" { "navigation" } else { s })
            .collect();
        dialogs.push(labeled(format!("q{i}"), &services));
    }
    for i in 0..120 {
        let bad = ["Flights_1", "Banks_1", "Music_2", "Movies_1"];
        dialogs.push(labeled(
            format!("x{i}"),
            &["Restaurants_1", bad[i % bad.len()]],
        ));
    }
    for i in 0..30 {
        dialogs.push(labeled(format!("u{i}"), &[]));
    }
    dialogs.shuffle(&mut rng);

    let report = filter_incar_subset(&dialogs, &DEFAULT_WHITELIST, 220, ServiceRule::All, 17);
    assert_eq!(report.qualifying, 300);
    assert_eq!(report.excluded, 120);
    assert_eq!(report.unlabeled, 30);
    assert_eq!(report.kept.len(), 220);
    let whitelist: Vec<String> = DEFAULT_WHITELIST.iter().map(|s| s.to_string()).collect();
    for d in &report.kept {
        for s in &d.services {
            let base = s.to_lowercase();
            let base = base.split('_').next().unwrap();
            let base = base.strip_suffix('s').unwrap_or(base);
            assert!(
                whitelist.iter().any(|w| w == base),
                "{} kept with service {s}",
                d.id
            );
        }
    }
    let unique: BTreeSet<_> = report.kept.iter().map(|d| &d.id).collect();
    assert_eq!(unique.len(), 220);

    let items: Vec<usize> = (0..2424).collect();
    let part = split_fraction(&items, 0.1, 17).unwrap();
    assert_eq!(part.len(), 242);
    "300 qualifying -> 220 kept, all whitelisted; 2424 x 0.1 -> 242".into()
}

fn annotation_service() -> String {
    let dir = tempfile::tempdir().unwrap();
    let items: Vec<SessionItem> = (0..5)
        .map(|i| SessionItem::Dialog {
            id: format!("item-{i}"),
            dialog: synthetic_dialog(format!("d{i}"), DomainTag::ALL[i], 6),
        })
        .collect();
    let evaluators = vec!["alice".to_string(), "bob".to_string()];
    let metrics = metric_names(EvalMode::Intrinsic);
    let sid = "acceptance";
    let before = {
        let store = AnnotationStore::open(dir.path()).unwrap();
        store
            .create_session(SessionSpec {
                mode: EvalMode::Intrinsic,
                items: items.clone(),
                evaluators: evaluators.clone(),
                seed: 4,
                sources: None,
                id: Some(sid.into()),
            })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut submitted = 0;
        'outer: for e in &evaluators {
            for item in &items {
                for m in &metrics {
                    if submitted == 50 {
                        break 'outer;
                    }
                    store
                        .submit_rating(
                            sid,
                            RatingRecord {
                                evaluator_id: e.clone(),
                                item_id: item.id().to_string(),
                                metric: m.to_string(),
                                value: RatingValue::Likert(rng.gen_range(1..=5)),
                                timestamp: Some(format!("2026-01-01T00:00:{submitted:02}Z")),
                                seq: None,
                            },
                        )
                        .unwrap();
                    submitted += 1;
                }
            }
        }
        assert_eq!(submitted, 50);
        store.state(sid).unwrap()
    };
    assert_eq!(before.ratings.len(), 50);

    let log = dir.path().join(RATINGS_FILE);
    let mut f = std::fs::OpenOptions::new().append(true).open(&log).unwrap();
    f.write_all(br#"{"session_id":"acceptance","evaluator_id":"bob","item_id":"it"#)
        .unwrap();
    drop(f);

    let store = AnnotationStore::open(dir.path()).unwrap();
    let after = store.state(sid).unwrap();
    assert!(after == before, "state differs after restart");

    let dup = store.submit_rating(
        sid,
        RatingRecord {
            evaluator_id: "alice".into(),
            item_id: "item-0".into(),
            metric: metrics[0].to_string(),
            value: RatingValue::Likert(3),
            timestamp: None,
            seq: None,
        },
    );
    assert!(
        matches!(dup, Err(AnnotationError::Conflict(_))),
        "duplicate accepted: {dup:?}"
    );

    let params = AggregationParams::default();
    let summary = store.summary(sid, &params).unwrap();
    let logged: Vec<RatingRecord> = read_rating_log(&log)
        .unwrap()
        .into_iter()
        .filter(|(s, _)| s == sid)
        .map(|(_, r)| r)
        .collect();
    assert_eq!(logged.len(), 50);
    let expected = aggregate_likert(&logged, &params).unwrap();
    assert_eq!(summary.likert, expected);
    "50 ratings survive restart with torn tail, duplicate rejected, summary matches".into()
}

type Criterion = (&'static str, fn() -> String, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "metric oracle equivalence",
            metric_oracle_equivalence,
            Duration::from_secs(5),
        ),
        ("trivial metric anchors", trivial_anchors, Duration::MAX),
        (
            "distinct-n brute force",
            distinct_brute_force,
            Duration::from_secs(5),
        ),
        (
            "injector roundtrip",
            injector_roundtrip,
            Duration::from_secs(10),
        ),
        ("injection fixtures", injection_fixtures, Duration::MAX),
        ("tagger soundness", tagger_soundness, Duration::MAX),
        (
            "pipeline validity",
            pipeline_validity,
            Duration::from_secs(60),
        ),
        ("sampling protocol", sampling_protocol, Duration::MAX),
        ("aggregation", aggregation, Duration::MAX),
        ("subset filter", subset_filter, Duration::MAX),
        ("annotation service", annotation_service, Duration::MAX),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed();
        match result {
            Ok(detail) if took <= budget => {
                println!("PASS {name} ({detail}; {:.2}s)", took.as_secs_f64())
            }
            Ok(detail) => {
                failed += 1;
                println!(
                    "FAIL {name}: over budget {:.2}s > {}s ({detail})",
                    took.as_secs_f64(),
                    budget.as_secs()
                );
            }
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", 11 - failed, 11);
    if failed > 0 {
        std::process::exit(1);
    }
}
