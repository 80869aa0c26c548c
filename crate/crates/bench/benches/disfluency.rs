use criterion::{black_box, criterion_group, criterion_main, Criterion};
use disco_bench::{mock_corpus, turn_texts};
use disco_core::disfluency::{inject_corpus, inject_repetition, tag_disfluencies, InjectOp, InjectionPlan};
use disco_core::LexiconSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tagger(c: &mut Criterion) {
    let lex = LexiconSet::bundled();
    let texts = turn_texts(&mock_corpus(10, 4));
    c.bench_function("tag_corpus_turns", |b| {
        b.iter(|| texts.iter().map(|t| tag_disfluencies(black_box(t), &lex).len()).sum::<usize>())
    });
}

fn injection(c: &mut Criterion) {
    let lex = LexiconSet::bundled();
    let corpus = mock_corpus(10, 5);
    let texts = turn_texts(&corpus);
    c.bench_function("inject_repetition", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        b.iter(|| {
            for t in &texts {
                let _ = black_box(inject_repetition(t, &mut rng));
            }
        })
    });
    let plan = InjectionPlan::new(0.5, InjectOp::ALL);
    c.bench_function("inject_corpus", |b| b.iter(|| inject_corpus(black_box(&corpus), &plan, &lex, 7).unwrap()));
}

criterion_group!(benches, tagger, injection);
criterion_main!(benches);
