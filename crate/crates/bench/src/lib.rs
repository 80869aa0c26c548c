//! Shared fixtures for the benchmarks in `benches/`.

use disco_core::backend::MockBackend;
use disco_core::scenario::{generate_scenarios, FewShotBank, DEFAULT_BATCH};
use disco_core::sim::{generate_corpus, GenerationPlan, PromptTemplates};
use disco_core::{Corpus, DomainTag, LexiconSet};

/// A mock-backend corpus with `per_domain` dialogs in each domain.
pub fn mock_corpus(per_domain: usize, seed: u64) -> Corpus {
    let backend = MockBackend::new(seed);
    let scenarios: Vec<_> = DomainTag::ALL
        .iter()
        .flat_map(|&d| {
            generate_scenarios(&backend, &FewShotBank::bundled(d), per_domain, seed, DEFAULT_BATCH)
                .expect("mock scenarios")
        })
        .collect();
    let plan = GenerationPlan { seed, ..Default::default() };
    generate_corpus(&backend, &PromptTemplates::default(), &LexiconSet::bundled(), &scenarios, &plan)
        .expect("mock corpus")
        .corpus
}

/// Every turn's text, in corpus order.
pub fn turn_texts(corpus: &Corpus) -> Vec<String> {
    corpus.dialogs.iter().flat_map(|d| d.turns.iter().map(|t| t.text.clone())).collect()
}
