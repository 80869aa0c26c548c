use std::collections::BTreeMap;

use rand::seq::index;

use super::EvalError;
use crate::corpus::{Dialog, DomainTag, TURN_LENGTHS};
use crate::rng::{derive_seed, stream_rng};

/// Dialogs drawn per (domain, length) stratum.
pub const PER_DOMAIN_LENGTH: usize = 4;
pub const EXTERNAL_COUNTS: [(&str, usize); 3] = [("train", 100), ("valid", 20), ("test", 20)];

/// `k` distinct indices from `0..n`, ascending.
fn draw(n: usize, k: usize, seed: u64, label: &str) -> Vec<usize> {
    let mut rng = stream_rng(seed, derive_seed(0, label));
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// 4 dialogs per (domain, length): 20 per domain, 140 in all. Output is
/// grouped by domain then length.
pub fn sample_discodrive(dialogs: &[Dialog], seed: u64) -> Result<Vec<Dialog>, EvalError> {
    let mut out = Vec::with_capacity(DomainTag::ALL.len() * TURN_LENGTHS.len() * PER_DOMAIN_LENGTH);
    for domain in DomainTag::ALL {
        for len in TURN_LENGTHS {
            let pool: Vec<&Dialog> = dialogs
                .iter()
                .filter(|d| d.domain == domain && d.num_turns == len)
                .collect();
            if pool.len() < PER_DOMAIN_LENGTH {
                return Err(EvalError::Understocked {
                    domain: domain.as_str().into(),
                    num_turns: len,
                    available: pool.len(),
                    required: PER_DOMAIN_LENGTH,
                });
            }
            let picks = draw(pool.len(), PER_DOMAIN_LENGTH, seed, &format!("stratum/{}/{len}", domain.as_str()));
            out.extend(picks.into_iter().map(|i| pool[i].clone()));
        }
    }
    Ok(out)
}

/// Draws `counts[name]` items from each named split.
pub fn sample_splits<T: Clone>(
    splits: &BTreeMap<String, Vec<T>>,
    counts: &[(&str, usize)],
    seed: u64,
) -> Result<BTreeMap<String, Vec<T>>, EvalError> {
    let mut out = BTreeMap::new();
    for &(name, k) in counts {
        let pool = splits.get(name).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < k {
            return Err(EvalError::ShortSplit { split: name.into(), available: pool.len(), required: k });
        }
        let picks = draw(pool.len(), k, seed, &format!("split/{name}"));
        out.insert(name.to_string(), picks.into_iter().map(|i| pool[i].clone()).collect());
    }
    Ok(out)
}

/// 100 train + 20 valid + 20 test, concatenated in that order.
pub fn sample_external<T: Clone>(train: &[T], valid: &[T], test: &[T], seed: u64) -> Result<Vec<T>, EvalError> {
    let splits: BTreeMap<String, Vec<T>> = [("train", train), ("valid", valid), ("test", test)]
        .into_iter()
        .map(|(n, v)| (n.to_string(), v.to_vec()))
        .collect();
    let mut drawn = sample_splits(&splits, &EXTERNAL_COUNTS, seed)?;
    let mut out = Vec::new();
    for (name, _) in EXTERNAL_COUNTS {
        out.extend(drawn.remove(name).unwrap_or_default());
    }
    Ok(out)
}
