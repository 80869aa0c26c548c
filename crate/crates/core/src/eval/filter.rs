use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{EvalError, LabeledDialog};
use crate::rng::{derive_seed, stream_rng};

pub const DEFAULT_WHITELIST: [&str; 5] = ["navigation", "weather", "hotel", "attraction", "restaurant"];

/// Whether every service label, or at least one, must be whitelisted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceRule {
    #[default]
    All,
    Any,
}

/// Lowercases and strips an `_<n>` variant suffix and a plural `s`, so
/// `Restaurants_1`, `restaurants` and `restaurant` agree.
pub fn normalize_service(label: &str) -> String {
    let mut s = label.trim().to_lowercase();
    if let Some((head, tail)) = s.rsplit_once('_') {
        if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) {
            s = head.to_string();
        }
    }
    if s.len() > 3 && s.ends_with('s') && !s.ends_with("ss") {
        s.pop();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<LabeledDialog>,
    pub qualifying: usize,
    pub excluded: usize,
    pub unlabeled: usize,
}

/// Keeps whitelisted dialogs, then downsamples to `cap` if needed.
pub fn filter_incar_subset(
    dialogs: &[LabeledDialog],
    whitelist: &[&str],
    cap: usize,
    rule: ServiceRule,
    seed: u64,
) -> FilterReport {
    let allowed: Vec<String> = whitelist.iter().map(|w| normalize_service(w)).collect();
    let ok = |s: &String| allowed.contains(&normalize_service(s));
    let mut unlabeled = 0;
    let mut excluded = 0;
    let mut qualifying = Vec::new();
    for d in dialogs {
        if d.services.is_empty() {
            unlabeled += 1;
            continue;
        }
        let pass = match rule {
            ServiceRule::All => d.services.iter().all(ok),
            ServiceRule::Any => d.services.iter().any(ok),
        };
        if pass {
            qualifying.push(d);
        } else {
            excluded += 1;
        }
    }
    let n = qualifying.len();
    let kept = if n > cap {
        let mut rng = stream_rng(seed, derive_seed(0, "incar-filter"));
        let mut idx = index::sample(&mut rng, n, cap).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| qualifying[i].clone()).collect()
    } else {
        qualifying.into_iter().cloned().collect()
    };
    FilterReport { kept, qualifying: n, excluded, unlabeled }
}

/// A seeded draw of `round(fraction * n)` items, in original order.
pub fn split_fraction<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<Vec<T>, EvalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::Argument(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let k = ((fraction * items.len() as f64).round() as usize).min(items.len());
    let mut rng = stream_rng(seed, derive_seed(0, "split-fraction"));
    let mut idx = index::sample(&mut rng, items.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| items[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(id: &str, services: &[&str]) -> LabeledDialog {
        LabeledDialog { id: id.into(), services: services.iter().map(|s| s.to_string()).collect(), turns: vec![] }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_service("Restaurants_1"), "restaurant");
        assert_eq!(normalize_service("hotels"), "hotel");
        assert_eq!(normalize_service("bus"), "bus");
        assert_eq!(normalize_service("Weather_1"), "weather");
    }

    #[test]
    fn filtering() {
        let d = vec![
            labeled("1", &["banking"]),
            labeled("2", &["hotel", "restaurant"]),
            labeled("3", &["hotel", "taxi"]),
            labeled("4", &[]),
        ];
        let r = filter_incar_subset(&d, &DEFAULT_WHITELIST, 220, ServiceRule::All, 0);
        assert_eq!(r.kept.iter().map(|x| x.id.as_str()).collect::<Vec<_>>(), vec!["2"]);
        assert_eq!((r.excluded, r.unlabeled), (2, 1));
        let r = filter_incar_subset(&d, &DEFAULT_WHITELIST, 220, ServiceRule::Any, 0);
        assert_eq!(r.kept.len(), 2);
    }

    #[test]
    fn fractions() {
        let v: Vec<u32> = (0..2424).collect();
        assert_eq!(split_fraction(&v, 0.1, 1).unwrap().len(), 242);
        assert_eq!(split_fraction(&v, 1.0, 1).unwrap(), v);
        assert_eq!(split_fraction(&v, 0.1, 1).unwrap(), split_fraction(&v, 0.1, 1).unwrap());
        assert!(split_fraction(&v, 0.0, 1).is_err());
    }
}
