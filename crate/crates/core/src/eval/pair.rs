use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::{derive_seed, seeded};

/// Two items shown side by side. `swapped` is true when the item from the
/// second set is displayed as "A"; it must stay server-side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindPair<T> {
    pub pair_id: String,
    pub shown_a: T,
    pub shown_b: T,
    pub swapped: bool,
}

impl<T> BlindPair<T> {
    /// Maps a displayed side back to the originating set (0 or 1).
    pub fn source_of(&self, shown_a: bool) -> usize {
        usize::from(shown_a == self.swapped)
    }
}

/// Index-aligned pairs with a seeded coin flip per pair for display side.
pub fn pair_for_comparison<T: Clone>(set_a: &[T], set_b: &[T], seed: u64) -> Result<Vec<BlindPair<T>>, EvalError> {
    if set_a.len() != set_b.len() {
        return Err(EvalError::Argument(format!(
            "pair sets differ in size: {} vs {}",
            set_a.len(),
            set_b.len()
        )));
    }
    let mut rng = seeded(derive_seed(seed, "pairing"));
    Ok(set_a
        .iter()
        .zip(set_b)
        .enumerate()
        .map(|(i, (a, b))| {
            let swapped = rng.gen_bool(0.5);
            let (shown_a, shown_b) = if swapped { (b.clone(), a.clone()) } else { (a.clone(), b.clone()) };
            BlindPair { pair_id: format!("pair-{i:04}"), shown_a, shown_b, swapped }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        let a: Vec<String> = (0..140).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..140).map(|i| format!("b{i}")).collect();
        let p = pair_for_comparison(&a, &b, 9).unwrap();
        assert_eq!(p.len(), 140);
        assert_eq!(p, pair_for_comparison(&a, &b, 9).unwrap());
        assert!(p.iter().any(|x| x.swapped) && p.iter().any(|x| !x.swapped));
        for x in &p {
            let from_a = if x.source_of(true) == 0 { &x.shown_a } else { &x.shown_b };
            assert!(from_a.starts_with('a'));
        }
        assert!(pair_for_comparison(&a[..3], &b[..4], 9).is_err());
    }
}
