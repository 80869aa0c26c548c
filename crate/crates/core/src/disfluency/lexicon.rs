use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

const FILLERS_JSON: &str = include_str!("../../../../data/lexicons/fillers.json");
const CUES_JSON: &str = include_str!("../../../../data/lexicons/cues.json");
const SYNONYMS_JSON: &str = include_str!("../../../../data/lexicons/synonyms.json");
const ANTONYMS_JSON: &str = include_str!("../../../../data/lexicons/antonyms.json");

/// Word lists driving the tagger and the replacement injector.
///
/// `fillers` always count as fillers. `weak_fillers` ("like", "so", ...) are
/// ordinary words most of the time and only count when set off by commas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSet {
    pub fillers: Vec<String>,
    #[serde(default)]
    pub weak_fillers: Vec<String>,
    pub repair_cues: Vec<String>,
    pub synonyms: BTreeMap<String, Vec<String>>,
    pub antonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Json {
        file: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("lexicon entry `{0}` is not lowercase")]
    NotLowercase(String),
    #[error("lexicon entry is empty")]
    Empty,
}

#[derive(Deserialize)]
struct FillersFile {
    fillers: Vec<String>,
    #[serde(default)]
    weak_fillers: Vec<String>,
}

#[derive(Deserialize)]
struct CuesFile {
    repair_cues: Vec<String>,
}

fn parse<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<T, LexiconError> {
    serde_json::from_str(text).map_err(|source| LexiconError::Json {
        file: file.to_string(),
        source,
    })
}

impl LexiconSet {
    /// The lexicons bundled under `data/lexicons`.
    pub fn bundled() -> Self {
        Self::from_json(FILLERS_JSON, CUES_JSON, SYNONYMS_JSON, ANTONYMS_JSON)
            .expect("bundled lexicons are valid")
    }

    pub fn from_json(
        fillers: &str,
        cues: &str,
        synonyms: &str,
        antonyms: &str,
    ) -> Result<Self, LexiconError> {
        let f: FillersFile = parse("fillers.json", fillers)?;
        let c: CuesFile = parse("cues.json", cues)?;
        let set = LexiconSet {
            fillers: f.fillers,
            weak_fillers: f.weak_fillers,
            repair_cues: c.repair_cues,
            synonyms: parse("synonyms.json", synonyms)?,
            antonyms: parse("antonyms.json", antonyms)?,
        };
        set.validate()?;
        Ok(set)
    }

    /// Loads `{fillers,cues,synonyms,antonyms}.json` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| LexiconError::Io { path, source })
        };
        Self::from_json(
            &read("fillers.json")?,
            &read("cues.json")?,
            &read("synonyms.json")?,
            &read("antonyms.json")?,
        )
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        let words = self
            .fillers
            .iter()
            .chain(&self.weak_fillers)
            .chain(&self.repair_cues)
            .chain(self.synonyms.iter().flat_map(|(k, v)| std::iter::once(k).chain(v)))
            .chain(self.antonyms.iter().flat_map(|(k, v)| std::iter::once(k).chain(v)));
        for w in words {
            if w.trim().is_empty() {
                return Err(LexiconError::Empty);
            }
            if w.to_lowercase() != *w {
                return Err(LexiconError::NotLowercase(w.clone()));
            }
        }
        Ok(())
    }

    /// Substitutes for `word` (lowercase): synonyms first, then antonyms.
    pub fn substitutes(&self, word: &str) -> Vec<&str> {
        self.synonyms
            .get(word)
            .into_iter()
            .chain(self.antonyms.get(word))
            .flatten()
            .map(String::as_str)
            .collect()
    }

    pub fn covers(&self, word: &str) -> bool {
        self.synonyms.contains_key(word) || self.antonyms.contains_key(word)
    }
}

impl Default for LexiconSet {
    fn default() -> Self {
        Self::bundled()
    }
}
