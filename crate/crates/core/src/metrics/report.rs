use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bleu, meteor, rouge_l, MetricError, MetricParams};
use crate::text::metric_tokens;

/// One line of a generation file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    #[serde(default)]
    pub context: serde_json::Value,
    pub reference: String,
    pub hypothesis: String,
}

/// Corpus-level scores, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: usize,
    pub hyp_tokens: u64,
    pub ref_tokens: u64,
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
    pub meteor: f64,
    /// Not computed; kept so tables line up with ones that report it.
    pub bertscore_f1: Option<f64>,
}

impl MetricReport {
    pub fn render(&self) -> String {
        let mut head = String::new();
        let mut row = String::new();
        for (i, b) in self.bleu.iter().enumerate() {
            let _ = write!(head, "{:>9}", format!("BLEU-{}", i + 1));
            let _ = write!(row, "{b:>9.2}");
        }
        let _ = write!(head, "{:>9}{:>9}{:>14}", "ROUGE-L", "METEOR", "BERTScore-F1");
        let bs = self
            .bertscore_f1
            .map_or_else(|| "—".to_string(), |v| format!("{v:.2}"));
        let _ = write!(row, "{:>9.2}{:>9.2}{bs:>14}", self.rouge_l, self.meteor);
        format!("{}\n{}\n", head.trim_start(), row.trim_start())
    }
}

/// Reads JSONL generation records. Blank lines are skipped; record numbers
/// in errors are 1-based line numbers.
pub fn parse_generations<R: BufRead>(reader: R) -> Result<Vec<GenerationRecord>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| MetricError::Parse {
            record: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn corpus_report(
    records: &[GenerationRecord],
    params: &MetricParams,
) -> Result<MetricReport, MetricError> {
    params.validate()?;
    if records.is_empty() {
        return Err(MetricError::Argument("no generation records".into()));
    }
    let (hyps, refs): (Vec<Vec<String>>, Vec<Vec<String>>) = records
        .par_iter()
        .map(|r| {
            (
                metric_tokens(&r.hypothesis, params.lowercase),
                metric_tokens(&r.reference, params.lowercase),
            )
        })
        .unzip();
    let b = bleu(&hyps, &refs, params)?;
    let per: Vec<(f64, f64)> = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| (rouge_l(h, r, params.rouge_beta), meteor(h, r, params).score))
        .collect();
    let n = per.len() as f64;
    let rouge: f64 = per.iter().map(|p| p.0).sum::<f64>() / n;
    let met: f64 = per.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(MetricReport {
        pairs: records.len(),
        hyp_tokens: b.hyp_len,
        ref_tokens: b.ref_len,
        bleu: b.scores.iter().map(|s| s * 100.0).collect(),
        rouge_l: rouge * 100.0,
        meteor: met * 100.0,
        bertscore_f1: None,
    })
}
