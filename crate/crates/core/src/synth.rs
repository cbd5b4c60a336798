//! Synthetic trigger-token corpora in the CoNLL relations format.
//!
//! Every relation carries exactly one trigger token per placement site, and
//! the trigger alone determines its sense. Filler tokens are shared by all
//! classes and carry no signal.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{RawRelation, RelationType, SenseLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerPlacement {
    #[default]
    Arg1,
    Arg2,
    /// One argument, chosen at random per relation.
    Either,
    Both,
}

impl std::str::FromStr for TriggerPlacement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arg1" => Ok(Self::Arg1),
            "arg2" => Ok(Self::Arg2),
            "either" => Ok(Self::Either),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown placement `{other}` (arg1 | arg2 | either | both)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub relations: usize,
    pub seed: u64,
    pub placement: TriggerPlacement,
    /// Relative class weights in class-id order.
    pub proportions: [f64; NUM_CLASSES],
    /// Argument length range, trigger included.
    pub min_arg_len: usize,
    pub max_arg_len: usize,
    pub fillers: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            relations: 200,
            seed: 1,
            placement: TriggerPlacement::Arg1,
            proportions: [1.0; NUM_CLASSES],
            min_arg_len: 3,
            max_arg_len: 8,
            fillers: 40,
        }
    }
}

pub fn trigger_token(label: SenseLabel) -> String {
    format!("trig{}", label.id())
}

pub fn filler_token(k: usize) -> String {
    format!("w{k}")
}

/// Splits `n` into integer parts proportional to `weights` (Hamilton's
/// method; leftover units go to the largest remainders, lowest index first).
pub fn largest_remainder(n: usize, weights: &[f64]) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
        return Err(Error::contract("largest_remainder", "weights must be non-negative with a positive sum"));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    Ok(counts)
}

fn argument(rng: &mut Rng, cfg: &SynthConfig, trigger: Option<&str>) -> Vec<String> {
    let len = cfg.min_arg_len + rng.below((cfg.max_arg_len - cfg.min_arg_len + 1) as u64) as usize;
    let mut out: Vec<String> = (0..len).map(|_| filler_token(rng.below(cfg.fillers as u64) as usize)).collect();
    if let Some(t) = trigger {
        let at = rng.below(len as u64) as usize;
        out[at] = t.to_string();
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<RawRelation>> {
    if cfg.min_arg_len == 0 || cfg.max_arg_len < cfg.min_arg_len || cfg.fillers == 0 {
        return Err(Error::contract("synth", "need 1 <= min_arg_len <= max_arg_len and fillers > 0"));
    }
    let counts = largest_remainder(cfg.relations, &cfg.proportions)?;
    let mut labels: Vec<SenseLabel> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(SenseLabel::ALL[c], k))
        .collect();
    let mut rng = Rng::from_coords(cfg.seed, &[0x5359_4E54]);
    rng.shuffle(&mut labels);

    let out = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let trig = trigger_token(label);
            let (in1, in2) = match cfg.placement {
                TriggerPlacement::Arg1 => (true, false),
                TriggerPlacement::Arg2 => (false, true),
                TriggerPlacement::Both => (true, true),
                TriggerPlacement::Either => {
                    let first = rng.bernoulli(0.5);
                    (first, !first)
                }
            };
            let arg1 = argument(&mut rng, cfg, in1.then_some(trig.as_str()));
            let arg2 = argument(&mut rng, cfg, in2.then_some(trig.as_str()));
            RawRelation {
                doc_id: format!("synth_{:04}", i / 10),
                relation_type: if label == SenseLabel::EntRel {
                    RelationType::EntRel
                } else {
                    RelationType::Implicit
                },
                arg1,
                arg2,
                senses: vec![label.to_string()],
            }
        })
        .collect();
    Ok(out)
}

/// One CoNLL relation object, arguments given as RawText and TokenList.
pub fn to_json_line(relation: &RawRelation, id: usize) -> String {
    let ty = match relation.relation_type {
        RelationType::Explicit => "Explicit",
        RelationType::Implicit => "Implicit",
        RelationType::EntRel => "EntRel",
        RelationType::AltLex => "AltLex",
    };
    json!({
        "Arg1": {"RawText": relation.arg1.join(" "), "TokenList": relation.arg1},
        "Arg2": {"RawText": relation.arg2.join(" "), "TokenList": relation.arg2},
        "Connective": {"RawText": "", "TokenList": []},
        "DocID": relation.doc_id,
        "ID": id,
        "Sense": relation.senses,
        "Type": ty,
    })
    .to_string()
}

pub fn write_relations(path: &Path, relations: &[RawRelation]) -> Result<()> {
    let mut buf = Vec::new();
    for (i, r) in relations.iter().enumerate() {
        writeln!(buf, "{}", to_json_line(r, i)).expect("write to Vec");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
