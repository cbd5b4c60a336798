//! Reader for CoNLL-2016 shared task `relations.json` files (one JSON object
//! per line) and the companion `parses.json` used to resolve token offsets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::labels::SenseLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationType {
    Explicit,
    Implicit,
    EntRel,
    AltLex,
}

impl RelationType {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "Explicit" => Some(Self::Explicit),
            "Implicit" => Some(Self::Implicit),
            "EntRel" => Some(Self::EntRel),
            "AltLex" => Some(Self::AltLex),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRelation {
    pub doc_id: String,
    pub relation_type: RelationType,
    pub arg1: Vec<String>,
    pub arg2: Vec<String>,
    pub senses: Vec<String>,
}

/// A filtered relation with its training label and full gold set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRelation {
    pub relation: RawRelation,
    pub label: SenseLabel,
    pub gold: Vec<SenseLabel>,
}

/// Words of each sentence of each document, from `parses.json`.
#[derive(Clone, Debug, Default)]
pub struct ParseIndex {
    docs: HashMap<String, Vec<Vec<String>>>,
}

impl ParseIndex {
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse { line: 1, detail: "parses: expected an object".into() })?;
        let mut docs = HashMap::with_capacity(obj.len());
        for (doc, body) in obj {
            let sentences = body
                .get("sentences")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    detail: format!("parses: document {doc} has no sentences"),
                })?;
            let words = sentences
                .iter()
                .map(|s| {
                    s.get("words")
                        .and_then(Value::as_array)
                        .map(|ws| {
                            ws.iter()
                                .map(|w| {
                                    w.get(0)
                                        .and_then(Value::as_str)
                                        .unwrap_or_default()
                                        .to_string()
                                })
                                .collect()
                        })
                        .unwrap_or_default()
                })
                .collect();
            docs.insert(doc.clone(), words);
        }
        Ok(Self { docs })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_reader(BufReader::new(file))?;
        Self::from_json(&v)
    }

    fn word(&self, doc: &str, sentence: usize, token: usize) -> Option<&str> {
        self.docs
            .get(doc)?
            .get(sentence)?
            .get(token)
            .map(String::as_str)
    }
}

fn field<'a>(obj: &'a Value, name: &str, line: usize) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::MissingField {
        line,
        field: name.to_string(),
    })
}

fn argument_tokens(
    rel: &Value,
    arg: &str,
    doc_id: &str,
    parses: Option<&ParseIndex>,
    line: usize,
) -> Result<Vec<String>> {
    let obj = field(rel, arg, line)?;
    let bad = |detail: String| Error::Parse { line, detail };

    if let Some(list) = obj.get("TokenList").and_then(Value::as_array) {
        if list.iter().all(Value::is_string) && !list.is_empty() {
            return Ok(list.iter().map(|t| t.as_str().unwrap_or_default().to_string()).collect());
        }
        if let (Some(index), false) = (parses, list.is_empty()) {
            // [char_start, char_end, doc_token, sentence, token_in_sentence]
            return list
                .iter()
                .map(|entry| {
                    let at = |i: usize| entry.get(i).and_then(Value::as_u64).map(|x| x as usize);
                    let (s, t) = at(3)
                        .zip(at(4))
                        .ok_or_else(|| bad(format!("{arg}.TokenList entry {entry} is not an offset list")))?;
                    index
                        .word(doc_id, s, t)
                        .map(str::to_string)
                        .ok_or_else(|| bad(format!("{arg}: token ({s}, {t}) not in parses for {doc_id}")))
                })
                .collect();
        }
    }
    match obj.get("RawText").and_then(Value::as_str) {
        Some(text) => Ok(text.split_whitespace().map(str::to_string).collect()),
        None => Err(Error::MissingField {
            line,
            field: format!("{arg}.TokenList/RawText"),
        }),
    }
}

fn parse_line(text: &str, line: usize, parses: Option<&ParseIndex>) -> Result<RawRelation> {
    let rel: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        detail: format!("malformed JSON: {e}"),
    })?;
    if !rel.is_object() {
        return Err(Error::Parse { line, detail: "expected a JSON object".into() });
    }
    let doc_id = field(&rel, "DocID", line)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::Parse { line, detail: "DocID is not a string".into() })?;
    let ty = field(&rel, "Type", line)?.as_str().unwrap_or_default();
    let relation_type = RelationType::parse(ty).ok_or_else(|| Error::Parse {
        line,
        detail: format!("unknown relation Type `{ty}`"),
    })?;
    let senses: Vec<String> = field(&rel, "Sense", line)?
        .as_array()
        .ok_or_else(|| Error::Parse { line, detail: "Sense is not a list".into() })?
        .iter()
        .filter_map(|s| s.as_str().map(str::to_string))
        .collect();
    if senses.is_empty() {
        return Err(Error::Parse { line, detail: "Sense list is empty".into() });
    }
    let arg1 = argument_tokens(&rel, "Arg1", &doc_id, parses, line)?;
    let arg2 = argument_tokens(&rel, "Arg2", &doc_id, parses, line)?;
    for (name, toks) in [("Arg1", &arg1), ("Arg2", &arg2)] {
        if toks.is_empty() {
            return Err(Error::Parse { line, detail: format!("{name} has no tokens") });
        }
    }
    Ok(RawRelation {
        doc_id,
        relation_type,
        arg1,
        arg2,
        senses,
    })
}

/// One relation per nonblank line. Errors carry the 1-based line number.
pub fn parse_relations(reader: impl BufRead, parses: Option<&ParseIndex>) -> Result<Vec<RawRelation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Parse {
            line: line_no,
            detail: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&text, line_no, parses)?);
    }
    Ok(out)
}

/// Reads a relations file, or `relations.json` inside a directory. A
/// `parses.json` next to it, if present, resolves token offsets.
pub fn read_relations(path: &Path) -> Result<Vec<RawRelation>> {
    let file_path: PathBuf = if path.is_dir() {
        path.join("relations.json")
    } else {
        path.to_path_buf()
    };
    let file = File::open(&file_path).map_err(|e| Error::io(&file_path, e))?;
    let parses_path = file_path.with_file_name("parses.json");
    let parses = if parses_path.is_file() {
        Some(ParseIndex::read(&parses_path)?)
    } else {
        None
    };
    parse_relations(BufReader::new(file), parses.as_ref())
}

/// Keeps Implicit and EntRel relations; drops Explicit and AltLex.
pub fn filter_implicit(relations: Vec<RawRelation>) -> Vec<RawRelation> {
    relations
        .into_iter()
        .filter(|r| matches!(r.relation_type, RelationType::Implicit | RelationType::EntRel))
        .collect()
}

/// Training label is the first listed sense; the gold set keeps all of them.
/// EntRel relations are labeled EntRel whatever their Sense field says.
pub fn label_of(relation: &RawRelation) -> Result<(SenseLabel, Vec<SenseLabel>)> {
    if relation.relation_type == RelationType::EntRel {
        return Ok((SenseLabel::EntRel, vec![SenseLabel::EntRel]));
    }
    let mut gold = Vec::with_capacity(relation.senses.len());
    for s in &relation.senses {
        let l: SenseLabel = s.parse()?;
        if !gold.contains(&l) {
            gold.push(l);
        }
    }
    let label = *gold
        .first()
        .ok_or_else(|| Error::contract("label_of", "relation without senses"))?;
    Ok((label, gold))
}

pub fn label_all(relations: Vec<RawRelation>) -> Result<Vec<LabeledRelation>> {
    relations
        .into_iter()
        .map(|relation| {
            let (label, gold) = label_of(&relation)?;
            Ok(LabeledRelation { relation, label, gold })
        })
        .collect()
}

/// Occurrences of each sense over all gold sets (a double-labeled relation
/// counts once per label).
pub fn sense_counts(relations: &[LabeledRelation]) -> [usize; super::NUM_CLASSES] {
    let mut counts = [0; super::NUM_CLASSES];
    for r in relations {
        for g in &r.gold {
            counts[g.id()] += 1;
        }
    }
    counts
}
