//! Annotation-style rewrites and the sentence-final punctuation shim.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::conllu::{Sentence, Token};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum HarmonizeError {
    #[error("rule line {line}: {reason}")]
    MalformedRule { line: usize, reason: String },
    #[error("sentence does not end with the dummy punctuation token")]
    InconsistentMarker,
}

fn head_upos<'a>(s: &'a Sentence, token: &Token) -> Option<&'a str> {
    match token.head {
        Some(h) if h >= 1 && h <= s.len() => s.tokens[h - 1].upos.as_deref(),
        _ => None,
    }
}

/// Rewrites `fixed` between two numerals to `flat`.
pub fn fixed_numerals_to_flat(s: &Sentence) -> Sentence {
    let mut out = s.clone();
    for (i, token) in s.tokens.iter().enumerate() {
        if token.universal_deprel() == Some("fixed")
            && token.upos.as_deref() == Some("NUM")
            && head_upos(s, token) == Some("NUM")
        {
            out.tokens[i].deprel = Some("flat".to_owned());
        }
    }
    out
}

/// One `dep` replacement rule; `head_upos == None` matches any head,
/// including the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub dep_upos: String,
    pub head_upos: Option<String>,
    pub deprel: String,
}

impl Rule {
    fn matches(&self, dep_upos: Option<&str>, head_upos: Option<&str>) -> bool {
        dep_upos == Some(self.dep_upos.as_str())
            && match &self.head_upos {
                None => true,
                Some(h) => head_upos == Some(h.as_str()),
            }
    }
}

/// Ordered rules; the first match wins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleTable(pub Vec<Rule>);

impl RuleTable {
    pub fn rules(&self) -> &[Rule] {
        &self.0
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        DEFAULT_RULES.parse().expect("built-in rule table parses")
    }
}

const DEFAULT_RULES: &str = "\
ADJ * amod
ADV * advmod
NOUN VERB obl
PROPN VERB obl
PRON VERB obl
NOUN * nmod
PROPN * nmod
PRON * nmod
VERB * advcl
";

impl FromStr for RuleTable {
    type Err = HarmonizeError;

    /// One rule per line: `DEP_UPOS HEAD_UPOS_OR_* NEW_DEPREL`; `#` starts
    /// a comment.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(HarmonizeError::MalformedRule {
                    line: i + 1,
                    reason: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            if fields[2] == "dep" {
                return Err(HarmonizeError::MalformedRule {
                    line: i + 1,
                    reason: "replacement relation must differ from `dep`".into(),
                });
            }
            rules.push(Rule {
                dep_upos: fields[0].to_owned(),
                head_upos: (fields[1] != "*").then(|| fields[1].to_owned()),
                deprel: fields[2].to_owned(),
            });
        }
        Ok(RuleTable(rules))
    }
}

impl fmt::Display for RuleTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.0 {
            writeln!(
                f,
                "{} {} {}",
                r.dep_upos,
                r.head_upos.as_deref().unwrap_or("*"),
                r.deprel
            )?;
        }
        Ok(())
    }
}

/// Replaces `dep` by the relation of the first matching rule.
pub fn relabel_dep(s: &Sentence, rules: &RuleTable) -> Sentence {
    let mut out = s.clone();
    for (i, token) in s.tokens.iter().enumerate() {
        if token.universal_deprel() != Some("dep") {
            continue;
        }
        let head = head_upos(s, token);
        if let Some(rule) = rules.rules().iter().find(|r| r.matches(token.upos.as_deref(), head)) {
            out.tokens[i].deprel = Some(rule.deprel.clone());
        }
    }
    out
}

/// Records whether `add_dummy_punct` appended a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PunctMarker {
    Appended,
    Absent,
}

const SENTENCE_PUNCT: [&str; 6] = [".", ",", ";", ":", "?", "!"];

/// Appends a `.` token unless the sentence already ends in punctuation.
pub fn add_dummy_punct(s: &Sentence) -> (Sentence, PunctMarker) {
    let ends_in_punct = s
        .tokens
        .last()
        .is_none_or(|t| t.upos.as_deref() == Some("PUNCT") || SENTENCE_PUNCT.contains(&t.form.as_str()));
    if ends_in_punct {
        return (s.clone(), PunctMarker::Absent);
    }
    let mut out = s.clone();
    let mut dummy = Token::new(s.len() + 1, ".");
    dummy.upos = Some("PUNCT".to_owned());
    out.tokens.push(dummy);
    (out, PunctMarker::Appended)
}

/// Removes the token added by `add_dummy_punct`, reattaching its dependents
/// to its own head.
///
/// When the dummy was the root, its first dependent becomes the root and the
/// remaining dependents attach to that token.
pub fn strip_dummy_punct(s: &Sentence, marker: PunctMarker) -> Result<Sentence, HarmonizeError> {
    if marker == PunctMarker::Absent {
        return Ok(s.clone());
    }
    let dummy = match s.tokens.last() {
        // the UPOS column may have been overwritten by a tagger
        Some(t) if t.form == "." && t.id == s.len() => t,
        _ => return Err(HarmonizeError::InconsistentMarker),
    };
    let dummy_id = dummy.id;
    let mut out = s.clone();
    out.tokens.pop();

    let children: Vec<usize> = out
        .tokens
        .iter()
        .filter(|t| t.head == Some(dummy_id))
        .map(|t| t.id)
        .collect();

    match dummy.head {
        Some(0) => {
            if let Some((&first, rest)) = children.split_first() {
                let t = &mut out.tokens[first - 1];
                t.head = Some(0);
                t.deprel = Some("root".to_owned());
                for &c in rest {
                    out.tokens[c - 1].head = Some(first);
                }
            }
        }
        new_head => {
            for &c in &children {
                out.tokens[c - 1].head = new_head;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::validate_tree;

    fn tagged(items: &[(&str, &str, usize, &str)]) -> Sentence {
        let forms: Vec<&str> = items.iter().map(|i| i.0).collect();
        let mut s = Sentence::from_forms(&forms);
        for (t, &(_, upos, head, rel)) in s.tokens.iter_mut().zip(items) {
            t.upos = Some(upos.into());
            t.head = Some(head);
            t.deprel = Some(rel.into());
        }
        s
    }

    #[test]
    fn compound_numerals() {
        let s = tagged(&[
            ("viginti", "NUM", 3, "nummod"),
            ("quattuor", "NUM", 1, "fixed"),
            ("milites", "NOUN", 0, "root"),
        ]);
        let out = fixed_numerals_to_flat(&s);
        assert_eq!(out.tokens[1].deprel.as_deref(), Some("flat"));
        assert_eq!(out.tokens[0], s.tokens[0]);
        assert_eq!(out.tokens[2], s.tokens[2]);
    }

    #[test]
    fn fixed_adpositions_untouched() {
        let s = tagged(&[
            ("ex", "ADP", 3, "case"),
            ("de", "ADP", 1, "fixed"),
            ("urbe", "NOUN", 0, "root"),
        ]);
        assert_eq!(fixed_numerals_to_flat(&s), s);
    }

    #[test]
    fn default_dep_rules() {
        let rules = RuleTable::default();
        let s = tagged(&[
            ("magnus", "ADJ", 3, "dep"),
            ("urbe", "NOUN", 3, "dep"),
            ("venit", "VERB", 0, "root"),
            ("o", "INTJ", 3, "dep"),
            ("regis", "NOUN", 2, "dep"),
        ]);
        let out = relabel_dep(&s, &rules);
        let rels: Vec<_> = out.tokens.iter().map(|t| t.deprel.as_deref().unwrap()).collect();
        assert_eq!(rels, ["amod", "obl", "root", "dep", "nmod"]);
    }

    #[test]
    fn rule_parsing() {
        let table: RuleTable = "# comment\nX * foo\n\nNOUN ADJ bar  # trailing\n".parse().unwrap();
        assert_eq!(table.rules().len(), 2);
        assert_eq!(table.rules()[1].head_upos.as_deref(), Some("ADJ"));
        assert!(matches!(
            "NOUN amod".parse::<RuleTable>(),
            Err(HarmonizeError::MalformedRule { line: 1, .. })
        ));
        let reparsed: RuleTable = RuleTable::default().to_string().parse().unwrap();
        assert_eq!(reparsed, RuleTable::default());
    }

    #[test]
    fn dummy_punct_added() {
        let s = Sentence::from_forms(&["arma", "virumque", "cano"]);
        let (out, marker) = add_dummy_punct(&s);
        assert_eq!(marker, PunctMarker::Appended);
        assert_eq!(out.len(), 4);
        assert_eq!(out.tokens[3].form, ".");
        assert_eq!(out.tokens[3].upos.as_deref(), Some("PUNCT"));
        assert_eq!(out.tokens[3].head, None);
        assert_eq!(strip_dummy_punct(&out, marker).unwrap(), s);
    }

    #[test]
    fn dummy_punct_guard() {
        let s = Sentence::from_forms(&["cano", "."]);
        let (out, marker) = add_dummy_punct(&s);
        assert_eq!(marker, PunctMarker::Absent);
        assert_eq!(out, s);
        assert_eq!(strip_dummy_punct(&out, marker).unwrap(), s);
    }

    #[test]
    fn reattach_to_dummy_head() {
        let s = Sentence::from_forms(&["a", "b"]);
        let (mut out, marker) = add_dummy_punct(&s);
        for (t, h) in out.tokens.iter_mut().zip([0, 3, 1]) {
            t.head = Some(h);
        }
        let stripped = strip_dummy_punct(&out, marker).unwrap();
        assert_eq!(stripped.heads().unwrap(), vec![0, 1]);
    }

    #[test]
    fn dummy_as_root() {
        let s = Sentence::from_forms(&["a", "b", "c"]);
        let (mut out, marker) = add_dummy_punct(&s);
        for (t, h) in out.tokens.iter_mut().zip([4, 1, 4, 0]) {
            t.head = Some(h);
        }
        let stripped = strip_dummy_punct(&out, marker).unwrap();
        assert_eq!(stripped.heads().unwrap(), vec![0, 1, 1]);
        assert_eq!(stripped.tokens[0].deprel.as_deref(), Some("root"));
        assert!(validate_tree(&stripped).is_ok());
    }

    #[test]
    fn inconsistent_marker() {
        let s = Sentence::from_forms(&["a", "b"]);
        assert_eq!(
            strip_dummy_punct(&s, PunctMarker::Appended),
            Err(HarmonizeError::InconsistentMarker)
        );
    }
}
