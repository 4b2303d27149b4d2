use std::collections::{BTreeSet, HashMap};

use crate::conllu::{Sentence, Treebank};

/// Reserved entry for unseen inputs in input vocabularies.
pub const UNKNOWN: &str = "<unk>";

/// Bidirectional string/index map with a fixed, sorted order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_items(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }

    /// Sorted vocabulary, optionally with [`UNKNOWN`] at index 0.
    fn build(set: BTreeSet<String>, with_unknown: bool) -> Self {
        let mut items = Vec::with_capacity(set.len() + 1);
        if with_unknown {
            items.push(UNKNOWN.to_owned());
        }
        items.extend(set.into_iter().filter(|s| s != UNKNOWN));
        Vocab::from_items(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Index of `item`, falling back to index 0 (the unknown entry).
    pub fn get_or_unknown(&self, item: &str) -> usize {
        self.get(item).unwrap_or(0)
    }

    pub fn item(&self, idx: usize) -> &str {
        &self.items[idx]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// All vocabularies a model needs, built from training data.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabularies {
    pub forms: Vocab,
    pub upos_input: Vocab,
    pub labels: Vocab,
    pub upos: Vocab,
    pub feats: Vocab,
}

impl Vocabularies {
    pub fn from_treebanks(treebanks: &[Treebank], lowercase_forms: bool) -> Self {
        let mut forms = BTreeSet::new();
        let mut upos = BTreeSet::new();
        let mut labels = BTreeSet::new();
        let mut feats = BTreeSet::new();
        for token in treebanks
            .iter()
            .flat_map(|tb| &tb.sentences)
            .flat_map(|s: &Sentence| &s.tokens)
        {
            forms.insert(normalize_form(&token.form, lowercase_forms));
            if let Some(u) = &token.upos {
                upos.insert(u.clone());
            }
            if let Some(l) = &token.deprel {
                labels.insert(l.clone());
            }
            feats.insert(token.feats.to_string());
        }
        Vocabularies {
            forms: Vocab::build(forms, true),
            upos_input: Vocab::build(upos.clone(), true),
            labels: Vocab::build(labels, false),
            upos: Vocab::build(upos, false),
            feats: Vocab::build(feats, false),
        }
    }

    /// Named vocabularies in storage order.
    pub fn named(&self) -> [(&'static str, &Vocab); 5] {
        [
            ("forms", &self.forms),
            ("upos_input", &self.upos_input),
            ("labels", &self.labels),
            ("upos", &self.upos),
            ("feats", &self.feats),
        ]
    }
}

pub fn normalize_form(form: &str, lowercase: bool) -> String {
    if lowercase {
        form.to_lowercase()
    } else {
        form.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu;

    #[test]
    fn built_from_data() {
        let tb = parse_conllu(
            "1\tArma\t_\tNOUN\t_\tCase=Acc\t2\tobj\t_\t_\n2\tcano\t_\tVERB\t_\t_\t0\troot\t_\t_\n",
            "t",
        )
        .unwrap();
        let v = Vocabularies::from_treebanks(&[tb.clone()], false);
        assert_eq!(v.forms.items(), ["<unk>", "Arma", "cano"]);
        assert_eq!(v.labels.items(), ["obj", "root"]);
        assert_eq!(v.upos.items(), ["NOUN", "VERB"]);
        assert_eq!(v.upos_input.get_or_unknown("ADJ"), 0);
        assert_eq!(v.feats.items(), ["Case=Acc", "_"]);
        let lower = Vocabularies::from_treebanks(&[tb], true);
        assert_eq!(lower.forms.get("arma"), Some(1));
    }
}
