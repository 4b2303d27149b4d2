//! CoNLL-U reading, writing and tree validation.
//!
//! Canonical form, which `serialize_conllu` always produces:
//!
//! - comment lines first, then token lines, with multiword-token range lines
//!   placed directly before their first token;
//! - ten tab-separated columns, `_` for every empty field;
//! - features sorted by key (case-insensitive);
//! - every sentence, including the last one, terminated by a blank line.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

/// Errors raised while reading CoNLL-U text. Line numbers are 1-based.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConlluError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: expected token id {expected}, found {found}")]
    NonContiguousIds {
        line: usize,
        expected: usize,
        found: String,
    },
    #[error("line {line}: head {head} of token {id} is out of range")]
    HeadOutOfRange { line: usize, id: usize, head: usize },
    #[error("line {line}: empty node {id} is not supported")]
    EmptyNodeUnsupported { line: usize, id: String },
}

/// Ways a head assignment can fail to be a single rooted tree.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("token {0} has no head")]
    MissingHead(usize),
    #[error("head of token {id} is out of range: {head}")]
    HeadOutOfRange { id: usize, head: usize },
    #[error("no token is attached to the root")]
    NoRoot,
    #[error("tokens {0:?} are attached to the root")]
    MultipleRoots(Vec<usize>),
    #[error("cycle through tokens {0:?}")]
    Cycle(Vec<usize>),
}

/// Morphological features as key/value pairs, kept sorted by key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Features(Vec<(String, String)>);

impl Features {
    pub fn new() -> Self {
        Features(Vec::new())
    }

    /// Builds a feature bundle, sorting the pairs into canonical order.
    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut pairs: Vec<(String, String)> = pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        sort_features(&mut pairs);
        Features(pairs)
    }

    /// Parses `Key=Val|Key=Val` or `_`.
    pub fn parse(text: &str) -> Result<Self, String> {
        if text == "_" || text.is_empty() {
            return Ok(Features::new());
        }
        let mut pairs = Vec::new();
        for item in text.split('|') {
            match item.split_once('=') {
                Some((k, v)) if !k.is_empty() && !v.is_empty() => pairs.push((k.to_owned(), v.to_owned())),
                _ => return Err(format!("malformed feature `{}`", item)),
            }
        }
        sort_features(&mut pairs);
        Ok(Features(pairs))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Set comparison of the key=value pairs.
    pub fn set_eq(&self, other: &Features) -> bool {
        let mut a: Vec<_> = self.0.iter().collect();
        let mut b: Vec<_> = other.0.iter().collect();
        a.sort();
        a.dedup();
        b.sort();
        b.dedup();
        a == b
    }
}

fn sort_features(pairs: &mut [(String, String)]) {
    pairs.sort_by(|a, b| a.0.to_lowercase().cmp(&b.0.to_lowercase()).then_with(|| a.0.cmp(&b.0)));
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("_");
        }
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{}={}", k, v)?;
        }
        Ok(())
    }
}

/// One syntactic word.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<String>,
    pub xpos: Option<String>,
    pub feats: Features,
    pub head: Option<usize>,
    pub deprel: Option<String>,
    pub deps: Option<String>,
    pub misc: Option<String>,
}

impl Token {
    /// A token with only id and form set.
    pub fn new(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            ..Default::default()
        }
    }

    /// Relation without its `:subtype` suffix.
    pub fn universal_deprel(&self) -> Option<&str> {
        self.deprel.as_deref().map(universal_part)
    }
}

/// The part of a relation before the first `:`.
pub fn universal_part(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

/// A multiword-token range line, kept verbatim apart from the placeholder
/// columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiwordToken {
    pub start: usize,
    pub end: usize,
    pub form: String,
    pub misc: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    /// Full comment lines, including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub mwt_ranges: Vec<MultiwordToken>,
}

impl Sentence {
    /// Builds a sentence from forms, numbering tokens from 1.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence {
            comments: Vec::new(),
            tokens: forms
                .iter()
                .enumerate()
                .map(|(i, f)| Token::new(i + 1, f.as_ref()))
                .collect(),
            mwt_ranges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Heads of all tokens, or the first token lacking one.
    pub fn heads(&self) -> Result<Vec<usize>, TreeError> {
        self.tokens
            .iter()
            .map(|t| t.head.ok_or(TreeError::MissingHead(t.id)))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Treebank {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Treebank {
            name: name.into(),
            sentences,
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

fn opt_field(col: &str) -> Option<String> {
    if col == "_" {
        None
    } else {
        Some(col.to_owned())
    }
}

struct SentenceBuilder {
    sentence: Sentence,
    /// Line number of every token, for head range errors.
    token_lines: Vec<usize>,
    mwt_lines: Vec<usize>,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder {
            sentence: Sentence::default(),
            token_lines: Vec::new(),
            mwt_lines: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.sentence.tokens.is_empty() && self.sentence.comments.is_empty() && self.sentence.mwt_ranges.is_empty()
    }

    fn finish(self, last_line: usize) -> Result<Sentence, ConlluError> {
        let n = self.sentence.tokens.len();
        if n == 0 {
            return Err(ConlluError::MalformedLine {
                line: last_line,
                reason: "sentence without tokens".into(),
            });
        }
        for (token, &line) in self.sentence.tokens.iter().zip(&self.token_lines) {
            if let Some(head) = token.head {
                if head > n || head == token.id {
                    return Err(ConlluError::HeadOutOfRange {
                        line,
                        id: token.id,
                        head,
                    });
                }
            }
        }
        for (mwt, &line) in self.sentence.mwt_ranges.iter().zip(&self.mwt_lines) {
            if mwt.start < 1 || mwt.start > mwt.end || mwt.end > n {
                return Err(ConlluError::MalformedLine {
                    line,
                    reason: format!("range {}-{} outside 1..{}", mwt.start, mwt.end, n),
                });
            }
        }
        Ok(self.sentence)
    }
}

fn parse_index(col: &str, line: usize, what: &str) -> Result<usize, ConlluError> {
    col.parse::<usize>().map_err(|_| ConlluError::MalformedLine {
        line,
        reason: format!("invalid {} `{}`", what, col),
    })
}

/// Parses a CoNLL-U document into a named treebank.
pub fn parse_conllu(text: &str, name: &str) -> Result<Treebank, ConlluError> {
    let mut sentences = Vec::new();
    let mut current = SentenceBuilder::new();
    let mut line_no = 0;

    for (idx, raw) in text.lines().enumerate() {
        line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if !current.is_empty() {
                let done = std::mem::replace(&mut current, SentenceBuilder::new());
                sentences.push(done.finish(line_no)?);
            }
            continue;
        }

        if line.starts_with('#') {
            current.sentence.comments.push(line.to_owned());
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::MalformedLine {
                line: line_no,
                reason: format!("expected 10 columns, found {}", cols.len()),
            });
        }

        let id = cols[0];
        if id.contains('.') {
            return Err(ConlluError::EmptyNodeUnsupported {
                line: line_no,
                id: id.to_owned(),
            });
        }
        if let Some((start, end)) = id.split_once('-') {
            let start = parse_index(start, line_no, "range start")?;
            let end = parse_index(end, line_no, "range end")?;
            current.sentence.mwt_ranges.push(MultiwordToken {
                start,
                end,
                form: cols[1].to_owned(),
                misc: opt_field(cols[9]),
            });
            current.mwt_lines.push(line_no);
            continue;
        }

        let expected = current.sentence.tokens.len() + 1;
        match id.parse::<usize>() {
            Ok(v) if v == expected => {}
            Ok(_) => {
                return Err(ConlluError::NonContiguousIds {
                    line: line_no,
                    expected,
                    found: id.to_owned(),
                })
            }
            Err(_) => {
                return Err(ConlluError::MalformedLine {
                    line: line_no,
                    reason: format!("invalid token id `{}`", id),
                })
            }
        }

        let feats = Features::parse(cols[5]).map_err(|reason| ConlluError::MalformedLine { line: line_no, reason })?;
        let head = match cols[6] {
            "_" => None,
            h => Some(parse_index(h, line_no, "head")?),
        };

        current.sentence.tokens.push(Token {
            id: expected,
            form: cols[1].to_owned(),
            lemma: opt_field(cols[2]),
            upos: opt_field(cols[3]),
            xpos: opt_field(cols[4]),
            feats,
            head,
            deprel: opt_field(cols[7]),
            deps: opt_field(cols[8]),
            misc: opt_field(cols[9]),
        });
        current.token_lines.push(line_no);
    }

    if !current.is_empty() {
        sentences.push(current.finish(line_no)?);
    }

    Ok(Treebank::new(name, sentences))
}

fn or_placeholder(field: &Option<String>) -> &str {
    field.as_deref().unwrap_or("_")
}

/// Appends one sentence in canonical form, including its terminating blank
/// line.
pub fn write_sentence(out: &mut String, sentence: &Sentence) {
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }
    for token in &sentence.tokens {
        for mwt in sentence.mwt_ranges.iter().filter(|m| m.start == token.id) {
            let _ = writeln!(
                out,
                "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}",
                mwt.start,
                mwt.end,
                mwt.form,
                or_placeholder(&mwt.misc)
            );
        }
        let head = token.head.map(|h| h.to_string()).unwrap_or_else(|| "_".to_owned());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            token.id,
            token.form,
            or_placeholder(&token.lemma),
            or_placeholder(&token.upos),
            or_placeholder(&token.xpos),
            token.feats,
            head,
            or_placeholder(&token.deprel),
            or_placeholder(&token.deps),
            or_placeholder(&token.misc),
        );
    }
    out.push('\n');
}

/// Renders a treebank in canonical CoNLL-U.
pub fn serialize_conllu(tb: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &tb.sentences {
        write_sentence(&mut out, sentence);
    }
    out
}

/// Checks that `heads` (1-based tokens, 0 = root) form one rooted tree.
pub fn validate_heads(heads: &[usize]) -> Result<(), TreeError> {
    let n = heads.len();
    for (i, &h) in heads.iter().enumerate() {
        if h > n || h == i + 1 {
            return Err(TreeError::HeadOutOfRange { id: i + 1, head: h });
        }
    }

    let roots: Vec<usize> = (1..=n).filter(|&d| heads[d - 1] == 0).collect();
    if roots.len() > 1 {
        return Err(TreeError::MultipleRoots(roots));
    }

    // 0 = unvisited, 1 = on the current path, 2 = known to reach the root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).unwrap_or(0);
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            return Err(TreeError::Cycle(cycle));
        }
        for p in path {
            state[p] = 2;
        }
    }

    if roots.is_empty() {
        return Err(TreeError::NoRoot);
    }
    Ok(())
}

/// Checks that a fully headed sentence is a single rooted tree.
pub fn validate_tree(s: &Sentence) -> Result<(), TreeError> {
    validate_heads(&s.heads()?)
}
