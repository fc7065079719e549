//! Cleaning, vocabulary fitting and fixed-length index sequences.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Post;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_WORDS: usize = 10_000;
pub const DEFAULT_SEQ_LEN: usize = 100;

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2010}'..='\u{2027}').contains(&c)
        || ('\u{2030}'..='\u{205E}').contains(&c)
        || matches!(c, '«' | '»' | '¡' | '¿' | '·' | '¦')
}

/// Lowercases and tokenizes on whitespace, dropping hashtags, mentions and
/// urls whole and stripping punctuation from what remains.
pub fn clean(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .filter(|t| !t.starts_with('#') && !t.starts_with('@'))
        .filter(|t| !t.contains("://") && !t.starts_with("www."))
        .map(|t| t.chars().filter(|c| !is_punctuation(*c)).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Which text of a post forms the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentSource {
    #[default]
    Tweet,
    /// Title, keywords, description and paragraphs, in that order.
    Article,
    TweetAndArticle,
}

impl FromStr for DocumentSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tweet" => Ok(DocumentSource::Tweet),
            "article" => Ok(DocumentSource::Article),
            "both" | "tweet+article" | "tweet_and_article" => Ok(DocumentSource::TweetAndArticle),
            other => Err(Error::Config(format!("unknown text source `{other}`"))),
        }
    }
}

impl fmt::Display for DocumentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocumentSource::Tweet => "tweet",
            DocumentSource::Article => "article",
            DocumentSource::TweetAndArticle => "both",
        })
    }
}

fn join_nonempty<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn article_text(post: &Post) -> String {
    join_nonempty(
        [
            post.target_title.as_str(),
            post.target_keywords.as_str(),
            post.target_description.as_str(),
        ]
        .into_iter()
        .chain(post.target_paragraphs.iter().map(String::as_str)),
    )
}

pub fn assemble_document(post: &Post, source: DocumentSource) -> String {
    match source {
        DocumentSource::Tweet => post.tweet_text(),
        DocumentSource::Article => article_text(post),
        DocumentSource::TweetAndArticle => {
            join_nonempty([post.tweet_text().as_str(), article_text(post).as_str()])
        }
    }
}

/// Frequency-ranked word index. Index 0 is reserved for padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_index: HashMap<String, u32>,
    words: Vec<String>,
    max_words: usize,
}

impl Vocabulary {
    /// Ranks words by descending frequency, ties by first occurrence, and
    /// keeps the top `max_words`.
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>], max_words: usize) -> Result<Self> {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut order = 0usize;
        for doc in corpus {
            for tok in doc {
                let e = counts.entry(tok.as_ref()).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                e.0 += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::Invalid("vocabulary corpus has no tokens".into()));
        }
        let mut ranked: Vec<(&str, usize, usize)> =
            counts.into_iter().map(|(w, (c, o))| (w, c, o)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(max_words);
        let words: Vec<String> = ranked.into_iter().map(|(w, _, _)| w.to_string()).collect();
        Ok(Self::from_words(words, max_words))
    }

    fn from_words(words: Vec<String>, max_words: usize) -> Self {
        let word_to_index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32 + 1))
            .collect();
        Vocabulary {
            word_to_index,
            words,
            max_words,
        }
    }

    pub fn index(&self, word: &str) -> Option<u32> {
        self.word_to_index.get(word).copied()
    }

    /// The word at a 1-based index.
    pub fn word(&self, index: u32) -> Option<&str> {
        (index as usize)
            .checked_sub(1)
            .and_then(|i| self.words.get(i))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    /// Words in index order (index `i + 1` for position `i`).
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Writes `word<TAB>index` lines sorted by index.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            writeln!(w, "{word}\t{}", i + 1).map_err(|e| Error::io("<vocabulary>", e))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R, max_words: usize) -> Result<Self> {
        let mut words = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let (word, idx) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err("expected word<TAB>index"))?;
            let idx: usize = idx.parse().map_err(|_| parse_err("bad index"))?;
            if idx != words.len() + 1 {
                return Err(parse_err("indices must be dense and sorted from 1"));
            }
            words.push(word.to_string());
        }
        if words.len() > max_words {
            return Err(Error::Invalid(format!(
                "vocabulary has {} words, more than max_words {max_words}",
                words.len()
            )));
        }
        Ok(Self::from_words(words, max_words))
    }
}

/// Maps tokens to indices, skipping out-of-vocabulary tokens.
pub fn to_sequence<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<u32> {
    tokens.iter().filter_map(|t| vocab.index(t.as_ref())).collect()
}

/// A fixed-length, left-zero-padded index sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pre-pads with zeros or pre-truncates (keeping the tail) to `length`.
pub fn pad(seq: &[u32], length: usize) -> TokenSequence {
    if seq.len() >= length {
        TokenSequence(seq[seq.len() - length..].to_vec())
    } else {
        let mut out = vec![0; length - seq.len()];
        out.extend_from_slice(seq);
        TokenSequence(out)
    }
}

/// Clean, index and pad one document.
pub fn encode(text: &str, vocab: &Vocabulary, length: usize) -> TokenSequence {
    pad(&to_sequence(&clean(text), vocab), length)
}
