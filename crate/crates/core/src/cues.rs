//! Lexicon-based linguistic cue features.
//!
//! Five families of bias and uncertainty markers are counted over a cleaned
//! token list. Vector order is fixed: assertive, factive, hedges,
//! implicative, report.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::clean;

pub const N_FAMILIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CueFamily {
    Assertive,
    Factive,
    Hedges,
    Implicative,
    Report,
}

impl CueFamily {
    pub const ALL: [CueFamily; N_FAMILIES] = [
        CueFamily::Assertive,
        CueFamily::Factive,
        CueFamily::Hedges,
        CueFamily::Implicative,
        CueFamily::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CueFamily::Assertive => "assertive",
            CueFamily::Factive => "factive",
            CueFamily::Hedges => "hedges",
            CueFamily::Implicative => "implicative",
            CueFamily::Report => "report",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }
}

impl fmt::Display for CueFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One family's entries, split into single words and multi-token phrases.
#[derive(Debug, Clone, Default)]
struct Lexicon {
    words: HashSet<String>,
    /// Longest first, so matching is greedy.
    phrases: Vec<Vec<String>>,
}

impl Lexicon {
    fn parse(family: CueFamily, content: &str) -> Result<Self> {
        let mut words = HashSet::new();
        let mut phrases: HashSet<Vec<String>> = HashSet::new();
        for line in content.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks = clean(line);
            match toks.len() {
                0 => {}
                1 => {
                    words.insert(toks.into_iter().next().unwrap());
                }
                _ => {
                    phrases.insert(toks);
                }
            }
        }
        if words.is_empty() && phrases.is_empty() {
            return Err(Error::LexiconEmpty(family.name().to_string()));
        }
        let mut phrases: Vec<Vec<String>> = phrases.into_iter().collect();
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(Lexicon { words, phrases })
    }

    fn len(&self) -> usize {
        self.words.len() + self.phrases.len()
    }

    /// Non-overlapping greedy longest matches over `tokens`.
    fn count(&self, tokens: &[String]) -> usize {
        let mut n = 0;
        let mut i = 0;
        while i < tokens.len() {
            let rest = &tokens[i..];
            if let Some(p) = self.phrases.iter().find(|p| rest.starts_with(p)) {
                n += 1;
                i += p.len();
            } else {
                if self.words.contains(&tokens[i]) {
                    n += 1;
                }
                i += 1;
            }
        }
        n
    }

    fn sorted_entries(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .words
            .iter()
            .cloned()
            .chain(self.phrases.iter().map(|p| p.join(" ")))
            .collect();
        v.sort();
        v
    }
}

/// The five cue lexicons.
#[derive(Debug, Clone)]
pub struct CueLexicons {
    families: [Lexicon; N_FAMILIES],
}

const BUNDLED: [&str; N_FAMILIES] = [
    include_str!("../lexicons/assertive.txt"),
    include_str!("../lexicons/factive.txt"),
    include_str!("../lexicons/hedges.txt"),
    include_str!("../lexicons/implicative.txt"),
    include_str!("../lexicons/report.txt"),
];

impl CueLexicons {
    /// Builds lexicons from the text of the five files, in family order.
    pub fn from_texts(texts: [&str; N_FAMILIES]) -> Result<Self> {
        let mut families: [Lexicon; N_FAMILIES] = Default::default();
        for (slot, (family, text)) in families
            .iter_mut()
            .zip(CueFamily::ALL.into_iter().zip(texts))
        {
            *slot = Lexicon::parse(family, text)?;
        }
        Ok(CueLexicons { families })
    }

    /// The lexicons shipped with this crate.
    pub fn bundled() -> Self {
        Self::from_texts(BUNDLED).expect("bundled lexicons are valid")
    }

    /// Loads `assertive.txt`, `factive.txt`, `hedges.txt`, `implicative.txt`
    /// and `report.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut texts: Vec<String> = Vec::with_capacity(N_FAMILIES);
        for family in CueFamily::ALL {
            let path = dir.join(family.file_name());
            if !path.is_file() {
                return Err(Error::LexiconMissing(family.name().to_string()));
            }
            texts.push(fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
        }
        let lex = Self::from_texts([&texts[0], &texts[1], &texts[2], &texts[3], &texts[4]])?;
        for family in CueFamily::ALL {
            log::info!("{family} lexicon: {} entries", lex.entries(family));
        }
        Ok(lex)
    }

    pub fn entries(&self, family: CueFamily) -> usize {
        self.families[family as usize].len()
    }

    pub fn contains(&self, family: CueFamily, entry: &str) -> bool {
        let lex = &self.families[family as usize];
        let toks = clean(entry);
        match toks.len() {
            1 => lex.words.contains(&toks[0]),
            0 => false,
            _ => lex.phrases.contains(&toks),
        }
    }

    /// Stable 64-bit FNV-1a digest over the sorted entries of every family.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (family, lex) in CueFamily::ALL.iter().zip(&self.families) {
            feed(family.name().as_bytes());
            for e in lex.sorted_entries() {
                feed(&[0]);
                feed(e.as_bytes());
            }
            feed(&[1]);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    RawCount,
    #[default]
    PerToken,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "raw_count" => Ok(Normalization::RawCount),
            "per_token" | "per-token" => Ok(Normalization::PerToken),
            other => Err(Error::Config(format!("unknown cue normalization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueVector {
    pub values: [f64; N_FAMILIES],
    pub normalization: Normalization,
}

/// Counts each family over cleaned `tokens`. Phrases match as contiguous
/// token runs; `PerToken` divides by `max(1, tokens.len())`.
pub fn extract_cues(tokens: &[String], lexicons: &CueLexicons, normalization: Normalization) -> CueVector {
    let mut values = [0.0; N_FAMILIES];
    for (v, lex) in values.iter_mut().zip(&lexicons.families) {
        *v = lex.count(tokens) as f64;
    }
    if normalization == Normalization::PerToken {
        let n = tokens.len().max(1) as f64;
        values.iter_mut().for_each(|v| *v /= n);
    }
    CueVector {
        values,
        normalization,
    }
}
