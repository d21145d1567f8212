use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::Tokenizer;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A matched entity span over token indices `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl EntitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Surface-form to entity-type map. Entries are stored as tokenized,
/// lowercased surface sequences so multi-word forms match token runs.
#[derive(Debug, Clone, Default)]
pub struct EntityLexicon {
    entries: HashMap<Vec<String>, String>,
    max_len: usize,
}

impl EntityLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds an entry. Re-adding a surface with the same type is a no-op;
    /// a conflicting type is rejected.
    pub fn insert(&mut self, surface: &str, kind: &str) -> Result<(), String> {
        let key = Tokenizer::bundled().split(surface);
        if key.is_empty() {
            return Err("empty surface form".to_string());
        }
        let kind = kind.trim();
        if kind.is_empty() {
            return Err("empty entity type".to_string());
        }
        match self.entries.get(&key) {
            Some(existing) if existing != kind => Err(format!(
                "'{}' already has type {existing}, not {kind}",
                key.join(" ")
            )),
            Some(_) => Ok(()),
            None => {
                self.max_len = self.max_len.max(key.len());
                self.entries.insert(key, kind.to_string());
                Ok(())
            }
        }
    }

    /// Parses `surface<TAB>type` lines. Blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut lexicon = EntityLexicon::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, kind) = line.split_once('\t').ok_or_else(|| LexiconError::Parse {
                line: i + 1,
                message: "expected surface<TAB>type".to_string(),
            })?;
            lexicon
                .insert(surface, kind)
                .map_err(|message| LexiconError::Parse {
                    line: i + 1,
                    message,
                })?;
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&text)
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.entries
            .get(&Tokenizer::bundled().split(surface))
            .map(String::as_str)
    }

    /// Non-overlapping matches over lowercased surfaces, ordered by start.
    /// Among overlapping candidates the longer span wins; equal lengths go
    /// to the earlier start.
    pub fn find_spans<S: AsRef<str>>(&self, surfaces: &[S]) -> Vec<EntitySpan> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        let mut candidates = Vec::new();
        let mut key: Vec<String> = Vec::with_capacity(self.max_len);
        for start in 0..surfaces.len() {
            key.clear();
            for end in start + 1..=(start + self.max_len).min(surfaces.len()) {
                key.push(surfaces[end - 1].as_ref().to_string());
                if let Some(kind) = self.entries.get(&key) {
                    candidates.push(EntitySpan {
                        start,
                        end,
                        kind: kind.clone(),
                    });
                }
            }
        }
        candidates.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
        let mut taken = vec![false; surfaces.len()];
        let mut chosen = Vec::new();
        for span in candidates {
            if taken[span.start..span.end].iter().any(|&t| t) {
                continue;
            }
            taken[span.start..span.end]
                .iter_mut()
                .for_each(|t| *t = true);
            chosen.push(span);
        }
        chosen.sort_by_key(|s| s.start);
        chosen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(lex: &EntityLexicon, text: &str) -> Vec<(usize, usize, String)> {
        let words: Vec<&str> = text.split(' ').collect();
        lex.find_spans(&words)
            .into_iter()
            .map(|s| (s.start, s.end, s.kind))
            .collect()
    }

    #[test]
    fn longer_span_wins_over_earlier_shorter() {
        let lex = EntityLexicon::from_tsv("a b\tX\nb c d\tY\n").unwrap();
        assert_eq!(spans(&lex, "a b c d"), vec![(1, 4, "Y".to_string())]);
    }

    #[test]
    fn equal_length_tie_goes_to_earlier_start() {
        let lex = EntityLexicon::from_tsv("a b\tX\nb c\tY\n").unwrap();
        assert_eq!(spans(&lex, "a b c"), vec![(0, 2, "X".to_string())]);
    }

    #[test]
    fn surfaces_are_normalized() {
        let lex = EntityLexicon::from_tsv("Septic Shock\tDISEASE\n").unwrap();
        assert_eq!(lex.get("septic shock"), Some("DISEASE"));
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn conflicting_duplicate_rejected() {
        let err = EntityLexicon::from_tsv("flu\tDISEASE\nFLU\tDRUG\n").unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_tab_rejected() {
        assert!(EntityLexicon::from_tsv("flu DISEASE").is_err());
    }
}
