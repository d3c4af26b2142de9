//! Cycle-level recoding of connection words.
//!
//! A coding assigns a letter to each constituent cycle, all sharing a common
//! anchor connection: on the two-cycle network with cycles `1-2-3` and
//! `1-4-5` the letters are `A = 1-2-3` and `B = 1-4-5`, and a word such as
//! `1-2-3-1-4-5` compresses to `AB`. Only sequences starting at the anchor
//! are codable; multi-anchor codings are not supported.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ConnectionId, HeteroclinicNetwork, SymbolSequence};
use crate::error::CodingError;

/// A symbol table from cycle labels to the connection words they stand for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCoding {
    anchor: ConnectionId,
    symbols: BTreeMap<String, Vec<ConnectionId>>,
}

impl CycleCoding {
    /// Validates the coding against a network.
    ///
    /// Every coded word must be a valid path that starts with the anchor and
    /// returns to the anchor's source, and no coded word may be a prefix of
    /// another (that would make parsing ambiguous).
    pub fn new(
        net: &HeteroclinicNetwork,
        anchor: ConnectionId,
        symbols: BTreeMap<String, Vec<ConnectionId>>,
    ) -> Result<Self, CodingError> {
        if symbols.is_empty() {
            return Err(CodingError::Empty);
        }
        let anchor_source = net
            .alpha(anchor)
            .map_err(|e| CodingError::InvalidWord { label: "<anchor>".into(), source: e })?;
        for (label, word) in &symbols {
            if word.is_empty() {
                return Err(CodingError::EmptyWord(label.clone()));
            }
            if word[0] != anchor {
                return Err(CodingError::NotAnchored { label: label.clone(), anchor: anchor.0 });
            }
            match net.validate_word(word) {
                Ok(outcome) if outcome.is_valid() => {}
                Ok(_) | Err(_) => {
                    let source = match net.validate_word(word) {
                        Err(e) => e,
                        Ok(super::ValidationOutcome::InvalidAt(i)) => {
                            crate::error::SequenceError::EndpointMismatch {
                                index: i,
                                previous: word[i - 1].0,
                                next: word[i].0,
                            }
                        }
                        Ok(_) => unreachable!(),
                    };
                    return Err(CodingError::InvalidWord { label: label.clone(), source });
                }
            }
            let last = *word.last().unwrap();
            let closes = net
                .omega(last)
                .map_err(|e| CodingError::InvalidWord { label: label.clone(), source: e })?;
            if closes != anchor_source {
                return Err(CodingError::NotClosed { label: label.clone() });
            }
        }
        for (a, wa) in &symbols {
            for (b, wb) in &symbols {
                if a != b && wb.len() > wa.len() && wb[..wa.len()] == wa[..] {
                    return Err(CodingError::AmbiguousParse {
                        shorter: a.clone(),
                        longer: b.clone(),
                    });
                }
            }
        }
        Ok(Self { anchor, symbols })
    }

    pub fn anchor(&self) -> ConnectionId {
        self.anchor
    }

    pub fn symbols(&self) -> &BTreeMap<String, Vec<ConnectionId>> {
        &self.symbols
    }

    /// Rewrites a connection word as cycle labels. The word must start at
    /// the anchor and consist of whole coded blocks.
    pub fn recode(&self, word: &[ConnectionId]) -> Result<String, CodingError> {
        let (labels, consumed) = self.recode_greedy(word)?;
        if consumed != word.len() {
            return Err(CodingError::NotCodable { index: consumed });
        }
        Ok(labels)
    }

    /// Like [`recode`](Self::recode) but tolerates a trailing partial block,
    /// returning the labels parsed and how many symbols they consumed.
    /// Useful for words truncated by a finite record.
    pub fn recode_partial(&self, word: &[ConnectionId]) -> Result<(String, usize), CodingError> {
        self.recode_greedy(word)
    }

    fn recode_greedy(&self, word: &[ConnectionId]) -> Result<(String, usize), CodingError> {
        let mut labels = String::new();
        let mut pos = 0;
        'outer: while pos < word.len() {
            for (label, block) in &self.symbols {
                if word.len() - pos >= block.len() && word[pos..pos + block.len()] == block[..] {
                    labels.push_str(label);
                    pos += block.len();
                    continue 'outer;
                }
            }
            // A strict parse fails here; a partial parse succeeds only if the
            // remaining symbols are a proper prefix of some block.
            let remainder = &word[pos..];
            let is_partial_block = self
                .symbols
                .values()
                .any(|block| block.len() > remainder.len() && block[..remainder.len()] == remainder[..]);
            if is_partial_block {
                return Ok((labels, pos));
            }
            return Err(CodingError::NotCodable { index: pos });
        }
        Ok((labels, pos))
    }

    /// Expands a string of cycle labels back into a connection word.
    pub fn decode(&self, labels: &str) -> Result<SymbolSequence, CodingError> {
        let mut word = Vec::new();
        for ch in labels.chars() {
            let label = ch.to_string();
            let block = self
                .symbols
                .get(&label)
                .ok_or(CodingError::UnknownLabel(label))?;
            word.extend_from_slice(block);
        }
        Ok(SymbolSequence::finite(word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::kirk_silber_graph;

    fn ids(word: &[u32]) -> Vec<ConnectionId> {
        word.iter().map(|&q| ConnectionId(q)).collect()
    }

    fn ks_coding() -> (HeteroclinicNetwork, CycleCoding) {
        let net = kirk_silber_graph();
        let coding = CycleCoding::new(
            &net,
            ConnectionId(1),
            BTreeMap::from([
                ("A".to_string(), ids(&[1, 2, 3])),
                ("B".to_string(), ids(&[1, 4, 5])),
            ]),
        )
        .unwrap();
        (net, coding)
    }

    #[test]
    fn recode_both_cycles() {
        let (_, coding) = ks_coding();
        assert_eq!(coding.recode(&ids(&[1, 2, 3, 1, 4, 5])).unwrap(), "AB");
    }

    #[test]
    fn decode_single_label() {
        let (_, coding) = ks_coding();
        let seq = coding.decode("A").unwrap();
        assert_eq!(seq.prefix(10), ids(&[1, 2, 3]));
    }

    #[test]
    fn word_not_starting_at_anchor_is_not_codable() {
        let (_, coding) = ks_coding();
        assert_eq!(
            coding.recode(&ids(&[2, 3, 1])).unwrap_err(),
            CodingError::NotCodable { index: 0 }
        );
    }

    #[test]
    fn partial_trailing_block_is_tolerated_by_the_lenient_parse() {
        let (_, coding) = ks_coding();
        let (labels, consumed) = coding.recode_partial(&ids(&[1, 2, 3, 1, 4])).unwrap();
        assert_eq!(labels, "A");
        assert_eq!(consumed, 3);
        // The strict parse reports the block boundary instead.
        assert_eq!(
            coding.recode(&ids(&[1, 2, 3, 1, 4])).unwrap_err(),
            CodingError::NotCodable { index: 3 }
        );
    }

    #[test]
    fn coded_words_must_close_at_the_anchor_source() {
        let net = kirk_silber_graph();
        let err = CycleCoding::new(
            &net,
            ConnectionId(1),
            BTreeMap::from([("A".to_string(), ids(&[1, 2]))]),
        )
        .unwrap_err();
        assert_eq!(err, CodingError::NotClosed { label: "A".to_string() });
    }

    #[test]
    fn prefix_words_make_parsing_ambiguous() {
        let net = kirk_silber_graph();
        let err = CycleCoding::new(
            &net,
            ConnectionId(1),
            BTreeMap::from([
                ("A".to_string(), ids(&[1, 2, 3])),
                ("C".to_string(), ids(&[1, 2, 3, 1, 2, 3])),
            ]),
        )
        .unwrap_err();
        assert!(matches!(err, CodingError::AmbiguousParse { .. }));
    }
}
