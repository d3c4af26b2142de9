//! Symbolic sequences over connection labels.
//!
//! Three representations cover what a finite machine can hold: finite words,
//! eventually periodic words stored as head plus primitive tail (exact), and
//! rule-generated words evaluated lazily per index. True aperiodicity is
//! never asserted; a generated sequence with no repeat structure inside the
//! inspected prefix is reported as aperiodic *within that horizon* only.

use serde::{Deserialize, Serialize};

use super::ConnectionId;
use crate::error::SequenceError;

/// Result of checking consecutive-endpoint matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationOutcome {
    Valid,
    /// First index whose symbol does not continue from its predecessor.
    InvalidAt(usize),
}

impl ValidationOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidationOutcome::Valid)
    }
}

/// Periodicity classification of an inspected prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Periodicity {
    /// Repeats with (minimal) period `period` from the start.
    Periodic { period: usize },
    /// Repeats with (minimal) period `period` after `preperiod` symbols.
    Preperiodic { period: usize, preperiod: usize },
    /// No convincing repeat structure within the inspected prefix.
    AperiodicWithinHorizon { horizon: usize },
}

/// Rules for lazily generated infinite words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorRule {
    /// `lead · base · filler^(start) · base · filler^(start+step) · ...`
    ///
    /// With `start = 1`, `step = 1` this is the block family whose filler
    /// runs grow without bound, so no tail period ever establishes itself.
    /// The `lead` word exists so that shifts of a rule stay in the family.
    IncreasingBlocks {
        #[serde(default)]
        lead: Vec<ConnectionId>,
        base: Vec<ConnectionId>,
        filler: Vec<ConnectionId>,
        start: usize,
        step: usize,
    },
}

impl GeneratorRule {
    /// `base · filler^j · base · filler^(j+step) · ...` without any lead.
    pub fn increasing_blocks(
        base: Vec<ConnectionId>,
        filler: Vec<ConnectionId>,
        start: usize,
        step: usize,
    ) -> Self {
        GeneratorRule::IncreasingBlocks { lead: Vec::new(), base, filler, start, step }
    }

    fn symbol_at(&self, index: usize) -> ConnectionId {
        match self {
            GeneratorRule::IncreasingBlocks { lead, base, filler, start, step } => {
                if index < lead.len() {
                    return lead[index];
                }
                // Walk block pairs (base, filler^j) until the index falls inside.
                let mut remaining = index - lead.len();
                let mut j = *start;
                loop {
                    if remaining < base.len() {
                        return base[remaining];
                    }
                    remaining -= base.len();
                    let run = filler.len() * j;
                    if remaining < run {
                        return filler[remaining % filler.len()];
                    }
                    remaining -= run;
                    j += *step;
                }
            }
        }
    }

    fn is_degenerate(&self) -> bool {
        match self {
            GeneratorRule::IncreasingBlocks { filler, step, .. } => {
                filler.is_empty() || *step == 0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
enum Kind {
    Finite(Vec<ConnectionId>),
    /// `head · tail^∞` with `tail` primitive and the head minimal, so the
    /// stored (preperiod, period) pair is canonical.
    EventuallyPeriodic { head: Vec<ConnectionId>, tail: Vec<ConnectionId> },
    Generated { rule: GeneratorRule, checked_horizon: usize },
}

/// A finite, eventually periodic, or generated word over connection labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    kind: Kind,
}

impl SymbolSequence {
    pub fn finite(word: Vec<ConnectionId>) -> Self {
        Self { kind: Kind::Finite(word) }
    }

    /// `head · tail^∞`. The tail is reduced to its primitive root and the
    /// head is shortened as far as possible, so period and preperiod are
    /// minimal by construction.
    pub fn eventually_periodic(
        head: Vec<ConnectionId>,
        tail: Vec<ConnectionId>,
    ) -> Result<Self, SequenceError> {
        if tail.is_empty() {
            return Err(SequenceError::EmptyTail);
        }
        let (head, tail) = normalize(head, primitive_root(tail));
        Ok(Self { kind: Kind::EventuallyPeriodic { head, tail } })
    }

    pub fn periodic(tail: Vec<ConnectionId>) -> Result<Self, SequenceError> {
        Self::eventually_periodic(Vec::new(), tail)
    }

    pub fn generated(rule: GeneratorRule, checked_horizon: usize) -> Result<Self, SequenceError> {
        if rule.is_degenerate() {
            return Err(SequenceError::DegenerateRule);
        }
        Ok(Self { kind: Kind::Generated { rule, checked_horizon } })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, Kind::Finite(_))
    }

    /// Length of a finite word, `None` for infinite sequences.
    pub fn len(&self) -> Option<usize> {
        match &self.kind {
            Kind::Finite(w) => Some(w.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Symbol at `index`, if the sequence extends that far.
    pub fn symbol_at(&self, index: usize) -> Option<ConnectionId> {
        match &self.kind {
            Kind::Finite(w) => w.get(index).copied(),
            Kind::EventuallyPeriodic { head, tail } => {
                if index < head.len() {
                    Some(head[index])
                } else {
                    Some(tail[(index - head.len()) % tail.len()])
                }
            }
            Kind::Generated { rule, .. } => Some(rule.symbol_at(index)),
        }
    }

    /// First `len` symbols (fewer if the sequence is shorter).
    pub fn prefix(&self, len: usize) -> Vec<ConnectionId> {
        match &self.kind {
            Kind::Finite(w) => w.iter().take(len).copied().collect(),
            _ => (0..len).map(|i| self.symbol_at(i).unwrap()).collect(),
        }
    }

    /// Symbols `from..from+len`.
    pub fn window(&self, from: usize, len: usize) -> Vec<ConnectionId> {
        (from..from + len)
            .map_while(|i| self.symbol_at(i))
            .collect()
    }

    /// Exact symbol support for representations that close up (finite words
    /// and eventually periodic words); `None` when only a prefix is known.
    pub(super) fn exact_symbol_support(&self) -> Option<Vec<ConnectionId>> {
        match &self.kind {
            Kind::Finite(w) => Some(w.clone()),
            Kind::EventuallyPeriodic { head, tail } => {
                Some(head.iter().chain(tail.iter()).copied().collect())
            }
            Kind::Generated { .. } => None,
        }
    }

    /// Head and tail of the eventually periodic normal form, if stored.
    pub fn periodic_parts(&self) -> Option<(&[ConnectionId], &[ConnectionId])> {
        match &self.kind {
            Kind::EventuallyPeriodic { head, tail } => Some((head, tail)),
            _ => None,
        }
    }

    /// Drops the first `k` symbols.
    ///
    /// For eventually periodic sequences the head shrinks and then the tail
    /// rotates; rotations of a primitive word stay primitive, so the result
    /// is again in normal form.
    pub fn shift(&self, k: usize) -> Result<Self, SequenceError> {
        match &self.kind {
            Kind::Finite(w) => {
                if k > w.len() {
                    Err(SequenceError::ShiftPastEnd { shift: k, len: w.len() })
                } else {
                    Ok(Self::finite(w[k..].to_vec()))
                }
            }
            Kind::EventuallyPeriodic { head, tail } => {
                if k <= head.len() {
                    Ok(Self { kind: Kind::EventuallyPeriodic { head: head[k..].to_vec(), tail: tail.clone() } })
                } else {
                    let offset = (k - head.len()) % tail.len();
                    let mut rotated = tail[offset..].to_vec();
                    rotated.extend_from_slice(&tail[..offset]);
                    Ok(Self { kind: Kind::EventuallyPeriodic { head: Vec::new(), tail: rotated } })
                }
            }
            Kind::Generated { rule, checked_horizon } => Ok(Self {
                kind: Kind::Generated {
                    rule: shift_rule(rule, k),
                    checked_horizon: checked_horizon.saturating_sub(k),
                },
            }),
        }
    }

    /// Classifies the repeat structure of the first `horizon` symbols.
    ///
    /// Eventually periodic sequences answer from their normal form. For the
    /// rest, a candidate (period, preperiod) found in the prefix is accepted
    /// only when the periodic part covers at least two full periods *and* at
    /// least half the inspected prefix; anything weaker reports
    /// `AperiodicWithinHorizon`, never a claim about the unseen remainder.
    pub fn classify_periodicity(&self, horizon: usize) -> Result<Periodicity, SequenceError> {
        if horizon < 2 {
            return Err(SequenceError::HorizonTooSmall(horizon));
        }
        if let Kind::EventuallyPeriodic { head, tail } = &self.kind {
            return Ok(if head.is_empty() {
                Periodicity::Periodic { period: tail.len() }
            } else {
                Periodicity::Preperiodic { period: tail.len(), preperiod: head.len() }
            });
        }
        let prefix = self.prefix(horizon);
        match canonical_word_form(&prefix) {
            WordForm::EventuallyPeriodic { head, tail } => Ok(if head.is_empty() {
                Periodicity::Periodic { period: tail.len() }
            } else {
                Periodicity::Preperiodic { period: tail.len(), preperiod: head.len() }
            }),
            WordForm::Irregular(_) => Ok(Periodicity::AperiodicWithinHorizon { horizon }),
        }
    }

    /// Compares two sequences symbol by symbol over `horizon` positions.
    pub fn agrees_with(&self, other: &Self, horizon: usize) -> bool {
        (0..horizon).all(|i| self.symbol_at(i) == other.symbol_at(i))
    }

    /// Render as `q1-q2-...` (head) plus `(t1-t2-...)` for a periodic tail.
    pub fn display(&self, horizon: usize) -> String {
        match &self.kind {
            Kind::EventuallyPeriodic { head, tail } => {
                let h = join_word(head);
                let t = join_word(tail);
                if head.is_empty() {
                    format!("({t})")
                } else {
                    format!("{h}({t})")
                }
            }
            _ => join_word(&self.prefix(horizon)),
        }
    }
}

fn shift_rule(rule: &GeneratorRule, k: usize) -> GeneratorRule {
    match rule {
        GeneratorRule::IncreasingBlocks { lead, base, filler, start, step } => {
            if k <= lead.len() {
                return GeneratorRule::IncreasingBlocks {
                    lead: lead[k..].to_vec(),
                    base: base.clone(),
                    filler: filler.clone(),
                    start: *start,
                    step: *step,
                };
            }
            // Drop whole (base, filler^j) blocks, then cut inside one; the
            // cut block's remainder becomes the new lead.
            let mut k = k - lead.len();
            let mut j = *start;
            loop {
                let block = base.len() + filler.len() * j;
                if k < block {
                    break;
                }
                k -= block;
                j += *step;
            }
            let mut new_lead: Vec<ConnectionId> = base.iter().copied().collect();
            for i in 0..filler.len() * j {
                new_lead.push(filler[i % filler.len()]);
            }
            new_lead.drain(..k);
            GeneratorRule::IncreasingBlocks {
                lead: new_lead,
                base: base.clone(),
                filler: filler.clone(),
                start: j + step,
                step: *step,
            }
        }
    }
}

/// Shortest word whose repetition gives `word`.
fn primitive_root(word: Vec<ConnectionId>) -> Vec<ConnectionId> {
    let n = word.len();
    for d in 1..=n / 2 {
        if n % d == 0 && (d..n).all(|i| word[i] == word[i - d]) {
            return word[..d].to_vec();
        }
    }
    word
}

/// Minimizes the preperiod: while the head's last symbol matches the tail's
/// last symbol, absorb it by rotating the tail right.
fn normalize(
    mut head: Vec<ConnectionId>,
    mut tail: Vec<ConnectionId>,
) -> (Vec<ConnectionId>, Vec<ConnectionId>) {
    while let Some(&last) = head.last() {
        if last == *tail.last().unwrap() {
            head.pop();
            let rotated = tail.pop().unwrap();
            tail.insert(0, rotated);
        } else {
            break;
        }
    }
    (head, tail)
}

fn join_word(word: &[ConnectionId]) -> String {
    word.iter()
        .map(|c| c.0.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Eventually periodic normal form detected inside a finite observed word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordForm {
    /// `head · tail^∞`, with minimal preperiod and primitive tail.
    EventuallyPeriodic { head: Vec<ConnectionId>, tail: Vec<ConnectionId> },
    /// No convincing repeat structure inside the word.
    Irregular(Vec<ConnectionId>),
}

impl WordForm {
    /// The word laid out to `len` symbols.
    pub fn expand(&self, len: usize) -> Vec<ConnectionId> {
        match self {
            WordForm::EventuallyPeriodic { head, tail } => {
                let mut out = Vec::with_capacity(len);
                out.extend_from_slice(head);
                let mut i = 0;
                while out.len() < len {
                    out.push(tail[i % tail.len()]);
                    i += 1;
                }
                out.truncate(len);
                out
            }
            WordForm::Irregular(w) => w.iter().take(len).copied().collect(),
        }
    }

    /// Lexicographically minimal rotation of the tail: the label shared by
    /// all shifts of the same periodic core.
    pub fn shift_class_label(&self) -> String {
        match self {
            WordForm::EventuallyPeriodic { tail, .. } => {
                format!("({})", join_word(&minimal_rotation(tail)))
            }
            WordForm::Irregular(w) => join_word(w),
        }
    }

    pub fn key(&self) -> String {
        match self {
            WordForm::EventuallyPeriodic { head, tail } => {
                if head.is_empty() {
                    format!("({})", join_word(tail))
                } else {
                    format!("{}({})", join_word(head), join_word(tail))
                }
            }
            WordForm::Irregular(w) => join_word(w),
        }
    }
}

fn minimal_rotation(word: &[ConnectionId]) -> Vec<ConnectionId> {
    let mut best = word.to_vec();
    for r in 1..word.len() {
        let mut candidate = word[r..].to_vec();
        candidate.extend_from_slice(&word[..r]);
        if candidate < best {
            best = candidate;
        }
    }
    best
}

/// Detects the eventually periodic normal form of an observed word.
///
/// The detected tail must repeat at least twice and cover at least half of
/// the word; otherwise the word is kept raw. This keeps a short trailing
/// repeat from masquerading as the word's eventual period.
pub fn canonical_word_form(word: &[ConnectionId]) -> WordForm {
    let n = word.len();
    for period in 1..=n / 2 {
        // Scan backwards for the smallest start index from which the word is
        // `period`-periodic through its end.
        let mut start = n - period;
        while start > 0 && word[start - 1] == word[start - 1 + period] {
            start -= 1;
        }
        let tail_len = n - start;
        if tail_len >= 2 * period && start <= n / 2 {
            let tail = primitive_root(word[start..start + period].to_vec());
            let (head, tail) = normalize(word[..start].to_vec(), tail);
            return WordForm::EventuallyPeriodic { head, tail };
        }
    }
    WordForm::Irregular(word.to_vec())
}

/// Whether one finite word can be obtained from the other by dropping
/// leading symbols, comparing as far as both reach.
pub fn shift_related_words(a: &[ConnectionId], b: &[ConnectionId]) -> bool {
    let compatible = |long: &[ConnectionId], short: &[ConnectionId]| {
        (0..=long.len()).any(|k| {
            let rest = &long[k..];
            let overlap = rest.len().min(short.len());
            overlap > 0 && rest[..overlap] == short[..overlap]
        })
    };
    if a.is_empty() || b.is_empty() {
        return true;
    }
    compatible(a, b) || compatible(b, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(word: &[u32]) -> Vec<ConnectionId> {
        word.iter().map(|&q| ConnectionId(q)).collect()
    }

    #[test]
    fn shift_drops_leading_symbols() {
        let seq = SymbolSequence::finite(ids(&[1, 2, 3, 4]));
        assert_eq!(seq.shift(1).unwrap().prefix(10), ids(&[2, 3, 4]));
        assert_eq!(seq.shift(0).unwrap(), seq);
        assert_eq!(seq.shift(4).unwrap().prefix(10), ids(&[]));
        assert_eq!(
            seq.shift(5).unwrap_err(),
            SequenceError::ShiftPastEnd { shift: 5, len: 4 }
        );
    }

    #[test]
    fn shift_rotates_a_periodic_tail() {
        let seq = SymbolSequence::periodic(ids(&[1, 2, 3])).unwrap();
        let shifted = seq.shift(1).unwrap();
        let expected = SymbolSequence::periodic(ids(&[2, 3, 1])).unwrap();
        assert_eq!(shifted, expected);
        assert!(shifted.agrees_with(&expected, 50));
    }

    #[test]
    fn shift_consumes_the_head_first() {
        let seq = SymbolSequence::eventually_periodic(ids(&[5]), ids(&[1, 2, 3])).unwrap();
        assert_eq!(seq.prefix(5), ids(&[5, 1, 2, 3, 1]));
        let s1 = seq.shift(1).unwrap();
        assert_eq!(s1, SymbolSequence::periodic(ids(&[1, 2, 3])).unwrap());
        let s2 = seq.shift(2).unwrap();
        assert_eq!(s2, SymbolSequence::periodic(ids(&[2, 3, 1])).unwrap());
    }

    #[test]
    fn tail_is_reduced_to_its_primitive_root() {
        let seq = SymbolSequence::periodic(ids(&[1, 2, 1, 2])).unwrap();
        assert_eq!(
            seq.classify_periodicity(10).unwrap(),
            Periodicity::Periodic { period: 2 }
        );
    }

    #[test]
    fn head_is_minimized_on_construction() {
        // 5-1-2-3 followed by (1-2-3)^inf collapses to head "5".
        let seq =
            SymbolSequence::eventually_periodic(ids(&[5, 1, 2, 3]), ids(&[1, 2, 3])).unwrap();
        assert_eq!(
            seq.classify_periodicity(10).unwrap(),
            Periodicity::Preperiodic { period: 3, preperiod: 1 }
        );
        assert_eq!(seq.prefix(7), ids(&[5, 1, 2, 3, 1, 2, 3]));
    }

    #[test]
    fn classification_of_explicit_encodings() {
        let periodic = SymbolSequence::periodic(ids(&[1, 2, 3])).unwrap();
        assert_eq!(
            periodic.classify_periodicity(100).unwrap(),
            Periodicity::Periodic { period: 3 }
        );
        let pre = SymbolSequence::eventually_periodic(ids(&[5]), ids(&[1, 2, 3])).unwrap();
        assert_eq!(
            pre.classify_periodicity(100).unwrap(),
            Periodicity::Preperiodic { period: 3, preperiod: 1 }
        );
        assert_eq!(
            pre.classify_periodicity(1).unwrap_err(),
            SequenceError::HorizonTooSmall(1)
        );
    }

    #[test]
    fn growing_blocks_have_no_period_within_horizon() {
        // base=(1,2,3), filler=(1,4,5): runs of the filler grow each block,
        // so no repeat structure can cover half the prefix.
        let rule = GeneratorRule::increasing_blocks(ids(&[1, 2, 3]), ids(&[1, 4, 5]), 1, 1);
        let seq = SymbolSequence::generated(rule, 10_000).unwrap();
        assert_eq!(seq.prefix(9), ids(&[1, 2, 3, 1, 4, 5, 1, 2, 3]));
        assert_eq!(
            seq.classify_periodicity(10_000).unwrap(),
            Periodicity::AperiodicWithinHorizon { horizon: 10_000 }
        );
    }

    #[test]
    fn generated_shift_agrees_with_indexing() {
        let rule = GeneratorRule::increasing_blocks(ids(&[1, 2, 3]), ids(&[1, 4, 5]), 1, 1);
        let seq = SymbolSequence::generated(rule, 1000).unwrap();
        for k in [0usize, 1, 3, 4, 7, 20, 55] {
            let shifted = seq.shift(k).unwrap();
            for i in 0..60 {
                assert_eq!(shifted.symbol_at(i), seq.symbol_at(i + k), "k={k} i={i}");
            }
        }
        // Shifting twice composes.
        let once = seq.shift(5).unwrap().shift(8).unwrap();
        let direct = seq.shift(13).unwrap();
        assert!(once.agrees_with(&direct, 200));
    }

    #[test]
    fn canonical_form_detects_head_and_tail() {
        let w = ids(&[1, 2, 3, 1, 4, 5, 1, 4, 5, 1, 4, 5, 1]);
        match canonical_word_form(&w) {
            WordForm::EventuallyPeriodic { head, tail } => {
                assert_eq!(head, ids(&[1, 2, 3]));
                assert_eq!(tail, ids(&[1, 4, 5]));
            }
            other => panic!("expected periodic form, got {other:?}"),
        }
    }

    #[test]
    fn canonical_form_keeps_short_trailing_repeats_raw() {
        // The tail run covers less than half the word.
        let w = ids(&[9, 8, 7, 6, 5, 4, 3, 2, 1, 1, 1]);
        assert!(matches!(canonical_word_form(&w), WordForm::Irregular(_)));
    }

    #[test]
    fn shift_class_label_merges_rotations() {
        let a = canonical_word_form(&ids(&[1, 4, 5, 1, 4, 5, 1, 4, 5]));
        let b = canonical_word_form(&ids(&[4, 5, 1, 4, 5, 1, 4, 5]));
        assert_eq!(a.shift_class_label(), b.shift_class_label());
        assert_ne!(a.key(), b.key());
    }

    #[test]
    fn shift_related_suffix_overlap() {
        assert!(shift_related_words(&ids(&[4, 5, 1, 4, 5]), &ids(&[1, 4, 5, 1])));
        assert!(shift_related_words(&ids(&[1, 2, 3, 1, 4, 5]), &ids(&[1, 4, 5])));
        assert!(!shift_related_words(&ids(&[1, 2, 3, 1, 2, 3]), &ids(&[1, 4, 5])));
    }
}
