//! Statistical style model trained from a corpus of lead sheets.
//!
//! Two Markov chains (one over notes, one over chord events) capture the
//! sequential style; a harmonic model captures which melody pitch classes
//! sound over which chord, weighted by overlap ticks. There is no
//! smoothing: transitions never observed in the corpus are impossible, so
//! everything generated stays inside the style and partition functions stay
//! exact.
//!
//! Chains support order `k >= 1` by tupling: a state is the context of the
//! last `min(position, k)` elements, so sequence starts naturally run
//! through shorter contexts, and every element is emitted exactly once with
//! its own duration.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::notation::{chord_onsets, chord_total_ticks, ChordEvent, ChordQuality, LeadSheet, Note};

/// Elements a chain can be trained over.
pub trait ChainElement: Clone + Ord + Send + Sync {
    fn element_ticks(&self) -> u32;
}

impl ChainElement for Note {
    fn element_ticks(&self) -> u32 {
        self.ticks()
    }
}

impl ChainElement for ChordEvent {
    fn element_ticks(&self) -> u32 {
        self.ticks()
    }
}

/// An order-`k` Markov chain over elements of type `T`, stored sparsely.
///
/// Contexts are the distinct n-grams (length 1..=k) observed in the
/// training sequences, indexed in sorted order. A context with no observed
/// continuation simply has an empty transition row (absorbing).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T> {
    order: usize,
    vocab: Vec<T>,
    contexts: Vec<Vec<u32>>,
    ctx_index: BTreeMap<Vec<u32>, u32>,
    /// Distribution of the first element, as `(vocab index, probability)`.
    initial: Vec<(u32, f64)>,
    /// Per context: `(vocab index, probability)` rows summing to 1, or empty.
    transitions: Vec<Vec<(u32, f64)>>,
}

impl<T: ChainElement> ChainModel<T> {
    pub fn train(sequences: &[Vec<T>], order: usize) -> Result<ChainModel<T>> {
        if order == 0 {
            return Err(Error::InvalidArgument(String::from("chain order must be at least 1")));
        }
        if sequences.iter().all(|s| s.is_empty()) {
            return Err(Error::InvalidArgument(String::from("cannot train a chain on empty sequences")));
        }

        let mut vocab: Vec<T> = sequences.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        let vocab_of = |e: &T| -> u32 {
            vocab.binary_search(e).expect("element is in the vocabulary") as u32
        };

        let mut initial_counts: BTreeMap<u32, u64> = BTreeMap::new();
        let mut gram_counts: BTreeMap<(Vec<u32>, u32), u64> = BTreeMap::new();
        let mut context_set: BTreeMap<Vec<u32>, ()> = BTreeMap::new();

        for seq in sequences {
            if seq.is_empty() {
                continue;
            }
            let idx: Vec<u32> = seq.iter().map(|e| vocab_of(e)).collect();
            *initial_counts.entry(idx[0]).or_insert(0) += 1;
            for pos in 0..idx.len() {
                for len in 1..=order.min(pos + 1) {
                    let ctx = idx[pos + 1 - len..=pos].to_vec();
                    context_set.entry(ctx.clone()).or_insert(());
                    if pos + 1 < idx.len() {
                        *gram_counts.entry((ctx, idx[pos + 1])).or_insert(0) += 1;
                    }
                }
            }
        }

        let contexts: Vec<Vec<u32>> = context_set.into_keys().collect();
        let ctx_index: BTreeMap<Vec<u32>, u32> =
            contexts.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();

        let total_starts: u64 = initial_counts.values().sum();
        let initial: Vec<(u32, f64)> = initial_counts
            .into_iter()
            .map(|(v, c)| (v, c as f64 / total_starts as f64))
            .collect();

        let mut transitions: Vec<Vec<(u32, f64)>> = vec![Vec::new(); contexts.len()];
        let mut row_totals: Vec<u64> = vec![0; contexts.len()];
        for ((ctx, next), count) in &gram_counts {
            let id = ctx_index[ctx] as usize;
            row_totals[id] += count;
            transitions[id].push((*next, *count as f64));
        }
        for (row, total) in transitions.iter_mut().zip(&row_totals) {
            for entry in row.iter_mut() {
                entry.1 /= *total as f64;
            }
        }

        Ok(ChainModel { order, vocab, contexts, ctx_index, initial, transitions })
    }

    /// Reassemble a chain from explicit tables (the on-disk model form).
    pub fn from_parts(
        order: usize,
        vocab: Vec<T>,
        contexts: Vec<Vec<u32>>,
        initial: Vec<(u32, f64)>,
        transitions: Vec<Vec<(u32, f64)>>,
    ) -> Result<ChainModel<T>> {
        if order == 0 {
            return Err(Error::InvalidArgument(String::from("chain order must be at least 1")));
        }
        if vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(String::from("vocabulary must be sorted and distinct")));
        }
        if transitions.len() != contexts.len() {
            return Err(Error::Validation(String::from("one transition row per context required")));
        }
        let in_vocab = |v: u32| (v as usize) < vocab.len();
        for ctx in &contexts {
            if ctx.is_empty() || ctx.len() > order || !ctx.iter().all(|v| in_vocab(*v)) {
                return Err(Error::Validation(String::from("context length or indices out of range")));
            }
        }
        for row in transitions.iter().filter(|r| !r.is_empty()) {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if crate::math::abs(sum - 1.0) > 1e-9 {
                return Err(Error::Validation(alloc::format!("transition row sums to {sum}, not 1")));
            }
            if !row.iter().all(|(v, p)| in_vocab(*v) && *p >= 0.0) {
                return Err(Error::Validation(String::from("transition entry out of range")));
            }
        }
        let init_sum: f64 = initial.iter().map(|(_, p)| p).sum();
        if crate::math::abs(init_sum - 1.0) > 1e-9 || !initial.iter().all(|(v, _)| in_vocab(*v)) {
            return Err(Error::Validation(String::from("initial distribution must sum to 1 over the vocabulary")));
        }
        let ctx_index: BTreeMap<Vec<u32>, u32> =
            contexts.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();
        if ctx_index.len() != contexts.len() {
            return Err(Error::Validation(String::from("duplicate contexts")));
        }
        Ok(ChainModel { order, vocab, contexts, ctx_index, initial, transitions })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[T] {
        &self.vocab
    }

    pub fn contexts(&self) -> &[Vec<u32>] {
        &self.contexts
    }

    pub fn initial(&self) -> &[(u32, f64)] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Vec<(u32, f64)>] {
        &self.transitions
    }

    pub fn vocab_index(&self, e: &T) -> Option<u32> {
        self.vocab.binary_search(e).ok().map(|i| i as u32)
    }

    /// Vocabulary index of the element a context emits (its last element).
    pub fn emitted(&self, ctx: u32) -> u32 {
        *self.contexts[ctx as usize].last().expect("contexts are nonempty")
    }

    /// Duration in ticks of the element a context emits.
    pub fn context_ticks(&self, ctx: u32) -> u32 {
        self.vocab[self.emitted(ctx) as usize].element_ticks()
    }

    /// The length-1 context for a vocabulary element, if observed.
    pub fn start_context(&self, v: u32) -> Option<u32> {
        self.ctx_index.get(&vec![v]).copied()
    }

    /// Successor context after emitting `v` from `ctx`.
    pub fn step(&self, ctx: u32, v: u32) -> Option<u32> {
        let mut gram = self.contexts[ctx as usize].clone();
        gram.push(v);
        if gram.len() > self.order {
            gram.remove(0);
        }
        self.ctx_index.get(&gram).copied()
    }

    /// Map an element sequence to its context path, if every prefix gram was
    /// observed in training.
    pub fn context_path(&self, elems: &[T]) -> Option<Vec<u32>> {
        let mut path = Vec::with_capacity(elems.len());
        let mut ctx = self.start_context(self.vocab_index(&elems[0])?)?;
        path.push(ctx);
        for e in &elems[1..] {
            ctx = self.step(ctx, self.vocab_index(e)?)?;
            path.push(ctx);
        }
        Some(path)
    }

    /// Elements emitted along a context path.
    pub fn emitted_elements(&self, path: &[u32]) -> Vec<T> {
        path.iter().map(|c| self.vocab[self.emitted(*c) as usize].clone()).collect()
    }
}

/// Index of the rest slot in a harmonic row.
pub const REST_SLOT: usize = 12;

/// A distribution over the 12 pitch classes plus a rest slot.
pub type HarmonicRow = [f64; 13];

/// The trained style: note and chord chains, the harmonic model and chord
/// tone histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleModel {
    pub beats_per_bar: u32,
    pub notes: ChainModel<Note>,
    pub chords: ChainModel<ChordEvent>,
    harmonic: BTreeMap<(u8, ChordQuality), HarmonicRow>,
    histograms: BTreeMap<(u8, ChordQuality), [f64; 12]>,
}

impl StyleModel {
    pub fn order(&self) -> usize {
        self.notes.order()
    }

    pub fn harmonic(&self) -> &BTreeMap<(u8, ChordQuality), HarmonicRow> {
        &self.harmonic
    }

    pub fn histograms(&self) -> &BTreeMap<(u8, ChordQuality), [f64; 12]> {
        &self.histograms
    }

    pub fn from_parts(
        beats_per_bar: u32,
        notes: ChainModel<Note>,
        chords: ChainModel<ChordEvent>,
        harmonic: BTreeMap<(u8, ChordQuality), HarmonicRow>,
        histograms: BTreeMap<(u8, ChordQuality), [f64; 12]>,
    ) -> Result<StyleModel> {
        for row in harmonic.values() {
            let sum: f64 = row.iter().sum();
            if crate::math::abs(sum - 1.0) > 1e-9 {
                return Err(Error::Validation(alloc::format!("harmonic row sums to {sum}, not 1")));
            }
        }
        Ok(StyleModel { beats_per_bar, notes, chords, harmonic, histograms })
    }

    /// Probability of placing `note` at tick `t` under the chord track.
    ///
    /// Trained chord states use their exact empirical row. A chord never
    /// seen in training gets an even blend of two stand-ins: the nearest
    /// same-quality row rotated to the requested root (transposition
    /// invariance) and the average of all trained rows (which supports
    /// every pitch class the corpus ever used, keeping transposed
    /// harmonies generable).
    pub fn temporal_prob(&self, chords: &[ChordEvent], note: &Note, t: u32) -> Result<f64> {
        let total = chord_total_ticks(chords);
        if t >= total {
            return Err(Error::TickRange { start: t, end: t + 1, limit: total });
        }
        let chord = crate::notation::chord_at(chords, t)?;
        let row = self.harmonic_row(chord);
        Ok(match note.pitch.pitch_class() {
            Some(pc) => row[pc as usize],
            None => row[REST_SLOT],
        })
    }

    fn harmonic_row(&self, chord: &ChordEvent) -> HarmonicRow {
        let key = (chord.root, chord.quality);
        if let Some(row) = self.harmonic.get(&key) {
            return *row;
        }

        let mut average = [0.0; 13];
        for row in self.harmonic.values() {
            for (slot, p) in row.iter().enumerate() {
                average[slot] += p;
            }
        }
        let count = self.harmonic.len() as f64;
        for slot in average.iter_mut() {
            *slot /= count;
        }

        // Smallest upward rotation of a trained row with the same quality.
        let mut candidate: Option<(u8, &HarmonicRow)> = None;
        for ((root, quality), row) in &self.harmonic {
            if *quality == chord.quality {
                let rot = (chord.root as i32 - *root as i32).rem_euclid(12) as u8;
                if candidate.map_or(true, |(best, _)| rot < best) {
                    candidate = Some((rot, row));
                }
            }
        }
        match candidate {
            Some((rot, row)) => {
                let mut out = [0.0; 13];
                for pc in 0..12 {
                    out[(pc + rot as usize) % 12] = 0.5 * row[pc];
                }
                out[REST_SLOT] = 0.5 * row[REST_SLOT];
                for (slot, p) in average.iter().enumerate() {
                    out[slot] += 0.5 * p;
                }
                out
            }
            None => average,
        }
    }
}

/// Train a style model on a corpus. Transitions never cross song boundaries.
pub fn train(corpus: &[LeadSheet], order: usize) -> Result<StyleModel> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(String::from("corpus is empty")));
    }

    let note_seqs: Vec<Vec<Note>> = corpus.iter().map(|s| s.melody.notes().to_vec()).collect();
    let chord_seqs: Vec<Vec<ChordEvent>> = corpus.iter().map(|s| s.chords.clone()).collect();
    let notes = ChainModel::train(&note_seqs, order)?;
    let chords = ChainModel::train(&chord_seqs, order)?;

    let mut overlap: BTreeMap<(u8, ChordQuality), HarmonicRow> = BTreeMap::new();
    let mut histograms: BTreeMap<(u8, ChordQuality), [f64; 12]> = BTreeMap::new();
    for sheet in corpus {
        for (chord_onset, chord) in chord_onsets(&sheet.chords) {
            let key = (chord.root, chord.quality);
            histograms.entry(key).or_insert_with(|| chord.tone_vector());
            let row = overlap.entry(key).or_insert([0.0; 13]);
            let chord_end = chord_onset + chord.ticks();
            for (note_onset, note) in sheet.melody.onsets() {
                let lo = note_onset.max(chord_onset);
                let hi = (note_onset + note.ticks()).min(chord_end);
                if hi > lo {
                    let slot = note.pitch.pitch_class().map_or(REST_SLOT, |pc| pc as usize);
                    row[slot] += (hi - lo) as f64;
                }
            }
        }
    }
    let harmonic = overlap
        .into_iter()
        .map(|(key, mut row)| {
            let sum: f64 = row.iter().sum();
            for slot in row.iter_mut() {
                *slot /= sum;
            }
            (key, row)
        })
        .collect();

    StyleModel::from_parts(corpus[0].beats_per_bar, notes, chords, harmonic, histograms)
}
