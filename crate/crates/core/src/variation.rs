//! Similarity-driven sampling biases.
//!
//! For every candidate element, predecessor and onset tick, the localised
//! distance increment of placing the candidate there (relative to the theme
//! fragment it would replace) is rescaled by the largest enumerated
//! increment and mapped through `exp(1 - delta / delta_max)`, giving a
//! multiplicative bias in `[1, e]`: 1 for the furthest candidates, `e` for
//! perfect matches. A strength parameter `alpha` blends the bias toward 1
//! (`beta' = (1 - alpha) * beta + alpha`), so `alpha = 1` reproduces the
//! unbiased model exactly.
//!
//! The same machinery variates chord sequences, with the localised measure
//! replaced by a windowed chord distance derived from the scalar product of
//! chord tone histograms.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::notation::{chord_onsets, chord_total_ticks, ChordEvent, Melody, Note};
use crate::sequencegraph::{
    chord_trellis, melody_trellis, BiasRenorm, PairBias, Trellis,
};
use crate::similarity::{localized_mgd, localized_mgd_prev, ms_distance, WeightParams};
use crate::stylemodel::{ChainElement, StyleModel};

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Precomputed blended biases over `(candidate, onset, predecessor)`
/// triples on the tick grid, plus the raw clamped distance increments they
/// were derived from.
#[derive(Debug, Clone)]
pub struct BiasTable<T> {
    vocab: Vec<T>,
    grid: u32,
    total_ticks: u32,
    alpha: f64,
    delta_max: f64,
    /// Blended bias, indexed `[t / grid][prev][cand]`.
    blended: Vec<f64>,
    /// Clamped increments in the same layout.
    deltas: Vec<f64>,
    start_blended: Vec<f64>,
    start_deltas: Vec<f64>,
}

impl<T: ChainElement> BiasTable<T> {
    /// Build a table from increment functions. `pair_delta(prev, cand, t)`
    /// is the localised distance increment of placing `cand` at `t` after
    /// `prev`; `start_delta` covers the sequence start.
    pub fn from_deltas(
        vocab: &[T],
        total_ticks: u32,
        alpha: f64,
        pair_delta: impl Fn(&T, &T, u32) -> f64,
        start_delta: impl Fn(&T) -> f64,
    ) -> Result<BiasTable<T>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(String::from("alpha must lie in [0, 1]")));
        }
        if vocab.is_empty() || total_ticks == 0 {
            return Err(Error::InvalidArgument(String::from("bias table needs a vocabulary and a span")));
        }
        let grid = vocab.iter().map(|e| e.element_ticks()).fold(0, gcd);
        let n_t = total_ticks.div_ceil(grid) as usize;
        let v = vocab.len();

        let mut deltas = Vec::with_capacity(n_t * v * v);
        for ti in 0..n_t {
            let t = ti as u32 * grid;
            for prev in vocab {
                for cand in vocab {
                    deltas.push(pair_delta(prev, cand, t).max(0.0));
                }
            }
        }
        let start_deltas: Vec<f64> = vocab.iter().map(|c| start_delta(c).max(0.0)).collect();

        let delta_max = deltas
            .iter()
            .chain(&start_deltas)
            .fold(0.0f64, |m, d| if *d > m { *d } else { m });
        let beta = |d: f64| {
            let scaled = if delta_max > 0.0 { d / delta_max } else { 0.0 };
            (1.0 - alpha) * math::exp(1.0 - scaled) + alpha
        };
        let blended: Vec<f64> = deltas.iter().map(|d| beta(*d)).collect();
        let start_blended: Vec<f64> = start_deltas.iter().map(|d| beta(*d)).collect();

        Ok(BiasTable {
            vocab: vocab.to_vec(),
            grid,
            total_ticks,
            alpha,
            delta_max,
            blended,
            deltas,
            start_blended,
            start_deltas,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest enumerated increment (the rescaling denominator).
    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn total_ticks(&self) -> u32 {
        self.total_ticks
    }

    fn index_of(&self, e: &T) -> Option<usize> {
        self.vocab.binary_search(e).ok()
    }

    fn cell(&self, prev: usize, cand: usize, t: u32) -> Option<usize> {
        if t >= self.total_ticks || t % self.grid != 0 {
            return None;
        }
        let v = self.vocab.len();
        Some((t / self.grid) as usize * v * v + prev * v + cand)
    }

    /// Blended bias for placing `cand` at `t` after `prev`; 1 outside the
    /// table.
    pub fn lookup(&self, prev: &T, cand: &T, t: u32) -> f64 {
        match (self.index_of(prev), self.index_of(cand)) {
            (Some(p), Some(c)) => match self.cell(p, c, t) {
                Some(i) => self.blended[i],
                None => 1.0,
            },
            _ => 1.0,
        }
    }

    pub fn start_lookup(&self, first: &T) -> f64 {
        self.index_of(first).map_or(1.0, |c| self.start_blended[c])
    }

    fn delta_lookup(&self, prev: &T, cand: &T, t: u32) -> f64 {
        match (self.index_of(prev), self.index_of(cand)) {
            (Some(p), Some(c)) => self.cell(p, c, t).map_or(0.0, |i| self.deltas[i]),
            _ => 0.0,
        }
    }

    fn start_delta_lookup(&self, first: &T) -> f64 {
        self.index_of(first).map_or(0.0, |c| self.start_deltas[c])
    }

    /// Sum of the clamped localised increments along an element sequence.
    pub fn sum_localized(&self, elems: &[T]) -> f64 {
        let mut sum = 0.0;
        let mut t = 0u32;
        for (i, e) in elems.iter().enumerate() {
            if i == 0 {
                sum += self.start_delta_lookup(e);
            } else {
                sum += self.delta_lookup(&elems[i - 1], e, t);
            }
            t += e.element_ticks();
        }
        sum
    }

    /// Sum of log blended biases along an element sequence.
    pub fn log_bias_product(&self, elems: &[T]) -> f64 {
        let mut sum = 0.0;
        let mut t = 0u32;
        for (i, e) in elems.iter().enumerate() {
            if i == 0 {
                sum += math::ln(self.start_lookup(e));
            } else {
                sum += math::ln(self.lookup(&elems[i - 1], e, t));
            }
            t += e.element_ticks();
        }
        sum
    }
}

impl<T: ChainElement> PairBias<T> for BiasTable<T> {
    fn pair(&self, prev: &T, cand: &T, t: u32) -> f64 {
        self.lookup(prev, cand, t)
    }

    fn start(&self, first: &T) -> f64 {
        self.start_lookup(first)
    }
}

/// A bias table applied to a sub-span `[offset, offset + table span)` of a
/// longer sequence; everywhere else the factor is 1.
pub struct RangeBias<'a, T> {
    table: &'a BiasTable<T>,
    offset: u32,
}

impl<'a, T> RangeBias<'a, T> {
    pub fn new(table: &'a BiasTable<T>, offset: u32) -> RangeBias<'a, T> {
        RangeBias { table, offset }
    }
}

impl<T: ChainElement> PairBias<T> for RangeBias<'_, T> {
    fn pair(&self, prev: &T, cand: &T, t: u32) -> f64 {
        if t >= self.offset && t < self.offset + self.table.total_ticks() {
            self.table.lookup(prev, cand, t - self.offset)
        } else {
            1.0
        }
    }

    fn start(&self, first: &T) -> f64 {
        if self.offset == 0 {
            self.table.start_lookup(first)
        } else {
            1.0
        }
    }
}

/// Bias table for melodic variation: increments are differences of
/// localised Mongeau-Sankoff distances against the theme.
pub fn build_bias(
    theme: &Melody,
    vocab: &[Note],
    total_ticks: u32,
    params: &WeightParams,
    alpha: f64,
) -> Result<BiasTable<Note>> {
    if theme.total_ticks() != total_ticks {
        return Err(Error::InvalidArgument(alloc::format!(
            "theme spans {} ticks, expected {total_ticks}",
            theme.total_ticks()
        )));
    }
    params.validate()?;
    BiasTable::from_deltas(
        vocab,
        total_ticks,
        alpha,
        |prev, cand, t| {
            localized_mgd(theme, Some(prev), cand, t, params) - localized_mgd_prev(theme, prev, t, params)
        },
        |first| localized_mgd(theme, None, first, 0, params),
    )
}

/// Scalar product of the chord tone histograms of two chords.
pub fn chord_similarity(c1: &ChordEvent, c2: &ChordEvent, model: &StyleModel) -> Result<f64> {
    let h1 = model
        .histograms()
        .get(&(c1.root, c1.quality))
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("chord {}:{} not in the histogram table", c1.root, c1.quality.name())))?;
    let h2 = model
        .histograms()
        .get(&(c2.root, c2.quality))
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("chord {}:{} not in the histogram table", c2.root, c2.quality.name())))?;
    Ok(h1.iter().zip(h2).map(|(a, b)| a * b).sum())
}

fn tone_product(c1: &ChordEvent, c2: &ChordEvent) -> f64 {
    let (a, b) = (c1.tone_vector(), c2.tone_vector());
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}

/// Bias table for chord variation: the windowed distance of a candidate
/// chord against the theme chords it overlaps, using
/// `max vocabulary similarity - similarity` per overlap tick.
pub fn build_chord_bias(
    theme_chords: &[ChordEvent],
    vocab: &[ChordEvent],
    total_ticks: u32,
    alpha: f64,
) -> Result<BiasTable<ChordEvent>> {
    if chord_total_ticks(theme_chords) != total_ticks {
        return Err(Error::InvalidArgument(String::from("theme chord track does not span the requested total")));
    }
    let mut max_sim = 0.0f64;
    for a in vocab {
        for b in vocab {
            max_sim = max_sim.max(tone_product(a, b));
        }
    }
    let window_delta = |cand: &ChordEvent, t: u32| -> f64 {
        let end = (t + cand.ticks()).min(total_ticks);
        let mut delta = 0.0;
        for (onset, theme_chord) in chord_onsets(theme_chords) {
            let lo = onset.max(t);
            let hi = (onset + theme_chord.ticks()).min(end);
            if hi > lo {
                delta += (hi - lo) as f64 * (max_sim - tone_product(cand, theme_chord));
            }
        }
        delta
    };
    BiasTable::from_deltas(
        vocab,
        total_ticks,
        alpha,
        |_prev, cand, t| window_delta(cand, t),
        |first| window_delta(first, 0),
    )
}

/// One sampled variation with its probabilities under the biased and
/// unbiased models.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSample<T> {
    pub elements: Vec<T>,
    pub log_prob_biased: f64,
    pub log_prob_unbiased: f64,
    pub log_bias_product: f64,
    pub sum_localized: f64,
}

/// The outcome of a variation run.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationRun<T> {
    pub samples: Vec<VariationSample<T>>,
    pub log_z_biased: f64,
    pub log_z_unbiased: f64,
    pub delta_max: f64,
}

impl VariationSample<Note> {
    pub fn melody(&self) -> Melody {
        Melody::from_notes(self.elements.clone())
    }
}

fn run_variation<T: ChainElement>(
    chain: &crate::stylemodel::ChainModel<T>,
    biased: &Trellis<'_>,
    unbiased: &Trellis<'_>,
    bias: &BiasTable<T>,
    seed: u64,
    count: usize,
) -> Result<VariationRun<T>> {
    let fw_biased = biased.forward()?;
    let fw_unbiased = unbiased.forward()?;
    let mut samples = Vec::with_capacity(count);
    for drawn in biased.sample(&fw_biased, seed, count) {
        let unbiased_score = unbiased.evaluate(&fw_unbiased, &drawn.states)?;
        let path: Vec<u32> = drawn.states.iter().map(|s| *s as u32).collect();
        let elements = chain.emitted_elements(&path);
        samples.push(VariationSample {
            log_bias_product: bias.log_bias_product(&elements),
            sum_localized: bias.sum_localized(&elements),
            elements,
            log_prob_biased: drawn.log_prob,
            log_prob_unbiased: unbiased_score.log_prob,
        });
    }
    Ok(VariationRun {
        samples,
        log_z_biased: fw_biased.log_z(),
        log_z_unbiased: fw_unbiased.log_z(),
        delta_max: bias.delta_max(),
    })
}

/// Sample melodic variations of a theme over a fixed chord track.
#[allow(clippy::too_many_arguments)]
pub fn variate_melody(
    model: &StyleModel,
    chords: &[ChordEvent],
    theme: &Melody,
    params: &WeightParams,
    alpha: f64,
    renorm: BiasRenorm,
    seed: u64,
    count: usize,
) -> Result<VariationRun<Note>> {
    let total = theme.total_ticks();
    if chord_total_ticks(chords) != total {
        return Err(Error::InvalidArgument(String::from("theme and chord track must span the same ticks")));
    }
    let bias = build_bias(theme, model.notes.vocab(), total, params, alpha)?;
    let biased = melody_trellis(model, chords, total, Some(&bias), &[], &[], renorm)?;
    let unbiased = melody_trellis(model, chords, total, None, &[], &[], BiasRenorm::Global)?;
    run_variation(&model.notes, &biased, &unbiased, &bias, seed, count)
}

/// Sample chord-sequence variations of a theme chord track.
pub fn variate_chords(
    model: &StyleModel,
    theme_chords: &[ChordEvent],
    alpha: f64,
    renorm: BiasRenorm,
    seed: u64,
    count: usize,
) -> Result<VariationRun<ChordEvent>> {
    let total = chord_total_ticks(theme_chords);
    let bias = build_chord_bias(theme_chords, model.chords.vocab(), total, alpha)?;
    let biased = chord_trellis(model, total, Some(&bias), &[], &[], renorm)?;
    let unbiased = chord_trellis(model, total, None, &[], &[], BiasRenorm::Global)?;
    run_variation(&model.chords, &biased, &unbiased, &bias, seed, count)
}

/// Mongeau-Sankoff distance of a sampled variation to the theme.
pub fn distance_to_theme(sample: &VariationSample<Note>, theme: &Melody, params: &WeightParams) -> f64 {
    ms_distance(&sample.melody(), theme, params).distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::{ChordQuality, Dur, Pitch};
    use crate::stylemodel::train;
    use alloc::vec;

    fn n(pitch: u8, ticks: u32) -> Note {
        Note::new(Pitch::Midi(pitch), Dur::from_ticks(ticks).unwrap())
    }

    fn chord(root: u8, quality: ChordQuality, ticks: u32) -> ChordEvent {
        ChordEvent::new(root, quality, Dur::from_ticks(ticks).unwrap()).unwrap()
    }

    fn toy_model() -> StyleModel {
        let melody = vec![n(60, 24), n(62, 24), n(64, 24), n(62, 24)];
        let sheets = [
            crate::notation::LeadSheet::new(
                "a".into(),
                4,
                0,
                vec![chord(0, ChordQuality::Maj, 96)],
                Melody::from_notes(melody.clone()),
            )
            .unwrap(),
            crate::notation::LeadSheet::new(
                "b".into(),
                4,
                0,
                vec![chord(9, ChordQuality::Min, 96)],
                Melody::from_notes(vec![n(62, 24), n(60, 24), n(62, 24), n(64, 24)]),
            )
            .unwrap(),
        ];
        train(&sheets, 1).unwrap()
    }

    #[test]
    fn bias_formula_endpoints() {
        let params = WeightParams::default();
        let theme = Melody::from_notes(vec![n(60, 24), n(62, 24), n(64, 24), n(62, 24)]);
        let vocab = [n(60, 24), n(62, 24), n(64, 24), n(69, 24)];
        let table = build_bias(&theme, &vocab, 96, &params, 0.0).unwrap();

        // The exact theme pair at its own position has increment 0, so the
        // bias is e.
        let e = math::exp(1.0);
        assert!((table.lookup(&n(60, 24), &n(62, 24), 24) - e).abs() < 1e-12);
        // Some enumerated increment attains the maximum, where the bias is 1.
        let mut min_bias = f64::INFINITY;
        for prev in &vocab {
            for cand in &vocab {
                for ti in 0..4 {
                    min_bias = min_bias.min(table.lookup(prev, cand, ti * 24));
                }
            }
        }
        assert!((min_bias - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_flattens_all_biases() {
        let params = WeightParams::default();
        let theme = Melody::from_notes(vec![n(60, 24), n(62, 24), n(64, 24), n(62, 24)]);
        let vocab = [n(60, 24), n(62, 24), n(64, 24)];
        let table = build_bias(&theme, &vocab, 96, &params, 1.0).unwrap();
        for prev in &vocab {
            for cand in &vocab {
                assert_eq!(table.lookup(prev, cand, 24), 1.0);
            }
            assert_eq!(table.start_lookup(prev), 1.0);
        }
    }

    #[test]
    fn alpha_blending_is_affine() {
        // beta = 2 at alpha = 0.5 blends to 1.5.
        let vocab = [n(60, 24)];
        let table = BiasTable::from_deltas(&vocab, 24, 0.5, |_, _, _| 0.0, |_| 0.0).unwrap();
        // With all increments zero, beta = e, blended = 0.5 e + 0.5.
        let expected = 0.5 * math::exp(1.0) + 0.5;
        assert!((table.start_lookup(&n(60, 24)) - expected).abs() < 1e-12);

        let direct = |beta: f64, alpha: f64| (1.0 - alpha) * beta + alpha;
        assert_eq!(direct(2.0, 0.5), 1.5);
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let vocab = [n(60, 24)];
        assert!(BiasTable::from_deltas(&vocab, 24, 1.5, |_, _, _| 0.0, |_| 0.0).is_err());
    }

    #[test]
    fn chord_similarity_tone_products() {
        let sheets = [crate::notation::LeadSheet::new(
            "chords".into(),
            4,
            0,
            vec![
                chord(0, ChordQuality::Maj, 96),
                chord(1, ChordQuality::Maj, 96),
                chord(9, ChordQuality::Min, 96),
            ],
            Melody::from_notes(vec![n(60, 96), n(61, 96), n(64, 96)]),
        )
        .unwrap()];
        let model = train(&sheets, 1).unwrap();
        let c = chord(0, ChordQuality::Maj, 96);
        let db = chord(1, ChordQuality::Maj, 96);
        let am = chord(9, ChordQuality::Min, 96);
        assert_eq!(chord_similarity(&c, &c, &model).unwrap(), 3.0);
        assert_eq!(chord_similarity(&c, &db, &model).unwrap(), 0.0);
        assert_eq!(chord_similarity(&c, &am, &model).unwrap(), 2.0);
        let foreign = chord(5, ChordQuality::Dim, 96);
        assert!(chord_similarity(&c, &foreign, &model).is_err());
    }

    #[test]
    fn alpha_one_run_matches_unbiased_model_exactly() {
        let model = toy_model();
        let theme = Melody::from_notes(vec![n(60, 24), n(62, 24), n(64, 24), n(62, 24)]);
        let chords = vec![chord(0, ChordQuality::Maj, 96)];
        let run = variate_melody(&model, &chords, &theme, &WeightParams::default(), 1.0, BiasRenorm::Global, 11, 20)
            .unwrap();
        for s in &run.samples {
            assert!((s.log_prob_biased - s.log_prob_unbiased).abs() <= 1e-9);
            assert!(s.log_bias_product.abs() <= 1e-12);
        }
        assert!((run.log_z_biased - run.log_z_unbiased).abs() <= 1e-9);
    }

    #[test]
    fn repeated_theme_chord_has_maximal_bias() {
        let sheets = [crate::notation::LeadSheet::new(
            "chords".into(),
            4,
            0,
            vec![
                chord(0, ChordQuality::Maj, 96),
                chord(7, ChordQuality::Dom7, 96),
                chord(0, ChordQuality::Maj, 96),
                chord(5, ChordQuality::Maj, 96),
            ],
            Melody::from_notes(vec![n(60, 96), n(62, 96), n(64, 96), n(65, 96)]),
        )
        .unwrap()];
        let model = train(&sheets, 1).unwrap();
        let theme: Vec<ChordEvent> = vec![chord(0, ChordQuality::Maj, 96); 4];
        let bias = build_chord_bias(&theme, model.chords.vocab(), 384, 0.0).unwrap();
        let target = chord(0, ChordQuality::Maj, 96);
        for cand in model.chords.vocab() {
            for ti in 0..4u32 {
                assert!(bias.lookup(&target, &target, ti * 96) >= bias.lookup(&target, cand, ti * 96));
            }
        }
    }
}
