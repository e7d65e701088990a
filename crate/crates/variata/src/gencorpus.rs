//! Deterministic synthetic corpus generation.
//!
//! Melodies are chord-tone-weighted random walks over a configurable pitch
//! set, with durations chosen so every bar is filled exactly. Chord tracks
//! walk a small chord vocabulary with a coverage-greedy policy (always
//! prefer the least-used continuation), which spreads bigram statistics
//! across the whole vocabulary and keeps transposition-heavy plans
//! generable.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use variata_core::notation::{
    ChordEvent, ChordQuality, Dur, LeadSheet, Melody, Note, Pitch, TICKS_PER_QUARTER,
};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub songs: u32,
    pub bars: u32,
    pub beats_per_bar: u32,
    pub pitches: Vec<u8>,
    pub durations: Vec<u32>,
    /// Probability of a rest, in percent.
    pub rest_percent: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> CorpusSpec {
        CorpusSpec {
            songs: 29,
            bars: 12,
            beats_per_bar: 4,
            pitches: vec![60, 62, 64, 65, 67, 69],
            durations: vec![12, 24],
            rest_percent: 5,
            seed: 0,
        }
    }
}

fn pick<R: RngCore>(rng: &mut R, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Weighted choice over `(item, weight)` pairs with positive total weight.
fn pick_weighted<R: RngCore, T: Copy>(rng: &mut R, options: &[(T, f64)]) -> T {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut target = (rng.next_u64() >> 11) as f64 / 9007199254740992.0 * total;
    for (item, w) in options {
        target -= w;
        if target <= 0.0 {
            return *item;
        }
    }
    options.last().expect("options are nonempty").0
}

/// Ticks reachable as sums of the duration set, up to `limit`.
fn reachable_sums(durations: &[u32], limit: u32) -> Vec<bool> {
    let mut ok = vec![false; limit as usize + 1];
    ok[0] = true;
    for t in 0..=limit {
        if ok[t as usize] {
            for d in durations {
                if t + d <= limit {
                    ok[(t + d) as usize] = true;
                }
            }
        }
    }
    ok
}

pub fn generate(spec: &CorpusSpec) -> Result<Vec<LeadSheet>, CliError> {
    if spec.songs == 0 || spec.bars == 0 || spec.beats_per_bar == 0 {
        return Err(CliError::Usage("corpus needs songs, bars and a meter".into()));
    }
    if spec.pitches.is_empty() || spec.durations.is_empty() {
        return Err(CliError::Usage("corpus needs a pitch set and a duration set".into()));
    }
    if spec.pitches.iter().any(|p| *p > 127) || spec.durations.contains(&0) {
        return Err(CliError::Usage("pitches must be MIDI numbers and durations positive".into()));
    }
    let bar_ticks = spec.beats_per_bar * TICKS_PER_QUARTER;
    let reachable = reachable_sums(&spec.durations, bar_ticks);
    if !reachable[bar_ticks as usize] {
        return Err(CliError::Usage(format!(
            "a bar of {bar_ticks} ticks cannot be tiled by durations {:?}",
            spec.durations
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Chord vocabulary: one quality per root drawn from the pitch classes
    // of the pitch set, as whole-bar and half-bar events.
    let mut roots: Vec<u8> = spec.pitches.iter().map(|p| p % 12).collect();
    roots.sort_unstable();
    roots.dedup();
    let qualities = [ChordQuality::Maj, ChordQuality::Min, ChordQuality::Dom7, ChordQuality::Min7];
    let chord_symbols: Vec<(u8, ChordQuality)> = roots
        .iter()
        .enumerate()
        .map(|(i, r)| (*r, qualities[i % qualities.len()]))
        .collect();

    let mut chord_bigrams: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut chord_starts: BTreeMap<usize, u64> = BTreeMap::new();

    let mut sheets = Vec::with_capacity(spec.songs as usize);
    for song in 0..spec.songs {
        // Chord track: coverage-greedy walk over the symbols.
        let mut symbol_path: Vec<usize> = Vec::new();
        let start = {
            let min = chord_symbols
                .iter()
                .enumerate()
                .map(|(i, _)| chord_starts.get(&i).copied().unwrap_or(0))
                .min()
                .unwrap_or(0);
            let candidates: Vec<usize> = (0..chord_symbols.len())
                .filter(|i| chord_starts.get(i).copied().unwrap_or(0) == min)
                .collect();
            candidates[pick(&mut rng, candidates.len())]
        };
        *chord_starts.entry(start).or_insert(0) += 1;
        symbol_path.push(start);
        let half_bars = spec.beats_per_bar % 2 == 0;
        let mut chords: Vec<ChordEvent> = Vec::new();
        for bar in 0..spec.bars {
            let cur = *symbol_path.last().unwrap();
            let split = half_bars && rng.next_u64() % 10 < 3;
            let segments = if split { 2 } else { 1 };
            for seg in 0..segments {
                let (symbol, ticks) = if bar == 0 && seg == 0 {
                    (cur, if split { bar_ticks / 2 } else { bar_ticks })
                } else {
                    let prev = *symbol_path.last().unwrap();
                    let min = (0..chord_symbols.len())
                        .map(|i| chord_bigrams.get(&(prev, i)).copied().unwrap_or(0))
                        .min()
                        .unwrap_or(0);
                    let candidates: Vec<usize> = (0..chord_symbols.len())
                        .filter(|i| chord_bigrams.get(&(prev, *i)).copied().unwrap_or(0) == min)
                        .collect();
                    let next = candidates[pick(&mut rng, candidates.len())];
                    *chord_bigrams.entry((prev, next)).or_insert(0) += 1;
                    symbol_path.push(next);
                    (next, if split { bar_ticks / 2 } else { bar_ticks })
                };
                let (root, quality) = chord_symbols[symbol];
                chords.push(ChordEvent::new(root, quality, Dur::from_ticks(ticks).unwrap()).unwrap());
            }
        }

        // Melody: chord-tone-weighted walk, bar by bar.
        let mut notes: Vec<Note> = Vec::new();
        let mut prev_pitch = spec.pitches[pick(&mut rng, spec.pitches.len())];
        let mut tick = 0u32;
        for _bar in 0..spec.bars {
            let mut remaining = bar_ticks;
            while remaining > 0 {
                let feasible: Vec<u32> = spec
                    .durations
                    .iter()
                    .copied()
                    .filter(|d| *d <= remaining && reachable[(remaining - d) as usize])
                    .collect();
                let ticks = feasible[pick(&mut rng, feasible.len())];
                let rest = rng.next_u64() % 100 < spec.rest_percent as u64;
                let pitch = if rest {
                    Pitch::Rest
                } else {
                    let chord = variata_core::notation::chord_at(&chords, tick)
                        .expect("tick is inside the chord track");
                    let tones: Vec<u8> = chord.tone_classes().collect();
                    let options: Vec<(u8, f64)> = spec
                        .pitches
                        .iter()
                        .map(|p| {
                            let mut w = if tones.contains(&(p % 12)) { 4.0 } else { 1.0 };
                            if p.abs_diff(prev_pitch) <= 4 {
                                w *= 2.0;
                            }
                            (*p, w)
                        })
                        .collect();
                    let p = pick_weighted(&mut rng, &options);
                    prev_pitch = p;
                    Pitch::Midi(p)
                };
                notes.push(Note::new(pitch, Dur::from_ticks(ticks).unwrap()));
                remaining -= ticks;
                tick += ticks;
            }
        }

        let sheet = LeadSheet::new(
            format!("Synthetic {song:03}"),
            spec.beats_per_bar,
            0,
            chords,
            Melody::from_notes(notes),
        )
        .map_err(CliError::Core)?;
        sheets.push(sheet);
    }
    Ok(sheets)
}

/// Write a corpus as `song_###.json` files.
pub fn write_corpus(dir: &Path, sheets: &[LeadSheet]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    for (i, sheet) in sheets.iter().enumerate() {
        crate::corpus::save_sheet(&dir.join(format!("song_{i:03}.json")), sheet)?;
    }
    Ok(())
}
