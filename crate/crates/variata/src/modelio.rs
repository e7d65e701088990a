//! On-disk form of a trained style model: explicit vocabularies, context
//! tables and probability rows, in canonical field order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use variata_core::notation::{ChordEvent, ChordQuality, Dur, Note, Pitch};
use variata_core::stylemodel::{ChainModel, HarmonicRow, StyleModel};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    beats_per_bar: u32,
    order: usize,
    note_vocab: Vec<NoteEntry>,
    note_contexts: Vec<Vec<u32>>,
    note_initial: Vec<(u32, f64)>,
    note_transitions: Vec<Vec<(u32, f64)>>,
    chord_vocab: Vec<ChordEntry>,
    chord_contexts: Vec<Vec<u32>>,
    chord_initial: Vec<(u32, f64)>,
    chord_transitions: Vec<Vec<(u32, f64)>>,
    harmonic: Vec<HarmonicEntry>,
    histograms: Vec<HistogramEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteEntry {
    /// MIDI number, or -1 for a rest.
    pitch: i16,
    ticks: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChordEntry {
    root: u8,
    quality: String,
    ticks: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HarmonicEntry {
    root: u8,
    quality: String,
    /// Probabilities for pitch classes 0..=11 followed by the rest slot.
    probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramEntry {
    root: u8,
    quality: String,
    tones: Vec<f64>,
}

fn quality_from(name: &str) -> Result<ChordQuality, variata_core::Error> {
    ChordQuality::from_name(name)
        .ok_or_else(|| variata_core::Error::Validation(format!("unknown chord quality {name:?}")))
}

impl ModelFile {
    pub fn from_model(model: &StyleModel) -> ModelFile {
        ModelFile {
            beats_per_bar: model.beats_per_bar,
            order: model.order(),
            note_vocab: model
                .notes
                .vocab()
                .iter()
                .map(|n| NoteEntry {
                    pitch: n.pitch.as_midi().map_or(-1, |p| p as i16),
                    ticks: n.ticks(),
                })
                .collect(),
            note_contexts: model.notes.contexts().to_vec(),
            note_initial: model.notes.initial().to_vec(),
            note_transitions: model.notes.transitions().to_vec(),
            chord_vocab: model
                .chords
                .vocab()
                .iter()
                .map(|c| ChordEntry {
                    root: c.root,
                    quality: c.quality.name().to_string(),
                    ticks: c.ticks(),
                })
                .collect(),
            chord_contexts: model.chords.contexts().to_vec(),
            chord_initial: model.chords.initial().to_vec(),
            chord_transitions: model.chords.transitions().to_vec(),
            harmonic: model
                .harmonic()
                .iter()
                .map(|((root, quality), row)| HarmonicEntry {
                    root: *root,
                    quality: quality.name().to_string(),
                    probs: row.to_vec(),
                })
                .collect(),
            histograms: model
                .histograms()
                .iter()
                .map(|((root, quality), tones)| HistogramEntry {
                    root: *root,
                    quality: quality.name().to_string(),
                    tones: tones.to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<StyleModel, variata_core::Error> {
        let note_vocab = self
            .note_vocab
            .into_iter()
            .map(|n| {
                let pitch = if n.pitch < 0 { Pitch::Rest } else { Pitch::midi(n.pitch as u8)? };
                Ok(Note::new(pitch, Dur::from_ticks(n.ticks)?))
            })
            .collect::<Result<Vec<_>, variata_core::Error>>()?;
        let chord_vocab = self
            .chord_vocab
            .into_iter()
            .map(|c| ChordEvent::new(c.root, quality_from(&c.quality)?, Dur::from_ticks(c.ticks)?))
            .collect::<Result<Vec<_>, variata_core::Error>>()?;
        let notes = ChainModel::from_parts(
            self.order,
            note_vocab,
            self.note_contexts,
            self.note_initial,
            self.note_transitions,
        )?;
        let chords = ChainModel::from_parts(
            self.order,
            chord_vocab,
            self.chord_contexts,
            self.chord_initial,
            self.chord_transitions,
        )?;
        let mut harmonic = BTreeMap::new();
        for entry in self.harmonic {
            let row: HarmonicRow = entry.probs.clone().try_into().map_err(|_| {
                variata_core::Error::Validation("harmonic rows carry 13 probabilities".into())
            })?;
            harmonic.insert((entry.root, quality_from(&entry.quality)?), row);
        }
        let mut histograms = BTreeMap::new();
        for entry in self.histograms {
            let row: [f64; 12] = entry.tones.clone().try_into().map_err(|_| {
                variata_core::Error::Validation("histograms carry 12 entries".into())
            })?;
            histograms.insert((entry.root, quality_from(&entry.quality)?), row);
        }
        StyleModel::from_parts(self.beats_per_bar, notes, chords, harmonic, histograms)
    }
}

pub fn model_to_json(model: &StyleModel) -> String {
    let mut text = serde_json::to_string_pretty(&ModelFile::from_model(model))
        .expect("model serialisation cannot fail");
    text.push('\n');
    text
}

pub fn save_model(path: &Path, model: &StyleModel) -> Result<(), CliError> {
    fs::write(path, model_to_json(model)).map_err(CliError::io(path))
}

pub fn load_model(path: &Path) -> Result<StyleModel, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|source| CliError::Parse { path: path.to_path_buf(), source })?;
    file.into_model()
        .map_err(|source| CliError::Invalid { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use variata_core::notation::{LeadSheet, Melody};
    use variata_core::stylemodel::train;

    fn n(pitch: u8, ticks: u32) -> Note {
        Note::new(Pitch::Midi(pitch), Dur::from_ticks(ticks).unwrap())
    }

    #[test]
    fn model_round_trips_through_json() {
        let sheets = [LeadSheet::new(
            "m".into(),
            4,
            0,
            vec![
                ChordEvent::new(0, ChordQuality::Maj, Dur::HALF).unwrap(),
                ChordEvent::new(7, ChordQuality::Dom7, Dur::HALF).unwrap(),
            ],
            Melody::from_notes(vec![n(60, 24), Note::new(Pitch::Rest, Dur::EIGHTH), n(64, 12), n(67, 48)]),
        )
        .unwrap()];
        let model = train(&sheets, 1).unwrap();
        let text = model_to_json(&model);
        let parsed: ModelFile = serde_json::from_str(&text).unwrap();
        let restored = parsed.into_model().unwrap();
        assert_eq!(restored, model);
        assert_eq!(model_to_json(&restored), text);
    }
}
