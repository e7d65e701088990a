//! The lead sheet file format: one sheet per JSON file.
//!
//! Serialisation is canonical: fields in a fixed order with no optional
//! omissions and a trailing newline, so files round-trip byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use variata_core::notation::{ChordEvent, ChordQuality, Dur, LeadSheet, Melody, Note, Pitch};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetFile {
    title: String,
    beats_per_bar: u32,
    pickup_ticks: u32,
    chords: Vec<ChordField>,
    melody: Vec<NoteField>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChordField {
    root: u8,
    quality: String,
    ticks: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteField {
    pitch: PitchField,
    ticks: u32,
}

/// A MIDI number or the string `"rest"`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PitchField {
    Midi(u8),
    Rest(String),
}

impl SheetFile {
    pub fn from_sheet(sheet: &LeadSheet) -> SheetFile {
        SheetFile {
            title: sheet.title.clone(),
            beats_per_bar: sheet.beats_per_bar,
            pickup_ticks: sheet.pickup_ticks,
            chords: sheet
                .chords
                .iter()
                .map(|c| ChordField {
                    root: c.root,
                    quality: c.quality.name().to_string(),
                    ticks: c.ticks(),
                })
                .collect(),
            melody: sheet
                .melody
                .notes()
                .iter()
                .map(|n| NoteField {
                    pitch: match n.pitch {
                        Pitch::Rest => PitchField::Rest("rest".to_string()),
                        Pitch::Midi(p) => PitchField::Midi(p),
                    },
                    ticks: n.ticks(),
                })
                .collect(),
        }
    }

    pub fn into_sheet(self) -> Result<LeadSheet, variata_core::Error> {
        let chords = self
            .chords
            .into_iter()
            .map(|c| {
                let quality = ChordQuality::from_name(&c.quality).ok_or_else(|| {
                    variata_core::Error::Validation(format!("unknown chord quality {:?}", c.quality))
                })?;
                ChordEvent::new(c.root, quality, Dur::from_ticks(c.ticks)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let notes = self
            .melody
            .into_iter()
            .map(|n| {
                let pitch = match n.pitch {
                    PitchField::Midi(p) => Pitch::midi(p)?,
                    PitchField::Rest(tag) if tag == "rest" => Pitch::Rest,
                    PitchField::Rest(tag) => {
                        return Err(variata_core::Error::Validation(format!(
                            "pitch must be a MIDI number or \"rest\", got {tag:?}"
                        )))
                    }
                };
                Ok(Note::new(pitch, Dur::from_ticks(n.ticks)?))
            })
            .collect::<Result<Vec<_>, _>>()?;
        LeadSheet::new(
            self.title,
            self.beats_per_bar,
            self.pickup_ticks,
            chords,
            Melody::from_notes(notes),
        )
    }
}

/// Canonical JSON text of a sheet.
pub fn sheet_to_json(sheet: &LeadSheet) -> String {
    let mut text = serde_json::to_string_pretty(&SheetFile::from_sheet(sheet))
        .expect("sheet serialisation cannot fail");
    text.push('\n');
    text
}

pub fn sheet_from_json(text: &str) -> Result<LeadSheet, serde_json::Error> {
    let file: SheetFile = serde_json::from_str(text)?;
    file.into_sheet().map_err(|e| {
        serde::de::Error::custom(format!("{e}"))
    })
}

pub fn load_sheet(path: &Path) -> Result<LeadSheet, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: SheetFile = serde_json::from_str(&text)
        .map_err(|source| CliError::Parse { path: path.to_path_buf(), source })?;
    file.into_sheet()
        .map_err(|source| CliError::Invalid { path: path.to_path_buf(), source })
}

pub fn save_sheet(path: &Path, sheet: &LeadSheet) -> Result<(), CliError> {
    fs::write(path, sheet_to_json(sheet)).map_err(CliError::io(path))
}

/// Load every `.json` file of a directory, in file name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<LeadSheet>, CliError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::io(dir))?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_sheet(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn example_sheet() -> LeadSheet {
        let chords = vec![
            ChordEvent::new(0, ChordQuality::Maj, Dur::HALF).unwrap(),
            ChordEvent::new(7, ChordQuality::Dom7, Dur::HALF).unwrap(),
        ];
        let melody = Melody::from_notes(vec![
            Note::new(Pitch::Midi(60), Dur::QUARTER),
            Note::new(Pitch::Rest, Dur::QUARTER),
            Note::new(Pitch::Midi(64), Dur::HALF),
        ]);
        LeadSheet::new("Example".into(), 4, 0, chords, melody).unwrap()
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let sheet = example_sheet();
        let text = sheet_to_json(&sheet);
        let parsed = sheet_from_json(&text).unwrap();
        assert_eq!(parsed, sheet);
        assert_eq!(sheet_to_json(&parsed), text);
        assert!(text.contains("\"rest\""));
    }

    #[test]
    fn corpus_loading_is_sorted_and_validating() {
        let dir = tempdir().unwrap();
        save_sheet(&dir.path().join("b.json"), &example_sheet()).unwrap();
        let mut other = example_sheet();
        other.title = "First".into();
        save_sheet(&dir.path().join("a.json"), &other).unwrap();
        std::fs::write(dir.path().join("ignore.txt"), "not json").unwrap();

        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].title, "First");
        assert_eq!(corpus[1].title, "Example");
    }

    #[test]
    fn short_chord_track_is_a_validation_error() {
        let text = r#"{
  "title": "bad",
  "beats_per_bar": 4,
  "pickup_ticks": 0,
  "chords": [
    { "root": 0, "quality": "maj", "ticks": 48 }
  ],
  "melody": [
    { "pitch": 60, "ticks": 96 }
  ]
}
"#;
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, text).unwrap();
        match load_sheet(&path) {
            Err(CliError::Invalid { path: p, .. }) => assert_eq!(p, path),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_the_file_and_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{ \"title\": }").unwrap();
        let err = load_sheet(&path).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("broken.json"));
        assert!(msg.contains("column"));
    }
}
