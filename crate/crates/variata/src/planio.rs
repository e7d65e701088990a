//! The structure plan file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use variata_core::structure::{BarRange, Directive, DirectiveKind, StructurePlan};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    bars_total: u32,
    beats_per_bar: u32,
    pickup_ticks: u32,
    directives: Vec<DirectiveField>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectiveField {
    target: (u32, u32),
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    semitones: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl PlanFile {
    pub fn into_plan(self) -> Result<StructurePlan, variata_core::Error> {
        let directives = self
            .directives
            .into_iter()
            .map(|d| {
                let source = || {
                    d.source.map(|(a, b)| BarRange::new(a, b)).ok_or_else(|| {
                        variata_core::Error::Plan(format!("kind {:?} needs a source range", d.kind))
                    })
                };
                let semitones = || {
                    d.semitones.ok_or_else(|| {
                        variata_core::Error::Plan(format!("kind {:?} needs semitones", d.kind))
                    })
                };
                let kind = match d.kind.as_str() {
                    "free" => DirectiveKind::Free,
                    "copy" => DirectiveKind::Copy { source: source()? },
                    "transposed_copy" => {
                        DirectiveKind::TransposedCopy { source: source()?, semitones: semitones()? }
                    }
                    "variation" => DirectiveKind::Variation {
                        source: source()?,
                        alpha: d.alpha.ok_or_else(|| {
                            variata_core::Error::Plan("kind \"variation\" needs an alpha".into())
                        })?,
                    },
                    "harmony_transpose" => {
                        DirectiveKind::HarmonyTranspose { source: source()?, semitones: semitones()? }
                    }
                    other => {
                        return Err(variata_core::Error::Plan(format!("unknown directive kind {other:?}")))
                    }
                };
                Ok(Directive { target: BarRange::new(d.target.0, d.target.1), kind })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StructurePlan {
            bars_total: self.bars_total,
            beats_per_bar: self.beats_per_bar,
            pickup_ticks: self.pickup_ticks,
            directives,
        })
    }

    pub fn from_plan(plan: &StructurePlan) -> PlanFile {
        PlanFile {
            bars_total: plan.bars_total,
            beats_per_bar: plan.beats_per_bar,
            pickup_ticks: plan.pickup_ticks,
            directives: plan
                .directives
                .iter()
                .map(|d| {
                    let (kind, source, semitones, alpha) = match &d.kind {
                        DirectiveKind::Free => ("free", None, None, None),
                        DirectiveKind::Copy { source } => ("copy", Some(*source), None, None),
                        DirectiveKind::TransposedCopy { source, semitones } => {
                            ("transposed_copy", Some(*source), Some(*semitones), None)
                        }
                        DirectiveKind::Variation { source, alpha } => {
                            ("variation", Some(*source), None, Some(*alpha))
                        }
                        DirectiveKind::HarmonyTranspose { source, semitones } => {
                            ("harmony_transpose", Some(*source), Some(*semitones), None)
                        }
                    };
                    DirectiveField {
                        target: (d.target.first, d.target.last),
                        kind: kind.to_string(),
                        source: source.map(|s| (s.first, s.last)),
                        semitones,
                        alpha,
                    }
                })
                .collect(),
        }
    }
}

pub fn load_plan(path: &Path) -> Result<StructurePlan, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let file: PlanFile = serde_json::from_str(&text)
        .map_err(|source| CliError::Parse { path: path.to_path_buf(), source })?;
    file.into_plan()
        .map_err(|source| CliError::Invalid { path: path.to_path_buf(), source })
}
