//! Multi-seed structural audits of plan execution: copies byte-identical,
//! transpositions offset-exact, durations exact, variation distance ordered
//! by alpha.

use rand_core::{RngCore, SeedableRng};

use variata_core::notation::{ChordEvent, ChordQuality, Dur, LeadSheet, Melody, Note, Pitch};
use variata_core::similarity::{ms_distance, WeightParams};
use variata_core::structure::{
    execute, resolve, BarRange, ComposeOptions, Directive, DirectiveKind, StepAction, StructurePlan,
};
use variata_core::stylemodel::{train, StyleModel};

fn toy_model() -> StyleModel {
    // Seeded walk corpus: 6 songs, 4 bars each, mixed eighths and quarters,
    // one or two chords per bar.
    let pitches = [60u8, 62, 64, 65, 67, 69];
    let roots = [0u8, 5, 7, 9];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
    let mut sheets = Vec::new();
    for song in 0..6 {
        let mut notes = Vec::new();
        let mut idx = (song * 2) % pitches.len();
        for _bar in 0..4 {
            let mut remaining = 96u32;
            while remaining > 0 {
                let ticks = if remaining >= 24 && rng.next_u64() % 2 == 0 { 24 } else { 12 };
                notes.push(Note::new(Pitch::Midi(pitches[idx]), Dur::from_ticks(ticks).unwrap()));
                let step = (rng.next_u64() % 3) as i32 - 1;
                idx = (idx as i32 + step).rem_euclid(pitches.len() as i32) as usize;
                remaining -= ticks;
            }
        }
        let mut chords = Vec::new();
        for bar in 0..4usize {
            let root = roots[(song + bar) % roots.len()];
            if (song + bar) % 3 == 0 {
                let other = roots[(song + bar + 1) % roots.len()];
                chords.push(ChordEvent::new(root, ChordQuality::Maj, Dur::HALF).unwrap());
                chords.push(ChordEvent::new(other, ChordQuality::Maj, Dur::HALF).unwrap());
            } else {
                chords.push(ChordEvent::new(root, ChordQuality::Maj, Dur::from_ticks(96).unwrap()).unwrap());
            }
        }
        sheets.push(
            LeadSheet::new(format!("walk {song}"), 4, 0, chords, Melody::from_notes(notes)).unwrap(),
        );
    }
    train(&sheets, 1).unwrap()
}

fn audit_plan() -> StructurePlan {
    StructurePlan {
        bars_total: 8,
        beats_per_bar: 4,
        pickup_ticks: 0,
        directives: vec![
            Directive { target: BarRange::new(1, 2), kind: DirectiveKind::Free },
            Directive {
                target: BarRange::new(3, 4),
                kind: DirectiveKind::Copy { source: BarRange::new(1, 2) },
            },
            Directive {
                target: BarRange::new(5, 6),
                kind: DirectiveKind::Variation { source: BarRange::new(1, 2), alpha: 0.0 },
            },
            Directive {
                target: BarRange::new(7, 7),
                kind: DirectiveKind::TransposedCopy { source: BarRange::new(2, 2), semitones: -2 },
            },
            Directive {
                target: BarRange::new(8, 8),
                kind: DirectiveKind::HarmonyTranspose { source: BarRange::new(7, 7), semitones: -7 },
            },
        ],
    }
}

fn pitch_offset(src: &Melody, tgt: &Melody) -> Option<i32> {
    if src.len() != tgt.len() {
        return None;
    }
    let mut offset = None;
    for (a, b) in src.notes().iter().zip(tgt.notes()) {
        if a.duration != b.duration {
            return None;
        }
        match (a.pitch.as_midi(), b.pitch.as_midi()) {
            (None, None) => {}
            (Some(pa), Some(pb)) => {
                let d = pb as i32 - pa as i32;
                if *offset.get_or_insert(d) != d {
                    return None;
                }
            }
            _ => return None,
        }
    }
    offset.or(Some(0))
}

#[test]
fn audits_hold_across_seeds() {
    let model = toy_model();
    let plan = audit_plan();
    let params = WeightParams::default();
    for seed in 0..12u64 {
        let sheet = execute(&plan, &model, &params, seed, &ComposeOptions::default()).unwrap();
        assert_eq!(sheet.total_ticks(), 8 * 96, "total duration must be exact");

        let bars = |a: u32, b: u32| sheet.slice_bars(a, b).unwrap();
        assert_eq!(bars(1, 2).melody, bars(3, 4).melody, "seed {seed}: copy melody differs");
        assert_eq!(bars(1, 2).chords, bars(3, 4).chords, "seed {seed}: copy chords differ");

        let offset = pitch_offset(&bars(2, 2).melody, &bars(7, 7).melody);
        assert_eq!(offset, Some(-2), "seed {seed}: transposed copy offset");
        assert_eq!(
            bars(2, 2).chords.iter().map(|c| c.transposed(-2)).collect::<Vec<_>>(),
            bars(7, 7).chords,
            "seed {seed}: transposed copy chords"
        );

        // Variation bars share the source's chords; harmony transposition
        // shifts every chord of its source.
        assert_eq!(bars(1, 2).chords, bars(5, 6).chords, "seed {seed}: variation chords");
        assert_eq!(
            bars(7, 7).chords.iter().map(|c| c.transposed(-7)).collect::<Vec<_>>(),
            bars(8, 8).chords,
            "seed {seed}: harmony transposition"
        );
    }
}

#[test]
fn variation_distance_is_ordered_by_alpha() {
    let model = toy_model();
    let plan = audit_plan();
    let params = WeightParams::default();
    let seeds: Vec<u64> = (0..16).collect();

    let mean_distance = |alpha: f64| -> f64 {
        let mut total = 0.0;
        for seed in &seeds {
            let options = ComposeOptions {
                alpha_override: Some(alpha),
                ..ComposeOptions::default()
            };
            let sheet = execute(&plan, &model, &params, *seed, &options).unwrap();
            let source = sheet.slice_bars(1, 2).unwrap().melody;
            let target = sheet.slice_bars(5, 6).unwrap().melody;
            total += ms_distance(&target, &source, &params).distance;
        }
        total / seeds.len() as f64
    };

    let d0 = mean_distance(0.0);
    let d50 = mean_distance(0.5);
    let d95 = mean_distance(0.95);
    assert!(
        d0 <= d50 + 1e-9 && d50 <= d95 + 1e-9,
        "mean variation distance should be non-decreasing in alpha: {d0} / {d50} / {d95}"
    );
}

#[test]
fn schedule_matches_hand_resolution_for_nested_sources() {
    // A copy whose source sits inside a free span forces that span to be
    // generated in aligned pieces, left to right, with the copy fired as
    // soon as its source exists.
    let plan = StructurePlan {
        bars_total: 5,
        beats_per_bar: 4,
        pickup_ticks: 0,
        directives: vec![
            Directive { target: BarRange::new(1, 3), kind: DirectiveKind::Free },
            Directive {
                target: BarRange::new(4, 5),
                kind: DirectiveKind::Copy { source: BarRange::new(2, 3) },
            },
        ],
    };
    let schedule = resolve(&plan).unwrap();
    let shape: Vec<(u32, u32, bool)> = schedule
        .melody_steps
        .iter()
        .map(|s| (s.target.first, s.target.last, matches!(s.action, StepAction::CopyFrom { .. })))
        .collect();
    assert_eq!(shape, vec![(1, 1, false), (2, 3, false), (4, 5, true)]);
    // The barrier sits at the bar 2 boundary, keeping the free span aligned
    // with the copied source.
    assert_eq!(schedule.barrier_ticks, vec![96, 288]);
}

#[test]
fn pickup_bars_are_addressable_and_copyable() {
    let model = toy_model();
    let plan = StructurePlan {
        bars_total: 3,
        beats_per_bar: 4,
        pickup_ticks: 48,
        directives: vec![
            Directive { target: BarRange::new(1, 1), kind: DirectiveKind::Free },
            Directive { target: BarRange::new(2, 2), kind: DirectiveKind::Free },
            Directive {
                target: BarRange::new(3, 3),
                kind: DirectiveKind::Copy { source: BarRange::new(2, 2) },
            },
        ],
    };
    let params = WeightParams::default();
    let sheet = execute(&plan, &model, &params, 3, &ComposeOptions::default()).unwrap();
    assert_eq!(sheet.total_ticks(), 48 + 2 * 96);
    assert_eq!(sheet.pickup_ticks, 48);
    assert_eq!(sheet.slice_bars(2, 2).unwrap().melody, sheet.slice_bars(3, 3).unwrap().melody);

    // Copying a full bar onto the shorter pickup is a span mismatch.
    let bad = StructurePlan {
        bars_total: 3,
        beats_per_bar: 4,
        pickup_ticks: 48,
        directives: vec![
            Directive {
                target: BarRange::new(1, 1),
                kind: DirectiveKind::Copy { source: BarRange::new(2, 2) },
            },
            Directive { target: BarRange::new(2, 2), kind: DirectiveKind::Free },
            Directive { target: BarRange::new(3, 3), kind: DirectiveKind::Free },
        ],
    };
    assert!(matches!(resolve(&bad), Err(variata_core::Error::Plan(_))));
}
