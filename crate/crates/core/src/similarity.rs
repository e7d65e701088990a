//! Mongeau-Sankoff melodic edit distance.
//!
//! The distance aligns two melodies with five operations: substitution,
//! deletion, insertion, fragmentation (one note replaced by several shorter
//! ones) and consolidation (several notes replaced by one longer one). On
//! top of the classic 1990 measure, fragmentation and consolidation carry an
//! extra penalty `p`: without it, splitting a note into same-pitch halves is
//! free, which is useless for telling variations apart in a generative
//! setting.
//!
//! [`localized_mgd`] is the windowed variant: the distance between a one- or
//! two-note candidate and the theme fragment it would replace, with theme
//! notes trimmed to the window.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::notation::{Melody, Note};

/// Weight constants of the distance. All weights are nonnegative and
/// `pitch_table[0]` must be zero so that equal melodies are at distance 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightParams {
    /// Relative contribution of length difference versus pitch difference,
    /// per tick.
    pub k1: f64,
    /// Extra weight added to every fragmentation or consolidation.
    pub penalty_p: f64,
    /// Pitch weight per interval class 0..=11.
    pub pitch_table: [f64; 12],
    /// Pitch weight between a rest and a sounding note.
    pub rest_mismatch: f64,
    /// Base deletion weight; the full weight is `k_del + k1 * ticks`.
    pub k_del: f64,
    /// Base insertion weight; the full weight is `k_ins + k1 * ticks`.
    pub k_ins: f64,
    /// Cap on the group size of fragmentation and consolidation.
    pub max_group: usize,
}

impl Default for WeightParams {
    fn default() -> WeightParams {
        WeightParams {
            k1: 0.5,
            penalty_p: 8.0,
            // Small weights for consonant intervals, larger for dissonant.
            pitch_table: [0.0, 3.0, 2.0, 1.0, 1.0, 2.0, 3.0, 1.0, 2.0, 2.0, 2.0, 3.0],
            rest_mismatch: 3.0,
            k_del: 4.0,
            k_ins: 4.0,
            max_group: 8,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if self.pitch_table[0] != 0.0 {
            return Err(Error::InvalidArgument(String::from("pitch_table[0] must be 0 (unison is free)")));
        }
        let nonneg = self.k1 >= 0.0
            && self.penalty_p >= 0.0
            && self.rest_mismatch >= 0.0
            && self.k_del >= 0.0
            && self.k_ins >= 0.0
            && self.pitch_table.iter().all(|w| *w >= 0.0);
        if !nonneg {
            return Err(Error::InvalidArgument(String::from("all weights must be nonnegative")));
        }
        if self.max_group < 2 {
            return Err(Error::InvalidArgument(String::from("max_group must be at least 2")));
        }
        Ok(())
    }
}

/// Pitch weight between two notes: 0 for two rests, `rest_mismatch` when
/// exactly one is a rest, otherwise the interval-class table entry.
pub fn w_pitch(a: &Note, b: &Note, params: &WeightParams) -> f64 {
    match (a.pitch.as_midi(), b.pitch.as_midi()) {
        (None, None) => 0.0,
        (None, Some(_)) | (Some(_), None) => params.rest_mismatch,
        (Some(pa), Some(pb)) => {
            let class = (pa as i32 - pb as i32).unsigned_abs() % 12;
            params.pitch_table[class as usize]
        }
    }
}

fn tick_diff(a: u32, b: u32) -> f64 {
    a.abs_diff(b) as f64
}

/// Substitution weight: pitch weight plus `k1` times the tick difference.
pub fn w_subst(a: &Note, b: &Note, params: &WeightParams) -> f64 {
    w_pitch(a, b, params) + params.k1 * tick_diff(a.ticks(), b.ticks())
}

pub fn w_del(a: &Note, params: &WeightParams) -> f64 {
    params.k_del + params.k1 * a.ticks() as f64
}

pub fn w_ins(b: &Note, params: &WeightParams) -> f64 {
    params.k_ins + params.k1 * b.ticks() as f64
}

fn group_weight(single: &Note, group: &[Note], params: &WeightParams) -> f64 {
    let pitch_sum: f64 = group.iter().map(|g| w_pitch(single, g, params)).sum();
    let group_ticks: u32 = group.iter().map(Note::ticks).sum();
    pitch_sum + params.k1 * tick_diff(single.ticks(), group_ticks) + params.penalty_p
}

/// Fragmentation weight: one note `a` replaced by the notes `bs`.
pub fn w_frag(a: &Note, bs: &[Note], params: &WeightParams) -> Result<f64> {
    if bs.len() < 2 || bs.len() > params.max_group {
        return Err(Error::InvalidArgument(alloc::format!(
            "fragmentation group of {} notes outside 2..={}",
            bs.len(),
            params.max_group
        )));
    }
    Ok(group_weight(a, bs, params))
}

/// Consolidation weight: the notes `as_` replaced by one note `b`.
pub fn w_cons(as_: &[Note], b: &Note, params: &WeightParams) -> Result<f64> {
    if as_.len() < 2 || as_.len() > params.max_group {
        return Err(Error::InvalidArgument(alloc::format!(
            "consolidation group of {} notes outside 2..={}",
            as_.len(),
            params.max_group
        )));
    }
    Ok(group_weight(b, as_, params))
}

/// One step of an edit script. Indices are 0-based positions into the
/// original melodies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditOp {
    Substitute { a: usize, b: usize, weight: f64 },
    Delete { a: usize, weight: f64 },
    Insert { b: usize, weight: f64 },
    /// `a` replaced by `b_start..b_start + b_count`.
    Fragment { a: usize, b_start: usize, b_count: usize, weight: f64 },
    /// `a_start..a_start + a_count` replaced by `b`.
    Consolidate { a_start: usize, a_count: usize, b: usize, weight: f64 },
}

impl EditOp {
    pub fn weight(&self) -> f64 {
        match *self {
            EditOp::Substitute { weight, .. }
            | EditOp::Delete { weight, .. }
            | EditOp::Insert { weight, .. }
            | EditOp::Fragment { weight, .. }
            | EditOp::Consolidate { weight, .. } => weight,
        }
    }
}

/// A distance value together with the script that achieves it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    pub script: Vec<EditOp>,
}

impl DistanceResult {
    /// Count fragmentation and consolidation steps in the script.
    pub fn group_op_count(&self) -> usize {
        self.script
            .iter()
            .filter(|op| matches!(op, EditOp::Fragment { .. } | EditOp::Consolidate { .. }))
            .count()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Back {
    Start,
    Del,
    Ins,
    Subst,
    Frag(usize),
    Cons(usize),
}

/// The Mongeau-Sankoff distance between two melodies, with traceback.
///
/// Ties in the five-case minimum break in the fixed order substitute,
/// consolidate, fragment, delete, insert (smaller groups first), so the
/// returned script is deterministic.
pub fn ms_distance(a: &Melody, b: &Melody, params: &WeightParams) -> DistanceResult {
    let an = a.notes();
    let bn = b.notes();
    let m = an.len();
    let n = bn.len();
    let width = n + 1;
    let mut dist = vec![0.0f64; (m + 1) * width];
    let mut back = vec![Back::Start; (m + 1) * width];
    let at = |i: usize, j: usize| i * width + j;

    for i in 1..=m {
        dist[at(i, 0)] = dist[at(i - 1, 0)] + w_del(&an[i - 1], params);
        back[at(i, 0)] = Back::Del;
    }
    for j in 1..=n {
        dist[at(0, j)] = dist[at(0, j - 1)] + w_ins(&bn[j - 1], params);
        back[at(0, j)] = Back::Ins;
    }

    for i in 1..=m {
        for j in 1..=n {
            let mut best = dist[at(i - 1, j - 1)] + w_subst(&an[i - 1], &bn[j - 1], params);
            let mut step = Back::Subst;

            for k in 2..=params.max_group.min(i) {
                let cand = dist[at(i - k, j - 1)] + group_weight(&bn[j - 1], &an[i - k..i], params);
                if cand < best {
                    best = cand;
                    step = Back::Cons(k);
                }
            }
            for k in 2..=params.max_group.min(j) {
                let cand = dist[at(i - 1, j - k)] + group_weight(&an[i - 1], &bn[j - k..j], params);
                if cand < best {
                    best = cand;
                    step = Back::Frag(k);
                }
            }
            let del = dist[at(i - 1, j)] + w_del(&an[i - 1], params);
            if del < best {
                best = del;
                step = Back::Del;
            }
            let ins = dist[at(i, j - 1)] + w_ins(&bn[j - 1], params);
            if ins < best {
                best = ins;
                step = Back::Ins;
            }
            dist[at(i, j)] = best;
            back[at(i, j)] = step;
        }
    }

    let mut script = Vec::new();
    let (mut i, mut j) = (m, n);
    loop {
        match back[at(i, j)] {
            Back::Start => break,
            Back::Subst => {
                let weight = dist[at(i, j)] - dist[at(i - 1, j - 1)];
                script.push(EditOp::Substitute { a: i - 1, b: j - 1, weight });
                i -= 1;
                j -= 1;
            }
            Back::Del => {
                let weight = dist[at(i, j)] - dist[at(i - 1, j)];
                script.push(EditOp::Delete { a: i - 1, weight });
                i -= 1;
            }
            Back::Ins => {
                let weight = dist[at(i, j)] - dist[at(i, j - 1)];
                script.push(EditOp::Insert { b: j - 1, weight });
                j -= 1;
            }
            Back::Frag(k) => {
                let weight = dist[at(i, j)] - dist[at(i - 1, j - k)];
                script.push(EditOp::Fragment { a: i - 1, b_start: j - k, b_count: k, weight });
                i -= 1;
                j -= k;
            }
            Back::Cons(k) => {
                let weight = dist[at(i, j)] - dist[at(i - k, j - 1)];
                script.push(EditOp::Consolidate { a_start: i - k, a_count: k, b: j - 1, weight });
                i -= k;
                j -= 1;
            }
        }
    }
    script.reverse();

    DistanceResult { distance: dist[at(m, n)], script }
}

fn clip(t: i64, total: u32) -> u32 {
    t.clamp(0, total as i64) as u32
}

/// Localised distance of a candidate against the theme window it would
/// occupy.
///
/// With a predecessor, this is the distance between the two-note melody
/// `[prev, cand]` and the theme fragment between `t - d(prev)` and
/// `t + d(cand)` (clipped to the theme span, boundary notes trimmed). At a
/// sequence start (`prev` absent) the window is `[t, t + d(cand))`.
pub fn localized_mgd(
    theme: &Melody,
    prev: Option<&Note>,
    cand: &Note,
    t: u32,
    params: &WeightParams,
) -> f64 {
    let total = theme.total_ticks();
    debug_assert!(t <= total);
    let (window, lo, hi) = match prev {
        Some(p) => {
            let lo = clip(t as i64 - p.ticks() as i64, total);
            let hi = clip(t as i64 + cand.ticks() as i64, total);
            (Melody::from_notes(vec![*p, *cand]), lo, hi)
        }
        None => {
            let lo = clip(t as i64, total);
            let hi = clip(t as i64 + cand.ticks() as i64, total);
            (Melody::from_notes(vec![*cand]), lo, hi)
        }
    };
    let fragment = if hi > lo {
        theme.slice(lo, hi).expect("clipped window is inside the theme")
    } else {
        Melody::new()
    };
    ms_distance(&window, &fragment, params).distance
}

/// Convenience wrapper used when computing bias increments: the localised
/// distance of the one-note sequence `[prev]` ending at `t`.
pub fn localized_mgd_prev(theme: &Melody, prev: &Note, t: u32, params: &WeightParams) -> f64 {
    let total = theme.total_ticks();
    debug_assert!(t <= total);
    let lo = clip(t as i64 - prev.ticks() as i64, total);
    let hi = clip(t as i64, total);
    let window = Melody::from_notes(vec![*prev]);
    let fragment = if hi > lo {
        theme.slice(lo, hi).expect("clipped window is inside the theme")
    } else {
        Melody::new()
    };
    ms_distance(&window, &fragment, params).distance
}

/// True when `x` and `y` agree to within `tol`.
pub fn close(x: f64, y: f64, tol: f64) -> bool {
    math::abs(x - y) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::{Dur, Pitch};

    fn note(pitch: u8, ticks: u32) -> Note {
        Note::new(Pitch::Midi(pitch), Dur::from_ticks(ticks).unwrap())
    }

    fn rest(ticks: u32) -> Note {
        Note::new(Pitch::Rest, Dur::from_ticks(ticks).unwrap())
    }

    fn melody(notes: &[Note]) -> Melody {
        Melody::from_notes(notes.to_vec())
    }

    #[test]
    fn pitch_weight_cases() {
        let p = WeightParams::default();
        assert_eq!(w_pitch(&note(60, 24), &note(60, 24), &p), 0.0);
        // Octaves reduce to interval class 0.
        assert_eq!(w_pitch(&note(60, 24), &note(72, 24), &p), 0.0);
        assert_eq!(w_pitch(&rest(24), &note(60, 24), &p), p.rest_mismatch);
        assert_eq!(w_pitch(&rest(24), &rest(12), &p), 0.0);
        assert_eq!(w_pitch(&note(60, 24), &note(67, 24), &p), p.pitch_table[7]);
    }

    #[test]
    fn substitution_weight_cases() {
        let p = WeightParams::default();
        assert_eq!(w_subst(&note(60, 24), &note(60, 24), &p), 0.0);
        assert_eq!(w_subst(&note(60, 24), &note(60, 12), &p), 6.0);
        assert_eq!(w_subst(&note(60, 24), &note(67, 24), &p), p.pitch_table[7]);
    }

    #[test]
    fn fragmentation_weight_cases() {
        let mut p = WeightParams::default();
        p.penalty_p = 10.0;
        let quarter = note(60, 24);
        let halves = [note(60, 12), note(60, 12)];
        assert_eq!(w_frag(&quarter, &halves, &p).unwrap(), 10.0);

        p.penalty_p = 0.0;
        assert_eq!(w_frag(&quarter, &halves, &p).unwrap(), 0.0);

        p.penalty_p = 10.0;
        let mixed = [note(60, 12), note(62, 12)];
        assert_eq!(w_frag(&quarter, &mixed, &p).unwrap(), p.pitch_table[2] + 10.0);

        assert!(w_frag(&quarter, &[note(60, 12)], &p).is_err());
        let too_many: alloc::vec::Vec<Note> = (0..9).map(|_| note(60, 6)).collect();
        assert!(w_frag(&quarter, &too_many, &p).is_err());
    }

    #[test]
    fn consolidation_mirrors_fragmentation() {
        let p = WeightParams::default();
        let quarter = note(60, 24);
        let halves = [note(60, 12), note(62, 12)];
        assert_eq!(
            w_frag(&quarter, &halves, &p).unwrap(),
            w_cons(&halves, &quarter, &p).unwrap()
        );
    }

    #[test]
    fn identity_distance_is_zero_with_substitution_script() {
        let p = WeightParams::default();
        let m = melody(&[note(60, 24), rest(12), note(64, 12)]);
        let r = ms_distance(&m, &m, &p);
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.script.len(), 3);
        assert!(r.script.iter().all(|op| matches!(op, EditOp::Substitute { weight, .. } if *weight == 0.0)));
    }

    #[test]
    fn empty_to_single_note_costs_one_insertion() {
        let p = WeightParams::default();
        let empty = Melody::new();
        let one = melody(&[note(62, 24)]);
        let r = ms_distance(&empty, &one, &p);
        assert_eq!(r.distance, p.k_ins + p.k1 * 24.0);
        assert_eq!(r.script, alloc::vec![EditOp::Insert { b: 0, weight: r.distance }]);

        let r = ms_distance(&one, &empty, &p);
        assert_eq!(r.distance, p.k_del + p.k1 * 24.0);
    }

    #[test]
    fn fragmentation_found_by_dp() {
        let p = WeightParams::default();
        let long = melody(&[note(60, 48)]);
        let split = melody(&[note(60, 24), note(60, 24)]);
        let r = ms_distance(&long, &split, &p);
        assert_eq!(r.distance, p.penalty_p);
        assert_eq!(r.script.len(), 1);
        assert!(matches!(r.script[0], EditOp::Fragment { a: 0, b_start: 0, b_count: 2, .. }));

        let rev = ms_distance(&split, &long, &p);
        assert_eq!(rev.distance, p.penalty_p);
        assert!(matches!(rev.script[0], EditOp::Consolidate { a_start: 0, a_count: 2, b: 0, .. }));
    }

    #[test]
    fn script_weights_sum_to_distance() {
        let p = WeightParams::default();
        let a = melody(&[note(60, 24), note(62, 12), note(64, 12), rest(24)]);
        let b = melody(&[note(60, 12), note(60, 12), note(65, 24), note(64, 12)]);
        let r = ms_distance(&a, &b, &p);
        let sum: f64 = r.script.iter().map(EditOp::weight).sum();
        assert!(close(sum, r.distance, 1e-9));
    }

    #[test]
    fn localized_identity_window_is_zero() {
        let p = WeightParams::default();
        let theme = melody(&[note(60, 24), note(62, 24), note(64, 24), note(65, 24)]);
        // prev = theme[1], cand = theme[2], cand starts at tick 48.
        let d = localized_mgd(&theme, Some(&note(62, 24)), &note(64, 24), 48, &p);
        assert_eq!(d, 0.0);
        // Shift the candidate a fifth: only the pitch table entry remains.
        let d = localized_mgd(&theme, Some(&note(62, 24)), &note(71, 24), 48, &p);
        assert_eq!(d, p.pitch_table[7]);
    }

    #[test]
    fn localized_window_clips_at_theme_end() {
        let p = WeightParams::default();
        let theme = melody(&[note(60, 24), note(62, 24)]);
        // cand would extend 24 ticks past the end; the fragment is one note
        // of 24 ticks against a two-note window of 48.
        let d = localized_mgd(&theme, Some(&note(60, 24)), &note(62, 48), 24, &p);
        let expected = ms_distance(
            &melody(&[note(60, 24), note(62, 48)]),
            &melody(&[note(60, 24), note(62, 24)]),
            &p,
        )
        .distance;
        assert_eq!(d, expected);

        // Start-of-sequence window with no predecessor.
        let d = localized_mgd(&theme, None, &note(60, 24), 0, &p);
        assert_eq!(d, 0.0);
    }
}
