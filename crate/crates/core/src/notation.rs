//! Symbolic music types on an integer tick grid.
//!
//! All durations are counted in ticks at 24 ticks per quarter note, the
//! smallest grid that represents sixteenths, eighth triplets and dotted
//! values exactly with integer arithmetic. Rests are first-class notes with
//! a [`Pitch::Rest`] sentinel, so a melody always covers its whole span with
//! no gaps.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Ticks per quarter note. A 4/4 bar is `4 * 24 = 96` ticks.
pub const TICKS_PER_QUARTER: u32 = 24;

/// A strictly positive span of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dur {
    ticks: u32,
}

impl Dur {
    pub const QUARTER: Dur = Dur { ticks: 24 };
    pub const EIGHTH: Dur = Dur { ticks: 12 };
    pub const SIXTEENTH: Dur = Dur { ticks: 6 };
    pub const TRIPLET_EIGHTH: Dur = Dur { ticks: 8 };
    pub const DOTTED_QUARTER: Dur = Dur { ticks: 36 };
    pub const DOTTED_EIGHTH: Dur = Dur { ticks: 18 };
    pub const HALF: Dur = Dur { ticks: 48 };
    pub const WHOLE: Dur = Dur { ticks: 96 };

    pub fn from_ticks(ticks: u32) -> Result<Dur> {
        if ticks == 0 {
            return Err(Error::InvalidArgument(String::from("duration must be at least 1 tick")));
        }
        Ok(Dur { ticks })
    }

    pub const fn ticks(self) -> u32 {
        self.ticks
    }
}

/// A sounding pitch (MIDI number) or a rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pitch {
    Rest,
    Midi(u8),
}

impl Pitch {
    pub fn midi(value: u8) -> Result<Pitch> {
        if value > 127 {
            return Err(Error::PitchRange { value: value as i32 });
        }
        Ok(Pitch::Midi(value))
    }

    pub fn is_rest(self) -> bool {
        matches!(self, Pitch::Rest)
    }

    pub fn as_midi(self) -> Option<u8> {
        match self {
            Pitch::Rest => None,
            Pitch::Midi(p) => Some(p),
        }
    }

    /// Pitch class 0..=11, or `None` for rests.
    pub fn pitch_class(self) -> Option<u8> {
        self.as_midi().map(|p| p % 12)
    }

    /// Shift a sounding pitch by `semitones`; rests are unchanged.
    pub fn transposed(self, semitones: i32) -> Result<Pitch> {
        match self {
            Pitch::Rest => Ok(Pitch::Rest),
            Pitch::Midi(p) => {
                let shifted = p as i32 + semitones;
                if !(0..=127).contains(&shifted) {
                    return Err(Error::PitchRange { value: shifted });
                }
                Ok(Pitch::Midi(shifted as u8))
            }
        }
    }
}

/// One timed event of a melody: a pitch or rest with a duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Note {
    pub pitch: Pitch,
    pub duration: Dur,
}

impl Note {
    pub fn new(pitch: Pitch, duration: Dur) -> Note {
        Note { pitch, duration }
    }

    pub fn ticks(&self) -> u32 {
        self.duration.ticks()
    }
}

/// A contiguous sequence of notes. Onsets are implicit: note `k` starts at
/// the sum of the durations of notes `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Melody {
    notes: Vec<Note>,
}

impl Melody {
    pub fn new() -> Melody {
        Melody { notes: Vec::new() }
    }

    pub fn from_notes(notes: Vec<Note>) -> Melody {
        Melody { notes }
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn push(&mut self, note: Note) {
        self.notes.push(note);
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn total_ticks(&self) -> u32 {
        self.notes.iter().map(Note::ticks).sum()
    }

    /// Iterate `(onset, note)` pairs.
    pub fn onsets(&self) -> impl Iterator<Item = (u32, &Note)> {
        let mut t = 0u32;
        self.notes.iter().map(move |n| {
            let onset = t;
            t += n.ticks();
            (onset, n)
        })
    }

    /// Extract the span `[start, end)`. Notes overlapping a boundary are
    /// truncated to the overlapping portion, keeping their pitch; notes fully
    /// outside are dropped.
    pub fn slice(&self, start: u32, end: u32) -> Result<Melody> {
        let total = self.total_ticks();
        if start >= end || end > total {
            return Err(Error::TickRange { start, end, limit: total });
        }
        let mut out = Vec::new();
        for (onset, note) in self.onsets() {
            let lo = onset.max(start);
            let hi = (onset + note.ticks()).min(end);
            if hi > lo {
                out.push(Note::new(note.pitch, Dur::from_ticks(hi - lo)?));
            }
        }
        Ok(Melody::from_notes(out))
    }

    /// Shift every sounding pitch by `semitones`, keeping rhythm intact.
    pub fn transposed(&self, semitones: i32) -> Result<Melody> {
        let notes = self
            .notes
            .iter()
            .map(|n| Ok(Note::new(n.pitch.transposed(semitones)?, n.duration)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Melody::from_notes(notes))
    }
}

/// Chord qualities understood by the corpus format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChordQuality {
    Maj,
    Min,
    Dom7,
    Maj7,
    Min7,
    M7b5,
    Dim,
    Aug,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 8] = [
        ChordQuality::Maj,
        ChordQuality::Min,
        ChordQuality::Dom7,
        ChordQuality::Maj7,
        ChordQuality::Min7,
        ChordQuality::M7b5,
        ChordQuality::Dim,
        ChordQuality::Aug,
    ];

    /// Chord tones as semitone offsets from the root.
    pub fn tone_offsets(self) -> &'static [u8] {
        match self {
            ChordQuality::Maj => &[0, 4, 7],
            ChordQuality::Min => &[0, 3, 7],
            ChordQuality::Dom7 => &[0, 4, 7, 10],
            ChordQuality::Maj7 => &[0, 4, 7, 11],
            ChordQuality::Min7 => &[0, 3, 7, 10],
            ChordQuality::M7b5 => &[0, 3, 6, 10],
            ChordQuality::Dim => &[0, 3, 6],
            ChordQuality::Aug => &[0, 4, 8],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChordQuality::Maj => "maj",
            ChordQuality::Min => "min",
            ChordQuality::Dom7 => "dom7",
            ChordQuality::Maj7 => "maj7",
            ChordQuality::Min7 => "min7",
            ChordQuality::M7b5 => "m7b5",
            ChordQuality::Dim => "dim",
            ChordQuality::Aug => "aug",
        }
    }

    pub fn from_name(name: &str) -> Option<ChordQuality> {
        ChordQuality::ALL.iter().copied().find(|q| q.name() == name)
    }
}

/// A chord symbol with a duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChordEvent {
    /// Root pitch class, 0..=11.
    pub root: u8,
    pub quality: ChordQuality,
    pub duration: Dur,
}

impl ChordEvent {
    pub fn new(root: u8, quality: ChordQuality, duration: Dur) -> Result<ChordEvent> {
        if root > 11 {
            return Err(Error::InvalidArgument(String::from("chord root must be a pitch class 0..=11")));
        }
        Ok(ChordEvent { root, quality, duration })
    }

    pub fn ticks(&self) -> u32 {
        self.duration.ticks()
    }

    /// Pitch classes sounding in this chord.
    pub fn tone_classes(&self) -> impl Iterator<Item = u8> + '_ {
        self.quality.tone_offsets().iter().map(move |o| (self.root + o) % 12)
    }

    /// Binary 12-dimensional chord tone vector.
    pub fn tone_vector(&self) -> [f64; 12] {
        let mut v = [0.0; 12];
        for pc in self.tone_classes() {
            v[pc as usize] = 1.0;
        }
        v
    }

    /// Same chord with the root shifted by `semitones` pitch classes.
    pub fn transposed(&self, semitones: i32) -> ChordEvent {
        let root = (self.root as i32 + semitones).rem_euclid(12) as u8;
        ChordEvent { root, quality: self.quality, duration: self.duration }
    }
}

pub fn chord_total_ticks(chords: &[ChordEvent]) -> u32 {
    chords.iter().map(ChordEvent::ticks).sum()
}

/// Iterate `(onset, chord)` pairs of a chord track.
pub fn chord_onsets(chords: &[ChordEvent]) -> impl Iterator<Item = (u32, &ChordEvent)> {
    let mut t = 0u32;
    chords.iter().map(move |c| {
        let onset = t;
        t += c.ticks();
        (onset, c)
    })
}

/// The chord sounding at tick `t`.
pub fn chord_at(chords: &[ChordEvent], t: u32) -> Result<&ChordEvent> {
    let total = chord_total_ticks(chords);
    if t >= total {
        return Err(Error::TickRange { start: t, end: t + 1, limit: total });
    }
    for (onset, chord) in chord_onsets(chords) {
        if t < onset + chord.ticks() {
            return Ok(chord);
        }
    }
    unreachable!("tick inside span but not covered by any chord")
}

/// Extract `[start, end)` from a chord track, truncating boundary chords.
pub fn slice_chords(chords: &[ChordEvent], start: u32, end: u32) -> Result<Vec<ChordEvent>> {
    let total = chord_total_ticks(chords);
    if start >= end || end > total {
        return Err(Error::TickRange { start, end, limit: total });
    }
    let mut out = Vec::new();
    for (onset, chord) in chord_onsets(chords) {
        let lo = onset.max(start);
        let hi = (onset + chord.ticks()).min(end);
        if hi > lo {
            out.push(ChordEvent { duration: Dur::from_ticks(hi - lo)?, ..*chord });
        }
    }
    Ok(out)
}

pub fn transpose_chords(chords: &[ChordEvent], semitones: i32) -> Vec<ChordEvent> {
    chords.iter().map(|c| c.transposed(semitones)).collect()
}

/// A two-voice lead sheet: a chord track and a melody of equal length.
///
/// Bars are numbered from 1. When `pickup_ticks > 0` the leading partial bar
/// is bar 1 and full bars follow; otherwise bar 1 is the first full bar.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadSheet {
    pub title: String,
    pub beats_per_bar: u32,
    pub pickup_ticks: u32,
    pub chords: Vec<ChordEvent>,
    pub melody: Melody,
}

impl LeadSheet {
    pub fn new(
        title: String,
        beats_per_bar: u32,
        pickup_ticks: u32,
        chords: Vec<ChordEvent>,
        melody: Melody,
    ) -> Result<LeadSheet> {
        if beats_per_bar == 0 {
            return Err(Error::Validation(String::from("beats_per_bar must be positive")));
        }
        let bar = beats_per_bar * TICKS_PER_QUARTER;
        if pickup_ticks >= bar {
            return Err(Error::Validation(String::from("pickup must be shorter than one bar")));
        }
        let melody_ticks = melody.total_ticks();
        let chord_ticks = chord_total_ticks(&chords);
        if melody_ticks != chord_ticks {
            return Err(Error::Validation(alloc::format!(
                "chord track spans {chord_ticks} ticks but melody spans {melody_ticks}"
            )));
        }
        if melody_ticks == 0 || (melody_ticks - pickup_ticks) % bar != 0 {
            return Err(Error::Validation(alloc::format!(
                "total of {melody_ticks} ticks is not a pickup of {pickup_ticks} plus whole bars of {bar}"
            )));
        }
        Ok(LeadSheet { title, beats_per_bar, pickup_ticks, chords, melody })
    }

    pub fn bar_ticks(&self) -> u32 {
        self.beats_per_bar * TICKS_PER_QUARTER
    }

    pub fn total_ticks(&self) -> u32 {
        self.melody.total_ticks()
    }

    /// Number of bars, counting a pickup as bar 1.
    pub fn bar_count(&self) -> u32 {
        let full = (self.total_ticks() - self.pickup_ticks) / self.bar_ticks();
        if self.pickup_ticks > 0 {
            full + 1
        } else {
            full
        }
    }

    /// Tick span `[start, end)` of a 1-based bar index.
    pub fn bar_span(&self, bar: u32) -> Result<(u32, u32)> {
        bar_span(self.beats_per_bar, self.pickup_ticks, self.total_ticks(), bar)
    }

    /// A new sheet holding only bars `first..=last`.
    pub fn slice_bars(&self, first: u32, last: u32) -> Result<LeadSheet> {
        if first > last {
            return Err(Error::InvalidArgument(String::from("bar range is empty")));
        }
        let (start, _) = self.bar_span(first)?;
        let (_, end) = self.bar_span(last)?;
        let pickup = if first == 1 { self.pickup_ticks } else { 0 };
        LeadSheet::new(
            self.title.clone(),
            self.beats_per_bar,
            pickup,
            slice_chords(&self.chords, start, end)?,
            self.melody.slice(start, end)?,
        )
    }
}

/// Tick span of a 1-based bar index within a span of `total_ticks`.
pub fn bar_span(beats_per_bar: u32, pickup_ticks: u32, total_ticks: u32, bar: u32) -> Result<(u32, u32)> {
    let bar_len = beats_per_bar * TICKS_PER_QUARTER;
    let has_pickup = pickup_ticks > 0;
    let full_bars = (total_ticks - pickup_ticks) / bar_len;
    let count = if has_pickup { full_bars + 1 } else { full_bars };
    if bar == 0 || bar > count {
        return Err(Error::InvalidArgument(alloc::format!("bar {bar} outside 1..={count}")));
    }
    if has_pickup {
        if bar == 1 {
            Ok((0, pickup_ticks))
        } else {
            let start = pickup_ticks + (bar - 2) * bar_len;
            Ok((start, start + bar_len))
        }
    } else {
        let start = (bar - 1) * bar_len;
        Ok((start, start + bar_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn n(pitch: u8, ticks: u32) -> Note {
        Note::new(Pitch::Midi(pitch), Dur::from_ticks(ticks).unwrap())
    }

    #[test]
    fn slice_truncates_boundary_notes() {
        let whole = Melody::from_notes(vec![n(60, 96)]);
        let inner = whole.slice(24, 48).unwrap();
        assert_eq!(inner.notes(), &[n(60, 24)]);

        let two = Melody::from_notes(vec![n(60, 24), n(62, 24)]);
        let cut = two.slice(12, 36).unwrap();
        assert_eq!(cut.notes(), &[n(60, 12), n(62, 12)]);
    }

    #[test]
    fn slice_full_span_is_identity() {
        let m = Melody::from_notes(vec![n(60, 24), n(62, 12), n(64, 12)]);
        assert_eq!(m.slice(0, m.total_ticks()).unwrap(), m);
    }

    #[test]
    fn slice_rejects_bad_ranges() {
        let m = Melody::from_notes(vec![n(60, 24)]);
        assert!(matches!(m.slice(10, 10), Err(Error::TickRange { .. })));
        assert!(matches!(m.slice(0, 25), Err(Error::TickRange { .. })));
    }

    #[test]
    fn transpose_round_trip() {
        let m = Melody::from_notes(vec![n(60, 24), Note::new(Pitch::Rest, Dur::QUARTER), n(67, 12)]);
        assert_eq!(m.transposed(0).unwrap(), m);
        assert_eq!(m.transposed(12).unwrap().transposed(-12).unwrap(), m);
        let down = m.transposed(-2).unwrap();
        assert_eq!(down.notes()[0], n(58, 24));
        assert_eq!(down.notes()[1].pitch, Pitch::Rest);
    }

    #[test]
    fn transpose_out_of_range_errors() {
        let m = Melody::from_notes(vec![n(120, 24)]);
        assert!(matches!(m.transposed(10), Err(Error::PitchRange { value: 130 })));
    }

    #[test]
    fn chord_tones() {
        let c = ChordEvent::new(0, ChordQuality::Maj, Dur::WHOLE).unwrap();
        assert_eq!(c.tone_vector(), {
            let mut v = [0.0; 12];
            v[0] = 1.0;
            v[4] = 1.0;
            v[7] = 1.0;
            v
        });
        let am = ChordEvent::new(9, ChordQuality::Min, Dur::WHOLE).unwrap();
        let tones: alloc::vec::Vec<u8> = am.tone_classes().collect();
        assert_eq!(tones, vec![9, 0, 4]);
    }

    #[test]
    fn lead_sheet_validation() {
        let melody = Melody::from_notes(vec![n(60, 96)]);
        let chords = vec![ChordEvent::new(0, ChordQuality::Maj, Dur::WHOLE).unwrap()];
        assert!(LeadSheet::new("ok".into(), 4, 0, chords.clone(), melody.clone()).is_ok());

        let short_chords = vec![ChordEvent::new(0, ChordQuality::Maj, Dur::HALF).unwrap()];
        assert!(matches!(
            LeadSheet::new("bad".into(), 4, 0, short_chords, melody.clone()),
            Err(Error::Validation(_))
        ));

        // 96 ticks with a 48-tick pickup is not pickup + whole bars.
        assert!(matches!(
            LeadSheet::new("bad".into(), 4, 48, chords, melody),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn bar_numbering_with_pickup() {
        let melody = Melody::from_notes(vec![n(60, 48), n(62, 96), n(64, 96)]);
        let chords = vec![
            ChordEvent::new(0, ChordQuality::Maj, Dur::from_ticks(48).unwrap()).unwrap(),
            ChordEvent::new(5, ChordQuality::Maj, Dur::from_ticks(96).unwrap()).unwrap(),
            ChordEvent::new(7, ChordQuality::Dom7, Dur::from_ticks(96).unwrap()).unwrap(),
        ];
        let ls = LeadSheet::new("pickup".into(), 4, 48, chords, melody).unwrap();
        assert_eq!(ls.bar_count(), 3);
        assert_eq!(ls.bar_span(1).unwrap(), (0, 48));
        assert_eq!(ls.bar_span(2).unwrap(), (48, 144));
        assert_eq!(ls.bar_span(3).unwrap(), (144, 240));
        assert!(ls.bar_span(4).is_err());

        let tail = ls.slice_bars(2, 3).unwrap();
        assert_eq!(tail.pickup_ticks, 0);
        assert_eq!(tail.total_ticks(), 192);
        assert_eq!(tail.bar_count(), 2);
    }
}
