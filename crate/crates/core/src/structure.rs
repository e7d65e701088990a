//! Bar-level structure plans and their execution.
//!
//! A plan covers every bar with exactly one directive: free generation,
//! exact or transposed copies of earlier material, melodic variation cells,
//! or harmony-only transposition. Resolution orders the work left to right
//! while firing copies as soon as their sources exist, so copied material
//! is pinned into the model before the surrounding bars are generated, and
//! cycles among sources are rejected.
//!
//! Execution runs two passes over the same schedule: chords first, then the
//! melody synchronised to the finished chord track. Each sampling step
//! builds a full-length trellis with all determined material pinned and
//! with barriers at plan boundaries, samples one path, and keeps the
//! elements inside the step's range.
//!
//! Pinned material may contain elements the corpus never produced (for
//! example a transposed copy). Such elements are admitted structurally:
//! they get a synthetic state and uniform fallback transition weights that
//! only apply at the pinned position, so sampling stays exact everywhere
//! else and genuinely impossible plans still fail with a step error.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::notation::{bar_span, ChordEvent, LeadSheet, Melody, Note, TICKS_PER_QUARTER};
use crate::sequencegraph::{BiasRenorm, Trellis, TrellisBuilder};
use crate::similarity::WeightParams;
use crate::stylemodel::{ChainElement, ChainModel, StyleModel};
use crate::variation::{build_bias, BiasTable};

/// An inclusive range of 1-based bar numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarRange {
    pub first: u32,
    pub last: u32,
}

impl BarRange {
    pub fn new(first: u32, last: u32) -> BarRange {
        BarRange { first, last }
    }

    pub fn bars(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }

    pub fn len(&self) -> u32 {
        self.last - self.first + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectiveKind {
    Free,
    Copy { source: BarRange },
    TransposedCopy { source: BarRange, semitones: i32 },
    Variation { source: BarRange, alpha: f64 },
    HarmonyTranspose { source: BarRange, semitones: i32 },
}

impl DirectiveKind {
    pub fn source(&self) -> Option<BarRange> {
        match self {
            DirectiveKind::Free => None,
            DirectiveKind::Copy { source }
            | DirectiveKind::TransposedCopy { source, .. }
            | DirectiveKind::Variation { source, .. }
            | DirectiveKind::HarmonyTranspose { source, .. } => Some(*source),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Directive {
    pub target: BarRange,
    pub kind: DirectiveKind,
}

/// A declarative description of a piece: total size and one directive per
/// bar range.
#[derive(Debug, Clone, PartialEq)]
pub struct StructurePlan {
    pub bars_total: u32,
    pub beats_per_bar: u32,
    pub pickup_ticks: u32,
    pub directives: Vec<Directive>,
}

impl StructurePlan {
    pub fn bar_ticks(&self) -> u32 {
        self.beats_per_bar * TICKS_PER_QUARTER
    }

    pub fn total_ticks(&self) -> u32 {
        let full = if self.pickup_ticks > 0 { self.bars_total - 1 } else { self.bars_total };
        self.pickup_ticks + full * self.bar_ticks()
    }

    /// Tick span of a 1-based bar (the pickup, when present, is bar 1).
    pub fn bar_span(&self, bar: u32) -> Result<(u32, u32)> {
        bar_span(self.beats_per_bar, self.pickup_ticks, self.total_ticks(), bar)
    }

    pub fn range_span(&self, range: BarRange) -> Result<(u32, u32)> {
        let (start, _) = self.bar_span(range.first)?;
        let (_, end) = self.bar_span(range.last)?;
        Ok((start, end))
    }
}

/// What a schedule step does to its target range.
#[derive(Debug, Clone, PartialEq)]
pub enum StepAction {
    /// Sample from the unbiased model.
    Sample,
    /// Sample with a similarity bias built from the source range.
    SampleBiased { source: BarRange, alpha: f64 },
    /// Copy the source range, shifting pitches by `semitones`.
    CopyFrom { source: BarRange, semitones: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    pub target: BarRange,
    pub action: StepAction,
    /// Bars already determined (and therefore pinned) when this step runs.
    pub pinned: Vec<BarRange>,
}

/// Per-voice step sequences plus the tick boundaries generation must not
/// cross.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSchedule {
    pub chord_steps: Vec<ScheduleStep>,
    pub melody_steps: Vec<ScheduleStep>,
    pub barrier_ticks: Vec<u32>,
}

#[derive(Clone, Copy, PartialEq)]
enum Voice {
    Chords,
    Melody,
}

fn compress(set: &BTreeSet<u32>) -> Vec<BarRange> {
    let mut out: Vec<BarRange> = Vec::new();
    for bar in set {
        match out.last_mut() {
            Some(range) if range.last + 1 == *bar => range.last = *bar,
            _ => out.push(BarRange::new(*bar, *bar)),
        }
    }
    out
}

/// Validate a plan and order its directives into per-voice schedules.
pub fn resolve(plan: &StructurePlan) -> Result<GenerationSchedule> {
    if plan.bars_total == 0 || plan.beats_per_bar == 0 {
        return Err(Error::Plan(String::from("plan must have bars and a positive meter")));
    }
    if plan.pickup_ticks >= plan.bar_ticks() {
        return Err(Error::Plan(String::from("pickup must be shorter than one bar")));
    }

    // Every bar covered by exactly one directive.
    let mut owner: BTreeMap<u32, usize> = BTreeMap::new();
    for (idx, d) in plan.directives.iter().enumerate() {
        if d.target.first == 0 || d.target.first > d.target.last || d.target.last > plan.bars_total {
            return Err(Error::Plan(alloc::format!(
                "directive {idx} targets bars {}..={} outside the plan",
                d.target.first,
                d.target.last
            )));
        }
        for bar in d.target.bars() {
            if owner.insert(bar, idx).is_some() {
                return Err(Error::Plan(alloc::format!("bar {bar} is covered by two directives")));
            }
        }
        if let Some(source) = d.kind.source() {
            if source.first == 0 || source.first > source.last || source.last > plan.bars_total {
                return Err(Error::Plan(alloc::format!("directive {idx} has a source outside the plan")));
            }
            let (ss, se) = plan.range_span(source)?;
            let (ts, te) = plan.range_span(d.target)?;
            if se - ss != te - ts {
                return Err(Error::Plan(alloc::format!(
                    "directive {idx}: source spans {} ticks but target spans {}",
                    se - ss,
                    te - ts
                )));
            }
        }
        if let DirectiveKind::Variation { alpha, .. } = d.kind {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Plan(alloc::format!("directive {idx}: alpha {alpha} outside [0, 1]")));
            }
        }
    }
    for bar in 1..=plan.bars_total {
        if !owner.contains_key(&bar) {
            return Err(Error::Plan(alloc::format!("bar {bar} is not covered by any directive")));
        }
    }

    // Dependencies at directive granularity (chord voice depends on every
    // source kind; the melody voice does not depend for harmony-only
    // transposition).
    let deps_of = |idx: usize, voice: Voice| -> BTreeSet<usize> {
        let mut deps = BTreeSet::new();
        let d = &plan.directives[idx];
        let depends = match d.kind {
            DirectiveKind::Free => false,
            DirectiveKind::HarmonyTranspose { .. } => voice == Voice::Chords,
            _ => true,
        };
        if depends {
            if let Some(source) = d.kind.source() {
                for bar in source.bars() {
                    deps.insert(owner[&bar]);
                }
            }
        }
        deps
    };

    // Cycle check on the chord-voice graph (a superset of the melody graph).
    {
        let n = plan.directives.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            idx: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
            deps: &dyn Fn(usize) -> BTreeSet<usize>,
        ) -> core::result::Result<(), Vec<usize>> {
            if state[idx] == 2 {
                return Ok(());
            }
            if state[idx] == 1 {
                let pos = stack.iter().position(|s| *s == idx).unwrap_or(0);
                let mut cycle = stack[pos..].to_vec();
                cycle.push(idx);
                return Err(cycle);
            }
            state[idx] = 1;
            stack.push(idx);
            for dep in deps(idx) {
                visit(dep, state, stack, deps)?;
            }
            stack.pop();
            state[idx] = 2;
            Ok(())
        }
        let deps = |i: usize| deps_of(i, Voice::Chords);
        for idx in 0..n {
            if let Err(cycle) = visit(idx, &mut state, &mut stack, &deps) {
                let desc: Vec<String> = cycle
                    .iter()
                    .map(|i| {
                        let t = plan.directives[*i].target;
                        alloc::format!("bars {}..={}", t.first, t.last)
                    })
                    .collect();
                return Err(Error::Plan(alloc::format!("cyclic dependencies: {}", desc.join(" -> "))));
            }
        }
    }

    // Cut set: bar boundaries of every target and source range, closed
    // under pulling boundaries back through copy mappings so copied
    // material always aligns with the spans later copies read from.
    let mut cuts: BTreeSet<u32> = BTreeSet::new();
    for d in &plan.directives {
        cuts.insert(d.target.first);
        cuts.insert(d.target.last + 1);
        if let Some(s) = d.kind.source() {
            cuts.insert(s.first);
            cuts.insert(s.last + 1);
        }
    }
    loop {
        let mut added = false;
        for d in &plan.directives {
            if let Some(source) = d.kind.source() {
                for cut in cuts.clone() {
                    if cut > d.target.first && cut <= d.target.last {
                        if cuts.insert(source.first + (cut - d.target.first)) {
                            added = true;
                        }
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    let barrier_ticks: Vec<u32> = cuts
        .iter()
        .filter(|bar| **bar > 1 && **bar <= plan.bars_total)
        .map(|bar| plan.bar_span(*bar).map(|(s, _)| s))
        .collect::<Result<_>>()?;

    // Sampling units: sampling directives split at cut boundaries.
    let sampling_units = |idx: usize, voice: Voice| -> Vec<BarRange> {
        let d = &plan.directives[idx];
        let samples = match d.kind {
            DirectiveKind::Free => true,
            DirectiveKind::HarmonyTranspose { .. } => voice == Voice::Melody,
            _ => false,
        };
        if !samples {
            return Vec::new();
        }
        let mut units = Vec::new();
        let mut start = d.target.first;
        for bar in d.target.first + 1..=d.target.last {
            if cuts.contains(&bar) {
                units.push(BarRange::new(start, bar - 1));
                start = bar;
            }
        }
        units.push(BarRange::new(start, d.target.last));
        units
    };

    let schedule_voice = |voice: Voice| -> Vec<ScheduleStep> {
        let n = plan.directives.len();
        let mut determined: BTreeSet<u32> = BTreeSet::new();
        let mut done = vec![false; n];
        let mut units: Vec<(usize, Vec<BarRange>)> =
            (0..n).map(|i| (i, sampling_units(i, voice))).collect();
        let mut steps = Vec::new();

        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by_key(|i| plan.directives[*i].target.first);
            idx
        };

        loop {
            // Fire dependent directives whose sources are fully determined.
            let mut fired = true;
            while fired {
                fired = false;
                for &idx in &order {
                    if done[idx] {
                        continue;
                    }
                    let d = &plan.directives[idx];
                    let action = match (&d.kind, voice) {
                        (DirectiveKind::Copy { source }, _) => {
                            StepAction::CopyFrom { source: *source, semitones: 0 }
                        }
                        (DirectiveKind::TransposedCopy { source, semitones }, _) => {
                            StepAction::CopyFrom { source: *source, semitones: *semitones }
                        }
                        (DirectiveKind::Variation { source, .. }, Voice::Chords) => {
                            StepAction::CopyFrom { source: *source, semitones: 0 }
                        }
                        (DirectiveKind::Variation { source, alpha }, Voice::Melody) => {
                            StepAction::SampleBiased { source: *source, alpha: *alpha }
                        }
                        (DirectiveKind::HarmonyTranspose { source, semitones }, Voice::Chords) => {
                            StepAction::CopyFrom { source: *source, semitones: *semitones }
                        }
                        _ => continue,
                    };
                    let ready = deps_of(idx, voice).iter().all(|dep| {
                        plan.directives[*dep].target.bars().all(|b| determined.contains(&b))
                    });
                    // Sources may also be partially inside an undetermined
                    // span of a determined directive; require the bars.
                    let source_ready = d
                        .kind
                        .source()
                        .map(|s| s.bars().all(|b| determined.contains(&b)))
                        .unwrap_or(true);
                    if ready && source_ready {
                        steps.push(ScheduleStep {
                            target: d.target,
                            action,
                            pinned: compress(&determined),
                        });
                        for bar in d.target.bars() {
                            determined.insert(bar);
                        }
                        done[idx] = true;
                        fired = true;
                    }
                }
            }

            // Then the leftmost pending sampling unit.
            let next = units
                .iter_mut()
                .filter(|(_, u)| !u.is_empty())
                .min_by_key(|(_, u)| u[0].first);
            match next {
                Some((idx, unit_list)) => {
                    let unit = unit_list.remove(0);
                    steps.push(ScheduleStep {
                        target: unit,
                        action: StepAction::Sample,
                        pinned: compress(&determined),
                    });
                    for bar in unit.bars() {
                        determined.insert(bar);
                    }
                    if unit_list.is_empty() {
                        done[*idx] = true;
                    }
                }
                None => break,
            }
        }
        steps
    };

    Ok(GenerationSchedule {
        chord_steps: schedule_voice(Voice::Chords),
        melody_steps: schedule_voice(Voice::Melody),
        barrier_ticks,
    })
}

/// Options for [`execute`].
#[derive(Debug, Clone)]
pub struct ComposeOptions {
    pub title: String,
    /// Replace every variation directive's alpha.
    pub alpha_override: Option<f64>,
    /// Bias renormalisation for variation steps.
    pub renorm: BiasRenorm,
}

impl Default for ComposeOptions {
    fn default() -> ComposeOptions {
        ComposeOptions {
            title: String::from("composition"),
            alpha_override: None,
            renorm: BiasRenorm::Global,
        }
    }
}

/// Trellis over a chain augmented with pinned material.
///
/// Pinned elements unknown to the chain become synthetic states; fallback
/// edges with uniform weight are added around pinned positions and gated so
/// they can only fire there.
struct PinnedSpace<T> {
    emitted: Vec<T>,
    durations: Vec<u32>,
    init: Vec<f64>,
    edges: Vec<Vec<(usize, f64)>>,
    fallback: BTreeSet<(usize, usize)>,
    in_ok: BTreeSet<(usize, u32)>,
    out_ok: BTreeSet<(usize, u32)>,
    pin_onsets: BTreeSet<u32>,
    pin_allowed: Vec<(u32, u32, Vec<usize>)>,
}

impl<T: ChainElement> PinnedSpace<T> {
    fn new(chain: &ChainModel<T>, pins: &BTreeMap<u32, T>) -> PinnedSpace<T> {
        let contexts = chain.contexts().len();
        let vocab = chain.vocab();
        let emitted: Vec<T> =
            (0..contexts).map(|c| vocab[chain.emitted(c as u32) as usize].clone()).collect();
        let durations: Vec<u32> = (0..contexts).map(|c| chain.context_ticks(c as u32)).collect();
        let mut init = vec![0.0; contexts];
        for (v, p) in chain.initial() {
            if let Some(ctx) = chain.start_context(*v) {
                init[ctx as usize] = *p;
            }
        }
        let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); contexts];
        for ctx in 0..contexts as u32 {
            for (v, p) in &chain.transitions()[ctx as usize] {
                if let Some(to) = chain.step(ctx, *v) {
                    edges[ctx as usize].push((to as usize, *p));
                }
            }
        }

        let mut space = PinnedSpace {
            emitted,
            durations,
            init,
            edges,
            fallback: BTreeSet::new(),
            in_ok: BTreeSet::new(),
            out_ok: BTreeSet::new(),
            pin_onsets: BTreeSet::new(),
            pin_allowed: Vec::new(),
        };

        let fallback_w = 1.0 / vocab.len() as f64;
        let mut foreign: BTreeMap<T, usize> = BTreeMap::new();
        for (onset, element) in pins {
            let repr = match chain.vocab_index(element) {
                Some(v) => chain.start_context(v).expect("vocabulary elements have start contexts") as usize,
                None => *foreign.entry(element.clone()).or_insert_with(|| {
                    space.emitted.push(element.clone());
                    space.durations.push(element.element_ticks());
                    space.init.push(0.0);
                    space.edges.push(Vec::new());
                    space.emitted.len() - 1
                }),
            };
            space.in_ok.insert((repr, *onset));
            space.out_ok.insert((repr, *onset + element.element_ticks()));

            // Entering edges: make the pinned element reachable from any
            // state that has no support for it.
            for prev in 0..space.edges.len() {
                let supported = space.edges[prev]
                    .iter()
                    .any(|(to, _)| space.emitted[*to] == *element);
                if !supported && !space.fallback.contains(&(prev, repr)) {
                    space.edges[prev].push((repr, fallback_w));
                    space.fallback.insert((prev, repr));
                }
            }
            // Leaving edges: a representative with no continuations gets
            // uniform gated edges over the start contexts.
            if space.edges[repr].iter().all(|(to, _)| space.fallback.contains(&(repr, *to))) {
                for v in 0..vocab.len() as u32 {
                    if let Some(to) = chain.start_context(v) {
                        let to = to as usize;
                        if !space.fallback.contains(&(repr, to))
                            && !space.edges[repr].iter().any(|(t, _)| *t == to)
                        {
                            space.edges[repr].push((to, fallback_w));
                            space.fallback.insert((repr, to));
                        }
                    }
                }
            }
            if *onset == 0 && space.init[repr] <= 0.0 {
                // All paths start with the pinned element; the constant
                // cancels in the normalisation.
                space.init[repr] = fallback_w;
            }
            let allowed: Vec<usize> = (0..space.emitted.len())
                .filter(|s| space.emitted[*s] == *element)
                .collect();
            space.pin_onsets.insert(*onset);
            space.pin_allowed.push((*onset, element.element_ticks(), allowed));
        }
        space
    }

    fn build_trellis<'a>(
        &'a self,
        total_ticks: u32,
        temporal: Option<Box<dyn Fn(&T, u32) -> f64 + Send + Sync + 'a>>,
        bias: Option<(&'a BiasTable<T>, u32)>,
        barriers: &[u32],
        renorm: BiasRenorm,
    ) -> Result<Trellis<'a>> {
        let mut b = TrellisBuilder::new(total_ticks);
        for s in 0..self.emitted.len() {
            let id = b.add_state(self.durations[s]);
            b.set_initial(id, self.init[s]);
        }
        for (from, row) in self.edges.iter().enumerate() {
            for (to, w) in row {
                b.add_edge(from, *to, *w);
            }
        }
        if let Some(f) = temporal {
            let emitted = &self.emitted;
            // Every admissible path carries the same element at a pinned
            // onset, so its temporal factor is a constant that cancels in
            // the normalisation; skipping it keeps imposed material whose
            // pitch class the corpus lacks from zeroing the whole model.
            let pin_onsets = &self.pin_onsets;
            b.set_temporal(Box::new(move |s, t| {
                if pin_onsets.contains(&t) {
                    1.0
                } else {
                    f(&emitted[s], t)
                }
            }));
        }
        {
            let emitted = &self.emitted;
            let fallback = &self.fallback;
            let in_ok = &self.in_ok;
            let out_ok = &self.out_ok;
            b.set_pair_bias(
                Box::new(move |prev, s, t| {
                    if fallback.contains(&(prev, s))
                        && !in_ok.contains(&(s, t))
                        && !out_ok.contains(&(prev, t))
                    {
                        return 0.0;
                    }
                    match bias {
                        Some((table, offset)) => {
                            if t >= offset && t < offset + table.total_ticks() {
                                table.lookup(&emitted[prev], &emitted[s], t - offset)
                            } else {
                                1.0
                            }
                        }
                        None => 1.0,
                    }
                }),
                Box::new(move |s| match bias {
                    Some((table, 0)) => table.start_lookup(&emitted[s]),
                    _ => 1.0,
                }),
            );
        }
        for (onset, dur, allowed) in &self.pin_allowed {
            b.add_pin(*onset, *dur, allowed.clone())?;
        }
        for t in barriers {
            b.add_barrier(*t);
        }
        b.set_renorm(renorm);
        b.build()
    }

    fn elements_at(&self, states: &[usize]) -> Vec<(u32, T)> {
        let mut out = Vec::with_capacity(states.len());
        let mut t = 0u32;
        for s in states {
            out.push((t, self.emitted[*s].clone()));
            t += self.durations[*s];
        }
        out
    }
}

fn step_error(step: usize, target: BarRange, err: Error) -> Error {
    match err {
        Error::Infeasible { .. } | Error::StructuralInfeasibility { .. } => Error::StructuralInfeasibility {
            step,
            detail: alloc::format!("bars {}..={}: {err}", target.first, target.last),
        },
        other => other,
    }
}

struct VoiceState<T> {
    determined: BTreeMap<u32, T>,
}

impl<T: ChainElement> VoiceState<T> {
    fn new() -> VoiceState<T> {
        VoiceState { determined: BTreeMap::new() }
    }

    fn adopt(&mut self, elements: Vec<(u32, T)>, span: (u32, u32)) {
        for (onset, element) in elements {
            if onset >= span.0 && onset < span.1 {
                self.determined.entry(onset).or_insert(element);
            }
        }
    }

    fn range_elements(&self, span: (u32, u32)) -> Vec<(u32, T)> {
        self.determined
            .range(span.0..span.1)
            .map(|(t, e)| (*t, e.clone()))
            .collect()
    }

    fn into_track(self, total: u32) -> Result<Vec<T>> {
        let mut t = 0u32;
        let mut out = Vec::with_capacity(self.determined.len());
        for (onset, element) in self.determined {
            if onset != t {
                return Err(Error::Validation(alloc::format!(
                    "generated material has a gap at tick {t} (next onset {onset})"
                )));
            }
            t += element.element_ticks();
            out.push(element);
        }
        if t != total {
            return Err(Error::Validation(alloc::format!(
                "generated material spans {t} ticks, expected {total}"
            )));
        }
        Ok(out)
    }
}

/// Execute a plan: chords first, then melody, following the resolved
/// schedule. Identical `(plan, model, seed)` inputs give identical sheets.
pub fn execute(
    plan: &StructurePlan,
    model: &StyleModel,
    params: &WeightParams,
    seed: u64,
    options: &ComposeOptions,
) -> Result<LeadSheet> {
    let schedule = resolve(plan)?;
    let total = plan.total_ticks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Chord pass.
    let mut chords: VoiceState<ChordEvent> = VoiceState::new();
    for (step_idx, step) in schedule.chord_steps.iter().enumerate() {
        let span = plan.range_span(step.target)?;
        match &step.action {
            StepAction::CopyFrom { source, semitones } => {
                let src = plan.range_span(*source)?;
                let copied: Vec<(u32, ChordEvent)> = chords
                    .range_elements(src)
                    .into_iter()
                    .map(|(t, c)| (t - src.0 + span.0, c.transposed(*semitones)))
                    .collect();
                chords.adopt(copied, span);
            }
            StepAction::Sample | StepAction::SampleBiased { .. } => {
                let space = PinnedSpace::new(&model.chords, &chords.determined);
                let trellis = space
                    .build_trellis(total, None, None, &schedule.barrier_ticks, BiasRenorm::Global)
                    .map_err(|e| step_error(step_idx, step.target, e))?;
                let fw = trellis.forward().map_err(|e| step_error(step_idx, step.target, e))?;
                let drawn = trellis.sample_one(&fw, &mut rng);
                chords.adopt(space.elements_at(&drawn.states), span);
            }
        }
    }
    let chord_track = chords.into_track(total)?;

    // Melody pass, synchronised to the finished chord track.
    let mut melody: VoiceState<Note> = VoiceState::new();
    for (step_idx, step) in schedule.melody_steps.iter().enumerate() {
        let span = plan.range_span(step.target)?;
        match &step.action {
            StepAction::CopyFrom { source, semitones } => {
                let src = plan.range_span(*source)?;
                let copied = melody
                    .range_elements(src)
                    .into_iter()
                    .map(|(t, n)| {
                        Ok((t - src.0 + span.0, Note::new(n.pitch.transposed(*semitones)?, n.duration)))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| step_error(step_idx, step.target, e))?;
                melody.adopt(copied, span);
            }
            action => {
                let bias_table = match action {
                    StepAction::SampleBiased { source, alpha } => {
                        let src = plan.range_span(*source)?;
                        let theme_notes: Vec<Note> =
                            melody.range_elements(src).into_iter().map(|(_, n)| n).collect();
                        let theme = Melody::from_notes(theme_notes);
                        let alpha = options.alpha_override.unwrap_or(*alpha);
                        Some(build_bias(&theme, model.notes.vocab(), src.1 - src.0, params, alpha)?)
                    }
                    _ => None,
                };
                let space = PinnedSpace::new(&model.notes, &melody.determined);
                let chord_ref: &[ChordEvent] = &chord_track;
                let temporal: Box<dyn Fn(&Note, u32) -> f64 + Send + Sync + '_> =
                    Box::new(move |note, t| model.temporal_prob(chord_ref, note, t).unwrap_or(0.0));
                let trellis = space
                    .build_trellis(
                        total,
                        Some(temporal),
                        bias_table.as_ref().map(|b| (b, span.0)),
                        &schedule.barrier_ticks,
                        if bias_table.is_some() { options.renorm } else { BiasRenorm::Global },
                    )
                    .map_err(|e| step_error(step_idx, step.target, e))?;
                let fw = trellis.forward().map_err(|e| step_error(step_idx, step.target, e))?;
                let drawn = trellis.sample_one(&fw, &mut rng);
                melody.adopt(space.elements_at(&drawn.states), span);
            }
        }
    }
    let melody_track = melody.into_track(total)?;

    LeadSheet::new(
        options.title.clone(),
        plan.beats_per_bar,
        plan.pickup_ticks,
        chord_track,
        Melody::from_notes(melody_track),
    )
}
