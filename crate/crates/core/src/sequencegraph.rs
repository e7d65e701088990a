//! Tick-indexed trellis over a chain model, with exact inference.
//!
//! A trellis state is a chain context; placing a state at onset `t` emits
//! its last element over `[t, t + d)`. Accepted paths are exactly the
//! element sequences whose durations sum to `total_ticks`, which realises a
//! Markov model product a duration automaton in one structure. Transition
//! weights multiply the chain probability, an optional temporal factor
//! (harmonic synchronisation), an optional pair bias and any unary factors.
//!
//! The forward pass runs in log space and yields the partition function.
//! Sampling walks backward through the forward table, drawing each
//! predecessor in proportion to its share of the accumulated weight, so a
//! sequence is drawn with probability exactly `weight / Z`.
//!
//! Pins fix the element occupying a tick interval: any element overlapping
//! a pinned interval must match the pinned onset, duration and state set.
//! Barriers forbid elements from sounding across a tick (used to keep
//! generated material aligned with plan boundaries).

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math;
use crate::notation::{ChordEvent, Note};
use crate::stylemodel::{ChainElement, ChainModel, StyleModel};

/// How bias factors are folded into the distribution.
///
/// `Global` leaves transition weights unnormalised and lets the partition
/// function absorb the scale, which preserves the product-of-biases
/// identity exactly. `Local` renormalises each successor distribution in
/// place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasRenorm {
    #[default]
    Global,
    Local,
}

/// A multiplicative bias on transitions, keyed by the emitted elements.
pub trait PairBias<T> {
    /// Factor for placing `cand` at tick `t` directly after `prev`.
    fn pair(&self, prev: &T, cand: &T, t: u32) -> f64;
    /// Factor for `first` opening the sequence at tick 0.
    fn start(&self, first: &T) -> f64;
}

/// A hard requirement that `element` occupy the ticks starting at `onset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPin<T> {
    pub onset: u32,
    pub element: T,
}

type StateFn<'a> = Box<dyn Fn(usize, u32) -> f64 + Send + Sync + 'a>;
type PairFn<'a> = Box<dyn Fn(usize, usize, u32) -> f64 + Send + Sync + 'a>;
type StartFn<'a> = Box<dyn Fn(usize) -> f64 + Send + Sync + 'a>;

struct PinSlot {
    onset: u32,
    duration: u32,
    allowed: Vec<usize>,
}

/// Incrementally assembles a [`Trellis`].
pub struct TrellisBuilder<'a> {
    total_ticks: u32,
    durations: Vec<u32>,
    init: Vec<f64>,
    edges: Vec<Vec<(usize, f64)>>,
    temporal: Option<StateFn<'a>>,
    pair_bias: Option<PairFn<'a>>,
    start_bias: Option<StartFn<'a>>,
    unary: Vec<StateFn<'a>>,
    renorm: BiasRenorm,
    pins: Vec<PinSlot>,
    barriers: Vec<u32>,
}

impl<'a> TrellisBuilder<'a> {
    pub fn new(total_ticks: u32) -> TrellisBuilder<'a> {
        TrellisBuilder {
            total_ticks,
            durations: Vec::new(),
            init: Vec::new(),
            edges: Vec::new(),
            temporal: None,
            pair_bias: None,
            start_bias: None,
            unary: Vec::new(),
            renorm: BiasRenorm::Global,
            pins: Vec::new(),
            barriers: Vec::new(),
        }
    }

    pub fn add_state(&mut self, duration_ticks: u32) -> usize {
        self.durations.push(duration_ticks);
        self.init.push(0.0);
        self.edges.push(Vec::new());
        self.durations.len() - 1
    }

    pub fn set_initial(&mut self, state: usize, weight: f64) {
        self.init[state] = weight;
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) {
        self.edges[from].push((to, weight));
    }

    pub fn set_temporal(&mut self, f: StateFn<'a>) {
        self.temporal = Some(f);
    }

    pub fn set_pair_bias(&mut self, pair: PairFn<'a>, start: StartFn<'a>) {
        self.pair_bias = Some(pair);
        self.start_bias = Some(start);
    }

    pub fn add_unary(&mut self, f: StateFn<'a>) {
        self.unary.push(f);
    }

    pub fn set_renorm(&mut self, renorm: BiasRenorm) {
        self.renorm = renorm;
    }

    /// Require one of `allowed` (all sharing `duration`) at `onset`.
    pub fn add_pin(&mut self, onset: u32, duration: u32, allowed: Vec<usize>) -> Result<()> {
        let end = onset.checked_add(duration).filter(|e| *e <= self.total_ticks);
        if duration == 0 || end.is_none() {
            return Err(Error::TickRange { start: onset, end: onset + duration, limit: self.total_ticks });
        }
        if self.pins.iter().any(|p| onset < p.onset + p.duration && p.onset < onset + duration) {
            return Err(Error::InvalidArgument(alloc::format!("pinned intervals overlap at tick {onset}")));
        }
        self.pins.push(PinSlot { onset, duration, allowed });
        Ok(())
    }

    /// Forbid any element from sounding across tick `t`.
    pub fn add_barrier(&mut self, t: u32) {
        if t > 0 && t < self.total_ticks {
            self.barriers.push(t);
        }
    }

    pub fn build(mut self) -> Result<Trellis<'a>> {
        if self.total_ticks == 0 {
            return Err(Error::InvalidArgument(alloc::string::String::from("total duration must be positive")));
        }
        self.pins.sort_by_key(|p| p.onset);
        self.barriers.sort_unstable();
        self.barriers.dedup();
        let mut redges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.durations.len()];
        for (from, row) in self.edges.iter().enumerate() {
            for (to, w) in row {
                redges[*to].push((from, *w));
            }
        }
        Ok(Trellis {
            total_ticks: self.total_ticks,
            durations: self.durations,
            init: self.init,
            edges: self.edges,
            redges,
            temporal: self.temporal,
            pair_bias: self.pair_bias,
            start_bias: self.start_bias,
            unary: self.unary,
            renorm: self.renorm,
            pins: self.pins,
            barriers: self.barriers,
        })
    }
}

/// The sequence model: states with durations, factored transition weights
/// and hard constraints. Immutable once built.
pub struct Trellis<'a> {
    total_ticks: u32,
    durations: Vec<u32>,
    init: Vec<f64>,
    edges: Vec<Vec<(usize, f64)>>,
    redges: Vec<Vec<(usize, f64)>>,
    temporal: Option<StateFn<'a>>,
    pair_bias: Option<PairFn<'a>>,
    start_bias: Option<StartFn<'a>>,
    unary: Vec<StateFn<'a>>,
    renorm: BiasRenorm,
    pins: Vec<PinSlot>,
    barriers: Vec<u32>,
}

/// Forward sums: `alpha[t][s]` is the log total weight of partial paths
/// ending exactly at tick `t` in state `s`.
#[derive(Debug)]
pub struct ForwardTable {
    n_states: usize,
    alpha: Vec<f64>,
    log_z: f64,
}

impl ForwardTable {
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    fn get(&self, t: u32, s: usize) -> f64 {
        self.alpha[t as usize * self.n_states + s]
    }

    fn add(&mut self, t: u32, s: usize, log_w: f64) {
        let cell = &mut self.alpha[t as usize * self.n_states + s];
        *cell = math::log_add(*cell, log_w);
    }
}

/// A state path with its unnormalised log weight and log probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub states: Vec<usize>,
    pub log_weight: f64,
    pub log_prob: f64,
}

impl<'a> Trellis<'a> {
    pub fn total_ticks(&self) -> u32 {
        self.total_ticks
    }

    pub fn num_states(&self) -> usize {
        self.durations.len()
    }

    pub fn duration(&self, state: usize) -> u32 {
        self.durations[state]
    }

    fn crosses_barrier(&self, t: u32, end: u32) -> bool {
        let i = self.barriers.partition_point(|b| *b <= t);
        i < self.barriers.len() && self.barriers[i] < end
    }

    /// Whether placing `state` at onset `t` is admissible under pins and
    /// barriers.
    fn admits(&self, state: usize, t: u32) -> bool {
        let end = t + self.durations[state];
        if self.crosses_barrier(t, end) {
            return false;
        }
        for pin in &self.pins {
            if pin.onset >= end {
                break;
            }
            if pin.onset + pin.duration <= t {
                continue;
            }
            // Overlap: the placement must be the pinned element itself.
            return pin.onset == t && pin.duration == end - t && pin.allowed.contains(&state);
        }
        true
    }

    fn temporal_factor(&self, state: usize, t: u32) -> f64 {
        let mut w = match &self.temporal {
            Some(f) => f(state, t),
            None => 1.0,
        };
        for u in &self.unary {
            w *= u(state, t);
        }
        w
    }

    fn init_weight(&self, state: usize) -> f64 {
        let mut w = self.init[state] * self.temporal_factor(state, 0);
        if let Some(start) = &self.start_bias {
            w *= start(state);
        }
        if self.renorm == BiasRenorm::Local && w > 0.0 {
            let norm = self.local_init_norm();
            if norm <= 0.0 {
                return 0.0;
            }
            w /= norm;
        }
        w
    }

    fn local_init_norm(&self) -> f64 {
        let mut norm = 0.0;
        for s in 0..self.num_states() {
            let mut w = self.init[s] * self.temporal_factor(s, 0);
            if let Some(start) = &self.start_bias {
                w *= start(s);
            }
            norm += w;
        }
        norm
    }

    fn raw_step_weight(&self, prev: usize, state: usize, base: f64, t: u32) -> f64 {
        let mut w = base * self.temporal_factor(state, t);
        if let Some(pair) = &self.pair_bias {
            w *= pair(prev, state, t);
        }
        w
    }

    fn step_weight(&self, prev: usize, state: usize, base: f64, t: u32) -> f64 {
        let w = self.raw_step_weight(prev, state, base, t);
        match self.renorm {
            BiasRenorm::Global => w,
            BiasRenorm::Local => {
                if w <= 0.0 {
                    return 0.0;
                }
                let norm: f64 = self
                    .edges[prev]
                    .iter()
                    .map(|(to, base)| self.raw_step_weight(prev, *to, *base, t))
                    .sum();
                if norm <= 0.0 {
                    0.0
                } else {
                    w / norm
                }
            }
        }
    }

    fn edge_base(&self, prev: usize, state: usize) -> f64 {
        self.edges[prev]
            .iter()
            .find(|(to, _)| *to == state)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    /// Run the forward pass; errors with the last reachable tick when no
    /// sequence satisfies duration, pins and support.
    pub fn forward(&self) -> Result<ForwardTable> {
        let n = self.num_states();
        let total = self.total_ticks;
        let mut fw = ForwardTable {
            n_states: n,
            alpha: vec![f64::NEG_INFINITY; (total as usize + 1) * n],
            log_z: f64::NEG_INFINITY,
        };

        for s in 0..n {
            let d = self.durations[s];
            if d > total || !self.admits(s, 0) {
                continue;
            }
            let w = self.init_weight(s);
            if w > 0.0 {
                fw.add(d, s, math::ln(w));
            }
        }

        let mut stuck_at = 0u32;
        for t in 1..total {
            let mut frontier = false;
            for prev in 0..n {
                let lw_prev = fw.get(t, prev);
                if lw_prev == f64::NEG_INFINITY {
                    continue;
                }
                frontier = true;
                for (to, base) in &self.edges[prev] {
                    let end = t + self.durations[*to];
                    if end > total || !self.admits(*to, t) {
                        continue;
                    }
                    let w = self.step_weight(prev, *to, *base, t);
                    if w > 0.0 {
                        fw.add(end, *to, lw_prev + math::ln(w));
                    }
                }
            }
            if frontier {
                stuck_at = t;
            }
        }

        let mut log_z = f64::NEG_INFINITY;
        for s in 0..n {
            log_z = math::log_add(log_z, fw.get(total, s));
        }
        if log_z == f64::NEG_INFINITY {
            return Err(Error::Infeasible { stuck_at, total_ticks: total });
        }
        fw.log_z = log_z;
        Ok(fw)
    }

    /// Log weight of a full state path, `-inf` if any factor is zero or a
    /// constraint is violated.
    pub fn score_path(&self, states: &[usize]) -> f64 {
        if states.is_empty() {
            return f64::NEG_INFINITY;
        }
        let mut t = 0u32;
        let first = states[0];
        if !self.admits(first, 0) {
            return f64::NEG_INFINITY;
        }
        let w0 = self.init_weight(first);
        if w0 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut log_w = math::ln(w0);
        t += self.durations[first];
        for pair in states.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            if !self.admits(cur, t) {
                return f64::NEG_INFINITY;
            }
            let w = self.step_weight(prev, cur, self.edge_base(prev, cur), t);
            if w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            log_w += math::ln(w);
            t += self.durations[cur];
        }
        log_w
    }

    /// Score a path whose durations must sum exactly to the total span.
    pub fn evaluate(&self, fw: &ForwardTable, states: &[usize]) -> Result<ScoredSequence> {
        let span: u32 = states.iter().map(|s| self.durations[*s]).sum();
        if span != self.total_ticks {
            return Err(Error::InvalidArgument(alloc::format!(
                "path spans {span} ticks, expected {}",
                self.total_ticks
            )));
        }
        let log_weight = self.score_path(states);
        Ok(ScoredSequence { states: states.to_vec(), log_weight, log_prob: log_weight - fw.log_z() })
    }

    /// Draw `count` sequences; draw `i` is reproducible from `(seed, i)`.
    pub fn sample(&self, fw: &ForwardTable, seed: u64, count: usize) -> Vec<ScoredSequence> {
        (0..count)
            .map(|i| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                self.sample_one(fw, &mut rng)
            })
            .collect()
    }

    /// Draw one sequence by backward sampling from the forward table.
    pub fn sample_one<R: RngCore>(&self, fw: &ForwardTable, rng: &mut R) -> ScoredSequence {
        let total = self.total_ticks;
        let mut rev = Vec::new();

        let mut cur = self.draw(rng, fw.log_z(), (0..self.num_states()).map(|s| (s, fw.get(total, s))));
        let mut t_end = total;
        rev.push(cur);
        while t_end > self.durations[cur] {
            let t = t_end - self.durations[cur];
            let target = fw.get(t_end, cur);
            let prev = self.draw(
                rng,
                target,
                self.redges[cur].iter().filter_map(|(p, base)| {
                    let lw = fw.get(t, *p);
                    if lw == f64::NEG_INFINITY {
                        return None;
                    }
                    let w = self.step_weight(*p, cur, *base, t);
                    if w <= 0.0 {
                        return None;
                    }
                    Some((*p, lw + math::ln(w)))
                }),
            );
            rev.push(prev);
            t_end = t;
            cur = prev;
        }
        rev.reverse();
        let log_weight = self.score_path(&rev);
        ScoredSequence { states: rev, log_weight, log_prob: log_weight - fw.log_z() }
    }

    /// Pick an item with probability `exp(log_w - log_norm)`.
    fn draw<R: RngCore>(&self, rng: &mut R, log_norm: f64, options: impl Iterator<Item = (usize, f64)>) -> usize {
        let u = uniform01(rng);
        let mut acc = 0.0;
        let mut chosen = None;
        for (s, log_w) in options {
            if log_w == f64::NEG_INFINITY {
                continue;
            }
            acc += math::exp(log_w - log_norm);
            chosen = Some(s);
            if acc > u {
                break;
            }
        }
        chosen.expect("forward mass implies at least one admissible option")
    }
}

/// Uniform draw in `[0, 1)` from an RNG's next 53 bits.
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Build a trellis over a chain model's contexts.
#[allow(clippy::too_many_arguments)]
pub fn chain_trellis<'a, T: ChainElement>(
    chain: &'a ChainModel<T>,
    total_ticks: u32,
    temporal: Option<Box<dyn Fn(&T, u32) -> f64 + Send + Sync + 'a>>,
    bias: Option<&'a (dyn PairBias<T> + Send + Sync)>,
    pins: &[ElementPin<T>],
    barriers: &[u32],
    renorm: BiasRenorm,
) -> Result<Trellis<'a>> {
    let mut b = TrellisBuilder::new(total_ticks);
    for ctx in 0..chain.contexts().len() {
        b.add_state(chain.context_ticks(ctx as u32));
    }
    for (v, p) in chain.initial() {
        if let Some(ctx) = chain.start_context(*v) {
            b.set_initial(ctx as usize, *p);
        }
    }
    for ctx in 0..chain.contexts().len() as u32 {
        for (v, p) in &chain.transitions()[ctx as usize] {
            if let Some(to) = chain.step(ctx, *v) {
                b.add_edge(ctx as usize, to as usize, *p);
            }
        }
    }
    if let Some(f) = temporal {
        b.set_temporal(Box::new(move |s, t| f(&chain.vocab()[chain.emitted(s as u32) as usize], t)));
    }
    if let Some(bias) = bias {
        b.set_pair_bias(
            Box::new(move |prev, s, t| {
                bias.pair(
                    &chain.vocab()[chain.emitted(prev as u32) as usize],
                    &chain.vocab()[chain.emitted(s as u32) as usize],
                    t,
                )
            }),
            Box::new(move |s| bias.start(&chain.vocab()[chain.emitted(s as u32) as usize])),
        );
    }
    for pin in pins {
        let allowed = match chain.vocab_index(&pin.element) {
            Some(v) => (0..chain.contexts().len())
                .filter(|ctx| chain.emitted(*ctx as u32) == v)
                .collect(),
            None => Vec::new(),
        };
        b.add_pin(pin.onset, pin.element.element_ticks(), allowed)?;
    }
    for t in barriers {
        b.add_barrier(*t);
    }
    b.set_renorm(renorm);
    b.build()
}

/// Melody trellis: chain transitions synchronised to a chord track through
/// the harmonic model.
pub fn melody_trellis<'a>(
    model: &'a StyleModel,
    chords: &'a [ChordEvent],
    total_ticks: u32,
    bias: Option<&'a (dyn PairBias<Note> + Send + Sync)>,
    pins: &[ElementPin<Note>],
    barriers: &[u32],
    renorm: BiasRenorm,
) -> Result<Trellis<'a>> {
    let temporal: Box<dyn Fn(&Note, u32) -> f64 + Send + Sync + 'a> =
        Box::new(move |note, t| model.temporal_prob(chords, note, t).unwrap_or(0.0));
    chain_trellis(&model.notes, total_ticks, Some(temporal), bias, pins, barriers, renorm)
}

/// Chord trellis: the chord chain alone carries the harmonic style.
pub fn chord_trellis<'a>(
    model: &'a StyleModel,
    total_ticks: u32,
    bias: Option<&'a (dyn PairBias<ChordEvent> + Send + Sync)>,
    pins: &[ElementPin<ChordEvent>],
    barriers: &[u32],
    renorm: BiasRenorm,
) -> Result<Trellis<'a>> {
    chain_trellis(&model.chords, total_ticks, None, bias, pins, barriers, renorm)
}
