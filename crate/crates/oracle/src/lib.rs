//! Brute-force oracles for the test suites.
//!
//! Everything in here recomputes results by exhaustive enumeration, on
//! purpose and from scratch: the edit-distance enumerator re-derives the
//! operation weights itself instead of calling into the library, and the
//! path enumerator walks a plain adjacency description rather than a built
//! trellis. Keep it that way; the point is independence from the code under
//! test.

use variata_core::notation::Note;
use variata_core::similarity::WeightParams;

/// Exhaustive minimum edit-script weight between two melodies.
///
/// Recursively explores every script built from substitution, deletion,
/// insertion, fragmentation and consolidation (group sizes `2..=max_group`)
/// and returns the cheapest total weight. Branches are pruned only when the
/// accumulated weight already exceeds the best complete script, which is
/// sound because every operation weight is nonnegative.
pub fn exhaustive_ms_distance(a: &[Note], b: &[Note], params: &WeightParams) -> f64 {
    fn pitch_w(a: &Note, b: &Note, p: &WeightParams) -> f64 {
        match (a.pitch.as_midi(), b.pitch.as_midi()) {
            (None, None) => 0.0,
            (None, Some(_)) | (Some(_), None) => p.rest_mismatch,
            (Some(x), Some(y)) => p.pitch_table[((x as i32 - y as i32).unsigned_abs() % 12) as usize],
        }
    }

    fn group_w(single: &Note, group: &[Note], p: &WeightParams) -> f64 {
        let pitches: f64 = group.iter().map(|g| pitch_w(single, g, p)).sum();
        let span: u32 = group.iter().map(|g| g.ticks()).sum();
        pitches + p.k1 * (single.ticks().abs_diff(span)) as f64 + p.penalty_p
    }

    fn go(a: &[Note], b: &[Note], i: usize, j: usize, acc: f64, p: &WeightParams, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == a.len() && j == b.len() {
            *best = acc;
            return;
        }
        if i < a.len() {
            let del = p.k_del + p.k1 * a[i].ticks() as f64;
            go(a, b, i + 1, j, acc + del, p, best);
        }
        if j < b.len() {
            let ins = p.k_ins + p.k1 * b[j].ticks() as f64;
            go(a, b, i, j + 1, acc + ins, p, best);
        }
        if i < a.len() && j < b.len() {
            let subst = pitch_w(&a[i], &b[j], p)
                + p.k1 * (a[i].ticks().abs_diff(b[j].ticks())) as f64;
            go(a, b, i + 1, j + 1, acc + subst, p, best);
            for k in 2..=p.max_group.min(b.len() - j) {
                let frag = group_w(&a[i], &b[j..j + k], p);
                go(a, b, i + 1, j + k, acc + frag, p, best);
            }
            for k in 2..=p.max_group.min(a.len() - i) {
                let cons = group_w(&b[j], &a[i..i + k], p);
                go(a, b, i + k, j + 1, acc + cons, p, best);
            }
        }
    }

    let mut best = f64::INFINITY;
    go(a, b, 0, 0, 0.0, params, &mut best);
    best
}

/// Every melody of length `0..=max_len` over the alphabet, in a fixed order.
pub fn all_melodies(alphabet: &[Note], max_len: usize) -> Vec<Vec<Note>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Note>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for prefix in &layer {
            for n in alphabet {
                let mut m = prefix.clone();
                m.push(*n);
                next.push(m);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// A plain description of a duration-automaton sequence model, enumerable
/// by depth-first search.
pub struct ToyTrellis<'a> {
    pub total_ticks: u32,
    pub durations: Vec<u32>,
    /// Dense initial weight per state.
    pub initial: Vec<f64>,
    pub edges: Vec<Vec<(usize, f64)>>,
    pub temporal: Option<&'a dyn Fn(usize, u32) -> f64>,
    pub pair: Option<&'a dyn Fn(usize, usize, u32) -> f64>,
    pub start: Option<&'a dyn Fn(usize) -> f64>,
}

impl<'a> ToyTrellis<'a> {
    /// All exact-duration state paths with positive weight, as
    /// `(path, linear weight)`.
    pub fn enumerate(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        for s in 0..self.durations.len() {
            let mut w = self.initial[s];
            if let Some(f) = self.temporal {
                w *= f(s, 0);
            }
            if let Some(f) = self.start {
                w *= f(s);
            }
            if w > 0.0 && self.durations[s] <= self.total_ticks {
                self.walk(&mut vec![s], self.durations[s], w, &mut out);
            }
        }
        out
    }

    fn walk(&self, path: &mut Vec<usize>, t: u32, weight: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if t == self.total_ticks {
            out.push((path.clone(), weight));
            return;
        }
        let cur = *path.last().unwrap();
        for (to, base) in &self.edges[cur] {
            let end = t + self.durations[*to];
            if end > self.total_ticks {
                continue;
            }
            let mut w = *base;
            if let Some(f) = self.temporal {
                w *= f(*to, t);
            }
            if let Some(f) = self.pair {
                w *= f(cur, *to, t);
            }
            if w > 0.0 {
                path.push(*to);
                self.walk(path, end, weight * w, out);
                path.pop();
            }
        }
    }

    /// Partition function by summing enumerated path weights.
    pub fn partition(&self) -> f64 {
        self.enumerate().iter().map(|(_, w)| w).sum()
    }
}

/// Total variation distance between two distributions over the same index
/// set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}
