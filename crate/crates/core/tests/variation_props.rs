//! Properties of the bias machinery: formula shape, blending, and the
//! correlation chain between local biases and the global distance.

use variata_core::notation::{ChordEvent, ChordQuality, Dur, LeadSheet, Melody, Note, Pitch};
use variata_core::sequencegraph::BiasRenorm;
use variata_core::similarity::{ms_distance, WeightParams};
use variata_core::stylemodel::{train, StyleModel};
use variata_core::variation::{build_bias, distance_to_theme, variate_melody, BiasTable};
use variata_oracle::{pearson, ToyTrellis};

fn n(pitch: u8, ticks: u32) -> Note {
    Note::new(Pitch::Midi(pitch), Dur::from_ticks(ticks).unwrap())
}

fn chord(root: u8, ticks: u32) -> ChordEvent {
    ChordEvent::new(root, ChordQuality::Maj, Dur::from_ticks(ticks).unwrap()).unwrap()
}

fn sheet(title: &str, chords: Vec<ChordEvent>, melody: Vec<Note>) -> LeadSheet {
    LeadSheet::new(title.into(), 4, 0, chords, Melody::from_notes(melody)).unwrap()
}

/// Two-bar corpus with mixed rhythm and branching transitions.
fn mixed_corpus() -> Vec<LeadSheet> {
    vec![
        sheet(
            "a",
            vec![chord(0, 96), chord(7, 96)],
            vec![n(60, 24), n(62, 24), n(64, 24), n(65, 24), n(67, 24), n(65, 24), n(64, 24), n(62, 24)],
        ),
        sheet(
            "b",
            vec![chord(0, 96), chord(5, 96)],
            vec![n(60, 12), n(62, 12), n(64, 24), n(65, 24), n(67, 24), n(67, 24), n(64, 24), n(65, 12), n(64, 12), n(62, 24)],
        ),
        sheet(
            "c",
            vec![chord(5, 96), chord(7, 96)],
            vec![n(64, 24), n(62, 12), n(60, 12), n(62, 24), n(64, 24), n(65, 24), n(67, 24), n(65, 24), n(64, 24)],
        ),
        sheet(
            "d",
            vec![chord(7, 96), chord(0, 96)],
            vec![n(67, 24), n(65, 12), n(64, 12), n(65, 24), n(67, 24), n(64, 24), n(62, 24), n(60, 12), n(62, 12), n(60, 24)],
        ),
    ]
}

#[test]
fn bias_is_strictly_decreasing_in_the_increment() {
    // Drive the table with a synthetic increment that depends only on the
    // candidate, then check monotonicity of the blended bias.
    let vocab: Vec<Note> = (0..6).map(|i| n(60 + i, 24)).collect();
    let table =
        BiasTable::from_deltas(&vocab, 24, 0.0, |_, c, _| (c.pitch.as_midi().unwrap() - 60) as f64, |_| 0.0)
            .unwrap();
    let mut last = f64::INFINITY;
    for cand in &vocab {
        let b = table.lookup(&vocab[0], cand, 0);
        assert!(b < last, "bias must strictly decrease with the increment");
        last = b;
    }
}

#[test]
fn blended_bias_stays_in_the_documented_range() {
    let corpus = mixed_corpus();
    let model = train(&corpus, 1).unwrap();
    let theme = corpus[0].melody.clone();
    for alpha in [0.0, 0.3, 0.7, 1.0] {
        let table = build_bias(&theme, model.notes.vocab(), 192, &WeightParams::default(), alpha).unwrap();
        let lo = alpha;
        let hi = (1.0 - alpha) * std::f64::consts::E + alpha;
        for prev in model.notes.vocab() {
            for cand in model.notes.vocab() {
                for ti in 0..16u32 {
                    let b = table.lookup(prev, cand, ti * 12);
                    assert!(b >= lo - 1e-12 && b <= hi + 1e-12, "bias {b} outside [{lo}, {hi}]");
                }
            }
        }
    }
}

#[test]
fn stronger_blending_never_raises_a_boosting_bias() {
    let corpus = mixed_corpus();
    let model = train(&corpus, 1).unwrap();
    let theme = corpus[0].melody.clone();
    let params = WeightParams::default();
    let t0 = build_bias(&theme, model.notes.vocab(), 192, &params, 0.2).unwrap();
    let t1 = build_bias(&theme, model.notes.vocab(), 192, &params, 0.8).unwrap();
    for prev in model.notes.vocab() {
        for cand in model.notes.vocab() {
            for ti in 0..16u32 {
                let (b0, b1) = (t0.lookup(prev, cand, ti * 12), t1.lookup(prev, cand, ti * 12));
                if b0 >= 1.0 {
                    assert!(b0 + 1e-12 >= b1, "alpha blending raised a bias: {b0} -> {b1}");
                }
            }
        }
    }
}

/// Quarters-only corpus where every accepted path has the same element
/// count, so the theme path maximises the bias product outright.
fn quarters_corpus() -> Vec<LeadSheet> {
    vec![
        sheet(
            "a",
            vec![chord(0, 96)],
            vec![n(60, 24), n(62, 24), n(64, 24), n(65, 24)],
        ),
        sheet(
            "b",
            vec![chord(7, 96)],
            vec![n(62, 24), n(60, 24), n(65, 24), n(64, 24)],
        ),
        sheet(
            "c",
            vec![chord(5, 96)],
            vec![n(64, 24), n(65, 24), n(62, 24), n(60, 24)],
        ),
    ]
}

#[test]
fn theme_maximises_the_bias_product_over_the_enumerated_space() {
    let corpus = quarters_corpus();
    let model = train(&corpus, 1).unwrap();
    let theme = corpus[0].melody.clone();
    let params = WeightParams::default();
    let bias = build_bias(&theme, model.notes.vocab(), 96, &params, 0.0).unwrap();

    // Enumerate all 96-tick note walks of the trained chain.
    let chain = &model.notes;
    let vocab = chain.vocab();
    let mut initial = vec![0.0; chain.contexts().len()];
    for (v, p) in chain.initial() {
        initial[chain.start_context(*v).unwrap() as usize] = *p;
    }
    let edges: Vec<Vec<(usize, f64)>> = (0..chain.contexts().len() as u32)
        .map(|c| {
            chain.transitions()[c as usize]
                .iter()
                .filter_map(|(v, p)| chain.step(c, *v).map(|to| (to as usize, *p)))
                .collect()
        })
        .collect();
    let toy = ToyTrellis {
        total_ticks: 96,
        durations: (0..chain.contexts().len() as u32).map(|c| chain.context_ticks(c)).collect(),
        initial,
        edges,
        temporal: None,
        pair: None,
        start: None,
    };
    let paths = toy.enumerate();
    assert!(!paths.is_empty());

    let theme_product = bias.log_bias_product(theme.notes());
    let mut saw_theme = false;
    for (path, _) in &paths {
        let notes: Vec<Note> = path
            .iter()
            .map(|s| vocab[chain.emitted(*s as u32) as usize])
            .collect();
        let product = bias.log_bias_product(&notes);
        assert!(product <= theme_product + 1e-9, "a path outbid the theme: {product} > {theme_product}");
        if notes == theme.notes() {
            saw_theme = true;
        }
    }
    assert!(saw_theme, "theme must be reachable in its own style model");
}

/// Seeded quarters-only walk corpus. With a single duration every sampled
/// sequence has the same note count, the localised increments telescope to
/// the exact global distance, and the correlation chain is tight.
fn quarters_walk_corpus() -> Vec<LeadSheet> {
    use rand_core::{RngCore, SeedableRng};
    let pitches = [60u8, 62, 64, 65, 67, 69];
    let roots = [0u8, 5, 7];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut sheets = Vec::new();
    for song in 0..6 {
        let mut notes = Vec::new();
        let mut idx = song % pitches.len();
        for _ in 0..16 {
            notes.push(n(pitches[idx], 24));
            let step = (rng.next_u64() % 3) as i32 - 1;
            idx = (idx as i32 + step).rem_euclid(pitches.len() as i32) as usize;
        }
        let chords: Vec<ChordEvent> =
            (0..4).map(|bar| chord(roots[(song + bar) % roots.len()], 96)).collect();
        sheets.push(sheet(&format!("walk {song}"), chords, notes));
    }
    sheets
}

struct CorrData {
    distances: Vec<f64>,
    log_ratios: Vec<f64>,
    sums: Vec<f64>,
    log_products: Vec<f64>,
}

fn correlation_run(model: &StyleModel, theme_sheet: &LeadSheet, alpha: f64, count: usize) -> CorrData {
    let params = WeightParams::default();
    let run = variate_melody(
        model,
        &theme_sheet.chords,
        &theme_sheet.melody,
        &params,
        alpha,
        BiasRenorm::Global,
        7,
        count,
    )
    .unwrap();
    let mut data = CorrData {
        distances: Vec::new(),
        log_ratios: Vec::new(),
        sums: Vec::new(),
        log_products: Vec::new(),
    };
    for s in &run.samples {
        data.distances.push(distance_to_theme(s, &theme_sheet.melody, &params));
        data.log_ratios.push(s.log_prob_biased - s.log_prob_unbiased);
        data.sums.push(s.sum_localized);
        data.log_products.push(s.log_bias_product);
    }
    data
}

#[test]
fn biased_probability_ratio_anticorrelates_with_distance() {
    let corpus = quarters_walk_corpus();
    let model = train(&corpus, 1).unwrap();
    let data = correlation_run(&model, &corpus[0], 0.0, 1000);
    let r = pearson(&data.log_ratios, &data.distances);
    assert!(r <= -0.5, "corr(log ratio, distance) = {r}, expected <= -0.5");

    // Rhythm variety adds note-count noise to the ratio but must not erase
    // the pull toward the theme.
    let mixed = mixed_corpus();
    let mixed_model = train(&mixed, 1).unwrap();
    let mixed_data = correlation_run(&mixed_model, &mixed[0], 0.0, 1000);
    let r_mixed = pearson(&mixed_data.log_ratios, &mixed_data.distances);
    assert!(r_mixed < 0.0, "corr(log ratio, distance) = {r_mixed}, expected negative");
}

#[test]
fn bias_product_tracks_the_localised_sum() {
    let corpus = quarters_walk_corpus();
    let model = train(&corpus, 1).unwrap();
    let data = correlation_run(&model, &corpus[0], 0.0, 1000);
    let r = pearson(&data.sums, &data.log_products).abs();
    assert!(r >= 0.99, "|corr(sum localised, log bias product)| = {r}, expected >= 0.99");
}

#[test]
fn localised_sum_approximates_the_global_distance() {
    let corpus = quarters_walk_corpus();
    let model = train(&corpus, 1).unwrap();
    let data = correlation_run(&model, &corpus[0], 0.0, 1000);
    let r = pearson(&data.sums, &data.distances);
    assert!(r >= 0.8, "corr(sum localised, distance) = {r}, expected >= 0.8");
}

#[test]
fn sampled_transitions_have_training_support() {
    let corpus = mixed_corpus();
    let model = train(&corpus, 1).unwrap();
    let run = variate_melody(
        &model,
        &corpus[0].chords,
        &corpus[0].melody,
        &WeightParams::default(),
        0.5,
        BiasRenorm::Global,
        3,
        50,
    )
    .unwrap();
    for s in &run.samples {
        for pair in s.elements.windows(2) {
            let a = model.notes.vocab_index(&pair[0]).unwrap();
            let b = model.notes.vocab_index(&pair[1]).unwrap();
            let ctx = model.notes.start_context(a).unwrap();
            assert!(
                model.notes.transitions()[ctx as usize].iter().any(|(v, p)| *v == b && *p > 0.0),
                "sampled an unseen transition"
            );
        }
    }
}

#[test]
fn local_renormalisation_mode_still_samples() {
    let corpus = mixed_corpus();
    let model = train(&corpus, 1).unwrap();
    let run = variate_melody(
        &model,
        &corpus[0].chords,
        &corpus[0].melody,
        &WeightParams::default(),
        0.0,
        BiasRenorm::Local,
        3,
        20,
    )
    .unwrap();
    assert_eq!(run.samples.len(), 20);
    for s in &run.samples {
        assert!(s.log_prob_biased <= 1e-12);
        assert!(s.log_prob_biased.is_finite());
    }
}
