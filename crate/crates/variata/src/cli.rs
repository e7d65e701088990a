//! The `variata` command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use variata_core::notation::{LeadSheet, Melody, TICKS_PER_QUARTER};
use variata_core::sequencegraph::{chord_trellis, melody_trellis, BiasRenorm};
use variata_core::similarity::{ms_distance, EditOp, WeightParams};
use variata_core::structure::ComposeOptions;
use variata_core::stylemodel::{train, StyleModel};
use variata_core::variation::{variate_chords, variate_melody};

use crate::corpus::{load_corpus, load_sheet, save_sheet};
use crate::error::CliError;
use crate::experiment::{self, ExperimentConfig};
use crate::gencorpus::{generate, write_corpus, CorpusSpec};
use crate::modelio::{load_model, save_model};
use crate::planio::load_plan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenormMode {
    Global,
    Local,
}

impl From<RenormMode> for BiasRenorm {
    fn from(mode: RenormMode) -> BiasRenorm {
        match mode {
            RenormMode::Global => BiasRenorm::Global,
            RenormMode::Local => BiasRenorm::Local,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "variata",
    about = "Corpus-trained lead sheet generation with similarity-biased variations"
)]
pub struct Cli {
    /// Base RNG seed for everything the command samples or generates.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Length-difference weight per tick in the melodic distance.
    #[arg(long, global = true)]
    pub k1: Option<f64>,
    /// Penalty added to fragmentation and consolidation.
    #[arg(long = "penalty-p", global = true)]
    pub penalty_p: Option<f64>,
    /// JSON file with 12 pitch weights per interval class.
    #[arg(long = "pitch-table", global = true)]
    pub pitch_table: Option<PathBuf>,
    /// Cap on fragmentation and consolidation group size.
    #[arg(long = "max-group", global = true)]
    pub max_group: Option<usize>,
    /// Markov order of trained models.
    #[arg(long, global = true, default_value_t = 1)]
    pub order: usize,
    /// How bias factors are renormalised.
    #[arg(long = "bias-renorm", global = true, value_enum, default_value_t = RenormMode::Global)]
    pub bias_renorm: RenormMode,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic corpus.
    GenCorpus {
        #[arg(long, default_value_t = 29)]
        songs: u32,
        #[arg(long, default_value_t = 12)]
        bars: u32,
        #[arg(long = "beats-per-bar", default_value_t = 4)]
        beats_per_bar: u32,
        /// Comma-separated MIDI pitch set.
        #[arg(long, default_value = "60,62,64,65,67,69")]
        pitches: String,
        /// Comma-separated duration set in ticks.
        #[arg(long, default_value = "12,24")]
        durations: String,
        /// Rest probability in percent.
        #[arg(long = "rest-percent", default_value_t = 5)]
        rest_percent: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a style model from a corpus directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample unbiased lead sheets from a model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 4)]
        bars: u32,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Sample melodic variations of a theme lead sheet.
    Variate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        theme: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Use only the first N bars of the theme.
        #[arg(long = "theme-bars")]
        theme_bars: Option<u32>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Sample chord-sequence variations of a theme lead sheet.
    VariateChords {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        theme: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long = "theme-bars")]
        theme_bars: Option<u32>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Execute a structure plan against a model.
    Compose {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
        /// Override the alpha of every variation directive.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the bias/similarity correlation experiment.
    Experiment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        theme: PathBuf,
        /// Comma-separated alpha values.
        #[arg(long, default_value = "0,0.5,0.95")]
        alphas: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long = "theme-bars")]
        theme_bars: Option<u32>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Print the melodic distance between two lead sheet files.
    Distance {
        a: PathBuf,
        b: PathBuf,
    },
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|part| part.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse {what} list {text:?}")))
}

fn weight_params(cli: &Cli) -> Result<WeightParams, CliError> {
    let mut params = WeightParams::default();
    if let Some(k1) = cli.k1 {
        params.k1 = k1;
    }
    if let Some(p) = cli.penalty_p {
        params.penalty_p = p;
    }
    if let Some(max_group) = cli.max_group {
        params.max_group = max_group;
    }
    if let Some(path) = &cli.pitch_table {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let table: Vec<f64> = serde_json::from_str(&text)
            .map_err(|source| CliError::Parse { path: path.clone(), source })?;
        params.pitch_table = table.try_into().map_err(|_| {
            CliError::Usage("the pitch table must hold exactly 12 weights".into())
        })?;
    }
    params.validate()?;
    Ok(params)
}

fn theme_sheet(path: &Path, bars: Option<u32>) -> Result<LeadSheet, CliError> {
    let sheet = load_sheet(path)?;
    match bars {
        Some(n) => Ok(sheet.slice_bars(1, n)?),
        None => Ok(sheet),
    }
}

/// Draw one unbiased lead sheet; reproducible from `(seed, index)`.
fn sample_sheet(model: &StyleModel, bars: u32, seed: u64, index: u64) -> Result<(LeadSheet, f64, f64), CliError> {
    let total = bars * model.beats_per_bar * TICKS_PER_QUARTER;
    let chord_t = chord_trellis(model, total, None, &[], &[], BiasRenorm::Global)?;
    let chord_fw = chord_t.forward()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index);
    let chord_path = chord_t.sample_one(&chord_fw, &mut rng);
    let chords = model
        .chords
        .emitted_elements(&chord_path.states.iter().map(|s| *s as u32).collect::<Vec<_>>());

    let (melody, melody_log_prob) = {
        let melody_t = melody_trellis(model, &chords, total, None, &[], &[], BiasRenorm::Global)?;
        let melody_fw = melody_t.forward()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * index + 1);
        let melody_path = melody_t.sample_one(&melody_fw, &mut rng);
        let notes = model
            .notes
            .emitted_elements(&melody_path.states.iter().map(|s| *s as u32).collect::<Vec<_>>());
        (notes, melody_path.log_prob)
    };

    let sheet = LeadSheet::new(
        format!("Sample {index:03}"),
        model.beats_per_bar,
        0,
        chords,
        Melody::from_notes(melody),
    )?;
    Ok((sheet, chord_path.log_prob, melody_log_prob))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let params = weight_params(cli)?;
    let renorm: BiasRenorm = cli.bias_renorm.into();
    match &cli.command {
        Command::GenCorpus { songs, bars, beats_per_bar, pitches, durations, rest_percent, out } => {
            let spec = CorpusSpec {
                songs: *songs,
                bars: *bars,
                beats_per_bar: *beats_per_bar,
                pitches: parse_list(pitches, "pitch")?,
                durations: parse_list(durations, "duration")?,
                rest_percent: *rest_percent,
                seed: cli.seed,
            };
            let sheets = generate(&spec)?;
            write_corpus(out, &sheets)?;
            println!("wrote {} songs to {}", sheets.len(), out.display());
        }
        Command::Train { corpus, out } => {
            let sheets = load_corpus(corpus)?;
            let model = train(&sheets, cli.order)?;
            save_model(out, &model)?;
            println!(
                "trained order-{} model: {} note states, {} chord states",
                cli.order,
                model.notes.vocab().len(),
                model.chords.vocab().len()
            );
        }
        Command::Sample { model, bars, count, out_dir } => {
            let model = load_model(model)?;
            fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
            let mut scores = String::from("index,chord_log_prob,melody_log_prob\n");
            for i in 0..*count {
                let (sheet, chord_lp, melody_lp) = sample_sheet(&model, *bars, cli.seed, i as u64)?;
                save_sheet(&out_dir.join(format!("sample_{i:03}.json")), &sheet)?;
                scores.push_str(&format!("{i},{chord_lp},{melody_lp}\n"));
            }
            fs::write(out_dir.join("scores.csv"), scores)
                .map_err(CliError::io(out_dir.join("scores.csv")))?;
            println!("wrote {count} samples to {}", out_dir.display());
        }
        Command::Variate { model, theme, alpha, count, theme_bars, out_dir } => {
            let model = load_model(model)?;
            let theme = theme_sheet(theme, *theme_bars)?;
            let run = variate_melody(
                &model,
                &theme.chords,
                &theme.melody,
                &params,
                *alpha,
                renorm,
                cli.seed,
                *count,
            )?;
            fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
            let mut scores =
                String::from("index,alpha,log_prob_biased,log_prob_unbiased,log_ratio,ms_distance\n");
            for (i, sample) in run.samples.iter().enumerate() {
                let sheet = LeadSheet::new(
                    format!("{} variation {i:03}", theme.title),
                    theme.beats_per_bar,
                    theme.pickup_ticks,
                    theme.chords.clone(),
                    sample.melody(),
                )?;
                save_sheet(&out_dir.join(format!("variation_{i:03}.json")), &sheet)?;
                let distance = ms_distance(&sample.melody(), &theme.melody, &params).distance;
                scores.push_str(&format!(
                    "{i},{alpha},{},{},{},{distance}\n",
                    sample.log_prob_biased,
                    sample.log_prob_unbiased,
                    sample.log_prob_biased - sample.log_prob_unbiased,
                ));
            }
            fs::write(out_dir.join("scores.csv"), scores)
                .map_err(CliError::io(out_dir.join("scores.csv")))?;
            println!("wrote {count} variations to {}", out_dir.display());
        }
        Command::VariateChords { model, theme, alpha, count, theme_bars, out_dir } => {
            let model = load_model(model)?;
            let theme = theme_sheet(theme, *theme_bars)?;
            let run = variate_chords(&model, &theme.chords, *alpha, renorm, cli.seed, *count)?;
            fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
            let mut scores = String::from(
                "index,alpha,log_prob_biased,log_prob_unbiased,log_ratio,chord_window_distance\n",
            );
            for (i, sample) in run.samples.iter().enumerate() {
                let sheet = LeadSheet::new(
                    format!("{} reharmonisation {i:03}", theme.title),
                    theme.beats_per_bar,
                    theme.pickup_ticks,
                    sample.elements.clone(),
                    theme.melody.clone(),
                )?;
                save_sheet(&out_dir.join(format!("chords_{i:03}.json")), &sheet)?;
                scores.push_str(&format!(
                    "{i},{alpha},{},{},{},{}\n",
                    sample.log_prob_biased,
                    sample.log_prob_unbiased,
                    sample.log_prob_biased - sample.log_prob_unbiased,
                    sample.sum_localized,
                ));
            }
            fs::write(out_dir.join("scores.csv"), scores)
                .map_err(CliError::io(out_dir.join("scores.csv")))?;
            println!("wrote {count} chord variations to {}", out_dir.display());
        }
        Command::Compose { plan, model, out, title, alpha } => {
            let plan = load_plan(plan)?;
            let model = load_model(model)?;
            let options = ComposeOptions {
                title: title.clone().unwrap_or_else(|| "composition".to_string()),
                alpha_override: *alpha,
                renorm,
            };
            let sheet = variata_core::structure::execute(&plan, &model, &params, cli.seed, &options)?;
            save_sheet(out, &sheet)?;
            println!("wrote {} bars to {}", sheet.bar_count(), out.display());
        }
        Command::Experiment { model, theme, alphas, count, theme_bars, out_dir } => {
            let model = load_model(model)?;
            let theme = theme_sheet(theme, *theme_bars)?;
            let config = ExperimentConfig {
                alphas: parse_list(alphas, "alpha")?,
                count: *count,
                seed: cli.seed,
                renorm,
            };
            let (records, summaries) = experiment::run(&model, &theme, &params, &config)?;
            experiment::write_outputs(out_dir, &records, &summaries)?;
            print!("{}", experiment::summary_csv(&summaries));
        }
        Command::Distance { a, b } => {
            let first = load_sheet(a)?;
            let second = load_sheet(b)?;
            let result = ms_distance(&first.melody, &second.melody, &params);
            println!("{}", result.distance);
            let mut counts = [0usize; 5];
            for op in &result.script {
                let slot = match op {
                    EditOp::Substitute { .. } => 0,
                    EditOp::Consolidate { .. } => 1,
                    EditOp::Fragment { .. } => 2,
                    EditOp::Delete { .. } => 3,
                    EditOp::Insert { .. } => 4,
                };
                counts[slot] += 1;
            }
            println!(
                "substitutions={} consolidations={} fragmentations={} deletions={} insertions={}",
                counts[0], counts[1], counts[2], counts[3], counts[4]
            );
        }
    }
    Ok(())
}
