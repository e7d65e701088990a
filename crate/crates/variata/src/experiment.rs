//! The bias/similarity correlation experiment: sample variations at several
//! alpha values, record probability ratios and distances, and summarise
//! correlations per alpha.

use std::fs;
use std::path::Path;

use variata_core::notation::LeadSheet;
use variata_core::sequencegraph::BiasRenorm;
use variata_core::similarity::{ms_distance, WeightParams};
use variata_core::stylemodel::StyleModel;
use variata_core::variation::variate_melody;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    /// Per-sample RNG stream index within the run.
    pub seed: u64,
    pub alpha: f64,
    pub ms_distance: f64,
    /// `log p_b - log p_o`.
    pub log_ratio: f64,
    /// Sum of the clamped localised increments along the sampled melody.
    pub sum_localized: f64,
    /// Sum of log blended biases along the sampled melody.
    pub log_bias_product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub corr_ratio_distance: f64,
    pub corr_bias_localized: f64,
    pub corr_localized_distance: f64,
    pub median_abs_log_ratio: f64,
    /// Distance at which the fitted ratio line crosses zero: sequences
    /// closer than this are boosted, sequences further away are hindered.
    pub crossover_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub alphas: Vec<f64>,
    pub count: usize,
    pub seed: u64,
    pub renorm: BiasRenorm,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
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

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Zero crossing of the least-squares line of `ys` on `xs`, when the slope
/// is negative.
fn zero_crossing(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
    }
    if vx == 0.0 {
        return None;
    }
    let slope = cov / vx;
    if slope >= 0.0 {
        return None;
    }
    let intercept = my - slope * mx;
    Some(-intercept / slope)
}

/// Run the experiment over every alpha.
pub fn run(
    model: &StyleModel,
    theme: &LeadSheet,
    params: &WeightParams,
    config: &ExperimentConfig,
) -> Result<(Vec<ExperimentRecord>, Vec<AlphaSummary>), CliError> {
    let mut records = Vec::with_capacity(config.alphas.len() * config.count);
    let mut summaries = Vec::with_capacity(config.alphas.len());
    for alpha in &config.alphas {
        let run = variate_melody(
            model,
            &theme.chords,
            &theme.melody,
            params,
            *alpha,
            config.renorm,
            config.seed,
            config.count,
        )?;
        let shift = run.log_z_biased - run.log_z_unbiased;
        let mut distances = Vec::with_capacity(config.count);
        let mut ratios = Vec::with_capacity(config.count);
        let mut sums = Vec::with_capacity(config.count);
        let mut products = Vec::with_capacity(config.count);
        for (i, sample) in run.samples.iter().enumerate() {
            let distance = ms_distance(&sample.melody(), &theme.melody, params).distance;
            let log_ratio = sample.log_prob_biased - sample.log_prob_unbiased;
            debug_assert!(
                config.renorm == BiasRenorm::Local
                    || (log_ratio - (sample.log_bias_product - shift)).abs() < 1e-9
            );
            records.push(ExperimentRecord {
                seed: i as u64,
                alpha: *alpha,
                ms_distance: distance,
                log_ratio,
                sum_localized: sample.sum_localized,
                log_bias_product: sample.log_bias_product,
            });
            distances.push(distance);
            ratios.push(log_ratio);
            sums.push(sample.sum_localized);
            products.push(sample.log_bias_product);
        }
        summaries.push(AlphaSummary {
            alpha: *alpha,
            corr_ratio_distance: pearson(&ratios, &distances),
            corr_bias_localized: pearson(&products, &sums),
            corr_localized_distance: pearson(&sums, &distances),
            median_abs_log_ratio: median(ratios.iter().map(|r| r.abs()).collect()),
            crossover_distance: zero_crossing(&distances, &ratios),
        });
    }
    Ok((records, summaries))
}

pub const RECORDS_HEADER: &str = "seed,alpha,ms_distance,log_ratio,sum_localized,log_bias_product";

pub fn records_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.alpha, r.ms_distance, r.log_ratio, r.sum_localized, r.log_bias_product
        ));
    }
    out
}

pub fn summary_csv(summaries: &[AlphaSummary]) -> String {
    let mut out = String::from(
        "alpha,corr_log_ratio_vs_distance,corr_bias_product_vs_sum_localized,corr_sum_localized_vs_distance,median_abs_log_ratio,crossover_distance\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.alpha,
            s.corr_ratio_distance,
            s.corr_bias_localized,
            s.corr_localized_distance,
            s.median_abs_log_ratio,
            s.crossover_distance.map_or(String::new(), |c| c.to_string()),
        ));
    }
    out
}

/// A gnuplot script rendering the ratio-versus-distance cloud per alpha.
pub fn gnuplot_script() -> &'static str {
    "set datafile separator ','\n\
     set key autotitle columnhead\n\
     set xlabel 'Mongeau-Sankoff distance to theme'\n\
     set ylabel 'log(p_b / p_o)'\n\
     set term pngcairo size 900,600\n\
     set output 'ratio_vs_distance.png'\n\
     plot for [a in system(\"awk -F, 'NR > 1 { print $2 }' records.csv | sort -u\")] \\\n\
       'records.csv' using 3:($2 == real(a) ? $4 : 1/0) title 'alpha = '.a\n"
}

pub fn write_outputs(
    dir: &Path,
    records: &[ExperimentRecord],
    summaries: &[AlphaSummary],
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    fs::write(dir.join("records.csv"), records_csv(records))
        .map_err(CliError::io(dir.join("records.csv")))?;
    fs::write(dir.join("summary.csv"), summary_csv(summaries))
        .map_err(CliError::io(dir.join("summary.csv")))?;
    fs::write(dir.join("ratio_vs_distance.gp"), gnuplot_script())
        .map_err(CliError::io(dir.join("ratio_vs_distance.gp")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_stable() {
        let records = vec![ExperimentRecord {
            seed: 3,
            alpha: 0.5,
            ms_distance: 12.25,
            log_ratio: -1.5,
            sum_localized: 4.0,
            log_bias_product: 2.5,
        }];
        assert_eq!(
            records_csv(&records),
            "seed,alpha,ms_distance,log_ratio,sum_localized,log_bias_product\n3,0.5,12.25,-1.5,4,2.5\n"
        );
    }

    #[test]
    fn median_and_crossing() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        // y = 2 - x crosses zero at 2.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [2.0, 1.0, 0.0, -1.0];
        assert!((zero_crossing(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(zero_crossing(&xs, &xs), None);
    }
}
