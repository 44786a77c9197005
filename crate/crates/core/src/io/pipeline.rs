use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::Config;
use super::files::{load_h_matrix, load_locations, load_observations, load_values};
use super::mixture_file::{read_mixture, write_mixture, SavedMixture};
use super::writers::{format_diagnostics, format_summary, format_table, write_grid, write_text};
use crate::engine::{self, RunOutput};
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::priors::ParameterLayout;
use crate::simulate::{posterior_predictive, summarize_ensemble, Ensemble};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const WORKING_SAMPLES_FILE: &str = "posterior_working.csv";
pub const NATURAL_SAMPLES_FILE: &str = "posterior_natural.csv";
pub const SUMMARY_FILE: &str = "posterior_summary.csv";
pub const MEDIAN_FILE: &str = "median.csv";
pub const SD_FILE: &str = "sd.csv";
pub const THETA_DRAWS_FILE: &str = "theta_draws.csv";
pub const ENSEMBLE_DIR: &str = "ensemble";

/// Stream of the generator for posterior sample output, apart from the
/// per-iteration and per-draw streams.
const SAMPLE_STREAM: u64 = 1 << 40;

pub fn load_dataset(config: &Config) -> Result<Dataset> {
    let obs = config
        .io
        .observations
        .as_deref()
        .ok_or_else(|| Error::Config("io.observations is not set".into()))?;
    let d = config.spec.dim;
    match (&config.io.h_matrix, &config.io.linear_values) {
        (Some(h), Some(z)) => {
            let locations = load_locations(obs, d)?;
            let h = load_h_matrix(h, locations.len())?;
            let values = load_values(z)?;
            Dataset::linear(locations, h, values)
        }
        _ => load_observations(obs, d),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug)]
pub struct FitReport {
    pub output: RunOutput,
    pub names: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Fits the posterior approximation and writes the mixture, diagnostics,
/// posterior samples on both scales and their summary table.
pub fn fit(config: &Config) -> Result<FitReport> {
    let data = load_dataset(config)?;
    let prior = config.prior.resolve(data.locations())?;
    let layout = ParameterLayout::new(&config.spec)?;
    let output = engine::run(&config.run, &config.spec, &data, &prior)?;

    let names: Vec<String> = layout.names().into_iter().map(String::from).collect();
    let dir = &config.io.output_dir;
    create_dir(dir)?;
    if let Some(parent) = config.io.mixture.parent() {
        create_dir(parent)?;
    }
    let mut files = Vec::new();
    write_mixture(&config.io.mixture, &names, &output.mixture, &output.diagnostics)?;
    files.push(config.io.mixture.clone());

    let mut out = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        write_text(&path, &text)?;
        files.push(path);
        Ok(())
    };
    out(DIAGNOSTICS_FILE, format_diagnostics(&output.diagnostics))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    rng.set_stream(SAMPLE_STREAM);
    let draws = output.mixture.sample(config.posterior_draws, &mut rng);
    let working: Vec<Vec<f64>> = draws.rows().map(<[f64]>::to_vec).collect();
    let natural: Vec<Vec<f64>> = working.iter().map(|w| layout.natural_components(w)).collect();
    out(WORKING_SAMPLES_FILE, format_table(&names, &working))?;
    out(NATURAL_SAMPLES_FILE, format_table(&names, &natural))?;
    out(SUMMARY_FILE, format_summary(&names, &natural))?;
    Ok(FitReport { output, names, files })
}

/// Reads a saved mixture and checks it matches the configured model.
pub fn load_fitted(config: &Config) -> Result<(SavedMixture, ParameterLayout)> {
    let saved = read_mixture(&config.io.mixture)?;
    let layout = ParameterLayout::new(&config.spec)?;
    let expected = layout.names();
    if saved.names != expected {
        return Err(Error::Config(format!(
            "{} holds parameters [{}] but the model has [{}]",
            config.io.mixture.display(),
            saved.names.join(", "),
            expected.join(", ")
        )));
    }
    Ok((saved, layout))
}

#[derive(Debug)]
pub struct SimulateReport {
    pub ensemble: Ensemble,
    pub median: Vec<f64>,
    pub sd: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Posterior-predictive ensemble on the configured grid plus its median and
/// standard deviation maps.
pub fn simulate(config: &Config) -> Result<SimulateReport> {
    let sim = &config.simulate;
    let grid = sim
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("simulate.origin, simulate.cell_size and simulate.counts are not set".into()))?;
    if sim.s < 2 {
        return Err(Error::Config(format!(
            "simulate.s = {}: a standard deviation map needs at least 2 realizations",
            sim.s
        )));
    }
    let (saved, layout) = load_fitted(config)?;
    let data = load_dataset(config)?;
    let ensemble = posterior_predictive(
        &saved.mixture,
        &layout,
        &config.spec.trend,
        &data,
        grid,
        sim.s,
        sim.options,
        sim.back_transform,
        sim.seed,
    )?;
    let (median, sd) = summarize_ensemble(&ensemble)?;

    let dir = &config.io.output_dir;
    create_dir(dir)?;
    let mut files = vec![dir.join(MEDIAN_FILE), dir.join(SD_FILE), dir.join(THETA_DRAWS_FILE)];
    write_grid(&files[0], grid, &median)?;
    write_grid(&files[1], grid, &sd)?;
    let names: Vec<String> = layout.names().into_iter().map(String::from).collect();
    let natural: Vec<Vec<f64>> = ensemble
        .theta_draws
        .iter()
        .map(|w| layout.natural_components(w))
        .collect();
    write_text(&files[2], &format_table(&names, &natural))?;
    if sim.write_ensemble {
        let edir = dir.join(ENSEMBLE_DIR);
        create_dir(&edir)?;
        let width = ensemble.len().to_string().len().max(4);
        for (i, r) in ensemble.realizations.iter().enumerate() {
            let path = edir.join(format!("realization_{:0width$}.csv", i + 1));
            write_grid(&path, grid, r)?;
            files.push(path);
        }
    }
    Ok(SimulateReport {
        ensemble,
        median,
        sd,
        files,
    })
}

/// Table of the stored iteration history.
pub fn diagnose(path: &Path) -> Result<String> {
    let saved = read_mixture(path)?;
    let mut s = format!(
        "{}: {} components in {} dimensions ({})\n",
        path.display(),
        saved.mixture.len(),
        saved.mixture.dim(),
        saved.names.join(", ")
    );
    let _ = writeln!(
        s,
        "{:>4} {:>7} {:>8} {:>8} {:>8} {:>11}",
        "k", "n", "gamma", "d_l1", "r*", "h*"
    );
    for d in &saved.diagnostics {
        let _ = writeln!(
            s,
            "{:>4} {:>7} {:>8.4} {:>8.4} {:>8} {:>11.4e}{}",
            d.k,
            d.n,
            d.gamma,
            d.d_l1,
            d.r_star,
            d.h_star,
            if d.tuning_fallback {
                "  (rule-of-thumb bandwidth)"
            } else {
                ""
            }
        );
    }
    Ok(s)
}
