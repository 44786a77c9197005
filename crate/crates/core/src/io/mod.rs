//! Configuration, data files, mixture persistence, CSV writers and the
//! `fit`/`simulate`/`diagnose` pipelines.

pub mod config;
pub mod files;
pub mod mixture_file;
pub mod pipeline;
pub mod writers;

pub use config::{Config, IoConfig, PriorOverrides, SimulateConfig};
pub use files::{load_h_matrix, load_locations, load_observations, load_values};
pub use mixture_file::{read_mixture, write_mixture, SavedMixture};
pub use pipeline::{diagnose, fit, simulate, FitReport, SimulateReport};
