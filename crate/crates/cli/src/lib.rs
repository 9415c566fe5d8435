//! Batch experiment runner: named recipes over the calibag library,
//! emitting plot-ready CSV tables and a JSON summary per run.

pub mod config;
pub mod recipes;

pub use config::{validate_config, FileConfig, Recipe, RunConfig};
pub use recipes::{list_recipes, run_recipe, ResultBundle};
