//! `vitis validate`: index a dataset directory, check its internal
//! consistency (annotation files, dimension sidecar, split lists), and
//! print a per-variety table of image counts.

use std::path::PathBuf;

use clap::Args;
use vitis_core::dataset::load_dataset_index;

use crate::config::Settings;
use crate::CliError;

const KEYS: &[&str] = &["dataset"];

#[derive(Args)]
pub struct ValidateArgs {
    /// Dataset root: per-image box files, optional mask files, dims.txt,
    /// and optional train.txt / test.txt split lists.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// key=value settings file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    let settings = Settings::load(args.config.as_deref(), KEYS)?;
    let root: PathBuf = settings.require(args.dataset.clone(), "dataset")?;
    let index = load_dataset_index(&root).map_err(|e| CliError::validation(e.to_string()))?;

    let histogram = index.variety_histogram();
    let name_width =
        histogram.keys().map(|v| v.len()).chain(["variety".len(), "total".len()]).max().unwrap();
    println!("{:<name_width$}  {:>6}  {:>6}  {:>6}  {:>6}", "variety", "images", "masks", "train", "test");
    let mut total = vitis_core::dataset::VarietyCount::default();
    for (variety, count) in &histogram {
        println!(
            "{variety:<name_width$}  {:>6}  {:>6}  {:>6}  {:>6}",
            count.images, count.with_masks, count.train, count.test
        );
        total.images += count.images;
        total.with_masks += count.with_masks;
        total.train += count.train;
        total.test += count.test;
    }
    println!(
        "{:<name_width$}  {:>6}  {:>6}  {:>6}  {:>6}",
        "total", total.images, total.with_masks, total.train, total.test
    );
    Ok(())
}
