//! `nlps train`: fit the normal network on a built dataset.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use nlps_core::io::{read_dataset, save_model};
use nlps_core::net::{train, EpochStats};
use nlps_core::pipeline::{merge_datasets, PressSamples};

use crate::config::{resolve_path, RunConfig, TrainBlock};
use crate::error::{input_error, runtime_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file produced by build-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory for model.bin, model.json, loss_history.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

pub fn resolve(block: &TrainBlock, args: &TrainArgs) -> CliResult<TrainBlock> {
    let mut b = block.clone();
    if let Some(v) = args.epochs {
        b.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        b.train.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        b.train.learning_rate = v;
    }
    if let Some(v) = args.seed {
        b.train.rng_seed = v;
    }
    if let Some(v) = args.val_fraction {
        b.val_fraction = v;
    }
    if !(b.val_fraction > 0.0 && b.val_fraction < 1.0) {
        return Err(CliError::config(format!(
            "val_fraction must be in (0, 1), got {}",
            b.val_fraction
        )));
    }
    b.train.validate().map_err(input_error)?;
    Ok(b)
}

#[derive(Serialize)]
struct ModelMeta<'a> {
    dims: &'a [usize],
    seed: u64,
    epochs: usize,
    batch_size: usize,
    val_fraction: f64,
    train_presses: usize,
    val_presses: usize,
    train_samples: usize,
    val_samples: usize,
    final_train_loss: Option<f64>,
    best_val_loss: Option<f64>,
}

pub fn run(
    run_config: &RunConfig,
    block: &TrainBlock,
    workdir: &Path,
    args: &TrainArgs,
) -> CliResult<()> {
    let dataset_path = resolve_path(workdir, &args.dataset);
    let out = resolve_path(workdir, &args.out);
    let dataset = read_dataset(&dataset_path).map_err(input_error)?;

    let presses: Vec<PressSamples> = dataset
        .groups
        .iter()
        .map(|g| PressSamples {
            capture_id: g.capture_id.clone(),
            press_id: g.press_id,
            samples: dataset.samples[g.offset..g.offset + g.len].to_vec(),
        })
        .collect();
    let (train_ds, val_ds) = merge_datasets(
        presses,
        (1.0 - block.val_fraction, block.val_fraction),
        dataset.split_seed,
    )
    .map_err(input_error)?;

    let outcome = train(&train_ds, &val_ds, &block.train).map_err(runtime_error)?;

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    save_model(&out.join("model.bin"), &outcome.model).map_err(runtime_error)?;

    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for EpochStats {
        epoch,
        train_loss,
        val_loss,
    } in &outcome.history
    {
        match val_loss {
            Some(v) => csv.push_str(&format!("{epoch},{train_loss},{v}\n")),
            None => csv.push_str(&format!("{epoch},{train_loss},\n")),
        }
    }
    std::fs::File::create(out.join("loss_history.csv"))
        .and_then(|mut f| f.write_all(csv.as_bytes()))
        .map_err(|e| CliError::runtime(format!("cannot write loss_history.csv: {e}")))?;

    let best_val = outcome
        .history
        .iter()
        .filter_map(|e| e.val_loss)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        });
    let meta = ModelMeta {
        dims: outcome.model.dims(),
        seed: block.train.rng_seed,
        epochs: block.train.epochs,
        batch_size: block.train.batch_size,
        val_fraction: block.val_fraction,
        train_presses: train_ds.groups.len(),
        val_presses: val_ds.groups.len(),
        train_samples: train_ds.len(),
        val_samples: val_ds.len(),
        final_train_loss: outcome.history.last().map(|e| e.train_loss),
        best_val_loss: best_val,
    };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::runtime(format!("cannot serialize model.json: {e}")))?;
    std::fs::write(out.join("model.json"), text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write model.json: {e}")))?;

    let mut echo = run_config.clone();
    echo.train = block.clone();
    echo.write_echo(&out)?;
    println!(
        "trained {} epochs on {} samples ({} presses); best validation loss {:?}",
        block.train.epochs,
        train_ds.len(),
        train_ds.groups.len(),
        best_val
    );
    Ok(())
}
