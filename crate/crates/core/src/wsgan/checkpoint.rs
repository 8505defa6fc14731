use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ModelBundle;
use super::train::TrainingHistory;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    bundle: ModelBundle,
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    bundle: &'a ModelBundle,
}

/// Writes parameters, optimizer moments, config and RNG position as JSON.
pub fn save_checkpoint(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(
        &mut w,
        &CheckpointRef {
            version: CHECKPOINT_VERSION,
            bundle,
        },
    )?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelBundle> {
    #[derive(Deserialize)]
    struct Header {
        version: u32,
    }
    let text = std::fs::read_to_string(path)?;
    let header: Header = serde_json::from_str(&text)?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(header.version));
    }
    let ck: Checkpoint = serde_json::from_str(&text)?;
    Ok(ck.bundle)
}

/// `epoch,d_loss,g_loss,info_loss,align_loss,penalty,ari,pl_accuracy`
pub fn write_history_csv<W: std::io::Write>(history: &TrainingHistory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &history.records {
        w.serialize(r)?;
    }
    if history.is_empty() {
        w.write_record([
            "epoch",
            "d_loss",
            "g_loss",
            "info_loss",
            "align_loss",
            "penalty",
            "ari",
            "pl_accuracy",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_history_csv(history: &TrainingHistory, path: &Path) -> Result<()> {
    write_history_csv(history, File::create(path)?)
}
