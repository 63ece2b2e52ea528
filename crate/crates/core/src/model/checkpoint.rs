use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttBlstmModel, ModelError};
use crate::vocab::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "attblstm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format {0:?})")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint model is inconsistent: {0}")]
    Model(#[from] ModelError),
    #[error("vocabulary has {vocab} entries but the embedding has {embedding} columns")]
    VocabSize { vocab: usize, embedding: usize },
}

/// JSON container for a trained model and its vocabulary.
/// Floats are written with shortest round-trip formatting, so a reload is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocabulary: Vocabulary,
    pub model: AttBlstmModel,
}

impl Checkpoint {
    pub fn new(model: AttBlstmModel, vocabulary: Vocabulary) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            vocabulary,
            model,
        }
    }

    pub fn validate(&self) -> Result<(), CheckpointError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(self.format.clone()));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        self.model.validate()?;
        if self.vocabulary.len() != self.model.vocab_size() {
            return Err(CheckpointError::VocabSize {
                vocab: self.vocabulary.len(),
                embedding: self.model.vocab_size(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
