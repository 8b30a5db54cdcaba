//! Self-describing JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamState;
use crate::bie::ProblemSpec;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::operator_net::{Architecture, OperatorModel, Param};
use crate::train::Trainer;

pub const CHECKPOINT_FORMAT: &str = "bie-operator-checkpoint/1";

/// Position in the counter-based random streams. Every batch is a pure
/// function of `(seed, step)`, so this is all that is needed to resume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: RunConfig,
    pub step: u64,
    pub architecture: Architecture,
    /// Named row-major arrays; includes the Fourier matrix.
    pub params: Vec<Param>,
    pub adam: AdamState,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn capture(config: &RunConfig, trainer: &Trainer) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            config: config.clone(),
            step: trainer.step(),
            architecture: trainer.model.architecture().clone(),
            params: trainer.model.params().to_vec(),
            adam: trainer.adam.clone(),
            rng: RngState {
                seed: trainer.seed,
                next_step: trainer.step(),
            },
        }
    }

    /// A checkpoint of an untrained model at step 0.
    pub fn fresh(config: &RunConfig) -> Result<Self> {
        let trainer = new_trainer(config)?;
        Ok(Self::capture(config, &trainer))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format tag {:?}", ck.format)));
        }
        if ck.architecture != ck.config.architecture() {
            return Err(Error::Checkpoint("architecture does not match the stored config".into()));
        }
        if ck.adam.step != ck.step || ck.rng.next_step != ck.step {
            return Err(Error::Checkpoint("step counters disagree".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::error::read_text(path)?)
    }

    pub fn model(&self) -> Result<OperatorModel> {
        OperatorModel::from_params(self.architecture.clone(), self.params.clone())
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        self.config.problem_spec()
    }

    /// Rebuild the trainer exactly where it stopped.
    pub fn trainer(&self) -> Result<Trainer> {
        let mut trainer = Trainer::new(
            self.spec()?,
            self.model()?,
            self.config.batch_sizes(),
            self.config.schedule(),
            self.rng.seed,
        );
        if self.adam.first.len() != trainer.model.params().len() {
            return Err(Error::Checkpoint("Adam state does not match the parameters".into()));
        }
        trainer.adam = self.adam.clone();
        Ok(trainer)
    }
}

/// Fresh trainer for a config.
pub fn new_trainer(config: &RunConfig) -> Result<Trainer> {
    config.validate()?;
    let seed = config.train.seed;
    let model = OperatorModel::new(config.architecture(), seed)?;
    Ok(Trainer::new(
        config.problem_spec()?,
        model,
        config.batch_sizes(),
        config.schedule(),
        seed,
    ))
}
