//! Training loop: fresh batch every step, Monte-Carlo loss, Adam.

use crate::autodiff::{adam_step, AdamState, LrSchedule, Matrix};
use crate::bie::{loss_and_gradient, make_batch, BatchKernels, BatchSizes, ProblemSpec};
use crate::error::Result;
use crate::operator_net::OperatorModel;

/// Loss recorded before the update of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

pub struct Trainer {
    pub spec: ProblemSpec,
    pub model: OperatorModel,
    pub adam: AdamState,
    pub schedule: LrSchedule,
    pub sizes: BatchSizes,
    pub seed: u64,
}

impl Trainer {
    pub fn new(spec: ProblemSpec, model: OperatorModel, sizes: BatchSizes, schedule: LrSchedule, seed: u64) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|p| p.value.data.len()).collect();
        Self {
            spec,
            model,
            adam: AdamState::new(&shapes),
            schedule,
            sizes,
            seed,
        }
    }

    /// Number of updates applied so far; also the index of the next batch.
    pub fn step(&self) -> u64 {
        self.adam.step
    }

    /// Loss and gradient at the batch for the current step, without updating.
    pub fn probe(&self) -> Result<(f64, Vec<Matrix>)> {
        let batch = make_batch(&self.spec, self.sizes, self.seed, self.step())?;
        let kernels = BatchKernels::assemble(&self.spec, &batch);
        loss_and_gradient(&self.model, &self.spec, &batch, &kernels)
    }

    /// One optimizer step.
    pub fn step_once(&mut self) -> Result<StepRecord> {
        let step = self.step();
        let lr = self.schedule.rate(step);
        let (loss, grads) = self.probe()?;
        let mut params: Vec<&mut Matrix> = self.model.params_mut().iter_mut().map(|p| &mut p.value).collect();
        adam_step(&mut params, &grads, &mut self.adam, &self.schedule);
        Ok(StepRecord { step, loss, lr })
    }

    /// Run until `total` updates have been applied, calling `on_step` after
    /// each one.
    pub fn run_to<F>(&mut self, total: u64, mut on_step: F) -> Result<()>
    where
        F: FnMut(&Trainer, StepRecord) -> Result<()>,
    {
        while self.step() < total {
            let rec = self.step_once()?;
            on_step(self, rec)?;
        }
        Ok(())
    }
}

/// Trace rows are kept at every `every`-th step and at the last step.
pub fn is_trace_step(step: u64, every: u64, total: u64) -> bool {
    step.is_multiple_of(every.max(1)) || step + 1 == total
}
