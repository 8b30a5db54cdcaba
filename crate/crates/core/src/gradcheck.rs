//! Reverse-mode gradients of the composed loss against central differences.

use std::f64::consts::TAU;

use crate::autodiff::{Fault, Tape};
use crate::bie::loss::loss_and_gradient_on;
use crate::bie::{make_batch, model_loss, BatchKernels, BatchSizes, ProblemKind, ProblemSpec};
use crate::error::Result;
use crate::operator_net::{Architecture, DecoderMode, Fusion, OperatorModel};

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;
/// Entries whose gradient is tiny compared with the largest one are
/// compared on the scale `FLOOR · max|g|` instead of their own magnitude.
pub const FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckCase {
    pub problem: ProblemKind,
    pub fusion: Fusion,
    pub parameters: usize,
    pub max_rel_error: f64,
    /// Parameter array and flat index of the worst entry.
    pub worst: (String, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub cases: Vec<GradcheckCase>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

/// Width-10 model for a problem kind.
pub fn small_architecture(kind: ProblemKind, fusion: Fusion) -> Architecture {
    Architecture {
        space_dim: kind.space_dim(),
        encoder_depth: 2,
        encoder_width: 10,
        latent: 10,
        fourier_features: 6,
        fourier_scale: 1.0,
        train_fourier: true,
        decoder_depth: 1,
        decoder_width: 10,
        decoder_mode: DecoderMode::Fourier,
        fusion,
        outputs: kind.outputs(),
    }
}

fn small_spec(kind: ProblemKind) -> ProblemSpec {
    match kind {
        ProblemKind::Laplace2d => ProblemSpec::laplace(),
        ProblemKind::Biharmonic2d => ProblemSpec::biharmonic(),
        ProblemKind::Helmholtz3d => ProblemSpec::helmholtz(TAU).expect("positive wavenumber"),
    }
}

/// Compare every gradient entry of the full loss on a small batch (two
/// geometries, six quadrature points, four observation points each).
pub fn check_case(kind: ProblemKind, fusion: Fusion, seed: u64, fault: Fault) -> Result<GradcheckCase> {
    let spec = small_spec(kind);
    let model = OperatorModel::new(small_architecture(kind, fusion), seed)?;
    let sizes = BatchSizes { n_t: 2, n_y: 4, m: 6 };
    let batch = make_batch(&spec, sizes, seed, 0)?;
    let kernels = BatchKernels::assemble(&spec, &batch);
    let (_, grads) = loss_and_gradient_on(Tape::with_fault(fault), &model, &spec, &batch, &kernels)?;
    let scale = grads
        .iter()
        .flat_map(|g| g.data.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = (0.0, (String::new(), 0));
    let mut probe = model.clone();
    for (pi, g) in grads.iter().enumerate() {
        let name = model.params()[pi].name.clone();
        let frozen = name == "decoder.fourier" && !model.architecture().train_fourier;
        for j in 0..g.data.len() {
            let w = model.params()[pi].value.data[j];
            probe.params_mut()[pi].value.data[j] = w + FD_STEP;
            let up = model_loss(&probe, &spec, &batch, &kernels)?;
            probe.params_mut()[pi].value.data[j] = w - FD_STEP;
            let down = model_loss(&probe, &spec, &batch, &kernels)?;
            probe.params_mut()[pi].value.data[j] = w;
            let fd = if frozen { 0.0 } else { (up - down) / (2.0 * FD_STEP) };
            let a = g.data[j];
            let denom = a.abs().max(fd.abs()).max(FLOOR * scale);
            let rel = if denom == 0.0 { 0.0 } else { (a - fd).abs() / denom };
            if rel > worst.0 {
                worst = (rel, (name.clone(), j));
            }
        }
    }
    Ok(GradcheckCase {
        problem: kind,
        fusion,
        parameters: model.parameter_count(),
        max_rel_error: worst.0,
        worst: worst.1,
    })
}

/// Laplace, bi-harmonic and Helmholtz losses under both fusion modes.
pub fn run_gradcheck(seed: u64, fault: Fault) -> Result<GradcheckReport> {
    let mut cases = Vec::new();
    for kind in [ProblemKind::Laplace2d, ProblemKind::Biharmonic2d, ProblemKind::Helmholtz3d] {
        for fusion in [Fusion::Concat, Fusion::InnerProduct] {
            cases.push(check_case(kind, fusion, seed, fault)?);
        }
    }
    Ok(GradcheckReport {
        cases,
        tolerance: TOLERANCE,
    })
}
