//! Run configuration.
//!
//! A TOML document with five sections. Every key is optional except
//! `problem.kind`; unknown keys are rejected with their line number.
//!
//! ```toml
//! [problem]
//! kind = "laplace2d"        # laplace2d | biharmonic2d | helmholtz3d
//! family = "laplace-star"   # laplace-star | biharmonic-star | unit-circle (2D only)
//! t_min = 1.0               # defaults to the family's admissible range
//! t_max = 2.0
//! wavenumber = 6.283185307179586   # helmholtz3d only, default 2π
//! beta = 1e5                # kernel truncation threshold
//! delta = 0.01              # field grids skip points this close to the boundary
//!
//! [batch]
//! n_t = 10                  # geometries per step (helmholtz3d: 2)
//! n_y = 100                 # observation points per geometry (helmholtz3d: 1880)
//! m = 3000                  # integration points per geometry (helmholtz3d: 56000)
//! m_eval = 20000            # quadrature points for field evaluation (helmholtz3d: 56000)
//!
//! [model]
//! encoder_depth = 3         # hidden layers of the t-encoder
//! encoder_width = 100
//! latent = 100              # p
//! fourier_features = 64     # frequencies of the decoder's Fourier features
//! fourier_scale = 1.0       # std of the initial frequencies
//! train_fourier = true
//! decoder_depth = 1         # hidden layers of the decoder head
//! decoder_width = 100
//! decoder_mode = "fourier"  # fourier | plain
//! fusion = "concat"         # concat | inner-product
//!
//! [train]
//! steps = 200000
//! lr = 1e-3
//! decay_period = 20000
//! decay_rate = 0.95
//! seed = 0
//! deterministic = true
//! trace_every = 100
//! checkpoint_every = 10000
//!
//! [output]
//! dir = "runs/laplace"
//! ```

use std::f64::consts::TAU;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autodiff::LrSchedule;
use crate::bie::{BatchSizes, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::CurveFamily;
use crate::kernels::TruncationRule;
use crate::operator_net::{Architecture, DecoderMode, Fusion};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<CurveFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eval: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub encoder_depth: usize,
    pub encoder_width: usize,
    pub latent: usize,
    pub fourier_features: usize,
    pub fourier_scale: f64,
    pub train_fourier: bool,
    pub decoder_depth: usize,
    pub decoder_width: usize,
    pub decoder_mode: DecoderMode,
    pub fusion: Fusion,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            encoder_depth: 3,
            encoder_width: 100,
            latent: 100,
            fourier_features: 64,
            fourier_scale: 1.0,
            train_fourier: true,
            decoder_depth: 1,
            decoder_width: 100,
            decoder_mode: DecoderMode::Fourier,
            fusion: Fusion::Concat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: u64,
    pub lr: f64,
    pub decay_period: u64,
    pub decay_rate: f64,
    pub seed: u64,
    pub deterministic: bool,
    pub trace_every: u64,
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 200_000,
            lr: 1e-3,
            decay_period: 20_000,
            decay_rate: 0.95,
            seed: 0,
            deterministic: true,
            trace_every: 100,
            checkpoint_every: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

fn default_beta() -> f64 {
    crate::kernels::DEFAULT_BETA
}

fn default_delta() -> f64 {
    crate::bie::DEFAULT_DELTA
}

/// 1-based line of a byte offset.
pub(crate) fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = ...` assignment, or 0 when the key is absent
/// (a default value).
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl RunConfig {
    /// Defaults for a problem kind.
    pub fn defaults(kind: ProblemKind) -> Self {
        Self {
            problem: ProblemSection {
                kind,
                family: None,
                t_min: None,
                t_max: None,
                wavenumber: None,
                beta: default_beta(),
                delta: default_delta(),
            },
            batch: BatchSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Parse and validate; errors carry the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_at(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate_with(|key| line_of_key(text, key))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&crate::error::read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line: impl Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, message: String| Error::Config {
            line: line(key),
            message,
        };
        let sizes = self.batch_sizes();
        let counts = [
            ("n_t", sizes.n_t as u64),
            ("n_y", sizes.n_y as u64),
            ("m", sizes.m as u64),
            ("m_eval", self.m_eval() as u64),
            ("encoder_width", self.model.encoder_width as u64),
            ("latent", self.model.latent as u64),
            ("decoder_width", self.model.decoder_width as u64),
            ("steps", self.train.steps),
            ("decay_period", self.train.decay_period),
            ("trace_every", self.train.trace_every),
            ("checkpoint_every", self.train.checkpoint_every),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(fail(key, format!("{key} must be positive")));
            }
        }
        if self.model.decoder_mode == DecoderMode::Fourier && self.model.fourier_features == 0 {
            return Err(fail("fourier_features", "fourier_features must be positive".into()));
        }
        if self.problem.kind == ProblemKind::Helmholtz3d {
            for (key, v) in [("m", sizes.m), ("n_y", sizes.n_y), ("m_eval", self.m_eval())] {
                if v % 2 != 0 {
                    return Err(fail(key, format!("{key} must be even for the hemisphere pair")));
                }
            }
            if self.problem.family.is_some() {
                return Err(fail("family", "family applies to 2D problems only".into()));
            }
        } else if self.problem.wavenumber.is_some() {
            return Err(fail("wavenumber", "wavenumber applies to helmholtz3d only".into()));
        }
        if !(self.train.lr > 0.0) || !(self.train.decay_rate > 0.0) {
            return Err(fail("lr", "learning-rate schedule must be positive".into()));
        }
        if TruncationRule::new(self.problem.beta).is_none() {
            return Err(fail("beta", format!("beta must be positive, got {}", self.problem.beta)));
        }
        if !(self.problem.delta >= 0.0) {
            return Err(fail("delta", "delta must be non-negative".into()));
        }
        let key = if self.problem.t_max.is_some() { "t_max" } else { "t_min" };
        self.problem_spec().map_err(|e| fail(key, e.to_string()))?;
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let mut spec = match p.kind {
            ProblemKind::Laplace2d => ProblemSpec::laplace_on(p.family.unwrap_or(CurveFamily::LaplaceStar))?,
            ProblemKind::Biharmonic2d => {
                let family = p.family.unwrap_or(CurveFamily::BiharmonicStar);
                if family != CurveFamily::BiharmonicStar {
                    return Err(Error::Argument(format!(
                        "bi-harmonic data is set up on the biharmonic-star family, not {}",
                        family.name()
                    )));
                }
                ProblemSpec::biharmonic()
            }
            ProblemKind::Helmholtz3d => ProblemSpec::helmholtz(p.wavenumber.unwrap_or(TAU))?,
        };
        let (lo, hi) = spec.t_range;
        spec = spec.with_t_range(p.t_min.unwrap_or(lo), p.t_max.unwrap_or(hi))?;
        let rule = TruncationRule::new(p.beta)
            .ok_or_else(|| Error::Argument(format!("beta must be positive, got {}", p.beta)))?;
        Ok(spec.with_truncation(rule))
    }

    pub fn batch_sizes(&self) -> BatchSizes {
        let (n_t, n_y, m) = match self.problem.kind {
            ProblemKind::Helmholtz3d => (2, 1880, 56_000),
            _ => (10, 100, 3000),
        };
        BatchSizes {
            n_t: self.batch.n_t.unwrap_or(n_t),
            n_y: self.batch.n_y.unwrap_or(n_y),
            m: self.batch.m.unwrap_or(m),
        }
    }

    pub fn m_eval(&self) -> usize {
        self.batch.m_eval.unwrap_or(match self.problem.kind {
            ProblemKind::Helmholtz3d => 56_000,
            _ => 20_000,
        })
    }

    pub fn architecture(&self) -> Architecture {
        let m = &self.model;
        Architecture {
            space_dim: self.problem.kind.space_dim(),
            encoder_depth: m.encoder_depth,
            encoder_width: m.encoder_width,
            latent: m.latent,
            fourier_features: m.fourier_features,
            fourier_scale: m.fourier_scale,
            train_fourier: m.train_fourier,
            decoder_depth: m.decoder_depth,
            decoder_width: m.decoder_width,
            decoder_mode: m.decoder_mode,
            fusion: m.fusion,
            outputs: self.problem.kind.outputs(),
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.train.lr,
            decay_rate: self.train.decay_rate,
            decay_period: self.train.decay_period,
        }
    }

    /// Stable 64-bit FNV-1a hash of the canonical TOML form, with the output
    /// directory left out so it names the run rather than where it was written.
    pub fn hash(&self) -> String {
        let mut run = self.clone();
        run.output = OutputSection::default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in run.to_toml().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_table_defaults() {
        let cfg = RunConfig::parse("[problem]\nkind = \"laplace2d\"\n").unwrap();
        assert_eq!(cfg.problem.beta, 1e5);
        assert_eq!(cfg.model.latent, 100);
        assert_eq!(cfg.train.steps, 200_000);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.train.decay_period, 20_000);
        assert_eq!(cfg.train.decay_rate, 0.95);
        assert_eq!(cfg.batch_sizes(), BatchSizes { n_t: 10, n_y: 100, m: 3000 });
        assert_eq!(cfg.problem_spec().unwrap().t_range, (1.0, 2.0));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "[problem]\nkind = \"laplace2d\"\n\n[train]\nstepz = 5\n";
        match RunConfig::parse(text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 5, "{message}");
                assert!(message.contains("stepz"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_value_reports_its_line() {
        let text = "[problem]\nkind = \"laplace2d\"\n[batch]\nn_t = 4\nm = 0\n";
        assert!(matches!(RunConfig::parse(text), Err(Error::Config { line: 5, .. })));
        let text = "[problem]\nkind = \"laplace2d\"\nt_min = 1.5\nt_max = 1.2\n";
        assert!(matches!(RunConfig::parse(text), Err(Error::Config { line: 4, .. })));
        let text = "[problem]\nkind = \"helmholtz3d\"\n[batch]\nm = 7\n";
        assert!(matches!(RunConfig::parse(text), Err(Error::Config { line: 4, .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::defaults(ProblemKind::Laplace2d);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output.dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.train.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn helmholtz_defaults() {
        let cfg = RunConfig::defaults(ProblemKind::Helmholtz3d);
        assert_eq!(cfg.batch_sizes(), BatchSizes { n_t: 2, n_y: 1880, m: 56_000 });
        let spec = cfg.problem_spec().unwrap();
        assert_eq!(spec.wavenumber, TAU);
        assert_eq!(spec.t_range, (0.0, 0.5));
    }
}
