//! Encoder/decoder operator network for the boundary potential `v(x; t)`.
//!
//! The encoder maps the geometry parameter `t` to a latent code `β ∈ R^p`.
//! The decoder is a nonlinear function `f(β, x)` of that code and a boundary
//! point: the point is lifted through random Fourier features
//! `[cos(xF), sin(xF)]`, joined with `β`, and passed through a fully
//! connected GeLU head with a linear output.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{xavier_init, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::BoundarySample;
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderMode {
    /// Random Fourier features of the boundary point.
    Fourier,
    /// Raw coordinates.
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    /// `β` is concatenated with the point features before the head.
    Concat,
    /// The head emits `p` values per output channel which are contracted
    /// with `β`.
    InnerProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Spatial dimension of boundary points (2 or 3).
    pub space_dim: usize,
    pub encoder_depth: usize,
    pub encoder_width: usize,
    /// Latent width `p`.
    pub latent: usize,
    /// Number of Fourier frequencies.
    pub fourier_features: usize,
    /// Standard deviation of the initial frequencies.
    pub fourier_scale: f64,
    pub train_fourier: bool,
    pub decoder_depth: usize,
    pub decoder_width: usize,
    pub decoder_mode: DecoderMode,
    pub fusion: Fusion,
    /// 1 for Laplace, 2 for the bi-harmonic pair or a complex density.
    pub outputs: usize,
}

impl Architecture {
    fn feature_dim(&self) -> usize {
        match self.decoder_mode {
            DecoderMode::Fourier => 2 * self.fourier_features,
            DecoderMode::Plain => self.space_dim,
        }
    }

    fn head_out(&self) -> usize {
        match self.fusion {
            Fusion::Concat => self.outputs,
            Fusion::InnerProduct => self.latent * self.outputs,
        }
    }

    /// Closed-form parameter count.
    ///
    /// Encoder: `1 → w → … → w → p` with `L_e` hidden layers.
    /// Decoder: an optional `d × p_f` frequency matrix, then a head whose
    /// first layer reads `f + p` inputs (concat) or `f` inputs (inner
    /// product), `L_d` hidden layers of width `w_d`, and `n` (concat) or
    /// `p·n` (inner product) outputs; inner-product fusion adds an `n`-wide
    /// output bias.
    pub fn parameter_count(&self) -> usize {
        fn mlp(input: usize, depth: usize, width: usize, out: usize) -> usize {
            if depth == 0 {
                input * out + out
            } else {
                input * width + width + (depth - 1) * (width * width + width) + width * out + out
            }
        }
        let enc = mlp(1, self.encoder_depth, self.encoder_width, self.latent);
        let fourier = match self.decoder_mode {
            DecoderMode::Fourier => self.space_dim * self.fourier_features,
            DecoderMode::Plain => 0,
        };
        let head = match self.fusion {
            Fusion::Concat => mlp(
                self.feature_dim() + self.latent,
                self.decoder_depth,
                self.decoder_width,
                self.head_out(),
            ),
            Fusion::InnerProduct => {
                mlp(self.feature_dim(), self.decoder_depth, self.decoder_width, self.head_out())
                    + self.outputs
            }
        };
        enc + fourier + head
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("space_dim", self.space_dim),
            ("latent", self.latent),
            ("outputs", self.outputs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Argument(format!("{name} must be positive")));
            }
        }
        if self.encoder_depth > 0 && self.encoder_width == 0 {
            return Err(Error::Argument("encoder_width must be positive".into()));
        }
        if self.decoder_depth > 0 && self.decoder_width == 0 {
            return Err(Error::Argument("decoder_width must be positive".into()));
        }
        if self.decoder_mode == DecoderMode::Fourier && self.fourier_features == 0 {
            return Err(Error::Argument("fourier_features must be positive".into()));
        }
        Ok(())
    }
}

/// A named parameter array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorModel {
    arch: Architecture,
    params: Vec<Param>,
}

/// Parameter indices for one fully connected layer. The first decoder
/// layer under concat fusion has a second weight block for `β`.
#[derive(Clone, Copy, Debug)]
struct Layer {
    weight: usize,
    latent_weight: Option<usize>,
    bias: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    encoder: Vec<Layer>,
    fourier: Option<usize>,
    head: Vec<Layer>,
    output_bias: Option<usize>,
}

impl OperatorModel {
    /// Xavier-initialized weights, zero biases, standard-normal frequencies
    /// scaled by `fourier_scale`.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream(seed, Purpose::Init, 0, 0);
        let mut params = Vec::new();
        let layer = |params: &mut Vec<Param>, rng: &mut _, name: String, fan_in: usize, out: usize| {
            params.push(Param {
                name: format!("{name}.weight"),
                value: xavier_init(fan_in, out, rng),
            });
            params.push(Param {
                name: format!("{name}.bias"),
                value: Matrix::zeros(1, out),
            });
        };

        let mut width_in = 1;
        for l in 0..arch.encoder_depth {
            layer(&mut params, &mut rng, format!("encoder.{l}"), width_in, arch.encoder_width);
            width_in = arch.encoder_width;
        }
        layer(&mut params, &mut rng, "encoder.out".into(), width_in, arch.latent);

        if arch.decoder_mode == DecoderMode::Fourier {
            let data = (0..arch.space_dim * arch.fourier_features)
                .map(|_| arch.fourier_scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            params.push(Param {
                name: "decoder.fourier".into(),
                value: Matrix::from_vec(arch.space_dim, arch.fourier_features, data),
            });
        }

        let f = arch.feature_dim();
        let head_depth = arch.decoder_depth;
        for l in 0..=head_depth {
            let out = if l == head_depth { arch.head_out() } else { arch.decoder_width };
            let name = if l == head_depth { "decoder.out".to_string() } else { format!("decoder.{l}") };
            if l == 0 {
                if arch.fusion == Fusion::Concat {
                    // Split the Xavier draw for the `f + p` concatenated inputs
                    // into a feature block and a latent block.
                    let full = xavier_init(f + arch.latent, out, &mut rng);
                    let (feat, lat) = full.data.split_at(f * out);
                    params.push(Param {
                        name: format!("{name}.weight"),
                        value: Matrix::from_vec(f, out, feat.to_vec()),
                    });
                    params.push(Param {
                        name: format!("{name}.latent_weight"),
                        value: Matrix::from_vec(arch.latent, out, lat.to_vec()),
                    });
                    params.push(Param {
                        name: format!("{name}.bias"),
                        value: Matrix::zeros(1, out),
                    });
                } else {
                    layer(&mut params, &mut rng, name, f, out);
                }
            } else {
                layer(&mut params, &mut rng, name, arch.decoder_width, out);
            }
        }
        if arch.fusion == Fusion::InnerProduct {
            params.push(Param {
                name: "decoder.output_bias".into(),
                value: Matrix::zeros(1, arch.outputs),
            });
        }
        let model = Self { arch, params };
        debug_assert_eq!(model.parameter_count(), model.arch.parameter_count());
        Ok(model)
    }

    /// Rebuild a model from saved parameter arrays; names and shapes must
    /// match a freshly built model of the same architecture.
    pub fn from_params(arch: Architecture, params: Vec<Param>) -> Result<Self> {
        let template = Self::new(arch.clone(), 0)?;
        if template.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (t, p) in template.params.iter().zip(&params) {
            if t.name != p.name || t.value.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} ({:?}) does not match expected {} ({:?})",
                    p.name,
                    p.value.shape(),
                    t.name,
                    t.value.shape()
                )));
            }
            if p.value.data.len() != p.value.rows * p.value.cols
                || p.value.data.iter().any(|x| !x.is_finite())
            {
                return Err(Error::Checkpoint(format!("parameter {} is malformed", p.name)));
            }
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.data.len()).sum()
    }

    fn index(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    fn layout(&self) -> Layout {
        let lay = |s: &Self, name: &str, latent: bool| Layer {
            weight: s.index(&format!("{name}.weight")),
            latent_weight: latent.then(|| s.index(&format!("{name}.latent_weight"))),
            bias: s.index(&format!("{name}.bias")),
        };
        let mut encoder: Vec<Layer> = (0..self.arch.encoder_depth)
            .map(|l| lay(self, &format!("encoder.{l}"), false))
            .collect();
        encoder.push(lay(self, "encoder.out", false));
        let concat = self.arch.fusion == Fusion::Concat;
        let d = self.arch.decoder_depth;
        let head = (0..=d)
            .map(|l| {
                let name = if l == d { "decoder.out".to_string() } else { format!("decoder.{l}") };
                lay(self, &name, l == 0 && concat)
            })
            .collect();
        Layout {
            encoder,
            fourier: (self.arch.decoder_mode == DecoderMode::Fourier).then(|| self.index("decoder.fourier")),
            head,
            output_bias: (!concat).then(|| self.index("decoder.output_bias")),
        }
    }

    /// Push every parameter onto the tape, as a differentiable leaf or as a
    /// constant. The frozen Fourier matrix is always a constant.
    pub fn bind(&self, tape: &mut Tape, differentiable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                let trainable = differentiable
                    && (p.name != "decoder.fourier" || self.arch.train_fourier);
                if trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }

    fn encode_on(&self, tape: &mut Tape, vars: &[Var], layout: &Layout, ts: &[f64]) -> Var {
        let mut h = tape.constant(Matrix::column(ts.to_vec()));
        let last = layout.encoder.len() - 1;
        for (l, layer) in layout.encoder.iter().enumerate() {
            let z = tape.matmul(h, vars[layer.weight]);
            let z = tape.add_row(z, vars[layer.bias]);
            h = if l == last { z } else { tape.gelu(z) };
        }
        h
    }

    /// Record the batched forward pass. `points` holds `Σ counts` boundary
    /// points (rows), grouped by geometry: the first `counts[0]` belong to
    /// `ts[0]`, and so on. Returns the `Σ counts × outputs` potential.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        ts: &[f64],
        points: Matrix,
        counts: Arc<Vec<usize>>,
    ) -> Var {
        assert_eq!(ts.len(), counts.len(), "one count per geometry");
        assert_eq!(points.cols, self.arch.space_dim, "point dimension mismatch");
        let layout = self.layout();
        let beta = self.encode_on(tape, vars, &layout, ts);

        self.decode_on(tape, vars, &layout, beta, points, counts)
    }

    /// Latent code `β(t)` for each geometry parameter (rows).
    pub fn encode(&self, ts: &[f64]) -> Matrix {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let layout = self.layout();
        let b = self.encode_on(&mut tape, &vars, &layout, ts);
        tape.value(b).clone()
    }

    /// Decoder output for one latent code and a set of points (rows).
    pub fn decode(&self, beta: &[f64], points: &Matrix) -> Matrix {
        assert_eq!(beta.len(), self.arch.latent);
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let layout = self.layout();
        let latent = tape.constant(Matrix::from_vec(1, beta.len(), beta.to_vec()));
        let counts = Arc::new(vec![points.rows]);
        let out = self.decode_on(&mut tape, &vars, &layout, latent, points.clone(), counts);
        tape.value(out).clone()
    }

    fn decode_on(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        layout: &Layout,
        beta: Var,
        points: Matrix,
        counts: Arc<Vec<usize>>,
    ) -> Var {
        let x = tape.constant(points);
        let features = match layout.fourier {
            Some(fi) => {
                let z = tape.matmul(x, vars[fi]);
                let c = tape.cos(z);
                let s = tape.sin(z);
                tape.concat_cols(c, s)
            }
            None => x,
        };
        let last = layout.head.len() - 1;
        let mut h = features;
        for (l, layer) in layout.head.iter().enumerate() {
            let mut z = tape.matmul(h, vars[layer.weight]);
            if let Some(lw) = layer.latent_weight {
                let per_geom = tape.matmul(beta, vars[lw]);
                let spread = tape.repeat_rows(per_geom, counts.clone());
                z = tape.add(z, spread);
            }
            let z = tape.add_row(z, vars[layer.bias]);
            h = if l == last { z } else { tape.gelu(z) };
        }
        match layout.output_bias {
            None => h,
            Some(bi) => {
                let p = self.arch.latent;
                let spread = tape.repeat_rows(beta, counts);
                let mut out = None;
                for c in 0..self.arch.outputs {
                    let block = tape.slice_cols(h, c * p, p);
                    let prod = tape.mul(block, spread);
                    let ch = tape.row_sum(prod);
                    out = Some(match out {
                        None => ch,
                        Some(o) => tape.concat_cols(o, ch),
                    });
                }
                let out = out.expect("at least one output");
                tape.add_row(out, vars[bi])
            }
        }
    }

    /// `v(x; t)` at a set of points on `Γ_t` (rows of `points`).
    pub fn potential_at(&self, t: f64, points: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let out = self.forward(&mut tape, &vars, &[t], points.clone(), Arc::new(vec![points.rows]));
        tape.value(out).clone()
    }
}

/// Anything that can supply the boundary potential on a quadrature sample:
/// the trained network, an oracle density, or combinations used in tests.
pub trait Potential: Sync {
    fn outputs(&self) -> usize;
    /// `M × outputs` values at the sample's points.
    fn evaluate(&self, t: f64, sample: &BoundarySample) -> Matrix;
}

impl Potential for OperatorModel {
    fn outputs(&self) -> usize {
        self.arch.outputs
    }

    fn evaluate(&self, t: f64, sample: &BoundarySample) -> Matrix {
        let points = Matrix::from_vec(sample.len(), sample.dim, sample.points.clone());
        self.potential_at(t, &points)
    }
}

/// The identically zero potential.
#[derive(Clone, Copy, Debug)]
pub struct ZeroPotential(pub usize);

impl Potential for ZeroPotential {
    fn outputs(&self) -> usize {
        self.0
    }

    fn evaluate(&self, _t: f64, sample: &BoundarySample) -> Matrix {
        Matrix::zeros(sample.len(), self.0)
    }
}

/// Pointwise sum of two potentials.
pub struct SumPotential<'a>(pub &'a dyn Potential, pub &'a dyn Potential);

impl Potential for SumPotential<'_> {
    fn outputs(&self) -> usize {
        self.0.outputs()
    }

    fn evaluate(&self, t: f64, sample: &BoundarySample) -> Matrix {
        let mut a = self.0.evaluate(t, sample);
        let b = self.1.evaluate(t, sample);
        for (x, y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
        a
    }
}

/// A potential scaled by a constant.
pub struct ScaledPotential<'a>(pub &'a dyn Potential, pub f64);

impl Potential for ScaledPotential<'_> {
    fn outputs(&self) -> usize {
        self.0.outputs()
    }

    fn evaluate(&self, t: f64, sample: &BoundarySample) -> Matrix {
        let mut a = self.0.evaluate(t, sample);
        a.data.iter_mut().for_each(|x| *x *= self.1);
        a
    }
}
