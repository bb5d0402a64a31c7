//! Layered feed-forward generators: per-layer forward evaluation with
//! caching, exact vector-Jacobian products, splitting at any layer index,
//! Lipschitz bounds, and JSON model files.

use crate::error::{Error, Result};
use crate::numerics::{randn, spectral_norm, Mat, Rng};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Pointwise activation. All variants are 1-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// Slope must lie in (0, 1).
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn apply(&self, t: f64) -> f64 {
        match self {
            Activation::Identity => t,
            Activation::Relu => t.max(0.0),
            Activation::LeakyRelu(s) => {
                if t >= 0.0 {
                    t
                } else {
                    s * t
                }
            }
            Activation::Tanh => t.tanh(),
        }
    }

    /// Derivative at pre-activation `t`. At the relu/leaky-relu kink the
    /// positive-side slope (1) is used so the subgradient choice is
    /// deterministic.
    pub fn slope_at(&self, t: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if t >= 0.0 {
                    1.0
                } else {
                    *s
                }
            }
            Activation::Tanh => {
                let y = t.tanh();
                1.0 - y * y
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Activation::LeakyRelu(s) = self {
            if !(*s > 0.0 && *s < 1.0) {
                return Err(Error::ModelFormat(format!(
                    "leaky_relu slope must lie in (0,1), got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Common GAN convention for leaky activations.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// One affine + activation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Mat, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimMismatch {
                context: "Layer bias length",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        activation.validate()?;
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// G = G_d ∘ … ∘ G_1 as an ordered layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGenerator {
    layers: Vec<Layer>,
}

/// Per-layer pre-activations cached by [`LayeredGenerator::forward_cached`];
/// sufficient for an exact VJP.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre_activations: Vec<Vec<f64>>,
}

/// Prefix/suffix factorization of a generator at one layer boundary.
#[derive(Debug, Clone)]
pub struct GeneratorSplit {
    pub prefix: LayeredGenerator,
    pub suffix: LayeredGenerator,
    pub split_index: usize,
}

/// Spectral-norm products bounding the Lipschitz constants of a split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub per_layer: Vec<f64>,
    pub prefix_bound: f64,
    pub suffix_bound: f64,
}

impl LayeredGenerator {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ModelFormat("generator needs at least 1 layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ModelFormat(format!(
                    "layer {} out_dim {} does not chain with layer {} in_dim {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(LayeredGenerator { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Layer-boundary dims (k, p_1, …, n).
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim()));
        d
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(z)?.0)
    }

    /// Forward pass keeping per-layer pre-activations for a later VJP.
    pub fn forward_cached(&self, z: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if z.len() != self.in_dim() {
            return Err(Error::DimMismatch {
                context: "forward input",
                expected: self.in_dim(),
                got: z.len(),
            });
        }
        let mut h = z.to_vec();
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut a = layer.weights.matvec(&h)?;
            for (ai, bi) in a.iter_mut().zip(&layer.bias) {
                *ai += bi;
            }
            h = a.iter().map(|&t| layer.activation.apply(t)).collect();
            pre_activations.push(a);
        }
        Ok((
            h,
            ForwardCache {
                input: z.to_vec(),
                pre_activations,
            },
        ))
    }

    /// Jᵀ·cotangent where J = ∂ forward / ∂ z at the cached point.
    pub fn vjp(&self, cache: &ForwardCache, cotangent: &[f64]) -> Result<Vec<f64>> {
        if cache.pre_activations.len() != self.layers.len()
            || cache.input.len() != self.in_dim()
            || cache
                .pre_activations
                .iter()
                .zip(&self.layers)
                .any(|(a, l)| a.len() != l.out_dim())
        {
            return Err(Error::invalid(
                "vjp cache does not match this generator (stale or from another model)",
            ));
        }
        if cotangent.len() != self.out_dim() {
            return Err(Error::DimMismatch {
                context: "vjp cotangent",
                expected: self.out_dim(),
                got: cotangent.len(),
            });
        }
        let mut u = cotangent.to_vec();
        for (layer, pre) in self.layers.iter().zip(&cache.pre_activations).rev() {
            for (ui, t) in u.iter_mut().zip(pre) {
                *ui *= layer.activation.slope_at(*t);
            }
            u = layer.weights.matvec_transpose(&u)?;
        }
        Ok(u)
    }

    /// Split into prefix = layers 1..s and suffix = layers s+1..d.
    pub fn split(&self, s: usize) -> Result<GeneratorSplit> {
        if s == 0 || s >= self.layers.len() {
            return Err(Error::invalid(format!(
                "split index {s} out of range 1..{}",
                self.layers.len()
            )));
        }
        Ok(GeneratorSplit {
            prefix: LayeredGenerator {
                layers: self.layers[..s].to_vec(),
            },
            suffix: LayeredGenerator {
                layers: self.layers[s..].to_vec(),
            },
            split_index: s,
        })
    }

    /// Per-layer spectral norms; activations are 1-Lipschitz so the product
    /// upper-bounds the true Lipschitz constant.
    pub fn per_layer_lipschitz(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| spectral_norm(&l.weights, 500, 1e-10).value)
            .collect()
    }

    pub fn total_lipschitz(&self) -> f64 {
        self.per_layer_lipschitz().iter().product()
    }

    /// Lipschitz bounds relative to a split boundary. `split_index` in
    /// 0..=num_layers; an end value makes the corresponding factor empty
    /// (bound 1).
    pub fn lipschitz_bounds(&self, split_index: usize) -> Result<LipschitzBounds> {
        if split_index > self.layers.len() {
            return Err(Error::invalid(format!(
                "lipschitz split index {split_index} exceeds layer count"
            )));
        }
        let per_layer = self.per_layer_lipschitz();
        Ok(LipschitzBounds {
            prefix_bound: per_layer[..split_index].iter().product(),
            suffix_bound: per_layer[split_index..].iter().product(),
            per_layer,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::ModelFormat(format!("invalid model file: {e}")))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Synthesize a toy generator: Gaussian weights rescaled so every layer's
    /// spectral norm hits `layer_lipschitz`, small Gaussian biases.
    pub fn synthesize(spec: &SynthesisSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::from_seed(spec.seed);
        let mut layers = Vec::with_capacity(spec.dims.len() - 1);
        for w in spec.dims.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            let sigma = 1.0 / (in_dim as f64).sqrt();
            let data = randn(&mut rng, out_dim * in_dim, sigma);
            let mut weights = Mat::new(out_dim, in_dim, data)?;
            let sn = spectral_norm(&weights, 1000, 1e-12).value;
            if sn > 0.0 {
                weights.scale(spec.layer_lipschitz / sn);
            }
            let bias = randn(&mut rng, out_dim, spec.bias_sigma);
            layers.push(Layer::new(weights, bias, spec.activation())?);
        }
        LayeredGenerator::new(layers)
    }
}

impl GeneratorSplit {
    pub fn intermediate_dim(&self) -> usize {
        self.prefix.out_dim()
    }

    pub fn lipschitz(&self) -> LipschitzBounds {
        let pre = self.prefix.per_layer_lipschitz();
        let suf = self.suffix.per_layer_lipschitz();
        let prefix_bound = pre.iter().product();
        let suffix_bound = suf.iter().product();
        let mut per_layer = pre;
        per_layer.extend(suf);
        LipschitzBounds {
            per_layer,
            prefix_bound,
            suffix_bound,
        }
    }
}

/// Recipe for [`LayeredGenerator::synthesize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub dims: Vec<usize>,
    pub activation: String,
    #[serde(default = "default_slope")]
    pub slope: f64,
    #[serde(default = "default_layer_lipschitz")]
    pub layer_lipschitz: f64,
    #[serde(default = "default_bias_sigma")]
    pub bias_sigma: f64,
    pub seed: u64,
}

fn default_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

fn default_layer_lipschitz() -> f64 {
    1.0
}

fn default_bias_sigma() -> f64 {
    0.1
}

impl SynthesisSpec {
    pub fn activation(&self) -> Activation {
        match self.activation.as_str() {
            "identity" => Activation::Identity,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            _ => Activation::LeakyRelu(self.slope),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::invalid("synthesis needs at least 2 dims"));
        }
        if self.dims.contains(&0) {
            return Err(Error::invalid("synthesis dims must be positive"));
        }
        if self.layer_lipschitz <= 0.0 {
            return Err(Error::invalid("layer_lipschitz must be positive"));
        }
        match self.activation.as_str() {
            "identity" | "relu" | "tanh" => Ok(()),
            "leaky_relu" => Activation::LeakyRelu(self.slope).validate(),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model layout:
/// `{version:1, layers:[{in,out,activation,slope?,weights:[[row],...],bias:[...]}]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    #[serde(rename = "in")]
    in_dim: usize,
    #[serde(rename = "out")]
    out_dim: usize,
    activation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<&LayeredGenerator> for ModelFile {
    fn from(g: &LayeredGenerator) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            layers: g
                .layers
                .iter()
                .map(|l| {
                    let (activation, slope) = match l.activation {
                        Activation::Identity => ("identity", None),
                        Activation::Relu => ("relu", None),
                        Activation::LeakyRelu(s) => ("leaky_relu", Some(s)),
                        Activation::Tanh => ("tanh", None),
                    };
                    LayerFile {
                        in_dim: l.in_dim(),
                        out_dim: l.out_dim(),
                        activation: activation.into(),
                        slope,
                        weights: (0..l.out_dim()).map(|i| l.weights.row(i).to_vec()).collect(),
                        bias: l.bias.clone(),
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for LayeredGenerator {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (idx, lf) in file.layers.into_iter().enumerate() {
            let activation = match lf.activation.as_str() {
                "identity" => Activation::Identity,
                "relu" => Activation::Relu,
                "tanh" => Activation::Tanh,
                "leaky_relu" => Activation::LeakyRelu(lf.slope.ok_or_else(|| {
                    Error::ModelFormat(format!("layer {idx}: leaky_relu requires 'slope'"))
                })?),
                other => {
                    return Err(Error::ModelFormat(format!(
                        "layer {idx}: unknown activation '{other}'"
                    )))
                }
            };
            if lf.weights.len() != lf.out_dim {
                return Err(Error::ModelFormat(format!(
                    "layer {idx}: 'weights' has {} rows, 'out' says {}",
                    lf.weights.len(),
                    lf.out_dim
                )));
            }
            let mut data = Vec::with_capacity(lf.out_dim * lf.in_dim);
            for (r, row) in lf.weights.iter().enumerate() {
                if row.len() != lf.in_dim {
                    return Err(Error::ModelFormat(format!(
                        "layer {idx}: weights row {r} has {} entries, 'in' says {}",
                        row.len(),
                        lf.in_dim
                    )));
                }
                data.extend_from_slice(row);
            }
            if lf.bias.len() != lf.out_dim {
                return Err(Error::ModelFormat(format!(
                    "layer {idx}: 'bias' has {} entries, 'out' says {}",
                    lf.bias.len(),
                    lf.out_dim
                )));
            }
            if !data.iter().chain(lf.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::ModelFormat(format!(
                    "layer {idx}: non-finite weight or bias entry"
                )));
            }
            layers.push(Layer::new(
                Mat::new(lf.out_dim, lf.in_dim, data)?,
                lf.bias,
                activation,
            )?);
        }
        LayeredGenerator::new(layers)
    }
}

/// Convenience: single-layer generator from a plain matrix (no bias).
pub fn linear_generator(weights: Mat, activation: Activation) -> LayeredGenerator {
    let bias = vec![0.0; weights.rows()];
    LayeredGenerator::new(vec![Layer::new(weights, bias, activation).unwrap()]).unwrap()
}
