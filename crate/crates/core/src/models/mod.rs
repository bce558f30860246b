//! The model zoo and the pipeline wirings: spectral-operator pipelines
//! (vanilla FNO, DFNO, DUNO-lite, registered plugins), learned-upsampler
//! baselines (SRCNN, EDSR-lite, ESRGAN-lite, SwinIR-lite) and parameter-free
//! bicubic interpolation.
//!
//! Operator pipelines keep the interpolation step inside the model and can
//! re-parameterize it to a larger factor at evaluation time with unchanged
//! weights. Learned-upsampler baselines are locked to their training factor;
//! evaluating them at a larger factor requires the residual-interpolation
//! wiring in the evaluation module.

pub mod baselines;
pub mod checkpoint;
pub mod rrdb;
pub mod spectral;
pub mod swin;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Params, Var};
use crate::datagen::derive_seed;
use crate::{Error, Result};

use baselines::{EdsrLite, EsrganGenerator, Srcnn};
use spectral::{DunoStack, FnoStack, OperatorStack, Pointwise};
use swin::{SwinBackbone, SwinIrLite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bicubic,
    Srcnn,
    EdsrLite,
    EsrganLite,
    SwinirLite,
    Fno,
    Dfno,
    DunoLite,
    Plugin,
}

impl Family {
    /// Families whose downscaling stage is built from operator layers.
    pub fn is_neural_operator(self) -> bool {
        matches!(
            self,
            Family::Fno | Family::Dfno | Family::DunoLite | Family::Plugin
        )
    }

    /// Families carrying a learned upsampler (locked to the train factor).
    pub fn has_learned_upsampler(self) -> bool {
        matches!(
            self,
            Family::Srcnn | Family::EdsrLite | Family::EsrganLite | Family::SwinirLite
        )
    }

    pub fn all() -> [Family; 9] {
        [
            Family::Bicubic,
            Family::Srcnn,
            Family::EdsrLite,
            Family::EsrganLite,
            Family::SwinirLite,
            Family::Fno,
            Family::Dfno,
            Family::DunoLite,
            Family::Plugin,
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bicubic => "bicubic",
            Family::Srcnn => "srcnn",
            Family::EdsrLite => "edsr_lite",
            Family::EsrganLite => "esrgan_lite",
            Family::SwinirLite => "swinir_lite",
            Family::Fno => "fno",
            Family::Dfno => "dfno",
            Family::DunoLite => "duno_lite",
            Family::Plugin => "plugin",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Rrdb,
    Rstb,
    /// Pass the input through unchanged; exists so pipeline composition can
    /// be asserted against closed forms.
    Passthrough,
}

fn default_width() -> usize {
    64
}
fn default_blocks() -> usize {
    4
}
fn default_modes() -> usize {
    16
}
fn default_extractor() -> Extractor {
    Extractor::Rrdb
}
fn default_extractor_blocks() -> usize {
    12
}
fn default_train_factor() -> usize {
    4
}
fn default_in_channels() -> usize {
    2
}

/// Architecture family plus hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_extractor")]
    pub extractor: Extractor,
    #[serde(default = "default_extractor_blocks")]
    pub n_extractor_blocks: usize,
    #[serde(default)]
    pub local_layers: bool,
    #[serde(default = "default_train_factor")]
    pub train_factor: usize,
    #[serde(default = "default_in_channels")]
    pub in_channels: usize,
    /// Registered operator-stack name, required when family = plugin.
    #[serde(default)]
    pub plugin: Option<String>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            width: default_width(),
            n_blocks: default_blocks(),
            modes: default_modes(),
            extractor: default_extractor(),
            n_extractor_blocks: default_extractor_blocks(),
            local_layers: false,
            train_factor: default_train_factor(),
            in_channels: default_in_channels(),
            plugin: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_factor < 2 {
            return Err(Error::validation("train_factor must be >= 2"));
        }
        if self.in_channels == 0 {
            return Err(Error::validation("in_channels must be >= 1"));
        }
        match self.family {
            Family::Bicubic | Family::Srcnn => {}
            Family::EdsrLite | Family::EsrganLite | Family::SwinirLite => {
                if self.width == 0 || self.n_blocks == 0 {
                    return Err(Error::validation("width and n_blocks must be >= 1"));
                }
            }
            Family::Fno | Family::Dfno | Family::DunoLite | Family::Plugin => {
                if self.width == 0 {
                    return Err(Error::validation("width must be >= 1"));
                }
                if self.modes == 0 {
                    return Err(Error::validation("modes must be >= 1"));
                }
            }
        }
        if matches!(
            self.family,
            Family::Dfno | Family::DunoLite | Family::Plugin | Family::EsrganLite
        ) && !matches!(self.n_extractor_blocks, 6 | 12 | 24)
        {
            return Err(Error::validation(format!(
                "n_extractor_blocks must be one of 6, 12 or 24, got {}",
                self.n_extractor_blocks
            )));
        }
        if self.family == Family::Plugin && self.plugin.is_none() {
            return Err(Error::validation(
                "family plugin requires the plugin name field",
            ));
        }
        Ok(())
    }
}

/// Interpolation placement: inside the operator pipeline (re-parameterized
/// at evaluation) or after the model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    PreOperator,
    PostModel,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub placement: Placement,
    pub train_factor: usize,
    pub eval_factor: usize,
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eval_factor < self.train_factor {
            return Err(Error::validation(format!(
                "eval_factor {} must be >= train_factor {}",
                self.eval_factor, self.train_factor
            )));
        }
        if self.placement == Placement::PostModel && self.eval_factor % self.train_factor != 0 {
            return Err(Error::validation(format!(
                "post-model placement needs an integer residual factor: {} / {}",
                self.eval_factor, self.train_factor
            )));
        }
        Ok(())
    }

    pub fn residual_factor(&self) -> usize {
        self.eval_factor / self.train_factor
    }
}

/// Builder for operator stacks registered under a name.
pub type OperatorFactory =
    Box<dyn Fn(&ModelSpec, &mut Params, &mut ChaCha20Rng) -> Box<dyn OperatorStack>>;

/// Named operator-stack plugins usable as the DXNO operator stage.
#[derive(Default)]
pub struct PluginRegistry {
    factories: HashMap<String, OperatorFactory>,
}

impl PluginRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a factory after probing the operator-layer contract: a stack
    /// built once must run at two different grids with same-grid output.
    /// Grid-dependent parameter shapes fail the probe.
    pub fn register(&mut self, name: impl Into<String>, factory: OperatorFactory) -> Result<()> {
        let name = name.into();
        let mut probe_spec = ModelSpec::new(Family::Plugin);
        probe_spec.plugin = Some(name.clone());
        probe_spec.width = 4;
        probe_spec.modes = 2;
        probe_spec.n_blocks = 1;
        probe_spec.n_extractor_blocks = 6;
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let stack = factory(&probe_spec, &mut params, &mut rng);
        for (h, w) in [(9usize, 9usize), (12, 16)] {
            let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                let mut g = Graph::new();
                let x = g.input(ndarray::ArrayD::from_shape_fn(
                    ndarray::IxDyn(&[1, probe_spec.width, h, w]),
                    |ix| (ix[2] as f64 * 0.31 + ix[3] as f64 * 0.17).sin(),
                ));
                let y = stack.forward(&mut g, &params, x, 1.0);
                g.shape(y).to_vec()
            }));
            match run {
                Ok(shape) => {
                    if shape != vec![1, probe_spec.width, h, w] {
                        return Err(Error::contract(format!(
                            "plugin {name:?} violates same-grid in/out: {h}x{w} -> {shape:?}"
                        )));
                    }
                }
                Err(_) => {
                    return Err(Error::contract(format!(
                        "plugin {name:?} failed the resolution-agnostic probe at {h}x{w} \
                         (grid-dependent parameters?)"
                    )));
                }
            }
        }
        self.factories.insert(name, factory);
        Ok(())
    }

    /// Register the built-in FNO block stack under a new name.
    pub fn register_builtin_fno(&mut self, name: impl Into<String>) -> Result<()> {
        self.register(
            name,
            Box::new(|spec, params, rng| {
                Box::new(FnoStack::new(
                    params,
                    rng,
                    "dxno",
                    spec.width,
                    spec.n_blocks,
                    spec.modes,
                    spec.local_layers,
                )) as Box<dyn OperatorStack>
            }),
        )
    }

    fn build(
        &self,
        name: &str,
        spec: &ModelSpec,
        params: &mut Params,
        rng: &mut ChaCha20Rng,
    ) -> Result<Box<dyn OperatorStack>> {
        let f = self.factories.get(name).ok_or_else(|| {
            Error::validation(format!("no operator plugin registered under {name:?}"))
        })?;
        Ok(f(spec, params, rng))
    }
}

/// Vanilla FNO pipeline: interpolate the raw input to the target grid, lift
/// pointwise, run the block stack, project back to data channels.
pub struct FnoPipeline {
    pub lifting: Pointwise,
    pub stack: FnoStack,
    pub projection: Pointwise,
}

impl FnoPipeline {
    fn new(spec: &ModelSpec, params: &mut Params, rng: &mut ChaCha20Rng) -> Self {
        let lifting = Pointwise::new(params, rng, "fno.lifting", spec.in_channels, spec.width);
        let stack = FnoStack::new(
            params,
            rng,
            "fno",
            spec.width,
            spec.n_blocks,
            spec.modes,
            spec.local_layers,
        );
        let projection =
            Pointwise::new(params, rng, "fno.projection", spec.width, spec.in_channels);
        Self {
            lifting,
            stack,
            projection,
        }
    }

    /// Body at a fixed grid (after any interpolation).
    pub fn forward_grid(&self, g: &mut Graph, p: &Params, x: Var, grid_spacing: f64) -> Var {
        let lifted = self.lifting.forward(g, p, x);
        let h = self.stack.forward(g, p, lifted, grid_spacing);
        self.projection.forward(g, p, h)
    }

    pub fn make_identity(&self, params: &mut Params) {
        self.lifting.make_identity(params);
        self.stack.make_identity(params);
        self.projection.make_identity(params);
    }
}

enum ExtractorNet {
    Rrdb(rrdb::RrdbNet),
    Rstb(SwinBackbone),
    Passthrough,
}

/// DXNO composition: extractor at the LR grid, bicubic interpolation of the
/// feature embedding by the upsampling factor, operator stack, projection.
pub struct DxnoModel {
    extractor: ExtractorNet,
    lifting: Pointwise,
    stack: Box<dyn OperatorStack>,
    projection: Pointwise,
}

impl DxnoModel {
    fn new(
        spec: &ModelSpec,
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        registry: Option<&PluginRegistry>,
    ) -> Result<Self> {
        let (extractor, ext_out) = match spec.extractor {
            Extractor::Rrdb => {
                let gc = (spec.width / 2).max(4);
                let net = rrdb::RrdbNet::new(
                    params,
                    rng,
                    "dxno.ext",
                    spec.in_channels,
                    spec.width,
                    gc,
                    spec.n_extractor_blocks,
                );
                (ExtractorNet::Rrdb(net), spec.width)
            }
            Extractor::Rstb => {
                // Comparable depth to the RRDB option: n_extractor_blocks/3
                // RSTBs of two attention layers.
                let net = SwinBackbone::new(
                    params,
                    rng,
                    "dxno.ext",
                    spec.in_channels,
                    spec.width,
                    (spec.n_extractor_blocks / 3).max(1),
                    2,
                );
                (ExtractorNet::Rstb(net), spec.width)
            }
            Extractor::Passthrough => (ExtractorNet::Passthrough, spec.in_channels),
        };
        let lifting = Pointwise::new(params, rng, "dxno.lifting", ext_out, spec.width);
        let stack: Box<dyn OperatorStack> = match spec.family {
            Family::Dfno => Box::new(FnoStack::new(
                params,
                rng,
                "dxno",
                spec.width,
                spec.n_blocks,
                spec.modes,
                spec.local_layers,
            )),
            Family::DunoLite => Box::new(DunoStack::new(
                params,
                rng,
                "dxno",
                spec.width,
                spec.modes,
                spec.local_layers,
            )),
            Family::Plugin => {
                let name = spec.plugin.as_deref().expect("validated");
                let registry = registry.ok_or_else(|| {
                    Error::validation("plugin family requires a plugin registry")
                })?;
                registry.build(name, spec, params, rng)?
            }
            other => {
                return Err(Error::validation(format!(
                    "family {other} is not a DXNO composition"
                )))
            }
        };
        let projection =
            Pointwise::new(params, rng, "dxno.projection", spec.width, spec.in_channels);
        Ok(Self {
            extractor,
            lifting,
            stack,
            projection,
        })
    }

    fn forward_at(&self, g: &mut Graph, p: &Params, x: Var, s: usize, dx_km: f64) -> Var {
        let feats = match &self.extractor {
            ExtractorNet::Rrdb(net) => net.forward(g, p, x),
            ExtractorNet::Rstb(net) => {
                let padded = net.forward(g, p, x);
                let shape = g.shape(padded.features).to_vec();
                if shape[2] == padded.orig_h && shape[3] == padded.orig_w {
                    padded.features
                } else {
                    g.slice(
                        padded.features,
                        &[0, 0, 0, 0],
                        &[shape[0], shape[1], padded.orig_h, padded.orig_w],
                    )
                }
            }
            ExtractorNet::Passthrough => x,
        };
        let shape = g.shape(feats).to_vec();
        let up = g.bicubic(feats, shape[2] * s, shape[3] * s);
        let lifted = self.lifting.forward(g, p, up);
        let h = self.stack.forward(g, p, lifted, dx_km / s as f64);
        self.projection.forward(g, p, h)
    }

    pub fn make_identity(&self, params: &mut Params) {
        self.lifting.make_identity(params);
        self.stack.make_identity(params);
        self.projection.make_identity(params);
    }
}

enum Arch {
    Bicubic,
    Srcnn(Srcnn),
    Edsr(EdsrLite),
    Esrgan(EsrganGenerator),
    Swinir(SwinIrLite),
    Fno(FnoPipeline),
    Dxno(DxnoModel),
}

/// A built model: spec, parameter store, and the architecture wiring.
pub struct Model {
    pub spec: ModelSpec,
    pub params: Params,
    arch: Arch,
}

impl Model {
    /// Deterministic construction from a spec and seed.
    pub fn build(spec: &ModelSpec, seed: u64, registry: Option<&PluginRegistry>) -> Result<Self> {
        spec.validate()?;
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "model_init"));
        let arch = match spec.family {
            Family::Bicubic => Arch::Bicubic,
            Family::Srcnn => Arch::Srcnn(Srcnn::new(
                &mut params,
                &mut rng,
                spec.in_channels,
                spec.train_factor,
            )),
            Family::EdsrLite => Arch::Edsr(EdsrLite::new(
                &mut params,
                &mut rng,
                spec.in_channels,
                spec.width,
                spec.n_blocks,
                spec.train_factor,
            )?),
            Family::EsrganLite => Arch::Esrgan(EsrganGenerator::new(
                &mut params,
                &mut rng,
                spec.in_channels,
                spec.width,
                spec.n_extractor_blocks,
                spec.train_factor,
            )?),
            Family::SwinirLite => Arch::Swinir(SwinIrLite::new(
                &mut params,
                &mut rng,
                spec.in_channels,
                spec.width,
                spec.n_blocks,
                spec.train_factor,
            )?),
            Family::Fno => Arch::Fno(FnoPipeline::new(spec, &mut params, &mut rng)),
            Family::Dfno | Family::DunoLite | Family::Plugin => {
                Arch::Dxno(DxnoModel::new(spec, &mut params, &mut rng, registry)?)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            params,
            arch,
        })
    }

    /// Forward at the training factor (the supervised-training path).
    pub fn forward_train(&self, g: &mut Graph, x: Var, dx_km: f64) -> Result<Var> {
        self.forward_at_factor(g, x, self.spec.train_factor, dx_km)
    }

    /// Forward producing an output `s` times the input grid. Operator
    /// families re-parameterize their internal interpolation; learned
    /// upsamplers are locked to the training factor.
    pub fn forward_at_factor(&self, g: &mut Graph, x: Var, s: usize, dx_km: f64) -> Result<Var> {
        if s < 2 && !matches!(self.arch, Arch::Bicubic) {
            return Err(Error::validation("upsampling factor must be >= 2"));
        }
        let locked = self.spec.train_factor;
        match &self.arch {
            Arch::Bicubic => {
                let shape = g.shape(x).to_vec();
                Ok(g.bicubic(x, shape[2] * s, shape[3] * s))
            }
            Arch::Srcnn(m) => {
                self.check_locked(s, locked)?;
                Ok(m.forward(g, &self.params, x))
            }
            Arch::Edsr(m) => {
                self.check_locked(s, locked)?;
                Ok(m.forward(g, &self.params, x))
            }
            Arch::Esrgan(m) => {
                self.check_locked(s, locked)?;
                Ok(m.forward(g, &self.params, x))
            }
            Arch::Swinir(m) => {
                self.check_locked(s, locked)?;
                Ok(m.forward(g, &self.params, x))
            }
            Arch::Fno(m) => {
                let shape = g.shape(x).to_vec();
                let grid = shape[2].min(shape[3]) * s;
                if self.spec.modes > grid / 2 {
                    log::warn!(
                        "spectral modes {} exceed the band of a {grid}-cell grid; clipping",
                        self.spec.modes
                    );
                }
                let up = g.bicubic(x, shape[2] * s, shape[3] * s);
                Ok(m.forward_grid(g, &self.params, up, dx_km / s as f64))
            }
            Arch::Dxno(m) => Ok(m.forward_at(g, &self.params, x, s, dx_km)),
        }
    }

    /// FNO body at the input grid without interpolation: the post-model
    /// placement ablation (interpolation applied downstream).
    pub fn forward_fno_lr(&self, g: &mut Graph, x: Var, dx_km: f64) -> Result<Var> {
        match &self.arch {
            Arch::Fno(m) => Ok(m.forward_grid(g, &self.params, x, dx_km)),
            _ => Err(Error::contract(
                "post-model operator placement only exists for the vanilla FNO family",
            )),
        }
    }

    /// The ESRGAN generator view, used by adversarial training.
    pub fn esrgan_generator(&self) -> Option<&EsrganGenerator> {
        match &self.arch {
            Arch::Esrgan(m) => Some(m),
            _ => None,
        }
    }

    fn check_locked(&self, s: usize, locked: usize) -> Result<()> {
        if s != locked {
            return Err(Error::contract(format!(
                "family {} has a learned upsampler locked to factor {locked}; \
                 factor {s} requires the residual-interpolation wiring",
                self.spec.family
            )));
        }
        Ok(())
    }

    /// Zero the operator pipeline into a pass-through (testing hook for the
    /// operator families).
    pub fn make_identity(&mut self) -> Result<()> {
        match &self.arch {
            Arch::Fno(m) => {
                m.make_identity(&mut self.params);
                Ok(())
            }
            Arch::Dxno(m) => {
                m.make_identity(&mut self.params);
                Ok(())
            }
            _ => Err(Error::contract(
                "identity initialization exists only for operator pipelines",
            )),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }
}

/// Exact learnable-scalar count for a spec (complex weights count two).
pub fn param_count(spec: &ModelSpec, registry: Option<&PluginRegistry>) -> Result<usize> {
    Ok(Model::build(spec, 0, registry)?.param_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    fn input(g: &mut Graph, shape: &[usize], seed: u64) -> Var {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        g.input(ArrayD::from_shape_simple_fn(IxDyn(shape), || {
            rng.gen_range(-1.0..1.0)
        }))
    }

    fn small_spec(family: Family) -> ModelSpec {
        let mut spec = ModelSpec::new(family);
        spec.width = 8;
        spec.n_blocks = 1;
        spec.modes = 4;
        spec.n_extractor_blocks = 6;
        spec.in_channels = 2;
        spec.train_factor = 4;
        spec
    }

    #[test]
    fn dxno_shape_contract() {
        let model = Model::build(&small_spec(Family::Dfno), 1, None).unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 16, 16], 2);
        let y = model.forward_at_factor(&mut g, x, 4, 100.0).unwrap();
        assert_eq!(g.shape(y), &[1, 2, 64, 64]);
    }

    #[test]
    fn dxno_zero_shot_reuses_parameters() {
        // Trained at 5, applied at 15: same params, 3x the linear size.
        let mut spec = small_spec(Family::Dfno);
        spec.train_factor = 5;
        let model = Model::build(&spec, 1, None).unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 8, 8], 3);
        let y5 = model.forward_at_factor(&mut g, x, 5, 30.0).unwrap();
        let y15 = model.forward_at_factor(&mut g, x, 15, 30.0).unwrap();
        assert_eq!(g.shape(y5), &[1, 2, 40, 40]);
        assert_eq!(g.shape(y15), &[1, 2, 120, 120]);
    }

    #[test]
    fn dxno_identity_equals_bicubic() {
        let mut spec = small_spec(Family::Dfno);
        spec.extractor = Extractor::Passthrough;
        let mut model = Model::build(&spec, 1, None).unwrap();
        model.make_identity().unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 8, 8], 5);
        let y = model.forward_at_factor(&mut g, x, 4, 1.0).unwrap();
        let up = g.bicubic(x, 32, 32);
        for (a, b) in g.value(y).iter().zip(g.value(up).iter()) {
            assert!((a - b).abs() < 1e-5, "identity pipeline: {a} vs bicubic {b}");
        }
    }

    #[test]
    fn fno_identity_and_bias_pathway() {
        let mut spec = small_spec(Family::Fno);
        spec.n_blocks = 1;
        let mut model = Model::build(&spec, 1, None).unwrap();
        model.make_identity().unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 8, 8], 6);
        let up = g.bicubic(x, 32, 32);
        let y = model.forward_at_factor(&mut g, x, 4, 1.0).unwrap();
        for (a, b) in g.value(y).iter().zip(g.value(up).iter()) {
            assert!((a - b).abs() < 1e-5, "fno identity: {a} vs {b}");
        }
        // Zero input: constant output equal to the bias pathway response.
        let model = Model::build(&spec, 2, None).unwrap();
        let mut g = Graph::new();
        let zero = g.input(ArrayD::zeros(IxDyn(&[1, 2, 8, 8])));
        let y = model.forward_at_factor(&mut g, zero, 4, 1.0).unwrap();
        let v = g.value(y);
        for c in 0..2 {
            let first = v[[0, c, 0, 0]];
            for h in 0..32 {
                for w in 0..32 {
                    assert!(
                        (v[[0, c, h, w]] - first).abs() < 1e-9,
                        "bias pathway must be spatially constant"
                    );
                }
            }
        }
    }

    #[test]
    fn fno_resolution_invariance_single_mode() {
        // The same parameters applied at NxN and 2Nx2N preserve a single
        // retained mode's response; the transform convention carries the
        // grid-size normalization.
        let mut spec = small_spec(Family::Fno);
        spec.in_channels = 1;
        spec.n_blocks = 1;
        spec.modes = 4;
        let model = Model::build(&spec, 3, None).unwrap();
        let n = 16;
        let mode = |n: usize| {
            ArrayD::from_shape_fn(IxDyn(&[1, 1, n, n]), |ix| {
                (2.0 * std::f64::consts::PI * (2 * ix[2] + 3 * ix[3]) as f64 / n as f64).cos()
            })
        };
        let run = |field: ArrayD<f64>| {
            let mut g = Graph::new();
            let x = g.input(field);
            let y = model.forward_fno_lr(&mut g, x, 1.0).unwrap();
            g.value(y).clone()
        };
        let small = run(mode(n));
        let large = run(mode(2 * n));
        // Co-located points agree for a pure retained mode.
        let mut max_err = 0.0f64;
        for y in 0..n {
            for x in 0..n {
                let a = small[[0, 0, y, x]];
                let b = large[[0, 0, 2 * y, 2 * x]];
                max_err = max_err.max((a - b).abs());
            }
        }
        assert!(
            max_err < 1e-4,
            "single-mode response changed across grids: {max_err}"
        );
    }

    #[test]
    fn baseline_locked_to_train_factor() {
        for family in [
            Family::Srcnn,
            Family::EdsrLite,
            Family::EsrganLite,
            Family::SwinirLite,
        ] {
            let model = Model::build(&small_spec(family), 1, None).unwrap();
            let mut g = Graph::new();
            let x = input(&mut g, &[1, 2, 8, 8], 7);
            let err = model.forward_at_factor(&mut g, x, 8, 1.0).unwrap_err();
            assert!(
                matches!(err, Error::Contract(_)),
                "{family}: learned upsampler at a foreign factor must be a contract error"
            );
        }
    }

    #[test]
    fn plugin_alias_matches_dfno() {
        let mut registry = PluginRegistry::new();
        registry.register_builtin_fno("my_fno").unwrap();
        let mut spec = small_spec(Family::Dfno);
        spec.extractor = Extractor::Passthrough;
        let dfno = Model::build(&spec, 9, None).unwrap();
        let mut pspec = spec.clone();
        pspec.family = Family::Plugin;
        pspec.plugin = Some("my_fno".to_string());
        let plugged = Model::build(&pspec, 9, Some(&registry)).unwrap();
        let raw = {
            use rand::Rng;
            let mut rng = ChaCha20Rng::seed_from_u64(4);
            ArrayD::from_shape_simple_fn(IxDyn(&[1, 2, 8, 8]), || rng.gen_range(-1.0..1.0))
        };
        let run = |m: &Model| {
            let mut g = Graph::new();
            let x = g.input(raw.clone());
            let y = m.forward_at_factor(&mut g, x, 4, 1.0).unwrap();
            g.value(y).clone()
        };
        let a = run(&dfno);
        let b = run(&plugged);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y, "plugin alias must reproduce dfno exactly");
        }
    }

    #[test]
    fn plugin_contract_rejects_grid_dependent_stack() {
        struct GridLocked {
            fixed: std::cell::Cell<Option<usize>>,
        }
        impl OperatorStack for GridLocked {
            fn forward(&self, g: &mut Graph, _p: &Params, x: Var, _dx: f64) -> Var {
                let h = g.shape(x)[2];
                match self.fixed.get() {
                    None => self.fixed.set(Some(h)),
                    Some(prev) => assert_eq!(prev, h, "parameter shape depends on grid"),
                }
                x
            }
            fn width(&self) -> usize {
                4
            }
        }
        let mut registry = PluginRegistry::new();
        let err = registry
            .register(
                "grid_locked",
                Box::new(|_, _, _| {
                    Box::new(GridLocked {
                        fixed: std::cell::Cell::new(None),
                    }) as Box<dyn OperatorStack>
                }),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "got: {err}");
    }

    #[test]
    fn plugin_identity_stack_gives_projected_bicubic() {
        struct IdentityStack;
        impl OperatorStack for IdentityStack {
            fn forward(&self, _g: &mut Graph, _p: &Params, x: Var, _dx: f64) -> Var {
                x
            }
            fn width(&self) -> usize {
                4
            }
        }
        let mut registry = PluginRegistry::new();
        registry
            .register("identity", Box::new(|_, _, _| Box::new(IdentityStack)))
            .unwrap();
        let mut spec = small_spec(Family::Plugin);
        spec.plugin = Some("identity".into());
        spec.extractor = Extractor::Passthrough;
        let mut model = Model::build(&spec, 1, Some(&registry)).unwrap();
        model.make_identity().unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 8, 8], 11);
        let y = model.forward_at_factor(&mut g, x, 4, 1.0).unwrap();
        let up = g.bicubic(x, 32, 32);
        for (a, b) in g.value(y).iter().zip(g.value(up).iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn spectral_param_count_examples() {
        // One spectral layer, 1->1 channels, 4x4 modes: four corner blocks
        // of 16 complex weights = 128 reals.
        let p = spectral::SpectralConvParams::zeros(1, 1, 4, 4);
        assert_eq!(p.param_count(), 128);
        // Doubling width multiplies the spectral weight count by 4.
        let w1 = spectral::SpectralConvParams::zeros(8, 8, 4, 4).param_count();
        let w2 = spectral::SpectralConvParams::zeros(16, 16, 4, 4).param_count();
        assert_eq!(w2, 4 * w1);
    }

    #[test]
    fn duno_forward_shapes() {
        let mut spec = small_spec(Family::DunoLite);
        spec.width = 4;
        let model = Model::build(&spec, 1, None).unwrap();
        let mut g = Graph::new();
        let x = input(&mut g, &[1, 2, 8, 8], 13);
        let y = model.forward_at_factor(&mut g, x, 4, 1.0).unwrap();
        assert_eq!(g.shape(y), &[1, 2, 32, 32]);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ModelSpec::new(Family::Dfno);
        spec.n_extractor_blocks = 7;
        assert!(spec.validate().is_err(), "extractor blocks limited to 6/12/24");
        let mut spec = ModelSpec::new(Family::Plugin);
        spec.n_extractor_blocks = 6;
        assert!(spec.validate().is_err(), "plugin family needs a name");
        let mut spec = ModelSpec::new(Family::Fno);
        spec.train_factor = 1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn build_deterministic_in_seed() {
        let spec = small_spec(Family::Dfno);
        let a = Model::build(&spec, 7, None).unwrap();
        let b = Model::build(&spec, 7, None).unwrap();
        for ((_, _, va), (_, _, vb)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(va, vb, "same seed must reproduce parameters exactly");
        }
    }
}
