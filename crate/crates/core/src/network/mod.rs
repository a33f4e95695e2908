//! Network builder, forward evaluation and weight persistence.

mod arch;
mod blocks;
mod config;
mod weights;

use std::path::Path;

use indexmap::IndexMap;

pub use arch::{Architecture, Block, BlockKind, ConvSpec, Pass, Source, SynthOp};
pub use blocks::{
    compute_smf, fusion, modulation_head, res_block, res_mod_block, res_skip_block, res_skip_mod_block,
    residual_branch, skip_branch, synthesis, Scope,
};
pub use config::{InputLayout, NetworkConfig, SmfInput};
pub use weights::{is_bias, is_modulation_param, WeightStore, WEIGHT_MAGIC};
pub(crate) use weights::{read_section, write_section};

use crate::autodiff::{Tape, Var};
use crate::decomposition::decompose;
use crate::error::{Error, Result};
use crate::tensor::{concat_channels, resize_bicubic, Element, Scale, Tensor};

/// Values produced by one forward pass on a tape.
pub struct Forward {
    pub output: Var,
    /// Map multiplied into the main path, keyed by block name (`base.rmb1`).
    pub modulation_maps: IndexMap<String, Var>,
    /// Shared modulation features, keyed by pass name.
    pub smf: IndexMap<String, Var>,
    /// Output of every block, keyed by block name.
    pub block_outputs: IndexMap<String, Var>,
    pub bicubic: Var,
}

/// A built network: configuration, resolved graph and weights.
#[derive(Clone, Debug)]
pub struct Network<T: Element = f32> {
    config: NetworkConfig,
    arch: Architecture,
    weights: WeightStore<T>,
    modulation_active: bool,
}

impl<T: Element> Network<T> {
    /// Xavier-initialized network.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let arch = Architecture::from_config(&config)?;
        let weights = WeightStore::xavier(&arch.convs, seed)?;
        Ok(Self::assemble(config, arch, weights))
    }

    /// All weights and biases zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        let arch = Architecture::from_config(&config)?;
        let weights = WeightStore::zeros(&arch.convs);
        Ok(Self::assemble(config, arch, weights))
    }

    /// Reduced network for decomposition and modulation experiments.
    pub fn build_toy(config: NetworkConfig, seed: u64) -> Result<Self> {
        if !config.toy {
            return Err(Error::Config("build_toy needs toy = true".into()));
        }
        Self::new(config, seed)
    }

    fn assemble(config: NetworkConfig, arch: Architecture, weights: WeightStore<T>) -> Self {
        let modulation_active = config.use_modulation;
        Network {
            config,
            arch,
            weights,
            modulation_active,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightStore<T> {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.param_count()
    }

    pub fn modulation_active(&self) -> bool {
        self.modulation_active
    }

    /// Bypasses (or restores) the modulation subnets. While bypassed,
    /// modulated blocks evaluate as their unmodulated counterparts.
    pub fn set_modulation_active(&mut self, active: bool) -> Result<()> {
        if active && !self.config.use_modulation {
            return Err(Error::Config("network was built without modulation subnets".into()));
        }
        self.modulation_active = active;
        Ok(())
    }

    /// The same network with modulation parameters removed from the graph.
    pub fn without_modulation(&self) -> Result<Self> {
        let mut config = self.config.clone();
        config.use_modulation = false;
        let arch = Architecture::from_config(&config)?;
        let mut weights = WeightStore::zeros(&arch.convs);
        for (name, t) in weights.map_mut().iter_mut() {
            *t = self.weights.require(name)?.clone();
        }
        Ok(Self::assemble(config, arch, weights))
    }

    pub fn cast<U: Element>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            arch: self.arch.clone(),
            weights: self.weights.cast(),
            modulation_active: self.modulation_active,
        }
    }

    /// Inference: `input` is `(N, 3, H, W)`; returns `(N, 3, sf·H, sf·W)`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let mut scope = Scope::new(&self.weights, false);
        let f = self.forward_tape(&mut tape, &mut scope, input)?;
        Ok(tape.take_value(f.output))
    }

    /// Per-block modulation maps, `(N, C, H, W)` each.
    pub fn extract_modulation_maps(&self, input: &Tensor<T>) -> Result<IndexMap<String, Tensor<T>>> {
        if !self.modulation_active {
            return Err(Error::Config("modulation is disabled for this network".into()));
        }
        let mut tape = Tape::new();
        let mut scope = Scope::new(&self.weights, false);
        let f = self.forward_tape(&mut tape, &mut scope, input)?;
        Ok(f.modulation_maps
            .into_iter()
            .map(|(k, v)| (k, tape.value(v).clone()))
            .collect())
    }

    /// Records the full forward computation on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape<T>, scope: &mut Scope<T>, input: &Tensor<T>) -> Result<Forward> {
        let (_, c, _, _) = input.dims4()?;
        if c != 3 {
            return Err(Error::Shape {
                op: "forward",
                lhs: vec![0, 3, 0, 0],
                rhs: input.shape().to_vec(),
            });
        }
        let sources = SourceCache::new(input, &self.config, self.arch.layout.uses_decomposition())?;
        let image = tape.constant(input.clone());
        let bic = resize_bicubic(input, Scale::up(self.config.sf), false)?;
        let bicubic = tape.constant(bic);
        let mut src_vars: Vec<(Source, Var)> = vec![(Source::Image, image)];
        let mut source_var = |tape: &mut Tape<T>, s: Source| -> Result<Var> {
            if let Some((_, v)) = src_vars.iter().find(|(k, _)| *k == s) {
                return Ok(*v);
            }
            let v = tape.constant(sources.get(s)?);
            src_vars.push((s, v));
            Ok(v)
        };

        let mut out = Forward {
            output: image,
            modulation_maps: IndexMap::new(),
            smf: IndexMap::new(),
            block_outputs: IndexMap::new(),
            bicubic,
        };
        let mut pass_outputs: Vec<Vec<Var>> = Vec::with_capacity(self.arch.passes.len());
        let mut features = Vec::with_capacity(self.arch.passes.len());
        for pass in &self.arch.passes {
            let x_in = source_var(tape, pass.source)?;
            let smf = match (self.modulation_active, pass.smf_source) {
                (true, Some(s)) => {
                    let v = source_var(tape, s)?;
                    let m = compute_smf(tape, scope, &pass.name, v)?;
                    out.smf.insert(pass.name.clone(), m);
                    Some(m)
                }
                _ => None,
            };
            let mut h = scope.conv(tape, x_in, &format!("{}.conv_in", pass.name))?;
            let mut outs = Vec::with_capacity(pass.blocks.len());
            for b in &pass.blocks {
                let kind = if self.modulation_active {
                    b.kind
                } else {
                    b.kind.without_modulation()
                };
                let bridge = match (b.bridge, pass.bridge_pass) {
                    (Some(i), Some(p)) if kind.has_skip() => Some(pass_outputs[p][i]),
                    _ => None,
                };
                h = match (kind, bridge, smf) {
                    (BlockKind::Res, _, _) => res_block(tape, scope, &b.name, h)?,
                    (BlockKind::ResSkip, Some(br), _) => res_skip_block(tape, scope, &b.name, h, br)?,
                    (BlockKind::ResMod, _, Some(m)) => {
                        let (o, map) = res_mod_block(tape, scope, &b.name, h, m)?;
                        out.modulation_maps.insert(b.name.clone(), map);
                        o
                    }
                    (BlockKind::ResSkipMod, Some(br), Some(m)) => {
                        let (o, map) = res_skip_mod_block(tape, scope, &b.name, h, br, m)?;
                        out.modulation_maps.insert(b.name.clone(), map);
                        o
                    }
                    _ => return Err(Error::Config(format!("block {} is missing its inputs", b.name))),
                };
                outs.push(h);
                out.block_outputs.insert(b.name.clone(), h);
            }
            features.push(h);
            pass_outputs.push(outs);
        }

        let names: Vec<String> = self.arch.fusion_blocks.iter().map(|b| b.name.clone()).collect();
        let y_f = fusion(tape, scope, &features, &names)?;
        out.output = synthesis(tape, scope, &self.arch.synthesis, y_f, bicubic)?;
        Ok(out)
    }

    pub fn save_weights(&self, path: &Path) -> Result<()> {
        self.weights.save(path)
    }

    /// Builds `config` and fills it from a weight file, validating every
    /// name and shape.
    pub fn load_weights(config: NetworkConfig, path: &Path) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        net.weights.load(path)?;
        Ok(net)
    }
}

/// Lazily materialized pass inputs.
struct SourceCache<T: Element> {
    image: Tensor<T>,
    layers: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Element> SourceCache<T> {
    fn new(image: &Tensor<T>, cfg: &NetworkConfig, decompose_input: bool) -> Result<Self> {
        let layers = if decompose_input {
            Some(decompose(image, &cfg.decomposition)?)
        } else {
            None
        };
        Ok(SourceCache {
            image: image.clone(),
            layers,
        })
    }

    fn get(&self, s: Source) -> Result<Tensor<T>> {
        let layers = || {
            self.layers
                .as_ref()
                .ok_or_else(|| Error::Config("layout has no base/detail layers".into()))
        };
        Ok(match s {
            Source::Image => self.image.clone(),
            Source::Base => layers()?.0.clone(),
            Source::Detail => layers()?.1.clone(),
            Source::ImageBase => concat_channels(&self.image, &layers()?.0)?,
            Source::ImageDetail => concat_channels(&self.image, &layers()?.1)?,
            Source::All => {
                let (b, d) = layers()?;
                concat_channels(&concat_channels(&self.image, b)?, d)?
            }
        })
    }
}
