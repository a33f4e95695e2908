//! Two-stage training: modulation-free pre-training, then joint training.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::binio::{Reader, Writer};
use crate::dataset::{collate, DatasetSpec, PairSample};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::network::{
    is_bias, is_modulation_param, read_section, write_section, InputLayout, Network, NetworkConfig, Scope, SmfInput,
};
use crate::optim::{name_seed, xavier_init, AdamState, Moments};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub lr_weights: f64,
    pub lr_biases: f64,
    pub batch_size: usize,
    /// Training-set PSNR every this many iterations; 0 disables.
    pub eval_every: usize,
    /// Checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage1_iters: 490_000,
            stage2_iters: 660_000,
            lr_weights: 5e-7,
            lr_biases: 5e-8,
            batch_size: 16,
            eval_every: 10_000,
            checkpoint_every: 10_000,
            checkpoint_dir: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_iters(&self) -> usize {
        self.stage1_iters + self.stage2_iters
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_weights > 0.0 && self.lr_biases > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn lr_for(&self, name: &str) -> f64 {
        if is_bias(name) {
            self.lr_biases
        } else {
            self.lr_weights
        }
    }

    pub fn to_kv(&self) -> String {
        let mut s = format!(
            "stage1_iters = {}\nstage2_iters = {}\nlr_weights = {:e}\nlr_biases = {:e}\nbatch_size = {}\n\
             eval_every = {}\ncheckpoint_every = {}\nseed = {}\n",
            self.stage1_iters,
            self.stage2_iters,
            self.lr_weights,
            self.lr_biases,
            self.batch_size,
            self.eval_every,
            self.checkpoint_every,
            self.seed
        );
        if let Some(d) = &self.checkpoint_dir {
            s.push_str(&format!("checkpoint_dir = {}\n", d.display()));
        }
        s
    }

    /// Applies one `key = value` setting; `Ok(false)` for foreign keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = || Error::Config(format!("invalid value `{value}` for `{key}`"));
        let uint = || value.parse::<usize>().map_err(|_| bad());
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "stage1_iters" => self.stage1_iters = uint()?,
            "stage2_iters" => self.stage2_iters = uint()?,
            "lr_weights" => self.lr_weights = float()?,
            "lr_biases" => self.lr_biases = float()?,
            "batch_size" => self.batch_size = uint()?,
            "eval_every" => self.eval_every = uint()?,
            "checkpoint_every" => self.checkpoint_every = uint()?,
            "checkpoint_dir" => self.checkpoint_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Everything a desk-scale overfit run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct DeskPreset {
    pub network: NetworkConfig,
    pub dataset: DatasetSpec,
    pub scenes: usize,
    pub scene_size: usize,
    pub train: TrainConfig,
}

/// Toy network of width 16 on four 32×32 synthetic pairs, 1,000 + 1,000
/// iterations.
pub fn desk_preset(sf: usize) -> DeskPreset {
    DeskPreset {
        network: NetworkConfig::toy(sf).with_width(16),
        dataset: DatasetSpec {
            patch_size: 32,
            patches_per_frame: (4, 4),
            frame_stride: (10, 80),
            sf,
            seed: 0,
        },
        scenes: 1,
        scene_size: 64,
        train: TrainConfig {
            stage1_iters: 1000,
            stage2_iters: 1000,
            lr_weights: 1e-3,
            lr_biases: 1e-4,
            batch_size: 4,
            eval_every: 250,
            checkpoint_every: 0,
            checkpoint_dir: None,
            seed: 0,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Modulation subnets bypassed.
    One,
    Two,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub enum LogEvent {
    Step { iter: usize, stage: Stage, loss: f64 },
    StageBoundary { iter: usize },
    Eval { iter: usize, psnr: f64 },
    Checkpoint { iter: usize, path: PathBuf },
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogEvent::Step { iter, stage, loss } => write!(f, "iter={iter} stage={} loss={loss:e}", stage.number()),
            LogEvent::StageBoundary { iter } => write!(f, "stage_boundary iter={iter}"),
            LogEvent::Eval { iter, psnr } => write!(f, "iter={iter} train_psnr={psnr:.4}"),
            LogEvent::Checkpoint { iter, path } => write!(f, "iter={iter} checkpoint={}", path.display()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub events: Vec<LogEvent>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Step { loss, .. } => Some(*loss),
                _ => None,
            })
            .collect()
    }

    pub fn boundary(&self) -> Option<usize> {
        self.events.iter().find_map(|e| match e {
            LogEvent::StageBoundary { iter } => Some(*iter),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}

const STAGE2_SEED_SALT: u64 = 0x5354_4147_4532;

/// Training state: network, optimizer, iteration counter and log.
pub struct Trainer {
    pub net: Network<f32>,
    pub adam: AdamState<f32>,
    pub cfg: TrainConfig,
    /// Completed iterations.
    iter: usize,
    pub log: TrainLog,
}

impl Trainer {
    pub fn new(net_config: NetworkConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let net = Network::new(net_config, cfg.seed)?;
        let mut t = Trainer {
            net,
            adam: AdamState::default(),
            cfg,
            iter: 0,
            log: TrainLog::default(),
        };
        t.sync_stage()?;
        Ok(t)
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn stage(&self) -> Stage {
        if self.iter < self.cfg.stage1_iters {
            Stage::One
        } else {
            Stage::Two
        }
    }

    pub fn finished(&self) -> bool {
        self.iter >= self.cfg.total_iters()
    }

    fn sync_stage(&mut self) -> Result<()> {
        if self.net.config().use_modulation {
            self.net.set_modulation_active(self.stage() == Stage::Two)?;
        }
        Ok(())
    }

    /// Fresh Glorot weights (zero biases) for every modulation parameter.
    fn reinit_modulation(&mut self) -> Result<()> {
        let names: Vec<String> = self
            .net
            .weights()
            .names()
            .filter(|n| is_modulation_param(n))
            .cloned()
            .collect();
        for n in names {
            let shape = self.net.weights().require(&n)?.shape().to_vec();
            let t = if is_bias(&n) {
                Tensor::zeros(&shape)
            } else {
                xavier_init::<f64>(&shape, name_seed(self.cfg.seed ^ STAGE2_SEED_SALT, &n))?.cast()
            };
            self.net.weights_mut().set(&n, t)?;
        }
        Ok(())
    }

    /// Indices of the batch used at iteration `iter`.
    pub fn batch_indices(&self, iter: usize, len: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(name_seed(self.cfg.seed, &format!("batch{iter}")));
        (0..self.cfg.batch_size).map(|_| rng.gen_range(0..len)).collect()
    }

    /// Forward, MSE, backward and one Adam update on `(input, target)`.
    pub fn train_step(&mut self, input: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
        let (loss, grads) = {
            let mut tape = Tape::new();
            let mut scope = Scope::new(self.net.weights(), true);
            let f = self.net.forward_tape(&mut tape, &mut scope, input)?;
            let tv = tape.constant(target.clone());
            let loss = tape.mse_loss(f.output, tv)?;
            let value = tape.value(loss).data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    iter: self.iter as u64,
                    loss: value,
                    checkpoint: None,
                });
            }
            tape.backward(loss)?;
            let grads: HashMap<String, Tensor<f32>> = scope
                .vars()
                .iter()
                .filter_map(|(n, v)| tape.grad(*v).map(|g| (n.clone(), g.clone())))
                .collect();
            (value, grads)
        };
        let cfg = &self.cfg;
        self.adam
            .step(self.net.weights_mut().map_mut(), &grads, |n| cfg.lr_for(n))?;
        Ok(loss)
    }

    /// Runs one scheduled iteration on `data`, returning the events it produced.
    pub fn step(&mut self, data: &[PairSample]) -> Result<Vec<LogEvent>> {
        if data.is_empty() {
            return Err(Error::Dataset("no training samples".into()));
        }
        let mut events = Vec::new();
        if self.iter == self.cfg.stage1_iters {
            if self.iter > 0 && self.net.config().use_modulation {
                self.reinit_modulation()?;
            }
            self.sync_stage()?;
            events.push(LogEvent::StageBoundary { iter: self.iter });
        }
        let idx = self.batch_indices(self.iter, data.len());
        let batch: Vec<&PairSample> = idx.iter().map(|&i| &data[i]).collect();
        let (x, y) = collate(&batch)?;
        let stage = self.stage();
        let loss = match self.train_step(&x, &y) {
            Ok(l) => l,
            Err(Error::Diverged { iter, loss, .. }) => {
                let checkpoint = match &self.cfg.checkpoint_dir {
                    Some(d) => {
                        let p = d.join(format!("diverged_{iter}.ckpt"));
                        self.save_checkpoint(&p)?;
                        Some(p)
                    }
                    None => None,
                };
                return Err(Error::Diverged { iter, loss, checkpoint });
            }
            Err(e) => return Err(e),
        };
        events.push(LogEvent::Step {
            iter: self.iter,
            stage,
            loss,
        });
        self.iter += 1;
        if self.cfg.eval_every > 0 && self.iter % self.cfg.eval_every == 0 {
            events.push(LogEvent::Eval {
                iter: self.iter,
                psnr: dataset_psnr(&self.net, data)?,
            });
        }
        if self.cfg.checkpoint_every > 0 && self.iter % self.cfg.checkpoint_every == 0 {
            if let Some(d) = &self.cfg.checkpoint_dir {
                let p = d.join(format!("iter_{:08}.ckpt", self.iter));
                self.save_checkpoint(&p)?;
                events.push(LogEvent::Checkpoint { iter: self.iter, path: p });
            }
        }
        self.log.events.extend(events.iter().cloned());
        Ok(events)
    }

    /// Steps until `until` iterations are complete (capped at the schedule end).
    pub fn run_until(&mut self, data: &[PairSample], until: usize, mut on_event: impl FnMut(&LogEvent)) -> Result<()> {
        let end = until.min(self.cfg.total_iters());
        while self.iter < end {
            for e in self.step(data)? {
                on_event(&e);
            }
        }
        Ok(())
    }

    pub fn run(&mut self, data: &[PairSample], on_event: impl FnMut(&LogEvent)) -> Result<()> {
        self.run_until(data, self.cfg.total_iters(), on_event)
    }

    /// Network weights followed by optimizer and schedule state.
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.net.weights().to_bytes());
        let mut entries: Vec<(String, Tensor<f32>)> = Vec::new();
        let moments = self.adam.moments();
        for (name, m) in self.net.weights().names().filter_map(|n| moments.get(n).map(|m| (n, m))) {
            entries.push((format!("adam.m.{name}"), m.first.clone()));
            entries.push((format!("adam.v.{name}"), m.second.clone()));
            entries.push((format!("adam.t.{name}"), u64_tensor(m.step)));
        }
        entries.push(("state.step".into(), u64_tensor(self.adam.step_count())));
        entries.push(("state.iter".into(), u64_tensor(self.iter as u64)));
        entries.push(("state.stage".into(), u64_tensor(self.stage().number() as u64)));
        entries.push(("state.seed".into(), u64_tensor(self.cfg.seed)));
        entries.push(("state.config".into(), config_fingerprint(self.net.config())));
        write_section(&mut w, entries.iter().map(|(n, t)| (n.as_str(), t.clone())));
        w.buf
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Restores a trainer from checkpoint bytes. `net_config` and the seed
    /// in `cfg` must match the ones the checkpoint was written with.
    pub fn resume_bytes(net_config: NetworkConfig, cfg: TrainConfig, bytes: &[u8]) -> Result<Self> {
        cfg.validate()?;
        let mut r = Reader::new("checkpoint", bytes);
        let weights = read_section(&mut r)?;
        let state = read_section(&mut r)?;
        if !r.at_end() {
            return Err(Error::Truncated {
                what: "checkpoint",
                offset: r.offset() as u64,
                detail: "trailing bytes after state section".into(),
            });
        }
        let mut state: IndexMap<String, Tensor<f32>> = state.into_iter().collect();
        let mut take = |k: &str| state.shift_remove(k).ok_or_else(|| Error::MissingTensor(k.to_string()));

        let stored = take("state.config")?;
        let expected = config_fingerprint(&net_config);
        if stored != expected {
            return Err(Error::Config(
                "checkpoint was written for a different network configuration".into(),
            ));
        }
        let seed = tensor_u64(&take("state.seed")?, "state.seed")?;
        if seed != cfg.seed {
            return Err(Error::Config(format!(
                "checkpoint seed {seed} differs from configured seed {}",
                cfg.seed
            )));
        }
        let step = tensor_u64(&take("state.step")?, "state.step")?;
        let iter = tensor_u64(&take("state.iter")?, "state.iter")? as usize;
        let stage = tensor_u64(&take("state.stage")?, "state.stage")?;

        let mut net = Network::<f32>::zeros(net_config)?;
        net.weights_mut().assign(weights)?;

        let mut moments = IndexMap::new();
        let names: Vec<String> = net.weights().names().cloned().collect();
        for n in &names {
            let Ok(first) = take(&format!("adam.m.{n}")) else { continue };
            let second = take(&format!("adam.v.{n}"))?;
            let t = take(&format!("adam.t.{n}"))?;
            let shape = net.weights().require(n)?.shape();
            for (k, m) in [("m", &first), ("v", &second)] {
                if m.shape() != shape {
                    return Err(Error::TensorShape {
                        name: format!("adam.{k}.{n}"),
                        expected: shape.to_vec(),
                        found: m.shape().to_vec(),
                    });
                }
            }
            let step = tensor_u64(&t, n)?;
            moments.insert(n.clone(), Moments { first, second, step });
        }
        if let Some(extra) = state.keys().next() {
            return Err(Error::UnknownTensor(extra.clone()));
        }
        let mut trainer = Trainer {
            net,
            adam: AdamState::from_parts(step, moments),
            cfg,
            iter,
            log: TrainLog::default(),
        };
        trainer.sync_stage()?;
        if trainer.stage().number() as u64 != stage {
            return Err(Error::Config(format!(
                "checkpoint at iteration {iter} is in stage {stage}, but the schedule puts it in stage {}",
                trainer.stage().number()
            )));
        }
        Ok(trainer)
    }

    pub fn resume(net_config: NetworkConfig, cfg: TrainConfig, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::resume_bytes(net_config, cfg, &bytes)
    }
}

/// Integers are stored as four 16-bit limbs so f32 holds them exactly.
fn u64_tensor(v: u64) -> Tensor<f32> {
    Tensor::from_fn(&[4], |i| ((v >> (16 * i)) & 0xffff) as f32)
}

fn tensor_u64(t: &Tensor<f32>, name: &str) -> Result<u64> {
    if t.shape() != [4] || t.data().iter().any(|v| v.fract() != 0.0 || !(0.0..65536.0).contains(v)) {
        return Err(Error::TensorShape {
            name: name.to_string(),
            expected: vec![4],
            found: t.shape().to_vec(),
        });
    }
    Ok(t.data()
        .iter()
        .enumerate()
        .fold(0, |acc, (i, v)| acc | ((*v as u64) << (16 * i))))
}

fn config_fingerprint(c: &NetworkConfig) -> Tensor<f32> {
    let layout = c
        .toy_input_variant
        .map_or(0.0, |l| 1.0 + InputLayout::all().iter().position(|x| *x == l).unwrap() as f32);
    let smf = match c.smf_input_variant {
        SmfInput::Image => 0.0,
        SmfInput::Layer => 1.0,
        SmfInput::Stacked => 2.0,
    };
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    let v = vec![
        c.sf as f32,
        c.m as f32,
        c.n as f32,
        c.base_channels as f32,
        c.pre_shuffle_channels as f32,
        c.out_channels as f32,
        b(c.use_gf_decomposition),
        b(c.use_skips),
        b(c.use_modulation),
        b(c.toy),
        layout,
        smf,
        c.decomposition.radius as f32,
        c.decomposition.eps as f32,
        c.decomposition.div_floor as f32,
    ];
    Tensor::from_vec(&[v.len()], v).expect("length matches")
}

/// PSNR (peak 1) of the network over every sample, pooled into one MSE.
pub fn dataset_psnr(net: &Network<f32>, data: &[PairSample]) -> Result<f64> {
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    for chunk in data.chunks(8) {
        let refs: Vec<&PairSample> = chunk.iter().collect();
        let (x, y) = collate(&refs)?;
        let out = net.forward(&x)?;
        pred.extend(out.data().iter().map(|&v| v as f64));
        gt.extend(y.data().iter().map(|&v| v as f64));
    }
    psnr(&pred, &gt, 1.0)
}

/// Builds a trainer and runs the whole schedule.
pub fn train(
    net_config: NetworkConfig,
    data: &[PairSample],
    cfg: TrainConfig,
    on_event: impl FnMut(&LogEvent),
) -> Result<(Network<f32>, TrainLog)> {
    let mut t = Trainer::new(net_config, cfg)?;
    t.run(data, on_event)?;
    Ok((t.net, t.log))
}
