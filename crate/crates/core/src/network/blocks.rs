//! Building blocks evaluated on a [`Tape`]. Every function reads its
//! parameters from a [`Scope`] under the given block name.

use std::collections::HashMap;

use super::arch::SynthOp;
use super::weights::WeightStore;
use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Element;

/// Lazily registers store tensors on a tape, once per name.
pub struct Scope<'a, T: Element> {
    store: &'a WeightStore<T>,
    vars: HashMap<String, Var>,
    trainable: bool,
}

impl<'a, T: Element> Scope<'a, T> {
    /// `trainable` selects differentiable leaves over constants.
    pub fn new(store: &'a WeightStore<T>, trainable: bool) -> Self {
        Scope {
            store,
            vars: HashMap::new(),
            trainable,
        }
    }

    pub fn var(&mut self, tape: &mut Tape<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.vars.get(name) {
            return Ok(v);
        }
        let t = self.store.require(name)?.clone();
        let v = if self.trainable {
            tape.param(t)
        } else {
            tape.constant(t)
        };
        self.vars.insert(name.to_string(), v);
        Ok(v)
    }

    /// Uses `var` for `name` instead of a fresh leaf from the store.
    pub fn bind(&mut self, name: &str, var: Var) {
        self.vars.insert(name.to_string(), var);
    }

    /// Parameters touched so far, in no particular order.
    pub fn vars(&self) -> &HashMap<String, Var> {
        &self.vars
    }

    pub fn conv(&mut self, tape: &mut Tape<T>, x: Var, name: &str) -> Result<Var> {
        let w = self.var(tape, &format!("{name}.weight"))?;
        let b = self.var(tape, &format!("{name}.bias"))?;
        tape.conv2d(x, w, b)
    }
}

/// `Conv(RL(Conv(RL(x))))`, the residual branch shared by all block kinds.
pub fn residual_branch<T: Element>(tape: &mut Tape<T>, s: &mut Scope<T>, name: &str, x: Var) -> Result<Var> {
    let r = tape.relu(x)?;
    let c = s.conv(tape, r, &format!("{name}.conv1"))?;
    let r = tape.relu(c)?;
    s.conv(tape, r, &format!("{name}.conv2"))
}

/// Residual branch behind a concat with a bridged feature and a 1×1
/// reduction back to the block width.
pub fn skip_branch<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    name: &str,
    x: Var,
    bridge: Var,
) -> Result<Var> {
    let cat = tape.concat_channels(x, bridge)?;
    let r = tape.relu(cat)?;
    let d = s.conv(tape, r, &format!("{name}.dr"))?;
    let c = s.conv(tape, d, &format!("{name}.conv1"))?;
    let r = tape.relu(c)?;
    s.conv(tape, r, &format!("{name}.conv2"))
}

/// Per-block modulation head `Conv(RL(Conv(smf)))`.
pub fn modulation_head<T: Element>(tape: &mut Tape<T>, s: &mut Scope<T>, name: &str, smf: Var) -> Result<Var> {
    let c = s.conv(tape, smf, &format!("{name}.mod.conv1"))?;
    let r = tape.relu(c)?;
    s.conv(tape, r, &format!("{name}.mod.conv2"))
}

/// Shared modulation features: three convs, each followed by ReLU.
pub fn compute_smf<T: Element>(tape: &mut Tape<T>, s: &mut Scope<T>, pass: &str, input: Var) -> Result<Var> {
    let mut h = input;
    for i in 1..=3 {
        h = s.conv(tape, h, &format!("{pass}.smf.conv{i}"))?;
        h = tape.relu(h)?;
    }
    Ok(h)
}

pub fn res_block<T: Element>(tape: &mut Tape<T>, s: &mut Scope<T>, name: &str, x: Var) -> Result<Var> {
    let b = residual_branch(tape, s, name, x)?;
    tape.add(b, x)
}

/// Returns the block output and the modulation map it applied.
pub fn res_mod_block<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    name: &str,
    x: Var,
    smf: Var,
) -> Result<(Var, Var)> {
    let b = residual_branch(tape, s, name, x)?;
    let m = modulation_head(tape, s, name, smf)?;
    let bm = tape.mul(b, m)?;
    Ok((tape.add(bm, x)?, m))
}

pub fn res_skip_block<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    name: &str,
    x: Var,
    bridge: Var,
) -> Result<Var> {
    let b = skip_branch(tape, s, name, x, bridge)?;
    tape.add(b, x)
}

pub fn res_skip_mod_block<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    name: &str,
    x: Var,
    bridge: Var,
    smf: Var,
) -> Result<(Var, Var)> {
    let b = skip_branch(tape, s, name, x, bridge)?;
    let m = modulation_head(tape, s, name, smf)?;
    let bm = tape.mul(b, m)?;
    Ok((tape.add(bm, x)?, m))
}

/// Merges the pass features and runs the fusion ResBlocks.
///
/// With more than one pass the features are concatenated, rectified and
/// reduced by `fusion.dr`; a single pass goes through ReLU only.
pub fn fusion<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    features: &[Var],
    blocks: &[String],
) -> Result<Var> {
    let mut h = features[0];
    for &f in &features[1..] {
        h = tape.concat_channels(h, f)?;
    }
    h = tape.relu(h)?;
    if features.len() > 1 {
        h = s.conv(tape, h, "fusion.dr")?;
    }
    h = s.conv(tape, h, "fusion.conv")?;
    for name in blocks {
        h = res_block(tape, s, name, h)?;
    }
    Ok(h)
}

/// Upsampling head plus the bicubic global residual.
pub fn synthesis<T: Element>(
    tape: &mut Tape<T>,
    s: &mut Scope<T>,
    ops: &[SynthOp],
    y_f: Var,
    bicubic: Var,
) -> Result<Var> {
    let mut h = y_f;
    for op in ops {
        h = match op {
            SynthOp::Relu => tape.relu(h)?,
            SynthOp::Conv(name) => s.conv(tape, h, name)?,
            SynthOp::Shuffle(r) => tape.pixel_shuffle(h, *r)?,
        };
    }
    tape.add(h, bicubic)
}
