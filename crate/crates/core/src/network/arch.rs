use super::config::{InputLayout, NetworkConfig, SmfInput};
use crate::error::Result;

/// Which tensors are stacked to form a pass (or SMF) input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Image,
    Base,
    Detail,
    ImageBase,
    ImageDetail,
    /// Image, base and detail stacked (9 channels).
    All,
}

impl Source {
    pub fn channels(self) -> usize {
        match self {
            Source::Image | Source::Base | Source::Detail => 3,
            Source::ImageBase | Source::ImageDetail => 6,
            Source::All => 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Res,
    ResMod,
    ResSkip,
    ResSkipMod,
}

impl BlockKind {
    pub fn is_modulated(self) -> bool {
        matches!(self, BlockKind::ResMod | BlockKind::ResSkipMod)
    }

    pub fn has_skip(self) -> bool {
        matches!(self, BlockKind::ResSkip | BlockKind::ResSkipMod)
    }

    /// The kind evaluated while modulation is switched off.
    pub fn without_modulation(self) -> BlockKind {
        match self {
            BlockKind::ResMod => BlockKind::Res,
            BlockKind::ResSkipMod => BlockKind::ResSkip,
            k => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    /// Fully qualified, e.g. `base.rmb1`.
    pub name: String,
    pub kind: BlockKind,
    /// Index of the block in the bridge pass whose output is concatenated in.
    pub bridge: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pass {
    pub name: String,
    pub source: Source,
    /// Present when any block of the pass is modulated.
    pub smf_source: Option<Source>,
    pub blocks: Vec<Block>,
    /// Index of the pass that skip connections read from.
    pub bridge_pass: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthOp {
    Relu,
    Conv(String),
    Shuffle(usize),
}

/// One convolution in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
}

impl ConvSpec {
    fn new(name: impl Into<String>, c_in: usize, c_out: usize, k: usize) -> Self {
        ConvSpec {
            name: name.into(),
            c_in,
            c_out,
            k,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn param_count(&self) -> usize {
        self.k * self.k * self.c_in * self.c_out + self.c_out
    }
}

/// Resolved block graph of a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub layout: InputLayout,
    pub passes: Vec<Pass>,
    /// Dimension reduction before the fusion conv; absent for single-pass layouts.
    pub fusion_dr: bool,
    pub fusion_blocks: Vec<Block>,
    pub synthesis: Vec<SynthOp>,
    pub convs: Vec<ConvSpec>,
}

impl Architecture {
    pub fn from_config(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout()?;
        let c = cfg.base_channels;
        let mut convs = Vec::new();

        let pass_defs: Vec<(&str, Source)> = match layout {
            InputLayout::SingleImage => vec![("main", Source::Image)],
            InputLayout::SingleStacked => vec![("main", Source::All)],
            InputLayout::TwoPassLayers => vec![("base", Source::Base), ("detail", Source::Detail)],
            InputLayout::TwoPassStacked => {
                vec![("base", Source::ImageBase), ("detail", Source::ImageDetail)]
            }
            InputLayout::ThreePass => vec![
                ("image", Source::Image),
                ("base", Source::Base),
                ("detail", Source::Detail),
            ],
        };
        let base_idx = pass_defs.iter().position(|(n, _)| *n == "base");

        let mut passes = Vec::new();
        for (name, source) in &pass_defs {
            let is_detail = *name == "detail";
            let skips = is_detail && cfg.use_skips;
            let mut blocks = Vec::new();
            let blk = |label: String, kind, bridge| Block {
                name: format!("{name}.{label}"),
                kind,
                bridge,
            };
            let modk = if cfg.use_modulation {
                BlockKind::ResMod
            } else {
                BlockKind::Res
            };
            if is_detail {
                blocks.push(blk("rb1".into(), BlockKind::Res, None));
                for i in 1..=cfg.m {
                    let (kind, bridge) = match (skips, cfg.use_modulation) {
                        (true, true) => (BlockKind::ResSkipMod, Some(2 * (i - 1))),
                        (true, false) => (BlockKind::ResSkip, Some(2 * (i - 1))),
                        (false, _) => (modk, None),
                    };
                    blocks.push(blk(format!("rsmb{i}"), kind, bridge));
                    if i < cfg.m {
                        let (kind, bridge) = if skips {
                            (BlockKind::ResSkip, Some(2 * (i - 1) + 1))
                        } else {
                            (BlockKind::Res, None)
                        };
                        blocks.push(blk(format!("rsb{i}"), kind, bridge));
                    }
                }
            } else {
                for i in 1..=cfg.m {
                    blocks.push(blk(format!("rb{i}"), BlockKind::Res, None));
                    blocks.push(blk(format!("rmb{i}"), modk, None));
                }
            }
            let smf_source = cfg.use_modulation.then(|| match cfg.smf_input_variant {
                SmfInput::Stacked => *source,
                SmfInput::Image => Source::Image,
                SmfInput::Layer => match *name {
                    "base" => Source::Base,
                    "detail" => Source::Detail,
                    _ => *source,
                },
            });

            convs.push(ConvSpec::new(format!("{name}.conv_in"), source.channels(), c, 3));
            if let Some(s) = smf_source {
                convs.push(ConvSpec::new(format!("{name}.smf.conv1"), s.channels(), c, 3));
                convs.push(ConvSpec::new(format!("{name}.smf.conv2"), c, c, 3));
                convs.push(ConvSpec::new(format!("{name}.smf.conv3"), c, c, 3));
            }
            for b in &blocks {
                if b.kind.has_skip() {
                    convs.push(ConvSpec::new(format!("{}.dr", b.name), 2 * c, c, 1));
                }
                convs.push(ConvSpec::new(format!("{}.conv1", b.name), c, c, 3));
                convs.push(ConvSpec::new(format!("{}.conv2", b.name), c, c, 3));
                if b.kind.is_modulated() {
                    convs.push(ConvSpec::new(format!("{}.mod.conv1", b.name), c, c, 3));
                    convs.push(ConvSpec::new(format!("{}.mod.conv2", b.name), c, c, 3));
                }
            }
            passes.push(Pass {
                name: name.to_string(),
                source: *source,
                smf_source,
                blocks,
                bridge_pass: if skips { base_idx } else { None },
            });
        }

        let fusion_dr = passes.len() > 1;
        if fusion_dr {
            convs.push(ConvSpec::new("fusion.dr", passes.len() * c, c, 1));
        }
        convs.push(ConvSpec::new("fusion.conv", c, c, 3));
        let mut fusion_blocks = Vec::new();
        for i in 1..=cfg.n {
            let b = Block {
                name: format!("fusion.rb{i}"),
                kind: BlockKind::Res,
                bridge: None,
            };
            convs.push(ConvSpec::new(format!("{}.conv1", b.name), c, c, 3));
            convs.push(ConvSpec::new(format!("{}.conv2", b.name), c, c, 3));
            fusion_blocks.push(b);
        }

        let mut synthesis = vec![SynthOp::Relu, SynthOp::Conv("synth.conv1".into()), SynthOp::Relu];
        convs.push(ConvSpec::new("synth.conv1", c, c, 3));
        let stages = if cfg.sf == 4 { 2 } else { 1 };
        for s in 1..=stages {
            let name = format!("synth.up{s}");
            convs.push(ConvSpec::new(&name, c, cfg.pre_shuffle_channels, 3));
            synthesis.push(SynthOp::Conv(name));
            synthesis.push(SynthOp::Relu);
            synthesis.push(SynthOp::Shuffle(2));
        }
        convs.push(ConvSpec::new("synth.out", c, cfg.out_channels, 3));
        synthesis.push(SynthOp::Conv("synth.out".into()));

        Ok(Architecture {
            layout,
            passes,
            fusion_dr,
            fusion_blocks,
            synthesis,
            convs,
        })
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(ConvSpec::param_count).sum()
    }

    pub fn pass(&self, name: &str) -> Option<&Pass> {
        self.passes.iter().find(|p| p.name == name)
    }

    pub fn count_blocks(&self, pass: &str, kind: BlockKind) -> usize {
        self.pass(pass)
            .map_or(0, |p| p.blocks.iter().filter(|b| b.kind == kind).count())
    }

    pub fn dr_layers(&self) -> usize {
        self.convs.iter().filter(|c| c.name.ends_with(".dr")).count()
    }

    pub fn smf_subnets(&self) -> usize {
        self.passes.iter().filter(|p| p.smf_source.is_some()).count()
    }

    /// One line per pass and stage, for logs.
    pub fn describe(&self) -> String {
        let mut s = format!("layout ({})\n", self.layout.letter());
        for p in &self.passes {
            let kinds: Vec<String> = p
                .blocks
                .iter()
                .map(|b| format!("{}:{:?}", b.name.rsplit('.').next().unwrap_or(""), b.kind))
                .collect();
            s.push_str(&format!(
                "  {} [{} ch{}] conv_in {}\n",
                p.name,
                p.source.channels(),
                p.smf_source
                    .map(|m| format!(", smf {} ch", m.channels()))
                    .unwrap_or_default(),
                kinds.join(" ")
            ));
        }
        s.push_str(&format!(
            "  fusion dr={} blocks={}\n  synthesis {:?}\n  params {}\n",
            self.fusion_dr,
            self.fusion_blocks.len(),
            self.synthesis,
            self.param_count()
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let a = Architecture::from_config(&NetworkConfig::full(2)).unwrap();
        assert_eq!(a.count_blocks("base", BlockKind::Res), 3);
        assert_eq!(a.count_blocks("base", BlockKind::ResMod), 3);
        assert_eq!(a.count_blocks("detail", BlockKind::Res), 1);
        assert_eq!(a.count_blocks("detail", BlockKind::ResSkipMod), 3);
        assert_eq!(a.count_blocks("detail", BlockKind::ResSkip), 2);
        assert_eq!(a.fusion_blocks.len(), 10);
        assert_eq!(a.param_count(), 2_502_595);
        let a4 = Architecture::from_config(&NetworkConfig::full(4)).unwrap();
        assert_eq!(a4.param_count(), 2_650_307);
    }

    #[test]
    fn skip_wiring() {
        let a = Architecture::from_config(&NetworkConfig::full(2)).unwrap();
        let base = a.pass("base").unwrap();
        let detail = a.pass("detail").unwrap();
        let names: Vec<&str> = detail.blocks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "detail.rb1",
                "detail.rsmb1",
                "detail.rsb1",
                "detail.rsmb2",
                "detail.rsb2",
                "detail.rsmb3"
            ]
        );
        for b in &detail.blocks[1..] {
            let src = &base.blocks[b.bridge.unwrap()].name;
            let i = &b.name[b.name.len() - 1..];
            if b.name.contains("rsmb") {
                assert_eq!(*src, format!("base.rb{i}"));
            } else {
                assert_eq!(*src, format!("base.rmb{i}"));
            }
        }
    }

    #[test]
    fn toy_variant_widths() {
        let d = Architecture::from_config(&NetworkConfig::toy_variant(2, InputLayout::TwoPassStacked))
            .unwrap();
        assert!(d.passes.iter().all(|p| p.source.channels() == 6));
        let a = Architecture::from_config(&NetworkConfig::toy_variant(2, InputLayout::SingleImage))
            .unwrap();
        assert_eq!(a.passes.len(), 1);
        assert_eq!(a.passes[0].source.channels(), 3);
        let e = Architecture::from_config(&NetworkConfig::toy_variant(2, InputLayout::ThreePass))
            .unwrap();
        assert_eq!(e.passes.len(), 3);
        assert!(e.convs.iter().any(|c| c.name == "fusion.dr" && c.c_in == 192));
    }

    #[test]
    fn ablation_a_has_no_dr_or_smf() {
        let a = Architecture::from_config(&NetworkConfig::toy(2).ablation(false, false, false))
            .unwrap();
        assert_eq!(a.dr_layers(), 0);
        assert_eq!(a.smf_subnets(), 0);
    }

    #[test]
    fn sf4_has_two_shuffles_with_one_conv_between() {
        let a = Architecture::from_config(&NetworkConfig::full(4)).unwrap();
        let idx: Vec<usize> = a
            .synthesis
            .iter()
            .enumerate()
            .filter(|(_, op)| matches!(op, SynthOp::Shuffle(_)))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(idx.len(), 2);
        let convs = a.synthesis[idx[0]..idx[1]]
            .iter()
            .filter(|op| matches!(op, SynthOp::Conv(_)))
            .count();
        assert_eq!(convs, 1);
    }
}
