use crate::decomposition::DecompositionParams;
use crate::error::{Error, Result};

/// How the input image and its layers are routed into feature-extraction
/// passes (the five input-decomposition variants).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InputLayout {
    /// (a) one pass, image only.
    SingleImage,
    /// (b) one pass, image, base and detail stacked.
    SingleStacked,
    /// (c) base and detail passes without the image.
    TwoPassLayers,
    /// (d) base and detail passes, each stacked with the image.
    TwoPassStacked,
    /// (e) separate image, base and detail passes.
    ThreePass,
}

impl InputLayout {
    pub fn from_letter(s: &str) -> Option<Self> {
        Some(match s {
            "a" => InputLayout::SingleImage,
            "b" => InputLayout::SingleStacked,
            "c" => InputLayout::TwoPassLayers,
            "d" => InputLayout::TwoPassStacked,
            "e" => InputLayout::ThreePass,
            _ => return None,
        })
    }

    pub fn letter(self) -> &'static str {
        match self {
            InputLayout::SingleImage => "a",
            InputLayout::SingleStacked => "b",
            InputLayout::TwoPassLayers => "c",
            InputLayout::TwoPassStacked => "d",
            InputLayout::ThreePass => "e",
        }
    }

    pub fn all() -> [InputLayout; 5] {
        [
            InputLayout::SingleImage,
            InputLayout::SingleStacked,
            InputLayout::TwoPassLayers,
            InputLayout::TwoPassStacked,
            InputLayout::ThreePass,
        ]
    }

    pub fn uses_decomposition(self) -> bool {
        self != InputLayout::SingleImage
    }

    pub fn has_base_and_detail(self) -> bool {
        matches!(
            self,
            InputLayout::TwoPassLayers | InputLayout::TwoPassStacked | InputLayout::ThreePass
        )
    }
}

/// What the shared modulation features of a pass are computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmfInput {
    /// The LR image alone.
    Image,
    /// The pass's own layer (base or detail) alone.
    Layer,
    /// The layer stacked with the image.
    Stacked,
}

impl SmfInput {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "image" => SmfInput::Image,
            "layer" => SmfInput::Layer,
            "stacked" => SmfInput::Stacked,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SmfInput::Image => "image",
            SmfInput::Layer => "layer",
            SmfInput::Stacked => "stacked",
        }
    }
}

/// Declarative architecture description.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub sf: usize,
    /// Blocks per feature-extraction pass.
    pub m: usize,
    /// Fusion ResBlocks.
    pub n: usize,
    pub base_channels: usize,
    pub pre_shuffle_channels: usize,
    pub out_channels: usize,
    pub use_gf_decomposition: bool,
    pub use_skips: bool,
    pub use_modulation: bool,
    pub toy: bool,
    pub toy_input_variant: Option<InputLayout>,
    pub smf_input_variant: SmfInput,
    pub decomposition: DecompositionParams,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full(2)
    }
}

impl NetworkConfig {
    /// Full network: m = 3, n = 10, 64 feature channels.
    pub fn full(sf: usize) -> Self {
        NetworkConfig {
            sf,
            m: 3,
            n: 10,
            base_channels: 64,
            pre_shuffle_channels: 256,
            out_channels: 3,
            use_gf_decomposition: true,
            use_skips: true,
            use_modulation: true,
            toy: false,
            toy_input_variant: None,
            smf_input_variant: SmfInput::Stacked,
            decomposition: DecompositionParams::default(),
        }
    }

    /// Toy network: one ResBlock and one modulated block per pass, one
    /// fusion ResBlock, stacked two-pass input.
    pub fn toy(sf: usize) -> Self {
        NetworkConfig {
            m: 1,
            n: 1,
            toy: true,
            toy_input_variant: Some(InputLayout::TwoPassStacked),
            ..Self::full(sf)
        }
    }

    /// Sets the feature width, keeping the ×4 pre-shuffle expansion.
    pub fn with_width(mut self, channels: usize) -> Self {
        self.base_channels = channels;
        self.pre_shuffle_channels = 4 * channels;
        self
    }

    /// Toy network with the given input-decomposition variant; the
    /// guided-filter flag follows the variant.
    pub fn toy_variant(sf: usize, layout: InputLayout) -> Self {
        let mut c = Self::toy(sf);
        c.toy_input_variant = Some(layout);
        c.use_gf_decomposition = layout.uses_decomposition();
        c.use_skips = layout.has_base_and_detail();
        c.use_modulation = false;
        c
    }

    /// Component ablation: guided-filter decomposition, skips, modulation.
    pub fn ablation(mut self, gf: bool, skips: bool, modulation: bool) -> Self {
        self.use_gf_decomposition = gf;
        self.use_skips = skips;
        self.use_modulation = modulation;
        if self.toy {
            self.toy_input_variant = Some(if gf {
                InputLayout::TwoPassStacked
            } else {
                InputLayout::SingleImage
            });
        }
        self
    }

    /// Resolved pass layout.
    pub fn layout(&self) -> Result<InputLayout> {
        let layout = match (self.toy, self.toy_input_variant) {
            (false, Some(_)) => {
                return Err(Error::Config(
                    "input-decomposition variants are only valid for the toy network".into(),
                ))
            }
            (true, Some(l)) => l,
            (_, None) => {
                if self.use_gf_decomposition {
                    InputLayout::TwoPassStacked
                } else {
                    InputLayout::SingleImage
                }
            }
        };
        if layout.uses_decomposition() != self.use_gf_decomposition {
            return Err(Error::Config(format!(
                "variant ({}) {} guided-filter decomposition but use_gf_decomposition = {}",
                layout.letter(),
                if layout.uses_decomposition() { "needs" } else { "excludes" },
                self.use_gf_decomposition
            )));
        }
        if self.use_skips && !layout.has_base_and_detail() {
            return Err(Error::Config(format!(
                "skip connections need separate base and detail passes; variant ({}) has none",
                layout.letter()
            )));
        }
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sf != 2 && self.sf != 4 {
            return Err(Error::Config(format!("sf must be 2 or 4, got {}", self.sf)));
        }
        if self.m < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.base_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.pre_shuffle_channels != 4 * self.base_channels {
            return Err(Error::Config(format!(
                "pre_shuffle_channels ({}) must equal 4 × base_channels ({}) for a ×2 shuffle",
                self.pre_shuffle_channels, self.base_channels
            )));
        }
        self.decomposition.validate()?;
        self.layout().map(|_| ())
    }

    /// `key = value` lines understood by [`NetworkConfig::set`].
    pub fn to_kv(&self) -> String {
        let d = &self.decomposition;
        let mut s = format!(
            "sf = {}\nm = {}\nn = {}\nbase_channels = {}\npre_shuffle_channels = {}\nout_channels = {}\n\
             use_gf_decomposition = {}\nuse_skips = {}\nuse_modulation = {}\ntoy = {}\n\
             smf_input_variant = {}\ngf_radius = {}\ngf_eps = {}\ndiv_floor = {}\n",
            self.sf,
            self.m,
            self.n,
            self.base_channels,
            self.pre_shuffle_channels,
            self.out_channels,
            self.use_gf_decomposition,
            self.use_skips,
            self.use_modulation,
            self.toy,
            self.smf_input_variant.as_str(),
            d.radius,
            d.eps,
            d.div_floor,
        );
        if let Some(l) = self.toy_input_variant {
            s.push_str(&format!("toy_input_variant = {}\n", l.letter()));
        }
        s
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys this
    /// type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = || Error::Config(format!("invalid value `{value}` for `{key}`"));
        let uint = || value.parse::<usize>().map_err(|_| bad());
        let boolean = || value.parse::<bool>().map_err(|_| bad());
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "sf" => self.sf = uint()?,
            "m" => self.m = uint()?,
            "n" => self.n = uint()?,
            "base_channels" => self.base_channels = uint()?,
            "pre_shuffle_channels" => self.pre_shuffle_channels = uint()?,
            "out_channels" => self.out_channels = uint()?,
            "use_gf_decomposition" => self.use_gf_decomposition = boolean()?,
            "use_skips" => self.use_skips = boolean()?,
            "use_modulation" => self.use_modulation = boolean()?,
            "toy" => self.toy = boolean()?,
            "toy_input_variant" => {
                self.toy_input_variant = match value {
                    "none" => None,
                    v => Some(InputLayout::from_letter(v).ok_or_else(bad)?),
                }
            }
            "smf_input_variant" => self.smf_input_variant = SmfInput::parse(value).ok_or_else(bad)?,
            "gf_radius" => self.decomposition.radius = uint()?,
            "gf_eps" => self.decomposition.eps = float()?,
            "div_floor" => self.decomposition.div_floor = float()?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NetworkConfig::full(2).validate().unwrap();
        NetworkConfig::full(4).validate().unwrap();
        NetworkConfig::toy(2).validate().unwrap();
        for l in InputLayout::all() {
            NetworkConfig::toy_variant(2, l).validate().unwrap();
        }
    }

    #[test]
    fn invalid_combinations() {
        let mut c = NetworkConfig::full(3);
        assert!(c.validate().is_err());
        c.sf = 2;
        c.toy_input_variant = Some(InputLayout::SingleImage);
        assert!(c.validate().is_err(), "variants need toy = true");
        let mut t = NetworkConfig::toy(2);
        t.toy_input_variant = Some(InputLayout::SingleImage);
        assert!(t.validate().is_err(), "variant (a) with GF enabled");
        let t = NetworkConfig::full(2).ablation(false, true, false);
        assert!(t.validate().is_err(), "skips without decomposition");
    }

    #[test]
    fn kv_roundtrip() {
        let mut c = NetworkConfig::toy(4).with_width(8);
        c.smf_input_variant = SmfInput::Layer;
        let mut d = NetworkConfig::default();
        for line in c.to_kv().lines() {
            let (k, v) = line.split_once('=').unwrap();
            assert!(d.set(k.trim(), v.trim()).unwrap());
        }
        assert_eq!(c, d);
        assert!(!d.set("lr_weights", "1").unwrap());
        assert!(d.set("sf", "two").is_err());
    }
}
