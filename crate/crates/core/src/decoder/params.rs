use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rolespace::{hadamard_roles, RoleBasis, DEFAULT_ROLE_COLUMNS};

/// Which top-down arrangement drives the first recurrent unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arch {
    /// Image top-down: the global feature `v` feeds LSTM1.
    Tdbu,
    /// Semantic top-down: summed triplet features feed LSTM1 and the tag
    /// vector gates both hidden states.
    Stdbu,
}

impl Arch {
    pub const ALL: [Arch; 2] = [Arch::Tdbu, Arch::Stdbu];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Tdbu => "tdbu",
            Arch::Stdbu => "stdbu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tdbu" => Ok(Arch::Tdbu),
            "stdbu" => Ok(Arch::Stdbu),
            _ => Err(Error::Argument(alloc::format!(
                "unknown architecture {s:?}; expected one of: tdbu, stdbu"
            ))),
        }
    }
}

/// How the bound triplets are pooled into `ŝ` at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Pooling {
    #[default]
    Attention,
    /// Uniform average, ignoring the decoder state (ablation).
    Mean,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Attention => "attention",
            Pooling::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Pooling::Attention),
            "mean" => Ok(Pooling::Mean),
            _ => Err(Error::Argument(alloc::format!(
                "unknown pooling {s:?}; expected attention or mean"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    /// Triplet slot dimension `d`.
    pub feature: usize,
    /// Role basis order `R`.
    pub roles: usize,
    pub role_columns: [usize; 3],
    /// Global image feature dimension `d_v` (0 when absent).
    pub global: usize,
    /// Semantic tag dimension `d_e`.
    pub tags: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub vocab: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            feature: 32,
            roles: 4,
            role_columns: DEFAULT_ROLE_COLUMNS,
            global: 32,
            tags: 16,
            embed: 32,
            hidden: 64,
            attention: 64,
            vocab: 20,
        }
    }
}

impl Dims {
    /// Length of a flattened encoding, `d · R`.
    pub fn encoding(&self) -> usize {
        self.feature * self.roles
    }

    pub fn top_down(&self, arch: Arch) -> usize {
        match arch {
            Arch::Tdbu => self.global,
            Arch::Stdbu => 3 * self.feature,
        }
    }

    pub fn lstm1_input(&self, arch: Arch) -> usize {
        self.hidden + self.top_down(arch) + self.embed
    }

    pub fn lstm2_input(&self) -> usize {
        self.hidden + self.encoding()
    }

    pub fn basis(&self) -> Result<RoleBasis> {
        hadamard_roles(self.roles)?.with_assignment(self.role_columns)
    }

    pub fn validate(&self, arch: Arch) -> Result<()> {
        let positive = [
            ("feature", self.feature),
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("attention", self.attention),
            ("tags", self.tags),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Argument(alloc::format!("dimension {name} must be positive")));
            }
        }
        if self.vocab < 3 {
            return Err(Error::Argument("vocabulary needs at least one word besides markers".into()));
        }
        if arch == Arch::Tdbu && self.global == 0 {
            return Err(Error::Argument(
                "tdbu needs a global image feature; use stdbu for triplet-only data".into(),
            ));
        }
        self.basis().map(|_| ())
    }
}

/// Every trainable weight of both architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    /// `W_e`, one row per token.
    WordEmbed,
    Lstm1Input,
    Lstm1Recurrent,
    Lstm1Bias,
    Lstm2Input,
    Lstm2Recurrent,
    Lstm2Bias,
    /// `W_a`
    AttnScore,
    /// `W_b`
    AttnEncoding,
    /// `W_c`
    AttnHidden,
    /// `W_hx`
    Output,
    /// `W_S1`
    SemanticGate1,
    /// `W_S2`
    SemanticGate2,
    /// `W_1n`
    Project1,
    /// `W_2n`
    Project2,
}

impl Param {
    pub const ALL: [Param; 15] = [
        Param::WordEmbed,
        Param::Lstm1Input,
        Param::Lstm1Recurrent,
        Param::Lstm1Bias,
        Param::Lstm2Input,
        Param::Lstm2Recurrent,
        Param::Lstm2Bias,
        Param::AttnScore,
        Param::AttnEncoding,
        Param::AttnHidden,
        Param::Output,
        Param::SemanticGate1,
        Param::SemanticGate2,
        Param::Project1,
        Param::Project2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::WordEmbed => "W_e",
            Param::Lstm1Input => "W_L1.input",
            Param::Lstm1Recurrent => "W_L1.recurrent",
            Param::Lstm1Bias => "W_L1.bias",
            Param::Lstm2Input => "W_L2.input",
            Param::Lstm2Recurrent => "W_L2.recurrent",
            Param::Lstm2Bias => "W_L2.bias",
            Param::AttnScore => "W_a",
            Param::AttnEncoding => "W_b",
            Param::AttnHidden => "W_c",
            Param::Output => "W_hx",
            Param::SemanticGate1 => "W_S1",
            Param::SemanticGate2 => "W_S2",
            Param::Project1 => "W_1n",
            Param::Project2 => "W_2n",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn used_by(self, arch: Arch) -> bool {
        !matches!(
            self,
            Param::SemanticGate1 | Param::SemanticGate2 | Param::Project1 | Param::Project2
        ) || arch == Arch::Stdbu
    }

    pub fn shape(self, arch: Arch, dims: &Dims) -> Vec<usize> {
        let h = dims.hidden;
        match self {
            Param::WordEmbed => vec![dims.vocab, dims.embed],
            Param::Lstm1Input => vec![4 * h, dims.lstm1_input(arch)],
            Param::Lstm2Input => vec![4 * h, dims.lstm2_input()],
            Param::Lstm1Recurrent | Param::Lstm2Recurrent => vec![4 * h, h],
            Param::Lstm1Bias | Param::Lstm2Bias => vec![4 * h],
            Param::AttnScore => vec![1, dims.attention],
            Param::AttnEncoding => vec![dims.attention, dims.encoding()],
            Param::AttnHidden => vec![dims.attention, h],
            Param::Output => vec![dims.vocab, h],
            Param::SemanticGate1 | Param::SemanticGate2 => vec![h, dims.tags],
            Param::Project1 | Param::Project2 => vec![h, h],
        }
    }

    /// Parameters of `arch`, in canonical order.
    pub fn for_arch(arch: Arch) -> impl Iterator<Item = Param> {
        Param::ALL.into_iter().filter(move |p| p.used_by(arch))
    }
}

/// Architecture, pooling mode and dimensions; everything but the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub arch: Arch,
    pub pooling: Pooling,
    pub dims: Dims,
}

impl ModelSpec {
    pub fn new(arch: Arch, dims: Dims) -> Self {
        ModelSpec {
            arch,
            pooling: Pooling::Attention,
            dims,
        }
    }

    pub fn with_pooling(mut self, pooling: Pooling) -> Self {
        self.pooling = pooling;
        self
    }

    pub fn params(&self) -> impl Iterator<Item = Param> {
        Param::for_arch(self.arch)
    }
}

/// The weights of one decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    tensors: BTreeMap<Param, Tensor>,
}

impl ModelParams {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.dims.validate(spec.arch)?;
        let tensors = spec
            .params()
            .map(|p| (p, Tensor::zeros(&p.shape(spec.arch, &spec.dims))))
            .collect();
        Ok(ModelParams { spec, tensors })
    }

    /// Seeded initialization: uniform `±1/√fan_in` matrices, unit forget-gate
    /// bias, identity-centred hidden projections and semantic gates whose
    /// product with a typical tag vector starts near one.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = spec.dims.hidden;
        for (&p, t) in params.tensors.iter_mut() {
            let fan_in = *t.shape().last().unwrap_or(&1) as f64;
            let k = 1.0 / libm::sqrt(fan_in);
            let mut uniform = |scale: f64| -> f64 { scale * (2.0 * rng.random::<f64>() - 1.0) };
            match p {
                Param::Lstm1Bias | Param::Lstm2Bias => {
                    for v in &mut t.data_mut()[h..2 * h] {
                        *v = 1.0;
                    }
                }
                Param::WordEmbed => t.data_mut().iter_mut().for_each(|v| *v = uniform(0.1)),
                Param::Project1 | Param::Project2 => {
                    let cols = t.cols();
                    for (i, v) in t.data_mut().iter_mut().enumerate() {
                        let eye = if i / cols == i % cols { 1.0 } else { 0.0 };
                        *v = eye + uniform(0.1 * k);
                    }
                }
                Param::SemanticGate1 | Param::SemanticGate2 => {
                    let base = 2.0 / fan_in;
                    t.data_mut().iter_mut().for_each(|v| *v = base + uniform(0.1 * k));
                }
                _ => t.data_mut().iter_mut().for_each(|v| *v = uniform(k)),
            }
        }
        Ok(params)
    }

    /// Every entry drawn uniformly from `[-scale, scale]`.
    pub fn uniform(spec: ModelSpec, seed: u64, scale: f64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in params.tensors.values_mut() {
            for v in t.data_mut() {
                *v = scale * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(params)
    }

    /// Assembles weights loaded from elsewhere, checking names and shapes.
    pub fn from_tensors(spec: ModelSpec, mut tensors: BTreeMap<Param, Tensor>) -> Result<Self> {
        spec.dims.validate(spec.arch)?;
        let mut out = BTreeMap::new();
        for p in spec.params() {
            let t = tensors
                .remove(&p)
                .ok_or_else(|| Error::Mismatch(alloc::format!("missing parameter {}", p.name())))?;
            let want = p.shape(spec.arch, &spec.dims);
            if t.shape() != want.as_slice() {
                return Err(Error::Mismatch(alloc::format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    p.name(),
                    t.shape(),
                    want
                )));
            }
            out.insert(p, t);
        }
        if let Some(p) = tensors.keys().next() {
            return Err(Error::Mismatch(alloc::format!(
                "parameter {} does not belong to {}",
                p.name(),
                spec.arch.name()
            )));
        }
        Ok(ModelParams { spec, tensors: out })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn arch(&self) -> Arch {
        self.spec.arch
    }

    pub fn dims(&self) -> &Dims {
        &self.spec.dims
    }

    pub fn get(&self, p: Param) -> &Tensor {
        self.tensors
            .get(&p)
            .unwrap_or_else(|| panic!("{} is not a {} parameter", p.name(), self.spec.arch.name()))
    }

    pub fn get_mut(&mut self, p: Param) -> &mut Tensor {
        let arch = self.spec.arch;
        self.tensors
            .get_mut(&p)
            .unwrap_or_else(|| panic!("{} is not a {} parameter", p.name(), arch.name()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, &Tensor)> {
        self.tensors.iter().map(|(&p, t)| (p, t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (Param, &mut Tensor)> {
        self.tensors.iter_mut().map(|(&p, t)| (p, t))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }
}
