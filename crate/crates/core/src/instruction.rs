//! Versioned drag instruction: backend, point pairs, optional mask, method
//! and config overrides. This is the on-disk JSON format and the body of
//! session-creation requests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{
    AnyBackend, BlobField, BlobGenConfig, BlobParams, DirectField, RampBackground,
};
use crate::drag::{DragConfig, BLOB_LEARNING_RATE, DIRECT_LEARNING_RATE};
use crate::error::{DragError, Result};
use crate::field::{FeatureMap, LatentCode, Mask, Point2};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    FreeDrag,
    PointDrag,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FreeDrag => "freedrag",
            Method::PointDrag => "pointdrag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub handle: [f64; 2],
    pub target: [f64; 2],
}

fn d64() -> usize {
    64
}

fn d4() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobBackendParams {
    #[serde(default = "d64")]
    pub height: usize,
    #[serde(default = "d64")]
    pub width: usize,
    #[serde(default = "d4")]
    pub channels: usize,
    /// Explicit initial blobs; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blobs: Option<Vec<BlobParams>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<RampBackground>,
}

impl Default for BlobBackendParams {
    fn default() -> Self {
        BlobBackendParams {
            height: 64,
            width: 64,
            channels: 4,
            blobs: None,
            blob_count: None,
            shape_gain: None,
            feature_scale: None,
            texture_radius: None,
            channel_weights: None,
            background: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectInit {
    Zeros,
    /// Uniform noise in `[0, amplitude)`.
    Noise {
        amplitude: f64,
    },
    /// Rendered random blobs, frozen into the field.
    Blobs {
        count: usize,
    },
}

impl Default for DirectInit {
    fn default() -> Self {
        DirectInit::Blobs { count: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectBackendParams {
    #[serde(default = "d64")]
    pub height: usize,
    #[serde(default = "d64")]
    pub width: usize,
    #[serde(default = "d4")]
    pub channels: usize,
    #[serde(default)]
    pub init: DirectInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendSpec {
    Blob {
        #[serde(default)]
        params: BlobBackendParams,
        #[serde(default)]
        seed: u64,
    },
    Direct {
        params: DirectBackendParams,
        #[serde(default)]
        seed: u64,
    },
}

impl BackendSpec {
    pub fn grid(&self) -> (usize, usize, usize) {
        match self {
            BackendSpec::Blob { params, .. } => (params.height, params.width, params.channels),
            BackendSpec::Direct { params, .. } => (params.height, params.width, params.channels),
        }
    }

    pub fn is_blob(&self) -> bool {
        matches!(self, BackendSpec::Blob { .. })
    }

    fn blob_config(params: &BlobBackendParams, seed: u64) -> BlobGenConfig {
        let count = params
            .blobs
            .as_ref()
            .map(|b| b.len())
            .or(params.blob_count)
            .unwrap_or(1);
        let mut cfg = BlobGenConfig::desk(count, seed).with_grid(
            params.height,
            params.width,
            params.channels,
        );
        if let Some(g) = params.shape_gain {
            cfg.shape_gain = g;
        }
        if let Some(k) = params.feature_scale {
            cfg.feature_scale = k;
        }
        if let Some(t) = params.texture_radius {
            cfg.texture_radius = t;
        }
        cfg.channel_weights = params.channel_weights.clone();
        cfg.background = params.background.clone();
        cfg
    }

    pub fn build<S: Scalar>(&self) -> Result<AnyBackend<S>> {
        Ok(match self {
            BackendSpec::Blob { params, seed } => {
                AnyBackend::Blob(BlobField::new(Self::blob_config(params, *seed))?)
            }
            BackendSpec::Direct { params, .. } => AnyBackend::Direct(DirectField::new(
                params.height,
                params.width,
                params.channels,
            )?),
        })
    }

    /// The latent the instruction starts from.
    pub fn initial_latent<S: Scalar>(&self) -> Result<LatentCode<S>> {
        match self {
            BackendSpec::Blob { params, seed } => {
                let cfg = Self::blob_config(params, *seed);
                let blobs = match &params.blobs {
                    Some(b) => b.clone(),
                    None => cfg.random_blobs(seed.wrapping_add(1)),
                };
                BlobField::<S>::new(cfg)?.encode(&blobs)
            }
            BackendSpec::Direct { params, seed } => {
                let (h, w, c) = (params.height, params.width, params.channels);
                let data: Vec<S> = match &params.init {
                    DirectInit::Zeros => vec![S::zero(); h * w * c],
                    DirectInit::Noise { amplitude } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                        (0..h * w * c)
                            .map(|_| S::lit(rng.gen::<f64>() * amplitude))
                            .collect()
                    }
                    DirectInit::Blobs { count } => {
                        let cfg = BlobGenConfig::desk(*count, *seed).with_grid(h, w, c);
                        let field = BlobField::<S>::new(cfg.clone())?;
                        let latent = field.encode(&cfg.random_blobs(seed.wrapping_add(1)))?;
                        use crate::backend::GeneratorBackend;
                        field.generate(&latent)?.into_vec()
                    }
                };
                Ok(LatentCode(data))
            }
        }
    }

    pub fn default_learning_rate(&self) -> f64 {
        match self {
            BackendSpec::Blob { .. } => BLOB_LEARNING_RATE,
            BackendSpec::Direct { .. } => DIRECT_LEARNING_RATE,
        }
    }
}

/// Editable-region mask as runs of `true` cells: `[row, start, length]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub runs: Vec<[usize; 3]>,
}

impl RleMask {
    pub fn to_mask(&self) -> Result<Mask> {
        let mut m = Mask::filled(self.height, self.width, false);
        for &[row, start, len] in &self.runs {
            if row >= self.height || start + len > self.width {
                return Err(DragError::contract(format!(
                    "mask run [{row}, {start}, {len}] exceeds {}x{}",
                    self.height, self.width
                )));
            }
            for x in start..start + len {
                m.set(row, x, true);
            }
        }
        Ok(m)
    }

    pub fn from_mask(mask: &Mask) -> Self {
        let mut runs = Vec::new();
        for y in 0..mask.height() {
            let mut x = 0;
            while x < mask.width() {
                if mask.editable(y, x) {
                    let start = x;
                    while x < mask.width() && mask.editable(y, x) {
                        x += 1;
                    }
                    runs.push([y, start, x - start]);
                } else {
                    x += 1;
                }
            }
        }
        RleMask {
            height: mask.height(),
            width: mask.width(),
            runs,
        }
    }
}

/// Per-instruction overrides of the engine defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_drag: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminate_dist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_template: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtracking: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_step: Option<f64>,
}

impl ConfigOverrides {
    /// `other` wins wherever it sets a field.
    pub fn merged(&self, other: &ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            l,
            d,
            r,
            gamma,
            lambda_cap,
            steps_per_drag,
            max_total_steps,
            learning_rate,
            terminate_dist,
            update_template,
            backtracking,
            search_radius,
            motion_step
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub schema_version: u32,
    pub backend: BackendSpec,
    pub points: Vec<PointPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RleMask>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub config: ConfigOverrides,
}

impl Instruction {
    pub fn new(backend: BackendSpec, points: Vec<PointPair>) -> Self {
        Instruction {
            schema_version: SCHEMA_VERSION,
            backend,
            points,
            mask: None,
            method: Method::FreeDrag,
            config: ConfigOverrides::default(),
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DragError::contract(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.points.is_empty() {
            return Err(DragError::contract("instruction has no points"));
        }
        let (h, w, _) = self.backend.grid();
        let inside = |p: [f64; 2]| {
            p[0].is_finite()
                && p[1].is_finite()
                && p[0] >= 0.0
                && p[1] >= 0.0
                && p[0] <= (w - 1) as f64
                && p[1] <= (h - 1) as f64
        };
        for (i, pp) in self.points.iter().enumerate() {
            if !inside(pp.handle) || !inside(pp.target) {
                return Err(DragError::contract(format!(
                    "point {i} lies outside the {w}x{h} grid"
                )));
            }
        }
        if let Some(m) = &self.mask {
            if (m.height, m.width) != (h, w) {
                return Err(DragError::contract(
                    "mask shape does not match the backend grid",
                ));
            }
            m.to_mask()?;
        }
        Ok(())
    }

    pub fn pairs<S: Scalar>(&self) -> Vec<(Point2<S>, Point2<S>)> {
        self.points
            .iter()
            .map(|p| {
                (
                    Point2::from_f64(p.handle[0], p.handle[1]),
                    Point2::from_f64(p.target[0], p.target[1]),
                )
            })
            .collect()
    }

    pub fn mask(&self) -> Result<Option<Mask>> {
        self.mask.as_ref().map(|m| m.to_mask()).transpose()
    }

    pub fn drag_config<S: Scalar>(&self, extra: &ConfigOverrides) -> Result<DragConfig<S>> {
        let o = self.config.merged(extra);
        let mut c =
            DragConfig::<S>::preset_a().with_learning_rate(self.backend.default_learning_rate());
        if let Some(v) = o.l {
            c.l = S::lit(v);
        }
        if let Some(v) = o.d {
            c.d = S::lit(v);
        }
        if let Some(v) = o.r {
            c.r = v;
        }
        if let Some(v) = o.gamma {
            c.gamma = S::lit(v);
        }
        if let Some(v) = o.lambda_cap {
            c.lambda_cap = S::lit(v);
        }
        if let Some(v) = o.steps_per_drag {
            c.steps_per_drag = v;
        }
        if let Some(v) = o.max_total_steps {
            c.max_total_steps = v;
        }
        if let Some(v) = o.learning_rate {
            c.learning_rate = S::lit(v);
        }
        if let Some(v) = o.terminate_dist {
            c.terminate_dist = S::lit(v);
        }
        if let Some(v) = o.update_template {
            c.update_template = v;
        }
        if let Some(v) = o.backtracking {
            c.backtracking = v;
        }
        c.validate()?;
        Ok(c)
    }

    /// Initial feature map of the instruction's backend.
    pub fn initial_features<S: Scalar>(&self) -> Result<FeatureMap<S>> {
        use crate::backend::GeneratorBackend;
        self.backend
            .build::<S>()?
            .generate(&self.backend.initial_latent()?)
    }
}
