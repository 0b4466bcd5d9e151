//! Differentiable generators mapping a latent code to a feature map.
//!
//! Every backend exposes an analytic vector-Jacobian product so the drag
//! loop can pull feature-space cotangents back to the latent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::field::{FeatureMap, LatentCode, Point2};
use crate::scalar::Scalar;

/// Generator contract: deterministic `generate` plus its exact reverse-mode
/// derivative.
pub trait GeneratorBackend<S: Scalar>: Send + Sync {
    fn latent_len(&self) -> usize;

    /// `(height, width, channels)` of every generated map.
    fn output_shape(&self) -> (usize, usize, usize);

    fn generate(&self, w: &LatentCode<S>) -> Result<FeatureMap<S>>;

    /// Gradient of `⟨cotangent, generate(w)⟩` with respect to `w`.
    fn vjp(&self, w: &LatentCode<S>, cotangent: &FeatureMap<S>) -> Result<Vec<S>>;

    /// Positions of the objects the latent encodes, when the backend has any.
    fn object_centers(&self, _w: &LatentCode<S>) -> Result<Vec<Point2<S>>> {
        Err(DragError::Unsupported(
            "object_centers is only defined for the blob backend".into(),
        ))
    }

    fn check_latent(&self, w: &LatentCode<S>) -> Result<()> {
        if w.len() != self.latent_len() {
            return Err(DragError::contract(format!(
                "latent length {} does not match backend latent length {}",
                w.len(),
                self.latent_len()
            )));
        }
        Ok(())
    }

    fn check_cotangent(&self, u: &FeatureMap<S>) -> Result<()> {
        if u.shape() != self.output_shape() {
            return Err(DragError::contract(format!(
                "cotangent shape {:?} does not match output shape {:?}",
                u.shape(),
                self.output_shape()
            )));
        }
        Ok(())
    }
}

/// The latent is the feature map itself, flattened (y, x, c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectField {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl DirectField {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(DragError::contract("direct field dimensions must be >= 1"));
        }
        Ok(DirectField {
            height,
            width,
            channels,
        })
    }

    pub fn encode<S: Scalar>(&self, f: &FeatureMap<S>) -> Result<LatentCode<S>> {
        if f.shape() != (self.height, self.width, self.channels) {
            return Err(DragError::contract("field shape does not match backend"));
        }
        Ok(LatentCode(f.as_slice().to_vec()))
    }
}

impl<S: Scalar> GeneratorBackend<S> for DirectField {
    fn latent_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    fn output_shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn generate(&self, w: &LatentCode<S>) -> Result<FeatureMap<S>> {
        self.check_latent(w)?;
        FeatureMap::from_vec(self.height, self.width, self.channels, w.0.clone())
    }

    fn vjp(&self, w: &LatentCode<S>, cotangent: &FeatureMap<S>) -> Result<Vec<S>> {
        self.check_latent(w)?;
        self.check_cotangent(cotangent)?;
        Ok(cotangent.as_slice().to_vec())
    }
}

/// Number of latent slots per blob: `(cx, cy, amplitude, log_width)`.
pub const BLOB_SLOTS: usize = 4;

/// Physical parameters of one Gaussian blob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    pub center: [f64; 2],
    pub amplitude: f64,
    /// Standard deviation in pixels, > 0.
    pub width: f64,
}

/// Static, non-latent additive background. A linear ramp per channel:
/// `offset[c] + slope[c] · (gx·x + gy·y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampBackground {
    pub direction: [f64; 2],
    pub slope: Vec<f64>,
    #[serde(default)]
    pub offset: Vec<f64>,
}

fn default_shape_gain() -> f64 {
    0.01
}

fn default_feature_scale() -> f64 {
    0.07
}

fn default_texture_radius() -> f64 {
    1.0
}

/// Construction parameters of a [`BlobField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobGenConfig {
    pub blob_count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Seeds the per-blob channel weights when `channel_weights` is absent.
    pub seed: u64,
    /// Latent-to-physical gain for the amplitude and log-width slots:
    /// `amplitude = gain · slot`, `σ = exp(gain · slot)`. Values below one make
    /// the shape stiffer than the position under plain gradient descent.
    #[serde(default = "default_shape_gain")]
    pub shape_gain: f64,
    /// Overall output scale multiplying every channel weight.
    #[serde(default = "default_feature_scale")]
    pub feature_scale: f64,
    /// Channel `c` of every blob is centered `texture_radius` px from the
    /// blob center at angle `2πc/C`, so the channel signature of an aggregate
    /// depends on which side of the blob it is taken. Zero gives concentric
    /// channels.
    #[serde(default = "default_texture_radius")]
    pub texture_radius: f64,
    /// Per-blob channel profile, `blob_count × channels`.
    #[serde(default)]
    pub channel_weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub background: Option<RampBackground>,
}

impl BlobGenConfig {
    /// Desk-scale default: 64×64 grid, four channels.
    pub fn desk(blob_count: usize, seed: u64) -> Self {
        BlobGenConfig {
            blob_count,
            height: 64,
            width: 64,
            channels: 4,
            seed,
            shape_gain: default_shape_gain(),
            feature_scale: default_feature_scale(),
            texture_radius: default_texture_radius(),
            channel_weights: None,
            background: None,
        }
    }

    pub fn with_grid(mut self, height: usize, width: usize, channels: usize) -> Self {
        self.height = height;
        self.width = width;
        self.channels = channels;
        self
    }

    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Self {
        self.channel_weights = Some(weights);
        self
    }

    pub fn with_background(mut self, bg: RampBackground) -> Self {
        self.background = Some(bg);
        self
    }

    /// Draws `blob_count` blobs uniformly inside the grid, away from borders.
    pub fn random_blobs(&self, seed: u64) -> Vec<BlobParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 6.0_f64.min(self.width.min(self.height) as f64 / 4.0);
        (0..self.blob_count)
            .map(|_| BlobParams {
                center: [
                    rng.gen_range(margin..=(self.width as f64 - 1.0 - margin).max(margin)),
                    rng.gen_range(margin..=(self.height as f64 - 1.0 - margin).max(margin)),
                ],
                amplitude: rng.gen_range(0.6..1.0),
                width: rng.gen_range(2.5..4.0),
            })
            .collect()
    }
}

/// Sum of isotropic Gaussian bumps, one channel profile per blob, over an
/// optional static background. Evaluated on the full grid without truncation.
#[derive(Debug, Clone)]
pub struct BlobField<S> {
    config: BlobGenConfig,
    gain: S,
    weights: Vec<Vec<S>>,
    /// Per-channel center offsets `(dx, dy)`.
    offsets: Vec<(S, S)>,
    background: Option<FeatureMap<S>>,
}

impl<S: Scalar> BlobField<S> {
    pub fn new(config: BlobGenConfig) -> Result<Self> {
        if config.height == 0 || config.width == 0 || config.channels == 0 {
            return Err(DragError::contract("blob grid dimensions must be >= 1"));
        }
        if !(config.shape_gain > 0.0 && config.shape_gain.is_finite()) {
            return Err(DragError::contract("shape_gain must be positive"));
        }
        if !config.feature_scale.is_finite() {
            return Err(DragError::contract("feature_scale must be finite"));
        }
        let weights: Vec<Vec<f64>> = match &config.channel_weights {
            Some(w) => {
                if w.len() != config.blob_count || w.iter().any(|r| r.len() != config.channels) {
                    return Err(DragError::contract(
                        "channel_weights must be blob_count x channels",
                    ));
                }
                w.clone()
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                (0..config.blob_count)
                    .map(|_| {
                        (0..config.channels)
                            .map(|_| rng.gen_range(0.25..1.0))
                            .collect()
                    })
                    .collect()
            }
        };
        let background = match &config.background {
            None => None,
            Some(bg) => {
                if bg.slope.len() != config.channels
                    || !(bg.offset.is_empty() || bg.offset.len() == config.channels)
                {
                    return Err(DragError::contract(
                        "background slope/offset length must equal channel count",
                    ));
                }
                Some(FeatureMap::from_fn(
                    config.height,
                    config.width,
                    config.channels,
                    |y, x, c| {
                        let t = bg.direction[0] * x as f64 + bg.direction[1] * y as f64;
                        let off = bg.offset.get(c).copied().unwrap_or(0.0);
                        S::lit(off + bg.slope[c] * t)
                    },
                ))
            }
        };
        let scale = config.feature_scale;
        let offsets = (0..config.channels)
            .map(|c| {
                if config.channels == 1 {
                    return (S::zero(), S::zero());
                }
                let a = std::f64::consts::TAU * c as f64 / config.channels as f64;
                let rad = config.texture_radius;
                (S::lit(rad * a.cos()), S::lit(rad * a.sin()))
            })
            .collect();
        Ok(BlobField {
            offsets,
            gain: S::lit(config.shape_gain),
            weights: weights
                .iter()
                .map(|r| r.iter().map(|v| S::lit(scale * *v)).collect())
                .collect(),
            background,
            config,
        })
    }

    pub fn config(&self) -> &BlobGenConfig {
        &self.config
    }

    pub fn blob_count(&self) -> usize {
        self.config.blob_count
    }

    /// Latent for the given physical blob parameters.
    pub fn encode(&self, blobs: &[BlobParams]) -> Result<LatentCode<S>> {
        if blobs.len() != self.config.blob_count {
            return Err(DragError::contract(format!(
                "expected {} blobs, got {}",
                self.config.blob_count,
                blobs.len()
            )));
        }
        let g = self.config.shape_gain;
        let mut w = Vec::with_capacity(blobs.len() * BLOB_SLOTS);
        for b in blobs {
            if !(b.width > 0.0) {
                return Err(DragError::contract("blob width must be positive"));
            }
            w.push(S::lit(b.center[0]));
            w.push(S::lit(b.center[1]));
            w.push(S::lit(b.amplitude / g));
            w.push(S::lit(b.width.ln() / g));
        }
        Ok(LatentCode(w))
    }

    pub fn decode(&self, w: &LatentCode<S>) -> Result<Vec<BlobParams>> {
        self.check_latent(w)?;
        let g = self.config.shape_gain;
        Ok(w.0
            .chunks_exact(BLOB_SLOTS)
            .map(|s| BlobParams {
                center: [s[0].as_f64(), s[1].as_f64()],
                amplitude: g * s[2].as_f64(),
                width: (g * s[3].as_f64()).exp(),
            })
            .collect())
    }

    /// Per-blob (cx, cy, amplitude, σ) in scalar precision.
    fn physical(&self, w: &LatentCode<S>) -> Vec<(S, S, S, S)> {
        let g = self.gain;
        w.0.chunks_exact(BLOB_SLOTS)
            .map(|s| (s[0], s[1], g * s[2], (g * s[3]).exp()))
            .collect()
    }
}

impl<S: Scalar> GeneratorBackend<S> for BlobField<S> {
    fn latent_len(&self) -> usize {
        self.config.blob_count * BLOB_SLOTS
    }

    fn output_shape(&self) -> (usize, usize, usize) {
        (self.config.height, self.config.width, self.config.channels)
    }

    fn generate(&self, w: &LatentCode<S>) -> Result<FeatureMap<S>> {
        self.check_latent(w)?;
        let (h, wd, ch) = self.output_shape();
        let mut f = match &self.background {
            Some(bg) => bg.clone(),
            None => FeatureMap::zeros(h, wd, ch),
        };
        let half = S::lit(0.5);
        for ((cx, cy, amp, sigma), weights) in self.physical(w).into_iter().zip(&self.weights) {
            let inv = half / (sigma * sigma);
            for y in 0..h {
                for x in 0..wd {
                    let cell = f.cell_mut(y, x);
                    for (c, (ox, oy)) in self.offsets.iter().enumerate() {
                        let dx = S::lit(x as f64) - cx - *ox;
                        let dy = S::lit(y as f64) - cy - *oy;
                        cell[c] += weights[c] * amp * (-(dx * dx + dy * dy) * inv).exp();
                    }
                }
            }
        }
        Ok(f)
    }

    fn vjp(&self, w: &LatentCode<S>, cotangent: &FeatureMap<S>) -> Result<Vec<S>> {
        self.check_latent(w)?;
        self.check_cotangent(cotangent)?;
        let (h, wd, _) = self.output_shape();
        let g = self.gain;
        let half = S::lit(0.5);
        let mut grad = Vec::with_capacity(self.latent_len());
        for ((cx, cy, amp, sigma), weights) in self.physical(w).into_iter().zip(&self.weights) {
            let s2 = sigma * sigma;
            let inv = half / s2;
            let (mut gcx, mut gcy, mut gamp, mut gw) = (S::zero(), S::zero(), S::zero(), S::zero());
            for y in 0..h {
                for x in 0..wd {
                    for (c, u) in cotangent.cell(y, x).iter().enumerate() {
                        if *u == S::zero() {
                            continue;
                        }
                        let (ox, oy) = self.offsets[c];
                        let dx = S::lit(x as f64) - cx - ox;
                        let dy = S::lit(y as f64) - cy - oy;
                        let rho2 = dx * dx + dy * dy;
                        let pe = *u * weights[c] * (-rho2 * inv).exp();
                        gamp += pe;
                        let pae = pe * amp / s2;
                        gcx += pae * dx;
                        gcy += pae * dy;
                        gw += pae * rho2;
                    }
                }
            }
            grad.push(gcx);
            grad.push(gcy);
            grad.push(g * gamp);
            grad.push(g * gw);
        }
        Ok(grad)
    }

    fn object_centers(&self, w: &LatentCode<S>) -> Result<Vec<Point2<S>>> {
        self.check_latent(w)?;
        Ok(w.0
            .chunks_exact(BLOB_SLOTS)
            .map(|s| Point2::new(s[0], s[1]))
            .collect())
    }
}

/// Closed set of built-in backends, for callers that pick one at runtime.
#[derive(Debug, Clone)]
pub enum AnyBackend<S> {
    Direct(DirectField),
    Blob(BlobField<S>),
}

impl<S: Scalar> GeneratorBackend<S> for AnyBackend<S> {
    fn latent_len(&self) -> usize {
        match self {
            AnyBackend::Direct(b) => GeneratorBackend::<S>::latent_len(b),
            AnyBackend::Blob(b) => b.latent_len(),
        }
    }

    fn output_shape(&self) -> (usize, usize, usize) {
        match self {
            AnyBackend::Direct(b) => GeneratorBackend::<S>::output_shape(b),
            AnyBackend::Blob(b) => b.output_shape(),
        }
    }

    fn generate(&self, w: &LatentCode<S>) -> Result<FeatureMap<S>> {
        match self {
            AnyBackend::Direct(b) => b.generate(w),
            AnyBackend::Blob(b) => b.generate(w),
        }
    }

    fn vjp(&self, w: &LatentCode<S>, cotangent: &FeatureMap<S>) -> Result<Vec<S>> {
        match self {
            AnyBackend::Direct(b) => b.vjp(w, cotangent),
            AnyBackend::Blob(b) => b.vjp(w, cotangent),
        }
    }

    fn object_centers(&self, w: &LatentCode<S>) -> Result<Vec<Point2<S>>> {
        match self {
            AnyBackend::Direct(b) => b.object_centers(w),
            AnyBackend::Blob(b) => b.object_centers(w),
        }
    }
}
