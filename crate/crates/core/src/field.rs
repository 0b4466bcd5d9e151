//! Grid and vector types shared by backends, samplers and the drag engines.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::scalar::Scalar;

/// Continuous position in grid pixels: x to the right, y down, origin at the
/// center of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    pub fn new(x: S, y: S) -> Self {
        Point2 { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Point2::new(S::lit(x), S::lit(y))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Self) -> Self {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Self) -> Self {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: S) -> Self {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> S {
        self.sub(o).norm()
    }

    pub fn cast<T: Scalar>(self) -> Point2<T> {
        Point2::new(T::lit(self.x.as_f64()), T::lit(self.y.as_f64()))
    }
}

/// Per-channel feature vector (an aggregate or a template).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<S>(pub Vec<S>);

impl<S: Scalar> FeatureVector<S> {
    pub fn zeros(channels: usize) -> Self {
        FeatureVector(vec![S::zero(); channels])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    /// L1 distance `‖self − other‖₁`.
    pub fn l1_dist(&self, other: &Self) -> S {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a - *b).abs())
            .sum()
    }
}

/// Optimization variable of a generator backend.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCode<S>(pub Vec<S>);

impl<S: Scalar> LatentCode<S> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// H×W×C grid of reals, stored row-major with channels innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap<S> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> FeatureMap<S> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            data: vec![S::zero(); height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<S>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(DragError::contract("feature map dimensions must be >= 1"));
        }
        if data.len() != height * width * channels {
            return Err(DragError::contract(format!(
                "feature map data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        FeatureMap {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> S {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn cell(&self, y: usize, x: usize) -> &[S] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, y: usize, x: usize) -> &mut [S] {
        let i = self.index(y, x, 0);
        &mut self.data[i..i + self.channels]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: S) -> Self {
        FeatureMap {
            data: self.data.iter().map(|v| *v * k).collect(),
            ..*self
        }
    }

    /// Channel-averaged grayscale projection, row-major H×W.
    pub fn channel_mean(&self) -> Vec<S> {
        let inv = S::one() / S::lit(self.channels as f64);
        self.data
            .chunks_exact(self.channels)
            .map(|cell| cell.iter().copied().sum::<S>() * inv)
            .collect()
    }

    pub fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(DragError::contract(format!(
                "{what}: shape {:?} does not match {:?}",
                other.shape(),
                self.shape()
            )));
        }
        Ok(())
    }
}

/// Binary H×W grid; `true` marks the editable region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(DragError::contract(
                "mask cell count does not match its shape",
            ));
        }
        Ok(Mask {
            height,
            width,
            cells,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Mask {
            height,
            width,
            cells: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn editable(&self, y: usize, x: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, value: bool) {
        self.cells[y * self.width + x] = value;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
}
