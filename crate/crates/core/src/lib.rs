//! Feature dragging for point-based editing of generated feature fields.
//!
//! A generator backend maps a latent code to an H×W×C feature map. The drag
//! engine moves the content under each handle point toward its target by
//! pulling patch aggregates toward adaptive templates, while a line search
//! with backtracking places the next handle position on the handle→target
//! segment. Every method steps through the [`DragMethod`] trait, so the
//! baseline and metrics in sibling crates plug into the same backends.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the `*F64` aliases
//! below are the concrete types the tooling uses.

pub mod backend;
pub mod drag;
pub mod error;
pub mod field;
pub mod instruction;
pub mod method;
pub mod sampling;
pub mod scalar;
pub mod trace;

pub use backend::{
    AnyBackend, BlobField, BlobGenConfig, BlobParams, DirectField, GeneratorBackend,
};
pub use drag::{DragConfig, DragPoint, DragState, FreeDrag, PointStatus, RunStatus};
pub use error::{DragError, Result};
pub use field::{FeatureMap, FeatureVector, LatentCode, Mask, Point2};
pub use instruction::{BackendSpec, ConfigOverrides, Instruction, Method};
pub use method::DragMethod;
pub use scalar::Scalar;
pub use trace::{Case, DragRecord, DragTrace};

pub type Point2F64 = Point2<f64>;
pub type FeatureMapF64 = FeatureMap<f64>;
pub type FeatureVectorF64 = FeatureVector<f64>;
pub type LatentCodeF64 = LatentCode<f64>;
pub type DragConfigF64 = DragConfig<f64>;
pub type DragStateF64 = DragState<f64>;
pub type DragTraceF64 = DragTrace<f64>;
pub type BackendF64 = AnyBackend<f64>;
pub type FreeDragF64 = FreeDrag<f64, AnyBackend<f64>>;

pub type Point2F32 = Point2<f32>;
pub type FeatureMapF32 = FeatureMap<f32>;
pub type DragConfigF32 = DragConfig<f32>;
