//! Cadastral boundary delineation toolkit.
//!
//! Builds three-class (background / field / boundary) training masks from
//! instance annotations, pre-processes imagery, turns segmentation output
//! into 1-px skeletons and georeferenced polylines, and scores detected
//! boundaries against a reference with buffered precision, recall and
//! F-score.
//!
//! Numeric code that benefits from it is generic over [`Scalar`]
//! (`f32` / `f64`); the aliases below fix the common choices.

pub mod error;
pub mod filters;
pub mod io;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod morphology;
pub mod raster;
pub mod scalar;
pub mod segmentation;
pub mod skeleton;
pub mod vector;

pub use error::{Error, Result};
pub use filters::{apply_filter, FilterKind};
pub use losses::{finite_diff_check, loss_eval, loss_grad, softmax, LossKind, OneHotTarget};
pub use mask::{build_semantic_mask, erode_fields, MaskConfig};
pub use metrics::{buffer_reference, evaluate, select_buffers, EvalConfig, EvalResult, Zone};
pub use raster::{
    stitch, stitch_tensor, tile, tile_tensor, BinaryRaster, Class, ClassMask, GeoRef, GrayRaster,
    LabelRaster, Raster, Tensor, TileGrid,
};
pub use scalar::Scalar;
pub use segmentation::{argmax_classes, baseline_segment, ingest_predictions, synth_scene};
pub use skeleton::{thin, trace_polylines, CoordSpace, Polyline, PolylineSet, Vertex};
pub use vector::{apply_georef, read_shapefile, write_boundary_png, write_shapefile};

/// Class-probability tensor as exchanged in CBT files.
pub type ProbTensor = Tensor<f32>;
/// Double-precision tensor used for gradient verification.
pub type ProbTensorF64 = Tensor<f64>;
/// Loss configuration in single precision.
pub type LossConfigF32 = losses::LossConfig<f32>;
/// Loss configuration in double precision.
pub type LossConfigF64 = losses::LossConfig<f64>;
