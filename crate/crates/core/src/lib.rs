pub mod dataset;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod knn;
pub mod linalg;
pub mod matrix;
pub mod optimizer;
pub mod point;
pub mod relations;
pub mod render;
pub mod scalar;
pub mod seed;
pub mod subclustering;
pub mod toy;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use point::Point2;
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type Dataset = dataset::LabeledDataset<f64>;
pub type SubClusters = subclustering::SubClustering<f64>;
pub type BirchConfig = subclustering::BirchParams<f64>;
pub type Embedding = embedding::AnchorEmbedding<f64>;
pub type Geometry = geometry::GeometryParams<f64>;
pub type Blob = geometry::BlobGeometry<f64>;
pub type LowDim = optimizer::LowDimMeasure<f64>;
pub type Optimization = optimizer::Optimized<f64>;
pub type Point = Point2<f64>;
