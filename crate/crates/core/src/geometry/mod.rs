//! Planar geometry for blobs: outlier filtering, alpha shapes, clipped
//! Voronoi partitions, virtual-point sampling and outline smoothing.

pub mod alpha;
pub mod blob;
pub mod delaunay;
pub mod lof;
pub mod polygon;
pub mod sampling;
pub mod smooth;
pub mod voronoi;

pub use alpha::{alpha_shape, capsule, AlphaRadius, AlphaShape};
pub use blob::{build_blob, BlobGeometry, GeometryParams};
pub use delaunay::delaunay;
pub use lof::lof;
pub use polygon::Loop;
pub use sampling::{sample_virtual, scale_counts, VirtualPointSet};
pub use smooth::smooth_outline;
pub use voronoi::{clipped_voronoi, Cell};
