//! Delaunay triangulation and alpha shapes in two and three dimensions.

mod alpha;
mod delaunay;
mod predicates;
mod simplex;

pub use alpha::{
    alpha_shape, convex_hull, AlphaShape, Facet, Normalization, ShapeDocument,
    CONTAINMENT_TOLERANCE,
};
pub use delaunay::{delaunay, Triangulation};
pub use simplex::{circumradius, circumsphere, simplex_volume, Simplex, DEGENERACY_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("only 2D and 3D point sets are supported, got dimension {0}")]
    UnsupportedDimension(usize),
    #[error("points have inconsistent dimensions")]
    DimensionMismatch,
    #[error("degenerate simplex")]
    DegenerateSimplex,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("alpha radius must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("alpha shape is empty")]
    EmptyShape,
    #[error("invalid shape document: {0}")]
    InvalidDocument(String),
}
