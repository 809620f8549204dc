//! Edge-disjoint rainbow spanning trees in properly (2m−1)-edge-colored K_{2m}.
//!
//! Given any proper coloring, [`build_forest`] produces ⌊√(6m+9)/3⌋ pairwise
//! edge-disjoint spanning trees, each using every color exactly once. The
//! [`verifier`] re-checks every claimed property from raw edge lists, and the
//! [`oracle`] enumerates rainbow spanning trees exhaustively on tiny
//! instances.

pub mod cli;
pub mod coloring;
pub mod constructor;
pub mod forest;
pub mod oracle;
pub mod verifier;

pub use coloring::{
    parse_coloring, permute_coloring, permuted_round_robin, round_robin, serialize_coloring, validate_proper, Color,
    ColoredEdge, ColoringError, EdgeColoring, Vertex,
};
pub use constructor::{
    build_forest, omega, ConstructionError, ConstructionFailure, ConstructionState, ConstructionTrace, SelectionPolicy,
};
pub use forest::{base_star, Forest, ForestRecord, RainbowTree, TreeError, TreeRecord};
pub use verifier::{verify_all, VerificationReport};
