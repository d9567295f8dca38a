//! Interactive analytic categorization over image collections.
//!
//! The engine keeps a set of user-defined buckets plus a discard pile and,
//! every interaction round, proposes images for each active bucket. Proposals
//! come from three sources that together span the exploration-search axis:
//!
//! - a per-bucket linear classifier over sparse concept vectors (search),
//! - nearest-neighbour search over a product-quantization index, either via a
//!   precomputed kNN matrix or sampled approximate search,
//! - a randomized explorer that favours images far from everything processed.
//!
//! The mix between the sources is set per bucket from the windowed precision
//! each source achieved in recent rounds.

pub mod classifier;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod ids;
pub mod pq;
pub mod sampling;
pub mod session;
pub mod sparse;

pub use error::{Error, Result};
pub use ids::{BucketId, ImageId, Target};
