//! Automated evaluation of the engine with simulated users ("actors").
//!
//! An actor knows the ground truth, maps some annotation labels to buckets
//! and judges every image it is shown, making mistakes at a fixed rate.
//! Sessions are driven in grid (25 images per round) or Tetris (one image
//! per round) fashion and scored by per-bucket precision and recall.

pub mod actor;
pub mod grid;
pub mod metrics;
pub mod runner;

pub use actor::{Actor, ActorConfig, Judgment, Metaphor, Mistake};
pub use metrics::{compute_metrics, BucketMetrics, Metrics, MetricsLog};
pub use runner::{run_session, RunOutcome};
