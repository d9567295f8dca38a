//! HTTP session service over the ii20 engine.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, BucketSummary, REQUEST_ID_HEADER};
pub use error::ApiError;
pub use store::SessionStore;
