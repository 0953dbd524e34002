//! Limit order book replay, market microstructure features and a
//! market-making environment driven by recorded order flow.
//!
//! - [`lob`]: price-time priority order book.
//! - [`features`]: per-snapshot feature rows and normalization.
//! - [`pipeline`]: tick and snapshot file formats, replay into snapshots.
//! - [`env`]: the market-making environment.
//! - [`synthetic`]: seeded synthetic tick days.

pub mod env;
pub mod features;
pub mod lob;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod pipeline;
pub mod report;
pub mod synthetic;
