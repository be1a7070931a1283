//! Compiles every code block of the mdBook guide as a doc-test, one
//! module per chapter, so `cargo test --workspace` fails when the book
//! drifts from the library. mdBook itself cannot run snippets against
//! crate dependencies; routing the chapters through `#[doc]` gives them
//! to rustdoc, which can.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}

#[doc = include_str!("../../../book/src/historical-logs.md")]
pub mod historical_logs {}

#[doc = include_str!("../../../book/src/ranking-attributes.md")]
pub mod ranking_attributes {}

#[doc = include_str!("../../../book/src/search-trees.md")]
pub mod search_trees {}

#[doc = include_str!("../../../book/src/sla-queries.md")]
pub mod sla_queries {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/online-tuning.md")]
pub mod online_tuning {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}
