//! The ipcluster book. Each chapter is included as module docs so that its
//! code samples run with `cargo test`.
#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}

#[doc = include_str!("../../../book/src/local_search.md")]
pub mod local_search {}

#[doc = include_str!("../../../book/src/fast.md")]
pub mod fast {}

#[doc = include_str!("../../../book/src/stable_opt.md")]
pub mod stable_opt {}

#[doc = include_str!("../../../book/src/median_max.md")]
pub mod median_max {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
