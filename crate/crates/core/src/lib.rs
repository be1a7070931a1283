//! Offline learning plus online control for data-transfer parameter tuning.
//!
//! The crate learns good transfer parameter settings (concurrency,
//! parallelism, pipelining, active CPU cores, CPU frequency) from historical
//! transfer logs and applies them to a running transfer under a
//! maximum-throughput or minimum-energy SLA.
//!
//! The offline side ingests logs ([`logstore`]), ranks the context
//! attributes by how strongly they differentiate the logs ([`ranking`]),
//! groups similar logs with attribute-cut search trees ([`dtree`]) and
//! answers SLA queries over the grouped logs ([`surface`]). The online side
//! drives a transfer session through a periodic control loop ([`tuner`]).
//! A deterministic transfer simulator ([`netsim`]) provides the session
//! environment and generates synthetic historical logs; [`bench`](mod@bench)
//! compares the tuners against fixed-parameter baselines on simulated
//! episodes.
//!
//! A narrative guide with runnable examples lives in the `book/` directory
//! of the repository.

pub mod bench;
pub mod dtree;
pub mod logstore;
pub mod netsim;
pub mod ranking;
pub mod surface;
pub mod tuner;
