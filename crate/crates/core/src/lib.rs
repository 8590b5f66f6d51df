//! Generalist graph anomaly detection.
//!
//! A detector is trained once on labeled source graphs and then scores unseen
//! target graphs without labels or fine-tuning. Two score channels feed the
//! detector: a high-order residual channel built from multi-hop propagation
//! residuals, and a low-order affinity channel built from local cosine
//! homophily. At inference the channels are fused with weights derived from
//! how far each channel's score distribution has drifted from the source
//! domains, then re-weighted by a small test-time adapter fit on top-M
//! pseudo-labels.
//!
//! Module map:
//! - [`graph`]: CSR graphs, directory I/O, normalization, PCA, synthetic domains.
//! - [`diff`]: parameters, sparse propagation, Adam, finite-difference checks.
//! - [`high_order`] / [`low_order`]: the two encoders, losses and scores.
//! - [`disassort`]: KDE, Jensen-Shannon distance and the drift metrics.
//! - [`adapters`]: channel fusion and the test-time adapter.
//! - [`pipeline`]: training, inference and the persisted model artifact.
//! - [`eval`]: ranking metrics, ablations and the synthetic benchmark.

pub mod adapters;
pub mod diff;
pub mod disassort;
pub mod error;
pub mod eval;
pub mod graph;
pub mod high_order;
pub mod low_order;
pub mod par;
pub mod pipeline;
pub mod scores;
pub mod seed;

pub use error::{Error, Result};
pub use graph::Graph;
pub use scores::ScoreVector;
