//! Programmed death and replication of neurons in feedforward networks.
//!
//! The crate provides a small dense feedforward network with SGD training,
//! activation statistics of hidden layers, two neuron-efficiency measures,
//! loss-preserving neuron removal and output-preserving neuron replication,
//! a combined prune-and-regrow schedule, and brute-force oracles that
//! measure the loss change caused by each removal.
//!
//! ```
//! use neurolife::{collect_stats, efficiency_connection_cut, synthetic_duplicate_dataset,
//!                 Method, Network, StatsConfig};
//!
//! let data = synthetic_duplicate_dataset(4, 64, 1).unwrap();
//! let net = Network::init_uniform(&[4, 6, 3, 2], 7).unwrap();
//! let (stats, down) = collect_stats(&net, &data, 1, &StatsConfig::default()).unwrap();
//! let report = efficiency_connection_cut(&stats, &down, net.weights(1), Method::A1).unwrap();
//! assert_eq!(report.values.len(), 6);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod dataio;
pub mod efficiency;
pub mod error;
pub mod lifecycle;
pub mod matrix;
pub mod netcore;
pub mod neuronstats;
pub mod oracle;
pub mod rng;
pub mod surgery;
pub mod trainer;

pub use dataio::{
    decode_mnist, load_mnist_dir, load_mnist_idx, next_batch, parse_idx_images, parse_idx_labels,
    synthetic_duplicate_dataset, BatchOrder, BatchPlan, Dataset, Split,
};
pub use efficiency::{
    conditional_variance, efficiency_connection_cut, efficiency_covariance, efficiency_for, relation_a1, relation_a2,
    relation_a3, relation_for, EfficiencyReport, LinearRelation, Method,
};
pub use error::{Error, Result};
pub use lifecycle::{lifecycle_step, run_with_lifecycle, LifecycleConfig, LifecycleOutcome};
pub use matrix::Matrix;
pub use netcore::{
    loss_boundary_mse, loss_cross_entropy, sample_loss, Activation, ForwardTrace, Gradients, LossKind, Network,
    ParamSet, Target,
};
pub use neuronstats::{collect_stats, jacobi_eigen, DownstreamStats, Eigen, LayerStats, StatsConfig};
pub use oracle::{delta_loss_on_removal, fit_slope, pearson, scan_layer, LayerScan, ScanRow, SlopeFit};
pub use surgery::{
    add_random_neuron, apply_death, replicate, replicate_equal, replicate_split, sample_beta, DeathPlan,
    ReplicationPlan, SplitRule,
};
pub use trainer::{evaluate, sgd_step, train, EvalHook, Evaluation, Hyperparams, RunRecord, Trainer};
