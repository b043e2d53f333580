//! Multi-user massive MIMO channel evaluation.
//!
//! This crate evaluates massive MIMO channels, synthetic or measured, the
//! way a measurement campaign would: normalize the full-array channel
//! tensor, draw random antenna subsets, and look at two complementary
//! metrics per (subset, subcarrier) cell. The singular value spread
//! measures joint user orthogonality; the dirty-paper-coding sum rate,
//! computed by sum-power iterative water-filling, measures what the channel
//! is actually worth against the interference-free asymptote
//! `K log2(1 + rho)`. A SAGE-style estimator reduces physically large
//! uniform-linear-array channels to spatial fingerprints that show where
//! each user's energy arrives along the array.
//!
//! # Layout
//!
//! - [`channel`]: the channel tensor, evaluation parameters, antenna-subset
//!   selection, and the CTF1 file format.
//! - [`models`]: i.i.d. Rayleigh and geometric scenario generators.
//! - [`norm`]: the two full-array normalizations.
//! - [`spectral`]: singular values, spread, Gram diagnostics.
//! - [`capacity`]: DPC capacity, interference-free asymptote, ZF baseline.
//! - [`ensemble`]: Monte-Carlo orchestration, CDFs, confidence intervals.
//! - [`fingerprint`]: sliding-window SAGE estimation and fingerprints.
//! - [`experiment`]: config-driven runs producing checksummed bundles.
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example rayleigh_baseline
//! cargo run --release --example power_allocation
//! cargo run --release --example scenario_comparison
//! cargo run --release --example spatial_fingerprints
//! cargo run --release --example channel_files
//! ```
//!
//! The `mmeval` binary wraps the same pipelines behind subcommands
//! (`generate`, `spread`, `capacity`, `fingerprint`, `run`, `verify`).
//!
//! # Quick start
//!
//! ```
//! use mmeval::prelude::*;
//!
//! // 4 users, 32 ports, 16 subcarriers of i.i.d. Rayleigh fading
//! let raw = gen_rayleigh(4, 32, 16, 7).unwrap();
//! let tensor = normalize1(&raw).unwrap();
//! let params = EvalParams {
//!     rho: 10.0,
//!     num_users: 4,
//!     antenna_counts: vec![4, 16, 32],
//!     num_subsets: 50,
//!     master_seed: 1,
//!     normalization: Normalization::Norm1,
//! };
//! let report = run_spread_ensemble(&tensor, &params).unwrap();
//! let m4 = report.at(4).unwrap();
//! let m32 = report.at(32).unwrap();
//! assert!(m32.median < m4.median); // more antennas, better orthogonality
//! ```

pub mod capacity;
pub mod channel;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod fingerprint;
pub mod models;
pub mod norm;
pub mod spectral;

pub use error::{Error, Result};

/// The most commonly used items in one import.
pub mod prelude {
    pub use crate::capacity::{
        capacity_objective, dpc_capacity, dpc_capacity_default, dpc_with_zf, if_capacity,
        zf_sumrate,
        CapacityResult, PowerAllocation,
    };
    pub use crate::channel::{
        read_channel_file, write_channel_file, AntennaSubset, ArrayKind, ChannelTensor,
        EvalParams, NormState, Normalization,
    };
    pub use crate::ensemble::{
        draw_subsets, run_capacity_ensemble, run_spread_ensemble, EnsembleRecord, EnsembleReport,
    };
    pub use crate::error::{Error, Result};
    pub use crate::experiment::{
        generate_channel, run_experiment, verify_bundle, Analysis, ChannelSource,
        ExperimentConfig, FingerprintParams,
    };
    pub use crate::fingerprint::{
        build_fingerprint, fingerprint_overlap, sage_estimate, FingerprintMap, SageConfig,
    };
    pub use crate::models::{
        gen_geometric, gen_rayleigh, mpc_field, ArrayGeometry, Mpc, Scenario, ScenarioConfig,
    };
    pub use crate::norm::{normalize1, normalize2};
    pub use crate::spectral::{gram_offdiag_ratio, singular_spread, SpectrumResult};
}
