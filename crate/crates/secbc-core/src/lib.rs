//! Simulation and audit toolkit for secure 1-to-K packet broadcast over
//! erasure channels with public per-packet state feedback.
//!
//! The crate has three layers:
//!
//! * mechanics — finite-field linear algebra ([`field`]), symbolic packet
//!   expressions ([`expr`]), and erasure-channel models ([`channel`]);
//! * schemes — parameter selection and the honest / lying-receiver broadcast
//!   protocols ([`protocols`]), which produce replayable transcripts;
//! * analysis — exact leakage and decodability audits of transcripts
//!   ([`audit`]), achievable-rate region predicates ([`regions`]), and the
//!   Monte Carlo harness ([`harness`]).
//!
//! Everything is deterministic given an [`channel::RngSeed`].

pub mod audit;
pub mod channel;
pub mod config;
pub mod expr;
pub mod field;
pub mod harness;
pub mod protocols;
pub mod regions;

pub use audit::{
    brute_force_mi, check_decodable, count_observed_encrypted, leak_audit, leaked_dimension,
    observed_exprs, Conditioning, LeakAudit,
};
pub use channel::{
    broadcast, joint_stats, AckState, ChannelState, ErasureModel, JointStats, RngSeed,
    StateSampler,
};
pub use config::{load_config, parse_config, parse_joint_table, parse_script, ConfigError, RunConfig};
pub use expr::{Basis, LinExpr};
pub use field::{mds_generator, mds_parity_check, Field, FieldElem, Matrix, Packet};
pub use harness::{
    boundary_value, run_trial, run_trials, sweep, AuditSpec, AuditStats, BatchStats, GridPoint,
    HarnessError, Scheme, TrialConfig, TrialOutcome,
};

pub use regions::{
    boundary_trace, correlated_outer_bound, eavesdropper_capacity, in_dis_region,
    in_dishonest_region, in_nonsecure_region, in_secure_region, is_one_sidedly_fair, RateTuple,
    RegionError, RegionKind, RegionVerdict, Validity,
};

pub use protocols::{
    run_dis, run_dishonest, run_honest, AckStrategy, MessageSpec, Phase, ProtocolError,
    SchemeParams, Transcript, TrialReport,
};
