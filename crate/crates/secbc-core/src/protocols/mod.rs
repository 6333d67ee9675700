//! Broadcast schemes: parameter selection, scheme runners, strategies, and
//! the transcript record they all produce.

pub mod dishonest;
pub mod honest;
pub mod params;
pub mod strategy;
pub mod transcript;

pub use dishonest::{derive_key_mds, expand_key, run_dis, run_dishonest};
pub use honest::run_honest;
pub use params::{
    dis_params, dishonest_params, dishonesty_threshold, honest_params, DisParams, DishonestParams,
    HonestParams, ParamError, SchemeParams,
};
pub use strategy::{apply_strategy, AckStrategy, AckView};
pub use transcript::{Phase, Record, Transcript, TrialReport};

use crate::channel::ChannelError;
use crate::field::FieldError;

/// What Alice has to deliver: one message of `n_packets[j]` packets per
/// receiver, with the symbol field and packet length used for concrete
/// instantiations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSpec {
    pub n_packets: Vec<usize>,
    pub field_m: u32,
    pub packet_len: usize,
}

impl MessageSpec {
    pub fn new(n_packets: Vec<usize>) -> Self {
        MessageSpec { n_packets, field_m: 8, packet_len: 16 }
    }

    /// Number of receivers.
    pub fn k(&self) -> usize {
        self.n_packets.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("message spec has {got} receivers but the channel model has {want}")]
    ReceiverMismatch { got: usize, want: usize },
    #[error("scheme supports exactly 2 receivers, got {k}")]
    UnsupportedReceivers { k: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
