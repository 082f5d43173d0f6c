//! Markov chain Monte Carlo over clusters, latent states, Q and the rates.

mod ars;
mod chain;
mod config;
mod params;
mod qmoves;
pub mod slice;
mod state;
mod zmoves;

pub use ars::{ars, griddy};
pub use chain::{
    chain_rng, run_chain, run_chain_with, run_chains, ChainMeta, ChainOutput, ChainState,
    ChainStats, Draw,
};
pub use config::{ChainConfig, Mode, PriorConfig};
pub use params::{
    draw_alpha1_from_prior, draw_rates_from_prior, rate_tallies, update_alpha1, update_hstar,
    update_p, update_rates, RateTallies,
};
pub use qmoves::{
    draw_init_row, eligible_columns, init_q, merge_partner_states, partner_merge_step,
    relabel_permutation, repair_rows, reset_rows, state_is_inert, unused_states, update_q,
    QSweepStats,
};
pub use state::{Cluster, ClusterState, Unit};
pub use zmoves::{gibbs_sweep, split_merge, SplitMerge, ZContext};
