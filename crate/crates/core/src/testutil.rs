//! Synthetic chain outputs for tests.

use crate::model::Rule;
use crate::sampler::{ChainMeta, ChainOutput, ChainStats, Draw, Mode};

/// A draw with the given labels, H* rows and Q rows; rates are filler.
pub fn draw(iteration: usize, z: &[usize], hstar: &[&str], q: &[&str]) -> Draw {
    let l = q.first().map_or(3, |r| r.len());
    Draw {
        iteration,
        z: z.to_vec(),
        hstar: hstar.iter().map(|s| s.to_string()).collect(),
        q: q.iter().map(|s| s.to_string()).collect(),
        theta: vec![0.8; l],
        psi: vec![0.2; l],
        alpha1: 1.0,
        p: vec![0.5; q.len()],
        log_post: 0.0,
    }
}

pub fn output(chain: usize, draws: Vec<Draw>) -> ChainOutput {
    let d0 = &draws[0];
    ChainOutput {
        meta: ChainMeta {
            chain,
            seed: 1,
            config_hash: String::new(),
            n_subjects: d0.z.len(),
            n_features: d0.theta.len(),
            rule: Rule::Dino,
            mode: Mode::Finite,
            iterations: draws.len() * 2,
            burn_in: draws.len(),
            thin: 1,
        },
        draws,
        stats: ChainStats::default(),
    }
}
