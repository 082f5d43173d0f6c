//! Fitting without a bound on the number of latent states: the slice
//! sampler grows and prunes states as the data require.
//!
//! cargo run --release --example infinite_states -- [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::diagnostics::adjusted_rand_index;
use rlcm::sampler::{run_chains, ChainConfig, Mode};
use rlcm::simbench::{gen_data, gen_q, SimDesign};
use rlcm::summaries::{pooled, scientific_coclustering, scientific_ls_clustering};

fn main() -> rlcm::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2);
    let design = SimDesign::simulation1(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = gen_q(design.m, design.l, design.s, &mut rng)?;
    let data = gen_data(&design, &q, &mut rng)?;

    let cfg = ChainConfig {
        iterations: 3000,
        burn_in: 1500,
        mode: Mode::Infinite,
        m_dagger: 6,
        seed,
        ..ChainConfig::default()
    };
    let outs = run_chains(&data.y, &cfg)?;
    let mut hist = std::collections::BTreeMap::new();
    for (_, d) in pooled(&outs) {
        *hist.entry(d.active_states().len()).or_insert(0usize) += 1;
    }
    println!("true states: {}; started from {}", design.m, cfg.m_dagger);
    println!("posterior of the number of active states:");
    let total: usize = hist.values().sum();
    for (k, c) in &hist {
        println!("  {k}: {:.3}", *c as f64 / total as f64);
    }
    let ls = scientific_ls_clustering(&outs, &scientific_coclustering(&outs)?)?;
    println!(
        "LS clustering: {} clusters (true {}), aRI {:.3}",
        ls.partition.n_blocks(),
        data.partition.n_blocks(),
        adjusted_rand_index(&ls.partition, &data.partition)?
    );
    Ok(())
}
