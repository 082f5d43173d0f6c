//! Simulate one data set from the 50-subject, 100-feature design, fit it and
//! compare the least-squares clustering with the truth.
//!
//! cargo run --release --example simulate_and_fit -- [seed] [iterations]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::diagnostics::adjusted_rand_index;
use rlcm::sampler::{run_chains, ChainConfig};
use rlcm::simbench::{gen_data, gen_q, hclust_hamming, SimDesign};
use rlcm::summaries::{posterior_t_tilde, scientific_coclustering, scientific_ls_clustering};

fn main() -> rlcm::Result<()> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let seed = args.first().copied().unwrap_or(1);
    let iters = args.get(1).copied().unwrap_or(4000) as usize;

    let design = SimDesign::simulation1(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = gen_q(design.m, design.l, design.s, &mut rng)?;
    let data = gen_data(&design, &q, &mut rng)?;

    let cfg = ChainConfig {
        iterations: iters,
        burn_in: iters / 2,
        seed,
        ..ChainConfig::default()
    };
    let t0 = Instant::now();
    let outs = run_chains(&data.y, &cfg)?;
    let secs = t0.elapsed().as_secs_f64();

    let pi = scientific_coclustering(&outs)?;
    let ls = scientific_ls_clustering(&outs, &pi)?;
    let tt = posterior_t_tilde(&outs)?;
    let hc = hclust_hamming(&data.y, data.partition.n_blocks())?;
    println!(
        "fit: {} chains x {} iterations in {secs:.1}s",
        cfg.n_chains, iters
    );
    println!("true clusters: {}", data.partition.n_blocks());
    println!(
        "LS clustering: {} clusters, aRI {:.3}",
        ls.partition.n_blocks(),
        adjusted_rand_index(&ls.partition, &data.partition)?
    );
    println!(
        "HC at true k: aRI {:.3}",
        adjusted_rand_index(&hc, &data.partition)?
    );
    println!(
        "scientific clusters: median {} (95% interval {}-{})",
        tt.median, tt.lower, tt.upper
    );
    for o in &outs {
        let s = &o.stats;
        println!(
            "chain {}: split {}/{} merge {}/{} q flips {} partner merges {} resets {}",
            o.meta.chain,
            s.split_accepted,
            s.split_proposed,
            s.merge_accepted,
            s.merge_proposed,
            s.q_flips,
            s.partner_merges,
            s.rows_reset
        );
    }
    Ok(())
}
