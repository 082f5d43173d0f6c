//! Post-processing of a fit: co-clustering, least-squares clusterings (raw
//! and with identical-state clusters merged), the selected Q and each
//! subject's marginal state probabilities.
//!
//! cargo run --release --example posterior_summaries -- [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::diagnostics::adjusted_rand_index;
use rlcm::sampler::{run_chains, ChainConfig};
use rlcm::simbench::{gen_data, gen_q, pi_a, SimDesign};
use rlcm::summaries::{
    coclustering, ls_clustering, posterior_t_tilde, scientific_coclustering,
    scientific_ls_clustering, select_q_ls, state_marginals, Conditioning,
};

fn main() -> rlcm::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(4);
    let design = SimDesign {
        l: 40,
        n: 60,
        theta0: 0.9,
        psi0: 0.05,
        pi0: pi_a(3),
        s: 0.2,
        m: 3,
        replications: 1,
        seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_true = gen_q(design.m, design.l, design.s, &mut rng)?;
    let data = gen_data(&design, &q_true, &mut rng)?;
    let cfg = ChainConfig {
        iterations: 2000,
        burn_in: 1000,
        seed,
        ..ChainConfig::default()
    };
    let outs = run_chains(&data.y, &cfg)?;
    let truth = &data.partition;

    let raw = ls_clustering(&outs, &coclustering(&outs)?)?;
    let sci = scientific_ls_clustering(&outs, &scientific_coclustering(&outs)?)?;
    println!("true clusters: {}", truth.n_blocks());
    println!(
        "raw LS clustering: {} clusters, aRI {:.3}",
        raw.partition.n_blocks(),
        adjusted_rand_index(&raw.partition, truth)?
    );
    println!(
        "merged LS clustering: {} clusters, aRI {:.3}",
        sci.partition.n_blocks(),
        adjusted_rand_index(&sci.partition, truth)?
    );
    let tt = posterior_t_tilde(&outs)?;
    println!(
        "merged clusters: median {} (95% {}-{})",
        tt.median, tt.lower, tt.upper
    );

    let sel = select_q_ls(&outs)?;
    println!(
        "selected Q from chain {} iteration {} (distance {:.3}):",
        sel.chain, sel.iteration, sel.distance
    );
    for k in 0..sel.q.n_states() {
        let row: String = (0..sel.q.n_features())
            .map(|c| if sel.q.get(k, c) { '1' } else { '.' })
            .collect();
        println!("  {row}");
    }
    println!("true Q:");
    for k in 0..q_true.n_states() {
        let row: String = (0..q_true.n_features())
            .map(|c| if q_true.get(k, c) { '1' } else { '.' })
            .collect();
        println!("  {row}");
    }

    let marg = state_marginals(&outs, Conditioning::None)?;
    println!("marginal state probabilities, first five subjects:");
    for (i, p) in marg.probs.iter().take(5).enumerate() {
        let cells: Vec<String> = p.iter().map(|x| format!("{x:.2}")).collect();
        println!("  subject {i}: {}", cells.join(" "));
    }
    Ok(())
}
