//! Gelman-Rubin and Geweke diagnostics for the monitored scalar traces of a
//! multi-chain fit.
//!
//! cargo run --release --example convergence -- [iterations]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::diagnostics::convergence_table;
use rlcm::sampler::{run_chains, ChainConfig};
use rlcm::simbench::{gen_data, gen_q, SimDesign};

fn main() -> rlcm::Result<()> {
    let iters: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2000);
    let design = SimDesign::simulation1(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = gen_q(design.m, design.l, design.s, &mut rng)?;
    let data = gen_data(&design, &q, &mut rng)?;
    let cfg = ChainConfig {
        iterations: iters,
        burn_in: iters / 2,
        n_chains: 4,
        seed: 5,
        ..ChainConfig::default()
    };
    let outs = run_chains(&data.y, &cfg)?;

    println!("{:<16} {:>7}  geweke z per chain", "parameter", "R-hat");
    let mut flagged = 0;
    for row in convergence_table(&outs) {
        let rhat = row
            .rhat
            .map_or("-".to_string(), |r| format!("{:.3}", r.rhat));
        let z: Vec<String> = row
            .geweke
            .iter()
            .map(|g| {
                g.and_then(|g| g.z)
                    .map_or("-".to_string(), |z| format!("{z:+.2}"))
            })
            .collect();
        let mark = if row.flagged() { " *" } else { "" };
        flagged += row.flagged() as usize;
        println!("{:<16} {rhat:>7}  {}{mark}", row.parameter, z.join(" "));
    }
    println!("{flagged} flagged (R-hat above threshold or |z| large)");
    Ok(())
}
