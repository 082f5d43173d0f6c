//! Posterior predictive checks: 95% intervals for each feature's marginal
//! mean and for every pairwise log odds ratio, with standardized LOR
//! differences flagging poorly reproduced pairs.
//!
//! cargo run --release --example ppc -- [replicates]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::diagnostics::run_ppc;
use rlcm::model::Rule;
use rlcm::sampler::{run_chains, ChainConfig};
use rlcm::simbench::{gen_data, gen_q, SimDesign};

fn main() -> rlcm::Result<()> {
    let reps: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(500);
    let design = SimDesign {
        l: 30,
        ..SimDesign::simulation1(11)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q = gen_q(design.m, design.l, design.s, &mut rng)?;
    let data = gen_data(&design, &q, &mut rng)?;
    let cfg = ChainConfig {
        iterations: 2000,
        burn_in: 1000,
        n_chains: 2,
        seed: 11,
        ..ChainConfig::default()
    };
    let outs = run_chains(&data.y, &cfg)?;

    let report = run_ppc(&data.y, &outs, Rule::Dino, Some(reps), 1)?;
    println!("{} replicated data sets", report.n_replicates);
    println!(
        "marginal means covered: {:.1}%",
        100.0 * report.mean_coverage()
    );
    println!(
        "pairwise LORs covered: {:.1}% of {}",
        100.0 * report.lor_coverage(),
        report.lors.len()
    );
    println!(
        "pairs flagged by standardized LOR difference: {}",
        report.slord_flags()
    );
    for c in report.lors.iter().filter(|c| c.flagged).take(5) {
        println!(
            "  features {} and {}: observed {:.2}, interval [{:.2}, {:.2}], SLORD {:.2}",
            c.a,
            c.b,
            c.check.observed,
            c.check.lower,
            c.check.upper,
            c.slord.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
