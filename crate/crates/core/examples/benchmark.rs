//! A small replication study comparing the model with complete-linkage
//! Hamming clustering and a Bayesian latent class model on one design.
//!
//! cargo run --release --example benchmark -- [replications]

use rlcm::sampler::ChainConfig;
use rlcm::simbench::{run_replication_study, Method, SimDesign, StudyConfig};

fn main() -> rlcm::Result<()> {
    let reps: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(3);
    let designs = [
        SimDesign {
            replications: reps,
            ..SimDesign::simulation1(17)
        },
        SimDesign {
            replications: reps,
            psi0: 0.05,
            ..SimDesign::simulation1(18)
        },
    ];
    let study = StudyConfig {
        chain: ChainConfig {
            iterations: 2000,
            burn_in: 1000,
            n_chains: 2,
            ..ChainConfig::default()
        },
        methods: vec![Method::Rlcm, Method::Hc, Method::Lca],
        lca_classes: Some(8),
        hc_k: Some(8),
        ..StudyConfig::default()
    };
    let res = run_replication_study(&designs, &study)?;
    println!(
        "{:>4} {:>5} {:>6} {:>8} {:>6} {:>6}",
        "cell", "psi0", "method", "mean aRI", "sd", "ok"
    );
    for s in &res.summary {
        println!(
            "{:>4} {:>5} {:>6} {:>8.3} {:>6.3} {:>6}",
            s.cell,
            s.psi0,
            format!("{:?}", s.method),
            s.mean_ari,
            s.sd_ari,
            s.n_ok
        );
    }
    Ok(())
}
