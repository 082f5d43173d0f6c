//! Chains on disk: write a fit as JSON lines, read it back and check that
//! every draw survives the round trip exactly.
//!
//! cargo run --release --example chain_files

use rlcm::io::{chain_file_name, read_chain, write_chain};
use rlcm::model::BinaryDataMatrix;
use rlcm::sampler::{run_chains, ChainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows: Vec<Vec<u8>> = (0..20)
        .map(|i| (0..12).map(|c| ((i * 7 + c * 3) % 5 < 2) as u8).collect())
        .collect();
    let y = BinaryDataMatrix::from_rows(&rows)?;
    let cfg = ChainConfig {
        iterations: 300,
        burn_in: 100,
        thin: 2,
        n_chains: 2,
        m_dagger: 3,
        ..ChainConfig::default()
    };
    let outs = run_chains(&y, &cfg)?;

    let dir = tempfile::tempdir()?;
    for o in &outs {
        let path = dir.path().join(chain_file_name(o.meta.chain));
        write_chain(&path, o, &cfg)?;
        let back = read_chain(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!(
            "{}: {} draws, {bytes} bytes, config hash {}, identical after reading: {}",
            path.file_name().unwrap().to_string_lossy(),
            back.output.draws.len(),
            &cfg.hash()[..12],
            back.output == *o && back.config == cfg
        );
    }
    Ok(())
}
