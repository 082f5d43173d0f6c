//! The cluster likelihood with the shared state vector integrated out,
//! computed blockwise and by brute force over all 2^M state vectors.
//!
//! cargo run --release --example marginal_likelihood

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlcm::model::{
    marginal_loglik_g, rcm_state_blocks, BinaryDataMatrix, LogRates, QMatrix, RateParams, Rule,
    DEFAULT_MAX_BLOCK_STATES,
};

fn main() -> rlcm::Result<()> {
    // states 0-2 overlap, 3 and 4 overlap, 5 and 6 stand alone
    let q = QMatrix::from_rows(
        &[
            b"110000000000001",
            b"011000000000001",
            b"001100000000000",
            b"000011000000110",
            b"000000110000110",
            b"000000001100000",
            b"000000000011000",
        ]
        .map(|r| r.iter().map(|c| c - b'0').collect::<Vec<u8>>()),
    )?;
    let (m, l) = (q.n_states(), q.n_features());
    println!("overlap blocks: {:?}", rcm_state_blocks(&q));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<u8>> = (0..8)
        .map(|_| (0..l).map(|_| rng.random_bool(0.4) as u8).collect())
        .collect();
    let y = BinaryDataMatrix::from_rows(&rows)?;
    let rates = RateParams::new(
        (0..l).map(|_| rng.random_range(0.7..0.95)).collect(),
        (0..l).map(|_| rng.random_range(0.02..0.2)).collect(),
    )?;
    let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..0.6)).collect();
    let members: Vec<usize> = (0..8).collect();

    for rule in [Rule::Dino, Rule::Dina] {
        let g = marginal_loglik_g(
            &y,
            &members,
            &q,
            rule,
            &LogRates::new(&rates),
            &p,
            DEFAULT_MAX_BLOCK_STATES,
        )?;
        let naive = brute_force(&rows, &q, rule, &rates, &p);
        println!(
            "{rule:?}: blockwise {g:.12}  brute force {naive:.12}  diff {:.1e}",
            (g - naive).abs()
        );
    }
    Ok(())
}

fn brute_force(rows: &[Vec<u8>], q: &QMatrix, rule: Rule, rates: &RateParams, p: &[f64]) -> f64 {
    let (m, l) = (q.n_states(), q.n_features());
    let terms: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            let on = |k: usize| mask >> k & 1 == 1;
            let mut lp: f64 = (0..m)
                .map(|k| if on(k) { p[k].ln() } else { (1.0 - p[k]).ln() })
                .sum();
            for c in 0..l {
                let gamma = match rule {
                    Rule::Dino => (0..m).any(|k| q.get(k, c) && on(k)),
                    Rule::Dina => (0..m).all(|k| !q.get(k, c) || on(k)),
                };
                let r = if gamma { rates.theta[c] } else { rates.psi[c] };
                lp += rows
                    .iter()
                    .map(|y| if y[c] == 1 { r.ln() } else { (1.0 - r).ln() })
                    .sum::<f64>();
            }
            lp
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
