//! Which Q matrices identify the model: the double identity block (C1),
//! response separation over the remaining features (C2) and at least three
//! features per state (C3), plus random draws from the simulation generator.
//!
//! cargo run --release --example identifiability

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlcm::model::{QMatrix, Rule};
use rlcm::priors::{canonical_witness, check_c1, check_c2, check_c3, q_in_constraint_set};
use rlcm::simbench::gen_q;

fn parse(rows: &[&str]) -> rlcm::Result<QMatrix> {
    let rows: Vec<Vec<u8>> = rows
        .iter()
        .map(|r| r.bytes().map(|c| c - b'0').collect())
        .collect();
    QMatrix::from_rows(&rows)
}

// C2 is defined relative to the identity blocks, so it needs C1
fn c2(q: &QMatrix, rule: Rule) -> String {
    check_c2(q, rule).map_or_else(|_| "n/a".into(), |b| b.to_string())
}

fn main() -> rlcm::Result<()> {
    let cases = [
        (
            "identity blocks plus one own feature each",
            vec!["1010100", "0101010"],
        ),
        (
            "identity blocks plus a shared feature",
            vec!["1010100", "0101100"],
        ),
        ("a single identity block", vec!["1010", "0111"]),
        ("only two features for state 1", vec!["101011", "010100"]),
        (
            "three states, permuted columns",
            vec!["0010011001", "1000100100", "0100010011"],
        ),
    ];
    for (name, rows) in &cases {
        let q = parse(rows)?;
        println!("{name}:");
        println!(
            "  C1 {}  C3 {}  in set {}  C2 DINO {}  C2 DINA {}",
            check_c1(&q),
            check_c3(&q),
            q_in_constraint_set(&q),
            c2(&q, Rule::Dino),
            c2(&q, Rule::Dina)
        );
        if let Some(w) = canonical_witness(&q) {
            println!(
                "  identity blocks {:?} and {:?}, rest {:?}",
                w.first, w.second, w.rest
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in [0.1, 0.2, 0.4] {
        let q = gen_q(3, 50, s, &mut rng)?;
        let ones: Vec<usize> = (0..3).map(|k| q.row_sum(k)).collect();
        println!(
            "generated M = 3, L = 50, s = {s}: row sums {ones:?}, in set {}",
            q_in_constraint_set(&q)
        );
    }
    Ok(())
}
