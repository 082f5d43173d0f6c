//! The mixture-of-finite-mixtures partition prior: V_N(t) coefficients,
//! EPPF values and the implied prior on the number of clusters.
//!
//! cargo run --release --example partition_prior -- [N]

use rlcm::priors::{PartitionPrior, PartitionPriorSpec, PkFamily};

fn main() -> rlcm::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(50);
    for spec in [
        PartitionPriorSpec::default(),
        PartitionPriorSpec {
            gamma: 1.0,
            pk: PkFamily::ShiftedPoisson { rate: 3.0 },
        },
        PartitionPriorSpec {
            gamma: 0.5,
            pk: PkFamily::Geometric { success: 0.1 },
        },
    ] {
        let prior = PartitionPrior::new(spec.clone())?;
        // P(T = t) = V_N(t) Σ over partitions with t blocks of Π (γ)^(n_j);
        // the inner sum obeys a Stirling-type recursion in N
        let lg = ln_block_weight_sums(n, spec.gamma);
        let mut pt = Vec::with_capacity(n);
        for t in 1..=n {
            pt.push((prior.log_vn(t, n)? + lg[t]).exp());
        }
        let total: f64 = pt.iter().sum();
        let mean: f64 = pt.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        let mode = pt
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
            + 1;
        println!("{spec:?}");
        println!("  N = {n}: total mass {total:.6}, E[T] = {mean:.2}, mode {mode}");
        for t in [1, 2, 5, 10] {
            println!("  log V_N({t}) = {:.4}", prior.log_vn(t, n)?);
        }
        let sizes = [n / 2, n - n / 2];
        println!(
            "  two halves vs one block: log EPPF {:.3} vs {:.3}",
            prior.log_eppf_sizes(&sizes)?,
            prior.log_eppf_sizes(&[n])?
        );
    }
    Ok(())
}

/// ln of Σ_{partitions of N into t blocks} Π_j Γ(n_j + γ)/Γ(γ), for t = 0..=N.
fn ln_block_weight_sums(n: usize, gamma: f64) -> Vec<f64> {
    // w[k][t]: k items in t blocks; item k+1 joins a block of size s
    // (weight s + γ summed over blocks gives k + tγ) or opens one (γ)
    let mut w = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    w[0][0] = 0.0;
    for k in 0..n {
        for t in 0..=k {
            if w[k][t] == f64::NEG_INFINITY {
                continue;
            }
            let stay = w[k][t] + (k as f64 + t as f64 * gamma).ln();
            let open = w[k][t] + gamma.ln();
            w[k + 1][t] = log_add(w[k + 1][t], stay);
            w[k + 1][t + 1] = log_add(w[k + 1][t + 1], open);
        }
    }
    w.swap_remove(n)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
