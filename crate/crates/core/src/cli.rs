//! The `rlcm` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad data or configuration,
//! 3 numerical or capacity failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{convergence_table, run_ppc, ConvergenceRow, RHAT_THRESHOLD};
use crate::error::{Error, Result};
use crate::io::{
    apply_chain_keys, apply_design_keys, chain_file_name, format_binary_csv, parse_bench_config,
    read_chain, read_data, write_atomic, write_chain, write_data, write_partition, write_q,
    KeyValues,
};
use crate::model::Rule;
use crate::sampler::{run_chains, ChainConfig, ChainOutput, Mode};
use crate::simbench::{gen_data, gen_q, run_replication_study, CellSummary, SimDesign};
use crate::summaries::{
    coclustering, ls_clustering, posterior_t_tilde, scientific_coclustering,
    scientific_ls_clustering, select_q_ls, state_marginals, Conditioning, CountSummary,
    LsClustering, QSelection,
};

#[derive(Debug, Parser)]
#[command(
    name = "rlcm",
    version,
    about = "Bayesian restricted latent class models for binary data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a data set from a simulation design.
    Simulate {
        /// key = value design file (l, n, m, theta0, psi0, s, pi0, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the design file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for data.csv, q.csv, h.csv, partition.txt and design.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run MCMC chains on a 0/1 CSV and write one chain file per chain.
    Fit {
        /// N×L 0/1 CSV without a header.
        data: PathBuf,
        #[command(flatten)]
        chain: ChainFlags,
        /// Directory for chain_<c>.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior summaries from chain files.
    Summarize {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Directory for summary files; without it only a digest is printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gelman-Rubin and Geweke diagnostics from chain files.
    Diagnose {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Also write diagnostics.json to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior predictive checks of marginal means and pairwise log odds ratios.
    Ppc {
        data: PathBuf,
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Replicated data sets; defaults to one per retained draw.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the full report as ppc.json to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replication study comparing RLCM, hierarchical clustering and LCA.
    Bench {
        /// key = value study file: grid, methods, design and chain keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for bench_summary.csv and bench_records.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Sampler settings; flags override the config file.
#[derive(Debug, Args)]
pub struct ChainFlags {
    /// key = value file with any sampler or prior setting.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Total iterations per chain, burn-in included.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// finite (truncated at m_dagger states) or infinite.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// dino or dina.
    #[arg(long)]
    pub rule: Option<Rule>,
    /// M×L 0/1 CSV; Q is then held fixed.
    #[arg(long)]
    pub fixed_q: Option<PathBuf>,
    /// Must-link blocks, one line of 0-based subject indices per block.
    #[arg(long)]
    pub partial_clusters: Option<PathBuf>,
}

impl ChainFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self, n: usize, l: usize) -> Result<ChainConfig> {
        let mut kv = match &self.config {
            Some(p) => KeyValues::read(p)?,
            None => KeyValues::default(),
        };
        let abs = |p: &Path| {
            std::env::current_dir()
                .map(|d| d.join(p))
                .unwrap_or_else(|_| p.to_path_buf())
        };
        let set = |kv: &mut KeyValues, k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.set(k, v);
            }
        };
        set(&mut kv, "seed", self.seed.map(|v| v.to_string()));
        set(&mut kv, "chains", self.chains.map(|v| v.to_string()));
        set(
            &mut kv,
            "iterations",
            self.iterations.map(|v| v.to_string()),
        );
        set(&mut kv, "burn_in", self.burn_in.map(|v| v.to_string()));
        set(&mut kv, "thin", self.thin.map(|v| v.to_string()));
        set(&mut kv, "mode", self.mode.map(|v| format!("{v:?}")));
        set(&mut kv, "rule", self.rule.map(|v| format!("{v:?}")));
        set(
            &mut kv,
            "fixed_q",
            self.fixed_q
                .as_deref()
                .map(|p| abs(p).display().to_string()),
        );
        set(
            &mut kv,
            "partial_clusters",
            self.partial_clusters
                .as_deref()
                .map(|p| abs(p).display().to_string()),
        );
        let mut cfg = ChainConfig::default();
        apply_chain_keys(&mut kv, &mut cfg, n, l)?;
        kv.finish()?;
        cfg.validate(n, l)?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("cannot serialize: {e}")))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, seed, out } => cmd_simulate(config.as_deref(), seed, &out),
        Command::Fit { data, chain, out } => cmd_fit(&data, &chain, &out).map(|_| ()),
        Command::Summarize { chains, out } => cmd_summarize(&chains, out.as_deref()),
        Command::Diagnose { chains, out } => cmd_diagnose(&chains, out.as_deref()),
        Command::Ppc {
            data,
            chains,
            replicates,
            seed,
            out,
        } => cmd_ppc(&data, &chains, replicates, seed, out.as_deref()),
        Command::Bench { config, seed, out } => cmd_bench(config.as_deref(), seed, &out),
    }
}

/// Writes data.csv, q.csv, h.csv, partition.txt and design.json.
pub fn cmd_simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut kv = match config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let mut design = SimDesign::simulation1(1);
    apply_design_keys(&mut kv, &mut design)?;
    kv.finish()?;
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let q = gen_q(design.m, design.l, design.s, &mut rng)?;
    let sim = gen_data(&design, &q, &mut rng)?;
    create_dir(out)?;
    write_data(out.join("data.csv"), &sim.y)?;
    write_q(out.join("q.csv"), &q)?;
    write_atomic(
        out.join("h.csv"),
        format_binary_csv(sim.h.bits()).as_bytes(),
    )?;
    write_partition(out.join("partition.txt"), &sim.partition)?;
    write_json(&out.join("design.json"), &design)?;
    println!(
        "simulated N = {}, L = {}, M = {} with {} latent classes into {}",
        design.n,
        design.l,
        design.m,
        sim.partition.n_blocks(),
        out.display()
    );
    Ok(())
}

/// Fits every chain and writes `chain_<c>.jsonl` files; returns their paths.
pub fn cmd_fit(data: &Path, flags: &ChainFlags, out: &Path) -> Result<Vec<PathBuf>> {
    let y = read_data(data)?;
    let cfg = flags.resolve(y.n_subjects(), y.n_features())?;
    let outputs = run_chains(&y, &cfg)?;
    create_dir(out)?;
    let mut paths = Vec::new();
    for o in &outputs {
        let p = out.join(chain_file_name(o.meta.chain));
        write_chain(&p, o, &cfg)?;
        println!(
            "chain {}: {} draws, final log posterior {:.2} -> {}",
            o.meta.chain,
            o.draws.len(),
            o.draws.last().map_or(f64::NAN, |d| d.log_post),
            p.display()
        );
        paths.push(p);
    }
    Ok(paths)
}

/// Reads chain files of one run, ordered by chain index.
pub fn read_chains(paths: &[PathBuf]) -> Result<(Vec<ChainOutput>, ChainConfig)> {
    let mut files = paths.iter().map(read_chain).collect::<Result<Vec<_>>>()?;
    files.sort_by_key(|f| f.output.meta.chain);
    let first = files
        .first()
        .ok_or_else(|| Error::Data("no chain files".into()))?;
    let config = first.config.clone();
    if files
        .iter()
        .any(|f| f.output.meta.config_hash != first.output.meta.config_hash)
    {
        return Err(Error::Data(
            "chain files come from different configurations".into(),
        ));
    }
    if files
        .windows(2)
        .any(|w| w[0].output.meta.chain == w[1].output.meta.chain)
    {
        return Err(Error::Data("the same chain was given twice".into()));
    }
    if files.iter().all(|f| f.output.draws.is_empty()) {
        return Err(Error::Data("chain files hold no retained draws".into()));
    }
    Ok((files.into_iter().map(|f| f.output).collect(), config))
}

#[derive(Debug, Serialize)]
struct Summary {
    n_draws: usize,
    clusters: CountSummary,
    scientific_clusters: CountSummary,
    ls: LsClustering,
    scientific_ls: LsClustering,
    selected_q: Option<QSelection>,
}

pub fn cmd_summarize(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let (outputs, _) = read_chains(paths)?;
    let pi = coclustering(&outputs)?;
    let spi = scientific_coclustering(&outputs)?;
    let n_clusters: Vec<usize> = outputs
        .iter()
        .flat_map(|o| o.draws.iter().map(|d| d.n_clusters()))
        .collect();
    let summary = Summary {
        n_draws: n_clusters.len(),
        clusters: CountSummary::from_values(&n_clusters)?,
        scientific_clusters: posterior_t_tilde(&outputs)?,
        ls: ls_clustering(&outputs, &pi)?,
        scientific_ls: scientific_ls_clustering(&outputs, &spi)?,
        selected_q: select_q_ls(&outputs).ok(),
    };
    println!("retained draws: {}", summary.n_draws);
    let show = |name: &str, c: &CountSummary| {
        println!(
            "{name}: median {} (95% interval {}-{})",
            c.median, c.lower, c.upper
        )
    };
    show("clusters", &summary.clusters);
    show("scientific clusters", &summary.scientific_clusters);
    println!(
        "least-squares scientific clustering: {} blocks (chain {}, iteration {})",
        summary.scientific_ls.partition.n_blocks(),
        summary.scientific_ls.chain,
        summary.scientific_ls.iteration
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut csv = String::new();
        for i in 0..spi.n() {
            let row: Vec<String> = spi.row(i).iter().map(|v| v.to_string()).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_atomic(dir.join("coclustering.csv"), csv.as_bytes())?;
        write_partition(dir.join("ls_partition.txt"), &summary.ls.partition)?;
        write_partition(
            dir.join("scientific_partition.txt"),
            &summary.scientific_ls.partition,
        )?;
        if let Some(q) = &summary.selected_q {
            write_q(dir.join("selected_q.csv"), &q.q)?;
        }
        if let Ok(m) = state_marginals(&outputs, Conditioning::None) {
            let mut csv = String::new();
            for row in &m.probs {
                let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            write_atomic(dir.join("state_marginals.csv"), csv.as_bytes())?;
        }
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn format_row(r: &ConvergenceRow) -> String {
    let rhat = r.rhat.map_or("-".to_string(), |g| format!("{:.3}", g.rhat));
    let gw: Vec<String> = r
        .geweke
        .iter()
        .map(|g| {
            g.and_then(|g| g.z)
                .map_or("-".into(), |z| format!("{z:.2}"))
        })
        .collect();
    format!(
        "{}\t{rhat}\t{}\t{}",
        r.parameter,
        gw.join("\t"),
        if r.flagged() { "FLAG" } else { "" }
    )
}

pub fn cmd_diagnose(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let (outputs, _) = read_chains(paths)?;
    let table = convergence_table(&outputs);
    let heads: Vec<String> = outputs
        .iter()
        .map(|o| format!("geweke_{}", o.meta.chain))
        .collect();
    println!("parameter\trhat\t{}\tflag", heads.join("\t"));
    for r in &table {
        println!("{}", format_row(r));
    }
    let flagged = table.iter().filter(|r| r.flagged()).count();
    println!(
        "{flagged} of {} monitored quantities flagged (R-hat > {RHAT_THRESHOLD} or |z| > 2)",
        table.len()
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("diagnostics.json"), &table)?;
    }
    Ok(())
}

pub fn cmd_ppc(
    data: &Path,
    paths: &[PathBuf],
    replicates: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let y = read_data(data)?;
    let (outputs, config) = read_chains(paths)?;
    let report = run_ppc(&y, &outputs, config.rule, replicates, seed)?;
    println!("replicates: {}", report.n_replicates);
    println!(
        "marginal means covered: {:.1}%",
        100.0 * report.mean_coverage()
    );
    println!(
        "pairwise log odds ratios covered: {:.1}%",
        100.0 * report.lor_coverage()
    );
    println!(
        "pairs flagged by SLORD: {} of {}",
        report.slord_flags(),
        report.lors.len()
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("ppc.json"), &report)?;
    }
    Ok(())
}

pub fn cmd_bench(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut kv = match config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let bench = parse_bench_config(kv)?;
    let results = run_replication_study(&bench.designs, &bench.study)?;
    create_dir(out)?;
    let mut csv = String::from(CellSummary::CSV_HEADER);
    csv.push('\n');
    for s in &results.summary {
        csv.push_str(&s.csv_row());
        csv.push('\n');
    }
    write_atomic(out.join("bench_summary.csv"), csv.as_bytes())?;
    let mut lines = String::new();
    for r in &results.records {
        lines.push_str(&serde_json::to_string(r).map_err(|e| Error::Data(e.to_string()))?);
        lines.push('\n');
    }
    write_atomic(out.join("bench_records.jsonl"), lines.as_bytes())?;
    print!("{csv}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::adjusted_rand_index;
    use crate::io::read_partition;

    fn path(p: &Path) -> String {
        p.display().to_string()
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["rlcm"]), 1);
        assert_eq!(run(["rlcm", "fit"]), 1);
        assert_eq!(
            run(["rlcm", "fit", "x.csv", "--out", "o", "--mode", "sideways"]),
            1
        );
        assert_eq!(run(["rlcm", "--help"]), 0);
    }

    #[test]
    fn data_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert_eq!(run(["rlcm", "summarize", &path(&empty)]), 2);
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "0,1\n1,x\n").unwrap();
        assert_eq!(
            run(["rlcm", "fit", &path(&bad), "--out", &path(dir.path())]),
            2
        );
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
        assert_eq!(
            run([
                "rlcm",
                "simulate",
                "--config",
                &path(&cfg),
                "--out",
                &path(dir.path())
            ]),
            2
        );
    }

    #[test]
    fn capacity_errors_exit_three() {
        let e = Error::Capacity { size: 30, cap: 20 };
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
    }

    #[test]
    fn noiseless_end_to_end() {
        // with theta = 1 and psi = 0 every latent class is visible in the data
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(
            d.join("sim.txt"),
            "n = 30\nl = 20\nm = 2\ntheta0 = 1\npsi0 = 0\ns = 0.3\npi0 = pi_a\nseed = 5\n",
        )
        .unwrap();
        assert_eq!(
            run([
                "rlcm",
                "simulate",
                "--config",
                &path(&d.join("sim.txt")),
                "--out",
                &path(&d.join("sim"))
            ]),
            0
        );
        let data = d.join("sim/data.csv");
        let fit = d.join("fit");
        let code = run([
            "rlcm",
            "fit",
            &path(&data),
            "--iterations",
            "2000",
            "--burn-in",
            "1000",
            "--chains",
            "2",
            "--seed",
            "3",
            "--out",
            &path(&fit),
        ]);
        assert_eq!(code, 0);
        let chains = [fit.join("chain_0.jsonl"), fit.join("chain_1.jsonl")];
        let sum = d.join("sum");
        assert_eq!(
            run([
                "rlcm",
                "summarize",
                &path(&chains[0]),
                &path(&chains[1]),
                "--out",
                &path(&sum)
            ]),
            0
        );
        let truth = read_partition(d.join("sim/partition.txt"), 30).unwrap();
        let est = read_partition(sum.join("scientific_partition.txt"), 30).unwrap();
        assert_eq!(adjusted_rand_index(&est, &truth).unwrap(), 1.0);
        assert_eq!(
            run(["rlcm", "diagnose", &path(&chains[0]), &path(&chains[1])]),
            0
        );
        let ppc = [
            "rlcm",
            "ppc",
            &path(&data),
            &path(&chains[0]),
            &path(&chains[1]),
            "--replicates",
            "100",
        ];
        assert_eq!(run(ppc), 0);
    }

    #[test]
    fn fit_is_reproducible_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(
            run([
                "rlcm",
                "simulate",
                "--seed",
                "2",
                "--out",
                &path(&d.join("sim"))
            ]),
            0
        );
        let data = path(&d.join("sim/data.csv"));
        for (out, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
            let o = path(&d.join(out));
            assert_eq!(
                run([
                    "rlcm",
                    "fit",
                    &data,
                    "--iterations",
                    "40",
                    "--burn-in",
                    "20",
                    "--seed",
                    seed,
                    "--out",
                    &o
                ]),
                0
            );
        }
        let read = |o: &str| std::fs::read(d.join(o).join("chain_1.jsonl")).unwrap();
        assert_eq!(read("a"), read("b"));
        assert_ne!(read("a"), read("c"));
    }
}
