//! Reading and writing data, partitions, configurations and chain files.
//!
//! Every writer goes through a temporary file in the target directory that
//! is renamed into place, so a reader never sees a half-written file.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::model::{BinaryDataMatrix, QMatrix, RateParams};
use crate::partition::Partition;
use crate::priors::PkFamily;
use crate::sampler::{ChainConfig, ChainMeta, ChainOutput, ChainStats, Draw};
use crate::simbench::{pi_a, pi_b, Method, SimDesign, StudyConfig};

pub const CHAIN_FORMAT: &str = "rlcm-chain";
pub const CHAIN_VERSION: u32 = 1;

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a headerless CSV of 0/1 cells, one row per line.
pub fn parse_binary_csv(text: &str) -> Result<BitMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(Error::Data(format!(
                    "line {line}, column {}: {cell:?} is not 0 or 1",
                    c + 1
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("no rows".into()));
    }
    BitMatrix::from_rows(&rows)
}

pub fn format_binary_csv(m: &BitMatrix) -> String {
    let mut out = String::with_capacity(m.n_rows() * (2 * m.n_cols() + 1));
    for r in 0..m.n_rows() {
        for c in 0..m.n_cols() {
            if c > 0 {
                out.push(',');
            }
            out.push(if m.get(r, c) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

fn read_bits(path: &Path) -> Result<BitMatrix> {
    parse_binary_csv(&read_text(path)?).map_err(|e| annotate(path, e))
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        Error::Dimension(m) => Error::Dimension(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn read_data(path: impl AsRef<Path>) -> Result<BinaryDataMatrix> {
    BinaryDataMatrix::new(read_bits(path.as_ref())?)
}

pub fn write_data(path: impl AsRef<Path>, y: &BinaryDataMatrix) -> Result<()> {
    write_atomic(path, format_binary_csv(y.bits()).as_bytes())
}

pub fn read_q(path: impl AsRef<Path>) -> Result<QMatrix> {
    QMatrix::new(read_bits(path.as_ref())?)
}

pub fn write_q(path: impl AsRef<Path>, q: &QMatrix) -> Result<()> {
    write_atomic(path, format_binary_csv(q.bits()).as_bytes())
}

/// Parses one block per line; subjects are 0-based indices separated by
/// commas or whitespace. Blank lines and `#` comments are skipped.
pub fn parse_partition(text: &str, n: usize) -> Result<Partition> {
    let mut blocks = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let block = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>().map_err(|_| {
                    Error::Data(format!("line {}: {t:?} is not a subject index", k + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        blocks.push(block);
    }
    Partition::from_blocks(&blocks, n)
}

pub fn format_partition(p: &Partition) -> String {
    let mut out = String::new();
    for b in p.blocks() {
        let items: Vec<String> = b.iter().map(|i| i.to_string()).collect();
        out.push_str(&items.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_partition(path: impl AsRef<Path>, n: usize) -> Result<Partition> {
    let path = path.as_ref();
    parse_partition(&read_text(path)?, n).map_err(|e| annotate(path, e))
}

pub fn write_partition(path: impl AsRef<Path>, p: &Partition) -> Result<()> {
    write_atomic(path, format_partition(p).as_bytes())
}

/// A flat `key = value` file. Keys are consumed by the `take` calls of the
/// command that reads it; whatever is left over is an unknown key.
#[derive(Clone, Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    base: Option<PathBuf>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value, got {line:?}",
                    k + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", k + 1)));
            }
            if let Some((first, _)) = entries.insert(key.clone(), (k + 1, value.trim().to_string()))
            {
                return Err(Error::Config(format!(
                    "line {}: key {key:?} already set on line {first}",
                    k + 1
                )));
            }
        }
        Ok(KeyValues {
            entries,
            base: None,
        })
    }

    /// Reads a file; relative paths inside it resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut kv = Self::parse(&read_text(path)?).map_err(|e| annotate(path, e))?;
        kv.base = path.parent().map(Path::to_path_buf);
        Ok(kv)
    }

    /// Sets or overrides a key, as a command-line flag does.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: bad value {v:?} for {key}"))),
        }
    }

    fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        Error::Config(format!("line {line}: bad list entry {t:?} for {key}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn take_path(&mut self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.take::<String>(key)?.map(|s| match &self.base {
            Some(b) if Path::new(&s).is_relative() => b.join(s),
            _ => PathBuf::from(s),
        }))
    }

    /// Fails on any key no reader has consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let list: Vec<String> = self
            .entries
            .iter()
            .map(|(k, (line, _))| format!("{k} (line {line})"))
            .collect();
        Err(Error::Config(format!("unknown keys: {}", list.join(", "))))
    }
}

/// Applies sampler and prior keys to `cfg`. Rates given as a single value
/// are repeated over the `l` features.
///
/// Keys: iterations, burn_in, thin, chains, seed, m_dagger, rule, mode,
/// split_merge_scans, gamma, pk (geometric|poisson), pk_param, alpha2,
/// a_beta, b_beta, alpha_grid, a_theta, b_theta, a_psi, b_psi, theta_lower,
/// psi_upper, p_init, tau1, max_block_states, max_states, fixed_alpha1,
/// fixed_theta, fixed_psi, fixed_q, partial_clusters, fix_partition,
/// prior_only.
pub fn apply_chain_keys(
    kv: &mut KeyValues,
    cfg: &mut ChainConfig,
    n: usize,
    l: usize,
) -> Result<()> {
    kv.take_into("iterations", &mut cfg.iterations)?;
    kv.take_into("burn_in", &mut cfg.burn_in)?;
    kv.take_into("thin", &mut cfg.thin)?;
    kv.take_into("chains", &mut cfg.n_chains)?;
    kv.take_into("seed", &mut cfg.seed)?;
    kv.take_into("m_dagger", &mut cfg.m_dagger)?;
    kv.take_into("rule", &mut cfg.rule)?;
    kv.take_into("mode", &mut cfg.mode)?;
    kv.take_into("split_merge_scans", &mut cfg.split_merge_scans)?;
    kv.take_into("p_init", &mut cfg.p_init)?;
    kv.take_into("tau1", &mut cfg.tau1)?;
    kv.take_into("max_block_states", &mut cfg.max_block_states)?;
    kv.take_into("fix_partition", &mut cfg.fix_partition)?;
    kv.take_into("prior_only", &mut cfg.prior_only)?;
    if let Some(v) = kv.take("max_states")? {
        cfg.max_states = Some(v);
    }
    if let Some(v) = kv.take("fixed_alpha1")? {
        cfg.fixed_alpha1 = Some(v);
    }

    let pr = &mut cfg.priors;
    kv.take_into("gamma", &mut pr.partition.gamma)?;
    let family: Option<String> = kv.take("pk")?;
    let param: Option<f64> = kv.take("pk_param")?;
    pr.partition.pk = match (family.as_deref(), param, pr.partition.pk) {
        (None, None, pk) => pk,
        (None | Some("geometric"), p, PkFamily::Geometric { success }) => PkFamily::Geometric {
            success: p.unwrap_or(success),
        },
        (Some("geometric"), p, _) => PkFamily::Geometric {
            success: p.unwrap_or(0.1),
        },
        (None | Some("poisson"), p, PkFamily::ShiftedPoisson { rate }) => {
            PkFamily::ShiftedPoisson {
                rate: p.unwrap_or(rate),
            }
        }
        (Some("poisson"), p, _) => PkFamily::ShiftedPoisson {
            rate: p.unwrap_or(1.0),
        },
        (Some(f), _, _) => {
            return Err(Error::Config(format!(
                "unknown pk family {f:?} (geometric|poisson)"
            )))
        }
    };
    kv.take_into("alpha2", &mut pr.alpha2)?;
    kv.take_into("a_beta", &mut pr.alpha.a_beta)?;
    kv.take_into("b_beta", &mut pr.alpha.b_beta)?;
    kv.take_into("alpha_grid", &mut pr.alpha.grid)?;
    kv.take_into("a_theta", &mut pr.a_theta)?;
    kv.take_into("b_theta", &mut pr.b_theta)?;
    kv.take_into("a_psi", &mut pr.a_psi)?;
    kv.take_into("b_psi", &mut pr.b_psi)?;
    if let Some(v) = kv.take("theta_lower")? {
        pr.theta_lower = Some(v);
    }
    if let Some(v) = kv.take("psi_upper")? {
        pr.psi_upper = Some(v);
    }

    let theta: Option<Vec<f64>> = kv.take_list("fixed_theta")?;
    let psi: Option<Vec<f64>> = kv.take_list("fixed_psi")?;
    match (theta, psi) {
        (None, None) => {}
        (Some(t), Some(p)) => {
            let spread = |v: Vec<f64>| if v.len() == 1 { vec![v[0]; l] } else { v };
            cfg.fixed_rates = Some(RateParams::new(spread(t), spread(p))?);
        }
        _ => {
            return Err(Error::Config(
                "fixed_theta and fixed_psi go together".into(),
            ))
        }
    }
    if let Some(p) = kv.take_path("fixed_q")? {
        cfg.fixed_q = Some(read_q(p)?);
    }
    if let Some(p) = kv.take_path("partial_clusters")? {
        cfg.partial_clusters = Some(read_partition(p, n)?);
    }
    Ok(())
}

/// Applies simulation keys: l, n, m, theta0, psi0, s, pi0 (pi_a, pi_b or a
/// comma list of 2^M probabilities), replications, seed.
pub fn apply_design_keys(kv: &mut KeyValues, d: &mut SimDesign) -> Result<()> {
    kv.take_into("l", &mut d.l)?;
    kv.take_into("n", &mut d.n)?;
    let m_given = kv.take("m")?;
    if let Some(m) = m_given {
        d.m = m;
    }
    kv.take_into("theta0", &mut d.theta0)?;
    kv.take_into("psi0", &mut d.psi0)?;
    kv.take_into("s", &mut d.s)?;
    kv.take_into("replications", &mut d.replications)?;
    kv.take_into("seed", &mut d.seed)?;
    let pi0: Option<String> = kv.take("pi0")?;
    d.pi0 = match pi0.as_deref() {
        Some("pi_a") => pi_a(d.m),
        Some("pi_b") => pi_b(d.m),
        Some(list) => list
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad pi0 entry {t:?}")))
            })
            .collect::<Result<_>>()?,
        None if m_given.is_some() && d.pi0.len() != 1 << d.m => match d.pi0_label().as_str() {
            "pi_a" => pi_a(d.m),
            _ => pi_b(d.m),
        },
        None => std::mem::take(&mut d.pi0),
    };
    d.validate()
}

/// Which designs a benchmark runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    /// One design built from the design keys.
    Single,
    /// The full factorial replication grid.
    Factorial,
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Grid::Single),
            "factorial" => Ok(Grid::Factorial),
            _ => Err(Error::Config(format!(
                "unknown grid {s:?} (single|factorial)"
            ))),
        }
    }
}

/// Benchmark configuration: `grid`, `methods`, `lca_classes`, `hc_k`,
/// `lca_iterations`, `lca_burn_in`, then design keys (for the single grid,
/// or `m`, `replications` and `seed` for the factorial one) and chain keys.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub designs: Vec<SimDesign>,
    pub study: StudyConfig,
}

pub fn parse_bench_config(mut kv: KeyValues) -> Result<BenchConfig> {
    let mut study = StudyConfig::default();
    let grid: Grid = kv.take("grid")?.unwrap_or(Grid::Single);
    if let Some(m) = kv.take_list::<Method>("methods")? {
        study.methods = m;
    }
    if let Some(k) = kv.take("lca_classes")? {
        study.lca_classes = Some(k);
    }
    if let Some(k) = kv.take("hc_k")? {
        study.hc_k = Some(k);
    }
    kv.take_into("lca_iterations", &mut study.lca_iterations)?;
    kv.take_into("lca_burn_in", &mut study.lca_burn_in)?;
    let designs = match grid {
        Grid::Single => {
            let mut d = SimDesign::simulation1(1);
            d.replications = 10;
            apply_design_keys(&mut kv, &mut d)?;
            vec![d]
        }
        Grid::Factorial => {
            let m = kv.take("m")?.unwrap_or(3);
            let reps = kv.take("replications")?.unwrap_or(10);
            let seed = kv.take("seed")?.unwrap_or(1);
            crate::simbench::simulation2_grid(m, reps, seed)
        }
    };
    let (n, l) = designs.first().map_or((0, 0), |d| (d.n, d.l));
    apply_chain_keys(&mut kv, &mut study.chain, n, l)?;
    if study.chain.fixed_rates.is_some()
        || study.chain.partial_clusters.is_some()
        || study.chain.fixed_q.is_some()
    {
        return Err(Error::Config(
            "benchmarks cannot fix Q, rates or clusters".into(),
        ));
    }
    kv.finish()?;
    Ok(BenchConfig { designs, study })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header {
        format: String,
        version: u32,
        meta: ChainMeta,
        config: ChainConfig,
    },
    Draw(Draw),
    Stats(ChainStats),
}

/// A chain as stored on disk: a header record, one record per retained
/// draw, and a closing record with move statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainFile {
    pub config: ChainConfig,
    pub output: ChainOutput,
}

pub fn format_chain(output: &ChainOutput, config: &ChainConfig) -> Result<String> {
    let mut out = String::new();
    let mut push = |r: &Record| -> Result<()> {
        out.push_str(
            &serde_json::to_string(r)
                .map_err(|e| Error::Data(format!("cannot serialize chain: {e}")))?,
        );
        out.push('\n');
        Ok(())
    };
    push(&Record::Header {
        format: CHAIN_FORMAT.into(),
        version: CHAIN_VERSION,
        meta: output.meta.clone(),
        config: config.clone(),
    })?;
    for d in &output.draws {
        push(&Record::Draw(d.clone()))?;
    }
    push(&Record::Stats(output.stats))?;
    Ok(out)
}

pub fn write_chain(
    path: impl AsRef<Path>,
    output: &ChainOutput,
    config: &ChainConfig,
) -> Result<()> {
    write_atomic(path, format_chain(output, config)?.as_bytes())
}

pub fn parse_chain(reader: impl BufRead) -> Result<ChainFile> {
    let mut header = None;
    let mut draws = Vec::new();
    let mut stats = None;
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Data(format!("line {}: {e}", k + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("line {}: {e}", k + 1)))?;
        match (rec, header.is_some(), stats.is_some()) {
            (
                Record::Header {
                    format,
                    version,
                    meta,
                    config,
                },
                false,
                _,
            ) => {
                if format != CHAIN_FORMAT || version != CHAIN_VERSION {
                    return Err(Error::Data(format!(
                        "unsupported chain format {format} v{version}"
                    )));
                }
                if config.hash() != meta.config_hash {
                    return Err(Error::Data("header config does not match its hash".into()));
                }
                header = Some((meta, config));
            }
            (Record::Draw(d), true, false) => draws.push(d),
            (Record::Stats(s), true, false) => stats = Some(s),
            _ => return Err(Error::Data(format!("line {}: record out of order", k + 1))),
        }
    }
    let Some((meta, config)) = header else {
        return Err(Error::Data("empty chain file".into()));
    };
    let Some(stats) = stats else {
        return Err(Error::Data(
            "truncated chain file (no closing record)".into(),
        ));
    };
    Ok(ChainFile {
        config,
        output: ChainOutput { meta, draws, stats },
    })
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<ChainFile> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_chain(BufReader::new(f)).map_err(|e| annotate(path, e))
}

/// File name of chain `c` inside an output directory.
pub fn chain_file_name(c: usize) -> String {
    format!("chain_{c}.jsonl")
}
