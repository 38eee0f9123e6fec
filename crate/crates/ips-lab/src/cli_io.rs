//! Experiment runner: plain-text key=value configs, subcommand dispatch,
//! counter-based replica seeding, and CSV / JSON-lines outputs.
//!
//! Interface: `ips-lab <subcommand> [--config FILE] [--seed N] [--out DIR]
//! [KEY=VALUE ...]`. Inline pairs override file keys. Exit code 0 means all
//! verdicts passed.

use crate::bitset::BitSet;
use crate::braco_resem::{self, BracoParams, CountConfig, DensityConfig, ResemParams};
use crate::contact;
use crate::error::{Error, Result};
use crate::lattice::{
    build_lattice, hierarchical_base, kernel_from_base, nn_kernel, GroupLattice, Kernel,
    LatticeKind,
};
use crate::oracle;
use crate::pde_solvers::{self, DiffMatrixField, GridFn1D};
use crate::rngutil::stream_rng;
use crate::stats::mean_se;
use crate::wf_renorm::{self, CatalyzingFn, UEstimator};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Parsed experiment configuration: a subcommand plus key=value pairs.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub subcommand: String,
    keys: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(subcommand: &str) -> Self {
        ExperimentConfig {
            subcommand: subcommand.to_string(),
            keys: BTreeMap::new(),
        }
    }

    pub fn parse_text(subcommand: &str, text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::new(subcommand);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.set_pair(line).map_err(|e| {
                Error::config(format!("line {}", lineno + 1), e.to_string())
            })?;
        }
        Ok(cfg)
    }

    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| {
            Error::config(pair.to_string(), "expected KEY=VALUE".to_string())
        })?;
        self.keys
            .insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.keys.insert(key.to_string(), value.to_string());
    }

    /// Rejects any key not in the allowed list for the target operation.
    pub fn validate_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.keys.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::config(k.clone(), "unknown key".to_string()));
            }
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.keys
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.keys.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::config(key, format!("not a number: {v}"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.keys.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| Error::config(key, format!("not an integer: {v}"))),
        }
    }

    pub fn get_list_f64(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.keys.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(key, format!("bad list entry: {s}")))
                })
                .collect(),
        }
    }

    /// Hash over the semantic keys (everything except output locations);
    /// changes iff any semantic key changes.
    pub fn hash(&self) -> String {
        let mut canon = format!("{}\n", self.subcommand);
        for (k, v) in &self.keys {
            if k != "out" {
                let _ = writeln!(canon, "{k}={v}");
            }
        }
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::new();
        for b in &digest[..6] {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    /// `None` marks exact (non-statistical) values.
    pub se: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Grid-like payload a record may carry for plot-data export.
#[derive(Clone, Debug, Serialize)]
pub enum GridData {
    /// Rows of (x, columns...).
    Curve {
        header: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
    /// Named rows of (lhs, rhs, z).
    Table {
        header: Vec<String>,
        rows: Vec<(String, Vec<f64>)>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub stats: Vec<Statistic>,
    pub verdicts: Vec<VerdictEntry>,
    #[serde(skip)]
    pub grid: Option<GridData>,
}

impl ResultRecord {
    fn new(experiment: &str, hash: &str) -> Self {
        ResultRecord {
            experiment: experiment.to_string(),
            config_hash: hash.to_string(),
            stats: Vec::new(),
            verdicts: Vec::new(),
            grid: None,
        }
    }

    fn stat(&mut self, name: &str, value: f64, se: Option<f64>) {
        self.stats.push(Statistic {
            name: name.to_string(),
            value,
            se,
        });
    }

    fn verdict(&mut self, name: &str, pass: bool, detail: String) {
        self.verdicts.push(VerdictEntry {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Writes two/three-column whitespace-separated plot data.
pub fn emit_plotdata(record: &ResultRecord, path: &Path) -> Result<()> {
    let grid = record
        .grid
        .as_ref()
        .ok_or_else(|| Error::invalid("record carries no grid data"))?;
    let mut out = String::new();
    match grid {
        GridData::Curve { header, rows } => {
            let _ = writeln!(out, "# {}", header.join(" "));
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        GridData::Table { header, rows } => {
            let _ = writeln!(out, "# {}", header.join(" "));
            for (name, row) in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{name} {}", cells.join(" "));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push_str("\r\n");
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct JsonlWriter {
    file: Option<std::fs::File>,
}

impl JsonlWriter {
    fn create(path: Option<&Path>) -> Result<Self> {
        Ok(JsonlWriter {
            file: match path {
                Some(p) => Some(std::fs::File::create(p)?),
                None => None,
            },
        })
    }

    fn write(&mut self, value: &impl Serialize) -> Result<()> {
        if let Some(f) = &mut self.file {
            let line = serde_json::to_string(value).expect("serializable record");
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        Ok(())
    }
}

fn build_window(cfg: &ExperimentConfig) -> Result<(GroupLattice, Kernel)> {
    let kind = cfg.get_str("lattice", "torus");
    let lat = match kind.as_str() {
        "torus" => build_lattice(LatticeKind::Torus {
            dim: cfg.get_usize("dim", 1)?,
            len: cfg.get_usize("len", 32)?,
        })?,
        "tree" => build_lattice(LatticeKind::TreeBall {
            branching: cfg.get_usize("branching", 2)?,
            depth: cfg.get_usize("depth", 4)?,
        })?,
        "hier" => build_lattice(LatticeKind::Hierarchical {
            freedom: cfg.get_usize("freedom", 2)?,
            depth: cfg.get_usize("depth", 6)?,
        })?,
        other => return Err(Error::config("lattice", format!("unknown kind {other}"))),
    };
    let kernel = if kind == "hier" {
        let c = cfg.get_list_f64("migration", &[1.0])?;
        let base = hierarchical_base(&lat, &c)?;
        kernel_from_base(&lat, &base)?
    } else if lat.kind == (LatticeKind::Torus { dim: 1, len: lat.n_sites() })
        && (cfg.keys.contains_key("rate_right") || cfg.keys.contains_key("rate_left"))
    {
        let l = lat.n_sites();
        let right = cfg.get_f64("rate_right", 1.0)?;
        let left = cfg.get_f64("rate_left", 1.0)?;
        kernel_from_base(&lat, &[(1, right), (l - 1, left)])?
    } else {
        nn_kernel(&lat, cfg.get_f64("rate", 1.0)?)?
    };
    Ok((lat, kernel))
}

const WINDOW_KEYS: &[&str] = &[
    "lattice",
    "dim",
    "len",
    "branching",
    "depth",
    "freedom",
    "migration",
    "rate",
    "rate_right",
    "rate_left",
];

fn with_window_keys<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = WINDOW_KEYS.to_vec();
    v.extend_from_slice(extra);
    v.push("out");
    v
}

fn t_grid(t_max: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|i| t_max * i as f64 / points as f64).collect()
}

/// Dispatches a configuration to the owning operation. Deterministic given
/// `(config, seed)`.
pub fn run(cfg: &ExperimentConfig, seed: u64, outdir: Option<&Path>) -> Result<Vec<ResultRecord>> {
    if let Some(dir) = outdir {
        std::fs::create_dir_all(dir)?;
    }
    match cfg.subcommand.as_str() {
        "verify" => run_verify(cfg, seed, outdir),
        "contact" => run_contact(cfg, seed, outdir),
        "braco" => run_braco(cfg, seed, outdir),
        "resem" => run_resem(cfg, seed, outdir),
        "dualitytest" => run_dualitytest(cfg, seed, outdir),
        "renorm" => run_renorm(cfg, seed, outdir),
        "flow" => run_flow(cfg, seed, outdir),
        "pstar" => run_pstar(cfg, seed, outdir),
        "cauchy" => run_cauchy(cfg, seed, outdir),
        other => Err(Error::config(
            "subcommand",
            format!("unknown subcommand {other}"),
        )),
    }
}

#[derive(Serialize)]
struct BatchLine<'a> {
    experiment: &'a str,
    batch: usize,
    reps_done: usize,
    stat: &'a str,
    value: f64,
}

fn run_contact(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&with_window_keys(&[
        "delta", "tmax", "points", "reps", "init", "batch",
    ]))?;
    let (lat, kernel) = build_window(cfg)?;
    let delta = cfg.get_f64("delta", 1.0)?;
    let tmax = cfg.get_f64("tmax", 10.0)?;
    let points = cfg.get_usize("points", 20)?;
    let reps = cfg.get_usize("reps", 500)?;
    let batch = cfg.get_usize("batch", 100)?.max(1);
    let init = cfg.get_str("init", "origin");
    let a = match init.as_str() {
        "origin" => BitSet::from_sites(lat.n_sites(), &[lat.origin()]),
        "full" => BitSet::full(lat.n_sites()),
        other => return Err(Error::config("init", format!("unknown init {other}"))),
    };
    let grid = t_grid(tmax, points);
    let mut jsonl = JsonlWriter::create(outdir.map(|d| d.join("records.jsonl")).as_deref())?;
    let mut sizes: Vec<Vec<usize>> = Vec::with_capacity(reps);
    let mut batch_no = 0usize;
    while sizes.len() < reps {
        let todo = batch.min(reps - sizes.len());
        let start = sizes.len() as u64;
        let chunk = contact::size_series_range(
            &lat,
            &kernel,
            delta,
            &a,
            &grid,
            seed,
            start..start + todo as u64,
        );
        let final_mean =
            chunk.iter().map(|row| *row.last().unwrap() as f64).sum::<f64>() / todo as f64;
        sizes.extend(chunk);
        jsonl.write(&BatchLine {
            experiment: "contact",
            batch: batch_no,
            reps_done: sizes.len(),
            stat: "mean_size_at_tmax",
            value: final_mean,
        })?;
        batch_no += 1;
    }
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("contact", &hash);
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let vals: Vec<f64> = sizes.iter().map(|row| row[k] as f64).collect();
        let e = mean_se(&vals);
        rows.push(vec![format!("{t}"), format!("{}", e.value), format!("{}", e.se)]);
        curve.push(vec![t, e.value, e.se]);
    }
    if let Some(dir) = outdir {
        write_csv(&dir.join("results.csv"), &["t", "mean", "se"], &rows)?;
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["t".into(), "mean".into(), "se".into()],
        rows: curve,
    });
    // growth-rate summary with its bracket check, reported on every run
    let growth = contact::estimate_growth_rate(&lat, &kernel, delta, &a, &grid, reps, seed)?;
    rec.stat("growth_rate", growth.rate, None);
    rec.stat("growth_ci_lo", growth.ci.0, None);
    rec.stat("growth_ci_hi", growth.ci.1, None);
    let in_bracket =
        growth.ci.1 >= growth.bracket.0 && growth.ci.0 <= growth.bracket.1;
    rec.verdict(
        "growth_rate_bracket",
        in_bracket,
        format!(
            "r^ = {:.4} in [{:.4}, {:.4}], bracket [{}, {}]",
            growth.rate, growth.ci.0, growth.ci.1, growth.bracket.0, growth.bracket.1
        ),
    );
    Ok(vec![rec])
}

fn parse_init_counts(cfg: &ExperimentConfig, n: usize) -> Result<(String, Option<CountConfig>)> {
    let init = cfg.get_str("init", "pois:1");
    if let Some(rest) = init.strip_prefix("uniform:") {
        let k: u32 = rest
            .parse()
            .map_err(|_| Error::config("init", format!("bad uniform count {rest}")))?;
        return Ok((init.clone(), Some(CountConfig::uniform(n, k))));
    }
    if init.starts_with("pois:") {
        return Ok((init, None)); // drawn per replica
    }
    Err(Error::config("init", format!("unknown init {init}")))
}

fn run_braco(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&with_window_keys(&[
        "b", "c", "d", "tmax", "points", "reps", "init", "batch",
    ]))?;
    let (lat, kernel) = build_window(cfg)?;
    let n = lat.n_sites();
    let params = BracoParams::new(
        cfg.get_f64("b", 1.0)?,
        cfg.get_f64("c", 1.0)?,
        cfg.get_f64("d", 1.0)?,
    );
    let tmax = cfg.get_f64("tmax", 10.0)?;
    let points = cfg.get_usize("points", 20)?;
    let reps = cfg.get_usize("reps", 200)?;
    let batch = cfg.get_usize("batch", 50)?.max(1);
    let (init_desc, fixed_init) = parse_init_counts(cfg, n)?;
    let pois_mean: Option<f64> = init_desc
        .strip_prefix("pois:")
        .map(|rest| rest.parse::<f64>().unwrap_or(1.0));
    let grid = t_grid(tmax, points);
    let mut jsonl = JsonlWriter::create(outdir.map(|d| d.join("records.jsonl")).as_deref())?;
    let mut totals = vec![Vec::with_capacity(reps); grid.len()];
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let x0 = match (&fixed_init, pois_mean) {
            (Some(x0), _) => x0.clone(),
            (None, Some(mean)) => braco_resem::pois(&vec![mean; n], &mut rng),
            _ => unreachable!(),
        };
        let series = braco_resem::braco_series(&kernel, &params, &x0, &grid, &mut rng)?;
        for (k, cc) in series.iter().enumerate() {
            totals[k].push(cc.total() as f64 / n as f64);
        }
        if (r + 1) % batch == 0 || r + 1 == reps {
            jsonl.write(&BatchLine {
                experiment: "braco",
                batch: r / batch,
                reps_done: r + 1,
                stat: "mean_per_site_at_tmax",
                value: totals.last().unwrap().iter().sum::<f64>() / (r + 1) as f64,
            })?;
        }
    }
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("braco", &hash);
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let e = mean_se(&totals[k]);
        rows.push(vec![format!("{t}"), format!("{}", e.value), format!("{}", e.se)]);
        curve.push(vec![t, e.value, e.se]);
    }
    if let Some(dir) = outdir {
        write_csv(
            &dir.join("results.csv"),
            &["t", "mean_per_site", "se"],
            &rows,
        )?;
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["t".into(), "mean_per_site".into(), "se".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_resem(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&with_window_keys(&[
        "b", "c", "d", "dt", "tmax", "points", "reps", "phi0", "batch",
    ]))?;
    let (lat, kernel) = build_window(cfg)?;
    let n = lat.n_sites();
    let params = ResemParams::new(
        cfg.get_f64("b", 1.0)?,
        cfg.get_f64("c", 1.0)?,
        cfg.get_f64("d", 1.0)?,
        cfg.get_f64("dt", 1e-3)?,
    );
    let tmax = cfg.get_f64("tmax", 10.0)?;
    let points = cfg.get_usize("points", 20)?;
    let reps = cfg.get_usize("reps", 200)?;
    let batch = cfg.get_usize("batch", 50)?.max(1);
    let phi0 = DensityConfig::constant(n, cfg.get_f64("phi0", 0.5)?);
    let grid = t_grid(tmax, points);
    let mut jsonl = JsonlWriter::create(outdir.map(|d| d.join("records.jsonl")).as_deref())?;
    let mut masses = vec![Vec::with_capacity(reps); grid.len()];
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let series = braco_resem::resem_series(&kernel, &params, &phi0, &grid, &mut rng);
        for (k, dc) in series.iter().enumerate() {
            masses[k].push(dc.mass() / n as f64);
        }
        if (r + 1) % batch == 0 || r + 1 == reps {
            jsonl.write(&BatchLine {
                experiment: "resem",
                batch: r / batch,
                reps_done: r + 1,
                stat: "mean_density_at_tmax",
                value: masses.last().unwrap().iter().sum::<f64>() / (r + 1) as f64,
            })?;
        }
    }
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("resem", &hash);
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let e = mean_se(&masses[k]);
        rows.push(vec![format!("{t}"), format!("{}", e.value), format!("{}", e.se)]);
        curve.push(vec![t, e.value, e.se]);
    }
    if let Some(dir) = outdir {
        write_csv(
            &dir.join("results.csv"),
            &["t", "mean_density", "se"],
            &rows,
        )?;
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["t".into(), "mean_density".into(), "se".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_dualitytest(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&with_window_keys(&[
        "which", "b", "c", "d", "t", "dt", "reps", "phi", "psi", "x",
    ]))?;
    let (lat, kernel) = build_window(cfg)?;
    let n = lat.n_sites();
    let b = cfg.get_f64("b", 1.0)?;
    let c = cfg.get_f64("c", 1.0)?;
    let d = cfg.get_f64("d", 1.0)?;
    let t = cfg.get_f64("t", 1.0)?;
    let dt = cfg.get_f64("dt", 1e-3)?;
    let reps = cfg.get_usize("reps", 4000)?;
    let which = cfg.get_str("which", "all");
    let phi_list = cfg.get_list_f64("phi", &[0.5])?;
    let psi_list = cfg.get_list_f64("psi", &[0.5])?;
    let expand = |vals: &[f64]| -> Vec<f64> {
        if vals.len() == 1 {
            vec![vals[0]; n]
        } else {
            vals.to_vec()
        }
    };
    let phi = DensityConfig::from_values(expand(&phi_list));
    let psi = DensityConfig::from_values(expand(&psi_list));
    let x_list = cfg.get_list_f64("x", &[1.0])?;
    let x_counts: Vec<u32> = if x_list.len() == 1 {
        let mut v = vec![0u32; n];
        v[lat.origin()] = x_list[0] as u32;
        v
    } else {
        x_list.iter().map(|&v| v as u32).collect()
    };
    let x = CountConfig { counts: x_counts };
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("dualitytest", &hash);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let add = |rec: &mut ResultRecord,
                   rows: &mut Vec<(String, Vec<f64>)>,
                   name: &str,
                   test: braco_resem::TwoSidedTest| {
        rows.push((
            name.to_string(),
            vec![test.lhs.value, test.rhs.value, test.z],
        ));
        rec.stat(&format!("{name}_lhs"), test.lhs.value, Some(test.lhs.se));
        rec.stat(&format!("{name}_rhs"), test.rhs.value, Some(test.rhs.se));
        rec.verdict(name, test.z.abs() < 4.0, format!("z = {:.3}", test.z));
    };
    if which == "all" || which == "duality" {
        let r = braco_resem::duality_test(&kernel, b, c, d, &x, &phi, t, dt, reps, seed)?;
        add(&mut rec, &mut rows, "duality", r);
    }
    if which == "all" || which == "self" {
        let r =
            braco_resem::selfduality_test(&kernel, b, c, d, &phi, &psi, t, dt, reps, seed ^ 1)?;
        add(&mut rec, &mut rows, "selfduality", r);
    }
    if which == "all" || which == "pois" {
        let r = braco_resem::poissonization_test(
            &kernel,
            b,
            c,
            d,
            &phi,
            std::slice::from_ref(&psi),
            t,
            dt,
            reps,
            seed ^ 2,
        )?;
        for (i, test) in r.into_iter().enumerate() {
            add(&mut rec, &mut rows, &format!("poissonization_{i}"), test);
        }
    }
    if let Some(dir) = outdir {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|(name, v)| {
                vec![
                    name.clone(),
                    format!("{}", v[0]),
                    format!("{}", v[1]),
                    format!("{}", v[2]),
                ]
            })
            .collect();
        write_csv(
            &dir.join("results.csv"),
            &["name", "lhs", "rhs", "z"],
            &csv_rows,
        )?;
    }
    rec.grid = Some(GridData::Table {
        header: vec!["name".into(), "lhs".into(), "rhs".into(), "z".into()],
        rows,
    });
    Ok(vec![rec])
}

fn parse_catalyzing(name: &str, m: usize) -> Result<CatalyzingFn> {
    Ok(match name {
        "x" | "h1" => CatalyzingFn::h1(m),
        "h00" => CatalyzingFn::h00(m),
        "h01" => CatalyzingFn::h01(m),
        other => {
            if let Some(v) = other.strip_prefix("const:") {
                let r: f64 = v
                    .parse()
                    .map_err(|_| Error::config("p0", format!("bad constant {v}")))?;
                CatalyzingFn::constant(m, r)
            } else {
                return Err(Error::config("p0", format!("unknown function {other}")));
            }
        }
    })
}

fn run_renorm(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&["p0", "gamma", "gammastar", "beta", "n", "mc", "m", "estimator", "out"])?;
    let m = cfg.get_usize("m", 40)?;
    let n = cfg.get_usize("n", 10)?;
    let mc = cfg.get_usize("mc", 20000)?;
    let p0 = parse_catalyzing(&cfg.get_str("p0", "x"), m)?;
    let gammas: Vec<f64> = if cfg.keys.contains_key("gammastar") {
        let gs = cfg.get_f64("gammastar", 1.0)?;
        let beta = cfg.get_f64("beta", 1.0)?;
        wf_renorm::GammaSchedule::geometric(gs, beta, n)?.gammas()
    } else {
        vec![cfg.get_f64("gamma", 1.0)?; n]
    };
    let estimator = match cfg.get_str("estimator", "loglaplace").as_str() {
        "loglaplace" => UEstimator::LogLaplace,
        "product" => UEstimator::Product,
        other => return Err(Error::config("estimator", format!("unknown {other}"))),
    };
    let iterates = wf_renorm::iterate_renorm(&p0, &gammas, mc, estimator, seed)?;
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("renorm", &hash);
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (it, iterate) in iterates.iter().enumerate() {
        for g in 0..iterate.p.grid_len() {
            let x = iterate.p.grid_x(g);
            let v = iterate.p.values()[g];
            let s = iterate.se[g];
            rows.push(vec![
                format!("{}", it + 1),
                format!("{x}"),
                format!("{v}"),
                format!("{s}"),
            ]);
            curve.push(vec![(it + 1) as f64, x, v, s]);
        }
    }
    if let Some(dir) = outdir {
        write_csv(
            &dir.join("results.csv"),
            &["iteration", "x", "value", "se"],
            &rows,
        )?;
    }
    let last = iterates.last().unwrap();
    rec.stat(
        "final_sup",
        last.p.values().iter().cloned().fold(0.0, f64::max),
        None,
    );
    rec.grid = Some(GridData::Curve {
        header: vec!["iteration".into(), "x".into(), "value".into(), "se".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_flow(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    let _ = seed;
    cfg.validate_keys(&["case", "m", "tend", "out"])?;
    let m = cfg.get_usize("m", 40)?;
    let tend = cfg.get_f64("tend", 15.0)?;
    let case = cfg.get_usize("case", 1)?;
    let w0 = match case {
        1 => DiffMatrixField::from_fns(
            m,
            |x1, _| 2.0 * x1 * (1.0 - x1),
            |_, _| 0.0,
            |_, x2| 0.5 * x2 * (1.0 - x2),
        ),
        2 => DiffMatrixField::catalytic(m, 1.0, &CatalyzingFn::h1(m)),
        4 => DiffMatrixField::catalytic(m, 1.0, &CatalyzingFn::h00(m)),
        other => {
            return Err(Error::config(
                "case",
                format!("supported cases are 1, 2, 4; got {other}"),
            ))
        }
    };
    let out = pde_solvers::flow_solve(&w0, tend)?;
    let residual = pde_solvers::flow_residual(&out.field);
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("flow", &hash);
    rec.stat("residual", residual, None);
    rec.stat("max_clip", out.max_clip, None);
    rec.stat("last_unit_change", out.last_unit_change, None);
    rec.verdict(
        "projection_clip_small",
        out.max_clip < 1e-6,
        format!("max clip {:.2e}", out.max_clip),
    );
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for i1 in 0..=m {
        for i2 in 0..=m {
            let id = out.field.idx(i1, i2);
            let x = i1 as f64 / m as f64;
            let y = i2 as f64 / m as f64;
            rows.push(vec![
                format!("{x}"),
                format!("{y}"),
                format!("{}", out.field.w11[id]),
                format!("{}", out.field.w12[id]),
                format!("{}", out.field.w22[id]),
            ]);
            curve.push(vec![
                x,
                y,
                out.field.w11[id],
                out.field.w12[id],
                out.field.w22[id],
            ]);
        }
    }
    if let Some(dir) = outdir {
        write_csv(
            &dir.join("results.csv"),
            &["x", "y", "w11", "w12", "w22"],
            &rows,
        )?;
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["x".into(), "y".into(), "w11".into(), "w12".into(), "w22".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_pstar(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    let _ = seed;
    cfg.validate_keys(&["alpha", "class", "out"])?;
    let alpha = cfg.get_f64("alpha", 1.0)?;
    let class = match cfg.get_str("class", "01").as_str() {
        "00" => (0, 0),
        "01" => (0, 1),
        "10" => (1, 0),
        "11" => (1, 1),
        other => return Err(Error::config("class", format!("unknown class {other}"))),
    };
    let sol = pde_solvers::pstar_shoot(alpha, class)?;
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("pstar", &hash);
    rec.stat("slope", sol.slope, None);
    rec.stat("residual", sol.residual, None);
    rec.stat("boundary_gap", sol.boundary_gap, None);
    rec.verdict(
        "residual_small",
        sol.residual < 1e-6,
        format!("residual {:.2e}", sol.residual),
    );
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (i, &v) in sol.grid.values.iter().enumerate() {
        let x = sol.grid.x(i);
        rows.push(vec![format!("{x}"), format!("{v}")]);
        curve.push(vec![x, v]);
    }
    if let Some(dir) = outdir {
        write_csv(&dir.join("results.csv"), &["x", "p"], &rows)?;
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["x".into(), "p".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_cauchy(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    let _ = seed;
    cfg.validate_keys(&["alpha", "f", "tend", "m", "snapshots", "out"])?;
    let alpha = cfg.get_f64("alpha", 1.0)?;
    let m = cfg.get_usize("m", 40)?;
    let tend = cfg.get_f64("tend", 40.0)?;
    let f = match cfg.get_str("f", "bump").as_str() {
        "zero" => GridFn1D::constant(m, 0.0),
        "bump" => GridFn1D::from_fn(m, |x| x * (1.0 - x)),
        "left" => GridFn1D::from_fn(m, |x| (1.0 - x) * (1.0 - x)),
        "right" => GridFn1D::from_fn(m, |x| x * x),
        "pstar01" => pde_solvers::pstar_shoot(alpha, (0, 1))?.grid,
        other => {
            if let Some(v) = other.strip_prefix("const:") {
                GridFn1D::constant(
                    m,
                    v.parse()
                        .map_err(|_| Error::config("f", format!("bad constant {v}")))?,
                )
            } else {
                return Err(Error::config("f", format!("unknown initial data {other}")));
            }
        }
    };
    let snaps = cfg.get_list_f64("snapshots", &[])?;
    let out = pde_solvers::cauchy_solve(&f, alpha, tend, &snaps)?;
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("cauchy", &hash);
    rec.stat("final_sup", out.final_state.sup_norm(), None);
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for (i, &v) in out.final_state.values.iter().enumerate() {
        let x = out.final_state.x(i);
        rows.push(vec![format!("{x}"), format!("{v}")]);
        curve.push(vec![x, v]);
    }
    if let Some(dir) = outdir {
        write_csv(&dir.join("results.csv"), &["x", "u"], &rows)?;
        for (k, (ts, snap)) in out.snapshots.iter().enumerate() {
            let rows: Vec<Vec<String>> = snap
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![format!("{}", snap.x(i)), format!("{v}")])
                .collect();
            write_csv(
                &dir.join(format!("snapshot_{k}_t{ts}.csv")),
                &["x", "u"],
                &rows,
            )?;
        }
    }
    rec.grid = Some(GridData::Curve {
        header: vec!["x".into(), "u".into()],
        rows: curve,
    });
    Ok(vec![rec])
}

fn run_verify(
    cfg: &ExperimentConfig,
    seed: u64,
    outdir: Option<&Path>,
) -> Result<Vec<ResultRecord>> {
    cfg.validate_keys(&["out"])?;
    let hash = cfg.hash();
    let mut rec = ResultRecord::new("verify", &hash);

    // exact oracle duality on 4-cycles, symmetric and drifted
    for (tag, base) in [
        ("symmetric", vec![(1usize, 1.0), (3usize, 1.0)]),
        ("asymmetric", vec![(1usize, 2.0), (3usize, 1.0)]),
    ] {
        let lat = build_lattice(LatticeKind::Torus { dim: 1, len: 4 })?;
        let k = kernel_from_base(&lat, &base)?;
        let kd = crate::lattice::reverse_kernel(&k);
        let qf = oracle::contact_generator(&lat, &k, 1.0)?;
        let qb = oracle::contact_generator(&lat, &kd, 1.0)?;
        let space = oracle::SubsetSpace { n_sites: 4 };
        let mut gap: f64 = 0.0;
        for &t in &[0.5, 1.0, 2.0] {
            for a in 0..space.size() {
                let pa = oracle::DistributionVector::point_mass(space.size(), a);
                let fa = oracle::transient_distribution(&qf, &pa, t, 1e-12)?;
                for b in 0..space.size() {
                    let pb = oracle::DistributionVector::point_mass(space.size(), b);
                    let fb = oracle::transient_distribution(&qb, &pb, t, 1e-12)?;
                    let lhs = oracle::prob_avoiding(space, &fa, &space.decode(b));
                    let rhs = oracle::prob_avoiding(space, &fb, &space.decode(a));
                    gap = gap.max((lhs - rhs).abs());
                }
            }
        }
        rec.verdict(
            &format!("oracle_duality_{tag}"),
            gap < 1e-9,
            format!("max gap {gap:.2e}"),
        );
    }

    // fixed-shape identity of the stationary moments
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let x = i as f64 / 40.0;
        for &gamma in &[0.5, 1.0, 2.0] {
            let lhs = wf_renorm::beta_moment(x, gamma, 1) - wf_renorm::beta_moment(x, gamma, 2);
            worst = worst.max((lhs - x * (1.0 - x) / (1.0 + gamma)).abs());
        }
    }
    rec.verdict(
        "wf_fixed_shape_identity",
        worst < 1e-12,
        format!("max defect {worst:.2e}"),
    );

    // immortal-particle kernel moment at the boundary
    let kyy = wf_renorm::kyy_moment(0.0, 1.0);
    rec.verdict(
        "kyy_boundary_value",
        (kyy - 1.0 / 6.0).abs() < 1e-14,
        format!("K moment at (0, 1) = {kyy}"),
    );

    // maximal-process bound closed form at the three reference triples
    let t = 2f64.ln();
    let ok = (braco_resem::maximal_bound(1.0, 1.0, 0.0, t) - 8.0 / 3.0).abs() < 1e-12
        && (braco_resem::maximal_bound(0.0, 1.0, 1.0, 2.0) - 0.5).abs() < 1e-12
        && (braco_resem::maximal_bound(0.0, 1.0, 2.0, t) - 1.0).abs() < 1e-12;
    rec.verdict("maximal_bound_closed_form", ok, "three parameter triples".into());

    // per-realization graphical duality and additivity
    let lat = build_lattice(LatticeKind::Torus { dim: 1, len: 10 })?;
    let k = kernel_from_base(&lat, &[(1, 1.3), (9, 0.6)])?;
    let mut mismatches = 0usize;
    for r in 0..500u64 {
        let mut rng = stream_rng(seed, r);
        let rep = contact::sample_graphical(&lat, &k, 1.0, 1.5, &mut rng);
        let a = random_subset(&mut rng, 10);
        let b = random_subset(&mut rng, 10);
        let fa = contact::forward(&rep, &a, 0.0, 1.5)?;
        let fb = contact::forward(&rep, &b, 0.0, 1.5)?;
        let fab = contact::forward(&rep, &a.union(&b), 0.0, 1.5)?;
        let dual = contact::dual_backward(&rep, &b, 1.5, 1.5)?;
        if fab != fa.union(&fb) || fa.intersects(&b) != dual.intersects(&a) {
            mismatches += 1;
        }
    }
    rec.verdict(
        "graphical_duality_additivity",
        mismatches == 0,
        format!("{mismatches} mismatches in 500 reps"),
    );

    // constant catalyzing function reproduces the closed form
    let p = CatalyzingFn::constant(2, 1.0);
    let (out, se) = wf_renorm::u_gamma_apply(&p, 1.0, 4000, seed ^ 77);
    let ok = out
        .values()
        .iter()
        .zip(&se)
        .all(|(&v, &s)| (v - 1.0).abs() < 4.0 * s);
    rec.verdict(
        "u_gamma_constant_closed_form",
        ok,
        format!("values {:?}", out.values()),
    );

    if let Some(dir) = outdir {
        let rows: Vec<Vec<String>> = rec
            .verdicts
            .iter()
            .map(|v| {
                vec![
                    v.name.clone(),
                    if v.pass { "pass" } else { "fail" }.to_string(),
                    v.detail.clone(),
                ]
            })
            .collect();
        write_csv(&dir.join("results.csv"), &["check", "status", "detail"], &rows)?;
    }
    Ok(vec![rec])
}

fn random_subset(rng: &mut impl rand::Rng, n: usize) -> BitSet {
    let mut s = BitSet::new(n);
    for i in 0..n {
        if rng.random::<f64>() < 0.3 {
            s.insert(i);
        }
    }
    s
}

/// Command-line entry point; returns the process exit code.
pub fn main() -> i32 {
    use clap::Parser;

    #[derive(Parser)]
    #[command(
        name = "ips-lab",
        about = "Interacting-particle-system simulation and verification lab"
    )]
    struct Cli {
        /// verify | contact | braco | resem | dualitytest | renorm | flow |
        /// pstar | cauchy
        subcommand: String,
        /// Plain-text key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed for all replica streams.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for CSV / JSON-lines results.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Inline KEY=VALUE overrides.
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    }

    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return 2;
            }
        },
        None => String::new(),
    };
    let mut cfg = match ExperimentConfig::parse_text(&cli.subcommand, &text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for pair in &cli.overrides {
        if let Err(e) = cfg.set_pair(pair) {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let start = std::time::Instant::now();
    match run(&cfg, cli.seed, cli.out.as_deref()) {
        Ok(records) => {
            let mut all_pass = true;
            for rec in &records {
                println!("experiment {} [config {}]", rec.experiment, rec.config_hash);
                for s in &rec.stats {
                    match s.se {
                        Some(se) => println!("  {} = {} (se {})", s.name, s.value, se),
                        None => println!("  {} = {} (exact)", s.name, s.value),
                    }
                }
                for v in &rec.verdicts {
                    println!(
                        "  [{}] {} -- {}",
                        if v.pass { "PASS" } else { "FAIL" },
                        v.name,
                        v.detail
                    );
                    all_pass &= v.pass;
                }
            }
            println!("wall time: {:.2}s", start.elapsed().as_secs_f64());
            if all_pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
