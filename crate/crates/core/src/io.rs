//! Text formats: series files, key=value reports, and simulation configs.
//!
//! A series file has a header line `K d_1 ... d_K T` followed by `T` lines of
//! `∏ d_k` numbers each, in storage order (first index fastest).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dgp::{DgpConfig, Hypothesis, Innovation, Procedure, SimResult, RepOutcome};
use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::tensor_core::ModeSet;
use crate::testing::{ScanReport, TestReport};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn parse_series(text: &str) -> Result<TensorSeries> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| Error::Parse("line 1: missing header".into()))?;
    let fields = header
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: malformed header token {tok:?}", hl + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let order = *fields
        .first()
        .ok_or_else(|| Error::Parse(format!("line {}: empty header", hl + 1)))?;
    if order == 0 || fields.len() != order + 2 {
        return Err(Error::Parse(format!(
            "line {}: malformed header, expected `K d_1 .. d_K T` with K={order}",
            hl + 1
        )));
    }
    let dims = fields[1..=order].to_vec();
    let len = fields[order + 1];
    if dims.contains(&0) || len == 0 {
        return Err(Error::Parse(format!("line {}: extents and T must be positive", hl + 1)));
    }
    let n: usize = dims.iter().product();
    let mut data = Vec::with_capacity(n * len);
    let mut records = 0;
    for (ln, line) in lines {
        if records == len {
            return Err(Error::Parse(format!("line {}: found more than the {len} records declared", ln + 1)));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: non-numeric token {tok:?}", ln + 1)))?;
            data.push(v);
        }
        if data.len() - before != n {
            return Err(Error::Parse(format!(
                "line {}: record has {} values, expected {n}",
                ln + 1,
                data.len() - before
            )));
        }
        records += 1;
    }
    if records != len {
        return Err(Error::Parse(format!("expected {len} records, found {records}")));
    }
    TensorSeries::new(dims, len, data)
}

pub fn read_series(path: &Path) -> Result<TensorSeries> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_series(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Shortest representation that parses back to the same value.
fn fmt_exact(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn format_series(y: &TensorSeries) -> String {
    let mut out = String::new();
    let _ = write!(out, "{}", y.order());
    y.dims().iter().for_each(|d| {
        let _ = write!(out, " {d}");
    });
    let _ = writeln!(out, " {}", y.len());
    for frame in y.frames() {
        let line: Vec<String> = frame.iter().map(|&v| fmt_exact(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io_err(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

pub fn write_series(y: &TensorSeries, path: &Path) -> Result<()> {
    write_atomic(path, &format_series(y))
}

/// Parses numbers separated by commas and/or whitespace.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(
                tok.parse()
                    .map_err(|_| Error::Parse(format!("line {}: non-numeric token {tok:?}", ln + 1)))?,
            );
        }
    }
    Ok(out)
}

pub fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_numbers(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn join_one_based(modes: &[usize]) -> String {
    modes.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(",")
}

/// Key=value report of one test at one level; modes and indices are 1-based.
pub fn format_test_report(r: &TestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alpha={}", fmt_g6(r.alpha));
    let _ = writeln!(out, "reject={}", r.reject);
    let _ = writeln!(out, "p_hat={}", r.p_hat);
    let _ = writeln!(out, "alpha_hat={}", fmt_g6(r.alpha_hat));
    let _ = writeln!(out, "q_alpha_hat={}", fmt_g6(r.q_alpha_hat));
    let _ = writeln!(out, "k_star={}", r.k_star + 1);
    let _ = writeln!(out, "n_combos={}", r.combos.len());
    for (m, c) in r.combos.iter().enumerate() {
        let _ = writeln!(out, "combo_{}={}", m + 1, c.label());
    }
    for (m, rates) in r.per_combo.iter().enumerate() {
        for (j, rate) in rates.iter().enumerate() {
            let _ = writeln!(out, "exceed_m{}_j{}={}", m + 1, j + 1, fmt_g6(*rate));
        }
    }
    out
}

/// Reports for several levels, separated by blank lines.
pub fn format_test_reports(reports: &[TestReport]) -> String {
    reports.iter().map(format_test_report).collect::<Vec<_>>().join("\n")
}

pub fn format_scan_report(r: &ScanReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alpha={}", fmt_g6(r.alpha));
    let _ = writeln!(out, "a_star_hat={}", join_one_based(&r.a_star_hat));
    for (k, m) in r.per_mode.iter().enumerate() {
        let _ = writeln!(out, "mode{}_reject={}", k + 1, m.reject);
        let _ = writeln!(out, "mode{}_alpha_hat={}", k + 1, fmt_g6(m.alpha_hat));
        let _ = writeln!(out, "mode{}_q_alpha_hat={}", k + 1, fmt_g6(m.q_alpha_hat));
    }
    out
}

pub fn format_scan_reports(reports: &[ScanReport]) -> String {
    reports.iter().map(format_scan_report).collect::<Vec<_>>().join("\n")
}

/// Simulation settings as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub dgp: DgpConfig,
    pub reps: usize,
    pub alphas: Vec<f64>,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// Parses a `key = value` simulation config. `#` starts a comment.
///
/// Required: `dims`, `T`, `mode_set` (1-based), `hypothesis` (`H0`/`H1`).
/// Optional: `K`, `ranks`, `zeta` (one exponent for every factor),
/// `zeta_<k>`, `zeta_merged`, `innovation` (`normal`/`t3`), `noise_ranks`,
/// `sparsity`, `seed`, `noise_scale`, `procedure` (`test`/`scan`),
/// `rv_choices`, `reps`, `alphas`.
pub fn parse_sim_config(text: &str) -> Result<SimSpec> {
    let mut kv: Vec<(String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", ln + 1)))?;
        let k = k.trim().to_string();
        if kv.iter().any(|(seen, _)| *seen == k) {
            return Err(Error::Config(format!("line {}: duplicate key {k}", ln + 1)));
        }
        kv.push((k, v.trim().to_string()));
    }
    let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let need = |key: &str| get(key).ok_or_else(|| Error::Config(format!("missing key {key}")));

    let dims: Vec<usize> = parse_list("dims", need("dims")?)?;
    let order = dims.len();
    if let Some(k) = get("K") {
        if parse_one::<usize>("K", k)? != order {
            return Err(Error::Config(format!("K={k} but dims has {order} entries")));
        }
    }
    let len = parse_one("T", need("T")?)?;
    let mode_labels: Vec<usize> = parse_list("mode_set", need("mode_set")?)?;
    let mode_set = ModeSet::from_one_based(&mode_labels, order)?;
    let hypothesis = match need("hypothesis")? {
        "H0" | "h0" => Hypothesis::H0,
        "H1" | "h1" => Hypothesis::H1,
        other => return Err(Error::Config(format!("hypothesis must be H0 or H1, got {other:?}"))),
    };
    let mut cfg = DgpConfig::new(dims, len, mode_set, hypothesis)?;
    if let Some(v) = get("ranks") {
        cfg.ranks = parse_list("ranks", v)?;
        if cfg.ranks.len() != order {
            return Err(Error::Config(format!("ranks needs {order} entries")));
        }
    }
    let uniform: f64 = get("zeta").map(|v| parse_one("zeta", v)).transpose()?.unwrap_or(0.0);
    cfg.zeta = cfg.ranks.iter().map(|&r| vec![uniform; r]).collect();
    for k in 0..order {
        let key = format!("zeta_{}", k + 1);
        if let Some(v) = get(&key) {
            cfg.zeta[k] = parse_list(&key, v)?;
        }
    }
    cfg.zeta_merged = match get("zeta_merged") {
        Some(v) => parse_list("zeta_merged", v)?,
        None => vec![0.0; cfg.merged_rank()],
    };
    if let Some(v) = get("innovation") {
        cfg.innovation = match v {
            "normal" => Innovation::Normal,
            "t3" => Innovation::StudentT3,
            other => return Err(Error::Config(format!("innovation must be normal or t3, got {other:?}"))),
        };
    }
    if let Some(v) = get("noise_ranks") {
        cfg.noise_ranks = parse_list("noise_ranks", v)?;
    }
    if let Some(v) = get("sparsity") {
        cfg.sparsity = parse_one("sparsity", v)?;
    }
    if let Some(v) = get("seed") {
        cfg.seed = parse_one("seed", v)?;
    }
    if let Some(v) = get("noise_scale") {
        cfg.noise_scale = parse_one("noise_scale", v)?;
    }
    if let Some(v) = get("procedure") {
        cfg.procedure = match v {
            "test" => Procedure::Test,
            "scan" => Procedure::Scan,
            other => return Err(Error::Config(format!("procedure must be test or scan, got {other:?}"))),
        };
    }
    if let Some(v) = get("rv_choices") {
        cfg.rv_choices = parse_list("rv_choices", v)?;
    }
    let reps = get("reps").map(|v| parse_one("reps", v)).transpose()?.unwrap_or(500);
    let alphas = match get("alphas") {
        Some(v) => parse_list("alphas", v)?,
        None => vec![0.01, 0.05],
    };
    let known = |k: &str| {
        matches!(
            k,
            "K" | "dims" | "T" | "mode_set" | "hypothesis" | "ranks" | "zeta" | "zeta_merged" | "innovation"
                | "noise_ranks" | "sparsity" | "seed" | "noise_scale" | "procedure" | "rv_choices" | "reps"
                | "alphas"
        ) || k
            .strip_prefix("zeta_")
            .and_then(|i| i.parse::<usize>().ok())
            .is_some_and(|i| (1..=order).contains(&i))
    };
    if let Some((k, _)) = kv.iter().find(|(k, _)| !known(k)) {
        return Err(Error::Config(format!("unknown key {k}")));
    }
    cfg.validate()?;
    Ok(SimSpec { dgp: cfg, reps, alphas })
}

fn describe_setting(out: &mut String, spec: &SimSpec) {
    let c = &spec.dgp;
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let _ = writeln!(out, "dims={}", list(&c.dims));
    let _ = writeln!(out, "T={}", c.len);
    let _ = writeln!(out, "ranks={}", list(&c.ranks));
    let _ = writeln!(out, "mode_set={}", c.mode_set.to_one_based().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    let _ = writeln!(out, "hypothesis={:?}", c.hypothesis);
    let _ = writeln!(out, "procedure={}", match c.procedure { Procedure::Test => "test", Procedure::Scan => "scan" });
    let _ = writeln!(out, "seed={}", c.seed);
    let _ = writeln!(out, "reps={}", spec.reps);
}

/// Machine-readable simulation report: settings, per-level means, then
/// per-replication values.
pub fn format_sim_report(spec: &SimSpec, result: &SimResult) -> String {
    let mut out = String::new();
    describe_setting(&mut out, spec);
    for (i, row) in result.summary.iter().enumerate() {
        let _ = writeln!(out);
        let _ = writeln!(out, "alpha={}", fmt_g6(row.alpha));
        if let Some(a) = row.mean_alpha_hat {
            let _ = writeln!(out, "mean_alpha_hat={}", fmt_g6(a));
        }
        if let Some(p) = row.mean_p_hat {
            let _ = writeln!(out, "mean_p_hat={}", fmt_g6(p));
        }
        if let Some(f) = &row.mode_fraction {
            for (k, v) in f.iter().enumerate() {
                let _ = writeln!(out, "mode{}_fraction={}", k + 1, fmt_g6(*v));
            }
        }
        for (rep, outcome) in result.reps.iter().enumerate() {
            match outcome {
                RepOutcome::Test(r) => {
                    let _ = writeln!(out, "rep{}_alpha_hat={}", rep + 1, fmt_g6(r[i].alpha_hat));
                    let _ = writeln!(out, "rep{}_p_hat={}", rep + 1, r[i].p_hat);
                }
                RepOutcome::Scan(r) => {
                    let _ = writeln!(out, "rep{}_a_star_hat={}", rep + 1, join_one_based(&r[i].a_star_hat));
                }
            }
        }
    }
    out
}

/// Human-readable summary table, one row per level.
pub fn format_sim_table(spec: &SimSpec, result: &SimResult) -> String {
    let c = &spec.dgp;
    let mut out = String::new();
    let dims = c.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x");
    let modes = c.mode_set.to_one_based().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
    let _ = writeln!(out, "{:?}  K={}  d={dims}  T={}  A={{{modes}}}  reps={}", c.hypothesis, c.order(), c.len, spec.reps);
    match c.procedure {
        Procedure::Test => {
            let _ = writeln!(out, "{:>8}  {:>10}  {:>10}", "alpha", "alpha_hat", "p_hat");
            for row in &result.summary {
                let _ = writeln!(
                    out,
                    "{:>8}  {:>10.3}  {:>10.3}",
                    fmt_g6(row.alpha),
                    row.mean_alpha_hat.unwrap_or(f64::NAN),
                    row.mean_p_hat.unwrap_or(f64::NAN)
                );
            }
        }
        Procedure::Scan => {
            let header: String = (1..=c.order()).map(|k| format!("  {:>8}", format!("mode {k}"))).collect();
            let _ = writeln!(out, "{:>8}{header}", "alpha");
            for row in &result.summary {
                let cells: String = row
                    .mode_fraction
                    .iter()
                    .flatten()
                    .map(|v| format!("  {v:>8.3}"))
                    .collect();
                let _ = writeln!(out, "{:>8}{cells}", fmt_g6(row.alpha));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.05), "0.05");
        assert_eq!(fmt_g6(0.051), "0.051");
        assert_eq!(fmt_g6(1.0), "1");
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_g6(123456.7), "123457");
        assert_eq!(fmt_g6(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g6(0.0001), "0.0001");
        assert_eq!(fmt_g6(0.00001234), "1.234e-05");
        assert_eq!(fmt_g6(-2.5), "-2.5");
        assert_eq!(fmt_g6(0.9999996), "1");
    }

    #[test]
    fn header_example() {
        let y = parse_series("2 2 2 1\n1 2 3 4\n").unwrap();
        assert_eq!(y.dims(), &[2, 2]);
        let f = y.tensor(0);
        assert_eq!(f.get(&[1, 0]), 2.0);
        assert_eq!(f.get(&[0, 1]), 3.0);
    }

    #[test]
    fn distinct_parse_errors() {
        let e = parse_series("2 2 x 1\n1 2 3 4\n").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("header"), "{e}");
        let e = parse_series("2 2 2 2\n1 2 3 4\n").unwrap_err().to_string();
        assert!(e.contains("expected 2 records, found 1"), "{e}");
        let e = parse_series("2 2 2 1\n1 2 q 4\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("non-numeric"), "{e}");
        let e = parse_series("2 2 2 1\n1 2 3\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("3 values"), "{e}");
    }

    #[test]
    fn exact_float_roundtrip() {
        let vals = vec![0.1, -1e-300, 1.0 / 3.0, 6.02e23, 0.0, 123.456, f64::MIN_POSITIVE, 5e-5];
        let y = TensorSeries::new(vec![8], 1, vals).unwrap();
        assert_eq!(parse_series(&format_series(&y)).unwrap(), y);
    }

    #[test]
    fn config_parsing() {
        let text = "# size design\ndims = 15,15,15\nT=360\nmode_set=2,3\nhypothesis=H0\nalphas=0.05\nreps=3\nseed=7\n";
        let spec = parse_sim_config(text).unwrap();
        assert_eq!(spec.dgp.mode_set.indices(), &[1, 2]);
        assert_eq!(spec.alphas, vec![0.05]);
        assert_eq!(spec.reps, 3);
        assert_eq!(spec.dgp.seed, 7);
        assert!(parse_sim_config(&format!("{text}bogus=1\n")).is_err());
        assert!(parse_sim_config("dims=3,3\nT=10\nhypothesis=H0\n").is_err());
        let weak = parse_sim_config(&format!("{text}zeta_2=0.1,0\n")).unwrap();
        assert_eq!(weak.dgp.zeta[1], vec![0.1, 0.0]);
    }
}
