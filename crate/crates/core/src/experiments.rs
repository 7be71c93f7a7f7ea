//! SNR sweeps, scenario validation and oracle comparisons behind the CLI.
//!
//! SNR is `P_T / N0` with `N0 = 1`. Sweep output is a CSV with the frozen
//! header
//!
//! ```text
//! theta1,snr_db,method,repeat,sum_rate,r_common,r_private_1,r_private_2,r_private_3,runtime_ms,seed
//! ```
//!
//! (one `r_private_<k>` column per user). Reals are written in fixed
//! decimal notation with 12 significant digits, and the in-memory rows hold
//! the same rounded values so reading the file back is exact.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{fixed_rsma_alloc, noma_rates, sdma_rates};
use crate::channel::parse_angle;
use crate::config::{load_scenario, Scenario};
use crate::error::{Error, Result};
use crate::ga::{run_parga, GaConfig};
use crate::oracle::{grid_search, GridSpec};
use crate::precoding::{build_precoders, common_precoder, zf_private_precoders, PrecoderSet};
use crate::rates::{effective_gains, Problem, RateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Parga,
    FpRsma,
    Sdma,
    Noma,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Parga,
        Method::FpRsma,
        Method::Sdma,
        Method::Noma,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Parga => "parga",
            Method::FpRsma => "fp_rsma",
            Method::Sdma => "sdma",
            Method::Noma => "noma",
            Method::Oracle => "oracle",
        }
    }

    /// Only the GA varies between repeats.
    pub fn is_stochastic(self) -> bool {
        self == Method::Parga
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::config_global(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_db_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub theta1_list: Vec<f64>,
    /// GA repeats; repeat `r` uses seed `ga.seed + r`.
    pub repeats: usize,
    /// Fixed `theta2`; `None` means `2 * theta1`.
    pub theta2: Option<f64>,
    /// Grid resolution for the `oracle` method.
    pub grid_steps: usize,
}

impl SweepSpec {
    pub fn new(snr_db_list: Vec<f64>, methods: Vec<Method>, theta1_list: Vec<f64>) -> Self {
        SweepSpec {
            snr_db_list,
            methods,
            theta1_list,
            repeats: 1,
            theta2: None,
            grid_steps: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db_list.is_empty() || self.methods.is_empty() || self.theta1_list.is_empty() {
            return Err(Error::config_global(
                "sweep needs at least one SNR, method and theta1",
            ));
        }
        if self.repeats == 0 {
            return Err(Error::config_global("repeats must be at least 1"));
        }
        Ok(())
    }
}

/// Default SNR grid: 0 to 30 dB in 5 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=6).map(|i| 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta1: f64,
    pub snr_db: f64,
    pub method: Method,
    pub repeat_index: usize,
    pub sum_rate: f64,
    pub r_common: f64,
    pub r_private_per_user: Vec<f64>,
    pub runtime_ms: f64,
    pub seed: u64,
}

/// Fixed-point rendering with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// The value a CSV reader will see for `x`.
pub fn round_sig12(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..3 {
        let next: f64 = format_sig12(y).parse().unwrap_or(y);
        if next.to_bits() == y.to_bits() {
            break;
        }
        y = next;
    }
    y
}

impl SweepRow {
    fn from_report(
        theta1: f64,
        snr_db: f64,
        method: Method,
        repeat_index: usize,
        report: &RateReport,
        per_user: Vec<f64>,
        runtime_ms: f64,
        seed: u64,
    ) -> Self {
        SweepRow {
            theta1: round_sig12(theta1),
            snr_db: round_sig12(snr_db),
            method,
            repeat_index,
            sum_rate: round_sig12(report.sum_rate),
            r_common: round_sig12(report.total_common()),
            r_private_per_user: per_user.into_iter().map(round_sig12).collect(),
            runtime_ms: round_sig12(runtime_ms),
            seed,
        }
    }

    /// Equality ignoring the wall-clock column.
    pub fn same_result(&self, other: &SweepRow) -> bool {
        SweepRow {
            runtime_ms: 0.0,
            ..self.clone()
        } == SweepRow {
            runtime_ms: 0.0,
            ..other.clone()
        }
    }
}

pub fn csv_header(n_users: usize) -> String {
    let mut cols = vec![
        "theta1", "snr_db", "method", "repeat", "sum_rate", "r_common",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend((1..=n_users).map(|k| format!("r_private_{k}")));
    cols.push("runtime_ms".into());
    cols.push("seed".into());
    cols.join(",")
}

pub fn rows_to_csv(rows: &[SweepRow], n_users: usize) -> String {
    let mut out = csv_header(n_users);
    out.push('\n');
    for r in rows {
        let mut fields = vec![
            format_sig12(r.theta1),
            format_sig12(r.snr_db),
            r.method.to_string(),
            r.repeat_index.to_string(),
            format_sig12(r.sum_rate),
            format_sig12(r.r_common),
        ];
        fields.extend(r.r_private_per_user.iter().map(|&x| format_sig12(x)));
        fields.push(format_sig12(r.runtime_ms));
        fields.push(r.seed.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::config_global("empty CSV"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n_users = cols
        .len()
        .checked_sub(8)
        .ok_or_else(|| Error::config(1, "CSV header too short"))?;
    if header != csv_header(n_users) {
        return Err(Error::config(
            1,
            format!("unexpected CSV header `{header}`"),
        ));
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let line_no = i + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::config(
                    line_no,
                    format!("expected {} fields, found {}", cols.len(), f.len()),
                ));
            }
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::config(line_no, format!("bad number `{s}`")))
            };
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::config(line_no, format!("bad integer `{s}`")))
            };
            Ok(SweepRow {
                theta1: real(f[0])?,
                snr_db: real(f[1])?,
                method: f[2]
                    .parse()
                    .map_err(|_| Error::config(line_no, format!("bad method `{}`", f[2])))?,
                repeat_index: int(f[3])? as usize,
                sum_rate: real(f[4])?,
                r_common: real(f[5])?,
                r_private_per_user: f[6..6 + n_users]
                    .iter()
                    .map(|s| real(s))
                    .collect::<Result<_>>()?,
                runtime_ms: real(f[6 + n_users])?,
                seed: int(f[7 + n_users])?,
            })
        })
        .collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so `path` never holds a partial file.
pub fn write_csv_atomic(path: impl AsRef<Path>, rows: &[SweepRow], n_users: usize) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(rows_to_csv(rows, n_users).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// A scenario precoded at one `theta1`, shared by every SNR point.
struct PreparedTheta {
    theta1: f64,
    scenario: Scenario,
    precoders: PrecoderSet,
}

fn prepare(scenario: &Scenario, theta1: f64, theta2: Option<f64>) -> Result<PreparedTheta> {
    let s = scenario.with_theta1(theta1, theta2)?;
    let precoders = build_precoders(
        &s.channels,
        &s.params,
        s.common_precoder_strategy,
        s.precoder_seed,
    )
    .map_err(|e| match e {
        Error::DegenerateChannel(msg) => {
            Error::DegenerateChannel(format!("theta1 = {theta1}: {msg}"))
        }
        other => other,
    })?;
    Ok(PreparedTheta {
        theta1,
        scenario: s,
        precoders,
    })
}

/// Scores one method at one operating point.
fn run_cell(
    prep: &PreparedTheta,
    snr_db: f64,
    method: Method,
    repeat: usize,
    grid_steps: usize,
) -> Result<SweepRow> {
    let params = prep.scenario.params.clone().with_snr_db(snr_db);
    let channels = &prep.scenario.channels;
    let start = Instant::now();
    let problem = Problem::from_scenario(channels, &prep.precoders, &params)?;
    let mut seed = prep.scenario.precoder_seed;
    let report = match method {
        Method::Parga => {
            let config = GaConfig {
                seed: prep.scenario.ga.seed.wrapping_add(repeat as u64),
                ..prep.scenario.ga.clone()
            };
            seed = config.seed;
            let result = run_parga(&problem, &config)?;
            problem.evaluate(&result.best_alloc)
        }
        Method::FpRsma => problem.evaluate(&fixed_rsma_alloc(&params)),
        Method::Sdma => sdma_rates(channels, &prep.precoders, &params)?.report,
        Method::Noma => noma_rates(channels, &params)?.report,
        Method::Oracle => {
            let best = grid_search(&problem, GridSpec::for_problem(&problem, grid_steps))?;
            problem.evaluate(&best.alloc)
        }
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let per_user = report.private_per_user(&problem.gains, params.n_users);
    Ok(SweepRow::from_report(
        prep.theta1,
        snr_db,
        method,
        repeat,
        &report,
        per_user,
        runtime_ms,
        seed,
    ))
}

/// Computes every sweep row, sorted by (theta1, SNR, method, repeat) in the
/// order the sweep lists them.
pub fn sweep_rows(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let prepared: Vec<PreparedTheta> = spec
        .theta1_list
        .iter()
        .map(|&t| prepare(scenario, t, spec.theta2))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for ti in 0..prepared.len() {
        for si in 0..spec.snr_db_list.len() {
            for (mi, &method) in spec.methods.iter().enumerate() {
                let repeats = if method.is_stochastic() {
                    spec.repeats
                } else {
                    1
                };
                for r in 0..repeats {
                    cells.push((ti, si, mi, r));
                }
            }
        }
    }
    let mut rows: Vec<((usize, usize, usize, usize), SweepRow)> = cells
        .into_par_iter()
        .map(|key @ (ti, si, mi, r)| {
            run_cell(
                &prepared[ti],
                spec.snr_db_list[si],
                spec.methods[mi],
                r,
                spec.grid_steps,
            )
            .map(|row| (key, row))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainPoint {
    pub theta1: f64,
    pub snr_db: f64,
    pub parga_mean: f64,
    pub fp_rsma: f64,
}

impl GainPoint {
    pub fn relative_gain(&self) -> f64 {
        (self.parga_mean - self.fp_rsma) / self.fp_rsma
    }
}

/// `(theta1, snr_db, per-method mean)`.
pub type SummaryRow = (f64, f64, Vec<(Method, f64)>);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub row_count: usize,
    /// Mean sum rate over every row of each method.
    pub method_means: Vec<(Method, f64)>,
    /// Mean sum rate per (theta1, SNR, method).
    pub table: Vec<SummaryRow>,
    pub parga_gain: Vec<GainPoint>,
}

pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        (n > 0).then(|| s / n as f64)
    };
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| rows.iter().any(|r| r.method == *m))
        .collect();
    let method_means = methods
        .iter()
        .filter_map(|&m| {
            mean(&mut rows.iter().filter(|r| r.method == m).map(|r| r.sum_rate)).map(|x| (m, x))
        })
        .collect();

    let mut points: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !points.contains(&(r.theta1, r.snr_db)) {
            points.push((r.theta1, r.snr_db));
        }
    }
    let table: Vec<SummaryRow> = points
        .iter()
        .map(|&(t, s)| {
            let per = methods
                .iter()
                .filter_map(|&m| {
                    mean(
                        &mut rows
                            .iter()
                            .filter(|r| r.theta1 == t && r.snr_db == s && r.method == m)
                            .map(|r| r.sum_rate),
                    )
                    .map(|x| (m, x))
                })
                .collect();
            (t, s, per)
        })
        .collect();
    let parga_gain = table
        .iter()
        .filter_map(|(t, s, per)| {
            let get = |m| per.iter().find(|(x, _)| *x == m).map(|(_, v)| *v);
            Some(GainPoint {
                theta1: *t,
                snr_db: *s,
                parga_mean: get(Method::Parga)?,
                fp_rsma: get(Method::FpRsma)?,
            })
        })
        .collect();
    SweepSummary {
        row_count: rows.len(),
        method_means,
        table,
        parga_gain,
    }
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} rows", self.row_count)?;
        writeln!(f, "mean sum rate per method (bits/s/Hz):")?;
        for (m, v) in &self.method_means {
            writeln!(f, "  {:<8} {v:.4}", m.name())?;
        }
        writeln!(f, "mean sum rate per operating point:")?;
        for (t, s, per) in &self.table {
            write!(f, "  theta1={t:.4} snr={s:>5.1} dB")?;
            for (m, v) in per {
                write!(f, "  {}={v:.4}", m.name())?;
            }
            writeln!(f)?;
        }
        if !self.parga_gain.is_empty() {
            writeln!(f, "parga vs fp_rsma:")?;
            for g in &self.parga_gain {
                writeln!(
                    f,
                    "  theta1={:.4} snr={:>5.1} dB  parga={:.4} fp_rsma={:.4} gain={:+.2}%",
                    g.theta1,
                    g.snr_db,
                    g.parga_mean,
                    g.fp_rsma,
                    100.0 * g.relative_gain()
                )?;
            }
        }
        Ok(())
    }
}

/// Runs a sweep, writes the CSV atomically and summarizes the rows.
pub fn run_sweep(
    scenario: &Scenario,
    spec: &SweepSpec,
    out_path: impl AsRef<Path>,
) -> Result<SweepSummary> {
    let rows = sweep_rows(scenario, spec)?;
    write_csv_atomic(out_path, &rows, scenario.params.n_users)?;
    Ok(summarize(&rows))
}

pub fn run_sweep_file(
    scenario_path: impl AsRef<Path>,
    spec: &SweepSpec,
    out_path: impl AsRef<Path>,
) -> Result<SweepSummary> {
    run_sweep(&load_scenario(scenario_path)?, spec, out_path)
}

/// Outcome of `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
    /// Rendered effective-gain table, when precoding succeeded.
    pub gain_table: Option<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.gain_table {
            f.write_str(t)?;
        }
        if self.is_clean() {
            writeln!(f, "scenario OK")
        } else {
            for issue in &self.issues {
                writeln!(f, "problem: {issue}")?;
            }
            Ok(())
        }
    }
}

/// Checks that a parsed scenario can be precoded and tabulates its gains.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut issues = Vec::new();
    let zf = zf_private_precoders(&s.channels, &s.params)
        .map_err(|e| issues.push(e.to_string()))
        .ok();
    let common = common_precoder(
        &s.channels,
        &s.params,
        s.common_precoder_strategy,
        s.precoder_seed,
    )
    .map_err(|e| issues.push(e.to_string()))
    .ok();
    let gain_table = zf.zip(common).and_then(|(w_private, w_common)| {
        let pre = PrecoderSet {
            w_common,
            w_private,
        };
        match effective_gains(&s.channels, &pre, &s.params) {
            Ok(g) => Some(render_gains(&g)),
            Err(e) => {
                issues.push(e.to_string());
                None
            }
        }
    });
    ValidationReport { issues, gain_table }
}

fn render_gains(gains: &crate::rates::EffectiveGains) -> String {
    let mut out = String::new();
    for (g, ch) in gains.channels.iter().enumerate() {
        out.push_str(&format!("channel {} effective gains |h_k^H w|^2:\n", g + 1));
        out.push_str("  user   common");
        for &m in &ch.users {
            out.push_str(&format!("   stream{:<3}", m + 1));
        }
        out.push('\n');
        for (i, &k) in ch.users.iter().enumerate() {
            out.push_str(&format!("  {:<5} {:>8.4e}", k + 1, ch.common[i]));
            for x in &ch.private[i] {
                out.push_str(&format!("  {x:>10.3e}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Loads a file and validates it; a parse failure is returned as an error.
pub fn validate(scenario_path: impl AsRef<Path>) -> Result<ValidationReport> {
    Ok(validate_scenario(&load_scenario(scenario_path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub snr_db: f64,
    pub grid_steps: usize,
    pub grid_points: u128,
    pub oracle_fitness: f64,
    pub oracle_genes: Vec<f64>,
    pub parga_fitness: f64,
    pub parga_genes: Vec<f64>,
}

impl OracleComparison {
    /// `(oracle - parga) / oracle`; negative when the GA beats the grid.
    pub fn relative_gap(&self) -> f64 {
        (self.oracle_fitness - self.parga_fitness) / self.oracle_fitness
    }
}

impl fmt::Display for OracleComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let genes = |g: &[f64]| {
            g.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(
            f,
            "snr = {} dB, grid step = P_T/{} ({} points)",
            self.snr_db, self.grid_steps, self.grid_points
        )?;
        writeln!(
            f,
            "oracle optimum: {:.9} bits/s/Hz at [{}]",
            self.oracle_fitness,
            genes(&self.oracle_genes)
        )?;
        writeln!(
            f,
            "parga best:     {:.9} bits/s/Hz at [{}]",
            self.parga_fitness,
            genes(&self.parga_genes)
        )?;
        writeln!(
            f,
            "relative gap (oracle - parga) / oracle: {:+.3e}",
            self.relative_gap()
        )
    }
}

pub fn compare_oracle_scenario(
    s: &Scenario,
    snr_db: f64,
    grid_steps: usize,
) -> Result<OracleComparison> {
    let params = s.params.clone().with_snr_db(snr_db);
    let precoders = build_precoders(
        &s.channels,
        &params,
        s.common_precoder_strategy,
        s.precoder_seed,
    )?;
    let problem = Problem::from_scenario(&s.channels, &precoders, &params)?;
    let spec = GridSpec::for_problem(&problem, grid_steps);
    let oracle = grid_search(&problem, spec)?;
    let parga = run_parga(&problem, &s.ga)?;
    Ok(OracleComparison {
        snr_db,
        grid_steps,
        grid_points: oracle.evaluated,
        oracle_fitness: oracle.fitness,
        oracle_genes: oracle.genes,
        parga_fitness: parga.best_fitness,
        parga_genes: parga.best_genes,
    })
}

pub fn compare_oracle(
    scenario_path: impl AsRef<Path>,
    snr_db: f64,
    grid_steps: usize,
) -> Result<OracleComparison> {
    compare_oracle_scenario(&load_scenario(scenario_path)?, snr_db, grid_steps)
}

/// `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::config_global(format!("invalid SNR list `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let [a, b, step] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<f64>());
        let (a, b, step) = (
            a.map_err(|_| bad())?,
            b.map_err(|_| bad())?,
            step.map_err(|_| bad())?,
        );
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

pub fn parse_theta_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| parse_angle(t).ok_or_else(|| Error::config_global(format!("invalid angle `{t}`"))))
        .collect()
}

pub fn parse_methods(text: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for m in text.split(',') {
        let m: Method = m.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Applies a `RSMA_SEED`-style override to the GA seed.
pub fn apply_seed_override(scenario: &mut Scenario, value: Option<&str>) -> Result<()> {
    if let Some(v) = value {
        scenario.ga.seed = v.trim().parse().map_err(|_| {
            Error::config_global(format!("RSMA_SEED must be an integer, got `{v}`"))
        })?;
    }
    Ok(())
}
