//! Experiment orchestration: seeded instance selection, the scope checker
//! for the square-root-cancellation hypotheses, deterministic h-scans over
//! N schedules, and CSV/JSON report emission.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{family_samples, resolve_h_set, scan_one, Family, HSet, UnityTable};
use crate::fpcore::{Fp, SpectralKind};
use crate::moebius::{MoebiusMap, OrbitSpec, ProjPoint};

/// The seeded generator every random selection goes through. SplitMix64:
/// a 64-bit counter stepped by 0x9e3779b97f4a7c15, output mixed by two
/// xor-shift-multiply rounds. Stateless given (seed, call index), so any
/// reimplementation reproduces the same streams.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, n) by rejection; n must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// How matrices are chosen for a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "mode")]
pub enum MatrixSelection {
    Explicit { entries: Vec<[u64; 4]> },
    Random {
        count: u64,
        seed: u64,
        #[serde(default)]
        reject_parabolic: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "mode")]
pub enum U0Selection {
    Explicit { value: u64 },
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "family")]
pub enum FamilyConfig {
    Single { k: u64 },
    Coprime { k: u64 },
    Prime,
    Lambda { dyadic: bool },
    Moebius,
}

impl FamilyConfig {
    pub fn to_family(self) -> Family {
        match self {
            FamilyConfig::Single { k } => Family::Single { k },
            FamilyConfig::Coprime { k } => Family::Coprime { k },
            FamilyConfig::Prime => Family::Prime,
            FamilyConfig::Lambda { dyadic } => Family::Lambda { dyadic },
            FamilyConfig::Moebius => Family::Moebius,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "mode")]
pub enum HStrategy {
    All,
    Sample { count: u64, seed: u64 },
}

impl HStrategy {
    pub fn to_h_set(self) -> HSet {
        match self {
            HStrategy::All => HSet::All,
            HStrategy::Sample { count, seed } => HSet::Sample { count, seed },
        }
    }
}

fn default_kappa() -> f64 {
    0.5
}

fn default_epsilon() -> f64 {
    0.1
}

/// One experiment: a prime, instance selection, a sum family, an h
/// strategy, and a strictly increasing N schedule. Unknown JSON fields
/// are rejected; every random selection carries its own seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: u64,
    pub matrices: MatrixSelection,
    pub u0: U0Selection,
    pub sum: FamilyConfig,
    pub h: HStrategy,
    pub n_schedule: Vec<u64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cap on total accumulated terms across the run; None = unlimited.
    #[serde(default)]
    pub budget: Option<u64>,
    /// Real timings break byte-for-byte reproducibility, so wall_time is
    /// emitted as 0 unless explicitly requested.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Fp::new(self.p)?;
        if self.n_schedule.is_empty() {
            return Err(Error::Config("n_schedule: must be nonempty".into()));
        }
        if !self.n_schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "n_schedule: must be strictly increasing".into(),
            ));
        }
        if self.n_schedule[0] == 0 {
            return Err(Error::Config("n_schedule: entries must be >= 1".into()));
        }
        if let MatrixSelection::Explicit { entries } = &self.matrices {
            if entries.is_empty() {
                return Err(Error::Config("matrices.entries: must be nonempty".into()));
            }
        }
        if let MatrixSelection::Random { count, .. } = self.matrices {
            if count == 0 {
                return Err(Error::Config("matrices.count: must be >= 1".into()));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config("kappa: must lie in (0, 1)".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon: must be positive".into()));
        }
        Ok(())
    }
}

/// One scanned cell of an experiment; the CSV schema is exactly this
/// field order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub p: u64,
    pub matrix: String,
    pub u0: u64,
    pub t: u64,
    pub kind: String,
    pub family: String,
    pub n: u64,
    pub h: u64,
    pub abs_value: f64,
    pub terms: u64,
    pub poles_skipped: u64,
    pub ratio: f64,
    pub wall_time: f64,
}

/// Per-N rollup: the maximal normalized sum over the scanned h, and the
/// cancellation exponent it corresponds to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NSummary {
    pub n: u64,
    pub max_ratio: f64,
    pub max_h: u64,
    pub max_abs_value: f64,
    /// -log(max_ratio) / log p; larger means more cancellation.
    pub eta_hat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub per_n: Vec<NSummary>,
    pub total_rows: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub summary: ExperimentSummary,
}

/// Whether an instance sits inside the scope of the square-root
/// cancellation regime: distinct eigenvalues and a long period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScopeReport {
    pub distinct_roots: bool,
    pub t: u64,
    pub p: u64,
    pub epsilon: f64,
    /// t >= p^(3/4 + epsilon), compared in log space.
    pub satisfies_t_bound: bool,
    /// Smallest J >= 2 with N^(1/J) <= t * p^(kappa/2 - 1/2), when N is
    /// given and such a J exists.
    pub decomposition_j: Option<u32>,
    pub notes: String,
}

/// Smallest J >= 2 with N^(1/J) <= t * p^(kappa/2 - 1/2).
pub fn decomposition_depth(n: u64, t: u64, p: u64, kappa: f64) -> Option<u32> {
    let rhs = (t as f64).ln() + (kappa / 2.0 - 0.5) * (p as f64).ln();
    if rhs <= 0.0 {
        return None;
    }
    let ln_n = (n as f64).ln();
    (2..=64).find(|&j| ln_n / j as f64 <= rhs)
}

pub fn scope_check(spec: &OrbitSpec, epsilon: f64, kappa: f64, n: Option<u64>) -> ScopeReport {
    let p = spec.field().modulus();
    let distinct_roots = spec.map.spectral().kind != SpectralKind::Parabolic;
    let t = spec.period();
    let satisfies_t_bound = (t as f64).ln() >= (0.75 + epsilon) * (p as f64).ln();
    let decomposition_j = n.and_then(|n| decomposition_depth(n, t, p, kappa));
    let mut notes = String::new();
    if !distinct_roots {
        notes.push_str("parabolic map: the two-distinct-roots hypothesis fails; ");
    }
    if !satisfies_t_bound {
        let _ = write!(notes, "short period: log_p(t) = {:.4}; ", (t as f64).ln() / (p as f64).ln());
    }
    if notes.is_empty() {
        notes.push_str("in scope");
    }
    ScopeReport {
        distinct_roots,
        t,
        p,
        epsilon,
        satisfies_t_bound,
        decomposition_j,
        notes,
    }
}

/// Rejection-sample a nonsingular map, optionally skipping parabolic ones.
pub fn sample_matrix(fp: Fp, rng: &mut SplitMix64, reject_parabolic: bool) -> MoebiusMap {
    let p = fp.modulus();
    loop {
        let m = MoebiusMap::new(fp, rng.below(p), rng.below(p), rng.below(p), rng.below(p));
        match m {
            Ok(m) if !reject_parabolic || m.spectral().kind != SpectralKind::Parabolic => {
                return m
            }
            _ => {}
        }
    }
}

/// The deterministic instance list a config selects (used both by the
/// run itself and by pre-run scope checks).
pub fn select_specs(cfg: &ExperimentConfig) -> Result<Vec<OrbitSpec>> {
    let fp = Fp::new(cfg.p)?;
    let maps: Vec<MoebiusMap> = match &cfg.matrices {
        MatrixSelection::Explicit { entries } => entries
            .iter()
            .map(|&[a, b, c, d]| MoebiusMap::new(fp, a, b, c, d))
            .collect::<Result<_>>()?,
        MatrixSelection::Random {
            count,
            seed,
            reject_parabolic,
        } => {
            let mut rng = SplitMix64::new(*seed);
            (0..*count)
                .map(|_| sample_matrix(fp, &mut rng, *reject_parabolic))
                .collect()
        }
    };
    let mut u0_rng = match cfg.u0 {
        U0Selection::Random { seed } => Some(SplitMix64::new(seed)),
        U0Selection::Explicit { .. } => None,
    };
    Ok(maps
        .into_iter()
        .map(|m| {
            let u0 = match (&cfg.u0, &mut u0_rng) {
                (U0Selection::Explicit { value }, _) => *value % cfg.p,
                (U0Selection::Random { .. }, Some(rng)) => rng.below(cfg.p),
                _ => unreachable!(),
            };
            OrbitSpec::new(m, ProjPoint::Affine(u0))
        })
        .collect())
}

fn matrix_label(map: &MoebiusMap) -> String {
    let [a, b, c, d] = map.entries();
    format!("{a},{b},{c},{d}")
}

fn kind_label(kind: SpectralKind) -> &'static str {
    match kind {
        SpectralKind::Split => "split",
        SpectralKind::Nonsplit => "nonsplit",
        SpectralKind::Parabolic => "parabolic",
    }
}

/// Run the configured scans. Work is parallel across h inside each
/// (spec, N) cell, but rows are assembled in the deterministic order
/// (matrix, N, h) and the row set never depends on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let specs = select_specs(cfg)?;
    let table = UnityTable::new(cfg.p);
    let family = cfg.sum.to_family();
    let hs = resolve_h_set(cfg.p, cfg.h.to_h_set())?;
    let mut rows = Vec::new();
    let mut per_n: Vec<NSummary> = Vec::new();
    let mut spent: u64 = 0;
    for &n in &cfg.n_schedule {
        let mut best: Option<(f64, u64, f64)> = None;
        for spec in &specs {
            let t = spec.period();
            let kind = kind_label(spec.map.spectral().kind);
            let matrix = matrix_label(&spec.map);
            let u0 = match spec.u0 {
                ProjPoint::Affine(x) => x,
                ProjPoint::Infinity => cfg.p, // sentinel: one past the residues
            };
            let started = std::time::Instant::now();
            let samples = family_samples(spec, family, n);
            if let Some(budget) = cfg.budget {
                spent = spent.saturating_add(samples.len() as u64 * hs.len() as u64);
                if spent > budget {
                    return Err(Error::BudgetExceeded {
                        task: "experiment scan",
                        needed: spent as u128,
                        budget: budget as u128,
                    });
                }
            }
            use rayon::prelude::*;
            let scan: Vec<_> = hs.par_iter().map(|&h| scan_one(&table, &samples, h)).collect();
            let elapsed = started.elapsed().as_secs_f64();
            for row in scan {
                let ratio = if row.weight_mass > 0.0 {
                    row.abs_value / row.weight_mass
                } else {
                    0.0
                };
                match best {
                    Some((r, _, _)) if r >= ratio => {}
                    _ => best = Some((ratio, row.h, row.abs_value)),
                }
                rows.push(ResultRow {
                    p: cfg.p,
                    matrix: matrix.clone(),
                    u0,
                    t,
                    kind: kind.to_string(),
                    family: family.name().to_string(),
                    n,
                    h: row.h,
                    abs_value: row.abs_value,
                    terms: row.terms,
                    poles_skipped: row.poles_skipped,
                    ratio,
                    wall_time: if cfg.record_wall_time { elapsed } else { 0.0 },
                });
            }
        }
        let (max_ratio, max_h, max_abs) = best.expect("h set and spec set are nonempty");
        let eta_hat = if max_ratio > 0.0 {
            -max_ratio.ln() / (cfg.p as f64).ln()
        } else {
            f64::INFINITY
        };
        per_n.push(NSummary {
            n,
            max_ratio,
            max_h,
            max_abs_value: max_abs,
            eta_hat,
        });
    }
    let total_rows = rows.len() as u64;
    Ok(ExperimentReport {
        rows,
        summary: ExperimentSummary { per_n, total_rows },
    })
}

/// A float with 12 significant digits that parses back to the same digits.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.11e}", x);
    // normalize "1.50000000000e2" styling but keep it parseable
    s
}

pub const CSV_HEADER: &str =
    "p,matrix,u0,t,kind,family,n,h,abs_value,terms,poles_skipped,ratio,wall_time";

/// CSV with columns exactly in [`ResultRow`] field order. The matrix
/// column is quoted (it contains commas).
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.matrix,
            r.u0,
            r.t,
            r.kind,
            r.family,
            r.n,
            r.h,
            fmt_g12(r.abs_value),
            r.terms,
            r.poles_skipped,
            fmt_g12(r.ratio),
            fmt_g12(r.wall_time),
        );
    }
    out
}

/// Parse CSV produced by [`to_csv`] back into rows (round-trip oracle).
pub fn from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "csv: bad header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let open = line.find('"').ok_or_else(|| Error::Config("csv: missing matrix quote".into()))?;
        let close = line[open + 1..]
            .find('"')
            .map(|i| open + 1 + i)
            .ok_or_else(|| Error::Config("csv: unterminated matrix quote".into()))?;
        let matrix = line[open + 1..close].to_string();
        let head: Vec<&str> = line[..open - 1].split(',').collect();
        let tail: Vec<&str> = line[close + 2..].split(',').collect();
        if head.len() != 1 || tail.len() != 11 {
            return Err(Error::Config(format!("csv: bad field count in {line:?}")));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Config(format!("csv: bad float {s:?}")))
        };
        let u = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Config(format!("csv: bad integer {s:?}")))
        };
        rows.push(ResultRow {
            p: u(head[0])?,
            matrix,
            u0: u(tail[0])?,
            t: u(tail[1])?,
            kind: tail[2].to_string(),
            family: tail[3].to_string(),
            n: u(tail[4])?,
            h: u(tail[5])?,
            abs_value: f(tail[6])?,
            terms: u(tail[7])?,
            poles_skipped: u(tail[8])?,
            ratio: f(tail[9])?,
            wall_time: f(tail[10])?,
        });
    }
    Ok(rows)
}

pub fn to_json(report: &ExperimentReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let io_err = |path: &Path, e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join("results.csv");
    std::fs::write(&csv_path, to_csv(&report.rows)).map_err(|e| io_err(&csv_path, e))?;
    let json_path = dir.join("results.json");
    std::fs::write(&json_path, to_json(report)).map_err(|e| io_err(&json_path, e))?;
    Ok(())
}
