//! J-sweeps: every estimator at every coupling, the expansion residuals, the
//! verdict lines and the CSV / JSON / plot-data emitters.
//!
//! Streams: the constants use `master.split(0)` (`.split(0)` for `κ̂`,
//! `.split(1)` for `κ̃`); coupling `i` of the list uses `master.split(1 + i)`,
//! with `.split(0)` for the paired free energy / DP pass, `.split(1)` for the
//! ergodic and `.split(2)` for the stretch estimator.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disorder::DisorderLaw;
use crate::error::{check_coupling, invalid, Error, Result};
use crate::extrema::{decompose, stretch_max_energy};
use crate::maxenergy::{brute_force_max, ergodic_max_energy, max_energy, reconstruct_maximal_config, MaxEnergyAccumulator};
use crate::model::{BoundaryCondition, Spin};
use crate::renewal::{kappa_hat, kappa_tilde, KappaHat, KappaTilde};
use crate::rng::SeededStream;
use crate::stats::Estimate;
use crate::transfer::{brute_force_log_partition, log_partition, PartitionAccumulator};
use crate::{per_replica, sample_increments, WalkPath, BLOCK};

pub const SCHEMA_VERSION: u32 = 1;

/// Column order of the sweep CSV.
pub const CSV_COLUMNS: [&str; 14] = [
    "J",
    "F_mean",
    "F_stderr",
    "M_dp_mean",
    "M_dp_stderr",
    "M_ergodic_mean",
    "M_ergodic_stderr",
    "M_stretch_mean",
    "M_stretch_stderr",
    "kappa_eff_F",
    "kappa_eff_F_stderr",
    "kappa_eff_M",
    "kappa_eff_M_stderr",
    "diff_scaled",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Sites per replica for the transfer, DP and ergodic estimators.
    pub n: u64,
    pub replicas: usize,
    /// Ladder samples per direction and mode for `κ̂`.
    pub n_ladder: usize,
    /// Environments for `κ̃`.
    pub n_envs: usize,
    /// Stretch pairs per replica for the stretch estimator.
    pub stretch_pairs: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            n: 10_000_000,
            replicas: 32,
            n_ladder: 100_000,
            n_envs: 4000,
            stretch_pairs: 2000,
        }
    }
}

/// Everything measured at one coupling. The expansion residuals are methods,
/// so they always follow the stored estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub j: f64,
    /// `ϑ²` of the law.
    pub variance: f64,
    pub f_hat: Estimate,
    pub m_dp: Estimate,
    pub m_ergodic: Estimate,
    pub m_stretch: Estimate,
    /// `F̂ − M̂_dp` from per-replica differences on shared fields.
    pub f_minus_m: Estimate,
}

impl SweepRow {
    fn residual(&self, e: &Estimate) -> Estimate {
        let v = self.variance;
        e.map(v / e.mean - 2.0 * self.j, v / (e.mean * e.mean))
    }

    /// `ϑ²/F̂ − 2J`.
    pub fn kappa_eff_f(&self) -> Estimate {
        self.residual(&self.f_hat)
    }

    /// `ϑ²/M̂ − 2J`, with the DP estimate.
    pub fn kappa_eff_m(&self) -> Estimate {
        self.residual(&self.m_dp)
    }

    /// `(F̂ − M̂)(2J)²/ϑ²`.
    pub fn diff_scaled(&self) -> Estimate {
        let scale = 4.0 * self.j * self.j / self.variance;
        self.f_minus_m.map(self.f_minus_m.mean * scale, scale)
    }

    pub fn m_estimates(&self) -> [(&'static str, &Estimate); 3] {
        [("dp", &self.m_dp), ("ergodic", &self.m_ergodic), ("stretch", &self.m_stretch)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.check, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub schema_version: u32,
    pub law: String,
    pub variance: f64,
    pub master_seed: u64,
    pub budget: Budget,
    pub j_list: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub kappa_hat: KappaHat,
    pub kappa_tilde: KappaTilde,
    pub warnings: Vec<String>,
    pub verdicts: Vec<Verdict>,
}

impl ExpansionReport {
    /// `κ̂` (strict ladder expression).
    pub fn kappa_hat_estimate(&self) -> Estimate {
        self.kappa_hat.strict
    }

    /// `κ̃` as the full-environment functional at `Γ = 2 max J`.
    pub fn kappa_tilde_estimate(&self) -> Estimate {
        self.kappa_tilde.full
    }

    /// `κ = κ̂ − κ̃`.
    pub fn kappa(&self) -> Estimate {
        self.kappa_hat_estimate().minus(&self.kappa_tilde_estimate())
    }

    /// Hex digest identifying (law, couplings, budget, seed).
    pub fn sweep_hash(&self) -> String {
        sweep_hash(&self.law, &self.j_list, &self.budget, self.master_seed)
    }

    pub fn file_stem(&self) -> String {
        let tag = self.law.parse::<DisorderLaw>().map(|l| l.file_tag()).unwrap_or_else(|_| self.law.clone());
        format!("{tag}_{}", self.sweep_hash())
    }
}

pub fn sweep_hash(law: &str, j_list: &[f64], budget: &Budget, seed: u64) -> String {
    let key = serde_json::json!({ "law": law, "J": j_list, "budget": budget, "seed": seed });
    let digest = Sha256::digest(key.to_string().as_bytes());
    hex::encode(&digest[..8])
}

/// `(1/N) log Z^{++}` and `(1/N) M^{++}` on one realization.
fn paired_sample(law: &DisorderLaw, j: f64, n: u64, mut stream: SeededStream) -> (f64, f64) {
    let mut z = PartitionAccumulator::new(j, Spin::Plus);
    let mut m = MaxEnergyAccumulator::new(j);
    let mut block = vec![0.0; BLOCK];
    let mut left = n;
    while left > 0 {
        let take = left.min(BLOCK as u64) as usize;
        law.fill(&mut stream, &mut block[..take]);
        for &h in &block[..take] {
            z.push(h);
            m.push(h);
        }
        left -= take as u64;
    }
    (z.log_z(Spin::Plus) / n as f64, m.m_plus() / n as f64)
}

fn validate(j_list: &[f64], budget: &Budget) -> Result<()> {
    if j_list.len() < 2 {
        return Err(invalid("J list", "need at least two couplings"));
    }
    for &j in j_list {
        check_coupling(j)?;
    }
    if j_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("J list", "couplings must be strictly increasing"));
    }
    if budget.replicas < 2 {
        return Err(invalid("replicas", "need at least two replicas for an error bar"));
    }
    Ok(())
}

/// One row; `stream` is the coupling's own stream.
pub fn sweep_row(law: &DisorderLaw, j: f64, budget: &Budget, stream: &SeededStream) -> Result<(SweepRow, Vec<String>)> {
    check_coupling(j)?;
    if budget.n < 1000 {
        return Err(invalid("N", format!("need N >= 1000, got {}", budget.n)));
    }
    let paired_stream = stream.split(0);
    let pairs = per_replica(budget.replicas, |r| paired_sample(law, j, budget.n, paired_stream.split(r)));
    let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let m: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let key = paired_stream.key();
    let ergodic = ergodic_max_energy(law, j, budget.n, None, budget.replicas, &stream.split(1))?;
    let stretch = stretch_max_energy(law, j, budget.stretch_pairs, budget.replicas, &stream.split(2))?;
    let warnings = ergodic.warnings.iter().map(|w| format!("J = {j}: {w}")).collect();
    Ok((
        SweepRow {
            j,
            variance: law.variance(),
            f_hat: Estimate::from_replicas(&f, key),
            m_dp: Estimate::from_replicas(&m, key),
            m_ergodic: ergodic.value,
            m_stretch: stretch,
            f_minus_m: Estimate::from_replicas(&d, key),
        },
        warnings,
    ))
}

/// Runs every estimator at every coupling and the two constants, then
/// attaches the verdicts.
pub fn run_sweep(law: &DisorderLaw, j_list: &[f64], budget: &Budget, master_seed: u64) -> Result<ExpansionReport> {
    validate(j_list, budget)?;
    let master = SeededStream::new(master_seed);
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(j_list.len());
    for (i, &j) in j_list.iter().enumerate() {
        log::info!("sweep: J = {j}");
        let (row, w) = sweep_row(law, j, budget, &master.split(1 + i as u64))?;
        rows.push(row);
        warnings.extend(w);
    }
    let constants = master.split(0);
    log::info!("sweep: κ̂ from {} ladder samples", budget.n_ladder);
    let kh = kappa_hat(law, budget.n_ladder, &constants.split(0))?;
    warnings.extend(kh.warnings.iter().map(|w| format!("κ̂: {w}")));
    let floor = 4.0 * law.variance().sqrt();
    let mut gamma = 2.0 * j_list[j_list.len() - 1];
    if gamma < floor {
        warnings.push(format!("κ̃: Γ = 2 max J = {gamma} is below 4ϑ, using {floor:.4}"));
        gamma = floor;
    }
    log::info!("sweep: κ̃ at Γ = {gamma}");
    let kt = kappa_tilde(law, &[gamma], budget.n_envs, &constants.split(1))?;
    warnings.extend(kt.warnings.iter().map(|w| format!("κ̃: {w}")));
    let mut report = ExpansionReport {
        schema_version: SCHEMA_VERSION,
        law: law.to_string(),
        variance: law.variance(),
        master_seed,
        budget: *budget,
        j_list: j_list.to_vec(),
        rows,
        kappa_hat: kh.value,
        kappa_tilde: kt.value[0],
        warnings,
        verdicts: Vec::new(),
    };
    report.verdicts = verdicts(&report);
    Ok(report)
}

/// Coherence and ordering per coupling, then the expansion checks at the
/// largest couplings. Couplings below the first-order regime get no
/// extrapolated verdict.
pub fn verdicts(report: &ExpansionReport) -> Vec<Verdict> {
    let mut out = Vec::new();
    for row in &report.rows {
        let ms = row.m_estimates();
        let mut worst = 0.0f64;
        for a in 0..3 {
            for b in a + 1..3 {
                worst = worst.max(ms[a].1.z_distance(ms[b].1));
            }
        }
        out.push(Verdict {
            check: format!("M coherence at J = {}", row.j),
            passed: worst <= 3.0,
            detail: format!(
                "dp {:.6}, ergodic {:.6}, stretch {:.6}; largest gap {worst:.2} σ",
                row.m_dp, row.m_ergodic, row.m_stretch
            ),
        });
        let gap = row.f_hat.mean - (row.m_dp.mean - 3.0 * row.m_dp.stderr);
        out.push(Verdict {
            check: format!("F ≥ M at J = {}", row.j),
            passed: gap >= 0.0,
            detail: format!("F {:.6}, M {:.6}", row.f_hat, row.m_dp),
        });
    }
    let last = &report.rows[report.rows.len() - 1];
    let prev = &report.rows[report.rows.len() - 2];
    let (a, b) = (prev.kappa_eff_f(), last.kappa_eff_f());
    out.push(Verdict {
        check: format!("κ_eff(F) stable between J = {} and J = {}", prev.j, last.j),
        passed: a.z_distance(&b) <= 1.0,
        detail: format!("{a:.4} vs {b:.4}"),
    });
    let kh = report.kappa_hat_estimate();
    let km = last.kappa_eff_m();
    out.push(Verdict {
        check: format!("κ_eff(M) matches κ̂ at J = {}", last.j),
        passed: km.z_distance(&kh) <= 3.0,
        detail: format!("{km:.4} vs κ̂ = {kh:.4} ({:.2} σ)", km.z_distance(&kh)),
    });
    let kt = report.kappa_tilde_estimate();
    let ds = last.diff_scaled();
    out.push(Verdict {
        check: format!("(F − M)(2J)²/ϑ² matches κ̃ at J = {}", last.j),
        passed: (ds.mean - kt.mean).abs() <= 0.25 * kt.mean.abs(),
        detail: format!("{ds:.4} vs κ̃ = {kt:.4} (25% tolerance)"),
    });
    let kappa = report.kappa();
    let kf = last.kappa_eff_f();
    let tol = 0.5f64.max(3.0 * kf.combined_stderr(&kappa));
    out.push(Verdict {
        check: format!("κ_eff(F) matches κ = κ̂ − κ̃ at J = {}", last.j),
        passed: (kf.mean - kappa.mean).abs() <= tol,
        detail: format!("{kf:.4} vs κ = {kappa:.4} (tolerance {tol:.3})"),
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
    Plotdata,
}

impl std::str::FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "plotdata" => Ok(Self::Plotdata),
            _ => Err(invalid("format", format!("`{s}` is not one of csv, json, plotdata"))),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn report_csv(report: &ExpansionReport) -> Result<String> {
    let mut buf = format!(
        "# rfic sweep schema {SCHEMA_VERSION}; law {}; seed {}\n",
        report.law, report.master_seed
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(CSV_COLUMNS).map_err(ser)?;
        for r in &report.rows {
            let (kf, km, ds) = (r.kappa_eff_f(), r.kappa_eff_m(), r.diff_scaled());
            let fields = [
                r.j,
                r.f_hat.mean,
                r.f_hat.stderr,
                r.m_dp.mean,
                r.m_dp.stderr,
                r.m_ergodic.mean,
                r.m_ergodic.stderr,
                r.m_stretch.mean,
                r.m_stretch.stderr,
                kf.mean,
                kf.stderr,
                km.mean,
                km.stderr,
                ds.mean,
            ];
            w.write_record(fields.iter().map(|x| x.to_string())).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    }
    String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn report_json(report: &ExpansionReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn report_from_json(text: &str) -> Result<ExpansionReport> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

/// Gnuplot-style blocks `J value err`, one per series, separated by two
/// blank lines.
pub fn report_plotdata(report: &ExpansionReport) -> String {
    type Series = fn(&SweepRow) -> Estimate;
    let series: [(&str, Series); 7] = [
        ("F", |r| r.f_hat),
        ("M_dp", |r| r.m_dp),
        ("M_ergodic", |r| r.m_ergodic),
        ("M_stretch", |r| r.m_stretch),
        ("kappa_eff_F", SweepRow::kappa_eff_f),
        ("kappa_eff_M", SweepRow::kappa_eff_m),
        ("diff_scaled", SweepRow::diff_scaled),
    ];
    let mut out = String::new();
    for (i, (name, get)) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {name}");
        for r in &report.rows {
            let e = get(r);
            let _ = writeln!(out, "{} {} {}", r.j, e.mean, e.stderr);
        }
    }
    out
}

/// Writes `<law>_<hash>.{csv,json}` (plot data: `.dat`) into `dir`.
pub fn emit(report: &ExpansionReport, format: EmitFormat, dir: &Path) -> Result<PathBuf> {
    let (ext, text) = match format {
        EmitFormat::Csv => ("csv", report_csv(report)?),
        EmitFormat::Json => ("json", report_json(report)?),
        EmitFormat::Plotdata => ("dat", report_plotdata(report)),
    };
    let path = dir.join(format!("{}.{ext}", report.file_stem()));
    let mut file = std::fs::File::create(&path).map_err(io_error(&path))?;
    file.write_all(text.as_bytes()).map_err(io_error(&path))?;
    Ok(path)
}

/// Worst disagreements of the exact algorithms with enumeration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: usize,
    pub max_log_z_rel: f64,
    pub max_energy_abs: f64,
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Transfer and DP against brute force on `laws × js × N = 1..=max_n × all
/// boundary conditions`, `instances` fields each; tolerances `10⁻¹⁰`
/// relative on `log Z` (scaled by `max(|log Z|, 1)`) and `10⁻¹²` absolute on
/// the maximal energy.
pub fn oracle_grid(laws: &[DisorderLaw], js: &[f64], max_n: usize, instances: usize, seed: u64) -> Result<OracleReport> {
    let master = SeededStream::new(seed);
    let mut cases = Vec::new();
    for (li, law) in laws.iter().enumerate() {
        for (ji, &j) in js.iter().enumerate() {
            for n in 1..=max_n {
                cases.push((li, law, ji, j, n));
            }
        }
    }
    let parts = per_replica(cases.len(), |c| -> Result<OracleReport> {
        let (li, law, ji, j, n) = cases[c as usize];
        let mut s = master.split(li as u64).split(ji as u64).split(n as u64);
        let mut rep = OracleReport::default();
        for _ in 0..instances {
            let h = sample_increments(law, &mut s, n);
            for bc in BoundaryCondition::ALL {
                let z = log_partition(&h, j, bc)?.value;
                let zb = brute_force_log_partition(&h, j, bc)?.value;
                // Relative to max(|log Z|, 1): log Z crosses zero.
                let rel = (z - zb).abs() / zb.abs().max(1.0);
                let m = max_energy(&h, j, bc)?;
                let mb = brute_force_max(&h, j, bc)?.0;
                let abs = (m - mb).abs();
                rep.cases += 1;
                rep.max_log_z_rel = rep.max_log_z_rel.max(rel);
                rep.max_energy_abs = rep.max_energy_abs.max(abs);
                if rel > 1e-10 || abs > 1e-12 {
                    rep.failures.push(format!("{law} J={j} N={n} bc={bc}: log Z rel {rel:.2e}, max energy abs {abs:.2e}"));
                }
            }
        }
        Ok(rep)
    });
    let mut total = OracleReport::default();
    for p in parts {
        let p = p?;
        total.cases += p.cases;
        total.max_log_z_rel = total.max_log_z_rel.max(p.max_log_z_rel);
        total.max_energy_abs = total.max_energy_abs.max(p.max_energy_abs);
        total.failures.extend(p.failures);
    }
    Ok(total)
}

/// `|energy(reconstructed) − max_energy|` on walks cut at `t_{2K}`, one per
/// realization; the largest value is returned.
pub fn maximal_config_check(law: &DisorderLaw, j: f64, periods: usize, realizations: usize, seed: u64) -> Result<f64> {
    check_coupling(j)?;
    if periods == 0 {
        return Err(invalid("K", "need at least one period"));
    }
    let master = SeededStream::new(seed);
    let gamma = 2.0 * j;
    let mut worst = 0.0f64;
    for r in 0..realizations {
        let mut s = master.split(r as u64);
        let mut h = Vec::new();
        let cut = loop {
            let more = (2.0 * gamma * gamma / law.variance()).ceil() as usize * periods + 64;
            h.extend(sample_increments(law, &mut s, more));
            let d = decompose(&WalkPath::from_increments(&h), gamma);
            if d.periods() >= periods {
                break d.truncated(periods)?;
            }
        };
        let config = reconstruct_maximal_config(&cut)?;
        let hs = &h[..cut.n_steps()];
        let best = max_energy(hs, j, BoundaryCondition::PLUS_PLUS)?;
        worst = worst.max((config.energy(hs, j) - best).abs());
    }
    Ok(worst)
}
