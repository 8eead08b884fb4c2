//! Experiment orchestration and artifacts on disk.
//!
//! A run directory holds `config.toml` (normalized), CSV tables, optional
//! snapshots and `manifest.json`. The manifest lists the SHA-256 of every file
//! it vouches for; [`run_report`] re-hashes them and warns on mismatch.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{
    energy_balance_check, format_float, mean_and_band, row_columns, row_values, ColumnSummary, EnsembleReport,
    LedgerLine, MomentCell, PathDiagnostics,
};
use crate::error::{Error, Result};
use crate::grid::write_snapshot;
use crate::monotone::{log_resolvent, resolvent, yosida, yosida_gap, YosidaParams};
use crate::noise::NoiseModel;
use crate::solver::{cascade_study, run_ensemble, stability_bound, CascadeReport, SimConfig, StepMode};

/// Version string folded into every manifest hash.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the normalized configuration with output location and worker count blanked.
    pub config_sha256: String,
    /// SHA-256 of `config_sha256`, version and seed.
    pub manifest_hash: String,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub output_times: Vec<f64>,
    /// Discretization choices, recorded for audit.
    pub scheme: BTreeMap<String, String>,
    pub constants: BTreeMap<String, f64>,
    pub fitted: BTreeMap<String, f64>,
    pub ledger: Vec<LedgerLine>,
    /// File name to SHA-256.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn all_pass(&self) -> bool {
        self.ledger.iter().all(|l| l.pass || !l.asserted)
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex_sha256(&fs::read(path)?))
}

/// `(config_sha256, manifest_hash)` of a configuration.
pub fn config_hashes(cfg: &RunConfig) -> (String, String) {
    let mut c = cfg.clone();
    c.output.dir = PathBuf::new();
    c.ensemble.workers = 1;
    let config_sha = hex_sha256(c.to_toml().as_bytes());
    let manifest_hash = hex_sha256(format!("{config_sha}\n{CODE_VERSION}\n{}", cfg.ensemble.seed).as_bytes());
    (config_sha, manifest_hash)
}

fn scheme_notes(sim: &SimConfig) -> BTreeMap<String, String> {
    let mut s = BTreeMap::new();
    let step = match sim.mode {
        StepMode::Direct => "imex: lambda*(nu-Laplacian) implicit, Psi_lambda(X)-Psi_lambda(0) and noise explicit",
        StepMode::Yosida => "implicit Yosida drift: X' = (eps/a)Y + (dt/a) J_a(Y), a = eps + dt",
    };
    s.insert("time_step".into(), step.into());
    s.insert("spatial".into(), "Fourier pseudo-spectral on the periodic box".into());
    s.insert("noise".into(), "Ito form with explicit 1/2 (sigma x sigma) correction".into());
    s.insert("dissipation_integral".into(), "right-endpoint sum per step".into());
    s.insert("l2_time_integral".into(), "trapezoid per step".into());
    s.insert("rng".into(), "chacha8 keyed by (seed, path), box-muller".into());
    s
}

fn noise_constants(sim: &SimConfig, noise: &NoiseModel) -> BTreeMap<String, f64> {
    let mut c = BTreeMap::new();
    c.insert("c0".into(), noise.c0());
    c.insert("trace_sum".into(), noise.trace_sum());
    c.insert("tail_bound".into(), noise.tail_bound());
    c.insert("strat_norm_bound".into(), noise.strat_norm_bound());
    c.insert("energy_noise_constant".into(), energy_noise_constant(noise));
    c.insert(
        "stability_bound".into(),
        stability_bound(&sim.grid, &sim.params, noise, sim.mode, sim.c_stab),
    );
    c.insert("lambda".into(), sim.params.lambda);
    c.insert("nu".into(), sim.params.nu);
    c.insert("epsilon".into(), sim.params.epsilon);
    c
}

/// `Σ_k μ_k ‖e_k‖²_∞`, the noise factor of the energy inequality.
pub fn energy_noise_constant(noise: &NoiseModel) -> f64 {
    noise.modes().iter().map(|m| m.mu * m.sup_norm * m.sup_norm).sum()
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// One row per `(path, output time)`.
pub fn write_diagnostics_csv(path: &Path, paths: &[PathDiagnostics]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    if let Some(first) = paths.first() {
        let mut header = vec!["path".to_string(), "step".to_string(), "t".to_string()];
        header.extend(row_columns(&first.nu_grid, first.weak_modes.len()));
        wtr.write_record(&header)?;
    }
    for p in paths {
        for r in &p.rows {
            let mut rec = vec![p.path_id.to_string(), r.step.to_string(), format_float(r.t)];
            rec.extend(row_values(r).into_iter().map(format_float));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn write_events_csv(path: &Path, paths: &[PathDiagnostics]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    wtr.write_record(["path", "step", "t", "fraction", "min_value"])?;
    for p in paths {
        for e in &p.negativity_events {
            wtr.write_record([
                p.path_id.to_string(),
                e.step.to_string(),
                format_float(e.t),
                format_float(e.fraction),
                format_float(e.min_value),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn hash_files(out: &Path, names: &[String]) -> Result<BTreeMap<String, String>> {
    names
        .iter()
        .map(|n| Ok((n.clone(), sha256_file(&out.join(n))?)))
        .collect()
}

/// What a simulate run produced.
#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: EnsembleReport,
    pub paths: Vec<PathDiagnostics>,
}

/// Runs the ensemble of `cfg` and writes its artifacts into `out`.
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateOutcome> {
    let sim = cfg.sim_config()?;
    let noise = NoiseModel::build(&sim.noise, sim.grid)?;
    let paths = run_ensemble(&sim, cfg.ensemble.workers)?;
    let mut report = EnsembleReport::from_paths(&paths)?;
    let thresholds = &cfg.diagnostics.thresholds;

    let worst_neg = paths
        .iter()
        .flat_map(|p| p.rows.iter().map(|r| r.negativity_fraction))
        .fold(0.0, f64::max);
    report.assert_exact("negativity_fraction is 0 at every output time", worst_neg, 0.0, worst_neg == 0.0);

    // The balance is an identity of dX = ΔΨ̃_λ(X)dt + noise; a shift ν > 0 adds a term of no sign.
    if sim.diagnostics.energy && sim.params.lambda <= 0.5 && sim.params.epsilon == 0.0 && sim.params.nu == 0.0 {
        let e = energy_balance_check(&paths, energy_noise_constant(&noise), None)?;
        report.fitted.insert("energy_worst_margin".into(), e.worst_margin);
        report.assert_statistical(
            "energy inequality slack >= -(3 sigma band), no halving allowance",
            e.worst_margin,
            0.0,
            e.all_pass,
        );
    }
    for &nu in &sim.diagnostics.nu_grid {
        let cell = MomentCell::fit(sim.params.lambda, nu, sim.params.epsilon, &paths)?;
        report.fitted.insert(format!("moment_c_hminus1_nu_{nu}"), cell.c_hminus1);
        report.fitted.insert(format!("moment_c_l2_nu_{nu}"), cell.c_l2);
    }
    if sim.mode == StepMode::Yosida {
        let worst = paths.iter().fold(0.0f64, |m, p| m.max(p.max_resolvent_residual));
        report.assert_exact(
            "full-drift resolvent relative residual",
            worst,
            thresholds.resolvent_residual_max,
            worst <= thresholds.resolvent_residual_max,
        );
    }

    create_dir(out)?;
    let mut files = vec![
        "config.toml".to_string(),
        "diagnostics.csv".to_string(),
        "events.csv".to_string(),
        "summary.csv".to_string(),
    ];
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    write_diagnostics_csv(&out.join("diagnostics.csv"), &paths)?;
    write_events_csv(&out.join("events.csv"), &paths)?;
    report.write_summary_csv(BufWriter::new(File::create(out.join("summary.csv"))?))?;
    if cfg.output.snapshots {
        fs::create_dir_all(out.join("snapshots"))?;
        for p in &paths {
            if let Some(f) = &p.final_state {
                let name = format!("snapshots/path_{:05}.bin", p.path_id);
                write_snapshot(BufWriter::new(File::create(out.join(&name))?), f)?;
                files.push(name);
            }
        }
    }

    let (config_sha256, manifest_hash) = config_hashes(cfg);
    let manifest = Manifest {
        kind: "simulate".into(),
        version: CODE_VERSION.into(),
        seed: sim.seed,
        config_sha256,
        manifest_hash,
        dt: sim.dt,
        n_steps: sim.n_steps(),
        n_paths: sim.n_paths,
        output_times: report.times.clone(),
        scheme: scheme_notes(&sim),
        constants: noise_constants(&sim, &noise),
        fitted: report.fitted.clone(),
        ledger: report.ledger.clone(),
        files: hash_files(out, &files)?,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(SimulateOutcome {
        dir: out.to_path_buf(),
        manifest,
        report,
        paths,
    })
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: CascadeReport,
}

/// Runs the ε, ν and λ stages and writes `cascade.json` and `distances.csv`.
pub fn run_cascade(cfg: &RunConfig, out: &Path) -> Result<CascadeOutcome> {
    let schedules = cfg
        .schedules()
        .ok_or_else(|| Error::Config("cascade needs a [params.schedules] block".into()))?;
    let sim = cfg.cascade_config()?;
    let noise = NoiseModel::build(&sim.noise, sim.grid)?;
    let distance_nu = cfg.params.schedules.as_ref().map_or(1.0, |s| s.distance_nu);
    let report = cascade_study(&sim, &schedules, cfg.ensemble.workers, distance_nu)?;

    let enough = sim.n_paths >= crate::diagnostics::MIN_ASSERTED_PATHS;
    let mut ledger = Vec::new();
    let mut fitted = BTreeMap::new();
    for stage in &report.stages {
        if let Some(rate) = &stage.rate {
            if let Some(alpha) = rate.alpha {
                fitted.insert("nu_rate_alpha".into(), alpha);
                fitted.insert("nu_rate_c".into(), rate.fitted_c);
                let min = cfg.diagnostics.thresholds.nu_rate_alpha_min;
                ledger.push(LedgerLine {
                    criterion: "fitted nu-rate exponent".into(),
                    value: alpha,
                    threshold: min,
                    pass: alpha >= min,
                    asserted: enough,
                });
            }
            if rate.coincident > 0 {
                ledger.push(LedgerLine {
                    criterion: "distance for nu = nu' is exactly 0".into(),
                    value: rate.coincident_max_dist_sq,
                    threshold: 0.0,
                    pass: rate.coincident_max_dist_sq == 0.0,
                    asserted: true,
                });
            }
        }
        if let Some(dec) = stage.reference_distances_decreasing {
            ledger.push(LedgerLine {
                criterion: "epsilon-schedule distances to the direct path decrease".into(),
                value: if dec { 1.0 } else { 0.0 },
                threshold: 1.0,
                pass: dec,
                asserted: true,
            });
        }
    }

    create_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    write_json(&out.join("cascade.json"), &report)?;
    {
        let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(out.join("distances.csv"))?));
        wtr.write_record(["stage", "kind", "a", "b", "mean_sup_dist_sq", "band", "mean_sup_local_dist_sq"])?;
        for s in &report.stages {
            for (kind, list) in [("consecutive", &s.consecutive), ("to_reference", &s.to_reference)] {
                for c in list {
                    wtr.write_record([
                        s.name.clone(),
                        kind.to_string(),
                        format_float(c.a),
                        format_float(c.b),
                        format_float(c.mean_sup_dist_sq),
                        format_float(c.band),
                        format_float(c.mean_sup_local_dist_sq),
                    ])?;
                }
            }
        }
        wtr.flush()?;
    }
    let files: Vec<String> = ["config.toml", "cascade.json", "distances.csv"].iter().map(|s| s.to_string()).collect();
    let (config_sha256, manifest_hash) = config_hashes(cfg);
    let manifest = Manifest {
        kind: "cascade".into(),
        version: CODE_VERSION.into(),
        seed: sim.seed,
        config_sha256,
        manifest_hash,
        dt: sim.dt,
        n_steps: sim.n_steps(),
        n_paths: sim.n_paths,
        output_times: Vec::new(),
        scheme: scheme_notes(&sim),
        constants: noise_constants(&sim, &noise),
        fitted,
        ledger,
        files: hash_files(out, &files)?,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(CascadeOutcome {
        dir: out.to_path_buf(),
        manifest,
        report,
    })
}

/// Result of [`run_report`].
#[derive(Debug, Clone, Serialize)]
pub struct ReportOutcome {
    pub dirs: Vec<PathBuf>,
    /// Files whose hash no longer matches the manifest, or that are missing.
    pub warnings: Vec<String>,
    /// Files written, relative to the first directory or `out`.
    pub written: Vec<PathBuf>,
    pub summaries: Vec<EnsembleReport>,
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    Ok(serde_json::from_slice(&fs::read(&path)?)?)
}

/// Ensemble summary of a `diagnostics.csv` written by [`run_simulate`].
pub fn summarize_diagnostics_csv(path: &Path) -> Result<EnsembleReport> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if header.len() < 3 || header[0] != "path" || header[2] != "t" {
        return Err(Error::Format(format!("{} is not a diagnostics table", path.display())));
    }
    let mut by_time: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
    let mut times: BTreeMap<u64, f64> = BTreeMap::new();
    let mut paths = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
            .collect::<Result<_>>()?;
        let step = vals[1] as u64;
        paths.insert(vals[0] as u64);
        times.insert(step, vals[2]);
        by_time.entry(step).or_default().push(vals[3..].to_vec());
    }
    let names = &header[3..];
    let mut columns: Vec<ColumnSummary> = names
        .iter()
        .map(|n| ColumnSummary {
            name: n.clone(),
            mean: Vec::new(),
            band: Vec::new(),
        })
        .collect();
    for rows in by_time.values() {
        for (ci, col) in columns.iter_mut().enumerate() {
            let s: Vec<f64> = rows.iter().map(|r| r[ci]).collect();
            let (m, b) = mean_and_band(&s);
            col.mean.push(m);
            col.band.push(b);
        }
    }
    Ok(EnsembleReport {
        n_paths: paths.len(),
        times: times.values().copied().collect(),
        columns,
        fitted: BTreeMap::new(),
        ledger: Vec::new(),
    })
}

fn plot_script(summary: &str, columns: &[&str], image: &str, title: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 960,600\n");
    s.push_str(&format!("set output '{image}'\n"));
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set xlabel 't'\nset key outside right\n");
    let parts: Vec<String> = columns
        .iter()
        .map(|c| format!("'{summary}' using \"t\":\"{c}_mean\" with lines title '{c}'"))
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

fn overlay_script(dirs: &[PathBuf], column: &str, image: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 960,600\n");
    s.push_str(&format!("set output '{image}'\n"));
    s.push_str(&format!("set title '{column}'\nset xlabel 't'\n"));
    let parts: Vec<String> = dirs
        .iter()
        .map(|d| {
            let f = d.join("report_summary.csv");
            format!(
                "'{}' using \"t\":\"{column}_mean\" with lines title '{}'",
                f.display(),
                d.display()
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

const NORM_COLUMNS: [&str; 3] = ["norm_l2_sq", "norm_hm1_homog_sq", "mass"];
const ENERGY_COLUMNS: [&str; 3] = ["phi_lambda", "dissipation", "l2_time_integral"];

/// Verifies and summarizes run directories; with two or more, also writes an overlay script.
///
/// Summaries and plot scripts go into each run directory; the overlay goes
/// into `out` (default: the first directory).
pub fn run_report(dirs: &[PathBuf], out: Option<&Path>) -> Result<ReportOutcome> {
    if dirs.is_empty() {
        return Err(Error::Param("report needs at least one run directory".into()));
    }
    let mut warnings = Vec::new();
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for dir in dirs {
        let manifest = read_manifest(dir)?;
        for (name, hash) in &manifest.files {
            let p = dir.join(name);
            if !p.exists() {
                warnings.push(format!("integrity warning: {} listed in the manifest is missing", p.display()));
            } else if &sha256_file(&p)? != hash {
                warnings.push(format!("integrity warning: {} does not match its manifest hash", p.display()));
            }
        }
        let diag = dir.join("diagnostics.csv");
        if manifest.kind == "simulate" {
            if !diag.exists() {
                return Err(Error::MissingArtifact(diag));
            }
            let mut summary = summarize_diagnostics_csv(&diag)?;
            summary.fitted = manifest.fitted.clone();
            summary.ledger = manifest.ledger.clone();
            summary.write_summary_csv(BufWriter::new(File::create(dir.join("report_summary.csv"))?))?;
            write_json(&dir.join("report.json"), &summary)?;
            fs::write(
                dir.join("norms.gp"),
                plot_script("report_summary.csv", &NORM_COLUMNS, "norms.png", "norms"),
            )?;
            fs::write(
                dir.join("energy.gp"),
                plot_script("report_summary.csv", &ENERGY_COLUMNS, "energy.png", "energy"),
            )?;
            for f in ["report_summary.csv", "report.json", "norms.gp", "energy.gp"] {
                written.push(dir.join(f));
            }
            summaries.push(summary);
        } else {
            let d = dir.join("distances.csv");
            if !d.exists() {
                return Err(Error::MissingArtifact(d));
            }
            let mut s = String::from("set datafile separator ','\nset terminal pngcairo size 960,600\n");
            s.push_str("set output 'distances.png'\nset logscale xy\nset xlabel '|a - b|'\nset ylabel 'mean sup distance^2'\n");
            s.push_str("plot 'distances.csv' using (abs($3-$4)):5 skip 1 with linespoints title 'stage distances'\n");
            fs::write(dir.join("distances.gp"), s)?;
            written.push(dir.join("distances.gp"));
        }
    }
    if dirs.len() >= 2 {
        let target = out.map(Path::to_path_buf).unwrap_or_else(|| dirs[0].clone());
        create_dir(&target)?;
        let mut script = String::new();
        for c in NORM_COLUMNS.iter().chain(ENERGY_COLUMNS.iter()) {
            script.push_str(&overlay_script(dirs, c, &format!("overlay_{c}.png")));
            script.push('\n');
        }
        let p = target.join("overlay.gp");
        fs::write(&p, script)?;
        written.push(p);
    }
    Ok(ReportOutcome {
        dirs: dirs.to_vec(),
        warnings,
        written,
        summaries,
    })
}

/// One property of the scalar suite.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarCheck {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Worst value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarSuiteReport {
    pub lambdas: Vec<f64>,
    pub checks: Vec<ScalarCheck>,
    pub pass: bool,
}

/// `n` points log-spaced over `[a, b]`.
pub fn log_sweep(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn check(name: &str, values: impl Iterator<Item = (f64, bool)>, threshold: f64, larger_is_worse: bool) -> ScalarCheck {
    let mut samples = 0;
    let mut violations = 0;
    let mut worst = if larger_is_worse { f64::NEG_INFINITY } else { f64::INFINITY };
    for (v, ok) in values {
        samples += 1;
        if !ok {
            violations += 1;
        }
        worst = if larger_is_worse { worst.max(v) } else { worst.min(v) };
    }
    ScalarCheck {
        name: name.into(),
        samples,
        violations,
        worst,
        threshold,
        pass: violations == 0,
    }
}

/// Scalar property suite of the resolvent calculus.
///
/// Errors from the scalar routines (for instance a gap request with `λ > 1/2`)
/// are returned, not folded into the report.
pub fn scalar_suite(lambdas: &[f64], seed: u64) -> Result<ScalarSuiteReport> {
    let sweep = log_sweep(1e-6, 1e3, 200);
    let mut checks = Vec::new();

    let mut gaps = Vec::new();
    let mut brackets = Vec::new();
    for &lambda in lambdas {
        let p = YosidaParams::new(lambda)?;
        for &r in &sweep {
            let g = yosida_gap(r, &p)?;
            gaps.push((g, g <= 1e-9));
            let j = resolvent(r, &p)?;
            let lo = (r + lambda) / (1.0 + lambda);
            let hi = r.exp();
            let slack = (j - lo).min(hi - j);
            brackets.push((slack, j >= lo * (1.0 - 4.0 * f64::EPSILON) && j <= hi * (1.0 + 4.0 * f64::EPSILON)));
        }
    }
    checks.push(check("gap Psi(r) + r/(lambda+J) - 2r <= 1e-9", gaps.into_iter(), 1e-9, true));
    checks.push(check("(r+lambda)/(1+lambda) <= J(r) <= e^r", brackets.into_iter(), 0.0, false));

    let p = YosidaParams::new(1e-4)?;
    let near: Vec<(f64, bool)> = log_sweep(0.1, 10.0, 200)
        .into_iter()
        .map(|r| {
            let d = (yosida(r, &p).expect("finite input") - r.ln()).abs();
            (d, d <= 0.01)
        })
        .collect();
    checks.push(check("|Psi(r) - ln r| <= 0.01 at lambda = 1e-4", near.into_iter(), 0.01, true));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nonexp = Vec::new();
    let mut lip = Vec::new();
    for _ in 0..10_000 {
        let lambda = lambdas[rng.gen_range(0..lambdas.len())];
        let p = YosidaParams::new(lambda)?;
        let draw = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.2) {
                rng.gen_range(-50.0..50.0)
            } else {
                10f64.powf(rng.gen_range(-6.0..3.0))
            }
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        if a == b {
            continue;
        }
        let (ya, yb) = (log_resolvent(a, &p, None)?, log_resolvent(b, &p, None)?);
        let dj = (ya.exp() - yb.exp()).abs();
        let ratio = dj / (a - b).abs();
        nonexp.push((ratio, dj <= (a - b).abs() * (1.0 + 1e-12) + 1e-15));
        let dpsi = (ya - yb).abs();
        let ratio = dpsi * lambda / (a - b).abs();
        lip.push((ratio, dpsi <= (a - b).abs() / lambda * (1.0 + 1e-9) + 1e-12));
    }
    checks.push(check("|J(a) - J(b)| <= |a - b|", nonexp.into_iter(), 1.0, true));
    checks.push(check("lambda |Psi(a) - Psi(b)| <= |a - b|", lip.into_iter(), 1.0, true));

    Ok(ScalarSuiteReport {
        lambdas: lambdas.to_vec(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}
