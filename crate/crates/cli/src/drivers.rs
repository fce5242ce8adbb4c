//! Subcommand implementations, usable from tests without a process boundary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use spinquench_core::analysis::{self, CorrelationResult, GrowthFit};
use spinquench_core::dynamics::{EvolutionConfig, Integrator, Terms};
use spinquench_core::field::{Grid2D, ObservableMaps, SpinField};
use spinquench_core::io;
use spinquench_core::params::{derive_scales, ModelCouplings, Trap2D};
use spinquench_core::seed::{apply_seed, ground_state, GroundStateMethod, SeedSpec};
use spinquench_core::spectrum::Dispersion;

use crate::config::{Geometry, GroundStateKind, Profile, RunConfig};
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::{CliError, Result};

/// Everything fixed by the configuration before any noise is drawn.
#[derive(Debug, Clone)]
pub struct System {
    pub grid: Grid2D,
    pub couplings: ModelCouplings,
    pub trap: Option<Trap2D>,
    pub atom_number: f64,
    pub dispersion: Dispersion,
}

impl System {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let p = &cfg.params.physical;
        let scales = derive_scales(p, cfg.params.convention);
        let couplings = ModelCouplings::new(p, &scales);
        let dispersion = Dispersion::new(couplings.kinetic_hz_um2, couplings.q0_hz)?;
        let grid = cfg.grid.grid;
        let (trap, atom_number) = match cfg.grid.geometry {
            Geometry::Uniform => (None, couplings.n2d_ref_um2 * grid.area()),
            Geometry::Trapped => (Some(Trap2D::from_params(p)), p.atom_number),
        };
        Ok(Self {
            grid,
            couplings,
            trap,
            atom_number,
            dispersion,
        })
    }

    /// Ground state with the configured seed noise added.
    pub fn initial_state(&self, cfg: &RunConfig, rng_seed: u64) -> Result<SpinField> {
        let method = match cfg.grid.ground_state {
            GroundStateKind::ThomasFermi => GroundStateMethod::ThomasFermi,
            GroundStateKind::ImaginaryTime => GroundStateMethod::ImaginaryTime {
                dtau_ms: 0.005,
                max_iterations: 50_000,
                tolerance: 1e-12,
            },
        };
        let mut f = ground_state(&self.couplings, self.grid, self.trap.as_ref(), self.atom_number, method)?;
        let spec = SeedSpec { rng_seed, ..cfg.seed };
        apply_seed(&mut f, &spec, Some(&self.dispersion))?;
        Ok(f)
    }
}

/// Observables at one record time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t_ms: f64,
    pub populations: (f64, f64, f64),
    /// G(0) over the analysis region, noise floor subtracted
    pub g0: f64,
    pub l_d_um: Option<f64>,
    pub longitudinal_fraction: f64,
}

fn domain_size(cfg: &RunConfig, c: &CorrelationResult) -> Option<f64> {
    let profile = match cfg.analysis.profile {
        Profile::LongAxis => c.long_axis_profile(),
        Profile::Radial => c.radial_profile(cfg.analysis.radial_bin_um),
    };
    analysis::domain_size(&profile).ok()
}

fn sample(cfg: &RunConfig, t_ms: f64, maps: &ObservableMaps, populations: (f64, f64, f64)) -> Result<Sample> {
    let c = analysis::correlation(maps, &cfg.analysis.region)?;
    Ok(Sample {
        t_ms,
        populations,
        g0: c.g0 - cfg.analysis.noise_floor,
        l_d_um: domain_size(cfg, &c),
        longitudinal_fraction: analysis::longitudinal_fraction(maps, &cfg.analysis.region)?,
    })
}

/// Seeds, evolves and samples one trajectory. The protocol is cut short
/// after the last record time; `on_maps` sees every recorded map.
pub fn run_trajectory(
    cfg: &RunConfig,
    rng_seed: u64,
    q_final: f64,
    record_ms: &[f64],
    mut on_maps: impl FnMut(f64, &ObservableMaps) -> Result<()>,
) -> Result<Vec<Sample>> {
    let sys = System::from_config(cfg)?;
    let mut f = sys.initial_state(cfg, rng_seed)?;
    let mut protocol = cfg.evolve.protocol;
    protocol.q_final = q_final;
    if let Some(&last) = record_ms.last() {
        protocol.hold_ms = (last - protocol.ramp_ms).clamp(0.0, protocol.hold_ms);
    }
    let mut it = Integrator::new(sys.grid, sys.couplings, sys.trap.as_ref(), Terms::default());
    if cfg.evolve.frozen_density {
        it.freeze_density(f.density());
    }
    let evolution = EvolutionConfig {
        store_maps: false,
        ..EvolutionConfig::new(cfg.evolve.dt_ms, record_ms.to_vec())
    };
    let mut samples = Vec::with_capacity(record_ms.len());
    let mut failure = None;
    it.evolve(&mut f, &protocol, &evolution, |t, field| {
        if failure.is_some() {
            return;
        }
        let maps = field.observables();
        let step = sample(cfg, t, &maps, field.zeeman_population()).and_then(|s| {
            on_maps(t, &maps)?;
            Ok(s)
        });
        match step {
            Ok(s) => samples.push(s),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(samples),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub struct SpectrumArgs {
    pub q0_hz: f64,
    pub q_hz: f64,
    pub k_max_um: Option<f64>,
    pub n_k: usize,
    pub kinetic_hz_um2: f64,
}

/// Spectrum CSV text.
pub fn run_spectrum(args: &SpectrumArgs) -> Result<String> {
    let d = Dispersion::new(args.kinetic_hz_um2, args.q0_hz)?;
    // three times the wavevector where eps_k = q0 covers every unstable band
    let k_max = args.k_max_um.unwrap_or_else(|| 3.0 * d.wavevector(args.q0_hz.abs().max(args.q_hz.abs())));
    Ok(d.table(args.q_hz, k_max, args.n_k)?.to_csv())
}

pub fn populations_csv(samples: &[Sample]) -> String {
    let mut s = String::from("t_ms,N_plus,N_zero,N_minus,G0_center\n");
    for x in samples {
        let (p, z, m) = x.populations;
        let _ = writeln!(s, "{},{p},{z},{m},{}", x.t_ms, x.g0);
    }
    s
}

pub fn map_file_name(t_ms: f64) -> String {
    format!("maps_t{t_ms:07.2}ms.bin")
}

/// One trajectory with map dumps, a populations CSV and a manifest.
pub fn run_simulate(cfg: &RunConfig, ini: &str, out_dir: &Path, jobs: usize) -> Result<RunManifest> {
    create_dir(out_dir)?;
    let mut manifest = ManifestBuilder::new("simulate", out_dir, ini, cfg, jobs)?;
    let seed = cfg.seed.rng_seed;
    let qf = cfg.evolve.protocol.q_final;
    manifest.trajectory("simulate".into(), qf, seed);
    let mut written: Vec<PathBuf> = Vec::new();
    let samples = run_trajectory(cfg, seed, qf, &cfg.evolve.record_ms, |t, maps| {
        if cfg.evolve.write_maps {
            let path = out_dir.join(map_file_name(t));
            let side = io::write_maps(&path, maps, t, seed)?;
            written.push(path);
            written.push(side);
        }
        Ok(())
    })?;
    let pop = out_dir.join("populations.csv");
    write_file(&pop, &populations_csv(&samples))?;
    manifest.output(&pop);
    for p in &written {
        manifest.output(p);
    }
    Ok(manifest.finish()?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub qf_hz: f64,
    pub repetition: usize,
    pub rng_seed: u64,
    pub g0: Option<f64>,
    pub l_d_um: Option<f64>,
    pub error: Option<String>,
    /// the failure was a numerical abort
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub qf_hz: f64,
    pub completed: usize,
    pub g0_mean: f64,
    pub g0_stderr: f64,
    /// runs with a resolvable domain size
    pub l_d_count: usize,
    pub l_d_mean_um: f64,
    pub l_d_stderr_um: f64,
}

/// Repetition `r` uses seed `rng_seed + r` at every q_f.
pub fn sweep_seed(cfg: &RunConfig, repetition: usize) -> u64 {
    cfg.seed.rng_seed.wrapping_add(repetition as u64)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
}

/// All (q_f, repetition) cells in input order. Failed cells carry their
/// error instead of values.
pub fn sweep_cells(cfg: &RunConfig, jobs: usize) -> Result<Vec<SweepCell>> {
    let jobs_list: Vec<(f64, usize)> = cfg
        .sweep
        .qf_hz
        .iter()
        .flat_map(|&q| (0..cfg.sweep.repetitions).map(move |r| (q, r)))
        .collect();
    let t = cfg.sweep.t_eval_ms;
    Ok(pool(jobs)?.install(|| {
        jobs_list
            .par_iter()
            .map(|&(qf_hz, repetition)| {
                let rng_seed = sweep_seed(cfg, repetition);
                let mut cell = SweepCell {
                    qf_hz,
                    repetition,
                    rng_seed,
                    g0: None,
                    l_d_um: None,
                    error: None,
                    aborted: false,
                };
                match run_trajectory(cfg, rng_seed, qf_hz, &[t], |_, _| Ok(())) {
                    Ok(s) => {
                        cell.g0 = Some(s[0].g0);
                        cell.l_d_um = s[0].l_d_um;
                    }
                    Err(e) => {
                        cell.aborted = matches!(e, CliError::Numerical(_));
                        cell.error = Some(e.to_string());
                    }
                }
                cell
            })
            .collect()
    }))
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-q_f means, one row per distinct q_f in first-appearance order.
pub fn aggregate(cells: &[SweepCell]) -> Vec<SweepRow> {
    let mut order: Vec<f64> = Vec::new();
    for c in cells {
        if !order.contains(&c.qf_hz) {
            order.push(c.qf_hz);
        }
    }
    order
        .into_iter()
        .map(|q| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.qf_hz == q).collect();
            let g: Vec<f64> = group.iter().filter_map(|c| c.g0).collect();
            let l: Vec<f64> = group.iter().filter_map(|c| c.l_d_um).collect();
            let (g0_mean, g0_stderr) = mean_stderr(&g);
            let (l_d_mean_um, l_d_stderr_um) = mean_stderr(&l);
            SweepRow {
                qf_hz: q,
                completed: g.len(),
                g0_mean,
                g0_stderr,
                l_d_count: l.len(),
                l_d_mean_um,
                l_d_stderr_um,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("qf_hz,completed,G0_mean,G0_stderr,l_d_count,l_d_mean_um,l_d_stderr_um\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.qf_hz, r.completed, r.g0_mean, r.g0_stderr, r.l_d_count, r.l_d_mean_um, r.l_d_stderr_um
        );
    }
    s
}

pub fn cells_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("qf_hz,repetition,rng_seed,G0,l_d_um,error\n");
    for c in cells {
        let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(s, "{},{},{},{},{},{err}", c.qf_hz, c.repetition, c.rng_seed, opt(c.g0), opt(c.l_d_um));
    }
    s
}

/// Runs the sweep grid and writes `sweep.csv`, `sweep_cells.csv` and the
/// manifest. Fails with a numerical abort only when every cell failed.
pub fn run_sweep(cfg: &RunConfig, ini: &str, out_dir: &Path, jobs: usize) -> Result<(RunManifest, Vec<SweepRow>)> {
    create_dir(out_dir)?;
    let mut manifest = ManifestBuilder::new("sweep", out_dir, ini, cfg, jobs)?;
    let cells = sweep_cells(cfg, jobs)?;
    for c in &cells {
        manifest.trajectory(format!("qf={} rep={}", c.qf_hz, c.repetition), c.qf_hz, c.rng_seed);
    }
    let rows = aggregate(&cells);
    let cells_path = out_dir.join("sweep_cells.csv");
    write_file(&cells_path, &cells_csv(&cells))?;
    let sweep_path = out_dir.join("sweep.csv");
    write_file(&sweep_path, &sweep_csv(&rows))?;
    manifest.output(&sweep_path);
    manifest.output(&cells_path);
    let (_, m) = manifest.finish()?;
    if !cells.is_empty() && cells.iter().all(|c| c.error.is_some()) {
        let msg = format!("every sweep cell failed, first: {}", cells[0].error.as_deref().unwrap_or(""));
        return Err(if cells.iter().any(|c| c.aborted) {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        });
    }
    Ok((m, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeSummary {
    pub g0: f64,
    pub l_d_um: Option<f64>,
    pub region: analysis::Region,
    pub time_ms: f64,
}

/// Correlation CSV and summary JSON for one map dump.
pub fn run_analyze(cfg: &RunConfig, dump: &Path, out_dir: &Path) -> Result<AnalyzeSummary> {
    let (maps, header) = io::read_maps(dump)?;
    let c = analysis::correlation(&maps, &cfg.analysis.region)?;
    create_dir(out_dir)?;
    let (mx, mz) = c.max_lag;
    let mut csv = String::from("dx_um,dz_um,G\n");
    for ((i, j), v) in c.g.indexed_iter() {
        let x = (i as f64 - mx as f64) * c.spacing.0;
        let z = (j as f64 - mz as f64) * c.spacing.1;
        let _ = writeln!(csv, "{x},{z},{v}");
    }
    write_file(&out_dir.join("correlation.csv"), &csv)?;
    let summary = AnalyzeSummary {
        g0: c.g0 - cfg.analysis.noise_floor,
        l_d_um: domain_size(cfg, &c),
        region: cfg.analysis.region,
        time_ms: header.time_ms,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(&out_dir.join("summary.json"), &json)?;
    Ok(summary)
}

/// A G(0) series: `t_ms` plus one of `G0`, `G0_mean`, `G0_center`, and
/// optionally `G0_stderr` or `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub t: Vec<f64>,
    pub g0: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

pub fn read_series(path: &Path) -> Result<SeriesData> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let t_col = col(&["t_ms"]).ok_or_else(|| CliError::Input(format!("{}: no t_ms column", path.display())))?;
    let g_col = col(&["G0", "G0_mean", "G0_center"])
        .ok_or_else(|| CliError::Input(format!("{}: no G0 column", path.display())))?;
    let s_col = col(&["G0_stderr", "sigma"]);
    let mut out = SeriesData {
        t: Vec::new(),
        g0: Vec::new(),
        sigma: s_col.map(|_| Vec::new()),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let num = |c: usize| -> Result<f64> {
            let v = rec.get(c).unwrap_or("").trim();
            v.parse()
                .map_err(|_| CliError::Input(format!("{} row {}: cannot parse `{v}`", path.display(), line + 2)))
        };
        out.t.push(num(t_col)?);
        out.g0.push(num(g_col)?);
        if let (Some(c), Some(s)) = (s_col, out.sigma.as_mut()) {
            s.push(num(c)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub g0_tm: f64,
    pub tau_ms: f64,
    pub t_m: f64,
    pub chi2_min: f64,
    pub weighted: bool,
    pub contours: Vec<analysis::Contour>,
    pub surface: analysis::ChiSquareSurface,
}

impl From<GrowthFit> for FitReport {
    fn from(f: GrowthFit) -> Self {
        Self {
            g0_tm: f.g0_tm,
            tau_ms: f.tau_ms,
            t_m: f.t_m,
            chi2_min: f.chi2_min,
            weighted: f.weighted,
            contours: f.contours,
            surface: f.surface,
        }
    }
}

/// Fits a G(0) series and writes `fit.json`.
pub fn run_fit(cfg: &RunConfig, series: &Path, out_dir: &Path) -> Result<FitReport> {
    let data = read_series(series)?;
    let fit = analysis::fit_growth(&data.t, &data.g0, data.sigma.as_deref(), &cfg.analysis.fit)?;
    let report = FitReport::from(fit);
    create_dir(out_dir)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(&out_dir.join("fit.json"), &json)?;
    Ok(report)
}
