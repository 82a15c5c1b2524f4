//! Configuration-driven experiment runner: builds a coefficient family and a
//! matching mesh, expands the solution in the requested basis, and writes
//! rearrangement, rate, and diagnostic artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{rate_estimates, rearrange_pairs, rearrange_retained, weighted_l2_diagnostic};
use crate::error::Error;
use crate::fem1d::{load_constant, load_from_energy_pair, FemSpace, Mesh};
use crate::fields::{
    inclusion_breakpoints, weights_finite_overlap, weights_wavelet, CoefficientField, FamilyConfig,
    WeightSequence,
};
use crate::galerkin::{adaptive_solve, quadrature_mean_square_norm, quadrature_oracle, DEGREE_CAP};
use crate::multiindex::MultiIndex;
use crate::taylor::{greedy_expand, simplex_size, ExpansionKind};

/// Expansion selector for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Taylor,
    Legendre,
}

/// Solver block of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    #[serde(default = "default_n_target")]
    pub n_target: usize,
    /// Bulk fraction for the greedy Taylor margin (0, 1].
    #[serde(default = "default_bulk")]
    pub bulk: f64,
    /// Marking fraction for the adaptive Galerkin refinement (0, 1].
    #[serde(default = "default_dorfler")]
    pub dorfler: f64,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
}

fn default_n_target() -> usize {
    1 << 13
}

fn default_bulk() -> f64 {
    0.2
}

fn default_dorfler() -> f64 {
    0.5
}

fn default_cg_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    /// Minimum element count; `None` picks the family default (dyadic mesh
    /// aligned with all wavelet breakpoints for Haar, the inclusion
    /// partition refined to >= 512 elements, uniform 512 for Fourier).
    #[serde(default)]
    pub elements: Option<usize>,
}

/// Right-hand side specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadConfig {
    /// `f = c`.
    Constant { c: f64 },
    /// `f = -g''` for the piecewise linear `g` through these points;
    /// breakpoints are added to the mesh.
    EnergyPair {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig::Constant { c: 1.0 }
    }
}

/// One experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub load: LoadConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.solver.n_target < 1 {
            return Err(Error::Validation("solver.n_target must be >= 1".into()));
        }
        if !(self.solver.bulk > 0.0 && self.solver.bulk <= 1.0) {
            return Err(Error::Validation("solver.bulk must lie in (0, 1]".into()));
        }
        if !(self.solver.dorfler > 0.0 && self.solver.dorfler <= 1.0) {
            return Err(Error::Validation("solver.dorfler must lie in (0, 1]".into()));
        }
        if !(self.solver.cg_tol > 0.0 && self.solver.cg_tol < 1.0) {
            return Err(Error::Validation("solver.cg_tol must lie in (0, 1)".into()));
        }
        if let Some(elements) = self.mesh.elements {
            if elements < 1 {
                return Err(Error::Validation("mesh.elements must be >= 1".into()));
            }
        }
        if let LoadConfig::EnergyPair {
            breakpoints,
            values,
        } = &self.load
        {
            if breakpoints.len() != values.len() || breakpoints.is_empty() {
                return Err(Error::Validation(
                    "load.energy_pair needs matching, nonempty breakpoints and values".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Builds the experiment mesh for a family: piecewise-constant expansion
/// functions must have all their breakpoints on the mesh.
pub fn family_mesh(
    family: &FamilyConfig,
    elements: Option<usize>,
    extra_points: &[f64],
) -> Result<Mesh, Error> {
    match family {
        FamilyConfig::Inclusions { j, .. } => {
            let mut all = inclusion_breakpoints(*j);
            all.extend_from_slice(extra_points);
            Mesh::refined(&all, elements.unwrap_or(512).max(512))
        }
        FamilyConfig::Fourier { j, .. } => {
            // at most half a period per element for the finest mode, capped
            // so the largest truncations stay within memory for the block
            // solver (the per-element Gauss error at one period per element
            // is still ~1e-4 relative on the smallest matrices)
            let m = elements.unwrap_or(512).max((2 * j).min(3072));
            if extra_points.is_empty() {
                Ok(Mesh::uniform(m))
            } else {
                let points: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
                let mut all = points;
                all.extend_from_slice(extra_points);
                Mesh::refined(&all, m)
            }
        }
        FamilyConfig::Haar { l_max, .. } => {
            // keep every dyadic wavelet breakpoint on the mesh
            let chunk = 1usize << (l_max + 1);
            let base = elements.unwrap_or(chunk * 2);
            let m = base.div_ceil(chunk) * chunk;
            if extra_points.is_empty() {
                Ok(Mesh::uniform(m))
            } else {
                let points: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
                let mut all = points;
                all.extend_from_slice(extra_points);
                Mesh::refined(&all, m)
            }
        }
        FamilyConfig::Custom { abar, psis } => {
            let mut all = Vec::new();
            abar.collect_breakpoints(&mut all);
            for psi in psis {
                psi.collect_breakpoints(&mut all);
            }
            all.extend_from_slice(extra_points);
            Mesh::refined(&all, elements.unwrap_or(64))
        }
    }
}

fn build_load(space: &FemSpace, load: &LoadConfig) -> Result<Vec<f64>, Error> {
    match load {
        LoadConfig::Constant { c } => Ok(load_constant(space, *c)),
        LoadConfig::EnergyPair {
            breakpoints,
            values,
        } => load_from_energy_pair(space, breakpoints, values),
    }
}

/// Diagnostic weight sequence for a family: finite-overlap weights for the
/// disjoint inclusions (`M = 1`) and the Fourier modes (`M = J`), level
/// weights with `beta = alpha / 2` for Haar.
pub fn diagnostic_weights(
    field: &CoefficientField,
    family: &FamilyConfig,
) -> Result<WeightSequence, Error> {
    match family {
        FamilyConfig::Inclusions { beta, .. } => {
            let p = (1.0 / (beta + 0.5)).min(1.9);
            Ok(weights_finite_overlap(field, 1, p)?.0)
        }
        FamilyConfig::Fourier { beta, .. } => {
            let p = (1.0 / beta).min(1.9);
            Ok(weights_finite_overlap(field, field.j_count(), p)?.0)
        }
        FamilyConfig::Haar { alpha, .. } => weights_wavelet(field, alpha / 2.0),
        FamilyConfig::Custom { .. } => {
            let rho = vec![1.0; field.j_count()];
            let delta = crate::fields::compute_delta(field, &rho);
            if delta >= 1.0 {
                return Err(Error::DeltaViolation { delta });
            }
            Ok(WeightSequence { rho, delta })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub i: u32,
    pub s_i: f64,
    pub pre_asymptotic: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub theta: f64,
    pub theta_lower: Option<f64>,
    pub delta: Option<f64>,
    pub weighted_partial_sum: Option<f64>,
    pub weighted_bound: Option<f64>,
    pub uses_a_nu: bool,
    pub predicted_rate: Option<f64>,
    /// Tail quantities are computed over the finite set only.
    pub computed_prefix_only: bool,
    pub rates: Vec<RateRow>,
    pub rates_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub version: String,
    pub mesh_elements: usize,
    pub dof_count: usize,
    pub coefficient_count: usize,
    pub member_count: usize,
    pub stagnated: Option<bool>,
    pub refinement_steps: Option<usize>,
    pub wall_ms: u128,
    pub artifacts: Vec<String>,
}

/// FNV-1a hash of the canonical JSON encoding; stable fingerprint for
/// manifests.
pub fn config_hash(config: &RunConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn write_rearrangement(
    path: &Path,
    seq: &crate::analysis::RearrangedSequence,
) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["rank", "norm", "index_json"])?;
    for (rank, (value, nu)) in seq.values.iter().zip(&seq.origin).enumerate() {
        writer.write_record([
            (rank + 1).to_string(),
            value.to_string(),
            serde_json::to_string(nu)?,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_rates(path: &Path, rates: &[f64]) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["i", "s_i"])?;
    for (i, s) in rates.iter().enumerate() {
        writer.write_record([(i + 1).to_string(), s.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Executes a run: field, mesh, expansion, analysis, artifacts. Returns the
/// manifest that is also written to `output_dir/manifest.json`.
pub fn run(config: &RunConfig) -> Result<RunManifest, Error> {
    config.validate()?;
    let started = Instant::now();
    let field = config.family.build()?;

    let extra_points: Vec<f64> = match &config.load {
        LoadConfig::EnergyPair { breakpoints, .. } => breakpoints.clone(),
        _ => Vec::new(),
    };
    let mesh = family_mesh(&config.family, config.mesh.elements, &extra_points)?;
    let space = FemSpace::new(mesh);
    let load = build_load(&space, &config.load)?;

    let (map, stagnated, refinement_steps) = match config.solver.mode {
        Mode::Taylor => {
            let map = greedy_expand(
                &field,
                &space,
                &load,
                config.solver.n_target,
                config.solver.bulk,
            )?;
            (map, None, None)
        }
        Mode::Legendre => {
            let run = adaptive_solve(
                &field,
                &space,
                &load,
                config.solver.n_target,
                config.solver.dorfler,
                config.solver.cg_tol,
                DEGREE_CAP,
            )?;
            (run.map, Some(run.stagnated), Some(run.refinement_steps))
        }
    };

    fs::create_dir_all(&config.output_dir)?;
    let mut artifacts = Vec::new();

    let tag = map.kind.tag();
    let coeff_name = format!("{tag}_coefficients.csv");
    let coeff_file = fs::File::create(config.output_dir.join(&coeff_name))?;
    map.dump_csv(coeff_file)?;
    artifacts.push(coeff_name);

    let seq = rearrange_retained(&map);
    write_rearrangement(&config.output_dir.join("rearrangement.csv"), &seq)?;
    artifacts.push("rearrangement.csv".into());

    let max_i = (usize::BITS - 1 - seq.len().leading_zeros()).min(14);
    let (rates, rates_note) = if seq.len() >= 2 && max_i >= 1 {
        match rate_estimates(&seq, max_i) {
            Ok(rates) => (rates, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        }
    } else {
        (
            Vec::new(),
            Some("fewer than two computed coefficients; no rates".into()),
        )
    };
    write_rates(&config.output_dir.join("rates.csv"), &rates)?;
    artifacts.push("rates.csv".into());

    let (delta, partial, bound) = match diagnostic_weights(&field, &config.family) {
        Ok(weights) => {
            let use_a_nu = map.kind == ExpansionKind::Legendre;
            let (partial, bound) = weighted_l2_diagnostic(&map, &weights, use_a_nu)?;
            (Some(weights.delta), Some(partial), Some(bound))
        }
        Err(_) => (None, None, None),
    };
    let diagnostics = Diagnostics {
        theta: field.theta(),
        theta_lower: field.theta_lower(),
        delta,
        weighted_partial_sum: partial,
        weighted_bound: bound,
        uses_a_nu: map.kind == ExpansionKind::Legendre,
        predicted_rate: config.family.predicted_rate(),
        computed_prefix_only: true,
        rates: rates
            .iter()
            .enumerate()
            .map(|(i, s)| RateRow {
                i: (i + 1) as u32,
                s_i: *s,
                pre_asymptotic: (i + 1) < 6,
            })
            .collect(),
        rates_note,
    };
    let mut file = fs::File::create(config.output_dir.join("diagnostics.json"))?;
    serde_json::to_writer_pretty(&mut file, &diagnostics)?;
    file.write_all(b"\n")?;
    artifacts.push("diagnostics.json".into());

    let manifest = RunManifest {
        config: config.clone(),
        config_hash: config_hash(config),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mesh_elements: space.mesh().num_elements(),
        dof_count: space.dof_count(),
        coefficient_count: map.len(),
        member_count: map.member_count(),
        stagnated,
        refinement_steps,
        wall_ms: started.elapsed().as_millis(),
        artifacts,
    };
    let mut file = fs::File::create(config.output_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n")?;
    Ok(manifest)
}

/// One line of the consolidated table report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub run: String,
    pub i: u32,
    pub s_ours: f64,
    pub s_reference: Option<f64>,
    pub deviation: Option<f64>,
    pub predicted_rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<String>,
}

struct TableRun {
    label: &'static str,
    family: FamilyConfig,
    mode: Mode,
    /// Published reference values for s_6..s_11, where available.
    reference: [f64; 6],
    cg_tol: f64,
}

/// Reference decay rates `s_6..s_11` the reproduction runs are compared
/// against, for each family/exponent/mode and for the theta studies.
/// Truncation sizes for the reproduction runs: the slower the first-order
/// norms decay, the more expansion terms are needed before the largest
/// excluded term drops below the deepest tabulated rank.
pub fn inclusions_truncation(beta: f64) -> usize {
    if beta < 0.75 {
        2560
    } else {
        2048
    }
}

pub fn fourier_truncation(_beta: f64, theta: f64) -> usize {
    // Legendre singletons rank high relative to products, so the deepest
    // tabulated rank sees the singleton tail for every experiment exponent;
    // shrinking theta suppresses products ~theta^2 and pushes the tail
    // deeper still
    if theta < 0.05 {
        2560
    } else if theta < 0.25 {
        2048
    } else {
        1024
    }
}

pub fn haar_truncation(alpha: f64, theta: f64) -> u32 {
    let base = if alpha < 0.75 {
        10
    } else if alpha < 1.5 {
        9
    } else {
        8
    };
    if theta < 0.25 {
        base.max(10)
    } else {
        base
    }
}

fn table_runs() -> Vec<TableRun> {
    let inc = |beta, theta, label, mode, reference| TableRun {
        label,
        family: FamilyConfig::Inclusions {
            beta,
            theta,
            j: inclusions_truncation(beta),
        },
        mode,
        reference,
        cg_tol: default_cg_tol(),
    };
    let fou = |beta, theta: f64, label, mode, reference| TableRun {
        label,
        family: FamilyConfig::Fourier {
            beta,
            theta,
            j: fourier_truncation(beta, theta),
        },
        mode,
        reference,
        // small-theta coefficients at deep ranks need a deeper residual floor
        cg_tol: if theta < 0.25 { 1e-13 } else { default_cg_tol() },
    };
    let haar = |alpha, theta: f64, label, mode, reference| TableRun {
        label,
        family: FamilyConfig::Haar {
            alpha,
            theta,
            l_max: haar_truncation(alpha, theta),
        },
        mode,
        reference,
        cg_tol: if theta < 0.25 { 1e-13 } else { default_cg_tol() },
    };
    vec![
        inc(2.0, 0.5, "inclusions-b2-taylor", Mode::Taylor, [2.563, 2.708, 2.481, 2.574, 2.439, 2.477]),
        inc(1.0, 0.5, "inclusions-b1-taylor", Mode::Taylor, [1.730, 1.731, 1.726, 1.706, 1.650, 1.643]),
        inc(0.5, 0.5, "inclusions-b05-taylor", Mode::Taylor, [1.225, 1.274, 1.211, 1.235, 1.196, 1.175]),
        inc(2.0, 0.5, "inclusions-b2-legendre", Mode::Legendre, [2.476, 2.578, 2.601, 2.514, 2.543, 2.507]),
        inc(1.0, 0.5, "inclusions-b1-legendre", Mode::Legendre, [1.789, 1.786, 1.701, 1.661, 1.660, 1.642]),
        inc(0.5, 0.5, "inclusions-b05-legendre", Mode::Legendre, [1.302, 1.235, 1.212, 1.200, 1.169, 1.160]),
        fou(2.0, 0.5, "fourier-b2-taylor", Mode::Taylor, [1.452, 1.619, 1.495, 1.515, 1.533, 1.515]),
        fou(1.5, 0.5, "fourier-b15-taylor", Mode::Taylor, [1.165, 1.320, 1.278, 1.257, 1.270, 1.258]),
        fou(1.25, 0.5, "fourier-b125-taylor", Mode::Taylor, [1.250, 1.092, 1.147, 1.141, 1.143, 1.143]),
        fou(2.0, 0.5, "fourier-b2-legendre", Mode::Legendre, [1.593, 1.682, 1.597, 1.632, 1.637, 1.639]),
        fou(1.5, 0.5, "fourier-b15-legendre", Mode::Legendre, [1.294, 1.353, 1.337, 1.338, 1.341, 1.327]),
        fou(1.25, 0.5, "fourier-b125-legendre", Mode::Legendre, [1.250, 1.154, 1.192, 1.187, 1.173, 1.191]),
        haar(2.0, 0.5, "haar-a2-taylor", Mode::Taylor, [1.450, 1.569, 1.794, 1.633, 1.799, 1.866]),
        haar(1.0, 0.5, "haar-a1-taylor", Mode::Taylor, [1.301, 0.993, 1.122, 1.186, 1.225, 1.266]),
        haar(0.5, 0.5, "haar-a05-taylor", Mode::Taylor, [0.927, 0.878, 0.803, 0.866, 0.872, 0.903]),
        haar(2.0, 0.5, "haar-a2-legendre", Mode::Legendre, [1.853, 1.779, 1.874, 1.913, 1.909, 2.037]),
        haar(1.0, 0.5, "haar-a1-legendre", Mode::Legendre, [1.165, 1.339, 1.275, 1.330, 1.247, 1.268]),
        haar(0.5, 0.5, "haar-a05-legendre", Mode::Legendre, [0.947, 0.939, 0.953, 0.949, 0.961, 0.958]),
        // theta studies: Fourier beta = 2 and Haar alpha = 2, Legendre
        fou(2.0, 0.125, "fourier-b2-legendre-th3", Mode::Legendre, [1.876, 1.767, 1.822, 1.813, 1.813, 1.814]),
        fou(2.0, 0.03125, "fourier-b2-legendre-th5", Mode::Legendre, [2.000, 1.872, 1.908, 1.905, 1.898, 1.921]),
        haar(2.0, 0.125, "haar-a2-legendre-th3", Mode::Legendre, [2.388, 2.082, 2.226, 2.056, 2.238, 2.196]),
        haar(2.0, 0.03125, "haar-a2-legendre-th5", Mode::Legendre, [2.123, 2.175, 2.347, 2.410, 2.321, 2.396]),
    ]
}

/// Runs the reproduction suite into `out_root` (one subdirectory per run)
/// and writes the consolidated `report.csv` / `report.json`. `n_target`
/// overrides the retained set size (the reference comparison needs the
/// default `2^13`).
pub fn reproduce_tables(out_root: &Path, n_target: usize) -> Result<TableReport, Error> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for spec in table_runs() {
        let config = RunConfig {
            family: spec.family.clone(),
            solver: SolverConfig {
                mode: spec.mode,
                n_target,
                bulk: default_bulk(),
                dorfler: default_dorfler(),
                cg_tol: spec.cg_tol,
            },
            mesh: MeshConfig::default(),
            load: LoadConfig::default(),
            output_dir: out_root.join(spec.label),
        };
        match run(&config) {
            Ok(_) => {
                let rates = read_rates(&config.output_dir.join("rates.csv"))?;
                for i in 6..=11u32 {
                    if let Some(s) = rates.get((i - 1) as usize) {
                        let reference = spec.reference[(i - 6) as usize];
                        rows.push(ReportRow {
                            run: spec.label.to_string(),
                            i,
                            s_ours: *s,
                            s_reference: Some(reference),
                            deviation: Some(s - reference),
                            predicted_rate: spec.family.predicted_rate(),
                        });
                    }
                }
            }
            Err(e) => failures.push(format!("{}: {e}", spec.label)),
        }
    }

    fs::create_dir_all(out_root)?;
    let mut writer = csv::Writer::from_path(out_root.join("report.csv"))?;
    writer.write_record(["run", "i", "s_ours", "s_reference", "deviation", "predicted_rate"])?;
    for row in &rows {
        writer.write_record([
            row.run.clone(),
            row.i.to_string(),
            row.s_ours.to_string(),
            row.s_reference.map_or(String::new(), |v| v.to_string()),
            row.deviation.map_or(String::new(), |v| v.to_string()),
            row.predicted_rate.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    writer.flush()?;

    let report = TableReport { rows, failures };
    let mut file = fs::File::create(out_root.join("report.json"))?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")?;
    Ok(report)
}

fn read_rates(path: &Path) -> Result<Vec<f64>, Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rates = Vec::new();
    for record in reader.records() {
        let record = record?;
        let s: f64 = record
            .get(1)
            .ok_or_else(|| Error::Validation("rates.csv needs two columns".into()))?
            .parse()
            .map_err(|e| Error::Validation(format!("bad rate value: {e}")))?;
        rates.push(s);
    }
    Ok(rates)
}

/// Reads a `(index_json, v_norm)` coefficient dump.
pub fn read_coefficients(path: &Path) -> Result<Vec<(MultiIndex, f64)>, Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let nu: MultiIndex = serde_json::from_str(record.get(0).ok_or_else(|| {
            Error::Validation("coefficient dump needs an index_json column".into())
        })?)?;
        let norm: f64 = record
            .get(1)
            .ok_or_else(|| Error::Validation("coefficient dump needs a v_norm column".into()))?
            .parse()
            .map_err(|e| Error::Validation(format!("bad norm value: {e}")))?;
        pairs.push((nu, norm));
    }
    Ok(pairs)
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeSummary {
    pub count: usize,
    pub rates: Vec<f64>,
}

/// Re-analyzes a coefficient dump: writes `rearrangement.csv` and
/// `rates.csv` next to the requested output directory.
pub fn analyze(coeff_csv: &Path, out_dir: &Path) -> Result<AnalyzeSummary, Error> {
    let pairs = read_coefficients(coeff_csv)?;
    if pairs.is_empty() {
        return Err(Error::Validation("coefficient dump is empty".into()));
    }
    let seq = rearrange_pairs(pairs);
    fs::create_dir_all(out_dir)?;
    write_rearrangement(&out_dir.join("rearrangement.csv"), &seq)?;
    let max_i = (usize::BITS - 1 - seq.len().leading_zeros()).min(14);
    let rates = if max_i >= 1 {
        rate_estimates(&seq, max_i).unwrap_or_default()
    } else {
        Vec::new()
    };
    write_rates(&out_dir.join("rates.csv"), &rates)?;
    Ok(AnalyzeSummary {
        count: seq.len(),
        rates,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    /// Max relative V-norm deviation of computed Taylor coefficients from
    /// the constant-field closed form, all |nu| <= 6, J = 4.
    pub constant_field_max_rel: f64,
    /// Max relative deviation of adaptive Galerkin coefficient norms from
    /// tensor quadrature, single variable, degrees 0..=10.
    pub legendre_max_rel: f64,
    /// Relative Parseval defect between summed coefficient norms and the
    /// quadrature of the mean square norm.
    pub parseval_rel: f64,
    /// Largest higher-order coefficient norm of the degenerate field with
    /// no parametric dependence (should vanish).
    pub degenerate_max: f64,
    pub pass: bool,
}

/// Cross-checks the two expansion paths against independent references.
pub fn oracle_check() -> Result<OracleReport, Error> {
    use crate::fem1d::WeightFn;
    use crate::multiindex::monomial_weight;
    use crate::operators::OperatorSet;

    // constant field: psi_j = theta 2^{-j}, theta = 1/2, J = 4
    let theta = 0.5;
    let b: Vec<f64> = (1..=4).map(|j| theta * 2f64.powi(-j)).collect();
    let psis = b.iter().map(|&v| WeightFn::Constant(v)).collect();
    let field = CoefficientField::custom(WeightFn::Constant(1.0), psis)?;
    let space = FemSpace::new(Mesh::uniform(32));
    let load = load_constant(&space, 1.0);
    let ops = OperatorSet::build(&field, &space)?;
    let map = greedy_expand(&field, &space, &load, simplex_size(4, 6), 1.0)?;
    let t0 = map
        .get(&MultiIndex::zero())
        .and_then(|e| e.vector.as_ref())
        .expect("t_0 present")
        .clone();
    let mut constant_field_max_rel = 0.0_f64;
    for (nu, entry) in map.iter() {
        let order = nu.total_order();
        if order > 6 {
            continue;
        }
        let vector = entry.vector.as_ref().expect("members keep vectors");
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign * nu.factorial_ratio()? * monomial_weight(&b, nu);
        let diff: Vec<f64> = vector
            .iter()
            .zip(&t0)
            .map(|(v, t)| v - scale * t)
            .collect();
        let rel = ops.v_norm(&diff) / (scale.abs() * ops.v_norm(&t0));
        constant_field_max_rel = constant_field_max_rel.max(rel);
    }

    // single-variable Legendre expansion vs tensor quadrature
    let field1 = CoefficientField::custom(WeightFn::Constant(1.0), vec![WeightFn::Constant(0.5)])?;
    let space1 = FemSpace::new(Mesh::uniform(32));
    let load1 = load_constant(&space1, 1.0);
    let adaptive = adaptive_solve(&field1, &space1, &load1, 31, 0.5, 1e-14, DEGREE_CAP)?;
    let mut legendre_max_rel = 0.0_f64;
    for k in 0..=10u32 {
        let nu = MultiIndex::from_pairs([(1, k)]);
        let oracle = quadrature_oracle(&field1, &space1, &load1, &nu, 34)?;
        let computed = adaptive
            .map
            .get(&nu)
            .map(|e| e.v_norm)
            .ok_or_else(|| Error::Solver(format!("degree {k} missing from adaptive set")))?;
        legendre_max_rel = legendre_max_rel.max((computed - oracle).abs() / oracle);
    }
    let mut coefficient_square_sum = 0.0;
    for k in 0..=30u32 {
        let nu = MultiIndex::from_pairs([(1, k)]);
        let value = quadrature_oracle(&field1, &space1, &load1, &nu, 34)?;
        coefficient_square_sum += value * value;
    }
    let mean_square = quadrature_mean_square_norm(&field1, &space1, &load1, 34)?;
    let parseval_rel = (coefficient_square_sum - mean_square).abs() / mean_square;

    // no parametric dependence: higher coefficients vanish
    let degenerate =
        CoefficientField::custom(WeightFn::Constant(1.0), vec![WeightFn::Constant(0.0)])?;
    let map0 = greedy_expand(&degenerate, &space1, &load1, 1, 1.0)?;
    let t0_norm = map0.get(&MultiIndex::zero()).unwrap().v_norm;
    let degenerate_max = map0
        .iter()
        .filter(|(nu, _)| !nu.is_zero())
        .map(|(_, e)| e.v_norm)
        .fold(0.0_f64, f64::max)
        / t0_norm;

    let pass = constant_field_max_rel <= 1e-9
        && legendre_max_rel <= 1e-8
        && parseval_rel <= 1e-8
        && degenerate_max <= 1e-12;
    Ok(OracleReport {
        constant_field_max_rel,
        legendre_max_rel,
        parseval_rel,
        degenerate_max,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config(dir: &Path) -> RunConfig {
        RunConfig {
            family: FamilyConfig::Inclusions {
                beta: 1.0,
                theta: 0.5,
                j: 8,
            },
            solver: SolverConfig {
                mode: Mode::Taylor,
                n_target: 20,
                bulk: 0.2,
                dorfler: 0.5,
                cg_tol: 1e-10,
            },
            mesh: MeshConfig {
                elements: Some(64),
            },
            load: LoadConfig::Constant { c: 1.0 },
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn config_round_trip() {
        let config = sample_config(Path::new("/tmp/out"));
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn config_defaults_fill_in() {
        let text = r#"{
            "family": {"family": "fourier", "beta": 2.0, "theta": 0.5, "j": 16},
            "solver": {"mode": "legendre"},
            "output_dir": "/tmp/x"
        }"#;
        let config: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.solver.n_target, 8192);
        assert_eq!(config.solver.dorfler, 0.5);
        assert_eq!(config.load, LoadConfig::Constant { c: 1.0 });
        assert!(config.mesh.elements.is_none());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut config = sample_config(Path::new("/tmp/out"));
        config.solver.bulk = 1.5;
        assert!(matches!(config.validate(), Err(Error::Validation(_))));
        config.solver.bulk = 0.2;
        config.solver.n_target = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn family_meshes_align() {
        // haar mesh keeps all dyadic points
        let family = FamilyConfig::Haar {
            alpha: 1.0,
            theta: 0.5,
            l_max: 3,
        };
        let mesh = family_mesh(&family, None, &[]).unwrap();
        assert_eq!(mesh.num_elements() % 16, 0);
        let field = family.build().unwrap();
        let space = FemSpace::new(mesh);
        for psi in field.psis() {
            assert!(crate::fem1d::assemble_weighted_stiffness(&space, psi).is_ok());
        }

        // inclusion mesh contains every cell boundary and midpoint
        let family = FamilyConfig::Inclusions {
            beta: 1.0,
            theta: 0.5,
            j: 16,
        };
        let mesh = family_mesh(&family, None, &[]).unwrap();
        assert!(mesh.num_elements() >= 512);
        let field = family.build().unwrap();
        let space = FemSpace::new(mesh);
        for psi in field.psis() {
            assert!(crate::fem1d::assemble_weighted_stiffness(&space, psi).is_ok());
        }
    }

    #[test]
    fn run_writes_artifacts() {
        let dir = std::env::temp_dir().join("polydiff-test-run");
        let _ = fs::remove_dir_all(&dir);
        let config = sample_config(&dir);
        let manifest = run(&config).unwrap();
        assert_eq!(manifest.member_count, 20);
        assert!(manifest.coefficient_count >= 20);
        for name in [
            "taylor_coefficients.csv",
            "rearrangement.csv",
            "rates.csv",
            "diagnostics.json",
            "manifest.json",
        ] {
            assert!(dir.join(name).exists(), "{name} missing");
        }

        // the dump round-trips through analyze
        let summary = analyze(&dir.join("taylor_coefficients.csv"), &dir.join("re")).unwrap();
        assert_eq!(summary.count, manifest.coefficient_count);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn degenerate_run_has_empty_rates_with_reason() {
        let dir = std::env::temp_dir().join("polydiff-test-degenerate");
        let _ = fs::remove_dir_all(&dir);
        let mut config = sample_config(&dir);
        config.solver.n_target = 1;
        run(&config).unwrap();
        let rates = read_rates(&dir.join("rates.csv")).unwrap();
        // only t_0 is retained: no rates, and the reason is recorded
        assert!(rates.is_empty());
        let diag: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("diagnostics.json")).unwrap())
                .unwrap();
        assert_eq!(diag["computed_prefix_only"], true);
        assert!(diag["rates_note"].is_string());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn config_hash_is_stable() {
        let config = sample_config(Path::new("/tmp/out"));
        let h1 = config_hash(&config);
        let h2 = config_hash(&config);
        assert_eq!(h1, h2);
        let mut other = config.clone();
        other.solver.n_target += 1;
        assert_ne!(config_hash(&other), h1);
    }
}
