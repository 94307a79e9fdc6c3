//! Orchestration of one experiment: model build, exact and restricted
//! dynamics per geometry, diagnostics, and the written artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use maxent_core::diagnostics::{delta_metrics, relative_entropy_checked, Anchor, ComparisonReport};
use maxent_core::dynamics::{
    error_bound, evolve_exact_k, hierarchical_basis, iterated_commutators, projected_trajectory,
    restricted_evolve, TrajectoryRecord,
};
use maxent_core::models::{
    build_initial_k, build_occupation, build_position, build_xx_hamiltonian,
};
use maxent_core::operator::{Operator, StateK};
use maxent_core::projection::OperatorBasis;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GeometryChoice, Violation};
use crate::output::{write_series, Column};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const COLUMNS: [&str; 14] = [
    "t",
    "exp_n",
    "exp_n2",
    "exp_H",
    "exp_x",
    "exp_x2",
    "exp_b5",
    "trace_rho",
    "entropy",
    "relent_vs_free",
    "kmb_dist_vs_free",
    "delta",
    "delta_tilde",
    "error_bound",
];

const OBSERVABLES: [(&str, &str); 6] = [
    ("exp_n", "n"),
    ("exp_n2", "n2"),
    ("exp_H", "H"),
    ("exp_x", "x"),
    ("exp_x2", "x2"),
    ("exp_b5", "b5"),
];

#[derive(Debug)]
pub enum RunError {
    Config(Vec<Violation>),
    Numerical {
        phase: String,
        source: maxent_core::Error,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical { .. } | RunError::Io { .. } => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(v) => {
                write!(f, "invalid config:")?;
                for violation in v {
                    write!(f, "\n  {violation}")?;
                }
                Ok(())
            }
            RunError::Numerical { phase, source } => write!(f, "{phase}: {source}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

fn numerical(phase: impl Into<String>) -> impl FnOnce(maxent_core::Error) -> RunError {
    let phase = phase.into();
    move |source| RunError::Numerical { phase, source }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub status: String,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub phases: Vec<PhaseTiming>,
    pub warnings: Vec<String>,
    pub basis: Vec<String>,
    pub pruned: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(config: &ExperimentConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("maxent-cli".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("maxent-core".into(), maxent_core::VERSION.into());
        Self {
            status: "incomplete".into(),
            error: None,
            config: config.clone(),
            versions,
            started_unix: unix_now(),
            finished_unix: 0.0,
            phases: Vec::new(),
            warnings: Vec::new(),
            basis: Vec::new(),
            pruned: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn warn(&mut self, message: String) {
        if !self.warnings.contains(&message) {
            self.warnings.push(message);
        }
    }

    fn time(&mut self, phase: impl Into<String>, start: Instant) {
        self.phases.push(PhaseTiming {
            phase: phase.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Trajectories of one geometry together with their comparisons to the
/// exact evolution.
#[derive(Debug)]
pub struct GeometryRun {
    pub geometry: GeometryChoice,
    pub projected: TrajectoryRecord,
    pub projected_report: ComparisonReport,
    pub restricted: TrajectoryRecord,
    pub restricted_report: ComparisonReport,
    pub error_bound: Vec<f64>,
    pub timings: Vec<PhaseTiming>,
}

#[derive(Debug)]
pub struct RunResult {
    pub exact: TrajectoryRecord,
    pub geometries: Vec<GeometryRun>,
    pub basis: OperatorBasis,
    pub manifest: RunManifest,
}

/// Runs the experiment in memory. States are kept on the returned
/// trajectories.
pub fn simulate(config: &ExperimentConfig) -> Result<RunResult, RunError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(RunError::Config(violations));
    }
    let mut manifest = RunManifest::new(config);
    simulate_into(config, &mut manifest)
}

fn simulate_into(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<RunResult, RunError> {
    let start = Instant::now();
    let spec = config.chain_spec();
    let h = build_xx_hamiltonian(&spec).map_err(numerical("model"))?;
    let n = build_occupation(spec.n_sites).map_err(numerical("model"))?;
    let x = build_position(spec.n_sites).map_err(numerical("model"))?;
    let k0 = build_initial_k(&config.initial_spec(), &h, &n, &x).map_err(numerical("model"))?;
    let n2 = &n * &n;
    let x2 = &x * &x;
    let b5 = iterated_commutators(&h, k0.k(), 5)
        .map_err(numerical("model"))?
        .pop()
        .expect("b5");
    let core = OperatorBasis::new(
        vec![
            Operator::identity(h.dim()),
            n.clone(),
            n2.clone(),
            x.clone(),
            x2.clone(),
            k0.k().clone(),
        ],
        ["id", "n", "n2", "x", "x2", "K0"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )
    .map_err(numerical("basis"))?;
    let hierarchy = hierarchical_basis(&h, &k0, &core, config.basis_level, config.solver.rcond)
        .map_err(numerical("basis"))?;
    let basis = hierarchy.combined;
    manifest.basis = basis.labels().to_vec();
    manifest.pruned = basis.pruned_from().to_vec();
    if !basis.pruned_from().is_empty() {
        manifest.warn(format!(
            "basis: pruned linearly dependent elements {:?}",
            basis.pruned_from()
        ));
    }
    let observables: Vec<(String, Operator)> = vec![
        ("n".into(), n),
        ("n2".into(), n2),
        ("H".into(), h.clone()),
        ("x".into(), x),
        ("x2".into(), x2),
        ("b5".into(), b5),
    ];
    manifest.time("model", start);

    let start = Instant::now();
    let times = config.times();
    let exact = evolve_exact_k(&h, &k0, &times, &observables).map_err(numerical("exact"))?;
    manifest.time("exact", start);

    let runs: Vec<Result<GeometryRun, RunError>> = config
        .geometries
        .par_iter()
        .map(|&g| run_geometry(config, g, &h, &k0, &basis, &exact, &observables))
        .collect();
    let mut geometries = Vec::with_capacity(runs.len());
    for run in runs {
        let run = run?;
        let tag = run.geometry.tag();
        for w in run
            .projected
            .warnings
            .iter()
            .chain(&run.projected_report.warnings)
            .map(|w| format!("projected[{tag}]: {w}"))
            .chain(
                run.restricted
                    .warnings
                    .iter()
                    .chain(&run.restricted_report.warnings)
                    .map(|w| format!("restricted[{tag}]: {w}")),
            )
        {
            manifest.warn(w);
        }
        manifest.phases.extend(run.timings.iter().cloned());
        geometries.push(run);
    }
    Ok(RunResult {
        exact,
        geometries,
        basis,
        manifest: manifest.clone(),
    })
}

fn run_geometry(
    config: &ExperimentConfig,
    g: GeometryChoice,
    h: &Operator,
    k0: &StateK,
    basis: &OperatorBasis,
    exact: &TrajectoryRecord,
    observables: &[(String, Operator)],
) -> Result<GeometryRun, RunError> {
    let tag = g.tag();
    let kind = g.kind();
    let mut timings = Vec::new();
    let mut clock = |phase: String, start: Instant| {
        timings.push(PhaseTiming {
            phase,
            seconds: start.elapsed().as_secs_f64(),
        })
    };

    let start = Instant::now();
    let phase = format!("projected[{tag}]");
    let projected =
        projected_trajectory(exact, basis, kind, observables).map_err(numerical(phase.clone()))?;
    let projected_report = delta_metrics(exact, &projected, basis, kind, Anchor::Restricted)
        .map_err(numerical(phase.clone()))?;
    clock(phase, start);

    let start = Instant::now();
    let phase = format!("restricted[{tag}]");
    let restricted = restricted_evolve(
        h,
        basis,
        k0,
        kind,
        &exact.times,
        &config.restricted_settings(),
        observables,
    )
    .map_err(numerical(phase.clone()))?;
    clock(phase, start);

    let start = Instant::now();
    let phase = format!("diagnostics[{tag}]");
    let restricted_report = delta_metrics(exact, &restricted, basis, kind, Anchor::Restricted)
        .map_err(numerical(phase.clone()))?;
    let bound = error_bound(&restricted, h).map_err(numerical(phase.clone()))?;
    clock(phase, start);

    Ok(GeometryRun {
        geometry: g,
        projected,
        projected_report,
        restricted,
        restricted_report,
        error_bound: bound,
        timings,
    })
}

fn series_columns<'a>(
    traj: &'a TrajectoryRecord,
    report: Option<&'a ComparisonReport>,
    bound: Option<&'a [f64]>,
) -> Vec<Column<'a>> {
    let mut cols = vec![Column::Values(&traj.times)];
    for (_, name) in OBSERVABLES {
        cols.push(Column::Values(
            traj.observable(name).expect("registered observable"),
        ));
    }
    cols.push(Column::Values(
        traj.diagnostic("trace_rho").expect("trace_rho"),
    ));
    cols.push(Column::Values(traj.diagnostic("entropy").expect("entropy")));
    for name in ["relent_vs_free", "kmb_dist_vs_free", "delta", "delta_tilde"] {
        cols.push(match report.and_then(|r| r.get(name)) {
            Some(v) => Column::Values(v),
            None => Column::Missing,
        });
    }
    cols.push(bound.map_or(Column::Missing, Column::Values));
    cols
}

fn states(traj: &TrajectoryRecord) -> &[StateK] {
    traj.states.as_deref().expect("trajectory states")
}

/// Relative entropies between the exact, projected and restricted states of
/// every geometry, and between geometries when both ran.
struct DiagnosticsTable {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
    clamps: usize,
}

fn diagnostics_table(result: &RunResult) -> Result<DiagnosticsTable, RunError> {
    let exact = states(&result.exact);
    let mut headers = vec!["t".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![result.exact.times.clone()];
    let clamps = std::cell::Cell::new(0usize);
    let pairs = |a: &[StateK], b: &[StateK]| -> Result<Vec<f64>, RunError> {
        a.iter()
            .zip(b)
            .map(|(r, s)| {
                let (v, clamped) = relative_entropy_checked(r, s)?;
                clamps.set(clamps.get() + clamped as usize);
                Ok(v)
            })
            .collect::<maxent_core::Result<_>>()
            .map_err(numerical("diagnostics"))
    };
    for run in &result.geometries {
        let tag = run.geometry.tag();
        let proj = states(&run.projected);
        let rest = states(&run.restricted);
        headers.push(format!("relent_exact_vs_projected_{tag}"));
        cols.push(pairs(exact, proj)?);
        headers.push(format!("relent_exact_vs_restricted_{tag}"));
        cols.push(pairs(exact, rest)?);
        headers.push(format!("relent_projected_vs_restricted_{tag}"));
        cols.push(pairs(proj, rest)?);
    }
    if let [a, b] = result.geometries.as_slice() {
        let (ta, tb) = (a.geometry.tag(), b.geometry.tag());
        headers.push(format!("relent_projected_{ta}_vs_{tb}"));
        cols.push(pairs(states(&a.projected), states(&b.projected))?);
        headers.push(format!("relent_restricted_{ta}_vs_{tb}"));
        cols.push(pairs(states(&a.restricted), states(&b.restricted))?);
    }
    Ok(DiagnosticsTable {
        headers,
        columns: cols,
        clamps: clamps.get(),
    })
}

fn write_outputs(
    result: &RunResult,
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    let headers: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    let exact_path = dir.join("exact.csv");
    write_series(
        &exact_path,
        &headers,
        &series_columns(&result.exact, None, None),
    )
    .map_err(io(&exact_path))?;
    manifest.outputs.push("exact.csv".into());
    for run in &result.geometries {
        let tag = run.geometry.tag();
        let name = format!("projected_{tag}.csv");
        let path = dir.join(&name);
        let cols = series_columns(&run.projected, Some(&run.projected_report), None);
        write_series(&path, &headers, &cols).map_err(io(&path))?;
        manifest.outputs.push(name);

        let name = format!("restricted_{tag}.csv");
        let path = dir.join(&name);
        let cols = series_columns(
            &run.restricted,
            Some(&run.restricted_report),
            Some(&run.error_bound),
        );
        write_series(&path, &headers, &cols).map_err(io(&path))?;
        manifest.outputs.push(name);
    }
    let start = Instant::now();
    let table = diagnostics_table(result)?;
    if table.clamps > 0 {
        manifest.warn(format!(
            "diagnostics: {} relative entropies clamped to zero",
            table.clamps
        ));
    }
    let cols: Vec<Column> = table.columns.iter().map(|c| Column::Values(c)).collect();
    let path = dir.join("diagnostics.csv");
    write_series(&path, &table.headers, &cols).map_err(io(&path))?;
    manifest.outputs.push("diagnostics.csv".into());
    manifest.time("cross-diagnostics", start);
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), RunError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|source| RunError::Io { path, source })
}

/// Runs the experiment and writes its artifacts to the configured directory.
///
/// The manifest is written whether or not the run succeeds, with status
/// `"complete"` or `"incomplete"`.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(RunError::Config(violations));
    }
    let dir = &config.outputs.directory;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut manifest = RunManifest::new(config);
    let outcome = simulate_into(config, &mut manifest).and_then(|result| {
        manifest = result.manifest.clone();
        if config.outputs.csv {
            let start = Instant::now();
            write_outputs(&result, dir, &mut manifest)?;
            manifest.time("write", start);
        }
        Ok(())
    });
    manifest.finished_unix = unix_now();
    match &outcome {
        Ok(()) => manifest.status = "complete".into(),
        Err(e) => manifest.error = Some(e.to_string()),
    }
    if config.outputs.manifest {
        write_manifest(dir, &manifest)?;
    }
    outcome.map(|()| manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialConfig, ModelConfig, OutputConfig, SolverConfig};

    pub(crate) fn smoke(dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelConfig {
                n_sites: 3,
                coupling: 1.0,
                periodic: true,
                max_dim: maxent_core::operator::DEFAULT_MAX_DIM,
            },
            initial: InitialConfig {
                beta: 1.0,
                c1: 3.0,
                c2: 3.0,
                zeta: 1.0,
                x0: -0.3,
            },
            basis_level: 2,
            geometries: vec![GeometryChoice::Kmb, GeometryChoice::Covar],
            t_max: 1.0,
            n_points: 11,
            solver: SolverConfig::default(),
            outputs: OutputConfig {
                directory: dir,
                csv: true,
                manifest: true,
            },
            seed: 7,
        }
    }

    #[test]
    fn simulate_produces_consistent_trajectories() {
        let result = simulate(&smoke("unused".into())).unwrap();
        assert_eq!(result.geometries.len(), 2);
        assert_eq!(
            result.basis.labels()[..6],
            ["id", "n", "n2", "x", "x2", "K0"]
        );
        let exact_n = result.exact.observable("n").unwrap();
        for run in &result.geometries {
            let r = run.restricted.observable("n").unwrap();
            assert_eq!(r.len(), 11);
            assert!((r[0] - exact_n[0]).abs() < 1e-10);
            let report = &run.restricted_report;
            for (d, dt) in report
                .get("delta")
                .unwrap()
                .iter()
                .zip(report.get("delta_tilde").unwrap())
            {
                assert!(*d <= dt + 1e-9);
            }
            assert_eq!(run.error_bound[0], 0.0);
            assert!(run.error_bound.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn invalid_config_maps_to_exit_two() {
        let mut c = smoke("unused".into());
        c.t_max = -1.0;
        let err = simulate(&c).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("t_max must be positive"));
    }

    #[test]
    fn warnings_are_deduplicated() {
        let mut m = RunManifest::new(&smoke("unused".into()));
        m.warn("a".into());
        m.warn("b".into());
        m.warn("a".into());
        assert_eq!(m.warnings, ["a", "b"]);
    }
}
