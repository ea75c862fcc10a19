//! Run execution and reproducible artifacts.
//!
//! A run writes its data files first and a `manifest.json` last. The
//! manifest echoes the effective configuration, names the termination
//! cause, and lists every artifact with its SHA-256 digest, and it is
//! written even when a guard aborts the march, so whatever partial output
//! exists stays accounted for. Every file lands atomically (temporary
//! sibling plus rename); a crash can lose a file but never leave a torn
//! one. Numeric output carries 17 significant digits, enough to reproduce
//! each double exactly, and identical configurations give byte-identical
//! data files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use frg_core::flows::{
    beta_dirac, beta_msr, beta_two_scalar, integrate_flow, DiracCouplings, FlowError, FlowOptions,
    FlowTrajectory, MsrCouplings, MsrDimension, ScalarCouplings, Termination,
};
use frg_core::lpa::step::{
    msr_ode_boundary, scalar_ode_boundary, solve_flow, FlowDiagnostics, SolveOptions,
    SolveTermination,
};
use frg_core::lpa::{
    msr_ansatz, scalar_ansatz, BoundaryData, FieldGrid, LpaError, LpaModel, PotentialSurface,
};

use crate::config::{BoundaryKind, CommandKind, CouplingsCfg, RunConfig};
use crate::expr;

pub const EXIT_OK: i32 = 0;
/// Configuration rejected; nothing ran and no manifest exists.
pub const EXIT_SCHEMA: i32 = 2;
/// The flow reached a singular locus of its right-hand side.
pub const EXIT_SINGULAR: i32 = 3;
/// A well-posedness or step guard stopped the run.
pub const EXIT_GUARD: i32 = 4;
/// Unusable setup past validation, a failed write, or a solver invariant
/// breach.
pub const EXIT_INTERNAL: i32 = 5;

/// What the caller needs after a run: the process exit code, the
/// termination cause recorded in the manifest, and messages for stderr.
pub struct RunReport {
    pub exit_code: i32,
    pub termination: String,
    pub notes: Vec<String>,
}

struct Produced {
    /// File name and content, in write order.
    files: Vec<(String, String)>,
    termination: String,
    exit_code: i32,
    note: Option<String>,
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact_version: &'static str,
    config: &'a RunConfig,
    termination: &'a str,
    exit_code: i32,
    wall_time_seconds: f64,
    outputs: Vec<OutputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Execute a validated configuration. The output directory comes from the
/// configuration itself so that the manifest's echo matches the run.
pub fn execute(config: &RunConfig) -> RunReport {
    let started = Instant::now();
    let out_dir = PathBuf::from(&config.output_dir);
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return RunReport {
            exit_code: EXIT_INTERNAL,
            termination: "internal-error".into(),
            notes: vec![format!("cannot create output directory {}: {e}", out_dir.display())],
        };
    }

    let produced = match produce(config) {
        Ok(p) => p,
        Err(msg) => Produced {
            files: Vec::new(),
            termination: "internal-error".into(),
            exit_code: EXIT_INTERNAL,
            note: Some(msg),
        },
    };

    let mut notes: Vec<String> = produced.note.iter().cloned().collect();
    let mut exit_code = produced.exit_code;
    let mut outputs = Vec::new();
    for (name, content) in &produced.files {
        match write_atomic(&out_dir.join(name), content.as_bytes()) {
            Ok(()) => outputs
                .push(OutputDigest { path: name.clone(), sha256: sha256_hex(content.as_bytes()) }),
            Err(e) => {
                notes.push(e);
                exit_code = EXIT_INTERNAL;
            }
        }
    }

    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION"),
        config,
        termination: &produced.termination,
        exit_code,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
        error: notes.first().cloned().filter(|_| exit_code != EXIT_OK),
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = write_atomic(&out_dir.join("manifest.json"), body.as_bytes()) {
        notes.push(e);
        exit_code = EXIT_INTERNAL;
    }

    RunReport { exit_code, termination: produced.termination, notes }
}

fn produce(config: &RunConfig) -> Result<Produced, String> {
    match config.command {
        CommandKind::Flow => flow_run(config),
        CommandKind::Lpa => lpa_run(config),
        CommandKind::Expand => expand_run(config),
    }
}

fn scalar_rhs(k: f64, y: &[f64]) -> Result<Vec<f64>, FlowError> {
    let c = ScalarCouplings::from_array(y.try_into().expect("seven components"));
    Ok(beta_two_scalar(&c, k)?.to_array().to_vec())
}

fn msr_rhs(dim: MsrDimension) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>, FlowError> {
    move |k, y| {
        let c = MsrCouplings::from_array(y.try_into().expect("five components"), dim);
        Ok(beta_msr(&c, k)?.to_array().to_vec())
    }
}

fn dirac_rhs(k: f64, y: &[f64]) -> Result<Vec<f64>, FlowError> {
    let c = DiracCouplings::from_array(y.try_into().expect("three components"));
    Ok(beta_dirac(&c, k)?.to_array().to_vec())
}

fn flow_run(config: &RunConfig) -> Result<Produced, String> {
    let range = config.krange.as_ref().ok_or("flow run without a krange")?;
    let tol = config.tolerances.clone().unwrap_or_default();
    let opts = FlowOptions {
        rel_tol: tol.rel_tol,
        abs_tol: tol.abs_tol,
        min_step: tol.min_step,
        max_step: tol.max_step,
        initial_step: None,
    };
    let couplings = config.couplings.as_ref().ok_or("flow run without couplings")?;

    let traj = match couplings {
        CouplingsCfg::TwoScalar(t) => {
            let c = ScalarCouplings {
                u0: t.u0,
                m1_sq: t.m1_sq,
                m2_sq: t.m2_sq,
                lambda1: t.lambda1,
                lambda2: t.lambda2,
                lambda3: t.lambda3,
                mu_sq: t.mu_sq,
            };
            integrate_flow(
                scalar_rhs,
                &ScalarCouplings::NAMES,
                &c.to_array(),
                range.start,
                range.end,
                &opts,
            )
        }
        CouplingsCfg::Msr(t) => {
            let dim = t.dimension.to_core();
            let c = MsrCouplings {
                u0: t.u0,
                m_sq: t.m_sq,
                lambda: t.lambda,
                noise_d: t.noise_d,
                mu_sq: t.mu_sq,
                dimension: dim,
            };
            integrate_flow(
                msr_rhs(dim),
                &MsrCouplings::NAMES,
                &c.to_array(),
                range.start,
                range.end,
                &opts,
            )
        }
        CouplingsCfg::Dirac(t) => {
            let c = DiracCouplings { u0: t.u0, m: t.m, lambda: t.lambda };
            integrate_flow(
                dirac_rhs,
                &DiracCouplings::NAMES,
                &c.to_array(),
                range.start,
                range.end,
                &opts,
            )
        }
    }
    .map_err(|e| e.to_string())?;

    let exit_code = match traj.termination {
        Termination::ReachedEnd => EXIT_OK,
        Termination::SingularLocus => EXIT_SINGULAR,
        Termination::StepUnderflow => EXIT_GUARD,
    };
    let note = (exit_code != EXIT_OK).then(|| {
        format!("flow stopped at k = {:.6e}: {}", traj.final_k(), traj.termination.label())
    });
    Ok(Produced {
        files: vec![("trajectory.csv".into(), trajectory_csv(&traj))],
        termination: traj.termination.label().into(),
        exit_code,
        note,
    })
}

fn lpa_run(config: &RunConfig) -> Result<Produced, String> {
    let range = config.krange.as_ref().ok_or("surface run without a krange")?;
    let grid_cfg = config.grid.as_ref().ok_or("surface run without a grid")?;
    let guards = config.guards.clone().unwrap_or_default();
    let lpa_cfg = config.lpa.clone().unwrap_or_default();
    let couplings = config.couplings.as_ref().ok_or("surface run without couplings")?;

    let grid = FieldGrid::new(
        [
            (grid_cfg.bounds1[0], grid_cfg.bounds1[1]),
            (grid_cfg.bounds2[0], grid_cfg.bounds2[1]),
        ],
        grid_cfg.points,
    )
    .map_err(|e| e.to_string())?;

    let (model, boundary) = match couplings {
        CouplingsCfg::TwoScalar(t) => {
            let c = ScalarCouplings {
                u0: t.u0,
                m1_sq: t.m1_sq,
                m2_sq: t.m2_sq,
                lambda1: t.lambda1,
                lambda2: t.lambda2,
                lambda3: t.lambda3,
                mu_sq: t.mu_sq,
            };
            let surf = PotentialSurface::from_fn(grid, range.start, |x, y| scalar_ansatz(&c, x, y))
                .map_err(|e| e.to_string())?;
            let boundary = match lpa_cfg.boundary {
                BoundaryKind::Ode => {
                    BoundaryData::with_beta(surf, scalar_ode_boundary(c, range.start))
                }
                BoundaryKind::Frozen => BoundaryData::frozen(surf),
            };
            (LpaModel::TwoScalar { mu_sq: t.mu_sq }, boundary)
        }
        CouplingsCfg::Msr(t) => {
            let dim = t.dimension.to_core();
            let c = MsrCouplings {
                u0: t.u0,
                m_sq: t.m_sq,
                lambda: t.lambda,
                noise_d: t.noise_d,
                mu_sq: t.mu_sq,
                dimension: dim,
            };
            let surf = PotentialSurface::from_fn(grid, range.start, |x, y| msr_ansatz(&c, x, y))
                .map_err(|e| e.to_string())?;
            let boundary = match lpa_cfg.boundary {
                BoundaryKind::Ode => BoundaryData::with_beta(surf, msr_ode_boundary(c, range.start)),
                BoundaryKind::Frozen => BoundaryData::frozen(surf),
            };
            let model = match dim {
                MsrDimension::D4 => LpaModel::MsrD4 { mu_sq: t.mu_sq },
                MsrDimension::D3 => LpaModel::MsrD3,
            };
            (model, boundary)
        }
        CouplingsCfg::Dirac(_) => {
            return Err("the dirac model has no field-grid potential".into());
        }
    };

    let opts = SolveOptions {
        safety: guards.safety,
        eps_prime: guards.eps_prime,
        min_step: guards.min_step,
        max_step: guards.max_step,
        checkpoints: lpa_cfg.checkpoints.clone(),
    };
    let outcome = solve_flow(&model, &boundary, range.end, &opts).map_err(|e| e.to_string())?;

    let mut files = Vec::new();
    for (idx, snapshot) in outcome.checkpoints.iter().enumerate() {
        files.push((format!("checkpoint_{idx:03}.csv"), surface_csv(&model, snapshot)));
    }
    files.push(("surface_final.csv".into(), surface_csv(&model, &outcome.surface)));
    files.push(("diagnostics.jsonl".into(), diagnostics_jsonl(&outcome.diagnostics)));

    let exit_code = match &outcome.termination {
        SolveTermination::ReachedEnd => EXIT_OK,
        SolveTermination::Aborted(e) => match e {
            LpaError::LogDomain { .. } => EXIT_SINGULAR,
            LpaError::StabilityGuard { .. }
            | LpaError::SigmaNonPositive { .. }
            | LpaError::KRatioExceeded { .. } => EXIT_GUARD,
            _ => EXIT_INTERNAL,
        },
    };
    let note = match &outcome.termination {
        SolveTermination::Aborted(e) => {
            Some(format!("march stopped at k = {:.6e}: {e}", outcome.surface.k))
        }
        SolveTermination::ReachedEnd => None,
    };
    Ok(Produced {
        files,
        termination: outcome.termination.label().into(),
        exit_code,
        note,
    })
}

fn expand_run(config: &RunConfig) -> Result<Produced, String> {
    let settings = config.expand.as_ref().ok_or("expand run without settings")?;
    let parsed = expr::parse(&settings.observable)?;
    let functional = expr::evaluate(&parsed, config.model, settings.order)?;
    Ok(Produced {
        files: vec![("functional.json".into(), functional.to_json_string_pretty() + "\n")],
        termination: "completed".into(),
        exit_code: EXIT_OK,
        note: None,
    })
}

/// Scale column first, then the coupling columns in state order.
fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut out = String::from("k");
    for name in traj.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, state) in &traj.samples {
        let _ = write!(out, "{k:.16e}");
        for value in state {
            let _ = write!(out, ",{value:.16e}");
        }
        out.push('\n');
    }
    out
}

/// One row per grid node in row-major order; the scale rides along so each
/// snapshot file is self-describing.
fn surface_csv(model: &LpaModel, surface: &PotentialSurface) -> String {
    let [a0, a1] = model.axis_names();
    let mut out = format!("k,{a0},{a1},u\n");
    let grid = surface.grid;
    for (i, j) in grid.nodes() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            surface.k,
            grid.coord(0, i),
            grid.coord(1, j),
            surface.value(i, j)
        );
    }
    out
}

/// One JSON object per accepted step.
fn diagnostics_jsonl(diag: &FlowDiagnostics) -> String {
    let mut out = String::new();
    for record in &diag.records {
        out.push_str(&serde_json::to_string(record).expect("diagnostics serialize"));
        out.push('\n');
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let name = path.file_name().ok_or_else(|| format!("bad path {}", path.display()))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    fs::rename(&tmp, path)
        .map_err(|e| format!("cannot finalize {}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
