//! Dispatch a validated `RunConfig` and write CSV/JSON artifacts.
//!
//! Every CSV starts with a provenance comment (tool version, sha256 of the
//! config text, seed) followed by a header row. Summaries are JSON with one
//! object per executed check: {check, lhs, rhs, residual, pass}. All
//! outputs are deterministic functions of (config, seed).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use singlab::elliptic::{self, Load};
use singlab::error::{Error, Result};
use singlab::evolution;
use singlab::hum::{observability_scan, HumOptions, SchrodingerHum, WaveHum};
use singlab::mesh::{build_domain, generate_mesh, DomainSpec, Mesh, MeshOptions};
use singlab::operator::{AssemblyOptions, OperatorSet};
use singlab::semilinear::{self, SemilinearOptions};
use singlab::spectral;

use crate::config::{Check, DataChoice, Equation, HumMode, LoadChoice, RunConfig, Task};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// acceptance tolerances, pinned once
pub const POHOZAEV_REL_TOL: f64 = 0.05;
pub const MULTIPLIER_REL_TOL: f64 = 0.05;
pub const EQUIPARTITION_REL_TOL: f64 = 0.05;
pub const SMULT_REL_TOL: f64 = 0.05;
pub const WAVE_CONSERVATION_TOL: f64 = 1e-10;
pub const SCHRODINGER_DRIFT_TOL: f64 = 1e-12;
pub const IMPROVED_HARDY_FLOOR: f64 = 0.25 - 1e-8;
pub const HUM_REDUCTION_TOL: f64 = 1e-4;
pub const EL_RESIDUAL_TOL: f64 = 1e-6;
pub const ENERGY_IDENTITY_TOL: f64 = 1e-6;
pub const TRACE_GROWTH_LIMIT: f64 = 1.5;
pub const TU8_STABILITY: f64 = 0.2;
pub const POHOZAEV_DECAY_FACTOR: f64 = 0.7;

pub struct RunArtifacts {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.raw_text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn provenance(cfg: &RunConfig) -> String {
    format!("# singlab {VERSION} config_sha256={} seed={}", config_hash(cfg), cfg.seed)
}

fn write_csv(
    dir: &Path,
    name: &str,
    prov: &str,
    header: &str,
    rows: &[String],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
    writeln!(f, "{prov}")?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    files.push(path);
    Ok(())
}

fn check_row(name: &str, lhs: f64, rhs: f64, residual: f64, pass: bool) -> Value {
    json!({ "check": name, "lhs": lhs, "rhs": rhs, "residual": residual, "pass": pass })
}

fn domain_spec(cfg: &RunConfig) -> Result<DomainSpec> {
    build_domain(cfg.domain)
}

fn mesh_for(cfg: &RunConfig, h: f64) -> Result<Mesh> {
    let spec = domain_spec(cfg)?;
    generate_mesh(&spec, h, &MeshOptions { grading: cfg.grading })
}

fn ops_for_mesh(cfg: &RunConfig, mesh: Mesh) -> Result<OperatorSet> {
    OperatorSet::assemble(
        Arc::new(mesh),
        AssemblyOptions { quad_order: cfg.quad_order, delta: cfg.delta },
    )
}

fn ops_for_h(cfg: &RunConfig, h: f64) -> Result<OperatorSet> {
    let mesh = mesh_for(cfg, h)?;
    ops_for_mesh(cfg, mesh)
}

/// Refinement levels: explicit `h_list`, or `levels` nested refinements of
/// the base mesh at `h` (coarse to fine).
fn ops_levels(cfg: &RunConfig) -> Result<Vec<OperatorSet>> {
    if !cfg.h_list.is_empty() {
        return cfg.h_list.iter().map(|&h| ops_for_h(cfg, h)).collect();
    }
    let h = cfg.h.ok_or_else(|| Error::InvalidArgument("missing h".into()))?;
    let mut meshes = vec![mesh_for(cfg, h)?];
    for _ in 1..cfg.levels {
        meshes.push(meshes.last().unwrap().refine()?);
    }
    meshes.into_iter().map(|m| ops_for_mesh(cfg, m)).collect()
}

fn load_vector(ops: &OperatorSet, which: LoadChoice) -> Vec<f64> {
    let dim = ops.mesh.dim;
    let extent = if dim == 1 {
        ops.mesh.domain.kind.parameter()
    } else {
        2.0 * ops.mesh.domain.kind.parameter()
    };
    let xn = |p: [f64; 2]| if dim == 1 { p[0] } else { p[1] };
    match which {
        LoadChoice::One => ops.interpolate(|_| 1.0),
        LoadChoice::Xn => ops.interpolate(xn),
        LoadChoice::Bump => ops.interpolate(|p| (std::f64::consts::PI * xn(p) / extent).sin()),
    }
}

fn smooth_wave_data(ops: &OperatorSet) -> (Vec<f64>, Vec<f64>) {
    match ops.mesh.domain.kind {
        singlab::mesh::DomainKind::Interval { length } => {
            let v0 = ops.interpolate(|p| (std::f64::consts::PI * p[0] / length).sin());
            let v1 = ops.interpolate(|p| 0.3 * (2.0 * std::f64::consts::PI * p[0] / length).sin());
            (v0, v1)
        }
        singlab::mesh::DomainKind::TangentDisk { radius } => {
            let v0 = ops.interpolate(|p| {
                let d = radius * radius - (p[0] * p[0] + (p[1] - radius) * (p[1] - radius));
                p[1] * d.max(0.0)
            });
            let v1 = ops.interpolate(|p| 0.3 * p[0] * p[1]);
            (v0, v1)
        }
        singlab::mesh::DomainKind::HalfDisk { radius } => {
            let v0 = ops.interpolate(|p| {
                let d = radius * radius - (p[0] * p[0] + p[1] * p[1]);
                p[1] * d.max(0.0)
            });
            let v1 = ops.interpolate(|p| 0.3 * p[0] * p[1]);
            (v0, v1)
        }
    }
}

pub fn run_to(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let prov = provenance(cfg);
    let mut checks: Vec<Value> = Vec::new();
    let mut extra = serde_json::Map::new();

    match cfg.task {
        Task::Hardy => run_hardy(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?,
        Task::Elliptic => run_elliptic(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?,
        Task::Wave => run_wave(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?,
        Task::Schrodinger => {
            run_schrodinger(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?
        }
        Task::Hum => run_hum(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?,
        Task::Semilinear => {
            run_semilinear(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?
        }
        Task::Study => run_study(cfg, out_dir, &prov, &mut files, &mut checks, &mut extra)?,
    }

    let all_pass = checks.iter().all(|c| c["pass"].as_bool().unwrap_or(false));
    let mut summary = serde_json::Map::new();
    summary.insert("tool".into(), json!("singlab"));
    summary.insert("version".into(), json!(VERSION));
    summary.insert("config_sha256".into(), json!(config_hash(cfg)));
    summary.insert("seed".into(), json!(cfg.seed));
    summary.insert("task".into(), json!(cfg.task.name()));
    summary.insert("checks".into(), Value::Array(checks));
    summary.insert("all_pass".into(), json!(all_pass));
    for (k, v) in extra {
        summary.insert(k, v);
    }
    let summary = Value::Object(summary);
    let path = out_dir.join("summary.json");
    let mut f = fs::File::create(&path)?;
    let pretty = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidArgument(format!("summary serialization: {e}")))?;
    writeln!(f, "{pretty}")?;
    files.push(path);
    Ok(RunArtifacts { summary, files })
}

fn run_hardy(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let levels = ops_levels(cfg)?;
    let check = cfg.check.unwrap();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for ops in &levels {
        let (value, residual, iterations, target, clamped) = match check {
            Check::Mu => {
                let r = spectral::hardy_constant(ops)?;
                (r.mu_h, r.residual, r.iterations, r.target, 0usize)
            }
            Check::Improved => {
                let r = spectral::improved_hardy_check(ops)?;
                (r.value, r.residual, r.iterations, 0.25, r.clamped_points)
            }
            Check::Tu8 => {
                let r = spectral::tu8_constant(ops, None)?;
                (r.value, r.residual, r.iterations, f64::NAN, 0)
            }
            Check::Tuu8 => {
                let r = spectral::tu8_constant(ops, cfg.eps)?;
                (r.value, r.residual, r.iterations, f64::NAN, 0)
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "check `{}` does not belong to task hardy",
                    other.name()
                )))
            }
        };
        rows.push(format!("{},{},{},{}", ops.h(), value, residual, iterations));
        values.push((ops.h(), value, target, clamped));
    }
    write_csv(dir, "series.csv", prov, "h,value,residual,iterations", &rows, files)?;
    match check {
        Check::Mu => {
            for &(h, mu, target, _) in &values {
                checks.push(check_row(
                    &format!("mu_exceeds_lambda_n_h={h}"),
                    mu,
                    target,
                    mu - target,
                    mu > target,
                ));
            }
            let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1);
            checks.push(check_row(
                "mu_strictly_decreasing",
                values.first().map(|v| v.1).unwrap_or(f64::NAN),
                values.last().map(|v| v.1).unwrap_or(f64::NAN),
                0.0,
                decreasing || values.len() < 2,
            ));
        }
        Check::Improved => {
            for &(h, nu, _, clamped) in &values {
                checks.push(check_row(
                    &format!("log_remainder_at_least_quarter_h={h}"),
                    nu,
                    0.25,
                    nu - 0.25,
                    nu >= IMPROVED_HARDY_FLOOR,
                ));
                extra.insert(format!("clamped_points_h={h}"), json!(clamped));
            }
        }
        Check::Tu8 | Check::Tuu8 => {
            for &(h, c, _, _) in &values {
                checks.push(check_row(
                    &format!("constant_finite_h={h}"),
                    c,
                    0.0,
                    0.0,
                    c.is_finite(),
                ));
            }
            for w in values.windows(2) {
                let rel = (w[1].1 - w[0].1).abs() / w[0].1.abs().max(1e-300);
                checks.push(check_row(
                    &format!("constant_stable_h={}", w[1].0),
                    w[1].1,
                    w[0].1,
                    rel,
                    rel <= TU8_STABILITY,
                ));
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn pohozaev_row(cfg: &RunConfig, ops: &OperatorSet) -> Result<(f64, f64, f64, f64, f64)> {
    let lambda = cfg.lambda.unwrap();
    let f = load_vector(ops, cfg.load);
    let sol = elliptic::solve(ops, lambda, &Load::Nodal(f))?;
    let rep = elliptic::pohozaev_check(ops, &sol);
    Ok((ops.h(), rep.lhs, rep.rhs, rep.abs_residual, rep.rel_residual))
}

fn run_elliptic(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let lambda = cfg.lambda.unwrap();
    match cfg.check.unwrap() {
        Check::Pohozaev => {
            let levels = ops_levels(cfg)?;
            let mut rows = Vec::new();
            let mut rels = Vec::new();
            for ops in &levels {
                let (h, lhs, rhs, abs_r, rel_r) = pohozaev_row(cfg, ops)?;
                rows.push(format!("{h},{lambda},{lhs},{rhs},{abs_r},{rel_r}"));
                rels.push((h, lhs, rhs, rel_r));
            }
            write_csv(
                dir,
                "identity.csv",
                prov,
                "h,lambda,lhs,rhs,abs_residual,rel_residual",
                &rows,
                files,
            )?;
            let (h, lhs, rhs, rel) = *rels.last().unwrap();
            checks.push(check_row(
                &format!("pohozaev_rel_residual_h={h}"),
                lhs,
                rhs,
                rel,
                rel <= POHOZAEV_REL_TOL,
            ));
            if rels.len() >= 2 {
                let decays = rels
                    .windows(2)
                    .all(|w| w[1].3 <= POHOZAEV_DECAY_FACTOR * w[0].3 || w[1].3 < 1e-12);
                checks.push(check_row(
                    "pohozaev_residual_first_order",
                    rels.first().unwrap().3,
                    rels.last().unwrap().3,
                    0.0,
                    decays,
                ));
            }
        }
        Check::Trace => {
            let levels = ops_levels(cfg)?;
            let mut rows = Vec::new();
            let mut ratios = Vec::new();
            for ops in &levels {
                let ratio = elliptic::trace_ratio_battery(ops, lambda)?;
                rows.push(format!("{},{lambda},{ratio}", ops.h()));
                ratios.push((ops.h(), ratio));
            }
            write_csv(dir, "trace.csv", prov, "h,lambda,max_ratio", &rows, files)?;
            for w in ratios.windows(2) {
                let growth = w[1].1 / w[0].1.max(1e-300);
                checks.push(check_row(
                    &format!("trace_ratio_growth_h={}", w[1].0),
                    w[1].1,
                    w[0].1,
                    growth,
                    growth <= TRACE_GROWTH_LIMIT,
                ));
            }
            if ratios.len() == 1 {
                checks.push(check_row("trace_ratio_finite", ratios[0].1, 0.0, 0.0, ratios[0].1.is_finite()));
            }
        }
        Check::Continuation => {
            let ops = ops_for_h(cfg, cfg.h.unwrap())?;
            let f = load_vector(&ops, cfg.load);
            let table = elliptic::lambda_continuation(&ops, &Load::Nodal(f), &cfg.eps_list)?;
            let rows: Vec<String> = table
                .rows
                .iter()
                .map(|r| format!("{},{},{}", r.eps, r.diff_norm, r.eps_w))
                .collect();
            write_csv(dir, "continuation.csv", prov, "eps,diff_norm,eps_w", &rows, files)?;
            let diff_dec = table.rows.windows(2).all(|w| w[1].diff_norm < w[0].diff_norm);
            let epsw_dec = table.rows.windows(2).all(|w| w[1].eps_w < w[0].eps_w);
            checks.push(check_row(
                "continuation_diff_norm_decreasing",
                table.rows.first().map(|r| r.diff_norm).unwrap_or(0.0),
                table.rows.last().map(|r| r.diff_norm).unwrap_or(0.0),
                0.0,
                diff_dec,
            ));
            checks.push(check_row(
                "continuation_eps_w_decreasing",
                table.rows.first().map(|r| r.eps_w).unwrap_or(0.0),
                table.rows.last().map(|r| r.eps_w).unwrap_or(0.0),
                0.0,
                epsw_dec,
            ));
            extra.insert("monotone_warning".into(), json!(table.monotone_warning));
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "check `{}` does not belong to task elliptic",
                other.name()
            )))
        }
    }
    Ok(())
}

struct WaveRunOutcome {
    h: f64,
    dt: f64,
    drift: f64,
    identity: singlab::IdentityReport,
    equipartition: singlab::IdentityReport,
    hidden_ratio: f64,
}

fn wave_outcome(cfg: &RunConfig, ops: &OperatorSet, dt: f64) -> Result<WaveRunOutcome> {
    let lambda = cfg.lambda.unwrap();
    let t_final = cfg.t_final.unwrap();
    let (v0, v1) = match cfg.data {
        DataChoice::Smooth => smooth_wave_data(ops),
        DataChoice::Mode => {
            let basis = spectral::modal_basis(ops, lambda, 1)?;
            (basis.vectors[0].clone(), vec![0.0; ops.n_dofs()])
        }
    };
    let traj = evolution::wave_solve(ops, lambda, &v0, &v1, t_final, dt, None)?;
    let e0 = traj.trace.e_lambda[0];
    let drift = traj
        .trace
        .e_lambda
        .iter()
        .map(|e| (e - e0).abs() / e0.max(1e-300))
        .fold(0.0f64, f64::max);
    let rep = evolution::multiplier_check(ops, &traj);
    Ok(WaveRunOutcome {
        h: ops.h(),
        dt,
        drift,
        identity: rep.identity,
        equipartition: rep.equipartition,
        hidden_ratio: rep.hidden_ratio,
    })
}

fn run_wave(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let ops = ops_for_h(cfg, cfg.h.unwrap())?;
    let dt = cfg.dt.unwrap_or(ops.h() / 2.0);
    let lambda = cfg.lambda.unwrap();
    let t_final = cfg.t_final.unwrap();
    // trajectory export
    let (v0, v1) = match cfg.data {
        DataChoice::Smooth => smooth_wave_data(&ops),
        DataChoice::Mode => {
            let basis = spectral::modal_basis(&ops, lambda, 1)?;
            (basis.vectors[0].clone(), vec![0.0; ops.n_dofs()])
        }
    };
    let traj = evolution::wave_solve(&ops, lambda, &v0, &v1, t_final, dt, None)?;
    let rows: Vec<String> = traj
        .trace
        .times
        .iter()
        .zip(&traj.trace.e_lambda)
        .zip(&traj.trace.boundary_flux_integral)
        .map(|((t, e), fl)| format!("{t},{e},{fl}"))
        .collect();
    write_csv(dir, "trajectory.csv", prov, "t,e_lambda,cumulative_boundary_flux", &rows, files)?;

    let out = wave_outcome(cfg, &ops, dt)?;
    checks.push(check_row(
        "energy_conservation",
        out.drift,
        0.0,
        out.drift,
        out.drift <= WAVE_CONSERVATION_TOL,
    ));
    checks.push(check_row(
        "multiplier_identity",
        out.identity.lhs,
        out.identity.rhs,
        out.identity.rel_residual,
        out.identity.rel_residual <= MULTIPLIER_REL_TOL,
    ));
    checks.push(check_row(
        "equipartition",
        out.equipartition.lhs,
        out.equipartition.rhs,
        out.equipartition.rel_residual,
        out.equipartition.rel_residual <= EQUIPARTITION_REL_TOL
            || out.equipartition.abs_residual <= 1e-10,
    ));
    extra.insert("hidden_ratio".into(), json!(out.hidden_ratio));
    extra.insert("dt".into(), json!(out.dt));
    extra.insert("h".into(), json!(out.h));
    Ok(())
}

fn run_schrodinger(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let ops = ops_for_h(cfg, cfg.h.unwrap())?;
    let lambda = cfg.lambda.unwrap();
    let t_final = cfg.t_final.unwrap();
    let dt = cfg.dt.unwrap_or(ops.h() / 2.0);
    let v0: Vec<Complex64> = match cfg.data {
        DataChoice::Mode => {
            let basis = spectral::modal_basis(&ops, lambda, 1)?;
            basis.vectors[0].iter().map(|&x| Complex64::new(x, 0.0)).collect()
        }
        DataChoice::Smooth => {
            let (a, b) = smooth_wave_data(&ops);
            a.iter().zip(&b).map(|(&x, &y)| Complex64::new(x, 0.5 * y)).collect()
        }
    };
    let traj = evolution::schrodinger_solve(&ops, lambda, &v0, t_final, dt)?;
    let rows: Vec<String> = traj
        .times
        .iter()
        .zip(&traj.mass)
        .zip(&traj.hlam)
        .map(|((t, m), h)| format!("{t},{m},{h}"))
        .collect();
    write_csv(dir, "trajectory.csv", prov, "t,mass,h_lambda_form", &rows, files)?;
    let m0 = traj.mass[0];
    let h0 = traj.hlam[0];
    let mass_drift =
        traj.mass.iter().map(|m| (m - m0).abs() / m0.max(1e-300)).fold(0.0f64, f64::max);
    let h_drift =
        traj.hlam.iter().map(|h| (h - h0).abs() / h0.max(1e-300)).fold(0.0f64, f64::max);
    let smult = evolution::smult_check(&traj);
    checks.push(check_row("mass_conservation", mass_drift, 0.0, mass_drift, mass_drift <= SCHRODINGER_DRIFT_TOL));
    checks.push(check_row("h_lambda_conservation", h_drift, 0.0, h_drift, h_drift <= SCHRODINGER_DRIFT_TOL));
    checks.push(check_row(
        "smult_identity",
        smult.lhs,
        smult.rhs,
        smult.rel_residual,
        smult.rel_residual <= SMULT_REL_TOL,
    ));
    extra.insert("hidden_ratio".into(), json!(evolution::schrodinger_hidden_ratio(&traj)));
    extra.insert("steps".into(), json!(traj.times.len() - 1));
    Ok(())
}

fn hum_options(cfg: &RunConfig) -> HumOptions {
    HumOptions {
        rho: cfg.rho,
        cg_tol: cfg.cg_tol,
        cg_max_iter: cfg.cg_max_iter,
        gram_floor: 1e-10,
        seed: cfg.seed,
        allow_short_time: cfg.allow_short_time,
    }
}

fn run_hum(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let ops = ops_for_h(cfg, cfg.h.unwrap())?;
    let lambda = cfg.lambda.unwrap();
    let dt = cfg.dt.unwrap();
    match cfg.mode {
        HumMode::Scan => {
            let rows_data = observability_scan(
                &ops,
                lambda,
                &cfg.t_list,
                dt,
                cfg.samples,
                cfg.rho,
                cfg.seed,
            )?;
            let rows: Vec<String> =
                rows_data.iter().map(|r| format!("{},{}", r.t, r.min_quotient)).collect();
            write_csv(dir, "scan.csv", prov, "T,min_quotient", &rows, files)?;
            let nondec = rows_data.windows(2).all(|w| w[1].min_quotient >= w[0].min_quotient);
            checks.push(check_row(
                "scan_nondecreasing_in_T",
                rows_data.first().map(|r| r.min_quotient).unwrap_or(0.0),
                rows_data.last().map(|r| r.min_quotient).unwrap_or(0.0),
                0.0,
                nondec,
            ));
            let two_r = 2.0 * ops.mesh.domain.r_omega;
            for r in &rows_data {
                if r.t > two_r {
                    checks.push(check_row(
                        &format!("scan_positive_T={}", r.t),
                        r.min_quotient,
                        0.0,
                        0.0,
                        r.min_quotient > 1e-10,
                    ));
                }
            }
            extra.insert("two_r_omega".into(), json!(two_r));
        }
        HumMode::Gramian => {
            let t_final = cfg.t_final.unwrap();
            let n = ops.n_dofs();
            let hum = WaveHum::new(
                &ops,
                lambda,
                t_final,
                dt,
                vec![0.0; n],
                vec![0.0; n],
                hum_options(cfg),
            )?;
            let m = hum.modes();
            use singlab::hum::seeded_unit_pair;
            let mut rows = Vec::new();
            let mut max_sym = 0.0f64;
            let mut min_quotient = f64::INFINITY;
            let mut max_duality = 0.0f64;
            for pair in 0..cfg.samples {
                let (a, b) = seeded_unit_pair(2 * m, cfg.seed, pair as u64);
                let la = hum.gramian_apply(&a);
                let lb = hum.gramian_apply(&b);
                let ab: f64 = la.iter().zip(&b).map(|(x, y)| x * y).sum();
                let ba: f64 = lb.iter().zip(&a).map(|(x, y)| x * y).sum();
                let sym = (ab - ba).abs() / ab.abs().max(ba.abs()).max(1e-300);
                let aa: f64 = la.iter().zip(&a).map(|(x, y)| x * y).sum();
                let obs = hum.observation_integral(&a);
                let duality = (aa - obs).abs() / obs.max(1e-300);
                max_sym = max_sym.max(sym);
                min_quotient = min_quotient.min(aa);
                max_duality = max_duality.max(duality);
                rows.push(format!("{pair},{sym},{aa},{duality}"));
            }
            write_csv(
                dir,
                "gramian.csv",
                prov,
                "pair,symmetry_defect,quadratic_form,duality_mismatch",
                &rows,
                files,
            )?;
            checks.push(check_row("gramian_symmetry", max_sym, 0.0, max_sym, max_sym <= 1e-8));
            checks.push(check_row(
                "gramian_positivity",
                min_quotient,
                0.0,
                0.0,
                min_quotient >= 0.0,
            ));
            checks.push(check_row(
                "gramian_duality_crosscheck",
                max_duality,
                0.0,
                max_duality,
                max_duality <= 0.05,
            ));
            // control-map linearity: doubling the target doubles the control
            let mbasis = spectral::modal_basis(&ops, lambda, m)?;
            let target = mbasis.vectors[0].clone();
            let solve_scaled = |scale: f64| -> Result<Vec<Vec<f64>>> {
                let u0: Vec<f64> = target.iter().map(|x| scale * x).collect();
                let hum = WaveHum::new(
                    &ops,
                    lambda,
                    t_final,
                    dt,
                    u0,
                    vec![0.0; n],
                    HumOptions { cg_tol: 1e-12, ..hum_options(cfg) },
                )?;
                Ok(hum.solve()?.control.values)
            };
            let g1 = solve_scaled(1.0)?;
            let g2 = solve_scaled(2.0)?;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
                worst = worst.max((2.0 * a - b).abs());
                scale = scale.max(b.abs());
            }
            let lin = worst / scale.max(1e-300);
            checks.push(check_row("hum_linearity", lin, 0.0, lin, lin <= 1e-8));
            extra.insert("modes".into(), json!(m));
        }
        HumMode::Control => {
            let t_final = cfg.t_final.unwrap();
            match cfg.equation {
                Equation::Wave => {
                    let m = ((cfg.rho * ops.n_dofs() as f64).floor() as usize).max(1);
                    let basis = spectral::modal_basis(&ops, lambda, m)?;
                    let (u0, u1) = match cfg.data {
                        DataChoice::Mode => (basis.vectors[0].clone(), vec![0.0; ops.n_dofs()]),
                        DataChoice::Smooth => smooth_wave_data(&ops),
                    };
                    let hum =
                        WaveHum::new(&ops, lambda, t_final, dt, u0, u1, hum_options(cfg))?;
                    let res = hum.solve()?;
                    let cg_rows: Vec<String> = res
                        .cg_history
                        .iter()
                        .enumerate()
                        .map(|(i, r)| format!("{},{r}", i + 1))
                        .collect();
                    write_csv(dir, "cg.csv", prov, "iteration,rel_residual", &cg_rows, files)?;
                    let mut ctrl_rows = Vec::new();
                    for (s, vals) in res.control.values.iter().enumerate() {
                        for &f in &res.control.gamma0_facets {
                            ctrl_rows.push(format!("{},{},{}", res.control.times[s], f, vals[f]));
                        }
                    }
                    write_csv(dir, "control.csv", prov, "t,facet,value", &ctrl_rows, files)?;
                    checks.push(check_row(
                        "cg_converged",
                        res.cg_residual,
                        cfg.cg_tol,
                        res.cg_residual,
                        res.cg_residual <= cfg.cg_tol && res.iterations <= cfg.cg_max_iter,
                    ));
                    let reduction =
                        res.final_norms.energy / res.uncontrolled_norms.energy.max(1e-300);
                    checks.push(check_row(
                        "final_energy_reduction",
                        res.final_norms.energy,
                        res.uncontrolled_norms.energy,
                        reduction,
                        reduction <= HUM_REDUCTION_TOL,
                    ));
                    extra.insert("iterations".into(), json!(res.iterations));
                    extra.insert("modes".into(), json!(res.modes));
                    extra.insert("gram_min_quotient".into(), json!(res.gram_min_quotient));
                    extra.insert("final_l2".into(), json!(res.final_norms.l2));
                    extra.insert("final_dual".into(), json!(res.final_norms.dual));
                    extra.insert("uncontrolled_l2".into(), json!(res.uncontrolled_norms.l2));
                    extra.insert("uncontrolled_dual".into(), json!(res.uncontrolled_norms.dual));
                }
                Equation::Schrodinger => {
                    let m = ((cfg.rho * ops.n_dofs() as f64).floor() as usize).max(1);
                    let basis = spectral::modal_basis(&ops, lambda, m)?;
                    let u0: Vec<Complex64> = match cfg.data {
                        DataChoice::Mode => basis.vectors[0]
                            .iter()
                            .map(|&x| Complex64::new(x, 0.0))
                            .collect(),
                        DataChoice::Smooth => {
                            let (a, b) = smooth_wave_data(&ops);
                            a.iter().zip(&b).map(|(&x, &y)| Complex64::new(x, 0.5 * y)).collect()
                        }
                    };
                    let hum = SchrodingerHum::new(&ops, lambda, t_final, dt, u0, hum_options(cfg))?;
                    let res = hum.solve()?;
                    let cg_rows: Vec<String> = res
                        .cg_history
                        .iter()
                        .enumerate()
                        .map(|(i, r)| format!("{},{r}", i + 1))
                        .collect();
                    write_csv(dir, "cg.csv", prov, "iteration,rel_residual", &cg_rows, files)?;
                    let mut ctrl_rows = Vec::new();
                    for (s, vals) in res.control_values.iter().enumerate() {
                        for &f in &res.gamma0_facets {
                            ctrl_rows.push(format!(
                                "{},{},{},{}",
                                res.control_times[s], f, vals[f].re, vals[f].im
                            ));
                        }
                    }
                    write_csv(dir, "control.csv", prov, "t,facet,value_re,value_im", &ctrl_rows, files)?;
                    checks.push(check_row(
                        "cg_converged",
                        res.cg_residual,
                        cfg.cg_tol,
                        res.cg_residual,
                        res.cg_residual <= cfg.cg_tol && res.iterations <= cfg.cg_max_iter,
                    ));
                    let reduction = res.final_l2 / res.uncontrolled_l2.max(1e-300);
                    checks.push(check_row(
                        "final_l2_reduction",
                        res.final_l2,
                        res.uncontrolled_l2,
                        reduction,
                        reduction <= HUM_REDUCTION_TOL,
                    ));
                    extra.insert("iterations".into(), json!(res.iterations));
                    extra.insert("modes".into(), json!(res.modes));
                    extra.insert("gram_min_quotient".into(), json!(res.gram_min_quotient));
                    extra.insert("final_dual".into(), json!(res.final_dual));
                    extra.insert("uncontrolled_dual".into(), json!(res.uncontrolled_dual));
                }
            }
        }
    }
    Ok(())
}

fn run_semilinear(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let ops = ops_for_h(cfg, cfg.h.unwrap())?;
    let lambda = cfg.lambda.unwrap();
    let alpha = cfg.alpha.unwrap();
    let res = semilinear::minimize_i(
        &ops,
        lambda,
        alpha,
        &SemilinearOptions { seed: cfg.seed, ..Default::default() },
    )?;
    let rows: Vec<String> = res
        .quotient_history
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{},{q}", i + 1))
        .collect();
    write_csv(dir, "quotient.csv", prov, "iteration,quotient", &rows, files)?;
    let defect = semilinear::pohozaev_defect(&ops, &res);
    checks.push(check_row(
        "euler_lagrange_residual",
        res.el_residual,
        0.0,
        res.el_residual,
        res.el_residual <= EL_RESIDUAL_TOL,
    ));
    checks.push(check_row(
        "energy_identity",
        res.energy_residual,
        0.0,
        res.energy_residual,
        res.energy_residual <= ENERGY_IDENTITY_TOL,
    ));
    checks.push(check_row(
        "pohozaev_defect",
        defect.lhs,
        defect.rhs,
        defect.rel_residual,
        defect.rel_residual <= POHOZAEV_REL_TOL,
    ));
    // coefficient zero-crossings of the defect identity
    let c35 = semilinear::criticality_coefficient(3, 5.0);
    let c43 = semilinear::criticality_coefficient(4, 3.0);
    checks.push(check_row("criticality_zero_N3_alpha5", c35, 0.0, c35.abs(), c35 == 0.0));
    checks.push(check_row("criticality_zero_N4_alpha3", c43, 0.0, c43.abs(), c43 == 0.0));
    extra.insert("i_value".into(), json!(res.i_value));
    extra.insert("iterations".into(), json!(res.iterations));
    extra.insert("restarts".into(), json!(res.restarts));
    Ok(())
}

fn run_study(
    cfg: &RunConfig,
    dir: &Path,
    prov: &str,
    files: &mut Vec<PathBuf>,
    checks: &mut Vec<Value>,
    extra: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let study_task = cfg.study_task.unwrap();
    match (study_task, cfg.check) {
        (Task::Elliptic, Some(Check::Pohozaev)) => {
            let mut rows = Vec::new();
            let mut rels = Vec::new();
            for &h in &cfg.h_list {
                let ops = ops_for_h(cfg, h)?;
                let (h, lhs, rhs, abs_r, rel_r) = pohozaev_row(cfg, &ops)?;
                rows.push(format!("{h},{},{lhs},{rhs},{abs_r},{rel_r}", cfg.lambda.unwrap()));
                rels.push((h, lhs, rhs, rel_r));
            }
            write_csv(
                dir,
                "convergence.csv",
                prov,
                "h,lambda,lhs,rhs,abs_residual,rel_residual",
                &rows,
                files,
            )?;
            let (h, lhs, rhs, rel) = *rels.last().unwrap();
            checks.push(check_row(
                &format!("pohozaev_rel_residual_h={h}"),
                lhs,
                rhs,
                rel,
                rel <= POHOZAEV_REL_TOL,
            ));
            let decays = rels
                .windows(2)
                .all(|w| w[1].3 <= POHOZAEV_DECAY_FACTOR * w[0].3 || w[1].3 < 1e-12);
            checks.push(check_row(
                "pohozaev_residual_first_order",
                rels.first().unwrap().3,
                rels.last().unwrap().3,
                0.0,
                decays || rels.len() < 2,
            ));
        }
        (Task::Wave, _) => {
            let mut rows = Vec::new();
            let mut outcomes = Vec::new();
            for &h in &cfg.h_list {
                let ops = ops_for_h(cfg, h)?;
                let dt = cfg.dt.map(|d| d * h / cfg.h_list[0]).unwrap_or(h / 2.0);
                let out = wave_outcome(cfg, &ops, dt)?;
                rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    out.h,
                    out.dt,
                    out.identity.lhs,
                    out.identity.rhs,
                    out.identity.rel_residual,
                    out.equipartition.rel_residual,
                    out.hidden_ratio
                ));
                outcomes.push(out);
            }
            write_csv(
                dir,
                "convergence.csv",
                prov,
                "h,dt,lhs,rhs,rel_residual,equipartition_residual,hidden_ratio",
                &rows,
                files,
            )?;
            let last = outcomes.last().unwrap();
            checks.push(check_row(
                &format!("multiplier_rel_residual_h={}", last.h),
                last.identity.lhs,
                last.identity.rhs,
                last.identity.rel_residual,
                last.identity.rel_residual <= MULTIPLIER_REL_TOL,
            ));
            checks.push(check_row(
                "equipartition_residual",
                last.equipartition.lhs,
                last.equipartition.rhs,
                last.equipartition.rel_residual,
                last.equipartition.rel_residual <= EQUIPARTITION_REL_TOL,
            ));
            let decreasing = outcomes
                .windows(2)
                .all(|w| w[1].identity.rel_residual < w[0].identity.rel_residual);
            checks.push(check_row(
                "multiplier_residual_decreasing",
                outcomes.first().unwrap().identity.rel_residual,
                last.identity.rel_residual,
                0.0,
                decreasing || outcomes.len() < 2,
            ));
            let hidden_growth_ok = outcomes
                .windows(2)
                .all(|w| w[1].hidden_ratio <= TRACE_GROWTH_LIMIT * w[0].hidden_ratio);
            checks.push(check_row(
                "hidden_ratio_bounded",
                outcomes.first().unwrap().hidden_ratio,
                last.hidden_ratio,
                0.0,
                hidden_growth_ok,
            ));
            extra.insert("conservation_worst".into(), json!(outcomes
                .iter()
                .map(|o| o.drift)
                .fold(0.0f64, f64::max)));
        }
        (Task::Semilinear, _) => {
            let alpha = cfg.alpha.ok_or_else(|| Error::InvalidArgument("study semilinear requires alpha".into()))?;
            let mut rows = Vec::new();
            let mut rels = Vec::new();
            for &h in &cfg.h_list {
                let ops = ops_for_h(cfg, h)?;
                let res = semilinear::minimize_i(
                    &ops,
                    cfg.lambda.unwrap(),
                    alpha,
                    &SemilinearOptions { seed: cfg.seed, ..Default::default() },
                )?;
                let defect = semilinear::pohozaev_defect(&ops, &res);
                rows.push(format!(
                    "{h},{},{},{},{}",
                    res.i_value, defect.lhs, defect.rhs, defect.rel_residual
                ));
                rels.push(defect.rel_residual);
            }
            write_csv(
                dir,
                "convergence.csv",
                prov,
                "h,i_value,defect_lhs,defect_rhs,defect_rel_residual",
                &rows,
                files,
            )?;
            let decreasing = rels.windows(2).all(|w| w[1] < w[0]);
            checks.push(check_row(
                "defect_residual_decreasing",
                *rels.first().unwrap(),
                *rels.last().unwrap(),
                0.0,
                decreasing || rels.len() < 2,
            ));
            checks.push(check_row(
                "defect_final_residual",
                *rels.last().unwrap(),
                0.0,
                *rels.last().unwrap(),
                *rels.last().unwrap() <= POHOZAEV_REL_TOL,
            ));
        }
        (t, c) => {
            return Err(Error::InvalidArgument(format!(
                "study over task `{}` with check {:?} is not supported",
                t.name(),
                c.map(|c| c.name())
            )))
        }
    }
    Ok(())
}
