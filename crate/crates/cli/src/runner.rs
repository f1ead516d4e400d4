//! Executes the checks a scenario requests, in declared order, against the
//! geometry built from its scenario file.

use crate::catalog::Geometry;
use crate::report::{assemble, RunReport};
use crate::scenario::{default_tol_for, CheckSpec, GridSettings, Scenario};
use codim_core::reduction::{
    build_envelope, check_curvature_invariant_along, check_first_normal_contained,
    check_jacobi_containment, check_parallel_subbundle, check_tangent_preservation,
    check_totally_geodesic, envelope_grid_loops, loop_normal_sheet, verify_holonomy_lemma,
    CheckReport, Envelope, GridSpec, JacobiOptions, ParamPath,
};
use codim_core::submanifold::tangent_space;
use codim_core::{orthonormalize, TangentVector, Tolerance, Vector};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

pub struct RunOutcome {
    pub report: RunReport,
    pub full_reports: Vec<(CheckReport, String)>,
}

pub fn run_scenario(
    scenario: &Scenario,
    geometry: &Geometry,
    seed: u64,
    tol_scale: f64,
) -> Result<RunOutcome, String> {
    let started = std::time::Instant::now();
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut reports: Vec<(CheckReport, String)> = Vec::new();
    let mut envelope_cache: Option<Envelope> = None;
    for check in &scenario.checks {
        let tol = check
            .tol
            .or_else(|| default_tol_for(&check.kind))
            .expect("validated kind")
            * tol_scale;
        // envelope construction is still meaningful when a hypothesis
        // failed (that is how obstructions are measured), but worth a note
        if matches!(
            check.kind.as_str(),
            "envelope_totally_geodesic" | "tangent_preservation"
        ) && reports
            .iter()
            .any(|(r, _)| r.verdict == codim_core::reduction::Verdict::Fail)
        {
            eprintln!(
                "warning: running `{}` although an earlier hypothesis check failed",
                check.kind
            );
        }
        let report = dispatch(
            scenario,
            geometry,
            check,
            tol,
            &mut rng,
            &mut envelope_cache,
        )
        .map_err(|e| format!("check `{}` errored: {e}", check.kind))?;
        reports.push((report, check.expected.clone()));
    }
    let runtime_ms = started.elapsed().as_millis() as u64;
    Ok(RunOutcome {
        report: assemble(scenario, &reports, seed, runtime_ms),
        full_reports: reports,
    })
}

fn u_grid(geometry: &Geometry, n: usize) -> Vec<Vec<f64>> {
    // product grid over the domain box
    let mut nodes = vec![Vec::new()];
    for (a, b) in &geometry.domain {
        let mut next = Vec::new();
        for prefix in &nodes {
            for k in 0..n {
                let t = if n == 1 {
                    0.5
                } else {
                    k as f64 / (n - 1) as f64
                };
                let mut row = prefix.clone();
                row.push(a + (b - a) * t);
                next.push(row);
            }
        }
        nodes = next;
    }
    nodes
}

fn domain_path(geometry: &Geometry) -> ParamPath {
    let from: Vec<f64> = geometry.domain.iter().map(|(a, _)| *a).collect();
    let to: Vec<f64> = geometry.domain.iter().map(|(_, b)| *b).collect();
    ParamPath::line(from, to)
}

fn ensure_envelope(
    geometry: &Geometry,
    grids: &GridSettings,
    cache: &mut Option<Envelope>,
) -> Result<Envelope, String> {
    if let Some(env) = cache {
        return Ok(env.clone());
    }
    let spec = GridSpec {
        ranges: geometry.domain.clone(),
        counts: vec![grids.envelope_u_samples; geometry.domain.len()],
    };
    let env = build_envelope(
        &geometry.immersion,
        &geometry.bundle,
        grids.envelope_epsilon,
        spec,
        grids.envelope_s_samples,
    )
    .map_err(|e| e.to_string())?;
    *cache = Some(env.clone());
    Ok(env)
}

fn dispatch(
    scenario: &Scenario,
    geometry: &Geometry,
    check: &CheckSpec,
    tol: f64,
    rng: &mut Pcg64,
    envelope_cache: &mut Option<Envelope>,
) -> Result<CheckReport, String> {
    let grids = &scenario.grids;
    match check.kind.as_str() {
        "first_normal_contained" => check_first_normal_contained(
            &geometry.immersion,
            &geometry.bundle,
            &u_grid(geometry, grids.u_samples),
            tol,
            &Tolerance::default().with_abs(1e-4),
        )
        .map_err(|e| e.to_string()),
        "parallel_subbundle" => check_parallel_subbundle(
            &geometry.immersion,
            &geometry.bundle,
            &domain_path(geometry),
            grids.path_samples,
            tol,
        )
        .map_err(|e| e.to_string()),
        "curvature_invariant" => {
            let (rep, _residuals) = check_curvature_invariant_along(
                &geometry.immersion,
                &geometry.bundle,
                &u_grid(geometry, grids.u_samples),
                tol,
            )
            .map_err(|e| e.to_string())?;
            Ok(rep)
        }
        "envelope_totally_geodesic" => {
            let env = ensure_envelope(geometry, grids, envelope_cache)?;
            check_totally_geodesic(&env, 2, rng, tol).map_err(|e| e.to_string())
        }
        "tangent_preservation" => {
            let env = ensure_envelope(geometry, grids, envelope_cache)?;
            let loops = envelope_grid_loops(&env, grids.loops).map_err(|e| e.to_string())?;
            check_tangent_preservation(&env, &loops, tol).map_err(|e| e.to_string())
        }
        "jacobi_containment" => run_jacobi(geometry, grids, tol, rng),
        "holonomy_lemma" => run_holonomy(geometry, grids, tol),
        other => Err(format!("unknown check kind `{other}`")),
    }
}

/// Fields start at the domain corner with value in the tangent space and
/// derivative in the bundle, and are propagated along the normal geodesic of
/// the first bundle direction.
fn run_jacobi(
    geometry: &Geometry,
    grids: &GridSettings,
    tol: f64,
    rng: &mut Pcg64,
) -> Result<CheckReport, String> {
    let u0: Vec<f64> = geometry.domain.iter().map(|(a, _)| *a).collect();
    let imm = &geometry.immersion;
    let space = &geometry.space;
    let p = imm.point(&u0).map_err(|e| e.to_string())?;
    let tangent = tangent_space(imm, &u0).map_err(|e| e.to_string())?;
    let vhat = geometry
        .bundle
        .orthonormal_frame(imm, &u0)
        .map_err(|e| e.to_string())?;
    let geo = TangentVector {
        base: p,
        dir: vhat.basis()[0].clone(),
    };
    // combined span: transported frame target
    let mut gens: Vec<Vector> = tangent.basis().to_vec();
    gens.extend(vhat.basis().iter().cloned());
    let w0 =
        orthonormalize(&gens, &space.form(), &Tolerance::default()).map_err(|e| e.to_string())?;
    let mut ics = Vec::with_capacity(grids.jacobi_ics);
    for _ in 0..grids.jacobi_ics {
        let mut j0 = Vector::zeros(space.chart_dim());
        for b in tangent.basis() {
            j0 = j0.axpy(rng.gen_range(-1.0..1.0), b);
        }
        let mut jd = Vector::zeros(space.chart_dim());
        for b in vhat.basis() {
            jd = jd.axpy(rng.gen_range(-1.0..1.0), b);
        }
        ics.push((j0, jd));
    }
    check_jacobi_containment(
        space,
        &geo,
        &w0,
        &ics,
        grids.jacobi_t_max,
        &JacobiOptions::default(),
        tol,
    )
    .map_err(|e| e.to_string())
}

/// Builds the corner sheet from a backtracking loop in the parameter domain
/// and the first bundle direction, then runs the dual-oracle comparison.
fn run_holonomy(
    geometry: &Geometry,
    grids: &GridSettings,
    tol: f64,
) -> Result<CheckReport, String> {
    if geometry.domain.len() != 1 {
        return Err("holonomy_lemma needs a one-parameter immersion".into());
    }
    let (a, b) = geometry.domain[0];
    let amp = grids.sheet_loop_amplitude * (b - a) / std::f64::consts::TAU;
    let imm = geometry.immersion.clone();
    let bundle = geometry.bundle.clone();
    let imm_frame = geometry.immersion.clone();
    let space = geometry.space.clone();
    let loop_pts = move |sigma: f64| {
        let u = a + amp * (1.0 - (std::f64::consts::TAU * sigma).cos());
        imm.eval(&[u])
    };
    let xi = move |s: f64| {
        let u = a + amp * (1.0 - (std::f64::consts::TAU * s).cos());
        let scale = 0.25 + 0.1 * (std::f64::consts::PI * s).sin();
        bundle
            .orthonormal_frame(&imm_frame, &[u])
            .expect("bundle keeps rank along the loop")
            .basis()[0]
            .scale(scale)
    };
    let sheet = loop_normal_sheet(&space, loop_pts, xi, grids.sheet_ns, grids.sheet_nt)
        .map_err(|e| e.to_string())?;
    let samples = sheet.interior_s_indices(5);
    verify_holonomy_lemma(&sheet, &samples, tol).map_err(|e| e.to_string())
}
