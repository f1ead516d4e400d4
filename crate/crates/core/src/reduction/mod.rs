//! Reduction machinery: hypothesis checks for the candidate bundle, the
//! normal-exponential envelope and its total-geodesy certificates.

mod holonomy;
mod jacobi;

pub use holonomy::{
    holonomy_derivative_integral, holonomy_direct, loop_normal_sheet, random_smooth_sheet,
    verify_holonomy_lemma, HomotopySheet,
};
pub use jacobi::{check_jacobi_containment, jacobi_propagate, JacobiOptions};

use crate::ambient::{DiscretizedCurve, SpaceModel};
use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, subspace_residual, Subspace, Tolerance, Vector};
use crate::submanifold::{
    first_normal_space, normal_derivative_along, second_fundamental_form, tangent_space, Immersion,
    NormalSubbundle,
};
use crate::transport_frame;
use rand::Rng;
use std::sync::Arc;

/// Checks fail hard only when the residual clears the tolerance by this
/// factor; the band in between is reported as inconclusive.
pub const FAIL_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Inconclusive => write!(f, "INCONCLUSIVE"),
            Verdict::Fail => write!(f, "FAIL"),
        }
    }
}

/// Outcome of one numerical check.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub verdict: Verdict,
    /// Worst-case location, for diagnostics.
    pub location: String,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn evaluate(name: &str, residual: f64, tolerance: f64, location: String) -> Self {
        let pass = residual < tolerance;
        let verdict = if pass {
            Verdict::Pass
        } else if residual > FAIL_FACTOR * tolerance {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        CheckReport {
            name: name.to_string(),
            residual,
            tolerance,
            pass,
            verdict,
            location,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: String) -> Self {
        self.notes.push(note);
        self
    }
}

/// Smooth path in parameter space.
#[derive(Clone)]
pub struct ParamPath {
    pub map: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    pub t0: f64,
    pub t1: f64,
}

impl ParamPath {
    pub fn line(from: Vec<f64>, to: Vec<f64>) -> Self {
        ParamPath {
            map: Arc::new(move |t| from.iter().zip(&to).map(|(a, b)| a + (b - a) * t).collect()),
            t0: 0.0,
            t1: 1.0,
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        (self.map)(t)
    }
}

/// Max residual, over the parameter grid, of the first normal space against
/// the candidate bundle.
pub fn check_first_normal_contained(
    f: &Immersion,
    v: &NormalSubbundle,
    grid: &[Vec<f64>],
    tol: f64,
    extraction: &Tolerance,
) -> Result<CheckReport> {
    if grid.is_empty() {
        return Err(GeomError::EmptyInput("parameter grid"));
    }
    let mut worst = 0.0f64;
    let mut worst_u = grid[0].clone();
    for u in grid {
        require_normal_frame(f, v, u)?;
        let n1 = first_normal_space(f, u, extraction)?;
        let vhat = v.orthonormal_frame(f, u)?;
        let r = subspace_residual(&n1, &vhat)?;
        if r > worst {
            worst = r;
            worst_u.clone_from(u);
        }
    }
    Ok(CheckReport::evaluate(
        "first_normal_contained",
        worst,
        tol,
        format!("u={worst_u:?}"),
    ))
}

/// Candidate bundles must be pointwise normal to the immersion.
fn require_normal_frame(f: &Immersion, v: &NormalSubbundle, u: &[f64]) -> Result<()> {
    let residual = v.normality_residual(f, u)?;
    if residual > 1e-5 {
        return Err(GeomError::InvalidParameter(format!(
            "bundle frame is not normal to the immersion at u={u:?} (residual {residual:.3e})"
        )));
    }
    Ok(())
}

/// Max containment residual of the normal derivative of every frame field in
/// the bundle, sampled along a parameter path.
pub fn check_parallel_subbundle(
    f: &Immersion,
    v: &NormalSubbundle,
    path: &ParamPath,
    n_samples: usize,
    tol: f64,
) -> Result<CheckReport> {
    if n_samples < 3 {
        return Err(GeomError::EmptyInput("need at least three path samples"));
    }
    let dt = (path.t1 - path.t0) / (n_samples - 1) as f64;
    let mut worst = 0.0f64;
    let mut worst_loc = String::new();
    let mut prev: Option<Subspace> = None;
    for k in 0..n_samples {
        let t = path.t0 + dt * k as f64;
        let u = path.at(t);
        if k % 8 == 0 {
            require_normal_frame(f, v, &u)?;
        }
        let vhat = v.orthonormal_frame(f, &u)?;
        if let Some(p) = &prev {
            let gap = subspace_residual(&vhat, p)?;
            if gap > 0.3 {
                return Err(GeomError::FrameDiscontinuity { index: k, gap });
            }
        }
        prev = Some(vhat.clone());

        // chart velocity of the image curve at this sample
        let eps = 1e-5;
        let x_raw = f
            .eval(&path.at(t + eps))
            .sub(&f.eval(&path.at(t - eps)))
            .scale(0.5 / eps);
        let p_chart = f.eval(&u);
        let x = f.space().tangency_project(&p_chart, &x_raw);

        let frame0 = v.frame_at(&u);
        for (j, _) in frame0.iter().enumerate() {
            let field = |s: f64| v.frame_at(&path.at(t + s))[j].clone();
            let d = normal_derivative_along(f, &u, &x, &field)?;
            let r = vhat.containment_residual(&d, tol)?;
            if r > worst {
                worst = r;
                worst_loc = format!("t={t:.4}, field {j}");
            }
        }
    }
    Ok(CheckReport::evaluate(
        "parallel_subbundle",
        worst,
        tol,
        worst_loc,
    ))
}

/// Curvature invariance of a single subspace: max containment residual of
/// `R(x, y) z` over basis triples.
pub fn check_curvature_invariant(
    model: &SpaceModel,
    p: &crate::ambient::Point,
    w: &Subspace,
    tol: f64,
) -> Result<CheckReport> {
    let residual = curvature_invariance_residual(model, p, w, tol)?;
    Ok(CheckReport::evaluate(
        "curvature_invariant",
        residual,
        tol,
        String::new(),
    ))
}

pub(crate) fn curvature_invariance_residual(
    model: &SpaceModel,
    p: &crate::ambient::Point,
    w: &Subspace,
    zero_guard: f64,
) -> Result<f64> {
    let basis = w.basis();
    let mut worst = 0.0f64;
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            for z in basis {
                let r = model.curvature_dir(&p.coords, &basis[i], &basis[j], z);
                worst = worst.max(w.containment_residual(&r, zero_guard)?);
            }
        }
    }
    Ok(worst)
}

/// Curvature invariance of `TM (+) V` sampled along the parameter grid.
/// Returns the report plus the per-sample residuals (in grid order).
pub fn check_curvature_invariant_along(
    f: &Immersion,
    v: &NormalSubbundle,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<(CheckReport, Vec<f64>)> {
    if grid.is_empty() {
        return Err(GeomError::EmptyInput("parameter grid"));
    }
    let form = f.space().form();
    let mut worst = 0.0f64;
    let mut worst_u = grid[0].clone();
    let mut residuals = Vec::with_capacity(grid.len());
    for u in grid {
        let t = tangent_space(f, u)?;
        let p = f.point(u)?;
        let mut gens: Vec<Vector> = t.basis().to_vec();
        gens.extend(v.frame_at(u));
        let w = orthonormalize(&gens, &form, &Tolerance::default())?;
        if w.dim() != f.param_dim() + v.rank() {
            return Err(GeomError::RankDeficient {
                expected: f.param_dim() + v.rank(),
                found: w.dim(),
                location: format!("tangent (+) bundle span at u={u:?}"),
            });
        }
        let r = curvature_invariance_residual(f.space(), &p, &w, tol)?;
        residuals.push(r);
        if r > worst {
            worst = r;
            worst_u.clone_from(u);
        }
    }
    let report = CheckReport::evaluate("curvature_invariant", worst, tol, format!("u={worst_u:?}"));
    Ok((report, residuals))
}

/// Rectangular grid specification for envelope parameters.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub ranges: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn line(a: f64, b: f64, n: usize) -> Self {
        GridSpec {
            ranges: vec![(a, b)],
            counts: vec![n],
        }
    }

    fn nodes(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for ((a, b), n) in self.ranges.iter().zip(&self.counts) {
            let mut next = Vec::with_capacity(out.len() * n);
            for prefix in &out {
                for k in 0..*n {
                    let t = if *n == 1 {
                        0.5
                    } else {
                        k as f64 / (*n - 1) as f64
                    };
                    let mut row = prefix.clone();
                    row.push(a + (b - a) * t);
                    next.push(row);
                }
            }
            out = next;
        }
        out
    }
}

/// Image of a disc bundle under the normal exponential map, sampled over a
/// parameter grid, wrapped as an immersion over `(u, s)`.
#[derive(Clone)]
pub struct Envelope {
    immersion: Immersion,
    base_dim: usize,
    bundle_rank: usize,
    epsilon: f64,
    u_grid: GridSpec,
    s_counts: usize,
}

impl Envelope {
    pub fn immersion(&self) -> &Immersion {
        &self.immersion
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn bundle_rank(&self) -> usize {
        self.bundle_rank
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.base_dim + self.bundle_rank
    }

    /// Grid nodes in the combined `(u, s)` parameter space, restricted to
    /// the disc of radius epsilon in the bundle coefficients.
    pub fn grid_nodes(&self) -> Vec<Vec<f64>> {
        let mut spec = self.u_grid.clone();
        for _ in 0..self.bundle_rank {
            spec.ranges.push((-self.epsilon, self.epsilon));
            spec.counts.push(self.s_counts);
        }
        spec.nodes()
            .into_iter()
            .filter(|node| {
                let s2: f64 = node[self.base_dim..].iter().map(|s| s * s).sum();
                s2.sqrt() <= self.epsilon * (1.0 + 1e-12)
            })
            .collect()
    }
}

/// Builds the envelope immersion `(u, s) -> exp(sum_j s_j g_j(u))` over an
/// orthonormalized smooth frame `g` of the bundle, shrinking the disc radius
/// (halving, at most 8 times) until the sampling map has full rank at every
/// grid node.
pub fn build_envelope(
    f: &Immersion,
    v: &NormalSubbundle,
    epsilon: f64,
    u_grid: GridSpec,
    s_counts: usize,
) -> Result<Envelope> {
    if u_grid.ranges.len() != f.param_dim() || u_grid.ranges.len() != u_grid.counts.len() {
        return Err(GeomError::InvalidParameter(
            "grid specification does not match the parameter dimension".into(),
        ));
    }
    let m = f.param_dim();
    let k = v.rank();
    let space = f.space().clone();
    let mut eps = epsilon;
    for _attempt in 0..=8 {
        let imm = envelope_immersion(f, v, m);
        let env = Envelope {
            immersion: imm,
            base_dim: m,
            bundle_rank: k,
            epsilon: eps,
            u_grid: u_grid.clone(),
            s_counts,
        };
        let mut ok = true;
        for node in env.grid_nodes() {
            match tangent_space(&env.immersion, &node) {
                Ok(_) => {}
                Err(GeomError::RankDeficient { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            // zero-section consistency
            for unode in u_grid.nodes() {
                let mut full = unode.clone();
                full.extend(std::iter::repeat_n(0.0, k));
                let gap = env.immersion.eval(&full).sub(&f.eval(&unode)).norm();
                if gap > 1e-12 * space.scale().max(1.0) {
                    return Err(GeomError::InvalidParameter(format!(
                        "zero section mismatch {gap:.3e} at u={unode:?}"
                    )));
                }
            }
            return Ok(env);
        }
        eps *= 0.5;
    }
    Err(GeomError::RankDeficient {
        expected: m + k,
        found: 0,
        location: "envelope sampling map after radius shrinking".into(),
    })
}

fn envelope_immersion(f: &Immersion, v: &NormalSubbundle, m: usize) -> Immersion {
    let f_inner = f.clone();
    let v_inner = v.clone();
    let space = f.space().clone();
    Immersion::new(space.clone(), m + v.rank(), move |w: &[f64]| {
        let (u, s) = w.split_at(m);
        let base = f_inner.eval(u);
        let frame = v_inner
            .orthonormal_frame(&f_inner, u)
            .expect("bundle frame must keep rank over the envelope grid");
        let mut dir = Vector::zeros(base.len());
        for (sj, gj) in s.iter().zip(frame.basis()) {
            dir = dir.axpy(*sj, gj);
        }
        let tv = crate::TangentVector {
            base: crate::Point {
                coords: base.clone(),
            },
            dir,
        };
        space
            .exp_map(&tv, 1.0)
            .expect("normal exponential stays defined")
            .coords
    })
}

/// Total-geodesy residual of the envelope: normalized second fundamental
/// form over grid nodes and random tangent pairs.
pub fn check_totally_geodesic(
    env: &Envelope,
    pairs_per_node: usize,
    rng: &mut impl Rng,
    tol: f64,
) -> Result<CheckReport> {
    let imm = env.immersion();
    let form = imm.space().form();
    let mut worst = 0.0f64;
    let mut worst_loc = String::new();
    for node in env.grid_nodes() {
        let t = tangent_space(imm, &node)?;
        for _ in 0..pairs_per_node {
            let mut x = Vector::zeros(imm.space().chart_dim());
            let mut y = Vector::zeros(imm.space().chart_dim());
            for b in t.basis() {
                x = x.axpy(rng.gen_range(-1.0..1.0), b);
                y = y.axpy(rng.gen_range(-1.0..1.0), b);
            }
            let (nx, ny) = (form.norm(&x), form.norm(&y));
            if nx < 1e-9 || ny < 1e-9 {
                continue;
            }
            let a = second_fundamental_form(imm, &node, &x, &y)?;
            let r = form.norm(&a) / (nx * ny);
            if r > worst {
                worst = r;
                worst_loc = format!("node={node:?}");
            }
        }
    }
    Ok(CheckReport::evaluate(
        "envelope_totally_geodesic",
        worst,
        tol,
        worst_loc,
    ))
}

/// Coordinate-rectangle loops through the envelope base corner, sampled
/// finely enough for transport.
pub fn envelope_grid_loops(env: &Envelope, max_loops: usize) -> Result<Vec<DiscretizedCurve>> {
    let imm = env.immersion();
    let space = imm.space().clone();
    let dim = env.dim();
    let mut corner = Vec::with_capacity(dim);
    for (a, _b) in &env.u_grid.ranges {
        corner.push(*a);
    }
    corner.extend(std::iter::repeat_n(0.0, env.bundle_rank));

    // candidate rectangle extents along each pair of parameter axes
    let mut loops = Vec::new();
    let mut extents: Vec<Vec<f64>> = Vec::new();
    for axis in 0..dim {
        let (lo, hi) = if axis < env.base_dim {
            env.u_grid.ranges[axis]
        } else {
            (0.0, env.epsilon)
        };
        let span = hi - lo;
        extents.push(vec![0.2 * span, 0.35 * span, 0.5 * span, 0.7 * span]);
    }
    'outer: for i in 0..dim {
        for j in (i + 1)..dim {
            for da in &extents[i] {
                for db in &extents[j] {
                    if loops.len() >= max_loops {
                        break 'outer;
                    }
                    let mut c1 = corner.clone();
                    c1[i] += da;
                    let mut c2 = c1.clone();
                    c2[j] += db;
                    let mut c3 = corner.clone();
                    c3[j] += db;
                    let path = [corner.clone(), c1, c2, c3, corner.clone()];
                    loops.push(sample_param_loop(imm, &space, &path)?);
                }
            }
        }
    }
    if loops.is_empty() {
        return Err(GeomError::EmptyInput("no loops available on the grid"));
    }
    Ok(loops)
}

fn sample_param_loop(
    imm: &Immersion,
    space: &SpaceModel,
    corners: &[Vec<f64>],
) -> Result<DiscretizedCurve> {
    let mut pieces = Vec::new();
    for pair in corners.windows(2) {
        let eval_at = |t: f64| -> Vector {
            let u: Vec<f64> = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| a + (b - a) * t)
                .collect();
            imm.eval(&u)
        };
        // coarse pass to estimate the edge length, then resample so each
        // segment stays well inside the transport step bound
        let mut est = 0.0;
        let mut prev = eval_at(0.0);
        for k in 1..=32 {
            let next = eval_at(k as f64 / 32.0);
            est += next.sub(&prev).norm();
            prev = next;
        }
        let n = ((est / (0.5 * space.max_step())).ceil() as usize).max(32);
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            samples.push(eval_at(k as f64 / n as f64));
        }
        pieces.push(DiscretizedCurve::new(space.clone(), samples, Vec::new())?);
    }
    DiscretizedCurve::concat(&pieces)
}

/// Transport of the envelope tangent plane around closed loops based at the
/// envelope corner; the residual is the symmetric subspace distance between
/// the transported plane and the starting plane.
pub fn check_tangent_preservation(
    env: &Envelope,
    loops: &[DiscretizedCurve],
    tol: f64,
) -> Result<CheckReport> {
    if loops.is_empty() {
        return Err(GeomError::EmptyInput("loops"));
    }
    let imm = env.immersion();
    let mut corner = Vec::new();
    for (a, _b) in &env.u_grid.ranges {
        corner.push(*a);
    }
    corner.extend(std::iter::repeat_n(0.0, env.bundle_rank));
    let w0 = tangent_space(imm, &corner)?;
    let base = imm.point(&corner)?;

    let mut worst = 0.0f64;
    let mut worst_loop = 0usize;
    for (idx, lp) in loops.iter().enumerate() {
        if !imm.space().same_point(&lp.start(), &base) {
            return Err(GeomError::InvalidParameter(format!(
                "loop {idx} does not start at the envelope corner"
            )));
        }
        if !imm.space().same_point(&lp.end(), &base) {
            return Err(GeomError::InvalidParameter(format!(
                "loop {idx} is not closed"
            )));
        }
        let moved = transport_frame(lp, &w0)?;
        let r = subspace_residual(&moved, &w0)?.max(subspace_residual(&w0, &moved)?);
        if r > worst {
            worst = r;
            worst_loop = idx;
        }
    }
    Ok(CheckReport::evaluate(
        "tangent_preservation",
        worst,
        tol,
        format!("loop {worst_loop}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s)
    }

    fn latitude_circle_s3(phi: f64) -> Immersion {
        let (sp, cp) = (phi.sin(), phi.cos());
        Immersion::new(SpaceModel::sphere(3, 1.0).unwrap(), 1, move |u| {
            v(&[sp * u[0].cos(), sp * u[0].sin(), cp, 0.0])
        })
        .with_jacobian(move |u| vec![v(&[-sp * u[0].sin(), sp * u[0].cos(), 0.0, 0.0])])
    }

    fn meridian_bundle(phi: f64) -> NormalSubbundle {
        NormalSubbundle::new(1, move |u: &[f64]| {
            vec![v(&[
                phi.cos() * u[0].cos(),
                phi.cos() * u[0].sin(),
                -phi.sin(),
                0.0,
            ])]
        })
    }

    fn grid_1d(a: f64, b: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| vec![a + (b - a) * k as f64 / (n - 1) as f64])
            .collect()
    }

    #[test]
    fn first_normal_check_passes_with_full_normal_bundle() {
        let phi = 0.8f64;
        let f = latitude_circle_s3(phi);
        // full normal bundle of the circle in the 3-sphere (rank 2)
        let full = NormalSubbundle::new(2, move |u: &[f64]| {
            vec![
                v(&[
                    phi.cos() * u[0].cos(),
                    phi.cos() * u[0].sin(),
                    -phi.sin(),
                    0.0,
                ]),
                v(&[0.0, 0.0, 0.0, 1.0]),
            ]
        });
        let grid = grid_1d(0.0, 5.0, 9);
        let tol_extract = Tolerance::default().with_abs(1e-4);
        let rep = check_first_normal_contained(&f, &full, &grid, 1e-6, &tol_extract).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn first_normal_check_passes_for_geodesic_with_any_bundle() {
        let eq = Immersion::new(SpaceModel::sphere(2, 1.0).unwrap(), 1, |u| {
            v(&[u[0].cos(), u[0].sin(), 0.0])
        })
        .with_jacobian(|u| vec![v(&[-u[0].sin(), u[0].cos(), 0.0])]);
        let any = NormalSubbundle::new(1, |_u: &[f64]| vec![v(&[0.0, 0.0, 1.0])]);
        let grid = grid_1d(0.0, 3.0, 7);
        let rep = check_first_normal_contained(
            &eq,
            &any,
            &grid,
            1e-6,
            &Tolerance::default().with_abs(1e-4),
        )
        .unwrap();
        assert!(rep.pass);
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn parallel_check_passes_for_meridian_bundle() {
        let phi = 0.8;
        let f = latitude_circle_s3(phi);
        let bundle = meridian_bundle(phi);
        let path = ParamPath::line(vec![0.0], vec![4.0]);
        let rep = check_parallel_subbundle(&f, &bundle, &path, 33, 1e-5).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn parallel_check_passes_for_full_normal_bundle() {
        let phi = 0.8f64;
        let f = latitude_circle_s3(phi);
        let full = NormalSubbundle::new(2, move |u: &[f64]| {
            vec![
                v(&[
                    phi.cos() * u[0].cos(),
                    phi.cos() * u[0].sin(),
                    -phi.sin(),
                    0.0,
                ]),
                v(&[0.0, 0.0, 0.0, 1.0]),
            ]
        });
        let path = ParamPath::line(vec![0.2], vec![3.2]);
        let rep = check_parallel_subbundle(&f, &full, &path, 25, 1e-5).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn curvature_invariance_trivial_in_space_forms() {
        let mut rng = Pcg64::seed_from_u64(5);
        for model in [
            SpaceModel::euclidean(4).unwrap(),
            SpaceModel::sphere(3, 1.0).unwrap(),
            SpaceModel::hyperbolic(3, 1.0).unwrap(),
        ] {
            let p = model.random_point(&mut rng);
            for dim in 1..=2 {
                let w = model.random_subspace(&p, dim + 1, &mut rng);
                let rep = check_curvature_invariant(&model, &p, &w, 1e-9).unwrap();
                assert!(
                    rep.pass,
                    "model {:?} residual {}",
                    model.kind_name(),
                    rep.residual
                );
            }
        }
    }

    #[test]
    fn curvature_invariance_of_complex_line_tangent() {
        let m = SpaceModel::complex_projective(2, 4.0).unwrap();
        let mut rng = Pcg64::seed_from_u64(9);
        let p = m.random_point(&mut rng);
        let x = m.random_tangent(&p, &mut rng);
        let jx = m.complex_structure(&x).unwrap();
        let w = orthonormalize(
            &[x.dir.clone(), jx.dir.clone()],
            &m.form(),
            &Tolerance::default(),
        )
        .unwrap();
        let rep = check_curvature_invariant(&m, &p, &w, 1e-9).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn envelope_of_latitude_circle_stays_in_equatorial_sphere() {
        let phi = std::f64::consts::FRAC_PI_4;
        let f = latitude_circle_s3(phi);
        let bundle = meridian_bundle(phi);
        let env = build_envelope(
            &f,
            &bundle,
            0.3,
            GridSpec::line(0.0, 2.0 * std::f64::consts::PI, 33),
            7,
        )
        .unwrap();
        assert_eq!(env.dim(), 2);
        // every sample keeps the last coordinate at zero: the band lies in
        // the equatorial 2-sphere
        for node in env.grid_nodes() {
            let p = env.immersion().eval(&node);
            assert!(p[3].abs() < 1e-12);
        }
        // zero section reproduces the circle
        let q = env.immersion().eval(&[1.0, 0.0]);
        assert!(q.sub(&f.eval(&[1.0])).norm() < 1e-14);
    }

    #[test]
    fn envelope_of_point_is_full_dimensional_ball() {
        let m = SpaceModel::sphere(3, 1.0).unwrap();
        let north = v(&[0.0, 0.0, 0.0, 1.0]);
        let f = Immersion::new(m, 0, move |_u| north.clone());
        let bundle = NormalSubbundle::new(3, |_u: &[f64]| {
            vec![
                v(&[1.0, 0.0, 0.0, 0.0]),
                v(&[0.0, 1.0, 0.0, 0.0]),
                v(&[0.0, 0.0, 1.0, 0.0]),
            ]
        });
        let env = build_envelope(
            &f,
            &bundle,
            0.4,
            GridSpec {
                ranges: vec![],
                counts: vec![],
            },
            5,
        )
        .unwrap();
        assert_eq!(env.dim(), 3);
        let t = tangent_space(env.immersion(), &[0.1, -0.2, 0.05]).unwrap();
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn envelope_of_line_in_r3_is_flat_strip() {
        let m = SpaceModel::euclidean(3).unwrap();
        let f = Immersion::new(m, 1, |u| v(&[u[0], 2.0 * u[0], 0.0]));
        let inv_sqrt5 = 1.0 / 5.0f64.sqrt();
        let bundle = NormalSubbundle::new(1, move |_u: &[f64]| {
            vec![v(&[-2.0 * inv_sqrt5, inv_sqrt5, 0.0])]
        });
        let env = build_envelope(&f, &bundle, 0.5, GridSpec::line(-1.0, 1.0, 17), 5).unwrap();
        let mut rng = Pcg64::seed_from_u64(3);
        let rep = check_totally_geodesic(&env, 2, &mut rng, 1e-4).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
        let loops = envelope_grid_loops(&env, 4).unwrap();
        let rep = check_tangent_preservation(&env, &loops, 1e-4).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn equatorial_band_is_totally_geodesic_and_preserves_tangents() {
        let phi = std::f64::consts::FRAC_PI_4;
        let f = latitude_circle_s3(phi);
        let bundle = meridian_bundle(phi);
        let env = build_envelope(
            &f,
            &bundle,
            0.3,
            GridSpec::line(0.0, 2.0 * std::f64::consts::PI, 25),
            5,
        )
        .unwrap();
        let mut rng = Pcg64::seed_from_u64(11);
        let rep = check_totally_geodesic(&env, 2, &mut rng, 1e-4).unwrap();
        assert!(rep.pass, "alpha residual {}", rep.residual);
        let loops = envelope_grid_loops(&env, 12).unwrap();
        assert!(loops.len() >= 4);
        let rep = check_tangent_preservation(&env, &loops, 1e-4).unwrap();
        assert!(rep.pass, "transport residual {}", rep.residual);
    }

    #[test]
    fn non_normal_bundle_is_rejected() {
        let f = latitude_circle_s3(0.8);
        // frame with a tangential component is not a normal subbundle
        let bad =
            NormalSubbundle::new(1, |u: &[f64]| vec![v(&[-u[0].sin(), u[0].cos(), 0.0, 0.0])]);
        let grid = grid_1d(0.1, 2.0, 5);
        let err = check_first_normal_contained(
            &f,
            &bad,
            &grid,
            1e-6,
            &Tolerance::default().with_abs(1e-4),
        );
        assert!(matches!(err, Err(GeomError::InvalidParameter(_))));
    }

    #[test]
    fn report_verdict_bands() {
        let r = CheckReport::evaluate("x", 1e-10, 1e-9, String::new());
        assert_eq!(r.verdict, Verdict::Pass);
        let r = CheckReport::evaluate("x", 5e-9, 1e-9, String::new());
        assert_eq!(r.verdict, Verdict::Inconclusive);
        let r = CheckReport::evaluate("x", 1e-7, 1e-9, String::new());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.pass);
    }
}
