//! Frenet apparatus for unit-speed curves: joint integration of the curve
//! and its moving orthonormal frame from prescribed curvature functions,
//! mean-curvature extraction, and the bundled ambient scenarios that pair an
//! integrated curve with the span of its mean-curvature data.
//!
//! The curve and frame are advanced together with fixed-step RK4, snapping
//! the state back onto the constraint set (point constraint, tangency, frame
//! orthonormality) after every step. Results interpolate between nodes with
//! quintic (curve) and cubic (frame) Hermite polynomials so that the
//! finite-difference machinery can treat them as smooth immersions.

#[cfg(test)]
use crate::ambient::TangentVector;
use crate::ambient::{DiscretizedCurve, Point, SpaceModel};
use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, Tolerance, Vector};
use crate::reduction::{
    check_curvature_invariant_along, check_first_normal_contained, check_parallel_subbundle,
    CheckReport, ParamPath,
};
use crate::submanifold::{Immersion, NormalSubbundle};
use std::sync::Arc;

pub type CurvatureFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Input for the frame integration.
#[derive(Clone)]
pub struct FrenetData {
    pub space: SpaceModel,
    pub start: Point,
    /// Orthonormal initial frame spanning the tangent space at `start`; the
    /// first vector is the initial curve velocity.
    pub frame: Vec<Vector>,
    /// Curvature functions `k_1 ... k_{d-1}` of arc length.
    pub curvatures: Vec<CurvatureFn>,
    pub t_max: f64,
    pub steps: usize,
}

impl FrenetData {
    pub fn constant_curvatures(
        space: SpaceModel,
        start: Point,
        frame: Vec<Vector>,
        kappas: &[f64],
        t_max: f64,
        steps: usize,
    ) -> Self {
        let curvatures = kappas
            .iter()
            .map(|k| {
                let k = *k;
                Arc::new(move |_t: f64| k) as CurvatureFn
            })
            .collect();
        FrenetData {
            space,
            start,
            frame,
            curvatures,
            t_max,
            steps,
        }
    }
}

struct ResultInner {
    space: SpaceModel,
    dt: f64,
    t_max: f64,
    /// Curve samples.
    points: Vec<Vector>,
    /// Chart second derivative of the curve at each node.
    point_rate2: Vec<Vector>,
    /// Frame vectors at each node, `frames[node][i]`.
    frames: Vec<Vec<Vector>>,
    /// Chart derivative of each frame vector at each node.
    frame_rates: Vec<Vec<Vector>>,
    curvatures: Vec<CurvatureFn>,
    /// Largest orthonormality defect observed before per-step correction.
    max_drift: f64,
}

/// Integrated curve, frames and derivative data.
#[derive(Clone)]
pub struct FrenetResult {
    inner: Arc<ResultInner>,
}

impl FrenetResult {
    pub fn space(&self) -> &SpaceModel {
        &self.inner.space
    }

    pub fn t_max(&self) -> f64 {
        self.inner.t_max
    }

    pub fn n_nodes(&self) -> usize {
        self.inner.points.len()
    }

    pub fn node_time(&self, k: usize) -> f64 {
        self.inner.dt * k as f64
    }

    pub fn point_at_node(&self, k: usize) -> &Vector {
        &self.inner.points[k]
    }

    pub fn frame_at_node(&self, k: usize) -> &[Vector] {
        &self.inner.frames[k]
    }

    pub fn curvature_fn(&self, i: usize) -> &CurvatureFn {
        &self.inner.curvatures[i]
    }

    /// Orthonormality drift per step before correction.
    pub fn max_drift(&self) -> f64 {
        self.inner.max_drift
    }

    pub fn curve(&self) -> Result<DiscretizedCurve> {
        DiscretizedCurve::new(
            self.inner.space.clone(),
            self.inner.points.clone(),
            Vec::new(),
        )
    }

    fn segment(&self, u: f64) -> (usize, f64) {
        let n = self.inner.points.len();
        let k = ((u / self.inner.dt).floor() as isize).clamp(0, n as isize - 2) as usize;
        (k, u - self.inner.dt * k as f64)
    }

    /// Quintic Hermite interpolation of the curve in chart coordinates,
    /// before the constraint projection.
    fn interp_point_raw(&self, u: f64) -> (Vector, Vector) {
        let (k, local) = self.segment(u);
        let h = self.inner.dt;
        let xi = local / h;
        let f0 = &self.inner.points[k];
        let f1 = &self.inner.points[k + 1];
        let d0 = &self.inner.frames[k][0];
        let d1 = &self.inner.frames[k + 1][0];
        let s0 = &self.inner.point_rate2[k];
        let s1 = &self.inner.point_rate2[k + 1];
        quintic_hermite(f0, d0, s0, f1, d1, s1, h, xi)
    }

    /// Interpolated curve point projected onto the model.
    pub fn interp_point(&self, u: f64) -> Vector {
        let (raw, _) = self.interp_point_raw(u);
        self.inner
            .space
            .project_point(&raw)
            .expect("interpolant stays near the constraint set")
    }

    /// Interpolated frame vector `e_i(u)`, projected tangent at the
    /// interpolated point.
    pub fn interp_frame(&self, i: usize, u: f64) -> Vector {
        let (k, local) = self.segment(u);
        let h = self.inner.dt;
        let xi = local / h;
        let value = cubic_hermite(
            &self.inner.frames[k][i],
            &self.inner.frame_rates[k][i],
            &self.inner.frames[k + 1][i],
            &self.inner.frame_rates[k + 1][i],
            h,
            xi,
        );
        let p = self.interp_point(u);
        self.inner.space.tangency_project(&p, &value)
    }

    /// Wraps the interpolated curve as a smooth immersion over `[0, t_max]`
    /// with an analytic Jacobian consistent with the evaluation map.
    pub fn immersion(&self) -> Immersion {
        let me = self.clone();
        let me_jac = self.clone();
        Immersion::new(self.inner.space.clone(), 1, move |u: &[f64]| {
            me.interp_point(u[0])
        })
        .with_jacobian(move |u: &[f64]| {
            let (raw, raw_d) = me_jac.interp_point_raw(u[0]);
            vec![me_jac.inner.space.project_point_derivative(&raw, &raw_d)]
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn quintic_hermite(
    f0: &Vector,
    d0: &Vector,
    s0: &Vector,
    f1: &Vector,
    d1: &Vector,
    s1: &Vector,
    h: f64,
    xi: f64,
) -> (Vector, Vector) {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    let x4 = x3 * xi;
    let x5 = x4 * xi;
    let h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
    let h1 = xi - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
    let h2 = 0.5 * x2 - 1.5 * x3 + 1.5 * x4 - 0.5 * x5;
    let h3 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
    let h4 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
    let h5 = 0.5 * x3 - x4 + 0.5 * x5;
    let mut val = f0.scale(h0);
    val = val.axpy(h1 * h, d0);
    val = val.axpy(h2 * h * h, s0);
    val = val.axpy(h3, f1);
    val = val.axpy(h4 * h, d1);
    val = val.axpy(h5 * h * h, s1);

    let dh0 = -30.0 * x2 + 60.0 * x3 - 30.0 * x4;
    let dh1 = 1.0 - 18.0 * x2 + 32.0 * x3 - 15.0 * x4;
    let dh2 = xi - 4.5 * x2 + 6.0 * x3 - 2.5 * x4;
    let dh3 = 30.0 * x2 - 60.0 * x3 + 30.0 * x4;
    let dh4 = -12.0 * x2 + 28.0 * x3 - 15.0 * x4;
    let dh5 = 1.5 * x2 - 4.0 * x3 + 2.5 * x4;
    let mut der = f0.scale(dh0 / h);
    der = der.axpy(dh1, d0);
    der = der.axpy(dh2 * h, s0);
    der = der.axpy(dh3 / h, f1);
    der = der.axpy(dh4, d1);
    der = der.axpy(dh5 * h, s1);
    (val, der)
}

fn cubic_hermite(f0: &Vector, d0: &Vector, f1: &Vector, d1: &Vector, h: f64, xi: f64) -> Vector {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    let h0 = 1.0 - 3.0 * x2 + 2.0 * x3;
    let h1 = xi - 2.0 * x2 + x3;
    let h2 = 3.0 * x2 - 2.0 * x3;
    let h3 = -x2 + x3;
    let mut val = f0.scale(h0);
    val = val.axpy(h1 * h, d0);
    val = val.axpy(h2, f1);
    val = val.axpy(h3 * h, d1);
    val
}

/// Chart derivatives of the joint state `(curve, frame)` under the moving
/// frame equations with prescribed curvatures.
fn frenet_rhs(
    space: &SpaceModel,
    curvatures: &[CurvatureFn],
    t: f64,
    gamma: &Vector,
    frame: &[Vector],
) -> (Vector, Vec<Vector>) {
    let d = frame.len();
    let e1 = &frame[0];
    let mut rates = Vec::with_capacity(d);
    for i in 0..d {
        // covariant rate: -k_{i-1} e_{i-1} + k_i e_{i+1}
        let mut cov = Vector::zeros(gamma.len());
        if i > 0 {
            let k = curvatures[i - 1](t);
            cov = cov.axpy(-k, &frame[i - 1]);
        }
        if i + 1 < d {
            let k = curvatures[i](t);
            cov = cov.axpy(k, &frame[i + 1]);
        }
        // chart correction for a field moving with velocity e1
        let corr = space.transport_rhs(gamma, e1, &frame[i]);
        rates.push(cov.add(&corr));
    }
    (e1.clone(), rates)
}

/// Integrates the moving-frame system. The result satisfies the frame
/// equations to the fixed-step tolerance and keeps unit speed.
pub fn frenet_integrate(data: &FrenetData) -> Result<FrenetResult> {
    let space = &data.space;
    let d = space.dim();
    if data.frame.len() != d {
        return Err(GeomError::DimensionMismatch {
            expected: d,
            got: data.frame.len(),
        });
    }
    if data.curvatures.len() != d.saturating_sub(1) {
        return Err(GeomError::DimensionMismatch {
            expected: d - 1,
            got: data.curvatures.len(),
        });
    }
    if data.steps < 2 || !(data.t_max > 0.0) {
        return Err(GeomError::InvalidParameter(
            "need a positive arc range and at least two steps".into(),
        ));
    }
    space.check_point(&data.start.coords)?;
    let form = space.form();
    for (i, a) in data.frame.iter().enumerate() {
        let res = space.tangency_residual(&data.start.coords, a);
        if res > 1e-9 {
            return Err(GeomError::NotTangent { residual: res });
        }
        for (j, b) in data.frame.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (form.inner(a, b) - target).abs() > 1e-9 {
                return Err(GeomError::FrameDegenerate(
                    "initial frame not orthonormal".into(),
                ));
            }
        }
    }

    let h = data.t_max / data.steps as f64;
    let n_nodes = data.steps + 1;
    let mut gamma = data.start.coords.clone();
    let mut frame = data.frame.clone();

    let mut points = Vec::with_capacity(n_nodes);
    let mut frames = Vec::with_capacity(n_nodes);
    let mut frame_rates = Vec::with_capacity(n_nodes);
    let mut point_rate2 = Vec::with_capacity(n_nodes);
    let mut max_drift = 0.0f64;

    let record = |points: &mut Vec<Vector>,
                  frames: &mut Vec<Vec<Vector>>,
                  frame_rates: &mut Vec<Vec<Vector>>,
                  point_rate2: &mut Vec<Vector>,
                  t: f64,
                  gamma: &Vector,
                  frame: &[Vector]| {
        let (_, rates) = frenet_rhs(space, &data.curvatures, t, gamma, frame);
        points.push(gamma.clone());
        frames.push(frame.to_vec());
        point_rate2.push(rates[0].clone());
        frame_rates.push(rates);
    };
    record(
        &mut points,
        &mut frames,
        &mut frame_rates,
        &mut point_rate2,
        0.0,
        &gamma,
        &frame,
    );

    for step in 0..data.steps {
        let t0 = h * step as f64;
        // RK4 on the joint state
        let (gk1, fk1) = frenet_rhs(space, &data.curvatures, t0, &gamma, &frame);
        let g2: Vector = gamma.axpy(0.5 * h, &gk1);
        let f2: Vec<Vector> = frame
            .iter()
            .zip(&fk1)
            .map(|(e, r)| e.axpy(0.5 * h, r))
            .collect();
        let (gk2, fk2) = frenet_rhs(space, &data.curvatures, t0 + 0.5 * h, &g2, &f2);
        let g3: Vector = gamma.axpy(0.5 * h, &gk2);
        let f3: Vec<Vector> = frame
            .iter()
            .zip(&fk2)
            .map(|(e, r)| e.axpy(0.5 * h, r))
            .collect();
        let (gk3, fk3) = frenet_rhs(space, &data.curvatures, t0 + 0.5 * h, &g3, &f3);
        let g4: Vector = gamma.axpy(h, &gk3);
        let f4: Vec<Vector> = frame.iter().zip(&fk3).map(|(e, r)| e.axpy(h, r)).collect();
        let (gk4, fk4) = frenet_rhs(space, &data.curvatures, t0 + h, &g4, &f4);

        gamma = gamma
            .axpy(h / 6.0, &gk1)
            .axpy(h / 3.0, &gk2)
            .axpy(h / 3.0, &gk3)
            .axpy(h / 6.0, &gk4);
        for i in 0..d {
            frame[i] = frame[i]
                .axpy(h / 6.0, &fk1[i])
                .axpy(h / 3.0, &fk2[i])
                .axpy(h / 3.0, &fk3[i])
                .axpy(h / 6.0, &fk4[i]);
        }

        // snap back onto the constraint set
        gamma = space.project_point(&gamma)?;
        let tangent_projected: Vec<Vector> = frame
            .iter()
            .map(|e| space.tangency_project(&gamma, e))
            .collect();
        let mut drift = 0.0f64;
        for (i, a) in tangent_projected.iter().enumerate() {
            for (j, b) in tangent_projected.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                drift = drift.max((form.inner(a, b) - target).abs());
            }
        }
        max_drift = max_drift.max(drift);
        if drift > 1e-4 {
            return Err(GeomError::FrameDegenerate(format!(
                "orthonormality defect {drift:.3e} at step {step}"
            )));
        }
        let sub = orthonormalize(&tangent_projected, &form, &Tolerance::default())?;
        if sub.dim() != d {
            return Err(GeomError::FrameDegenerate(format!(
                "frame rank dropped to {} at step {step}",
                sub.dim()
            )));
        }
        frame = sub.basis().to_vec();

        record(
            &mut points,
            &mut frames,
            &mut frame_rates,
            &mut point_rate2,
            t0 + h,
            &gamma,
            &frame,
        );
    }

    Ok(FrenetResult {
        inner: Arc::new(ResultInner {
            space: space.clone(),
            dt: h,
            t_max: data.t_max,
            points,
            point_rate2,
            frames,
            frame_rates,
            curvatures: data.curvatures.clone(),
            max_drift,
        }),
    })
}

/// Mean-curvature data of an integrated unit-speed curve: `H = k_1 e_2`,
/// its normal derivative `k_1' e_2 + k_1 k_2 e_3`, and the rank-2 bundle
/// they span (as smooth interpolated fields).
pub struct MeanCurvatureApparatus {
    pub h_at: Arc<dyn Fn(f64) -> Vector + Send + Sync>,
    pub dh_at: Arc<dyn Fn(f64) -> Vector + Send + Sync>,
    /// Smallest relative orthogonal component of the derivative against the
    /// mean curvature direction over the nodes (1 = orthogonal, 0 =
    /// dependent).
    pub independence_margin: f64,
    pub bundle: NormalSubbundle,
}

pub fn mean_curvature_apparatus(result: &FrenetResult) -> Result<MeanCurvatureApparatus> {
    let inner = &result.inner;
    let d = inner.frames[0].len();
    if d < 3 {
        return Err(GeomError::InvalidParameter(
            "mean-curvature bundle needs ambient dimension at least 3".into(),
        ));
    }
    let k1 = inner.curvatures[0].clone();
    let k2 = inner.curvatures[1].clone();
    // k_1 must stay away from zero for the bundle to keep rank
    let mut min_k1 = f64::INFINITY;
    for k in 0..inner.points.len() {
        min_k1 = min_k1.min(k1(result.node_time(k)).abs());
    }
    if min_k1 < 1e-6 {
        return Err(GeomError::InvalidParameter(format!(
            "first curvature reaches {min_k1:.3e}; mean-curvature bundle collapses"
        )));
    }

    let k1_prime = {
        let k1 = k1.clone();
        move |t: f64| (k1(t + 1e-5) - k1(t - 1e-5)) / 2e-5
    };

    let res_h = result.clone();
    let k1_h = k1.clone();
    let h_at = Arc::new(move |t: f64| res_h.interp_frame(1, t).scale(k1_h(t)));

    let res_dh = result.clone();
    let k1_dh = k1.clone();
    let k2_dh = k2.clone();
    let k1p_dh = k1_prime.clone();
    let dh_at = Arc::new(move |t: f64| {
        res_dh
            .interp_frame(1, t)
            .scale(k1p_dh(t))
            .axpy(k1_dh(t) * k2_dh(t), &res_dh.interp_frame(2, t))
    });

    // independence margin over the nodes
    let form = inner.space.form();
    let mut margin = f64::INFINITY;
    for k in 0..inner.points.len() {
        let t = result.node_time(k);
        let h = h_at(t);
        let dh = dh_at(t);
        let nh = form.norm(&h);
        let ndh = form.norm(&dh);
        if ndh < 1e-12 {
            margin = 0.0;
            continue;
        }
        let cos = form.inner(&h, &dh) / (nh * ndh);
        margin = margin.min((1.0 - cos * cos).max(0.0).sqrt());
    }

    let h_b = h_at.clone();
    let dh_b = dh_at.clone();
    let bundle = NormalSubbundle::new(2, move |u: &[f64]| vec![h_b(u[0]), dh_b(u[0])]);

    Ok(MeanCurvatureApparatus {
        h_at,
        dh_at,
        independence_margin: margin,
        bundle,
    })
}

/// An integrated curve packaged with its mean-curvature bundle and the three
/// hypothesis reports: first-normal containment, bundle parallelism, and
/// curvature invariance of the combined span.
pub struct FrenetScenario {
    pub result: FrenetResult,
    pub immersion: Immersion,
    pub bundle: NormalSubbundle,
    pub first_normal: CheckReport,
    pub parallel: CheckReport,
    pub invariance: CheckReport,
    /// Per-sample curvature-invariance residuals of the combined span.
    pub invariance_residuals: Vec<f64>,
}

impl FrenetScenario {
    /// Fraction of arc samples whose invariance residual exceeds `margin`.
    pub fn invariance_fraction_above(&self, margin: f64) -> f64 {
        if self.invariance_residuals.is_empty() {
            return 0.0;
        }
        let n = self
            .invariance_residuals
            .iter()
            .filter(|r| **r > margin)
            .count();
        n as f64 / self.invariance_residuals.len() as f64
    }
}

/// Tolerances for the three scenario checks.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioTols {
    pub first_normal: f64,
    pub parallel: f64,
    pub invariance: f64,
}

impl Default for ScenarioTols {
    fn default() -> Self {
        ScenarioTols {
            first_normal: 1e-5,
            parallel: 1e-4,
            invariance: 1e-9,
        }
    }
}

pub fn build_frenet_scenario(
    space: SpaceModel,
    start: Point,
    frame: Vec<Vector>,
    kappas: &[f64],
    t_max: f64,
    steps: usize,
    tols: &ScenarioTols,
) -> Result<FrenetScenario> {
    let data = FrenetData::constant_curvatures(space, start, frame, kappas, t_max, steps);
    let result = frenet_integrate(&data)?;
    let apparatus = mean_curvature_apparatus(&result)?;
    let immersion = result.immersion();
    let bundle = apparatus.bundle;

    // sample grids stay clear of the interpolation domain edges
    let lo = 0.03 * t_max;
    let hi = 0.97 * t_max;
    let grid: Vec<Vec<f64>> = (0..25)
        .map(|k| vec![lo + (hi - lo) * k as f64 / 24.0])
        .collect();
    let first_normal = check_first_normal_contained(
        &immersion,
        &bundle,
        &grid,
        tols.first_normal,
        &Tolerance::default().with_abs(1e-4),
    )?;
    let path = ParamPath::line(vec![lo], vec![hi]);
    let parallel = check_parallel_subbundle(&immersion, &bundle, &path, 33, tols.parallel)?;
    let inv_grid: Vec<Vec<f64>> = (0..101)
        .map(|k| vec![lo + (hi - lo) * k as f64 / 100.0])
        .collect();
    let (invariance, invariance_residuals) =
        check_curvature_invariant_along(&immersion, &bundle, &inv_grid, tols.invariance)?;

    Ok(FrenetScenario {
        result,
        immersion,
        bundle,
        first_normal,
        parallel,
        invariance,
        invariance_residuals,
    })
}

/// Documented deterministic start data in the projective plane (`c = 4`):
/// base representative `(1, 0, 0)` and a generic orthonormal frame that
/// mixes the complex directions, so the combined span is not adapted to the
/// complex structure.
pub fn cp2_default_start_frame() -> (SpaceModel, Point, Vec<Vector>) {
    let space = SpaceModel::complex_projective(2, 4.0).expect("valid model");
    let start = space.base_point();
    // chart layout: (Re z0, Im z0, Re z1, Im z1, Re z2, Im z2)
    let h1 = Vector::from_slice(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let ih1 = Vector::from_slice(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let h2 = Vector::from_slice(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let ih2 = Vector::from_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let raw = vec![
        h1.clone(),
        ih1.scale(1.0).axpy(2.0, &h2),
        h2.scale(1.0).axpy(3.0, &ih2),
        ih2.scale(1.0).axpy(0.5, &ih1),
    ];
    let frame = orthonormalize(&raw, &space.form(), &Tolerance::default())
        .expect("generic frame has full rank")
        .basis()
        .to_vec();
    (space, start, frame)
}

/// Curve in the projective plane with curvatures `(1, 1, 0)` from the
/// documented start data, packaged with its rank-2 mean-curvature bundle and
/// the three hypothesis reports. Defaults: `t_max = 2`, `steps = 4096`.
pub fn build_cp2_counterexample(t_max: f64, steps: usize) -> Result<FrenetScenario> {
    let (space, start, frame) = cp2_default_start_frame();
    build_frenet_scenario(
        space,
        start,
        frame,
        &[1.0, 1.0, 0.0],
        t_max,
        steps,
        &ScenarioTols::default(),
    )
}

/// The same construction transplanted into the round 4-sphere.
pub fn build_s4_scenario(t_max: f64, steps: usize) -> Result<FrenetScenario> {
    let space = SpaceModel::sphere(4, 1.0).expect("valid model");
    let start = space.base_point();
    let frame = space.tangent_basis(&start)?;
    build_frenet_scenario(
        space,
        start,
        frame,
        &[1.0, 1.0, 0.0],
        t_max,
        steps,
        &ScenarioTols::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::parallel_transport;

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s)
    }

    #[test]
    fn zero_curvatures_give_a_geodesic_with_parallel_frame() {
        let space = SpaceModel::sphere(3, 1.0).unwrap();
        let start = space.base_point();
        let frame = space.tangent_basis(&start).unwrap();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start.clone(),
            frame.clone(),
            &[0.0, 0.0],
            1.5,
            1024,
        );
        let result = frenet_integrate(&data).unwrap();
        let geo = TangentVector {
            base: start.clone(),
            dir: frame[0].clone(),
        };
        // curve follows the geodesic
        let end = space.exp_map(&geo, 1.5).unwrap();
        assert!(result.point_at_node(1024).sub(&end.coords).norm() < 1e-9);
        // frame vectors stay parallel
        for (i, e0) in frame.iter().enumerate() {
            let moved = space
                .geodesic_transport(
                    &geo,
                    1.5,
                    &TangentVector {
                        base: start.clone(),
                        dir: e0.clone(),
                    },
                )
                .unwrap();
            let err = result.frame_at_node(1024)[i].sub(&moved.dir).norm();
            assert!(err < 1e-9, "frame vector {i} drift {err:.3e}");
        }
    }

    #[test]
    fn plane_circle_closes_after_full_period() {
        let space = SpaceModel::euclidean(2).unwrap();
        let start = space.point(v(&[0.0, 0.0])).unwrap();
        let frame = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let t_max = 2.0 * std::f64::consts::PI;
        let data = FrenetData::constant_curvatures(space, start, frame, &[1.0], t_max, 4096);
        let result = frenet_integrate(&data).unwrap();
        let gap = result
            .point_at_node(4096)
            .sub(result.point_at_node(0))
            .norm();
        assert!(gap < 1e-5, "circle closure gap {gap:.3e}");
        // unit speed throughout
        for k in (0..=4096).step_by(512) {
            let e1 = &result.frame_at_node(k)[0];
            assert!((e1.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_small_circle_has_prescribed_curvature() {
        let space = SpaceModel::sphere(2, 1.0).unwrap();
        let start = space.base_point();
        let frame = space.tangent_basis(&start).unwrap();
        let c = 1.3f64;
        let period = 2.0 * std::f64::consts::PI / (1.0 + c * c).sqrt();
        let data = FrenetData::constant_curvatures(space.clone(), start, frame, &[c], period, 4096);
        let result = frenet_integrate(&data).unwrap();
        // closes after one period of the small circle
        let gap = result
            .point_at_node(4096)
            .sub(result.point_at_node(0))
            .norm();
        assert!(gap < 1e-6, "small-circle closure gap {gap:.3e}");
        // the generic machinery recovers the prescribed curvature as |H|
        let imm = result.immersion();
        let h = crate::submanifold::mean_curvature(&imm, &[0.4 * period]).unwrap();
        assert!(
            (h.norm() - c).abs() < 1e-4,
            "|H| = {} vs prescribed {c}",
            h.norm()
        );
    }

    #[test]
    fn frame_equations_hold_against_transport_differences() {
        // check de_i = -k_{i-1} e_{i-1} + k_i e_{i+1} by comparing frames at
        // nearby nodes through parallel transport
        let (space, start, frame) = cp2_default_start_frame();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start,
            frame,
            &[1.0, 1.0, 0.0],
            0.5,
            512,
        );
        let result = frenet_integrate(&data).unwrap();
        let k = 256usize;
        let dt = result.inner.dt;
        let window = 8usize;
        // transport the frame at node k-window to node k+window, then
        // compare the covariant rate against the prescribed right side
        let seg: Vec<Vector> = (k - window..=k + window)
            .map(|j| result.point_at_node(j).clone())
            .collect();
        let curve = DiscretizedCurve::new(space.clone(), seg, Vec::new()).unwrap();
        let half: Vec<Vector> = (k..=k + window)
            .map(|j| result.point_at_node(j).clone())
            .collect();
        let half_curve = DiscretizedCurve::new(space.clone(), half, Vec::new()).unwrap();
        let frames_lo = result.frame_at_node(k - window);
        let frames_hi = result.frame_at_node(k + window);
        let span = 2.0 * window as f64 * dt;
        for i in 0..4 {
            let moved = parallel_transport(
                &curve,
                &TangentVector {
                    base: curve.start(),
                    dir: frames_lo[i].clone(),
                },
            )
            .unwrap();
            // average covariant rate over the window, expressed at the top
            let cov_rate = frames_hi[i].sub(&moved.dir).scale(1.0 / span);
            // prescribed right side at the midpoint, transported to the top
            let mut expected_mid = Vector::zeros(6);
            let mid_frame = result.frame_at_node(k);
            if i > 0 {
                expected_mid = expected_mid.axpy(-[1.0, 1.0, 0.0][i - 1], &mid_frame[i - 1]);
            }
            if i + 1 < 4 {
                expected_mid = expected_mid.axpy([1.0, 1.0, 0.0][i], &mid_frame[i + 1]);
            }
            let expected = parallel_transport(
                &half_curve,
                &TangentVector {
                    base: half_curve.start(),
                    dir: expected_mid,
                },
            )
            .unwrap()
            .dir;
            let err = cov_rate.sub(&expected).norm();
            assert!(
                err < 1e-4,
                "frame equation residual {err:.3e} for e{}",
                i + 1
            );
        }
    }

    #[test]
    fn apparatus_for_unit_curvatures() {
        let (space, start, frame) = cp2_default_start_frame();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start,
            frame,
            &[1.0, 1.0, 0.0],
            1.0,
            1024,
        );
        let result = frenet_integrate(&data).unwrap();
        let app = mean_curvature_apparatus(&result).unwrap();
        // H = e2 and its derivative = e3 with unit curvatures
        for t in [0.1, 0.5, 0.9] {
            let h = (app.h_at)(t);
            let dh = (app.dh_at)(t);
            assert!(h.sub(&result.interp_frame(1, t)).norm() < 1e-9);
            assert!(dh.sub(&result.interp_frame(2, t)).norm() < 1e-9);
        }
        assert!(app.independence_margin > 0.999);
    }

    #[test]
    fn apparatus_rejects_geodesics_and_degenerate_second_curvature() {
        let space = SpaceModel::sphere(3, 1.0).unwrap();
        let start = space.base_point();
        let frame = space.tangent_basis(&start).unwrap();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start.clone(),
            frame.clone(),
            &[0.0, 0.0],
            1.0,
            256,
        );
        let result = frenet_integrate(&data).unwrap();
        assert!(mean_curvature_apparatus(&result).is_err());

        // k2 = 0 with constant k1: derivative vanishes, margin collapses
        let data =
            FrenetData::constant_curvatures(space.clone(), start, frame, &[1.0, 0.0], 1.0, 256);
        let result = frenet_integrate(&data).unwrap();
        let app = mean_curvature_apparatus(&result).unwrap();
        assert_eq!(app.independence_margin, 0.0);
    }

    #[test]
    fn first_normal_space_of_curve_is_mean_curvature_line() {
        // for a curve with k1 > 0 the span of the second fundamental form
        // is the mean-curvature line
        let (space, start, frame) = cp2_default_start_frame();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start,
            frame,
            &[1.0, 1.0, 0.0],
            1.0,
            1024,
        );
        let result = frenet_integrate(&data).unwrap();
        let app = mean_curvature_apparatus(&result).unwrap();
        let imm = result.immersion();
        let u = 0.5;
        let n1 = crate::submanifold::first_normal_space(
            &imm,
            &[u],
            &crate::linalg::Tolerance::default().with_abs(1e-4),
        )
        .unwrap();
        assert_eq!(n1.dim(), 1);
        let h = (app.h_at)(u);
        let form = space.form();
        let cos = form.inner(&n1.basis()[0], &h).abs() / form.norm(&h);
        assert!((cos - 1.0).abs() < 1e-6, "alignment {cos}");
    }

    #[test]
    fn third_curvature_breaks_bundle_parallelism() {
        // with k3 = 1 the derivative of the second bundle field leaks out
        let (space, start, frame) = cp2_default_start_frame();
        let scenario = build_frenet_scenario(
            space,
            start,
            frame,
            &[1.0, 1.0, 1.0],
            1.0,
            1024,
            &ScenarioTols::default(),
        )
        .unwrap();
        assert!(scenario.first_normal.pass);
        assert_eq!(
            scenario.parallel.verdict,
            crate::reduction::Verdict::Fail,
            "parallel residual {}",
            scenario.parallel.residual
        );
        assert!(scenario.parallel.residual > 0.1);
    }

    #[test]
    fn envelope_over_counterexample_curve_is_not_totally_geodesic() {
        use crate::reduction::{build_envelope, check_totally_geodesic, GridSpec};
        use rand::SeedableRng;
        let cx = build_cp2_counterexample(1.0, 1024).unwrap();
        let env = build_envelope(
            &cx.immersion,
            &cx.bundle,
            0.3,
            GridSpec::line(0.1, 0.9, 9),
            5,
        )
        .unwrap();
        let mut rng = rand_pcg::Pcg64::seed_from_u64(3);
        let rep = check_totally_geodesic(&env, 2, &mut rng, 1e-4).unwrap();
        assert_eq!(rep.verdict, crate::reduction::Verdict::Fail);
        assert!(rep.residual > 0.05, "leak {}", rep.residual);
    }

    #[test]
    fn unit_speed_and_drift_bounds() {
        let (space, start, frame) = cp2_default_start_frame();
        let data = FrenetData::constant_curvatures(
            space.clone(),
            start,
            frame,
            &[1.0, 1.0, 0.0],
            2.0,
            2048,
        );
        let result = frenet_integrate(&data).unwrap();
        assert!(
            result.max_drift() < 1e-6,
            "drift {:.3e}",
            result.max_drift()
        );
        for k in (0..=2048).step_by(256) {
            let e1 = &result.frame_at_node(k)[0];
            assert!((space.form().norm(e1) - 1.0).abs() < 1e-9);
        }
    }
}
