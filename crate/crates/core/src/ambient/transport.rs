//! Parallel transport along discretized piecewise-smooth curves.
//!
//! Each consecutive sample pair is bridged by the connecting model geodesic
//! and the transport equation is integrated along it with classical
//! fixed-step RK4 (`STEPS_PER_UNIT` steps per unit arc length), projecting
//! back onto the tangency constraint after every step. Transport chains
//! continuously across declared corner indices. In the projective chart the
//! moving representative is gauge-aligned segment by segment and the result
//! is re-expressed in the gauge of the final sample.

use super::{phase_rotate, Point, SpaceModel, STEPS_PER_UNIT};
use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, Subspace, Tolerance, Vector};
use crate::TangentVector;

/// Ordered point samples of a piecewise-smooth curve, with the indices where
/// smoothness may fail.
#[derive(Clone, Debug)]
pub struct DiscretizedCurve {
    model: SpaceModel,
    samples: Vec<Vector>,
    breakpoints: Vec<usize>,
}

impl DiscretizedCurve {
    pub fn new(model: SpaceModel, samples: Vec<Vector>, breakpoints: Vec<usize>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(GeomError::EmptyInput("curve needs at least two samples"));
        }
        for s in &samples {
            model.check_point(s)?;
        }
        for b in &breakpoints {
            if *b == 0 || *b >= samples.len() - 1 {
                return Err(GeomError::InvalidParameter(format!(
                    "breakpoint index {b} not interior"
                )));
            }
        }
        let max = model.max_step();
        for (i, pair) in samples.windows(2).enumerate() {
            let (v, _) = model.connect(&pair[0], &pair[1])?;
            let len = model.form().norm(&v);
            if len > max {
                return Err(GeomError::CurveTooCoarse { index: i, len, max });
            }
        }
        Ok(DiscretizedCurve {
            model,
            samples,
            breakpoints,
        })
    }

    /// Samples `f` uniformly on `[t0, t1]`; `f` must return valid chart
    /// coordinates.
    pub fn from_fn(
        model: SpaceModel,
        n: usize,
        t0: f64,
        t1: f64,
        f: impl Fn(f64) -> Vector,
    ) -> Result<Self> {
        if n < 2 {
            return Err(GeomError::EmptyInput("need at least two samples"));
        }
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let t = t0 + (t1 - t0) * (k as f64) / ((n - 1) as f64);
            samples.push(f(t));
        }
        Self::new(model, samples, Vec::new())
    }

    /// Samples the geodesic of `v` over `[t0, t1]` densely enough for
    /// transport.
    pub fn from_geodesic(model: &SpaceModel, v: &TangentVector, t0: f64, t1: f64) -> Result<Self> {
        let speed = v.norm(model);
        let arc = speed * (t1 - t0).abs();
        let n = ((arc / model.max_step()).ceil() as usize + 2).max(8);
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = t0 + (t1 - t0) * (k as f64) / (n as f64);
            samples.push(model.exp_map(v, t)?.coords);
        }
        Self::new(model.clone(), samples, Vec::new())
    }

    pub fn model(&self) -> &SpaceModel {
        &self.model
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn start(&self) -> Point {
        Point {
            coords: self.samples[0].clone(),
        }
    }

    pub fn end(&self) -> Point {
        Point {
            coords: self.samples[self.samples.len() - 1].clone(),
        }
    }

    pub fn reversed(&self) -> Self {
        let n = self.samples.len();
        let mut samples = self.samples.clone();
        samples.reverse();
        let breakpoints = self.breakpoints.iter().map(|b| n - 1 - b).collect();
        DiscretizedCurve {
            model: self.model.clone(),
            samples,
            breakpoints,
        }
    }

    /// Concatenates curves whose endpoints coincide; junctions become
    /// breakpoints.
    pub fn concat(parts: &[DiscretizedCurve]) -> Result<Self> {
        if parts.is_empty() {
            return Err(GeomError::EmptyInput("concat parts"));
        }
        let model = parts[0].model.clone();
        let mut samples: Vec<Vector> = parts[0].samples.clone();
        let mut breakpoints: Vec<usize> = parts[0].breakpoints.clone();
        for part in &parts[1..] {
            let gap = samples.last().unwrap().sub(&part.samples[0]).norm();
            if gap > 1e-9 * model.scale().max(1.0) {
                return Err(GeomError::InvalidParameter(format!(
                    "curve pieces do not meet (gap {gap:.3e})"
                )));
            }
            let offset = samples.len() - 1;
            breakpoints.push(offset);
            breakpoints.extend(part.breakpoints.iter().map(|b| b + offset));
            samples.extend_from_slice(&part.samples[1..]);
        }
        breakpoints.sort_unstable();
        breakpoints.dedup();
        DiscretizedCurve::new(model, samples, breakpoints)
    }

    pub fn arc_length(&self) -> f64 {
        let mut total = 0.0;
        for pair in self.samples.windows(2) {
            if let Ok((v, _)) = self.model.connect(&pair[0], &pair[1]) {
                total += self.model.form().norm(&v);
            }
        }
        total
    }
}

/// Transports `vectors` across one geodesic segment from `a` to `b`.
/// Returns the gauge phase applied to `b` in the projective chart.
fn transport_segment(
    model: &SpaceModel,
    a: &Vector,
    b: &Vector,
    vectors: &mut [Vector],
) -> Result<f64> {
    let (gdir, phase) = model.connect(a, b)?;
    let len = model.form().norm(&gdir);
    if len < 1e-300 {
        return Ok(phase);
    }
    let start = Point { coords: a.clone() };
    let geo = TangentVector {
        base: start,
        dir: gdir,
    };
    let n_steps = ((len * STEPS_PER_UNIT).ceil() as usize).max(1);
    let h = 1.0 / n_steps as f64;
    for k in 0..n_steps {
        let t0 = k as f64 * h;
        // curve data at the three RK4 stage times
        let c0 = model.exp_map(&geo, t0)?.coords;
        let cv0 = model.geodesic_velocity(&geo, t0)?.dir;
        let cm = model.exp_map(&geo, t0 + 0.5 * h)?.coords;
        let cvm = model.geodesic_velocity(&geo, t0 + 0.5 * h)?.dir;
        let c1 = model.exp_map(&geo, t0 + h)?.coords;
        let cv1 = model.geodesic_velocity(&geo, t0 + h)?.dir;
        for v in vectors.iter_mut() {
            let k1 = model.transport_rhs(&c0, &cv0, v);
            let k2 = model.transport_rhs(&cm, &cvm, &v.axpy(0.5 * h, &k1));
            let k3 = model.transport_rhs(&cm, &cvm, &v.axpy(0.5 * h, &k2));
            let k4 = model.transport_rhs(&c1, &cv1, &v.axpy(h, &k3));
            let mut next = v.axpy(h / 6.0, &k1);
            next = next.axpy(h / 3.0, &k2);
            next = next.axpy(h / 3.0, &k3);
            next = next.axpy(h / 6.0, &k4);
            *v = model.tangency_project(&c1, &next);
        }
    }
    Ok(phase)
}

/// Parallel transport of several vectors based at the curve start, returning
/// their values at every sample (expressed in each sample's own chart gauge).
pub fn transport_with_trace(
    curve: &DiscretizedCurve,
    vectors: &[Vector],
) -> Result<Vec<Vec<Vector>>> {
    let model = curve.model();
    let start = &curve.samples()[0];
    for v in vectors {
        let res = model.tangency_residual(start, v);
        if res > 1e-6 {
            return Err(GeomError::NotTangent { residual: res });
        }
    }
    let mut current: Vec<Vector> = vectors.to_vec();
    let mut phase_total = 0.0;
    let mut trace = Vec::with_capacity(curve.samples().len());
    trace.push(current.clone());
    for pair in curve.samples().windows(2) {
        // work in the accumulated gauge: align the next sample to the moving
        // representative
        let a = phase_rotate_if_needed(model, &pair[0], phase_total);
        let b = phase_rotate_if_needed(model, &pair[1], phase_total);
        let phase = transport_segment(model, &a, &b, &mut current)?;
        phase_total += phase;
        // record values regauged to the original sample representative
        let snapshot: Vec<Vector> = current
            .iter()
            .map(|v| unphase(model, v, phase_total))
            .collect();
        trace.push(snapshot);
    }
    Ok(trace)
}

fn phase_rotate_if_needed(model: &SpaceModel, v: &Vector, phase: f64) -> Vector {
    match model {
        SpaceModel::ComplexProjective { .. } if phase != 0.0 => phase_rotate(v, phase),
        _ => v.clone(),
    }
}

fn unphase(model: &SpaceModel, v: &Vector, phase: f64) -> Vector {
    match model {
        SpaceModel::ComplexProjective { .. } if phase != 0.0 => phase_rotate(v, -phase),
        _ => v.clone(),
    }
}

/// Parallel transport of `v` from the curve start to its end.
pub fn parallel_transport(curve: &DiscretizedCurve, v: &TangentVector) -> Result<TangentVector> {
    let model = curve.model();
    if !model.same_point(&v.base, &curve.start()) {
        return Err(GeomError::BasePointMismatch);
    }
    let trace = transport_with_trace(curve, std::slice::from_ref(&v.dir))?;
    let dir = trace.last().unwrap()[0].clone();
    Ok(TangentVector {
        base: curve.end(),
        dir,
    })
}

/// Transports every basis vector of `w` and re-orthonormalizes at the end.
pub fn transport_frame(curve: &DiscretizedCurve, w: &Subspace) -> Result<Subspace> {
    let model = curve.model();
    let basis: Vec<Vector> = w.basis().to_vec();
    if basis.is_empty() {
        return Ok(Subspace::empty(model.form()));
    }
    let trace = transport_with_trace(curve, &basis)?;
    let moved = trace.last().unwrap().clone();
    orthonormalize(&moved, &model.form(), &Tolerance::default())
}
