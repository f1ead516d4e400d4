//! Jacobi-field propagation along geodesics and containment checks against
//! parallel-transported subspaces.
//!
//! The field equation `J'' + R(J, g') g' = 0` is written in a parallel
//! orthonormal frame along the geodesic, where it becomes a linear
//! second-order system `y'' = -M(t) y`, and integrated with fixed-step RK4
//! using frame samples at half steps.

use super::{curvature_invariance_residual, CheckReport};
use crate::ambient::{DiscretizedCurve, SpaceModel, TangentVector};
use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, Matrix, Subspace, Tolerance, Vector};
use crate::transport_with_trace;

#[derive(Clone, Copy, Debug)]
pub struct JacobiOptions {
    /// RK4 steps over the whole integration range.
    pub steps: usize,
    /// Containment samples along the range.
    pub t_samples: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            steps: 1024,
            t_samples: 33,
        }
    }
}

struct ParallelFrameData {
    /// Frame vectors at each half-step node (2 * steps + 1 nodes).
    frames: Vec<Vec<Vector>>,
    /// Geodesic velocity at each half-step node.
    velocities: Vec<Vector>,
    /// Curve points at each half-step node.
    points: Vec<Vector>,
}

fn parallel_frame_along(
    model: &SpaceModel,
    geo: &TangentVector,
    t_end: f64,
    steps: usize,
) -> Result<ParallelFrameData> {
    let n_nodes = 2 * steps + 1;
    let mut points = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let t = t_end * k as f64 / (n_nodes - 1) as f64;
        points.push(model.exp_map(geo, t)?.coords);
    }
    // frames via closed-form transport along the geodesic itself: exact and
    // cheap, matching what the stepwise integrator converges to
    let basis = model.tangent_basis(&geo.base)?;
    let mut frames = Vec::with_capacity(n_nodes);
    let mut velocities = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let t = t_end * k as f64 / (n_nodes - 1) as f64;
        let mut frame_k = Vec::with_capacity(basis.len());
        for b in &basis {
            let tv = TangentVector {
                base: geo.base.clone(),
                dir: b.clone(),
            };
            frame_k.push(model.geodesic_transport(geo, t, &tv)?.dir);
        }
        frames.push(frame_k);
        velocities.push(model.geodesic_velocity(geo, t)?.dir);
    }
    Ok(ParallelFrameData {
        frames,
        velocities,
        points,
    })
}

/// Curvature operator matrix in the parallel frame at node `k`.
#[allow(clippy::needless_range_loop)]
fn jacobi_matrix(model: &SpaceModel, data: &ParallelFrameData, k: usize) -> Matrix {
    let frame = &data.frames[k];
    let vel = &data.velocities[k];
    let p = &data.points[k];
    let form = model.form();
    let d = frame.len();
    let mut m = Matrix::zeros(d, d);
    for j in 0..d {
        let r = model.curvature_dir(p, &frame[j], vel, vel);
        for i in 0..d {
            *m.at_mut(i, j) = form.inner(&r, &frame[i]);
        }
    }
    m
}

/// Propagates the Jacobi field with initial value `j0` and initial covariant
/// derivative `j0dot` along the geodesic of `geo` to time `t_end`. Returns
/// `(J(t_end), J'(t_end))` as tangent vectors at the geodesic endpoint.
pub fn jacobi_propagate(
    model: &SpaceModel,
    geo: &TangentVector,
    j0: &Vector,
    j0dot: &Vector,
    t_end: f64,
    steps: usize,
) -> Result<(TangentVector, TangentVector)> {
    let (ends, _samples) = jacobi_propagate_sampled(model, geo, j0, j0dot, t_end, steps, 2)?;
    Ok(ends)
}

/// Endpoint pair `(J, J')` of a propagated field.
pub type JacobiEndpoints = (TangentVector, TangentVector);

/// Same as [`jacobi_propagate`], additionally returning `(t, J(t))` samples
/// at `n_t` uniform times.
pub fn jacobi_propagate_sampled(
    model: &SpaceModel,
    geo: &TangentVector,
    j0: &Vector,
    j0dot: &Vector,
    t_end: f64,
    steps: usize,
    n_t: usize,
) -> Result<(JacobiEndpoints, Vec<(f64, Vector)>)> {
    if steps == 0 {
        return Err(GeomError::InvalidParameter("steps must be positive".into()));
    }
    for w in [j0, j0dot] {
        let res = model.tangency_residual(&geo.base.coords, w);
        if res > 1e-6 {
            return Err(GeomError::NotTangent { residual: res });
        }
    }
    let data = parallel_frame_along(model, geo, t_end, steps)?;
    let form = model.form();
    let d = data.frames[0].len();

    // initial coordinates in the frame
    let mut y = vec![0.0; d];
    let mut z = vec![0.0; d];
    for i in 0..d {
        y[i] = form.inner(j0, &data.frames[0][i]);
        z[i] = form.inner(j0dot, &data.frames[0][i]);
    }

    let h = t_end / steps as f64;
    let sample_every = (steps / (n_t.max(2) - 1)).max(1);
    let mut samples = Vec::new();
    let push_sample =
        |samples: &mut Vec<(f64, Vector)>, k: usize, y: &[f64], data: &ParallelFrameData| {
            let t = t_end * k as f64 / steps as f64;
            let frame = &data.frames[2 * k];
            let mut j = Vector::zeros(frame[0].len());
            for (yi, e) in y.iter().zip(frame) {
                j = j.axpy(*yi, e);
            }
            samples.push((t, j));
        };
    push_sample(&mut samples, 0, &y, &data);

    for k in 0..steps {
        let m0 = jacobi_matrix(model, &data, 2 * k);
        let mh = jacobi_matrix(model, &data, 2 * k + 1);
        let m1 = jacobi_matrix(model, &data, 2 * k + 2);
        #[allow(clippy::needless_range_loop)]
        let acc = |m: &Matrix, yv: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; d];
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += m.at(i, j) * yv[j];
                }
                out[i] = -s;
            }
            out
        };
        // classical RK4 for y' = z, z' = -M y
        let k1y = z.clone();
        let k1z = acc(&m0, &y);
        let y2: Vec<f64> = y.iter().zip(&k1y).map(|(a, b)| a + 0.5 * h * b).collect();
        let z2: Vec<f64> = z.iter().zip(&k1z).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2y = z2.clone();
        let k2z = acc(&mh, &y2);
        let y3: Vec<f64> = y.iter().zip(&k2y).map(|(a, b)| a + 0.5 * h * b).collect();
        let z3: Vec<f64> = z.iter().zip(&k2z).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3y = z3.clone();
        let k3z = acc(&mh, &y3);
        let y4: Vec<f64> = y.iter().zip(&k3y).map(|(a, b)| a + h * b).collect();
        let z4: Vec<f64> = z.iter().zip(&k3z).map(|(a, b)| a + h * b).collect();
        let k4y = z4.clone();
        let k4z = acc(&m1, &y4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            z[i] += h / 6.0 * (k1z[i] + 2.0 * k2z[i] + 2.0 * k3z[i] + k4z[i]);
        }
        if (k + 1) % sample_every == 0 || k + 1 == steps {
            push_sample(&mut samples, k + 1, &y, &data);
        }
    }

    let end_frame = &data.frames[2 * steps];
    let end_point = crate::Point {
        coords: data.points[2 * steps].clone(),
    };
    let mut j_end = Vector::zeros(model.chart_dim());
    let mut jdot_end = Vector::zeros(model.chart_dim());
    for i in 0..d {
        j_end = j_end.axpy(y[i], &end_frame[i]);
        jdot_end = jdot_end.axpy(z[i], &end_frame[i]);
    }
    Ok((
        (
            TangentVector {
                base: end_point.clone(),
                dir: j_end,
            },
            TangentVector {
                base: end_point,
                dir: jdot_end,
            },
        ),
        samples,
    ))
}

/// Containment of propagated Jacobi fields in the parallel transport of a
/// starting subspace: residual is the max containment defect over time
/// samples and initial conditions. Also notes the curvature invariance of
/// the starting subspace and the generic rank of the propagated fields.
pub fn check_jacobi_containment(
    model: &SpaceModel,
    geo: &TangentVector,
    w0: &Subspace,
    ics: &[(Vector, Vector)],
    t_end: f64,
    opts: &JacobiOptions,
    tol: f64,
) -> Result<CheckReport> {
    if ics.is_empty() {
        return Err(GeomError::EmptyInput("initial conditions"));
    }
    let invariance = curvature_invariance_residual(model, &geo.base, w0, tol)?;

    // align the field samples and the transported-subspace samples on a
    // common uniform time grid
    let n_t = opts.t_samples.max(3);
    let steps = opts.steps.div_ceil(n_t - 1) * (n_t - 1);
    let arc = geo.norm(model) * t_end;
    let seg_per_interval =
        ((arc / (n_t - 1) as f64 / (0.5 * model.max_step())).ceil() as usize).max(4);
    let n_seg = (n_t - 1) * seg_per_interval;
    let mut curve_samples = Vec::with_capacity(n_seg + 1);
    for k in 0..=n_seg {
        let t = t_end * k as f64 / n_seg as f64;
        curve_samples.push(model.exp_map(geo, t)?.coords);
    }
    let curve = DiscretizedCurve::new(model.clone(), curve_samples, Vec::new())?;
    let trace = transport_with_trace(&curve, w0.basis())?;
    let form = model.form();

    let mut worst = 0.0f64;
    let mut worst_loc = String::new();
    let mut end_fields: Vec<Vector> = Vec::new();
    for (idx, (j0, j0dot)) in ics.iter().enumerate() {
        let (_, samples) = jacobi_propagate_sampled(model, geo, j0, j0dot, t_end, steps, n_t)?;
        for (pos, (t, j)) in samples.iter().enumerate() {
            let w_t = orthonormalize(&trace[pos * seg_per_interval], &form, &Tolerance::default())?;
            let r = w_t.containment_residual(j, tol * 1e-3)?;
            if r > worst {
                worst = r;
                worst_loc = format!("ic {idx}, t={t:.3}");
            }
        }
        end_fields.push(samples.last().unwrap().1.clone());
    }

    // generic-rank diagnostic at the end time
    let rank = orthonormalize(
        &end_fields,
        &form,
        &Tolerance {
            abs: 1e-9,
            rank_rel: 1e-6,
        },
    )?
    .dim();

    let mut rep = CheckReport::evaluate("jacobi_containment", worst, tol, worst_loc);
    rep = rep.with_note(format!(
        "starting subspace curvature-invariance residual {invariance:.3e}"
    ));
    rep = rep.with_note(format!(
        "propagated-field span rank {rank} (subspace dim {})",
        w0.dim()
    ));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s)
    }

    #[test]
    fn euclidean_fields_are_affine() {
        let m = SpaceModel::euclidean(3).unwrap();
        let p = m.point(v(&[0.0, 0.0, 0.0])).unwrap();
        let geo = m.tangent(p.clone(), v(&[1.0, 0.0, 0.0])).unwrap();
        let (j, jdot) = jacobi_propagate(
            &m,
            &geo,
            &v(&[0.0, 0.5, 0.0]),
            &v(&[0.0, 0.0, 2.0]),
            3.0,
            256,
        )
        .unwrap();
        assert!(j.dir.sub(&v(&[0.0, 0.5, 6.0])).norm() < 1e-10);
        assert!(jdot.dir.sub(&v(&[0.0, 0.0, 2.0])).norm() < 1e-10);
    }

    #[test]
    fn sphere_field_magnitude_is_sine() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        let p = m.point(v(&[0.0, 0.0, 1.0])).unwrap();
        let geo = m.tangent(p, v(&[1.0, 0.0, 0.0])).unwrap();
        let zero = Vector::zeros(3);
        let w = v(&[0.0, 1.0, 0.0]);
        for t in [0.3, 1.0, 2.0, 3.0] {
            let (j, _) = jacobi_propagate(&m, &geo, &zero, &w, t, 1024).unwrap();
            assert!(
                (j.dir.norm() - t.sin().abs()).abs() < 1e-5,
                "t={t}: |J| = {} vs sin t = {}",
                j.dir.norm(),
                t.sin()
            );
        }
    }

    #[test]
    fn velocity_is_a_trivial_jacobi_field() {
        let m = SpaceModel::sphere(3, 1.0).unwrap();
        let mut rng = Pcg64::seed_from_u64(2);
        let p = m.random_point(&mut rng);
        let geo = m.random_tangent(&p, &mut rng);
        let t = 1.7;
        let (j, jdot) = jacobi_propagate(&m, &geo, &geo.dir, &Vector::zeros(4), t, 1024).unwrap();
        let vel = m.geodesic_velocity(&geo, t).unwrap();
        assert!(j.dir.sub(&vel.dir).norm() < 1e-9);
        assert!(jdot.dir.norm() < 1e-9);
    }

    #[test]
    fn propagation_is_linear_in_initial_conditions() {
        let m = SpaceModel::complex_projective(2, 4.0).unwrap();
        let mut rng = Pcg64::seed_from_u64(13);
        let p = m.random_point(&mut rng);
        let geo = m.random_tangent(&p, &mut rng);
        let (a, b) = (1.7, -0.6);
        let j0a = m.random_tangent(&p, &mut rng).dir;
        let j0b = m.random_tangent(&p, &mut rng).dir;
        let jd0a = m.random_tangent(&p, &mut rng).dir;
        let jd0b = m.random_tangent(&p, &mut rng).dir;
        let t = 1.3;
        let steps = 512;
        let (ja, _) = jacobi_propagate(&m, &geo, &j0a, &jd0a, t, steps).unwrap();
        let (jb, _) = jacobi_propagate(&m, &geo, &j0b, &jd0b, t, steps).unwrap();
        let comb0 = j0a.scale(a).axpy(b, &j0b);
        let combd = jd0a.scale(a).axpy(b, &jd0b);
        let (jc, _) = jacobi_propagate(&m, &geo, &comb0, &combd, t, steps).unwrap();
        let expected = ja.dir.scale(a).axpy(b, &jb.dir);
        assert!(jc.dir.sub(&expected).norm() < 1e-7);
    }

    #[test]
    fn containment_holds_in_space_form_for_any_subspace() {
        let m = SpaceModel::sphere(3, 1.0).unwrap();
        let mut rng = Pcg64::seed_from_u64(31);
        let p = m.random_point(&mut rng);
        let geo = m.random_tangent(&p, &mut rng);
        // subspace containing the velocity
        let extra = m.random_tangent(&p, &mut rng);
        let w0 = orthonormalize(
            &[geo.dir.clone(), extra.dir.clone()],
            &m.form(),
            &Tolerance::default(),
        )
        .unwrap();
        let mut ics = Vec::new();
        for _ in 0..6 {
            let mut j0 = Vector::zeros(4);
            let mut jd0 = Vector::zeros(4);
            for b in w0.basis() {
                j0 = j0.axpy(rng.gen_range(-1.0..1.0), b);
                jd0 = jd0.axpy(rng.gen_range(-1.0..1.0), b);
            }
            ics.push((j0, jd0));
        }
        let rep =
            check_jacobi_containment(&m, &geo, &w0, &ics, 2.0, &JacobiOptions::default(), 1e-4)
                .unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn curvature_operator_is_constant_along_geodesics() {
        // parallel curvature: the frame-expressed Jacobi operator matrix
        // does not change along the geodesic
        for m in [
            SpaceModel::sphere(3, 1.0).unwrap(),
            SpaceModel::complex_projective(2, 4.0).unwrap(),
            SpaceModel::hyperbolic(2, 1.0).unwrap(),
        ] {
            let mut rng = Pcg64::seed_from_u64(7);
            let p = m.random_point(&mut rng);
            let geo = m.random_tangent(&p, &mut rng);
            let data = parallel_frame_along(&m, &geo, 2.0, 64).unwrap();
            let m0 = jacobi_matrix(&m, &data, 0);
            let m_end = jacobi_matrix(&m, &data, 128);
            assert!(
                m0.sub(&m_end).max_abs() < 1e-9,
                "operator drift {:.3e} in {}",
                m0.sub(&m_end).max_abs(),
                m.kind_name()
            );
        }
    }
}
