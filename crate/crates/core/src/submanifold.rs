//! Extrinsic invariants of an immersed submanifold: tangent/normal splitting,
//! second fundamental form, shape operator, normal connection, first normal
//! space and mean curvature.
//!
//! Derivatives are central differences (an analytic Jacobian can be supplied
//! and is preferred when available). Vectors are extended to fields along
//! parameter lines in coordinate components; values at the base point do not
//! depend on the extension.

use crate::ambient::{Point, SpaceModel};
use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, solve_small, Matrix, Subspace, Tolerance, Vector};
use std::sync::Arc;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Vec<Vector> + Send + Sync>;
pub type FrameFn = Arc<dyn Fn(&[f64]) -> Vec<Vector> + Send + Sync>;

/// A parametrized submanifold with derivative access.
///
/// `eval` must be a pure function of the parameter point, smooth on the
/// domain of interest, and return chart coordinates satisfying the model
/// constraint.
#[derive(Clone)]
pub struct Immersion {
    space: SpaceModel,
    param_dim: usize,
    eval: EvalFn,
    jacobian: Option<JacobianFn>,
    fd_step: f64,
    fd_step2: f64,
}

impl Immersion {
    pub fn new(
        space: SpaceModel,
        param_dim: usize,
        eval: impl Fn(&[f64]) -> Vector + Send + Sync + 'static,
    ) -> Self {
        let scale = space.scale().max(1e-6);
        Immersion {
            space,
            param_dim,
            eval: Arc::new(eval),
            jacobian: None,
            fd_step: 1e-5 * scale,
            fd_step2: 1e-4 * scale,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// Overrides the first-derivative step and the step used when the
    /// machinery differentiates derived fields a second time.
    pub fn with_fd_steps(mut self, fd_step: f64, fd_step2: f64) -> Self {
        self.fd_step = fd_step;
        self.fd_step2 = fd_step2;
        self
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn fd_step2(&self) -> f64 {
        self.fd_step2
    }

    /// Derived-field step, guarded against underflow.
    fn fd_step2_checked(&self) -> Result<f64> {
        if self.fd_step2 < 1e-12 || self.fd_step < 1e-12 {
            return Err(GeomError::InvalidParameter(format!(
                "finite-difference step underflow ({:.3e}, {:.3e})",
                self.fd_step, self.fd_step2
            )));
        }
        Ok(self.fd_step2)
    }

    pub fn eval(&self, u: &[f64]) -> Vector {
        (self.eval)(u)
    }

    pub fn point(&self, u: &[f64]) -> Result<Point> {
        self.check_param(u)?;
        self.space.point(self.eval(u))
    }

    fn check_param(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.param_dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.param_dim,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Chart derivative columns at `u`, projected onto the tangent space of
    /// the model at the image point.
    pub fn differential(&self, u: &[f64]) -> Result<Vec<Vector>> {
        self.check_param(u)?;
        let p = self.eval(u);
        let raw = match &self.jacobian {
            Some(j) => j(u),
            None => {
                let mut cols = Vec::with_capacity(self.param_dim);
                for i in 0..self.param_dim {
                    let mut up = u.to_vec();
                    let mut um = u.to_vec();
                    up[i] += self.fd_step;
                    um[i] -= self.fd_step;
                    cols.push(
                        self.eval(&up)
                            .sub(&self.eval(&um))
                            .scale(0.5 / self.fd_step),
                    );
                }
                cols
            }
        };
        if raw.len() != self.param_dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.param_dim,
                got: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .map(|c| self.space.tangency_project(&p, c))
            .collect())
    }

    /// Coordinates of a tangent chart vector in the differential columns.
    pub fn param_coords(&self, u: &[f64], x: &Vector) -> Result<Vec<f64>> {
        let cols = self.differential(u)?;
        let form = self.space.form();
        let m = cols.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let mut gram = Matrix::zeros(m, m);
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                *gram.at_mut(i, j) = form.inner(&cols[i], &cols[j]);
            }
            rhs[i] = form.inner(&cols[i], x);
        }
        solve_small(&gram, &rhs)
    }
}

/// Orthonormalized span of the differential at `u`.
pub fn tangent_space(f: &Immersion, u: &[f64]) -> Result<Subspace> {
    let cols = f.differential(u)?;
    let sub = orthonormalize(&cols, &f.space().form(), &Tolerance::default())?;
    if sub.dim() != f.param_dim() {
        return Err(GeomError::RankDeficient {
            expected: f.param_dim(),
            found: sub.dim(),
            location: format!("tangent_space at u={u:?}"),
        });
    }
    Ok(sub)
}

/// Orthogonal complement of the tangent space inside the model tangent space.
pub fn normal_space(f: &Immersion, u: &[f64]) -> Result<Subspace> {
    let tangent = tangent_space(f, u)?;
    let p = f.point(u)?;
    let form = f.space().form();
    let ambient_basis = f.space().tangent_basis(&p)?;
    let mut rejected = Vec::with_capacity(ambient_basis.len());
    for b in &ambient_basis {
        rejected.push(b.sub(&tangent.project(b)?));
    }
    // largest rejections first so the relative rank cutoff can drop the
    // near-tangent directions
    rejected.sort_by(|a, b| form.norm(b).partial_cmp(&form.norm(a)).unwrap());
    let sub = orthonormalize(&rejected, &form, &Tolerance::default())?;
    let expected = f.space().dim() - f.param_dim();
    if sub.dim() != expected {
        return Err(GeomError::RankDeficient {
            expected,
            found: sub.dim(),
            location: format!("normal_space at u={u:?}"),
        });
    }
    Ok(sub)
}

/// Ambient covariant derivative at `u` of the coordinate extension of `y`
/// along the parameter line with initial chart velocity `x`.
fn ambient_derivative_of_extension(
    f: &Immersion,
    u: &[f64],
    x: &Vector,
    y: &Vector,
) -> Result<Vector> {
    let p = f.eval(u);
    let a = f.param_coords(u, x)?;
    let b = f.param_coords(u, y)?;
    let h = f.fd_step2_checked()?;
    let field = |t: f64| -> Result<Vector> {
        let mut ut = u.to_vec();
        for (ui, ai) in ut.iter_mut().zip(&a) {
            *ui += t * ai;
        }
        let cols = f.differential(&ut)?;
        let mut val = Vector::zeros(p.len());
        for (bi, col) in b.iter().zip(&cols) {
            val = val.axpy(*bi, col);
        }
        Ok(val)
    };
    let raw = field(h)?.sub(&field(-h)?).scale(0.5 / h);
    Ok(f.space().covariant_field_derivative(&p, x, &raw, y))
}

/// Second fundamental form `alpha(x, y)`: normal part of the ambient
/// derivative. Symmetric and bilinear up to finite-difference error.
pub fn second_fundamental_form(f: &Immersion, u: &[f64], x: &Vector, y: &Vector) -> Result<Vector> {
    let nu = normal_space(f, u)?;
    let d = ambient_derivative_of_extension(f, u, x, y)?;
    nu.project(&d)
}

/// Shape operator `A_xi x`: minus the tangential part of the ambient
/// derivative of a normal extension of `xi`.
pub fn shape_operator(f: &Immersion, u: &[f64], xi: &Vector, x: &Vector) -> Result<Vector> {
    let tangent = tangent_space(f, u)?;
    let p = f.eval(u);
    let a = f.param_coords(u, x)?;
    let h = f.fd_step2_checked()?;
    let field = |t: f64| -> Result<Vector> {
        let mut ut = u.to_vec();
        for (ui, ai) in ut.iter_mut().zip(&a) {
            *ui += t * ai;
        }
        let nu_t = normal_space(f, &ut)?;
        nu_t.project(xi)
    };
    let raw = field(h)?.sub(&field(-h)?).scale(0.5 / h);
    let nabla = f.space().covariant_field_derivative(&p, x, &raw, xi);
    Ok(tangent.project(&nabla)?.scale(-1.0))
}

/// Normal-connection derivative of a normal field given along the parameter
/// line through `u` with chart velocity `x`; `field(t)` returns the field
/// value at the curve point with parameter offset `t`.
pub fn normal_derivative_along(
    f: &Immersion,
    u: &[f64],
    x: &Vector,
    field: &dyn Fn(f64) -> Vector,
) -> Result<Vector> {
    let nu = normal_space(f, u)?;
    let p = f.eval(u);
    let h = f.fd_step2_checked()?;
    let raw = field(h).sub(&field(-h)).scale(0.5 / h);
    let value = field(0.0);
    let nabla = f.space().covariant_field_derivative(&p, x, &raw, &value);
    nu.project(&nabla)
}

/// Rank-revealed span of `alpha` over an orthonormal tangent basis. Values
/// with norm at or below `tol.abs` are treated as zero before the relative
/// rank cutoff, so totally geodesic inputs yield dimension zero instead of
/// amplified finite-difference noise.
pub fn first_normal_space(f: &Immersion, u: &[f64], tol: &Tolerance) -> Result<Subspace> {
    let tangent = tangent_space(f, u)?;
    let form = f.space().form();
    let mut values = Vec::new();
    let basis = tangent.basis();
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let a = second_fundamental_form(f, u, &basis[i], &basis[j])?;
            if form.norm(&a) > tol.abs {
                values.push(a);
            }
        }
    }
    orthonormalize(&values, &form, tol)
}

/// Mean curvature vector: trace of `alpha` over an orthonormal tangent basis
/// divided by the submanifold dimension.
pub fn mean_curvature(f: &Immersion, u: &[f64]) -> Result<Vector> {
    let tangent = tangent_space(f, u)?;
    let m = tangent.dim();
    if m == 0 {
        return Err(GeomError::EmptyInput("mean curvature of a point"));
    }
    let mut h = Vector::zeros(f.space().chart_dim());
    for e in tangent.basis() {
        h = h.add(&second_fundamental_form(f, u, e, e)?);
    }
    Ok(h.scale(1.0 / m as f64))
}

/// Candidate normal subbundle, given as a frame field over the parameter
/// domain. The frame must vary smoothly with the parameter (the envelope and
/// the parallelism checks differentiate through it) and be pointwise normal
/// and independent.
#[derive(Clone)]
pub struct NormalSubbundle {
    rank: usize,
    frame: FrameFn,
}

impl NormalSubbundle {
    pub fn new(rank: usize, frame: impl Fn(&[f64]) -> Vec<Vector> + Send + Sync + 'static) -> Self {
        NormalSubbundle {
            rank,
            frame: Arc::new(frame),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn frame_at(&self, u: &[f64]) -> Vec<Vector> {
        (self.frame)(u)
    }

    /// Orthonormalized frame at `u`; errors when the frame loses rank.
    pub fn orthonormal_frame(&self, f: &Immersion, u: &[f64]) -> Result<Subspace> {
        let raw = self.frame_at(u);
        if raw.len() != self.rank {
            return Err(GeomError::DimensionMismatch {
                expected: self.rank,
                got: raw.len(),
            });
        }
        let p = f.eval(u);
        let projected: Vec<Vector> = raw
            .iter()
            .map(|v| f.space().tangency_project(&p, v))
            .collect();
        let sub = orthonormalize(&projected, &f.space().form(), &Tolerance::default())?;
        if sub.dim() != self.rank {
            return Err(GeomError::RankDeficient {
                expected: self.rank,
                found: sub.dim(),
                location: format!("normal frame at u={u:?}"),
            });
        }
        Ok(sub)
    }

    /// Max containment residual of the frame against the normal space at `u`.
    pub fn normality_residual(&self, f: &Immersion, u: &[f64]) -> Result<f64> {
        let nu = normal_space(f, u)?;
        let mut worst = 0.0f64;
        for v in self.frame_at(u) {
            worst = worst.max(nu.containment_residual(&v, 0.0)?);
        }
        Ok(worst)
    }
}

/// Numerically parallel normal frame along a parameter path: moves each
/// frame vector so that its normal derivative vanishes. Returns the frame at
/// each of the `n` uniform path samples.
pub fn normal_parallel_frame(
    f: &Immersion,
    path: &(dyn Fn(f64) -> Vec<f64> + Sync),
    t0: f64,
    t1: f64,
    n: usize,
    frame0: &[Vector],
) -> Result<Vec<Vec<Vector>>> {
    if n < 2 {
        return Err(GeomError::EmptyInput("need at least two path samples"));
    }
    let h = (t1 - t0) / (n - 1) as f64;
    let eps = 1e-5 * f.space().scale().max(1e-6);
    let rhs = |t: f64, xi: &Vector| -> Result<Vector> {
        let u = path(t);
        let p = f.eval(&u);
        let cv = f
            .eval(&path(t + eps))
            .sub(&f.eval(&path(t - eps)))
            .scale(0.5 / eps);
        // tangential motion forced by normality: derivative of the moving
        // normal projection applied to the frozen vector
        let tangent = tangent_space(f, &u)?;
        let proj = |s: f64| -> Result<Vector> {
            let nu = normal_space(f, &path(t + s))?;
            nu.project(xi)
        };
        let dproj = proj(eps)?.sub(&proj(-eps)?).scale(0.5 / eps);
        let tangential = tangent.project(&dproj)?;
        // chart correction keeps the vector attached to the model
        let correction = f.space().transport_rhs(&p, &cv, xi);
        Ok(tangential.add(&correction))
    };
    let mut frame: Vec<Vector> = frame0.to_vec();
    let mut out = Vec::with_capacity(n);
    out.push(frame.clone());
    for k in 0..n - 1 {
        let t = t0 + h * k as f64;
        let mut next = Vec::with_capacity(frame.len());
        let u_next = path(t0 + h * (k + 1) as f64);
        let nu_next = normal_space(f, &u_next)?;
        for xi in &frame {
            let k1 = rhs(t, xi)?;
            let k2 = rhs(t + 0.5 * h, &xi.axpy(0.5 * h, &k1))?;
            let k3 = rhs(t + 0.5 * h, &xi.axpy(0.5 * h, &k2))?;
            let k4 = rhs(t + h, &xi.axpy(h, &k3))?;
            let mut v = xi.axpy(h / 6.0, &k1);
            v = v.axpy(h / 3.0, &k2);
            v = v.axpy(h / 3.0, &k3);
            v = v.axpy(h / 6.0, &k4);
            next.push(nu_next.project(&v)?);
        }
        frame = next;
        out.push(frame.clone());
    }
    Ok(out)
}
