//! Symmetric ambient-space models: exact metric, curvature tensor, geodesics
//! and parallel transport in explicit charts.
//!
//! Chart conventions:
//! - `Euclidean(n)`: plain coordinates.
//! - `Sphere(n, r)`: `n+1` coordinates with `|x| = r`.
//! - `Hyperbolic(n, r)`: hyperboloid sheet in Minkowski coordinates
//!   `(x_0, ..., x_n)` with `<x,x> = -x_0^2 + sum x_i^2 = -r^2`, `x_0 > 0`.
//! - `ComplexProjective(n, c)`: unit representative `z` of the class `[z]`,
//!   stored as interleaved real pairs `(Re z_k, Im z_k)`; tangent vectors are
//!   horizontal (orthogonal to both `z` and `iz`). The metric is the chart
//!   dot product scaled by `4/c`, which pins the holomorphic sectional
//!   curvature to `c`.
//! - `Product`: concatenation of the factor charts.

mod transport;

pub use transport::{parallel_transport, transport_frame, transport_with_trace, DiscretizedCurve};

use crate::error::{GeomError, Result};
use crate::linalg::{orthonormalize, Form, Subspace, Tolerance, Vector};
use rand::Rng;

/// Fixed-step transport/integration resolution: steps per unit arc length.
pub const STEPS_PER_UNIT: f64 = 512.0;

/// Constraint-validation slack for user-supplied points.
pub const POINT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum SpaceModel {
    Euclidean {
        dim: usize,
    },
    Sphere {
        dim: usize,
        radius: f64,
    },
    Hyperbolic {
        dim: usize,
        radius: f64,
    },
    ComplexProjective {
        dim: usize,
        holomorphic_curvature: f64,
    },
    Product(Vec<SpaceModel>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vector,
}

#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: Point,
    pub dir: Vector,
}

impl TangentVector {
    pub fn norm(&self, model: &SpaceModel) -> f64 {
        model.form().norm(&self.dir)
    }
}

// complex-pair helpers for the projective chart (interleaved re/im)

pub(crate) fn mul_i(v: &Vector) -> Vector {
    let mut out = Vector::zeros(v.len());
    for k in 0..v.len() / 2 {
        out[2 * k] = -v[2 * k + 1];
        out[2 * k + 1] = v[2 * k];
    }
    out
}

/// Hermitian inner product `sum conj(a_k) b_k` as `(re, im)`.
pub(crate) fn herm_inner(a: &Vector, b: &Vector) -> (f64, f64) {
    (a.dot(b), mul_i(a).dot(b))
}

/// Multiplication by `e^{i theta}` on interleaved pairs.
pub(crate) fn phase_rotate(v: &Vector, theta: f64) -> Vector {
    let (c, s) = (theta.cos(), theta.sin());
    let mut out = Vector::zeros(v.len());
    for k in 0..v.len() / 2 {
        let (x, y) = (v[2 * k], v[2 * k + 1]);
        out[2 * k] = c * x - s * y;
        out[2 * k + 1] = c * y + s * x;
    }
    out
}

impl SpaceModel {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(GeomError::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(SpaceModel::Euclidean { dim })
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim < 1 || !(radius > 0.0) {
            return Err(GeomError::InvalidParameter(
                "sphere needs dim >= 1 and radius > 0".into(),
            ));
        }
        Ok(SpaceModel::Sphere { dim, radius })
    }

    pub fn hyperbolic(dim: usize, radius: f64) -> Result<Self> {
        if dim < 1 || !(radius > 0.0) {
            return Err(GeomError::InvalidParameter(
                "hyperbolic space needs dim >= 1 and radius > 0".into(),
            ));
        }
        Ok(SpaceModel::Hyperbolic { dim, radius })
    }

    /// `dim` is the complex dimension; the manifold dimension is `2 dim`.
    pub fn complex_projective(dim: usize, holomorphic_curvature: f64) -> Result<Self> {
        if dim < 1 || !(holomorphic_curvature > 0.0) {
            return Err(GeomError::InvalidParameter(
                "projective space needs dim >= 1 and positive holomorphic curvature".into(),
            ));
        }
        Ok(SpaceModel::ComplexProjective {
            dim,
            holomorphic_curvature,
        })
    }

    pub fn product(factors: Vec<SpaceModel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(GeomError::EmptyInput("product factors"));
        }
        Ok(SpaceModel::Product(factors))
    }

    /// Manifold dimension.
    pub fn dim(&self) -> usize {
        match self {
            SpaceModel::Euclidean { dim } => *dim,
            SpaceModel::Sphere { dim, .. } => *dim,
            SpaceModel::Hyperbolic { dim, .. } => *dim,
            SpaceModel::ComplexProjective { dim, .. } => 2 * dim,
            SpaceModel::Product(fs) => fs.iter().map(|f| f.dim()).sum(),
        }
    }

    /// Number of chart coordinates.
    pub fn chart_dim(&self) -> usize {
        match self {
            SpaceModel::Euclidean { dim } => *dim,
            SpaceModel::Sphere { dim, .. } => dim + 1,
            SpaceModel::Hyperbolic { dim, .. } => dim + 1,
            SpaceModel::ComplexProjective { dim, .. } => 2 * dim + 2,
            SpaceModel::Product(fs) => fs.iter().map(|f| f.chart_dim()).sum(),
        }
    }

    /// Characteristic metric length of the model, used to scale steps.
    pub fn scale(&self) -> f64 {
        match self {
            SpaceModel::Euclidean { .. } => 1.0,
            SpaceModel::Sphere { radius, .. } => *radius,
            SpaceModel::Hyperbolic { radius, .. } => *radius,
            SpaceModel::ComplexProjective {
                holomorphic_curvature,
                ..
            } => 2.0 / holomorphic_curvature.sqrt(),
            SpaceModel::Product(fs) => fs.iter().map(|f| f.scale()).fold(f64::INFINITY, f64::min),
        }
    }

    /// Maximum chart step allowed between consecutive curve samples.
    pub fn max_step(&self) -> f64 {
        0.011 * self.scale()
    }

    pub fn form(&self) -> Form {
        match self {
            SpaceModel::Euclidean { dim } => Form::euclidean(*dim),
            SpaceModel::Sphere { dim, .. } => Form::euclidean(dim + 1),
            SpaceModel::Hyperbolic { dim, .. } => Form::minkowski(dim + 1),
            SpaceModel::ComplexProjective {
                dim,
                holomorphic_curvature,
            } => Form::scaled(2 * dim + 2, 4.0 / holomorphic_curvature),
            SpaceModel::Product(fs) => {
                Form::concat(&fs.iter().map(|f| f.form()).collect::<Vec<_>>())
            }
        }
    }

    pub fn kind_name(&self) -> String {
        match self {
            SpaceModel::Euclidean { .. } => "euclidean".into(),
            SpaceModel::Sphere { .. } => "sphere".into(),
            SpaceModel::Hyperbolic { .. } => "hyperbolic".into(),
            SpaceModel::ComplexProjective { .. } => "complex_projective".into(),
            SpaceModel::Product(_) => "product".into(),
        }
    }

    fn factor_offsets(fs: &[SpaceModel]) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(fs.len());
        let mut off = 0;
        for f in fs {
            let d = f.chart_dim();
            out.push((off, d));
            off += d;
        }
        out
    }

    fn block(v: &Vector, off: usize, len: usize) -> Vector {
        Vector::from_slice(&v.0[off..off + len])
    }

    fn scatter(dst: &mut Vector, src: &Vector, off: usize) {
        for i in 0..src.len() {
            dst[off + i] = src[i];
        }
    }

    /// Signed residual of the defining constraint; 0 on the model.
    pub fn constraint_residual(&self, coords: &Vector) -> f64 {
        match self {
            SpaceModel::Euclidean { .. } => 0.0,
            SpaceModel::Sphere { radius, .. } => (coords.norm() - radius).abs(),
            SpaceModel::Hyperbolic { radius, .. } => {
                let m = Form::minkowski(coords.len()).inner(coords, coords);
                (m + radius * radius).abs() / radius + if coords[0] > 0.0 { 0.0 } else { 1.0 }
            }
            SpaceModel::ComplexProjective { .. } => (coords.norm() - 1.0).abs(),
            SpaceModel::Product(fs) => {
                let mut worst = 0.0f64;
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    worst = worst.max(f.constraint_residual(&Self::block(coords, off, len)));
                }
                worst
            }
        }
    }

    pub fn check_point(&self, coords: &Vector) -> Result<()> {
        if coords.len() != self.chart_dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.chart_dim(),
                got: coords.len(),
            });
        }
        if !coords.is_finite() {
            return Err(GeomError::NonFinite("point coordinates"));
        }
        let r = self.constraint_residual(coords);
        if r > POINT_TOL * self.scale().max(1.0) {
            return Err(GeomError::OffManifold { residual: r });
        }
        Ok(())
    }

    pub fn point(&self, coords: Vector) -> Result<Point> {
        self.check_point(&coords)?;
        Ok(Point { coords })
    }

    /// Snaps nearby chart coordinates back onto the constraint set.
    pub fn project_point(&self, coords: &Vector) -> Result<Vector> {
        match self {
            SpaceModel::Euclidean { .. } => Ok(coords.clone()),
            SpaceModel::Sphere { radius, .. } => {
                let n = coords.norm();
                if n < 1e-12 {
                    return Err(GeomError::OffManifold { residual: *radius });
                }
                Ok(coords.scale(radius / n))
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let m = Form::minkowski(coords.len()).inner(coords, coords);
                if m >= -1e-12 || coords[0] <= 0.0 {
                    return Err(GeomError::OffManifold { residual: m.abs() });
                }
                Ok(coords.scale(radius / (-m).sqrt()))
            }
            SpaceModel::ComplexProjective { .. } => {
                let n = coords.norm();
                if n < 1e-12 {
                    return Err(GeomError::OffManifold { residual: 1.0 });
                }
                Ok(coords.scale(1.0 / n))
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(coords.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.project_point(&Self::block(coords, off, len))?;
                    Self::scatter(&mut out, &b, off);
                }
                Ok(out)
            }
        }
    }

    /// Chart derivative of the constraint projection at `at` applied to `v`.
    /// Lands exactly in the tangent space of `project_point(at)`.
    pub fn project_point_derivative(&self, at: &Vector, v: &Vector) -> Vector {
        match self {
            SpaceModel::Euclidean { .. } => v.clone(),
            SpaceModel::Sphere { radius, .. } => {
                let n = at.norm();
                v.axpy(-at.dot(v) / (n * n), at).scale(radius / n)
            }
            SpaceModel::ComplexProjective { .. } => {
                let n = at.norm();
                v.axpy(-at.dot(v) / (n * n), at).scale(1.0 / n)
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(at.len());
                let s2 = -mk.inner(at, at);
                let s = s2.sqrt();
                v.scale(radius / s)
                    .axpy(radius * mk.inner(at, v) / (s2 * s), at)
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(v.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.project_point_derivative(
                        &Self::block(at, off, len),
                        &Self::block(v, off, len),
                    );
                    Self::scatter(&mut out, &b, off);
                }
                out
            }
        }
    }

    /// Orthogonal projection of a chart vector onto the tangent space at `p`.
    /// For the projective chart this is the horizontal projection.
    pub fn tangency_project(&self, p: &Vector, w: &Vector) -> Vector {
        match self {
            SpaceModel::Euclidean { .. } => w.clone(),
            SpaceModel::Sphere { radius, .. } => w.axpy(-p.dot(w) / (radius * radius), p),
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(p.len());
                w.axpy(mk.inner(p, w) / (radius * radius), p)
            }
            SpaceModel::ComplexProjective { .. } => {
                let ip = mul_i(p);
                w.axpy(-p.dot(w), p).axpy(-ip.dot(w), &ip)
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(w.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b =
                        f.tangency_project(&Self::block(p, off, len), &Self::block(w, off, len));
                    Self::scatter(&mut out, &b, off);
                }
                out
            }
        }
    }

    pub fn tangency_residual(&self, p: &Vector, w: &Vector) -> f64 {
        let pw = self.tangency_project(p, w);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        w.sub(&pw).norm() / n
    }

    pub fn tangent(&self, base: Point, dir: Vector) -> Result<TangentVector> {
        self.check_point(&base.coords)?;
        if dir.len() != self.chart_dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.chart_dim(),
                got: dir.len(),
            });
        }
        let r = self.tangency_residual(&base.coords, &dir);
        if r > 1e-6 {
            return Err(GeomError::NotTangent { residual: r });
        }
        Ok(TangentVector { base, dir })
    }

    pub fn same_point(&self, a: &Point, b: &Point) -> bool {
        a.coords.sub(&b.coords).norm() <= 1e-9 * self.scale().max(1.0)
    }

    /// Riemannian metric on tangent vectors based at the same point.
    pub fn metric(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        if !self.same_point(&u.base, &v.base) {
            return Err(GeomError::BasePointMismatch);
        }
        Ok(self.form().inner(&u.dir, &v.dir))
    }

    /// Deterministic orthonormal basis of the tangent space at `p`.
    pub fn tangent_basis(&self, p: &Point) -> Result<Vec<Vector>> {
        self.check_point(&p.coords)?;
        let n = self.chart_dim();
        let form = self.form();
        let mut candidates = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            candidates.push(self.tangency_project(&p.coords, &e));
        }
        // largest projections first so the relative rank cutoff drops the
        // near-degenerate directions instead of anchoring on them
        candidates.sort_by(|a, b| form.norm(b).partial_cmp(&form.norm(a)).unwrap());
        let tol = Tolerance::default();
        let sub = orthonormalize(&candidates, &form, &tol)?;
        if sub.dim() != self.dim() {
            return Err(GeomError::RankDeficient {
                expected: self.dim(),
                found: sub.dim(),
                location: "tangent_basis".into(),
            });
        }
        Ok(sub.basis().to_vec())
    }

    /// Curvature tensor `R(x, y) z` as a tangent vector at the common base.
    ///
    /// Space forms use `k (<y,z> x - <x,z> y)` with `k = ±1/r^2`; the
    /// projective model uses the standard Kaehler curvature with holomorphic
    /// sectional curvature `c`; products act blockwise.
    pub fn curvature(
        &self,
        x: &TangentVector,
        y: &TangentVector,
        z: &TangentVector,
    ) -> Result<TangentVector> {
        if !self.same_point(&x.base, &y.base) || !self.same_point(&x.base, &z.base) {
            return Err(GeomError::BasePointMismatch);
        }
        let dir = self.curvature_dir(&x.base.coords, &x.dir, &y.dir, &z.dir);
        Ok(TangentVector {
            base: x.base.clone(),
            dir,
        })
    }

    /// Curvature tensor on raw chart coordinates; the tangent-vector wrapper
    /// [`SpaceModel::curvature`] adds base-point validation.
    pub fn curvature_dir(&self, p: &Vector, x: &Vector, y: &Vector, z: &Vector) -> Vector {
        match self {
            SpaceModel::Euclidean { dim } => Vector::zeros(*dim),
            SpaceModel::Sphere { radius, .. } => {
                let k = 1.0 / (radius * radius);
                let form = self.form();
                x.scale(k * form.inner(y, z)).axpy(-k * form.inner(x, z), y)
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let k = -1.0 / (radius * radius);
                let form = self.form();
                x.scale(k * form.inner(y, z)).axpy(-k * form.inner(x, z), y)
            }
            SpaceModel::ComplexProjective {
                holomorphic_curvature,
                ..
            } => {
                let c = *holomorphic_curvature;
                let form = self.form();
                let (jx, jy, jz) = (mul_i(x), mul_i(y), mul_i(z));
                let mut out = x.scale(form.inner(y, z));
                out = out.axpy(-form.inner(x, z), y);
                out = out.axpy(form.inner(&jy, z), &jx);
                out = out.axpy(-form.inner(&jx, z), &jy);
                out = out.axpy(-2.0 * form.inner(&jx, y), &jz);
                let _ = p;
                out.scale(c / 4.0)
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(self.chart_dim());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.curvature_dir(
                        &Self::block(p, off, len),
                        &Self::block(x, off, len),
                        &Self::block(y, off, len),
                        &Self::block(z, off, len),
                    );
                    Self::scatter(&mut out, &b, off);
                }
                out
            }
        }
    }

    /// Complex structure `J u` (projective model only).
    pub fn complex_structure(&self, u: &TangentVector) -> Result<TangentVector> {
        Ok(TangentVector {
            base: u.base.clone(),
            dir: self.complex_rotate(&u.dir)?,
        })
    }

    /// Multiplication by `i` on raw chart coordinates (projective model
    /// only).
    pub fn complex_rotate(&self, v: &Vector) -> Result<Vector> {
        match self {
            SpaceModel::ComplexProjective { .. } => Ok(mul_i(v)),
            other => Err(GeomError::WrongModel {
                expected: "complex_projective",
                got: other.kind_name(),
            }),
        }
    }

    /// Geodesic point `gamma(t)` with `gamma(0) = base`, `gamma'(0) = dir`.
    pub fn exp_map(&self, v: &TangentVector, t: f64) -> Result<Point> {
        let coords = self.exp_dir(&v.base.coords, &v.dir, t)?;
        Ok(Point { coords })
    }

    fn exp_dir(&self, p: &Vector, dir: &Vector, t: f64) -> Result<Vector> {
        match self {
            SpaceModel::Euclidean { .. } => Ok(p.axpy(t, dir)),
            SpaceModel::Sphere { radius, .. } => {
                let s = dir.norm();
                if s * t.abs() < 1e-300 {
                    return Ok(p.clone());
                }
                let theta = s * t / radius;
                Ok(p.scale(theta.cos()).axpy(theta.sin() * radius / s, dir))
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(p.len());
                let s = mk.inner(dir, dir).max(0.0).sqrt();
                if s * t.abs() < 1e-300 {
                    return Ok(p.clone());
                }
                let theta = s * t / radius;
                Ok(p.scale(theta.cosh()).axpy(theta.sinh() * radius / s, dir))
            }
            SpaceModel::ComplexProjective { .. } => {
                let s = dir.norm(); // chart angle rate
                if s * t.abs() < 1e-300 {
                    return Ok(p.clone());
                }
                let theta = s * t;
                Ok(p.scale(theta.cos()).axpy(theta.sin() / s, dir))
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(p.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.exp_dir(&Self::block(p, off, len), &Self::block(dir, off, len), t)?;
                    Self::scatter(&mut out, &b, off);
                }
                Ok(out)
            }
        }
    }

    /// Velocity `gamma'(t)` of the geodesic defined by `v`.
    pub fn geodesic_velocity(&self, v: &TangentVector, t: f64) -> Result<TangentVector> {
        let base = self.exp_map(v, t)?;
        let dir = self.velocity_dir(&v.base.coords, &v.dir, t)?;
        Ok(TangentVector { base, dir })
    }

    fn velocity_dir(&self, p: &Vector, dir: &Vector, t: f64) -> Result<Vector> {
        match self {
            SpaceModel::Euclidean { .. } => Ok(dir.clone()),
            SpaceModel::Sphere { radius, .. } => {
                let s = dir.norm();
                if s < 1e-300 {
                    return Ok(dir.clone());
                }
                let theta = s * t / radius;
                Ok(p.scale(-s * theta.sin() / radius).axpy(theta.cos(), dir))
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(p.len());
                let s = mk.inner(dir, dir).max(0.0).sqrt();
                if s < 1e-300 {
                    return Ok(dir.clone());
                }
                let theta = s * t / radius;
                Ok(p.scale(s * theta.sinh() / radius).axpy(theta.cosh(), dir))
            }
            SpaceModel::ComplexProjective { .. } => {
                let s = dir.norm();
                if s < 1e-300 {
                    return Ok(dir.clone());
                }
                let theta = s * t;
                Ok(p.scale(-s * theta.sin()).axpy(theta.cos(), dir))
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(p.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b =
                        f.velocity_dir(&Self::block(p, off, len), &Self::block(dir, off, len), t)?;
                    Self::scatter(&mut out, &b, off);
                }
                Ok(out)
            }
        }
    }

    /// Chart derivative of a parallel vector field along a curve through `c`
    /// with chart velocity `cv`: `v' = transport_rhs(c, cv, v)`.
    pub(crate) fn transport_rhs(&self, c: &Vector, cv: &Vector, v: &Vector) -> Vector {
        match self {
            SpaceModel::Euclidean { dim } => Vector::zeros(*dim),
            SpaceModel::Sphere { radius, .. } => c.scale(-v.dot(cv) / (radius * radius)),
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(c.len());
                c.scale(mk.inner(v, cv) / (radius * radius))
            }
            SpaceModel::ComplexProjective { .. } => {
                let ic = mul_i(c);
                let icv = mul_i(cv);
                c.scale(-v.dot(cv)).axpy(-v.dot(&icv), &ic)
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(c.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.transport_rhs(
                        &Self::block(c, off, len),
                        &Self::block(cv, off, len),
                        &Self::block(v, off, len),
                    );
                    Self::scatter(&mut out, &b, off);
                }
                out
            }
        }
    }

    /// Ambient covariant derivative of a vector field along a curve, given
    /// the raw chart derivative `raw` of the field, the field value, and the
    /// chart velocity of the curve. For the projective chart this includes
    /// the gauge correction for non-horizontal representative curves.
    pub fn covariant_field_derivative(
        &self,
        p: &Vector,
        velocity: &Vector,
        raw: &Vector,
        value: &Vector,
    ) -> Vector {
        match self {
            SpaceModel::Euclidean { .. } => raw.clone(),
            SpaceModel::Sphere { .. } | SpaceModel::Hyperbolic { .. } => {
                self.tangency_project(p, raw)
            }
            SpaceModel::ComplexProjective { .. } => {
                let vertical_rate = velocity.dot(&mul_i(p));
                let corrected = raw.axpy(-vertical_rate, &mul_i(value));
                self.tangency_project(p, &corrected)
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(p.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.covariant_field_derivative(
                        &Self::block(p, off, len),
                        &Self::block(velocity, off, len),
                        &Self::block(raw, off, len),
                        &Self::block(value, off, len),
                    );
                    Self::scatter(&mut out, &b, off);
                }
                out
            }
        }
    }

    /// Connecting geodesic data from `a` to `b` (samples must be close).
    /// Returns the initial velocity `v` with `exp(v, 1) = b'` where `b'` is
    /// `b` gauge-aligned to `a` in the projective chart, together with the
    /// applied gauge phase.
    pub(crate) fn connect(&self, a: &Vector, b: &Vector) -> Result<(Vector, f64)> {
        match self {
            SpaceModel::Euclidean { .. } => Ok((b.sub(a), 0.0)),
            SpaceModel::Sphere { radius, .. } => {
                let r = *radius;
                let cosv = (a.dot(b) / (r * r)).clamp(-1.0, 1.0);
                let theta = cosv.acos();
                if theta < 1e-14 {
                    return Ok((Vector::zeros(a.len()), 0.0));
                }
                if theta > std::f64::consts::FRAC_PI_2 {
                    return Err(GeomError::InvalidParameter(
                        "curve samples too far apart for a unique short geodesic".into(),
                    ));
                }
                let perp = b.axpy(-cosv, a);
                let pn = perp.norm();
                Ok((perp.scale(theta * r / pn), 0.0))
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let r = *radius;
                let mk = Form::minkowski(a.len());
                let coshv = (-mk.inner(a, b) / (r * r)).max(1.0);
                let theta = coshv.acosh();
                if theta < 1e-14 {
                    return Ok((Vector::zeros(a.len()), 0.0));
                }
                let perp = b.axpy(-coshv, a);
                let pn = mk.inner(&perp, &perp).max(0.0).sqrt();
                if pn < 1e-300 {
                    return Ok((Vector::zeros(a.len()), 0.0));
                }
                Ok((perp.scale(theta * r / pn), 0.0))
            }
            SpaceModel::ComplexProjective { .. } => {
                let (re, im) = herm_inner(a, b);
                let mag = (re * re + im * im).sqrt();
                if mag < 0.1 {
                    return Err(GeomError::InvalidParameter(
                        "curve samples too far apart in the projective chart".into(),
                    ));
                }
                let phase = -im.atan2(re);
                let aligned = phase_rotate(b, phase);
                let cosv = a.dot(&aligned).clamp(-1.0, 1.0);
                let theta = cosv.acos();
                if theta < 1e-14 {
                    return Ok((Vector::zeros(a.len()), phase));
                }
                let perp = aligned.axpy(-cosv, a);
                let pn = perp.norm();
                Ok((perp.scale(theta / pn), phase))
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(a.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let (v, _) = f.connect(&Self::block(a, off, len), &Self::block(b, off, len))?;
                    Self::scatter(&mut out, &v, off);
                }
                Ok((out, 0.0))
            }
        }
    }

    /// Closed-form parallel transport of `w` along the geodesic of `v` up to
    /// time `t`. Exact for every model; products act blockwise.
    pub fn geodesic_transport(
        &self,
        v: &TangentVector,
        t: f64,
        w: &TangentVector,
    ) -> Result<TangentVector> {
        if !self.same_point(&v.base, &w.base) {
            return Err(GeomError::BasePointMismatch);
        }
        let dir = self.geodesic_transport_dir(&v.base.coords, &v.dir, t, &w.dir)?;
        let base = self.exp_map(v, t)?;
        Ok(TangentVector { base, dir })
    }

    fn geodesic_transport_dir(
        &self,
        p: &Vector,
        gdir: &Vector,
        t: f64,
        w: &Vector,
    ) -> Result<Vector> {
        match self {
            SpaceModel::Euclidean { .. } => Ok(w.clone()),
            SpaceModel::Sphere { radius, .. } => {
                let s = gdir.norm();
                if s * t.abs() < 1e-300 {
                    return Ok(w.clone());
                }
                let u = gdir.scale(1.0 / s);
                let a = w.dot(&u);
                let theta = s * t / radius;
                let transported_u = u.scale(theta.cos()).axpy(-theta.sin() / radius, p);
                Ok(w.axpy(-a, &u).axpy(a, &transported_u))
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let mk = Form::minkowski(p.len());
                let s = mk.inner(gdir, gdir).max(0.0).sqrt();
                if s * t.abs() < 1e-300 {
                    return Ok(w.clone());
                }
                let u = gdir.scale(1.0 / s);
                let a = mk.inner(w, &u);
                let theta = s * t / radius;
                let transported_u = u.scale(theta.cosh()).axpy(theta.sinh() / radius, p);
                Ok(w.axpy(-a, &u).axpy(a, &transported_u))
            }
            SpaceModel::ComplexProjective { .. } => {
                let s = gdir.norm();
                if s * t.abs() < 1e-300 {
                    return Ok(w.clone());
                }
                let u = gdir.scale(1.0 / s);
                let iu = mul_i(&u);
                let a = w.dot(&u);
                let b = w.dot(&iu);
                let theta = s * t;
                // velocity direction and its J-partner stay parallel
                let tu = u.scale(theta.cos()).axpy(-theta.sin(), p);
                let tiu = mul_i(&tu);
                Ok(w.axpy(-a, &u).axpy(-b, &iu).axpy(a, &tu).axpy(b, &tiu))
            }
            SpaceModel::Product(fs) => {
                let mut out = Vector::zeros(p.len());
                for (f, (off, len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    let b = f.geodesic_transport_dir(
                        &Self::block(p, off, len),
                        &Self::block(gdir, off, len),
                        t,
                        &Self::block(w, off, len),
                    )?;
                    Self::scatter(&mut out, &b, off);
                }
                Ok(out)
            }
        }
    }

    /// Deterministic reference point of the model.
    pub fn base_point(&self) -> Point {
        let n = self.chart_dim();
        let coords = match self {
            SpaceModel::Euclidean { .. } => Vector::zeros(n),
            SpaceModel::Sphere { radius, .. } => {
                let mut c = Vector::zeros(n);
                c[n - 1] = *radius;
                c
            }
            SpaceModel::Hyperbolic { radius, .. } => {
                let mut c = Vector::zeros(n);
                c[0] = *radius;
                c
            }
            SpaceModel::ComplexProjective { .. } => {
                let mut c = Vector::zeros(n);
                c[0] = 1.0;
                c
            }
            SpaceModel::Product(fs) => {
                let mut c = Vector::zeros(n);
                for (f, (off, _len)) in fs.iter().zip(Self::factor_offsets(fs)) {
                    Self::scatter(&mut c, &f.base_point().coords, off);
                }
                c
            }
        };
        Point { coords }
    }

    pub fn random_point(&self, rng: &mut impl Rng) -> Point {
        let base = self.base_point();
        let dir = self.random_tangent(&base, rng).dir;
        let v = TangentVector { base, dir };
        self.exp_map(&v, 0.8).expect("exp from base point")
    }

    /// Random tangent vector at `p`, roughly unit length.
    pub fn random_tangent(&self, p: &Point, rng: &mut impl Rng) -> TangentVector {
        let n = self.chart_dim();
        let form = self.form();
        loop {
            let mut raw = Vector::zeros(n);
            for i in 0..n {
                raw[i] = rng.gen_range(-1.0..1.0);
            }
            let t = self.tangency_project(&p.coords, &raw);
            let nm = form.norm(&t);
            if nm > 1e-3 {
                return TangentVector {
                    base: p.clone(),
                    dir: t.scale(1.0 / nm),
                };
            }
        }
    }

    /// Random subspace of the tangent space at `p`.
    pub fn random_subspace(&self, p: &Point, dim: usize, rng: &mut impl Rng) -> Subspace {
        let form = self.form();
        loop {
            let vs: Vec<Vector> = (0..dim).map(|_| self.random_tangent(p, rng).dir).collect();
            let s = orthonormalize(&vs, &form, &Tolerance::default()).expect("orthonormalize");
            if s.dim() == dim {
                return s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s)
    }

    #[test]
    fn euclidean_metric_orthogonal() {
        let m = SpaceModel::euclidean(2).unwrap();
        let p = m.point(v(&[0.0, 0.0])).unwrap();
        let u = m.tangent(p.clone(), v(&[1.0, 0.0])).unwrap();
        let w = m.tangent(p, v(&[0.0, 1.0])).unwrap();
        assert_eq!(m.metric(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn sphere_metric_unit_tangent() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        let p = m.point(v(&[0.0, 0.0, 1.0])).unwrap();
        let u = m.tangent(p, v(&[1.0, 0.0, 0.0])).unwrap();
        assert!((m.metric(&u, &u).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_metric_restricts_minkowski_form() {
        // timelike coordinate first: base point (1, 0, 0)
        let m = SpaceModel::hyperbolic(2, 1.0).unwrap();
        let p = m.point(v(&[1.0, 0.0, 0.0])).unwrap();
        let u = m.tangent(p, v(&[0.0, 1.0, 0.0])).unwrap();
        assert!((m.metric(&u, &u).unwrap() - 1.0).abs() < 1e-15);

        // away from the base point the form stays positive on tangents
        let q_dir = v(&[0.0, 1.0, 0.0]);
        let base = m.point(v(&[1.0, 0.0, 0.0])).unwrap();
        let g = m
            .tangent(base, q_dir)
            .and_then(|tv| m.exp_map(&tv, 0.7))
            .unwrap();
        let w = m.tangency_project(&g.coords, &v(&[0.0, 0.3, -0.8]));
        let tv = m.tangent(g, w).unwrap();
        assert!(m.metric(&tv, &tv).unwrap() > 0.0);
    }

    #[test]
    fn euclidean_curvature_vanishes() {
        let m = SpaceModel::euclidean(3).unwrap();
        let p = m.point(v(&[0.1, 0.2, 0.3])).unwrap();
        let mut rng = Pcg64::seed_from_u64(7);
        let x = m.random_tangent(&p, &mut rng);
        let y = m.random_tangent(&p, &mut rng);
        let z = m.random_tangent(&p, &mut rng);
        let r = m.curvature(&x, &y, &z).unwrap();
        assert!(r.dir.norm() < 1e-15);
    }

    #[test]
    fn sphere_curvature_of_orthonormal_pair() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        let p = m.point(v(&[0.0, 0.0, 1.0])).unwrap();
        let e1 = m.tangent(p.clone(), v(&[1.0, 0.0, 0.0])).unwrap();
        let e2 = m.tangent(p, v(&[0.0, 1.0, 0.0])).unwrap();
        let r = m.curvature(&e1, &e2, &e2).unwrap();
        assert!(r.dir.sub(&e1.dir).norm() < 1e-14);
    }

    #[test]
    fn projective_holomorphic_curvature() {
        // c = 4, unit x: R(x, Jx)Jx = 4x
        let m = SpaceModel::complex_projective(2, 4.0).unwrap();
        let p = m.base_point();
        let mut rng = Pcg64::seed_from_u64(3);
        let x = m.random_tangent(&p, &mut rng);
        let jx = m.complex_structure(&x).unwrap();
        let r = m.curvature(&x, &jx, &jx).unwrap();
        assert!(r.dir.sub(&x.dir.scale(4.0)).norm() < 1e-12);
    }

    #[test]
    fn complex_structure_identities() {
        let m = SpaceModel::complex_projective(2, 4.0).unwrap();
        let p = m.base_point();
        let mut rng = Pcg64::seed_from_u64(11);
        let u = m.random_tangent(&p, &mut rng);
        let ju = m.complex_structure(&u).unwrap();
        let jju = m.complex_structure(&ju).unwrap();
        assert!(jju.dir.add(&u.dir).norm() < 1e-14);
        assert!(m.metric(&ju, &u).unwrap().abs() < 1e-14);
        assert!((m.metric(&ju, &ju).unwrap() - m.metric(&u, &u).unwrap()).abs() < 1e-14);
        // J only exists on the projective model
        let e = SpaceModel::euclidean(2).unwrap();
        let pe = e.point(v(&[0.0, 0.0])).unwrap();
        let ue = e.tangent(pe, v(&[1.0, 0.0])).unwrap();
        assert!(e.complex_structure(&ue).is_err());
    }

    #[test]
    fn exp_map_basics() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        let p = m.point(v(&[0.0, 0.0, 1.0])).unwrap();
        let u = m.tangent(p.clone(), v(&[1.0, 0.0, 0.0])).unwrap();
        assert!(m.same_point(&m.exp_map(&u, 0.0).unwrap(), &p));
        let antipode = m.exp_map(&u, std::f64::consts::PI).unwrap();
        assert!(antipode.coords.sub(&v(&[0.0, 0.0, -1.0])).norm() < 1e-12);

        let e = SpaceModel::euclidean(2).unwrap();
        let pe = e.point(v(&[0.0, 0.0])).unwrap();
        let ve = e.tangent(pe, v(&[1.0, 2.0])).unwrap();
        let q = e.exp_map(&ve, 1.0).unwrap();
        assert_eq!(q.coords, v(&[1.0, 2.0]));
    }

    #[test]
    fn geodesic_velocity_basics() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        let p = m.point(v(&[0.0, 0.0, 1.0])).unwrap();
        let u = m.tangent(p, v(&[0.7, 0.2, 0.0])).unwrap();
        let v0 = m.geodesic_velocity(&u, 0.0).unwrap();
        assert!(v0.dir.sub(&u.dir).norm() < 1e-15);
        let speed0 = u.norm(&m);
        for k in 1..5 {
            let vk = m.geodesic_velocity(&u, 0.3 * k as f64).unwrap();
            assert!((vk.norm(&m) - speed0).abs() < 1e-12);
            // velocity is tangent at the moved point
            assert!(m.tangency_residual(&vk.base.coords, &vk.dir) < 1e-12);
        }

        let e = SpaceModel::euclidean(3).unwrap();
        let pe = e.point(v(&[0.0, 0.0, 0.0])).unwrap();
        let ve = e.tangent(pe, v(&[1.0, -1.0, 0.5])).unwrap();
        let w = e.geodesic_velocity(&ve, 2.5).unwrap();
        assert_eq!(w.dir, ve.dir);
    }

    #[test]
    fn projective_exp_stays_on_constraint_and_moves_horizontally() {
        let m = SpaceModel::complex_projective(2, 4.0).unwrap();
        let p = m.base_point();
        let mut rng = Pcg64::seed_from_u64(5);
        let u = m.random_tangent(&p, &mut rng);
        for k in 0..6 {
            let t = 0.25 * k as f64;
            let q = m.exp_map(&u, t).unwrap();
            assert!(m.constraint_residual(&q.coords) < 1e-12);
            let vel = m.geodesic_velocity(&u, t).unwrap();
            assert!(m.tangency_residual(&vel.base.coords, &vel.dir) < 1e-12);
        }
    }

    #[test]
    fn product_model_blocks() {
        let m = SpaceModel::product(vec![
            SpaceModel::sphere(2, 1.0).unwrap(),
            SpaceModel::euclidean(1).unwrap(),
        ])
        .unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.chart_dim(), 4);
        let p = m.point(v(&[0.0, 0.0, 1.0, 0.5])).unwrap();
        let u = m.tangent(p.clone(), v(&[1.0, 0.0, 0.0, 2.0])).unwrap();
        let q = m.exp_map(&u, 1.0).unwrap();
        // euclidean block is affine
        assert!((q.coords[3] - 2.5).abs() < 1e-15);
        // sphere block stays on the sphere
        let sb = Vector::from_slice(&q.coords.0[0..3]);
        assert!((sb.norm() - 1.0).abs() < 1e-12);
        // curvature has no cross-block terms
        let x = m.tangent(p.clone(), v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let y = m.tangent(p.clone(), v(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        let z = m.tangent(p, v(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        let r = m.curvature(&x, &y, &z).unwrap();
        assert!(r.dir.norm() < 1e-15);
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_complete() {
        let mut rng = Pcg64::seed_from_u64(17);
        for m in [
            SpaceModel::euclidean(3).unwrap(),
            SpaceModel::sphere(3, 2.0).unwrap(),
            SpaceModel::hyperbolic(2, 1.0).unwrap(),
            SpaceModel::complex_projective(2, 4.0).unwrap(),
        ] {
            let p = m.random_point(&mut rng);
            let basis = m.tangent_basis(&p).unwrap();
            assert_eq!(basis.len(), m.dim());
            let form = m.form();
            for (i, a) in basis.iter().enumerate() {
                assert!(m.tangency_residual(&p.coords, a) < 1e-9);
                for (j, b) in basis.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((form.inner(a, b) - target).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn point_validation_rejects_off_manifold() {
        let m = SpaceModel::sphere(2, 1.0).unwrap();
        assert!(m.point(v(&[0.0, 0.0, 1.1])).is_err());
        assert!(m.point(v(&[0.0, 0.0, 1.0])).is_ok());
        let h = SpaceModel::hyperbolic(2, 1.0).unwrap();
        assert!(h.point(v(&[-1.0, 0.0, 0.0])).is_err());
    }
}
