//! Loop holonomy along a homotopy sheet and its derivative, computed two
//! independent ways: directly from parallel transport around the three-leg
//! path, and as a curvature integral along the sheet rows. Their agreement
//! is the crate's flagship cross-check.
//!
//! A sheet is a piecewise-smooth map `f(s, t)` on the unit square sampled on
//! a grid, with `f(s, 0)` pinned to a single base point and corners allowed
//! at declared `t` rows. Rows must be sampled densely enough for transport,
//! and the chart representative map must be smooth within each block (the
//! finite-difference stencils differentiate raw chart coordinates).

use super::CheckReport;
use crate::ambient::{DiscretizedCurve, Point, SpaceModel, TangentVector};
use crate::error::{GeomError, Result};
use crate::linalg::{Matrix, Vector};
use crate::transport_with_trace;
use rand::Rng;

#[derive(Clone)]
pub struct HomotopySheet {
    model: SpaceModel,
    /// `points[i][j] = f(s_i, t_j)` on uniform grids of `ns` by `nt` nodes.
    points: Vec<Vec<Vector>>,
    ns: usize,
    nt: usize,
    /// Interior `t` node indices where smoothness may fail.
    breakpoints: Vec<usize>,
    base: Point,
    /// Fixed orthonormal basis of the tangent space at the base point.
    basis: Vec<Vector>,
}

impl HomotopySheet {
    pub fn from_fn(
        model: SpaceModel,
        ns: usize,
        nt: usize,
        breakpoints: Vec<usize>,
        f: impl Fn(f64, f64) -> Vector,
    ) -> Result<Self> {
        if ns < 8 || nt < 8 {
            return Err(GeomError::InvalidParameter(
                "sheet grid needs at least 8x8 nodes".into(),
            ));
        }
        for b in &breakpoints {
            if *b == 0 || *b >= nt - 1 {
                return Err(GeomError::InvalidParameter(format!(
                    "breakpoint index {b} not interior"
                )));
            }
        }
        let mut points = Vec::with_capacity(ns);
        for i in 0..ns {
            let s = i as f64 / (ns - 1) as f64;
            let mut row = Vec::with_capacity(nt);
            for j in 0..nt {
                let t = j as f64 / (nt - 1) as f64;
                let p = f(s, t);
                model.check_point(&p)?;
                row.push(p);
            }
            points.push(row);
        }
        let base = Point {
            coords: points[0][0].clone(),
        };
        // the bottom edge must collapse to the base point
        for (i, row) in points.iter().enumerate() {
            let gap = row[0].sub(&base.coords).norm();
            if gap > 1e-9 * model.scale().max(1.0) {
                return Err(GeomError::InvalidParameter(format!(
                    "f(s, 0) wanders from the base point at row {i} (gap {gap:.3e})"
                )));
            }
        }
        let basis = model.tangent_basis(&base)?;
        let sheet = HomotopySheet {
            model,
            points,
            ns,
            nt,
            breakpoints,
            base,
            basis,
        };
        // validate transport resolution along every row and the top edge
        for i in 0..ns {
            sheet.row_curve(i)?;
        }
        sheet.edge_curve(ns - 1)?;
        Ok(sheet)
    }

    pub fn model(&self) -> &SpaceModel {
        &self.model
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Interior `s` indices where five-point stencils fit; the natural
    /// sample set for derivative comparisons.
    pub fn interior_s_indices(&self, count: usize) -> Vec<usize> {
        let lo = 2;
        let hi = self.ns - 3;
        let count = count.max(1);
        (0..count)
            .map(|k| lo + (hi - lo) * k / (count - 1).max(1))
            .collect()
    }

    fn row_curve(&self, i: usize) -> Result<DiscretizedCurve> {
        DiscretizedCurve::new(
            self.model.clone(),
            self.points[i].clone(),
            self.breakpoints.clone(),
        )
    }

    /// Top-edge curve from column 0 to column `i` at `t = 1`.
    fn edge_curve(&self, i: usize) -> Result<DiscretizedCurve> {
        let samples: Vec<Vector> = (0..=i)
            .map(|k| self.points[k][self.nt - 1].clone())
            .collect();
        if samples.len() < 2 {
            // degenerate edge of length zero
            return DiscretizedCurve::new(
                self.model.clone(),
                vec![samples[0].clone(), samples[0].clone()],
                Vec::new(),
            );
        }
        DiscretizedCurve::new(self.model.clone(), samples, Vec::new())
    }

    /// Smooth `t` blocks as inclusive index ranges.
    fn blocks(&self) -> Vec<(usize, usize)> {
        let mut cuts = vec![0usize];
        cuts.extend(self.breakpoints.iter().copied());
        cuts.push(self.nt - 1);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Five-point first-derivative stencils at fourth order on a uniform grid.
/// `values` must hold at least five entries; `pos` is the node index inside
/// the slice, and `h` the grid spacing.
fn stencil_derivative(values: &[Vector], pos: usize, h: f64) -> Vector {
    let n = values.len();
    debug_assert!(n >= 5);
    let combine = |idx: [usize; 5], w: [f64; 5]| -> Vector {
        let mut out = Vector::zeros(values[0].len());
        for (i, c) in idx.iter().zip(&w) {
            out = out.axpy(c / (12.0 * h), &values[*i]);
        }
        out
    };
    if pos >= 2 && pos + 2 < n {
        combine(
            [pos - 2, pos - 1, pos, pos + 1, pos + 2],
            [1.0, -8.0, 0.0, 8.0, -1.0],
        )
    } else if pos == 0 {
        combine([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0])
    } else if pos == 1 {
        combine([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0])
    } else if pos + 1 == n {
        combine(
            [n - 5, n - 4, n - 3, n - 2, n - 1],
            [3.0, -16.0, 36.0, -48.0, 25.0],
        )
    } else {
        // pos == n - 2
        combine(
            [n - 5, n - 4, n - 3, n - 2, n - 1],
            [-1.0, 6.0, -18.0, 10.0, 3.0],
        )
    }
}

/// Composite quadrature at fourth order on a uniform grid: Simpson pairs
/// with a 3/8 tail when the interval count is odd.
fn integrate_block(values: &[f64], h: f64) -> f64 {
    let n_int = values.len() - 1;
    if n_int == 0 {
        return 0.0;
    }
    if n_int == 1 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let mut total = 0.0;
    let simpson_end = if n_int.is_multiple_of(2) {
        n_int
    } else {
        n_int - 3
    };
    let mut k = 0;
    while k + 2 <= simpson_end {
        total += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
        k += 2;
    }
    if !n_int.is_multiple_of(2) {
        if n_int >= 3 {
            let a = n_int - 3;
            total += 3.0 * h / 8.0
                * (values[a] + 3.0 * values[a + 1] + 3.0 * values[a + 2] + values[a + 3]);
        } else {
            total += 0.5 * h * (values[n_int - 1] + values[n_int]);
        }
    }
    total
}

/// Orthogonal transformation of the base tangent space obtained by parallel
/// transport along `f(0, .)` up, along the top edge to column `s_index`, and
/// backwards along `f(s_index, .)`. Expressed in the sheet's fixed basis.
pub fn holonomy_direct(sheet: &HomotopySheet, s_index: usize) -> Result<Matrix> {
    if s_index >= sheet.ns {
        return Err(GeomError::InvalidParameter(format!(
            "s index {s_index} out of range"
        )));
    }
    let mut vectors: Vec<Vector> = sheet.basis.to_vec();
    let leg1 = sheet.row_curve(0)?;
    vectors = transport_with_trace(&leg1, &vectors)?.pop().unwrap();
    if s_index > 0 {
        let leg2 = sheet.edge_curve(s_index)?;
        vectors = transport_with_trace(&leg2, &vectors)?.pop().unwrap();
    }
    let leg3 = sheet.row_curve(s_index)?.reversed();
    vectors = transport_with_trace(&leg3, &vectors)?.pop().unwrap();
    Ok(matrix_in_basis(sheet, &vectors))
}

fn matrix_in_basis(sheet: &HomotopySheet, vectors: &[Vector]) -> Matrix {
    let form = sheet.model.form();
    let d = sheet.basis.len();
    let mut m = Matrix::zeros(d, d);
    for (l, v) in vectors.iter().enumerate() {
        for (k, b) in sheet.basis.iter().enumerate() {
            *m.at_mut(k, l) = form.inner(v, b);
        }
    }
    m
}

/// Holonomy matrices at every `s` node, sharing the expensive legs.
pub fn holonomy_all(sheet: &HomotopySheet) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(sheet.ns);
    let leg1 = sheet.row_curve(0)?;
    let top: Vec<Vector> = transport_with_trace(&leg1, &sheet.basis)?.pop().unwrap();
    // walk the top edge incrementally
    let mut along_top = top;
    for i in 0..sheet.ns {
        if i > 0 {
            let seg = DiscretizedCurve::new(
                sheet.model.clone(),
                vec![
                    sheet.points[i - 1][sheet.nt - 1].clone(),
                    sheet.points[i][sheet.nt - 1].clone(),
                ],
                Vec::new(),
            )?;
            along_top = transport_with_trace(&seg, &along_top)?.pop().unwrap();
        }
        let leg3 = sheet.row_curve(i)?.reversed();
        let back = transport_with_trace(&leg3, &along_top)?.pop().unwrap();
        out.push(matrix_in_basis(sheet, &back));
    }
    Ok(out)
}

/// Entry `<A(s) u, w>` of the holonomy derivative as a curvature integral
/// along the row `s`: the integrand pairs `R(df/ds, df/dt)` applied to the
/// parallel field with value `u` at the base against the one with value `w`.
pub fn holonomy_derivative_integral(
    sheet: &HomotopySheet,
    s_index: usize,
    u: &TangentVector,
    w: &TangentVector,
) -> Result<f64> {
    if !sheet.model.same_point(&u.base, &sheet.base)
        || !sheet.model.same_point(&w.base, &sheet.base)
    {
        return Err(GeomError::BasePointMismatch);
    }
    let m = holonomy_derivative_matrix(sheet, s_index)?;
    // expand u, w over the basis
    let form = sheet.model.form();
    let d = sheet.basis.len();
    let mut total = 0.0;
    for l in 0..d {
        let cu = form.inner(&u.dir, &sheet.basis[l]);
        if cu == 0.0 {
            continue;
        }
        for k in 0..d {
            let cw = form.inner(&w.dir, &sheet.basis[k]);
            total += cu * cw * m.at(k, l);
        }
    }
    Ok(total)
}

/// Full integral-side derivative matrix `A(s)` in the sheet basis.
#[allow(clippy::needless_range_loop)]
pub fn holonomy_derivative_matrix(sheet: &HomotopySheet, s_index: usize) -> Result<Matrix> {
    if s_index < 2 || s_index + 2 >= sheet.ns {
        return Err(GeomError::InvalidParameter(format!(
            "s index {s_index} too close to the sheet edge for the stencil"
        )));
    }
    let model = &sheet.model;
    let nt = sheet.nt;
    let hs = 1.0 / (sheet.ns - 1) as f64;
    let ht = 1.0 / (nt - 1) as f64;

    // parallel fields along the row: one per basis vector
    let row = sheet.row_curve(s_index)?;
    let fields = transport_with_trace(&row, &sheet.basis)?;

    // df/ds via the five-point cross-row stencil
    let mut fs = Vec::with_capacity(nt);
    for j in 0..nt {
        let column: Vec<Vector> = (s_index - 2..=s_index + 2)
            .map(|i| sheet.points[i][j].clone())
            .collect();
        let raw = stencil_derivative(&column, 2, hs);
        fs.push(model.tangency_project(&sheet.points[s_index][j], &raw));
    }

    let d = sheet.basis.len();
    let form = model.form();
    let mut a = Matrix::zeros(d, d);
    for (b0, b1) in sheet.blocks() {
        // df/dt inside the smooth block, one-sided at its edges
        let block_points: Vec<Vector> = (b0..=b1)
            .map(|j| sheet.points[s_index][j].clone())
            .collect();
        let mut integrand = vec![vec![vec![0.0; b1 - b0 + 1]; d]; d];
        for j in b0..=b1 {
            let raw = stencil_derivative(&block_points, j - b0, ht);
            let ft = model.tangency_project(&sheet.points[s_index][j], &raw);
            // R(fs, ft) applied to each parallel field
            for l in 0..d {
                let r = model.curvature_dir(&sheet.points[s_index][j], &fs[j], &ft, &fields[j][l]);
                for k in 0..d {
                    integrand[k][l][j - b0] = form.inner(&r, &fields[j][k]);
                }
            }
        }
        for k in 0..d {
            for l in 0..d {
                *a.at_mut(k, l) += integrate_block(&integrand[k][l], ht);
            }
        }
    }
    Ok(a)
}

/// Dual-oracle certification of the holonomy-derivative identity: compares
/// the curvature integral against the finite-difference derivative of the
/// directly transported holonomy, entry by entry, at the given `s` nodes.
pub fn verify_holonomy_lemma(
    sheet: &HomotopySheet,
    s_indices: &[usize],
    tol: f64,
) -> Result<CheckReport> {
    if s_indices.is_empty() {
        return Err(GeomError::EmptyInput("s sample indices"));
    }
    let taus = holonomy_all(sheet)?;
    let hs = 1.0 / (sheet.ns - 1) as f64;
    let d = sheet.basis.len();

    let mut worst = 0.0f64;
    let mut worst_loc = String::new();
    let mut max_skew = 0.0f64;
    let mut max_orth = 0.0f64;
    for &i in s_indices {
        if i < 2 || i + 2 >= sheet.ns {
            return Err(GeomError::InvalidParameter(format!(
                "s index {i} too close to the sheet edge"
            )));
        }
        // five-point derivative of the holonomy in s
        let mut tau_prime = Matrix::zeros(d, d);
        for (idx, c) in [(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)] {
            tau_prime = tau_prime.add(&taus[idx].scale(c / (12.0 * hs)));
        }
        let a_fd = tau_prime.mul(&taus[i].transpose());
        let a_int = holonomy_derivative_matrix(sheet, i)?;

        max_orth = max_orth.max(
            taus[i]
                .mul(&taus[i].transpose())
                .sub(&Matrix::identity(d))
                .max_abs(),
        );
        max_skew = max_skew.max(a_fd.add(&a_fd.transpose()).max_abs());
        max_skew = max_skew.max(a_int.add(&a_int.transpose()).max_abs());

        let diff = a_int.sub(&a_fd).max_abs();
        if diff > worst {
            worst = diff;
            worst_loc = format!("s index {i}");
        }
    }
    let rep = CheckReport::evaluate("holonomy_lemma", worst, tol, worst_loc)
        .with_note(format!("max skew-symmetry defect {max_skew:.3e}"))
        .with_note(format!("max orthogonality defect {max_orth:.3e}"));
    Ok(rep)
}

/// Random smooth sheet around a random base point: `f(s, t) = exp_p(t B(s, t))`
/// with a low-frequency tangent-valued polynomial `B`. Amplitudes are sized
/// for desk-scale grids (consecutive samples stay within the transport step
/// bound on 64-node grids).
pub fn random_smooth_sheet(
    model: &SpaceModel,
    ns: usize,
    nt: usize,
    amplitude: f64,
    rng: &mut impl Rng,
) -> Result<HomotopySheet> {
    let p = model.random_point(rng);
    let dirs: Vec<Vector> = (0..4).map(|_| model.random_tangent(&p, rng).dir).collect();
    let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..1.0)).collect();
    let pc = p.clone();
    let model_inner = model.clone();
    let pi = std::f64::consts::PI;
    HomotopySheet::from_fn(model.clone(), ns, nt, Vec::new(), move |s, t| {
        let mut b = Vector::zeros(model_inner.chart_dim());
        b = b.axpy(amplitude * coeffs[0] * (pi * s).sin(), &dirs[0]);
        b = b.axpy(0.6 * amplitude * coeffs[1] * (pi * s).cos(), &dirs[1]);
        b = b.axpy(0.2 * amplitude * coeffs[2] * (2.0 * pi * s).sin(), &dirs[2]);
        b = b.axpy(
            0.3 * amplitude * coeffs[3] * (pi * t).cos() * (pi * s).sin(),
            &dirs[3],
        );
        let tv = TangentVector {
            base: pc.clone(),
            dir: b,
        };
        model_inner.exp_map(&tv, t).unwrap().coords
    })
}

/// Sheet made of a loop swept at rate `s` followed by a normal geodesic:
/// `f(s, t) = loop(2 s t)` for `t <= 1/2` and `exp((2t - 1) xi(s))` above,
/// with the corner row declared as a breakpoint. `nt` must be odd so the
/// corner lies on a grid node.
pub fn loop_normal_sheet(
    model: &SpaceModel,
    loop_points: impl Fn(f64) -> Vector,
    normal_field: impl Fn(f64) -> Vector,
    ns: usize,
    nt: usize,
) -> Result<HomotopySheet> {
    if nt.is_multiple_of(2) {
        return Err(GeomError::InvalidParameter(
            "nt must be odd so the corner sits on a grid node".into(),
        ));
    }
    let model_inner = model.clone();
    let sheet = HomotopySheet::from_fn(model.clone(), ns, nt, vec![(nt - 1) / 2], move |s, t| {
        if t <= 0.5 {
            loop_points(2.0 * s * t)
        } else {
            let base = loop_points(s);
            let tv = TangentVector {
                base: Point {
                    coords: base.clone(),
                },
                dir: normal_field(s),
            };
            model_inner.exp_map(&tv, 2.0 * t - 1.0).unwrap().coords
        }
    })?;
    Ok(sheet)
}
