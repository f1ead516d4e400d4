//! Built-in spaces, immersions, bundles and scenarios, plus construction of
//! runnable geometry from a parsed scenario.

use crate::expr;
use crate::scenario::{BundleSpec, ImmersionSpec, Scenario, SpaceSpec};
use codim_core::frenet::{build_frenet_scenario, cp2_default_start_frame, ScenarioTols};
use codim_core::submanifold::{Immersion, NormalSubbundle};
use codim_core::{SpaceModel, Vector};
use std::collections::BTreeMap;

pub struct Geometry {
    pub space: SpaceModel,
    pub immersion: Immersion,
    pub bundle: NormalSubbundle,
    pub domain: Vec<(f64, f64)>,
}

pub const SPACE_KINDS: &[(&str, &str)] = &[
    ("euclidean", "flat space; fields: dim"),
    ("sphere", "round sphere; fields: dim, radius"),
    (
        "hyperbolic",
        "hyperboloid sheet in Minkowski coordinates; fields: dim, radius",
    ),
    (
        "complex_projective",
        "projective space of complex dimension `dim`; fields: dim, holomorphic_curvature",
    ),
    ("product", "product of factor models; fields: factors"),
];

pub const IMMERSIONS: &[(&str, &str)] = &[
    (
        "latitude_circle",
        "circle at polar angle `phi` inside the equatorial 2-sphere of a 3-sphere",
    ),
    (
        "cp1_circle",
        "circle at parameter `rho` inside a totally geodesic complex line of the projective plane",
    ),
    (
        "plane_circle",
        "circle of radius `radius` in a coordinate 2-plane of euclidean space",
    ),
    (
        "frenet_curve",
        "unit-speed curve integrated from constant curvatures `kappa1..`; params also: t_max, steps",
    ),
];

pub const BUNDLES: &[(&str, &str)] = &[
    (
        "meridian",
        "meridian direction field of `latitude_circle` (rank 1)",
    ),
    (
        "rotated_tangent",
        "complex rotation of the unit tangent (rank 1, projective spaces)",
    ),
    (
        "plane_radial",
        "radial direction of `plane_circle` inside its plane (rank 1)",
    ),
    (
        "mean_curvature_span",
        "span of the mean curvature vector and its normal derivative (rank 2, frenet_curve only)",
    ),
];

pub const SCENARIOS: &[(&str, &str, &str)] = &[
    (
        "sphere_circle_in_s3",
        "positive reduction instance: latitude circle in a 3-sphere with the meridian bundle",
        include_str!("../scenarios/sphere_circle_in_s3.toml"),
    ),
    (
        "cp1_circle_in_cp2",
        "positive reduction instance: circle in a complex line with the rotated-tangent bundle",
        include_str!("../scenarios/cp1_circle_in_cp2.toml"),
    ),
    (
        "cp2_frenet_counterexample",
        "curvature-invariance failure: unit-curvature curve in the projective plane",
        include_str!("../scenarios/cp2_frenet_counterexample.toml"),
    ),
    (
        "cp2_counterexample_in_s4",
        "the same curve data transplanted into a 4-sphere passes every hypothesis",
        include_str!("../scenarios/cp2_counterexample_in_s4.toml"),
    ),
    (
        "euclidean_erbacher",
        "flat positive instance: plane circle in 4-space with the radial bundle",
        include_str!("../scenarios/euclidean_erbacher.toml"),
    ),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    SCENARIOS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, text)| *text)
}

pub fn build_space(spec: &SpaceSpec) -> Result<SpaceModel, String> {
    let dim = spec.dim;
    let need_dim = || dim.ok_or_else(|| format!("space kind `{}` needs `dim`", spec.kind));
    match spec.kind.as_str() {
        "euclidean" => SpaceModel::euclidean(need_dim()?).map_err(|e| e.to_string()),
        "sphere" => {
            SpaceModel::sphere(need_dim()?, spec.radius.unwrap_or(1.0)).map_err(|e| e.to_string())
        }
        "hyperbolic" => SpaceModel::hyperbolic(need_dim()?, spec.radius.unwrap_or(1.0))
            .map_err(|e| e.to_string()),
        "complex_projective" => {
            SpaceModel::complex_projective(need_dim()?, spec.holomorphic_curvature.unwrap_or(4.0))
                .map_err(|e| e.to_string())
        }
        "product" => {
            let factors: Result<Vec<SpaceModel>, String> =
                spec.factors.iter().map(build_space).collect();
            SpaceModel::product(factors?).map_err(|e| e.to_string())
        }
        other => {
            let known: Vec<&str> = SPACE_KINDS.iter().map(|(n, _)| *n).collect();
            Err(format!(
                "unknown space kind `{other}`; known kinds: {}",
                known.join(", ")
            ))
        }
    }
}

fn param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> f64 {
    params.get(name).copied().unwrap_or(default)
}

pub fn build_geometry(scenario: &Scenario) -> Result<Geometry, String> {
    let space = build_space(&scenario.space)?;
    let ispec = &scenario.immersion;
    let bspec = &scenario.bundle;

    if let Some(name) = ispec.catalog.as_deref() {
        match name {
            "latitude_circle" => build_latitude_circle(space, ispec, bspec),
            "cp1_circle" => build_cp1_circle(space, ispec, bspec),
            "plane_circle" => build_plane_circle(space, ispec, bspec),
            "frenet_curve" => build_frenet_curve(space, ispec, bspec),
            other => {
                let known: Vec<&str> = IMMERSIONS.iter().map(|(n, _)| *n).collect();
                Err(format!(
                    "unknown immersion `{other}`; known immersions: {}",
                    known.join(", ")
                ))
            }
        }
    } else {
        build_expression_geometry(space, ispec, bspec)
    }
}

fn expect_bundle<'a>(
    bspec: &'a BundleSpec,
    allowed: &[&str],
    immersion_name: &str,
) -> Result<&'a str, String> {
    let name = bspec.catalog.as_deref().ok_or_else(|| {
        format!("immersion `{immersion_name}` needs a catalog bundle: {allowed:?}")
    })?;
    if allowed.contains(&name) {
        Ok(name)
    } else {
        let known: Vec<&str> = BUNDLES.iter().map(|(n, _)| *n).collect();
        Err(format!(
            "bundle `{name}` does not pair with `{immersion_name}` (allowed {allowed:?}; known bundles: {})",
            known.join(", ")
        ))
    }
}

fn build_latitude_circle(
    space: SpaceModel,
    ispec: &ImmersionSpec,
    bspec: &BundleSpec,
) -> Result<Geometry, String> {
    if !matches!(space, SpaceModel::Sphere { dim: 3, .. }) {
        return Err("`latitude_circle` lives in a 3-sphere".into());
    }
    let r = match space {
        SpaceModel::Sphere { radius, .. } => radius,
        _ => unreachable!(),
    };
    let phi = param(&ispec.params, "phi", std::f64::consts::FRAC_PI_4);
    let (sp, cp) = (phi.sin(), phi.cos());
    let immersion = Immersion::new(space.clone(), 1, move |u: &[f64]| {
        Vector::from_slice(&[r * sp * u[0].cos(), r * sp * u[0].sin(), r * cp, 0.0])
    })
    .with_jacobian(move |u: &[f64]| {
        vec![Vector::from_slice(&[
            -r * sp * u[0].sin(),
            r * sp * u[0].cos(),
            0.0,
            0.0,
        ])]
    });
    expect_bundle(bspec, &["meridian"], "latitude_circle")?;
    let bundle = NormalSubbundle::new(1, move |u: &[f64]| {
        vec![Vector::from_slice(&[
            cp * u[0].cos(),
            cp * u[0].sin(),
            -sp,
            0.0,
        ])]
    });
    Ok(Geometry {
        space,
        immersion,
        bundle,
        domain: ispec.domain.clone(),
    })
}

fn build_cp1_circle(
    space: SpaceModel,
    ispec: &ImmersionSpec,
    bspec: &BundleSpec,
) -> Result<Geometry, String> {
    if !matches!(space, SpaceModel::ComplexProjective { dim: 2, .. }) {
        return Err("`cp1_circle` lives in the projective plane".into());
    }
    let rho = param(&ispec.params, "rho", 0.6);
    let immersion = Immersion::new(space.clone(), 1, move |u: &[f64]| {
        let (su, cu) = u[0].sin_cos();
        Vector::from_slice(&[rho.cos(), 0.0, rho.sin() * cu, rho.sin() * su, 0.0, 0.0])
    })
    .with_jacobian(move |u: &[f64]| {
        let (su, cu) = u[0].sin_cos();
        vec![Vector::from_slice(&[
            0.0,
            0.0,
            -rho.sin() * su,
            rho.sin() * cu,
            0.0,
            0.0,
        ])]
    });
    expect_bundle(bspec, &["rotated_tangent"], "cp1_circle")?;
    let bundle = rotated_tangent_bundle(&space, &immersion);
    Ok(Geometry {
        space,
        immersion,
        bundle,
        domain: ispec.domain.clone(),
    })
}

fn rotated_tangent_bundle(space: &SpaceModel, immersion: &Immersion) -> NormalSubbundle {
    let sp = space.clone();
    let imm = immersion.clone();
    NormalSubbundle::new(1, move |u: &[f64]| {
        let p = imm.eval(u);
        let jac = imm
            .differential(u)
            .expect("catalog immersion keeps full rank");
        let e1 = sp.tangency_project(&p, &jac[0]);
        vec![sp
            .complex_rotate(&e1)
            .expect("rotated tangent needs a projective model")]
    })
}

fn build_plane_circle(
    space: SpaceModel,
    ispec: &ImmersionSpec,
    bspec: &BundleSpec,
) -> Result<Geometry, String> {
    let n = match space {
        SpaceModel::Euclidean { dim } if dim >= 2 => dim,
        _ => return Err("`plane_circle` lives in euclidean space of dimension >= 2".into()),
    };
    let radius = param(&ispec.params, "radius", 1.0);
    let immersion = Immersion::new(space.clone(), 1, move |u: &[f64]| {
        let mut c = Vector::zeros(n);
        c[0] = radius * u[0].cos();
        c[1] = radius * u[0].sin();
        c
    })
    .with_jacobian(move |u: &[f64]| {
        let mut c = Vector::zeros(n);
        c[0] = -radius * u[0].sin();
        c[1] = radius * u[0].cos();
        vec![c]
    });
    expect_bundle(bspec, &["plane_radial"], "plane_circle")?;
    let bundle = NormalSubbundle::new(1, move |u: &[f64]| {
        let mut c = Vector::zeros(n);
        c[0] = u[0].cos();
        c[1] = u[0].sin();
        vec![c]
    });
    Ok(Geometry {
        space,
        immersion,
        bundle,
        domain: ispec.domain.clone(),
    })
}

fn build_frenet_curve(
    space: SpaceModel,
    ispec: &ImmersionSpec,
    bspec: &BundleSpec,
) -> Result<Geometry, String> {
    expect_bundle(bspec, &["mean_curvature_span"], "frenet_curve")?;
    let d = space.dim();
    let mut kappas = Vec::with_capacity(d - 1);
    for i in 1..d {
        kappas.push(param(&ispec.params, &format!("kappa{i}"), 0.0));
    }
    let t_max = param(&ispec.params, "t_max", 2.0);
    let steps = param(&ispec.params, "steps", 4096.0) as usize;
    let (space, start, frame) = match &space {
        SpaceModel::ComplexProjective { dim: 2, .. } => cp2_default_start_frame(),
        other => {
            let start = other.base_point();
            let frame = other
                .tangent_basis(&start)
                .map_err(|e| format!("frame construction failed: {e}"))?;
            (other.clone(), start, frame)
        }
    };
    let scenario = build_frenet_scenario(
        space.clone(),
        start,
        frame,
        &kappas,
        t_max,
        steps,
        &ScenarioTols::default(),
    )
    .map_err(|e| format!("frame integration failed: {e}"))?;
    Ok(Geometry {
        space,
        immersion: scenario.immersion,
        bundle: scenario.bundle,
        domain: vec![(0.03 * t_max, 0.97 * t_max)],
    })
}

fn build_expression_geometry(
    space: SpaceModel,
    ispec: &ImmersionSpec,
    bspec: &BundleSpec,
) -> Result<Geometry, String> {
    let coords = ispec.coords.as_ref().expect("validated");
    if coords.len() != space.chart_dim() {
        return Err(format!(
            "immersion lists {} coordinate expression(s) for a chart of dimension {}",
            coords.len(),
            space.chart_dim()
        ));
    }
    let m = ispec.param_dim;
    let exprs: Result<Vec<expr::Expr>, String> = coords
        .iter()
        .map(|src| expr::parse(src, m, &ispec.params))
        .collect();
    let exprs = exprs?;
    let immersion = Immersion::new(space.clone(), m, move |u: &[f64]| {
        Vector(exprs.iter().map(|e| e.eval(u)).collect())
    });

    let frame_rows = bspec
        .frame
        .as_ref()
        .ok_or_else(|| "expression immersions need an expression bundle (`frame`)".to_string())?;
    let mut frame_exprs = Vec::with_capacity(frame_rows.len());
    for row in frame_rows {
        if row.len() != space.chart_dim() {
            return Err(format!(
                "bundle frame row lists {} expression(s) for a chart of dimension {}",
                row.len(),
                space.chart_dim()
            ));
        }
        let parsed: Result<Vec<expr::Expr>, String> = row
            .iter()
            .map(|src| expr::parse(src, m, &bspec.params))
            .collect();
        frame_exprs.push(parsed?);
    }
    let rank = frame_exprs.len();
    let bundle = NormalSubbundle::new(rank, move |u: &[f64]| {
        frame_exprs
            .iter()
            .map(|row| Vector(row.iter().map(|e| e.eval(u)).collect()))
            .collect()
    });
    Ok(Geometry {
        space,
        immersion,
        bundle,
        domain: ispec.domain.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_build() {
        for (name, _desc, text) in SCENARIOS {
            let scenario = Scenario::parse(text)
                .unwrap_or_else(|e| panic!("scenario {name} failed to parse: {e}"));
            assert_eq!(&scenario.name, name);
            // the counterexample scenarios integrate frames; keep this test
            // light by skipping their heavy construction here
            if scenario.immersion.catalog.as_deref() != Some("frenet_curve") {
                let geom = build_geometry(&scenario)
                    .unwrap_or_else(|e| panic!("scenario {name} failed to build: {e}"));
                let u0: Vec<f64> = geom.domain.iter().map(|(a, _)| *a).collect();
                geom.immersion.point(&u0).expect("image on the model");
            }
        }
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let text = r#"
name = "x"
[space]
kind = "moebius"
[immersion]
catalog = "latitude_circle"
domain = [[0.0, 1.0]]
[bundle]
catalog = "meridian"
[[checks]]
kind = "first_normal_contained"
"#;
        let scenario = Scenario::parse(text).unwrap();
        let err = match build_geometry(&scenario) {
            Err(e) => e,
            Ok(_) => panic!("bogus space kind was accepted"),
        };
        assert!(err.contains("known kinds"), "error was: {err}");
    }

    #[test]
    fn expression_geometry_evaluates() {
        let text = r#"
name = "custom"
[space]
kind = "euclidean"
dim = 3
[immersion]
coords = ["cos(u)", "sin(u)", "0"]
domain = [[0.0, 6.283185307179586]]
[bundle]
frame = [["cos(u1)", "sin(u1)", "0"]]
[[checks]]
kind = "first_normal_contained"
"#;
        let scenario = Scenario::parse(text).unwrap();
        let geom = build_geometry(&scenario).unwrap();
        let p = geom.immersion.eval(&[0.5]);
        assert!((p[0] - 0.5f64.cos()).abs() < 1e-15);
        assert_eq!(geom.bundle.rank(), 1);
    }
}
