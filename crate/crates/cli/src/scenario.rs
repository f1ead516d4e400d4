//! Scenario file schema. Scenarios are TOML documents naming an ambient
//! space, an immersion (catalog entry or coordinate expressions), a normal
//! bundle, and an ordered list of checks with optional expectations and
//! tolerance overrides.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub space: SpaceSpec,
    pub immersion: ImmersionSpec,
    pub bundle: BundleSpec,
    #[serde(default)]
    pub grids: GridSettings,
    pub checks: Vec<CheckSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub holomorphic_curvature: Option<f64>,
    /// Factors for product spaces.
    #[serde(default)]
    pub factors: Vec<SpaceSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    /// Catalog entry name; mutually exclusive with `coords`.
    #[serde(default)]
    pub catalog: Option<String>,
    /// Chart-coordinate expressions in `u1..un`.
    #[serde(default)]
    pub coords: Option<Vec<String>>,
    #[serde(default = "default_param_dim")]
    pub param_dim: usize,
    /// Per-parameter domain ranges.
    #[serde(default)]
    pub domain: Vec<(f64, f64)>,
    /// Named numeric parameters available to catalog builders and
    /// expressions.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn default_param_dim() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    #[serde(default)]
    pub catalog: Option<String>,
    /// Frame-vector expressions: one inner list of chart-coordinate
    /// expressions per frame field.
    #[serde(default)]
    pub frame: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    #[serde(default = "d_u_samples")]
    pub u_samples: usize,
    #[serde(default = "d_path_samples")]
    pub path_samples: usize,
    #[serde(default = "d_envelope_epsilon")]
    pub envelope_epsilon: f64,
    #[serde(default = "d_envelope_u_samples")]
    pub envelope_u_samples: usize,
    #[serde(default = "d_envelope_s_samples")]
    pub envelope_s_samples: usize,
    #[serde(default = "d_loops")]
    pub loops: usize,
    #[serde(default = "d_jacobi_ics")]
    pub jacobi_ics: usize,
    #[serde(default = "d_jacobi_t_max")]
    pub jacobi_t_max: f64,
    #[serde(default = "d_sheet_ns")]
    pub sheet_ns: usize,
    #[serde(default = "d_sheet_nt")]
    pub sheet_nt: usize,
    #[serde(default = "d_sheet_loop_amplitude")]
    pub sheet_loop_amplitude: f64,
}

fn d_u_samples() -> usize {
    17
}
fn d_path_samples() -> usize {
    33
}
fn d_envelope_epsilon() -> f64 {
    0.3
}
fn d_envelope_u_samples() -> usize {
    33
}
fn d_envelope_s_samples() -> usize {
    5
}
fn d_loops() -> usize {
    12
}
fn d_jacobi_ics() -> usize {
    20
}
fn d_jacobi_t_max() -> f64 {
    2.0
}
fn d_sheet_ns() -> usize {
    256
}
fn d_sheet_nt() -> usize {
    385
}
fn d_sheet_loop_amplitude() -> f64 {
    0.3
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            u_samples: d_u_samples(),
            path_samples: d_path_samples(),
            envelope_epsilon: d_envelope_epsilon(),
            envelope_u_samples: d_envelope_u_samples(),
            envelope_s_samples: d_envelope_s_samples(),
            loops: d_loops(),
            jacobi_ics: d_jacobi_ics(),
            jacobi_t_max: d_jacobi_t_max(),
            sheet_ns: d_sheet_ns(),
            sheet_nt: d_sheet_nt(),
            sheet_loop_amplitude: d_sheet_loop_amplitude(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub kind: String,
    #[serde(default = "default_expected")]
    pub expected: String,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_expected() -> String {
    "pass".to_string()
}

/// Known check kinds with their default tolerances.
pub const CHECK_KINDS: &[(&str, f64, &str)] = &[
    (
        "first_normal_contained",
        1e-6,
        "span of the second fundamental form lies inside the bundle",
    ),
    (
        "parallel_subbundle",
        1e-5,
        "bundle closed under the normal connection along the parameter path",
    ),
    (
        "curvature_invariant",
        1e-9,
        "tangent-plus-bundle span closed under the ambient curvature tensor",
    ),
    (
        "envelope_totally_geodesic",
        1e-4,
        "second fundamental form of the normal-exponential envelope vanishes",
    ),
    (
        "tangent_preservation",
        1e-4,
        "envelope tangent plane preserved by transport around grid loops",
    ),
    (
        "jacobi_containment",
        1e-4,
        "propagated fields stay inside the transported tangent-plus-bundle span",
    ),
    (
        "holonomy_lemma",
        1e-4,
        "holonomy derivative agrees with the curvature integral on a corner sheet",
    ),
];

pub fn default_tol_for(kind: &str) -> Option<f64> {
    CHECK_KINDS
        .iter()
        .find(|(name, _, _)| *name == kind)
        .map(|(_, tol, _)| *tol)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| format!("scenario parse error: {e}"))?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), String> {
        if self.checks.is_empty() {
            return Err("scenario declares no checks".into());
        }
        for check in &self.checks {
            if default_tol_for(&check.kind).is_none() {
                let known: Vec<&str> = CHECK_KINDS.iter().map(|(n, _, _)| *n).collect();
                return Err(format!(
                    "unknown check kind `{}`; known kinds: {}",
                    check.kind,
                    known.join(", ")
                ));
            }
            if check.expected != "pass" && check.expected != "fail" {
                return Err(format!(
                    "check `{}` expects `{}`; use `pass` or `fail`",
                    check.kind, check.expected
                ));
            }
            if let Some(t) = check.tol {
                if !(t > 0.0) {
                    return Err(format!("check `{}` has non-positive tolerance", check.kind));
                }
            }
        }
        if self.immersion.catalog.is_some() == self.immersion.coords.is_some() {
            return Err("immersion needs exactly one of `catalog` or `coords`".into());
        }
        if self.bundle.catalog.is_some() == self.bundle.frame.is_some() {
            return Err("bundle needs exactly one of `catalog` or `frame`".into());
        }
        if self.immersion.domain.len() != self.immersion.param_dim {
            return Err(format!(
                "domain lists {} range(s) for {} parameter(s)",
                self.immersion.domain.len(),
                self.immersion.param_dim
            ));
        }
        Ok(())
    }
}
