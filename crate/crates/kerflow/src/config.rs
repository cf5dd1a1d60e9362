//! Experiment configuration: strict JSON schema, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kerflow_core::kernels::{ParamValue, Params};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { path, .. } => Some(path),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FlowLaws,
    BracketOrder,
    Compatibility,
    Froelich,
    CdualRep,
    LuscherMack,
    OsReconstruct,
    RpAxioms,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::FlowLaws,
        ExperimentKind::BracketOrder,
        ExperimentKind::Compatibility,
        ExperimentKind::Froelich,
        ExperimentKind::CdualRep,
        ExperimentKind::LuscherMack,
        ExperimentKind::OsReconstruct,
        ExperimentKind::RpAxioms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::FlowLaws => "flow_laws",
            ExperimentKind::BracketOrder => "bracket_order",
            ExperimentKind::Compatibility => "compatibility",
            ExperimentKind::Froelich => "froelich",
            ExperimentKind::CdualRep => "cdual_rep",
            ExperimentKind::LuscherMack => "luscher_mack",
            ExperimentKind::OsReconstruct => "os_reconstruct",
            ExperimentKind::RpAxioms => "rp_axioms",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamJson {
    Number(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamJson>,
}

impl KernelSpec {
    pub fn core_params(&self) -> Params {
        self.params
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    ParamJson::Number(x) => ParamValue::Number(*x),
                    ParamJson::List(xs) => ParamValue::List(xs.clone()),
                };
                (k.clone(), v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Affine,
    RightMultiplication,
}

/// Half-space chart `{x_axis > above}` or `{x_axis < below}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub axis: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub above: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
}

/// A builtin vector field, or an algebra element mapped through the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    /// Explicit scalar elements; matrix semigroups are sampled from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub dim: usize,
    pub half_width: f64,
    pub nodes: usize,
    #[serde(default = "two")]
    pub margin: usize,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    /// Number of random points drawn in `bounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Per-coordinate `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    /// Chebyshev points on `bounds[0]`, one model per rung.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chebyshev: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// A point of interest: the Fröhlich start point or the conjugation probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_cutoff: Option<f64>,
}

/// Expected outcomes checked against closed forms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<f64>,
    /// Semigroup eigenvalues `e^{−m t}` for these masses, descending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    /// Require the refinement curve to decrease strictly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decreasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub flow: f64,
    pub order_target: f64,
    pub order_band: f64,
    pub compatibility: f64,
    pub adjoint: f64,
    pub invariance: f64,
    pub symmetry: f64,
    pub froelich: f64,
    pub skew: f64,
    pub unitary: f64,
    pub psd: f64,
    pub generator: f64,
    pub star: f64,
    pub rank_ratio: f64,
    pub semigroup_value: f64,
    pub semigroup: f64,
    pub rp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flow: 1e-8,
            order_target: 2.0,
            order_band: 0.2,
            compatibility: 1e-10,
            adjoint: 1e-6,
            invariance: 1e-8,
            symmetry: 1e-8,
            froelich: 1e-3,
            skew: 1e-8,
            unitary: 1e-10,
            psd: 1e-10,
            generator: 1e-10,
            star: 1e-10,
            rank_ratio: 1e-10,
            semigroup_value: 1e-8,
            semigroup: 1e-8,
            rp: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupSpec>,
    #[serde(default)]
    pub sample: SampleSpec,
    #[serde(default)]
    pub expect: ExpectSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Parse, fill defaults and validate a config held in memory.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            String::from("$")
        } else {
            format!("$.{path}")
        };
        ConfigError::at(path, e.inner().to_string())
    })?;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

fn fill<T: Clone>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

impl ExperimentConfig {
    /// Insert the per-kind defaults for every sample parameter the
    /// experiment reads.
    pub fn fill_defaults(&mut self) {
        let s = &mut self.sample;
        match self.experiment {
            ExperimentKind::FlowLaws => {
                fill(&mut s.points, 10);
                fill(&mut s.t_max, 1.0);
                fill(&mut s.step, 1e-3);
            }
            ExperimentKind::BracketOrder => {
                fill(&mut s.points, 5);
                fill(&mut s.h_values, vec![1e-2, 5e-3, 2.5e-3]);
                fill(&mut s.step, 1e-3);
            }
            ExperimentKind::Compatibility => {
                fill(&mut s.t, 0.5);
                fill(&mut s.t_max, 0.5);
                fill(&mut s.step, 1e-3);
                fill(&mut s.points, 15);
            }
            ExperimentKind::Froelich => {
                fill(&mut s.bounds, vec![[-1.0, 1.0]]);
                fill(&mut s.ladder, vec![11, 21, 41]);
                fill(&mut s.t, 0.1);
                fill(&mut s.step, 1e-3);
                fill(&mut s.target, vec![0.0]);
                fill(&mut s.rank_cutoff, 1e-12);
            }
            ExperimentKind::CdualRep => {
                fill(&mut s.ladder, vec![9, 25, 81]);
                fill(&mut s.s, 0.2);
                fill(&mut s.t, 1.0);
                fill(&mut s.rank_cutoff, 1e-12);
            }
            ExperimentKind::LuscherMack => {
                fill(&mut s.rank_cutoff, 1e-12);
            }
            ExperimentKind::OsReconstruct => {
                fill(&mut s.radius, 0.15);
                fill(&mut s.times, vec![0.2, 0.3, 0.5]);
                fill(&mut s.axis, 0);
                fill(&mut s.rank_cutoff, kerflow_core::reflection::DEFAULT_OS_RANK_CUTOFF);
            }
            ExperimentKind::RpAxioms => {
                fill(&mut s.axis, 0);
                fill(&mut s.shifts, vec![1, 2, 3]);
            }
        }
        if let (ExperimentKind::OsReconstruct | ExperimentKind::RpAxioms, None) = (self.experiment, &s.grid) {
            s.grid = Some(GridSpec {
                dim: if self.experiment == ExperimentKind::RpAxioms {
                    2
                } else {
                    1
                },
                half_width: 4.0,
                nodes: if self.experiment == ExperimentKind::RpAxioms {
                    21
                } else {
                    161
                },
                margin: 2,
            });
        }
    }

    fn require<'a, T>(&self, slot: &'a Option<T>, path: &str) -> Result<&'a T, ConfigError> {
        slot.as_ref()
            .ok_or_else(|| ConfigError::at(path, format!("required for experiment `{}`", self.experiment)))
    }

    fn forbid<T>(&self, slot: &Option<T>, path: &str) -> Result<(), ConfigError> {
        if slot.is_some() {
            return Err(ConfigError::at(
                path,
                format!("not used by experiment `{}`", self.experiment),
            ));
        }
        Ok(())
    }

    /// Structural checks that do not need the numerical crate.
    pub fn validate(&self) -> Result<(), ConfigError> {
        use ExperimentKind::*;
        let k = self.experiment;
        let needs_kernel = matches!(k, Compatibility | Froelich | CdualRep | OsReconstruct);
        let needs_algebra = matches!(k, Compatibility | CdualRep | LuscherMack);
        let needs_action = matches!(k, Compatibility | CdualRep);
        let needs_fields = matches!(k, FlowLaws | BracketOrder | Froelich);
        if needs_kernel {
            self.require(&self.kernel, "$.kernel")?;
        } else {
            self.forbid(&self.kernel, "$.kernel")?;
        }
        if needs_algebra {
            self.require(&self.algebra, "$.algebra")?;
        } else if k != FlowLaws && k != BracketOrder {
            self.forbid(&self.algebra, "$.algebra")?;
        }
        if needs_action {
            self.require(&self.action, "$.action")?;
        } else if k != FlowLaws && k != BracketOrder {
            self.forbid(&self.action, "$.action")?;
        }
        if needs_fields {
            let fields = self.require(&self.fields, "$.fields")?;
            if fields.is_empty() {
                return Err(ConfigError::at("$.fields", "at least one field is required"));
            }
        } else {
            self.forbid(&self.fields, "$.fields")?;
        }
        if k == LuscherMack {
            self.require(&self.semigroup, "$.semigroup")?;
        } else {
            self.forbid(&self.semigroup, "$.semigroup")?;
        }
        if let Some(fields) = &self.fields {
            for (i, f) in fields.iter().enumerate() {
                let path = format!("$.fields[{i}]");
                match (&f.builtin, &f.element) {
                    (Some(_), None) => {}
                    (None, Some(_)) => {
                        if self.algebra.is_none() || self.action.is_none() {
                            return Err(ConfigError::at(
                                format!("{path}.element"),
                                "algebra elements need `algebra` and `action`",
                            ));
                        }
                    }
                    _ => return Err(ConfigError::at(path, "give exactly one of `builtin` and `element`")),
                }
            }
            if k == BracketOrder && fields.len() % 2 != 0 {
                return Err(ConfigError::at(
                    "$.fields",
                    "bracket_order takes fields in consecutive pairs",
                ));
            }
        }
        let s = &self.sample;
        if let Some(ladder) = &s.ladder {
            if ladder.is_empty() {
                return Err(ConfigError::at("$.sample.ladder", "ladder is empty"));
            }
            if ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::at(
                    "$.sample.ladder",
                    "refinement ladder is not increasing",
                ));
            }
            if ladder.contains(&0) {
                return Err(ConfigError::at("$.sample.ladder", "ladder sizes must be positive"));
            }
        }
        if let Some(h) = &s.h_values {
            if h.len() < 2 {
                return Err(ConfigError::at(
                    "$.sample.h_values",
                    "an order fit needs at least two values",
                ));
            }
            if h.iter().any(|v| !(*v > 0.0)) {
                return Err(ConfigError::at("$.sample.h_values", "values must be positive"));
            }
        }
        if let Some(step) = s.step {
            if !(step > 0.0) {
                return Err(ConfigError::at("$.sample.step", "step must be positive"));
            }
        }
        if let Some(bounds) = &s.bounds {
            if bounds.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(ConfigError::at("$.sample.bounds", "each range needs lo < hi"));
            }
        }
        if let Some(c) = s.rank_cutoff {
            if !(c > 0.0 && c < 1.0) {
                return Err(ConfigError::at("$.sample.rank_cutoff", "cutoff must lie in (0, 1)"));
            }
        }
        if k == OsReconstruct {
            let centers = self.require(&s.centers, "$.sample.centers")?;
            if centers.is_empty() {
                return Err(ConfigError::at(
                    "$.sample.centers",
                    "at least one test function is needed",
                ));
            }
            if s.times.as_ref().is_some_and(|t| t.iter().any(|v| *v < 0.0)) {
                return Err(ConfigError::at(
                    "$.sample.times",
                    "semigroup times must be non-negative",
                ));
            }
        }
        if let Some(g) = &s.grid {
            if !(g.dim == 1 || g.dim == 2) {
                return Err(ConfigError::at("$.sample.grid.dim", "grids are 1-D or 2-D"));
            }
            if k == OsReconstruct && g.dim != 1 {
                return Err(ConfigError::at("$.sample.grid.dim", "os_reconstruct uses 1-D grids"));
            }
        }
        if matches!(k, Compatibility | CdualRep) && s.bounds.is_none() {
            return Err(ConfigError::at(
                "$.sample.bounds",
                format!("required for experiment `{k}`"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_flow_laws_gets_defaults() {
        let c = parse_config_str(r#"{"experiment": "flow_laws", "fields": [{"builtin": "rotation"}]}"#).unwrap();
        assert_eq!(c.sample.step, Some(1e-3));
        assert_eq!(c.sample.t_max, Some(1.0));
        assert_eq!(c.sample.points, Some(10));
        assert_eq!(c.tolerances.flow, 1e-8);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = parse_config_str(r#"{"experiment": "flow_laws", "kernell": {}}"#).unwrap_err();
        assert_eq!(err.path(), Some("$.kernell"));
        let err = parse_config_str(
            r#"{"experiment": "flow_laws", "fields": [{"builtin": "rotation"}], "tolerances": {"flwo": 1}}"#,
        )
        .unwrap_err();
        assert_eq!(err.path(), Some("$.tolerances.flwo"));
    }

    #[test]
    fn decreasing_ladder_is_rejected() {
        let err = parse_config_str(
            r#"{"experiment": "froelich", "kernel": {"name": "gaussian_laplace"},
                "fields": [{"builtin": "translation", "dim": 1, "axis": 0}],
                "sample": {"ladder": [21, 11]}}"#,
        )
        .unwrap_err();
        assert_eq!(err.path(), Some("$.sample.ladder"));
        assert!(err.to_string().contains("not increasing"));
    }

    #[test]
    fn missing_and_extra_sections() {
        let err = parse_config_str(r#"{"experiment": "froelich", "fields": [{"builtin": "rotation"}]}"#).unwrap_err();
        assert_eq!(err.path(), Some("$.kernel"));
        let err = parse_config_str(r#"{"experiment": "rp_axioms", "kernel": {"name": "ou"}}"#).unwrap_err();
        assert_eq!(err.path(), Some("$.kernel"));
        let err = parse_config_str(r#"{"experiment": "bogus"}"#).unwrap_err();
        assert_eq!(err.path(), Some("$.experiment"));
    }

    #[test]
    fn config_echo_roundtrips() {
        let c = parse_config_str(r#"{"experiment": "rp_axioms", "seed": 3}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), c);
    }
}
