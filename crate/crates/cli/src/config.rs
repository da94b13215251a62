use std::path::Path;

use majda_core::model::{self, ModelParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_FEASIBLE_RADIUS: f64 = 1e5;
/// Contour radius for the Heaviside limit, which has no exclusion radius.
pub const ZERO_EA_RADIUS: f64 = 10.0;

fn default_nodes() -> usize {
    120
}

fn default_feasible() -> f64 {
    DEFAULT_FEASIBLE_RADIUS
}

/// Input of the single-point subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    #[serde(default)]
    pub params: ModelParams,
    /// Contour radius; the exclusion radius when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    /// First-quadrant contour nodes.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_feasible")]
    pub feasible_radius: f64,
}

impl Default for PointConfig {
    fn default() -> Self {
        Self { params: ModelParams::default(), radius: None, nodes: default_nodes(), feasible_radius: default_feasible() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QGrid {
    /// Only the string `"auto"`: the 25-point grid scaled to `q_max(u_plus)`.
    Auto(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// Use the `k` list as given.
    #[default]
    Explicit,
    /// `k = exp(ea / 2)`, keeping the reaction width roughly fixed.
    ExpHalfEa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ea: Vec<f64>,
    #[serde(default = "one")]
    pub k: Vec<f64>,
    #[serde(rename = "D", default = "one")]
    pub d: Vec<f64>,
    #[serde(default = "zero")]
    pub u_plus: Vec<f64>,
    #[serde(default = "u_ig")]
    pub u_ig: Vec<f64>,
    pub q: QGrid,
    #[serde(default)]
    pub k_rule: KRule,
    /// Fixed contour radius for every point instead of the exclusion radius.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_feasible")]
    pub feasible_radius: f64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn zero() -> Vec<f64> {
    vec![0.0]
}

fn u_ig() -> Vec<f64> {
    vec![0.1]
}

/// Parameters shared by one continuation chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    pub k: Option<f64>,
    pub d: f64,
    pub u_plus: f64,
    pub u_ig: f64,
}

impl SweepConfig {
    /// Structural checks; invalid physics is recorded per point instead.
    pub fn check(&self) -> Result<(), CliError> {
        let lists: [(&str, &Vec<f64>); 5] =
            [("ea", &self.ea), ("k", &self.k), ("D", &self.d), ("u_plus", &self.u_plus), ("u_ig", &self.u_ig)];
        for (name, v) in lists {
            if v.is_empty() {
                return Err(CliError::Validation(format!("sweep grid `{name}` is empty")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Validation(format!("sweep grid `{name}` has a non-finite entry")));
            }
        }
        match &self.q {
            QGrid::Auto(s) if s != "auto" => {
                return Err(CliError::Validation(format!("q grid must be a list or \"auto\", got {s:?}")))
            }
            QGrid::List(v) if v.is_empty() || v.iter().any(|x| !x.is_finite()) => {
                return Err(CliError::Validation("q grid must be nonempty and finite".into()))
            }
            _ => {}
        }
        if self.nodes < 8 {
            return Err(CliError::Validation(format!("nodes = {} is below 8", self.nodes)));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::Validation(format!("radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn families(&self) -> Vec<Family> {
        let ks: Vec<Option<f64>> = match self.k_rule {
            KRule::Explicit => self.k.iter().map(|&k| Some(k)).collect(),
            KRule::ExpHalfEa => vec![None],
        };
        let mut out = Vec::new();
        for &k in &ks {
            for &d in &self.d {
                for &u_plus in &self.u_plus {
                    for &u_ig in &self.u_ig {
                        out.push(Family { k, d, u_plus, u_ig });
                    }
                }
            }
        }
        out
    }

    pub fn q_values(&self, u_plus: f64) -> Vec<f64> {
        let mut q = match &self.q {
            QGrid::Auto(_) => model::q_grid(u_plus),
            QGrid::List(v) => v.clone(),
        };
        q.sort_by(f64::total_cmp);
        q
    }

    /// Points of a family: `ea` ascending, then `q` ascending.
    pub fn family_points(&self, f: &Family) -> Vec<ModelParams> {
        let mut eas = self.ea.clone();
        eas.sort_by(f64::total_cmp);
        let qs = self.q_values(f.u_plus);
        let mut out = Vec::with_capacity(eas.len() * qs.len());
        for &ea in &eas {
            let k = f.k.unwrap_or_else(|| (ea / 2.0).exp());
            for &q in &qs {
                out.push(ModelParams { q, k, d: f.d, ea, u_plus: f.u_plus, u_ig: f.u_ig });
            }
        }
        out
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_grid_matches_table() {
        let cfg: SweepConfig = serde_json::from_str(r#"{"ea": [1], "q": "auto"}"#).unwrap();
        cfg.check().unwrap();
        assert_eq!(cfg.q_values(0.0), model::Q_GRID.to_vec());
        let bad: SweepConfig = serde_json::from_str(r#"{"ea": [1], "q": "all"}"#).unwrap();
        assert!(bad.check().is_err());
    }

    #[test]
    fn exp_half_rule_sets_k() {
        let cfg: SweepConfig =
            serde_json::from_str(r#"{"ea": [4, 2], "q": [0.3, 0.1], "k_rule": "exp_half_ea", "k": [7]}"#).unwrap();
        let fams = cfg.families();
        assert_eq!(fams.len(), 1);
        let pts = cfg.family_points(&fams[0]);
        let got: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.ea, p.q, p.k)).collect();
        assert_eq!(got, vec![(2.0, 0.1, 1f64.exp()), (2.0, 0.3, 1f64.exp()), (4.0, 0.1, 2f64.exp()), (4.0, 0.3, 2f64.exp())]);
    }

    #[test]
    fn point_config_defaults() {
        let cfg: PointConfig = serde_json::from_str(r#"{"params": {"q": 0.3, "k": 1, "D": 1, "ea": 2, "u_plus": 0, "u_ig": 0.1}}"#).unwrap();
        assert_eq!(cfg.nodes, 120);
        assert_eq!(cfg.radius, None);
        assert_eq!(cfg.params.ea, 2.0);
    }
}
