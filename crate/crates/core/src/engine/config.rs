//! Experiment configuration: a TOML document with one section per
//! experiment kind. Units are stated per key.

use super::EngineError;
use crate::allocation::{Access, ScaConfig, SmallCellScenario};
use crate::association::ProbeMode;
use crate::geometry::{massive_mimo_gain, Deployment, Region, TierConfig};
use crate::noma::{Complex64, MatrixParams, MpaConfig, NomaPair, Scheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AssociationSweep,
    AllocationSweep,
    LinkLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output files are named after this.
    pub name: String,
    pub kind: ExperimentKind,
    /// Master seed.
    pub seed: u64,
    /// Monte-Carlo trials per sweep point.
    pub trials: usize,
    /// Worker threads; 0 uses every core. Never affects results.
    #[serde(default)]
    pub workers: usize,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub noma: Option<NomaSection>,
    #[serde(default)]
    pub association: Option<AssociationSection>,
    #[serde(default)]
    pub tiers: Vec<TierSpec>,
    #[serde(default)]
    pub allocation: Option<AllocationSection>,
    #[serde(default)]
    pub link: Option<LinkSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// `density:<tier>` (association), `small_cells` (allocation) or
    /// `snr_db` (link level).
    pub variable: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NomaSection {
    pub scheme: Scheme,
    /// Power share of the far user, a_m.
    pub far_share: f64,
    /// Power share of the near user, a_n.
    pub near_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationSection {
    /// Window radius, meters.
    pub radius: f64,
    pub probe: ProbeMode,
    /// Always place one macro BS (tier 0) at the window centre.
    #[serde(default)]
    pub guaranteed_macro: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityLink {
    pub tier: String,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub name: String,
    /// dBm
    pub tx_power_dbm: f64,
    /// BSs per m²; may be omitted for the swept tier or when `follows` is set.
    #[serde(default)]
    pub density: Option<f64>,
    /// Density tied to another tier's (possibly swept) density.
    #[serde(default)]
    pub follows: Option<DensityLink>,
    /// Massive-MIMO array: gain (M - N + 1) / N.
    #[serde(default)]
    pub antennas: Option<u32>,
    #[serde(default)]
    pub streams: Option<u32>,
    #[serde(default = "default_alpha")]
    pub path_loss_exponent: f64,
}

fn default_alpha() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSection {
    pub scenario: SmallCellScenario,
    /// Quotas compared on common random instances.
    pub taus: Vec<usize>,
    pub access: Vec<Access>,
    #[serde(default = "default_sca_iters")]
    pub max_iters: usize,
    #[serde(default = "default_sca_tol")]
    pub tolerance: f64,
}

fn default_sca_iters() -> usize {
    ScaConfig::default().max_iters
}

fn default_sca_tol() -> f64 {
    ScaConfig::default().tolerance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    /// Resource blocks K.
    pub rows: usize,
    /// Layers N.
    pub cols: usize,
    /// Constellation order Q (2, 4 or 8).
    pub order: usize,
    /// SCMA column weight.
    #[serde(default)]
    pub column_weight: Option<usize>,
    /// PDMA patterns, one 0/1 list of length K per column.
    #[serde(default)]
    pub patterns: Option<Vec<Vec<u8>>>,
    /// MUSA pool search rounds.
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default = "default_mpa_iters")]
    pub mpa_iters: usize,
}

fn default_mpa_iters() -> usize {
    MpaConfig::default().max_iters
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> EngineError {
    EngineError::Config(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name", "must be a non-empty file stem"));
        }
        if self.trials < 1 {
            return Err(invalid("trials", "trials must be ≥ 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(invalid("sweep.values", "must not be empty"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep.values", "must be finite"));
        }
        if self.sweep.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sweep.values", "must be strictly increasing"));
        }
        let unused = |present: bool, key: &str| -> Result<(), EngineError> {
            if present {
                Err(invalid(key, format!("not used by kind {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::AssociationSweep => {
                unused(self.allocation.is_some(), "allocation")?;
                unused(self.link.is_some(), "link")?;
                self.noma_pair()?;
                self.deployment(self.sweep.values[0])?;
                for &v in &self.sweep.values {
                    self.deployment(v)?;
                }
            }
            ExperimentKind::AllocationSweep => {
                unused(self.association.is_some(), "association")?;
                unused(!self.tiers.is_empty(), "tiers")?;
                unused(self.link.is_some(), "link")?;
                unused(self.noma.is_some(), "noma")?;
                if self.sweep.variable != "small_cells" {
                    return Err(invalid("sweep.variable", "allocation sweeps use \"small_cells\""));
                }
                if self.sweep.values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(invalid("sweep.values", "small cell counts must be non-negative integers"));
                }
                let a = self.allocation.as_ref().ok_or_else(|| invalid("allocation", "missing section"))?;
                a.scenario.validate().map_err(|e| invalid("allocation.scenario", e))?;
                if a.taus.is_empty() || a.taus.contains(&0) {
                    return Err(invalid("allocation.taus", "need at least one quota, each ≥ 1"));
                }
                if a.access.is_empty() {
                    return Err(invalid("allocation.access", "must not be empty"));
                }
                if a.max_iters == 0 {
                    return Err(invalid("allocation.max_iters", "must be ≥ 1"));
                }
                if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
                    return Err(invalid("allocation.tolerance", "must be finite and ≥ 0"));
                }
            }
            ExperimentKind::LinkLevel => {
                unused(self.association.is_some(), "association")?;
                unused(!self.tiers.is_empty(), "tiers")?;
                unused(self.allocation.is_some(), "allocation")?;
                if self.sweep.variable != "snr_db" {
                    return Err(invalid("sweep.variable", "link-level sweeps use \"snr_db\""));
                }
                self.matrix_params()?;
                let l = self.link.as_ref().expect("checked by matrix_params");
                if l.mpa_iters == 0 {
                    return Err(invalid("link.mpa_iters", "must be ≥ 1"));
                }
                if ![2, 4, 8].contains(&l.order) {
                    return Err(invalid("link.order", "must be 2, 4 or 8"));
                }
            }
        }
        Ok(())
    }

    pub fn noma_pair(&self) -> Result<NomaPair, EngineError> {
        let n = self.noma.as_ref().ok_or_else(|| invalid("noma", "missing section"))?;
        NomaPair::new(0, 1, n.far_share, n.near_share).map_err(|e| invalid("noma.far_share", e))
    }

    /// Deployment at sweep value `value` (association sweeps).
    pub fn deployment(&self, value: f64) -> Result<Deployment, EngineError> {
        let section = self.association.as_ref().ok_or_else(|| invalid("association", "missing section"))?;
        let region = Region::centered(section.radius).map_err(|e| invalid("association.radius", e))?;
        if self.tiers.is_empty() {
            return Err(invalid("tiers", "at least one tier is required"));
        }
        let swept = self
            .sweep
            .variable
            .strip_prefix("density:")
            .ok_or_else(|| invalid("sweep.variable", "association sweeps use \"density:<tier>\""))?;
        if !self.tiers.iter().any(|t| t.name == swept) {
            return Err(invalid("sweep.variable", format!("no tier named {swept:?}")));
        }
        let mut densities: Vec<Option<f64>> = vec![None; self.tiers.len()];
        for (i, t) in self.tiers.iter().enumerate() {
            if self.tiers[..i].iter().any(|o| o.name == t.name) {
                return Err(invalid("tiers.name", format!("duplicate tier {:?}", t.name)));
            }
            let set = usize::from(t.density.is_some()) + usize::from(t.follows.is_some()) + usize::from(t.name == swept);
            if set != 1 {
                return Err(invalid(
                    &format!("tiers.{}.density", t.name),
                    "exactly one of density, follows, or being the swept tier is required",
                ));
            }
            if t.name == swept {
                densities[i] = Some(value);
            } else if let Some(d) = t.density {
                densities[i] = Some(d);
            }
        }
        for (i, t) in self.tiers.iter().enumerate() {
            if let Some(link) = &t.follows {
                let j = self
                    .tiers
                    .iter()
                    .position(|o| o.name == link.tier)
                    .ok_or_else(|| invalid(&format!("tiers.{}.follows.tier", t.name), "unknown tier"))?;
                let base = densities[j]
                    .filter(|_| self.tiers[j].follows.is_none())
                    .ok_or_else(|| invalid(&format!("tiers.{}.follows.tier", t.name), "chained links are not supported"))?;
                densities[i] = Some(base * link.factor);
            }
        }
        let mut tiers = Vec::with_capacity(self.tiers.len());
        for (t, d) in self.tiers.iter().zip(densities) {
            let mut cfg = TierConfig::new(t.name.clone(), t.tx_power_dbm, d.expect("filled above"))
                .with_path_loss_exponent(t.path_loss_exponent);
            match (t.antennas, t.streams) {
                (Some(m), Some(n)) => {
                    let gain = massive_mimo_gain(m, n).map_err(|e| invalid(&format!("tiers.{}.antennas", t.name), e))?;
                    cfg = cfg.with_array_gain(gain);
                }
                (None, None) => {}
                _ => return Err(invalid(&format!("tiers.{}.antennas", t.name), "antennas and streams go together")),
            }
            cfg.validate().map_err(|e| invalid(&format!("tiers.{}", t.name), e))?;
            tiers.push(cfg);
        }
        Ok(Deployment { region, tiers, guaranteed_macro: section.guaranteed_macro, user_density: 0.0 })
    }

    pub fn matrix_params(&self) -> Result<MatrixParams, EngineError> {
        let scheme = self.noma.as_ref().ok_or_else(|| invalid("noma", "missing section"))?.scheme;
        let l = self.link.as_ref().ok_or_else(|| invalid("link", "missing section"))?;
        Ok(match scheme {
            Scheme::PdNoma => MatrixParams::PdNoma,
            Scheme::Scma => MatrixParams::Scma {
                column_weight: l.column_weight.ok_or_else(|| invalid("link.column_weight", "required for SCMA"))?,
            },
            Scheme::Pdma => MatrixParams::Pdma {
                patterns: l.patterns.clone().ok_or_else(|| invalid("link.patterns", "required for PDMA"))?,
            },
            Scheme::Musa => MatrixParams::Musa {
                alphabet: [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                    .iter()
                    .map(|&(re, im)| Complex64::new(re, im))
                    .collect(),
                restarts: l.restarts.unwrap_or(8),
            },
        })
    }

    pub fn sca_config(&self) -> ScaConfig {
        self.allocation
            .as_ref()
            .map(|a| ScaConfig { max_iters: a.max_iters, tolerance: a.tolerance })
            .unwrap_or_default()
    }

    /// SHA-256 over the canonical JSON form with `output` and `workers`
    /// dropped, since neither changes results.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config is always serialisable");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
            map.remove("workers");
        }
        let canonical = serde_json::to_string(&value).expect("json value serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASSOC: &str = r#"
name = "t"
kind = "association_sweep"
seed = 1
trials = 10

[sweep]
variable = "density:pico"
values = [1e-5, 2e-5]

[noma]
scheme = "pd-noma"
far_share = 0.6
near_share = 0.4

[association]
radius = 300.0
probe = "uniform"
guaranteed_macro = true

[[tiers]]
name = "macro"
tx_power_dbm = 40.0
density = 1e-6
antennas = 200
streams = 15

[[tiers]]
name = "pico"
tx_power_dbm = 30.0

[[tiers]]
name = "femto"
tx_power_dbm = 20.0
follows = { tier = "pico", factor = 5.0 }
"#;

    #[test]
    fn parses_and_resolves_densities() {
        let cfg = ExperimentConfig::from_toml(ASSOC).unwrap();
        let d = cfg.deployment(2e-5).unwrap();
        assert_eq!(d.tiers[1].density, 2e-5);
        assert!((d.tiers[2].density - 1e-4).abs() < 1e-18);
        assert!((d.tiers[0].array_gain - 12.4).abs() < 1e-12);
        assert!(d.guaranteed_macro);
    }

    #[test]
    fn unknown_key_named() {
        let err = ExperimentConfig::from_toml(&ASSOC.replace("trials = 10", "trials = 10\ntrails = 3")).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
        let err = ExperimentConfig::from_toml(&ASSOC.replace("probe = \"uniform\"", "probe = \"uniform\"\ncolour = 1"))
            .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn invalid_values_named() {
        let err = ExperimentConfig::from_toml(&ASSOC.replace("trials = 10", "trials = 0")).unwrap_err();
        assert!(err.to_string().contains("trials must be ≥ 1"), "{err}");
        let err = ExperimentConfig::from_toml(&ASSOC.replace("seed = 1\n", "")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        let err = ExperimentConfig::from_toml(&ASSOC.replace("[1e-5, 2e-5]", "[2e-5, 1e-5]")).unwrap_err();
        assert!(err.to_string().contains("sweep.values"), "{err}");
        let err = ExperimentConfig::from_toml(&ASSOC.replace("far_share = 0.6", "far_share = 0.3")).unwrap_err();
        assert!(err.to_string().contains("noma.far_share"), "{err}");
        let err = ExperimentConfig::from_toml(&ASSOC.replace("density:pico", "density:nano")).unwrap_err();
        assert!(err.to_string().contains("nano"), "{err}");
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let a = ExperimentConfig::from_toml(ASSOC).unwrap();
        let mut b = a.clone();
        b.workers = 7;
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 2;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.tiers[2].follows.as_mut().unwrap().factor = 4.0;
        assert_ne!(a.hash(), d.hash());
        // formatting of the source text is irrelevant
        let e = ExperimentConfig::from_toml(&ASSOC.replace("radius = 300.0", "radius = 3e2")).unwrap();
        assert_eq!(a.hash(), e.hash());
    }

    #[test]
    fn round_trips_through_toml() {
        let a = ExperimentConfig::from_toml(ASSOC).unwrap();
        let b = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(a, b);
    }
}
