//! Run configuration read from a TOML file.

use serde::{Deserialize, Serialize};

use crate::analytic::{BarrierModel, DeltaModel};
use crate::oracle::{DeltaShape, EvolutionConfig, Grading};
use crate::scaling_frame::ScaleLaw;
use crate::scattering::RescaledPotential;
use crate::units::PhysicalConstants;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hbar: f64,
    pub mass: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    pub v: f64,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub resonances: ResonanceSpec,
    #[serde(default)]
    pub survival: Option<SurvivalSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindSpec {
    Delta,
    Barrier,
}

/// `V0bar` is the delta strength (energy times length) or the barrier height
/// (energy), both in the rescaled frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKindSpec,
    #[serde(rename = "V0bar")]
    pub v0bar: f64,
    pub abar: f64,
    #[serde(default)]
    pub bbar: Option<f64>,
}

/// Wavenumbers `kmin`, `kmax` are rescaled `k̄`; the output column is `k̄ā`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub kmin: f64,
    pub kmax: f64,
    pub samples: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            kmin: 0.05,
            kmax: 12.0,
            samples: 2000,
            grid_step: default_grid_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceSpec {
    /// Number of resonances to tabulate; all barrier roots or three delta
    /// levels when absent.
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_fit_samples")]
    pub fit_samples: usize,
}

impl Default for ResonanceSpec {
    fn default() -> Self {
        Self {
            count: None,
            grid_step: default_grid_step(),
            fit_samples: default_fit_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalSpec {
    pub tmax: f64,
    pub samples: usize,
    #[serde(default = "default_level")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_time_step")]
    pub time_step: f64,
    #[serde(default = "default_domain_end")]
    pub domain_end: f64,
    /// Grid grading, in units of `a(0) = āL₀`.
    #[serde(default = "default_fine_end")]
    pub fine_end: f64,
    #[serde(default = "default_coarse_from")]
    pub coarse_from: f64,
    #[serde(default = "default_leak")]
    pub leak_threshold: f64,
    /// Rescaled width of a raised-cosine delta; a two-cell top-hat when absent.
    #[serde(default)]
    pub delta_width: Option<f64>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            grid_points: default_grid_points(),
            time_step: default_time_step(),
            domain_end: default_domain_end(),
            fine_end: default_fine_end(),
            coarse_from: default_coarse_from(),
            leak_threshold: default_leak(),
            delta_width: None,
        }
    }
}

fn default_grid_step() -> f64 {
    1e-4
}
fn default_fit_samples() -> usize {
    41
}
fn default_level() -> usize {
    1
}
fn default_grid_points() -> usize {
    20_001
}
fn default_time_step() -> f64 {
    0.01
}
fn default_domain_end() -> f64 {
    300.0
}
fn default_fine_end() -> f64 {
    0.5
}
fn default_coarse_from() -> f64 {
    20.0
}
fn default_leak() -> f64 {
    0.05
}

/// Closed-form model matching the configured potential.
#[derive(Debug, Clone, Copy)]
pub enum Model {
    Delta(DeltaModel),
    Barrier(BarrierModel),
}

impl Model {
    pub fn potential(&self) -> RescaledPotential {
        match self {
            Model::Delta(m) => RescaledPotential::from(m),
            Model::Barrier(m) => RescaledPotential::from(m),
        }
    }

    pub fn abar(&self) -> f64 {
        match self {
            Model::Delta(m) => m.abar(),
            Model::Barrier(m) => m.abar(),
        }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be finite and > 0, got {x}")))
    }
}

impl RunConfig {
    /// Parses and validates; TOML errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        positive("L0", self.l0)?;
        if !self.v.is_finite() {
            return Err(bad("v", "must be finite"));
        }
        let p = &self.potential;
        positive("potential.abar", p.abar)?;
        match p.kind {
            PotentialKindSpec::Delta => {
                if !(p.v0bar.is_finite() && p.v0bar >= 0.0) {
                    return Err(bad("potential.V0bar", "delta strength must be finite and >= 0"));
                }
                if p.bbar.is_some() {
                    return Err(bad("potential.bbar", "not used by a delta potential"));
                }
            }
            PotentialKindSpec::Barrier => {
                positive("potential.V0bar", p.v0bar)?;
                let b = p.bbar.ok_or_else(|| bad("potential.bbar", "required for a barrier"))?;
                if !(b.is_finite() && b > p.abar) {
                    return Err(bad("potential.bbar", format!("must exceed abar = {}", p.abar)));
                }
            }
        }
        let s = &self.scan;
        positive("scan.kmin", s.kmin)?;
        if !(s.kmax.is_finite() && s.kmax > s.kmin) {
            return Err(bad("scan.kmax", format!("empty range [{}, {}]", s.kmin, s.kmax)));
        }
        if s.samples < 3 {
            return Err(bad("scan.samples", "need at least 3"));
        }
        positive("scan.grid_step", s.grid_step)?;
        positive("resonances.grid_step", self.resonances.grid_step)?;
        if self.resonances.count == Some(0) {
            return Err(bad("resonances.count", "must be >= 1"));
        }
        if self.resonances.fit_samples < 7 {
            return Err(bad("resonances.fit_samples", "need at least 7"));
        }
        if let Some(sv) = &self.survival {
            positive("survival.tmax", sv.tmax)?;
            if sv.samples < 2 {
                return Err(bad("survival.samples", "need at least 2"));
            }
            if sv.n == 0 {
                return Err(bad("survival.n", "resonance index starts at 1"));
            }
            if let Some(end) = self.scale_law()?.window_end() {
                if sv.tmax >= end {
                    return Err(bad(
                        "survival.tmax",
                        format!("outside the validity window [0, {end}) of the contracting scale law"),
                    ));
                }
            }
        }
        let o = &self.oracle;
        if o.grid_points < 16 {
            return Err(bad("oracle.grid_points", "need at least 16"));
        }
        positive("oracle.time_step", o.time_step)?;
        positive("oracle.domain_end", o.domain_end)?;
        positive("oracle.fine_end", o.fine_end)?;
        positive("oracle.coarse_from", o.coarse_from)?;
        positive("oracle.leak_threshold", o.leak_threshold)?;
        if let Some(w) = o.delta_width {
            positive("oracle.delta_width", w)?;
        }
        self.model()?;
        Ok(())
    }

    pub fn constants(&self) -> Result<PhysicalConstants, CliError> {
        PhysicalConstants::new(self.hbar, self.mass).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scale_law(&self) -> Result<ScaleLaw, CliError> {
        ScaleLaw::new(self.l0, self.v).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let c = self.constants()?;
        let p = &self.potential;
        let m = match p.kind {
            PotentialKindSpec::Delta => DeltaModel::new(c, p.v0bar, p.abar).map(Model::Delta),
            PotentialKindSpec::Barrier => {
                BarrierModel::new(c, p.v0bar, p.abar, p.bbar.unwrap_or(f64::NAN)).map(Model::Barrier)
            }
        };
        m.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Lab-frame evolution settings for a run up to `total_time`.
    pub fn evolution(&self, total_time: f64) -> EvolutionConfig {
        let o = &self.oracle;
        let a0 = self.potential.abar * self.l0;
        let mut cfg = EvolutionConfig::new(o.domain_end, o.grid_points, o.time_step, total_time);
        cfg.grading = Grading::Graded {
            fine_end: o.fine_end * a0,
            coarse_from: o.coarse_from * a0,
        };
        cfg.leak_threshold = o.leak_threshold;
        if let Some(w) = o.delta_width {
            cfg.delta_shape = DeltaShape::RaisedCosine { width_bar: w };
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
hbar = 1.0
mass = 1.0
L0 = 1.0
v = 0.0
[potential]
kind = "delta"
V0bar = 100.0
abar = 1.0
"#;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.potential.kind, PotentialKindSpec::Delta);
        assert_eq!(c.scan.samples, 2000);
        assert!(!c.oracle.enabled);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{BASE}colour = 3\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn contracting_window_is_enforced() {
        let text = BASE.replace("v = 0.0", "v = -0.1") + "[survival]\ntmax = 12.0\nsamples = 5\n";
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("survival.tmax"));
    }
}
