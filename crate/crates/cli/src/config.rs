//! Experiment configuration: TOML sections mirroring the solver modules,
//! resolved and re-validated through the law constructors at parse time.
//! Unknown keys are rejected.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blowup_core::boundary::{BoundaryControlConfig, EvolutionConfig};
use blowup_core::elliptic::GridSpec;
use blowup_core::law::{AbsorptionLaw, ForcingLaw};
use blowup_core::neutral::{ControlConfig, NeutralGridSpec};
use blowup_core::scalar::StepControl;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub forcing: Option<ForcingSpec>,
    pub absorption: Option<AbsorptionSpec>,
    pub geometry: Option<GeometrySpec>,
    pub scalar: Option<ScalarSpec>,
    pub control: Option<ControlSpec>,
    pub elliptic: Option<EllipticSpec>,
    pub selfsim: Option<SelfsimSpec>,
    pub sweep: Option<SweepSpec>,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    /// "power" or "exponential".
    pub kind: String,
    pub p: Option<f64>,
    #[serde(default)]
    pub k: f64,
    pub lambda: f64,
}

impl ForcingSpec {
    pub fn build(&self) -> Result<ForcingLaw> {
        let law = match self.kind.as_str() {
            "power" => {
                let p = self.p.context("forcing.p is required for kind = \"power\"")?;
                ForcingLaw::power(p, self.k, self.lambda)
            }
            "exponential" => ForcingLaw::exponential(self.lambda),
            other => bail!("unknown forcing kind {other:?} (power | exponential)"),
        };
        law.map_err(|e| anyhow::anyhow!("invalid forcing law: {e}"))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionSpec {
    /// "power", "exp", "sexp2s" or "zero".
    pub kind: String,
    pub m: Option<f64>,
}

impl AbsorptionSpec {
    pub fn build(&self) -> Result<AbsorptionLaw> {
        let law = match self.kind.as_str() {
            "power" => {
                let m = self.m.context("absorption.m is required for kind = \"power\"")?;
                AbsorptionLaw::power(m)
            }
            "exp" => AbsorptionLaw::exp(),
            "sexp2s" => AbsorptionLaw::s_exp_2s(),
            "zero" => return Ok(AbsorptionLaw::zero()),
            other => bail!("unknown absorption kind {other:?} (power | exp | sexp2s | zero)"),
        };
        law.map_err(|e| anyhow::anyhow!("invalid absorption law: {e}"))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub radius: f64,
    pub dimension: u32,
    pub h_interior: Option<f64>,
    pub h_boundary: Option<f64>,
    pub ratio: Option<f64>,
}

impl GeometrySpec {
    pub fn grid_spec(&self) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            h_interior: self.h_interior.unwrap_or(d.h_interior),
            h_boundary: self.h_boundary.unwrap_or(d.h_boundary),
            ratio: self.ratio.unwrap_or(d.ratio),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub u0: f64,
    pub cap: Option<f64>,
    pub horizon: Option<f64>,
    pub rtol: Option<f64>,
}

impl ScalarSpec {
    pub fn step_control(&self) -> StepControl {
        let d = StepControl::default();
        StepControl {
            cap: self.cap.unwrap_or(d.cap),
            horizon: self.horizon,
            rtol: self.rtol.unwrap_or(d.rtol),
            atol: d.atol,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Window width before T∞ (scalar pipeline).
    pub eps: Option<f64>,
    /// Window as a fraction of the fitted T∞ (boundary pipeline).
    pub eps_fraction: Option<f64>,
    pub q: Option<f64>,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    /// Truncation knee override; defaults to u⁰(T∞ − ε).
    pub knee: Option<f64>,
    /// Disable truncation (pure bang-bang; admissible for Φ⁻¹ ∈ L¹).
    pub truncate: Option<bool>,
    pub horizon: Option<f64>,
    pub horizon_factor: Option<f64>,
    pub cluster_floor: Option<f64>,
}

impl ControlSpec {
    pub fn scalar_config(&self) -> ControlConfig {
        let d = ControlConfig::default();
        ControlConfig {
            q: self.q.unwrap_or(d.q),
            a: self.a.unwrap_or(d.a),
            gamma: self.gamma.unwrap_or(d.gamma),
            eps: self.eps.unwrap_or(d.eps),
            knee: self.knee,
            truncate: self.truncate.unwrap_or(true),
            grid: NeutralGridSpec {
                cluster_floor: self.cluster_floor.unwrap_or(d.grid.cluster_floor),
                ..d.grid
            },
        }
    }

    pub fn boundary_config(&self) -> BoundaryControlConfig {
        let d = BoundaryControlConfig::default();
        BoundaryControlConfig {
            eps_fraction: self.eps_fraction.unwrap_or(d.eps_fraction),
            q: self.q.unwrap_or(d.q),
            a: self.a.unwrap_or(d.a),
            gamma: self.gamma.unwrap_or(d.gamma),
            horizon_factor: self.horizon_factor.unwrap_or(d.horizon_factor),
            neutral_grid: d.neutral_grid,
            snapshots: d.snapshots,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticSpec {
    /// Dirichlet boundary value.
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SelfsimSpec {
    pub m: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_span")]
    pub span: f64,
}

fn default_samples() -> usize {
    1000
}

fn default_span() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub m: Vec<f64>,
    pub u0: Vec<f64>,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub seed: Option<u64>,
    pub dir: Option<String>,
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.output.as_ref().and_then(|o| o.seed).unwrap_or(0)
    }

    pub fn evolution_config(&self, force: bool) -> Result<EvolutionConfig> {
        let geometry = self.geometry.as_ref().context("missing [geometry] section")?;
        let scalar = self.scalar.as_ref().context("missing [scalar] section")?;
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guard
        if !(scalar.u0 > 0.0) {
            bail!("scalar.u0 must be positive");
        }
        let d = EvolutionConfig::default();
        Ok(EvolutionConfig {
            radius: geometry.radius,
            dim: geometry.dimension,
            u0: scalar.u0,
            cap: scalar.cap.unwrap_or(d.cap),
            rtol: scalar.rtol.unwrap_or(d.rtol),
            atol: d.atol,
            grid: GridSpec {
                h_interior: geometry.h_interior.unwrap_or(d.grid.h_interior),
                h_boundary: geometry.h_boundary.unwrap_or(d.grid.h_boundary),
                ratio: geometry.ratio.unwrap_or(d.grid.ratio),
            },
            snapshots: d.snapshots,
            nu_values: d.nu_values,
            force,
        })
    }
}

/// Metadata sidecar written next to every run's artifacts; re-ingesting
/// it as `--config` reproduces the run.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Sidecar {
    pub experiment: String,
    pub tool_version: String,
    pub wall_ms: u64,
    pub config: Config,
}

/// Accepts either a plain config or a previously written sidecar.
pub fn load_config(text: &str) -> Result<Config> {
    if let Ok(sidecar) = toml::from_str::<Sidecar>(text) {
        return Ok(sidecar.config);
    }
    toml::from_str::<Config>(text).context("config parse failed")
}
