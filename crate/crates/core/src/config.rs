//! Run configuration: a TOML file with a closed schema (unknown keys are
//! rejected), full dotted-path command-line overrides, and constructors for
//! the typed objects the rest of the crate consumes.

use crate::constitutive::{ConstitutiveLaw, PressureLaw};
use crate::entropy::EntropyParams;
use crate::error::{Error, Result};
use crate::fields::{Grid, PeriodicField};
use crate::solver::{Scheme, SolverConfig, State, TermToggles};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 256, length: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViscositySection {
    /// One of "quantum", "power-law", "linear-tail".
    pub family: String,
    pub alpha: f64,
    /// Tail threshold, used by "linear-tail" only.
    pub m: f64,
}

impl Default for ViscositySection {
    fn default() -> Self {
        Self {
            family: "quantum".into(),
            alpha: 1.0,
            m: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSection {
    pub a: f64,
    pub gamma: f64,
}

impl Default for PressureSection {
    fn default() -> Self {
        Self { a: 1.0, gamma: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySection {
    pub kappa: f64,
    pub epsilon: f64,
    pub r3: f64,
    /// Target mean density; omitted means "use the initial mean".
    pub r: Option<f64>,
    pub c_diss: f64,
}

impl Default for EntropySection {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            epsilon: 0.01,
            r3: 1.0,
            r: None,
            c_diss: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt_init: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub output_interval: f64,
    pub scheme: Scheme,
    /// Decay-fit window; omitted ends default to `[0.2 t_end, t_end]`.
    pub fit_start: Option<f64>,
    pub fit_end: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            t_end: 10.0,
            cfl_safety: 0.4,
            output_interval: 0.05,
            scheme: Scheme::ImexViscous,
            fit_start: None,
            fit_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Density floor relative to the mean density.
    pub rho_floor_rel: f64,
    pub residual_tol: f64,
    pub max_step_retries: u32,
    pub terms: TermToggles,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            rho_floor_rel: 1e-8,
            residual_tol: 1e-6,
            max_step_retries: 16,
            terms: TermToggles::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub density_mean: f64,
    pub density_amplitude: f64,
    pub density_mode: u32,
    pub velocity_mean: f64,
    pub velocity_amplitude: f64,
    pub velocity_mode: u32,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            density_mean: 1.0,
            density_amplitude: 0.3,
            density_mode: 1,
            velocity_mean: 0.0,
            velocity_amplitude: 0.0,
            velocity_mode: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Mean density of the verification ensembles.
    pub r: f64,
    pub profiles: usize,
    pub eta: f64,
    /// Default zero-set fraction for single Poincare runs.
    pub delta: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            r: 2.0,
            profiles: 200,
            eta: 0.05,
            delta: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory; falls back to `$NSK_OUT`, then `./out`.
    pub dir: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None }
    }
}

/// The full run configuration. Every field has a documented default, so an
/// empty file (or no file) is the reference quantum decay experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub viscosity: ViscositySection,
    pub pressure: PressureSection,
    pub entropy: EntropySection,
    pub time: TimeSection,
    pub solver: SolverSection,
    pub initial: InitialSection,
    pub verify: VerifySection,
    pub output: OutputSection,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parse TOML and apply `key.path=value` overrides before type-checking.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let toml_value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse: {e}")))?;
        let mut json = serde_json::to_value(&toml_value)
            .map_err(|e| Error::Config(format!("config conversion: {e}")))?;
        for ov in overrides {
            apply_override(&mut json, ov)?;
        }
        serde_json::from_value(json).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.length)
    }

    pub fn law(&self) -> Result<ConstitutiveLaw> {
        match self.viscosity.family.as_str() {
            "quantum" => Ok(ConstitutiveLaw::quantum()),
            "power-law" => ConstitutiveLaw::power_law(self.viscosity.alpha),
            "linear-tail" => ConstitutiveLaw::linear_tail(self.viscosity.alpha, self.viscosity.m),
            other => Err(Error::Config(format!(
                "unknown viscosity family {other:?} (expected quantum | power-law | linear-tail)"
            ))),
        }
    }

    pub fn pressure_law(&self) -> Result<PressureLaw> {
        PressureLaw::new(self.pressure.a, self.pressure.gamma)
    }

    pub fn initial_state(&self, grid: Grid) -> Result<State> {
        let i = &self.initial;
        if !(i.density_mean > 0.0) {
            return Err(Error::Config("initial density mean must be positive".into()));
        }
        if i.density_amplitude.abs() >= i.density_mean {
            return Err(Error::Config(
                "initial density amplitude must be smaller than the mean (no vacuum)".into(),
            ));
        }
        let rho = PeriodicField::from_fn(grid, |x| {
            i.density_mean + i.density_amplitude * (2.0 * PI * i.density_mode as f64 * x).sin()
        })?;
        let u = PeriodicField::from_fn(grid, |x| {
            i.velocity_mean + i.velocity_amplitude * (2.0 * PI * i.velocity_mode as f64 * x).sin()
        })?;
        let m = rho.zip_with(&u, |r, ui| r * ui)?;
        State::new(0.0, rho, m)
    }

    /// Target mean density: the configured value, or the exact mean of the
    /// initial data when unset.
    pub fn resolved_r(&self, initial: &State) -> f64 {
        self.entropy
            .r
            .unwrap_or_else(|| initial.rho.integrate() / initial.rho.grid().length())
    }

    pub fn entropy_params(&self, r_mean: f64) -> Result<EntropyParams> {
        EntropyParams::new(
            self.entropy.kappa,
            self.entropy.epsilon,
            self.entropy.r3,
            r_mean,
            self.entropy.c_diss,
        )
    }

    pub fn solver_config(&self, r_mean: f64, override_admissibility: bool) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            grid: self.grid()?,
            law: self.law()?,
            pressure: self.pressure_law()?,
            params: self.entropy_params(r_mean)?,
            dt_init: self.time.dt_init,
            t_end: self.time.t_end,
            cfl_safety: self.time.cfl_safety,
            rho_floor: self.solver.rho_floor_rel * r_mean,
            residual_tol: self.solver.residual_tol,
            output_interval: self.time.output_interval,
            scheme: self.time.scheme,
            max_step_retries: self.solver.max_step_retries,
            terms: self.solver.terms,
            override_admissibility,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Decay-fit window with the documented defaults.
    pub fn fit_window(&self) -> (f64, f64) {
        (
            self.time.fit_start.unwrap_or(0.2 * self.time.t_end),
            self.time.fit_end.unwrap_or(self.time.t_end),
        )
    }
}

/// Apply one `a.b.c=value` override to the JSON representation of the config.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not KEY=VALUE")))?;
    let value = parse_literal(raw);
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {path:?} is malformed")));
    }
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(Error::Config(format!("override key {path:?} descends into a non-table")));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(format!("override key {path:?} descends into a non-table"))),
    }
}

fn parse_literal(raw: &str) -> serde_json::Value {
    if raw == "true" {
        return serde_json::Value::Bool(true);
    }
    if raw == "false" {
        return serde_json::Value::Bool(false);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return serde_json::Value::from(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return serde_json::Value::from(f);
    }
    serde_json::Value::String(raw.to_string())
}
