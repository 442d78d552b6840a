use std::path::PathBuf;

use wallmodel_core::eqwm::EqwmMethod;
use wallmodel_core::surface::{GradientMode, ScenarioKind};

use crate::profile::ProfileFormat;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSelector {
    Fv,
    GqLinear,
    GqClustered,
    Iwm,
    IwmLegacy,
}

impl ModelSelector {
    pub const ALL: [ModelSelector; 5] = [
        ModelSelector::Fv,
        ModelSelector::GqLinear,
        ModelSelector::GqClustered,
        ModelSelector::Iwm,
        ModelSelector::IwmLegacy,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ModelSelector::Fv => "fv",
            ModelSelector::GqLinear => "gq-linear",
            ModelSelector::GqClustered => "gq-clustered",
            ModelSelector::Iwm => "iwm",
            ModelSelector::IwmLegacy => "iwm-legacy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }

    /// The equilibrium method, if this is an equilibrium model.
    pub fn eqwm_method(&self) -> Option<EqwmMethod> {
        match self {
            ModelSelector::Fv => Some(EqwmMethod::FiniteVolume),
            ModelSelector::GqLinear => Some(EqwmMethod::SpectralLinear),
            ModelSelector::GqClustered => Some(EqwmMethod::SpectralClustered),
            ModelSelector::Iwm | ModelSelector::IwmLegacy => None,
        }
    }
}

/// Mean pressure gradient `dp/dx` as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureSchedule {
    None,
    Constant {
        dpdx: f64,
    },
    /// `amplitude` on `[start, start + duration)`, zero otherwise.
    Pulse {
        amplitude: f64,
        start: f64,
        duration: f64,
    },
}

impl PressureSchedule {
    pub const DEFAULT_PULSE: PressureSchedule = PressureSchedule::Pulse {
        amplitude: -10.0,
        start: 0.1,
        duration: 0.05,
    };

    pub fn dpdx(&self, t: f64) -> f64 {
        match *self {
            PressureSchedule::None => 0.0,
            PressureSchedule::Constant { dpdx } => dpdx,
            PressureSchedule::Pulse {
                amplitude,
                start,
                duration,
            } => {
                if t >= start && t < start + duration {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// `none`, `constant:<dpdx>` or `pulse:<amplitude>:<start>:<duration>`.
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Option<Vec<f64>> = parts[1..].iter().map(|p| p.trim().parse().ok()).collect();
        let nums = nums?;
        if !nums.iter().all(|v| v.is_finite()) {
            return None;
        }
        match (parts[0].trim(), nums.as_slice()) {
            ("none", []) => Some(PressureSchedule::None),
            ("constant", [g]) => Some(PressureSchedule::Constant { dpdx: *g }),
            ("pulse", [a, s, d]) if *d >= 0.0 => Some(PressureSchedule::Pulse {
                amplitude: *a,
                start: *s,
                duration: *d,
            }),
            _ => None,
        }
    }
}

/// Synthetic outer-flow velocity field of the coupled loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Uniform,
    /// `U(x) = U0 (1 + a sin(2πx/L))` over the patch length `L`.
    Sinusoidal,
    /// Uniform velocity with the pulse pressure schedule.
    Pulse,
}

impl FlowKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(FlowKind::Uniform),
            "sinusoidal" => Some(FlowKind::Sinusoidal),
            "pulse" => Some(FlowKind::Pulse),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FlowKind::Uniform => "uniform",
            FlowKind::Sinusoidal => "sinusoidal",
            FlowKind::Pulse => "pulse",
        }
    }
}

/// Driver settings, in outer units (`δ = 1`, `u_τ = 1`, `ρ = 1`, `ν = 1/Re_τ`).
#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub model: ModelSelector,
    pub re_tau: f64,
    pub h_wm_over_delta: f64,
    /// Points or cells; chosen from `error_target` when absent.
    pub n: Option<usize>,
    pub error_target: f64,
    pub dt: f64,
    pub steps: usize,
    pub pressure: PressureSchedule,
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub flow: FlowKind,
    pub flow_amplitude: f64,
    pub gradient_mode: GradientMode,
    pub filter_passes: usize,
    pub time_filter: Option<f64>,
    /// Relative amplitude of seeded random per-face perturbations of the
    /// outer velocity.
    pub perturbation: f64,
    pub output_every: usize,
    pub reps: usize,
    pub warmups: usize,
    pub profile: Option<PathBuf>,
    pub profile_format: ProfileFormat,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            model: ModelSelector::GqClustered,
            re_tau: 1000.0,
            h_wm_over_delta: 0.1,
            n: None,
            error_target: 0.001,
            dt: 0.01,
            steps: 1000,
            pressure: PressureSchedule::None,
            seed: 0,
            scenario: ScenarioKind::UniformHex,
            flow: FlowKind::Uniform,
            flow_amplitude: 0.1,
            gradient_mode: GradientMode::GlobalVector,
            filter_passes: 0,
            time_filter: None,
            perturbation: 0.0,
            output_every: 1,
            reps: 100,
            warmups: 10,
            profile: None,
            profile_format: ProfileFormat::YPlusUPlus,
        }
    }
}

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("invalid value {value:?} for `{key}`"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| bad(key, value))
}

impl DriverConfig {
    pub const KEYS: [&'static str; 22] = [
        "model",
        "re_tau",
        "h_wm_over_delta",
        "n",
        "error_target",
        "dt",
        "steps",
        "pressure",
        "seed",
        "scenario",
        "flow",
        "flow_amplitude",
        "gradient_mode",
        "filter_passes",
        "time_filter",
        "perturbation",
        "output_every",
        "reps",
        "warmups",
        "profile",
        "profile_format",
        "iwm_legacy_sublayer",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        match key.trim() {
            "model" => self.model = ModelSelector::parse(v).ok_or_else(|| bad(key, v))?,
            "re_tau" => self.re_tau = number(key, v)?,
            "h_wm_over_delta" => self.h_wm_over_delta = number(key, v)?,
            "n" => {
                self.n = if v == "auto" {
                    None
                } else {
                    Some(number(key, v)?)
                }
            }
            "error_target" => self.error_target = number(key, v)?,
            "dt" => self.dt = number(key, v)?,
            "steps" => self.steps = number(key, v)?,
            "pressure" => self.pressure = PressureSchedule::parse(v).ok_or_else(|| bad(key, v))?,
            "seed" => self.seed = number(key, v)?,
            "scenario" => self.scenario = ScenarioKind::parse(v).ok_or_else(|| bad(key, v))?,
            "flow" => self.flow = FlowKind::parse(v).ok_or_else(|| bad(key, v))?,
            "flow_amplitude" => self.flow_amplitude = number(key, v)?,
            "gradient_mode" => {
                self.gradient_mode = GradientMode::parse(v).ok_or_else(|| bad(key, v))?
            }
            "filter_passes" => self.filter_passes = number(key, v)?,
            "time_filter" => {
                self.time_filter = if v == "none" {
                    None
                } else {
                    Some(number(key, v)?)
                }
            }
            "perturbation" => self.perturbation = number(key, v)?,
            "output_every" => self.output_every = number(key, v)?,
            "reps" => self.reps = number(key, v)?,
            "warmups" => self.warmups = number(key, v)?,
            "profile" => self.profile = Some(PathBuf::from(v)),
            "profile_format" => {
                self.profile_format = ProfileFormat::parse(v).ok_or_else(|| bad(key, v))?
            }
            "iwm_legacy_sublayer" => {
                if number::<bool>(key, v)? {
                    self.model = ModelSelector::IwmLegacy;
                }
            }
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, found {raw:?}"),
            })?;
            self.set(k, v).map_err(|e| HarnessError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if !(self.h_wm_over_delta > 0.0 && self.h_wm_over_delta < 1.0) {
            return fail(format!(
                "h_wm_over_delta = {} outside (0, 1)",
                self.h_wm_over_delta
            ));
        }
        if !(self.re_tau.is_finite() && self.re_tau > 0.0) {
            return fail(format!("re_tau = {}", self.re_tau));
        }
        if !(self.error_target > 0.0 && self.error_target < 1.0) {
            return fail(format!(
                "error_target = {} outside (0, 1)",
                self.error_target
            ));
        }
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return fail(format!("dt = {}", self.dt));
        }
        if matches!(self.n, Some(n) if n < 2) {
            return fail("n must be at least 2".into());
        }
        if !(self.flow_amplitude.is_finite()
            && self.perturbation.is_finite()
            && self.perturbation >= 0.0)
        {
            return fail(
                "flow_amplitude and perturbation must be finite, perturbation non-negative".into(),
            );
        }
        if matches!(self.time_filter, Some(t) if !(t.is_finite() && t > 0.0)) {
            return fail("time_filter must be positive".into());
        }
        if self.steps == 0 || self.output_every == 0 || self.reps == 0 {
            return fail("steps, output_every and reps must be positive".into());
        }
        Ok(())
    }

    pub fn nu(&self) -> f64 {
        1.0 / self.re_tau
    }

    pub fn h_wm(&self) -> f64 {
        self.h_wm_over_delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_over_defaults() {
        let c = DriverConfig::from_text("# comment\nmodel = iwm\nre_tau=5000\n\npressure = pulse:-4:0.5:0.1\nn = 12 # trailing\n").unwrap();
        assert_eq!(c.model, ModelSelector::Iwm);
        assert_eq!(c.re_tau, 5000.0);
        assert_eq!(c.n, Some(12));
        assert_eq!(c.h_wm_over_delta, 0.1);
        assert_eq!(c.pressure.dpdx(0.55), -4.0);
        assert_eq!(c.pressure.dpdx(0.6), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            DriverConfig::from_text("colour = red"),
            Err(HarnessError::Parse { line: 1, .. })
        ));
        assert!(DriverConfig::from_text("h_wm_over_delta = 1.0").is_err());
        assert!(DriverConfig::from_text("model = les").is_err());
        assert!(DriverConfig::from_text("no equals sign").is_err());
        assert!(DriverConfig::from_text("n = 1").is_err());
        assert!(PressureSchedule::parse("pulse:1:2").is_none());
    }

    #[test]
    fn every_key_is_accepted() {
        let values = [
            "fv",
            "100",
            "0.2",
            "8",
            "0.01",
            "0.001",
            "3",
            "constant:-1",
            "7",
            "tet-fan",
            "sinusoidal",
            "0.2",
            "naive",
            "1",
            "0.5",
            "0.01",
            "2",
            "5",
            "1",
            "p.dat",
            "ydelta",
            "true",
        ];
        let mut c = DriverConfig::default();
        for (k, v) in DriverConfig::KEYS.iter().zip(values) {
            c.set(k, v).unwrap();
        }
        c.validate().unwrap();
        assert_eq!(c.model, ModelSelector::IwmLegacy);
    }
}
