use std::path::Path;

use crate::HarnessError;

/// Ordinate of a two-column profile file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileFormat {
    YPlusUPlus,
    YOverDeltaUPlus,
}

impl ProfileFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "yplus" | "y-plus" => Some(ProfileFormat::YPlusUPlus),
            "ydelta" | "y-over-delta" => Some(ProfileFormat::YOverDeltaUPlus),
            _ => None,
        }
    }
}

pub const MIN_SAMPLES: usize = 10;

/// Mean velocity profile in wall units, ordinate stored as `y⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    pub source: String,
    pub re_tau: f64,
    y_plus: Vec<f64>,
    u_plus: Vec<f64>,
}

impl ReferenceProfile {
    pub fn new(
        source: impl Into<String>,
        re_tau: f64,
        y_plus: Vec<f64>,
        u_plus: Vec<f64>,
    ) -> Result<Self, HarnessError> {
        if !(re_tau.is_finite() && re_tau > 0.0) {
            return Err(HarnessError::Data(format!("re_tau = {re_tau}")));
        }
        if y_plus.len() != u_plus.len() || y_plus.len() < MIN_SAMPLES {
            return Err(HarnessError::Data(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                y_plus.len()
            )));
        }
        if let Some(i) = (1..y_plus.len()).find(|&i| y_plus[i] <= y_plus[i - 1]) {
            return Err(HarnessError::Data(format!(
                "ordinate not strictly increasing at sample {i}"
            )));
        }
        if let Some(i) = u_plus.iter().position(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(HarnessError::Data(format!(
                "u+ = {} at sample {i}",
                u_plus[i]
            )));
        }
        if !(y_plus[0].is_finite() && y_plus[0] >= 0.0 && y_plus[y_plus.len() - 1].is_finite()) {
            return Err(HarnessError::Data(
                "ordinate must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            source: source.into(),
            re_tau,
            y_plus,
            u_plus,
        })
    }

    pub fn len(&self) -> usize {
        self.y_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_plus.is_empty()
    }

    pub fn y_plus(&self) -> &[f64] {
        &self.y_plus
    }

    pub fn u_plus(&self) -> &[f64] {
        &self.u_plus
    }

    /// Linear interpolation of `u⁺` at `y⁺`.
    pub fn u_plus_at(&self, y_plus: f64) -> Result<f64, HarnessError> {
        let (y, u) = (&self.y_plus, &self.u_plus);
        let (lo, hi) = (y[0], y[y.len() - 1]);
        if !(y_plus >= lo && y_plus <= hi) {
            return Err(HarnessError::Range(format!(
                "y+ = {y_plus} outside [{lo}, {hi}]"
            )));
        }
        let j = y.partition_point(|&v| v < y_plus);
        if y[j] == y_plus {
            return Ok(u[j]);
        }
        let t = (y_plus - y[j - 1]) / (y[j] - y[j - 1]);
        Ok(u[j - 1] + t * (u[j] - u[j - 1]))
    }
}

/// Parses whitespace- or comma-separated two-column text; `#` starts a comment.
pub fn parse_profile(
    text: &str,
    format: ProfileFormat,
    re_tau: f64,
    source: &str,
) -> Result<ReferenceProfile, HarnessError> {
    let mut ys = Vec::new();
    let mut us = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed.as_deref() {
            Some([y, u]) => {
                ys.push(match format {
                    ProfileFormat::YPlusUPlus => *y,
                    ProfileFormat::YOverDeltaUPlus => y * re_tau,
                });
                us.push(*u);
            }
            _ => {
                return Err(HarnessError::Parse {
                    line: i + 1,
                    message: format!("expected two numbers, found {raw:?}"),
                })
            }
        }
    }
    if ys.is_empty() {
        return Err(HarnessError::Parse {
            line: 0,
            message: "no samples".into(),
        });
    }
    ReferenceProfile::new(source, re_tau, ys, us)
}

pub fn ingest_profile(
    path: &Path,
    format: ProfileFormat,
    re_tau: f64,
) -> Result<ReferenceProfile, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_profile(&text, format, re_tau, &path.display().to_string())
}

/// `u⁺` at the matching height `h_wm/δ`.
pub fn sample_matching_velocity(
    profile: &ReferenceProfile,
    h_wm_over_delta: f64,
    re_tau: f64,
) -> Result<f64, HarnessError> {
    profile.u_plus_at(h_wm_over_delta * re_tau)
}
