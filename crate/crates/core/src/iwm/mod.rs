//! Three-dimensional integral wall model.
//!
//! The wall-parallel velocity below the matching height is a composite of a
//! linear sublayer and a log-plus-linear outer part per component. The two
//! vertically integrated momentum equations are marched with explicit Euler
//! and the profile parameters recovered at every step by Newton-Raphson.

mod profile;
mod solver;

pub use profile::{
    composite_profile, integral_terms, sublayer_height, sublayer_height_for,
    wall_and_matching_stress, WallStresses,
};
pub use solver::{
    advance_face, closure_params, closure_residuals, equilibrium_state, full_residual,
    newton_step_system, plug_flow_state, AdvanceReport, ClosureResiduals, CHECKPOINT_HEADER,
};

use thiserror::Error;

use crate::closure::ClosureConstants;
use crate::eqwm::EqwmError;
use crate::newton::{NewtonError, NewtonSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IwmError {
    #[error("invalid integral-wall-model input: {0}")]
    InvalidInput(String),
    #[error("invalid integral-wall-model state: {0}")]
    InvalidState(String),
    #[error("y = {y} outside [0, {h_wm}]")]
    OutOfRange { y: f64, h_wm: f64 },
    #[error("equilibrium fallback failed after Newton failure ({newton}): {fallback}")]
    Fallback {
        newton: NewtonError,
        fallback: String,
    },
    #[error(transparent)]
    Newton(#[from] NewtonError),
    #[error(transparent)]
    Eqwm(#[from] EqwmError),
}

/// Viscous-sublayer form of the composite profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SublayerForm {
    /// `u = sign(u_τx) u_τx² / u_τ · y/δ_ν`; frame invariant.
    #[default]
    Modified,
    /// `u = u_τx · y/δ_ν` with a common sublayer height for both
    /// components, which forces `τ_w,x = τ_w,z`.
    Legacy,
}

/// The eight profile parameters of one wall face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwmParams {
    pub u_tau: f64,
    pub u_tau_x: f64,
    pub u_tau_z: f64,
    pub a_x: f64,
    pub a_z: f64,
    pub c_x: f64,
    pub c_z: f64,
    pub delta_i: f64,
    pub form: SublayerForm,
}

impl IwmParams {
    /// Zero-flow parameters: no friction, sublayer filling the layer.
    pub fn no_flow(h_wm: f64, form: SublayerForm) -> Self {
        Self {
            u_tau: 0.0,
            u_tau_x: 0.0,
            u_tau_z: 0.0,
            a_x: 0.0,
            a_z: 0.0,
            c_x: 0.0,
            c_z: 0.0,
            delta_i: h_wm,
            form,
        }
    }

    /// Sublayer slope velocities `g` with `u_i = g_i u_τ y / ν` below `δ_i`
    /// and log coefficient `g_i / κ` above.
    pub fn slope_velocities(&self) -> [f64; 2] {
        match self.form {
            SublayerForm::Modified if self.u_tau > 0.0 => [
                self.u_tau_x.signum() * self.u_tau_x * self.u_tau_x / self.u_tau,
                self.u_tau_z.signum() * self.u_tau_z * self.u_tau_z / self.u_tau,
            ],
            SublayerForm::Modified => [0.0, 0.0],
            SublayerForm::Legacy => [self.u_tau_x, self.u_tau_z],
        }
    }

    pub fn is_valid(&self, h_wm: f64) -> bool {
        let vals = [
            self.u_tau,
            self.u_tau_x,
            self.u_tau_z,
            self.a_x,
            self.a_z,
            self.c_x,
            self.c_z,
            self.delta_i,
        ];
        vals.iter().all(|v| v.is_finite())
            && self.u_tau >= 0.0
            && self.delta_i > 0.0
            && self.delta_i <= h_wm * (1.0 + 1e-12)
    }
}

/// Vertical integrals of the composite profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegralTerms {
    pub l_x: f64,
    pub l_z: f64,
    pub l_xx: f64,
    pub l_zz: f64,
    pub l_xz: f64,
}

impl IntegralTerms {
    pub fn as_array(&self) -> [f64; 5] {
        [self.l_x, self.l_z, self.l_xx, self.l_zz, self.l_xz]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            l_x: v[0],
            l_z: v[1],
            l_xx: v[2],
            l_zz: v[3],
            l_xz: v[4],
        }
    }
}

/// Index of each integral term in [`IntegralTerms::as_array`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Lx = 0,
    Lz = 1,
    Lxx = 2,
    Lzz = 3,
    Lxz = 4,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Lx, Term::Lz, Term::Lxx, Term::Lzz, Term::Lxz];

    pub fn label(&self) -> &'static str {
        match self {
            Term::Lx => "Lx",
            Term::Lz => "Lz",
            Term::Lxx => "Lxx",
            Term::Lzz => "Lzz",
            Term::Lxz => "Lxz",
        }
    }
}

/// Local-frame derivatives of the five integral terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegralGradients {
    pub d_dx: [f64; 5],
    pub d_dz: [f64; 5],
}

impl IntegralGradients {
    pub fn dx(&self, t: Term) -> f64 {
        self.d_dx[t as usize]
    }

    pub fn dz(&self, t: Term) -> f64 {
        self.d_dz[t as usize]
    }
}

/// LES data handed to one face for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingData {
    pub u_les: f64,
    pub w_les: f64,
    pub dpdx: f64,
    pub dpdz: f64,
    pub grad_terms: IntegralGradients,
    pub dt: f64,
}

impl MatchingData {
    /// Steady drive with no pressure gradient and no surface gradients.
    pub fn steady(u_les: f64, w_les: f64, dt: f64) -> Self {
        Self {
            u_les,
            w_les,
            dpdx: 0.0,
            dpdz: 0.0,
            grad_terms: IntegralGradients::default(),
            dt,
        }
    }

    pub fn validate(&self) -> Result<(), IwmError> {
        let v = [self.u_les, self.w_les, self.dpdx, self.dpdz, self.dt];
        let g = self.grad_terms.d_dx.iter().chain(&self.grad_terms.d_dz);
        if !v.iter().chain(g).all(|x| x.is_finite()) || self.dt < 0.0 {
            return Err(IwmError::InvalidInput(format!("matching data {self:?}")));
        }
        Ok(())
    }
}

/// Per-face model state between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwmFaceState {
    pub params: IwmParams,
    pub integrals: IntegralTerms,
    pub tau_w_x: f64,
    pub tau_w_z: f64,
    pub tau_h_x: f64,
    pub tau_h_z: f64,
    pub time: f64,
    /// Time-filtered matching velocity when filtering is enabled.
    pub filtered_velocity: [f64; 2],
}

/// Fixed per-face model data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwmModel {
    pub h_wm: f64,
    pub nu: f64,
    pub rho: f64,
    pub constants: ClosureConstants,
    pub form: SublayerForm,
    pub newton: NewtonSettings,
    /// Time constant of the exponential filter on the matching velocity.
    pub time_filter: Option<f64>,
}

impl IwmModel {
    pub fn new(h_wm: f64, nu: f64, rho: f64) -> Result<Self, IwmError> {
        let m = Self {
            h_wm,
            nu,
            rho,
            constants: ClosureConstants::INTEGRAL,
            form: SublayerForm::Modified,
            newton: NewtonSettings::default(),
            time_filter: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_form(mut self, form: SublayerForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_time_filter(mut self, tau: Option<f64>) -> Self {
        self.time_filter = tau;
        self
    }

    pub fn validate(&self) -> Result<(), IwmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.h_wm) || !ok(self.nu) || !ok(self.rho) || !self.constants.is_valid() {
            return Err(IwmError::InvalidInput(format!(
                "h_wm = {}, nu = {}, rho = {}",
                self.h_wm, self.nu, self.rho
            )));
        }
        if let Some(t) = self.time_filter {
            if !ok(t) {
                return Err(IwmError::InvalidInput(format!("time-filter constant {t}")));
            }
        }
        Ok(())
    }
}

/// Central difference `(φ_{i+1} - φ_{i-1}) / 2Δx` of a neighbour triple.
pub fn fd_gradient_fallback(values: [f64; 3], dx: f64) -> f64 {
    (values[2] - values[0]) / (2.0 * dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_oracles() {
        assert_eq!(fd_gradient_fallback([3.0, 3.0, 3.0], 0.1), 0.0);
        let m = -2.5;
        let f = |x: f64| 1.0 + m * x;
        assert!((fd_gradient_fallback([f(0.9), f(1.0), f(1.1)], 0.1) - m).abs() < 1e-13);
        // quadratic: derivative at the midpoint is exact
        let q = |x: f64| 0.3 * x * x - x + 2.0;
        let d = fd_gradient_fallback([q(1.5), q(2.0), q(2.5)], 0.5);
        assert!((d - (0.6 * 2.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn slope_velocities_by_form() {
        let mut p = IwmParams::no_flow(0.1, SublayerForm::Modified);
        p.u_tau = 0.5;
        p.u_tau_x = -0.3;
        p.u_tau_z = 0.4;
        let g = p.slope_velocities();
        assert!((g[0] + 0.09 / 0.5).abs() < 1e-15);
        assert!((g[1] - 0.16 / 0.5).abs() < 1e-15);
        p.form = SublayerForm::Legacy;
        assert_eq!(p.slope_velocities(), [-0.3, 0.4]);
    }

    #[test]
    fn invalid_model_and_matching_rejected() {
        assert!(IwmModel::new(0.0, 1e-5, 1.0).is_err());
        assert!(IwmModel::new(0.1, 1e-5, 1.0)
            .unwrap()
            .with_time_filter(Some(-1.0))
            .validate()
            .is_err());
        assert!(MatchingData::steady(1.0, 0.0, -0.1).validate().is_err());
        assert!(MatchingData::steady(f64::NAN, 0.0, 0.1).validate().is_err());
    }
}
