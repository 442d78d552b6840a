use crate::closure::{crossover_y_plus, mixing_length_plus, ClosureConstants};

use super::{IntegralTerms, IwmError, IwmModel, IwmParams};

/// Sublayer height in wall units for the integral model's constants.
pub fn sublayer_height() -> f64 {
    sublayer_height_for(&ClosureConstants::INTEGRAL)
}

/// Root of `δ⁺ = (1/κ) ln δ⁺ + B`.
pub fn sublayer_height_for(constants: &ClosureConstants) -> f64 {
    crossover_y_plus(constants)
}

/// Velocity components `(u, w)` of the composite profile at height `y`.
pub fn composite_profile(
    params: &IwmParams,
    model: &IwmModel,
    y: f64,
) -> Result<(f64, f64), IwmError> {
    let h = model.h_wm;
    if !(0.0..=h).contains(&y) {
        return Err(IwmError::OutOfRange { y, h_wm: h });
    }
    let g = params.slope_velocities();
    let ut = params.u_tau;
    if y <= params.delta_i {
        let s = ut * y / model.nu;
        return Ok((g[0] * s, g[1] * s));
    }
    let ln = (y / h).ln() / model.constants.kappa;
    let eta = y / h;
    Ok((
        g[0] * ln + ut * (params.c_x + params.a_x * eta),
        g[1] * ln + ut * (params.c_z + params.a_z * eta),
    ))
}

/// Antiderivative integrals of the outer profile basis over `[η0, 1]`.
struct OuterBasis {
    one: f64,
    ln: f64,
    ln2: f64,
    eta: f64,
    eta_ln: f64,
    eta2: f64,
}

impl OuterBasis {
    fn new(eta0: f64) -> Self {
        if eta0 >= 1.0 {
            return Self {
                one: 0.0,
                ln: 0.0,
                ln2: 0.0,
                eta: 0.0,
                eta_ln: 0.0,
                eta2: 0.0,
            };
        }
        let l0 = if eta0 > 0.0 { eta0.ln() } else { 0.0 };
        // η0 ln η0 → 0 as η0 → 0
        let e_l = eta0 * l0;
        Self {
            one: 1.0 - eta0,
            ln: -1.0 - e_l + eta0,
            ln2: 2.0 - (e_l * l0 - 2.0 * e_l + 2.0 * eta0),
            eta: 0.5 * (1.0 - eta0 * eta0),
            eta_ln: -0.25 - (0.5 * eta0 * e_l - 0.25 * eta0 * eta0),
            eta2: (1.0 - eta0 * eta0 * eta0) / 3.0,
        }
    }
}

/// Closed-form vertical integrals `L_x, L_z, L_xx, L_zz, L_xz`.
pub fn integral_terms(params: &IwmParams, model: &IwmModel) -> Result<IntegralTerms, IwmError> {
    let h = model.h_wm;
    if !params.is_valid(h) {
        return Err(IwmError::InvalidState(format!(
            "δ_i = {} with h_wm = {h}: {params:?}",
            params.delta_i
        )));
    }
    let d = params.delta_i.min(h);
    let ut = params.u_tau;
    let g = params.slope_velocities();
    let basis = OuterBasis::new(d / h);
    // per component: sublayer slope m, outer u = a ln η + b + c η
    let m = [g[0] * ut / model.nu, g[1] * ut / model.nu];
    let a = [g[0] / model.constants.kappa, g[1] / model.constants.kappa];
    let b = [ut * params.c_x, ut * params.c_z];
    let c = [ut * params.a_x, ut * params.a_z];
    let first =
        |i: usize| 0.5 * m[i] * d * d + h * (a[i] * basis.ln + b[i] * basis.one + c[i] * basis.eta);
    let second = |i: usize, j: usize| {
        m[i] * m[j] * d * d * d / 3.0
            + h * (a[i] * a[j] * basis.ln2
                + (a[i] * b[j] + a[j] * b[i]) * basis.ln
                + (a[i] * c[j] + a[j] * c[i]) * basis.eta_ln
                + b[i] * b[j] * basis.one
                + (b[i] * c[j] + b[j] * c[i]) * basis.eta
                + c[i] * c[j] * basis.eta2)
    };
    Ok(IntegralTerms {
        l_x: first(0),
        l_z: first(1),
        l_xx: second(0, 0),
        l_zz: second(1, 1),
        l_xz: second(0, 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallStresses {
    pub tau_w_x: f64,
    pub tau_w_z: f64,
    pub tau_h_x: f64,
    pub tau_h_z: f64,
}

impl WallStresses {
    pub fn wall_magnitude(&self) -> f64 {
        self.tau_w_x.hypot(self.tau_w_z)
    }
}

/// Wall stress from the sublayer slope and total stress at `h_wm` with the
/// damped mixing-length eddy viscosity.
pub fn wall_and_matching_stress(params: &IwmParams, model: &IwmModel) -> WallStresses {
    let h = model.h_wm;
    let ut = params.u_tau;
    let g = params.slope_velocities();
    let dudy = if params.delta_i >= h {
        [g[0] * ut / model.nu, g[1] * ut / model.nu]
    } else {
        [
            (g[0] / model.constants.kappa + ut * params.a_x) / h,
            (g[1] / model.constants.kappa + ut * params.a_z) / h,
        ]
    };
    let lm = mixing_length_plus(h * ut / model.nu, &model.constants) * model.nu
        / ut.max(f64::MIN_POSITIVE);
    let nu_t = if ut > 0.0 {
        lm * lm * dudy[0].hypot(dudy[1])
    } else {
        0.0
    };
    let nu_eff = model.nu + nu_t;
    WallStresses {
        tau_w_x: model.rho * g[0] * ut,
        tau_w_z: model.rho * g[1] * ut,
        tau_h_x: model.rho * nu_eff * dudy[0],
        tau_h_z: model.rho * nu_eff * dudy[1],
    }
}
