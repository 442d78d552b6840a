use std::f64::consts::SQRT_2;

use crate::closure::log_law_friction_velocity;
use crate::eqwm::{solve_utau_spectral, WallModelInput};
use crate::newton::{self, NewtonError, NewtonSettings};
use crate::quadrature::{cached_gll_rule, MapKind};

use super::profile::{integral_terms, sublayer_height_for, wall_and_matching_stress};
use super::{
    IntegralTerms, IwmError, IwmFaceState, IwmModel, IwmParams, MatchingData, SublayerForm, Term,
};

/// Column order of [`IwmFaceState::to_csv_row`].
pub const CHECKPOINT_HEADER: &str = "face,u_tau,u_tau_x,u_tau_z,a_x,a_z,c_x,c_z,delta_i,l_x,l_z,l_xx,l_zz,l_xz,tau_w_x,tau_w_z,tau_h_x,tau_h_z,time";

/// Quadrature points of the equilibrium reseed.
const RESEED_Q: usize = 64;

/// Diagnostics of one face update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvanceReport {
    pub newton_iterations: usize,
    pub residual_norm: f64,
    /// Newton failure that triggered the equilibrium reseed.
    pub fallback: Option<NewtonError>,
    /// The matching point sat inside the sublayer; viscous profile used.
    pub viscous: bool,
}

/// Scaled closure residuals of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureResiduals {
    /// `|u_τ(C_i + A_i) - U_i| / max(|U|, u_τ)`.
    pub matching: [f64; 2],
    /// Jump between the sublayer and outer branches at `δ_i`, same scale.
    pub continuity: [f64; 2],
    /// `|δ_i u_τ/ν - δ⁺| / δ⁺`.
    pub sublayer: f64,
}

impl ClosureResiduals {
    pub fn max(&self) -> f64 {
        self.matching
            .iter()
            .chain(&self.continuity)
            .fold(self.sublayer, |m, v| m.max(*v))
    }
}

fn speed(u: [f64; 2]) -> f64 {
    u[0].hypot(u[1])
}

fn is_viscous(u: [f64; 2], model: &IwmModel, delta_plus: f64) -> bool {
    speed(u) * model.h_wm / model.nu <= delta_plus * delta_plus
}

fn friction_components(form: SublayerForm, g: [f64; 2], u_tau: f64) -> [f64; 2] {
    match form {
        SublayerForm::Modified => [
            g[0].signum() * (g[0].abs() * u_tau).sqrt(),
            g[1].signum() * (g[1].abs() * u_tau).sqrt(),
        ],
        SublayerForm::Legacy => g,
    }
}

/// Parameters fixed by the sublayer slopes `g` and the matching velocity:
/// `δ_i` from the sublayer height, `C_i` from continuity at `δ_i` and `A_i`
/// from matching at `h_wm`. `None` if the sublayer reaches `h_wm`.
pub fn closure_params(
    form: SublayerForm,
    g: [f64; 2],
    u_tau: f64,
    u_match: [f64; 2],
    model: &IwmModel,
) -> Option<IwmParams> {
    let delta_plus = sublayer_height_for(&model.constants);
    closure_params_with(form, g, u_tau, u_match, model, delta_plus)
}

fn closure_params_with(
    form: SublayerForm,
    g: [f64; 2],
    u_tau: f64,
    u_match: [f64; 2],
    model: &IwmModel,
    delta_plus: f64,
) -> Option<IwmParams> {
    if !(u_tau > 0.0 && u_tau.is_finite()) {
        return None;
    }
    let delta = delta_plus * model.nu / u_tau;
    let eta0 = delta / model.h_wm;
    if !(eta0 < 1.0) {
        return None;
    }
    let jump = delta_plus - eta0.ln() / model.constants.kappa;
    let coeffs = |i: usize| {
        let gh = g[i] / u_tau;
        let a = (u_match[i] / u_tau - gh * jump) / (1.0 - eta0);
        (a, gh * jump - a * eta0)
    };
    let (a_x, c_x) = coeffs(0);
    let (a_z, c_z) = coeffs(1);
    let ut = friction_components(form, g, u_tau);
    Some(IwmParams {
        u_tau,
        u_tau_x: ut[0],
        u_tau_z: ut[1],
        a_x,
        a_z,
        c_x,
        c_z,
        delta_i: delta,
        form,
    })
}

/// Linear profile through the whole layer matching `u_match`.
fn viscous_params(form: SublayerForm, u_match: [f64; 2], model: &IwmModel) -> IwmParams {
    let mag = speed(u_match);
    if mag == 0.0 {
        return IwmParams::no_flow(model.h_wm, form);
    }
    let ut = (mag * model.nu / model.h_wm).sqrt();
    let g = [ut * u_match[0] / mag, ut * u_match[1] / mag];
    let comps = friction_components(form, g, ut);
    IwmParams {
        u_tau: ut,
        u_tau_x: comps[0],
        u_tau_z: comps[1],
        a_x: 0.0,
        a_z: 0.0,
        c_x: u_match[0] / ut,
        c_z: u_match[1] / ut,
        delta_i: model.h_wm,
        form,
    }
}

/// Unknowns of the reduced system for each form.
fn unknowns_to_slopes(form: SublayerForm, x: &[f64]) -> ([f64; 2], f64) {
    match form {
        SublayerForm::Modified => ([x[0], x[1]], x[0].hypot(x[1])),
        SublayerForm::Legacy => ([x[0], x[0]], SQRT_2 * x[0].abs()),
    }
}

fn slopes_to_unknowns(params: &IwmParams) -> Vec<f64> {
    let g = params.slope_velocities();
    match params.form {
        SublayerForm::Modified => g.to_vec(),
        SublayerForm::Legacy => vec![g[0]],
    }
}

/// Equilibrium-seeded unknowns: `u_τ` from the log law of `constants`.
fn seed_unknowns(form: SublayerForm, u_match: [f64; 2], model: &IwmModel) -> Vec<f64> {
    let mag = speed(u_match);
    let ut = log_law_friction_velocity(mag, model.h_wm, model.nu, &model.constants);
    match form {
        SublayerForm::Modified => vec![ut * u_match[0] / mag, ut * u_match[1] / mag],
        SublayerForm::Legacy => {
            let s = if u_match[0] + u_match[1] < 0.0 {
                -1.0
            } else {
                1.0
            };
            vec![s * ut / SQRT_2]
        }
    }
}

/// Reduced residual: one entry per momentum equation (modified form) or
/// its projection on the matching-velocity direction (legacy form).
fn project(form: SublayerForm, r: [f64; 2], u_match: [f64; 2]) -> Vec<f64> {
    match form {
        SublayerForm::Modified => r.to_vec(),
        SublayerForm::Legacy => {
            let mag = speed(u_match);
            vec![(r[0] * u_match[0] + r[1] * u_match[1]) / mag]
        }
    }
}

fn state_from_params(
    params: IwmParams,
    model: &IwmModel,
    time: f64,
    filtered: [f64; 2],
) -> Result<IwmFaceState, IwmError> {
    let integrals = integral_terms(&params, model)?;
    let s = wall_and_matching_stress(&params, model);
    Ok(IwmFaceState {
        params,
        integrals,
        tau_w_x: s.tau_w_x,
        tau_w_z: s.tau_w_z,
        tau_h_x: s.tau_h_x,
        tau_h_z: s.tau_h_z,
        time,
        filtered_velocity: filtered,
    })
}

/// Solves for the parameters whose `(L_x, L_z)` equal `targets`.
fn solve_targets(
    targets: [f64; 2],
    u_match: [f64; 2],
    seed: Option<Vec<f64>>,
    model: &IwmModel,
) -> Result<(IwmParams, AdvanceReport), IwmError> {
    let form = model.form;
    let delta_plus = sublayer_height_for(&model.constants);
    if is_viscous(u_match, model, delta_plus) {
        return Ok((
            viscous_params(form, u_match, model),
            AdvanceReport {
                newton_iterations: 0,
                residual_norm: 0.0,
                fallback: None,
                viscous: true,
            },
        ));
    }
    let scale = model.h_wm * speed(u_match);
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let (g, ut) = unknowns_to_slopes(form, x);
        let p = closure_params_with(form, g, ut, u_match, model, delta_plus)?;
        let t = integral_terms(&p, model).ok()?;
        Some(project(
            form,
            [(t.l_x - targets[0]) / scale, (t.l_z - targets[1]) / scale],
            u_match,
        ))
    };
    let seed = seed
        .filter(|s| residual(s).is_some())
        .unwrap_or_else(|| seed_unknowns(form, u_match, model));
    let ut_seed = unknowns_to_slopes(form, &seed).1;
    let x_scale = vec![ut_seed; seed.len()];
    let finish = |x: &[f64]| {
        let (g, ut) = unknowns_to_slopes(form, x);
        closure_params_with(form, g, ut, u_match, model, delta_plus).ok_or_else(|| {
            IwmError::InvalidState(format!("Newton returned an inadmissible state {x:?}"))
        })
    };
    match newton::solve(residual, &seed, &x_scale, &model.newton) {
        Ok(rep) => Ok((
            finish(&rep.x)?,
            AdvanceReport {
                newton_iterations: rep.iterations,
                residual_norm: rep.residual_norm,
                fallback: None,
                viscous: false,
            },
        )),
        Err(err) => {
            let p = equilibrium_reseed(u_match, model).map_err(|e| IwmError::Fallback {
                newton: err.clone(),
                fallback: e.to_string(),
            })?;
            Ok((
                p,
                AdvanceReport {
                    newton_iterations: model.newton.max_iters,
                    residual_norm: f64::NAN,
                    fallback: Some(err),
                    viscous: false,
                },
            ))
        }
    }
}

/// Parameters from the spectral equilibrium solution aligned with the
/// matching velocity.
fn equilibrium_reseed(u_match: [f64; 2], model: &IwmModel) -> Result<IwmParams, IwmError> {
    let mag = speed(u_match);
    let input = WallModelInput::new(mag, model.h_wm, model.nu, model.rho)?;
    let rule = cached_gll_rule(RESEED_Q).map_err(crate::eqwm::EqwmError::from)?;
    let sol = solve_utau_spectral(
        &input,
        &rule,
        MapKind::Clustered,
        &model.constants,
        1e-10 * mag,
        60,
    )?;
    let ut = sol.u_tau;
    let (g, u_tau) = match model.form {
        SublayerForm::Modified => ([ut * u_match[0] / mag, ut * u_match[1] / mag], ut),
        SublayerForm::Legacy => ([ut / SQRT_2, ut / SQRT_2], ut),
    };
    closure_params(model.form, g, u_tau, u_match, model)
        .ok_or_else(|| IwmError::InvalidState("equilibrium reseed inside the sublayer".into()))
}

/// Explicit-Euler right-hand side of the two integral momentum equations,
/// from time-level-`n` stresses and gradients.
fn momentum_rhs(
    state: &IwmFaceState,
    m: &MatchingData,
    u_match: [f64; 2],
    model: &IwmModel,
) -> [f64; 2] {
    let g = &m.grad_terms;
    let div = g.dx(Term::Lx) + g.dz(Term::Lz);
    let h = model.h_wm;
    [
        -g.dx(Term::Lxx) - g.dz(Term::Lxz)
            + u_match[0] * div
            + (-m.dpdx * h + state.tau_h_x - state.tau_w_x) / model.rho,
        -g.dx(Term::Lxz) - g.dz(Term::Lzz)
            + u_match[1] * div
            + (-m.dpdz * h + state.tau_h_z - state.tau_w_z) / model.rho,
    ]
}

fn effective_velocity(state: &IwmFaceState, m: &MatchingData, model: &IwmModel) -> [f64; 2] {
    let raw = [m.u_les, m.w_les];
    match model.time_filter {
        None => raw,
        Some(tf) => {
            let a = (m.dt / tf).min(1.0);
            let f = state.filtered_velocity;
            [f[0] + a * (raw[0] - f[0]), f[1] + a * (raw[1] - f[1])]
        }
    }
}

/// Parameters at time level `n+1`: Newton-Raphson on the time-discretized
/// momentum equations with matching, continuity and sublayer conditions
/// eliminated analytically.
pub fn newton_step_system(
    state: &IwmFaceState,
    m: &MatchingData,
    model: &IwmModel,
) -> Result<(IwmParams, AdvanceReport), IwmError> {
    m.validate()?;
    let u = effective_velocity(state, m, model);
    if speed(u) == 0.0 && state.integrals.l_x == 0.0 && state.integrals.l_z == 0.0 {
        return solve_targets([0.0, 0.0], u, None, model);
    }
    let rhs = momentum_rhs(state, m, u, model);
    let targets = [
        state.integrals.l_x + m.dt * rhs[0],
        state.integrals.l_z + m.dt * rhs[1],
    ];
    let seed = (state.params.u_tau > 0.0
        && state.params.delta_i < model.h_wm
        && state.params.form == model.form)
        .then(|| slopes_to_unknowns(&state.params));
    solve_targets(targets, u, seed, model)
}

/// One explicit-Euler step of a wall face.
pub fn advance_face(
    state: &IwmFaceState,
    m: &MatchingData,
    model: &IwmModel,
) -> Result<(IwmFaceState, AdvanceReport), IwmError> {
    let (params, report) = newton_step_system(state, m, model)?;
    let filtered = effective_velocity(state, m, model);
    Ok((
        state_from_params(params, model, state.time + m.dt, filtered)?,
        report,
    ))
}

/// Initial state for a plug-flow assumption: `L_x = U h`, `L_z = W h`.
pub fn plug_flow_state(u_match: [f64; 2], model: &IwmModel) -> Result<IwmFaceState, IwmError> {
    model.validate()?;
    let targets = [u_match[0] * model.h_wm, u_match[1] * model.h_wm];
    let (p, report) = solve_targets(targets, u_match, None, model)?;
    if let Some(err) = report.fallback {
        return Err(err.into());
    }
    state_from_params(p, model, 0.0, u_match)
}

/// Steady zero-pressure-gradient state with `τ_h = τ_w` per component.
pub fn equilibrium_state(u_match: [f64; 2], model: &IwmModel) -> Result<IwmFaceState, IwmError> {
    model.validate()?;
    let form = model.form;
    let delta_plus = sublayer_height_for(&model.constants);
    if is_viscous(u_match, model, delta_plus) {
        return state_from_params(viscous_params(form, u_match, model), model, 0.0, u_match);
    }
    let seed = seed_unknowns(form, u_match, model);
    let ut_seed = unknowns_to_slopes(form, &seed).1;
    let scale = model.rho * ut_seed * ut_seed;
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let (g, ut) = unknowns_to_slopes(form, x);
        let p = closure_params_with(form, g, ut, u_match, model, delta_plus)?;
        let s = wall_and_matching_stress(&p, model);
        Some(project(
            form,
            [
                (s.tau_h_x - s.tau_w_x) / scale,
                (s.tau_h_z - s.tau_w_z) / scale,
            ],
            u_match,
        ))
    };
    let settings = NewtonSettings {
        tol: 1e-13,
        ..model.newton
    };
    let rep = newton::solve(residual, &seed, &vec![ut_seed; seed.len()], &settings)?;
    let (g, ut) = unknowns_to_slopes(form, &rep.x);
    let p = closure_params_with(form, g, ut, u_match, model, delta_plus)
        .ok_or_else(|| IwmError::InvalidState("equilibrium inside the sublayer".into()))?;
    state_from_params(p, model, 0.0, u_match)
}

/// Closure residuals of `params` for matching velocity `u_match`.
pub fn closure_residuals(
    params: &IwmParams,
    u_match: [f64; 2],
    model: &IwmModel,
) -> ClosureResiduals {
    let delta_plus = sublayer_height_for(&model.constants);
    let ut = params.u_tau;
    let scale = speed(u_match).max(ut).max(f64::MIN_POSITIVE);
    let g = params.slope_velocities();
    let eta0 = params.delta_i / model.h_wm;
    let ln = eta0.ln() / model.constants.kappa;
    let c = [params.c_x, params.c_z];
    let a = [params.a_x, params.a_z];
    let matching = [0, 1].map(|i| (ut * (c[i] + a[i]) - u_match[i]).abs() / scale);
    let continuity = [0, 1].map(|i| {
        let inner = g[i] * ut * params.delta_i / model.nu;
        let outer = g[i] * ln + ut * (c[i] + a[i] * eta0);
        (inner - outer).abs() / scale
    });
    ClosureResiduals {
        matching,
        continuity,
        sublayer: (params.delta_i * ut / model.nu - delta_plus).abs() / delta_plus,
    }
}

/// All eight closure and momentum equations of the modified form in the
/// unknowns `(u_τ, u_τx, u_τz, A_x, A_z, C_x, C_z, δ_i)`, scaled.
pub fn full_residual(
    x: &[f64; 8],
    targets: [f64; 2],
    u_match: [f64; 2],
    model: &IwmModel,
) -> Result<[f64; 8], IwmError> {
    if model.form != SublayerForm::Modified {
        return Err(IwmError::InvalidInput(
            "the full residual is defined for the modified sublayer form".into(),
        ));
    }
    let p = IwmParams {
        u_tau: x[0],
        u_tau_x: x[1],
        u_tau_z: x[2],
        a_x: x[3],
        a_z: x[4],
        c_x: x[5],
        c_z: x[6],
        delta_i: x[7],
        form: SublayerForm::Modified,
    };
    let t = integral_terms(&p, model)?;
    let vel = speed(u_match).max(f64::MIN_POSITIVE);
    let scale_l = model.h_wm * vel;
    let signed = |i: usize| {
        let g = p.slope_velocities();
        let c = [p.c_x, p.c_z][i];
        let a = [p.a_x, p.a_z][i];
        let eta0 = p.delta_i / model.h_wm;
        let inner = g[i] * p.u_tau * p.delta_i / model.nu;
        let outer = g[i] * eta0.ln() / model.constants.kappa + p.u_tau * (c + a * eta0);
        (
            (p.u_tau * (c + a) - u_match[i]) / vel,
            (inner - outer) / vel,
        )
    };
    let (mx, cx) = signed(0);
    let (mz, cz) = signed(1);
    let delta_plus = sublayer_height_for(&model.constants);
    Ok([
        (t.l_x - targets[0]) / scale_l,
        (t.l_z - targets[1]) / scale_l,
        mx,
        mz,
        cx,
        cz,
        (p.delta_i * p.u_tau / model.nu - delta_plus) / delta_plus,
        (p.u_tau_x.powi(4) + p.u_tau_z.powi(4) - p.u_tau.powi(4)) / p.u_tau.powi(4),
    ])
}

impl IwmFaceState {
    /// Matching velocity implied by the parameters, `u_τ (C + A)`.
    pub fn matched_velocity(&self) -> [f64; 2] {
        let p = &self.params;
        [p.u_tau * (p.c_x + p.a_x), p.u_tau * (p.c_z + p.a_z)]
    }

    pub fn to_csv_row(&self, face: usize) -> String {
        let p = &self.params;
        let t = &self.integrals;
        let v = [
            p.u_tau,
            p.u_tau_x,
            p.u_tau_z,
            p.a_x,
            p.a_z,
            p.c_x,
            p.c_z,
            p.delta_i,
            t.l_x,
            t.l_z,
            t.l_xx,
            t.l_zz,
            t.l_xz,
            self.tau_w_x,
            self.tau_w_z,
            self.tau_h_x,
            self.tau_h_z,
            self.time,
        ];
        let mut row = face.to_string();
        for x in v {
            row.push(',');
            row.push_str(&x.to_string());
        }
        row
    }

    /// Inverse of [`to_csv_row`](Self::to_csv_row).
    pub fn from_csv_row(row: &str, form: SublayerForm) -> Result<(usize, Self), IwmError> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != 19 {
            return Err(IwmError::InvalidInput(format!(
                "checkpoint row has {} fields, expected 19",
                fields.len()
            )));
        }
        let face = fields[0]
            .parse::<usize>()
            .map_err(|e| IwmError::InvalidInput(format!("face id {:?}: {e}", fields[0])))?;
        let mut v = [0.0; 18];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .map_err(|e| IwmError::InvalidInput(format!("value {f:?}: {e}")))?;
        }
        let params = IwmParams {
            u_tau: v[0],
            u_tau_x: v[1],
            u_tau_z: v[2],
            a_x: v[3],
            a_z: v[4],
            c_x: v[5],
            c_z: v[6],
            delta_i: v[7],
            form,
        };
        let mut state = Self {
            params,
            integrals: IntegralTerms::from_array([v[8], v[9], v[10], v[11], v[12]]),
            tau_w_x: v[13],
            tau_w_z: v[14],
            tau_h_x: v[15],
            tau_h_z: v[16],
            time: v[17],
            filtered_velocity: [0.0; 2],
        };
        state.filtered_velocity = state.matched_velocity();
        Ok((face, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::ClosureConstants;
    use crate::eqwm::{solve_with, EqwmMethod};
    use crate::iwm::{composite_profile, IntegralGradients};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Channel in outer units at Re_τ = 1000, matched at 0.1 δ.
    fn channel() -> (IwmModel, f64) {
        let model = IwmModel::new(0.1, 1e-3, 1.0).unwrap();
        let u = ClosureConstants::INTEGRAL.log_law(100.0);
        (model, u)
    }

    fn march(
        mut s: IwmFaceState,
        m: &MatchingData,
        model: &IwmModel,
        steps: usize,
    ) -> IwmFaceState {
        for _ in 0..steps {
            s = advance_face(&s, m, model).unwrap().0;
        }
        s
    }

    #[test]
    fn equilibrium_limit_matches_spectral_solution() {
        let (model, u) = channel();
        let start = plug_flow_state([u, 0.0], &model).unwrap();
        let s = march(start, &MatchingData::steady(u, 0.0, 0.01), &model, 1000);
        let input = WallModelInput::new(u, model.h_wm, model.nu, model.rho).unwrap();
        let gq = solve_with(
            EqwmMethod::SpectralClustered,
            64,
            &input,
            &ClosureConstants::EQUILIBRIUM,
        )
        .unwrap();
        assert!(
            ((s.params.u_tau - gq.u_tau) / gq.u_tau).abs() < 0.05,
            "{} vs {}",
            s.params.u_tau,
            gq.u_tau
        );
        assert!(
            s.params.a_x.abs() < 0.05 / model.constants.kappa,
            "A_x = {}",
            s.params.a_x
        );
        assert_eq!(s.params.u_tau_z, 0.0);
    }

    #[test]
    fn no_flow_stays_at_rest() {
        let (model, _) = channel();
        let s0 = plug_flow_state([0.0, 0.0], &model).unwrap();
        let s = march(s0, &MatchingData::steady(0.0, 0.0, 0.01), &model, 5);
        assert_eq!(s.params.u_tau, 0.0);
        assert_eq!([s.tau_w_x, s.tau_w_z, s.tau_h_x, s.tau_h_z], [0.0; 4]);
    }

    #[test]
    fn zero_time_step_keeps_state() {
        let (model, u) = channel();
        let s0 = march(
            plug_flow_state([u, 0.3], &model).unwrap(),
            &MatchingData::steady(u, 0.3, 0.01),
            &model,
            20,
        );
        let (s1, _) = advance_face(&s0, &MatchingData::steady(u, 0.3, 0.0), &model).unwrap();
        assert_eq!(s1.time, s0.time);
        let a = s0.integrals.as_array();
        let b = s1.integrals.as_array();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300));
        }
        assert!(((s1.params.u_tau - s0.params.u_tau) / s0.params.u_tau).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_state_is_stationary() {
        let (model, u) = channel();
        let eq = equilibrium_state([u, 0.2 * u], &model).unwrap();
        let (next, rep) =
            advance_face(&eq, &MatchingData::steady(u, 0.2 * u, 0.01), &model).unwrap();
        assert!(rep.fallback.is_none());
        for (a, b) in eq
            .integrals
            .as_array()
            .iter()
            .zip(&next.integrals.as_array())
        {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} -> {b}");
        }
    }

    #[test]
    fn impulse_relaxes_without_overshoot() {
        let (model, u) = channel();
        let m0 = MatchingData::steady(u, 0.0, 0.01);
        let s0 = equilibrium_state([u, 0.0], &model).unwrap();
        let target = equilibrium_state([1.1 * u, 0.0], &model)
            .unwrap()
            .params
            .u_tau;
        let m1 = MatchingData::steady(1.1 * u, 0.0, 0.01);
        let mut s = advance_face(&s0, &m0, &model).unwrap().0;
        let mut history = vec![];
        for _ in 0..400 {
            s = advance_face(&s, &m1, &model).unwrap().0;
            history.push(s.params.u_tau);
        }
        assert!(((history[399] - target) / target).abs() < 1e-3);
        let dist: Vec<f64> = history.iter().map(|v| (v - target).abs()).collect();
        assert!(
            dist.windows(2)
                .skip(1)
                .all(|w| w[1] <= w[0] + 1e-12 * target),
            "non-monotone relaxation"
        );
        assert!(history.iter().all(|v| *v <= target * 1.01));
    }

    #[test]
    fn closure_residuals_vanish_on_accepted_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (model, u) = channel();
        let mut s = plug_flow_state([u, 0.0], &model).unwrap();
        for _ in 0..200 {
            let m = MatchingData {
                u_les: u * rng.gen_range(0.7..1.3),
                w_les: u * rng.gen_range(-0.5..0.5),
                dpdx: rng.gen_range(-1.0..1.0),
                dpdz: rng.gen_range(-1.0..1.0),
                grad_terms: IntegralGradients::default(),
                dt: 0.002,
            };
            let (next, rep) = advance_face(&s, &m, &model).unwrap();
            assert!(rep.fallback.is_none());
            let r = closure_residuals(&next.params, [m.u_les, m.w_les], &model);
            assert!(r.max() <= 1e-8, "{r:?}");
            s = next;
        }
    }

    #[test]
    fn reduced_solution_satisfies_full_system() {
        let (model, u) = channel();
        let s0 = equilibrium_state([u, 0.4 * u], &model).unwrap();
        let m = MatchingData {
            dpdx: 3.0,
            dpdz: -1.0,
            ..MatchingData::steady(1.05 * u, 0.35 * u, 0.01)
        };
        let (p, _) = newton_step_system(&s0, &m, &model).unwrap();
        let rhs = momentum_rhs(&s0, &m, [m.u_les, m.w_les], &model);
        let targets = [
            s0.integrals.l_x + m.dt * rhs[0],
            s0.integrals.l_z + m.dt * rhs[1],
        ];
        let x = [
            p.u_tau, p.u_tau_x, p.u_tau_z, p.a_x, p.a_z, p.c_x, p.c_z, p.delta_i,
        ];
        let r = full_residual(&x, targets, [m.u_les, m.w_les], &model).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");

        // full 8-unknown Newton from a perturbed start lands on the same state
        let f = |y: &[f64]| -> Option<Vec<f64>> {
            let arr: [f64; 8] = y.try_into().ok()?;
            if arr[0] <= 0.0 || arr[7] <= 0.0 || arr[7] >= model.h_wm {
                return None;
            }
            full_residual(&arr, targets, [m.u_les, m.w_les], &model)
                .ok()
                .map(|v| v.to_vec())
        };
        let start: Vec<f64> = x.iter().map(|v| v * 1.01).collect();
        let scales = [p.u_tau, p.u_tau, p.u_tau, 1.0, 1.0, 1.0, 1.0, p.delta_i];
        let rep = newton::solve(f, &start, &scales, &NewtonSettings::default()).unwrap();
        assert!(((rep.x[0] - p.u_tau) / p.u_tau).abs() < 1e-8);
        assert!((rep.x[3] - p.a_x).abs() < 1e-6 && (rep.x[4] - p.a_z).abs() < 1e-6);
    }

    #[test]
    fn legacy_form_forces_equal_components() {
        let (model, u) = channel();
        let legacy = model.with_form(SublayerForm::Legacy);
        let s = march(
            plug_flow_state([u, 0.0], &legacy).unwrap(),
            &MatchingData::steady(u, 0.0, 0.01),
            &legacy,
            200,
        );
        assert_eq!(s.tau_w_x, s.tau_w_z);
        assert!(s.tau_w_z != 0.0);
    }

    #[test]
    fn modified_form_is_frame_invariant() {
        let (model, u) = channel();
        let vel = [u, 0.3 * u];
        let dp = [2.0, -0.5];
        let run = |theta: f64| {
            let (c, sn) = (theta.cos(), theta.sin());
            let rot = |v: [f64; 2]| [c * v[0] + sn * v[1], -sn * v[0] + c * v[1]];
            let v = rot(vel);
            let p = rot(dp);
            let m = MatchingData {
                dpdx: p[0],
                dpdz: p[1],
                ..MatchingData::steady(v[0], v[1], 0.01)
            };
            let s = march(plug_flow_state(v, &model).unwrap(), &m, &model, 50);
            // back to the reference frame
            [
                c * s.tau_w_x - sn * s.tau_w_z,
                sn * s.tau_w_x + c * s.tau_w_z,
            ]
        };
        let base = run(0.0);
        let mag = base[0].hypot(base[1]);
        for theta in [0.3, 1.2, 2.9, -2.0] {
            let r = run(theta);
            assert!(
                (r[0] - base[0]).hypot(r[1] - base[1]) < 1e-6 * mag,
                "θ = {theta}: {r:?} vs {base:?}"
            );
        }
    }

    #[test]
    fn viscous_matching_point_gives_linear_profile() {
        let model = IwmModel::new(1e-3, 1e-3, 1.0).unwrap();
        let s = plug_flow_state([0.05, 0.0], &model).unwrap();
        assert_eq!(s.params.delta_i, model.h_wm);
        let (u, _) = composite_profile(&s.params, &model, 0.5e-3).unwrap();
        assert!((u - 0.025).abs() < 1e-14);
    }

    #[test]
    fn time_filter_relaxes_matching_velocity() {
        let (model, u) = channel();
        let filtered = model.with_time_filter(Some(0.1));
        let s0 = equilibrium_state([u, 0.0], &filtered).unwrap();
        let (s1, _) =
            advance_face(&s0, &MatchingData::steady(2.0 * u, 0.0, 0.01), &filtered).unwrap();
        assert!((s1.filtered_velocity[0] - 1.1 * u).abs() < 1e-12 * u);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (model, u) = channel();
        let s = equilibrium_state([u, 0.1], &model).unwrap();
        let row = s.to_csv_row(17);
        assert_eq!(row.split(',').count(), CHECKPOINT_HEADER.split(',').count());
        let (id, back) = IwmFaceState::from_csv_row(&row, SublayerForm::Modified).unwrap();
        assert_eq!(id, 17);
        assert_eq!(back.params, s.params);
        assert_eq!(back.integrals, s.integrals);
        assert!(IwmFaceState::from_csv_row("1,2,3", SublayerForm::Modified).is_err());
    }
}
