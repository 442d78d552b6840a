use wallmodel_core::closure::ClosureConstants;
use wallmodel_core::eqwm::{
    optimal_point_count_for, reconstruct_profile, solve_with, WallModelInput, POINT_CAP,
};
use wallmodel_core::iwm::{
    advance_face, composite_profile, plug_flow_state, IwmModel, MatchingData, SublayerForm,
};

use crate::config::{DriverConfig, ModelSelector};
use crate::profile::{sample_matching_velocity, ReferenceProfile};
use crate::HarnessError;

/// Lower `y⁺` bound of the profile-deviation window.
pub const DEVIATION_WINDOW_START: f64 = 30.0;

pub const APRIORI_HEADER: &str = "model,re_tau,points,u_les_plus,u_tau,tau_w,tau_w_rel_error,profile_l2_error,max_profile_deviation,iterations";

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub model: ModelSelector,
    pub re_tau: f64,
    /// Points or cells; 0 for the integral model.
    pub points: usize,
    pub u_les_plus: f64,
    pub u_tau: f64,
    pub tau_w: f64,
    /// Against the reference friction scaling `u_τ⁺ = 1`.
    pub tau_w_rel_error: f64,
    /// Relative L2 error over reference samples in `(0, h_wm⁺]`.
    pub profile_l2_error: f64,
    /// Largest relative deviation for `30 < y⁺ < h_wm⁺`.
    pub max_profile_deviation: f64,
    /// Secant/Picard iterations, or accumulated Newton iterations.
    pub iterations: usize,
}

impl AprioriReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.model.label(),
            self.re_tau,
            self.points,
            self.u_les_plus,
            self.u_tau,
            self.tau_w,
            self.tau_w_rel_error,
            self.profile_l2_error,
            self.max_profile_deviation,
            self.iterations
        )
    }
}

fn compare(
    profile: &ReferenceProfile,
    h_plus: f64,
    mut model_u_plus: impl FnMut(&[f64]) -> Result<Vec<f64>, HarnessError>,
) -> Result<(f64, f64), HarnessError> {
    let (ys, refs): (Vec<f64>, Vec<f64>) = profile
        .y_plus()
        .iter()
        .zip(profile.u_plus())
        .filter(|(y, _)| **y > 0.0 && **y <= h_plus)
        .map(|(y, u)| (*y, *u))
        .unzip();
    if ys.is_empty() {
        return Err(HarnessError::Data(
            "no reference samples below the matching height".into(),
        ));
    }
    let got = model_u_plus(&ys)?;
    let num: f64 = got.iter().zip(&refs).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = refs.iter().map(|b| b * b).sum();
    let dev = ys
        .iter()
        .zip(got.iter().zip(&refs))
        .filter(|(y, _)| **y > DEVIATION_WINDOW_START && **y < h_plus)
        .map(|(_, (a, b))| (a - b).abs() / b)
        .fold(0.0, f64::max);
    Ok(((num / den).sqrt(), dev))
}

/// Drives the selected model with the reference velocity at the matching
/// height and compares against the reference scaling and profile.
pub fn run_apriori(
    config: &DriverConfig,
    profile: &ReferenceProfile,
) -> Result<AprioriReport, HarnessError> {
    config.validate()?;
    let re_tau = config.re_tau;
    let nu = config.nu();
    let h = config.h_wm();
    let h_plus = h * re_tau;
    let u_les = sample_matching_velocity(profile, config.h_wm_over_delta, re_tau)?;
    // outer units: δ = 1, reference u_τ = 1, so u = u⁺
    let to_y = |yp: &[f64]| -> Vec<f64> { yp.iter().map(|y| y / re_tau).collect() };

    match config.model.eqwm_method() {
        Some(method) => {
            let constants = ClosureConstants::EQUILIBRIUM;
            let input = WallModelInput::new(u_les, h, nu, 1.0)?;
            let n = match config.n {
                Some(n) => n,
                None => {
                    optimal_point_count_for(
                        &input,
                        method,
                        &constants,
                        config.error_target,
                        POINT_CAP,
                    )?
                    .count
                }
            };
            let sol = solve_with(method, n, &input, &constants)?;
            let (l2, dev) = compare(profile, h_plus, |yp| {
                Ok(reconstruct_profile(&sol, &input, &constants, &to_y(yp))?)
            })?;
            Ok(AprioriReport {
                model: config.model,
                re_tau,
                points: n,
                u_les_plus: u_les,
                u_tau: sol.u_tau,
                tau_w: sol.tau_w,
                tau_w_rel_error: (sol.tau_w - 1.0).abs(),
                profile_l2_error: l2,
                max_profile_deviation: dev,
                iterations: sol.iterations,
            })
        }
        None => {
            let form = if config.model == ModelSelector::IwmLegacy {
                SublayerForm::Legacy
            } else {
                SublayerForm::Modified
            };
            let model = IwmModel::new(h, nu, 1.0)?
                .with_form(form)
                .with_time_filter(config.time_filter);
            let mut state = plug_flow_state([u_les, 0.0], &model)?;
            let mut iterations = 0;
            let drive = MatchingData::steady(u_les, 0.0, config.dt);
            for _ in 0..config.steps {
                let (next, report) = advance_face(&state, &drive, &model)?;
                iterations += report.newton_iterations;
                state = next;
            }
            let params = state.params;
            let (l2, dev) = compare(profile, h_plus, |yp| {
                to_y(yp)
                    .iter()
                    .map(|&y| Ok(composite_profile(&params, &model, y)?.0))
                    .collect()
            })?;
            let tau_w = state.tau_w_x.hypot(state.tau_w_z);
            Ok(AprioriReport {
                model: config.model,
                re_tau,
                points: 0,
                u_les_plus: u_les,
                u_tau: params.u_tau,
                tau_w,
                tau_w_rel_error: (tau_w - 1.0).abs(),
                profile_l2_error: l2,
                max_profile_deviation: dev,
                iterations,
            })
        }
    }
}
