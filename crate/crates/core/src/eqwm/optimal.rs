use crate::closure::ClosureConstants;

use super::{solve_with, EqwmError, EqwmMethod, WallModelInput};

/// Largest point or cell count the search will try.
pub const POINT_CAP: usize = 1024;

/// Resolution of the same-method reference solve.
pub const REFERENCE_POINTS: usize = 2048;

/// Matching height, in outer units, for [`optimal_point_count`].
pub const SYNTHETIC_H_OVER_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalCount {
    pub method: EqwmMethod,
    pub count: usize,
    /// Relative τ_w error at `count`.
    pub error: f64,
    pub reference_tau_w: f64,
    /// Solves performed by the search, excluding the reference.
    pub solves: usize,
}

/// Smallest count for `method` whose τ_w is within `error_target` of a
/// high-resolution solve, for a synthetic log-law channel at `re_tau`.
pub fn optimal_point_count(
    re_tau: f64,
    method: EqwmMethod,
    error_target: f64,
) -> Result<OptimalCount, EqwmError> {
    if !(re_tau > 0.0 && re_tau.is_finite()) {
        return Err(EqwmError::InvalidInput(format!("re_tau = {re_tau}")));
    }
    let constants = ClosureConstants::EQUILIBRIUM;
    let input = WallModelInput::synthetic_log_law(re_tau, SYNTHETIC_H_OVER_DELTA, &constants);
    optimal_point_count_for(&input, method, &constants, error_target, POINT_CAP)
}

/// Bisection over `[2, cap]` on the relative τ_w error, assuming the error
/// drops below the target for good once it first does.
pub fn optimal_point_count_for(
    input: &WallModelInput,
    method: EqwmMethod,
    constants: &ClosureConstants,
    error_target: f64,
    cap: usize,
) -> Result<OptimalCount, EqwmError> {
    if !(error_target > 0.0 && error_target < 1.0) {
        return Err(EqwmError::InvalidInput(format!(
            "error target {error_target} outside (0, 1)"
        )));
    }
    if !(2..REFERENCE_POINTS).contains(&cap) {
        return Err(EqwmError::InvalidInput(format!(
            "cap {cap} outside [2, {REFERENCE_POINTS})"
        )));
    }
    let reference = solve_with(method, REFERENCE_POINTS, input, constants)?.tau_w;
    let mut solves = 0;
    let mut error_at = |n: usize| -> f64 {
        solves += 1;
        match solve_with(method, n, input, constants) {
            Ok(s) if reference > 0.0 => ((s.tau_w - reference) / reference).abs(),
            Ok(s) => s.tau_w.abs(),
            Err(_) => f64::INFINITY,
        }
    };
    let at_cap = error_at(cap);
    if !(at_cap <= error_target) {
        return Err(EqwmError::Saturated {
            cap,
            target: error_target,
            error: at_cap,
        });
    }
    let (mut fail, mut pass, mut pass_error) = (1usize, cap, at_cap);
    while pass - fail > 1 {
        let mid = (fail + pass) / 2;
        let e = error_at(mid);
        if e <= error_target {
            pass = mid;
            pass_error = e;
        } else {
            fail = mid;
        }
    }
    Ok(OptimalCount {
        method,
        count: pass,
        error: pass_error,
        reference_tau_w: reference,
        solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_meets_target_and_predecessor_does_not() {
        let c = ClosureConstants::EQUILIBRIUM;
        let input = WallModelInput::synthetic_log_law(1e4, 0.1, &c);
        let opt = optimal_point_count_for(&input, EqwmMethod::SpectralLinear, &c, 0.03, POINT_CAP)
            .unwrap();
        assert!(opt.error <= 0.03);
        let before = solve_with(EqwmMethod::SpectralLinear, opt.count - 1, &input, &c).unwrap();
        assert!(((before.tau_w - opt.reference_tau_w) / opt.reference_tau_w).abs() > 0.03);
    }

    #[test]
    fn saturation_is_reported() {
        let c = ClosureConstants::EQUILIBRIUM;
        let input = WallModelInput::synthetic_log_law(1e6, 0.1, &c);
        let err =
            optimal_point_count_for(&input, EqwmMethod::SpectralLinear, &c, 1e-9, 4).unwrap_err();
        assert!(matches!(err, EqwmError::Saturated { cap: 4, .. }));
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(optimal_point_count(-1.0, EqwmMethod::FiniteVolume, 0.03).is_err());
        assert!(optimal_point_count(1e3, EqwmMethod::FiniteVolume, 0.0).is_err());
        assert!(optimal_point_count(1e3, EqwmMethod::FiniteVolume, 1.0).is_err());
    }

    #[test]
    fn clustered_needs_no_more_points_than_linear() {
        let lin = optimal_point_count(1e5, EqwmMethod::SpectralLinear, 0.03).unwrap();
        let clu = optimal_point_count(1e5, EqwmMethod::SpectralClustered, 0.03).unwrap();
        assert!(clu.count <= lin.count, "{} > {}", clu.count, lin.count);
    }
}
