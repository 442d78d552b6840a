use crate::closure::{equilibrium_velocity_plus, velocity_gradient_plus, ClosureConstants};
use crate::quadrature::{barycentric_interpolate, cached_gll_rule, map_to_physical, DomainMap};

use super::{
    default_tolerance, solve_utau_spectral, EqwmError, EqwmSolution, WallModelInput,
    DEFAULT_MAX_SECANT_ITERS,
};

/// Relative L2 error above which a spectral profile is flagged as spurious.
pub const SPURIOUS_THRESHOLD: f64 = 0.01;

fn check_samples(y_samples: &[f64], h_wm: f64) -> Result<(), EqwmError> {
    for (i, &y) in y_samples.iter().enumerate() {
        if !(0.0..=h_wm * (1.0 + 1e-12)).contains(&y) {
            return Err(EqwmError::OutOfRange { y, h_wm });
        }
        if i > 0 && y < y_samples[i - 1] {
            return Err(EqwmError::InvalidInput(
                "profile samples must be sorted".into(),
            ));
        }
    }
    Ok(())
}

/// Inner-layer velocity `u(y) = u_tau u⁺(y u_tau / nu)` of a converged
/// solution, with `u⁺` integrated to near round-off.
pub fn reconstruct_profile(
    solution: &EqwmSolution,
    input: &WallModelInput,
    constants: &ClosureConstants,
    y_samples: &[f64],
) -> Result<Vec<f64>, EqwmError> {
    input.validate()?;
    check_samples(y_samples, input.h_wm)?;
    let ut = solution.u_tau;
    Ok(y_samples
        .iter()
        .map(|&y| ut * equilibrium_velocity_plus(y.min(input.h_wm) * ut / input.nu, constants))
        .collect())
}

/// Profile as represented by the spectral solution itself: the degree `Q-1`
/// interpolant of the mapped integrand through the solution's `Q` nodes,
/// integrated from the wall. Under-resolved solutions produce oscillating,
/// non-physical profiles here even when `u(h_wm)` matches.
pub fn spectral_profile(
    solution: &EqwmSolution,
    input: &WallModelInput,
    constants: &ClosureConstants,
    y_samples: &[f64],
) -> Result<Vec<f64>, EqwmError> {
    input.validate()?;
    check_samples(y_samples, input.h_wm)?;
    let kind = solution.method.map_kind().ok_or_else(|| {
        EqwmError::Precondition("spectral profile requires a spectral solution".into())
    })?;
    let rule = cached_gll_rule(solution.points)?;
    let dmap = DomainMap::new(kind, input.h_wm)?;
    let ut = solution.u_tau;
    let scale = ut * ut / input.nu;
    // integrand in the reference coordinate, including the map Jacobian
    let values: Vec<f64> = rule
        .nodes()
        .iter()
        .map(|&xi| {
            scale
                * velocity_gradient_plus(dmap.to_physical(xi) * ut / input.nu, constants)
                * dmap.jacobian(xi)
        })
        .collect();
    let bary = rule.barycentric_weights();
    Ok(y_samples
        .iter()
        .map(|&y| {
            let b = dmap.to_reference(y.min(input.h_wm)).clamp(-1.0, 1.0);
            let half = 0.5 * (b + 1.0);
            // GLL with Q points integrates the degree Q-1 interpolant exactly
            half * rule.integrate(|t| {
                barycentric_interpolate(rule.nodes(), &bary, &values, -1.0 + half * (t + 1.0))
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDiagnosis {
    pub spurious: bool,
    /// Relative L2 error against the reference profile.
    pub l2_error: f64,
    pub reference_q: usize,
}

/// Compares the spectral profile of `solution` with that of a `reference_q`
/// point solve using the same map, sampled at the reference nodes.
pub fn detect_spurious_profile(
    solution: &EqwmSolution,
    input: &WallModelInput,
    constants: &ClosureConstants,
    reference_q: usize,
) -> Result<ProfileDiagnosis, EqwmError> {
    let kind = solution.method.map_kind().ok_or_else(|| {
        EqwmError::Precondition("spurious-profile check requires a spectral solution".into())
    })?;
    if reference_q <= solution.points {
        return Err(EqwmError::Precondition(format!(
            "reference Q = {reference_q} must exceed the solution's Q = {}",
            solution.points
        )));
    }
    let rule = cached_gll_rule(reference_q)?;
    let reference = solve_utau_spectral(
        input,
        &rule,
        kind,
        constants,
        default_tolerance(input),
        DEFAULT_MAX_SECANT_ITERS,
    )?;
    let samples = map_to_physical(&rule, &DomainMap::new(kind, input.h_wm)?)?.y_points;
    let u = spectral_profile(solution, input, constants, &samples)?;
    let u_ref = spectral_profile(&reference, input, constants, &samples)?;
    let num: f64 = u.iter().zip(&u_ref).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = u_ref.iter().map(|b| b * b).sum();
    let l2_error = if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    };
    Ok(ProfileDiagnosis {
        spurious: !(l2_error <= SPURIOUS_THRESHOLD),
        l2_error,
        reference_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqwm::{solve_with, EqwmMethod};

    const C: ClosureConstants = ClosureConstants::EQUILIBRIUM;

    #[test]
    fn reconstructed_profile_endpoints() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralClustered, 48, &input, &C).unwrap();
        let ys: Vec<f64> = (0..=50).map(|i| input.h_wm * i as f64 / 50.0).collect();
        let u = reconstruct_profile(&sol, &input, &C, &ys).unwrap();
        assert_eq!(u[0], 0.0);
        assert!((u[50] - input.u_les).abs() < 1e-6 * input.u_les);
        assert!(u.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn samples_outside_layer_rejected() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralLinear, 32, &input, &C).unwrap();
        assert!(matches!(
            reconstruct_profile(&sol, &input, &C, &[0.0, 0.2]),
            Err(EqwmError::OutOfRange { .. })
        ));
        assert!(reconstruct_profile(&sol, &input, &C, &[-1e-3]).is_err());
        assert!(reconstruct_profile(&sol, &input, &C, &[0.05, 0.01]).is_err());
    }

    #[test]
    fn log_law_recovered_in_reconstruction() {
        let re = 1e5;
        let input = WallModelInput::synthetic_log_law(re, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralClustered, 96, &input, &C).unwrap();
        let dnu = input.nu / sol.u_tau;
        let ys: Vec<f64> = (0..20)
            .map(|i| 100.0 * dnu * (10f64).powf(i as f64 / 19.0))
            .collect();
        let u = reconstruct_profile(&sol, &input, &C, &ys).unwrap();
        for (y, u) in ys.iter().zip(u) {
            let intercept = u / sol.u_tau - (y / dnu).ln() / C.kappa;
            assert!((intercept - C.b_log).abs() < 0.5, "B = {intercept}");
        }
    }

    #[test]
    fn spectral_profile_matches_reconstruction_when_resolved() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralClustered, 64, &input, &C).unwrap();
        let ys: Vec<f64> = (0..=20).map(|i| input.h_wm * i as f64 / 20.0).collect();
        let a = spectral_profile(&sol, &input, &C, &ys).unwrap();
        let b = reconstruct_profile(&sol, &input, &C, &ys).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6 * input.u_les);
        }
    }

    #[test]
    fn resolved_solution_is_not_spurious() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralLinear, 200, &input, &C).unwrap();
        let d = detect_spurious_profile(&sol, &input, &C, 256).unwrap();
        assert!(!d.spurious);
        assert!(d.l2_error < 1e-6, "{}", d.l2_error);
    }

    #[test]
    fn under_resolved_linear_map_is_spurious() {
        let input = WallModelInput::synthetic_log_law(2.1e5, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralLinear, 12, &input, &C).unwrap();
        let d = detect_spurious_profile(&sol, &input, &C, 256).unwrap();
        assert!(d.spurious, "{}", d.l2_error);
    }

    #[test]
    fn reference_must_be_finer() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let sol = solve_with(EqwmMethod::SpectralLinear, 64, &input, &C).unwrap();
        assert!(matches!(
            detect_spurious_profile(&sol, &input, &C, 64),
            Err(EqwmError::Precondition(_))
        ));
        let fv = solve_with(EqwmMethod::FiniteVolume, 40, &input, &C).unwrap();
        assert!(detect_spurious_profile(&fv, &input, &C, 256).is_err());
    }
}
