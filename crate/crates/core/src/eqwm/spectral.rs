use crate::closure::{log_law_friction_velocity, velocity_gradient_plus, ClosureConstants};
use crate::counters::WorkCounters;
use crate::quadrature::{map_to_physical, DomainMap, MapKind, PhysicalQuadrature, QuadratureRule};

use super::{EqwmError, EqwmMethod, EqwmSolution, WallModelInput};

pub const DEFAULT_MAX_SECANT_ITERS: usize = 60;

/// Default shooting tolerance, `1e-8 U_LES`.
pub fn default_tolerance(input: &WallModelInput) -> f64 {
    (1e-8 * input.u_les).max(f64::MIN_POSITIVE)
}

/// Velocity at `h_wm` implied by friction velocity `u_tau`, with the integral
/// evaluated by the mapped quadrature.
fn matched_velocity(
    quad: &PhysicalQuadrature,
    u_tau: f64,
    nu: f64,
    constants: &ClosureConstants,
    work: &mut WorkCounters,
) -> f64 {
    let scale = u_tau * u_tau / nu;
    let inv_dnu = u_tau / nu;
    work.kernel_evals += quad.len() as u64;
    work.quadrature_terms += quad.len() as u64;
    scale * quad.integrate(|y| velocity_gradient_plus(y * inv_dnu, constants))
}

/// Shoots on `u_tau` (secant method) until the quadrature of the equilibrium
/// velocity gradient reproduces `U_LES` within `tol`.
///
/// Every residual evaluation costs exactly `Q` integrand evaluations and
/// `iterations` counts residual evaluations, so
/// `work.kernel_evals == Q * iterations`.
pub fn solve_utau_spectral(
    input: &WallModelInput,
    rule: &QuadratureRule,
    kind: MapKind,
    constants: &ClosureConstants,
    tol: f64,
    max_iters: usize,
) -> Result<EqwmSolution, EqwmError> {
    input.validate()?;
    if !(tol > 0.0) {
        return Err(EqwmError::InvalidInput(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let method = EqwmMethod::from(kind);
    let q = rule.order();
    let mut work = WorkCounters::default();
    if input.u_les == 0.0 {
        return Ok(EqwmSolution::new(0.0, input.rho, 0, 0.0, method, q, work));
    }
    let quad = map_to_physical(rule, &DomainMap::new(kind, input.h_wm)?)?;
    let residual = |ut: f64, work: &mut WorkCounters| {
        matched_velocity(&quad, ut, input.nu, constants, work) - input.u_les
    };

    let mut u0 = log_law_friction_velocity(input.u_les, input.h_wm, input.nu, constants);
    let mut u1 = 1.1 * u0;
    let mut f0 = residual(u0, &mut work);
    let mut evals = 1;
    if f0.abs() <= tol {
        return Ok(EqwmSolution::new(
            u0,
            input.rho,
            evals,
            f0.abs(),
            method,
            q,
            work,
        ));
    }
    let mut f1 = residual(u1, &mut work);
    evals += 1;
    while evals < max_iters {
        if f1.abs() <= tol {
            return Ok(EqwmSolution::new(
                u1,
                input.rho,
                evals,
                f1.abs(),
                method,
                q,
                work,
            ));
        }
        let slope = (f1 - f0) / (u1 - u0);
        if !(slope.is_finite() && slope != 0.0) {
            break;
        }
        let mut u2 = u1 - f1 / slope;
        if !(u2 > 0.0) {
            u2 = 0.5 * u1;
        }
        u0 = u1;
        f0 = f1;
        u1 = u2;
        f1 = residual(u1, &mut work);
        evals += 1;
    }
    if f1.abs() <= tol {
        return Ok(EqwmSolution::new(
            u1,
            input.rho,
            evals,
            f1.abs(),
            method,
            q,
            work,
        ));
    }
    Err(EqwmError::NotConverged {
        method,
        iterations: evals,
        residual: f1.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::equilibrium_velocity_plus;
    use crate::quadrature::build_gll_rule;

    const C: ClosureConstants = ClosureConstants::EQUILIBRIUM;

    #[test]
    fn no_flow_returns_zero_without_iterating() {
        let input = WallModelInput::new(0.0, 0.1, 1e-3, 1.2).unwrap();
        let rule = build_gll_rule(8).unwrap();
        let sol = solve_utau_spectral(&input, &rule, MapKind::Linear, &C, 1e-10, 50).unwrap();
        assert_eq!(sol.u_tau, 0.0);
        assert_eq!(sol.tau_w, 0.0);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.work.kernel_evals, 0);
    }

    #[test]
    fn viscous_layer_recovers_linear_profile() {
        // h+ ~ 0.3: the whole layer is viscous, so U = u_tau^2 h / nu.
        let (u, h, nu) = (1e-4, 1e-3, 1e-5);
        let input = WallModelInput::new(u, h, nu, 1.0).unwrap();
        let rule = build_gll_rule(8).unwrap();
        for kind in [MapKind::Linear, MapKind::Clustered] {
            let sol = solve_utau_spectral(&input, &rule, kind, &C, default_tolerance(&input), 50)
                .unwrap();
            let expect = (nu * u / h).sqrt();
            assert!(
                ((sol.u_tau - expect) / expect).abs() < 5e-3,
                "{kind:?}: {}",
                sol.u_tau
            );
        }
    }

    #[test]
    fn work_is_q_times_iterations() {
        let input = WallModelInput::synthetic_log_law(1e4, 0.1, &C);
        for q in [10, 33, 120] {
            let rule = build_gll_rule(q).unwrap();
            let sol = solve_utau_spectral(
                &input,
                &rule,
                MapKind::Clustered,
                &C,
                default_tolerance(&input),
                60,
            )
            .unwrap();
            assert_eq!(sol.work.kernel_evals, (q * sol.iterations) as u64);
            assert_eq!(sol.tau_w, input.rho * sol.u_tau * sol.u_tau);
        }
    }

    #[test]
    fn converged_solution_satisfies_matching_condition() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let rule = build_gll_rule(64).unwrap();
        let tol = default_tolerance(&input);
        let sol = solve_utau_spectral(&input, &rule, MapKind::Linear, &C, tol, 60).unwrap();
        assert!(sol.residual <= tol);
        // independent check: the exact integral at the converged u_tau
        let u = sol.u_tau * equilibrium_velocity_plus(input.h_wm * sol.u_tau / input.nu, &C);
        assert!((u - input.u_les).abs() < 1e-7 * input.u_les);
    }

    #[test]
    fn non_convergence_is_reported() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let rule = build_gll_rule(16).unwrap();
        let err = solve_utau_spectral(&input, &rule, MapKind::Linear, &C, 1e-30, 3).unwrap_err();
        assert!(matches!(err, EqwmError::NotConverged { iterations: 3, .. }));
    }
}
