//! Mixing-length closure with Van Driest damping, shared by the equilibrium
//! and integral wall models.

use crate::quadrature::cached_gll_rule;

/// Turbulence-closure constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureConstants {
    /// von Kármán constant.
    pub kappa: f64,
    /// Van Driest damping constant.
    pub a_plus: f64,
    /// Log-law intercept.
    pub b_log: f64,
}

impl ClosureConstants {
    /// Constants for the equilibrium (mixing-length ODE) model: κ = 0.41,
    /// A⁺ = 26, B = 5.2.
    pub const EQUILIBRIUM: Self = Self {
        kappa: 0.41,
        a_plus: 26.0,
        b_log: 5.2,
    };

    /// Constants of the integral wall model: κ = 0.4, B = 5 (A⁺ = 26 for the
    /// eddy viscosity at the matching height).
    pub const INTEGRAL: Self = Self {
        kappa: 0.4,
        a_plus: 26.0,
        b_log: 5.0,
    };

    pub fn is_valid(&self) -> bool {
        self.kappa > 0.0 && self.a_plus > 0.0 && self.b_log > 0.0
    }

    /// Log-law velocity `(1/κ) ln y⁺ + B`.
    pub fn log_law(&self, y_plus: f64) -> f64 {
        y_plus.ln() / self.kappa + self.b_log
    }
}

impl Default for ClosureConstants {
    fn default() -> Self {
        Self::EQUILIBRIUM
    }
}

/// Van Driest mixing length in wall units, `κ y⁺ [1 - exp(-y⁺/A⁺)]`.
pub fn mixing_length_plus(y_plus: f64, constants: &ClosureConstants) -> f64 {
    -constants.kappa * y_plus * (-y_plus / constants.a_plus).exp_m1()
}

/// Positive root of `du⁺/dy⁺ + (l⁺ du⁺/dy⁺)^2 = 1`.
pub fn velocity_gradient_plus(y_plus: f64, constants: &ClosureConstants) -> f64 {
    let lm = mixing_length_plus(y_plus, constants);
    2.0 / (1.0 + (1.0 + 4.0 * lm * lm).sqrt())
}

/// Eddy viscosity from the mixing-length hypothesis, `l_m^2 |du/dy|`.
pub fn eddy_viscosity(mixing_length: f64, dudy: f64) -> f64 {
    mixing_length * mixing_length * dudy.abs()
}

/// Equilibrium eddy viscosity `ν (l⁺)^2 du⁺/dy⁺` at `y⁺`, i.e. `l_m^2 |du/dy|`
/// with the gradient of the constant-stress solution.
pub fn equilibrium_eddy_viscosity(y_plus: f64, nu: f64, constants: &ClosureConstants) -> f64 {
    let lm = mixing_length_plus(y_plus, constants);
    nu * lm * lm * velocity_gradient_plus(y_plus, constants)
}

/// Friction velocity implied by the algebraic log law for velocity `u` at
/// height `h`; falls back to the viscous-sublayer relation when the match
/// point is closer to the wall than the log/linear intersection.
pub fn log_law_friction_velocity(u: f64, h: f64, nu: f64, constants: &ClosureConstants) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let viscous = (nu * u / h).sqrt();
    if h * viscous / nu <= crossover_y_plus(constants) {
        return viscous;
    }
    // Newton on f(ut) = ut (ln(h ut / nu)/κ + B) - u, increasing in ut.
    let mut ut = viscous;
    for _ in 0..100 {
        let f = ut * constants.log_law(h * ut / nu) - u;
        let df = constants.log_law(h * ut / nu) + 1.0 / constants.kappa;
        let next = ut - f / df;
        let next = if next <= 0.0 { 0.5 * ut } else { next };
        if (next - ut).abs() <= 1e-15 * ut {
            return next;
        }
        ut = next;
    }
    ut
}

/// `y⁺` where the linear sublayer meets the log law, `y⁺ = (1/κ) ln y⁺ + B`.
pub fn crossover_y_plus(constants: &ClosureConstants) -> f64 {
    let mut y = 11.0;
    for _ in 0..60 {
        let f = y - constants.log_law(y);
        let df = 1.0 - 1.0 / (constants.kappa * y);
        let next = y - f / df;
        if (next - y).abs() < 1e-15 * y {
            return next;
        }
        y = next;
    }
    y
}

/// Accurate `u⁺(y⁺) = ∫_0^{y⁺} du⁺/dy⁺ dy'` by composite 24-point GLL panels
/// on doubling intervals; relative error near round-off.
pub fn equilibrium_velocity_plus(y_plus: f64, constants: &ClosureConstants) -> f64 {
    if y_plus <= 0.0 {
        return 0.0;
    }
    let rule = cached_gll_rule(24).expect("24-point rule");
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = y_plus.min(1.0);
    loop {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        total += half * rule.integrate(|xi| velocity_gradient_plus(mid + half * xi, constants));
        if b >= y_plus {
            break;
        }
        a = b;
        b = (2.0 * b).min(y_plus);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const C: ClosureConstants = ClosureConstants {
        kappa: 0.4,
        a_plus: 26.0,
        b_log: 5.0,
    };

    #[test]
    fn mixing_length_values() {
        assert_eq!(mixing_length_plus(0.0, &C), 0.0);
        assert_relative_eq!(
            mixing_length_plus(26.0, &C),
            0.4 * 26.0 * (1.0 - (-1.0f64).exp()),
            max_relative = 1e-15
        );
        let far = mixing_length_plus(1000.0, &C);
        assert!(((far - 400.0) / 400.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_limits() {
        assert_eq!(velocity_gradient_plus(0.0, &C), 1.0);
        let g = velocity_gradient_plus(1e4, &C);
        let log_slope = 1.0 / (0.4 * 1e4);
        assert!(((g - log_slope) / log_slope).abs() < 0.02);
    }

    #[test]
    fn gradient_solves_the_stress_balance() {
        for k in 0..200 {
            let yp = 0.37 * k as f64 * (1.0 + k as f64 / 10.0);
            let g = velocity_gradient_plus(yp, &C);
            let lm = mixing_length_plus(yp, &C);
            assert!((g + (lm * g).powi(2) - 1.0).abs() < 1e-12, "y+ = {yp}");
            assert!(g > 0.0 && g <= 1.0);
        }
    }

    #[test]
    fn crossover_is_about_eleven() {
        let y = crossover_y_plus(&C);
        assert_eq!(y.round(), 11.0);
        assert!((y - C.log_law(y)).abs() < 1e-10);
    }

    #[test]
    fn log_law_inversion_round_trips() {
        let nu = 1e-5;
        let h = 0.1;
        let ut = 0.05;
        let u = ut * C.log_law(h * ut / nu);
        assert_relative_eq!(
            log_law_friction_velocity(u, h, nu, &C),
            ut,
            max_relative = 1e-13
        );
        assert_eq!(log_law_friction_velocity(0.0, h, nu, &C), 0.0);
        // viscous regime
        let u_lam = 1e-4;
        let h_small = 1e-3;
        assert_relative_eq!(
            log_law_friction_velocity(u_lam, h_small, nu, &C),
            (nu * u_lam / h_small).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn velocity_plus_matches_simpson_oracle() {
        // composite Simpson on a fine uniform grid, independent of GLL
        let simpson = |b: f64, n: usize| {
            let h = b / n as f64;
            let f = |x: f64| velocity_gradient_plus(x, &C);
            let mut s = f(0.0) + f(b);
            for i in 1..n {
                s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        for yp in [0.5, 5.0, 30.0, 100.0, 1000.0] {
            let oracle = simpson(yp, 200_000);
            assert_relative_eq!(
                equilibrium_velocity_plus(yp, &C),
                oracle,
                max_relative = 1e-10
            );
        }
    }
}
