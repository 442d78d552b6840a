use std::fmt::Write as _;
use std::time::Instant;

use wallmodel_core::closure::ClosureConstants;
use wallmodel_core::eqwm::{
    optimal_point_count, solve_with, EqwmMethod, OptimalCount, WallModelInput, REFERENCE_POINTS,
    SYNTHETIC_H_OVER_DELTA,
};

use crate::HarnessError;

pub const BENCH_HEADER: &str =
    "model,re_tau,n,tau_w_rel_error,integrand_or_sweep_count,newton_or_secant_iters,flops";
pub const TIMING_HEADER: &str = "wall_time_ns,wall_time_iqr_ns";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: EqwmMethod,
    pub re_tau: f64,
    pub n: usize,
    pub tau_w_rel_error: f64,
    /// Integrand evaluations (spectral) or tridiagonal sweeps (finite volume).
    pub integrand_or_sweep_count: u64,
    pub newton_or_secant_iters: usize,
    pub flops: u64,
    /// Median over the timed repetitions.
    pub wall_time_ns: f64,
    pub wall_time_iqr_ns: f64,
}

impl BenchRecord {
    pub fn csv_row(&self, timing: bool) -> String {
        let mut s = format!(
            "{},{},{},{},{},{},{}",
            self.method.label(),
            self.re_tau,
            self.n,
            self.tau_w_rel_error,
            self.integrand_or_sweep_count,
            self.newton_or_secant_iters,
            self.flops
        );
        if timing {
            let _ = write!(s, ",{},{}", self.wall_time_ns, self.wall_time_iqr_ns);
        }
        s
    }
}

pub fn records_to_csv(records: &[BenchRecord], timing: bool) -> String {
    let mut out = String::from(BENCH_HEADER);
    if timing {
        out.push(',');
        out.push_str(TIMING_HEADER);
    }
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row(timing));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSweep {
    pub methods: Vec<EqwmMethod>,
    pub re_taus: Vec<f64>,
    /// Fixed counts; each method's optimal count when `None`.
    pub counts: Option<Vec<usize>>,
    pub error_target: f64,
    pub reps: usize,
    pub warmups: usize,
}

impl Default for BenchSweep {
    fn default() -> Self {
        Self {
            methods: vec![
                EqwmMethod::SpectralLinear,
                EqwmMethod::SpectralClustered,
                EqwmMethod::FiniteVolume,
            ],
            re_taus: vec![1e3, 1e4, 1e5, 1e6],
            counts: None,
            error_target: 0.03,
            reps: 100,
            warmups: 10,
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Median and interquartile range (linear-interpolated quantiles).
pub fn median_iqr(samples: &[f64]) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (s.len() - 1) as f64;
        let (i, t) = (x.floor() as usize, x.fract());
        if i + 1 < s.len() {
            s[i] + t * (s[i + 1] - s[i])
        } else {
            s[i]
        }
    };
    (q(0.5), q(0.75) - q(0.25))
}

/// Optimal counts over `re_taus` and their log-log slope.
pub fn optimal_count_scaling(
    method: EqwmMethod,
    re_taus: &[f64],
    error_target: f64,
) -> Result<(Vec<OptimalCount>, f64), HarnessError> {
    let counts = re_taus
        .iter()
        .map(|&r| optimal_point_count(r, method, error_target))
        .collect::<Result<Vec<_>, _>>()?;
    let n: Vec<f64> = counts.iter().map(|c| c.count as f64).collect();
    Ok((counts, loglog_slope(re_taus, &n)))
}

/// Solves each `(method, Re_τ, n)` of the sweep `reps` times after
/// `warmups` untimed solves. Single-threaded.
pub fn run_benchmarks(sweep: &BenchSweep) -> Result<Vec<BenchRecord>, HarnessError> {
    if sweep.methods.is_empty() || sweep.re_taus.is_empty() || sweep.reps == 0 {
        return Err(HarnessError::Config("benchmark sweep is empty".into()));
    }
    let constants = ClosureConstants::EQUILIBRIUM;
    let mut records = Vec::new();
    for &method in &sweep.methods {
        for &re_tau in &sweep.re_taus {
            let input =
                WallModelInput::synthetic_log_law(re_tau, SYNTHETIC_H_OVER_DELTA, &constants);
            let reference = solve_with(method, REFERENCE_POINTS, &input, &constants)?.tau_w;
            let counts = match &sweep.counts {
                Some(c) => c.clone(),
                None => vec![optimal_point_count(re_tau, method, sweep.error_target)?.count],
            };
            for n in counts {
                let sol = solve_with(method, n, &input, &constants)?;
                for _ in 0..sweep.warmups {
                    std::hint::black_box(solve_with(
                        method,
                        n,
                        std::hint::black_box(&input),
                        &constants,
                    )?);
                }
                let mut times = Vec::with_capacity(sweep.reps);
                for _ in 0..sweep.reps {
                    let t0 = Instant::now();
                    std::hint::black_box(solve_with(
                        method,
                        n,
                        std::hint::black_box(&input),
                        &constants,
                    )?);
                    times.push(t0.elapsed().as_nanos() as f64);
                }
                let (median, iqr) = median_iqr(&times);
                let sweeps = match method {
                    EqwmMethod::FiniteVolume => sol.iterations as u64,
                    _ => sol.work.kernel_evals,
                };
                records.push(BenchRecord {
                    method,
                    re_tau,
                    n,
                    tau_w_rel_error: (sol.tau_w - reference).abs() / reference,
                    integrand_or_sweep_count: sweeps,
                    newton_or_secant_iters: sol.iterations,
                    flops: sol.work.flops(),
                    wall_time_ns: median,
                    wall_time_iqr_ns: iqr,
                });
            }
        }
    }
    Ok(records)
}
