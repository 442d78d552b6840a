//! Operation counters used for cost accounting instead of wall-clock time.

use std::ops::AddAssign;

/// Floating-point operation weights for the cost model. A closure kernel
/// evaluation (mixing length + gradient root) costs one `exp`, one `sqrt`
/// and a handful of multiply/adds.
pub const FLOPS_PER_KERNEL: u64 = 20;
/// Forward elimination plus back substitution for one tridiagonal row.
pub const FLOPS_PER_TRIDIAG_ROW: u64 = 8;
/// Assembling one row of the finite-volume system (two face coefficients).
pub const FLOPS_PER_ASSEMBLY_ROW: u64 = 6;
/// Multiply-add of one quadrature weight.
pub const FLOPS_PER_QUADRATURE_TERM: u64 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Closure-kernel evaluations (quadrature integrand or face eddy viscosity).
    pub kernel_evals: u64,
    /// Quadrature weight applications.
    pub quadrature_terms: u64,
    /// Rows assembled into a tridiagonal system.
    pub assembly_rows: u64,
    /// Rows pushed through the Thomas algorithm.
    pub tridiag_rows: u64,
}

impl WorkCounters {
    /// Weighted operation count.
    pub fn flops(&self) -> u64 {
        self.kernel_evals * FLOPS_PER_KERNEL
            + self.quadrature_terms * FLOPS_PER_QUADRATURE_TERM
            + self.assembly_rows * FLOPS_PER_ASSEMBLY_ROW
            + self.tridiag_rows * FLOPS_PER_TRIDIAG_ROW
    }
}

impl AddAssign for WorkCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.kernel_evals += rhs.kernel_evals;
        self.quadrature_terms += rhs.quadrature_terms;
        self.assembly_rows += rhs.assembly_rows;
        self.tridiag_rows += rhs.tridiag_rows;
    }
}
