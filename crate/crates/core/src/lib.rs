//! Grid-free wall-model toolkit: spectral equilibrium wall model, integral
//! wall model, and unstructured-surface gradient machinery.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closure;
pub mod counters;
pub mod eqwm;
pub mod iwm;
pub mod newton;
pub mod quadrature;
pub mod surface;
pub mod tridiag;
