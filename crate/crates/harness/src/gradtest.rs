use nalgebra::Matrix3;
use wallmodel_core::iwm::IntegralGradients;
use wallmodel_core::surface::{
    build_face_cell_map, generate_scenario, gradient_diagnostics_csv, reference_bundle,
    surface_gradients, GradientMode, ReferenceField, Scenario, ScenarioKind, ScenarioParams,
    SurfaceOptions, Vec3,
};

use crate::HarnessError;

/// Tolerance on the fan face after filtering.
pub const FAN_TOLERANCE: f64 = 0.3;
/// Tolerance where the pipeline is exact for the reference field.
pub const EXACT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradtestReport {
    pub scenario: ScenarioKind,
    pub mode: GradientMode,
    pub filter_passes: usize,
    pub checked_faces: Vec<usize>,
    /// Largest error on the checked faces over the largest reference value
    /// there.
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub computed: Vec<IntegralGradients>,
    pub reference: Vec<IntegralGradients>,
}

impl GradtestReport {
    pub fn diagnostics_csv(&self) -> String {
        gradient_diagnostics_csv(&self.computed, &self.reference)
    }

    pub fn summary(&self) -> String {
        format!(
            "gradtest scenario={} mode={} filter_passes={} faces={} max_rel_error={:.6e} tolerance={:e} result={}",
            self.scenario.label(),
            self.mode.label(),
            self.filter_passes,
            self.checked_faces.len(),
            self.max_rel_error,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Reference field of each scenario.
pub fn scenario_field(kind: ScenarioKind) -> ReferenceField {
    match kind {
        ScenarioKind::TetFan => ReferenceField::streamwise_linear(1.0, 0.8),
        _ => ReferenceField::Affine {
            v0: Vec3::new(2.0, 0.0, -0.5),
            jacobian: Matrix3::new(0.3, 0.0, -0.2, 0.0, 0.0, 0.0, 0.15, 0.0, 0.4),
            tensor_scale: 3.0,
        },
    }
}

/// Faces where each scenario's pathology, or its absence, shows.
pub fn checked_faces(s: &Scenario) -> Vec<usize> {
    match s.kind {
        ScenarioKind::UniformHex => s.interior_faces(),
        ScenarioKind::RotatedJuncture => s.juncture_faces.clone(),
        ScenarioKind::TetFan => s.fan_face.into_iter().collect(),
    }
}

pub fn relative_error(
    computed: &[IntegralGradients],
    reference: &[IntegralGradients],
    faces: &[usize],
) -> f64 {
    let entries = |g: &IntegralGradients| g.d_dx.into_iter().chain(g.d_dz).collect::<Vec<f64>>();
    let scale = faces
        .iter()
        .flat_map(|&f| entries(&reference[f]))
        .map(f64::abs)
        .fold(0.0, f64::max);
    let err = faces
        .iter()
        .flat_map(|&f| {
            entries(&computed[f])
                .into_iter()
                .zip(entries(&reference[f]))
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    err / scale.max(f64::MIN_POSITIVE)
}

pub fn run_gradtest(
    kind: ScenarioKind,
    mode: GradientMode,
    filter_passes: usize,
) -> Result<GradtestReport, HarnessError> {
    let s = generate_scenario(kind, ScenarioParams::default_for(kind))?;
    let map = build_face_cell_map(&s.mesh)?;
    let (terms, reference) = reference_bundle(&scenario_field(kind), &s.mesh);
    let options = SurfaceOptions {
        mode,
        h_wm: s.h_wm,
        filter_passes,
    };
    let computed = surface_gradients(&terms, &s.mesh, &map, &options)?;
    let faces = checked_faces(&s);
    let err = relative_error(&computed, &reference, &faces);
    let tolerance = if kind == ScenarioKind::TetFan {
        FAN_TOLERANCE
    } else {
        EXACT_TOLERANCE
    };
    Ok(GradtestReport {
        scenario: kind,
        mode,
        filter_passes,
        checked_faces: faces,
        max_rel_error: err,
        tolerance,
        pass: err <= tolerance,
        computed,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn juncture_naive_fails_global_passes() {
        let naive = run_gradtest(ScenarioKind::RotatedJuncture, GradientMode::Naive, 0).unwrap();
        assert!(!naive.pass && naive.max_rel_error > 0.5);
        let global =
            run_gradtest(ScenarioKind::RotatedJuncture, GradientMode::GlobalVector, 0).unwrap();
        assert!(global.pass, "{}", global.summary());
    }

    #[test]
    fn fan_needs_the_filter() {
        let raw = run_gradtest(ScenarioKind::TetFan, GradientMode::GlobalVector, 0).unwrap();
        assert!((raw.max_rel_error - 1.0).abs() < 1e-12);
        let filtered = run_gradtest(ScenarioKind::TetFan, GradientMode::GlobalVector, 1).unwrap();
        assert!(filtered.pass, "{}", filtered.summary());
        assert_eq!(filtered.diagnostics_csv().lines().count(), 1 + 25 * 10);
    }
}
