use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wallmodel_core::iwm::{
    advance_face, equilibrium_state, IntegralGradients, IntegralTerms, IwmFaceState, IwmModel,
    MatchingData, SublayerForm, Term,
};
use wallmodel_core::surface::{
    broadcast_terms, build_face_cell_map, gradients_from_broadcast, Scenario, SurfaceOptions, Vec3,
};

use crate::config::{DriverConfig, FlowKind, ModelSelector, PressureSchedule};
use crate::HarnessError;

/// Per-step stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    StressPublication,
    Broadcast,
    Gradients,
    OuterFlowUpdate,
    MatchingInterpolation,
    IwmAdvance,
}

impl Stage {
    pub const ALGORITHM_ORDER: [Stage; 6] = [
        Stage::StressPublication,
        Stage::Broadcast,
        Stage::Gradients,
        Stage::OuterFlowUpdate,
        Stage::MatchingInterpolation,
        Stage::IwmAdvance,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Stage::StressPublication => "stress-publication",
            Stage::Broadcast => "broadcast",
            Stage::Gradients => "gradients",
            Stage::OuterFlowUpdate => "outer-flow-update",
            Stage::MatchingInterpolation => "matching-interpolation",
            Stage::IwmAdvance => "iwm-advance",
        }
    }
}

/// Prescribed outer flow standing in for the LES.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterFlow {
    pub kind: FlowKind,
    pub u0: f64,
    pub amplitude: f64,
    pub length: f64,
    pub pressure: PressureSchedule,
    /// Fixed relative perturbation per wall face.
    pub face_factors: Vec<f64>,
}

impl OuterFlow {
    /// Log-law velocity at the matching height; patch length from the mesh.
    pub fn from_config(config: &DriverConfig, scenario: &Scenario) -> Self {
        let c = wallmodel_core::closure::ClosureConstants::INTEGRAL;
        let u0 = c.log_law(config.h_wm_over_delta * config.re_tau);
        let length = scenario.params.nx as f64 * scenario.params.spacing[0];
        let pressure = match (config.flow, config.pressure) {
            (FlowKind::Pulse, PressureSchedule::None) => PressureSchedule::DEFAULT_PULSE,
            (_, p) => p,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let face_factors = (0..scenario.mesh.wall_faces.len())
            .map(|_| 1.0 + config.perturbation * rng.gen_range(-1.0..1.0))
            .collect();
        Self {
            kind: config.flow,
            u0,
            amplitude: config.flow_amplitude,
            length,
            pressure,
            face_factors,
        }
    }

    /// Global velocity at `p` for face `face`.
    pub fn velocity(&self, face: usize, p: &Vec3) -> Vec3 {
        let u = match self.kind {
            FlowKind::Uniform | FlowKind::Pulse => self.u0,
            FlowKind::Sinusoidal => {
                self.u0
                    * (1.0
                        + self.amplitude * (2.0 * std::f64::consts::PI * p.x / self.length).sin())
            }
        };
        Vec3::new(u * self.face_factors[face], 0.0, 0.0)
    }

    pub fn pressure_gradient(&self, t: f64) -> Vec3 {
        Vec3::new(self.pressure.dpdx(t), 0.0, 0.0)
    }
}

/// Everything recorded for one output step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub step: usize,
    /// Time level of `states`.
    pub time: f64,
    /// Terms whose gradients drove this step.
    pub terms: Vec<IntegralTerms>,
    pub gradients: Vec<IntegralGradients>,
    pub matching: Vec<MatchingData>,
    pub states: Vec<IwmFaceState>,
    pub newton_iterations: Vec<usize>,
}

pub const COUPLED_HEADER: &str =
    "step,time,face,u_les,w_les,dpdx,dpdz,u_tau,tau_w_x,tau_w_z,tau_h_x,tau_h_z,l_x,l_z,d_lx_dx,d_lz_dz,d_lxx_dx,d_lxz_dz,newton_iterations";

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub initial: Vec<IwmFaceState>,
    pub snapshots: Vec<StepSnapshot>,
    pub stage_log: Vec<(usize, Stage)>,
    /// Largest per-step spread of face states, relative to face 0.
    pub max_homogeneity_defect: f64,
    pub fallbacks: usize,
    pub final_states: Vec<IwmFaceState>,
}

impl CoupledRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COUPLED_HEADER);
        out.push('\n');
        for s in &self.snapshots {
            for (f, st) in s.states.iter().enumerate() {
                let m = &s.matching[f];
                let g = &s.gradients[f];
                let _ = writeln!(
                    out,
                    "{},{},{f},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    s.step,
                    s.time,
                    m.u_les,
                    m.w_les,
                    m.dpdx,
                    m.dpdz,
                    st.params.u_tau,
                    st.tau_w_x,
                    st.tau_w_z,
                    st.tau_h_x,
                    st.tau_h_z,
                    st.integrals.l_x,
                    st.integrals.l_z,
                    g.dx(Term::Lx),
                    g.dz(Term::Lz),
                    g.dx(Term::Lxx),
                    g.dz(Term::Lxz),
                    s.newton_iterations[f]
                );
            }
        }
        out
    }

    /// Stage sequence of one step.
    pub fn stages_of(&self, step: usize) -> Vec<Stage> {
        self.stage_log
            .iter()
            .filter(|(s, _)| *s == step)
            .map(|(_, st)| *st)
            .collect()
    }
}

fn state_vector(s: &IwmFaceState) -> [f64; 13] {
    let p = &s.params;
    [
        p.u_tau,
        p.u_tau_x,
        p.u_tau_z,
        p.a_x,
        p.a_z,
        p.c_x,
        p.c_z,
        p.delta_i,
        s.tau_w_x,
        s.tau_w_z,
        s.tau_h_x,
        s.tau_h_z,
        s.integrals.l_xx,
    ]
}

fn homogeneity_defect(states: &[IwmFaceState]) -> f64 {
    let base = state_vector(&states[0]);
    states
        .iter()
        .flat_map(|s| {
            state_vector(s)
                .into_iter()
                .zip(base)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        })
        .fold(0.0, f64::max)
}

fn stage_error(stage: Stage, step: usize) -> impl Fn(String) -> HarnessError {
    move |message| HarnessError::Stage {
        stage: stage.label(),
        step,
        message,
    }
}

/// Steps the integral model on every wall face of `scenario` against the
/// prescribed outer flow.
pub fn run_coupled_loop(
    config: &DriverConfig,
    scenario: &Scenario,
    flow: &OuterFlow,
) -> Result<CoupledRun, HarnessError> {
    config.validate()?;
    let form = match config.model {
        ModelSelector::Iwm => SublayerForm::Modified,
        ModelSelector::IwmLegacy => SublayerForm::Legacy,
        other => {
            return Err(HarnessError::Config(format!(
                "the coupled loop needs an integral model, got `{}`",
                other.label()
            )))
        }
    };
    let mesh = &scenario.mesh;
    let nf = mesh.wall_faces.len();
    if flow.face_factors.len() != nf {
        return Err(HarnessError::Config(format!(
            "outer flow built for {} faces, mesh has {nf}",
            flow.face_factors.len()
        )));
    }
    let h = config.h_wm();
    let model = IwmModel::new(h, config.nu(), 1.0)?
        .with_form(form)
        .with_time_filter(config.time_filter);
    let map = build_face_cell_map(mesh)?;
    let options = SurfaceOptions {
        mode: config.gradient_mode,
        h_wm: h,
        filter_passes: config.filter_passes,
    };
    let matching_points: Vec<Vec3> = mesh
        .wall_faces
        .iter()
        .map(|f| f.centroid - h * f.unit_normal)
        .collect();
    let local = |f: usize, v: &Vec3| {
        [
            v.dot(&mesh.wall_faces[f].local_x),
            v.dot(&mesh.wall_faces[f].local_z),
        ]
    };

    let mut states = (0..nf)
        .map(|f| equilibrium_state(local(f, &flow.velocity(f, &matching_points[f])), &model))
        .collect::<Result<Vec<_>, _>>()?;
    let initial = states.clone();
    let mut run = CoupledRun {
        initial,
        snapshots: Vec::new(),
        stage_log: Vec::with_capacity(6 * config.steps),
        max_homogeneity_defect: homogeneity_defect(&states),
        fallbacks: 0,
        final_states: Vec::new(),
    };

    for step in 0..config.steps {
        run.stage_log.push((step, Stage::StressPublication));
        let published: Vec<[f64; 2]> = states.iter().map(|s| [s.tau_w_x, s.tau_w_z]).collect();
        if let Some(f) = published
            .iter()
            .position(|t| !(t[0].is_finite() && t[1].is_finite()))
        {
            return Err(stage_error(Stage::StressPublication, step)(format!(
                "non-finite wall stress on face {f}"
            )));
        }

        run.stage_log.push((step, Stage::Broadcast));
        let terms: Vec<IntegralTerms> = states.iter().map(|s| s.integrals).collect();
        let fields = broadcast_terms(&terms, mesh, &map, options.mode)
            .map_err(|e| stage_error(Stage::Broadcast, step)(e.to_string()))?;

        run.stage_log.push((step, Stage::Gradients));
        let gradients = gradients_from_broadcast(&fields, mesh, &map, &options)
            .map_err(|e| stage_error(Stage::Gradients, step)(e.to_string()))?;

        run.stage_log.push((step, Stage::OuterFlowUpdate));
        let t1 = (step + 1) as f64 * config.dt;
        let outer: Vec<Vec3> = (0..nf)
            .map(|f| flow.velocity(f, &matching_points[f]))
            .collect();
        let dp = flow.pressure_gradient(t1);

        run.stage_log.push((step, Stage::MatchingInterpolation));
        let matching: Vec<MatchingData> = (0..nf)
            .map(|f| {
                let [u, w] = local(f, &outer[f]);
                let [dpdx, dpdz] = local(f, &dp);
                MatchingData {
                    u_les: u,
                    w_les: w,
                    dpdx,
                    dpdz,
                    grad_terms: gradients[f],
                    dt: config.dt,
                }
            })
            .collect();

        run.stage_log.push((step, Stage::IwmAdvance));
        let mut iterations = Vec::with_capacity(nf);
        for f in 0..nf {
            let (next, report) = advance_face(&states[f], &matching[f], &model)
                .map_err(|e| stage_error(Stage::IwmAdvance, step)(format!("face {f}: {e}")))?;
            if report.fallback.is_some() {
                run.fallbacks += 1;
            }
            iterations.push(report.newton_iterations);
            states[f] = next;
        }
        run.max_homogeneity_defect = run.max_homogeneity_defect.max(homogeneity_defect(&states));
        if step % config.output_every == 0 || step + 1 == config.steps {
            run.snapshots.push(StepSnapshot {
                step,
                time: t1,
                terms,
                gradients,
                matching,
                states: states.clone(),
                newton_iterations: iterations,
            });
        }
    }
    run.final_states = states;
    Ok(run)
}
