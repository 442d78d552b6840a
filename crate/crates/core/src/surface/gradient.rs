use crate::iwm::{IntegralGradients, IntegralTerms};

use super::{Direction, FrameTag, SurfaceError, Vec3, WallFace, WallPatchMesh, WallScalarField};

/// Cell-to-wall-face assignment: every cell belongs to the wall face with the
/// nearest centroid (ties go to the lower face id).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCellMap {
    pub cell_to_face: Vec<usize>,
    pub distances: Vec<f64>,
    pub face_to_cells: Vec<Vec<usize>>,
}

pub fn build_face_cell_map(mesh: &WallPatchMesh) -> Result<FaceCellMap, SurfaceError> {
    if mesh.wall_faces.is_empty() {
        return Err(SurfaceError::Config("mesh has no wall faces".into()));
    }
    let mut cell_to_face = Vec::with_capacity(mesh.cells.len());
    let mut distances = Vec::with_capacity(mesh.cells.len());
    let mut face_to_cells = vec![Vec::new(); mesh.wall_faces.len()];
    for c in &mesh.cells {
        let (mut best, mut dist) = (0, f64::INFINITY);
        for f in &mesh.wall_faces {
            let d = (c.centroid - f.centroid).norm();
            if d < dist {
                best = f.id;
                dist = d;
            }
        }
        cell_to_face.push(best);
        distances.push(dist);
        face_to_cells[best].push(c.id);
    }
    Ok(FaceCellMap {
        cell_to_face,
        distances,
        face_to_cells,
    })
}

/// Copies each wall value to every cell mapped to that face.
pub fn broadcast_wall_scalars(
    field: &WallScalarField,
    map: &FaceCellMap,
) -> Result<Vec<f64>, SurfaceError> {
    let v = field.values();
    if v.len() != map.face_to_cells.len() {
        return Err(SurfaceError::Config(format!(
            "{} wall values for {} wall faces",
            v.len(),
            map.face_to_cells.len()
        )));
    }
    Ok(map.cell_to_face.iter().map(|&f| v[f]).collect())
}

/// Green-Gauss cell gradients with arithmetic-mean face values; boundary
/// faces take the owner value.
pub fn green_gauss_gradient(
    cell_field: &[f64],
    mesh: &WallPatchMesh,
) -> Result<Vec<Vec3>, SurfaceError> {
    if cell_field.len() != mesh.cells.len() {
        return Err(SurfaceError::Config(format!(
            "{} cell values for {} cells",
            cell_field.len(),
            mesh.cells.len()
        )));
    }
    Ok(mesh
        .cells
        .iter()
        .map(|c| {
            let own = cell_field[c.id];
            let sum: Vec3 = c
                .faces
                .iter()
                .map(|f| {
                    let face_value = f.neighbor.map_or(own, |n| 0.5 * (own + cell_field[n]));
                    face_value * f.area_vector
                })
                .sum();
            sum / c.volume
        })
        .collect())
}

pub fn project_to_local(grad: &Vec3, face: &WallFace, dir: Direction) -> f64 {
    grad.dot(&face.basis(dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GradientMode {
    /// Local components are broadcast as plain scalars.
    Naive,
    /// Local components are rotated to a global vector and tensor first.
    #[default]
    GlobalVector,
}

impl GradientMode {
    pub fn label(&self) -> &'static str {
        match self {
            GradientMode::Naive => "naive",
            GradientMode::GlobalVector => "global-vector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "naive" => Some(GradientMode::Naive),
            "global-vector" => Some(GradientMode::GlobalVector),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceOptions {
    pub mode: GradientMode,
    /// Height above the wall at which cell gradients are sampled.
    pub h_wm: f64,
    pub filter_passes: usize,
}

impl SurfaceOptions {
    pub fn new(mode: GradientMode, h_wm: f64) -> Self {
        Self {
            mode,
            h_wm,
            filter_passes: 0,
        }
    }
}

/// Inverse-distance weights of the (up to) two mapped cells nearest to the
/// matching point of every wall face.
fn matching_weights(
    mesh: &WallPatchMesh,
    map: &FaceCellMap,
    h_wm: f64,
) -> Result<Vec<Vec<(usize, f64)>>, SurfaceError> {
    mesh.wall_faces
        .iter()
        .map(|f| {
            let target = f.centroid - h_wm * f.unit_normal;
            let mut near: Vec<(usize, f64)> = map.face_to_cells[f.id]
                .iter()
                .map(|&c| (c, (mesh.cells[c].centroid - target).norm()))
                .collect();
            if near.is_empty() {
                return Err(SurfaceError::InvalidMesh(format!(
                    "wall face {} has no mapped cells",
                    f.id
                )));
            }
            near.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            near.truncate(2);
            if near[0].1 < 1e-14 {
                return Ok(vec![(near[0].0, 1.0)]);
            }
            let total: f64 = near.iter().map(|(_, d)| 1.0 / d).sum();
            Ok(near
                .into_iter()
                .map(|(c, d)| (c, 1.0 / d / total))
                .collect())
        })
        .collect()
}

fn sample(grads: &[Vec3], weights: &[(usize, f64)]) -> Vec3 {
    weights.iter().map(|&(c, w)| w * grads[c]).sum()
}

/// Cell fields produced by broadcasting the wall terms: five local scalars in
/// naive mode; three vector and six tensor components in global-vector mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastFields {
    pub mode: GradientMode,
    pub fields: Vec<Vec<f64>>,
}

const TENSOR_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn tensor_slot(k: usize, l: usize) -> usize {
    let (a, b) = if k <= l { (k, l) } else { (l, k) };
    TENSOR_PAIRS.iter().position(|&p| p == (a, b)).unwrap_or(0)
}

/// Copies the integral terms of every wall face to its mapped cells.
pub fn broadcast_terms(
    terms: &[IntegralTerms],
    mesh: &WallPatchMesh,
    map: &FaceCellMap,
    mode: GradientMode,
) -> Result<BroadcastFields, SurfaceError> {
    let nf = mesh.wall_faces.len();
    if terms.len() != nf {
        return Err(SurfaceError::Config(format!(
            "{} term sets for {} wall faces",
            terms.len(),
            nf
        )));
    }
    let wall: Vec<WallScalarField> = match mode {
        GradientMode::Naive => {
            let tags = [
                FrameTag::LocalX,
                FrameTag::LocalZ,
                FrameTag::FrameFree,
                FrameTag::FrameFree,
                FrameTag::FrameFree,
            ];
            tags.into_iter()
                .enumerate()
                .map(|(t, tag)| {
                    WallScalarField::new(terms.iter().map(|x| x.as_array()[t]).collect(), tag)
                })
                .collect()
        }
        GradientMode::GlobalVector => {
            let vector: Vec<Vec3> = terms
                .iter()
                .zip(&mesh.wall_faces)
                .map(|(t, f)| t.l_x * f.local_x + t.l_z * f.local_z)
                .collect();
            let tensor = |k: usize, l: usize, t: &IntegralTerms, f: &WallFace| {
                let (lx, lz) = (f.local_x, f.local_z);
                t.l_xx * lx[k] * lx[l]
                    + t.l_xz * (lx[k] * lz[l] + lz[k] * lx[l])
                    + t.l_zz * lz[k] * lz[l]
            };
            (0..3)
                .map(|k| {
                    WallScalarField::new(vector.iter().map(|v| v[k]).collect(), FrameTag::FrameFree)
                })
                .chain(TENSOR_PAIRS.iter().map(|&(k, l)| {
                    WallScalarField::new(
                        terms
                            .iter()
                            .zip(&mesh.wall_faces)
                            .map(|(t, f)| tensor(k, l, t, f))
                            .collect(),
                        FrameTag::FrameFree,
                    )
                }))
                .collect()
        }
    };
    let fields = wall
        .iter()
        .map(|w| broadcast_wall_scalars(w, map))
        .collect::<Result<_, _>>()?;
    Ok(BroadcastFields { mode, fields })
}

/// Green-Gauss gradients of broadcast fields, sampled at the matching point
/// of every face and expressed in its local frame.
pub fn gradients_from_broadcast(
    broadcast: &BroadcastFields,
    mesh: &WallPatchMesh,
    map: &FaceCellMap,
    options: &SurfaceOptions,
) -> Result<Vec<IntegralGradients>, SurfaceError> {
    if !(options.h_wm.is_finite() && options.h_wm >= 0.0) {
        return Err(SurfaceError::Config(format!(
            "matching height {} must be finite and non-negative",
            options.h_wm
        )));
    }
    if broadcast.mode != options.mode {
        return Err(SurfaceError::Config(format!(
            "fields broadcast for {} mode, gradients requested in {} mode",
            broadcast.mode.label(),
            options.mode.label()
        )));
    }
    let nf = mesh.wall_faces.len();
    let weights = matching_weights(mesh, map, options.h_wm)?;
    let sampled = broadcast
        .fields
        .iter()
        .map(|cells| {
            let g = green_gauss_gradient(cells, mesh)?;
            Ok((0..nf)
                .map(|f| sample(&g, &weights[f]))
                .collect::<Vec<Vec3>>())
        })
        .collect::<Result<Vec<_>, SurfaceError>>()?;
    let mut out = vec![IntegralGradients::default(); nf];
    match options.mode {
        GradientMode::Naive => {
            for (t, g) in sampled.iter().enumerate() {
                for (f, face) in mesh.wall_faces.iter().enumerate() {
                    out[f].d_dx[t] = project_to_local(&g[f], face, Direction::LocalX);
                    out[f].d_dz[t] = project_to_local(&g[f], face, Direction::LocalZ);
                }
            }
        }
        GradientMode::GlobalVector => {
            for (f, face) in mesh.wall_faces.iter().enumerate() {
                let (lx, lz) = (face.local_x, face.local_z);
                for (dir, slot) in [(lx, 0), (lz, 1)] {
                    let mut d = [0.0; 5];
                    for k in 0..3 {
                        let dv = sampled[k][f].dot(&dir);
                        d[0] += lx[k] * dv;
                        d[1] += lz[k] * dv;
                        for l in 0..3 {
                            let dt = sampled[3 + tensor_slot(k, l)][f].dot(&dir);
                            d[2] += lx[k] * lx[l] * dt;
                            d[3] += lz[k] * lz[l] * dt;
                            d[4] += lx[k] * lz[l] * dt;
                        }
                    }
                    if slot == 0 {
                        out[f].d_dx = d;
                    } else {
                        out[f].d_dz = d;
                    }
                }
            }
        }
    }
    Ok(spatial_filter(&out, mesh, options.filter_passes))
}

/// Local-frame derivatives of the five integral terms at every wall face:
/// broadcast, Green-Gauss, matching-point sampling, projection, filter.
pub fn surface_gradients(
    terms: &[IntegralTerms],
    mesh: &WallPatchMesh,
    map: &FaceCellMap,
    options: &SurfaceOptions,
) -> Result<Vec<IntegralGradients>, SurfaceError> {
    let b = broadcast_terms(terms, mesh, map, options.mode)?;
    gradients_from_broadcast(&b, mesh, map, options)
}

/// Wall-parallel smoothing over edge neighbours. Neighbour weight
/// `1/(1 + max degree)`, the remainder on the face itself, so the operator
/// is symmetric and preserves the patch mean.
pub fn spatial_filter(
    bundle: &[IntegralGradients],
    mesh: &WallPatchMesh,
    passes: usize,
) -> Vec<IntegralGradients> {
    let max_degree = mesh.face_adjacency.iter().map(Vec::len).max().unwrap_or(0);
    let w = 1.0 / (1.0 + max_degree as f64);
    let mut cur = bundle.to_vec();
    for _ in 0..passes {
        cur = mesh
            .face_adjacency
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let own = 1.0 - nbrs.len() as f64 * w;
                let mut g = IntegralGradients::default();
                for t in 0..5 {
                    g.d_dx[t] = own * cur[i].d_dx[t]
                        + w * nbrs.iter().map(|&j| cur[j].d_dx[t]).sum::<f64>();
                    g.d_dz[t] = own * cur[i].d_dz[t]
                        + w * nbrs.iter().map(|&j| cur[j].d_dz[t]).sum::<f64>();
                }
                g
            })
            .collect();
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iwm::Term;
    use crate::surface::{
        generate_scenario, reference_bundle, ReferenceField, ScenarioKind, ScenarioParams,
    };
    use nalgebra::Matrix3;

    fn affine() -> ReferenceField {
        ReferenceField::Affine {
            v0: Vec3::new(2.0, 0.0, -0.5),
            jacobian: Matrix3::new(0.3, 0.0, -0.2, 0.0, 0.0, 0.0, 0.15, 0.0, 0.4),
            tensor_scale: 3.0,
        }
    }

    fn max_error(a: &[IntegralGradients], b: &[IntegralGradients], faces: &[usize]) -> f64 {
        faces
            .iter()
            .flat_map(|&f| {
                (0..5).flat_map(move |t| {
                    [
                        (a[f].d_dx[t] - b[f].d_dx[t]).abs(),
                        (a[f].d_dz[t] - b[f].d_dz[t]).abs(),
                    ]
                })
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_field_exact_on_interior_cells() {
        let s = generate_scenario(ScenarioKind::UniformHex, ScenarioParams::new(5, 3, 5)).unwrap();
        let values: Vec<f64> = s
            .mesh
            .cells
            .iter()
            .map(|c| 1.0 + 2.0 * c.centroid.x - 3.0 * c.centroid.y + 0.5 * c.centroid.z)
            .collect();
        let g = green_gauss_gradient(&values, &s.mesh).unwrap();
        let interior = s.mesh.interior_cells();
        assert!(!interior.is_empty());
        for c in interior {
            assert!((g[c] - Vec3::new(2.0, -3.0, 0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_matches_dot_product() {
        let s = generate_scenario(
            ScenarioKind::RotatedJuncture,
            ScenarioParams::default_for(ScenarioKind::RotatedJuncture),
        )
        .unwrap();
        let g = Vec3::new(1.0, 7.0, -2.0);
        let rotated = &s.mesh.wall_faces[s.rotated_faces[0]];
        assert_eq!(project_to_local(&g, rotated, Direction::LocalX), -2.0);
        assert_eq!(project_to_local(&g, rotated, Direction::LocalZ), -1.0);
    }

    #[test]
    fn face_cell_map_is_deterministic() {
        let s = generate_scenario(
            ScenarioKind::TetFan,
            ScenarioParams::default_for(ScenarioKind::TetFan),
        )
        .unwrap();
        let a = build_face_cell_map(&s.mesh).unwrap();
        let b = build_face_cell_map(&s.mesh).unwrap();
        assert_eq!(a, b);
        let fan = s.fan_face.unwrap();
        assert_eq!(a.face_to_cells[fan].len(), 13);
        for &c in &s.defect_cells {
            assert_eq!(a.cell_to_face[c], fan);
        }
        let empty = WallPatchMesh {
            wall_faces: vec![],
            cells: vec![],
            face_adjacency: vec![],
        };
        assert!(build_face_cell_map(&empty).is_err());
    }

    #[test]
    fn global_vector_mode_exact_for_affine_field_at_juncture() {
        let s = generate_scenario(
            ScenarioKind::RotatedJuncture,
            ScenarioParams::default_for(ScenarioKind::RotatedJuncture),
        )
        .unwrap();
        let map = build_face_cell_map(&s.mesh).unwrap();
        let (terms, exact) = reference_bundle(&affine(), &s.mesh);
        let opts = SurfaceOptions::new(GradientMode::GlobalVector, s.h_wm);
        let g = surface_gradients(&terms, &s.mesh, &map, &opts).unwrap();
        assert!(max_error(&g, &exact, &s.interior_faces()) < 1e-10);

        let naive = surface_gradients(
            &terms,
            &s.mesh,
            &map,
            &SurfaceOptions::new(GradientMode::Naive, s.h_wm),
        )
        .unwrap();
        assert!(max_error(&naive, &exact, &s.juncture_faces) > 0.1);
        // away from the juncture, both agree
        let far: Vec<usize> = s
            .interior_faces()
            .into_iter()
            .filter(|f| !s.juncture_faces.contains(f))
            .collect();
        assert!(max_error(&naive, &exact, &far) < 1e-10);
    }

    #[test]
    fn tet_fan_zeroes_the_fan_face_derivative() {
        let s = generate_scenario(
            ScenarioKind::TetFan,
            ScenarioParams::default_for(ScenarioKind::TetFan),
        )
        .unwrap();
        let map = build_face_cell_map(&s.mesh).unwrap();
        let a = 0.8;
        let (terms, _) = reference_bundle(&ReferenceField::streamwise_linear(1.0, a), &s.mesh);
        let fan = s.fan_face.unwrap();
        let mut opts = SurfaceOptions::new(GradientMode::GlobalVector, s.h_wm);
        let raw = surface_gradients(&terms, &s.mesh, &map, &opts).unwrap();
        assert!(raw[fan].dx(Term::Lx).abs() < 1e-12);
        opts.filter_passes = 1;
        let filtered = surface_gradients(&terms, &s.mesh, &map, &opts).unwrap();
        let v = filtered[fan].dx(Term::Lx);
        assert!((v - 0.8 * a).abs() < 1e-12);
    }

    #[test]
    fn filter_preserves_mean_and_zero_passes_is_identity() {
        let s = generate_scenario(ScenarioKind::UniformHex, ScenarioParams::new(6, 1, 5)).unwrap();
        let field = ReferenceField::Wave {
            amplitude: 1.0,
            wavenumber: 1.1,
            tensor_scale: 1.0,
        };
        let (_, bundle) = reference_bundle(&field, &s.mesh);
        assert_eq!(spatial_filter(&bundle, &s.mesh, 0), bundle);
        let mean = |b: &[IntegralGradients], t: usize| {
            b.iter().map(|g| g.d_dx[t]).sum::<f64>() / b.len() as f64
        };
        for passes in [1, 3, 10] {
            let out = spatial_filter(&bundle, &s.mesh, passes);
            for t in 0..5 {
                assert!((mean(&out, t) - mean(&bundle, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_order_convergence_on_interior_faces() {
        let k = 0.5;
        let length = 2.0 * std::f64::consts::PI / k;
        let field = ReferenceField::Wave {
            amplitude: 1.0,
            wavenumber: k,
            tensor_scale: 1.0,
        };
        let mut errors = Vec::new();
        let mut sizes = Vec::new();
        for n in [10usize, 20, 30] {
            let h = length / n as f64;
            let mut p = ScenarioParams::new(n, 1, n);
            p.spacing = [h, h, h];
            let s = generate_scenario(ScenarioKind::UniformHex, p).unwrap();
            let map = build_face_cell_map(&s.mesh).unwrap();
            let (terms, exact) = reference_bundle(&field, &s.mesh);
            let g = surface_gradients(
                &terms,
                &s.mesh,
                &map,
                &SurfaceOptions::new(GradientMode::GlobalVector, s.h_wm),
            )
            .unwrap();
            errors.push(max_error(&g, &exact, &s.interior_faces()));
            sizes.push(h);
        }
        let order = (errors[1] / errors[2]).ln() / (sizes[1] / sizes[2]).ln();
        assert!(order >= 1.9, "order {order}, errors {errors:?}");
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let s = generate_scenario(ScenarioKind::UniformHex, ScenarioParams::new(3, 1, 3)).unwrap();
        let map = build_face_cell_map(&s.mesh).unwrap();
        let opts = SurfaceOptions::new(GradientMode::Naive, 0.5);
        assert!(surface_gradients(&[IntegralTerms::default()], &s.mesh, &map, &opts).is_err());
        assert!(green_gauss_gradient(&[1.0], &s.mesh).is_err());
        let bad = SurfaceOptions::new(GradientMode::Naive, f64::NAN);
        assert!(
            surface_gradients(&vec![IntegralTerms::default(); 9], &s.mesh, &map, &bad).is_err()
        );
    }
}
