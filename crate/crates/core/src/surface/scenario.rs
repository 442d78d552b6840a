use std::collections::HashSet;

use nalgebra::Matrix3;

use crate::iwm::{IntegralGradients, IntegralTerms};

use super::geometry::PolyhedronBuilder;
use super::{SurfaceError, Vec3, WallFace, WallPatchMesh};

/// Test geometries with closed-form reference gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Flat wall, hex cells, all local frames aligned with `(X, Z)`.
    UniformHex,
    /// As `UniformHex`, but the faces with `i < nx/2` have their local
    /// x-axis along `Z`: the frame turns by 90° across the juncture.
    RotatedJuncture,
    /// As `UniformHex`, with the centre wall-adjacent cell split into twelve
    /// tetrahedra that all map to the centre wall face.
    TetFan,
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::UniformHex => "uniform-hex",
            ScenarioKind::RotatedJuncture => "rotated-juncture",
            ScenarioKind::TetFan => "tet-fan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform-hex" => Some(ScenarioKind::UniformHex),
            "rotated-juncture" => Some(ScenarioKind::RotatedJuncture),
            "tet-fan" => Some(ScenarioKind::TetFan),
            _ => None,
        }
    }
}

/// Wall faces `nx × nz`, `ny` cell layers, cell size `spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing: [f64; 3],
}

impl ScenarioParams {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self {
            nx,
            ny,
            nz,
            spacing: [1.0, 1.0, 1.0],
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::UniformHex => Self::new(4, 2, 4),
            ScenarioKind::RotatedJuncture => Self::new(8, 2, 6),
            ScenarioKind::TetFan => Self::new(5, 2, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
    pub mesh: WallPatchMesh,
    /// Suggested matching height.
    pub h_wm: f64,
    /// Centre wall face of the tet fan.
    pub fan_face: Option<usize>,
    /// Wall-touching tetrahedra of the fan.
    pub defect_cells: Vec<usize>,
    /// Faces with a rotated local frame.
    pub rotated_faces: Vec<usize>,
    /// Faces on either side of the frame juncture, away from the patch edge.
    pub juncture_faces: Vec<usize>,
}

impl Scenario {
    pub fn face_id(&self, i: usize, k: usize) -> usize {
        i * self.params.nz + k
    }

    /// Wall faces not on the edge of the patch.
    pub fn interior_faces(&self) -> Vec<usize> {
        let p = &self.params;
        (1..p.nx.saturating_sub(1))
            .flat_map(|i| (1..p.nz.saturating_sub(1)).map(move |k| i * p.nz + k))
            .collect()
    }
}

/// Key of a lattice face: normal axis, its lattice coordinate, and the lower
/// lattice corner in the two spanning axes.
type LatticeFace = (usize, usize, usize, usize);

fn lattice_point(idx: [usize; 3], h: [f64; 3]) -> Vec3 {
    Vec3::new(
        idx[0] as f64 * h[0],
        idx[1] as f64 * h[1],
        idx[2] as f64 * h[2],
    )
}

/// Corners of a lattice face in a fixed cyclic order shared by both cells.
fn lattice_quad(face: LatticeFace, h: [f64; 3]) -> Vec<Vec3> {
    let (axis, c, u, v) = face;
    let (ua, va) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let corner = |du: usize, dv: usize| {
        let mut idx = [0; 3];
        idx[axis] = c;
        idx[ua] = u + du;
        idx[va] = v + dv;
        lattice_point(idx, h)
    };
    vec![corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]
}

fn hex_faces(i: usize, j: usize, k: usize) -> [LatticeFace; 6] {
    [
        (0, i, j, k),
        (0, i + 1, j, k),
        (1, j, i, k),
        (1, j + 1, i, k),
        (2, k, i, j),
        (2, k + 1, i, j),
    ]
}

fn split(quad: &[Vec3]) -> [Vec<Vec3>; 2] {
    [
        vec![quad[0], quad[1], quad[2]],
        vec![quad[0], quad[2], quad[3]],
    ]
}

/// Builds the mesh for `kind`.
pub fn generate_scenario(
    kind: ScenarioKind,
    params: ScenarioParams,
) -> Result<Scenario, SurfaceError> {
    let ScenarioParams {
        nx,
        ny,
        nz,
        spacing: h,
    } = params;
    if nx == 0 || ny == 0 || nz == 0 || !h.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(SurfaceError::Config(format!(
            "invalid scenario parameters {params:?}"
        )));
    }
    if nx * ny * nz > 1000 {
        return Err(SurfaceError::Config(format!(
            "{} cells exceeds the scenario limit of 1000",
            nx * ny * nz
        )));
    }
    let fan = match kind {
        ScenarioKind::TetFan => {
            if nx < 3 || nz < 3 || nx % 2 == 0 || nz % 2 == 0 || ny < 2 {
                return Err(SurfaceError::Config(
                    "tet fan needs odd nx, nz >= 3 and ny >= 2".into(),
                ));
            }
            Some((nx / 2, nz / 2))
        }
        ScenarioKind::RotatedJuncture if nx < 4 => {
            return Err(SurfaceError::Config(
                "rotated juncture needs nx >= 4".into(),
            ))
        }
        _ => None,
    };
    let split_faces: HashSet<LatticeFace> = fan
        .map(|(i, k)| hex_faces(i, 0, k).into_iter().collect())
        .unwrap_or_default();

    let mut builder = PolyhedronBuilder::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                if fan == Some((i, k)) && j == 0 {
                    continue;
                }
                let mut faces = Vec::new();
                for f in hex_faces(i, j, k) {
                    let quad = lattice_quad(f, h);
                    if split_faces.contains(&f) {
                        faces.extend(split(&quad));
                    } else {
                        faces.push(quad);
                    }
                }
                builder.add_cell(faces);
            }
        }
    }
    let mut defect_cells = Vec::new();
    if let Some((i, k)) = fan {
        let centre = lattice_point([i, 0, k], h) + 0.5 * Vec3::new(h[0], h[1], h[2]);
        for f in hex_faces(i, 0, k) {
            for tri in split(&lattice_quad(f, h)) {
                let mut faces = vec![tri.clone()];
                for e in 0..3 {
                    faces.push(vec![centre, tri[e], tri[(e + 1) % 3]]);
                }
                let on_wall = tri.iter().all(|p| p.y == 0.0);
                let id = builder.add_cell(faces);
                if on_wall {
                    defect_cells.push(id);
                }
            }
        }
    }
    let cells = builder.build()?;

    let rotated = |i: usize| kind == ScenarioKind::RotatedJuncture && i < nx / 2;
    let mut wall_faces = Vec::with_capacity(nx * nz);
    let mut face_adjacency = Vec::with_capacity(nx * nz);
    let mut rotated_faces = Vec::new();
    for i in 0..nx {
        for k in 0..nz {
            let id = i * nz + k;
            let (lx, lz) = if rotated(i) {
                rotated_faces.push(id);
                (Vec3::z(), -Vec3::x())
            } else {
                (Vec3::x(), Vec3::z())
            };
            wall_faces.push(WallFace {
                id,
                centroid: Vec3::new((i as f64 + 0.5) * h[0], 0.0, (k as f64 + 0.5) * h[2]),
                unit_normal: -Vec3::y(),
                local_x: lx,
                local_z: lz,
                area: h[0] * h[2],
            });
            let mut nbrs = Vec::new();
            if i > 0 {
                nbrs.push(id - nz);
            }
            if k > 0 {
                nbrs.push(id - 1);
            }
            if k + 1 < nz {
                nbrs.push(id + 1);
            }
            if i + 1 < nx {
                nbrs.push(id + nz);
            }
            face_adjacency.push(nbrs);
        }
    }
    let mesh = WallPatchMesh {
        wall_faces,
        cells,
        face_adjacency,
    };
    mesh.validate()?;
    let juncture_faces = if kind == ScenarioKind::RotatedJuncture {
        let (a, b) = (nx / 2 - 1, nx / 2);
        (1..nz.saturating_sub(1))
            .flat_map(|k| [a * nz + k, b * nz + k])
            .collect()
    } else {
        Vec::new()
    };
    Ok(Scenario {
        kind,
        params,
        mesh,
        h_wm: if fan.is_some() {
            h[1] / 8.0
        } else {
            0.75 * h[1]
        },
        fan_face: fan.map(|(i, k)| i * nz + k),
        defect_cells,
        rotated_faces,
        juncture_faces,
    })
}

/// Global wall-parallel vector field `V(p)`; the reference tensor is
/// `T = V ⊗ V / tensor_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceField {
    /// `V = v0 + J p`, with `J[k][m] = ∂V_k/∂x_m`.
    Affine {
        v0: Vec3,
        jacobian: Matrix3<f64>,
        tensor_scale: f64,
    },
    /// `V = A (sin kx cos kz, 0, cos kx sin kz)`.
    Wave {
        amplitude: f64,
        wavenumber: f64,
        tensor_scale: f64,
    },
}

impl ReferenceField {
    /// `V = (v0 + slope x, 0, 0)`.
    pub fn streamwise_linear(v0: f64, slope: f64) -> Self {
        let mut j = Matrix3::zeros();
        j[(0, 0)] = slope;
        ReferenceField::Affine {
            v0: Vec3::new(v0, 0.0, 0.0),
            jacobian: j,
            tensor_scale: 1.0,
        }
    }

    pub fn vector(&self, p: &Vec3) -> Vec3 {
        match *self {
            ReferenceField::Affine { v0, jacobian, .. } => v0 + jacobian * Vec3::new(p.x, 0.0, p.z),
            ReferenceField::Wave {
                amplitude,
                wavenumber: k,
                ..
            } => {
                amplitude
                    * Vec3::new(
                        (k * p.x).sin() * (k * p.z).cos(),
                        0.0,
                        (k * p.x).cos() * (k * p.z).sin(),
                    )
            }
        }
    }

    pub fn jacobian(&self, p: &Vec3) -> Matrix3<f64> {
        match *self {
            ReferenceField::Affine { jacobian, .. } => jacobian,
            ReferenceField::Wave {
                amplitude: a,
                wavenumber: k,
                ..
            } => {
                let (sx, cx, sz, cz) = (
                    (k * p.x).sin(),
                    (k * p.x).cos(),
                    (k * p.z).sin(),
                    (k * p.z).cos(),
                );
                Matrix3::new(
                    a * k * cx * cz,
                    0.0,
                    -a * k * sx * sz,
                    0.0,
                    0.0,
                    0.0,
                    -a * k * sx * sz,
                    0.0,
                    a * k * cx * cz,
                )
            }
        }
    }

    fn tensor_scale(&self) -> f64 {
        match *self {
            ReferenceField::Affine { tensor_scale, .. }
            | ReferenceField::Wave { tensor_scale, .. } => tensor_scale,
        }
    }
}

/// Local integral terms of `field` at every wall face and their exact local
/// derivatives, with the face frame held fixed.
pub fn reference_bundle(
    field: &ReferenceField,
    mesh: &WallPatchMesh,
) -> (Vec<IntegralTerms>, Vec<IntegralGradients>) {
    let s = field.tensor_scale();
    mesh.wall_faces
        .iter()
        .map(|f| {
            let v = field.vector(&f.centroid);
            let j = field.jacobian(&f.centroid);
            let (lx, lz) = (f.local_x, f.local_z);
            let (vx, vz) = (v.dot(&lx), v.dot(&lz));
            let terms = IntegralTerms {
                l_x: vx,
                l_z: vz,
                l_xx: vx * vx / s,
                l_zz: vz * vz / s,
                l_xz: vx * vz / s,
            };
            let along = |dir: &Vec3| {
                let (dx, dz) = (lx.dot(&(j * dir)), lz.dot(&(j * dir)));
                [
                    dx,
                    dz,
                    2.0 * vx * dx / s,
                    2.0 * vz * dz / s,
                    (dx * vz + vx * dz) / s,
                ]
            };
            (
                terms,
                IntegralGradients {
                    d_dx: along(&lx),
                    d_dz: along(&lz),
                },
            )
        })
        .unzip()
}
