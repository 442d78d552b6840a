//! Surface gradients of wall-face quantities on unstructured near-wall
//! meshes: wall-face/cell mapping, Green-Gauss cell gradients, projection
//! onto local wall frames, and a wall-parallel smoothing filter.

mod geometry;
mod gradient;
mod io;
mod scenario;

pub use geometry::{polygon_area_vector, PolyhedronBuilder};
pub use gradient::{
    broadcast_terms, broadcast_wall_scalars, build_face_cell_map, gradients_from_broadcast,
    green_gauss_gradient, project_to_local, spatial_filter, surface_gradients, BroadcastFields,
    FaceCellMap, GradientMode, SurfaceOptions,
};
pub use io::{gradient_diagnostics_csv, read_mesh, write_mesh, DIAGNOSTICS_HEADER};
pub use scenario::{
    generate_scenario, reference_bundle, ReferenceField, Scenario, ScenarioKind, ScenarioParams,
};

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh text line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Wall-parallel direction of a local frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    LocalX,
    LocalZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallFace {
    pub id: usize,
    pub centroid: Vec3,
    /// Outward (into the wall) unit normal.
    pub unit_normal: Vec3,
    pub local_x: Vec3,
    pub local_z: Vec3,
    pub area: f64,
}

impl WallFace {
    pub fn basis(&self, dir: Direction) -> Vec3 {
        match dir {
            Direction::LocalX => self.local_x,
            Direction::LocalZ => self.local_z,
        }
    }

    /// Orthonormal, right-handed (`local_x × local_z = unit_normal`) and
    /// positive area.
    pub fn is_valid(&self, tol: f64) -> bool {
        let (x, z, n) = (self.local_x, self.local_z, self.unit_normal);
        (x.norm() - 1.0).abs() < tol
            && (z.norm() - 1.0).abs() < tol
            && (n.norm() - 1.0).abs() < tol
            && x.dot(&z).abs() < tol
            && (x.cross(&z) - n).norm() < tol
            && self.area > 0.0
    }
}

/// One face of a cell with its outward area vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub area_vector: Vec3,
    /// Neighbouring cell, `None` on the domain boundary.
    pub neighbor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub centroid: Vec3,
    pub volume: f64,
    pub faces: Vec<CellFace>,
}

impl Cell {
    /// Norm of the summed area vectors relative to the total face area.
    pub fn closure_defect(&self) -> f64 {
        let sum: Vec3 = self.faces.iter().map(|f| f.area_vector).sum();
        let total: f64 = self.faces.iter().map(|f| f.area_vector.norm()).sum();
        sum.norm() / total
    }
}

/// Wall faces with local frames plus the off-wall cells.
#[derive(Debug, Clone, PartialEq)]
pub struct WallPatchMesh {
    pub wall_faces: Vec<WallFace>,
    pub cells: Vec<Cell>,
    /// Edge-adjacent wall faces of every wall face.
    pub face_adjacency: Vec<Vec<usize>>,
}

impl WallPatchMesh {
    pub fn validate(&self) -> Result<(), SurfaceError> {
        for (i, f) in self.wall_faces.iter().enumerate() {
            if f.id != i {
                return Err(SurfaceError::InvalidMesh(format!(
                    "wall face {i} carries id {}",
                    f.id
                )));
            }
            if !f.is_valid(1e-10) {
                return Err(SurfaceError::InvalidMesh(format!(
                    "wall face {i} has an invalid frame or area"
                )));
            }
        }
        if self.face_adjacency.len() != self.wall_faces.len() {
            return Err(SurfaceError::InvalidMesh(
                "face adjacency does not cover every wall face".into(),
            ));
        }
        for (i, nbrs) in self.face_adjacency.iter().enumerate() {
            for &j in nbrs {
                if j >= self.wall_faces.len() || j == i || !self.face_adjacency[j].contains(&i) {
                    return Err(SurfaceError::InvalidMesh(format!(
                        "wall-face adjacency {i} -> {j} is not symmetric"
                    )));
                }
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return Err(SurfaceError::InvalidMesh(format!(
                    "cell {i} carries id {}",
                    c.id
                )));
            }
            if !(c.volume > 0.0) {
                return Err(SurfaceError::InvalidMesh(format!(
                    "cell {i} has volume {}",
                    c.volume
                )));
            }
            if c.closure_defect() > 1e-12 {
                return Err(SurfaceError::InvalidMesh(format!(
                    "cell {i} is not closed ({:e})",
                    c.closure_defect()
                )));
            }
            for f in &c.faces {
                if let Some(n) = f.neighbor {
                    let back = self
                        .cells
                        .get(n)
                        .map(|nc| nc.faces.iter().any(|g| g.neighbor == Some(i)));
                    if back != Some(true) {
                        return Err(SurfaceError::InvalidMesh(format!(
                            "cell {i} -> {n} neighbour link is one-way"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Cells none of whose faces lie on the boundary.
    pub fn interior_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .filter(|c| c.faces.iter().all(|f| f.neighbor.is_some()))
            .map(|c| c.id)
            .collect()
    }
}

/// Which local component a wall scalar represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameTag {
    LocalX,
    LocalZ,
    FrameFree,
}

/// Per-wall-face scalar values with an immutable frame tag.
#[derive(Debug, Clone, PartialEq)]
pub struct WallScalarField {
    values: Vec<f64>,
    tag: FrameTag,
}

impl WallScalarField {
    pub fn new(values: Vec<f64>, tag: FrameTag) -> Self {
        Self { values, tag }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> FrameTag {
        self.tag
    }
}
