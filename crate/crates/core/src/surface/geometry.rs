use std::collections::HashMap;

use super::{Cell, CellFace, SurfaceError, Vec3};

/// Area vector `½ Σ v_i × v_{i+1}` of a planar polygon.
pub fn polygon_area_vector(poly: &[Vec3]) -> Vec3 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(&poly[(i + 1) % n]))
        .sum::<Vec3>()
        * 0.5
}

fn average(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

type FaceKey = Vec<[i64; 3]>;

fn face_key(poly: &[Vec3]) -> FaceKey {
    let q = |x: f64| (x * 1e9).round() as i64;
    let mut k: FaceKey = poly.iter().map(|v| [q(v.x), q(v.y), q(v.z)]).collect();
    k.sort_unstable();
    k
}

/// Assembles convex polyhedral cells from their face polygons, orienting
/// faces outward and linking cells that share a face.
#[derive(Debug, Default)]
pub struct PolyhedronBuilder {
    cells: Vec<Vec<Vec<Vec3>>>,
}

impl PolyhedronBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cell; returns its id.
    pub fn add_cell(&mut self, faces: Vec<Vec<Vec3>>) -> usize {
        self.cells.push(faces);
        self.cells.len() - 1
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn build(self) -> Result<Vec<Cell>, SurfaceError> {
        let mut owners: HashMap<FaceKey, Vec<(usize, usize)>> = HashMap::new();
        let mut cells = Vec::with_capacity(self.cells.len());
        for (id, mut faces) in self.cells.into_iter().enumerate() {
            if faces.len() < 4 || faces.iter().any(|f| f.len() < 3) {
                return Err(SurfaceError::InvalidMesh(format!(
                    "cell {id} is not a polyhedron"
                )));
            }
            let all: Vec<Vec3> = faces.iter().flatten().copied().collect();
            let inside = average(&all);
            for f in faces.iter_mut() {
                if polygon_area_vector(f).dot(&(average(f) - inside)) < 0.0 {
                    f.reverse();
                }
            }
            let mut volume = 0.0;
            let mut moment = Vec3::zeros();
            for f in &faces {
                for i in 1..f.len() - 1 {
                    let (a, b, c) = (f[0], f[i], f[i + 1]);
                    let v = (a - inside).dot(&(b - inside).cross(&(c - inside))) / 6.0;
                    volume += v;
                    moment += v * (inside + a + b + c) / 4.0;
                }
            }
            if !(volume > 0.0) {
                return Err(SurfaceError::InvalidMesh(format!(
                    "cell {id} has volume {volume}"
                )));
            }
            for (k, f) in faces.iter().enumerate() {
                owners.entry(face_key(f)).or_default().push((id, k));
            }
            cells.push(Cell {
                id,
                centroid: moment / volume,
                volume,
                faces: faces
                    .iter()
                    .map(|f| CellFace {
                        area_vector: polygon_area_vector(f),
                        neighbor: None,
                    })
                    .collect(),
            });
        }
        for (_, sharers) in owners {
            match sharers.as_slice() {
                [_] => {}
                [(a, fa), (b, fb)] => {
                    cells[*a].faces[*fa].neighbor = Some(*b);
                    cells[*b].faces[*fb].neighbor = Some(*a);
                }
                more => {
                    return Err(SurfaceError::InvalidMesh(format!(
                        "face shared by {} cells",
                        more.len()
                    )))
                }
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube(o: Vec3) -> Vec<Vec<Vec3>> {
        let p = |x: f64, y: f64, z: f64| o + Vec3::new(x, y, z);
        vec![
            vec![p(0., 0., 0.), p(0., 1., 0.), p(0., 1., 1.), p(0., 0., 1.)],
            vec![p(1., 0., 0.), p(1., 1., 0.), p(1., 1., 1.), p(1., 0., 1.)],
            vec![p(0., 0., 0.), p(1., 0., 0.), p(1., 0., 1.), p(0., 0., 1.)],
            vec![p(0., 1., 0.), p(1., 1., 0.), p(1., 1., 1.), p(0., 1., 1.)],
            vec![p(0., 0., 0.), p(1., 0., 0.), p(1., 1., 0.), p(0., 1., 0.)],
            vec![p(0., 0., 1.), p(1., 0., 1.), p(1., 1., 1.), p(0., 1., 1.)],
        ]
    }

    #[test]
    fn cube_geometry_and_linking() {
        let mut b = PolyhedronBuilder::new();
        b.add_cell(unit_cube(Vec3::zeros()));
        b.add_cell(unit_cube(Vec3::new(1.0, 0.0, 0.0)));
        let cells = b.build().unwrap();
        assert!((cells[0].volume - 1.0).abs() < 1e-14);
        assert!((cells[1].centroid - Vec3::new(1.5, 0.5, 0.5)).norm() < 1e-14);
        assert!(cells[0].closure_defect() < 1e-15);
        let shared: Vec<_> = cells[0]
            .faces
            .iter()
            .filter(|f| f.neighbor == Some(1))
            .collect();
        assert_eq!(shared.len(), 1);
        assert!((shared[0].area_vector - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tetrahedron_volume() {
        let (a, b, c, d) = (Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z());
        let mut builder = PolyhedronBuilder::new();
        builder.add_cell(vec![
            vec![a, b, c],
            vec![a, b, d],
            vec![a, c, d],
            vec![b, c, d],
        ]);
        let cells = builder.build().unwrap();
        assert!((cells[0].volume - 1.0 / 6.0).abs() < 1e-15);
        assert!((cells[0].centroid - Vec3::new(0.25, 0.25, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_cells_rejected() {
        let mut b = PolyhedronBuilder::new();
        b.add_cell(vec![vec![Vec3::zeros(), Vec3::x(), Vec3::y()]]);
        assert!(b.build().is_err());
    }
}
