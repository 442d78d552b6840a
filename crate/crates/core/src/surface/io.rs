use std::fmt::Write as _;

use crate::iwm::{IntegralGradients, Term};

use super::{Cell, CellFace, SurfaceError, Vec3, WallFace, WallPatchMesh};

pub const DIAGNOSTICS_HEADER: &str = "face,term,direction,computed,reference,abs_error";

/// One row per face, term and direction.
pub fn gradient_diagnostics_csv(
    computed: &[IntegralGradients],
    reference: &[IntegralGradients],
) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for (f, (c, r)) in computed.iter().zip(reference).enumerate() {
        for (i, t) in Term::ALL.iter().enumerate() {
            for (dir, a, b) in [("x", c.d_dx[i], r.d_dx[i]), ("z", c.d_dz[i], r.d_dz[i])] {
                let _ = writeln!(out, "{f},{},{dir},{a},{b},{}", t.label(), (a - b).abs());
            }
        }
    }
    out
}

fn vec3(v: &Vec3) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

/// Plain-text mesh dump:
///
/// ```text
/// wallpatch 1
/// faces <n>
/// <cx cy cz> <nx ny nz> <lx> <lz> <area> | <adjacent ids>
/// cells <m>
/// <cx cy cz> <volume> <nfaces>
/// <ax ay az> <neighbour or -1>        (nfaces lines)
/// ```
pub fn write_mesh(mesh: &WallPatchMesh) -> String {
    let mut out = String::from("wallpatch 1\n");
    let _ = writeln!(out, "faces {}", mesh.wall_faces.len());
    for (f, adj) in mesh.wall_faces.iter().zip(&mesh.face_adjacency) {
        let adj: Vec<String> = adj.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{} {} {} {} {} | {}",
            vec3(&f.centroid),
            vec3(&f.unit_normal),
            vec3(&f.local_x),
            vec3(&f.local_z),
            f.area,
            adj.join(" ")
        );
    }
    let _ = writeln!(out, "cells {}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(out, "{} {} {}", vec3(&c.centroid), c.volume, c.faces.len());
        for f in &c.faces {
            let n = f.neighbor.map_or(-1, |n| n as i64);
            let _ = writeln!(out, "{} {n}", vec3(&f.area_vector));
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, SurfaceError> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let l = l.trim();
                    if !l.is_empty() && !l.starts_with('#') {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of input")),
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> SurfaceError {
        SurfaceError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn numbers(&self, s: &str, expected: usize) -> Result<Vec<f64>, SurfaceError> {
        let v: Vec<f64> = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if v.len() != expected {
            return Err(self.err(format!("expected {expected} numbers, found {}", v.len())));
        }
        Ok(v)
    }

    fn count(&self, s: &str, keyword: &str) -> Result<usize, SurfaceError> {
        s.strip_prefix(keyword)
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| self.err(format!("expected `{keyword} <count>`")))
    }
}

pub fn read_mesh(text: &str) -> Result<WallPatchMesh, SurfaceError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != "wallpatch 1" {
        return Err(lines.err("missing `wallpatch 1` header"));
    }
    let l = lines.next()?;
    let n = lines.count(l, "faces")?;
    let mut wall_faces = Vec::with_capacity(n);
    let mut face_adjacency = Vec::with_capacity(n);
    for id in 0..n {
        let l = lines.next()?;
        let (geom, adj) = l
            .split_once('|')
            .ok_or_else(|| lines.err("missing `|` before adjacency"))?;
        let v = lines.numbers(geom, 13)?;
        let p = |i: usize| Vec3::new(v[i], v[i + 1], v[i + 2]);
        wall_faces.push(WallFace {
            id,
            centroid: p(0),
            unit_normal: p(3),
            local_x: p(6),
            local_z: p(9),
            area: v[12],
        });
        let adj = adj
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| lines.err(format!("bad face id {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        face_adjacency.push(adj);
    }
    let l = lines.next()?;
    let m = lines.count(l, "cells")?;
    let mut cells = Vec::with_capacity(m);
    for id in 0..m {
        let l = lines.next()?;
        let v = lines.numbers(l, 5)?;
        if v[4] < 0.0 || v[4].fract() != 0.0 {
            return Err(lines.err("face count must be a non-negative integer"));
        }
        let mut faces = Vec::with_capacity(v[4] as usize);
        for _ in 0..v[4] as usize {
            let l = lines.next()?;
            let f = lines.numbers(l, 4)?;
            let neighbor = match f[3] {
                -1.0 => None,
                x if x >= 0.0 && x.fract() == 0.0 => Some(x as usize),
                _ => return Err(lines.err("neighbour must be a cell id or -1")),
            };
            faces.push(CellFace {
                area_vector: Vec3::new(f[0], f[1], f[2]),
                neighbor,
            });
        }
        cells.push(Cell {
            id,
            centroid: Vec3::new(v[0], v[1], v[2]),
            volume: v[3],
            faces,
        });
    }
    let mesh = WallPatchMesh {
        wall_faces,
        cells,
        face_adjacency,
    };
    mesh.validate()?;
    Ok(mesh)
}
