//! Conforming triangulations of the unit square with face topology.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{invalid, Error, Result};

/// Maximum number of faces of a mesh element (triangles).
pub const FACES_PER_ELEMENT: usize = 3;

/// An edge of the triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Endpoints, smaller vertex index first.
    pub vertices: [usize; 2],
    /// Face diameter `h_F`.
    pub length: f64,
    pub plus: usize,
    /// `None` on the boundary.
    pub minus: Option<usize>,
    /// Unit normal pointing out of `plus` (into `minus`, or out of the domain).
    pub normal: [f64; 2],
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    diameters: Vec<f64>,
    areas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshQuality {
    /// Smallest interior angle over all elements, in degrees.
    pub min_angle_deg: f64,
    /// Largest `h_T / h_F` over element/face incidences.
    pub max_diameter_ratio: f64,
    /// Set when some element has (numerically) zero area.
    pub degenerate: bool,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
}

impl Mesh {
    /// `m x m` cells on `(0,1)^2`, each split along the diagonal from its
    /// bottom-left to its top-right corner. Mesh size `h = 1/m`.
    pub fn structured(m: usize) -> Result<Mesh> {
        if m < 1 {
            return invalid("mesh divisions m must be at least 1");
        }
        let h = 1.0 / m as f64;
        let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * (m + 1) + i;
        let mut elements = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        Mesh::from_elements(vertices, elements)
    }

    /// Builds the face topology for an arbitrary triangle list. Elements with
    /// clockwise orientation are reoriented.
    pub fn from_elements(vertices: Vec<[f64; 2]>, mut elements: Vec<[usize; 3]>) -> Result<Mesh> {
        for (e, el) in elements.iter_mut().enumerate() {
            for &v in el.iter() {
                if v >= vertices.len() {
                    return invalid(format!("element {e} references missing vertex {v}"));
                }
            }
            if el[0] == el[1] || el[1] == el[2] || el[0] == el[2] {
                return invalid(format!("element {e} repeats a vertex"));
            }
            if signed_area([vertices[el[0]], vertices[el[1]], vertices[el[2]]]) < 0.0 {
                el.swap(1, 2);
            }
        }
        let (faces, element_faces) = enumerate_faces(&vertices, &elements)?;
        let mut diameters = Vec::with_capacity(elements.len());
        let mut areas = Vec::with_capacity(elements.len());
        for el in &elements {
            let p = [vertices[el[0]], vertices[el[1]], vertices[el[2]]];
            diameters.push(dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0])));
            areas.push(signed_area(p));
        }
        Ok(Mesh {
            vertices,
            elements,
            faces,
            element_faces,
            diameters,
            areas,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Face indices of element `e`, local face `i` opposite local vertex `i`.
    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// `h_T`
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn element_points(&self, e: usize) -> [[f64; 2]; 3] {
        let el = self.elements[e];
        [self.vertices[el[0]], self.vertices[el[1]], self.vertices[el[2]]]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let p = self.element_points(e);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    /// `max_T h_T`
    pub fn mesh_size(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn quality_report(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        let mut max_ratio: f64 = 0.0;
        let mut degenerate = false;
        for e in 0..self.num_elements() {
            let p = self.element_points(e);
            let h = self.diameters[e];
            if self.areas[e].abs() <= 1e-14 * h * h {
                degenerate = true;
                min_angle = 0.0;
                continue;
            }
            for i in 0..3 {
                let a = sub(p[(i + 1) % 3], p[i]);
                let b = sub(p[(i + 2) % 3], p[i]);
                let cos = (a[0] * b[0] + a[1] * b[1]) / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
                min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
            for f in self.element_faces[e] {
                max_ratio = max_ratio.max(h / self.faces[f].length);
            }
        }
        MeshQuality {
            min_angle_deg: min_angle,
            max_diameter_ratio: max_ratio,
            degenerate,
        }
    }

    /// Plain-text listing of vertices, elements and faces.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{i} {:e} {:e}", v[0], v[1])?;
        }
        writeln!(w, "elements {}", self.elements.len())?;
        for (i, el) in self.elements.iter().enumerate() {
            writeln!(w, "{i} {} {} {}", el[0], el[1], el[2])?;
        }
        writeln!(w, "faces {}", self.faces.len())?;
        for (i, f) in self.faces.iter().enumerate() {
            let minus = f.minus.map_or_else(|| "-".to_string(), |m| m.to_string());
            writeln!(
                w,
                "{i} {} {} {} {} {:e} {:e} {:e}",
                f.vertices[0], f.vertices[1], f.plus, minus, f.length, f.normal[0], f.normal[1]
            )?;
        }
        Ok(())
    }
}

/// Lists every undirected edge once, in ascending vertex-pair order, with
/// element adjacency. The first element (lowest index) touching a face is its
/// `plus` side.
pub fn enumerate_faces(
    vertices: &[[f64; 2]],
    elements: &[[usize; 3]],
) -> Result<(Vec<Face>, Vec<[usize; 3]>)> {
    // key -> adjacent (element, local face) pairs
    let mut adjacency: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (e, el) in elements.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (el[(i + 1) % 3], el[(i + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let adj = adjacency.entry(key).or_default();
            adj.push((e, i));
            if adj.len() > 2 {
                return Err(Error::NonManifold(format!(
                    "edge ({}, {}) is shared by more than two elements",
                    key.0, key.1
                )));
            }
        }
    }
    let mut faces = Vec::with_capacity(adjacency.len());
    let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
    for ((a, b), adj) in adjacency {
        let (pa, pb) = (vertices[a], vertices[b]);
        let length = dist(pa, pb);
        let (plus, minus) = match adj.as_slice() {
            [(p, _)] => (*p, None),
            [(p, _), (m, _)] => (*p, Some(*m)),
            _ => unreachable!(),
        };
        let t = sub(pb, pa);
        let mut normal = [t[1] / length, -t[0] / length];
        // orient out of the plus element
        let el = elements[plus];
        let c = [
            (vertices[el[0]][0] + vertices[el[1]][0] + vertices[el[2]][0]) / 3.0,
            (vertices[el[0]][1] + vertices[el[1]][1] + vertices[el[2]][1]) / 3.0,
        ];
        let to_face = sub(pa, c);
        if to_face[0] * normal[0] + to_face[1] * normal[1] < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let id = faces.len();
        for &(e, i) in &adj {
            element_faces[e][i] = id;
        }
        faces.push(Face {
            vertices: [a, b],
            length,
            plus,
            minus,
            normal,
        });
    }
    Ok((faces, element_faces))
}
