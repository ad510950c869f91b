//! Phantom-node representation of fiber-aligned matrix cracks.
//!
//! A cracked triangle is duplicated into two overlapping sub-elements whose
//! connectivities mix original and phantom nodes; nodes on one side of the
//! crack segment keep their originals in one sub-element and are replaced by
//! phantoms in the other. The displacement jump along the segment is the
//! difference of the two sub-element fields, sampled at the two endpoint
//! (Newton-Cotes) cohesive integration points.
//!
//! Crack paths are straight lines parallel to the ply fiber direction. A new
//! path may only start at an orthogonal distance of at least `l_c` from every
//! existing path of the same ply; growth happens at the path tips, where the
//! continuing segment stays on the same line.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::fczm::CohesiveState;
use crate::math::{abs, hypot};
use crate::mesh::Mesh;
use crate::ply::BulkPointState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XfemError {
    /// The cut line does not cross the element interior.
    NotCrossing,
    /// The cut would create a sub-element below the area floor.
    Sliver,
}

impl core::fmt::Display for XfemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::NotCrossing => write!(f, "cut line does not cross the element interior"),
            Self::Sliver => write!(f, "cut produces a sub-element below the area floor"),
        }
    }
}

/// Minimum sub-element area as a fraction of the host area.
pub const SLIVER_FLOOR: f64 = 1e-3;

/// Geometric outcome of cutting a triangle with a line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    /// Segment endpoints on the element edges.
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    /// Side of each local node: `true` = positive side of the line normal.
    pub side_a: [bool; 3],
    /// Area of the positive-side polygon (independently computed).
    pub area_a: f64,
    /// Area of the negative-side polygon (independently computed).
    pub area_b: f64,
}

/// Cut a triangle with the line through `anchor` along `dir`. The positive
/// side (A) is the one the left normal of `dir` points into.
pub fn cut_triangle(
    verts: [[f64; 2]; 3],
    anchor: [f64; 2],
    dir: [f64; 2],
) -> Result<Cut, XfemError> {
    let normal = [-dir[1], dir[0]];
    let s = [
        normal[0] * (verts[0][0] - anchor[0]) + normal[1] * (verts[0][1] - anchor[1]),
        normal[0] * (verts[1][0] - anchor[0]) + normal[1] * (verts[1][1] - anchor[1]),
        normal[0] * (verts[2][0] - anchor[0]) + normal[1] * (verts[2][1] - anchor[1]),
    ];
    if s.iter().any(|&v| v == 0.0) {
        return Err(XfemError::NotCrossing);
    }
    // strictly crossed edges
    let mut hits: Vec<(usize, usize, [f64; 2])> = Vec::new();
    for i in 0..3 {
        let j = (i + 1) % 3;
        if (s[i] > 0.0) != (s[j] > 0.0) {
            let t = s[i] / (s[i] - s[j]);
            hits.push((
                i,
                j,
                [
                    verts[i][0] + t * (verts[j][0] - verts[i][0]),
                    verts[i][1] + t * (verts[j][1] - verts[i][1]),
                ],
            ));
        }
    }
    if hits.len() != 2 {
        return Err(XfemError::NotCrossing);
    }
    let side_a = [s[0] > 0.0, s[1] > 0.0, s[2] > 0.0];
    // the lone vertex shares both crossed edges
    let lone = (0..3)
        .find(|&k| {
            (hits[0].0 == k || hits[0].1 == k) && (hits[1].0 == k || hits[1].1 == k)
        })
        .ok_or(XfemError::NotCrossing)?;
    let tri_area = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    };
    let host_area = abs(tri_area(verts[0], verts[1], verts[2]));
    let lone_area = abs(tri_area(verts[lone], hits[0].2, hits[1].2));
    // quad on the other side, measured independently of the lone triangle;
    // cycle: q0 -> q1 -> hit on edge (q1, lone) -> hit on edge (lone, q0)
    let (q0, q1) = ((lone + 1) % 3, (lone + 2) % 3);
    let hit_with = |v: usize| {
        hits.iter()
            .find(|(i, j, _)| *i == v || *j == v)
            .map(|(_, _, p)| *p)
            .expect("both crossed edges touch the lone vertex")
    };
    let quad = [verts[q0], verts[q1], hit_with(q1), hit_with(q0)];
    let quad_area = {
        let mut acc = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            acc += quad[i][0] * quad[j][1] - quad[j][0] * quad[i][1];
        }
        abs(0.5 * acc)
    };
    let (area_a, area_b) = if side_a[lone] {
        (lone_area, quad_area)
    } else {
        (quad_area, lone_area)
    };
    if area_a < SLIVER_FLOOR * host_area || area_b < SLIVER_FLOOR * host_area {
        return Err(XfemError::Sliver);
    }
    Ok(Cut {
        p0: hits[0].2,
        p1: hits[1].2,
        side_a,
        area_a,
        area_b,
    })
}

/// One cracked element: sub-element connectivities, segment geometry, and
/// the states living on it.
#[derive(Clone, Debug)]
pub struct CrackSegment {
    pub layer: usize,
    pub host: usize,
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    /// Unit normal of the segment, pointing into sub-element A.
    pub normal: [f64; 2],
    /// Unit tangent (fiber direction).
    pub tangent: [f64; 2],
    /// Connectivity of sub-element A (the side the normal points into).
    pub conn_a: [usize; 3],
    pub conn_b: [usize; 3],
    pub area_a: f64,
    pub area_b: f64,
    pub bulk_a: BulkPointState,
    pub bulk_b: BulkPointState,
    /// Cohesive integration points at the segment endpoints.
    pub cohesive: [CohesiveState; 2],
    pub path: usize,
}

impl CrackSegment {
    pub fn length(&self) -> f64 {
        hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])
    }
}

/// A straight fiber-parallel crack path: a chain of collinear segments.
#[derive(Clone, Debug)]
pub struct CrackPath {
    pub layer: usize,
    pub anchor: [f64; 2],
    pub dir: [f64; 2],
    pub segments: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct CrackTopology {
    pub segments: Vec<CrackSegment>,
    pub paths: Vec<CrackPath>,
    host_map: BTreeMap<(usize, usize), usize>,
}

/// Why an insertion candidate was turned down, kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rejection {
    /// Closer than `l_c` to an existing path without continuing a tip.
    Spacing { distance: f64 },
    /// Geometric failure of the cut.
    Geometry,
}

#[derive(Clone, Copy, Debug)]
pub struct RejectedCandidate {
    pub layer: usize,
    pub elem: usize,
    pub reason: Rejection,
}

/// What to do with an over-stressed element.
#[derive(Clone, Copy, Debug)]
pub enum InsertionDecision {
    NewPath { anchor: [f64; 2] },
    Propagate { path: usize },
    Reject(Rejection),
}

impl CrackTopology {
    pub fn segment_of(&self, layer: usize, elem: usize) -> Option<usize> {
        self.host_map.get(&(layer, elem)).copied()
    }

    pub fn is_cracked(&self, layer: usize, elem: usize) -> bool {
        self.host_map.contains_key(&(layer, elem))
    }

    /// Orthogonal distance from `point` to the nearest path of `layer`.
    pub fn min_path_distance(&self, layer: usize, point: [f64; 2]) -> Option<f64> {
        self.paths
            .iter()
            .filter(|p| p.layer == layer)
            .map(|p| {
                let n = [-p.dir[1], p.dir[0]];
                abs(n[0] * (point[0] - p.anchor[0]) + n[1] * (point[1] - p.anchor[1]))
            })
            .min_by(|a, b| a.partial_cmp(b).expect("finite distances"))
    }

    /// Decide whether an over-stressed, uncracked element may crack.
    ///
    /// Propagation requires the path line to cross the element and the
    /// element to share an edge with an already-cracked host of that path.
    /// A fresh path requires an orthogonal clearance of at least `l_c` to
    /// every existing path of the ply.
    pub fn decide(&self, mesh: &Mesh, layer: usize, elem: usize, lc: f64) -> InsertionDecision {
        let conn = mesh.layers[layer].elems[elem];
        let verts = [
            mesh.nodes[conn[0]],
            mesh.nodes[conn[1]],
            mesh.nodes[conn[2]],
        ];
        let dir = mesh.layers[layer].ply.fiber_dir();
        for (pid, path) in self.paths.iter().enumerate() {
            if path.layer != layer {
                continue;
            }
            if cut_triangle(verts, path.anchor, dir).is_err() {
                continue;
            }
            let shares_edge = path.segments.iter().any(|&sid| {
                let hconn = mesh.layers[layer].elems[self.segments[sid].host];
                conn.iter().filter(|n| hconn.contains(n)).count() >= 2
            });
            if shares_edge {
                return InsertionDecision::Propagate { path: pid };
            }
        }
        let centroid = mesh.centroid(&conn);
        if let Some(d) = self.min_path_distance(layer, centroid) {
            if d < lc {
                return InsertionDecision::Reject(Rejection::Spacing { distance: d });
            }
        }
        InsertionDecision::NewPath { anchor: centroid }
    }

    /// Split the element and register the new segment. `alloc_phantoms`
    /// hands out three fresh node ids duplicating the host nodes in local
    /// order; it is called only once the cut geometry is valid.
    pub fn insert(
        &mut self,
        mesh: &Mesh,
        layer: usize,
        elem: usize,
        decision: &InsertionDecision,
        parent: &BulkPointState,
        alloc_phantoms: &mut dyn FnMut(&[usize; 3]) -> [usize; 3],
    ) -> Result<usize, XfemError> {
        let conn = mesh.layers[layer].elems[elem];
        let verts = [
            mesh.nodes[conn[0]],
            mesh.nodes[conn[1]],
            mesh.nodes[conn[2]],
        ];
        let dir = mesh.layers[layer].ply.fiber_dir();
        let (anchor, path_id) = match decision {
            InsertionDecision::NewPath { anchor } => (*anchor, None),
            InsertionDecision::Propagate { path } => (self.paths[*path].anchor, Some(*path)),
            InsertionDecision::Reject(_) => return Err(XfemError::NotCrossing),
        };
        let cut = match cut_triangle(verts, anchor, dir) {
            Ok(c) => c,
            Err(XfemError::Sliver) if path_id.is_none() => {
                // nudge a fresh line sideways out of the degenerate cut
                let area = mesh.triangle_area(&conn);
                let h = libm::sqrt(2.0 * area);
                let n = [-dir[1], dir[0]];
                let mut found = None;
                'nudge: for k in 1..=3 {
                    let off = 1e-3 * h * k as f64;
                    for sgn in [1.0, -1.0] {
                        let a = [anchor[0] + sgn * off * n[0], anchor[1] + sgn * off * n[1]];
                        if let Ok(c) = cut_triangle(verts, a, dir) {
                            found = Some(c);
                            break 'nudge;
                        }
                    }
                }
                found.ok_or(XfemError::Sliver)?
            }
            Err(e) => return Err(e),
        };
        let phantoms = alloc_phantoms(&conn);
        let mut conn_a = conn;
        let mut conn_b = conn;
        for k in 0..3 {
            if cut.side_a[k] {
                conn_b[k] = phantoms[k];
            } else {
                conn_a[k] = phantoms[k];
            }
        }
        let normal = [-dir[1], dir[0]];
        // history transfer: with constant-stress hosts the parent values
        // copy directly onto both cohesive points
        let mut cohesive = [CohesiveState::new(parent.r_local); 2];
        for c in cohesive.iter_mut() {
            c.unloaded = parent.unloaded;
            c.frozen_fatigue = false;
        }
        let sid = self.segments.len();
        let pid = match path_id {
            Some(p) => {
                self.paths[p].segments.push(sid);
                p
            }
            None => {
                self.paths.push(CrackPath {
                    layer,
                    anchor,
                    dir,
                    segments: alloc::vec![sid],
                });
                self.paths.len() - 1
            }
        };
        self.segments.push(CrackSegment {
            layer,
            host: elem,
            p0: cut.p0,
            p1: cut.p1,
            normal,
            tangent: dir,
            conn_a,
            conn_b,
            area_a: cut.area_a,
            area_b: cut.area_b,
            bulk_a: *parent,
            bulk_b: *parent,
            cohesive,
            path: pid,
        });
        self.host_map.insert((layer, elem), sid);
        Ok(sid)
    }

    /// Minimum orthogonal distance between distinct same-ply paths, for
    /// spacing audits. `None` when no ply has two paths.
    pub fn min_pairwise_spacing(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.paths.iter().enumerate() {
            for b in self.paths.iter().skip(i + 1) {
                if a.layer != b.layer {
                    continue;
                }
                let n = [-a.dir[1], a.dir[0]];
                let d =
                    abs(n[0] * (b.anchor[0] - a.anchor[0]) + n[1] * (b.anchor[1] - a.anchor[1]));
                best = Some(match best {
                    Some(v) if v < d => v,
                    _ => d,
                });
            }
        }
        best
    }
}

/// Shape functions of a triangle at a point (area coordinates).
pub fn shape_functions(verts: [[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let area2 = (verts[1][0] - verts[0][0]) * (verts[2][1] - verts[0][1])
        - (verts[2][0] - verts[0][0]) * (verts[1][1] - verts[0][1]);
    let mut n = [0.0; 3];
    for k in 0..3 {
        let a = verts[(k + 1) % 3];
        let b = verts[(k + 2) % 3];
        n[k] = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / area2;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [[f64; 2]; 3] {
        [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]
    }

    #[test]
    fn cut_partitions_area_exactly() {
        let cut = cut_triangle(tri(), [0.7, 0.0], [0.0, 1.0]).unwrap();
        let host = 2.0;
        assert!(abs(cut.area_a + cut.area_b - host) < 1e-12 * host);
        // vertical cut, normal (-1,0) points to x < 0.7: nodes 0 and 2 are
        // on the positive (A) side, node 1 is the lone vertex on B
        assert_eq!(cut.side_a, [true, false, true]);
    }

    #[test]
    fn cut_rejects_missing_and_degenerate_lines() {
        assert_eq!(
            cut_triangle(tri(), [5.0, 0.0], [0.0, 1.0]),
            Err(XfemError::NotCrossing)
        );
        // through a vertex
        assert!(cut_triangle(tri(), [0.0, 0.0], [0.0, 1.0]).is_err());
        // sliver next to the right vertex
        assert_eq!(
            cut_triangle(tri(), [1.9999, 0.0], [0.0, 1.0]),
            Err(XfemError::Sliver)
        );
    }

    #[test]
    fn shape_functions_partition_unity() {
        let v = tri();
        let n = shape_functions(v, [0.4, 0.7]);
        assert!(abs(n[0] + n[1] + n[2] - 1.0) < 1e-14);
        let n0 = shape_functions(v, v[0]);
        assert!(abs(n0[0] - 1.0) < 1e-14 && abs(n0[1]) < 1e-14 && abs(n0[2]) < 1e-14);
    }
}
