//! Layered triangular meshes for stacked plane-stress ply membranes.
//!
//! Every ply layer is a set of constant-strain triangles over the same
//! domain. Outside the delamination ("fine") region, consecutive layers are
//! rigidly tied by sharing node ids; inside it each layer carries its own
//! coincident nodes and consecutive layers are coupled through zero-thickness
//! interface elements (one per coincident triangle pair, integrated at the
//! vertices).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ply::PlyParams;

#[derive(Clone, Debug, PartialEq)]
pub enum MeshError {
    InvalidDimension(&'static str),
    NodeIndexOutOfRange { elem: usize, node: usize },
    NonCoincidentInterfacePair { interface: usize },
    InterfaceLayerOutOfRange { interface: usize },
    NonPositiveArea { layer: usize, elem: usize },
    UnknownNodeSet(String),
    ElementSizeTooLarge,
}

impl core::fmt::Display for MeshError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::InvalidDimension(s) => write!(f, "invalid mesh dimension: {s}"),
            Self::NodeIndexOutOfRange { elem, node } => {
                write!(f, "element {elem} references missing node {node}")
            }
            Self::NonCoincidentInterfacePair { interface } => {
                write!(f, "interface element {interface} pairs non-coincident nodes")
            }
            Self::InterfaceLayerOutOfRange { interface } => {
                write!(f, "interface element {interface} references a missing layer")
            }
            Self::NonPositiveArea { layer, elem } => {
                write!(f, "element {elem} in layer {layer} has non-positive area")
            }
            Self::UnknownNodeSet(name) => write!(f, "unknown node set '{name}'"),
            Self::ElementSizeTooLarge => write!(f, "element size larger than the meshed region"),
        }
    }
}

/// One ply layer: material, triangles, and the crack-eligibility flag of
/// each triangle (true inside the fine/delamination region).
#[derive(Clone, Debug)]
pub struct Layer {
    pub ply: PlyParams,
    pub elems: Vec<[usize; 3]>,
    pub fine: Vec<bool>,
}

/// Zero-thickness interface element pairing coincident triangles of two
/// consecutive layers, vertex by vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterfaceElem {
    /// Index of the lower layer; the upper layer is `lower_layer + 1`.
    pub lower_layer: usize,
    pub nodes_lo: [usize; 3],
    pub nodes_up: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub layers: Vec<Layer>,
    pub interfaces: Vec<InterfaceElem>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
}

pub const COINCIDENCE_TOL: f64 = 1e-9;

impl Mesh {
    pub fn node_set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| MeshError::UnknownNodeSet(String::from(name)))
    }

    pub fn triangle_area(&self, conn: &[usize; 3]) -> f64 {
        let a = self.nodes[conn[0]];
        let b = self.nodes[conn[1]];
        let c = self.nodes[conn[2]];
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, conn: &[usize; 3]) -> [f64; 2] {
        let a = self.nodes[conn[0]];
        let b = self.nodes[conn[1]];
        let c = self.nodes[conn[2]];
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.fine.len() != layer.elems.len() {
                return Err(MeshError::InvalidDimension("fine flags per element"));
            }
            for (e, conn) in layer.elems.iter().enumerate() {
                for &nd in conn {
                    if nd >= n {
                        return Err(MeshError::NodeIndexOutOfRange { elem: e, node: nd });
                    }
                }
                if self.triangle_area(conn) <= 0.0 {
                    return Err(MeshError::NonPositiveArea { layer: l, elem: e });
                }
            }
        }
        for (i, itf) in self.interfaces.iter().enumerate() {
            if itf.lower_layer + 1 >= self.layers.len() {
                return Err(MeshError::InterfaceLayerOutOfRange { interface: i });
            }
            for k in 0..3 {
                let (a, b) = (itf.nodes_lo[k], itf.nodes_up[k]);
                if a >= n || b >= n {
                    return Err(MeshError::NodeIndexOutOfRange { elem: i, node: a.max(b) });
                }
                let pa = self.nodes[a];
                let pb = self.nodes[b];
                if crate::math::hypot(pa[0] - pb[0], pa[1] - pb[1]) > COINCIDENCE_TOL {
                    return Err(MeshError::NonCoincidentInterfacePair { interface: i });
                }
            }
        }
        for ids in self.node_sets.values() {
            for &nd in ids {
                if nd >= n {
                    return Err(MeshError::NodeIndexOutOfRange { elem: usize::MAX, node: nd });
                }
            }
        }
        Ok(())
    }
}

/// Parameters of the built-in layered strip generator.
#[derive(Clone, Debug)]
pub struct StripSpec {
    pub length: f64,
    pub width: f64,
    pub nx: usize,
    pub ny: usize,
    pub layup: Vec<PlyParams>,
    /// x-range of the delamination/fine region; `None` ties the layers
    /// everywhere (no interface elements, no crack insertion).
    pub delam_x: Option<(f64, f64)>,
}

/// Structured strip of right triangles, layered per ply, with coincident
/// interface node pairs inside the delamination region. Deterministic node
/// ordering.
pub fn generate_strip(spec: &StripSpec) -> Result<Mesh, MeshError> {
    if !(spec.length > 0.0 && spec.width > 0.0) {
        return Err(MeshError::InvalidDimension("length and width must be > 0"));
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(MeshError::ElementSizeTooLarge);
    }
    if spec.layup.is_empty() {
        return Err(MeshError::InvalidDimension("layup must not be empty"));
    }
    let nlay = spec.layup.len();
    let dx = spec.length / spec.nx as f64;
    let dy = spec.width / spec.ny as f64;
    let cols = spec.nx + 1;
    let rows = spec.ny + 1;
    let xc = |i: usize| i as f64 * dx;
    let tol = 1e-9 * spec.length.max(spec.width);

    // Shared grid nodes first, then per-layer duplicates for the columns
    // strictly inside the delamination range.
    let mut nodes: Vec<[f64; 2]> = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            nodes.push([xc(i), j as f64 * dy]);
        }
    }
    let shared = |i: usize, j: usize| j * cols + i;

    let col_dup: Vec<bool> = (0..cols)
        .map(|i| match spec.delam_x {
            Some((x0, x1)) => xc(i) > x0 + tol && xc(i) < x1 - tol,
            None => false,
        })
        .collect();

    // dup_id[layer-1][column-major grid index] for layers >= 1
    let mut dup_id: Vec<Vec<usize>> = Vec::new();
    for _l in 1..nlay {
        let mut ids = alloc::vec![usize::MAX; cols * rows];
        for j in 0..rows {
            for i in 0..cols {
                if col_dup[i] {
                    ids[shared(i, j)] = nodes.len();
                    nodes.push([xc(i), j as f64 * dy]);
                }
            }
        }
        dup_id.push(ids);
    }
    let node_of = |l: usize, i: usize, j: usize| -> usize {
        if l == 0 || !col_dup[i] {
            shared(i, j)
        } else {
            dup_id[l - 1][shared(i, j)]
        }
    };

    let elem_in_delam = |i: usize| -> bool {
        match spec.delam_x {
            Some((x0, x1)) => xc(i) >= x0 - tol && xc(i + 1) <= x1 + tol,
            None => false,
        }
    };

    let mut layers: Vec<Layer> = Vec::with_capacity(nlay);
    for (l, ply) in spec.layup.iter().enumerate() {
        let mut elems = Vec::with_capacity(spec.nx * spec.ny * 2);
        let mut fine = Vec::with_capacity(spec.nx * spec.ny * 2);
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let n00 = node_of(l, i, j);
                let n10 = node_of(l, i + 1, j);
                let n11 = node_of(l, i + 1, j + 1);
                let n01 = node_of(l, i, j + 1);
                elems.push([n00, n10, n11]);
                elems.push([n00, n11, n01]);
                let f = elem_in_delam(i);
                fine.push(f);
                fine.push(f);
            }
        }
        layers.push(Layer {
            ply: *ply,
            elems,
            fine,
        });
    }

    let mut interfaces = Vec::new();
    if spec.delam_x.is_some() {
        for l in 0..nlay.saturating_sub(1) {
            for (e, fine) in layers[l].fine.iter().enumerate() {
                if *fine {
                    interfaces.push(InterfaceElem {
                        lower_layer: l,
                        nodes_lo: layers[l].elems[e],
                        nodes_up: layers[l + 1].elems[e],
                    });
                }
            }
        }
    }

    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut edge = |name: &str, pred: &dyn Fn(usize, usize) -> bool| {
        let mut ids: Vec<usize> = Vec::new();
        for j in 0..rows {
            for i in 0..cols {
                if pred(i, j) {
                    for l in 0..nlay {
                        let nd = node_of(l, i, j);
                        if !ids.contains(&nd) {
                            ids.push(nd);
                        }
                    }
                }
            }
        }
        node_sets.insert(String::from(name), ids);
    };
    edge("left", &|i, _j| i == 0);
    edge("right", &|i, _j| i == spec.nx);
    edge("bottom", &|_i, j| j == 0);
    edge("top", &|_i, j| j == spec.ny);
    node_sets.insert(String::from("origin"), alloc::vec![shared(0, 0)]);

    let mesh = Mesh {
        nodes,
        layers,
        interfaces,
        node_sets,
    };
    mesh.validate()?;
    Ok(mesh)
}
