//! Assembly, Newton solution and adaptive pseudo-time stepping.
//!
//! Elements: constant-strain triangles per ply layer (whole or split into
//! phantom-node sub-elements), cohesive crack segments with two endpoint
//! Newton-Cotes points, and zero-thickness ply interface elements integrated
//! at the triangle vertices with tributary area `A/3`. Damage trials are
//! recomputed from committed state in every iteration, so a failed step
//! leaves the committed state untouched by construction.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::fczm::{self, CohesiveParams, CohesiveState, FczmError, StepContext};
use crate::linalg::{norm2, reverse_cuthill_mckee, BandedMatrix};
use crate::math::{hypot, Dual2, Real};
use crate::mesh::Mesh;
use crate::ply::{self, BulkPointState, Phase};
use crate::xfem::{
    shape_functions, CrackTopology, InsertionDecision, RejectedCandidate, Rejection,
};

/// Dummy stiffness of a ply interface from the in-plane shear modulus and
/// the ply thickness: `K_d = G12 / (t_p / 2)`.
pub fn interface_dummy_stiffness(g12: f64, t_p: f64) -> f64 {
    g12 / (0.5 * t_p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative force-residual tolerance.
    pub tol_rel: f64,
    pub n_iter_max: usize,
    /// Growth base `C` of the adaptive step law.
    pub c_growth: f64,
    /// Exponent scale `xi` of the adaptive step law.
    pub xi: f64,
    pub n_iter_opt: usize,
    /// Step reduction factor after a failed step.
    pub c_red: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-4,
            n_iter_max: 20,
            c_growth: 2.0,
            xi: 2.0,
            n_iter_opt: 5,
            c_red: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.tol_rel > 0.0) {
            return Err("tol_rel must be > 0");
        }
        if !(self.c_growth > 1.0) {
            return Err("c_growth must be > 1");
        }
        if !(self.xi > 0.0) {
            return Err("xi must be > 0");
        }
        if !(self.c_red > 0.0 && self.c_red < 1.0) {
            return Err("c_red must lie in (0, 1)");
        }
        if self.n_iter_max == 0 {
            return Err("n_iter_max must be >= 1");
        }
        Ok(())
    }
}

/// Next step size from the iteration count of the last converged step,
/// clamped to `[dt_min, dt_max]`.
pub fn adapt_step(
    dt_prev: f64,
    n_iter: usize,
    cfg: &SolverConfig,
    dt_min: f64,
    dt_max: f64,
) -> f64 {
    let n = n_iter.max(1) as f64;
    let expo = -(n - cfg.n_iter_opt as f64) / cfg.xi;
    let dt = libm::pow(cfg.c_growth, expo) * dt_prev;
    dt.clamp(dt_min, dt_max)
}

/// Load and pseudo-time context of one equilibrium solve.
#[derive(Clone, Copy, Debug)]
pub struct LoadCase {
    /// Scales nodal loads and load-scaled Dirichlet values.
    pub lambda_mech: f64,
    /// Scales the thermal strain (fraction of the full temperature drop).
    pub lambda_th: f64,
    pub cz: StepContext,
}

impl LoadCase {
    pub fn static_at(lambda_mech: f64, lambda_th: f64) -> Self {
        Self {
            lambda_mech,
            lambda_th,
            cz: StepContext::STATIC,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveFailure {
    Diverged { iterations: usize },
    Singular,
    Constitutive(FczmError),
    BadModel(String),
}

impl core::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Diverged { iterations } => {
                write!(f, "Newton solve did not converge in {iterations} iterations")
            }
            Self::Singular => write!(f, "singular linear system"),
            Self::Constitutive(e) => write!(f, "constitutive failure: {e}"),
            Self::BadModel(s) => write!(f, "inconsistent model: {s}"),
        }
    }
}

impl From<FczmError> for SolveFailure {
    fn from(e: FczmError) -> Self {
        Self::Constitutive(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub dof: usize,
    pub base: f64,
    /// Scale the value with `lambda_mech` (loading) or keep it fixed
    /// (supports).
    pub scaled: bool,
}

struct Layout {
    perm: Vec<usize>,
    kl: usize,
}

/// Which insertion envelope applies in the current phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertionCriterion {
    /// Static ramp: equivalent traction against the static strength.
    StaticStrength,
    /// Fatigue phases: endurance-based failure index.
    FatigueEndurance,
}

/// The analysis model: mesh, materials, crack topology, committed state.
pub struct FemModel {
    pub mesh: Mesh,
    pub cz_ply: CohesiveParams,
    pub cz_interface: CohesiveParams,
    /// Crack-spacing parameter.
    pub lc: f64,
    /// Full temperature drop of the thermal phase.
    pub dt_drop: f64,
    pub topology: CrackTopology,
    /// Per-layer, per-element bulk state (entries of cracked hosts are
    /// superseded by the sub-element states on the segment).
    pub bulk: Vec<Vec<BulkPointState>>,
    /// Interface states, one per element vertex pair.
    pub iface: Vec<[CohesiveState; 3]>,
    /// Committed displacements.
    pub u: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Nodal loads at `lambda_mech = 1`.
    pub loads: Vec<(usize, f64)>,
    phantom_coords: Vec<[f64; 2]>,
    q_bar: Vec<[[f64; 3]; 3]>,
    eps_th_full: Vec<[f64; 3]>,
    layout: Option<Layout>,
}

impl FemModel {
    pub fn new(
        mesh: Mesh,
        cz_ply: CohesiveParams,
        cz_interface: CohesiveParams,
        lc: f64,
        dt_drop: f64,
        r_default: f64,
    ) -> Result<Self, SolveFailure> {
        mesh.validate()
            .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?;
        let mut q_bar = Vec::with_capacity(mesh.layers.len());
        let mut eps_th_full = Vec::with_capacity(mesh.layers.len());
        for layer in &mesh.layers {
            q_bar.push(
                ply::ply_stiffness(&layer.ply)
                    .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?,
            );
            eps_th_full.push(ply::thermal_strain(&layer.ply, dt_drop));
        }
        let bulk = mesh
            .layers
            .iter()
            .map(|l| vec![BulkPointState::new(r_default); l.elems.len()])
            .collect();
        let iface = vec![[CohesiveState::new(r_default); 3]; mesh.interfaces.len()];
        let ndof = 2 * mesh.nodes.len();
        Ok(Self {
            mesh,
            cz_ply,
            cz_interface,
            lc,
            dt_drop,
            topology: CrackTopology::default(),
            bulk,
            iface,
            u: vec![0.0; ndof],
            constraints: Vec::new(),
            loads: Vec::new(),
            phantom_coords: Vec::new(),
            q_bar,
            eps_th_full,
            layout: None,
        })
    }

    pub fn n_nodes_total(&self) -> usize {
        self.mesh.nodes.len() + self.phantom_coords.len()
    }

    pub fn ndof(&self) -> usize {
        2 * self.n_nodes_total()
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        if node < self.mesh.nodes.len() {
            self.mesh.nodes[node]
        } else {
            self.phantom_coords[node - self.mesh.nodes.len()]
        }
    }

    /// Fix one displacement component of every node in a named set.
    pub fn clamp_node_set(&mut self, set: &str, comp: usize) -> Result<(), SolveFailure> {
        let ids: Vec<usize> = self
            .mesh
            .node_set(set)
            .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?
            .to_vec();
        for n in ids {
            self.constraints.push(Constraint {
                dof: 2 * n + comp,
                base: 0.0,
                scaled: false,
            });
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, dof: usize, base: f64, scaled: bool) {
        self.constraints.push(Constraint { dof, base, scaled });
    }

    /// Distribute a total force over an edge node set, proportionally to
    /// tributary lengths along the edge.
    pub fn load_edge(&mut self, set: &str, comp: usize, total: f64) -> Result<(), SolveFailure> {
        let ids: Vec<usize> = self
            .mesh
            .node_set(set)
            .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?
            .to_vec();
        if ids.is_empty() {
            return Err(SolveFailure::BadModel(String::from("empty load edge")));
        }
        if ids.len() == 1 {
            self.loads.push((2 * ids[0] + comp, total));
            return Ok(());
        }
        let coords: Vec<[f64; 2]> = ids.iter().map(|&n| self.mesh.nodes[n]).collect();
        let spanx = coords.iter().map(|c| c[0]).fold(f64::MIN, f64::max)
            - coords.iter().map(|c| c[0]).fold(f64::MAX, f64::min);
        let spany = coords.iter().map(|c| c[1]).fold(f64::MIN, f64::max)
            - coords.iter().map(|c| c[1]).fold(f64::MAX, f64::min);
        let along = usize::from(spany > spanx);
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            coords[a][along]
                .partial_cmp(&coords[b][along])
                .expect("finite coordinates")
                .then(ids[a].cmp(&ids[b]))
        });
        let pos: Vec<f64> = order.iter().map(|&k| coords[k][along]).collect();
        let span: f64 = pos[pos.len() - 1] - pos[0];
        if span <= 0.0 {
            return Err(SolveFailure::BadModel(String::from(
                "load edge nodes are not spread along an edge",
            )));
        }
        for (rank, &k) in order.iter().enumerate() {
            let lo = if rank == 0 {
                pos[0]
            } else {
                0.5 * (pos[rank - 1] + pos[rank])
            };
            let hi = if rank + 1 == pos.len() {
                pos[pos.len() - 1]
            } else {
                0.5 * (pos[rank] + pos[rank + 1])
            };
            let w = (hi - lo) / span;
            self.loads.push((2 * ids[k] + comp, total * w));
        }
        Ok(())
    }

    /// Mean displacement component over a node set.
    pub fn mean_displacement(
        &self,
        u: &[f64],
        set: &str,
        comp: usize,
    ) -> Result<f64, SolveFailure> {
        let ids = self
            .mesh
            .node_set(set)
            .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?;
        let sum: f64 = ids.iter().map(|&n| u[2 * n + comp]).sum();
        Ok(sum / ids.len() as f64)
    }

    /// Total applied force along a component at `lambda_mech = 1`.
    pub fn total_load(&self, comp: usize) -> f64 {
        self.loads
            .iter()
            .filter(|(d, _)| d % 2 == comp)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn set_frozen_fatigue(&mut self, frozen: bool) {
        for states in self.iface.iter_mut() {
            for s in states.iter_mut() {
                s.frozen_fatigue = frozen;
            }
        }
        for seg in self.topology.segments.iter_mut() {
            for s in seg.cohesive.iter_mut() {
                s.frozen_fatigue = frozen;
            }
        }
    }

    fn invalidate_layout(&mut self) {
        self.layout = None;
    }

    fn ensure_layout(&mut self) {
        if self.layout.is_some() {
            return;
        }
        let n = self.n_nodes_total();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        {
            let mut clique = |nodes: &[usize]| {
                for &a in nodes {
                    for &b in nodes {
                        if a != b {
                            adj[a].push(b);
                        }
                    }
                }
            };
            for (l, layer) in self.mesh.layers.iter().enumerate() {
                for (e, conn) in layer.elems.iter().enumerate() {
                    if self.topology.is_cracked(l, e) {
                        continue;
                    }
                    clique(conn);
                }
            }
            for seg in &self.topology.segments {
                let mut all = [0usize; 6];
                all[..3].copy_from_slice(&seg.conn_a);
                all[3..].copy_from_slice(&seg.conn_b);
                clique(&all);
            }
            for itf in &self.mesh.interfaces {
                for k in 0..3 {
                    clique(&[itf.nodes_lo[k], itf.nodes_up[k]]);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut kl = 1usize;
        for (v, nb) in adj.iter().enumerate() {
            for &w in nb {
                kl = kl.max(2 * perm[v].abs_diff(perm[w]) + 1);
            }
        }
        self.layout = Some(Layout { perm, kl });
    }

    #[inline]
    fn pdof(&self, dof: usize) -> usize {
        let layout = self.layout.as_ref().expect("layout built");
        2 * layout.perm[dof / 2] + dof % 2
    }

    fn constraint_value(&self, c: &Constraint, lam: &LoadCase) -> f64 {
        if c.scaled {
            c.base * lam.lambda_mech
        } else {
            c.base
        }
    }

    /// Assemble the residual (internal minus external forces) and, on
    /// request, the consistent tangent.
    pub fn assemble(
        &mut self,
        u: &[f64],
        lam: &LoadCase,
        want_matrix: bool,
    ) -> Result<(Vec<f64>, Option<BandedMatrix>), SolveFailure> {
        self.ensure_layout();
        let ndof = self.ndof();
        if u.len() != ndof {
            return Err(SolveFailure::BadModel(String::from(
                "displacement vector length mismatch",
            )));
        }
        let mut res = vec![0.0; ndof];
        let mut mat = if want_matrix {
            let kl = self.layout.as_ref().expect("layout built").kl;
            Some(BandedMatrix::new(ndof, kl, kl))
        } else {
            None
        };

        for l in 0..self.mesh.layers.len() {
            let t = self.mesh.layers[l].ply.thickness;
            for e in 0..self.mesh.layers[l].elems.len() {
                if self.topology.is_cracked(l, e) {
                    continue;
                }
                let conn = self.mesh.layers[l].elems[e];
                let area = self.mesh.triangle_area(&conn);
                self.add_bulk(&mut res, mat.as_mut(), u, lam, l, &conn, &conn, area * t);
            }
        }
        for si in 0..self.topology.segments.len() {
            let (l, host, conn_a, conn_b, area_a, area_b) = {
                let seg = &self.topology.segments[si];
                (
                    seg.layer,
                    seg.host,
                    seg.conn_a,
                    seg.conn_b,
                    seg.area_a,
                    seg.area_b,
                )
            };
            let host_conn = self.mesh.layers[l].elems[host];
            let t = self.mesh.layers[l].ply.thickness;
            self.add_bulk(
                &mut res,
                mat.as_mut(),
                u,
                lam,
                l,
                &host_conn,
                &conn_a,
                area_a * t,
            );
            self.add_bulk(
                &mut res,
                mat.as_mut(),
                u,
                lam,
                l,
                &host_conn,
                &conn_b,
                area_b * t,
            );
            self.add_segment(&mut res, mat.as_mut(), u, lam, si)?;
        }
        for i in 0..self.mesh.interfaces.len() {
            self.add_interface(&mut res, mat.as_mut(), u, lam, i)?;
        }
        for &(dof, v) in &self.loads {
            res[dof] -= v * lam.lambda_mech;
        }
        Ok((res, mat))
    }

    /// Bulk contribution of a (sub-)element: `geom_conn` fixes the B-matrix
    /// geometry (host vertices), `dof_conn` the coupled nodes.
    #[allow(clippy::too_many_arguments)]
    fn add_bulk(
        &self,
        res: &mut [f64],
        mut mat: Option<&mut BandedMatrix>,
        u: &[f64],
        lam: &LoadCase,
        layer: usize,
        geom_conn: &[usize; 3],
        dof_conn: &[usize; 3],
        vol: f64,
    ) {
        let verts = [
            self.node_coords(geom_conn[0]),
            self.node_coords(geom_conn[1]),
            self.node_coords(geom_conn[2]),
        ];
        let (b, _) = cst_b_matrix(verts);
        let q = &self.q_bar[layer];
        let sigma = self.bulk_stress(u, lam, layer, dof_conn, &b);
        for i in 0..3 {
            for c in 0..2 {
                let row = 2 * i + c;
                let f = b[0][row] * sigma[0] + b[1][row] * sigma[1] + b[2][row] * sigma[2];
                res[2 * dof_conn[i] + c] += f * vol;
            }
        }
        if let Some(m) = mat.as_deref_mut() {
            for i in 0..6 {
                let gi = self.pdof(2 * dof_conn[i / 2] + i % 2);
                for j in 0..6 {
                    let mut k = 0.0;
                    for a in 0..3 {
                        for bb in 0..3 {
                            k += b[a][i] * q[a][bb] * b[bb][j];
                        }
                    }
                    let gj = self.pdof(2 * dof_conn[j / 2] + j % 2);
                    m.add(gi, gj, k * vol);
                }
            }
        }
    }

    /// Stress of a (sub-)element from nodal displacements.
    fn bulk_stress(
        &self,
        u: &[f64],
        lam: &LoadCase,
        layer: usize,
        conn: &[usize; 3],
        b: &[[f64; 6]; 3],
    ) -> [f64; 3] {
        let mut ue = [0.0; 6];
        for i in 0..3 {
            ue[2 * i] = u[2 * conn[i]];
            ue[2 * i + 1] = u[2 * conn[i] + 1];
        }
        let mut eps = [0.0; 3];
        for a in 0..3 {
            for j in 0..6 {
                eps[a] += b[a][j] * ue[j];
            }
        }
        let th = &self.eps_th_full[layer];
        for a in 0..3 {
            eps[a] -= th[a] * lam.lambda_th;
        }
        let q = &self.q_bar[layer];
        [
            q[0][0] * eps[0] + q[0][1] * eps[1] + q[0][2] * eps[2],
            q[1][0] * eps[0] + q[1][1] * eps[1] + q[1][2] * eps[2],
            q[2][0] * eps[0] + q[2][1] * eps[1] + q[2][2] * eps[2],
        ]
    }

    fn add_segment(
        &self,
        res: &mut [f64],
        mut mat: Option<&mut BandedMatrix>,
        u: &[f64],
        lam: &LoadCase,
        si: usize,
    ) -> Result<(), SolveFailure> {
        let seg = &self.topology.segments[si];
        let t_layer = self.mesh.layers[seg.layer].ply.thickness;
        let host_conn = self.mesh.layers[seg.layer].elems[seg.host];
        let verts = [
            self.mesh.nodes[host_conn[0]],
            self.mesh.nodes[host_conn[1]],
            self.mesh.nodes[host_conn[2]],
        ];
        let w = 0.5 * seg.length() * t_layer;
        let nrm = seg.normal;
        let tau = seg.tangent;
        for (q, xq) in [seg.p0, seg.p1].into_iter().enumerate() {
            let shp = shape_functions(verts, xq);
            let mut g = [0.0; 2];
            for i in 0..3 {
                for c in 0..2 {
                    g[c] += shp[i] * (u[2 * seg.conn_a[i] + c] - u[2 * seg.conn_b[i] + c]);
                }
            }
            let jump_loc = [
                nrm[0] * g[0] + nrm[1] * g[1],
                tau[0] * g[0] + tau[1] * g[1],
            ];
            let st = &seg.cohesive[q];
            let upd = fczm::evaluate(&self.cz_ply, st, &lam.cz, jump_loc)?;
            let t_glob = [
                upd.traction[0] * nrm[0] + upd.traction[1] * tau[0],
                upd.traction[0] * nrm[1] + upd.traction[1] * tau[1],
            ];
            for i in 0..3 {
                for c in 0..2 {
                    res[2 * seg.conn_a[i] + c] += shp[i] * w * t_glob[c];
                    res[2 * seg.conn_b[i] + c] -= shp[i] * w * t_glob[c];
                }
            }
            if let Some(m) = mat.as_deref_mut() {
                let j_loc = fczm::consistent_tangent(&self.cz_ply, st, &lam.cz, jump_loc)?;
                let r = [[nrm[0], nrm[1]], [tau[0], tau[1]]];
                let mut j_glob = [[0.0; 2]; 2];
                for a in 0..2 {
                    for bb in 0..2 {
                        let mut s = 0.0;
                        for p in 0..2 {
                            for qq in 0..2 {
                                s += r[p][a] * j_loc[p][qq] * r[qq][bb];
                            }
                        }
                        j_glob[a][bb] = s;
                    }
                }
                for i in 0..3 {
                    for jn in 0..3 {
                        for a in 0..2 {
                            for bb in 0..2 {
                                let k = shp[i] * shp[jn] * w * j_glob[a][bb];
                                let ai = self.pdof(2 * seg.conn_a[i] + a);
                                let bi = self.pdof(2 * seg.conn_b[i] + a);
                                let aj = self.pdof(2 * seg.conn_a[jn] + bb);
                                let bj = self.pdof(2 * seg.conn_b[jn] + bb);
                                m.add(ai, aj, k);
                                m.add(ai, bj, -k);
                                m.add(bi, aj, -k);
                                m.add(bi, bj, k);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn add_interface(
        &self,
        res: &mut [f64],
        mut mat: Option<&mut BandedMatrix>,
        u: &[f64],
        lam: &LoadCase,
        ii: usize,
    ) -> Result<(), SolveFailure> {
        let itf = self.mesh.interfaces[ii];
        let area = self.mesh.triangle_area(&itf.nodes_lo);
        let w = area / 3.0;
        for k in 0..3 {
            let (lo, up) = (itf.nodes_lo[k], itf.nodes_up[k]);
            if lo == up {
                continue; // tied pair at the region boundary
            }
            let d = [u[2 * up] - u[2 * lo], u[2 * up + 1] - u[2 * lo + 1]];
            let st = &self.iface[ii][k];
            let slip = hypot(d[0], d[1]);
            if slip == 0.0 {
                // traction-free; secant stiffness of the committed state
                if let Some(m) = mat.as_deref_mut() {
                    let env = fczm::mixed_envelope(1.0, &self.cz_interface)?;
                    let dstiff = fczm::stiffness_damage(st.damage, env.delta0, env.deltaf);
                    let kd = (1.0 - dstiff) * self.cz_interface.k_sh * w;
                    for c in 0..2 {
                        let (a, b) = (2 * up + c, 2 * lo + c);
                        m.add(self.pdof(a), self.pdof(a), kd);
                        m.add(self.pdof(b), self.pdof(b), kd);
                        m.add(self.pdof(a), self.pdof(b), -kd);
                        m.add(self.pdof(b), self.pdof(a), -kd);
                    }
                }
                continue;
            }
            // pure sliding: the shear law acts on |d|, the traction follows
            // the slip direction
            let dx = Dual2::seed(d[0], 0);
            let dy = Dual2::seed(d[1], 1);
            let us = (dx * dx + dy * dy).sqrt();
            let r = fczm::response_g::<Dual2>(
                &self.cz_interface,
                st,
                &lam.cz,
                [Dual2::c(0.0), us],
            )?;
            let t_vec = [r.t[1] * dx / us, r.t[1] * dy / us];
            for c in 0..2 {
                res[2 * up + c] += w * t_vec[c].v;
                res[2 * lo + c] -= w * t_vec[c].v;
            }
            if let Some(m) = mat.as_deref_mut() {
                for a in 0..2 {
                    for b in 0..2 {
                        let k = w * t_vec[a].d[b];
                        let ua = self.pdof(2 * up + a);
                        let la = self.pdof(2 * lo + a);
                        let ub = self.pdof(2 * up + b);
                        let lb = self.pdof(2 * lo + b);
                        m.add(ua, ub, k);
                        m.add(ua, lb, -k);
                        m.add(la, ub, -k);
                        m.add(la, lb, k);
                    }
                }
            }
        }
        Ok(())
    }

    /// Newton-Raphson solve at a fixed load case, starting from `u0`.
    /// Returns the converged displacements and the number of linear solves.
    /// Committed state is never touched.
    pub fn newton_solve(
        &mut self,
        u0: &[f64],
        lam: &LoadCase,
        cfg: &SolverConfig,
    ) -> Result<(Vec<f64>, usize), SolveFailure> {
        self.ensure_layout();
        let ndof = self.ndof();
        let mut u = u0.to_vec();
        if u.len() != ndof {
            return Err(SolveFailure::BadModel(String::from(
                "start vector length mismatch",
            )));
        }
        for c in &self.constraints {
            u[c.dof] = self.constraint_value(c, lam);
        }
        let mut fext_free = vec![0.0; ndof];
        for &(dof, v) in &self.loads {
            fext_free[dof] += v * lam.lambda_mech;
        }
        for c in &self.constraints {
            fext_free[c.dof] = 0.0;
        }
        let mut reference = norm2(&fext_free).max(1e-14);
        let mut solves = 0usize;
        loop {
            let (mut res, mat) = self.assemble(&u, lam, true)?;
            for c in &self.constraints {
                res[c.dof] = 0.0;
            }
            let rnorm = norm2(&res);
            if solves == 0 {
                reference = reference.max(rnorm);
            }
            if rnorm <= cfg.tol_rel * reference {
                return Ok((u, solves.max(1)));
            }
            if solves >= cfg.n_iter_max {
                return Err(SolveFailure::Diverged { iterations: solves });
            }
            let mut mat = mat.expect("matrix requested");
            for c in &self.constraints {
                mat.enforce_unit_row_col(self.pdof(c.dof));
            }
            let mut rhs = vec![0.0; ndof];
            for dof in 0..ndof {
                rhs[self.pdof(dof)] = -res[dof];
            }
            for c in &self.constraints {
                rhs[self.pdof(c.dof)] = 0.0;
            }
            let piv = mat.factorize().map_err(|_| SolveFailure::Singular)?;
            mat.solve_factored(&piv, &mut rhs);
            if rhs.iter().any(|x| !x.is_finite()) {
                return Err(SolveFailure::Singular);
            }
            for dof in 0..ndof {
                u[dof] += rhs[self.pdof(dof)];
            }
            solves += 1;
        }
    }

    /// Commit a converged solution: stresses into bulk states, cohesive
    /// trials into the cohesive histories, displacements into the model.
    pub fn commit(&mut self, u: &[f64], lam: &LoadCase) -> Result<(), SolveFailure> {
        for l in 0..self.mesh.layers.len() {
            for e in 0..self.mesh.layers[l].elems.len() {
                if self.topology.is_cracked(l, e) {
                    continue;
                }
                let conn = self.mesh.layers[l].elems[e];
                let verts = [
                    self.mesh.nodes[conn[0]],
                    self.mesh.nodes[conn[1]],
                    self.mesh.nodes[conn[2]],
                ];
                let (b, _) = cst_b_matrix(verts);
                self.bulk[l][e].sigma = self.bulk_stress(u, lam, l, &conn, &b);
            }
        }
        for si in 0..self.topology.segments.len() {
            let (l, host, conn_a, conn_b) = {
                let s = &self.topology.segments[si];
                (s.layer, s.host, s.conn_a, s.conn_b)
            };
            let conn = self.mesh.layers[l].elems[host];
            let verts = [
                self.mesh.nodes[conn[0]],
                self.mesh.nodes[conn[1]],
                self.mesh.nodes[conn[2]],
            ];
            let (b, _) = cst_b_matrix(verts);
            let sig_a = self.bulk_stress(u, lam, l, &conn_a, &b);
            let sig_b = self.bulk_stress(u, lam, l, &conn_b, &b);
            let seg = &mut self.topology.segments[si];
            seg.bulk_a.sigma = sig_a;
            seg.bulk_b.sigma = sig_b;
        }
        for si in 0..self.topology.segments.len() {
            for q in 0..2 {
                let (jump_loc, st) = self.segment_jump(u, si, q);
                let upd = fczm::evaluate(&self.cz_ply, &st, &lam.cz, jump_loc)?;
                self.topology.segments[si].cohesive[q].commit(&upd, &self.cz_ply);
            }
        }
        for ii in 0..self.mesh.interfaces.len() {
            let itf = self.mesh.interfaces[ii];
            for k in 0..3 {
                let (lo, up) = (itf.nodes_lo[k], itf.nodes_up[k]);
                if lo == up {
                    continue;
                }
                let d = [u[2 * up] - u[2 * lo], u[2 * up + 1] - u[2 * lo + 1]];
                let slip = hypot(d[0], d[1]);
                let st = self.iface[ii][k];
                let upd = fczm::evaluate(&self.cz_interface, &st, &lam.cz, [0.0, slip])?;
                self.iface[ii][k].commit(&upd, &self.cz_interface);
            }
        }
        self.u = u.to_vec();
        Ok(())
    }

    /// Local jump of a segment cohesive point and a copy of its state.
    fn segment_jump(&self, u: &[f64], si: usize, q: usize) -> ([f64; 2], CohesiveState) {
        let seg = &self.topology.segments[si];
        let conn = self.mesh.layers[seg.layer].elems[seg.host];
        let verts = [
            self.mesh.nodes[conn[0]],
            self.mesh.nodes[conn[1]],
            self.mesh.nodes[conn[2]],
        ];
        let xq = if q == 0 { seg.p0 } else { seg.p1 };
        let shp = shape_functions(verts, xq);
        let mut g = [0.0; 2];
        for i in 0..3 {
            for c in 0..2 {
                g[c] += shp[i] * (u[2 * seg.conn_a[i] + c] - u[2 * seg.conn_b[i] + c]);
            }
        }
        (
            [
                seg.normal[0] * g[0] + seg.normal[1] * g[1],
                seg.tangent[0] * g[0] + seg.tangent[1] * g[1],
            ],
            seg.cohesive[q],
        )
    }

    /// Record severity extrema at a control-cycle extreme solve.
    pub fn record_severities(
        &mut self,
        u: &[f64],
        lam: &LoadCase,
        at_minimum: bool,
    ) -> Result<(), SolveFailure> {
        let phase = Phase::ControlCycle;
        for l in 0..self.mesh.layers.len() {
            let theta = self.mesh.layers[l].ply.theta;
            for e in 0..self.mesh.layers[l].elems.len() {
                if self.topology.is_cracked(l, e) {
                    continue;
                }
                let conn = self.mesh.layers[l].elems[e];
                let verts = [
                    self.mesh.nodes[conn[0]],
                    self.mesh.nodes[conn[1]],
                    self.mesh.nodes[conn[2]],
                ];
                let (b, _) = cst_b_matrix(verts);
                let sigma = self.bulk_stress(u, lam, l, &conn, &b);
                self.bulk[l][e]
                    .record_severity(phase, at_minimum, sigma, theta, &self.cz_ply)
                    .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?;
            }
        }
        for si in 0..self.topology.segments.len() {
            let (l, host, conn_a, conn_b, theta) = {
                let s = &self.topology.segments[si];
                (
                    s.layer,
                    s.host,
                    s.conn_a,
                    s.conn_b,
                    self.mesh.layers[s.layer].ply.theta,
                )
            };
            let conn = self.mesh.layers[l].elems[host];
            let verts = [
                self.mesh.nodes[conn[0]],
                self.mesh.nodes[conn[1]],
                self.mesh.nodes[conn[2]],
            ];
            let (b, _) = cst_b_matrix(verts);
            let sig_a = self.bulk_stress(u, lam, l, &conn_a, &b);
            let sig_b = self.bulk_stress(u, lam, l, &conn_b, &b);
            let seg = &mut self.topology.segments[si];
            seg.bulk_a
                .record_severity(phase, at_minimum, sig_a, theta, &self.cz_ply)
                .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?;
            seg.bulk_b
                .record_severity(phase, at_minimum, sig_b, theta, &self.cz_ply)
                .map_err(|e| SolveFailure::BadModel(alloc::format!("{e}")))?;
        }
        let frozen = LoadCase {
            cz: StepContext::STATIC,
            ..*lam
        };
        for si in 0..self.topology.segments.len() {
            for q in 0..2 {
                let (jump_loc, st) = self.segment_jump(u, si, q);
                let upd = fczm::evaluate(&self.cz_ply, &st, &frozen.cz, jump_loc)?;
                let s = [
                    upd.traction[0] / self.cz_ply.f_n,
                    upd.traction[1] / self.cz_ply.f_sh,
                ];
                let cst = &mut self.topology.segments[si].cohesive[q];
                if at_minimum {
                    cst.record_severity_min(s);
                } else {
                    cst.record_severity_max(s);
                }
            }
        }
        for ii in 0..self.mesh.interfaces.len() {
            let itf = self.mesh.interfaces[ii];
            for k in 0..3 {
                let (lo, up) = (itf.nodes_lo[k], itf.nodes_up[k]);
                let s = if lo == up {
                    [0.0, 0.0]
                } else {
                    let d = [u[2 * up] - u[2 * lo], u[2 * up + 1] - u[2 * lo + 1]];
                    let slip = hypot(d[0], d[1]);
                    if slip > 0.0 {
                        let st = self.iface[ii][k];
                        let upd =
                            fczm::evaluate(&self.cz_interface, &st, &frozen.cz, [0.0, slip])?;
                        [
                            upd.traction[1] * d[0] / slip / self.cz_interface.f_sh,
                            upd.traction[1] * d[1] / slip / self.cz_interface.f_sh,
                        ]
                    } else {
                        [0.0, 0.0]
                    }
                };
                let cst = &mut self.iface[ii][k];
                if at_minimum {
                    cst.record_severity_min(s);
                } else {
                    cst.record_severity_max(s);
                }
            }
        }
        Ok(())
    }

    /// Close the control cycle: local ratios from the recorded extrema.
    pub fn finalize_ratios(&mut self, r_global: f64) {
        for states in self.bulk.iter_mut() {
            for s in states.iter_mut() {
                s.finalize_ratio(r_global);
            }
        }
        for seg in self.topology.segments.iter_mut() {
            seg.bulk_a.finalize_ratio(r_global);
            seg.bulk_b.finalize_ratio(r_global);
            for c in seg.cohesive.iter_mut() {
                c.finalize_ratio(r_global);
            }
        }
        for states in self.iface.iter_mut() {
            for s in states.iter_mut() {
                s.finalize_ratio(r_global);
            }
        }
    }

    /// One crack-insertion sweep over the uncracked fine-region elements at
    /// the current trial solution. Extends `u` with phantom degrees of
    /// freedom initialized for a zero jump. Returns the inserted
    /// `(layer, element)` pairs and the rejected candidates.
    pub fn insertion_sweep(
        &mut self,
        u: &mut Vec<f64>,
        lam: &LoadCase,
        criterion: InsertionCriterion,
    ) -> Result<(Vec<(usize, usize)>, Vec<RejectedCandidate>), SolveFailure> {
        let mut inserted = Vec::new();
        let mut rejected = Vec::new();
        for l in 0..self.mesh.layers.len() {
            let theta = self.mesh.layers[l].ply.theta;
            for e in 0..self.mesh.layers[l].elems.len() {
                if !self.mesh.layers[l].fine[e] || self.topology.is_cracked(l, e) {
                    continue;
                }
                let conn = self.mesh.layers[l].elems[e];
                let verts = [
                    self.mesh.nodes[conn[0]],
                    self.mesh.nodes[conn[1]],
                    self.mesh.nodes[conn[2]],
                ];
                let (b, _) = cst_b_matrix(verts);
                let sigma = self.bulk_stress(u, lam, l, &conn, &b);
                let index = match criterion {
                    InsertionCriterion::StaticStrength => {
                        ply::strength_index(sigma, theta, &self.cz_ply)?
                    }
                    InsertionCriterion::FatigueEndurance => {
                        ply::failure_index(sigma, theta, self.bulk[l][e].r_local, &self.cz_ply)?
                    }
                };
                if index < 1.0 {
                    continue;
                }
                let decision = self.topology.decide(&self.mesh, l, e, self.lc);
                if let InsertionDecision::Reject(reason) = decision {
                    rejected.push(RejectedCandidate {
                        layer: l,
                        elem: e,
                        reason,
                    });
                    continue;
                }
                let mut parent = self.bulk[l][e];
                parent.sigma = sigma;
                let n_real = self.mesh.nodes.len();
                let phantom_coords = &mut self.phantom_coords;
                let mesh_nodes = &self.mesh.nodes;
                let mut alloc_phantoms = |conn: &[usize; 3]| {
                    let mut ids = [0usize; 3];
                    for (k, &nd) in conn.iter().enumerate() {
                        ids[k] = n_real + phantom_coords.len();
                        phantom_coords.push(mesh_nodes[nd]);
                        // phantom dofs start as copies: zero jump at insertion
                        u.push(u[2 * nd]);
                        u.push(u[2 * nd + 1]);
                    }
                    ids
                };
                match self
                    .topology
                    .insert(&self.mesh, l, e, &decision, &parent, &mut alloc_phantoms)
                {
                    Ok(_) => inserted.push((l, e)),
                    Err(_) => rejected.push(RejectedCandidate {
                        layer: l,
                        elem: e,
                        reason: Rejection::Geometry,
                    }),
                }
            }
        }
        if !inserted.is_empty() {
            self.invalidate_layout();
        }
        Ok((inserted, rejected))
    }

    /// Snapshot of the mutable-topology part of the model, for step
    /// rollback.
    pub fn topology_snapshot(&self) -> (CrackTopology, usize) {
        (self.topology.clone(), self.phantom_coords.len())
    }

    pub fn restore_topology(&mut self, snap: (CrackTopology, usize)) {
        self.topology = snap.0;
        self.phantom_coords.truncate(snap.1);
        self.invalidate_layout();
    }

    /// FNV-1a checksum over the committed state, for restart-purity audits.
    pub fn state_checksum(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for &x in &self.u {
            eat(x);
        }
        for states in &self.bulk {
            for s in states {
                for v in s.sigma {
                    eat(v);
                }
                eat(s.r_local);
                for v in s.s_min {
                    eat(v);
                }
                for v in s.s_max {
                    eat(v);
                }
            }
        }
        for states in &self.iface {
            for s in states {
                eat(s.damage);
                eat(s.r_local);
                eat(s.rate_prev);
                eat(s.dissipated);
            }
        }
        for seg in &self.topology.segments {
            eat(seg.p0[0]);
            eat(seg.p0[1]);
            for c in &seg.cohesive {
                eat(c.damage);
                eat(c.r_local);
                eat(c.rate_prev);
            }
        }
        h ^ (self.topology.segments.len() as u64).wrapping_mul(0x9e3779b97f4a7c15)
    }

    /// Total dissipated cohesive energy (tributary weights applied).
    pub fn total_dissipated(&self) -> f64 {
        let mut total = 0.0;
        for (ii, itf) in self.mesh.interfaces.iter().enumerate() {
            let w = self.mesh.triangle_area(&itf.nodes_lo) / 3.0;
            for st in &self.iface[ii] {
                total += w * st.dissipated;
            }
        }
        for seg in &self.topology.segments {
            let w = 0.5 * seg.length() * self.mesh.layers[seg.layer].ply.thickness;
            for st in &seg.cohesive {
                total += w * st.dissipated;
            }
        }
        total
    }
}

/// B-matrix of a constant-strain triangle (strain = B u, engineering shear)
/// and the element area.
pub fn cst_b_matrix(v: [[f64; 2]; 3]) -> ([[f64; 6]; 3], f64) {
    let (x1, y1) = (v[0][0], v[0][1]);
    let (x2, y2) = (v[1][0], v[1][1]);
    let (x3, y3) = (v[2][0], v[2][1]);
    let area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
    let inv = 1.0 / area2;
    let b = [
        [
            (y2 - y3) * inv,
            0.0,
            (y3 - y1) * inv,
            0.0,
            (y1 - y2) * inv,
            0.0,
        ],
        [
            0.0,
            (x3 - x2) * inv,
            0.0,
            (x1 - x3) * inv,
            0.0,
            (x2 - x1) * inv,
        ],
        [
            (x3 - x2) * inv,
            (y2 - y3) * inv,
            (x1 - x3) * inv,
            (y3 - y1) * inv,
            (x2 - x1) * inv,
            (y1 - y2) * inv,
        ],
    ];
    (b, 0.5 * area2)
}
