//! Phantom-node kinematics and crack-bookkeeping checks on real meshes.

mod common;

use lamfat_core::fem::{FemModel, InsertionCriterion, LoadCase, SolverConfig};
use lamfat_core::mesh::{generate_strip, StripSpec};
use lamfat_core::ply::BulkPointState;
use lamfat_core::xfem::{cut_triangle, shape_functions, InsertionDecision};

fn single_triangle_mesh(theta_deg: f64) -> lamfat_core::mesh::Mesh {
    lamfat_core::mesh::Mesh {
        nodes: vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]],
        layers: vec![lamfat_core::mesh::Layer {
            ply: common::ply(theta_deg, common::T_PLY),
            elems: vec![[0, 1, 2]],
            fine: vec![true],
        }],
        interfaces: vec![],
        node_sets: std::collections::BTreeMap::new(),
    }
}

/// Crack one element by hand through the topology API, reusing the model's
/// phantom allocation through an over-stressed insertion sweep.
fn cracked_single_element(theta_deg: f64) -> (FemModel, Vec<f64>) {
    let mesh = single_triangle_mesh(theta_deg);
    let mut model =
        FemModel::new(mesh, common::cz_ply(), common::cz_interface(), 0.75, 0.0, 0.1).unwrap();
    // affine field with transverse tension far beyond the strength
    let q = lamfat_core::ply::ply_stiffness(&common::ply(theta_deg, common::T_PLY)).unwrap();
    let eps_t = 2.0 * common::F_N / q[1][1].min(q[0][0]);
    let grad = match theta_deg as i64 {
        0 => [[0.0, 0.0], [0.0, eps_t]],  // sigma_yy tension, crack along x
        90 => [[eps_t, 0.0], [0.0, 0.0]], // sigma_xx tension, crack along y
        _ => [[eps_t, 0.0], [0.0, eps_t]],
    };
    let mut u = vec![0.0; model.ndof()];
    for n in 0..3 {
        let x = model.node_coords(n);
        u[2 * n] = grad[0][0] * x[0] + grad[0][1] * x[1];
        u[2 * n + 1] = grad[1][0] * x[0] + grad[1][1] * x[1];
    }
    let lam = LoadCase::static_at(1.0, 0.0);
    let (inserted, _) = model
        .insertion_sweep(&mut u, &lam, InsertionCriterion::StaticStrength)
        .unwrap();
    assert_eq!(inserted, vec![(0, 0)]);
    (model, u)
}

#[test]
fn insertion_starts_with_zero_jump() {
    let (model, u) = cracked_single_element(90.0);
    let seg = &model.topology.segments[0];
    // phantom dofs replicate their originals: the jump vanishes at both
    // cohesive points and the field is continuous
    for q in [seg.p0, seg.p1] {
        let verts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let shp = shape_functions(verts, q);
        let mut jump = [0.0; 2];
        for i in 0..3 {
            for c in 0..2 {
                jump[c] += shp[i] * (u[2 * seg.conn_a[i] + c] - u[2 * seg.conn_b[i] + c]);
            }
        }
        assert!(jump[0].abs() < 1e-15 && jump[1].abs() < 1e-15);
    }
}

#[test]
fn rigid_separation_reproduces_the_jump_exactly() {
    let (model, u) = cracked_single_element(90.0);
    let seg = &model.topology.segments[0];
    let delta = [3.7e-4, -1.2e-4];
    let mut u2 = u.clone();
    // translate sub-element A rigidly: original nodes on side A plus the
    // phantoms that complete conn_a
    for i in 0..3 {
        for c in 0..2 {
            u2[2 * seg.conn_a[i] + c] += delta[c];
        }
    }
    let verts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
    for q in [seg.p0, seg.p1] {
        let shp = shape_functions(verts, q);
        let mut jump = [0.0; 2];
        for i in 0..3 {
            for c in 0..2 {
                jump[c] += shp[i] * (u2[2 * seg.conn_a[i] + c] - u2[2 * seg.conn_b[i] + c]);
            }
        }
        assert!((jump[0] - delta[0]).abs() < 1e-14);
        assert!((jump[1] - delta[1]).abs() < 1e-14);
    }
}

#[test]
fn area_partition_is_exact() {
    let (model, _) = cracked_single_element(90.0);
    let seg = &model.topology.segments[0];
    let host = 2.0;
    assert!((seg.area_a + seg.area_b - host).abs() < 1e-12 * host);
    // segment runs along the fibers (vertical for the 90 degree ply)
    assert!((seg.tangent[0]).abs() < 1e-14 && (seg.tangent[1] - 1.0).abs() < 1e-14);
}

#[test]
fn history_transfer_copies_the_parent_ratio() {
    let mesh = single_triangle_mesh(90.0);
    let mut model =
        FemModel::new(mesh, common::cz_ply(), common::cz_interface(), 0.75, 0.0, 0.1).unwrap();
    model.bulk[0][0] = BulkPointState::new(0.37);
    let q = lamfat_core::ply::ply_stiffness(&common::ply(90.0, common::T_PLY)).unwrap();
    let eps_t = 2.0 * common::F_N / q[1][1].min(q[0][0]);
    let mut u = vec![0.0; model.ndof()];
    for n in 0..3 {
        let x = model.node_coords(n);
        u[2 * n] = eps_t * x[0];
    }
    let lam = LoadCase::static_at(1.0, 0.0);
    model
        .insertion_sweep(&mut u, &lam, InsertionCriterion::StaticStrength)
        .unwrap();
    let seg = &model.topology.segments[0];
    for c in &seg.cohesive {
        assert_eq!(c.r_local, 0.37);
        assert_eq!(c.damage, 0.0);
    }
}

#[test]
fn unloaded_parent_passes_the_fallback_ratio() {
    let mesh = single_triangle_mesh(90.0);
    let mut model =
        FemModel::new(mesh, common::cz_ply(), common::cz_interface(), 0.75, 0.0, 0.1).unwrap();
    let mut parent = BulkPointState::new(0.0);
    parent.finalize_ratio(0.1); // zero extrema: unloaded, global fallback
    assert!(parent.unloaded);
    model.bulk[0][0] = parent;
    let q = lamfat_core::ply::ply_stiffness(&common::ply(90.0, common::T_PLY)).unwrap();
    let eps_t = 2.0 * common::F_N / q[1][1].min(q[0][0]);
    let mut u = vec![0.0; model.ndof()];
    for n in 0..3 {
        let x = model.node_coords(n);
        u[2 * n] = eps_t * x[0];
    }
    let lam = LoadCase::static_at(1.0, 0.0);
    model
        .insertion_sweep(&mut u, &lam, InsertionCriterion::StaticStrength)
        .unwrap();
    let seg = &model.topology.segments[0];
    for c in &seg.cohesive {
        assert_eq!(c.r_local, 0.1);
        assert!(c.unloaded);
    }
}

#[test]
fn fully_damaged_segment_separates_without_residual() {
    // two half-strips joined only by a dead crack: pulling the free side
    // must leave zero traction across the segment
    let (mut model, u_cracked) = cracked_single_element(90.0);
    for seg in model.topology.segments.iter_mut() {
        for c in seg.cohesive.iter_mut() {
            c.damage = 1.0;
        }
    }
    let seg_conn_a = model.topology.segments[0].conn_a;
    let seg_conn_b = model.topology.segments[0].conn_b;
    let normal = model.topology.segments[0].normal;
    // clamp side B, displace side A along the opening direction
    for i in 0..3 {
        for c in 0..2 {
            model.add_constraint(2 * seg_conn_b[i] + c, 0.0, false);
        }
    }
    let pull = 0.05;
    for i in 0..3 {
        model.add_constraint(2 * seg_conn_a[i], pull * normal[0], false);
        model.add_constraint(2 * seg_conn_a[i] + 1, pull * normal[1], false);
    }
    let lam = LoadCase::static_at(1.0, 0.0);
    let cfg = SolverConfig::default();
    let u0 = vec![0.0; u_cracked.len()];
    let (u, _) = model.newton_solve(&u0, &lam, &cfg).unwrap();
    let (res, _) = model.assemble(&u, &lam, false).unwrap();
    // reactions on the pulled side vanish: the halves are disconnected
    for i in 0..3 {
        for c in 0..2 {
            assert!(
                res[2 * seg_conn_a[i] + c].abs() < 1e-9,
                "residual force {}",
                res[2 * seg_conn_a[i] + c]
            );
        }
    }
}

#[test]
fn spacing_rule_rejects_near_parallel_cracks() {
    // strip with vertical fibers: after one crack, a neighbor element
    // closer than l_c may not start a fresh path
    let spec = StripSpec {
        length: 4.0,
        width: 1.0,
        nx: 8,
        ny: 2,
        layup: vec![common::ply(90.0, common::T_PLY)],
        delam_x: Some((0.0, 4.0)),
    };
    let mesh = generate_strip(&spec).unwrap();
    let mut model =
        FemModel::new(mesh, common::cz_ply(), common::cz_interface(), 0.75, 0.0, 0.1).unwrap();
    // crack element 8 (second column, first row, first triangle)
    let centroid = model.mesh.centroid(&model.mesh.layers[0].elems[2]);
    let decision = model.topology.decide(&model.mesh, 0, 2, model.lc);
    assert!(matches!(decision, InsertionDecision::NewPath { .. }));
    let parent = model.bulk[0][2];
    let mesh_snapshot = model.mesh.clone();
    let mut next = model.mesh.nodes.len();
    let mut alloc = |conn: &[usize; 3]| {
        let ids = [next, next + 1, next + 2];
        let _ = conn;
        next += 3;
        ids
    };
    model
        .topology
        .insert(&mesh_snapshot, 0, 2, &decision, &parent, &mut alloc)
        .unwrap();
    // neighbor columns are 0.5 mm away: inside l_c = 0.75
    let d = model
        .topology
        .min_path_distance(0, model.mesh.centroid(&model.mesh.layers[0].elems[4]))
        .unwrap();
    assert!(d < model.lc);
    match model.topology.decide(&model.mesh, 0, 4, model.lc) {
        InsertionDecision::Reject(_) => {}
        other => panic!("expected a spacing rejection, got {other:?}"),
    }
    // the crack line crosses both triangles of the quad: the companion
    // triangle shares the hypotenuse and continues the path first
    match model.topology.decide(&model.mesh, 0, 3, model.lc) {
        InsertionDecision::Propagate { path } => assert_eq!(path, 0),
        other => panic!("expected propagation into the companion, got {other:?}"),
    }
    let parent3 = model.bulk[0][3];
    let decision3 = model.topology.decide(&model.mesh, 0, 3, model.lc);
    model
        .topology
        .insert(&mesh_snapshot, 0, 3, &decision3, &parent3, &mut alloc)
        .unwrap();
    // now the collinear element in the next row is tip-adjacent
    match model.topology.decide(&model.mesh, 0, 2 + 16, model.lc) {
        InsertionDecision::Propagate { path } => assert_eq!(path, 0),
        other => panic!("expected propagation, got {other:?}"),
    }
    // a far column clears l_c and may start a fresh path
    match model.topology.decide(&model.mesh, 0, 14, model.lc) {
        InsertionDecision::NewPath { .. } => {}
        other => panic!("expected a fresh path, got {other:?}"),
    }
    let _ = centroid;
}

#[test]
fn cut_geometry_against_brute_force_sampling() {
    // Monte Carlo area check of the cut partition on a skewed triangle
    let verts = [[0.3, 0.1], [2.2, 0.4], [0.9, 1.9]];
    let anchor = [1.1, 0.6];
    let dir = [0.6, 0.8];
    let cut = cut_triangle(verts, anchor, dir).unwrap();
    let total =
        0.5 * ((verts[1][0] - verts[0][0]) * (verts[2][1] - verts[0][1])
            - (verts[2][0] - verts[0][0]) * (verts[1][1] - verts[0][1]))
            .abs();
    assert!((cut.area_a + cut.area_b - total).abs() < 1e-12 * total);
    // deterministic grid sample of the positive side
    let n = [-dir[1], dir[0]];
    let inside = |p: [f64; 2]| {
        let mut s = [0.0; 3];
        for k in 0..3 {
            let a = verts[k];
            let b = verts[(k + 1) % 3];
            s[k] = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        }
        s.iter().all(|v| *v >= 0.0) || s.iter().all(|v| *v <= 0.0)
    };
    let grid = 700usize;
    let mut hits_pos = 0usize;
    let mut hits_tot = 0usize;
    for i in 0..grid {
        for j in 0..grid {
            let p = [
                0.3 + 1.9 * (i as f64 + 0.5) / grid as f64,
                0.1 + 1.8 * (j as f64 + 0.5) / grid as f64,
            ];
            if inside(p) {
                hits_tot += 1;
                if n[0] * (p[0] - anchor[0]) + n[1] * (p[1] - anchor[1]) > 0.0 {
                    hits_pos += 1;
                }
            }
        }
    }
    let frac = hits_pos as f64 / hits_tot as f64;
    assert!(
        (frac - cut.area_a / total).abs() < 5e-3,
        "sampled {frac} vs {}",
        cut.area_a / total
    );
}
