//! Scratch runner for tuning the desk-scale cross-ply fatigue scenario.

use lamfat_core::driver::{FatigueDriver, ScheduleConfig};
use lamfat_core::fczm::{CohesiveParams, PExponent};
use lamfat_core::fem::{FemModel, SolverConfig};
use lamfat_core::mesh::{generate_strip, StripSpec};
use lamfat_core::ply::PlyParams;

fn ply(theta_deg: f64, t: f64) -> PlyParams {
    PlyParams::new(161.0e3, 11.38e3, 5.17e3, 0.32, 0.0, 3.0e-5, theta_deg.to_radians(), t).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sev: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let global_r: bool = args.get(2).map(|s| s == "global").unwrap_or(false);
    let dn_cap: Option<f64> = args.get(3).and_then(|s| s.parse().ok());

    let t90 = 0.75;
    let t0 = 0.125;
    let spec = StripSpec {
        length: 10.0,
        width: 1.0,
        nx: 80,
        ny: 4,
        layup: vec![ply(0.0, t0), ply(90.0, t90)],
        delam_x: Some((0.5, 9.5)),
    };
    let mesh = generate_strip(&spec).unwrap();
    let kd = lamfat_core::fem::interface_dummy_stiffness(5.17e3, 0.125);
    let cz_ply = CohesiveParams::new(
        kd, 95.0, 107.0, 1.0, 1.0, 2.1, 0.95, 0.2, PExponent::Beta, 1.0e7,
    )
    .unwrap();
    let cz_if = CohesiveParams::new(
        kd, 45.0, 45.0, 1.0, 1.0, 2.1, 0.95, 0.2, PExponent::Beta, 1.0e7,
    )
    .unwrap();
    let dt_drop = -160.0;
    let mut model = FemModel::new(mesh, cz_ply, cz_if, 0.75, dt_drop, 0.1).unwrap();
    model.clamp_node_set("left", 0).unwrap();
    model.add_constraint(1, 0.0, false);

    // reference: nominal stress at which the 90 block reaches f_n statically
    let oracle = {
        // quick CLT: sigma_xx in the 90 layer after cooling
        let q0 = lamfat_core::ply::ply_stiffness(&ply(0.0, t0)).unwrap();
        let q90 = lamfat_core::ply::ply_stiffness(&ply(90.0, t90)).unwrap();
        (q0, q90)
    };
    let (q0, q90) = oracle;
    // residual from hand CLT (x only, rough): solve 2x2 for ebar_x,y
    // full solve via the library is fine for exploration
    let sig_res_90 = {
        let mut probe =
            FemModel::new(generate_strip(&spec).unwrap(), cz_ply, cz_if, 0.75, dt_drop, 0.1)
                .unwrap();
        probe.add_constraint(0, 0.0, false);
        probe.add_constraint(1, 0.0, false);
        probe.add_constraint(2 * 80 + 1, 0.0, false);
        let mut d =
            FatigueDriver::new(probe, SolverConfig::default(), ScheduleConfig::default()).unwrap();
        d.run_phase_thermal().unwrap();
        d.model.bulk[1][320].sigma[0]
    };
    println!("# residual sigma_xx(90) = {sig_res_90:.2} MPa");
    let a11 = q0[0][0] * t0 + q90[0][0] * t90;
    let eps_crack = (95.0 - sig_res_90) / q90[0][0];
    let sigma_ref = a11 * eps_crack / (t0 + t90);
    println!("# nominal static reference = {sigma_ref:.2} MPa");

    let total_force = sev * sigma_ref * (t0 + t90) * 1.0;
    model.load_edge("right", 0, total_force).unwrap();

    let sched = ScheduleConfig {
        r_global: 0.1,
        jumps_per_block: 3,
        n_max: 1e7,
        stop_fraction: 0.85,
        global_r_mode: global_r,
        dn_init: 1.0,
        dn_max: dn_cap,
        dn_rel_max: 0.05,
        dn_min: 1e-6,
        dt_init: 0.5,
        dt_min: 1e-6,
        load_set: "right".into(),
        load_comp: 0,
    };
    let mut driver = FatigueDriver::new(model, SolverConfig::default(), sched).unwrap();
    let t0c = std::time::Instant::now();
    match driver.run() {
        Ok(sn) => {
            println!(
                "# sev={sev} global_r={global_r} N_fail={:.4e} censored={} steps={} segments={} time={:?}",
                sn.n_fail,
                sn.censored,
                driver.record.rows.len(),
                driver.model.topology.segments.len(),
                t0c.elapsed()
            );
            for (n, e) in &driver.record.stiffness_curve {
                println!("{n:.6e} {e:.6}");
            }
        }
        Err(e) => {
            println!("# run failed: {e}");
            for (n, eff) in &driver.record.stiffness_curve {
                println!("{n:.6e} {eff:.6}");
            }
        }
    }
}
