//! Scratch comparison of the point driver against the closed-form life on
//! the acceptance severity grid.

use lamfat_core::driver::{run_point_fatigue, PointFatigueConfig};
use lamfat_core::fczm::{self, CohesiveParams, PExponent};

fn main() {
    let p = CohesiveParams::new(
        82720.0, 95.0, 107.0, 1.0, 1.0, 2.1, 0.95, 0.2, PExponent::Beta, 1.0e7,
    )
    .unwrap();
    let t0 = std::time::Instant::now();
    let mut worst = 0.0f64;
    for &r in &[0.1, 0.5] {
        for &b in &[0.0, 0.5, 1.0] {
            let cle = (1.0 - 0.42 * b) * p.eps_end;
            let e_rel = 2.0 * cle / (cle + 1.0 + r * (cle - 1.0));
            let beta = -7.0 * p.eta_brittle / e_rel.log10();
            for &s in &[0.5, 0.6, 0.7, 0.8, 0.9] {
                let cfg = PointFatigueConfig::new(p, s, r, b);
                let res = run_point_fatigue(&cfg).unwrap();
                let exact = p.gamma * (e_rel / s).powf(beta) * (1.0 - s.powf(beta + 1.0));
                let rel = (res.n_fail - exact).abs() / exact;
                worst = worst.max(rel);
                println!(
                    "R={r} B={b} s={s}: impl={:.6e} exact={:.6e} rel={:.3e} steps={}",
                    res.n_fail, exact, rel, res.steps
                );
                let _ = fczm::mode_mixity([1.0, 0.0], &p);
            }
        }
    }
    println!("worst relative error: {worst:.3e}  ({:?})", t0.elapsed());
}
