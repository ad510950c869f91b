//! Shared fixtures and independent oracles for the integration tests.
//!
//! Everything here re-derives its results from raw material constants and
//! textbook formulas, deliberately bypassing the library's evaluation paths
//! wherever it serves as an oracle.

#![allow(dead_code)]

use lamfat_core::fczm::{CohesiveParams, PExponent};
use lamfat_core::ply::PlyParams;

pub const E1: f64 = 161.0e3;
pub const E2: f64 = 11.38e3;
pub const G12: f64 = 5.17e3;
pub const NU12: f64 = 0.32;
pub const ALPHA1: f64 = 0.0;
pub const ALPHA2: f64 = 3.0e-5;
pub const T_PLY: f64 = 0.125;
pub const F_N: f64 = 95.0;
pub const F_SH: f64 = 107.0;
pub const G_IC: f64 = 1.0;
pub const G_IIC: f64 = 1.0;
pub const ETA_BK: f64 = 2.1;
pub const ETA_BRITTLE: f64 = 0.95;
pub const EPS_END: f64 = 0.2;
pub const GAMMA: f64 = 1.0e7;
pub const F_INTERFACE: f64 = 45.0;

pub fn ply(theta_deg: f64, thickness: f64) -> PlyParams {
    PlyParams::new(
        E1,
        E2,
        G12,
        NU12,
        ALPHA1,
        ALPHA2,
        theta_deg.to_radians(),
        thickness,
    )
    .unwrap()
}

/// Ply-crack cohesive properties with the interface dummy stiffness.
pub fn cz_ply() -> CohesiveParams {
    CohesiveParams::new(
        82720.0,
        F_N,
        F_SH,
        G_IC,
        G_IIC,
        ETA_BK,
        ETA_BRITTLE,
        EPS_END,
        PExponent::Beta,
        GAMMA,
    )
    .unwrap()
}

/// Interface cohesive properties: reduced strength, equal pure-mode values
/// so the sliding law sees the plain dummy stiffness.
pub fn cz_interface() -> CohesiveParams {
    CohesiveParams::new(
        82720.0,
        F_INTERFACE,
        F_INTERFACE,
        G_IC,
        G_IIC,
        ETA_BK,
        ETA_BRITTLE,
        EPS_END,
        PExponent::Beta,
        GAMMA,
    )
    .unwrap()
}

/// Classical-lamination-theory residual stresses of an unconstrained
/// symmetric-in-plane laminate under uniform cooling: solves
/// `A ebar = sum(Qk ek t k)` and returns the per-layer stress.
pub fn clt_residual(layup: &[(f64, f64)], dt: f64) -> Vec<[f64; 3]> {
    let q_of = |theta: f64| -> [[f64; 3]; 3] {
        let nu21 = NU12 * E2 / E1;
        let den = 1.0 - NU12 * nu21;
        let (q11, q22, q12, q66) = (E1 / den, E2 / den, NU12 * E2 / den, G12);
        let (m, n) = (theta.cos(), theta.sin());
        let (m2, n2) = (m * m, n * n);
        let (m4, n4) = (m2 * m2, n2 * n2);
        let m2n2 = m2 * n2;
        [
            [
                q11 * m4 + 2.0 * (q12 + 2.0 * q66) * m2n2 + q22 * n4,
                (q11 + q22 - 4.0 * q66) * m2n2 + q12 * (m4 + n4),
                (q11 - q12 - 2.0 * q66) * m2 * m * n + (q12 - q22 + 2.0 * q66) * m * n2 * n,
            ],
            [
                (q11 + q22 - 4.0 * q66) * m2n2 + q12 * (m4 + n4),
                q11 * n4 + 2.0 * (q12 + 2.0 * q66) * m2n2 + q22 * m4,
                (q11 - q12 - 2.0 * q66) * m * n2 * n + (q12 - q22 + 2.0 * q66) * m2 * m * n,
            ],
            [
                (q11 - q12 - 2.0 * q66) * m2 * m * n + (q12 - q22 + 2.0 * q66) * m * n2 * n,
                (q11 - q12 - 2.0 * q66) * m * n2 * n + (q12 - q22 + 2.0 * q66) * m2 * m * n,
                (q11 + q22 - 2.0 * q12 - 2.0 * q66) * m2n2 + q66 * (m4 + n4),
            ],
        ]
    };
    let eth_of = |theta: f64| -> [f64; 3] {
        let (m, n) = (theta.cos(), theta.sin());
        let (e1, e2) = (ALPHA1 * dt, ALPHA2 * dt);
        [
            e1 * m * m + e2 * n * n,
            e1 * n * n + e2 * m * m,
            2.0 * m * n * (e1 - e2),
        ]
    };
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(theta, t) in layup {
        let q = q_of(theta);
        let e = eth_of(theta);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += q[i][j] * t;
                rhs[i] += q[i][j] * e[j] * t;
            }
        }
    }
    // 3x3 solve by Cramer's rule
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&a);
    let mut ebar = [0.0f64; 3];
    for k in 0..3 {
        let mut ak = a;
        for i in 0..3 {
            ak[i][k] = rhs[i];
        }
        ebar[k] = det3(&ak) / d;
    }
    layup
        .iter()
        .map(|&(theta, _)| {
            let q = q_of(theta);
            let e = eth_of(theta);
            let mut s = [0.0f64; 3];
            for i in 0..3 {
                for j in 0..3 {
                    s[i] += q[i][j] * (ebar[j] - e[j]);
                }
            }
            s
        })
        .collect()
}

/// Independent point-fatigue oracle: adaptive RK4 integration of the CF20
/// rate coupled with the reference-displacement and static-damage relations
/// under load control at constant peak severity. Failure is the static
/// cascade at `D = 1 - s`, where the envelope meets the applied traction
/// and the quasi-static damage runs away within a single cycle.
pub struct OdeOracle {
    pub e_rel: f64,
    pub beta: f64,
    pub p: f64,
    pub gamma: f64,
}

impl OdeOracle {
    /// Re-derives the endurance, S-N exponent and the CF20 constants from
    /// the raw material inputs.
    pub fn new(cz: &CohesiveParams, r: f64, b: f64) -> Self {
        let cle = (1.0 - 0.42 * b) * cz.eps_end;
        let e_rel = 2.0 * cle / (cle + 1.0 + r * (cle - 1.0));
        let beta = -7.0 * cz.eta_brittle / e_rel.log10();
        Self {
            e_rel,
            beta,
            p: beta,
            gamma: cz.gamma,
        }
    }

    /// dD/dN at damage `d` for peak severity `s` under load control:
    /// equilibrium fixes `Delta / Delta* = s / (1 - D)`.
    fn rate(&self, d: f64, s: f64) -> f64 {
        (1.0 - d).powf(self.beta - self.p) / (self.gamma * self.e_rel.powf(self.beta) * (self.p + 1.0))
            * (s / (1.0 - d)).powf(self.beta)
    }

    /// Cycles to failure by adaptive RK4 on dN/dD = 1/rate, integrating
    /// from D = 0 to the cascade at D = 1 - s.
    pub fn cycles_to_failure(&self, s: f64) -> f64 {
        let d_end = 1.0 - s;
        let g = |d: f64| 1.0 / self.rate(d, s);
        let rk4 = |d0: f64, h: f64| -> f64 {
            let k1 = g(d0);
            let k2 = g(d0 + 0.5 * h);
            let k3 = g(d0 + 0.5 * h);
            let k4 = g(d0 + h);
            h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        let mut d = 0.0;
        let mut n = 0.0;
        let mut h = d_end / 64.0;
        let tol = 1e-12;
        while d < d_end {
            if d + h > d_end {
                h = d_end - d;
            }
            let full = rk4(d, h);
            let half = rk4(d, 0.5 * h) + rk4(d + 0.5 * h, 0.5 * h);
            let err = (full - half).abs();
            if err <= tol * half.abs().max(1e-300) || h <= 1e-15 * d_end {
                n += half + (half - full) / 15.0;
                d += h;
                if err < 0.01 * tol * half.abs() {
                    h *= 2.0;
                }
            } else {
                h *= 0.5;
            }
        }
        n
    }

    /// Closed form for `p = beta`, used to validate the quadrature itself.
    pub fn cycles_to_failure_closed_form(&self, s: f64) -> f64 {
        self.gamma * (self.e_rel / s).powf(self.beta) * (1.0 - s.powf(self.beta + 1.0))
    }
}

#[test]
fn oracle_quadrature_matches_closed_form() {
    let cz = cz_ply();
    for (r, b) in [(0.1, 0.0), (0.5, 0.5), (0.1, 1.0)] {
        let o = OdeOracle::new(&cz, r, b);
        for s in [0.5, 0.7, 0.9] {
            let num = o.cycles_to_failure(s);
            let exact = o.cycles_to_failure_closed_form(s);
            assert!(
                ((num - exact) / exact).abs() < 1e-8,
                "R={r} B={b} s={s}: {num} vs {exact}"
            );
        }
    }
}
