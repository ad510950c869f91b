//! Orthotropic plane-stress ply behavior.
//!
//! Covers the rotated stiffness matrix, thermal strains, the traction on the
//! fiber-parallel plane used for matrix-crack checks, and the bulk-point
//! severity bookkeeping that feeds the local stress ratio.

use crate::fczm::{self, CohesiveParams};
use crate::math::hypot;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlyError {
    InvalidParam(&'static str),
    /// Severity extrema may only be mutated during control cycles.
    NotInControlCycle,
}

impl core::fmt::Display for PlyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::InvalidParam(k) => write!(f, "invalid ply parameter: {k}"),
            Self::NotInControlCycle => {
                write!(f, "severity extrema recorded outside a control cycle")
            }
        }
    }
}

/// Elastic, thermal and geometric constants of one ply layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlyParams {
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub nu12: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Fiber angle from the laminate x-axis, radians.
    pub theta: f64,
    /// Layer thickness (grouped plies enter as one layer).
    pub thickness: f64,
}

impl PlyParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        e1: f64,
        e2: f64,
        g12: f64,
        nu12: f64,
        alpha1: f64,
        alpha2: f64,
        theta: f64,
        thickness: f64,
    ) -> Result<Self, PlyError> {
        if !(e1 > 0.0) {
            return Err(PlyError::InvalidParam("e1 must be > 0"));
        }
        if !(e2 > 0.0) {
            return Err(PlyError::InvalidParam("e2 must be > 0"));
        }
        if !(g12 > 0.0) {
            return Err(PlyError::InvalidParam("g12 must be > 0"));
        }
        if !(thickness > 0.0) {
            return Err(PlyError::InvalidParam("thickness must be > 0"));
        }
        let nu21 = nu12 * e2 / e1;
        if !(1.0 - nu12 * nu21 > 0.0) {
            return Err(PlyError::InvalidParam("1 - nu12*nu21 must be > 0"));
        }
        Ok(Self {
            e1,
            e2,
            g12,
            nu12,
            alpha1,
            alpha2,
            theta,
            thickness,
        })
    }

    /// Fiber direction unit vector in laminate axes.
    pub fn fiber_dir(&self) -> [f64; 2] {
        [libm::cos(self.theta), libm::sin(self.theta)]
    }

    /// In-plane normal of the fiber-parallel crack plane.
    pub fn crack_normal(&self) -> [f64; 2] {
        [-libm::sin(self.theta), libm::cos(self.theta)]
    }
}

/// Plane-stress stiffness in laminate axes (Voigt order xx, yy, xy with
/// engineering shear strain).
pub fn ply_stiffness(p: &PlyParams) -> Result<[[f64; 3]; 3], PlyError> {
    let nu21 = p.nu12 * p.e2 / p.e1;
    let den = 1.0 - p.nu12 * nu21;
    if !(den > 0.0) {
        return Err(PlyError::InvalidParam("non-positive-definite ply inputs"));
    }
    let q11 = p.e1 / den;
    let q22 = p.e2 / den;
    let q12 = p.nu12 * p.e2 / den;
    let q66 = p.g12;
    let m = libm::cos(p.theta);
    let n = libm::sin(p.theta);
    let (m2, n2) = (m * m, n * n);
    let (m4, n4) = (m2 * m2, n2 * n2);
    let m2n2 = m2 * n2;
    let qb11 = q11 * m4 + 2.0 * (q12 + 2.0 * q66) * m2n2 + q22 * n4;
    let qb22 = q11 * n4 + 2.0 * (q12 + 2.0 * q66) * m2n2 + q22 * m4;
    let qb12 = (q11 + q22 - 4.0 * q66) * m2n2 + q12 * (m4 + n4);
    let qb16 = (q11 - q12 - 2.0 * q66) * m2 * m * n + (q12 - q22 + 2.0 * q66) * m * n2 * n;
    let qb26 = (q11 - q12 - 2.0 * q66) * m * n2 * n + (q12 - q22 + 2.0 * q66) * m2 * m * n;
    let qb66 = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * m2n2 + q66 * (m4 + n4);
    Ok([
        [qb11, qb12, qb16],
        [qb12, qb22, qb26],
        [qb16, qb26, qb66],
    ])
}

/// Thermal strain in laminate axes for a temperature change `dt`.
pub fn thermal_strain(p: &PlyParams, dt: f64) -> [f64; 3] {
    let e1 = p.alpha1 * dt;
    let e2 = p.alpha2 * dt;
    let m = libm::cos(p.theta);
    let n = libm::sin(p.theta);
    [
        e1 * m * m + e2 * n * n,
        e1 * n * n + e2 * m * m,
        2.0 * m * n * (e1 - e2),
    ]
}

/// Traction on the plane whose normal is perpendicular to the fibers:
/// `(t_n, t_sh)` with `t_n` along the crack normal and `t_sh` along the
/// fiber direction.
pub fn bulk_traction(sigma: [f64; 3], theta: f64) -> [f64; 2] {
    let m = libm::cos(theta);
    let n = libm::sin(theta);
    // normal = (-n, m), fiber = (m, n); t = sigma . normal
    let tx = -sigma[0] * n + sigma[2] * m;
    let ty = -sigma[2] * n + sigma[1] * m;
    [-tx * n + ty * m, tx * m + ty * n]
}

/// Mode mixity for a bulk point, with traction severities standing in for
/// the displacement jumps of the cohesive definition; reproduces the jump
/// form under the undamaged elastic map.
pub fn bulk_mixity(t_n: f64, t_sh: f64, cz: &CohesiveParams) -> f64 {
    let tn_pos = if t_n > 0.0 { t_n } else { 0.0 };
    let num = t_sh * t_sh / cz.k_sh;
    let den = tn_pos * tn_pos / cz.k_n + num;
    if den <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Endurance-based failure index: equivalent traction over the endurance
/// limit at the point's stress ratio. Compressive-only states return 0.
pub fn failure_index(
    sigma: [f64; 3],
    theta: f64,
    r_local: f64,
    cz: &CohesiveParams,
) -> Result<f64, fczm::FczmError> {
    let [t_n, t_sh] = bulk_traction(sigma, theta);
    let tn_pos = if t_n > 0.0 { t_n } else { 0.0 };
    let sigma_eq = hypot(tn_pos, t_sh);
    if sigma_eq == 0.0 {
        return Ok(0.0);
    }
    let b = bulk_mixity(t_n, t_sh, cz);
    let e_rel = fczm::goodman_endurance(r_local, b, cz)?;
    let f_b = fczm::mixed_envelope(b, cz)?.f_b;
    Ok(sigma_eq / (e_rel * f_b))
}

/// Static strength ratio used during ramp phases: equivalent traction over
/// the mode-dependent static strength.
pub fn strength_index(sigma: [f64; 3], theta: f64, cz: &CohesiveParams) -> Result<f64, fczm::FczmError> {
    let [t_n, t_sh] = bulk_traction(sigma, theta);
    let tn_pos = if t_n > 0.0 { t_n } else { 0.0 };
    let sigma_eq = hypot(tn_pos, t_sh);
    if sigma_eq == 0.0 {
        return Ok(0.0);
    }
    let b = bulk_mixity(t_n, t_sh, cz);
    let f_b = fczm::mixed_envelope(b, cz)?.f_b;
    Ok(sigma_eq / f_b)
}

/// Severity vector of a bulk stress state on the fiber-parallel plane.
pub fn bulk_severity(sigma: [f64; 3], theta: f64, cz: &CohesiveParams) -> [f64; 2] {
    let [t_n, t_sh] = bulk_traction(sigma, theta);
    [t_n / cz.f_n, t_sh / cz.f_sh]
}

/// Analysis phase, shared by the driver and the state-recording guards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Thermal,
    StaticRamp,
    ControlCycle,
    CycleJump,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Self::Thermal => "thermal",
            Self::StaticRamp => "static_ramp",
            Self::ControlCycle => "control_cycle",
            Self::CycleJump => "cycle_jump",
        }
    }
}

/// Per-bulk-integration-point history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BulkPointState {
    /// Committed in-plane stress (xx, yy, xy).
    pub sigma: [f64; 3],
    pub s_min: [f64; 2],
    pub s_max: [f64; 2],
    pub r_local: f64,
    pub unloaded: bool,
}

impl BulkPointState {
    pub fn new(r_default: f64) -> Self {
        Self {
            sigma: [0.0; 3],
            s_min: [0.0; 2],
            s_max: [0.0; 2],
            r_local: r_default,
            unloaded: false,
        }
    }

    /// Record a severity extremum during a control cycle.
    pub fn record_severity(
        &mut self,
        phase: Phase,
        at_minimum: bool,
        sigma: [f64; 3],
        theta: f64,
        cz: &CohesiveParams,
    ) -> Result<(), PlyError> {
        if phase != Phase::ControlCycle {
            return Err(PlyError::NotInControlCycle);
        }
        let s = bulk_severity(sigma, theta, cz);
        if at_minimum {
            self.s_min = s;
        } else {
            self.s_max = s;
        }
        Ok(())
    }

    /// Close a control cycle: derive the local ratio from the extrema.
    pub fn finalize_ratio(&mut self, r_global: f64) {
        let (r, unloaded) = fczm::local_stress_ratio(self.s_min, self.s_max, r_global);
        self.r_local = r;
        self.unloaded = unloaded;
    }
}
