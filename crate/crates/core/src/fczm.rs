//! Mixed-mode fatigue cohesive zone model.
//!
//! The model couples a bilinear quasi-static envelope with an S-N-based
//! fatigue damage rate (the CF20 accumulation function). Damage is stored as
//! the energy-based variable `D` and integrated implicitly over cycle blocks
//! with the trapezoidal rule; the stiffness-based variable `d` entering the
//! traction is derived from `D`.
//!
//! All evaluation routines are generic over [`Real`] so that the exact same
//! code path produces both the traction (with `f64`) and the consistent
//! tangent (with [`Dual2`] forward-mode derivatives).

use crate::math::{abs, Dual2, Real};

/// Errors raised by the cohesive model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FczmError {
    /// A constructor input violates its admissible range.
    InvalidParam(&'static str),
    /// Mode mixity outside `[0, 1]`.
    MixityOutOfRange(f64),
    /// Relative endurance outside `(0, 1)` where a finite S-N exponent
    /// is required.
    EnduranceOutOfRange(f64),
    /// Goodman denominator at or below the positivity floor.
    DegenerateRatio,
    /// The implicit damage update failed to bracket a root.
    NonConvergent,
}

impl core::fmt::Display for FczmError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::InvalidParam(k) => write!(f, "invalid cohesive parameter: {k}"),
            Self::MixityOutOfRange(b) => write!(f, "mode mixity {b} outside [0, 1]"),
            Self::EnduranceOutOfRange(e) => write!(f, "relative endurance {e} outside (0, 1)"),
            Self::DegenerateRatio => write!(f, "degenerate stress ratio in Goodman relation"),
            Self::NonConvergent => write!(f, "implicit damage update did not converge"),
        }
    }
}

/// CF20 exponent `p`; the reference property set ties it to the S-N
/// exponent, so it is re-evaluated whenever `beta` changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PExponent {
    /// `p = beta` (the tabulated choice).
    Beta,
    Fixed(f64),
}

/// Material constants of one cohesive surface.
///
/// `k_sh` is always derived from `k_n` through the stiffness-ratio
/// constraint `K_sh = K_n (G_Ic/G_IIc) (f_sh/f_n)^2`, which keeps the onset
/// and propagation criteria of the static envelope mutually consistent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CohesiveParams {
    pub k_n: f64,
    pub k_sh: f64,
    pub f_n: f64,
    pub f_sh: f64,
    pub g_ic: f64,
    pub g_iic: f64,
    /// Static mode-interaction exponent of the B-K law.
    pub eta_bk: f64,
    /// Fatigue brittleness parameter in the S-N exponent.
    pub eta_brittle: f64,
    /// Relative endurance limit at full load reversal (R = -1).
    pub eps_end: f64,
    pub p_exp: PExponent,
    /// Cycles to failure at the endurance limit.
    pub gamma: f64,
}

impl CohesiveParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k_n: f64,
        f_n: f64,
        f_sh: f64,
        g_ic: f64,
        g_iic: f64,
        eta_bk: f64,
        eta_brittle: f64,
        eps_end: f64,
        p_exp: PExponent,
        gamma: f64,
    ) -> Result<Self, FczmError> {
        if !(k_n > 0.0) {
            return Err(FczmError::InvalidParam("k_n must be > 0"));
        }
        if !(f_n > 0.0) {
            return Err(FczmError::InvalidParam("f_n must be > 0"));
        }
        if !(f_sh > 0.0) {
            return Err(FczmError::InvalidParam("f_sh must be > 0"));
        }
        if !(g_ic > 0.0) {
            return Err(FczmError::InvalidParam("g_ic must be > 0"));
        }
        if !(g_iic > 0.0) {
            return Err(FczmError::InvalidParam("g_iic must be > 0"));
        }
        if !(gamma > 0.0) {
            return Err(FczmError::InvalidParam("gamma must be > 0"));
        }
        if !(eps_end > 0.0 && eps_end < 1.0) {
            return Err(FczmError::InvalidParam("eps_end must lie in (0, 1)"));
        }
        if !(eta_bk > 0.0) {
            return Err(FczmError::InvalidParam("eta_bk must be > 0"));
        }
        if !(eta_brittle > 0.0) {
            return Err(FczmError::InvalidParam("eta_brittle must be > 0"));
        }
        if let PExponent::Fixed(p) = p_exp {
            if !(p >= 0.0) {
                return Err(FczmError::InvalidParam("p_exp must be >= 0"));
            }
        }
        let k_sh = k_n * (g_ic / g_iic) * (f_sh / f_n) * (f_sh / f_n);
        Ok(Self {
            k_n,
            k_sh,
            f_n,
            f_sh,
            g_ic,
            g_iic,
            eta_bk,
            eta_brittle,
            eps_end,
            p_exp,
            gamma,
        })
    }
}

/// Per-integration-point history of a cohesive point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CohesiveState {
    /// Energy-based damage `D`, monotone non-decreasing over committed steps.
    pub damage: f64,
    /// Local stress ratio used in the endurance relation.
    pub r_local: f64,
    /// Severity vector at the minimum-load solve of the last control cycle.
    pub s_min: [f64; 2],
    /// Severity vector at the maximum-load solve of the last control cycle.
    pub s_max: [f64; 2],
    /// Severity magnitude below the floor at peak: local ratio falls back
    /// to the global load ratio.
    pub unloaded: bool,
    /// Fatigue accumulation disabled (control cycles, static phases).
    pub frozen_fatigue: bool,
    /// Damage rate at the last committed peak solve, feeding the
    /// trapezoidal update of the next cycle jump.
    pub rate_prev: f64,
    /// Committed jump, traction and stored elastic energy of the last
    /// accepted step; drive the dissipation bookkeeping.
    pub jump_prev: [f64; 2],
    pub traction_prev: [f64; 2],
    pub stored_prev: f64,
    /// Cumulative dissipated energy per unit cohesive measure.
    pub dissipated: f64,
}

impl CohesiveState {
    pub fn new(r_default: f64) -> Self {
        Self {
            damage: 0.0,
            r_local: r_default,
            s_min: [0.0; 2],
            s_max: [0.0; 2],
            unloaded: false,
            frozen_fatigue: true,
            rate_prev: 0.0,
            jump_prev: [0.0; 2],
            traction_prev: [0.0; 2],
            stored_prev: 0.0,
            dissipated: 0.0,
        }
    }
}

/// Envelope quantities at a fixed mode mixity.
#[derive(Clone, Copy, Debug)]
pub struct MixedModeQuantities {
    pub b: f64,
    /// Arithmetic stiffness mixture `(1-B) K_n + B K_sh`.
    pub k_b: f64,
    /// Secant stiffness seen along a proportional path at mixity `B`
    /// (harmonic mixture); equals `k_b` in the pure modes.
    pub k_eff: f64,
    pub f_b: f64,
    pub g_c: f64,
    pub delta0: f64,
    pub deltaf: f64,
}

pub(crate) struct EnvelopeG<S> {
    pub b: S,
    pub k_b: S,
    pub k_eff: S,
    pub f_b: S,
    pub g_c: S,
    pub delta0: S,
    pub deltaf: S,
}

fn envelope_g<S: Real>(p: &CohesiveParams, b: S) -> EnvelopeG<S> {
    let k_n = S::from_f64(p.k_n);
    let k_sh = S::from_f64(p.k_sh);
    let one = S::one();
    let bk = b.powf(p.eta_bk);
    let k_b = (one - b) * k_n + b * k_sh;
    let fn2kn = S::from_f64(p.f_n * p.f_n / p.k_n);
    let fsh2ksh = S::from_f64(p.f_sh * p.f_sh / p.k_sh);
    let f_b = (k_b * (fn2kn + (fsh2ksh - fn2kn) * bk)).sqrt();
    let g_c = S::from_f64(p.g_ic) + S::from_f64(p.g_iic - p.g_ic) * bk;
    // Harmonic mixture: along a proportional jump path with mixity B the
    // component stiffnesses combine in series, and it is this stiffness the
    // dissipated work integral sees. Using it in Deltaf makes monotonic
    // mixed-mode separation dissipate exactly G_c.
    let k_eff = k_n * k_sh / ((one - b) * k_sh + b * k_n);
    let delta0 = f_b / k_b;
    let two = S::from_f64(2.0);
    let deltaf = two * g_c / (k_eff * delta0);
    EnvelopeG {
        b,
        k_b,
        k_eff,
        f_b,
        g_c,
        delta0,
        deltaf,
    }
}

/// Mode mixity from a displacement jump, Macaulay-bracketing the normal
/// component so compressive contact reads as pure mode I.
pub fn mode_mixity(jump: [f64; 2], p: &CohesiveParams) -> f64 {
    mode_mixity_g(p, jump[0], jump[1]).val()
}

fn mode_mixity_g<S: Real>(p: &CohesiveParams, u_n: S, u_sh: S) -> S {
    let unp = u_n.macaulay();
    let num = S::from_f64(p.k_sh) * u_sh * u_sh;
    let den = S::from_f64(p.k_n) * unp * unp + num;
    if den.val() <= 0.0 {
        return S::zero();
    }
    num / den
}

/// Mode-dependent envelope quantities at mixity `b`.
pub fn mixed_envelope(b: f64, p: &CohesiveParams) -> Result<MixedModeQuantities, FczmError> {
    if !(0.0..=1.0).contains(&b) {
        return Err(FczmError::MixityOutOfRange(b));
    }
    let e = envelope_g::<f64>(p, b);
    Ok(MixedModeQuantities {
        b: e.b,
        k_b: e.k_b,
        k_eff: e.k_eff,
        f_b: e.f_b,
        g_c: e.g_c,
        delta0: e.delta0,
        deltaf: e.deltaf,
    })
}

/// Mode-mixity correction of the endurance limit, `C_l = 1 - 0.42 B`.
pub fn juvinall_cl(b: f64) -> Result<f64, FczmError> {
    if !(0.0..=1.0).contains(&b) {
        return Err(FczmError::MixityOutOfRange(b));
    }
    Ok(1.0 - 0.42 * b)
}

const GOODMAN_DENOM_FLOOR: f64 = 1e-9;

/// Relative endurance limit from the Goodman diagram at stress ratio `r`
/// and mixity `b`, anchored at the full-reversal endurance `eps_end`.
pub fn goodman_endurance(r: f64, b: f64, p: &CohesiveParams) -> Result<f64, FczmError> {
    if !(0.0..=1.0).contains(&b) {
        return Err(FczmError::MixityOutOfRange(b));
    }
    let cle = (1.0 - 0.42 * b) * p.eps_end;
    let den = cle + 1.0 + r * (cle - 1.0);
    if den <= GOODMAN_DENOM_FLOOR {
        return Err(FczmError::DegenerateRatio);
    }
    let e = 2.0 * cle / den;
    Ok(if e > 1.0 { 1.0 } else { e })
}

fn endurance_g<S: Real>(p: &CohesiveParams, b: S, r: f64) -> S {
    let cle = (S::one() - S::from_f64(0.42) * b) * S::from_f64(p.eps_end);
    let den = cle + S::one() + S::from_f64(r) * (cle - S::one());
    let e = S::from_f64(2.0) * cle / den;
    e.clamp_branch(f64::MIN_POSITIVE, 1.0)
}

/// S-N exponent `beta = -7 eta / log10(E)`.
pub fn sn_exponent(e_rel: f64, p: &CohesiveParams) -> Result<f64, FczmError> {
    if !(e_rel > 0.0 && e_rel < 1.0) {
        return Err(FczmError::EnduranceOutOfRange(e_rel));
    }
    Ok(-7.0 * p.eta_brittle / libm::log10(e_rel))
}

fn sn_exponent_g<S: Real>(e_rel: S, eta_brittle: f64) -> S {
    -S::from_f64(7.0 * eta_brittle) / e_rel.log10()
}

fn p_exp_g<S: Real>(p: &CohesiveParams, beta: S) -> S {
    match p.p_exp {
        PExponent::Beta => beta,
        PExponent::Fixed(v) => S::from_f64(v),
    }
}

/// CF20 damage accumulation rate `dD/dN`.
#[allow(clippy::too_many_arguments)]
pub fn cf20_rate(
    d: f64,
    delta: f64,
    delta_star: f64,
    e_rel: f64,
    beta: f64,
    p: &CohesiveParams,
) -> f64 {
    let pexp = match p.p_exp {
        PExponent::Beta => beta,
        PExponent::Fixed(v) => v,
    };
    cf20_rate_raw(d, delta, delta_star, e_rel, beta, pexp, p.gamma)
}

fn cf20_rate_raw(
    d: f64,
    delta: f64,
    delta_star: f64,
    e_rel: f64,
    beta: f64,
    pexp: f64,
    gamma: f64,
) -> f64 {
    if d >= 1.0 || delta <= 0.0 || delta_star <= 0.0 {
        return 0.0;
    }
    let base = libm::pow(1.0 - d, beta - pexp);
    base / (gamma * libm::pow(e_rel, beta) * (pexp + 1.0)) * libm::pow(delta / delta_star, beta)
}

/// `d rate / d D` at fixed jump, used by the local Newton iteration.
fn cf20_rate_dd(
    d: f64,
    delta0: f64,
    deltaf: f64,
    rate: f64,
    beta: f64,
    pexp: f64,
) -> f64 {
    if rate == 0.0 {
        return 0.0;
    }
    let delta_star = d * (deltaf - delta0) + delta0;
    rate * (-(beta - pexp) / (1.0 - d) - beta * (deltaf - delta0) / delta_star)
}

/// Quasi-static damage from the bilinear envelope.
fn static_damage_g<S: Real>(delta: S, delta0: S, deltaf: S) -> S {
    ((delta - delta0) / (deltaf - delta0)).clamp_branch(0.0, 1.0)
}

/// `D = max(D_s, D_f)` composed with the monotonicity clamp against the
/// committed damage.
pub fn combine_damage(d_static: f64, d_fatigue: f64, d_committed: f64) -> f64 {
    let d = if d_static > d_fatigue { d_static } else { d_fatigue };
    let d = if d > d_committed { d } else { d_committed };
    if d > 1.0 {
        1.0
    } else {
        d
    }
}

/// Stiffness-based damage `d` from the energy-based `D`.
pub fn stiffness_damage(d_energy: f64, delta0: f64, deltaf: f64) -> f64 {
    stiffness_damage_g(d_energy, delta0, deltaf)
}

fn stiffness_damage_g<S: Real>(d_energy: S, delta0: S, deltaf: S) -> S {
    let one = S::one();
    one - (one - d_energy) * delta0 / (d_energy * deltaf + (one - d_energy) * delta0)
}

/// Traction from a jump at a given stiffness damage. Compression keeps the
/// undamaged normal penalty stiffness.
pub fn traction(jump: [f64; 2], d: f64, p: &CohesiveParams) -> [f64; 2] {
    let t_n = if jump[0] >= 0.0 {
        (1.0 - d) * p.k_n * jump[0]
    } else {
        p.k_n * jump[0]
    };
    [t_n, (1.0 - d) * p.k_sh * jump[1]]
}

/// Local stress ratio from severity extrema (projection of the minimum on
/// the maximum); falls back to `r_default` and flags the point as unloaded
/// when the peak severity is below the floor.
pub fn local_stress_ratio(s_min: [f64; 2], s_max: [f64; 2], r_default: f64) -> (f64, bool) {
    let n2 = s_max[0] * s_max[0] + s_max[1] * s_max[1];
    if n2 < 1e-12 * 1e-12 {
        return (r_default, true);
    }
    ((s_min[0] * s_max[0] + s_min[1] * s_max[1]) / n2, false)
}

/// Pseudo-time step context for a cohesive evaluation.
#[derive(Clone, Copy, Debug)]
pub struct StepContext {
    /// Cycle increment of the current step (0 outside cycle jumps).
    pub delta_n: f64,
    /// Whether the current phase accumulates fatigue damage.
    pub fatigue_active: bool,
}

impl StepContext {
    pub const STATIC: Self = Self {
        delta_n: 0.0,
        fatigue_active: false,
    };
    pub fn cycle_jump(delta_n: f64) -> Self {
        Self {
            delta_n,
            fatigue_active: true,
        }
    }
}

/// Full constitutive evaluation at one integration point.
#[derive(Clone, Copy, Debug)]
pub struct CohesiveUpdate {
    pub jump: [f64; 2],
    pub traction: [f64; 2],
    /// Trial energy damage (committed on step acceptance).
    pub d_energy: f64,
    pub d_stiff: f64,
    pub mixity: f64,
    pub delta: f64,
    /// CF20 rate at the trial state, cached as `rate_prev` on commit.
    pub rate: f64,
}

struct FatigueG<S> {
    d_f: S,
}

fn fatigue_update_g<S: Real>(
    p: &CohesiveParams,
    st: &CohesiveState,
    ctx: &StepContext,
    env: &EnvelopeG<S>,
    delta: S,
) -> Result<FatigueG<S>, FczmError> {
    let committed = S::from_f64(st.damage);
    let active = ctx.fatigue_active
        && !st.frozen_fatigue
        && ctx.delta_n > 0.0
        && st.r_local < 1.0
        && st.damage < 1.0
        && delta.val() > 0.0;
    if !active {
        return Ok(FatigueG { d_f: committed });
    }
    let e_rel = endurance_g(p, env.b, st.r_local);
    if e_rel.val() >= 1.0 {
        return Ok(FatigueG { d_f: committed });
    }
    let beta = sn_exponent_g(e_rel, p.eta_brittle);
    let pexp = p_exp_g(p, beta);

    // Scalar Newton on the trapezoid residual
    //   r(D) = D - D_prev - dN/2 (rate_prev + rate(D))
    // followed by one generic correction step that applies the implicit
    // function theorem, so `S = Dual2` receives the exact dD/du chain.
    let d0v = env.delta0.val();
    let dfv = env.deltaf.val();
    let ev = e_rel.val();
    let bv = beta.val();
    let pv = pexp.val();
    let dv = delta.val();
    let dn = ctx.delta_n;
    let d_prev = st.damage;
    let rate_at = |d: f64| {
        let ds = d * (dfv - d0v) + d0v;
        cf20_rate_raw(d, dv, ds, ev, bv, pv, p.gamma)
    };
    let resid = |d: f64| d - d_prev - 0.5 * dn * (st.rate_prev + rate_at(d));

    let mut d = {
        // explicit predictor, clamped into the admissible bracket
        let guess = d_prev + dn * st.rate_prev;
        if guess > 1.0 {
            1.0
        } else {
            guess
        }
    };
    let mut converged = false;
    for _ in 0..50 {
        let r = resid(d);
        if abs(r) <= 1e-12 {
            converged = true;
            break;
        }
        let rate = rate_at(d);
        let drdd = 1.0 - 0.5 * dn * cf20_rate_dd(d, d0v, dfv, rate, bv, pv);
        if drdd == 0.0 || !drdd.is_finite() {
            break;
        }
        let mut next = d - r / drdd;
        if !(next.is_finite()) {
            break;
        }
        if next < d_prev {
            next = d_prev;
        }
        if next > 1.0 {
            next = 1.0;
        }
        if abs(next - d) <= 1e-14 {
            d = next;
            converged = abs(resid(d)) <= 1e-12;
            break;
        }
        d = next;
    }
    if !converged {
        d = bisect_first_root(&resid, d_prev, 1.0)?;
    }

    if d >= 1.0 {
        return Ok(FatigueG { d_f: S::one() });
    }

    // One implicit-function-theorem step in the generic scalar: the value is
    // already converged, the derivative directions become exact.
    let rate_s = {
        let d_s = S::from_f64(d);
        let ds_star = d_s * (env.deltaf - env.delta0) + env.delta0;
        let one = S::one();
        (one - d_s).pows(beta - pexp)
            / (S::from_f64(p.gamma) * e_rel.pows(beta) * (pexp + one))
            * (delta / ds_star).pows(beta)
    };
    let r_s = S::from_f64(d)
        - S::from_f64(d_prev)
        - S::from_f64(0.5 * dn) * (S::from_f64(st.rate_prev) + rate_s);
    let drdd = 1.0 - 0.5 * dn * cf20_rate_dd(d, d0v, dfv, rate_at(d), bv, pv);
    let d_f = S::from_f64(d) - r_s / S::from_f64(drdd);
    Ok(FatigueG { d_f })
}

/// First root of `f` on `[lo, hi]`, assuming `f(lo) <= 0`. Returns `hi`
/// when `f` stays negative (damage completes within the block).
fn bisect_first_root(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64, FczmError> {
    let flo = f(lo);
    if !flo.is_finite() {
        return Err(FczmError::NonConvergent);
    }
    if flo > 1e-12 {
        // Monotonicity clamp: the committed damage already satisfies the
        // residual within tolerance or the rate cache is inconsistent.
        return Ok(lo);
    }
    const SCAN: usize = 64;
    let mut a = lo;
    let mut fa = flo;
    let mut b = hi;
    let mut found = false;
    for i in 1..=SCAN {
        let x = lo + (hi - lo) * (i as f64) / (SCAN as f64);
        let fx = f(x);
        if !fx.is_finite() {
            return Err(FczmError::NonConvergent);
        }
        if fx >= 0.0 {
            b = x;
            found = true;
            break;
        }
        a = x;
        fa = fx;
    }
    if !found {
        return Ok(hi);
    }
    let _ = fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-14 {
            return Ok(m);
        }
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

pub(crate) struct ResponseG<S> {
    pub t: [S; 2],
    pub d_energy: S,
    pub d_stiff: S,
    pub b: S,
    pub delta: S,
    pub rate: S,
}

pub(crate) fn response_g<S: Real>(
    p: &CohesiveParams,
    st: &CohesiveState,
    ctx: &StepContext,
    jump: [S; 2],
) -> Result<ResponseG<S>, FczmError> {
    let u_n = jump[0];
    let u_sh = jump[1];
    let unp = u_n.macaulay();
    let delta = (unp * unp + u_sh * u_sh).sqrt();
    let b = mode_mixity_g(p, u_n, u_sh);
    let env = envelope_g(p, b);
    let d_s = static_damage_g(delta, env.delta0, env.deltaf);
    let fat = fatigue_update_g(p, st, ctx, &env, delta)?;
    let d_energy = d_s
        .max_branch(fat.d_f)
        .max_branch(S::from_f64(st.damage))
        .clamp_branch(0.0, 1.0);
    let d_stiff = stiffness_damage_g(d_energy, env.delta0, env.deltaf);
    let one = S::one();
    let t_n = if u_n.val() >= 0.0 {
        (one - d_stiff) * S::from_f64(p.k_n) * u_n
    } else {
        S::from_f64(p.k_n) * u_n
    };
    let t_sh = (one - d_stiff) * S::from_f64(p.k_sh) * u_sh;
    // Rate at the final trial state, independent of whether this phase
    // accumulates fatigue: committing it keeps the rate cache in sync with
    // the state the next trapezoidal step starts from.
    let rate = if d_energy.val() >= 1.0 || delta.val() <= 0.0 || st.r_local >= 1.0 {
        S::zero()
    } else {
        let e_rel = endurance_g(p, env.b, st.r_local);
        if e_rel.val() >= 1.0 {
            S::zero()
        } else {
            let beta = sn_exponent_g(e_rel, p.eta_brittle);
            let pexp = p_exp_g(p, beta);
            let ds_star = d_energy * (env.deltaf - env.delta0) + env.delta0;
            (one - d_energy).pows(beta - pexp)
                / (S::from_f64(p.gamma) * e_rel.pows(beta) * (pexp + one))
                * (delta / ds_star).pows(beta)
        }
    };
    Ok(ResponseG {
        t: [t_n, t_sh],
        d_energy,
        d_stiff,
        b,
        delta,
        rate,
    })
}

/// Evaluate traction and trial damage for a jump under the given step
/// context. The committed state is untouched; call
/// [`CohesiveState::commit`] on step acceptance.
pub fn evaluate(
    p: &CohesiveParams,
    st: &CohesiveState,
    ctx: &StepContext,
    jump: [f64; 2],
) -> Result<CohesiveUpdate, FczmError> {
    let r = response_g::<f64>(p, st, ctx, jump)?;
    Ok(CohesiveUpdate {
        jump,
        traction: r.t,
        d_energy: r.d_energy,
        d_stiff: r.d_stiff,
        mixity: r.b,
        delta: r.delta,
        rate: r.rate,
    })
}

/// Consistent tangent `d t / d jump` of [`evaluate`], including the
/// implicit-damage and mode-mixity dependence on the jump.
pub fn consistent_tangent(
    p: &CohesiveParams,
    st: &CohesiveState,
    ctx: &StepContext,
    jump: [f64; 2],
) -> Result<[[f64; 2]; 2], FczmError> {
    let r = response_g::<Dual2>(
        p,
        st,
        ctx,
        [Dual2::seed(jump[0], 0), Dual2::seed(jump[1], 1)],
    )?;
    Ok([
        [r.t[0].d[0], r.t[0].d[1]],
        [r.t[1].d[0], r.t[1].d[1]],
    ])
}

/// Implicit trapezoidal damage update at a fixed jump: solves
/// `D_f = D_prev + dN/2 (rate_prev + rate(D_f))` to an absolute residual of
/// 1e-12, clamped to `[D_prev, 1]`.
pub fn implicit_damage_update(
    p: &CohesiveParams,
    st: &CohesiveState,
    jump: [f64; 2],
    delta_n: f64,
) -> Result<f64, FczmError> {
    let mut active = *st;
    active.frozen_fatigue = false;
    let ctx = StepContext::cycle_jump(delta_n);
    if delta_n == 0.0 {
        return Ok(st.damage);
    }
    let unp = if jump[0] > 0.0 { jump[0] } else { 0.0 };
    let delta = crate::math::hypot(unp, jump[1]);
    let b = mode_mixity(jump, p);
    let env = envelope_g::<f64>(p, b);
    let fat = fatigue_update_g::<f64>(p, &active, &ctx, &env, delta)?;
    Ok(fat.d_f)
}

impl CohesiveState {
    /// Commit a converged trial update into the history.
    pub fn commit(&mut self, upd: &CohesiveUpdate, p: &CohesiveParams) {
        debug_assert!(upd.d_energy >= self.damage - 1e-15);
        self.damage = combine_damage(0.0, upd.d_energy, self.damage);
        self.rate_prev = upd.rate;
        // dissipation bookkeeping: work done against the traction minus the
        // change of recoverable elastic energy
        let w_inc = 0.5
            * ((self.traction_prev[0] + upd.traction[0]) * (upd.jump[0] - self.jump_prev[0])
                + (self.traction_prev[1] + upd.traction[1]) * (upd.jump[1] - self.jump_prev[1]));
        let (un, ush) = (upd.jump[0], upd.jump[1]);
        let keep = 1.0 - upd.d_stiff;
        let stored = if un >= 0.0 {
            0.5 * keep * (p.k_n * un * un + p.k_sh * ush * ush)
        } else {
            0.5 * p.k_n * un * un + 0.5 * keep * p.k_sh * ush * ush
        };
        self.dissipated += w_inc - (stored - self.stored_prev);
        self.stored_prev = stored;
        self.jump_prev = upd.jump;
        self.traction_prev = upd.traction;
    }

    /// Record the severity vector of the minimum-load solve.
    pub fn record_severity_min(&mut self, s: [f64; 2]) {
        self.s_min = s;
    }

    /// Record the severity vector of the maximum-load solve.
    pub fn record_severity_max(&mut self, s: [f64; 2]) {
        self.s_max = s;
    }

    /// Close a control cycle: derive the local stress ratio from the
    /// recorded extrema.
    pub fn finalize_ratio(&mut self, r_global: f64) {
        let (r, unloaded) = local_stress_ratio(self.s_min, self.s_max, r_global);
        self.r_local = r;
        self.unloaded = unloaded;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Table 1 style ply-crack properties; `K_n` is the interface dummy
    /// stiffness `G12 / (t_p/2)` for `G12 = 5170`, `t_p = 0.125`.
    fn table1() -> CohesiveParams {
        CohesiveParams::new(
            82720.0,
            95.0,
            107.0,
            1.0,
            1.0,
            2.1,
            0.95,
            0.2,
            PExponent::Beta,
            1.0e7,
        )
        .unwrap()
    }

    fn relerr(a: f64, b: f64) -> f64 {
        abs(a - b) / abs(b).max(1e-300)
    }

    #[test]
    fn turon_stiffness_ratio_holds_after_construction() {
        let p = table1();
        let expect = p.k_n * (p.g_ic / p.g_iic) * (p.f_sh / p.f_n) * (p.f_sh / p.f_n);
        assert!(relerr(p.k_sh, expect) < 1e-15);
        assert!(relerr(p.k_sh, 104937.53795013849) < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CohesiveParams::new(
            82720.0, 95.0, 107.0, -1.0, 1.0, 2.1, 0.95, 0.2, PExponent::Beta, 1e7
        )
        .is_err());
        assert!(CohesiveParams::new(
            82720.0, 95.0, 107.0, 1.0, 1.0, 2.1, 0.95, 1.2, PExponent::Beta, 1e7
        )
        .is_err());
    }

    #[test]
    fn mode_mixity_pure_and_compressive_cases() {
        let p = table1();
        assert_eq!(mode_mixity([1.0, 0.0], &p), 0.0);
        assert_eq!(mode_mixity([0.0, 1.0], &p), 1.0);
        assert_eq!(mode_mixity([-1.0, 0.0], &p), 0.0);
        assert_eq!(mode_mixity([0.0, 0.0], &p), 0.0);
    }

    #[test]
    fn envelope_collapses_at_pure_modes() {
        let p = table1();
        let e0 = mixed_envelope(0.0, &p).unwrap();
        assert!(relerr(e0.f_b, p.f_n) < 1e-14);
        assert!(relerr(e0.g_c, p.g_ic) < 1e-14);
        assert!(relerr(e0.delta0, p.f_n / p.k_n) < 1e-14);
        let e1 = mixed_envelope(1.0, &p).unwrap();
        assert!(relerr(e1.f_b, p.f_sh) < 1e-14);
        assert!(relerr(e1.g_c, p.g_iic) < 1e-14);
        assert!(mixed_envelope(1.5, &p).is_err());
        assert!(mixed_envelope(-0.1, &p).is_err());
    }

    #[test]
    fn envelope_mixed_mode_frozen_values() {
        // Direct substitution, frozen from an independent evaluation.
        let p = table1();
        let e = mixed_envelope(0.5, &p).unwrap();
        assert!(relerr(e.f_b, 101.178060863015) < 1e-12);
        assert!(relerr(e.g_c, 1.0) < 1e-14);
        assert!(relerr(e.delta0, 1.078326636577e-3) < 1e-11);
        assert!(relerr(e.deltaf, 2.004814915052e-2) < 1e-11);
        assert!(e.delta0 < e.deltaf);
    }

    /// Work done against the traction over a monotonic proportional opening
    /// must equal G_c(B): trapezoidal quadrature with a fine path.
    fn dissipation_at_mixity(b: f64) -> f64 {
        let p = table1();
        let env = mixed_envelope(b, &p).unwrap();
        // direction with the requested mixity
        let (c, s) = if b == 0.0 {
            (1.0, 0.0)
        } else if b == 1.0 {
            (0.0, 1.0)
        } else {
            let c2 = (1.0 - b) * p.k_sh / ((1.0 - b) * p.k_sh + b * p.k_n);
            (libm::sqrt(c2), libm::sqrt(1.0 - c2))
        };
        let mut st = CohesiveState::new(0.1);
        let n = 200_000;
        let delta_end = env.deltaf * 1.001;
        let mut work = 0.0;
        let mut prev_t = [0.0; 2];
        let mut prev_u = [0.0; 2];
        for i in 1..=n {
            let delta = delta_end * (i as f64) / (n as f64);
            let u = [delta * c, delta * s];
            let upd = evaluate(&p, &st, &StepContext::STATIC, u).unwrap();
            st.commit(&upd, &p);
            work += 0.5
                * ((prev_t[0] + upd.traction[0]) * (u[0] - prev_u[0])
                    + (prev_t[1] + upd.traction[1]) * (u[1] - prev_u[1]));
            prev_t = upd.traction;
            prev_u = u;
        }
        work / env.g_c
    }

    #[test]
    fn static_dissipation_matches_gc() {
        for b in [0.0, 0.5, 1.0] {
            let w = dissipation_at_mixity(b);
            assert!(
                relerr(w, 1.0) < 1e-6,
                "B={b}: dissipated {w} of G_c"
            );
        }
    }

    #[test]
    fn dissipation_bookkeeping_tracks_the_quadrature() {
        let p = table1();
        let env = mixed_envelope(0.0, &p).unwrap();
        let mut st = CohesiveState::new(0.1);
        let n = 50_000;
        for i in 1..=n {
            let delta = 1.001 * env.deltaf * (i as f64) / (n as f64);
            let upd = evaluate(&p, &st, &StepContext::STATIC, [delta, 0.0]).unwrap();
            st.commit(&upd, &p);
        }
        assert!(relerr(st.dissipated, env.g_c) < 1e-6, "{}", st.dissipated);
    }

    #[test]
    fn juvinall_endpoints() {
        assert_eq!(juvinall_cl(0.0).unwrap(), 1.0);
        assert!(relerr(juvinall_cl(1.0).unwrap(), 0.58) < 1e-15);
        assert!(relerr(juvinall_cl(0.5).unwrap(), 0.79) < 1e-15);
        assert!(juvinall_cl(2.0).is_err());
    }

    #[test]
    fn goodman_limits() {
        let p = table1();
        assert!(relerr(goodman_endurance(-1.0, 0.0, &p).unwrap(), 0.2) < 1e-14);
        assert!(relerr(goodman_endurance(0.0, 0.0, &p).unwrap(), 1.0 / 3.0) < 1e-14);
        let near_one = goodman_endurance(1.0 - 1e-12, 0.0, &p).unwrap();
        assert!(near_one > 0.999999);
    }

    #[test]
    fn sn_exponent_values_and_rejections() {
        let p = table1();
        assert!(relerr(sn_exponent(0.1, &p).unwrap(), 6.65) < 1e-14);
        let mut p1 = p;
        p1.eta_brittle = 1.0;
        assert!(relerr(sn_exponent(0.1, &p1).unwrap(), 7.0) < 1e-14);
        assert!(sn_exponent(1.0, &p).is_err());
        assert!(sn_exponent(0.0, &p).is_err());
        assert!(sn_exponent(1.0 - 1e-16, &p).is_err() || sn_exponent(1.0 - 1e-16, &p).unwrap().is_finite());
    }

    #[test]
    fn cf20_rate_frozen_value() {
        // gamma=1e7, E=1/3 (R=0, B=0, eps=0.2), p=beta, D=0, Delta=Delta*.
        let p = table1();
        let e = goodman_endurance(0.0, 0.0, &p).unwrap();
        let beta = sn_exponent(e, &p).unwrap();
        assert!(relerr(beta, 13.937756774024406) < 1e-14);
        let rate = cf20_rate(0.0, 1.0, 1.0, e, beta, &p);
        assert!(relerr(rate, 0.02990299004785715) < 1e-12);
    }

    #[test]
    fn cf20_rate_with_p_equals_beta_is_damage_independent_at_reference() {
        let p = table1();
        let e = 0.4;
        let beta = sn_exponent(e, &p).unwrap();
        let r0 = cf20_rate(0.0, 1.0, 1.0, e, beta, &p);
        let r1 = cf20_rate(0.7, 1.0, 1.0, e, beta, &p);
        assert!(relerr(r0, r1) < 1e-14);
        let expect = 1.0 / (p.gamma * libm::pow(e, beta) * (beta + 1.0));
        assert!(relerr(r0, expect) < 1e-14);
        assert_eq!(cf20_rate(0.3, 0.0, 1.0, e, beta, &p), 0.0);
    }

    #[test]
    fn implicit_update_trivial_and_residual() {
        let p = table1();
        let env = mixed_envelope(0.0, &p).unwrap();
        let mut st = CohesiveState::new(0.1);
        st.damage = 0.2;
        st.frozen_fatigue = false;
        let jump = [0.6 * env.delta0, 0.0];
        assert_eq!(implicit_damage_update(&p, &st, jump, 0.0).unwrap(), 0.2);

        // Seed the rate cache as a committed peak solve would.
        let e = goodman_endurance(st.r_local, 0.0, &p).unwrap();
        let beta = sn_exponent(e, &p).unwrap();
        let ds = st.damage * (env.deltaf - env.delta0) + env.delta0;
        st.rate_prev = cf20_rate(st.damage, jump[0], ds, e, beta, &p);

        let dn = 2000.0;
        let d_f = implicit_damage_update(&p, &st, jump, dn).unwrap();
        assert!(d_f > st.damage && d_f < 1.0);
        // residual of the trapezoid equation at the root
        let ds_f = d_f * (env.deltaf - env.delta0) + env.delta0;
        let rate_f = cf20_rate(d_f, jump[0], ds_f, e, beta, &p);
        let resid = d_f - st.damage - 0.5 * dn * (st.rate_prev + rate_f);
        assert!(abs(resid) < 1e-12, "residual {resid}");
    }

    #[test]
    fn implicit_update_approaches_explicit_euler_at_first_order() {
        let p = table1();
        let env = mixed_envelope(0.0, &p).unwrap();
        let mut st = CohesiveState::new(0.1);
        st.damage = 0.3;
        st.frozen_fatigue = false;
        // jump at 60% severity for the committed damage state
        let ds = st.damage * (env.deltaf - env.delta0) + env.delta0;
        let jump = [0.6 * ds / (1.0 - st.damage), 0.0];
        let e = goodman_endurance(st.r_local, 0.0, &p).unwrap();
        let beta = sn_exponent(e, &p).unwrap();
        st.rate_prev = cf20_rate(st.damage, jump[0], ds, e, beta, &p);
        assert!(st.rate_prev > 1e-6);

        // |trapezoid - explicit Euler| shrinks quadratically with dN, i.e.
        // the update converges to Euler at first order in the increment.
        let gap = |dn: f64| {
            let d_tr = implicit_damage_update(&p, &st, jump, dn).unwrap();
            let d_eu = st.damage + dn * st.rate_prev;
            abs(d_tr - d_eu)
        };
        let dn0 = 2.0;
        let g1 = gap(dn0);
        let g2 = gap(dn0 / 2.0);
        let g3 = gap(dn0 / 4.0);
        assert!(g1 / g2 > 3.4 && g1 / g2 < 4.6, "ratio {}", g1 / g2);
        assert!(g2 / g3 > 3.4 && g2 / g3 < 4.6, "ratio {}", g2 / g3);
    }

    #[test]
    fn combine_and_stiffness_damage_examples() {
        assert_eq!(combine_damage(0.3, 0.6, 0.0), 0.6);
        assert_eq!(combine_damage(0.3, 0.6, 0.7), 0.7);
        assert_eq!(stiffness_damage(0.0, 1.0, 3.0), 0.0);
        assert_eq!(stiffness_damage(1.0, 1.0, 3.0), 1.0);
        assert!(relerr(stiffness_damage(0.5, 1.0, 3.0), 0.75) < 1e-15);
    }

    #[test]
    fn traction_peak_and_failed_states() {
        let p = table1();
        let env = mixed_envelope(0.0, &p).unwrap();
        let t = traction([env.delta0, 0.0], 0.0, &p);
        assert!(relerr(t[0], p.f_n) < 1e-12);
        let t = traction([1e-3, 0.5e-3], 1.0, &p);
        assert_eq!(t, [0.0, 0.0]);
        let t = traction([-1e-3, 0.0], 1.0, &p);
        assert!(relerr(t[0], -1e-3 * p.k_n) < 1e-15);
    }

    #[test]
    fn local_ratio_projection_and_fallback() {
        let (r, u) = local_stress_ratio([0.4, 0.3], [0.4, 0.3], 0.1);
        assert!(relerr(r, 1.0) < 1e-14 && !u);
        let (r, _) = local_stress_ratio([0.0, 0.0], [0.4, 0.3], 0.1);
        assert_eq!(r, 0.0);
        let (r, _) = local_stress_ratio([0.04, 0.03], [0.4, 0.3], 0.1);
        assert!(relerr(r, 0.1) < 1e-14);
        let (r, unloaded) = local_stress_ratio([0.0, 0.0], [0.0, 0.0], 0.37);
        assert_eq!(r, 0.37);
        assert!(unloaded);
    }

    #[test]
    fn tangent_matches_trivial_states() {
        let p = table1();
        let st = CohesiveState::new(0.1);
        let ctx = StepContext::STATIC;
        let env = mixed_envelope(0.0, &p).unwrap();
        // undamaged, below onset
        let k = consistent_tangent(&p, &st, &ctx, [0.3 * env.delta0, 0.0]).unwrap();
        assert!(relerr(k[0][0], p.k_n) < 1e-12);
        assert!(relerr(k[1][1], p.k_sh) < 1e-12);
        assert!(abs(k[0][1]) < 1e-9 && abs(k[1][0]) < 1e-9);
        // fully damaged in tension
        let mut dead = st;
        dead.damage = 1.0;
        let k = consistent_tangent(&p, &dead, &ctx, [2.0 * env.deltaf, 0.0]).unwrap();
        for row in k {
            for v in row {
                assert!(abs(v) < 1e-9);
            }
        }
    }

    #[test]
    fn damage_is_monotone_under_random_load_programs() {
        use rand::{Rng, SeedableRng};
        let p = table1();
        let env = mixed_envelope(0.0, &p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let mut st = CohesiveState::new(0.1);
            st.frozen_fatigue = false;
            let mut last = 0.0;
            for _ in 0..40 {
                let u = [
                    rng.gen_range(-0.2..1.2) * env.deltaf,
                    rng.gen_range(-1.0..1.0) * env.deltaf,
                ];
                let dn = rng.gen_range(0.0..50.0);
                let upd = evaluate(&p, &st, &StepContext::cycle_jump(dn), u).unwrap();
                st.commit(&upd, &p);
                assert!(st.damage >= last - 1e-15);
                assert!((0.0..=1.0).contains(&st.damage));
                last = st.damage;
            }
        }
    }

    #[test]
    fn endurance_is_increasing_in_ratio() {
        let p = table1();
        for b in [0.0, 0.5, 1.0] {
            let mut prev = 0.0;
            let mut r = -0.99;
            while r < 0.99 {
                let e = goodman_endurance(r, b, &p).unwrap();
                assert!(e > prev, "E not increasing at R={r}, B={b}");
                prev = e;
                r += 0.02;
            }
        }
    }
}
