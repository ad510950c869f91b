//! Four-phase fatigue scheduling: thermal load, static ramp, control cycles
//! with severity capture, and adaptive cycle-jump blocks.
//!
//! The driver owns the pseudo-time loop. Every step attempt runs against
//! committed state; only accepted steps commit, so restarts are pure. Cycle
//! increments and static/control load increments are adapted separately, and
//! the jump increment carries over from block to block.

use alloc::string::String;
use alloc::vec::Vec;

use crate::fczm::{self, CohesiveParams, CohesiveState, StepContext};
use crate::fem::{
    adapt_step, FemModel, InsertionCriterion, LoadCase, SolveFailure, SolverConfig,
};
use crate::math::{abs, Dual2, Real};
use crate::ply::Phase;

#[derive(Clone, Debug, PartialEq)]
pub enum DriverError {
    /// A phase could not advance: repeated restarts fell below the minimum
    /// step size.
    Stalled {
        phase: Phase,
        detail: String,
    },
    Solver(SolveFailure),
    BadConfig(&'static str),
}

impl core::fmt::Display for DriverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Stalled { phase, detail } => {
                write!(f, "phase {} stalled: {detail}", phase.name())
            }
            Self::Solver(e) => write!(f, "solver failure: {e}"),
            Self::BadConfig(s) => write!(f, "bad schedule config: {s}"),
        }
    }
}

impl From<SolveFailure> for DriverError {
    fn from(e: SolveFailure) -> Self {
        Self::Solver(e)
    }
}

/// Schedule constants of one fatigue analysis.
#[derive(Clone, Debug)]
pub struct ScheduleConfig {
    /// Global load ratio `F_min / F_max`.
    pub r_global: f64,
    /// Cycle jumps per block before the next control cycle.
    pub jumps_per_block: usize,
    /// Cycle budget; runs ending here report a censored point.
    pub n_max: f64,
    /// Normalized effective-stiffness level that defines failure.
    pub stop_fraction: f64,
    /// Replace every local stress ratio with the global one.
    pub global_r_mode: bool,
    pub dn_init: f64,
    /// Absolute cap on the cycle increment.
    pub dn_max: Option<f64>,
    /// Relative cap: dN <= max(dn_init, dn_rel_max * N).
    pub dn_rel_max: f64,
    pub dn_min: f64,
    /// Initial fraction of a static/thermal/control target per step.
    pub dt_init: f64,
    pub dt_min: f64,
    /// Node set receiving the load, and its displacement component; also
    /// where the effective stiffness is measured.
    pub load_set: String,
    pub load_comp: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            r_global: 0.1,
            jumps_per_block: 3,
            n_max: 1e7,
            stop_fraction: 0.85,
            global_r_mode: false,
            dn_init: 1.0,
            dn_max: None,
            dn_rel_max: 0.05,
            dn_min: 1e-6,
            dt_init: 0.5,
            dt_min: 1e-6,
            load_set: String::from("right"),
            load_comp: 0,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.r_global < 1.0) {
            return Err(DriverError::BadConfig("r_global must be < 1"));
        }
        if self.jumps_per_block == 0 {
            return Err(DriverError::BadConfig("jumps_per_block must be >= 1"));
        }
        if !(self.n_max > 0.0) {
            return Err(DriverError::BadConfig("n_max must be > 0"));
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return Err(DriverError::BadConfig("stop_fraction must lie in (0,1)"));
        }
        if !(self.dn_init > 0.0 && self.dn_min > 0.0 && self.dn_rel_max > 0.0) {
            return Err(DriverError::BadConfig("cycle increments must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub phase: Phase,
    pub n_cycles: f64,
    /// Phase load parameter: thermal fraction during the thermal phase,
    /// mechanical load factor otherwise.
    pub load_factor: f64,
    pub e_eff_norm: f64,
    pub n_iter: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Insertion {
        step: usize,
        layer: usize,
        elem: usize,
        n_cycles: f64,
    },
    Restart {
        step: usize,
        phase: Phase,
        dt: f64,
    },
    ControlCycle {
        step: usize,
        n_cycles: f64,
        e_eff_norm: f64,
    },
    /// Cycle jumps could no longer advance at the minimum increment: the
    /// laminate cannot carry the peak load.
    Collapse {
        step: usize,
        n_cycles: f64,
    },
}

/// Terminal S-N datum of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnPoint {
    pub peak_load: f64,
    pub n_fail: f64,
    pub censored: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
    pub events: Vec<Event>,
    pub sn: Option<SnPoint>,
    /// (N, normalized E_eff) at each control cycle.
    pub stiffness_curve: Vec<(f64, f64)>,
}

/// Interpolation of the stop-fraction crossing between two control-cycle
/// measurements: linear in log N, falling back to linear in N when the
/// bracket starts below one cycle (where log N degenerates).
pub fn interpolate_crossing(n1: f64, e1: f64, n2: f64, e2: f64, stop: f64) -> f64 {
    if e2 == stop {
        return n2;
    }
    if e1 == stop {
        return n1;
    }
    let frac = (e1 - stop) / (e1 - e2);
    if n1 < 1.0 {
        return n1 + frac * (n2 - n1);
    }
    let ln1 = libm::log(n1);
    let ln2 = libm::log(n2);
    libm::exp(ln1 + frac * (ln2 - ln1))
}

/// The four-phase fatigue driver.
pub struct FatigueDriver {
    pub model: FemModel,
    pub solver: SolverConfig,
    pub sched: ScheduleConfig,
    pub record: RunRecord,
    n_cycles: f64,
    dn: f64,
    step: usize,
    e_eff0: Option<f64>,
    e_eff_norm: f64,
}

impl FatigueDriver {
    pub fn new(model: FemModel, solver: SolverConfig, sched: ScheduleConfig) -> Result<Self, DriverError> {
        solver
            .validate()
            .map_err(DriverError::BadConfig)?;
        sched.validate()?;
        let dn = sched.dn_init;
        Ok(Self {
            model,
            solver,
            sched,
            record: RunRecord::default(),
            n_cycles: 0.0,
            dn,
            step: 0,
            e_eff0: None,
            e_eff_norm: 1.0,
        })
    }

    pub fn cycles(&self) -> f64 {
        self.n_cycles
    }

    pub fn stiffness_norm(&self) -> f64 {
        self.e_eff_norm
    }

    fn push_row(&mut self, phase: Phase, load_factor: f64, n_iter: usize, dt: f64) {
        self.step += 1;
        self.record.rows.push(StepRow {
            step: self.step,
            phase,
            n_cycles: self.n_cycles,
            load_factor,
            e_eff_norm: self.e_eff_norm,
            n_iter,
            dt,
        });
    }

    /// Solve at a load case and, when a criterion is given, run insertion
    /// sweeps with re-equilibration until no new segment appears.
    fn solve_with_insertions(
        &mut self,
        lam: &LoadCase,
        criterion: Option<InsertionCriterion>,
    ) -> Result<(Vec<f64>, usize), SolveFailure> {
        let u0 = self.model.u.clone();
        let (mut u, mut iters) = self.model.newton_solve(&u0, lam, &self.solver)?;
        if let Some(crit) = criterion {
            let bound = self
                .model
                .mesh
                .layers
                .iter()
                .map(|l| l.elems.len())
                .sum::<usize>();
            let mut sweeps = 0usize;
            loop {
                let (inserted, _rejected) = self.model.insertion_sweep(&mut u, lam, crit)?;
                if inserted.is_empty() {
                    break;
                }
                for (layer, elem) in &inserted {
                    self.record.events.push(Event::Insertion {
                        step: self.step + 1,
                        layer: *layer,
                        elem: *elem,
                        n_cycles: self.n_cycles,
                    });
                }
                let (u2, it2) = self.model.newton_solve(&u, lam, &self.solver)?;
                u = u2;
                iters = iters.max(it2);
                sweeps += 1;
                if sweeps > bound {
                    return Err(SolveFailure::BadModel(String::from(
                        "insertion cascade exceeded the element count",
                    )));
                }
            }
        }
        Ok((u, iters))
    }

    /// Generic adaptive advance of a static load parameter (thermal or
    /// mechanical) from `from` to `to`.
    fn advance_static(
        &mut self,
        phase: Phase,
        from: f64,
        to: f64,
        make_case: &dyn Fn(f64) -> LoadCase,
        criterion: Option<InsertionCriterion>,
    ) -> Result<(), DriverError> {
        let mut t = from;
        let span = to - from;
        if span == 0.0 {
            return Ok(());
        }
        let mut dt = self.sched.dt_init;
        while (span > 0.0 && t < to) || (span < 0.0 && t > to) {
            let dt_eff = dt.min(1.0);
            let target = if span > 0.0 {
                (t + dt_eff * span.abs()).min(to)
            } else {
                (t - dt_eff * span.abs()).max(to)
            };
            let lam = make_case(target);
            let snap = self.model.topology_snapshot();
            match self.solve_with_insertions(&lam, criterion) {
                Ok((u, iters)) => {
                    self.model.commit(&u, &lam)?;
                    t = target;
                    self.push_row(phase, target, iters, dt_eff);
                    dt = adapt_step(dt_eff, iters, &self.solver, self.sched.dt_min, 1.0);
                }
                Err(SolveFailure::Diverged { .. }) | Err(SolveFailure::Singular) => {
                    self.model.restore_topology(snap);
                    dt *= self.solver.c_red;
                    self.record.events.push(Event::Restart {
                        step: self.step + 1,
                        phase,
                        dt,
                    });
                    if dt < self.sched.dt_min {
                        return Err(DriverError::Stalled {
                            phase,
                            detail: alloc::format!("step size {dt} below minimum"),
                        });
                    }
                }
                Err(e) => {
                    self.model.restore_topology(snap);
                    return Err(e.into());
                }
            }
        }
        Ok(())
    }

    /// Thermal load phase: ramp the temperature drop under free
    /// deformation.
    pub fn run_phase_thermal(&mut self) -> Result<(), DriverError> {
        self.model.set_frozen_fatigue(true);
        self.advance_static(
            Phase::Thermal,
            0.0,
            1.0,
            &|t| LoadCase::static_at(0.0, t),
            None,
        )
    }

    /// Static ramp to the peak load, with strength-based insertion checks.
    pub fn run_phase_ramp(&mut self) -> Result<(), DriverError> {
        self.model.set_frozen_fatigue(true);
        self.advance_static(
            Phase::StaticRamp,
            0.0,
            1.0,
            &|l| LoadCase::static_at(l, 1.0),
            Some(InsertionCriterion::StaticStrength),
        )
    }

    /// Control cycle: unload to the minimum, reload to the peak, with
    /// fatigue frozen; record severity extrema at both solves and derive
    /// the local stress ratios. Returns the raw effective stiffness.
    pub fn run_control_cycle(&mut self) -> Result<f64, DriverError> {
        self.model.set_frozen_fatigue(true);
        let r = self.sched.r_global;
        // unload (adaptively subdivided when needed)
        self.advance_static(
            Phase::ControlCycle,
            1.0,
            r,
            &|l| LoadCase::static_at(l, 1.0),
            None,
        )?;
        let lam_min = LoadCase::static_at(r, 1.0);
        let u_min = self.model.u.clone();
        self.model.record_severities(&u_min, &lam_min, true)?;
        let d_min = self
            .model
            .mean_displacement(&u_min, &self.sched.load_set, self.sched.load_comp)?;
        // reload
        self.advance_static(
            Phase::ControlCycle,
            r,
            1.0,
            &|l| LoadCase::static_at(l, 1.0),
            None,
        )?;
        let lam_max = LoadCase::static_at(1.0, 1.0);
        let u_max = self.model.u.clone();
        self.model.record_severities(&u_max, &lam_max, false)?;
        let d_max = self
            .model
            .mean_displacement(&u_max, &self.sched.load_set, self.sched.load_comp)?;

        if self.sched.global_r_mode {
            self.force_global_ratio();
        } else {
            self.model.finalize_ratios(self.sched.r_global);
        }
        // re-commit at the peak so every rate cache carries the new ratios
        self.model.commit(&u_max, &lam_max)?;
        self.model.set_frozen_fatigue(false);

        let f_total = abs(self.model.total_load(self.sched.load_comp));
        let e_eff = f_total * (1.0 - r) / (d_max - d_min);
        if let Some(e0) = self.e_eff0 {
            self.e_eff_norm = e_eff / e0;
        } else {
            self.e_eff0 = Some(e_eff);
            self.e_eff_norm = 1.0;
        }
        self.record.events.push(Event::ControlCycle {
            step: self.step,
            n_cycles: self.n_cycles,
            e_eff_norm: self.e_eff_norm,
        });
        self.record
            .stiffness_curve
            .push((self.n_cycles, self.e_eff_norm));
        Ok(e_eff)
    }

    fn force_global_ratio(&mut self) {
        let r = self.sched.r_global;
        for states in self.model.bulk.iter_mut() {
            for s in states.iter_mut() {
                s.r_local = r;
                s.unloaded = false;
            }
        }
        for seg in self.model.topology.segments.iter_mut() {
            seg.bulk_a.r_local = r;
            seg.bulk_b.r_local = r;
            for c in seg.cohesive.iter_mut() {
                c.r_local = r;
            }
        }
        for states in self.model.iface.iter_mut() {
            for s in states.iter_mut() {
                s.r_local = r;
            }
        }
    }

    /// A block of cycle jumps at peak load. Returns `false` when the
    /// laminate collapsed (jump increments stalled at the minimum).
    pub fn run_cycle_jump_block(&mut self, jumps: usize) -> Result<bool, DriverError> {
        self.model.set_frozen_fatigue(false);
        for _ in 0..jumps {
            if self.n_cycles >= self.sched.n_max {
                return Ok(true);
            }
            loop {
                let mut dn_eff = self
                    .dn
                    .min(self.sched.dn_rel_max * self.n_cycles.max(self.sched.dn_init / self.sched.dn_rel_max));
                if let Some(cap) = self.sched.dn_max {
                    dn_eff = dn_eff.min(cap);
                }
                dn_eff = dn_eff.min(self.sched.n_max - self.n_cycles).max(self.sched.dn_min);
                let lam = LoadCase {
                    lambda_mech: 1.0,
                    lambda_th: 1.0,
                    cz: StepContext::cycle_jump(dn_eff),
                };
                let snap = self.model.topology_snapshot();
                match self.solve_with_insertions(&lam, Some(InsertionCriterion::FatigueEndurance)) {
                    Ok((u, iters)) => {
                        self.model.commit(&u, &lam)?;
                        self.n_cycles += dn_eff;
                        self.push_row(Phase::CycleJump, 1.0, iters, dn_eff);
                        self.dn = adapt_step(dn_eff, iters, &self.solver, self.sched.dn_min, f64::MAX);
                        break;
                    }
                    Err(SolveFailure::Diverged { .. }) | Err(SolveFailure::Singular) => {
                        self.model.restore_topology(snap);
                        self.dn = dn_eff * self.solver.c_red;
                        self.record.events.push(Event::Restart {
                            step: self.step + 1,
                            phase: Phase::CycleJump,
                            dt: self.dn,
                        });
                        if self.dn < self.sched.dn_min {
                            self.record.events.push(Event::Collapse {
                                step: self.step + 1,
                                n_cycles: self.n_cycles,
                            });
                            return Ok(false);
                        }
                    }
                    Err(e) => {
                        self.model.restore_topology(snap);
                        return Err(e.into());
                    }
                }
            }
        }
        Ok(true)
    }

    /// Effective stiffness of the latest control cycle, normalized by the
    /// first post-ramp value.
    pub fn effective_stiffness_norm(&self) -> f64 {
        self.e_eff_norm
    }

    /// Terminal S-N datum.
    pub fn extract_sn_point(&self) -> Option<SnPoint> {
        self.record.sn
    }

    /// Run the full schedule: thermal, ramp, then control/jump blocks until
    /// the stiffness stop or the cycle budget.
    pub fn run(&mut self) -> Result<SnPoint, DriverError> {
        let peak_load = abs(self.model.total_load(self.sched.load_comp));
        self.run_phase_thermal()?;
        self.run_phase_ramp()?;
        self.run_control_cycle()?;
        let stop = self.sched.stop_fraction;
        let sn = loop {
            let before = (self.n_cycles, self.e_eff_norm);
            let alive = self.run_cycle_jump_block(self.sched.jumps_per_block)?;
            if !alive {
                // stiffness dropped through collapse: the crossing is now
                break SnPoint {
                    peak_load,
                    n_fail: self.n_cycles.max(1e-3),
                    censored: false,
                };
            }
            self.run_control_cycle()?;
            let after = (self.n_cycles, self.e_eff_norm);
            if after.1 <= stop {
                let n_fail = interpolate_crossing(before.0, before.1, after.0, after.1, stop);
                break SnPoint {
                    peak_load,
                    n_fail,
                    censored: false,
                };
            }
            if self.n_cycles >= self.sched.n_max {
                break SnPoint {
                    peak_load,
                    n_fail: self.sched.n_max,
                    censored: true,
                };
            }
        };
        self.record.sn = Some(sn);
        Ok(sn)
    }
}

/// Configuration of a load-controlled single-cohesive-point fatigue run:
/// the smallest model exercising the full cycle-jump machinery.
#[derive(Clone, Debug)]
pub struct PointFatigueConfig {
    pub params: CohesiveParams,
    /// Peak severity: equivalent traction over the mode-dependent strength.
    pub severity: f64,
    /// Load ratio of the applied cycle.
    pub r_ratio: f64,
    /// Target mode mixity, held through the jump direction.
    pub mixity: f64,
    pub solver: SolverConfig,
    pub jumps_per_block: usize,
    pub dn_init: f64,
    pub dn_rel_max: f64,
    pub dn_min: f64,
    pub n_max: f64,
}

impl PointFatigueConfig {
    pub fn new(params: CohesiveParams, severity: f64, r_ratio: f64, mixity: f64) -> Self {
        // the equilibrium solve is scalar, so a tight tolerance is cheap
        // and keeps the cascade cycle count sharp
        let solver = SolverConfig {
            tol_rel: 1e-10,
            n_iter_max: 40,
            ..SolverConfig::default()
        };
        Self {
            params,
            severity,
            r_ratio,
            mixity,
            solver,
            jumps_per_block: 3,
            dn_init: 0.25,
            dn_rel_max: 0.02,
            dn_min: 1e-9,
            n_max: 1e9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRunResult {
    pub n_fail: f64,
    pub censored: bool,
    pub d_final: f64,
    pub steps: usize,
}

/// Jump direction with the requested mode mixity.
pub fn mixity_direction(params: &CohesiveParams, b: f64) -> [f64; 2] {
    if b <= 0.0 {
        return [1.0, 0.0];
    }
    if b >= 1.0 {
        return [0.0, 1.0];
    }
    let c2 = (1.0 - b) * params.k_sh / ((1.0 - b) * params.k_sh + b * params.k_n);
    [libm::sqrt(c2), libm::sqrt(1.0 - c2)]
}

/// Load-controlled fatigue cycling of a single cohesive point until the
/// energy damage reaches one (through the static-envelope cascade) or the
/// cycle budget runs out.
pub fn run_point_fatigue(cfg: &PointFatigueConfig) -> Result<PointRunResult, DriverError> {
    let p = &cfg.params;
    let env = fczm::mixed_envelope(cfg.mixity, p).map_err(SolveFailure::Constitutive)?;
    let dir = mixity_direction(p, cfg.mixity);
    let peak_traction = cfg.severity * env.f_b;
    let mut state = CohesiveState::new(cfg.r_ratio);
    state.frozen_fatigue = false;
    let mut n = 0.0f64;
    let mut dn = cfg.dn_init;
    let mut steps = 0usize;

    // equivalent traction at a trial jump, with derivative in the jump
    let sigma_eq = |st: &CohesiveState,
                    ctx: &StepContext,
                    d: f64|
     -> Result<(f64, f64), SolveFailure> {
        let dd = Dual2::seed(d, 0);
        let jump = [dd * Dual2::c(dir[0]), dd * Dual2::c(dir[1])];
        let r = fczm::response_g::<Dual2>(p, st, ctx, jump).map_err(SolveFailure::Constitutive)?;
        let one = Dual2::c(1.0);
        let sig = (one - r.d_stiff) * Dual2::c(env.k_b) * r.delta;
        Ok((sig.v, sig.d[0]))
    };
    // load-controlled scalar Newton: jump magnitude at a target traction,
    // started from the committed-state secant estimate (the exact root
    // while no new damage grows)
    let equilibrate = |st: &CohesiveState,
                       ctx: &StepContext,
                       target: f64|
     -> Result<(f64, usize), SolveFailure> {
        let ds = fczm::stiffness_damage(st.damage, env.delta0, env.deltaf);
        let keep = (1.0 - ds).max(1e-12);
        let mut d = target / (keep * env.k_b);
        for it in 1..=cfg.solver.n_iter_max {
            let (sig, dsig) = sigma_eq(st, ctx, d)?;
            let resid = sig - target;
            if abs(resid) <= cfg.solver.tol_rel * target.max(1e-14) {
                return Ok((d, it));
            }
            if dsig <= 0.0 || !dsig.is_finite() {
                // past the limit point: no equilibrium on this branch
                return Err(SolveFailure::Diverged { iterations: it });
            }
            let mut next = d - resid / dsig;
            if next <= 0.0 {
                next = 0.5 * d;
            }
            if next > 4.0 * d {
                next = 4.0 * d;
            }
            d = next;
        }
        Err(SolveFailure::Diverged {
            iterations: cfg.solver.n_iter_max,
        })
    };
    let commit_at = |st: &mut CohesiveState,
                     ctx: &StepContext,
                     d: f64|
     -> Result<fczm::CohesiveUpdate, SolveFailure> {
        let upd = fczm::evaluate(p, st, ctx, [d * dir[0], d * dir[1]])
            .map_err(SolveFailure::Constitutive)?;
        st.commit(&upd, p);
        Ok(upd)
    };

    // static ramp to the peak (fatigue frozen)
    {
        let ctx = StepContext::STATIC;
        let (d, _) = equilibrate(&state, &ctx, peak_traction).map_err(DriverError::Solver)?;
        commit_at(&mut state, &ctx, d)?;
    }

    let mut jumps_since_control = 0usize;
    loop {
        if n >= cfg.n_max {
            return Ok(PointRunResult {
                n_fail: cfg.n_max,
                censored: true,
                d_final: state.damage,
                steps,
            });
        }
        // control cycle every block: min and max solves with frozen
        // fatigue, severity capture, local ratio update, rate refresh
        if jumps_since_control == 0 {
            let ctx = StepContext::STATIC;
            let (dmin, _) = equilibrate(&state, &ctx, cfg.r_ratio * peak_traction)
                .map_err(DriverError::Solver)?;
            let upd_min = commit_at(&mut state, &ctx, dmin)?;
            state.record_severity_min([
                upd_min.traction[0] / p.f_n,
                upd_min.traction[1] / p.f_sh,
            ]);
            let dmax = match equilibrate(&state, &ctx, peak_traction) {
                Ok((d, _)) => d,
                Err(SolveFailure::Diverged { .. })
                    if cfg.severity >= (1.0 - state.damage) * 0.98 =>
                {
                    // the committed damage sits on the static envelope:
                    // reloading to the peak cascades to full failure
                    return Ok(PointRunResult {
                        n_fail: n,
                        censored: false,
                        d_final: 1.0,
                        steps,
                    });
                }
                Err(e) => return Err(DriverError::Solver(e)),
            };
            let upd_max = commit_at(&mut state, &ctx, dmax)?;
            state.record_severity_max([
                upd_max.traction[0] / p.f_n,
                upd_max.traction[1] / p.f_sh,
            ]);
            state.finalize_ratio(cfg.r_ratio);
            // re-commit at the peak so the rate cache carries the new ratio
            commit_at(&mut state, &ctx, dmax)?;
        }

        // one cycle jump at peak load
        loop {
            let dn_eff = dn
                .min(cfg.dn_rel_max * n.max(cfg.dn_init / cfg.dn_rel_max))
                .min(cfg.n_max - n)
                .max(cfg.dn_min);
            let ctx = StepContext::cycle_jump(dn_eff);
            match equilibrate(&state, &ctx, peak_traction) {
                Ok((d, iters)) => {
                    commit_at(&mut state, &ctx, d)?;
                    n += dn_eff;
                    steps += 1;
                    dn = adapt_step(dn_eff, iters, &cfg.solver, cfg.dn_min, f64::MAX);
                    if state.damage >= 1.0 {
                        return Ok(PointRunResult {
                            n_fail: n,
                            censored: false,
                            d_final: 1.0,
                            steps,
                        });
                    }
                    break;
                }
                Err(SolveFailure::Diverged { .. }) => {
                    dn = dn_eff * cfg.solver.c_red;
                    if dn < cfg.dn_min {
                        // no admissible increment: the point sits at the
                        // static envelope and the next cycle cascades
                        if cfg.severity >= (1.0 - state.damage) * 0.98 {
                            return Ok(PointRunResult {
                                n_fail: n,
                                censored: false,
                                d_final: 1.0,
                                steps,
                            });
                        }
                        return Err(DriverError::Stalled {
                            phase: Phase::CycleJump,
                            detail: alloc::format!(
                                "point driver stalled at N={n}, D={}",
                                state.damage
                            ),
                        });
                    }
                }
                Err(e) => return Err(DriverError::Solver(e)),
            }
        }
        jumps_since_control = (jumps_since_control + 1) % cfg.jumps_per_block;
    }
}
