//! Plane-stress finite-element simulation of progressive high-cycle fatigue
//! in composite laminates.
//!
//! The crate combines four ingredients:
//!
//! * [`fczm`] — a mixed-mode fatigue cohesive zone model with an S-N-based
//!   damage rate, implicit (trapezoidal) damage integration and a consistent
//!   tangent,
//! * [`ply`] — orthotropic plane-stress ply behavior with thermal strains and
//!   endurance-based matrix-crack initiation,
//! * [`xfem`] — phantom-node crack segments inserted parallel to the fiber
//!   direction, with a crack-spacing rule,
//! * [`driver`] — a four-phase cycle-jump scheduler (thermal, static ramp,
//!   control cycles, cycle jumps) that tracks local stress ratios.
//!
//! The crate is `no_std` (with `alloc`); all file formats, configuration and
//! the command line live in the companion `lamfat-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod driver;
pub mod fczm;
pub mod fem;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod ply;
pub mod xfem;
