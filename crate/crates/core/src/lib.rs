//! Simulator for the optical readout of a steady-state magnon population.
//!
//! A magnon mode couples dispersively to a deformation phonon of the host
//! ferrimagnet; the phonon displacement is in turn coupled by radiation pressure
//! to a weakly and resonantly driven optical cavity. The phase quadrature of the
//! cavity output then tracks the magnon population. The crate covers the full
//! chain:
//!
//! * [`params`]: unit handling and derived drive strengths / thermal occupations.
//! * [`steady`]: the self-consistent classical fixed point, cavity quadratures
//!   and the linear phase meter.
//! * [`fluctuation`]: linearized noise dynamics, stability, phase noise spectra
//!   and the steady-state phase variance.
//! * [`sensing`]: signal-to-noise ratio, magnon resolution and parameter sweeps.
//! * [`magnetoelastic`]: the magnon-phonon coupling strength computed from a
//!   mechanical mode shape.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fluctuation;
pub mod magnetoelastic;
pub mod params;
pub mod sensing;
pub mod steady;

pub use error::{Error, Result};
pub use params::{RawConfig, SystemParams};
