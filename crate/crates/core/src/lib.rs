//! Steady-state spectra of two-level emitter ensembles coupled to optical
//! resonators.
//!
//! Four descriptions of the same system live side by side:
//!
//! * the cascaded real-space model, where the intracavity field passes the
//!   emitters one after another and picks up the single-pass transmission
//!   `t_N` on every roundtrip ([`spectrum::reflection_cascaded`]),
//! * the single-mode Jaynes-/Tavis-Cummings model ([`spectrum::reflection_singlemode`]),
//! * the multimode Tavis-Cummings model ([`resonance::tc_multimode_eigenfrequencies`]),
//! * a brute-force linear solve of the coupled field/emitter amplitudes
//!   ([`oracle::solve_coupled_system`]) used to cross-check the closed forms.
//!
//! Rates (`gamma`, `g`, `kappa`, detunings) are angular frequencies in rad/s.
//! The free spectral range `nu_fsr` is the inverse roundtrip time in Hz, so
//! the propagation phase of one roundtrip is `delta_c / nu_fsr`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod resonance;
pub mod roots;
pub mod simplex;
pub mod spectrum;
pub mod transfer;

pub use error::{Error, Result};
pub use params::{DetuningPoint, EmitterEnsemble, Geometry, Regime, ResonatorConfig};
