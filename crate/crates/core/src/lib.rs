//! Generalized-pulse spectral shaping for OFDM.
//!
//! Pulses are designed offline per data carrier so that their energy inside
//! a set of protected bands is minimal, while a conventional receiver still
//! sees the original data. The crate covers the carrier and band model, the
//! pulse designer, the transmitters and the spectral measurements.

pub mod band;
pub mod band_energy;
pub mod carriers;
pub mod config;
pub mod design;
pub mod error;
pub mod pulse;
pub mod solver;
pub mod spectrum;
pub mod tx;
pub mod window;

pub use band::{BandSet, CarrierRange};
pub use band_energy::{band_energy, band_power, phi_entry, BandMatrix};
pub use carriers::{BandEdge, CarrierPlan, CcPolicy, EdgeSide, PlanRules, ReducedSet};
pub use config::{validate_guard, wrap_frequency, OfdmConfig};
pub use design::{
    build_cancellation_basis, build_transition_basis, design_pulse_set, design_pulse_set_with, fixed_window_design,
    preset, CarrierDesign, DesignInputs, Preset, PulseDesign, ScenarioFragment, TransitionCoefficients, TransitionKind,
    TransitionParams, TransitionSetup, WindowedSet,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use pulse::{basic_pulse, cyclic_extend_and_window, receiver_bins};
pub use solver::{ConstraintSpec, Gram, SolverOptions};
pub use spectrum::{
    analytic_psd, analytic_psd_conventional, carriers_exceeding_mask, check_mask, loss_report, nulling_baseline,
    papr_ccdf, papr_db, welch_psd, ComplianceReport, LossReport, MaskNotch, Normalization, NullingResult, PsdCurve,
    PsdModel, SpectralMask,
};
pub use tx::{
    complexity_report, demodulate, generate_stream, modulate_conventional, modulate_generalized_direct,
    modulate_generalized_fast, ComplexityReport, Constellation, FrameSource, Modulator, SymbolFrame, TxPath,
};
pub use window::{build_shaping_window, ShapingWindow, WindowKind};
