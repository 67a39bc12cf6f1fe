//! Monte-Carlo harnesses: scenario generators, phase-transition sweeps,
//! cone-distance estimates, numerical oracles for the auxiliary inequalities
//! and the wavelet noise sweep.

mod lemmas;
mod noise;
mod phase;
mod scenario;
mod width;

pub use lemmas::{
    equal_block_ratio, rotated_blocks, two_lines, verify_ball_bound, verify_chisq_max, verify_lemmas,
    verify_projection_energy, BallCheck, ChisqCheck, EnergyCheck, LemmaReport,
};
pub use noise::{run_noise_sweep, NoiseRow, NoiseSweep, NoiseSweepConfig, NoiseTrial};
pub use phase::{
    find_threshold, run_phase, run_trial, trial_seed, PhaseCell, PhaseConfig, PhaseDiagram, ThresholdResult,
    ThresholdSearch, TrialRow,
};
pub use scenario::{generate_signal, signal_on_groups, ScenarioKind, ScenarioSpec, SparseSignal, ValueDist};
pub use width::{construction_dist_sq, estimate_width_ub, WidthEstimate};
