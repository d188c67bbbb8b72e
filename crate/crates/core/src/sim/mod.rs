//! Lumped-parameter simulation of impact vibrations travelling from a
//! fingertip through the hand into the socket sensors.

mod archive;
mod impact;
mod model;
pub mod network;

pub use archive::{SimArchive, ARCHIVE_VERSION};
pub use impact::{
    batch_simulate, impact_force_shape_stats, impact_network, impact_seed, simulate_impact, ForceShape, ImpactMode,
    ImpactorConfig, LabeledOutput, SimOutput,
};
pub use model::{
    build_hand_model, proximal_body, FingertipPad, shell_body, socket_angle, tip_body, HandArchetype, HandModel, LinkRole,
    PresetTable, SensorSpec, DEFAULT_FULL_SCALE, DEFAULT_INTERNAL_STEP, DEFAULT_NOISE_STD, N_HAND_BODIES, PALM,
    PRESET_SOURCE, PRESET_VERSION, SOCKET_BASE, WRIST,
};
pub use network::{Body, Contact, GroundLink, Integrator, Link, Network, Vec3};
