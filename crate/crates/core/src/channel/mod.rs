//! Satellite-to-ground turbulent channel: atmospheric profile, slab
//! layout, phase screens and multi-plane propagation.

mod atmosphere;
mod propagate;
mod quad;
mod screen;
mod slabs;

pub use atmosphere::{
    bufton_wind, cn2_profile, fried_parameter, rms_wind, rytov_variance, scintillation_index,
    AtmosphereProfile, HeightReference,
};
pub use propagate::{
    propagate, propagate_vacuum, transmissivity, ChannelGeometry, ChannelRealization, GridPlan,
    Plane, Propagated, Propagator,
};
pub use quad::integrate;
pub use screen::{synthesize_screen, PhaseScreen, ScreenDiagnostic, ScreenParams, ScreenSynth};
pub use slabs::{partition_slabs, Slab, SlabPartition, DEFAULT_SCREEN_BUDGET};

use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid atmosphere profile: {0}")]
    InvalidProfile(String),
    #[error("empty altitude interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("slab constraints not satisfiable with at most {budget} screens")]
    Unsatisfiable { budget: usize },
    #[error("invalid screen parameters: {0}")]
    InvalidScreen(String),
    #[error("{lost:.2}% of the beam energy left the grid (limit {limit:.1}%)")]
    Aliasing { lost: f64, limit: f64 },
    #[error("field does not match the channel source grid")]
    SourceGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
}
