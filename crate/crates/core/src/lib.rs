//! Desk-scale event-to-video reconstruction built around an event- and
//! text-conditioned video diffusion model.
//!
//! The crate covers the full pipeline: a contrast-threshold event simulator
//! and voxel-grid representations ([`events`]), paired dataset construction
//! and clip sampling ([`data`]), an image/latent codec ([`codec`]), the
//! conditional denoiser with event-guided attention ([`model`]), diffusion
//! schedules, losses and samplers ([`diffusion`]), autoregressive
//! reconstruction ([`reconstruct`]), and evaluation metrics ([`metrics`]).
//! Training runs on a small self-contained autodiff engine ([`autograd`]).

pub mod error;

pub mod events;
pub mod metrics;
pub mod util;

pub use error::{Error, Result};
