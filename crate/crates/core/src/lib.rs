//! Light field reconstruction from focal-plane-sweeping image stacks.
//!
//! A focal stack `I(x, y, z_m)` is turned into a 4D light field
//! `L(x, y, ξ, η)` by shift-and-sum back-projection ([`backprojection`]).
//! Out-of-focus blur in the captures accumulates into the reconstruction as
//! defocus noise; [`focus`] suppresses it by keeping every pixel only in the
//! capture where a Gaussian-smoothed Laplacian says it is sharpest.
//!
//! The remaining modules build synthetic scenes and their exact light fields
//! ([`scene`]), simulate captures with a Gaussian defocus PSF ([`capture`]),
//! render refocused images and EPIs ([`render`]), and measure quality
//! ([`metrics`]). [`io`], [`config`] and [`experiment`] handle files,
//! JSON experiment descriptions and the parameter sweeps behind the `lfbp`
//! command-line tool.

pub mod backprojection;
pub mod capture;
pub mod config;
pub mod convolve;
pub mod error;
pub mod experiment;
pub mod focus;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod render;
pub mod scene;
pub mod types;

pub use backprojection::{angular_sampling_from_camera, reconstruct};
pub use capture::{capture, capture_sweep_plan, clear_stack, psf_kernel, PsfModel};
pub use convolve::LaplacianStencil;
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use experiment::Method;
pub use focus::{depth_index_map, edge_response, filter_stack, filtered_reconstruct, focus_filter, DepthIndexMap, FilterParams};
pub use metrics::{noise_split, psnr, NoiseSplit};
pub use render::{extract_epi, fit_epi_line, refocus, EpiLine};
pub use scene::{exact_light_field, make_three_plane_scene, SyntheticScene};
pub use types::{AngularSampling, FocalStack, Image2D, LightField4D, ObjectScene, Samples, Validate};
