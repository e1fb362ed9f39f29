//! Desk-scale neural radiance field: positional encoding, a small MLP with
//! analytic gradients, stochastic ray sampling, volume rendering, local
//! training, image rendering and PSNR.

pub mod camera;
pub mod encoding;
pub mod mlp;
pub mod render;
pub mod train;

pub use camera::{psnr, CameraPose, PosedImage};
pub use encoding::{positional_encode, EncodingConfig};
pub use mlp::{mlp_forward, ModelParams};
pub use render::{render_image, sample_along_ray, volume_render, RenderConfig};
pub use train::{local_train, loss_and_gradient, OptimizerSettings, OptimizerState, RayBatch};
