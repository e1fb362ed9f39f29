//! Model evaluation against a dataset directory.

use crate::error::{Error, Result};
use crate::harness::dataset::load_dataset;
use crate::nerf::{psnr, render_image, EncodingConfig, ModelParams, RenderConfig};
use std::path::Path;

/// Render each listed view with `params` and return the mean PSNR against
/// the stored images.
pub fn evaluate_views(
    params: &ModelParams,
    dataset_dir: &Path,
    view_ids: &[usize],
    render_cfg: &RenderConfig,
    enc_cfg: &EncodingConfig,
) -> Result<f64> {
    if view_ids.is_empty() {
        return Err(Error::Contract("evaluation needs at least one view id".into()));
    }
    if params.input_dim() != enc_cfg.encoded_dim() {
        return Err(Error::Contract(format!(
            "model expects input dim {}, encoding produces {}",
            params.input_dim(),
            enc_cfg.encoded_dim()
        )));
    }
    let views = load_dataset(dataset_dir)?;
    let mut sum = 0.0;
    for &id in view_ids {
        let view = views.get(id).ok_or_else(|| {
            Error::Contract(format!(
                "view {id} not in dataset ({} views available)",
                views.len()
            ))
        })?;
        let rendered = render_image(params, &view.pose, render_cfg, enc_cfg)?;
        sum += psnr(&rendered, view)?;
    }
    Ok(sum / view_ids.len() as f64)
}
