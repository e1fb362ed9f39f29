//! Camera poses, posed images and the PSNR metric.
//!
//! Axis convention: camera space is right-handed with x right, y up, and the
//! camera looking down -z. Pixel (0, 0) is the top-left corner; the
//! principal point sits at the image center.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    /// Camera-to-world transform, row-major. Upper-left 3x3 is the rotation
    /// (columns are the camera axes in world coordinates), last column the
    /// camera position, bottom row exactly (0, 0, 0, 1).
    pub c2w: [[f64; 4]; 4],
    /// Focal length in pixels.
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.focal > 0.0) {
            return Err(Error::Contract(format!(
                "camera intrinsics invalid: {}x{} focal {}",
                self.width, self.height, self.focal
            )));
        }
        if self.c2w[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Contract("camera pose bottom row is not (0,0,0,1)".into()));
        }
        for r in 0..3 {
            let row = &self.c2w[r];
            let norm = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
            if (norm - 1.0).abs() > 1e-4 {
                return Err(Error::Contract(format!(
                    "camera rotation row {r} has norm {norm}"
                )));
            }
            for r2 in r + 1..3 {
                let other = &self.c2w[r2];
                let d = row[0] * other[0] + row[1] * other[1] + row[2] * other[2];
                if d.abs() > 1e-4 {
                    return Err(Error::Contract(format!(
                        "camera rotation rows {r} and {r2} not orthogonal (dot {d})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn position(&self) -> [f64; 3] {
        [self.c2w[0][3], self.c2w[1][3], self.c2w[2][3]]
    }

    /// Unit direction of the ray through the center of pixel (row, col).
    pub fn ray_direction(&self, row: u32, col: u32) -> [f64; 3] {
        let x = (col as f64 + 0.5 - self.width as f64 / 2.0) / self.focal;
        let y = -(row as f64 + 0.5 - self.height as f64 / 2.0) / self.focal;
        let z = -1.0;
        // World direction: R * d_cam, R being the upper-left 3x3 of c2w.
        let mut d = [0.0f64; 3];
        for r in 0..3 {
            d[r] = self.c2w[r][0] * x + self.c2w[r][1] * y + self.c2w[r][2] * z;
        }
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / norm, d[1] / norm, d[2] / norm]
    }

    pub fn c2w_flat(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            out[4 * r..4 * r + 4].copy_from_slice(&self.c2w[r]);
        }
        out
    }

    pub fn c2w_from_flat(flat: &[f64; 16]) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for r in 0..4 {
            m[r].copy_from_slice(&flat[4 * r..4 * r + 4]);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosedImage {
    pub pose: CameraPose,
    /// Row-major linear RGB in [0, 1], length `width * height`.
    pub pixels: Vec<[f64; 3]>,
}

impl PosedImage {
    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        let expect = self.pose.width as usize * self.pose.height as usize;
        if self.pixels.len() != expect {
            return Err(Error::Contract(format!(
                "image has {} pixels, pose says {}x{}",
                self.pixels.len(),
                self.pose.width,
                self.pose.height
            )));
        }
        if !self
            .pixels
            .iter()
            .all(|p| p.iter().all(|c| (0.0..=1.0).contains(c)))
        {
            return Err(Error::Contract("image channel outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Peak signal-to-noise ratio in dB over all pixels and channels, with
/// MAX = 1. Near-identical images (MSE below 1e-10) return the 100 dB cap so
/// logs never carry infinities.
pub fn psnr(a: &PosedImage, b: &PosedImage) -> Result<f64> {
    if a.pose.width != b.pose.width || a.pose.height != b.pose.height {
        return Err(Error::Contract(format!(
            "psnr dimension mismatch: {}x{} vs {}x{}",
            a.pose.width, a.pose.height, b.pose.width, b.pose.height
        )));
    }
    let mut sum = 0.0;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        for k in 0..3 {
            let d = pa[k] - pb[k];
            sum += d * d;
        }
    }
    let mse = sum / (a.pixels.len() as f64 * 3.0);
    if mse < 1e-10 {
        return Ok(100.0);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_image(w: u32, h: u32, value: f64) -> PosedImage {
        PosedImage {
            pose: CameraPose {
                c2w: [
                    [1.0, 0.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0, 0.0],
                    [0.0, 0.0, 1.0, 2.0],
                    [0.0, 0.0, 0.0, 1.0],
                ],
                focal: 10.0,
                width: w,
                height: h,
            },
            pixels: vec![[value; 3]; (w * h) as usize],
        }
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let a = flat_image(4, 4, 0.3);
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
    }

    #[test]
    fn black_vs_white_is_zero_db() {
        let a = flat_image(4, 4, 0.0);
        let b = flat_image(4, 4, 1.0);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn uniform_mse_closed_form() {
        let a = flat_image(8, 8, 0.5);
        let b = flat_image(8, 8, 0.6);
        // MSE = 0.01 -> 20 dB.
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = flat_image(4, 4, 0.1);
        let b = flat_image(4, 4, 0.7);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn psnr_rejects_mismatched_dims() {
        let a = flat_image(4, 4, 0.1);
        let b = flat_image(4, 5, 0.1);
        assert!(matches!(psnr(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn center_pixel_looks_down_minus_z() {
        // Odd width/height put a pixel center exactly on the principal point.
        let pose = CameraPose {
            c2w: [
                [0.0, 0.0, 1.0, 3.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.5],
                [0.0, 0.0, 0.0, 1.0],
            ],
            focal: 20.0,
            width: 9,
            height: 9,
        };
        pose.validate().unwrap();
        let d = pose.ray_direction(4, 4);
        // -z column of the rotation: -(c2w[r][2]) for r in 0..3.
        let expect = [-pose.c2w[0][2], -pose.c2w[1][2], -pose.c2w[2][2]];
        for k in 0..3 {
            assert!((d[k] - expect[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn validate_rejects_non_orthonormal_rotation() {
        let mut pose = flat_image(2, 2, 0.0).pose;
        pose.c2w[0][0] = 1.5;
        assert!(pose.validate().is_err());
        let mut pose2 = flat_image(2, 2, 0.0).pose;
        pose2.c2w[3][3] = 2.0;
        assert!(pose2.validate().is_err());
    }
}
