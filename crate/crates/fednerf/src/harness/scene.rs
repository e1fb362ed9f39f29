//! Procedural scene: Lambertian spheres ray-traced from a camera ring, so
//! the repository carries its own ground-truth dataset with known geometry.

use crate::error::{Error, Result};
use crate::nerf::{CameraPose, PosedImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
    /// Linear RGB in [0, 1].
    pub albedo: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub spheres: Vec<SphereSpec>,
    /// Unit vector pointing toward the light.
    pub light_dir: [f64; 3],
    /// Radius of the camera ring around the origin.
    pub ring_radius: f64,
    /// Camera elevation above the horizontal plane, degrees.
    pub elevation_deg: f64,
    pub n_train_views_total: usize,
    pub n_test_views: usize,
    pub width: u32,
    pub height: u32,
    /// Focal length in pixels; `1.2 * width` when omitted.
    pub focal: Option<f64>,
    /// Extra spheres placed by the generation seed.
    pub n_random_spheres: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            spheres: vec![
                SphereSpec {
                    center: [0.0, 0.0, 0.0],
                    radius: 0.45,
                    albedo: [0.85, 0.85, 0.85],
                },
                SphereSpec {
                    center: [0.85, 0.0, 0.10],
                    radius: 0.22,
                    albedo: [0.90, 0.15, 0.15],
                },
                SphereSpec {
                    center: [-0.601, 0.601, -0.10],
                    radius: 0.22,
                    albedo: [0.15, 0.85, 0.20],
                },
                SphereSpec {
                    center: [-0.85, 0.0, 0.15],
                    radius: 0.22,
                    albedo: [0.20, 0.30, 0.90],
                },
                SphereSpec {
                    center: [0.0, -0.85, -0.05],
                    radius: 0.22,
                    albedo: [0.90, 0.80, 0.15],
                },
                // Three small spheres tucked against the central sphere
                // around azimuth 66-92 deg. The central sphere hides them
                // from the cameras on the opposite arc of the ring, so no
                // single ring sector sees the whole scene and synthesizing
                // held-out views genuinely needs data from several clients.
                SphereSpec {
                    center: [0.2237, 0.5025, -0.16],
                    radius: 0.14,
                    albedo: [0.90, 0.20, 0.85],
                },
                SphereSpec {
                    center: [0.0955, 0.5416, 0.06],
                    radius: 0.14,
                    albedo: [0.95, 0.55, 0.10],
                },
                SphereSpec {
                    center: [-0.0192, 0.5497, -0.06],
                    radius: 0.14,
                    albedo: [0.10, 0.80, 0.85],
                },
            ],
            light_dir: [0.35, -0.25, 0.90],
            ring_radius: 3.0,
            elevation_deg: 10.0,
            n_train_views_total: 16,
            n_test_views: 1,
            width: 32,
            height: 32,
            focal: None,
            n_random_spheres: 0,
        }
    }
}

impl SceneSpec {
    pub fn focal(&self) -> f64 {
        self.focal.unwrap_or(1.2 * self.width as f64)
    }

    pub fn n_views(&self) -> usize {
        self.n_train_views_total + self.n_test_views
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.spheres.iter().enumerate() {
            if !(s.radius > 0.0) {
                return Err(Error::Config(format!("scene sphere {i} has radius {}", s.radius)));
            }
            if !s.albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(Error::Config(format!("scene sphere {i} albedo outside [0, 1]")));
            }
            let dist = (s.center.iter().map(|c| c * c).sum::<f64>()).sqrt();
            if dist + s.radius >= self.ring_radius {
                return Err(Error::Config(format!(
                    "scene sphere {i} reaches {:.3}, camera ring radius is {}",
                    dist + s.radius,
                    self.ring_radius
                )));
            }
        }
        let l = self.light_dir;
        if (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt() < 1e-9 {
            return Err(Error::Config("scene light_dir is the zero vector".into()));
        }
        if self.n_views() == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Config("scene needs at least one view and nonzero size".into()));
        }
        if self.elevation_deg.abs() >= 90.0 {
            return Err(Error::Config("camera elevation must stay below the pole".into()));
        }
        Ok(())
    }

    /// Effective spheres: the configured ones plus `n_random_spheres` placed
    /// by the seeded stream.
    fn spheres_for_seed(&self, rng: &mut impl Rng) -> Vec<SphereSpec> {
        let mut spheres = self.spheres.clone();
        for _ in 0..self.n_random_spheres {
            let az = rng.gen_range(0.0..std::f64::consts::TAU);
            let dist = rng.gen_range(0.4..0.9) * self.ring_radius * 0.35;
            spheres.push(SphereSpec {
                center: [dist * az.cos(), dist * az.sin(), rng.gen_range(-0.25..0.25)],
                radius: rng.gen_range(0.08..0.2),
                albedo: [rng.gen(), rng.gen(), rng.gen()],
            });
        }
        spheres
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pose of ring view `index` out of `n_views`: evenly spaced azimuths,
/// fixed elevation, camera aimed at the origin with world +z as up.
pub fn ring_pose(spec: &SceneSpec, index: usize) -> CameraPose {
    let az = std::f64::consts::TAU * index as f64 / spec.n_views() as f64;
    let el = spec.elevation_deg.to_radians();
    let pos = [
        spec.ring_radius * az.cos() * el.cos(),
        spec.ring_radius * az.sin() * el.cos(),
        spec.ring_radius * el.sin(),
    ];
    // Camera axes in world coordinates; camera looks down -z_c at the origin.
    let z_c = normalize(pos);
    let x_c = normalize(cross([0.0, 0.0, 1.0], z_c));
    let y_c = cross(z_c, x_c);
    let mut c2w = [[0.0; 4]; 4];
    for r in 0..3 {
        c2w[r][0] = x_c[r];
        c2w[r][1] = y_c[r];
        c2w[r][2] = z_c[r];
        c2w[r][3] = pos[r];
    }
    c2w[3] = [0.0, 0.0, 0.0, 1.0];
    CameraPose {
        c2w,
        focal: spec.focal(),
        width: spec.width,
        height: spec.height,
    }
}

/// Nearest positive ray-sphere intersection, if any.
fn hit_sphere(origin: [f64; 3], dir: [f64; 3], sphere: &SphereSpec) -> Option<f64> {
    let oc = [
        origin[0] - sphere.center[0],
        origin[1] - sphere.center[1],
        origin[2] - sphere.center[2],
    ];
    let b = dot(oc, dir);
    let c = dot(oc, oc) - sphere.radius * sphere.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = -b - sq;
    if t > 1e-9 {
        return Some(t);
    }
    let t = -b + sq;
    (t > 1e-9).then_some(t)
}

/// Diffuse shading for the given pixel ray: albedo of the nearest sphere
/// scaled by the Lambert factor, black when nothing is hit.
fn shade(origin: [f64; 3], dir: [f64; 3], spheres: &[SphereSpec], light: [f64; 3]) -> [f64; 3] {
    let mut nearest: Option<(f64, &SphereSpec)> = None;
    for s in spheres {
        if let Some(t) = hit_sphere(origin, dir, s) {
            if nearest.map_or(true, |(tn, _)| t < tn) {
                nearest = Some((t, s));
            }
        }
    }
    let Some((t, sphere)) = nearest else {
        return [0.0, 0.0, 0.0];
    };
    let p = [
        origin[0] + t * dir[0],
        origin[1] + t * dir[1],
        origin[2] + t * dir[2],
    ];
    let normal = normalize([
        p[0] - sphere.center[0],
        p[1] - sphere.center[1],
        p[2] - sphere.center[2],
    ]);
    let lambert = dot(normal, light).max(0.0);
    [
        sphere.albedo[0] * lambert,
        sphere.albedo[1] * lambert,
        sphere.albedo[2] * lambert,
    ]
}

/// Quantize a channel to the 8-bit grid used by the PPM files, so in-memory
/// datasets and datasets written to disk carry identical values.
pub fn quantize_channel(v: f64) -> f64 {
    ((v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8) as f64 / 255.0
}

/// Ray-trace every ring view. Deterministic per `(spec, seed)`.
pub fn generate_views(spec: &SceneSpec, seed: u64) -> Result<Vec<PosedImage>> {
    spec.validate()?;
    let mut rng = crate::rng::stream(seed, crate::rng::Domain::Scene, 0, 0);
    let spheres = spec.spheres_for_seed(&mut rng);
    let light = normalize(spec.light_dir);
    let mut views = Vec::with_capacity(spec.n_views());
    for index in 0..spec.n_views() {
        let pose = ring_pose(spec, index);
        let origin = pose.position();
        let mut pixels = Vec::with_capacity((spec.width * spec.height) as usize);
        for row in 0..spec.height {
            for col in 0..spec.width {
                let dir = pose.ray_direction(row, col);
                let rgb = shade(origin, dir, &spheres, light);
                pixels.push(rgb.map(quantize_channel));
            }
        }
        views.push(PosedImage { pose, pixels });
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_validates_and_generates() {
        let spec = SceneSpec::default();
        let views = generate_views(&spec, 1).unwrap();
        assert_eq!(views.len(), 17);
        for v in &views {
            v.validate().unwrap();
        }
        // The scene is not all black from the first view.
        assert!(views[0].pixels.iter().any(|p| p.iter().any(|&c| c > 0.0)));
    }

    #[test]
    fn empty_scene_renders_black() {
        let spec = SceneSpec {
            spheres: vec![],
            n_random_spheres: 0,
            ..SceneSpec::default()
        };
        let views = generate_views(&spec, 3).unwrap();
        for v in views {
            assert!(v.pixels.iter().all(|p| *p == [0.0, 0.0, 0.0]));
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = SceneSpec {
            n_random_spheres: 3,
            ..SceneSpec::default()
        };
        let a = generate_views(&spec, 9).unwrap();
        let b = generate_views(&spec, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_views(&spec, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn center_pixel_of_head_on_view_matches_hand_computation() {
        // A single sphere at the origin, camera on the ring with odd image
        // dimensions so one pixel center crosses the principal point.
        // Albedo chosen so no channel lands on a half-step of the 8-bit
        // grid, where one ulp of shading difference would flip the bucket.
        let spec = SceneSpec {
            spheres: vec![SphereSpec {
                center: [0.0, 0.0, 0.0],
                radius: 0.5,
                albedo: [0.8, 0.4, 0.24],
            }],
            light_dir: [0.0, 0.0, 1.0],
            elevation_deg: 30.0,
            width: 9,
            height: 9,
            n_train_views_total: 4,
            n_test_views: 0,
            n_random_spheres: 0,
            ..SceneSpec::default()
        };
        let views = generate_views(&spec, 0).unwrap();
        let view = &views[0];
        let center = view.pixels[(4 * 9 + 4) as usize];
        // The center ray runs from the camera straight through the origin,
        // hitting the sphere where the normal points back at the camera.
        let pos = ring_pose(&spec, 0).position();
        let normal = normalize(pos);
        let lambert = dot(normal, normalize(spec.light_dir)).max(0.0);
        let expect = [0.8 * lambert, 0.4 * lambert, 0.24 * lambert].map(quantize_channel);
        for k in 0..3 {
            assert!(
                (center[k] - expect[k]).abs() < 1e-12,
                "channel {k}: {} vs {}",
                center[k],
                expect[k]
            );
        }
    }

    #[test]
    fn ring_poses_are_valid_and_aimed_at_the_origin() {
        let spec = SceneSpec::default();
        for i in 0..spec.n_views() {
            let pose = ring_pose(&spec, i);
            pose.validate().unwrap();
            // Center of the image looks back toward the origin.
            let d = pose.ray_direction(spec.height / 2, spec.width / 2);
            let pos = pose.position();
            let toward_origin = normalize([-pos[0], -pos[1], -pos[2]]);
            assert!(dot(d, toward_origin) > 0.99);
        }
    }

    #[test]
    fn sphere_reaching_the_ring_is_rejected() {
        let spec = SceneSpec {
            spheres: vec![SphereSpec {
                center: [2.9, 0.0, 0.0],
                radius: 0.5,
                albedo: [1.0, 1.0, 1.0],
            }],
            ..SceneSpec::default()
        };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }
}
