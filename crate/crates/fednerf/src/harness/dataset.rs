//! Dataset files (binary PPM images plus a `transforms.json` manifest) and
//! the per-client view partition.

use crate::error::{Error, Result};
use crate::harness::scene::{generate_views, SceneSpec};
use crate::nerf::{CameraPose, PosedImage};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub file: String,
    /// Camera-to-world matrix, 16 numbers row-major.
    pub c2w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<ManifestFrame>,
}

/// Write `image` as binary PPM (P6, maxval 255), channels mapped from
/// [0, 1] with round-half-up.
pub fn write_ppm(path: &Path, image: &PosedImage) -> Result<()> {
    let (w, h) = (image.pose.width, image.pose.height);
    let mut buf = Vec::with_capacity(20 + image.pixels.len() * 3);
    buf.extend_from_slice(format!("P6\n{w} {h}\n255\n").as_bytes());
    for p in &image.pixels {
        for k in 0..3 {
            buf.push((p[k].clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8);
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Read a binary PPM written by [`write_ppm`] (or any P6 file with
/// maxval 255). `#` comments in the header are tolerated.
pub fn read_ppm(path: &Path, pose: CameraPose) -> Result<PosedImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Config(format!("{}: {what}", path.display()));

    let mut at = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and comments.
        loop {
            while at < bytes.len() && bytes[at].is_ascii_whitespace() {
                at += 1;
            }
            if at < bytes.len() && bytes[at] == b'#' {
                while at < bytes.len() && bytes[at] != b'\n' {
                    at += 1;
                }
            } else {
                break;
            }
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(Error::Config(format!("{}: truncated header", path.display())));
        }
        Ok(String::from_utf8_lossy(&bytes[start..at]).into_owned())
    };

    if token(&bytes)? != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let w: u32 = token(&bytes)?.parse().map_err(|_| bad("bad width"))?;
    let h: u32 = token(&bytes)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: u32 = token(&bytes)?.parse().map_err(|_| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    at += 1; // single whitespace after maxval
    let expect = w as usize * h as usize * 3;
    if bytes.len() < at + expect {
        return Err(bad("pixel payload truncated"));
    }
    if w != pose.width || h != pose.height {
        return Err(Error::Config(format!(
            "{}: image is {w}x{h}, manifest says {}x{}",
            path.display(),
            pose.width,
            pose.height
        )));
    }
    let mut pixels = Vec::with_capacity(w as usize * h as usize);
    for chunk in bytes[at..at + expect].chunks_exact(3) {
        pixels.push([
            chunk[0] as f64 / 255.0,
            chunk[1] as f64 / 255.0,
            chunk[2] as f64 / 255.0,
        ]);
    }
    Ok(PosedImage { pose, pixels })
}

/// Ray-trace the scene and write it as a dataset directory:
/// `view_####.ppm` files plus `transforms.json`.
pub fn generate_scene(spec: &SceneSpec, seed: u64, out_dir: &Path) -> Result<Vec<PosedImage>> {
    let views = generate_views(spec, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut frames = Vec::with_capacity(views.len());
    for (i, view) in views.iter().enumerate() {
        let name = format!("view_{i:04}.ppm");
        write_ppm(&out_dir.join(&name), view)?;
        frames.push(ManifestFrame {
            file: name,
            c2w: view.pose.c2w_flat().to_vec(),
        });
    }
    let manifest = Manifest {
        focal: spec.focal(),
        width: spec.width,
        height: spec.height,
        frames,
    };
    let manifest_path = out_dir.join("transforms.json");
    let mut file = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(views)
}

/// Load a dataset directory written by [`generate_scene`].
pub fn load_dataset(dir: &Path) -> Result<Vec<PosedImage>> {
    let manifest_path = dir.join("transforms.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
    let mut views = Vec::with_capacity(manifest.frames.len());
    for frame in &manifest.frames {
        if frame.c2w.len() != 16 {
            return Err(Error::Config(format!(
                "{}: frame {} c2w has {} numbers, expected 16",
                manifest_path.display(),
                frame.file,
                frame.c2w.len()
            )));
        }
        let mut flat = [0.0; 16];
        flat.copy_from_slice(&frame.c2w);
        let pose = CameraPose {
            c2w: CameraPose::c2w_from_flat(&flat),
            focal: manifest.focal,
            width: manifest.width,
            height: manifest.height,
        };
        pose.validate()?;
        views.push(read_ppm(&dir.join(&frame.file), pose)?);
    }
    Ok(views)
}

/// Split the ring views into contiguous per-client sectors. Client `i`
/// takes views `[i * views_per_client, (i + 1) * views_per_client)`; every
/// view after the training block is held out for testing on the server.
pub fn partition_views(
    views: &[PosedImage],
    n_clients: u32,
    views_per_client: u32,
) -> Result<(Vec<Vec<PosedImage>>, Vec<PosedImage>)> {
    let train_total = n_clients as usize * views_per_client as usize;
    if views.len() < train_total + 1 {
        return Err(Error::Contract(format!(
            "dataset has {} views, need {} training views plus at least one test view",
            views.len(),
            train_total
        )));
    }
    let clients: Vec<Vec<PosedImage>> = (0..n_clients as usize)
        .map(|i| {
            views[i * views_per_client as usize..(i + 1) * views_per_client as usize].to_vec()
        })
        .collect();
    let test = views[train_total..].to_vec();
    Ok((clients, test))
}

/// Paths of the files a run writes into its output directory.
pub fn run_paths(out_dir: &Path) -> RunPaths {
    RunPaths {
        metrics_csv: out_dir.join("metrics.csv"),
        model_bin: out_dir.join("model.bin"),
        renders_dir: out_dir.join("renders"),
        params_dir: out_dir.join("params"),
        config_json: out_dir.join("config.json"),
    }
}

pub struct RunPaths {
    pub metrics_csv: PathBuf,
    pub model_bin: PathBuf,
    pub renders_dir: PathBuf,
    pub params_dir: PathBuf,
    pub config_json: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scene::SceneSpec;

    #[test]
    fn ppm_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec::default();
        let views = generate_views(&spec, 4).unwrap();
        let path = dir.path().join("v.ppm");
        write_ppm(&path, &views[0]).unwrap();
        let back = read_ppm(&path, views[0].pose.clone()).unwrap();
        // Scene pixels are already quantized to the 8-bit grid.
        assert_eq!(back, views[0]);
    }

    #[test]
    fn dataset_round_trip_and_bitwise_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec {
            width: 12,
            height: 10,
            n_train_views_total: 4,
            n_test_views: 1,
            ..SceneSpec::default()
        };
        let a_dir = dir.path().join("a");
        let b_dir = dir.path().join("b");
        let views = generate_scene(&spec, 7, &a_dir).unwrap();
        generate_scene(&spec, 7, &b_dir).unwrap();
        for entry in std::fs::read_dir(&a_dir).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(a_dir.join(&name)).unwrap();
            let b = std::fs::read(b_dir.join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs between identical runs");
        }
        let loaded = load_dataset(&a_dir).unwrap();
        assert_eq!(loaded.len(), views.len());
        for (l, v) in loaded.iter().zip(&views) {
            assert_eq!(l.pixels, v.pixels);
            assert!((l.pose.focal - v.pose.focal).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_matches_the_ring_layout() {
        let spec = SceneSpec::default(); // 17 views
        let views = generate_views(&spec, 1).unwrap();
        let (clients, test) = partition_views(&views, 4, 4).unwrap();
        assert_eq!(clients.len(), 4);
        for (i, c) in clients.iter().enumerate() {
            assert_eq!(c.len(), 4);
            for (j, v) in c.iter().enumerate() {
                assert_eq!(v, &views[i * 4 + j]);
            }
        }
        assert_eq!(test.len(), 1);
        assert_eq!(test[0], views[16]);
    }

    #[test]
    fn single_client_takes_all_training_views() {
        let spec = SceneSpec::default();
        let views = generate_views(&spec, 1).unwrap();
        let (clients, test) = partition_views(&views, 1, 16).unwrap();
        assert_eq!(clients[0].len(), 16);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let spec = SceneSpec::default();
        let views = generate_views(&spec, 2).unwrap();
        let (clients, test) = partition_views(&views, 4, 4).unwrap();
        let mut seen = Vec::new();
        for c in &clients {
            for v in c {
                assert!(!seen.contains(v), "view shared between clients");
                seen.push(v.clone());
            }
        }
        for t in &test {
            assert!(!seen.contains(t), "test view leaked into a client");
            seen.push(t.clone());
        }
        assert_eq!(seen.len(), views.len());
    }

    #[test]
    fn partition_rejects_insufficient_views() {
        let spec = SceneSpec::default();
        let views = generate_views(&spec, 1).unwrap();
        let err = partition_views(&views, 4, 5).unwrap_err();
        assert!(err.to_string().contains("17 views"), "{err}");
    }

    #[test]
    fn ppm_reader_survives_junk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ppm");
        let pose = generate_views(&SceneSpec::default(), 1).unwrap()[0].pose.clone();
        std::fs::write(&path, b"P5\n2 2\n255\n....").unwrap();
        assert!(read_ppm(&path, pose.clone()).is_err());
        std::fs::write(&path, b"P6\n2 2\n255\nxy").unwrap();
        assert!(read_ppm(&path, pose).is_err());
    }
}
