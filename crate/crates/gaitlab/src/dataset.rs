//! On-disk dataset layout: `<root>/<subject>/<sequence>/<frame>.png` (or
//! `.pgm`) with zero-padded integer frame names, described by a
//! `dataset.json` manifest at the root.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::silhouette::{mask_from_gray, GaitSequence};

/// Whether a manifest entry is enrolled or queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gallery,
    Probe,
}

/// One sequence of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject: String,
    pub sequence: String,
    pub condition: String,
    pub role: Role,
}

/// The `dataset.json` content: an array of entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

fn validate_id(id: &str, what: &str) -> Result<()> {
    if id.is_empty()
        || id.contains(['/', '\\', ',', '\n'])
        || id == "."
        || id == ".."
    {
        return Err(Error::Manifest(format!(
            "{what} `{id}` must be a non-empty path component without commas"
        )));
    }
    Ok(())
}

impl Manifest {
    pub fn from_json_str(text: &str) -> Result<Manifest> {
        let entries: Vec<ManifestEntry> = serde_json::from_str(text)
            .map_err(|e| Error::Manifest(format!("bad dataset.json: {e}")))?;
        let manifest = Manifest { entries };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest serialization cannot fail")
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            validate_id(&e.subject, "subject")?;
            validate_id(&e.sequence, "sequence")?;
            if self.entries[..i]
                .iter()
                .any(|o| o.subject == e.subject && o.sequence == e.sequence)
            {
                return Err(Error::DuplicateId(format!(
                    "{}/{}",
                    e.subject, e.sequence
                )));
            }
        }
        Ok(())
    }
}

/// Read `<root>/dataset.json`.
pub fn load_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join("dataset.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Manifest::from_json_str(&text)
}

/// Write `<root>/dataset.json`.
pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    let path = root.join("dataset.json");
    std::fs::write(&path, manifest.to_json_string()).map_err(|e| Error::io(&path, e))
}

fn decode_frame(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_luma8();
    mask_from_gray(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Discover, order and decode the frames of one sequence directory.
///
/// Every `.png`/`.pgm` file name must be an integer frame index; indices
/// must be consecutive (any starting value). Pixels above 127 are
/// foreground.
pub fn load_frames_dir(dir: &Path) -> Result<Vec<BinaryMask>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png") | Some("pgm")) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let index = stem.parse::<u64>().map_err(|_| {
            Error::Manifest(format!(
                "frame file `{}` is not named by an integer index",
                path.display()
            ))
        })?;
        indexed.push((index, path));
    }
    if indexed.is_empty() {
        return Err(Error::Manifest(format!(
            "no frame images found in {}",
            dir.display()
        )));
    }
    indexed.sort_by_key(|(i, _)| *i);
    for pair in indexed.windows(2) {
        if pair[1].0 == pair[0].0 {
            return Err(Error::Manifest(format!(
                "duplicate frame index {} in {}",
                pair[0].0,
                dir.display()
            )));
        }
        if pair[1].0 != pair[0].0 + 1 {
            return Err(Error::Manifest(format!(
                "gap in frame numbering between {} and {} in {}",
                pair[0].0,
                pair[1].0,
                dir.display()
            )));
        }
    }
    indexed.iter().map(|(_, path)| decode_frame(path)).collect()
}

/// Load one manifest entry as a [`GaitSequence`].
pub fn load_sequence(root: &Path, entry: &ManifestEntry) -> Result<GaitSequence> {
    let dir = root.join(&entry.subject).join(&entry.sequence);
    let frames = load_frames_dir(&dir)?;
    GaitSequence::new(
        frames,
        entry.subject.clone(),
        entry.sequence.clone(),
        entry.condition.clone(),
    )
}

/// Encode a mask as an 8-bit grayscale PNG (foreground = 255).
pub fn write_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, pixels)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Encode a `[0, 1]` grid as an 8-bit grayscale PNG via
/// `round(255 * value)`.
pub fn write_grid_png(grid: &Grid, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = grid
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(grid.width() as u32, grid.height() as u32, pixels)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Load an arbitrary grayscale image as a `[0, 1]` grid.
pub fn load_gray_grid(path: &Path) -> Result<Grid> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(
        w,
        h,
        img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect(),
    )
}

/// Write sequences and a manifest under `root`.
pub fn write_dataset(root: &Path, items: &[(GaitSequence, Role)]) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut entries = Vec::with_capacity(items.len());
    for (seq, role) in items {
        let dir = root.join(&seq.subject_id).join(&seq.sequence_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (i, frame) in seq.frames.iter().enumerate() {
            write_mask_png(frame, &dir.join(format!("{i:04}.png")))?;
        }
        entries.push(ManifestEntry {
            subject: seq.subject_id.clone(),
            sequence: seq.sequence_id.clone(),
            condition: seq.condition_tag.clone(),
            role: *role,
        });
    }
    write_manifest(root, &Manifest { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip() {
        let m = Manifest {
            entries: vec![
                ManifestEntry {
                    subject: "s001".into(),
                    sequence: "n00".into(),
                    condition: "normal".into(),
                    role: Role::Gallery,
                },
                ManifestEntry {
                    subject: "s001".into(),
                    sequence: "c00".into(),
                    condition: "coat".into(),
                    role: Role::Probe,
                },
            ],
        };
        let back = Manifest::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_ids() {
        let dup = r#"[
            {"subject":"a","sequence":"x","condition":"normal","role":"gallery"},
            {"subject":"a","sequence":"x","condition":"normal","role":"probe"}
        ]"#;
        assert!(Manifest::from_json_str(dup).is_err());
        let bad = r#"[{"subject":"a/b","sequence":"x","condition":"n","role":"gallery"}]"#;
        assert!(Manifest::from_json_str(bad).is_err());
        assert!(Manifest::from_json_str("not json").is_err());
    }

    #[test]
    fn sequence_io_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut frames = Vec::new();
        for i in 0..5 {
            let mut m = BinaryMask::zeros(6, 8).unwrap();
            m.set(i, i, true);
            m.set(7, 3, true);
            frames.push(m);
        }
        let seq = GaitSequence::new(frames.clone(), "s1", "q1", "normal").unwrap();
        write_dataset(tmp.path(), &[(seq, Role::Gallery)]).unwrap();

        let manifest = load_manifest(tmp.path()).unwrap();
        assert_eq!(manifest.entries.len(), 1);
        let loaded = load_sequence(tmp.path(), &manifest.entries[0]).unwrap();
        assert_eq!(loaded.frames, frames);
        assert_eq!(loaded.subject_id, "s1");
    }

    #[test]
    fn frame_gap_is_a_manifest_error() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("seq");
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = BinaryMask::zeros(4, 4).unwrap();
        m.set(1, 1, true);
        write_mask_png(&m, &dir.join("0000.png")).unwrap();
        write_mask_png(&m, &dir.join("0002.png")).unwrap();
        assert!(matches!(
            load_frames_dir(&dir),
            Err(Error::Manifest(msg)) if msg.contains("gap")
        ));
    }

    #[test]
    fn non_numeric_frame_name_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("seq");
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = BinaryMask::zeros(4, 4).unwrap();
        m.set(1, 1, true);
        write_mask_png(&m, &dir.join("frame_one.png")).unwrap();
        assert!(load_frames_dir(&dir).is_err());
    }

    #[test]
    fn grayscale_values_threshold_to_binary() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("g.png");
        let img = image::GrayImage::from_raw(2, 2, vec![0, 255, 127, 128]).unwrap();
        img.save(&path).unwrap();
        let mask = decode_frame(&path).unwrap();
        assert_eq!(mask.data(), &[0, 1, 0, 1]);
    }

    #[test]
    fn missing_directory_is_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let entry = ManifestEntry {
            subject: "ghost".into(),
            sequence: "q".into(),
            condition: "normal".into(),
            role: Role::Gallery,
        };
        assert!(matches!(
            load_sequence(tmp.path(), &entry),
            Err(Error::Io { .. })
        ));
    }
}
