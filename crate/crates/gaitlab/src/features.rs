//! Feature extraction from sub-templates: oriented-gradient histograms
//! over a spatial pyramid (SDOG) and per-row mean intensities of the most
//! variable rows (MDP), fused into one vector.

use crate::aesi::{PartSet, SubAesi};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Gradient magnitude and unsigned orientation of an image.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub magnitude: Grid,
    /// Orientation in degrees, folded into `[0, 180)`.
    pub orientation: Grid,
}

/// Central differences in the interior with replicated borders; the
/// orientation is unsigned since opposite gradient directions describe
/// the same edge.
pub fn gradient_field(image: &Grid) -> Result<GradientField> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(Error::DegenerateInput(format!(
            "gradient field needs at least 3x3, got {w}x{h}"
        )));
    }
    let mut magnitude = Grid::zeros(w, h);
    let mut orientation = Grid::zeros(w, h);
    for r in 0..h {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(h - 1);
        for c in 0..w {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(w - 1);
            let gx = (image.get(r, right) - image.get(r, left)) / 2.0;
            let gy = (image.get(down, c) - image.get(up, c)) / 2.0;
            magnitude.set(r, c, gx.hypot(gy));
            let mut deg = gy.atan2(gx).to_degrees();
            deg = deg.rem_euclid(180.0);
            if deg >= 180.0 {
                deg = 0.0;
            }
            orientation.set(r, c, deg);
        }
    }
    Ok(GradientField {
        magnitude,
        orientation,
    })
}

/// Where the final histogram vector is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdogNorm {
    /// One L2 normalization over the whole concatenated vector (default).
    Global,
    /// Each decomposition level normalized independently.
    PerLevel,
    /// Each sub-region histogram normalized independently.
    PerCell,
}

impl SdogNorm {
    pub fn name(self) -> &'static str {
        match self {
            SdogNorm::Global => "global",
            SdogNorm::PerLevel => "per_level",
            SdogNorm::PerCell => "per_cell",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "global" => Ok(SdogNorm::Global),
            "per_level" => Ok(SdogNorm::PerLevel),
            "per_cell" => Ok(SdogNorm::PerCell),
            other => Err(Error::Parameter(format!("unknown sdog norm `{other}`"))),
        }
    }
}

/// Oriented-gradient histogram pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct SdogVector {
    pub values: Vec<f64>,
    pub bins: usize,
    pub levels: Vec<u32>,
}

const NORM_FLOOR: f64 = 1e-12;

fn l2_normalize(slice: &mut [f64]) {
    let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= NORM_FLOOR {
        for v in slice.iter_mut() {
            *v /= norm;
        }
    }
}

/// Histogram of gradient magnitudes over `bins` orientation bins for each
/// sub-region of each decomposition level.
///
/// The gradient field is computed once on the whole image; level `v`
/// splits it into a `2^v x 2^v` grid of sub-regions with boundaries at
/// `floor(dim * i / 2^v)` (empty sub-regions of very small images
/// contribute zeros). Sub-region histograms concatenate row-major, levels
/// in the given order, giving `bins * sum(4^v)` values: 189 at the
/// defaults of 9 bins and levels 0, 1, 2. Zero-magnitude pixels carry no
/// orientation and are skipped.
pub fn sdog(image: &Grid, bins: usize, levels: &[u32], norm: SdogNorm) -> Result<SdogVector> {
    if bins == 0 {
        return Err(Error::Parameter("sdog needs at least one bin".into()));
    }
    if levels.is_empty() {
        return Err(Error::Parameter("sdog needs at least one level".into()));
    }
    let field = gradient_field(image)?;
    let (w, h) = (image.width(), image.height());
    let bin_width = 180.0 / bins as f64;

    let mut values = Vec::with_capacity(bins * levels.iter().map(|v| 4usize.pow(*v)).sum::<usize>());
    let mut level_spans = Vec::with_capacity(levels.len());
    for &level in levels {
        let level_start = values.len();
        let cells = 1usize << level; // 2^v per axis
        for cell_r in 0..cells {
            let r0 = h * cell_r / cells;
            let r1 = h * (cell_r + 1) / cells;
            for cell_c in 0..cells {
                let c0 = w * cell_c / cells;
                let c1 = w * (cell_c + 1) / cells;
                let cell_start = values.len();
                values.extend(std::iter::repeat_n(0.0, bins));
                for r in r0..r1 {
                    for c in c0..c1 {
                        let mag = field.magnitude.get(r, c);
                        if mag == 0.0 {
                            continue;
                        }
                        let bin = ((field.orientation.get(r, c) / bin_width) as usize)
                            .min(bins - 1);
                        values[cell_start + bin] += mag;
                    }
                }
                if norm == SdogNorm::PerCell {
                    l2_normalize(&mut values[cell_start..]);
                }
            }
        }
        level_spans.push(level_start..values.len());
    }
    match norm {
        SdogNorm::Global => l2_normalize(&mut values),
        SdogNorm::PerLevel => {
            for span in level_spans {
                l2_normalize(&mut values[span]);
            }
        }
        SdogNorm::PerCell => {}
    }
    Ok(SdogVector {
        values,
        bins,
        levels: levels.to_vec(),
    })
}

/// Indices of the `floor(m/2)` rows with the highest intensity variance,
/// in ascending row order. Ties go to the smaller row index.
pub fn select_rows(image: &Grid) -> Result<Vec<usize>> {
    let m = image.height();
    if m < 2 {
        return Err(Error::Parameter(format!(
            "row selection needs at least 2 rows, got {m}"
        )));
    }
    let mut by_variance: Vec<(usize, f64)> = (0..m)
        .map(|r| {
            let row = image.row(r);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
            (r, var)
        })
        .collect();
    by_variance.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut rows: Vec<usize> = by_variance[..m / 2].iter().map(|&(r, _)| r).collect();
    rows.sort_unstable();
    Ok(rows)
}

/// Mean pixel intensity of selected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpVector {
    pub values: Vec<f64>,
    pub row_indices: Vec<usize>,
}

/// Per-row mean intensity for each row in `rows`.
pub fn mdp(image: &Grid, rows: &[usize]) -> Result<MdpVector> {
    let mut values = Vec::with_capacity(rows.len());
    for &r in rows {
        if r >= image.height() {
            return Err(Error::Parameter(format!(
                "row index {r} out of range for height {}",
                image.height()
            )));
        }
        let row = image.row(r);
        values.push(row.iter().sum::<f64>() / row.len() as f64);
    }
    Ok(MdpVector {
        values,
        row_indices: rows.to_vec(),
    })
}

/// Concatenated SDOG and MDP feature of one sub-template combination.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature {
    pub values: Vec<f64>,
    pub combination: PartSet,
}

/// Concatenate `sdog || mdp` under the combination tag.
pub fn fuse(sdog: &SdogVector, mdp: &MdpVector, set: PartSet) -> FusedFeature {
    let mut values = Vec::with_capacity(sdog.values.len() + mdp.values.len());
    values.extend_from_slice(&sdog.values);
    values.extend_from_slice(&mdp.values);
    FusedFeature {
        values,
        combination: set,
    }
}

/// Full feature extraction for one sub-template.
pub fn extract_fused(
    sub: &SubAesi,
    bins: usize,
    levels: &[u32],
    norm: SdogNorm,
) -> Result<FusedFeature> {
    let s = sdog(&sub.grid, bins, levels, norm)?;
    let rows = select_rows(&sub.grid)?;
    let m = mdp(&sub.grid, &rows)?;
    Ok(fuse(&s, &m, sub.parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aesi::PartId;
    use proptest::prelude::*;

    fn vertical_step(w: usize, h: usize, edge_col: usize) -> Grid {
        Grid::from_fn(w, h, |_, c| if c < edge_col { 0.0 } else { 1.0 })
    }

    fn horizontal_step(w: usize, h: usize, edge_row: usize) -> Grid {
        Grid::from_fn(w, h, |r, _| if r < edge_row { 0.0 } else { 1.0 })
    }

    #[test]
    fn constant_image_has_zero_gradients() {
        let g = gradient_field(&Grid::from_fn(8, 8, |_, _| 0.7)).unwrap();
        assert!(g.magnitude.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_edge_orientation_is_zero_degrees() {
        let g = gradient_field(&vertical_step(10, 6, 5)).unwrap();
        let mut saw_nonzero = false;
        for r in 0..6 {
            for c in 0..10 {
                if g.magnitude.get(r, c) > 0.0 {
                    saw_nonzero = true;
                    assert_eq!(g.orientation.get(r, c), 0.0);
                }
            }
        }
        assert!(saw_nonzero);
    }

    #[test]
    fn horizontal_edge_orientation_is_ninety_degrees() {
        let g = gradient_field(&horizontal_step(6, 10, 5)).unwrap();
        let mut saw_nonzero = false;
        for r in 0..10 {
            for c in 0..6 {
                if g.magnitude.get(r, c) > 0.0 {
                    saw_nonzero = true;
                    assert_eq!(g.orientation.get(r, c), 90.0);
                }
            }
        }
        assert!(saw_nonzero);
    }

    #[test]
    fn gradient_rejects_tiny_images() {
        assert!(gradient_field(&Grid::zeros(2, 5)).is_err());
    }

    #[test]
    fn sdog_dimension_is_189_at_defaults() {
        let image = Grid::from_fn(32, 32, |r, c| ((r * c) % 7) as f64);
        let v = sdog(&image, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        assert_eq!(v.values.len(), 189);
    }

    #[test]
    fn sdog_of_constant_image_is_zero() {
        let v = sdog(&Grid::from_fn(16, 16, |_, _| 0.3), 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    /// Brute-force oracle: explicit difference grid, binned per cell.
    fn sdog_oracle(image: &Grid, bins: usize, levels: &[u32]) -> Vec<f64> {
        let (w, h) = (image.width(), image.height());
        let sample = |r: isize, c: isize| {
            image.get(
                r.clamp(0, h as isize - 1) as usize,
                c.clamp(0, w as isize - 1) as usize,
            )
        };
        let mut out = Vec::new();
        for &level in levels {
            let cells = 1usize << level;
            for cr in 0..cells {
                for cc in 0..cells {
                    let mut hist = vec![0.0; bins];
                    for r in (h * cr / cells)..(h * (cr + 1) / cells) {
                        for c in (w * cc / cells)..(w * (cc + 1) / cells) {
                            let (r, c) = (r as isize, c as isize);
                            let gx = (sample(r, c + 1) - sample(r, c - 1)) / 2.0;
                            let gy = (sample(r + 1, c) - sample(r - 1, c)) / 2.0;
                            let mag = (gx * gx + gy * gy).sqrt();
                            if mag == 0.0 {
                                continue;
                            }
                            let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
                            let bin = ((deg / (180.0 / bins as f64)) as usize).min(bins - 1);
                            hist[bin] += mag;
                        }
                    }
                    out.extend(hist);
                }
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            for v in &mut out {
                *v /= norm;
            }
        }
        out
    }

    #[test]
    fn vertical_edge_mass_lands_in_bin_zero_at_every_level() {
        // Edge down the exact middle of a 64x64 image.
        let image = vertical_step(64, 64, 32);
        let v = sdog(&image, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        let oracle = sdog_oracle(&image, 9, &[0, 1, 2]);
        assert_eq!(v.values.len(), oracle.len());
        for (a, b) in v.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // Per level: some mass, all of it in bin 0 of each cell.
        let level_sizes = [9usize, 36, 144];
        let mut start = 0;
        for size in level_sizes {
            let slice = &v.values[start..start + size];
            let total: f64 = slice.iter().sum();
            assert!(total > 0.0, "level starting at {start} has no mass");
            for (i, &val) in slice.iter().enumerate() {
                if i % 9 != 0 {
                    assert_eq!(val, 0.0, "mass outside bin 0 at offset {i}");
                }
            }
            start += size;
        }
    }

    #[test]
    fn sdog_matches_oracle_on_textured_image() {
        let image = Grid::from_fn(23, 31, |r, c| ((r * 13 + c * 7) % 11) as f64 / 10.0);
        let v = sdog(&image, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        let oracle = sdog_oracle(&image, 9, &[0, 1, 2]);
        for (a, b) in v.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sdog_rejects_bad_parameters() {
        let image = Grid::zeros(8, 8);
        assert!(sdog(&image, 0, &[0], SdogNorm::Global).is_err());
        assert!(sdog(&image, 9, &[], SdogNorm::Global).is_err());
    }

    #[test]
    fn nonzero_sdog_has_unit_norm() {
        let image = Grid::from_fn(20, 20, |r, c| (r + c) as f64);
        let v = sdog(&image, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        let norm: f64 = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_rows_picks_half_by_variance() {
        let image = Grid::from_fn(8, 32, |r, c| if r % 3 == 0 { (c % 2) as f64 } else { 0.0 });
        let rows = select_rows(&image).unwrap();
        assert_eq!(rows.len(), 16);
    }

    #[test]
    fn select_rows_prefers_variable_rows() {
        // Row 0 constant, row 1 alternating: the alternating row wins.
        let image = Grid::from_fn(4, 2, |r, c| if r == 1 { (c % 2) as f64 } else { 0.0 });
        assert_eq!(select_rows(&image).unwrap(), vec![1]);
    }

    #[test]
    fn select_rows_breaks_ties_by_smaller_index() {
        let image = Grid::from_fn(4, 6, |_, c| (c % 2) as f64);
        assert_eq!(select_rows(&image).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn mdp_row_means() {
        let image = Grid::from_fn(10, 3, |r, c| match r {
            0 => 0.5,
            1 => (c % 2) as f64,
            _ => 0.0,
        });
        let v = mdp(&image, &[0, 1, 2]).unwrap();
        assert_eq!(v.values, vec![0.5, 0.5, 0.0]);
        assert!(mdp(&image, &[3]).is_err());
    }

    #[test]
    fn fused_lengths_track_sub_template_height() {
        use crate::aesi::{assemble_sub_aesi, enumerate_part_sets, segment_parts, Aesi, PartSet};
        let aesi = Aesi {
            grid: Grid::from_fn(22, 128, |r, c| ((r * 5 + c * 3) % 17) as f64 / 16.0),
            period_frames: 1,
            source_frame_count: 1,
            full_sequence_fallback: false,
        };
        let parts = segment_parts(&aesi).unwrap();
        let full = assemble_sub_aesi(&parts, PartSet::FULL).unwrap();
        let f = extract_fused(&full, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        assert_eq!(f.values.len(), 189 + 64);

        for set in enumerate_part_sets() {
            let sub = assemble_sub_aesi(&parts, set).unwrap();
            let f = extract_fused(&sub, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
            assert_eq!(f.values.len(), 189 + sub.grid.height() / 2);
        }
    }

    #[test]
    fn sub_template_row_means_match_parent_rows() {
        use crate::aesi::{assemble_sub_aesi, segment_parts, Aesi, PartSet};
        let aesi = Aesi {
            grid: Grid::from_fn(12, 60, |r, c| ((r * 11 + c * 3) % 23) as f64 / 22.0),
            period_frames: 1,
            source_frame_count: 1,
            full_sequence_fallback: false,
        };
        let parts = segment_parts(&aesi).unwrap();
        let set = PartSet::from_parts(&[PartId::Neck, PartId::Limb]);
        let sub = assemble_sub_aesi(&parts, set).unwrap();
        // Concatenation preserves rows, so sub-template row means equal the
        // parent's means on the corresponding rows.
        let parent_rows: Vec<usize> = set
            .iter()
            .flat_map(|p| parts[p.index()].row_start..parts[p.index()].row_end)
            .collect();
        let all_sub_rows: Vec<usize> = (0..sub.grid.height()).collect();
        let sub_means = mdp(&sub.grid, &all_sub_rows).unwrap();
        let parent_means = mdp(&aesi.grid, &parent_rows).unwrap();
        assert_eq!(sub_means.values, parent_means.values);
    }

    #[test]
    fn chest_only_feature_length_at_height_100() {
        use crate::aesi::{assemble_sub_aesi, segment_parts, Aesi, PartSet};
        let aesi = Aesi {
            grid: Grid::from_fn(15, 100, |r, c| ((r + c) % 9) as f64 / 8.0),
            period_frames: 1,
            source_frame_count: 1,
            full_sequence_fallback: false,
        };
        let parts = segment_parts(&aesi).unwrap();
        let chest = assemble_sub_aesi(&parts, PartSet::from_parts(&[PartId::Chest])).unwrap();
        assert_eq!(chest.grid.height(), 25);
        let f = extract_fused(&chest, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
        assert_eq!(f.values.len(), 189 + 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sdog_invariant_to_positive_scaling(scale in 0.01f64..100.0) {
            let image = Grid::from_fn(17, 19, |r, c| ((r * 3 + c * 5) % 13) as f64 / 12.0);
            let scaled = Grid::from_fn(17, 19, |r, c| image.get(r, c) * scale);
            let a = sdog(&image, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
            let b = sdog(&scaled, 9, &[0, 1, 2], SdogNorm::Global).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn mdp_values_bounded_by_image_range(values in proptest::collection::vec(0.0f64..1.0, 24)) {
            let image = Grid::from_vec(4, 6, values).unwrap();
            let rows = select_rows(&image).unwrap();
            let v = mdp(&image, &rows).unwrap();
            prop_assert!(v.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
