//! Silhouette primitives: bounding boxes, size normalization and the
//! co-occurrence entropy texture measure.

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};

/// Tight inclusive bounding box of foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn new(top: usize, bottom: usize, left: usize, right: usize) -> Result<Self> {
        if top > bottom || left > right {
            return Err(Error::Parameter(format!(
                "bounding box rows [{top},{bottom}] cols [{left},{right}] inverted"
            )));
        }
        Ok(BoundingBox {
            top,
            bottom,
            left,
            right,
        })
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }
}

/// Output dimensions for size normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizationSpec {
    pub target_height: usize,
    pub target_width: usize,
}

impl NormalizationSpec {
    pub fn new(target_height: usize, target_width: usize) -> Result<Self> {
        if target_height == 0 || target_width == 0 {
            return Err(Error::Parameter(
                "normalization dimensions must be positive".into(),
            ));
        }
        Ok(NormalizationSpec {
            target_height,
            target_width,
        })
    }
}

/// An ordered silhouette sequence with its identity labels.
#[derive(Debug, Clone)]
pub struct GaitSequence {
    pub frames: Vec<BinaryMask>,
    pub subject_id: String,
    pub sequence_id: String,
    pub condition_tag: String,
}

impl GaitSequence {
    pub fn new(
        frames: Vec<BinaryMask>,
        subject_id: impl Into<String>,
        sequence_id: impl Into<String>,
        condition_tag: impl Into<String>,
    ) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::DegenerateInput("sequence has no frames".into()))?;
        let (w, h) = (first.width(), first.height());
        if frames.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(Error::DimensionMismatch(
                "frames in a sequence must share dimensions".into(),
            ));
        }
        Ok(GaitSequence {
            frames,
            subject_id: subject_id.into(),
            sequence_id: sequence_id.into(),
            condition_tag: condition_tag.into(),
        })
    }
}

/// Entropy of the normalized gray-level co-occurrence matrix of `patch`.
///
/// Pixel values are clamped to `[0, 1]` and quantized into
/// `quantization_levels` equal bins; every pixel pair `(p, p + offset)`
/// inside the patch increments one matrix cell. The returned value is
/// `sum F(i,j) * ln F(i,j)` over nonzero cells with `F` the cell
/// frequency — no leading minus, so it is always <= 0 and equals 0 only
/// when a single cell holds all mass.
pub fn cooccurrence_entropy(
    patch: &Grid,
    quantization_levels: usize,
    offset: (isize, isize),
) -> Result<f64> {
    if patch.width() < 2 || patch.height() < 2 {
        return Err(Error::DegenerateInput(
            "entropy patch must be at least 2x2".into(),
        ));
    }
    if quantization_levels < 2 {
        return Err(Error::Parameter(
            "quantization_levels must be at least 2".into(),
        ));
    }
    let levels = quantization_levels;
    let quantize = |v: f64| -> usize {
        let q = (v.clamp(0.0, 1.0) * levels as f64).floor() as usize;
        q.min(levels - 1)
    };
    let (dr, dc) = offset;
    let mut matrix = vec![0u64; levels * levels];
    let mut total = 0u64;
    for r in 0..patch.height() {
        for c in 0..patch.width() {
            let r2 = r as isize + dr;
            let c2 = c as isize + dc;
            if r2 < 0 || c2 < 0 || r2 >= patch.height() as isize || c2 >= patch.width() as isize {
                continue;
            }
            let i = quantize(patch.get(r, c));
            let j = quantize(patch.get(r2 as usize, c2 as usize));
            matrix[i * levels + j] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::DegenerateInput(
            "offset leaves no pixel pairs inside the patch".into(),
        ));
    }
    let mut entropy = 0.0;
    for &count in &matrix {
        if count > 0 {
            let f = count as f64 / total as f64;
            entropy += f * f.ln();
        }
    }
    Ok(entropy)
}

/// Tightest box containing all foreground pixels of `mask`.
pub fn extract_bounding_box(mask: &BinaryMask) -> Result<BoundingBox> {
    let mut top = None;
    let mut bottom = 0;
    let mut left = mask.width();
    let mut right = 0;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                if top.is_none() {
                    top = Some(r);
                }
                bottom = r;
                left = left.min(c);
                right = right.max(c);
            }
        }
    }
    match top {
        Some(top) => BoundingBox::new(top, bottom, left, right),
        None => Err(Error::EmptySilhouette),
    }
}

/// Crop `mask` to `bbox`, scale the crop to `spec.target_height` with
/// nearest-neighbor sampling (aspect ratio preserved), and place it on a
/// `target_height x target_width` canvas with the horizontal foreground
/// centroid at the canvas center. Content wider than the canvas is
/// cropped at the sides.
pub fn normalize_silhouette(
    mask: &BinaryMask,
    bbox: &BoundingBox,
    spec: &NormalizationSpec,
) -> Result<BinaryMask> {
    if bbox.bottom >= mask.height() || bbox.right >= mask.width() {
        return Err(Error::Parameter("bounding box exceeds mask bounds".into()));
    }
    let (bh, bw) = (bbox.height(), bbox.width());
    let th = spec.target_height;
    let tw = spec.target_width;
    let sw = ((bw as f64 * th as f64 / bh as f64).round() as usize).max(1);

    // Nearest-neighbor resample of the crop to th x sw.
    let mut scaled = BinaryMask::zeros(sw, th)?;
    let mut fg = 0usize;
    let mut col_sum = 0.0;
    for r in 0..th {
        let src_r = bbox.top + (((r as f64 + 0.5) * bh as f64 / th as f64) as usize).min(bh - 1);
        for c in 0..sw {
            let src_c =
                bbox.left + (((c as f64 + 0.5) * bw as f64 / sw as f64) as usize).min(bw - 1);
            if mask.get(src_r, src_c) {
                scaled.set(r, c, true);
                fg += 1;
                col_sum += c as f64;
            }
        }
    }
    if fg == 0 {
        return Err(Error::DegenerateInput(
            "bounding box contains no foreground".into(),
        ));
    }

    // Shift so the horizontal centroid lands on the canvas center column.
    // Ties-to-even keeps re-normalization of an already-centered mask stable.
    let centroid = col_sum / fg as f64;
    let center = (tw as f64 - 1.0) / 2.0;
    let shift = (center - centroid).round_ties_even() as isize;

    let mut out = BinaryMask::zeros(tw, th)?;
    for r in 0..th {
        for c in 0..sw {
            if scaled.get(r, c) {
                let dest = c as isize + shift;
                if dest >= 0 && dest < tw as isize {
                    out.set(r, dest as usize, true);
                }
            }
        }
    }
    Ok(out)
}

/// Threshold an 8-bit grayscale buffer into a binary mask (value > 127 is
/// foreground).
pub fn mask_from_gray(width: usize, height: usize, pixels: &[u8]) -> Result<BinaryMask> {
    let data = pixels.iter().map(|&v| u8::from(v > 127)).collect();
    BinaryMask::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from_points(w: usize, h: usize, pts: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::zeros(w, h).unwrap();
        for &(r, c) in pts {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn entropy_single_cell_is_zero() {
        // Constant patch: all pairs land in one co-occurrence cell.
        let patch = Grid::from_fn(3, 3, |_, _| 0.2);
        let e = cooccurrence_entropy(&patch, 8, (0, 1)).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn entropy_uniform_four_cells() {
        // Rows [0,0,1] and [1,1,0] with offset (0,1) hit each of the four
        // 2-level cells exactly once.
        let patch = Grid::from_vec(3, 2, vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let e = cooccurrence_entropy(&patch, 2, (0, 1)).unwrap();
        assert!((e - 0.25f64.ln()).abs() < 1e-12, "e = {e}");
    }

    #[test]
    fn entropy_depends_only_on_cell_frequencies() {
        // Dyadic values quantize exactly; mapping k/16 -> (15-k)/16
        // relabels every co-occurrence cell (i,j) -> (15-i,15-j), a pure
        // permutation, so the entropy sum is unchanged.
        let patch = Grid::from_fn(5, 4, |r, c| ((r * 3 + c * 7) % 10) as f64 / 16.0);
        let inverted = Grid::from_fn(5, 4, |r, c| 15.0 / 16.0 - patch.get(r, c));
        let a = cooccurrence_entropy(&patch, 16, (1, 0)).unwrap();
        let b = cooccurrence_entropy(&inverted, 16, (1, 0)).unwrap();
        // Equal up to the permuted summation order.
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn entropy_rejects_degenerate_offsets() {
        let patch = Grid::from_fn(2, 2, |r, c| (r + c) as f64);
        assert!(matches!(
            cooccurrence_entropy(&patch, 4, (0, 5)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn entropy_rejects_tiny_patches_and_levels() {
        let patch = Grid::from_fn(1, 3, |_, _| 0.0);
        assert!(cooccurrence_entropy(&patch, 4, (0, 1)).is_err());
        let patch = Grid::from_fn(3, 3, |_, _| 0.0);
        assert!(cooccurrence_entropy(&patch, 1, (0, 1)).is_err());
    }

    #[test]
    fn bounding_box_two_points() {
        let m = mask_from_points(10, 10, &[(2, 3), (5, 7)]);
        let b = extract_bounding_box(&m).unwrap();
        assert_eq!((b.top, b.bottom, b.left, b.right), (2, 5, 3, 7));
    }

    #[test]
    fn bounding_box_single_pixel() {
        let m = mask_from_points(10, 10, &[(4, 4)]);
        let b = extract_bounding_box(&m).unwrap();
        assert_eq!((b.top, b.bottom, b.left, b.right), (4, 4, 4, 4));
    }

    #[test]
    fn bounding_box_empty_mask_errors() {
        let m = BinaryMask::zeros(4, 4).unwrap();
        assert!(matches!(
            extract_bounding_box(&m),
            Err(Error::EmptySilhouette)
        ));
    }

    #[test]
    fn normalize_scales_height_by_two() {
        // A full 64x32 rectangle silhouette scaled into a 128x88 canvas:
        // scale factor 128/64 = 2, so the output spans 64 columns.
        let mut m = BinaryMask::zeros(40, 70).unwrap();
        for r in 3..67 {
            for c in 4..36 {
                m.set(r, c, true);
            }
        }
        let b = extract_bounding_box(&m).unwrap();
        assert_eq!((b.height(), b.width()), (64, 32));
        let spec = NormalizationSpec::new(128, 88).unwrap();
        let out = normalize_silhouette(&m, &b, &spec).unwrap();
        assert_eq!((out.height(), out.width()), (128, 88));
        let ob = extract_bounding_box(&out).unwrap();
        assert_eq!(ob.height(), 128);
        assert_eq!(ob.width(), 64);
    }

    #[test]
    fn normalize_identity_on_centered_input() {
        // Full-height silhouette with its centroid already at the center
        // column of an 11-wide canvas.
        let spec = NormalizationSpec::new(6, 11).unwrap();
        let mut m = BinaryMask::zeros(11, 6).unwrap();
        for r in 0..6 {
            for c in 4..=6 {
                m.set(r, c, true);
            }
        }
        let b = extract_bounding_box(&m).unwrap();
        let out = normalize_silhouette(&m, &b, &spec).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn normalized_bbox_spans_full_height() {
        let m = mask_from_points(9, 9, &[(1, 2), (2, 3), (3, 4), (7, 3)]);
        let b = extract_bounding_box(&m).unwrap();
        let spec = NormalizationSpec::new(32, 22).unwrap();
        let out = normalize_silhouette(&m, &b, &spec).unwrap();
        let ob = extract_bounding_box(&out).unwrap();
        assert_eq!(ob.top, 0);
        assert_eq!(ob.bottom, 31);
    }

    fn centroid_col(mask: &BinaryMask) -> f64 {
        let mut sum = 0.0;
        let mut n = 0.0;
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask.get(r, c) {
                    sum += c as f64;
                    n += 1.0;
                }
            }
        }
        sum / n
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn entropy_is_nonpositive(values in proptest::collection::vec(0.0f64..1.0, 16)) {
            let patch = Grid::from_vec(4, 4, values).unwrap();
            let e = cooccurrence_entropy(&patch, 4, (0, 1)).unwrap();
            prop_assert!(e <= 1e-15);
        }

        #[test]
        fn normalize_centers_and_is_idempotent(
            pts in proptest::collection::hash_set((0usize..14, 0usize..6), 1..30)
        ) {
            // Tall, narrow silhouettes (full-height anchors keep the aspect
            // ratio realistic): the scaled content always fits the canvas,
            // which is the regime the centering contract covers.
            let mut pts: Vec<(usize, usize)> = pts.into_iter().collect();
            pts.push((0, 3));
            pts.push((13, 3));
            let m = mask_from_points(6, 14, &pts);
            let b = extract_bounding_box(&m).unwrap();
            let spec = NormalizationSpec::new(28, 40).unwrap();
            let out = normalize_silhouette(&m, &b, &spec).unwrap();
            let center = (spec.target_width as f64 - 1.0) / 2.0;
            prop_assert!((centroid_col(&out) - center).abs() <= 1.0);

            let b2 = extract_bounding_box(&out).unwrap();
            let again = normalize_silhouette(&out, &b2, &spec).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
