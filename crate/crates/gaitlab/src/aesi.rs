//! Average Energy Silhouette Images and their anatomical decomposition.
//!
//! An AESI averages the binary silhouettes of one gait period into a single
//! real-valued template; the degree of motion in a region shows up as
//! intermediate intensity. The template splits into four horizontal body
//! bands (neck, chest, pelvic, limb), and the 15 nonempty band subsets
//! recombine into sub-AESIs used for covariate-robust matching.

use crate::error::{Error, Result};
use crate::gaitcycle::GaitPeriod;
use crate::grid::{BinaryMask, Grid};

/// Anatomical body bands, ordered top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartId {
    Neck,
    Chest,
    Pelvic,
    Limb,
}

impl PartId {
    pub const ALL: [PartId; 4] = [PartId::Neck, PartId::Chest, PartId::Pelvic, PartId::Limb];

    pub fn index(self) -> usize {
        match self {
            PartId::Neck => 0,
            PartId::Chest => 1,
            PartId::Pelvic => 2,
            PartId::Limb => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartId::Neck => "neck",
            PartId::Chest => "chest",
            PartId::Pelvic => "pelvic",
            PartId::Limb => "limb",
        }
    }

    pub fn from_name(name: &str) -> Result<PartId> {
        match name {
            "neck" => Ok(PartId::Neck),
            "chest" => Ok(PartId::Chest),
            "pelvic" => Ok(PartId::Pelvic),
            "limb" => Ok(PartId::Limb),
            other => Err(Error::Parameter(format!("unknown body part `{other}`"))),
        }
    }
}

/// Subset of the four body parts, stored as a 4-bit mask
/// (bit 0 = neck, 1 = chest, 2 = pelvic, 3 = limb).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartSet(u8);

impl PartSet {
    pub const EMPTY: PartSet = PartSet(0);
    pub const FULL: PartSet = PartSet(0b1111);

    pub fn from_bits(bits: u8) -> Result<PartSet> {
        if bits > 0b1111 {
            return Err(Error::Parameter(format!(
                "part set bits {bits} out of range 0..=15"
            )));
        }
        Ok(PartSet(bits))
    }

    pub fn from_parts(parts: &[PartId]) -> PartSet {
        let mut set = PartSet::EMPTY;
        for &p in parts {
            set = set.with(p);
        }
        set
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, part: PartId) -> bool {
        self.0 & (1 << part.index()) != 0
    }

    pub fn with(self, part: PartId) -> PartSet {
        PartSet(self.0 | (1 << part.index()))
    }

    pub fn without(self, part: PartId) -> PartSet {
        PartSet(self.0 & !(1 << part.index()))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member parts in anatomical (top-to-bottom) order.
    pub fn iter(self) -> impl Iterator<Item = PartId> {
        PartId::ALL.into_iter().filter(move |&p| self.contains(p))
    }
}

impl std::fmt::Display for PartSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "none");
        }
        let names: Vec<&str> = self.iter().map(PartId::name).collect();
        write!(f, "{}", names.join("+"))
    }
}

/// Average Energy Silhouette Image.
#[derive(Debug, Clone, PartialEq)]
pub struct Aesi {
    /// Energy values in `[0, 1]`.
    pub grid: Grid,
    /// Number of frames averaged.
    pub period_frames: usize,
    /// Length of the sequence the template came from.
    pub source_frame_count: usize,
    /// True when no period window fit and the whole sequence was averaged.
    pub full_sequence_fallback: bool,
}

/// One horizontal band of an AESI.
#[derive(Debug, Clone, PartialEq)]
pub struct PartAesi {
    pub part: PartId,
    /// Band rows `[row_start, row_end)` in the parent template.
    pub row_start: usize,
    pub row_end: usize,
    pub grid: Grid,
}

/// Vertical gap-free concatenation of a part subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubAesi {
    pub parts: PartSet,
    pub grid: Grid,
}

fn average_window(frames: &[BinaryMask], window: std::ops::Range<usize>) -> Result<Grid> {
    let first = &frames[window.start];
    let (w, h) = (first.width(), first.height());
    if frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::DimensionMismatch(
            "frames must share dimensions".into(),
        ));
    }
    let n = window.len() as f64;
    let mut grid = Grid::zeros(w, h);
    for frame in &frames[window] {
        for r in 0..h {
            for c in 0..w {
                if frame.get(r, c) {
                    grid.set(r, c, grid.get(r, c) + 1.0);
                }
            }
        }
    }
    for r in 0..h {
        for c in 0..w {
            grid.set(r, c, grid.get(r, c) / n);
        }
    }
    Ok(grid)
}

/// Average the frames of the first full gait period.
///
/// The window starts at the first detected mid-stance and spans
/// `period.frames` frames. Binary values make the squared-magnitude sum a
/// plain average, so every energy value lies in `[0, 1]`. When the window
/// does not fit inside the sequence, the whole sequence is averaged and
/// the result is flagged.
pub fn build_aesi(frames: &[BinaryMask], period: &GaitPeriod) -> Result<Aesi> {
    if frames.is_empty() {
        return Err(Error::DegenerateInput("no frames to average".into()));
    }
    if period.frames == 0 {
        return Err(Error::Parameter("gait period of zero frames".into()));
    }
    let start = period.minima_indices.first().copied().unwrap_or(0);
    if start + period.frames <= frames.len() {
        let grid = average_window(frames, start..start + period.frames)?;
        Ok(Aesi {
            grid,
            period_frames: period.frames,
            source_frame_count: frames.len(),
            full_sequence_fallback: false,
        })
    } else {
        build_aesi_full(frames)
    }
}

/// Average an entire sequence (the flagged fallback for sequences shorter
/// than one gait period or without a detectable one).
pub fn build_aesi_full(frames: &[BinaryMask]) -> Result<Aesi> {
    if frames.is_empty() {
        return Err(Error::DegenerateInput("no frames to average".into()));
    }
    let grid = average_window(frames, 0..frames.len())?;
    Ok(Aesi {
        grid,
        period_frames: frames.len(),
        source_frame_count: frames.len(),
        full_sequence_fallback: true,
    })
}

/// Band boundaries `(b1, b2, b3)` measured from the top of a template of
/// height `h`: neck `[0,b1)`, chest `[b1,b2)`, pelvic `[b2,b3)`, limb
/// `[b3,h)`. Fractions 0.20 / 0.45 / 0.70, rounded half-up.
pub fn part_row_bounds(h: usize) -> (usize, usize, usize) {
    let bound = |frac: f64| (frac * h as f64 + 0.5).floor() as usize;
    (bound(0.20), bound(0.45), bound(0.70))
}

/// Split an AESI into the four anatomical bands.
pub fn segment_parts(aesi: &Aesi) -> Result<[PartAesi; 4]> {
    let h = aesi.grid.height();
    if h < 10 {
        return Err(Error::DegenerateInput(format!(
            "template height {h} too small for 4 nonempty parts"
        )));
    }
    let (b1, b2, b3) = part_row_bounds(h);
    if b1 == 0 || b2 <= b1 || b3 <= b2 || h <= b3 {
        return Err(Error::DegenerateInput(format!(
            "segmentation of height {h} produced an empty part"
        )));
    }
    let ranges = [(0, b1), (b1, b2), (b2, b3), (b3, h)];
    let mut parts = Vec::with_capacity(4);
    for (part, (start, end)) in PartId::ALL.into_iter().zip(ranges) {
        parts.push(PartAesi {
            part,
            row_start: start,
            row_end: end,
            grid: aesi.grid.slice_rows(start..end)?,
        });
    }
    Ok(parts.try_into().expect("exactly four parts"))
}

/// All 15 nonempty part subsets in ascending bitmask order.
pub fn enumerate_part_sets() -> Vec<PartSet> {
    (1u8..=15).map(PartSet).collect()
}

/// Concatenate the member bands of `set` in anatomical order.
pub fn assemble_sub_aesi(parts: &[PartAesi; 4], set: PartSet) -> Result<SubAesi> {
    if set.is_empty() {
        return Err(Error::Parameter(
            "cannot assemble a sub-template from an empty part set".into(),
        ));
    }
    let members: Vec<&Grid> = set.iter().map(|p| &parts[p.index()].grid).collect();
    let grid = Grid::vstack(&members)?;
    Ok(SubAesi { parts: set, grid })
}
