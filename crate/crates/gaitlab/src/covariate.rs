//! Covariate screening: per-part gallery moment database, pairwise
//! distance statistics and the 3-sigma infection rule.
//!
//! A probe part is declared infected when its mean Euclidean distance to
//! the gallery moments of that part exceeds `mu + k_sigma * sigma`, where
//! `mu` and `sigma` are the mean and sample standard deviation of the
//! gallery's own pairwise distances. Clean parts form the sub-template
//! combination used for identification.

use num_complex::Complex64;

use crate::aesi::{PartAesi, PartId, PartSet};
use crate::error::{Error, Result};
use crate::zernike::{ZernikeBasis, ZernikeIndex, ZernikeMomentSet};

/// Floor applied to per-part sigma so degenerate galleries cannot produce
/// a zero-width acceptance band.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// How two moment sets are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    /// Complex difference `|Z_a - Z_b|^2` per index (the literal distance).
    Complex,
    /// Magnitude difference `(|Z_a| - |Z_b|)^2` per index (the rotation
    /// invariants).
    Magnitude,
}

impl MomentMode {
    pub fn name(self) -> &'static str {
        match self {
            MomentMode::Complex => "complex",
            MomentMode::Magnitude => "magnitude",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "complex" => Ok(MomentMode::Complex),
            "magnitude" => Ok(MomentMode::Magnitude),
            other => Err(Error::Parameter(format!("unknown moment mode `{other}`"))),
        }
    }
}

/// Finalized per-part screening statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartStats {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct PartDb {
    pub region_width: usize,
    pub region_height: usize,
    pub entries: Vec<(String, ZernikeMomentSet)>,
    pub stats: Option<PartStats>,
}

/// Per-part Zernike moments of every gallery sequence, plus the screening
/// statistics once finalized.
#[derive(Debug, Clone)]
pub struct GalleryMomentDb {
    index_set: Vec<ZernikeIndex>,
    mode: MomentMode,
    config_hash: String,
    parts: [PartDb; 4],
}

/// Screening verdict for one part.
#[derive(Debug, Clone, Copy)]
pub struct PartScreen {
    pub part: PartId,
    pub distance: f64,
    pub threshold: f64,
    pub infected: bool,
}

/// Outcome of screening one probe.
#[derive(Debug, Clone)]
pub struct ScreenResult {
    pub per_part: [PartScreen; 4],
    /// Parts considered covariate-free. Falls back to the full set when
    /// every part was flagged.
    pub clean_set: PartSet,
    /// True when the all-infected fallback was applied.
    pub fallback_all_infected: bool,
}

/// Distance between two moment sets over `indices`.
pub(crate) fn moment_distance(
    a: &ZernikeMomentSet,
    b: &ZernikeMomentSet,
    indices: &[ZernikeIndex],
    mode: MomentMode,
) -> f64 {
    let mut sum = 0.0;
    for &idx in indices {
        let za = a.get(idx).unwrap_or(Complex64::new(0.0, 0.0));
        let zb = b.get(idx).unwrap_or(Complex64::new(0.0, 0.0));
        let term = match mode {
            MomentMode::Complex => (za - zb).norm_sqr(),
            MomentMode::Magnitude => {
                let d = za.norm() - zb.norm();
                d * d
            }
        };
        sum += term;
    }
    sum.sqrt()
}

/// Compute per-part moments for every gallery sequence.
///
/// Statistics are not yet finalized; call [`compute_part_stats`] once all
/// sequences are in.
pub fn build_moment_db(
    gallery: &[(String, [PartAesi; 4])],
    index_set: &[ZernikeIndex],
    mode: MomentMode,
    config_hash: &str,
) -> Result<GalleryMomentDb> {
    if gallery.len() < 2 {
        return Err(Error::InsufficientGallery(format!(
            "pairwise statistics need at least 2 gallery sequences, got {}",
            gallery.len()
        )));
    }
    if index_set.is_empty() {
        return Err(Error::Parameter("empty Zernike index list".into()));
    }
    for (i, (id, _)) in gallery.iter().enumerate() {
        if gallery[..i].iter().any(|(other, _)| other == id) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }

    let first = &gallery[0].1;
    let mut parts: Vec<PartDb> = Vec::with_capacity(4);
    for part in PartId::ALL {
        let g = &first[part.index()].grid;
        parts.push(PartDb {
            region_width: g.width(),
            region_height: g.height(),
            entries: Vec::with_capacity(gallery.len()),
            stats: None,
        });
    }

    // One basis per part region, shared across sequences.
    let bases: Vec<ZernikeBasis> = parts
        .iter()
        .map(|p| ZernikeBasis::new(p.region_width, p.region_height, index_set))
        .collect::<Result<_>>()?;

    for (id, seq_parts) in gallery {
        for part in PartId::ALL {
            let i = part.index();
            let grid = &seq_parts[i].grid;
            if grid.width() != parts[i].region_width || grid.height() != parts[i].region_height {
                return Err(Error::DimensionMismatch(format!(
                    "part {} of sequence {id} is {}x{}, expected {}x{}",
                    part.name(),
                    grid.width(),
                    grid.height(),
                    parts[i].region_width,
                    parts[i].region_height
                )));
            }
            let moments = bases[i].moments(grid)?;
            parts[i].entries.push((id.clone(), moments));
        }
    }

    Ok(GalleryMomentDb {
        index_set: index_set.to_vec(),
        mode,
        config_hash: config_hash.to_string(),
        parts: parts.try_into().expect("exactly four parts"),
    })
}

/// Finalize the database: per part, the mean and sample standard
/// deviation of the distances over all ordered gallery pairs `j != k`,
/// with sigma floored at [`SIGMA_FLOOR`].
pub fn compute_part_stats(mut db: GalleryMomentDb) -> Result<GalleryMomentDb> {
    for part in &mut db.parts {
        let n = part.entries.len();
        if n < 2 {
            return Err(Error::InsufficientGallery(format!(
                "part statistics need at least 2 entries, got {n}"
            )));
        }
        let mut distances = Vec::with_capacity(n * (n - 1));
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                distances.push(moment_distance(
                    &part.entries[j].1,
                    &part.entries[k].1,
                    &db.index_set,
                    db.mode,
                ));
            }
        }
        let count = distances.len() as f64;
        let mu = distances.iter().sum::<f64>() / count;
        let var = distances.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (count - 1.0);
        part.stats = Some(PartStats {
            mu,
            sigma: var.sqrt().max(SIGMA_FLOOR),
        });
    }
    Ok(db)
}

impl GalleryMomentDb {
    pub fn index_set(&self) -> &[ZernikeIndex] {
        &self.index_set
    }

    pub fn mode(&self) -> MomentMode {
        self.mode
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn sequence_count(&self) -> usize {
        self.parts[0].entries.len()
    }

    pub fn is_finalized(&self) -> bool {
        self.parts.iter().all(|p| p.stats.is_some())
    }

    pub fn part_stats(&self, part: PartId) -> Option<PartStats> {
        self.parts[part.index()].stats
    }

    pub fn part_region(&self, part: PartId) -> (usize, usize) {
        let p = &self.parts[part.index()];
        (p.region_width, p.region_height)
    }

    #[cfg(test)]
    pub(crate) fn set_part_stats(&mut self, part: PartId, stats: PartStats) {
        self.parts[part.index()].stats = Some(stats);
    }
}

/// Mean Euclidean distance from a probe part's moments to every gallery
/// entry of that part.
pub fn mean_distance(
    probe_moments: &ZernikeMomentSet,
    db: &GalleryMomentDb,
    part: PartId,
) -> Result<f64> {
    if probe_moments.indices() != db.index_set {
        return Err(Error::IndexSetMismatch(format!(
            "probe has {} moment indices, database uses {}",
            probe_moments.len(),
            db.index_set.len()
        )));
    }
    let part_db = &db.parts[part.index()];
    if probe_moments.region_width() != part_db.region_width
        || probe_moments.region_height() != part_db.region_height
    {
        return Err(Error::DimensionMismatch(format!(
            "probe part {} region {}x{} does not match gallery {}x{}",
            part.name(),
            probe_moments.region_width(),
            probe_moments.region_height(),
            part_db.region_width,
            part_db.region_height
        )));
    }
    let sum: f64 = part_db
        .entries
        .iter()
        .map(|(_, g)| moment_distance(g, probe_moments, &db.index_set, db.mode))
        .sum();
    Ok(sum / part_db.entries.len() as f64)
}

/// Screen all four probe parts against a finalized database.
pub fn screen(
    probe_parts: &[ZernikeMomentSet; 4],
    db: &GalleryMomentDb,
    k_sigma: f64,
) -> Result<ScreenResult> {
    if !db.is_finalized() {
        return Err(Error::Parameter(
            "screening requires a finalized moment database".into(),
        ));
    }
    let mut per_part = Vec::with_capacity(4);
    let mut clean = PartSet::EMPTY;
    for part in PartId::ALL {
        let distance = mean_distance(&probe_parts[part.index()], db, part)?;
        let stats = db.parts[part.index()].stats.expect("finalized");
        let threshold = stats.mu + k_sigma * stats.sigma;
        let infected = distance >= threshold;
        if !infected {
            clean = clean.with(part);
        }
        per_part.push(PartScreen {
            part,
            distance,
            threshold,
            infected,
        });
    }
    let fallback = clean.is_empty();
    Ok(ScreenResult {
        per_part: per_part.try_into().expect("exactly four parts"),
        clean_set: if fallback { PartSet::FULL } else { clean },
        fallback_all_infected: fallback,
    })
}

// ---------------------------------------------------------------------------
// Moment database text format
// ---------------------------------------------------------------------------

const MOMENTDB_MAGIC: &str = "GAITLAB-MOMENTDB v1";

/// Serialize the database to its versioned text form. Floats use Rust's
/// shortest round-trip formatting, so write -> read -> write is bit-exact.
pub fn momentdb_to_string(db: &GalleryMomentDb) -> String {
    let mut out = String::new();
    out.push_str(MOMENTDB_MAGIC);
    out.push('\n');
    out.push_str(&format!("CONFIG,{}\n", db.config_hash));
    out.push_str(&format!("MODE,{}\n", db.mode.name()));
    for idx in &db.index_set {
        out.push_str(&format!("INDEX,{},{}\n", idx.n(), idx.m()));
    }
    for part in PartId::ALL {
        let p = &db.parts[part.index()];
        out.push_str(&format!(
            "DIMS,{},{},{}\n",
            part.name(),
            p.region_width,
            p.region_height
        ));
    }
    for part in PartId::ALL {
        let p = &db.parts[part.index()];
        for (seq_id, moments) in &p.entries {
            for (idx, z) in moments.iter() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    part.name(),
                    seq_id,
                    idx.n(),
                    idx.m(),
                    z.re,
                    z.im
                ));
            }
        }
    }
    for part in PartId::ALL {
        if let Some(stats) = db.parts[part.index()].stats {
            out.push_str(&format!(
                "STATS,{},{},{}\n",
                part.name(),
                stats.mu,
                stats.sigma
            ));
        }
    }
    out
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("bad float `{field}` in {context}")))
}

fn parse_usize(field: &str, context: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("bad count `{field}` in {context}")))
}

/// Parse the versioned text form produced by [`momentdb_to_string`].
pub fn momentdb_from_str(text: &str) -> Result<GalleryMomentDb> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == MOMENTDB_MAGIC => {}
        other => {
            return Err(Error::Format(format!(
                "expected `{MOMENTDB_MAGIC}` header, got {other:?}"
            )))
        }
    }
    let mut config_hash: Option<String> = None;
    let mut mode: Option<MomentMode> = None;
    let mut index_set: Vec<ZernikeIndex> = Vec::new();
    let mut dims: [Option<(usize, usize)>; 4] = [None; 4];
    let mut entries: [Vec<(String, ZernikeMomentSet)>; 4] = Default::default();
    let mut stats: [Option<PartStats>; 4] = [None; 4];

    for (lineno, line) in lines.enumerate() {
        let ctx = format!("moment db line {}", lineno + 2);
        let fields: Vec<&str> = line.split(',').collect();
        match fields[0] {
            "CONFIG" => {
                if fields.len() != 2 {
                    return Err(Error::Format(format!("CONFIG arity in {ctx}")));
                }
                config_hash = Some(fields[1].to_string());
            }
            "MODE" => {
                if fields.len() != 2 {
                    return Err(Error::Format(format!("MODE arity in {ctx}")));
                }
                mode = Some(MomentMode::from_name(fields[1])?);
            }
            "INDEX" => {
                if fields.len() != 3 {
                    return Err(Error::Format(format!("INDEX arity in {ctx}")));
                }
                let n = parse_usize(fields[1], &ctx)? as u32;
                let m = fields[2]
                    .parse::<i32>()
                    .map_err(|_| Error::Format(format!("bad repetition in {ctx}")))?;
                index_set.push(ZernikeIndex::new(n, m)?);
            }
            "DIMS" => {
                if fields.len() != 4 {
                    return Err(Error::Format(format!("DIMS arity in {ctx}")));
                }
                let part = PartId::from_name(fields[1])
                    .map_err(|_| Error::Format(format!("bad part name in {ctx}")))?;
                let w = parse_usize(fields[2], &ctx)?;
                let h = parse_usize(fields[3], &ctx)?;
                if w == 0 || h == 0 {
                    return Err(Error::Format(format!("zero region in {ctx}")));
                }
                dims[part.index()] = Some((w, h));
            }
            "STATS" => {
                if fields.len() != 4 {
                    return Err(Error::Format(format!("STATS arity in {ctx}")));
                }
                let part = PartId::from_name(fields[1])
                    .map_err(|_| Error::Format(format!("bad part name in {ctx}")))?;
                stats[part.index()] = Some(PartStats {
                    mu: parse_f64(fields[2], &ctx)?,
                    sigma: parse_f64(fields[3], &ctx)?,
                });
            }
            part_name => {
                // Moment record: part,seq_id,n,m,re,im
                if fields.len() != 6 {
                    return Err(Error::Format(format!("record arity in {ctx}")));
                }
                let part = PartId::from_name(part_name)
                    .map_err(|_| Error::Format(format!("bad part name `{part_name}` in {ctx}")))?;
                let seq_id = fields[1].to_string();
                let n = parse_usize(fields[2], &ctx)? as u32;
                let m = fields[3]
                    .parse::<i32>()
                    .map_err(|_| Error::Format(format!("bad repetition in {ctx}")))?;
                let idx = ZernikeIndex::new(n, m)?;
                let re = parse_f64(fields[4], &ctx)?;
                let im = parse_f64(fields[5], &ctx)?;
                let (w, h) = dims[part.index()]
                    .ok_or_else(|| Error::Format(format!("record before DIMS in {ctx}")))?;
                let slot = &mut entries[part.index()];
                match slot.last_mut() {
                    Some((last_id, set)) if *last_id == seq_id => {
                        set.insert(idx, Complex64::new(re, im));
                    }
                    _ => {
                        if slot.iter().any(|(id, _)| *id == seq_id) {
                            return Err(Error::Format(format!(
                                "non-contiguous records for sequence `{seq_id}` in {ctx}"
                            )));
                        }
                        let mut set = ZernikeMomentSet::new(w, h);
                        set.insert(idx, Complex64::new(re, im));
                        slot.push((seq_id, set));
                    }
                }
            }
        }
    }

    let config_hash = config_hash.ok_or_else(|| Error::Format("missing CONFIG line".into()))?;
    let mode = mode.ok_or_else(|| Error::Format("missing MODE line".into()))?;
    if index_set.is_empty() {
        return Err(Error::Format("missing INDEX lines".into()));
    }
    let mut parts = Vec::with_capacity(4);
    for part in PartId::ALL {
        let i = part.index();
        let (w, h) =
            dims[i].ok_or_else(|| Error::Format(format!("missing DIMS for {}", part.name())))?;
        let part_entries = std::mem::take(&mut entries[i]);
        if part_entries.is_empty() {
            return Err(Error::Format(format!(
                "no moment records for part {}",
                part.name()
            )));
        }
        for (id, set) in &part_entries {
            if set.indices() != index_set {
                return Err(Error::Format(format!(
                    "sequence `{id}` part {} does not cover the declared index set",
                    part.name()
                )));
            }
        }
        parts.push(PartDb {
            region_width: w,
            region_height: h,
            entries: part_entries,
            stats: stats[i],
        });
    }
    Ok(GalleryMomentDb {
        index_set,
        mode,
        config_hash,
        parts: parts.try_into().expect("exactly four parts"),
    })
}

pub fn write_momentdb(db: &GalleryMomentDb, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, momentdb_to_string(db)).map_err(|e| Error::io(path, e))
}

pub fn read_momentdb(path: &std::path::Path) -> Result<GalleryMomentDb> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    momentdb_from_str(&text)
}
