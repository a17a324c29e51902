//! Shared plumbing: per-sequence template/feature extraction, enrollment
//! and identification.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::aesi::{
    assemble_sub_aesi, build_aesi, build_aesi_full, enumerate_part_sets, part_row_bounds,
    segment_parts, Aesi, PartAesi, PartSet,
};
use crate::classifier::{
    decision_scores, rank_list, train_ovr_svm, ModelBank, SvmModel,
};
use crate::config::PipelineConfig;
use crate::covariate::{
    build_moment_db, compute_part_stats, screen, GalleryMomentDb, ScreenResult,
};
use crate::error::{Error, Result};
use crate::features::{extract_fused, FusedFeature};
use crate::gaitcycle::estimate_gait_period;
use crate::grid::BinaryMask;
use crate::silhouette::{extract_bounding_box, normalize_silhouette, GaitSequence};
use crate::zernike::{ZernikeBasis, ZernikeMomentSet};

/// Everything the pipeline derives from one sequence.
#[derive(Debug, Clone)]
pub struct SequenceArtifacts {
    pub subject: String,
    pub sequence: String,
    pub condition: String,
    pub aesi: Aesi,
    pub parts: [PartAesi; 4],
    pub part_moments: [ZernikeMomentSet; 4],
    /// Fused feature per part-combination bitmask (all 15).
    pub features: BTreeMap<u8, FusedFeature>,
}

impl SequenceArtifacts {
    /// Unique key used in the moment database.
    pub fn key(&self) -> String {
        format!("{}/{}", self.subject, self.sequence)
    }
}

/// Moment bases for the four part regions of a given normalization size.
/// The band heights only depend on that size, so one set serves every
/// sequence.
pub struct PartBases {
    bases: [ZernikeBasis; 4],
}

impl PartBases {
    pub fn new(config: &PipelineConfig) -> Result<PartBases> {
        let h = config.normalization.target_height;
        let w = config.normalization.target_width;
        let (b1, b2, b3) = part_row_bounds(h);
        let heights = [b1, b2 - b1, b3 - b2, h - b3];
        let mut bases = Vec::with_capacity(4);
        for part_h in heights {
            if part_h == 0 {
                return Err(Error::DegenerateInput(format!(
                    "normalization height {h} leaves an empty body band"
                )));
            }
            bases.push(ZernikeBasis::new(w, part_h, &config.zernike_indices)?);
        }
        Ok(PartBases {
            bases: bases.try_into().map_err(|_| {
                Error::DegenerateInput("expected exactly four part bases".into())
            })?,
        })
    }
}

/// Normalize every frame of a sequence, skipping empty silhouettes.
pub fn normalize_frames(seq: &GaitSequence, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    let mut out = Vec::with_capacity(seq.frames.len());
    for (i, frame) in seq.frames.iter().enumerate() {
        match extract_bounding_box(frame) {
            Ok(bbox) => out.push(normalize_silhouette(frame, &bbox, &config.normalization)?),
            Err(Error::EmptySilhouette) => {
                log::debug!(
                    "skipping empty frame {i} of {}/{}",
                    seq.subject_id,
                    seq.sequence_id
                );
            }
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "sequence {}/{} has no non-empty frames",
            seq.subject_id, seq.sequence_id
        )));
    }
    Ok(out)
}

/// Build the template for normalized frames: averaged over the first full
/// gait period when one is detectable, otherwise over the whole sequence.
pub fn build_template(frames: &[BinaryMask], config: &PipelineConfig) -> Result<Aesi> {
    match estimate_gait_period(frames, config.smoothing_window) {
        Ok(period) => build_aesi(frames, &period),
        Err(Error::InsufficientCycles(_)) | Err(Error::Parameter(_)) => build_aesi_full(frames),
        Err(e) => Err(e),
    }
}

/// Run the full per-sequence stage: normalize, estimate the period,
/// average, segment, compute part moments and all 15 fused features.
pub fn process_sequence(
    seq: &GaitSequence,
    config: &PipelineConfig,
    bases: &PartBases,
) -> Result<SequenceArtifacts> {
    let frames = normalize_frames(seq, config)?;
    let aesi = build_template(&frames, config)?;
    let parts = segment_parts(&aesi)?;

    let mut part_moments = Vec::with_capacity(4);
    for (part, basis) in parts.iter().zip(&bases.bases) {
        part_moments.push(basis.moments(&part.grid)?);
    }

    let mut features = BTreeMap::new();
    for set in enumerate_part_sets() {
        let sub = assemble_sub_aesi(&parts, set)?;
        let fused = extract_fused(&sub, config.sdog_bins, &config.sdog_levels, config.sdog_norm)?;
        features.insert(set.bits(), fused);
    }

    Ok(SequenceArtifacts {
        subject: seq.subject_id.clone(),
        sequence: seq.sequence_id.clone(),
        condition: seq.condition_tag.clone(),
        aesi,
        parts,
        part_moments: part_moments
            .try_into()
            .map_err(|_| Error::DegenerateInput("expected four moment sets".into()))?,
        features,
    })
}

/// Process many sequences in parallel, preserving order.
pub fn process_sequences(
    seqs: &[GaitSequence],
    config: &PipelineConfig,
    bases: &PartBases,
) -> Result<Vec<SequenceArtifacts>> {
    seqs.par_iter()
        .map(|s| process_sequence(s, config, bases))
        .collect()
}

/// Gallery-side artifacts produced by enrollment.
pub struct EnrollArtifacts {
    pub db: GalleryMomentDb,
    pub bank: ModelBank,
}

/// Build the finalized moment database and all 15 per-combination models
/// from gallery artifacts.
pub fn enroll(gallery: &[SequenceArtifacts], config: &PipelineConfig) -> Result<EnrollArtifacts> {
    if gallery.len() < 2 {
        return Err(Error::InsufficientGallery(format!(
            "enrollment needs at least 2 gallery sequences, got {}",
            gallery.len()
        )));
    }
    let hash = config.config_hash();

    let db_input: Vec<(String, [PartAesi; 4])> = gallery
        .iter()
        .map(|a| (a.key(), a.parts.clone()))
        .collect();
    let db = build_moment_db(&db_input, &config.zernike_indices, config.moment_mode, &hash)?;
    let db = compute_part_stats(db)?;

    let labels: Vec<String> = gallery.iter().map(|a| a.subject.clone()).collect();
    let models: Vec<SvmModel> = enumerate_part_sets()
        .into_par_iter()
        .map(|set| {
            let features: Vec<FusedFeature> = gallery
                .iter()
                .map(|a| a.features[&set.bits()].clone())
                .collect();
            train_ovr_svm(&features, &labels, &config.svm)
        })
        .collect::<Result<_>>()?;

    let mut bank = ModelBank::new(&hash);
    for model in models {
        bank.insert(model)?;
    }
    Ok(EnrollArtifacts { db, bank })
}

/// Identification outcome for one probe.
#[derive(Debug, Clone)]
pub struct IdentifyReport {
    pub screen: ScreenResult,
    /// Combination actually used for classification.
    pub combination: PartSet,
    /// `(label, score)` in rank order.
    pub ranked: Vec<(String, f64)>,
}

impl IdentifyReport {
    pub fn predicted(&self) -> &str {
        &self.ranked[0].0
    }

    pub fn ranked_labels(&self) -> Vec<String> {
        self.ranked.iter().map(|(l, _)| l.clone()).collect()
    }
}

/// Screen a probe and classify it with the model of its clean combination.
pub fn identify(
    probe: &SequenceArtifacts,
    db: &GalleryMomentDb,
    bank: &ModelBank,
    config: &PipelineConfig,
) -> Result<IdentifyReport> {
    let screen_result = screen(&probe.part_moments, db, config.k_sigma)?;
    let combination = if config.screening {
        screen_result.clean_set
    } else {
        PartSet::FULL
    };
    let model = bank.get(combination).ok_or_else(|| {
        Error::Format(format!(
            "model bank has no model for combination {combination}"
        ))
    })?;
    let feature = probe.features.get(&combination.bits()).ok_or_else(|| {
        Error::Parameter(format!("probe lacks features for combination {combination}"))
    })?;
    let scores = decision_scores(model, feature)?;
    let ranked_labels = rank_list(&model.classes, &scores);
    let ranked = ranked_labels
        .into_iter()
        .map(|label| {
            let pos = model.classes.iter().position(|c| *c == label).expect("label");
            (label, scores[pos])
        })
        .collect();
    Ok(IdentifyReport {
        screen: screen_result,
        combination,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::silhouette::NormalizationSpec;
    use crate::synth::{generate, Injection, SynthConfig};

    fn test_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.normalization = NormalizationSpec::new(100, 70).unwrap();
        cfg.svm.max_iterations = 200;
        cfg
    }

    fn synth_cfg(seed: u64) -> SynthConfig {
        SynthConfig {
            subjects: 3,
            sequences_per_subject: 2,
            frames_per_sequence: 50,
            cycle_length: 20,
            injection: Injection::None,
            seed,
            normalization: NormalizationSpec::new(100, 70).unwrap(),
        }
    }

    #[test]
    fn artifacts_cover_all_combinations() {
        let cfg = test_config();
        let bases = PartBases::new(&cfg).unwrap();
        let seqs = generate(&synth_cfg(5)).unwrap();
        let art = process_sequence(&seqs[0], &cfg, &bases).unwrap();
        assert_eq!(art.features.len(), 15);
        assert_eq!(art.aesi.grid.height(), 100);
        assert!(art.aesi.grid.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Full-combination feature: 189 SDOG values plus half the rows.
        assert_eq!(art.features[&15].values.len(), 189 + 50);
    }

    #[test]
    fn enroll_then_identify_gallery_member() {
        let cfg = test_config();
        let bases = PartBases::new(&cfg).unwrap();
        let seqs = generate(&synth_cfg(7)).unwrap();
        let arts = process_sequences(&seqs, &cfg, &bases).unwrap();
        let enrolled = enroll(&arts, &cfg).unwrap();
        assert_eq!(enrolled.bank.len(), 15);

        let report = identify(&arts[0], &enrolled.db, &enrolled.bank, &cfg).unwrap();
        assert_eq!(report.predicted(), arts[0].subject);
        assert_eq!(report.combination, PartSet::FULL);
        assert!(!report.screen.fallback_all_infected);
    }

    #[test]
    fn enrollment_needs_two_subjects() {
        let cfg = test_config();
        let bases = PartBases::new(&cfg).unwrap();
        let mut synth = synth_cfg(9);
        synth.subjects = 1;
        synth.sequences_per_subject = 3;
        let seqs = generate(&synth).unwrap();
        let arts = process_sequences(&seqs, &cfg, &bases).unwrap();
        assert!(matches!(
            enroll(&arts, &cfg),
            Err(Error::InsufficientClasses(_))
        ));
    }
}
