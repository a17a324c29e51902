//! The operations behind the CLI subcommands, usable as a library.

use std::path::{Path, PathBuf};

use crate::classifier::{read_modelbank, write_modelbank, ModelBank};
use crate::config::PipelineConfig;
use crate::covariate::{read_momentdb, write_momentdb, GalleryMomentDb};
use crate::dataset::{
    load_frames_dir, load_manifest, load_sequence, write_dataset, write_grid_png, Role,
};
use crate::error::{Error, Result};
use crate::eval::{
    leave_one_out, split_evaluate, write_cmc_csv, write_report_csv, EvalReport,
};
use crate::pipeline::{
    enroll, identify, process_sequence, process_sequences, IdentifyReport, PartBases,
    SequenceArtifacts,
};
use crate::silhouette::GaitSequence;
use crate::synth::{generate, Injection, SynthConfig};
use crate::zernike::{compute_moments, ZernikeIndex};

pub const MOMENTDB_FILE: &str = "momentdb.txt";
pub const MODELBANK_FILE: &str = "modelbank.txt";

fn dump_features_csv(arts: &[SequenceArtifacts], path: &Path) -> Result<()> {
    let mut out = String::new();
    for art in arts {
        for (bits, feature) in &art.features {
            let values: Vec<String> = feature.values.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                art.subject,
                art.sequence,
                bits,
                values.join(",")
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn load_gallery_sequences(root: &Path) -> Result<Vec<GaitSequence>> {
    let manifest = load_manifest(root)?;
    let gallery: Vec<GaitSequence> = manifest
        .entries
        .iter()
        .filter(|e| e.role == Role::Gallery)
        .map(|e| load_sequence(root, e))
        .collect::<Result<_>>()?;
    if gallery.len() < 2 {
        return Err(Error::InsufficientGallery(format!(
            "manifest lists {} gallery sequences, need at least 2",
            gallery.len()
        )));
    }
    Ok(gallery)
}

/// Enrollment summary returned for reporting.
pub struct EnrollSummary {
    pub gallery_sequences: usize,
    pub subjects: usize,
    pub moment_db_path: PathBuf,
    pub model_bank_path: PathBuf,
}

/// Build and persist the moment database and model bank from the gallery
/// entries of `<root>/dataset.json`.
pub fn cmd_enroll(
    root: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
    dump_features: Option<&Path>,
) -> Result<EnrollSummary> {
    let gallery = load_gallery_sequences(root)?;
    let subjects: std::collections::BTreeSet<&str> =
        gallery.iter().map(|s| s.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(Error::InsufficientClasses(format!(
            "enrollment needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let bases = PartBases::new(config)?;
    let arts = process_sequences(&gallery, config, &bases)?;
    let enrolled = enroll(&arts, config)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let moment_db_path = out_dir.join(MOMENTDB_FILE);
    let model_bank_path = out_dir.join(MODELBANK_FILE);
    write_momentdb(&enrolled.db, &moment_db_path)?;
    write_modelbank(&enrolled.bank, &model_bank_path)?;
    if let Some(path) = dump_features {
        dump_features_csv(&arts, path)?;
    }
    Ok(EnrollSummary {
        gallery_sequences: gallery.len(),
        subjects: subjects.len(),
        moment_db_path,
        model_bank_path,
    })
}

fn check_artifact_compatibility(
    db: &GalleryMomentDb,
    bank: &ModelBank,
    config: &PipelineConfig,
) -> Result<()> {
    let expected = config.config_hash();
    if db.config_hash() != expected {
        return Err(Error::Incompatible(format!(
            "moment database was built under config {} but the current config hashes to {expected}",
            db.config_hash()
        )));
    }
    if bank.config_hash() != expected {
        return Err(Error::Incompatible(format!(
            "model bank was built under config {} but the current config hashes to {expected}",
            bank.config_hash()
        )));
    }
    Ok(())
}

/// Screen and classify a probe sequence directory against persisted
/// artifacts.
pub fn cmd_identify(
    probe_dir: &Path,
    moment_db_path: &Path,
    model_bank_path: &Path,
    config: &PipelineConfig,
) -> Result<IdentifyReport> {
    let db = read_momentdb(moment_db_path)?;
    let bank = read_modelbank(model_bank_path)?;
    check_artifact_compatibility(&db, &bank, config)?;

    let frames = load_frames_dir(probe_dir)?;
    let name = probe_dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("probe");
    let seq = GaitSequence::new(frames, "probe", name, "unknown")?;
    let bases = PartBases::new(config)?;
    let art = process_sequence(&seq, config, &bases)?;
    identify(&art, &db, &bank, config)
}

/// Evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Gallery and probe roles from the manifest.
    Split,
    /// Every sequence held out in turn; roles are ignored.
    Loo,
}

/// Run an evaluation over `<root>/dataset.json` and write `report.csv`
/// and `cmc.csv` into `out_dir`.
pub fn cmd_evaluate(
    root: &Path,
    config: &PipelineConfig,
    mode: EvalMode,
    out_dir: &Path,
    dump_features: Option<&Path>,
) -> Result<EvalReport> {
    let manifest = load_manifest(root)?;
    let report = match mode {
        EvalMode::Loo => {
            let sequences: Vec<GaitSequence> = manifest
                .entries
                .iter()
                .map(|e| load_sequence(root, e))
                .collect::<Result<_>>()?;
            leave_one_out(&sequences, config)?
        }
        EvalMode::Split => {
            let mut gallery = Vec::new();
            let mut probes = Vec::new();
            for e in &manifest.entries {
                match e.role {
                    Role::Gallery => gallery.push(load_sequence(root, e)?),
                    Role::Probe => probes.push(load_sequence(root, e)?),
                }
            }
            if gallery.is_empty() || probes.is_empty() {
                return Err(Error::Manifest(
                    "split mode needs both gallery and probe roles in the manifest".into(),
                ));
            }
            split_evaluate(&gallery, &probes, config)?
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_report_csv(&report, &out_dir.join("report.csv"))?;
    write_cmc_csv(&report, &out_dir.join("cmc.csv"))?;
    if let Some(path) = dump_features {
        let sequences: Vec<GaitSequence> = manifest
            .entries
            .iter()
            .map(|e| load_sequence(root, e))
            .collect::<Result<_>>()?;
        let bases = PartBases::new(config)?;
        let arts = process_sequences(&sequences, config, &bases)?;
        dump_features_csv(&arts, path)?;
    }
    Ok(report)
}

/// Synthesize a dataset: clean gallery sequences, plus optional probe
/// sequences carrying a covariate.
pub fn cmd_synth(
    out_root: &Path,
    config: &SynthConfig,
    probe_sequences: usize,
    probe_injection: Injection,
) -> Result<usize> {
    let mut items: Vec<(GaitSequence, Role)> = Vec::new();
    let gallery_cfg = SynthConfig {
        injection: Injection::None,
        ..config.clone()
    };
    for seq in generate(&gallery_cfg)? {
        items.push((seq, Role::Gallery));
    }
    if probe_sequences > 0 {
        let probe_cfg = SynthConfig {
            sequences_per_subject: probe_sequences,
            injection: probe_injection,
            ..config.clone()
        };
        for seq in generate(&probe_cfg)? {
            items.push((seq, Role::Probe));
        }
    }
    let count = items.len();
    write_dataset(out_root, &items)?;
    Ok(count)
}

/// Moment set of a grayscale image as CSV rows `n,m,re,im,magnitude`.
pub fn cmd_zernike(image_path: &Path, indices: &[ZernikeIndex]) -> Result<String> {
    let grid = crate::dataset::load_gray_grid(image_path)?;
    let set = compute_moments(&grid, indices)?;
    let mut out = String::from("n,m,re,im,magnitude\n");
    for (idx, z) in set.iter() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            idx.n(),
            idx.m(),
            z.re,
            z.im,
            z.norm()
        ));
    }
    Ok(out)
}

/// Build the energy template of a frame directory and export it as an
/// 8-bit PNG; optionally dump the four part slices alongside.
pub fn cmd_build_aesi(
    frames_dir: &Path,
    out_path: &Path,
    dump_parts: Option<&Path>,
    config: &PipelineConfig,
) -> Result<()> {
    let frames = load_frames_dir(frames_dir)?;
    let name = frames_dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("sequence");
    let seq = GaitSequence::new(frames, "subject", name, "unknown")?;
    let normalized = crate::pipeline::normalize_frames(&seq, config)?;
    let aesi = crate::pipeline::build_template(&normalized, config)?;
    write_grid_png(&aesi.grid, out_path)?;
    if let Some(dir) = dump_parts {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let parts = crate::aesi::segment_parts(&aesi)?;
        for part in &parts {
            write_grid_png(
                &part.grid,
                &dir.join(format!("{}.png", part.part.name())),
            )?;
        }
    }
    Ok(())
}

/// Format an identification report for terminal output.
pub fn format_identify_report(report: &IdentifyReport) -> String {
    let mut out = String::new();
    out.push_str("part screening:\n");
    for p in &report.screen.per_part {
        out.push_str(&format!(
            "  {:<6} distance {:.6} threshold {:.6} -> {}\n",
            p.part.name(),
            p.distance,
            p.threshold,
            if p.infected { "infected" } else { "clean" }
        ));
    }
    if report.screen.fallback_all_infected {
        out.push_str("  all parts flagged; falling back to the full template\n");
    }
    out.push_str(&format!(
        "clean parts: {}\nusing combination: {}\n",
        report.screen.clean_set, report.combination
    ));
    out.push_str("ranked identities:\n");
    for (rank, (label, score)) in report.ranked.iter().enumerate() {
        out.push_str(&format!("  {:>2}. {label} (score {score:.6})\n", rank + 1));
    }
    out
}

