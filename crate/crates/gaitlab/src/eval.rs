//! Evaluation harness: correct classification rate, cumulative match
//! characteristic curves, fixed-split evaluation and leave-one-out cross
//! validation.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::aesi::PartSet;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::pipeline::{
    enroll, identify, process_sequences, PartBases, SequenceArtifacts,
};
use crate::silhouette::GaitSequence;

/// One identification attempt.
#[derive(Debug, Clone)]
pub struct ProbeRecord {
    pub subject: String,
    pub sequence: String,
    /// Ranked predictions, best first.
    pub predicted: Vec<String>,
    pub clean_set: PartSet,
    pub fallback_all_infected: bool,
}

impl ProbeRecord {
    /// 1-based rank of the true subject, if present.
    pub fn rank_of_truth(&self) -> Option<usize> {
        self.predicted
            .iter()
            .position(|p| *p == self.subject)
            .map(|i| i + 1)
    }
}

/// Aggregated evaluation results.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rank1_ccr: f64,
    /// `(rank, percent)` pairs for ranks `1..=num_classes`.
    pub cmc: Vec<(usize, f64)>,
    pub probes: Vec<ProbeRecord>,
    /// `(true subject, rank-1 prediction) -> count`.
    pub confusion: BTreeMap<(String, String), usize>,
}

/// Percentage of correct decisions.
pub fn ccr(correct: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::Parameter("ccr of zero probes".into()));
    }
    if correct > total {
        return Err(Error::Parameter(format!(
            "correct {correct} exceeds total {total}"
        )));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Cumulative match characteristic over ranked predictions.
///
/// All ranked lists must cover one common class set that contains every
/// true label; `curve[r - 1]` is the percentage of probes whose true
/// label appears within the top `r` ranks.
pub fn cmc(ranked: &[Vec<String>], truth: &[String]) -> Result<Vec<(usize, f64)>> {
    if ranked.is_empty() || ranked.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} ranked lists vs {} labels",
            ranked.len(),
            truth.len()
        )));
    }
    let num_classes = ranked[0].len();
    if ranked.iter().any(|r| r.len() != num_classes) {
        return Err(Error::Parameter(
            "ranked lists must cover the same class set".into(),
        ));
    }
    let mut found_at = Vec::with_capacity(truth.len());
    for (list, label) in ranked.iter().zip(truth) {
        let rank = list
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| Error::Parameter(format!("label `{label}` not in class set")))?;
        found_at.push(rank + 1);
    }
    let total = truth.len() as f64;
    let curve = (1..=num_classes)
        .map(|r| {
            let hits = found_at.iter().filter(|&&rank| rank <= r).count();
            (r, 100.0 * hits as f64 / total)
        })
        .collect();
    Ok(curve)
}

fn assemble_report(probes: Vec<ProbeRecord>) -> Result<EvalReport> {
    let ranked: Vec<Vec<String>> = probes.iter().map(|p| p.predicted.clone()).collect();
    let truth: Vec<String> = probes.iter().map(|p| p.subject.clone()).collect();
    let curve = cmc(&ranked, &truth)?;
    let correct = probes
        .iter()
        .filter(|p| p.predicted.first() == Some(&p.subject))
        .count();
    let rank1 = ccr(correct, probes.len())?;
    let mut confusion = BTreeMap::new();
    for p in &probes {
        let key = (p.subject.clone(), p.predicted[0].clone());
        *confusion.entry(key).or_insert(0) += 1;
    }
    Ok(EvalReport {
        rank1_ccr: rank1,
        cmc: curve,
        probes,
        confusion,
    })
}

fn probe_record(art: &SequenceArtifacts, report: &crate::pipeline::IdentifyReport) -> ProbeRecord {
    ProbeRecord {
        subject: art.subject.clone(),
        sequence: art.sequence.clone(),
        predicted: report.ranked_labels(),
        clean_set: report.screen.clean_set,
        fallback_all_infected: report.screen.fallback_all_infected,
    }
}

/// Enroll `gallery` once and identify every probe against it.
pub fn split_evaluate(
    gallery: &[GaitSequence],
    probes: &[GaitSequence],
    config: &PipelineConfig,
) -> Result<EvalReport> {
    let bases = PartBases::new(config)?;
    let gallery_arts = process_sequences(gallery, config, &bases)?;
    let probe_arts = process_sequences(probes, config, &bases)?;
    let enrolled = enroll(&gallery_arts, config)?;
    let records: Vec<ProbeRecord> = probe_arts
        .par_iter()
        .map(|art| identify(art, &enrolled.db, &enrolled.bank, config).map(|r| probe_record(art, &r)))
        .collect::<Result<_>>()?;
    assemble_report(records)
}

/// Leave-one-out cross validation.
///
/// Every sequence is held out in turn with the remainder as gallery; the
/// moment statistics and all 15 models are rebuilt per fold so nothing
/// leaks from the probe. Subjects with a single sequence cannot appear in
/// their own gallery and are excluded with a warning.
pub fn leave_one_out(sequences: &[GaitSequence], config: &PipelineConfig) -> Result<EvalReport> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in sequences {
        *counts.entry(s.subject_id.as_str()).or_insert(0) += 1;
    }
    let mut usable: Vec<&GaitSequence> = Vec::with_capacity(sequences.len());
    for s in sequences {
        if counts[s.subject_id.as_str()] < 2 {
            log::warn!(
                "excluding subject {} from leave-one-out: only one sequence",
                s.subject_id
            );
        } else {
            usable.push(s);
        }
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientGallery(format!(
            "leave-one-out needs at least 3 usable sequences, got {}",
            usable.len()
        )));
    }

    let bases = PartBases::new(config)?;
    let owned: Vec<GaitSequence> = usable.iter().map(|s| (*s).clone()).collect();
    let arts = process_sequences(&owned, config, &bases)?;

    let records: Vec<ProbeRecord> = (0..arts.len())
        .into_par_iter()
        .map(|held_out| {
            let gallery: Vec<SequenceArtifacts> = arts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .map(|(_, a)| a.clone())
                .collect();
            let enrolled = enroll(&gallery, config)?;
            let probe = &arts[held_out];
            let report = identify(probe, &enrolled.db, &enrolled.bank, config)?;
            Ok(probe_record(probe, &report))
        })
        .collect::<Result<_>>()?;
    assemble_report(records)
}

/// Per-probe rows: subject, sequence, rank-1 prediction, rank of the true
/// label, screened part set and fallback flag.
pub fn write_report_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("subject,sequence,predicted,rank_of_truth,clean_parts,fallback\n");
    for p in &report.probes {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.subject,
            p.sequence,
            p.predicted[0],
            p.rank_of_truth()
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".into()),
            p.clean_set,
            p.fallback_all_infected
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `rank,percent` rows.
pub fn write_cmc_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("rank,percent\n");
    for (rank, percent) in &report.cmc {
        out.push_str(&format!("{rank},{percent}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Human-readable summary block.
pub fn summary_string(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("probes: {}\n", report.probes.len()));
    out.push_str(&format!("rank-1 CCR: {:.2}%\n", report.rank1_ccr));
    for (rank, percent) in report.cmc.iter().take(5) {
        out.push_str(&format!("CMC({rank}): {percent:.2}%\n"));
    }
    let screened = report
        .probes
        .iter()
        .filter(|p| p.clean_set != PartSet::FULL)
        .count();
    out.push_str(&format!("probes with excluded parts: {screened}\n"));
    out
}
