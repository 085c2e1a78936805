//! Markdown comparison tables over finished runs.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::harness::config::Method;
use crate::harness::run::{ExperimentResult, Means};
use crate::harness::HarnessError;

/// `round(100 · (enhanced − direct) / direct)`; `None` for a zero baseline.
pub fn relative_delta(enhanced: f64, direct: f64) -> Option<i64> {
    (direct != 0.0).then(|| (100.0 * (enhanced - direct) / direct).round() as i64)
}

pub fn format_delta(delta: Option<i64>) -> String {
    match delta {
        Some(d) if d < 0 => format!("↓{}%", -d),
        Some(d) => format!("↑{d}%"),
        None => "n/a".into(),
    }
}

fn values(m: &Means) -> [f64; 4] {
    [m.bleu, m.rouge_l, m.meteor, m.cider]
}

fn k_label(k: Option<usize>) -> String {
    k.map_or_else(|| "-".into(), |k| k.to_string())
}

/// Methods × metrics table with deltas against the first direct run, plus
/// one k-sweep series per generator that was run with several k.
pub fn render_report(results: &[ExperimentResult]) -> Result<String, HarnessError> {
    let Some(first) = results.first() else {
        return Err(HarnessError::Config("no results to report".into()));
    };
    for r in results {
        let (a, b) = (&first.manifest, &r.manifest);
        if a.corpus_sha256 != b.corpus_sha256 || a.subset_sha256 != b.subset_sha256 || a.seed != b.seed {
            return Err(HarnessError::ManifestMismatch(format!(
                "run {} used a different corpus or subset than run {}",
                b.config.output_dir.display(),
                a.config.output_dir.display()
            )));
        }
    }
    let mut ordered: Vec<&ExperimentResult> = results.iter().collect();
    ordered.sort_by(|a, b| {
        let key = |r: &ExperimentResult| {
            (
                r.manifest.method != Method::Direct,
                r.manifest.generator_id.clone(),
                r.manifest.k,
            )
        };
        key(a).cmp(&key(b))
    });
    let baseline = ordered.iter().find(|r| r.manifest.method == Method::Direct).copied();

    let m = &first.manifest;
    let mut out = String::new();
    writeln!(out, "# Experiment report\n").unwrap();
    writeln!(
        out,
        "Corpus `{}` (sha256 {}), {} sampled commits, seed {}.\n",
        m.corpus.display(),
        &m.corpus_sha256[..12.min(m.corpus_sha256.len())],
        m.subset_size,
        m.seed
    )
    .unwrap();
    writeln!(
        out,
        "| Method | Generator | k | BLEU | ROUGE-L | METEOR | CIDEr | Failed |"
    )
    .unwrap();
    writeln!(out, "| --- | --- | --- | --- | --- | --- | --- | --- |").unwrap();
    for r in &ordered {
        let rm = &r.manifest;
        let method = match rm.method {
            Method::Direct => "Direct",
            Method::Rag => "Enhanced",
        };
        let mut cells = Vec::new();
        for (i, v) in values(&rm.means).into_iter().enumerate() {
            let mut cell = format!("{v:.2}");
            if let Some(base) = baseline.filter(|_| rm.method == Method::Rag) {
                let d = relative_delta(v, values(&base.manifest.means)[i]);
                cell.push_str(&format!(" ({})", format_delta(d)));
            }
            cells.push(cell);
        }
        writeln!(
            out,
            "| {method} | {} | {} | {} | {} |",
            rm.generator_id,
            k_label(rm.k),
            cells.join(" | "),
            rm.failed
        )
        .unwrap();
    }

    let mut sweeps: BTreeMap<&str, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in ordered.iter().filter(|r| r.manifest.method == Method::Rag) {
        sweeps.entry(r.manifest.generator_id.as_str()).or_default().push(r);
    }
    for (generator, runs) in sweeps {
        let mut ks: Vec<usize> = runs.iter().filter_map(|r| r.manifest.k).collect();
        ks.dedup();
        if ks.len() < 2 {
            continue;
        }
        writeln!(out, "\n## k sweep: {generator}\n").unwrap();
        writeln!(out, "| k | BLEU | ROUGE-L | METEOR | CIDEr |").unwrap();
        writeln!(out, "| --- | --- | --- | --- | --- |").unwrap();
        for r in &runs {
            let v = values(&r.manifest.means);
            writeln!(
                out,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                k_label(r.manifest.k),
                v[0],
                v[1],
                v[2],
                v[3]
            )
            .unwrap();
        }
        let series: Vec<String> = runs.iter().map(|r| format!("{:.2}", r.manifest.means.bleu)).collect();
        writeln!(out, "\nBLEU by k: {}", series.join(" → ")).unwrap();
    }
    Ok(out)
}
