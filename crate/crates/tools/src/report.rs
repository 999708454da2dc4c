//! Report rendering: every report exists as machine JSON and a human table.

use std::path::Path;

use anyhow::{Context, Result};

use scop_core::constraints::{StageStats, Stage};
use scop_core::proxy::RetrievalReport;
use scop_core::visor::VisorScores;

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn stats_table(stats: &StageStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<24} {:>12}\n", "stage", "count"));
    out.push_str(&format!("{:<24} {:>12}\n", "candidates", stats.candidates));
    for stage in Stage::ORDER {
        out.push_str(&format!(
            "{:<24} {:>12}\n",
            format!("- {}", stage.name()),
            stats.drops.get(stage)
        ));
    }
    out.push_str(&format!("{:<24} {:>12}\n", "survivors", stats.survivors));
    if stats.degenerate_relations > 0 {
        out.push_str(&format!(
            "{:<24} {:>12}\n",
            "degenerate relations", stats.degenerate_relations
        ));
    }
    out
}

pub fn retrieval_table(report: &RetrievalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "rephrased", "negated", "swapped", "skipped", "correct"
    ));
    out.push_str(&format!(
        "{:>10} {:>10} {:>10} {:>10} {:>9.2}%\n",
        report.rephrased,
        report.negated,
        report.swapped,
        report.skipped,
        report.correct_rate * 100.0
    ));
    out
}

pub fn visor_table(scores: &VisorScores) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>8} {:>8} {:>7} {:>7} {:>7} {:>7} {:>8}\n",
        "uncond", "cond", "1", "2", "3", "4", "OA"
    ));
    out.push_str(&format!(
        "{:>8.2} {:>8.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>8.2}\n",
        scores.uncond * 100.0,
        scores.cond * 100.0,
        scores.visor[0] * 100.0,
        scores.visor[1] * 100.0,
        scores.visor[2] * 100.0,
        scores.visor[3] * 100.0,
        scores.oa * 100.0
    ));
    out
}
