//! The ordering-injection property suite behind `scop tenor-check`.

use serde::Serialize;

use scop_core::rng::Stream;
use scop_core::tenor::{
    attention_weights, attention_with_custom_pe, attention_with_injection, sinusoidal_pe,
    InjectionMode, Matrix, Projections, TokenSequence,
};

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub tokens: usize,
    pub model_dim: usize,
    pub head_dim: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            tokens: 6,
            model_dim: 12,
            head_dim: 8,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub requirement: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
    pub passed: bool,
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "{:<34} {:>9} measured {:>12.3e} ({})\n",
                row.name,
                if row.passed { "PASS" } else { "FAIL" },
                row.measured,
                row.requirement,
            ));
        }
        out.push_str(&format!(
            "tenor-check: {}\n",
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }
}

fn fixture(cfg: &CheckConfig) -> (Matrix, TokenSequence, Projections) {
    let mut stream = Stream::new(cfg.seed);
    let mut rows = Vec::new();
    for _ in 0..4 {
        rows.push((0..cfg.head_dim).map(|_| stream.next_signed()).collect());
    }
    let image_queries = Matrix::from_rows(rows).expect("rectangular");
    let mut trows = Vec::new();
    for _ in 0..cfg.tokens {
        trows.push((0..cfg.model_dim).map(|_| stream.next_signed()).collect());
    }
    let text = TokenSequence {
        embeddings: Matrix::from_rows(trows).expect("rectangular"),
    };
    let proj = Projections::seeded(cfg.seed ^ 0xabcd, cfg.model_dim, cfg.head_dim);
    (image_queries, text, proj)
}

/// Rotate-by-one permutation: nontrivial for every length >= 2.
fn rotation(n: usize) -> Vec<usize> {
    (0..n).map(|i| (i + 1) % n).collect()
}

/// Run the full property suite and report measured values.
pub fn run_checks(cfg: &CheckConfig) -> CheckReport {
    let (img, text, proj) = fixture(cfg);
    let perm = rotation(cfg.tokens);
    let shuffled = text.permuted(&perm);
    let m = img.rows();
    let mut rows = Vec::new();

    // Baseline attention treats tokens as a set.
    let base_none = attention_with_injection(&img, &text, &proj, InjectionMode::None).unwrap();
    let perm_none = attention_with_injection(&img, &shuffled, &proj, InjectionMode::None).unwrap();
    let invariance = base_none.top_rows(m).max_abs_diff(&perm_none.top_rows(m));
    rows.push(CheckRow {
        name: "none_permutation_invariance".into(),
        passed: invariance < 1e-12,
        measured: invariance,
        requirement: "max abs diff < 1e-12".into(),
    });

    // Injection modes must see the order change.
    for mode in [InjectionMode::UnetK, InjectionMode::MmditQk] {
        let base = attention_with_injection(&img, &text, &proj, mode).unwrap();
        let perm_out = attention_with_injection(&img, &shuffled, &proj, mode).unwrap();
        let norm = base.top_rows(m).diff_norm(&perm_out.top_rows(m));
        rows.push(CheckRow {
            name: format!("{}_order_sensitivity", mode.name()),
            passed: norm > 1e-3,
            measured: norm,
            requirement: "diff norm > 1e-3".into(),
        });
    }

    // Attention rows are probability distributions in every mode.
    let mut worst_row_error = 0.0f64;
    for mode in InjectionMode::ALL {
        let w = attention_weights(&img, &text, &proj, mode).unwrap();
        for r in 0..w.rows() {
            let sum: f64 = w.row(r).iter().sum();
            worst_row_error = worst_row_error.max((sum - 1.0).abs());
        }
    }
    rows.push(CheckRow {
        name: "softmax_rows_sum_to_one".into(),
        passed: worst_row_error < 1e-12,
        measured: worst_row_error,
        requirement: "max |sum - 1| < 1e-12".into(),
    });

    // Zero position encodings collapse every mode onto the baseline.
    let zeros = Matrix::zeros(cfg.tokens, cfg.head_dim);
    let baseline =
        attention_with_custom_pe(&img, &text, &proj, InjectionMode::None, &zeros).unwrap();
    let mut zero_pe_diff = 0.0f64;
    for mode in InjectionMode::ALL {
        let out = attention_with_custom_pe(&img, &text, &proj, mode, &zeros).unwrap();
        zero_pe_diff = zero_pe_diff.max(out.max_abs_diff(&baseline));
    }
    rows.push(CheckRow {
        name: "zero_pe_collapses_to_baseline".into(),
        passed: zero_pe_diff == 0.0,
        measured: zero_pe_diff,
        requirement: "exactly 0".into(),
    });

    // Positions must stay distinguishable over a long range.
    let mut seen = std::collections::BTreeSet::new();
    let mut collisions = 0u64;
    for p in 0..=10_000usize {
        let pe = sinusoidal_pe(p, cfg.head_dim).unwrap();
        let key: Vec<u64> = pe.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            collisions += 1;
        }
    }
    rows.push(CheckRow {
        name: "pe_injective_over_positions".into(),
        passed: collisions == 0,
        measured: collisions as f64,
        requirement: "0 collisions in 0..=10000".into(),
    });

    let passed = rows.iter().all(|r| r.passed);
    CheckReport { rows, passed }
}
