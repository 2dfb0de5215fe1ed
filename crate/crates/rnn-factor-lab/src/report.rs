//! Plain-text and CSV rendering of accounting/benchmark reports.

use rnn_factor_core::accounting::BenchReport;

pub const REPORT_CSV_HEADER: &str = "label,rnn_params,gate_macs,words_per_sec";

fn words_cell(report: &BenchReport) -> String {
    match report.measured_words_per_sec {
        Some(wps) => format!("{wps:.1}"),
        None => "no measurement".to_string(),
    }
}

/// Aligned fixed-width table with one row per configuration.
pub fn text_table(reports: &[BenchReport]) -> String {
    let headers = ["label", "rnn_params", "gate_macs", "words_per_sec"];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.total_rnn_params.to_string(),
                r.gate_macs.to_string(),
                words_cell(r),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: &[String; 4], widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}"));
        }
        line.trim_end().to_string()
    };
    let header_cells: [String; 4] = headers.map(String::from);
    out.push_str(&fmt_row(&header_cells, &widths));
    out.push('\n');
    for row in &rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    out
}

/// CSV with columns `label,rnn_params,gate_macs,words_per_sec`; the rate
/// column is left empty when nothing was measured.
pub fn csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let words = match r.measured_words_per_sec {
            Some(wps) => format!("{wps:.3}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label, r.total_rnn_params, r.gate_macs, words
        ));
    }
    out
}
