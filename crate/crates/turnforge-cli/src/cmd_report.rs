//! `report`: render a stats report JSON as an aligned text table.

use std::path::PathBuf;

use clap::Args;

use crate::pipeline::RunStatus;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// report.json produced by the stats command
    #[arg(long = "report")]
    pub report: PathBuf,

    /// Write the table here instead of stdout
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Aligned-column table, one row per (feature, contrast).
pub fn text_table(report: &serde_json::Value) -> Result<String, String> {
    let rows = report
        .as_array()
        .ok_or_else(|| "report JSON must be an array".to_string())?;
    let mut table: Vec<[String; 6]> = vec![[
        "Feature".into(),
        "Contrast".into(),
        "Diff.".into(),
        "95% CI".into(),
        "p_adj (mean)".into(),
        "p_adj (distr.)".into(),
    ]];
    for row in rows {
        let get = |key: &str| row.get(key).cloned().unwrap_or(serde_json::Value::Null);
        let num = |key: &str| get(key).as_f64().unwrap_or(f64::NAN);
        let ci = get("ci");
        let ci_text = match (
            ci.get(0).and_then(|v| v.as_f64()),
            ci.get(1).and_then(|v| v.as_f64()),
        ) {
            (Some(lo), Some(hi)) => format!("[{lo:.4}, {hi:.4}]"),
            _ => "-".into(),
        };
        table.push([
            get("feature").as_str().unwrap_or("?").to_string(),
            get("contrast").as_str().unwrap_or("?").to_string(),
            format!("{:.4}", num("diff")),
            ci_text,
            fmt_p(num("p_adj_mean")),
            fmt_p(num("p_adj_distr")),
        ]);
    }
    let mut widths = [0usize; 6];
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        for (w, cell) in widths.iter().zip(row.iter()) {
            out.push_str(&format!("{cell:<width$}  ", width = w));
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out.push_str(
        "\nDistribution and mean contrasts with conversation-clustered errors;\n\
         mixed-effects analyses require external tooling.\n",
    );
    Ok(out)
}

pub fn run(args: ReportArgs) -> Result<RunStatus, String> {
    let raw = std::fs::read(&args.report).map_err(|e| format!("{}: {e}", args.report.display()))?;
    let report: serde_json::Value =
        serde_json::from_slice(&raw).map_err(|e| format!("{}: {e}", args.report.display()))?;
    let table = text_table(&report)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, table).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => print!("{table}"),
    }
    Ok(RunStatus::Clean)
}
