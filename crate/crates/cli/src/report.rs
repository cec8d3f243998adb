//! CSV and text tables. CSV numbers use Rust's shortest round-trip `{:e}`
//! form, so identical runs produce byte-identical files.

use std::fmt::Write as _;

use sphinv_model::inversion::AblationMode;
use sphinv_model::spgan::GanStep;

use crate::run::{EncoderEval, ItemEval};

pub fn loss_csv(values: &[f64]) -> String {
    let mut s = String::from("iteration,loss\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:e}");
    }
    s
}

pub fn gan_loss_csv(steps: &[GanStep]) -> String {
    let mut s = String::from("iteration,discriminator_loss,generator_loss\n");
    for st in steps {
        let _ = writeln!(s, "{},{:e},{:e}", st.iteration, st.d_loss, st.g_loss);
    }
    s
}

/// One row per (mode, item); the EMD column is empty when it was not computed.
pub fn evaluation_csv(items: &[ItemEval]) -> String {
    let mut s = String::from("class,mode,item,cd,emd,smoothness\n");
    for e in items {
        let emd = e.emd.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{:e},{},{:e}", e.class, e.mode, e.item, e.cd, emd, e.smoothness);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    /// Class name, or `average` for the across-class row.
    pub class: String,
    pub mode: AblationMode,
    pub count: usize,
    pub mean_cd: f64,
    pub std_cd: f64,
    pub mean_emd: Option<f64>,
    pub mean_smoothness: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-(class, mode) aggregates in first-appearance order, followed by
/// across-class `average` rows when more than one class is present.
pub fn summarize(items: &[ItemEval]) -> Vec<ModeSummary> {
    let mut classes: Vec<&str> = Vec::new();
    let mut modes: Vec<AblationMode> = Vec::new();
    for e in items {
        if !classes.contains(&e.class.as_str()) {
            classes.push(&e.class);
        }
        if !modes.contains(&e.mode) {
            modes.push(e.mode);
        }
    }
    let mut out = Vec::new();
    for class in &classes {
        for &mode in &modes {
            let rows: Vec<&ItemEval> = items.iter().filter(|e| e.mode == mode && e.class == *class).collect();
            if !rows.is_empty() {
                out.push(aggregate(class, mode, &rows));
            }
        }
    }
    if classes.len() > 1 {
        for &mode in &modes {
            let rows: Vec<&ItemEval> = items.iter().filter(|e| e.mode == mode).collect();
            out.push(aggregate("average", mode, &rows));
        }
    }
    out
}

fn aggregate(class: &str, mode: AblationMode, rows: &[&ItemEval]) -> ModeSummary {
    let cds: Vec<f64> = rows.iter().map(|e| e.cd).collect();
    let m = mean(&cds);
    let var = cds.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / cds.len() as f64;
    let emds: Option<Vec<f64>> = rows.iter().map(|e| e.emd).collect();
    let smooth: Vec<f64> = rows.iter().map(|e| e.smoothness).collect();
    ModeSummary {
        class: class.to_string(),
        mode,
        count: rows.len(),
        mean_cd: m,
        std_cd: var.sqrt(),
        mean_emd: emds.map(|v| mean(&v)),
        mean_smoothness: mean(&smooth),
    }
}

pub fn summary_text(rows: &[ModeSummary]) -> String {
    let mut s = format!(
        "{:<14} {:<12} {:>5} {:>10} {:>10} {:>10} {:>10}\n",
        "class", "mode", "n", "cd", "cd_std", "emd", "smooth"
    );
    for r in rows {
        let emd = r.mean_emd.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<14} {:<12} {:>5} {:>10.3e} {:>10.3e} {:>10} {:>10.3e}",
            r.class,
            r.mode.name(),
            r.count,
            r.mean_cd,
            r.std_cd,
            emd,
            r.mean_smoothness
        );
    }
    s
}

pub fn encoder_csv(evals: &[EncoderEval]) -> String {
    let mut s = String::from("encoder,item,cd\n");
    for e in evals {
        for (i, cd) in e.cds.iter().enumerate() {
            let _ = writeln!(s, "{},{i},{cd:e}", e.role.name());
        }
    }
    s
}

pub fn encoder_text(evals: &[EncoderEval]) -> String {
    let mut s = format!("{:<14} {:>5} {:>10}\n", "encoder", "n", "cd");
    for e in evals {
        let _ = writeln!(s, "{:<14} {:>5} {:>10.3e}", e.role.name(), e.cds.len(), e.mean());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let vals = [0.1, 1.0 / 3.0, 2.5e-17, 12345.678];
        let csv = loss_csv(&vals);
        let parsed: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(parsed, vals);
    }

    #[test]
    fn gan_rows_keep_iteration_numbers() {
        let steps = [GanStep { iteration: 7, d_loss: 1.5, g_loss: 0.25 }];
        assert_eq!(gan_loss_csv(&steps), "iteration,discriminator_loss,generator_loss\n7,1.5e0,2.5e-1\n");
    }
}
