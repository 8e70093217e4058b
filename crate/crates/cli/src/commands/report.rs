//! Comparison tables across conditions: one row per ROI and condition,
//! scored over the reference condition's union mask, plus the rows of every
//! contrast report found under the output directory.

use std::fs;

use encalign::contrast::{roi_score, union_mask};
use encalign::stats::nan_mean;

use crate::commands::fit;
use crate::error::{CliError, CliResult, Context};
use crate::output::{fmt4, num, opt, with_run, write_csv, write_json};
use crate::session::Session;

pub fn run(session: &mut Session, conditions: &[String]) -> CliResult<()> {
    let ds = session.dataset()?;
    let conditions = if conditions.is_empty() {
        ds.condition_names()
    } else {
        conditions.to_vec()
    };
    let reference = conditions
        .first()
        .cloned()
        .ok_or_else(|| CliError::Input("no conditions to report".into()))?;
    let subjects = ds.subject_ids();
    let atlases = subjects.iter().map(|s| ds.atlas(s)).collect::<CliResult<Vec<_>>>()?;

    // scores[c][s] = per-ROI pooled scores of subject s under condition c.
    let mut masks = Vec::new();
    for s in &subjects {
        let layers = fit::load_layers(session, &ds, &reference, s)?;
        masks.push(union_mask(&layers).context(|| format!("union mask of {reference} for subject {s}"))?);
    }
    let roi_names: Vec<String> = atlases[0].names().map(str::to_string).collect();
    let mut group: Vec<Vec<(Option<f64>, usize)>> = Vec::new();
    for c in &conditions {
        let mut per_roi: Vec<Vec<f64>> = vec![Vec::new(); roi_names.len()];
        for (s, id) in subjects.iter().enumerate() {
            let layers = fit::load_layers(session, &ds, c, id)?;
            for (r, roi) in roi_names.iter().enumerate() {
                let scores = layers
                    .iter()
                    .map(|res| roi_score(&res.mean_correlation, Some(&masks[s]), &atlases[s], roi))
                    .collect::<encalign::Result<Vec<_>>>()
                    .context(|| format!("ROI {roi}, subject {id}"))?;
                if let Some(v) = nan_mean(scores.into_iter().flatten()) {
                    per_roi[r].push(v);
                }
            }
        }
        group.push(per_roi.iter().map(|v| (nan_mean(v.iter().copied()), v.len())).collect());
    }
    session.timings.stage("alignment");

    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for (r, roi) in roi_names.iter().enumerate() {
        let reference_score = group[0][r].0;
        for (c, cond) in conditions.iter().enumerate() {
            let (score, n) = group[c][r];
            let diff = match (score, reference_score) {
                (Some(x), Some(y)) => Some(x - y),
                _ => None,
            };
            rows.push(vec![roi.clone(), cond.clone(), opt(score), opt(diff), n.to_string()]);
            json_rows.push(serde_json::json!({
                "roi": roi, "condition": cond, "mean_score": score, "diff_vs_reference": diff, "n_subjects": n,
            }));
        }
    }

    let contrasts = collect_contrasts(session)?;
    let out = session.out().join("report");
    write_csv(
        &out.join("alignment.csv"),
        &session.record,
        &["roi", "condition", "mean_score", "diff_vs_reference", "n_subjects"],
        &rows,
    )?;
    let contrast_rows: Vec<Vec<String>> = contrasts
        .iter()
        .flat_map(|(name, report)| {
            let mode = report["mode"].as_str().unwrap_or_default().to_string();
            report["roi_rows"].as_array().into_iter().flatten().map(move |row| {
                let f = |k: &str| row[k].as_f64().map(num).unwrap_or_default();
                vec![
                    name.clone(),
                    mode.clone(),
                    row["roi"].as_str().unwrap_or_default().to_string(),
                    f("diff"),
                    f("p_value"),
                    row["significant"].as_bool().unwrap_or(false).to_string(),
                ]
            })
        })
        .collect();
    write_csv(
        &out.join("contrasts.csv"),
        &session.record,
        &["contrast", "mode", "roi", "diff", "p_value", "significant"],
        &contrast_rows,
    )?;
    write_json(
        &out.join("report.json"),
        &with_run(
            &session.record,
            serde_json::json!({
                "reference_condition": reference,
                "voxel_selection": "union of the reference condition's significant voxels across layers",
                "alignment": json_rows,
                "contrasts": contrasts.iter().map(|(n, r)| serde_json::json!({ "name": n, "report": r })).collect::<Vec<_>>(),
            }),
        ),
    )?;

    print!("{:<12}", "roi");
    for c in &conditions {
        print!(" {c:>14}");
    }
    println!();
    for (r, roi) in roi_names.iter().enumerate() {
        print!("{roi:<12}");
        for g in &group {
            print!(" {:>14}", fmt4(g[r].0));
        }
        println!();
    }
    Ok(())
}

/// Contrast reports under `<out>/contrast/*/report.json`, sorted by name.
fn collect_contrasts(session: &Session) -> CliResult<Vec<(String, serde_json::Value)>> {
    let dir = session.out().join("contrast");
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(Vec::new());
    };
    let mut found = Vec::new();
    for e in entries.flatten() {
        let path = e.path().join("report.json");
        if let Ok(text) = fs::read_to_string(&path) {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|err| CliError::Internal(format!("corrupt report {}: {err}", path.display())))?;
            found.push((e.file_name().to_string_lossy().into_owned(), v["report"].clone()));
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}
