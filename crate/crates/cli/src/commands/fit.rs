use encalign::crossval::{fit_encoding, EncodingResult, EncodingSummary};
use encalign::par;

use crate::error::{CliError, CliResult, Context};
use crate::output::{fmt4, opt, with_run, write_csv, write_json};
use crate::session::{Dataset, Session};

pub fn run(session: &mut Session, conditions: &[String], subjects: &[String], force: bool) -> CliResult<()> {
    let ds = session.dataset()?;
    let conditions = pick(conditions, ds.condition_names(), "condition")?;
    let subjects = pick(subjects, ds.subject_ids(), "subject")?;
    ensure_fits(session, &ds, &conditions, &subjects, force)?;

    let out = session.out().to_path_buf();
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for c in &conditions {
        let mut means = Vec::new();
        let mut n_sig = 0;
        for s in &subjects {
            for l in 0..ds.n_layers(c)? {
                let summary = read_summary(&ds.fit_dir(&out, c, s, l))?;
                means.extend(summary.mean_correlation);
                n_sig += summary.n_significant;
                rows.push(vec![
                    c.clone(),
                    s.clone(),
                    (l + 1).to_string(),
                    summary.n_voxels.to_string(),
                    opt(summary.mean_correlation),
                    summary.n_significant.to_string(),
                    opt(summary.mean_correlation_significant),
                ]);
                json_rows.push(serde_json::json!({
                    "condition": c, "subject": s, "layer": l + 1, "summary": summary,
                }));
            }
        }
        let mean = encalign::stats::nan_mean(means.iter().copied());
        println!(
            "{c}: mean correlation {} over {} fits, {n_sig} significant voxel-fits",
            fmt4(mean),
            means.len()
        );
    }
    session.timings.stage("summarize");
    let dir = out.join("fit");
    write_csv(
        &dir.join("summary.csv"),
        &session.record,
        &[
            "condition",
            "subject",
            "layer",
            "n_voxels",
            "mean_correlation",
            "n_significant",
            "mean_correlation_significant",
        ],
        &rows,
    )?;
    write_json(
        &dir.join("summary.json"),
        &with_run(&session.record, serde_json::json!({ "fits": json_rows })),
    )?;
    Ok(())
}

fn pick(requested: &[String], available: Vec<String>, what: &str) -> CliResult<Vec<String>> {
    if requested.is_empty() {
        return Ok(available);
    }
    for r in requested {
        if !available.contains(r) {
            return Err(CliError::Input(format!(
                "unknown {what} '{r}'; the manifest has {}",
                available.join(", ")
            )));
        }
    }
    Ok(requested.to_vec())
}

pub fn read_summary(dir: &std::path::Path) -> CliResult<EncodingSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|_| missing_fit(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Internal(format!("corrupt cache file {}: {e}", path.display())))
}

pub fn missing_fit(path: &std::path::Path) -> CliError {
    CliError::Missing {
        what: "cached encoding fit".into(),
        path: path.to_path_buf(),
        hint: "run `encalign fit` with the same manifest and overrides first, or pass --refit".into(),
    }
}

/// Fits every (condition, subject, layer) without a cached result. Fits run
/// in parallel; results are written afterwards from this thread.
pub fn ensure_fits(
    session: &mut Session,
    ds: &Dataset,
    conditions: &[String],
    subjects: &[String],
    force: bool,
) -> CliResult<()> {
    let out = session.out().to_path_buf();
    let cfg = ds.encoding_config();
    let mut n_fitted = 0;
    for c in conditions {
        let n_layers = ds.n_layers(c)?;
        let pending: Vec<(usize, usize)> = (0..subjects.len())
            .flat_map(|s| (0..n_layers).map(move |l| (s, l)))
            .filter(|&(s, l)| force || !ds.fit_dir(&out, c, &subjects[s], l).join("summary.json").exists())
            .collect();
        if pending.is_empty() {
            continue;
        }
        let n = ds.n_stimuli(c)?;
        let scheme = ds.scheme(n)?;
        let layers = ds.all_layers(c)?;
        let responses = subjects
            .iter()
            .map(|s| ds.responses(s, n))
            .collect::<CliResult<Vec<_>>>()?;
        let results: Vec<EncodingResult> = par::try_map_range(pending.len(), |i| {
            let (s, l) = pending[i];
            fit_encoding(&layers[l], &responses[s], &scheme, &cfg)
                .context(|| format!("fitting condition {c}, subject {}, layer {}", subjects[s], l + 1))
        })?;
        for (&(s, l), r) in pending.iter().zip(&results) {
            let dir = ds.fit_dir(&out, c, &subjects[s], l);
            let extra = serde_json::json!({
                "run": session.record,
                "condition": c,
                "subject": subjects[s],
                "layer": l + 1,
            });
            r.write_dir(&dir, Some(&extra))
                .context(|| format!("writing {}", dir.display()))?;
        }
        n_fitted += pending.len();
    }
    session.timings.stage("fit");
    if n_fitted > 0 {
        eprintln!("fitted {n_fitted} encoding model(s)");
    }
    Ok(())
}

/// Cached results of every layer of `condition` for `subject`.
pub fn load_layers(session: &Session, ds: &Dataset, condition: &str, subject: &str) -> CliResult<Vec<EncodingResult>> {
    (0..ds.n_layers(condition)?)
        .map(|l| {
            let dir = ds.fit_dir(session.out(), condition, subject, l);
            if !dir.join("summary.json").exists() {
                return Err(missing_fit(&dir));
            }
            EncodingResult::read_dir(&dir).context(|| format!("reading cached fit {}", dir.display()))
        })
        .collect()
}
