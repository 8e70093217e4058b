use std::path::Path;

use encalign::ceiling::{noise_ceiling, CeilingResult};
use encalign::stats::nan_mean;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult, Context};
use crate::output::{fmt4, opt, with_run, write_csv, write_dmatrix, write_json};
use crate::session::{Dataset, Session};

pub fn run(session: &mut Session) -> CliResult<()> {
    let ds = session.dataset()?;
    let subjects = ds.subject_ids();
    let first_condition = ds
        .condition_names()
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Input("manifest lists no conditions".into()))?;
    let n = ds.n_stimuli(&first_condition)?;
    let ys = subjects
        .iter()
        .map(|s| ds.responses(s, n))
        .collect::<CliResult<Vec<_>>>()?;
    session.timings.stage("load");
    let result = noise_ceiling(&ys, &ds.scheme(n)?, &ds.encoding_config()).context(|| "noise ceiling".into())?;
    session.timings.stage("ceiling");

    let out = session.out().to_path_buf();
    let floor = ds.manifest.ceiling_floor;
    write_ceiling(session, &result, &subjects, floor, &ds.ceiling_dir(&out))?;
    write_ceiling(session, &result, &subjects, floor, &out.join("ceiling"))?;

    let atlas = ds.atlas(&subjects[0])?;
    let rows: Vec<Vec<String>> = atlas
        .iter()
        .map(|(name, idx)| {
            let vals: Vec<f64> = idx.iter().map(|&i| result.per_voxel_ceiling[i]).collect();
            let below = vals.iter().filter(|v| !(v.is_finite() && **v >= floor)).count();
            vec![
                name.to_string(),
                idx.len().to_string(),
                opt(nan_mean(vals.iter().copied())),
                below.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("ceiling").join("rois.csv"),
        &session.record,
        &["roi", "n_voxels", "mean_ceiling", "n_below_floor"],
        &rows,
    )?;
    println!(
        "group noise ceiling: mean {} over {} voxels, {} subjects",
        fmt4(nan_mean(result.per_voxel_ceiling.iter().copied())),
        result.n_voxels(),
        result.n_subjects
    );
    Ok(())
}

fn write_ceiling(
    session: &Session,
    result: &CeilingResult,
    subjects: &[String],
    floor: f64,
    dir: &Path,
) -> CliResult<()> {
    let v = result.n_voxels();
    write_dmatrix(
        &dir.join("group.eamx"),
        &DMatrix::from_column_slice(v, 1, &result.per_voxel_ceiling),
    )?;
    let per_subject = DMatrix::from_fn(result.n_subjects, v, |s, j| result.per_subject_ceilings[s][j]);
    write_dmatrix(&dir.join("per_subject.eamx"), &per_subject)?;
    let means: Vec<String> = result
        .per_subject_ceilings
        .iter()
        .map(|c| opt(nan_mean(c.iter().copied())))
        .collect();
    write_json(
        &dir.join("summary.json"),
        &with_run(
            &session.record,
            serde_json::json!({
                "subjects": subjects,
                "n_voxels": v,
                "mean_ceiling": nan_mean(result.per_voxel_ceiling.iter().copied()),
                "subject_mean_ceilings": means,
                "floor": floor,
            }),
        ),
    )
}

/// Per-subject ceilings from the cache, one row per manifest subject.
pub fn load_per_subject(session: &Session, ds: &Dataset) -> CliResult<DMatrix<f64>> {
    let path = ds.ceiling_dir(session.out()).join("per_subject.eamx");
    if !path.exists() {
        return Err(CliError::Missing {
            what: "cached noise ceiling".into(),
            path,
            hint: "run `encalign ceiling` with the same manifest and overrides first".into(),
        });
    }
    Ok(encalign::matrixio::read_matrix(&path, false)
        .context(|| format!("reading {}", path.display()))?
        .to_dmatrix())
}
