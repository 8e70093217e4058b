use std::path::Path;

use encalign::crossval::{make_folds, EncodingConfig};
use encalign::matrixio::read_matrix;
use encalign::residual::{remove_information_with, retained_variance, RemovalMode};
use encalign::stats::nan_mean;

use crate::error::{CliError, CliResult, Context};
use crate::output::{fmt4, num, with_run, write_dmatrix, write_json};
use crate::session::Session;

const DEFAULT_OUTER_FOLDS: usize = 6;

pub fn run(session: &mut Session, source: &Path, target: &Path, name: &str) -> CliResult<()> {
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::Input(format!(
            "--name must be a plain file stem, got '{name}'"
        )));
    }
    // Fold and penalty settings come from the manifest when one is given.
    let (n_folds, cfg) = if session.global.manifest.is_some() {
        let ds = session.dataset()?;
        (ds.manifest.n_outer_folds, ds.encoding_config())
    } else {
        (DEFAULT_OUTER_FOLDS, EncodingConfig::default())
    };
    let a = read_matrix(source, true)
        .context(|| format!("reading source {}", source.display()))?
        .to_dmatrix();
    let b = read_matrix(target, true)
        .context(|| format!("reading target {}", target.display()))?
        .to_dmatrix();
    session.timings.stage("load");
    let mode = if session.global.in_sample {
        RemovalMode::InSample
    } else {
        RemovalMode::CrossValidated
    };
    let scheme = make_folds(b.nrows(), n_folds).context(|| format!("splitting {} rows into folds", b.nrows()))?;
    let residual =
        remove_information_with(&a, &b, &scheme, &cfg, mode).context(|| "removing source from target".into())?;
    session.timings.stage("residual");

    let retained = retained_variance(&b, &residual);
    let mean_retained = nan_mean(retained.iter().copied());
    let dir = session.out().join("residual");
    write_dmatrix(&dir.join(format!("{name}.eamx")), &residual)?;
    write_json(
        &dir.join(format!("{name}_summary.json")),
        &with_run(
            &session.record,
            serde_json::json!({
                "mode": mode,
                "n_folds": n_folds,
                "n_rows": b.nrows(),
                "source_columns": a.ncols(),
                "target_columns": b.ncols(),
                "retained_variance": retained.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                "mean_retained_variance": mean_retained,
                "mean_removed_variance": mean_retained.map(|v| 1.0 - v),
            }),
        ),
    )?;
    println!(
        "mean retained variance {} (removed {}) over {} target columns",
        fmt4(mean_retained),
        fmt4(mean_retained.map(|v| 1.0 - v)),
        b.ncols()
    );
    Ok(())
}
