use encalign::contrast::{
    connection_contrast, interaction_contrast, BaselineSpec, ContrastOptions, ContrastReport, InteractionInput,
    InteractionOptions, InteractionSubject, SubjectLayers,
};
use encalign::matrixio::ContrastMode;
use encalign::residual::RemovalMode;

use crate::args::ModeArg;
use crate::commands::{ceiling, fit};
use crate::error::{CliError, CliResult, Context};
use crate::output::{fmt4, num, opt, with_run, write_csv, write_json};
use crate::session::{Dataset, Session};

pub struct ContrastArgs<'a> {
    pub mode: ModeArg,
    pub condition_a: Option<&'a str>,
    pub condition_b: &'a [String],
    pub normalize: bool,
    pub sequential: bool,
    pub refit: bool,
}

pub fn run(session: &mut Session, args: ContrastArgs) -> CliResult<()> {
    let ds = session.dataset()?;
    let mode = match args.mode {
        ModeArg::Connection => ContrastMode::Connection,
        ModeArg::Interaction => ContrastMode::Interaction,
    };
    let (a, b) = resolve_conditions(&ds, mode, args.condition_a, args.condition_b)?;
    let opts = ContrastOptions {
        alpha: ds.manifest.significance_alpha,
        rois: None,
        language_rois: ds.manifest.language_rois.clone(),
        normalize: args.normalize,
        ceiling_floor: ds.manifest.ceiling_floor,
    };
    let ceilings = if args.normalize {
        Some(ceiling::load_per_subject(session, &ds)?)
    } else {
        None
    };
    let subjects = ds.subject_ids();
    if let Some(c) = &ceilings {
        if c.nrows() != subjects.len() {
            return Err(CliError::Input(format!(
                "cached ceiling has {} subjects, the manifest {}",
                c.nrows(),
                subjects.len()
            )));
        }
    }
    let subject_ceiling = |s: usize| {
        ceilings
            .as_ref()
            .map(|c| c.row(s).iter().copied().collect::<Vec<f64>>())
    };

    let report = match mode {
        ContrastMode::Connection => {
            if args.sequential {
                return Err(CliError::Input(
                    "--sequential applies to interaction contrasts only".into(),
                ));
            }
            let pair = vec![a.clone(), b[0].clone()];
            if args.refit {
                fit::ensure_fits(session, &ds, &pair, &subjects, false)?;
            }
            let mut layers = Vec::new();
            for (s, id) in subjects.iter().enumerate() {
                layers.push(SubjectLayers {
                    id: id.clone(),
                    joint: fit::load_layers(session, &ds, &a, id)?,
                    ablated: fit::load_layers(session, &ds, &b[0], id)?,
                    atlas: ds.atlas(id)?,
                    ceiling: subject_ceiling(s),
                });
            }
            session.timings.stage("load");
            let r = connection_contrast(&layers, &a, &b[0], &opts)
                .context(|| format!("connection contrast {a} vs {}", b[0]))?;
            session.timings.stage("contrast");
            r
        }
        ContrastMode::Interaction => {
            let n = ds.n_stimuli(&a)?;
            let joint = ds.all_layers(&a)?;
            let unimodal = b.iter().map(|c| ds.all_layers(c)).collect::<CliResult<Vec<_>>>()?;
            for (c, layers) in b.iter().zip(&unimodal) {
                if layers[0].nrows() != n {
                    return Err(CliError::Input(format!(
                        "condition {c} has {} stimuli, {a} has {n}",
                        layers[0].nrows()
                    )));
                }
            }
            let responses = subjects
                .iter()
                .map(|s| ds.responses(s, n))
                .collect::<CliResult<Vec<_>>>()?;
            let atlases = subjects.iter().map(|s| ds.atlas(s)).collect::<CliResult<Vec<_>>>()?;
            let ceiling_rows: Vec<Option<Vec<f64>>> = (0..subjects.len()).map(subject_ceiling).collect();
            let input = InteractionInput {
                condition_a: &a,
                joint: &joint,
                unimodal: b
                    .iter()
                    .map(String::as_str)
                    .zip(unimodal.iter().map(Vec::as_slice))
                    .collect(),
                subjects: subjects
                    .iter()
                    .enumerate()
                    .map(|(s, id)| InteractionSubject {
                        id,
                        responses: &responses[s],
                        atlas: &atlases[s],
                        ceiling: ceiling_rows[s].as_deref(),
                        voxel_mask: None,
                    })
                    .collect(),
            };
            let baseline = BaselineSpec {
                mode: ds.manifest.baseline.mode,
                draws: ds.manifest.baseline.draws,
                seed: ds.manifest.seed,
            };
            let iopts = InteractionOptions {
                contrast: opts,
                removal_mode: if session.global.in_sample {
                    RemovalMode::InSample
                } else {
                    RemovalMode::CrossValidated
                },
                sequential: args.sequential,
            };
            session.timings.stage("load");
            let r = interaction_contrast(&input, &baseline, &ds.scheme(n)?, &ds.encoding_config(), &iopts)
                .context(|| format!("interaction contrast {a} minus {}", b.join("+")))?;
            session.timings.stage("contrast");
            r
        }
    };
    let dir = session
        .out()
        .join("contrast")
        .join(format!("{}_{}_vs_{}", mode_name(mode), a, b.join("+")));
    write_report(session, &report, &dir)?;
    print_report(&report);
    Ok(())
}

fn mode_name(m: ContrastMode) -> &'static str {
    match m {
        ContrastMode::Connection => "connection",
        ContrastMode::Interaction => "interaction",
    }
}

fn resolve_conditions(
    ds: &Dataset,
    mode: ContrastMode,
    a: Option<&str>,
    b: &[String],
) -> CliResult<(String, Vec<String>)> {
    let declared = ds.manifest.contrasts.iter().find(|c| c.mode == mode);
    let a = match (a, declared) {
        (Some(a), _) => a.to_string(),
        (None, Some(d)) => d.condition_a.clone(),
        (None, None) => {
            return Err(CliError::Input(format!(
                "no --a given and the manifest declares no {} contrast",
                mode_name(mode)
            )))
        }
    };
    let b = match (b.is_empty(), declared) {
        (false, _) => b.to_vec(),
        (true, Some(d)) => d.condition_b.clone(),
        (true, None) => return Err(CliError::Input("no --b given and the manifest declares none".into())),
    };
    if mode == ContrastMode::Connection && b.len() != 1 {
        return Err(CliError::Input(format!(
            "a connection contrast compares against exactly one condition, got {}",
            b.len()
        )));
    }
    for c in std::iter::once(&a).chain(&b) {
        ds.n_layers(c)?;
    }
    if b.contains(&a) {
        return Err(CliError::Input(format!("condition {a} appears on both sides")));
    }
    Ok((a, b))
}

fn write_report(session: &Session, report: &ContrastReport, dir: &std::path::Path) -> CliResult<()> {
    let value = serde_json::to_value(report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_json(
        &dir.join("report.json"),
        &with_run(&session.record, serde_json::json!({ "report": value })),
    )?;
    let roi_rows: Vec<Vec<String>> = report
        .roi_rows
        .iter()
        .map(|r| {
            vec![
                r.roi.clone(),
                num(r.mean_a),
                num(r.mean_b),
                num(r.diff),
                opt(r.paired_t),
                opt(r.p_value),
                r.significant.to_string(),
                status(&r.status),
                r.n_subjects.to_string(),
                r.n_excluded.to_string(),
                opt(r.baseline_sd),
            ]
        })
        .collect();
    write_csv(
        &dir.join("rois.csv"),
        &session.record,
        &[
            "roi",
            "mean_a",
            "mean_b",
            "diff",
            "paired_t",
            "p_value",
            "significant",
            "status",
            "n_subjects",
            "n_excluded",
            "baseline_sd",
        ],
        &roi_rows,
    )?;
    let layer_rows: Vec<Vec<String>> = report
        .layerwise
        .iter()
        .map(|r| {
            vec![
                r.layer.to_string(),
                num(r.mean_a),
                num(r.mean_b),
                num(r.diff),
                opt(r.p_value),
                status(&r.status),
                r.n_subjects.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("layers.csv"),
        &session.record,
        &["layer", "mean_a", "mean_b", "diff", "p_value", "status", "n_subjects"],
        &layer_rows,
    )
}

fn status(s: &encalign::contrast::RowStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn print_report(r: &ContrastReport) {
    println!("{} vs {} ({}, alpha {})", r.condition_a, r.condition_b, r.tail, r.alpha);
    for row in &r.roi_rows {
        println!(
            "  {:<12} diff {:>8}  p {:>8}{}",
            row.roi,
            fmt4(Some(row.diff)),
            fmt4(row.p_value),
            if row.significant { "  *" } else { "" }
        );
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}
