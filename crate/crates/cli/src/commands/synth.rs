use std::path::Path;

use encalign::synth::{generate, write_dataset, SynthSpec};

use crate::error::{CliError, CliResult, Context};
use crate::output::{with_run, write_json};
use crate::session::{Dataset, Session};

pub fn run(session: &mut Session, spec_path: Option<&Path>) -> CliResult<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read synth spec {}: {e}", p.display())))?;
            serde_json::from_str::<SynthSpec>(&text)
                .map_err(|e| CliError::Input(format!("invalid synth spec {}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = session.global.seed_override {
        spec.seed = seed;
    }
    spec.validate().context(|| "synth spec".into())?;
    let data = generate(&spec).context(|| "generating synthetic data".into())?;
    session.timings.stage("generate");
    let out = session.out().to_path_buf();
    let manifest = write_dataset(&spec, &data, &out).context(|| format!("writing dataset to {}", out.display()))?;
    session.timings.stage("write");

    let ds = Dataset::load(&crate::args::GlobalArgs {
        manifest: Some(manifest.clone()),
        seed_override: None,
        tr_policy: None,
        fdr: None,
        baseline: None,
        ..session.global.clone()
    })?;
    session.record.manifest_hash = Some(ds.hash.clone());
    session.record.seed = Some(spec.seed);
    write_json(
        &out.join("synth_run.json"),
        &with_run(
            &session.record,
            serde_json::json!({
                "manifest": "manifest.json",
                "n_subjects": spec.n_subjects,
                "n_samples": spec.n_samples,
                "n_voxels": spec.n_voxels(),
                "n_layers": spec.n_layers,
            }),
        ),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}
