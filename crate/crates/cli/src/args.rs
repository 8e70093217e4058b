use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "encalign",
    version,
    about = "Cross-validated ridge encoding models and contrast statistics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "encalign-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replaces the manifest (or synth spec) seed.
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    /// Replaces the manifest's TR policy.
    #[arg(long, global = true, value_enum)]
    pub tr_policy: Option<TrPolicyArg>,
    /// Residualize with a single in-sample fit instead of cross-validated predictions.
    #[arg(long, global = true)]
    pub in_sample: bool,
    /// Random baseline for interaction contrasts.
    #[arg(long, global = true, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Multiple-comparison correction for voxel significance.
    #[arg(long, global = true, value_enum)]
    pub fdr: Option<FdrArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrPolicyArg {
    #[value(name = "first_relevant", alias = "first")]
    FirstRelevant,
    #[value(name = "last_relevant", alias = "last")]
    LastRelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Gaussian,
    Shuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FdrArg {
    None,
    Bh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Connection,
    Interaction,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit per-layer encoding models and cache the results.
    Fit {
        /// Condition to fit (repeatable); default is every condition.
        #[arg(long = "condition")]
        conditions: Vec<String>,
        /// Subject to fit (repeatable); default is every subject.
        #[arg(long = "subject")]
        subjects: Vec<String>,
        /// Refit even when cached results exist.
        #[arg(long)]
        force: bool,
    },
    /// Remove one representation from another.
    Residual {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Base name of the output files.
        #[arg(long, default_value = "residual")]
        name: String,
    },
    /// Leave-one-subject-out noise ceilings.
    Ceiling,
    /// Connection or interaction contrast across subjects.
    Contrast {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Condition A; defaults to the manifest's contrast of this mode.
        #[arg(long = "a")]
        condition_a: Option<String>,
        /// Condition B (repeatable for interaction contrasts).
        #[arg(long = "b")]
        condition_b: Vec<String>,
        /// Divide scores by the cached noise ceiling.
        #[arg(long)]
        normalize: bool,
        /// Remove unimodal conditions one after another.
        #[arg(long)]
        sequential: bool,
        /// Fit missing encoding models instead of failing.
        #[arg(long)]
        refit: bool,
    },
    /// Write a synthetic dataset with planted ground truth.
    Synth {
        /// Generator settings (JSON); defaults are used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Merge cached fits and contrast reports into comparison tables.
    Report {
        /// Conditions to compare (repeatable); the first is the reference.
        #[arg(long = "condition")]
        conditions: Vec<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit { .. } => "fit",
            Command::Residual { .. } => "residual",
            Command::Ceiling => "ceiling",
            Command::Contrast { .. } => "contrast",
            Command::Synth { .. } => "synth",
            Command::Report { .. } => "report",
        }
    }
}

/// Flags that change results. `--out`, `--threads` and the manifest path are
/// left out so records match across output locations and worker counts.
pub fn result_flags(global: &GlobalArgs, command: &Command) -> BTreeMap<String, String> {
    let mut f = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        f.insert(k.to_string(), v);
    };
    if let Some(s) = global.seed_override {
        put("seed-override", s.to_string());
    }
    if let Some(p) = global.tr_policy {
        put("tr-policy", format!("{p:?}"));
    }
    if global.in_sample {
        put("in-sample", "true".into());
    }
    if let Some(b) = global.baseline {
        put("baseline", format!("{b:?}").to_lowercase());
    }
    if let Some(c) = global.fdr {
        put("fdr", format!("{c:?}").to_lowercase());
    }
    let list = |v: &[String]| v.join(",");
    match command {
        Command::Fit {
            conditions, subjects, ..
        } => {
            if !conditions.is_empty() {
                put("condition", list(conditions));
            }
            if !subjects.is_empty() {
                put("subject", list(subjects));
            }
        }
        Command::Residual { source, target, name } => {
            put("source", file_name(source));
            put("target", file_name(target));
            put("name", name.clone());
        }
        Command::Ceiling => {}
        Command::Contrast {
            mode,
            condition_a,
            condition_b,
            normalize,
            sequential,
            ..
        } => {
            put("mode", format!("{mode:?}").to_lowercase());
            if let Some(a) = condition_a {
                put("a", a.clone());
            }
            if !condition_b.is_empty() {
                put("b", list(condition_b));
            }
            if *normalize {
                put("normalize", "true".into());
            }
            if *sequential {
                put("sequential", "true".into());
            }
        }
        Command::Synth { spec } => {
            if let Some(s) = spec {
                put("spec", file_name(s));
            }
        }
        Command::Report { conditions } => {
            if !conditions.is_empty() {
                put("condition", list(conditions));
            }
        }
    }
    f
}

fn file_name(p: &std::path::Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}
