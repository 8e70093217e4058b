use encalign::contrast::{
    connection_contrast, interaction_contrast, BaselineSpec, ContrastOptions, InteractionInput, InteractionOptions,
    InteractionSubject, SubjectLayers,
};
use encalign::crossval::{fit_encoding, make_folds, EncodingConfig};
use encalign::matrixio::{BaselineMode, RoiAtlas};
use encalign::synth::{generate, SynthSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn late_layer_signal_peaks_late() {
    let spec = SynthSpec {
        n_samples: 240,
        n_subjects: 5,
        n_layers: 4,
        shared_layer_gains: vec![0.0, 0.0, 0.0, 1.0],
        interaction_layer_gains: vec![0.0; 4],
        joint_includes_interaction: false,
        ..SynthSpec::default()
    }
    .with_seed(4);
    let data = generate(&spec).unwrap();
    let scheme = make_folds(spec.n_samples, 6).unwrap();
    let cfg = EncodingConfig::default();
    let subjects: Vec<SubjectLayers> = data
        .responses
        .iter()
        .enumerate()
        .map(|(s, y)| {
            let fit = |c: &str| -> Vec<_> {
                data.condition(c)
                    .unwrap()
                    .iter()
                    .map(|x| fit_encoding(x, y, &scheme, &cfg).unwrap())
                    .collect()
            };
            SubjectLayers {
                id: format!("sub-{s}"),
                joint: fit("joint"),
                ablated: fit("lang_only"),
                atlas: data.atlas.clone(),
                ceiling: None,
            }
        })
        .collect();
    let report = connection_contrast(&subjects, "joint", "lang_only", &ContrastOptions::default()).unwrap();
    let diffs: Vec<f64> = report.layerwise.iter().map(|l| l.diff).collect();
    let peak = report
        .layerwise
        .iter()
        .max_by(|a, b| a.diff.total_cmp(&b.diff))
        .unwrap()
        .layer;
    assert!((3..=4).contains(&peak), "layer diffs {diffs:?}");
    assert_eq!(report.voxel_selection.reference_condition.as_deref(), Some("joint"));
}

#[test]
fn exactly_linear_joint_leaves_no_interaction() {
    let n = 150;
    let a = randn(n, 4, 1);
    let b = randn(n, 4, 2);
    let ab = a.clone().insert_columns(4, 4, 0.0);
    let mut ab = ab;
    ab.columns_mut(4, 4).copy_from(&b);
    let joint = &ab * randn(8, 10, 3);
    let signal = &ab * randn(8, 12, 4);
    let ys: Vec<DMatrix<f64>> = (0..5).map(|s| &signal + randn(n, 12, 10 + s)).collect();
    let atlas = RoiAtlas::new(
        [
            ("R1".to_string(), (0..6).collect()),
            ("R2".to_string(), (6..12).collect()),
        ]
        .into_iter()
        .collect(),
        12,
    )
    .unwrap();
    let joint_layers = [joint];
    let a_layers = [a];
    let b_layers = [b];
    let input = InteractionInput {
        condition_a: "joint",
        joint: &joint_layers,
        unimodal: vec![("a", &a_layers[..]), ("b", &b_layers[..])],
        subjects: ys
            .iter()
            .map(|y| InteractionSubject {
                id: "s",
                responses: y,
                atlas: &atlas,
                ceiling: None,
                voxel_mask: None,
            })
            .collect(),
    };
    let baseline = BaselineSpec {
        mode: BaselineMode::Gaussian,
        draws: 10,
        seed: 9,
    };
    let report = interaction_contrast(
        &input,
        &baseline,
        &make_folds(n, 6).unwrap(),
        &EncodingConfig::default(),
        &InteractionOptions::default(),
    )
    .unwrap();
    for row in &report.roi_rows {
        assert!(!row.significant, "{row:?}");
        // Nothing is left after removal, so there is no residual score at all.
        assert!(row.mean_a.is_nan() && row.n_subjects == 0, "{row:?}");
    }
}
