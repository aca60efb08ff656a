use std::io::Write;

use proptest::prelude::*;

use coopsolve_core::datagen::{
    make_fixed_dataset, make_variable_dataset, quota_distribution, sample_wvg_seeded, FixedDatasetConfig,
    GameDataset, TestDistribution, VariableDatasetConfig, WeightDistribution, WeightSource,
};
use coopsolve_core::exact::shapley_exact;
use coopsolve_core::mc::McConfig;
use coopsolve_core::neural::{self, fit, predict_payoffs, MlpArchitecture, PayoffModel, TrainConfig};
use coopsolve_core::xai::{
    self, attribute_instance, build_attribution_dataset, AttributionConfig, SchemaConfig,
};
use coopsolve_core::{Coalition, Concept, Matrix, DEFAULT_ENUMERATION_CAP};

fn bytes(ds: &GameDataset) -> Vec<u8> {
    let mut out = Vec::new();
    ds.write_to(&mut out).unwrap();
    out
}

#[test]
fn datasets_regenerate_byte_for_byte() {
    for concept in Concept::ALL {
        let cfg = FixedDatasetConfig::new(5, 60, concept, 21);
        let a = bytes(&make_fixed_dataset(&cfg).unwrap());
        assert_eq!(a, bytes(&make_fixed_dataset(&cfg).unwrap()), "{concept}");
        let other = FixedDatasetConfig { seed: 22, ..cfg };
        assert_ne!(a, bytes(&make_fixed_dataset(&other).unwrap()));
    }
}

#[test]
fn datasets_survive_a_file_round_trip() {
    let ds = make_fixed_dataset(&FixedDatasetConfig::new(4, 50, Concept::LeastCore, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ds.write(&path).unwrap();
    let back = GameDataset::read(&path).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.meta, ds.meta);
}

#[test]
fn fixed_rows_are_normalized_games_with_their_labels() {
    for concept in Concept::ALL {
        let ds = make_fixed_dataset(&FixedDatasetConfig::new(5, 80, concept, 9)).unwrap();
        for i in 0..ds.len() {
            let x = ds.features.row(i);
            // Weights over quota: the grand coalition wins, so the row sums to at least one.
            assert!(x.iter().sum::<f64>() >= 1.0 - 1e-12);
            assert!(x.iter().all(|&v| v > 0.0));
            let y = ds.labels.row(i);
            assert!((y[..5].iter().sum::<f64>() - 1.0).abs() < 1e-9, "{concept} {y:?}");
            assert!(y.iter().all(|&v| v >= -1e-12));
        }
    }
    let ds = make_fixed_dataset(&FixedDatasetConfig::new(5, 30, Concept::Shapley, 4)).unwrap();
    for i in 0..ds.len() {
        // Labels are scale-invariant, so the normalized features define the same game.
        let g = coopsolve_core::WeightedVotingGame::from_normalized(ds.features.row(i).to_vec()).unwrap();
        let p = shapley_exact(&g, DEFAULT_ENUMERATION_CAP).unwrap();
        for (a, b) in p.payoffs.iter().zip(ds.labels.row(i)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn variable_rows_pad_with_exact_zeros() {
    let cfg = VariableDatasetConfig {
        player_counts: vec![3, 5],
        games_per_n: 40,
        max_players: 8,
        ..VariableDatasetConfig::standard(Concept::LeastCore, 2)
    };
    let ds = make_variable_dataset(&cfg).unwrap();
    assert_eq!(ds.len(), 80);
    assert_eq!(ds.features.cols(), 8);
    assert_eq!(ds.labels.cols(), 9);
    for i in 0..ds.len() {
        let mask = ds.player_mask(i);
        let n = mask.iter().filter(|&&m| m).count();
        assert!(n == 3 || n == 5);
        for (j, &m) in mask.iter().enumerate() {
            if !m {
                assert_eq!(ds.features.get(i, j), 0.0);
                assert_eq!(ds.labels.get(i, j), 0.0);
            }
        }
        let lcv = ds.labels.get(i, 8);
        assert!((0.0..1.0).contains(&lcv));
    }
    let too_small = VariableDatasetConfig {
        max_players: 4,
        ..cfg
    };
    assert!(make_variable_dataset(&too_small).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_games_respect_their_distribution(n in 2usize..16, seed in any::<u64>(), d in 0usize..5) {
        let dist = TestDistribution::ALL[d].distribution(n);
        let g = sample_wvg_seeded(n, &dist, seed).unwrap();
        prop_assert_eq!(g.n(), n);
        prop_assert!(g.quota() > 0.0 && g.quota() <= g.total_weight());
        for &w in g.weights() {
            prop_assert!(w >= dist.location && w <= dist.location + dist.width);
        }
        prop_assert_eq!(&g, &sample_wvg_seeded(n, &dist, seed).unwrap());
    }
}

#[test]
fn training_quota_is_centred_where_expected() {
    let n = 6;
    let d = WeightDistribution::training(n);
    let (mean, sd) = quota_distribution(n);
    let qs: Vec<f64> = (0..4000)
        .map(|s| sample_wvg_seeded(n, &d, s).unwrap().quota())
        .collect();
    let m = qs.iter().sum::<f64>() / qs.len() as f64;
    assert!((m - mean).abs() < 4.0 * sd / (qs.len() as f64).sqrt());
    assert_eq!(WeightSource::Test(TestDistribution::InSample).resolve(n), d);
}

#[test]
fn training_reduces_the_loss() {
    let ds = make_fixed_dataset(&FixedDatasetConfig::new(4, 400, Concept::Shapley, 5)).unwrap();
    let arch = MlpArchitecture::for_dataset(&ds)
        .with_hidden(vec![32, 32])
        .with_dropout(0.0);
    let cfg = TrainConfig {
        batch_size: 0,
        learning_rate: 1e-3,
        ..TrainConfig::epochs(200, 1)
    };
    let out = fit(&ds.features, &ds.labels, None, &arch, &cfg).unwrap();
    let first = out.curve.first().unwrap().train_loss;
    let last = out.curve.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "{first} -> {last}");
    let again = fit(&ds.features, &ds.labels, None, &arch, &cfg).unwrap();
    assert_eq!(again.model.to_file(), out.model.to_file());
}

#[test]
fn saved_models_predict_identically() {
    let ds = make_fixed_dataset(&FixedDatasetConfig::new(4, 200, Concept::LeastCore, 8)).unwrap();
    let arch = MlpArchitecture::for_dataset(&ds).with_hidden(vec![16]);
    let out = neural::train(&ds, &arch, &TrainConfig::epochs(20, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    out.model.save(&path).unwrap();
    let back = PayoffModel::load(&path).unwrap();
    assert_eq!(
        back.predict(&ds.features).unwrap(),
        out.model.predict(&ds.features).unwrap()
    );
    let g = sample_wvg_seeded(4, &WeightDistribution::training(4), 99).unwrap();
    let p = predict_payoffs(&back, &g).unwrap();
    assert!((p.total() - 1.0).abs() < 1e-12);
    assert!(p.lcv.is_some());
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..4 {
        let arch = MlpArchitecture::payoff(4, 3, seed % 2 == 0)
            .with_hidden(vec![6, 5])
            .with_dropout(0.0);
        assert!(neural::grad_check(&arch, seed).unwrap() < 1e-4);
    }
}

fn exhaustive_shapley(f: usize, value: impl Fn(Coalition) -> f64) -> Vec<f64> {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    (0..f)
        .map(|i| {
            (0u64..1 << f)
                .map(Coalition::from_bits)
                .filter(|s| !s.contains(i))
                .map(|s| fact(s.len()) * fact(f - s.len() - 1) / fact(f) * (value(s.with(i)) - value(s)))
                .sum()
        })
        .collect()
}

#[test]
fn attributions_agree_with_the_exhaustive_shapley_value() {
    let model = |z: &[f64]| z[0] * z[1] + 2.0 * z[2].max(0.0) - z[3] + 0.0 * z[4];
    let bg = Matrix::from_rows(&[[0.5, -1.0, 0.2, 1.0, 3.0], [-0.3, 0.4, -1.0, 0.0, -2.0]]).unwrap();
    let x = [1.0, 2.0, 0.7, -0.5, 9.0];
    let value = |s: Coalition| {
        bg.iter_rows()
            .map(|b| {
                let z: Vec<f64> = (0..5).map(|i| if s.contains(i) { x[i] } else { b[i] }).collect();
                model(&z)
            })
            .sum::<f64>()
            / bg.rows() as f64
    };
    let truth = exhaustive_shapley(5, value);
    let a = attribute_instance(&model, &x, &bg, &McConfig::new(4000, 10, 3)).unwrap();
    for i in 0..5 {
        assert!(
            (a.phi[i] - truth[i]).abs() < 5.0 * a.std_error[i] + 1e-12,
            "{i}: {:?} vs {truth:?}",
            a.phi
        );
    }
    assert_eq!(a.phi[4], 0.0);
    assert_eq!(a.std_error[4], 0.0);
    let total: f64 = a.phi.iter().sum();
    assert!((a.base + total - model(&x)).abs() < 1e-10);
}

#[test]
fn additive_models_are_attributed_in_closed_form() {
    let coef = [1.5, -2.0, 0.25];
    let model = move |z: &[f64]| z.iter().zip(coef).map(|(v, a)| v * a).sum::<f64>() + 4.0;
    let bg = Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
    let x = [1.0, -1.0, 2.0];
    let a = attribute_instance(&model, &x, &bg, &McConfig::new(50, 2, 1)).unwrap();
    for i in 0..3 {
        assert!((a.phi[i] - coef[i] * (x[i] - bg.get(0, i))).abs() < 1e-10);
    }
}

#[test]
fn interrupted_attribution_runs_resume_to_the_same_result() {
    let rows: Vec<[f64; 3]> = (0..150)
        .map(|i| [i as f64 / 150.0, ((i * 7) % 11) as f64, 1.0])
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let model = |z: &[f64]| z[0] * 3.0 + z[1] * z[1];
    let cfg = AttributionConfig {
        background_size: 8,
        mc: McConfig::new(40, 2, 7),
        seed: 7,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let full = build_attribution_dataset(&x, &model, &cfg, Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    // Keep the header lines and 70 rows, then cut the next row in half.
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..72].join("\n");
    cut.push('\n');
    cut.push_str(&lines[72][..10]);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(cut.as_bytes())
        .unwrap();
    let resumed = build_attribution_dataset(&x, &model, &cfg, Some(&path)).unwrap();
    assert_eq!(resumed.phi, full.phi);
    assert_eq!(resumed.row_seconds[..70], full.row_seconds[..70]);
    assert_eq!(xai::read_attributions(&path).unwrap().phi, full.phi);
}

#[test]
fn ingestion_is_deterministic_and_encodings_reapply() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(
        &path,
        "age,city,id,y\n30,paris,1,2.5\n,berlin,2,1.0\n50,paris,3,NA2\n",
    )
    .unwrap();
    let schema = SchemaConfig {
        target: "y".into(),
        categorical: vec!["city".into()],
        ignore: vec!["id".into()],
    };
    assert!(
        xai::ingest(&path, &schema).is_err(),
        "a non-numeric target is rejected"
    );
    std::fs::write(
        &path,
        "age,city,id,y\n30,paris,1,2.5\n,berlin,2,1.0\n50,paris,3,4\n",
    )
    .unwrap();
    let a = xai::ingest(&path, &schema).unwrap();
    assert_eq!(a, xai::ingest(&path, &schema).unwrap());
    assert_eq!(a.feature_names(), vec!["age", "city"]);
    assert_eq!(a.features.column(1), vec![0.0, 1.0, 0.0]);
    assert_eq!(a.features.get(1, 0), 0.0);
    let b = xai::ingest_with_encoding(&path, &a.encoding).unwrap();
    assert_eq!(a, b);
}
