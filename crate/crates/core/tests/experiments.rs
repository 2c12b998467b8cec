use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use heatsphere::experiments::{
    cv_accuracy, grid_search_cv, load_csv, parse_csv, select_representatives, stratified_kfold, synthetic, DataError,
    GridConfig, KernelFamily, LabeledDataset,
};
use heatsphere::kernel::{gram_matrix, KernelSpec};
use heatsphere::SphereMapKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOY: &str = "id,a,b,label\ns1,1,2,x\ns2,3,4,y\ns3,5,6,x\n";

#[test]
fn parses_toy_csv() {
    let d = parse_csv(TOY.as_bytes(), "label", SphereMapKind::SqrtL1).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.feature_names, vec!["a", "b"]);
    assert_eq!(d.sample_ids, vec!["s1", "s2", "s3"]);
    assert_eq!(d.matrix[1], vec![3.0, 4.0]);
    assert_eq!(d.classes(), vec!["x", "y"]);
}

#[test]
fn default_ids_are_zero_padded() {
    let mut text = String::from("a,b,label\n");
    for i in 0..12 {
        text.push_str(&format!("{i},1,{}\n", i % 2));
    }
    let d = parse_csv(text.as_bytes(), "label", SphereMapKind::None).unwrap();
    assert_eq!(d.sample_ids[3], "03");
    assert_eq!(d.sample_ids[11], "11");
}

#[test]
fn parse_errors_have_locations() {
    let bad = "a,b,label\n1,2,x\n3,oops,y\n";
    match parse_csv(bad.as_bytes(), "label", SphereMapKind::None).unwrap_err() {
        DataError::ParseError { line, column, .. } => assert_eq!((line, column), (3, 2)),
        e => panic!("unexpected {e}"),
    }
    let neg = "a,b,label\n1,2,x\n3,-1,y\n";
    match parse_csv(neg.as_bytes(), "label", SphereMapKind::SqrtL1).unwrap_err() {
        DataError::NegativeValueForCountData { line, column, value } => {
            assert_eq!((line, column, value), (3, 2, -1.0))
        }
        e => panic!("unexpected {e}"),
    }
    assert!(parse_csv(neg.as_bytes(), "label", SphereMapKind::L2Projective).is_ok());
    assert!(matches!(parse_csv(TOY.as_bytes(), "class", SphereMapKind::None), Err(DataError::MissingColumn(_))));
}

#[test]
fn reads_plain_and_gzip_files() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("toy.csv");
    std::fs::write(&plain, TOY).unwrap();
    let gz = dir.path().join("toy.csv.gz");
    let mut enc = GzEncoder::new(std::fs::File::create(&gz).unwrap(), Compression::default());
    enc.write_all(TOY.as_bytes()).unwrap();
    enc.finish().unwrap();
    let a = load_csv(&plain, "label", SphereMapKind::SqrtL1).unwrap();
    let b = load_csv(&gz, "label", SphereMapKind::SqrtL1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kfold_examples() {
    let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
    let folds = stratified_kfold(&labels, 5, 1).unwrap();
    for f in &folds {
        assert_eq!(f.len(), 20);
        for c in 0..4 {
            assert_eq!(f.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
    }
    let folds = stratified_kfold(&[7usize; 10], 5, 1).unwrap();
    assert!(folds.iter().all(|f| f.len() == 2));
    let small: Vec<usize> = vec![0, 0, 0, 0, 1, 1, 1, 1, 1];
    assert!(matches!(stratified_kfold(&small, 5, 1), Err(DataError::ClassSmallerThanK { size: 4, k: 5, .. })));
}

fn dataset(points: Vec<Vec<f64>>, class: &str) -> LabeledDataset {
    let m = points.len();
    let n = points[0].len();
    LabeledDataset::new(
        points,
        vec![class.to_string(); m],
        (0..n).map(|j| format!("f{j}")).collect(),
        (0..m).map(|i| format!("{i:02}")).collect(),
    )
    .unwrap()
}

#[test]
fn representatives_whole_class() {
    let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 1.0]).collect();
    let d = dataset(pts, "a");
    assert_eq!(select_representatives(&d, "a", 4, 50, 3).unwrap(), vec!["00", "01", "02", "03"]);
    assert!(matches!(
        select_representatives(&d, "a", 5, 50, 3),
        Err(DataError::ClassTooSmall { size: 4, needed: 5, .. })
    ));
}

#[test]
fn single_representative_is_the_medoid_nearest_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    let mean = [pts.iter().map(|p| p[0]).sum::<f64>() / 10.0, pts.iter().map(|p| p[1]).sum::<f64>() / 10.0];
    // brute force over every candidate
    let best = (0..10)
        .min_by(|&a, &b| {
            let da = (pts[a][0] - mean[0]).powi(2) + (pts[a][1] - mean[1]).powi(2);
            let db = (pts[b][0] - mean[0]).powi(2) + (pts[b][1] - mean[1]).powi(2);
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let d = dataset(pts, "a");
    assert_eq!(select_representatives(&d, "a", 1, 50, 9).unwrap(), vec![format!("{best:02}")]);
}

#[test]
fn two_blobs_give_one_representative_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pts = Vec::new();
    for centre in [0.0, 50.0] {
        for _ in 0..15 {
            pts.push(vec![centre + rng.random::<f64>(), centre + rng.random::<f64>()]);
        }
    }
    let d = dataset(pts, "a");
    let reps = select_representatives(&d, "a", 2, 50, 0).unwrap();
    let idx: Vec<usize> = reps.iter().map(|s| s.parse().unwrap()).collect();
    assert!(idx.iter().any(|&i| i < 15) && idx.iter().any(|&i| i >= 15), "{reps:?}");
}

#[test]
fn single_grid_point_is_plain_cv() {
    let d = synthetic::radial_noise_bands(1, 10, 6);
    let cfg = GridConfig::new(KernelFamily::Cos, SphereMapKind::L2Projective).with_c_grid(vec![10.0]).with_seed(3);
    let report = grid_search_cv(&d, &cfg).unwrap();
    assert_eq!(report.points.len(), 1);
    let (labels, classes) = d.class_indices();
    let folds = stratified_kfold(&labels, 5, 3).unwrap();
    let g = gram_matrix(&KernelSpec::cosine(SphereMapKind::L2Projective).unwrap(), &d.matrix).unwrap();
    let accs = cv_accuracy(&g, &labels, classes.len(), &folds, 10.0, 1e-3, 3).unwrap();
    assert_eq!(report.points[0].fold_accuracies, accs);
}

#[test]
fn gram_reuse_matches_rebuilt_fold_grams() {
    let d = synthetic::radial_noise_bands(2, 10, 5);
    let spec = KernelSpec::exact_heat(5, 0.3, SphereMapKind::L2Projective).unwrap();
    let (labels, classes) = d.class_indices();
    let folds = stratified_kfold(&labels, 5, 0).unwrap();
    let full = gram_matrix(&spec, &d.matrix).unwrap();
    let shared = cv_accuracy(&full, &labels, classes.len(), &folds, 5.0, 1e-3, 0).unwrap();
    for (f, test) in folds.iter().enumerate() {
        // rebuild from scratch: training block plus test-vs-train kernel rows
        let train: Vec<usize> = (0..d.len()).filter(|i| !test.contains(i)).collect();
        let tr = d.subset(&train);
        let g = gram_matrix(&spec, &tr.matrix).unwrap();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let model = heatsphere::svm::train_multiclass(&g, &y, classes.len(), 5.0, 1e-3, 0).unwrap();
        let mut correct = 0;
        for &i in test {
            let row: Vec<f64> =
                train.iter().map(|&j| heatsphere::kernel_eval(&spec, &d.matrix[i], &d.matrix[j]).unwrap()).collect();
            if model.predict(&row).unwrap() == labels[i] {
                correct += 1;
            }
        }
        let acc = correct as f64 / test.len() as f64;
        assert!((acc - shared[f]).abs() <= 1e-12, "fold {f}: {acc} vs {}", shared[f]);
    }
}

#[test]
fn cosine_beats_linear_under_radial_noise() {
    let bands = [(0.0, 0.5), (0.9, 1.3)];
    let d = synthetic::latitude_bands(5, &bands, 30, 10);
    let cos = grid_search_cv(&d, &GridConfig::new(KernelFamily::Cos, SphereMapKind::L2Projective)).unwrap();
    let lin = grid_search_cv(&d, &GridConfig::new(KernelFamily::Lin, SphereMapKind::None)).unwrap();
    let (a, b) = (cos.best_point().mean_accuracy, lin.best_point().mean_accuracy);
    assert!(a >= b, "cos {a} vs lin {b}");
}

#[test]
fn exact_kernel_sweet_spot_is_interior() {
    let d = synthetic::radial_noise_bands(8, 25, 50);
    let cfg = GridConfig::new(KernelFamily::Ext, SphereMapKind::L2Projective).with_seed(8);
    let report = grid_search_cv(&d, &cfg).unwrap();
    let best = report.best_point().t_star.unwrap();
    let grid = &cfg.t_star_grid;
    assert!(best > grid[0] && best < grid[grid.len() - 1], "best t* = {best}\n{}", report.to_table());
}

#[test]
fn same_seed_same_report() {
    let d = synthetic::radial_noise_bands(3, 10, 8);
    let cfg =
        GridConfig::new(KernelFamily::Ext, SphereMapKind::L2Projective).with_c_grid(vec![1.0, 10.0]).with_seed(77);
    let a = serde_json::to_string(&grid_search_cv(&d, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&grid_search_cv(&d, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains("wall_time"));
}

#[test]
fn map_rules_apply_to_families() {
    let d = synthetic::radial_noise_bands(3, 10, 8);
    assert!(grid_search_cv(&d, &GridConfig::new(KernelFamily::Lin, SphereMapKind::L2Projective)).is_err());
    assert!(grid_search_cv(&d, &GridConfig::new(KernelFamily::Cos, SphereMapKind::None)).is_err());
}

#[test]
fn report_table_uses_percent() {
    let d = synthetic::radial_noise_bands(1, 10, 6);
    let cfg = GridConfig::new(KernelFamily::Cos, SphereMapKind::L2Projective).with_c_grid(vec![10.0]);
    let report = grid_search_cv(&d, &cfg).unwrap();
    let table = report.to_table();
    assert!(table.lines().next().unwrap().contains("mean"));
    let expected = format!("{:.2}", 100.0 * report.points[0].mean_accuracy);
    assert!(table.contains(&expected));
    let mut csv = Vec::new();
    report.write_scores_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_and_stratify(
        sizes in prop::collection::vec(5usize..30, 1..5),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| vec![c; s]).collect();
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..sizes.len() {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn representatives_are_distinct(m_r in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let d = dataset(pts, "a");
        let mut reps = select_representatives(&d, "a", m_r, 5, seed).unwrap();
        prop_assert_eq!(reps.len(), m_r);
        reps.dedup();
        prop_assert_eq!(reps.len(), m_r);
    }
}
