mod common;

use heatsphere::diffusion::{
    angles_from, compare_to_kernel, ks_statistic, ks_two_sample, north_pole, steps_for_time, walk, walk_with_paths,
    write_paths_csv, AngleDistribution, WalkConfig,
};
use heatsphere::{Error, UnitVector};

fn config(n: usize, delta: f64, steps: usize, walkers: usize, seed: u64) -> WalkConfig {
    WalkConfig { n, step_size: delta, num_steps: steps, num_walkers: walkers, seed, start: north_pole(n).unwrap() }
}

#[test]
fn zero_steps_stay_at_start() {
    let cfg = config(4, 0.05, 0, 10, 1);
    for e in walk(&cfg).unwrap() {
        assert_eq!(&e, &cfg.start);
    }
}

#[test]
fn endpoints_stay_on_the_sphere() {
    for e in walk(&config(7, 0.1, 500, 200, 2)).unwrap() {
        let norm = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn invalid_configs() {
    assert!(walk(&config(3, 0.2, 10, 10, 0)).is_err());
    assert!(walk(&config(3, 0.0, 10, 10, 0)).is_err());
    let mut cfg = config(3, 0.05, 10, 10, 0);
    cfg.start = north_pole(4).unwrap();
    assert!(matches!(walk(&cfg), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn mean_cosine_decreases_with_steps() {
    let mut prev = f64::INFINITY;
    for steps in [0, 25, 100, 400, 1600] {
        let cfg = config(3, 0.05, steps, 10_000, 3);
        let ends = walk(&cfg).unwrap();
        let mean = ends.iter().map(|e| e.cos_angle(&cfg.start).unwrap()).sum::<f64>() / ends.len() as f64;
        assert!(mean < prev, "steps {steps}: {mean} vs {prev}");
        prev = mean;
    }
}

#[test]
fn one_step_is_not_diffusion() {
    let delta = 0.02;
    let cfg = config(3, delta, 1, 2000, 4);
    let ends = walk(&cfg).unwrap();
    let theta = angles_from(&cfg.start, &ends).unwrap();
    assert!(theta.iter().all(|&x| (x - delta).abs() < 1e-12));
    let report = compare_to_kernel(&cfg.start, &ends, 3, cfg.time(), 20).unwrap();
    assert!(report.ks_statistic > 0.2, "KS {}", report.ks_statistic);
}

#[test]
fn too_few_walkers() {
    let cfg = config(3, 0.05, 10, 10, 0);
    let ends = walk(&cfg).unwrap();
    assert!(matches!(
        compare_to_kernel(&cfg.start, &ends, 3, cfg.time(), 10),
        Err(Error::TooFewWalkers { got: 10, .. })
    ));
}

#[test]
fn uniform_sample_matches_sine_law() {
    let n = 3;
    let ends: Vec<UnitVector> =
        common::random_unit_vectors(9, 20_000, n).into_iter().map(|v| UnitVector::new(v).unwrap()).collect();
    let start = north_pole(n).unwrap();
    let theta = angles_from(&start, &ends).unwrap();
    // closed-form CDF of the polar angle on S², independent of the table
    let ks = ks_statistic(&theta, |x| (1.0 - x.cos()) / 2.0);
    assert!(ks < 0.02, "KS {ks}");
    let table = AngleDistribution::uniform(n).unwrap();
    assert!(ks_statistic(&theta, |x| table.cdf(x)) < 0.02);
    let report = compare_to_kernel(&start, &ends, n, 20.0, 30).unwrap();
    assert!(report.ks_statistic < 0.02, "KS {}", report.ks_statistic);
}

#[test]
fn predicted_law_is_normalized() {
    for &(n, t) in &[(3usize, 0.01), (3, 1.0), (10, 0.1), (50, 0.05)] {
        let d = AngleDistribution::heat_kernel(n, t).unwrap();
        assert!((d.cdf(std::f64::consts::PI) - 1.0).abs() < 1e-8, "n={n} t={t}");
    }
}

#[test]
fn statistics_are_rotation_invariant() {
    let n = 4;
    let a = config(n, 0.05, 300, 10_000, 11);
    let mut b = a.clone();
    b.start = UnitVector::new(common::random_unit_vectors(12, 1, n).remove(0)).unwrap();
    let ta = angles_from(&a.start, &walk(&a).unwrap()).unwrap();
    let tb = angles_from(&b.start, &walk(&b).unwrap()).unwrap();
    let ks = ks_two_sample(&ta, &tb);
    assert!(ks < 0.03, "KS {ks}");
}

#[test]
fn halving_the_step_keeps_the_law() {
    let n = 3;
    let coarse = config(n, 0.04, 250, 10_000, 13);
    let fine = config(n, 0.02, 1000, 10_000, 14);
    assert_eq!(coarse.time(), fine.time());
    let ta = angles_from(&coarse.start, &walk(&coarse).unwrap()).unwrap();
    let tb = angles_from(&fine.start, &walk(&fine).unwrap()).unwrap();
    let ks = ks_two_sample(&ta, &tb);
    assert!(ks < 0.03, "KS {ks}");
}

#[test]
fn walks_are_reproducible() {
    let cfg = config(5, 0.05, 50, 100, 21);
    assert_eq!(walk(&cfg).unwrap(), walk(&cfg).unwrap());
}

#[test]
fn path_dump() {
    let cfg = config(3, 0.05, 10, 2, 5);
    let (ends, paths) = walk_with_paths(&cfg, 4).unwrap();
    assert_eq!(ends, walk(&cfg).unwrap());
    // steps 0, 4, 8, 10
    assert_eq!(paths[0].len(), 4);
    let mut buf = Vec::new();
    write_paths_csv(&paths, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("walker,step,x0,x1,x2\n"));
    assert_eq!(text.lines().count(), 1 + 8);
}

#[test]
fn step_count_for_time() {
    assert_eq!(steps_for_time(3, 3f64.ln() / 3.0, 0.02), 3662);
}
