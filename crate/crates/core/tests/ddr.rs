use ddr_core::classifier::ClassifierKind;
use ddr_core::data::{gen_two_class_four_cluster, Dataset, Domain, CLUSTER_CENTERS};
use ddr_core::ddr::{class_ratios, ddr_fit, DdrConfig};
use ddr_core::density_ratio::RatioGrid;
use ddr_core::labels::{Labels, PosteriorMatrix};

fn density(x: &[f64], c: [f64; 2]) -> f64 {
    (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / 2.0).exp()
}

/// `p_ts(x | c) / p_tr(x | c)` for the four-cluster generator.
fn true_class_ratio(x: &[f64], class: usize) -> f64 {
    let [a, b] = CLUSTER_CENTERS[class];
    let train_first = if class == 0 { 0.9 } else { 0.1 };
    let ts = 0.5 * density(x, a) + 0.5 * density(x, b);
    let tr = train_first * density(x, a) + (1.0 - train_first) * density(x, b);
    ts / tr
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn task(n_tr: usize, n_ts: usize, seed: u64) -> (Dataset, Labels, Dataset, Labels) {
    let train = gen_two_class_four_cluster(n_tr, Domain::Train, seed).unwrap();
    let test = gen_two_class_four_cluster(n_ts, Domain::Test, seed + 1).unwrap();
    let classes = train.classes().unwrap();
    let y_tr = train.encode_labels(&classes).unwrap();
    let y_ts = test.encode_labels(&classes).unwrap();
    (train, y_tr, test, y_ts)
}

#[test]
fn class_ratios_track_the_truth_with_known_labels() {
    let (train, y_tr, test, y_ts) = task(1000, 2000, 30);
    let betas = class_ratios(
        train.x(),
        &y_tr,
        test.x(),
        &PosteriorMatrix::one_hot(&y_ts),
        &RatioGrid::default(),
        true,
        31,
    )
    .unwrap();
    for c in 0..2 {
        let rows = y_tr.members(c);
        let truth: Vec<f64> = rows
            .iter()
            .map(|&i| true_class_ratio(&[train.x()[(i, 0)], train.x()[(i, 1)]], c))
            .collect();
        let r = pearson(&betas[&c], &truth);
        assert!(r > 0.5, "class {c}: correlation {r}");
    }
}

#[test]
fn fit_on_shifted_task() {
    let (train, y_tr, test, y_ts) = task(200, 1000, 40);
    let config = DdrConfig {
        seed: 3,
        ..DdrConfig::default()
    };
    let fit = ddr_fit(train.x(), &y_tr, test.x(), &config).unwrap();
    assert_eq!(fit.weights.len(), 200);
    assert!(fit.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
    assert_eq!(fit.trace.iter().filter(|r| r.selected).count(), 1);
    let best = fit.selected_iteration().unwrap();
    assert!(fit.trace.iter().all(|r| r.mutual_information <= best.mutual_information));
    // The prior ratio moves toward the true (1.2, 0.8).
    assert!(best.gamma[0] > 1.0 && best.gamma[1] < 1.0, "{:?}", best.gamma);
    assert!(fit.class_hyperparams.iter().all(Option::is_some));
    let _ = y_ts;

    let again = ddr_fit(train.x(), &y_tr, test.x(), &config).unwrap();
    assert_eq!(again, fit);
}

#[test]
fn single_iteration_and_no_shift() {
    let train = gen_two_class_four_cluster(300, Domain::Train, 50).unwrap();
    let test = gen_two_class_four_cluster(1000, Domain::Train, 51).unwrap();
    let classes = train.classes().unwrap();
    let y_tr = train.encode_labels(&classes).unwrap();
    let one = DdrConfig {
        max_iters: 1,
        ..DdrConfig::default()
    };
    let fit = ddr_fit(train.x(), &y_tr, test.x(), &one).unwrap();
    assert_eq!(fit.trace.len(), 1);
    assert!(fit.trace[0].selected);
    let mean = fit.weights.iter().sum::<f64>() / 300.0;
    assert!((0.7..1.3).contains(&mean), "mean weight {mean}");
    for g in &fit.trace[0].gamma {
        assert!((g - 1.0).abs() < 0.15, "{g}");
    }
}

#[test]
fn wlspc_variant_runs() {
    let (train, y_tr, test, _) = task(80, 300, 60);
    let config = DdrConfig {
        classifier: ClassifierKind::Wlspc,
        max_iters: 3,
        ..DdrConfig::default()
    };
    let fit = ddr_fit(train.x(), &y_tr, test.x(), &config).unwrap();
    assert!(fit.trace.len() <= 3);
    assert!(fit.weights.iter().all(|w| *w >= 0.0));
}

#[test]
fn input_errors() {
    let (train, y_tr, test, _) = task(40, 60, 70);
    let bad = DdrConfig {
        max_iters: 0,
        ..DdrConfig::default()
    };
    assert!(ddr_fit(train.x(), &y_tr, test.x(), &bad).unwrap_err().is_config());
    let one_class = Labels::new(vec![0; 40], 2).unwrap();
    assert!(ddr_fit(train.x(), &one_class, test.x(), &DdrConfig::default()).is_err());
    let empty = nalgebra::DMatrix::zeros(0, 2);
    assert!(ddr_fit(train.x(), &y_tr, &empty, &DdrConfig::default()).is_err());
}
