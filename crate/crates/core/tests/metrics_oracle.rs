mod oracles;

use oracles::{crs_bf, cvs_bf, nrmse_bf};
use palettizer::eval::{crs, cvs, nrmse, run_protocol, train_test_split, EvalProtocolConfig, OracleImputer};
use palettizer::recommender::{Imputer, MeanImputer};
use palettizer::synth::generate_corpus;
use palettizer::{featurize, LabColor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lab<R: Rng>(rng: &mut R) -> [f64; 3] {
    [rng.gen_range(0.0..100.0), rng.gen_range(-90.0..90.0), rng.gen_range(-90.0..90.0)]
}

fn to_lab(c: &[[f64; 3]]) -> Vec<LabColor> {
    c.iter().map(|v| LabColor::new(v[0], v[1], v[2])).collect()
}

#[test]
fn metrics_match_brute_force_on_100_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..100 {
        let m = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=6);
        let truth: Vec<[f64; 3]> = (0..m).map(|_| random_lab(&mut rng)).collect();
        let imps: Vec<Vec<[f64; 3]>> = (0..n).map(|_| (0..m).map(|_| random_lab(&mut rng)).collect()).collect();
        let sds: Vec<f64> = (0..3 * m)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.5..30.0) })
            .collect();

        let flat_t: Vec<f64> = truth.iter().flatten().copied().collect();
        let flat_i: Vec<Vec<f64>> = imps.iter().map(|c| c.iter().flatten().copied().collect()).collect();
        let got = nrmse(&flat_t, &flat_i, &sds).unwrap();
        assert!((got - nrmse_bf(&flat_t, &flat_i, &sds)).abs() < 1e-9, "case {case} nrmse");

        let lab_i: Vec<Vec<LabColor>> = imps.iter().map(|c| to_lab(c)).collect();
        let got = crs(&to_lab(&truth), &lab_i);
        assert!((got - crs_bf(&truth, &imps)).abs() < 1e-9, "case {case} crs");
        let got = cvs(&lab_i);
        assert!((got - cvs_bf(&imps)).abs() < 1e-9, "case {case} cvs");
    }
}

#[test]
fn identity_imputations_score_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth: Vec<[f64; 3]> = (0..4).map(|_| random_lab(&mut rng)).collect();
    let flat: Vec<f64> = truth.iter().flatten().copied().collect();
    let copies = vec![flat.clone(); 5];
    assert_eq!(nrmse(&flat, &copies, &[7.0; 12]).unwrap(), 0.0);
    let labs = vec![to_lab(&truth); 5];
    assert_eq!(crs(&to_lab(&truth), &labs), 0.0);
    assert_eq!(cvs(&labs), 0.0);
    // A single imputation has no pairs.
    assert_eq!(cvs(&labs[..1]), 0.0);
    assert!(nrmse(&flat, &[], &[1.0; 12]).is_err());
}

#[test]
fn protocol_with_identity_imputer_is_all_zero() {
    let items = generate_corpus(40, 3);
    let test: Vec<_> = items.iter().map(|i| (i.id.clone(), featurize(&i.doc).unwrap())).collect();
    let oracle = OracleImputer::new(test.iter().map(|(_, v)| v.clone()).collect());
    let stds = vec![1.0; test[0].1.width()];
    let table = run_protocol(&[&oracle], &test, &stds, &EvalProtocolConfig::default()).unwrap();
    let row = table.get("oracle").unwrap();
    assert_eq!((row.nrmse, row.crs, row.cvs), (0.0, 0.0, 0.0));
    assert_eq!(table.cases, 40 * 5);
}

#[test]
fn mean_imputer_nrmse_is_near_one() {
    let items = generate_corpus(400, 11);
    let (train, test) = train_test_split(items, 0.2, 11);
    let train_v: Vec<_> = train.iter().map(|i| featurize(&i.doc).unwrap()).collect();
    let test_v: Vec<_> = test.iter().map(|i| (i.id.clone(), featurize(&i.doc).unwrap())).collect();
    let mean = MeanImputer::fit(&train_v).unwrap();
    let table = run_protocol(
        &[&mean as &dyn Imputer],
        &test_v,
        &mean.normalizer.std,
        &EvalProtocolConfig { seed: 11, ..Default::default() },
    )
    .unwrap();
    let row = table.get("mean").unwrap();
    assert!((row.nrmse - 1.0).abs() < 0.1, "mean NRMSE {}", row.nrmse);
    assert_eq!(row.cvs, 0.0);
}
