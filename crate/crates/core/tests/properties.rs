mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensorprint::challenge::{
    enroll_joint_with, legitimate, run_protocol, run_trials, verify, AdversaryModel, ChallengeSettings,
};
use sensorprint::classifier::smo::{self, SmoParams};
use sensorprint::classifier::{train_with, LabeledDataset, SvmParams};
use sensorprint::detector::{authenticate, Verdict};
use sensorprint::eval::{build_split, evaluate_model, metrics, sweep_with, ConfusionMatrix};
use sensorprint::features::{extract, extract_all, transform, FeatureVector};
use sensorprint::signal::{chunk, NoiseChunk, SegmentationScheme};
use sensorprint::simulator::{apply_attack, energy, AttackKind, AttackSpec, FleetSampler, PlantScenario, Tone};
use sensorprint::Execution;

fn blobs(seed: u64, classes: usize, per_class: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = LabeledDataset::default();
    for i in 0..per_class * classes {
        let k = i % classes;
        let v = (0..4).map(|j| (k * (j + 1)) as f64 + rng.random_range(-1.2..1.2)).collect();
        data.push(v, format!("K{k}"));
    }
    data
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extract_is_deterministic(values in prop::collection::vec(-50.0f64..50.0, 8..300)) {
        let c = NoiseChunk::from_values("S", 0, values).unwrap();
        let a = extract(&c).unwrap().to_array();
        let b = extract(&c).unwrap().to_array();
        prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn scaling_a_chunk_scales_location_and_spread(
        values in prop::collection::vec(-50.0f64..50.0, 8..300),
        k in 0.01f64..100.0,
    ) {
        let c = NoiseChunk::from_values("S", 0, values.clone()).unwrap();
        let s = NoiseChunk::from_values("S", 0, values.iter().map(|v| k * v).collect()).unwrap();
        let (a, b) = (extract(&c).unwrap(), extract(&s).unwrap());
        prop_assume!(!a.degenerate);
        let close = |x: f64, y: f64, scale: f64| (x - y).abs() <= 1e-9 * scale.max(1e-12);
        prop_assert!(close(b.mean, k * a.mean, k * a.std_dev.max(a.mean.abs())));
        prop_assert!(close(b.std_dev, k * a.std_dev, k * a.std_dev));
        prop_assert!(close(b.mean_abs_dev, k * a.mean_abs_dev, k * a.std_dev));
        prop_assert!(close(b.dc_component, k * a.dc_component, k * a.dc_component));
        prop_assert!(close(b.skewness, a.skewness, 1.0));
        prop_assert!(close(b.kurtosis, a.kurtosis, 1.0));
        prop_assert!(close(b.spectral_centroid, a.spectral_centroid, 1.0));
        prop_assert!(close(b.spectral_std, a.spectral_std, 1.0));
        let (ma, mb) = (transform(&c).unwrap().magnitudes, transform(&s).unwrap().magnitudes);
        let peak = ma.iter().fold(0.0f64, |m, v| m.max(*v));
        for (x, y) in ma.iter().zip(&mb) {
            prop_assert!(close(*y, k * x, k * peak));
        }
    }

    #[test]
    fn smo_solution_is_dual_feasible(seed in any::<u64>(), n in 2usize..=12, c in 0.05f64..50.0, gamma in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let sol = smo::solve(&points, &y, &SmoParams { c, gamma, tol: 1e-3, max_passes: 1000 }).unwrap();
        prop_assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-6, "{}", balance);
    }

    #[test]
    fn shifting_a_feature_leaves_predictions_unchanged(seed in 0u64..1000, j in 0usize..4, shift in -20i32..20) {
        let data = blobs(seed, 3, 12);
        let params = SvmParams::with(5.0, 0.25);
        let model = train_with(&data, &params, Execution::Sequential).unwrap();
        let mut moved = data.clone();
        moved.vectors.iter_mut().for_each(|v| v[j] += shift as f64);
        let shifted = train_with(&moved, &params, Execution::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..40 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..8.0)).collect();
            let mut qs = q.clone();
            qs[j] += shift as f64;
            prop_assert_eq!(model.predict_raw(&q), shifted.predict_raw(&qs));
        }
    }

    #[test]
    fn confusion_identities_hold(seed in any::<u64>(), k in 2usize..7, n in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes: Vec<String> = (0..k).map(|i| format!("C{i}")).collect();
        let mut m = ConfusionMatrix::empty(classes.clone());
        for _ in 0..n {
            m.record(&classes[rng.random_range(0..k)], &classes[rng.random_range(0..k)]).unwrap();
        }
        let r = metrics(&m).unwrap();
        let tp: u64 = r.per_class.iter().map(|c| c.tp).sum();
        let fp: u64 = r.per_class.iter().map(|c| c.fp).sum();
        let fn_: u64 = r.per_class.iter().map(|c| c.fn_).sum();
        prop_assert_eq!(tp, m.trace());
        prop_assert_eq!(fp, m.total() - m.trace());
        prop_assert_eq!(fn_, m.total() - m.trace());
        let all = [r.acc_eq1, r.acc_plain].into_iter().chain(r.per_class.iter().flat_map(|c| [c.tpr, c.fpr]));
        for v in all {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if k == 2 {
            prop_assert_eq!(r.acc_eq1, r.acc_plain);
        }
    }

    #[test]
    fn replay_windows_copy_their_source(seed in 0u64..1000, start in 600usize..900, len in 1usize..300) {
        let fleet = PlantScenario::sampled(&FleetSampler::default(), 1, 1200, seed).unwrap().run().unwrap();
        let s = &fleet.clean[0];
        let spec = AttackSpec { start, end: (start + len).min(1200), kind: AttackKind::Replay { source_start: 0 } };
        let out = apply_attack(s, None, &spec).unwrap().victim;
        let w = spec.window_len();
        prop_assert_eq!(
            out.values[start..start + w].iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            s.values[..w].iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn honest_challenge_stays_within_amplitude_budget(seed in any::<u64>(), sensor in 0usize..20) {
        let profiles = FleetSampler::default().sample(20, 7).unwrap();
        let setup = ChallengeSettings::default().setup(profiles[sensor].clone()).unwrap();
        let schedule = setup.schedule(seed).unwrap();
        let legit = legitimate(&setup, &schedule).unwrap();
        let reported = run_protocol(&setup, &schedule, &AdversaryModel::none()).unwrap();
        let bound = setup.challenger.amplitude_fraction * setup.sensor.baseline.abs();
        for (r, l) in reported.values.iter().zip(&legit.values) {
            prop_assert!((r - l).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constant_chunks_are_never_authentic(level in -1e3f64..1e3, len in 8usize..256) {
        let model = train_with(&blobs(1, 3, 10), &SvmParams::default(), Execution::Sequential).unwrap();
        let c = NoiseChunk::from_values("K0", 0, vec![level; len]).unwrap();
        let d = authenticate(&model, &c, "K0").unwrap();
        prop_assert_eq!(d.verdict, Verdict::Saturated);
        prop_assert!(d.predicted_id.is_none());
    }
}

#[test]
fn verdicts_and_verification_are_pure() {
    let fleet = SimFleet::new(4, 11);
    let (train, _) = build_split(&fleet.noise(), 120, SegmentationScheme::Third).unwrap();
    let model = train_with(&train, &SvmParams::default(), Execution::Sequential).unwrap();
    let noise = fleet.noise();
    for (id, series) in &noise {
        for c in chunk(series, 120).unwrap().iter().take(20) {
            assert_eq!(authenticate(&model, c, id).unwrap(), authenticate(&model, c, id).unwrap());
        }
    }

    let setup = ChallengeSettings::default().setup(fleet.profiles[0].clone()).unwrap();
    let joint = enroll_joint_with(&setup, &SvmParams::default(), Execution::Sequential).unwrap();
    let schedule = setup.schedule(3).unwrap();
    let reported = run_protocol(&setup, &schedule, &AdversaryModel::replay()).unwrap();
    assert_eq!(
        verify(&joint, &reported, &schedule).unwrap(),
        verify(&joint, &reported, &schedule).unwrap()
    );
}

#[test]
fn scenarios_are_reproducible() {
    let mut s = PlantScenario::sampled(&FleetSampler::default(), 6, 2400, 5).unwrap();
    s.attacks.push(sensorprint::simulator::AttackEntry {
        sensor: "S02".into(),
        spec: AttackSpec {
            start: 1200,
            end: 2400,
            kind: AttackKind::Stealthy { mean: None, std: None, seed: 1 },
        },
    });
    let a = s.run_with(Execution::Parallel).unwrap();
    let b = s.run_with(Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, s.run().unwrap());
}

#[test]
fn analog_spoof_raises_chunk_energy() {
    let fleet = SimFleet::new(5, 21);
    for (p, s) in fleet.profiles.iter().zip(&fleet.series) {
        let spec = AttackSpec {
            start: 3600,
            end: 7200,
            kind: AttackKind::AnalogSpoof {
                tones: vec![Tone { frequency: 0.21, amplitude: 3.0 * p.noise_std, phase: 0.3 }],
            },
        };
        let attacked = apply_attack(s, None, &spec).unwrap().victim;
        for k in 30..60 {
            let r = k * 120..(k + 1) * 120;
            let noise = |v: &[f64]| v.iter().map(|x| x - p.baseline).collect::<Vec<_>>();
            let before = energy(&noise(&s.values[r.clone()]), 1.0);
            let after = energy(&noise(&attacked.values[r]), 1.0);
            assert!(after > before, "{} chunk {k}: {after} <= {before}", p.sensor_id);
        }
    }
}

fn nearest_centroid_accuracy(fleet: &SimFleet) -> f64 {
    let (train, test) = build_split(&fleet.noise(), 120, SegmentationScheme::Third).unwrap();
    let dim = train.vectors[0].len();
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| train.vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|j| {
            let var = train.vectors.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(1e-12)
        })
        .collect();
    let z = |v: &[f64]| v.iter().enumerate().map(|(j, x)| (x - mean[j]) / std[j]).collect::<Vec<f64>>();
    let classes = train.classes();
    let centroids: Vec<Vec<f64>> = classes
        .iter()
        .map(|c| {
            let members: Vec<Vec<f64>> =
                train.vectors.iter().zip(&train.labels).filter(|(_, l)| *l == c).map(|(v, _)| z(v)).collect();
            (0..dim).map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64).collect()
        })
        .collect();
    let correct = test
        .vectors
        .iter()
        .zip(&test.labels)
        .filter(|(v, l)| {
            let q = z(v);
            let best = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            classes[best] == **l
        })
        .count();
    correct as f64 / test.len() as f64
}

#[test]
fn sampled_fleets_separate_by_nearest_centroid() {
    let accs: Vec<f64> = (0..3).map(|seed| nearest_centroid_accuracy(&SimFleet::new(20, seed))).collect();
    assert!(accs.iter().all(|&a| a >= 0.95), "nearest-centroid accuracy per seed {accs:.4?}");
}

#[test]
fn sampled_profiles_have_distinct_signatures() {
    let profiles = FleetSampler::default().sample(20, 4).unwrap();
    for (i, a) in profiles.iter().enumerate() {
        for b in &profiles[i + 1..] {
            let tone = |p: &sensorprint::simulator::SensorProfile| p.tones.first().map(|t| t.frequency.to_bits());
            assert!(a.noise_std != b.noise_std || tone(a) != tone(b));
        }
    }
}

#[test]
fn authenticate_false_positives_stay_low_at_defaults() {
    let fleet = SimFleet::new(20, 0);
    let noise = fleet.noise();
    let (train, _) = build_split(&noise, 120, SegmentationScheme::Third).unwrap();
    let model = train_with(&train, &SvmParams::default(), Execution::default()).unwrap();
    let mut worst = (String::new(), 0.0);
    for (id, series) in &noise {
        let chunks = chunk(series, 120).unwrap();
        let held_out = &chunks[30..];
        let flagged = held_out
            .iter()
            .filter(|c| !authenticate(&model, c, id).unwrap().verdict.is_authentic())
            .count();
        let rate = flagged as f64 / held_out.len() as f64;
        if rate > worst.1 {
            worst = (id.clone(), rate);
        }
    }
    assert!(worst.1 <= 0.05, "worst per-sensor false positive rate {:.4} ({})", worst.1, worst.0);
}

#[test]
fn sequential_and_parallel_agree() {
    let fleet = SimFleet::new(6, 9);
    let noise = fleet.noise();
    let (train, test) = build_split(&noise, 120, SegmentationScheme::Third).unwrap();
    let params = SvmParams::default();
    let seq = train_with(&train, &params, Execution::Sequential).unwrap();
    let par = train_with(&train, &params, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(evaluate_model(&seq, &test).unwrap(), evaluate_model(&par, &test).unwrap());

    let chunks = chunk(&noise["S01"], 60).unwrap();
    let bits = |v: Vec<FeatureVector>| v.iter().map(|f| f.to_array().map(f64::to_bits)).collect::<Vec<_>>();
    assert_eq!(
        bits(extract_all(&chunks, Execution::Sequential).unwrap()),
        bits(extract_all(&chunks, Execution::Parallel).unwrap())
    );

    let sizes = [60, 120];
    let schemes = [SegmentationScheme::Half, SegmentationScheme::Third];
    assert_eq!(
        sweep_with(&noise, &sizes, &schemes, &params, Execution::Sequential).unwrap(),
        sweep_with(&noise, &sizes, &schemes, &params, Execution::Parallel).unwrap()
    );

    let setup = ChallengeSettings::default().setup(fleet.profiles[1].clone()).unwrap();
    let joint_s = enroll_joint_with(&setup, &params, Execution::Sequential).unwrap();
    let joint_p = enroll_joint_with(&setup, &params, Execution::Parallel).unwrap();
    assert_eq!(joint_s, joint_p);
    let adversary = AdversaryModel::adaptive(120);
    assert_eq!(
        run_trials(&joint_s, &setup, &adversary, 10, 4, Execution::Sequential).unwrap(),
        run_trials(&joint_s, &setup, &adversary, 10, 4, Execution::Parallel).unwrap()
    );
}
