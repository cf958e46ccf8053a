//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run a subset with `FMSENSE_ACCEPT=1,2,7`. Criterion 11 needs
//! `FMSENSE_REAL_MANIFEST` pointing at a converted real dataset.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use fmsense_core::eval::{
    compute_metrics, make_fold_plan, run_crossval, wilcoxon_signed_rank, CrossvalConfig, EvalReport, GridSpace,
};
use fmsense_core::fusion::{early_fuse_features, FusionMode};
use fmsense_core::imu::{finalize_imu_features, imu_prenorm};
use fmsense_core::ingest::{load_all, load_manifest, synthesize_dataset, SynthConfig};
use fmsense_core::mat::finalize_mat_features;
use fmsense_core::nn::presets::preset_for;
use fmsense_core::nn::{conv1d_forward, preset, preset_names, ConvSpec, ModelSpec, TrainConfig};
use fmsense_core::norm::{fit_norm_stats, NormKind};
use fmsense_core::video::{finalize_video_features, normalize_skeleton, video_prenorm};
use fmsense_core::{Label, Modality, SubjectId};
use fmsense_core::data::RawVideoKeypoints;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_skeleton(rng: &mut ChaCha8Rng) -> Array3<f64> {
    let base: Vec<[f64; 2]> = (0..15)
        .map(|_| [rng.random_range(100.0..300.0), rng.random_range(100.0..300.0)])
        .collect();
    let phase: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let amp = rng.random_range(1.0..8.0);
    Array3::from_shape_fn((250, 15, 2), |(t, k, c)| {
        let w = 0.05 + 0.01 * k as f64;
        base[k][c] + amp * (w * t as f64 + phase[2 * k + c]).sin() + rng.random_range(-0.5..0.5)
    })
}

fn similarity(pos: &Array3<f64>, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let c = rng.random_range(0.5..=2.0);
    let (tx, ty) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
    let (s, co) = theta.sin_cos();
    let mut out = pos.clone();
    for mut p in out.lanes_mut(ndarray::Axis(2)) {
        let (x, y) = (p[0], p[1]);
        p[0] = c * (co * x - s * y) + tx;
        p[1] = c * (s * x + co * y) + ty;
    }
    out
}

fn geometry_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raws: Vec<Array3<f64>> = (0..100).map(|_| random_skeleton(&mut rng)).collect();
    let scaled = |frames: &Array3<f64>| normalize_skeleton(&RawVideoKeypoints { frames: frames.clone() }).map(|r| r.0);
    let pres = raws
        .iter()
        .map(|r| video_prenorm(&scaled(r)?))
        .collect::<fmsense_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let stats = fit_norm_stats(&pres, NormKind::PositionVelocity).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for raw in &raws {
        let moved = similarity(raw, &mut rng);
        let a = finalize_video_features(&scaled(raw).map_err(|e| e.to_string())?, &stats).map_err(|e| e.to_string())?;
        let b = finalize_video_features(&scaled(&moved).map_err(|e| e.to_string())?, &stats).map_err(|e| e.to_string())?;
        let d = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    ensure(worst <= 1e-6, format!("max entry change {worst:.2e} over 100 snippets (limit 1e-6)"))
}

fn shape_contracts() -> Outcome {
    let (_, snippets) = synthesize_dataset(&SynthConfig {
        n_subjects: 1,
        snippets_per_subject: 2,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let run = || -> fmsense_core::Result<Vec<(usize, usize)>> {
        let s = &snippets[0];
        let (mat, _) = finalize_mat_features(s.mat_raw.as_ref().unwrap())?;
        let imu_raw = s.imu_raw.as_ref().unwrap();
        let imu_stats = fit_norm_stats(&[imu_prenorm(imu_raw)?], NormKind::AccelGyro)?;
        let imu = finalize_imu_features(imu_raw, &imu_stats)?;
        let (pos, _) = normalize_skeleton(s.video_raw.as_ref().unwrap())?;
        let vid_stats = fit_norm_stats(&[video_prenorm(&pos)?], NormKind::PositionVelocity)?;
        let vid = finalize_video_features(&pos, &vid_stats)?;
        let fused = early_fuse_features(&mat, &imu, &vid)?;
        Ok(vec![vid.data().dim(), mat.data().dim(), imu.data().dim(), fused.data().dim()])
    };
    let got = run().map_err(|e| e.to_string())?;
    let want = vec![(250, 60), (500, 6), (300, 36), (250, 102)];
    ensure(got == want, format!("VID/MAT/IMU/fused shapes {got:?}"))
}

fn gradient_checks() -> Outcome {
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    let mut layers = BTreeSet::new();
    for case in 0..20 {
        let o = common::check_network(case);
        worst = worst.max(o.max_rel_err);
        checked += o.checked;
        skipped += o.skipped;
        layers.extend(o.layer_names);
    }
    ensure(
        worst <= 1e-4 && layers.len() == 6,
        format!(
            "max relative error {worst:.2e} over {checked} gradients ({skipped} skipped at ReLU kinks), layer types {layers:?}"
        ),
    )
}

fn naive_conv(x: &Array2<f64>, w: &Array3<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (t, cin) = x.dim();
    let (cout, k, _) = w.dim();
    let half = (k / 2) as isize;
    let mut y = Array2::zeros((t, cout));
    for o in 0..cout {
        for i in 0..t {
            let mut acc = b[o];
            for j in 0..k {
                let src = i as isize + j as isize - half;
                if src < 0 || src >= t as isize {
                    continue;
                }
                for c in 0..cin {
                    acc += w[[o, j, c]] * x[[src as usize, c]];
                }
            }
            y[[i, o]] = acc;
        }
    }
    y
}

fn conv_oracle() -> Outcome {
    let kernels: Vec<usize> = preset_names()
        .iter()
        .flat_map(|n| preset(n).unwrap().1.conv_layers)
        .map(|c| c.kernel_len)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = kernels[rng.random_range(0..kernels.len())];
        let t = rng.random_range(1..=300);
        let (cin, cout) = (rng.random_range(1..=40), rng.random_range(1..=16));
        let x = Array2::from_shape_fn((t, cin), |_| rng.random_range(-3.0..3.0));
        let w = Array3::from_shape_fn((cout, k, cin), |_| rng.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(cout, |_| rng.random_range(-1.0..1.0));
        let fast = conv1d_forward(&x, &w, &b).map_err(|e| e.to_string())?;
        let slow = naive_conv(&x, &w, &b);
        worst = worst.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ensure(worst <= 1e-10, format!("max deviation {worst:.2e} over 100 shapes, kernel lengths {kernels:?}"))
}

fn enumerate_p(d: &[f64]) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let rank = |v: f64| {
        let less = d.iter().filter(|u| u.abs() < v.abs()).count() as f64;
        let eq = d.iter().filter(|u| u.abs() == v.abs()).count() as f64;
        less + (eq + 1.0) / 2.0
    };
    let r: Vec<f64> = d.iter().map(|v| rank(*v)).collect();
    let observed: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        le += u64::from(s <= observed + 1e-9);
        ge += u64::from(s >= observed - 1e-9);
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for n in 5..=12 {
        for _ in 0..200 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-6..=6) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-6..=6) as f64).collect();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let nonzero = d.iter().filter(|v| **v != 0.0).count();
            let got = wilcoxon_signed_rank(&a, &b);
            if (1..5).contains(&nonzero) {
                if got.is_ok() {
                    return Err(format!("accepted {nonzero} non-zero differences"));
                }
                continue;
            }
            let got = got.map_err(|e| e.to_string())?;
            let want = if nonzero == 0 { 1.0 } else { enumerate_p(&d) };
            worst = worst.max((got - want).abs());
            compared += 1;
        }
    }
    let a: Vec<f64> = (1..=9).map(|i| i as f64 + 0.5).collect();
    let zeros = vec![0.0; 9];
    let all_pos = wilcoxon_signed_rank(&a, &zeros).map_err(|e| e.to_string())?;
    let same = wilcoxon_signed_rank(&a, &a).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-12 && (all_pos * 1e4).round() / 1e4 == 0.0039 && same == 1.0,
        format!("{compared} samples, max deviation {worst:.1e}; all-positive n=9 p={all_pos:.6}, identical p={same}"),
    )
}

fn metric_arithmetic() -> Outcome {
    let labels = |tp: usize, tn: usize, fp: usize, fn_: usize| {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (n, t, p) in [
            (tp, Label::FmPlus, Label::FmPlus),
            (fn_, Label::FmPlus, Label::FmMinus),
            (tn, Label::FmMinus, Label::FmMinus),
            (fp, Label::FmMinus, Label::FmPlus),
        ] {
            truth.extend(std::iter::repeat_n(t, n));
            pred.extend(std::iter::repeat_n(p, n));
        }
        (pred, truth)
    };
    let (p, t) = labels(8617, 7795, 2205, 1383);
    let m = compute_metrics(&p, &t).map_err(|e| e.to_string())?;
    let table = (m.ba * 1e4).round() / 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (tp, fn_, tn, fp) = (
            rng.random_range(0..60),
            rng.random_range(0..60),
            rng.random_range(0..60),
            rng.random_range(0..60),
        );
        if tp + fn_ == 0 || tn + fp == 0 {
            continue;
        }
        let (p, t) = labels(tp, tn, fp, fn_);
        let m = compute_metrics(&p, &t).map_err(|e| e.to_string())?;
        let tpr = tp as f64 / (tp + fn_) as f64;
        let tnr = tn as f64 / (tn + fp) as f64;
        let err = [(m.tpr, tpr), (m.tnr, tnr), (m.ba, (tpr + tnr) / 2.0)]
            .iter()
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    ensure(
        table == 82.06 && worst <= 1e-15,
        format!("TPR 86.17 / TNR 77.95 gives BA {table:.2}; 1000 random matrices max deviation {worst:.1e}"),
    )
}

fn grid_cardinality() -> Outcome {
    let space = GridSpace::default();
    let distinct: BTreeSet<String> = space.specs((250, 60)).map(|s| s.to_string()).collect();
    ensure(
        space.cardinality() == 4800 && distinct.len() == 4800,
        format!("cardinality {}, distinct specs {}", space.cardinality(), distinct.len()),
    )
}

fn learnability() -> Outcome {
    let run = |separability: f64| -> fmsense_core::Result<EvalReport> {
        let (manifest, snippets) = synthesize_dataset(&SynthConfig {
            n_subjects: 12,
            snippets_per_subject: 20,
            separability,
            seed: 11,
            modalities: vec![Modality::Vid],
            ..SynthConfig::default()
        })?;
        let plan = make_fold_plan(&manifest.subjects, 4, 5)?;
        let (_, spec) = preset("vid-1").expect("vid-1 preset");
        let train = TrainConfig {
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let cfg = CrossvalConfig::new(vec![Modality::Vid], None, BTreeMap::from([(Modality::Vid, spec)]), train, 2, 1)?;
        run_crossval(&snippets, &plan, &cfg)
    };
    let ba = |sep| run(sep).map(|r| r.row("VID").expect("VID row").ba.mean).map_err(|e| e.to_string());
    let (hi, lo) = (ba(1.0)?, ba(0.0)?);
    ensure(
        hi >= 0.95 && (0.35..=0.65).contains(&lo),
        format!("BA {hi:.3} at separability 1 (need >= 0.95), {lo:.3} at separability 0 (need 0.35..0.65)"),
    )
}

fn fusion_benefit() -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let (manifest, snippets) = synthesize_dataset(&SynthConfig {
            n_subjects: 12,
            snippets_per_subject: 12,
            signal_overlap: 0.625,
            seed: 100 + seed,
            ..SynthConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let plan = make_fold_plan(&manifest.subjects, 4, seed).map_err(|e| e.to_string())?;
        let specs = Modality::SENSORS
            .into_iter()
            .map(|m| {
                let conv = vec![ConvSpec::new(4, 25), ConvSpec::new(8, 25), ConvSpec::new(8, 25)];
                (m, ModelSpec::new(conv, 32, m.feature_shape()))
            })
            .collect();
        let train = TrainConfig {
            max_epochs: 30,
            ..TrainConfig::default()
        };
        let report = CrossvalConfig::new(Modality::SENSORS.to_vec(), Some(FusionMode::Late), specs, train, 1, seed)
            .and_then(|cfg| run_crossval(&snippets, &plan, &cfg))
            .map_err(|e| e.to_string())?;
        let ba = |name: &str| report.row(name).expect("report row").ba.mean;
        let best = ["MAT", "IMU", "VID"].iter().map(|n| ba(n)).fold(0.0, f64::max);
        let fused = ba("ALL-3Nets");
        wins += usize::from(fused > best);
        lines.push(format!(
            "seed {seed}: MAT {:.3} IMU {:.3} VID {:.3} ALL-3Nets {fused:.3}",
            ba("MAT"),
            ba("IMU"),
            ba("VID")
        ));
    }
    for l in &lines {
        println!("      {l}");
    }
    ensure(wins >= 8, format!("fusion beat the best single modality in {wins}/10 runs (need >= 8)"))
}

fn no_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut overlaps = 0;
    for trial in 0..1000u64 {
        let n = rng.random_range(2..=60);
        let subjects: Vec<SubjectId> = (0..n)
            .map(|i| SubjectId::new(format!("P{}-{i}", rng.random_range(0..1000))).unwrap())
            .collect();
        let k = rng.random_range(2..=n);
        let plan = make_fold_plan(&subjects, k, trial).map_err(|e| e.to_string())?;
        let mut tested = BTreeSet::new();
        for fold in &plan.folds {
            overlaps += fold.test_subjects.intersection(&fold.train_subjects).count();
            if fold.test_subjects.len() + fold.train_subjects.len() != n {
                return Err(format!("trial {trial}: fold does not cover all {n} subjects"));
            }
            tested.extend(fold.test_subjects.iter().cloned());
        }
        if tested.len() != n {
            return Err(format!("trial {trial}: {} of {n} subjects tested", tested.len()));
        }
    }
    ensure(overlaps == 0, format!("{overlaps} train/test overlaps in 1000 random plans"))
}

fn real_data() -> Option<Outcome> {
    let path = std::env::var_os("FMSENSE_REAL_MANIFEST")?;
    let run = || -> fmsense_core::Result<EvalReport> {
        let manifest = load_manifest(std::path::Path::new(&path))?;
        let snippets = load_all(&manifest)?;
        let plan = make_fold_plan(&manifest.subjects, 9, 0)?;
        let specs = Modality::SENSORS
            .into_iter()
            .map(|m| (m, preset_for(m, 1).expect("first preset")))
            .collect();
        let cfg = CrossvalConfig::new(
            Modality::SENSORS.to_vec(),
            Some(FusionMode::Late),
            specs,
            TrainConfig::default(),
            20,
            0,
        )?;
        run_crossval(&snippets, &plan, &cfg)
    };
    Some(run().map_err(|e| e.to_string()).and_then(|r| {
        println!("{}", r.to_text());
        let ba = |n: &str| 100.0 * r.row(n).expect("report row").ba.mean;
        let targets = [("MAT", 82.06), ("IMU", 90.22), ("VID", 90.66)];
        let close = targets.iter().all(|(n, t)| (ba(n) - t).abs() <= 3.0);
        let best_single = targets.iter().map(|(n, _)| ba(n)).fold(0.0, f64::max);
        let ordered = ba("ALL-3Nets") >= ba("IMU+VID") && ba("IMU+VID") >= best_single;
        ensure(
            close && ordered,
            format!(
                "MAT {:.2} IMU {:.2} VID {:.2} IMU+VID {:.2} ALL-3Nets {:.2}",
                ba("MAT"),
                ba("IMU"),
                ba("VID"),
                ba("IMU+VID"),
                ba("ALL-3Nets")
            ),
        )
    }))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "geometry invariance", limit: Some(Duration::from_secs(10)), run: geometry_invariance },
        Criterion { id: 2, name: "shape contracts", limit: Some(Duration::from_secs(1)), run: shape_contracts },
        Criterion { id: 3, name: "gradient checks", limit: Some(Duration::from_secs(60)), run: gradient_checks },
        Criterion { id: 4, name: "convolution oracle", limit: Some(Duration::from_secs(30)), run: conv_oracle },
        Criterion { id: 5, name: "Wilcoxon exactness", limit: Some(Duration::from_secs(60)), run: wilcoxon_exactness },
        Criterion { id: 6, name: "metric arithmetic", limit: Some(Duration::from_secs(1)), run: metric_arithmetic },
        Criterion { id: 7, name: "grid cardinality", limit: Some(Duration::from_secs(1)), run: grid_cardinality },
        // Runtime targets for 8 and 9 refer to a multi-core desktop; reported only.
        Criterion { id: 8, name: "end-to-end learnability", limit: None, run: learnability },
        Criterion { id: 9, name: "fusion benefit", limit: None, run: fusion_benefit },
        Criterion { id: 10, name: "no leakage", limit: Some(Duration::from_secs(5)), run: no_leakage },
    ];
    let selected: Option<BTreeSet<usize>> = std::env::var("FMSENSE_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: usize| selected.as_ref().is_none_or(|s| s.contains(&id));

    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted(c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let slow = c.limit.is_some_and(|l| took > l);
        let (status, msg) = match &outcome {
            Ok(m) if !slow => ("PASS", m.clone()),
            Ok(m) => ("FAIL", format!("{m}; too slow")),
            Err(m) => ("FAIL", m.clone()),
        };
        failed += usize::from(status == "FAIL");
        println!("{status} #{:<2} {}: {msg} [{:.1} s]", c.id, c.name, took.as_secs_f64());
    }
    if wanted(11) {
        match real_data() {
            None => println!("SKIP #11 real-data reproduction: FMSENSE_REAL_MANIFEST not set"),
            Some(Ok(m)) => println!("PASS #11 real-data reproduction: {m}"),
            Some(Err(m)) => {
                failed += 1;
                println!("FAIL #11 real-data reproduction: {m}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
