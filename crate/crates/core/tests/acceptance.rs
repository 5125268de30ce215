//! Acceptance checks, one line per criterion.
//!
//! Criterion 1 needs the DCASE 2016 development set, which is external and
//! several gigabytes, so exact reproduction of the published accuracies is not
//! possible here. It runs only when `SCENEFUSE_DCASE_DIR` points at a directory
//! holding `meta.txt` and the `audio/` tree, and it is not part of CI.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scenefuse::cdl::{covariance_descriptor, log_embed, spd_log, DEFAULT_EPS_SCALE};
use scenefuse::dataio::{load_features, load_manifest, AudioClip};
use scenefuse::eval::{clip_features, run_pipeline, PipelineConfig, SynthConfig, FUSION_ID};
use scenefuse::features::{project_subspace, Extractor, FeatureConfig};
use scenefuse::fusion::{fuse, fusion_weights, normalize_scores, ConfusionMatrix, FusionWeights, ScoreMatrix};
use scenefuse::gmm::{fit_gmm, fit_gmm_traced, GmmConfig};
use scenefuse::spectral::{dct_matrix, frame_signal, power_spectrum};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn published_reference() -> [(&'static str, f64); 8] {
    [
        ("mfcc-gmm", 66.83),
        ("pncc-gmm", 63.59),
        ("rcgcc-gmm", 63.65),
        ("spcc-gmm", 71.51),
        ("cepscom-gmm", 73.99),
        ("cepscom-cdl", 74.62),
        ("plp-gmm", 68.43),
        (FUSION_ID, 76.36),
    ]
}

fn dataset_reproduction(scratch: &Path) -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("SCENEFUSE_DCASE_DIR")?);
    Some((|| {
        let meta = std::fs::read_to_string(dir.join("meta.txt")).map_err(|e| format!("meta.txt: {e}"))?;
        let mut tsv = String::new();
        for line in meta.lines().filter(|l| !l.trim().is_empty()) {
            let mut cols = line.split('\t');
            let (Some(path), Some(label)) = (cols.next(), cols.next()) else {
                return Err(format!("malformed meta.txt line {line:?}"));
            };
            tsv.push_str(&format!("{}\t{}\n", dir.join(path).display(), label.trim()));
        }
        let manifest = scratch.join("dcase.tsv");
        std::fs::write(&manifest, tsv).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            manifest: Some(manifest),
            out_dir: scratch.join("dcase-out"),
            ..PipelineConfig::default()
        };
        let outcome = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let mut parts = Vec::new();
        let mut ok = true;
        for (id, expected) in published_reference() {
            let got = 100.0 * outcome.report(id).ok_or(format!("no report for {id}"))?.average_accuracy;
            ok &= (got - expected).abs() <= 5.0;
            parts.push(format!("{id} {got:.2} (ref {expected})"));
        }
        let line = parts.join(", ");
        if ok {
            Ok(line)
        } else {
            Err(format!("outside +-5 points: {line}"))
        }
    })())
}

fn benchmark_config(out_dir: PathBuf) -> PipelineConfig {
    PipelineConfig {
        out_dir,
        seed: 1,
        synth: Some(SynthConfig {
            seed: 1,
            ..SynthConfig::default()
        }),
        ..PipelineConfig::default()
    }
}

fn synthetic_benchmark(outcome: &scenefuse::eval::PipelineOutcome) -> Outcome {
    let mut best = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for r in outcome.reports.iter().filter(|r| r.system_id != FUSION_ID) {
        let acc = 100.0 * r.average_accuracy;
        check(acc >= 85.0, || format!("{} at {acc:.2}% < 85%", r.system_id))?;
        best = best.max(acc);
        parts.push(format!("{} {acc:.2}", r.system_id));
    }
    let fused = 100.0 * outcome.report(FUSION_ID).ok_or("no fusion report")?.average_accuracy;
    check(fused >= best - 2.0, || format!("fusion {fused:.2} < best {best:.2} - 2"))?;
    check(outcome.weights.values.iter().all(|w| (0.0..=1.0).contains(w)), || {
        "fusion weight outside [0, 1]".into()
    })?;
    Ok(format!("{}, fusion {fused:.2}", parts.join(", ")))
}

fn fusion_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let n_sys = rng.random_range(1..=5);
        let n_classes = rng.random_range(2..=15);
        let n_clips = rng.random_range(1..=50);
        let clips: Vec<String> = (0..n_clips).map(|i| format!("clip{i}")).collect();
        let mut normalized = Vec::new();
        let mut confusions = Vec::new();
        for s in 0..n_sys {
            let raw = Array2::from_shape_fn((n_clips, n_classes), |_| {
                if rng.random_bool(0.1) {
                    -1.0
                } else {
                    rng.random_range(-50.0..0.0)
                }
            });
            let id = format!("sys{s}");
            normalized.push(normalize_scores(&ScoreMatrix::new(id.clone(), clips.clone(), raw).unwrap()).unwrap());
            let counts = Array2::from_shape_fn((n_classes, n_classes), |_| {
                if rng.random_bool(0.3) {
                    0
                } else {
                    rng.random_range(0..20u64)
                }
            });
            confusions.push((id, ConfusionMatrix { counts }));
        }
        let weights = fusion_weights(&confusions).map_err(|e| e.to_string())?;
        for (s, (_, cm)) in confusions.iter().enumerate() {
            for c in 0..n_classes {
                let column: u64 = (0..n_classes).map(|r| cm.counts[[r, c]]).sum();
                let direct = if column == 0 { 0.0 } else { cm.counts[[c, c]] as f64 / column as f64 };
                let row = weights.row_of(&format!("sys{s}")).ok_or("missing weight row")?;
                let got = weights.values[[row, c]];
                check((got - direct).abs() <= 1e-15, || format!("case {case}: weight {got} vs {direct}"))?;
            }
        }
        let decision = fuse(&normalized, &weights).map_err(|e| e.to_string())?;
        for t in 0..n_clips {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for c in 0..n_classes {
                let mut total = 0.0;
                for (s, sys) in normalized.iter().enumerate() {
                    total += weights.values[[s, c]] * sys.values[[t, c]];
                }
                check(total == decision.fused[[t, c]], || {
                    format!("case {case}: fused {} vs {total}", decision.fused[[t, c]])
                })?;
                if total > best_score {
                    best_score = total;
                    best = c;
                }
            }
            check(decision.predicted[t] == best, || {
                format!("case {case}: predicted {} vs {best}", decision.predicted[t])
            })?;
        }
    }
    Ok("1000 instances".into())
}

fn gmm_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_drop = 0.0f64;
    for run in 0..100 {
        let dim = rng.random_range(1..=5);
        let k = rng.random_range(1..=5);
        let n = rng.random_range(60..=240);
        let centres = gaussian(&mut rng, k, dim) * 4.0;
        let x = Array2::from_shape_fn((n, dim), |(i, d)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            centres[[i % k, d]] + z
        });
        let cfg = GmmConfig {
            components: rng.random_range(1..=4),
            max_iters: 40,
            tol: 0.0,
            seed: run,
        };
        let (_, trace) = fit_gmm_traced(&x, &cfg).map_err(|e| e.to_string())?;
        for w in trace.log_likelihoods.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
            check(w[1] >= w[0] - 1e-8, || format!("run {run}: log-likelihood fell {} -> {}", w[0], w[1]))?;
        }
    }

    let x = gaussian(&mut rng, 300, 4) * 2.0 + 3.0;
    let m = fit_gmm(&x, 1, 0, 50, 1e-6).map_err(|e| e.to_string())?;
    let n = x.nrows() as f64;
    for d in 0..4 {
        let mean = x.column(d).sum() / n;
        let var = x.column(d).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        check((m.means[[0, d]] - mean).abs() <= 1e-9, || format!("K=1 mean {} vs {mean}", m.means[[0, d]]))?;
        check((m.variances[[0, d]] - var).abs() <= 1e-9, || {
            format!("K=1 variance {} vs {var}", m.variances[[0, d]])
        })?;
    }

    let a = gaussian(&mut rng, 300, 2) * 0.01;
    let b = gaussian(&mut rng, 100, 2) * 0.01 + 1.0;
    let x = ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()]).unwrap();
    let m = fit_gmm(&x, 2, 5, 100, 1e-8).map_err(|e| e.to_string())?;
    let (lo, hi) = if m.means[[0, 0]] < m.means[[1, 0]] { (0, 1) } else { (1, 0) };
    for d in 0..2 {
        let ca = a.column(d).mean().unwrap();
        let cb = b.column(d).mean().unwrap();
        check((m.means[[lo, d]] - ca).abs() <= 1e-3 && (m.means[[hi, d]] - cb).abs() <= 1e-3, || {
            "separated cluster means off".into()
        })?;
    }
    check((m.weights[lo] - 0.75).abs() <= 1e-3 && (m.weights[hi] - 0.25).abs() <= 1e-3, || {
        format!("separated cluster weights {:?}", m.weights)
    })?;
    Ok(format!("100 EM runs (largest drop {worst_drop:.1e}), K=1 closed form, separated clusters"))
}

/// Matrix exponential by scaling and squaring of a Taylor series.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn to_dm(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn spd_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut previous: Option<(Array2<f64>, Array1<f64>)> = None;
    let mut previous_dim = 0;
    for case in 0..500 {
        let dim = if case % 2 == 1 { previous_dim } else { rng.random_range(2..=8) };
        let frames = rng.random_range(2..=60);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let mix = gaussian(&mut rng, dim, dim);
        let x = gaussian(&mut rng, frames, dim).dot(&mix) * scale;
        let desc = covariance_descriptor(&x, DEFAULT_EPS_SCALE, "x").map_err(|e| e.to_string())?;
        let c = &desc.matrix;

        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let centred = &x - &mean;
        let cov = centred.t().dot(&centred) / (frames as f64 - 1.0);
        let eps = DEFAULT_EPS_SCALE * cov.diag().sum() / dim as f64;
        let asym = (c - &c.t()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        check(asym <= 1e-10 * c.iter().fold(1.0f64, |m, v| m.max(v.abs())), || {
            format!("case {case}: asymmetry {asym}")
        })?;
        let eig = to_dm(c).symmetric_eigenvalues();
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        check(min_eig >= eps * (1.0 - 1e-9), || format!("case {case}: min eigenvalue {min_eig} < {eps}"))?;

        let log = spd_log(c).map_err(|e| e.to_string())?;
        let back = expm(&to_dm(&log));
        let rel = (&back - to_dm(c)).norm() / to_dm(c).norm();
        check(rel <= 1e-8, || format!("case {case}: exp(log C) relative error {rel}"))?;

        let z = log_embed(&desc).map_err(|e| e.to_string())?;
        if let Some((prev_log, prev_z)) = previous.take().filter(|_| case % 2 == 1) {
            let frob = (to_dm(&log) - to_dm(&prev_log)).norm();
            let emb = (&z - &prev_z).mapv(|v| v * v).sum().sqrt();
            check((frob - emb).abs() <= 1e-10 * frob.max(1.0), || {
                format!("case {case}: embedding distance {emb} vs {frob}")
            })?;
        }
        previous = Some((log, z));
        previous_dim = dim;
    }
    Ok("500 descriptors".into())
}

fn naive_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos();
                let phase = -2.0 * PI * (k * i) as f64 / n as f64;
                re += w * x * phase.cos();
                im += w * x * phase.sin();
            }
            re * re + im * im
        })
        .collect()
}

fn dsp_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let n = rng.random_range(2..=256);
        let hop = rng.random_range(1..=n);
        let len = n + rng.random_range(0..3 * n);
        let samples: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let clip = AudioClip::new(samples.clone(), 16000, "x").unwrap();
        let spec = power_spectrum(&frame_signal(&clip, n, hop).map_err(|e| e.to_string())?);
        for t in 0..spec.n_frames() {
            let oracle = naive_power(&samples[t * hop..t * hop + n]);
            let peak = oracle.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
            for (k, o) in oracle.iter().enumerate() {
                let got = spec.power[[t, k]];
                check((got - o).abs() <= 1e-8 * peak, || format!("case {case}: bin {k} {got} vs {o}"))?;
            }
        }
    }

    for n in 1..=64 {
        let m = dct_matrix(n);
        let x = Array1::from_shape_fn(n, |_| rng.random_range(-10.0..10.0));
        let back = m.t().dot(&m.dot(&x));
        let err = (&back - &x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        check(err <= 1e-10, || format!("DCT size {n}: round trip error {err}"))?;
    }

    for case in 0..200 {
        let frame_len = rng.random_range(1..=4096);
        let hop = rng.random_range(1..=frame_len);
        let len = rng.random_range(1..=3 * frame_len + 10);
        let clip = AudioClip::new(vec![0.25; len], 8000, "x").unwrap();
        match frame_signal(&clip, frame_len, hop) {
            Ok(f) => {
                let expected = 1 + (len - frame_len) / hop;
                check(len >= frame_len && f.n_frames() == expected, || {
                    format!("case {case}: L={len} N={frame_len} hop={hop} gave {} frames", f.n_frames())
                })?;
            }
            Err(_) => check(len < frame_len, || format!("case {case}: unexpected framing error"))?,
        }
    }

    for case in 0..100 {
        let rows = rng.random_range(3..=80);
        let cols = rng.random_range(1..=20);
        let mix = gaussian(&mut rng, cols, cols);
        let x = gaussian(&mut rng, rows, cols).dot(&mix);
        let p = project_subspace(&x, 0.9).map_err(|e| e.to_string())?;
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let centred = &x - &mean;
        let total = centred.mapv(|v| v * v).sum();
        let residual = (&x - &p.reconstructed).mapv(|v| v * v).sum();
        check(residual <= (0.1 + 1e-12) * total, || format!("case {case}: residual {residual} of {total}"))?;

        let sv = to_dm(&centred).singular_values();
        let mut energy: Vec<f64> = sv.iter().map(|s| s * s).collect();
        energy.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        let mut minimal = energy.len();
        for (i, e) in energy.iter().enumerate() {
            acc += e;
            if acc >= 0.9 * total * (1.0 - 1e-12) {
                minimal = i + 1;
                break;
            }
        }
        check(p.rank == minimal, || format!("case {case}: rank {} vs minimal {minimal}", p.rank))?;
    }
    Ok("DFT, DCT, 200 frame counts, 100 subspace projections".into())
}

fn dims_contract(out: &Path) -> Outcome {
    let store = load_features(out.join("features.sfs")).map_err(|e| e.to_string())?;
    let manifest = load_manifest(out.join("audio/manifest.tsv")).map_err(|e| e.to_string())?;
    let cfg = FeatureConfig::default();
    let expected = [
        (Extractor::Mfcc, 60),
        (Extractor::Pncc, 60),
        (Extractor::Rcgcc, 60),
        (Extractor::Spcc, 60),
        (Extractor::Plp, 39),
        (Extractor::Cepscom, 240),
    ];
    for entry in &manifest.entries {
        for (e, dim) in expected {
            check(e.dim(&cfg) == dim, || format!("{} declares {} dims", e.name(), e.dim(&cfg)))?;
            let m = clip_features(&store, &entry.clip_path, e).map_err(|err| err.to_string())?;
            check(m.ncols() == dim && m.nrows() > 0, || {
                format!("{} on {}: {} x {}", e.name(), entry.clip_path, m.nrows(), m.ncols())
            })?;
        }
    }
    Ok(format!("{} clips: 60/60/60/60, PLP 39, CepsCom 240", manifest.len()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path)?);
        }
    }
    Ok(())
}

fn determinism(first: &Path, scratch: &Path) -> Outcome {
    let second = scratch.join("second");
    run_pipeline(&benchmark_config(second.clone())).map_err(|e| e.to_string())?;
    let (mut a, mut b) = (BTreeMap::new(), BTreeMap::new());
    collect_files(first, first, &mut a).map_err(|e| e.to_string())?;
    collect_files(&second, &second, &mut b).map_err(|e| e.to_string())?;
    check(a.keys().eq(b.keys()), || "runs produced different file sets".into())?;
    for (path, bytes) in &a {
        check(b[path] == *bytes, || format!("{} differs between runs", path.display()))?;
    }
    Ok(format!("{} files byte-identical", a.len()))
}

fn rescue_construction() -> Outcome {
    let clips = vec!["q".to_string()];
    let rows = [[0.9, 1.0, 0.0, 0.0], [0.9, 0.0, 1.0, 0.0], [0.9, 0.0, 0.0, 1.0]];
    let systems: Vec<ScoreMatrix> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let raw = ScoreMatrix::new(format!("s{i}"), clips.clone(), Array2::from_shape_vec((1, 4), r.to_vec()).unwrap())
                .unwrap();
            normalize_scores(&raw).unwrap()
        })
        .collect();
    for s in &systems {
        check(s.predictions()[0] != 0, || format!("{} already picks class 0", s.system_id))?;
    }
    let weights = FusionWeights::uniform(systems.iter().map(|s| s.system_id.clone()).collect(), 4);
    let decision = fuse(&systems, &weights).map_err(|e| e.to_string())?;
    check(decision.predicted[0] == 0, || format!("fusion picked {}", decision.predicted[0]))?;
    Ok(format!("top choices 1/2/3, fused scores {:?} -> class 0", decision.fused.row(0).to_vec()))
}

fn report(n: usize, name: &str, outcome: Option<Outcome>, failed: &mut bool) {
    match outcome {
        None => println!("criterion {n} SKIP  {name}: set SCENEFUSE_DCASE_DIR to a DCASE 2016 development set to run"),
        Some(Ok(msg)) => println!("criterion {n} PASS  {name}: {msg}"),
        Some(Err(msg)) => {
            *failed = true;
            println!("criterion {n} FAIL  {name}: {msg}");
        }
    }
}

fn main() {
    let scratch = tempfile::tempdir().expect("tempdir");
    let mut failed = false;

    println!(
        "criterion 1 note  published accuracies cannot be reproduced without the external DCASE 2016 audio; \
         this check is optional and not part of CI"
    );
    report(1, "published DCASE 2016 accuracies within 5 points", dataset_reproduction(scratch.path()), &mut failed);

    let first = scratch.path().join("first");
    let start = Instant::now();
    let outcome = run_pipeline(&benchmark_config(first.clone()));
    let elapsed = start.elapsed().as_secs_f64();
    let bench = outcome
        .as_ref()
        .map_err(|e| e.to_string())
        .and_then(synthetic_benchmark)
        .map(|m| format!("{m} ({elapsed:.0} s)"));
    report(2, "synthetic benchmark", Some(bench), &mut failed);
    report(3, "fusion arithmetic oracle", Some(fusion_oracle()), &mut failed);
    report(4, "GMM suite", Some(gmm_suite()), &mut failed);
    report(5, "SPD suite", Some(spd_suite()), &mut failed);
    report(6, "DSP suite", Some(dsp_suite()), &mut failed);
    let ran = outcome.is_ok();
    let need_run = |f: &dyn Fn() -> Outcome| if ran { f() } else { Err("benchmark run failed".into()) };
    report(7, "dimensional contract", Some(need_run(&|| dims_contract(&first))), &mut failed);
    report(8, "determinism", Some(need_run(&|| determinism(&first, scratch.path()))), &mut failed);
    report(9, "second-best rescue", Some(rescue_construction()), &mut failed);

    if failed {
        std::process::exit(1);
    }
}
