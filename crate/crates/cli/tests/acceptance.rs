//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Every expected value here comes from an oracle written in this file
//! (brute-force enumeration, finite differences, a Jacobi eigensolver,
//! closed-form estimators), never from the library under test.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use sha2::{Digest, Sha256};

use voxsource::classifiers::{train_gmm, Adam, GmmConfig, MlpConfig, MlpModel};
use voxsource::dsp::{cqt, CqtConfig};
use voxsource::embedding_store::{fused_dim, fused_lookup, sort_for_fusion};
use voxsource::eval::{evaluate, ConstantPredictor, ManifestRecord, Source, Split};
use voxsource::preprocess::{segment_count, segment_starts, SEGMENT_LEN};
use voxsource::{cqcc, mfcc, pca, EmbeddingStore, Label, Segment};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn noise_segment(seed: u64) -> Segment {
    let mut r = rng(seed);
    Segment {
        clip_id: "noise".into(),
        start_sample: 0,
        label: None,
        samples: (0..SEGMENT_LEN).map(|_| 0.1 * r.sample::<f64, _>(StandardNormal)).collect(),
    }
}

fn fixture(name: &str) -> Result<EmbeddingStore, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
    EmbeddingStore::load(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn dimension_contracts() -> Outcome {
    let seg = noise_segment(1);
    let m = mfcc(&seg).dim();
    let c = cqcc(&seg).dim();
    ensure(m == 1212, || format!("mfcc dim {m}"))?;
    ensure(c == 1404, || format!("cqcc dim {c}"))?;

    let mut r = rng(2);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| gaussian_vec(&mut r, 1212)).collect();
    let model = pca::fit(&rows, 128).map_err(|e| e.to_string())?;
    let p = model.transform(&rows[0]).map_err(|e| e.to_string())?.len();
    ensure(p == 128, || format!("pca dim {p}"))?;

    let mut stores = vec![fixture("soundnet.emb1")?, fixture("vggish.emb1")?];
    sort_for_fusion(&mut stores);
    let key = stores[0].keys().next().ok_or("empty fixture")?.to_string();
    let f = fused_lookup(&stores, &key).map_err(|e| e.to_string())?.dim();
    ensure(f == 640 && fused_dim(&stores) == 640, || format!("fused dim {f}"))?;
    Ok(format!("mfcc={m} cqcc={c} pca={p} vggish+soundnet={f}"))
}

fn segmentation_oracle() -> Outcome {
    let mut r = rng(3);
    for trial in 0..1000 {
        let window = r.random_range(1..=20_000usize);
        let hop = r.random_range(1..=window);
        let n = r.random_range(0..=200_000usize);
        let mut brute = Vec::new();
        let mut start = 0;
        while start + window <= n {
            brute.push(start);
            start += hop;
        }
        let got = segment_count(n, window, hop);
        ensure(got == brute.len(), || format!("trial {trial}: N={n} window={window} hop={hop}: {got} vs {}", brute.len()))?;
        let starts: Vec<usize> = segment_starts(n, window, hop).collect();
        ensure(starts == brute, || format!("trial {trial}: start offsets differ"))?;
    }
    Ok("1000 random (N, window, hop) triples exact".into())
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    for (d, dim) in [2usize, 128, 640].into_iter().enumerate() {
        let config = MlpConfig { hidden: vec![100], seed: d as u64, ..MlpConfig::default() };
        let mut model = MlpModel::init(dim, config);
        let mut r = rng(40 + d as u64);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| gaussian_vec(&mut r, dim)).collect();
        let labels: Vec<Label> = (0..6).map(|i| if i % 2 == 0 { Label::Natural } else { Label::Emitted }).collect();
        let weights = [1.0, 1.0];
        let (_, analytic) = model.loss_and_gradient(&xs, &labels, weights).map_err(|e| e.to_string())?;

        // every parameter for small models; otherwise all output-layer
        // parameters plus a random sample of the first layer
        let n = model.param_count();
        let first_layer = dim * 100 + 100;
        let indices: Vec<usize> = if n <= 2000 {
            (0..n).collect()
        } else {
            (0..400).map(|_| r.random_range(0..first_layer)).chain(first_layer..n).collect()
        };
        for i in indices {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + H;
            let plus = model.loss(&xs, &labels, weights).map_err(|e| e.to_string())?;
            model.params_mut()[i] = orig - H;
            let minus = model.loss(&xs, &labels, weights).map_err(|e| e.to_string())?;
            model.params_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * H);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            ensure(rel < 1e-4, || format!("dim {dim} param {i}: analytic {a:e} vs numeric {numeric:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("dims 2/128/640, max relative error {worst:.2e}"))
}

fn adam_first_step() -> Outcome {
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut worst = 0.0f64;
    for &(p0, g, lr) in &[(0.3, 0.37, 5e-5), (-1.2, -2.5, 1e-3), (0.0, 1e-9, 0.1), (5.0, 40.0, 0.01)] {
        let mut adam = Adam::new(1, lr, b1, b2, eps);
        let mut p = [p0];
        adam.step(&mut p, &[g]);
        let m_hat = ((1.0 - b1) * g) / (1.0 - b1);
        let v_hat = ((1.0 - b2) * g * g) / (1.0 - b2);
        let expected = p0 - lr * m_hat / (v_hat.sqrt() + eps);
        let err = (p[0] - expected).abs();
        ensure(err <= 1e-10, || format!("p0={p0} g={g} lr={lr}: {} vs {expected}", p[0]))?;
        worst = worst.max(err);
    }
    Ok(format!("4 scalar cases, max error {worst:.1e}"))
}

fn em_properties() -> Outcome {
    let mut r = rng(5);
    let mut worst_drop = 0.0f64;
    let mut skipped = 0;
    for ds in 0..100 {
        let d = r.random_range(1..=5usize);
        let true_m = r.random_range(1..=4usize);
        let n = r.random_range(60..=200usize);
        let centers: Vec<Vec<f64>> = (0..true_m).map(|_| (0..d).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let c = &centers[r.random_range(0..true_m)];
                c.iter().map(|mu| mu + r.random_range(0.3..1.5) * r.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect();
        let config =
            GmmConfig { components: r.random_range(1..=4), max_iterations: 60, tolerance: 0.0, seed: ds, ..GmmConfig::default() };
        let (_, history) = train_gmm(&data, &config).map_err(|e| format!("dataset {ds}: {e}"))?;
        if history.reinitialized > 0 {
            skipped += 1;
            continue;
        }
        for w in history.log_likelihood.windows(2) {
            let drop = w[0] - w[1];
            ensure(drop <= 1e-8, || format!("dataset {ds}: log-likelihood fell by {drop:e}"))?;
            worst_drop = worst_drop.max(drop);
        }
    }
    ensure(skipped <= 10, || format!("{skipped} datasets needed component re-seeding"))?;

    // M = 1 has a closed form: sample mean and population variance
    let mut worst_mle = 0.0f64;
    for trial in 0..20 {
        let d = 1 + trial % 6;
        let data: Vec<Vec<f64>> =
            (0..50 + trial).map(|_| gaussian_vec(&mut r, d).iter().map(|v| 3.0 * v + 1.0).collect()).collect();
        let nf = data.len() as f64;
        let (g, _) = train_gmm(&data, &GmmConfig { components: 1, seed: trial as u64, ..GmmConfig::default() })
            .map_err(|e| e.to_string())?;
        for j in 0..d {
            let mean = data.iter().map(|x| x[j]).sum::<f64>() / nf;
            let var = data.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / nf;
            worst_mle = worst_mle.max((g.means[0][j] - mean).abs()).max((g.variances[0][j] - var).abs());
        }
        worst_mle = worst_mle.max((g.weights[0] - 1.0).abs());
    }
    ensure(worst_mle <= 1e-8, || format!("M=1 estimate off by {worst_mle:e}"))?;

    let spread = Normal::new(0.0, 0.5).unwrap();
    let truth = [[-3.0, -3.0], [3.0, 3.0]];
    let data: Vec<Vec<f64>> = (0..1000).map(|i| truth[i % 2].iter().map(|c| c + spread.sample(&mut r)).collect()).collect();
    let (g, _) = train_gmm(&data, &GmmConfig { components: 2, seed: 9, ..GmmConfig::default() }).map_err(|e| e.to_string())?;
    let mut means = g.means.clone();
    means.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let recovery = means.iter().zip(&truth).flat_map(|(m, t)| m.iter().zip(t).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
    ensure(recovery <= 0.1, || format!("two-cluster means off by {recovery}"))?;
    Ok(format!(
        "max LL drop {worst_drop:.1e} over {} datasets, M=1 error {worst_mle:.1e}, two-cluster error {recovery:.3}",
        100 - skipped
    ))
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix. Returns
/// eigenpairs sorted by decreasing eigenvalue.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> Vec<(f64, Vec<f64>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|j| (a[j][j], v.iter().map(|row| row[j]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

fn pca_oracle() -> Outcome {
    let mut r = rng(6);
    let mut worst_angle = 0.0f64;
    let mut worst_mean = 0.0f64;
    for trial in 0..100 {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| gaussian_vec(&mut r, 5)).collect();
        let mean: Vec<f64> = (0..5).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / 10.0).collect();
        let cov: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| rows.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / 9.0).collect())
            .collect();
        let oracle = jacobi_eigen(cov);
        let model = pca::fit(&rows, 5).map_err(|e| e.to_string())?;
        for (k, (value, u)) in oracle.iter().enumerate() {
            let c = &model.components[k];
            let dot: f64 = c.iter().zip(u).map(|(a, b)| a * b).sum();
            let perp: f64 = c.iter().zip(u).map(|(a, b)| (a - dot * b).powi(2)).sum::<f64>().sqrt();
            let angle = perp.atan2(dot.abs());
            ensure(angle < 1e-6, || format!("trial {trial} component {k}: angle {angle:e}"))?;
            let var_err = (model.explained_variance[k] - value).abs() / value.abs().max(1e-12);
            ensure(var_err < 1e-9, || {
                format!("trial {trial} component {k}: variance {} vs {value}", model.explained_variance[k])
            })?;
            worst_angle = worst_angle.max(angle);
        }
        let at_mean = model.transform(&mean).map_err(|e| e.to_string())?;
        let m = at_mean.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        ensure(m <= 1e-9, || format!("trial {trial}: transform(mean) = {at_mean:?}"))?;
        worst_mean = worst_mean.max(m);
    }
    Ok(format!("100 random 10x5 matrices, max angle {worst_angle:.1e} rad, |transform(mean)| {worst_mean:.1e}"))
}

fn cqt_correctness() -> Outcome {
    let cfg = CqtConfig::default();
    let k_total = cfg.bin_count();
    ensure(k_total == 870, || format!("{k_total} bins"))?;
    let mut worst = 0.0f64;
    for k in 0..k_total {
        let expected = 15.0 * (std::f64::consts::LN_2 * k as f64 / 96.0).exp();
        let rel = (cfg.center_frequency(k) - expected).abs() / expected;
        ensure(rel <= 1e-9, || format!("bin {k}: {} vs {expected}", cfg.center_frequency(k)))?;
        worst = worst.max(rel);
    }
    let target = (96.0 * (440.0f64 / 15.0).log2()).round() as usize;
    let seg = Segment {
        clip_id: "tone".into(),
        start_sample: 0,
        label: None,
        samples: (0..SEGMENT_LEN).map(|n| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / 16_000.0).sin()).collect(),
    };
    let energy = cqt(&seg, &cfg).mean_per_bin();
    let peak = energy.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap();
    ensure(target == 468 && peak == 468, || format!("440 Hz peaks at bin {peak}, oracle says {target}"))?;
    Ok(format!("K={k_total}, center frequency error {worst:.1e}, 440 Hz peak at bin {peak}"))
}

fn voxsource(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_voxsource"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() {
        return Err(format!("voxsource {}: {}\n{}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(stdout)
}

fn field(output: &str, key: &str) -> Result<f64, String> {
    output
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| format!("no {key}= in output"))?
        .trim()
        .parse()
        .map_err(|e| format!("{key}: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn end_to_end_benchmark() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let ds = dir.join("ds");
    let manifest = ds.join("manifest.csv");
    voxsource(&["synth", "--out", s(&ds), "--speakers", "10", "--clips", "6", "--duration", "3", "--seed", "0"])?;
    let mut accuracies = BTreeMap::new();
    for feature in ["mfcc", "cqcc"] {
        let emb = dir.join(format!("{feature}.emb1"));
        voxsource(&["extract", "--manifest", s(&manifest), "--feature", feature, "--pca", "128", "--out", s(&emb)])?;
        let mlp = dir.join(format!("{feature}-mlp.rdm"));
        voxsource(&[
            "train",
            "--manifest",
            s(&manifest),
            "--features",
            s(&emb),
            "--model",
            "mlp",
            "--hidden",
            "100",
            "--lr",
            "0.00005",
            "--batch",
            "32",
            "--out",
            s(&mlp),
        ])?;
        let out = voxsource(&["eval", "--model", s(&mlp), "--features", s(&emb), "--manifest", s(&manifest), "--split", "test"])?;
        accuracies.insert(format!("{feature}-mlp"), field(&out, "accuracy")?);
    }
    let cqcc_emb = dir.join("cqcc.emb1");
    let gmm = dir.join("cqcc-gmm.rdm");
    voxsource(&[
        "train",
        "--manifest",
        s(&manifest),
        "--features",
        s(&cqcc_emb),
        "--model",
        "gmm",
        "--components",
        "4",
        "--out",
        s(&gmm),
    ])?;
    let out =
        voxsource(&["eval", "--model", s(&gmm), "--features", s(&cqcc_emb), "--manifest", s(&manifest), "--split", "test"])?;
    accuracies.insert("cqcc-gmm".into(), field(&out, "accuracy")?);

    let summary = accuracies.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ");
    ensure(accuracies["mfcc-mlp"] >= 0.90 && accuracies["cqcc-mlp"] >= 0.90, || format!("MLP below 0.90: {summary}"))?;
    ensure(accuracies["cqcc-gmm"] >= 0.75, || format!("GMM below 0.75: {summary}"))?;
    Ok(format!("test accuracy {summary}"))
}

fn majority_class() -> Outcome {
    let records: Vec<ManifestRecord> = (0..11_409 + 30_270)
        .map(|i| ManifestRecord {
            key: format!("seg{i}@0"),
            path: format!("seg{i}.wav"),
            label: if i < 11_409 { Label::Natural } else { Label::Emitted },
            split: Split::Test,
            speaker_id: format!("spk{}", i % 50),
            device_id: String::new(),
            source: Source::Asvspoof,
        })
        .collect();
    let features = |_: &str| Some(vec![0.0]);
    let report = evaluate(&ConstantPredictor(Label::Emitted), &records, &features).map_err(|e| e.to_string())?;
    ensure((report.accuracy - 0.7263).abs() <= 1e-4, || format!("accuracy {}", report.accuracy))?;
    Ok(format!("constant emitted on 11409/30270 scores {:.4}", report.accuracy))
}

fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).map_err(|e| e.to_string())?;
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
    }
    Ok(out)
}

fn pipeline_run(dir: &Path, workers: &str) -> Result<(), String> {
    let ds = dir.join("ds");
    let manifest = ds.join("manifest.csv");
    let (mfcc_emb, cqcc_emb) = (dir.join("mfcc.emb1"), dir.join("cqcc.emb1"));
    let fused = format!("{},{}", s(&mfcc_emb), s(&cqcc_emb));
    voxsource(&["synth", "--out", s(&ds), "--speakers", "5", "--clips", "2", "--duration", "2", "--seed", "7"])?;
    voxsource(&[
        "extract",
        "--manifest",
        s(&manifest),
        "--feature",
        "mfcc",
        "--pca",
        "16",
        "--pca-model",
        s(&dir.join("mfcc.pca")),
        "--out",
        s(&mfcc_emb),
        "--workers",
        workers,
    ])?;
    voxsource(&["extract", "--manifest", s(&manifest), "--feature", "cqcc", "--out", s(&cqcc_emb), "--workers", workers])?;
    voxsource(&[
        "train",
        "--manifest",
        s(&manifest),
        "--features",
        &fused,
        "--model",
        "mlp",
        "--hidden",
        "16",
        "--batch",
        "16",
        "--lr",
        "0.001",
        "--max-epochs",
        "15",
        "--seed",
        "3",
        "--out",
        s(&dir.join("mlp.rdm")),
    ])?;
    voxsource(&[
        "train",
        "--manifest",
        s(&manifest),
        "--features",
        s(&mfcc_emb),
        "--model",
        "gmm",
        "--components",
        "2",
        "--seed",
        "3",
        "--out",
        s(&dir.join("gmm.rdm")),
    ])?;
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline_run(a.path(), "1")?;
    pipeline_run(b.path(), "4")?;
    let (ha, hb) = (hash_tree(a.path())?, hash_tree(b.path())?);
    ensure(ha.keys().eq(hb.keys()), || format!("file sets differ: {:?} vs {:?}", ha.keys(), hb.keys()))?;
    for (name, digest) in &ha {
        ensure(hb[name] == *digest, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across runs (1 vs 4 workers)", ha.len()))
}

fn main() {
    let criteria = [
        Criterion { name: "dimension contracts", budget: Duration::from_secs(1), run: dimension_contracts },
        Criterion { name: "segmentation oracle", budget: Duration::from_secs(1), run: segmentation_oracle },
        Criterion { name: "mlp gradient check", budget: Duration::from_secs(30), run: gradient_check },
        Criterion { name: "adam first step", budget: Duration::from_secs(1), run: adam_first_step },
        Criterion { name: "em properties", budget: Duration::from_secs(60), run: em_properties },
        Criterion { name: "pca oracle", budget: Duration::from_secs(5), run: pca_oracle },
        Criterion { name: "cqt correctness", budget: Duration::from_secs(10), run: cqt_correctness },
        Criterion { name: "end-to-end synthetic benchmark", budget: Duration::from_secs(600), run: end_to_end_benchmark },
        Criterion { name: "majority-class sanity", budget: Duration::from_secs(1), run: majority_class },
        Criterion { name: "determinism", budget: Duration::from_secs(600), run: determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {:<32} {detail} ({elapsed:.2?})", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<32} {why} ({elapsed:.2?})", c.name);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
