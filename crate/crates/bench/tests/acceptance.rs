//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 1 2 6`.
//!
//! Criteria 1-6 and 8 check the implementation and set the exit status.
//! Criterion 7 measures whether the hybrid model shows the expected accuracy
//! and robustness trends on MNIST. That is an empirical outcome, so its line
//! is printed either way and only counts toward the exit status when
//! `QRC_ACCEPTANCE_STRICT` is set.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use qrc_bench::experiment::{load_dataset, split_dataset};
use qrc_bench::report::{CLASSICAL_MODEL, HYBRID_MODEL};
use qrc_bench::{run_experiment, ExperimentConfig, RunDir};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_qrc::attacks::{
    attack_sweep, deepfool, fgsm, l2_distance, linf_distance, AttackFamily, AttackSpec,
    ClassicalModel, Classifier, EmbeddingModel, GradientPath, HybridModel,
};
use rydberg_qrc::encoding::{EncodingConfig, EncodingPipeline, ImageTensor};
use rydberg_qrc::readout::{cross_entropy, GradientTarget, Mlp};
use rydberg_qrc::reservoir::{
    build_hamiltonian, evolve, reservoir_embed, InitialState, QuantumState, ReservoirConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mnist_config() -> ExperimentConfig {
    ExperimentConfig::load(&workspace().join("configs/mnist.conf"))
        .expect("reference config parses")
}

/// Training images of the balanced MNIST subset.
fn mnist_train(cfg: &ExperimentConfig) -> (Vec<ImageTensor>, Vec<usize>, Vec<ImageTensor>) {
    let data = load_dataset(cfg).expect("bundled MNIST loads");
    let split = split_dataset(cfg, &data).expect("balanced subset");
    (split.train, split.train_labels, split.test)
}

// ---------------------------------------------------------------------------
// dense oracle: H as an explicit real symmetric matrix, e^{-iHt} through its
// eigendecomposition

fn dense_hamiltonian(c: &ReservoirConfig, detunings: &[f64]) -> DMatrix<f64> {
    let n = c.n_atoms;
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let occ = |i: usize| ((b >> i) & 1) as f64;
        let mut e = 0.0;
        for i in 0..n {
            e -= c.local_modulation[i] * detunings[i] * occ(i);
            for j in i + 1..n {
                let r = (j - i) as f64 * c.lattice_spacing;
                e += c.c6_coefficient / r.powi(6) * occ(i) * occ(j);
            }
            h[(b ^ (1 << i), b)] = c.rabi_frequency / 2.0;
        }
        h[(b, b)] = e;
    }
    h
}

fn dense_evolve(h: &DMatrix<f64>, psi0: &[C64], t: f64) -> Vec<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let dim = psi0.len();
    let coeffs: Vec<C64> = (0..dim)
        .map(|k| {
            let overlap: C64 = (0..dim).map(|b| psi0[b] * v[(b, k)]).sum();
            overlap * C64::new(0.0, -eig.eigenvalues[k] * t).exp()
        })
        .collect();
    (0..dim)
        .map(|b| (0..dim).map(|k| coeffs[k] * v[(b, k)]).sum())
        .collect()
}

fn initial_amplitudes(kind: InitialState, n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    match kind {
        InitialState::Plus => vec![C64::new((dim as f64).sqrt().recip(), 0.0); dim],
        InitialState::Ground => {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[0] = C64::new(1.0, 0.0);
            v
        }
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_amp, mut worst_norm) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let mut c = ReservoirConfig::uniform(n);
        c.lattice_spacing = rng.gen_range(4.0..12.0);
        c.rabi_frequency = rng.gen_range(0.0..2.0 * std::f64::consts::TAU * 10.0);
        c.detuning_max = rng.gen_range(0.0..std::f64::consts::TAU * 20.0);
        c.local_modulation = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        c.total_time = rng.gen_range(0.2..5.0);
        c.num_snapshots = rng.gen_range(1..=8);
        c.initial_state = if rng.gen_bool(0.5) {
            InitialState::Plus
        } else {
            InitialState::Ground
        };
        let det: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(c.detuning_min..=c.detuning_max))
            .collect();
        let h = build_hamiltonian(&c, &det).map_err(|e| e.to_string())?;
        let states = evolve(&h, &QuantumState::initial(c.initial_state, n), &c)
            .map_err(|e| e.to_string())?;
        let dense = dense_hamiltonian(&c, &det);
        let psi0 = initial_amplitudes(c.initial_state, n);
        for (m, s) in states.iter().enumerate() {
            let t = (m + 1) as f64 * c.total_time / c.num_snapshots as f64;
            let reference = dense_evolve(&dense, &psi0, t);
            let err = s
                .amplitudes()
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst_amp = worst_amp.max(err);
            worst_norm = worst_norm.max((s.norm_sq().sqrt() - 1.0).abs());
        }
    }
    check(
        worst_amp <= 1e-8 && worst_norm <= 1e-9,
        format!("max amplitude error {worst_amp:.2e}, max norm deviation {worst_norm:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut c = ReservoirConfig::uniform(1);
    c.initial_state = InitialState::Plus;
    let e = reservoir_embed(&c, &[0.0]).map_err(|e| e.to_string())?;
    let single = e.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if e.len() != 6 {
        return Err(format!("expected 6 snapshots, got {}", e.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut drift = 0.0f64;
    for n in 1..=6 {
        for kind in [InitialState::Plus, InitialState::Ground] {
            let mut c = ReservoirConfig::uniform(n);
            c.rabi_frequency = 0.0;
            c.initial_state = kind;
            let det: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(c.detuning_min..=c.detuning_max))
                .collect();
            let e = reservoir_embed(&c, &det).map_err(|e| e.to_string())?;
            let first = e.snapshot(0).to_vec();
            for m in 0..e.num_snapshots() {
                for (a, b) in e.snapshot(m).iter().zip(&first) {
                    drift = drift.max((a - b).abs());
                }
            }
        }
    }
    check(
        single <= 1e-9 && drift <= 1e-9,
        format!("max |<σz>| with Δ=0: {single:.2e}; max drift with Ω=0: {drift:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let cfg = mnist_config();
    let (train, _, _) = mnist_train(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let images: Vec<ImageTensor> = (0..100)
        .map(|_| {
            ImageTensor::new(28, (0..784).map(|_| rng.gen_range(0.0..=1.0)).collect()).unwrap()
        })
        .collect();
    let mut details = Vec::new();
    let mut ok = true;
    for patch_width in [16, 4] {
        let encoding = EncodingConfig {
            patch_width,
            ..EncodingConfig::for_atoms(8)
        };
        let pipeline = EncodingPipeline::fit(&train, encoding, ReservoirConfig::uniform(8))
            .map_err(|e| e.to_string())?;
        let mut bad = 0;
        for img in &images {
            let v = pipeline.embed_image(img).map_err(|e| e.to_string())?;
            if v.len() != 216 || v.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                bad += 1;
            }
        }
        ok &= bad == 0 && pipeline.embedding_dim() == 216;
        details.push(format!(
            "P={patch_width}: D={}, {bad}/100 invalid",
            pipeline.embedding_dim()
        ));
    }
    check(ok, details.join("; "))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .chain(b)
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    diff / scale
}

fn mlp_gradient_errors(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(2..8);
    let hidden: Vec<usize> = (0..rng.gen_range(1..3))
        .map(|_| rng.gen_range(2..9))
        .collect();
    let classes = rng.gen_range(2..6);
    let mut mlp = Mlp::new(input, &hidden, classes, 0.0, &mut rng).unwrap();
    let shifted: Vec<f64> = mlp
        .params()
        .iter()
        .map(|p| p + rng.gen_range(-0.1..0.1))
        .collect();
    mlp.set_params(&shifted).unwrap();
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<usize> = (0..4).map(|_| rng.gen_range(0..classes)).collect();
    let loss = |m: &Mlp| {
        xs.iter()
            .zip(&ys)
            .map(|(x, &y)| cross_entropy(&m.forward(x).unwrap(), y))
            .sum::<f64>()
            / xs.len() as f64
    };
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (_, grads) = mlp.loss_and_grads(&refs, &ys, None).unwrap();
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|l| {
            l.weights
                .iter()
                .chain(l.bias.iter())
                .copied()
                .collect::<Vec<_>>()
        })
        .collect();
    let base = mlp.params();
    let h = 1e-6;
    let numeric: Vec<f64> = (0..base.len())
        .map(|k| {
            let mut m = mlp.clone();
            let mut p = base.clone();
            p[k] += h;
            m.set_params(&p).unwrap();
            let up = loss(&m);
            p[k] -= 2.0 * h;
            m.set_params(&p).unwrap();
            (up - loss(&m)) / (2.0 * h)
        })
        .collect();
    let param_err = rel_err(&analytic, &numeric);

    let x = &xs[0];
    let g = mlp.input_gradient(x, GradientTarget::Loss(ys[0])).unwrap();
    let fd: Vec<f64> = (0..input)
        .map(|i| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += h;
            down[i] -= h;
            (cross_entropy(&mlp.forward(&up).unwrap(), ys[0])
                - cross_entropy(&mlp.forward(&down).unwrap(), ys[0]))
                / (2.0 * h)
        })
        .collect();
    (param_err, rel_err(&g, &fd))
}

/// Stays clear of the detuning clamps: every feature strictly inside the
/// fitted training range.
fn inside_detuning_range(p: &EncodingPipeline, img: &ImageTensor) -> bool {
    p.features(img).unwrap().iter().all(|f| {
        f.iter()
            .zip(p.detuning.feature_min.iter().zip(&p.detuning.feature_max))
            .all(|(v, (lo, hi))| v > lo && v < hi)
    })
}

fn criterion_4() -> Outcome {
    let (mut worst_param, mut worst_input) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let (p, i) = mlp_gradient_errors(100 + seed);
        worst_param = worst_param.max(p);
        worst_input = worst_input.max(i);
    }

    let cfg = mnist_config();
    let (train, _, test) = mnist_train(&cfg);
    let pipeline = EncodingPipeline::fit(
        &train,
        EncodingConfig::for_atoms(8),
        ReservoirConfig::uniform(8),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mlp = Mlp::new(pipeline.embedding_dim(), &[64, 32], 10, 0.0, &mut rng).unwrap();
    let model = HybridModel {
        pipeline: &pipeline,
        mlp: &mlp,
        path: GradientPath::Adjoint,
    };
    let h = 1e-3;
    let mut worst_dir = 0.0f64;
    let mut used = 0;
    for img in &test {
        if used == 5 {
            break;
        }
        let x = img.pixels();
        let d: Vec<f64> = x
            .iter()
            .map(|&v| {
                if v > h && v < 1.0 - h {
                    if rng.gen_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                }
            })
            .collect();
        let shifted = |s: f64| {
            ImageTensor::new(28, x.iter().zip(&d).map(|(a, b)| a + s * b).collect()).unwrap()
        };
        let (up, down) = (shifted(h), shifted(-h));
        if ![img, &up, &down]
            .iter()
            .all(|i| inside_detuning_range(&pipeline, i))
        {
            continue;
        }
        let label = 0;
        let (_, _, grad) = model.loss_gradient(x, label).map_err(|e| e.to_string())?;
        let analytic: f64 = grad.iter().zip(&d).map(|(g, v)| g * v).sum();
        let loss = |i: &ImageTensor| cross_entropy(&model.logits(i.pixels()).unwrap(), label);
        let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
        worst_dir = worst_dir.max((analytic - numeric).abs() / numeric.abs().max(1e-12));
        used += 1;
    }
    check(
        worst_param < 1e-5 && worst_input < 1e-5 && worst_dir < 0.1 && used == 5,
        format!(
            "MLP parameter rel. error {worst_param:.2e}, input {worst_input:.2e}; \
             pipeline directional rel. error {worst_dir:.2e} on {used} images"
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = mnist_config();
    let (train, _, test) = mnist_train(&cfg);
    let pipeline = EncodingPipeline::fit(
        &train,
        EncodingConfig::for_atoms(4),
        ReservoirConfig::uniform(4),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hybrid_mlp = Mlp::new(pipeline.embedding_dim(), &[64, 32], 10, 0.0, &mut rng).unwrap();
    let classical_mlp = Mlp::new(pipeline.feature_dim(), &[64, 32], 10, 0.0, &mut rng).unwrap();
    let hybrid = HybridModel {
        pipeline: &pipeline,
        mlp: &hybrid_mlp,
        path: GradientPath::Adjoint,
    };
    let classical = ClassicalModel {
        pipeline: &pipeline,
        mlp: &classical_mlp,
    };
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.01).collect();
    let spec = AttackSpec {
        steps: 20,
        ..AttackSpec::default()
    };
    let models: [&dyn Classifier; 2] = [&hybrid, &classical];
    let mut details = Vec::new();
    let mut ok = true;
    for family in AttackFamily::ALL {
        let (mut count, mut worst, mut identity) = (0, f64::NEG_INFINITY, true);
        // 25 images × 2 models × 10 budgets
        for img in test.iter().take(25) {
            let x = img.pixels();
            for model in models {
                let label = model.predict(x).map_err(|e| e.to_string())?;
                let advs = attack_sweep(model, family, x, label, &spec, &grid)
                    .map_err(|e| e.to_string())?;
                for (a, e) in advs.iter().zip(&grid) {
                    let dist = match family {
                        AttackFamily::DeepFool => l2_distance(a, x),
                        _ => linf_distance(a, x),
                    };
                    worst = worst.max(dist - e);
                    count += 1;
                }
                let zero = attack_sweep(model, family, x, label, &spec, &[0.0])
                    .map_err(|e| e.to_string())?;
                identity &= zero[0]
                    .iter()
                    .zip(x)
                    .all(|(p, q)| p.to_bits() == q.to_bits());
            }
        }
        ok &= count >= 500 && worst <= 1e-12 && identity;
        details.push(format!(
            "{}: {count} examples, max(norm − ε) {worst:.1e}, ε=0 identity {identity}",
            family.name()
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dim = 12;
    let mut worst_fgsm = 0.0f64;
    let (mut worst_dist, mut worst_plane, mut one_step) = (0.0f64, 0.0f64, true);
    for trial in 0..50 {
        let mut mlp = Mlp::zeros(dim, &[], 2, 0.0).unwrap();
        let params: Vec<f64> = (0..mlp.num_params())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        mlp.set_params(&params).unwrap();
        let w0: Vec<f64> = (0..dim).map(|j| mlp.layers[0].weights[(0, j)]).collect();
        let w1: Vec<f64> = (0..dim).map(|j| mlp.layers[0].weights[(1, j)]).collect();
        let (b0, b1) = (mlp.layers[0].bias[0], mlp.layers[0].bias[1]);
        let model = EmbeddingModel {
            mlp: &mlp,
            bounds: (0.0, 1.0),
        };
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..0.8)).collect();
        let y = trial % 2;

        // logistic regression: ∂L/∂x = (σ(f) − y)(w₁ − w₀) with f = z₁ − z₀, so
        // the step is −ε·sign(w₁ − w₀) for y = 1 and +ε·sign(w₁ − w₀) for y = 0
        let eps = 0.05;
        let adv = fgsm(&model, &x, y, eps).map_err(|e| e.to_string())?;
        let direction = if y == 1 { -1.0 } else { 1.0 };
        for j in 0..dim {
            let s = (w1[j] - w0[j]).signum() * direction;
            let expected = (x[j] + eps * s).clamp(0.0, 1.0);
            worst_fgsm = worst_fgsm.max((adv[j] - expected).abs());
        }

        // binary linear classifier f(x) = (w₁ − w₀)·x + (b₁ − b₀)
        let w: Vec<f64> = w1.iter().zip(&w0).map(|(a, b)| a - b).collect();
        let f = |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + b1 - b0;
        let wide = EmbeddingModel {
            mlp: &mlp,
            bounds: (-1e6, 1e6),
        };
        let out = deepfool(&wide, &x, None, &AttackSpec::default()).map_err(|e| e.to_string())?;
        one_step &= out.iterations == 1 && out.flipped;
        let r = &out.raw_perturbation;
        let expected = f(&x).abs() / w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_dist = worst_dist.max((dist - expected).abs());
        let on_plane: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + b).collect();
        worst_plane = worst_plane.max(f(&on_plane).abs());
    }
    check(
        worst_fgsm <= 1e-15 && one_step && worst_dist <= 1e-10 && worst_plane <= 1e-10,
        format!(
            "FGSM deviation {worst_fgsm:.1e}; DeepFool one step {one_step}, \
             distance error {worst_dist:.1e}, |f| on hyperplane {worst_plane:.1e}"
        ),
    )
}

fn cache_root(name: &str) -> PathBuf {
    std::env::var_os("QRC_ACCEPTANCE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qrc-acceptance"))
        .join(name)
}

fn criterion_7() -> Outcome {
    let cfg = mnist_config();
    let run = RunDir::new(cache_root("mnist"));
    let report = run_experiment(&cfg, &run, false).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut hybrid_clean = Vec::new();
    for e in &report.entries {
        let (h, m) = (
            e.clean_accuracy(HYBRID_MODEL).unwrap(),
            e.clean_accuracy(CLASSICAL_MODEL).unwrap(),
        );
        hybrid_clean.push(h);
        let deltas: Vec<String> = e
            .delta_acc
            .iter()
            .map(|d| format!("{} {:+.4}", d.attack, d.value))
            .collect();
        lines.push(format!(
            "N={}: qrc+mlp {h:.4}, mlp {m:.4}, ΔAcc {}",
            e.n_atoms,
            deltas.join(", ")
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    let n8 = report
        .entries
        .iter()
        .find(|e| e.n_atoms == 8)
        .ok_or("N=8 missing from the sweep")?;
    let mlp8 = n8.clean_accuracy(CLASSICAL_MODEL).unwrap();
    let qrc8 = n8.clean_accuracy(HYBRID_MODEL).unwrap();
    let a = mlp8 >= 0.80;
    let b = (qrc8 - mlp8).abs() <= 0.05;
    let c = AttackFamily::ALL
        .iter()
        .all(|f| n8.delta(f.name()).is_some_and(|d| d > 0.0));
    let d = hybrid_clean.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    check(
        a && b && c && d,
        format!(
            "(a) {} mlp clean {mlp8:.4} ≥ 0.80; (b) {} |qrc − mlp| = {:.4} ≤ 0.05; \
             (c) {} ΔAcc > 0 for all attacks at N=8; (d) {} clean accuracy {:?} non-decreasing within 0.02",
            verdict(a),
            verdict(b),
            (qrc8 - mlp8).abs(),
            verdict(c),
            verdict(d),
            hybrid_clean.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn sweep_csv(config: &Path, run: &Path, cache: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qrc"))
        .args(["sweep", "-c"])
        .arg(config)
        .arg("-r")
        .arg(run)
        .env("QRC_CACHE_DIR", cache)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    std::fs::read(run.join("report.csv")).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mnist = workspace().join("data/mnist");
    let config = dir.path().join("small.conf");
    std::fs::write(
        &config,
        format!(
            "images = {}\nlabels = {}\nper_class = 20\nseed = 7\nN = 2,4\nepochs = 30\n\
             epsilons = 0,0.02,0.05,0.1\npgd_steps = 20\ndeepfool_steps = 20\nattack_limit = 30\n\
             pgd_random_start = true\n",
            mnist.join("images-idx3-ubyte.gz").display(),
            mnist.join("labels-idx1-ubyte.gz").display()
        ),
    )
    .map_err(|e| e.to_string())?;
    let first = sweep_csv(&config, &dir.path().join("a"), &dir.path().join("cache-a"))?;
    let second = sweep_csv(&config, &dir.path().join("b"), &dir.path().join("cache-b"))?;
    let rows = first.iter().filter(|&&b| b == b'\n').count() - 1;
    check(
        first == second && rows == 2 * 3 * 4 * 2,
        format!(
            "{rows} rows, {} bytes, identical: {}",
            first.len(),
            first == second
        ),
    )
}

const EMPIRICAL: u32 = 7;

fn main() {
    let strict = std::env::var_os("QRC_ACCEPTANCE_STRICT").is_some_and(|v| !v.is_empty());
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (
            1,
            "evolution matches dense matrix-exponential oracle",
            criterion_1,
        ),
        (
            2,
            "single-atom and frozen-drive analytic checks",
            criterion_2,
        ),
        (
            3,
            "embedding shape 216 with entries in [-1, 1]",
            criterion_3,
        ),
        (
            4,
            "gradient fidelity against finite differences",
            criterion_4,
        ),
        (5, "attack budget semantics", criterion_5),
        (6, "linear-model closed forms", criterion_6),
        (7, "MNIST desk-scale qualitative claims", criterion_7),
        (8, "byte-identical sweep reports", criterion_8),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (mut failed, mut passed, mut ran) = (0, 0, 0);
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        ran += 1;
        match outcome {
            Ok(detail) => {
                passed += 1;
                println!("PASS criterion {id}: {name} ({secs:.1}s) {detail}");
            }
            Err(detail) => {
                if id != EMPIRICAL || strict {
                    failed += 1;
                }
                println!("FAIL criterion {id}: {name} ({secs:.1}s) {detail}");
            }
        }
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    if failed > 0 {
        std::process::exit(1);
    }
}
