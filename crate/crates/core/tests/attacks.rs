use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_qrc::attacks::{
    attack_sweep, deepfool, l2_distance, linf_distance, pgd_sweep, AttackFamily, AttackSpec,
    Classifier, EmbeddingModel,
};
use rydberg_qrc::readout::{train, Mlp, TrainConfig};

fn random_mlp(seed: u64, dim: usize) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::new(dim, &[6], 3, 0.0, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn outputs_respect_budget_and_box(
        seed in any::<u64>(),
        x in prop::collection::vec(0.0..=1.0f64, 5),
        eps in prop::collection::vec(0.0..0.3f64, 1..5),
        label in 0usize..3,
    ) {
        let mlp = random_mlp(seed, 5);
        let model = EmbeddingModel { mlp: &mlp, bounds: (0.0, 1.0) };
        let spec = AttackSpec { steps: 20, step_size: 0.02, random_start: true, seed, ..AttackSpec::default() };
        let mut grid = eps.clone();
        grid.push(0.0);
        for family in AttackFamily::ALL {
            let advs = attack_sweep(&model, family, &x, label, &spec, &grid).unwrap();
            for (a, &e) in advs.iter().zip(&grid) {
                let dist = match family {
                    AttackFamily::DeepFool => l2_distance(a, &x),
                    _ => linf_distance(a, &x),
                };
                prop_assert!(dist <= e + 1e-12, "{family:?} ε={e}: {dist}");
                prop_assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
                if e == 0.0 {
                    prop_assert!(a.iter().zip(&x).all(|(p, q)| p.to_bits() == q.to_bits()));
                }
            }
        }
    }
}

/// Three Gaussian blobs in [0, 1]⁴ and a readout trained on them.
fn trained_model() -> (Mlp, Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let centers = [
        [0.25, 0.25, 0.5, 0.5],
        [0.75, 0.3, 0.5, 0.4],
        [0.5, 0.75, 0.4, 0.6],
    ];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..240 {
        let c = k % 3;
        xs.push(
            centers[c]
                .iter()
                .map(|m| (m + rng.gen_range(-0.15..0.15f64)).clamp(0.0, 1.0))
                .collect::<Vec<f64>>(),
        );
        ys.push(c);
    }
    let cfg = TrainConfig {
        hidden: vec![16],
        max_epochs: 150,
        batch_size: 16,
        learning_rate: 1e-2,
        init_seed: 1,
        shuffle_seed: 2,
        ..TrainConfig::default()
    };
    let (mlp, _) = train(&xs[..180], &ys[..180], 3, &cfg).unwrap();
    (mlp, xs[180..].to_vec(), ys[180..].to_vec())
}

fn accuracy_curve(
    model: &dyn Classifier,
    family: AttackFamily,
    xs: &[Vec<f64>],
    ys: &[usize],
    spec: &AttackSpec,
    grid: &[f64],
) -> Vec<f64> {
    let mut correct = vec![0usize; grid.len()];
    for (x, &y) in xs.iter().zip(ys) {
        for (e, adv) in attack_sweep(model, family, x, y, spec, grid)
            .unwrap()
            .iter()
            .enumerate()
        {
            correct[e] += (model.predict(adv).unwrap() == y) as usize;
        }
    }
    correct
        .iter()
        .map(|&c| c as f64 / xs.len() as f64)
        .collect()
}

#[test]
fn accuracy_falls_with_budget_and_pgd_dominates_fgsm() {
    let (mlp, xs, ys) = trained_model();
    let model = EmbeddingModel {
        mlp: &mlp,
        bounds: (0.0, 1.0),
    };
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.02).collect();
    let spec = AttackSpec {
        steps: 50,
        step_size: 0.005,
        ..AttackSpec::default()
    };
    let fgsm = accuracy_curve(&model, AttackFamily::Fgsm, &xs, &ys, &spec, &grid);
    let pgd = accuracy_curve(&model, AttackFamily::Pgd, &xs, &ys, &spec, &grid);
    assert!(fgsm[0] > 0.8, "clean accuracy {}", fgsm[0]);
    for curve in [&fgsm, &pgd] {
        assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{curve:?}");
    }
    // ζ·T = 0.25 covers every budget on the grid
    for (p, f) in pgd.iter().zip(&fgsm) {
        assert!(*p <= f + 0.01, "pgd {pgd:?} fgsm {fgsm:?}");
    }
    assert!(pgd[10] < pgd[0]);
}

#[test]
fn deepfool_needs_less_l2_than_pgd_on_a_linear_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let dim = 6;
    let mut mlp = Mlp::zeros(dim, &[], 2, 0.0).unwrap();
    let params: Vec<f64> = (0..mlp.num_params())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    mlp.set_params(&params).unwrap();
    let model = EmbeddingModel {
        mlp: &mlp,
        bounds: (-10.0, 10.0),
    };
    let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 0.005).collect();
    let spec = AttackSpec {
        steps: 200,
        step_size: 0.005,
        ..AttackSpec::default()
    };
    let mut compared = 0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = model.predict(&x).unwrap();
        let df = deepfool(&model, &x, Some(y), &spec).unwrap();
        assert!(df.flipped);
        let df_norm = df.perturbation.iter().map(|v| v * v).sum::<f64>().sqrt();
        let advs = pgd_sweep(&model, &x, y, &spec, &grid).unwrap();
        if let Some(adv) = advs.iter().find(|a| model.predict(a).unwrap() != y) {
            assert!(
                df_norm <= l2_distance(adv, &x),
                "{df_norm} vs {}",
                l2_distance(adv, &x)
            );
            compared += 1;
        }
    }
    assert!(compared >= 10);
}

#[test]
fn seeded_attacks_are_bitwise_reproducible() {
    let (mlp, xs, ys) = trained_model();
    let model = EmbeddingModel {
        mlp: &mlp,
        bounds: (0.0, 1.0),
    };
    let spec = AttackSpec {
        steps: 30,
        step_size: 0.01,
        random_start: true,
        seed: 99,
        ..AttackSpec::default()
    };
    let grid = [0.0, 0.05, 0.1];
    for family in AttackFamily::ALL {
        let a = attack_sweep(&model, family, &xs[0], ys[0], &spec, &grid).unwrap();
        let b = attack_sweep(&model, family, &xs[0], ys[0], &spec, &grid).unwrap();
        assert_eq!(a, b);
    }
}
