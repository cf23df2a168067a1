//! End-to-end runs of the `qrc` binary on a small synthetic dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qrc_bench::report::{RobustnessReport, CLASSICAL_MODEL, CSV_HEADER, HYBRID_MODEL};

const SIZE: u32 = 8;
const CLASSES: u8 = 3;
const PER_CLASS: usize = 8;

/// Class c lights up band c of the image, with a little per-sample texture.
fn write_dataset(dir: &Path) -> (PathBuf, PathBuf) {
    let count = CLASSES as usize * PER_CLASS;
    let mut images = Vec::new();
    for v in [0x803u32, count as u32, SIZE, SIZE] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    let mut labels = Vec::new();
    for v in [0x801u32, count as u32] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    for k in 0..count {
        let class = (k % CLASSES as usize) as u32;
        for r in 0..SIZE {
            for c in 0..SIZE {
                let band = r * CLASSES as u32 / SIZE == class;
                let texture = ((k as u32 * 7 + r * 3 + c * 5) % 11) * 9;
                images.push(if band {
                    160 + texture as u8
                } else {
                    texture as u8
                });
            }
        }
        labels.push(class as u8);
    }
    let (i, l) = (dir.join("images.idx"), dir.join("labels.idx"));
    std::fs::write(&i, images).unwrap();
    std::fs::write(&l, labels).unwrap();
    (i, l)
}

fn config(dir: &Path, extra: &str) -> PathBuf {
    let (i, l) = write_dataset(dir);
    let text = format!(
        "images = {}\nlabels = {}\nper_class = 5\nN = 2,3\ndownsample_size = 4\npatch_width = 2\n\
         epochs = 5\nbatch_size = 4\nepsilons = 0,0.05,0.1\npgd_steps = 5\ndeepfool_steps = 5\n{extra}",
        i.display(),
        l.display()
    );
    let path = dir.join("run.conf");
    std::fs::write(&path, text).unwrap();
    path
}

fn qrc(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc"))
        .args(args)
        .env("QRC_CACHE_DIR", cache)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn staged_run_matches_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let cache = dir.path().join("cache");
    let staged = dir.path().join("staged");
    for stage in ["embed", "train", "attack", "report"] {
        let out = qrc(&[stage, "-c", arg(&cfg), "-r", arg(&staged)], &cache);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let swept = dir.path().join("swept");
    let out = qrc(
        &[
            "sweep",
            "-c",
            arg(&cfg),
            "-r",
            arg(&swept),
            "--dump-adversarial",
        ],
        &cache,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(staged.join("report.csv")).unwrap();
    assert_eq!(
        csv,
        std::fs::read_to_string(swept.join("report.csv")).unwrap()
    );
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    // models × attacks × ε grid × N sweep
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 3 * 2);

    let report =
        RobustnessReport::from_json(&std::fs::read_to_string(swept.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report.config["N"], "2,3");
    assert!(!report.config.contains_key("images"));
    for e in &report.entries {
        assert_eq!(e.attacked_samples, report.metadata.test_samples);
        for c in &e.curves {
            assert_eq!(c.accuracy.len(), 3);
            assert!(c.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
            // ε = 0 leaves inputs untouched
            assert_eq!(
                c.accuracy[0],
                e.clean_accuracy(&c.model).unwrap(),
                "{} {}",
                c.model,
                c.attack
            );
        }
        for d in &e.delta_acc {
            let h = e.curve(HYBRID_MODEL, &d.attack).unwrap();
            let m = e.curve(CLASSICAL_MODEL, &d.attack).unwrap();
            let mean = h.iter().zip(m).map(|(a, b)| a - b).sum::<f64>() / h.len() as f64;
            assert!((mean - d.value).abs() <= 1e-15);
        }
    }
    let adv = swept.join("N2/adversarial");
    for stem in ["qrc_mlp_fgsm", "mlp_pgd", "qrc_mlp_deepfool"] {
        assert!(adv.join(format!("{stem}.qrcadv")).exists());
        assert!(adv.join(format!("{stem}.json")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let run = dir.path().join("run");

    let bad_key = config(dir.path(), "Omgea = 5\n");
    assert_eq!(
        qrc(&["sweep", "-c", arg(&bad_key), "-r", arg(&run)], &cache)
            .status
            .code(),
        Some(2)
    );

    let wrong_digest = config(dir.path(), &format!("images_sha256 = {}\n", "0".repeat(64)));
    let out = qrc(
        &["embed", "-c", arg(&wrong_digest), "-r", arg(&run)],
        &cache,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SHA-256"));

    let cfg = config(dir.path(), "");
    let out = qrc(
        &[
            "train",
            "-c",
            arg(&cfg),
            "-r",
            arg(&dir.path().join("empty")),
        ],
        &cache,
    );
    assert_eq!(out.status.code(), Some(3), "training without embeddings");

    let out = qrc(
        &[
            "sweep",
            "-c",
            arg(&cfg),
            "-r",
            arg(&run),
            "--set",
            "learning_rate=1e300",
        ],
        &cache,
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn config_subcommand_prints_a_reloadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrc(
        &["config", "--set", "N=3", "--set", "Omega=4"],
        &dir.path().join("cache"),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let reparsed = qrc_bench::ExperimentConfig::parse_str(&text, Path::new(".")).unwrap();
    assert_eq!(reparsed.atom_sweep, vec![3]);
    assert!(text.contains(&format!("# hash {}", reparsed.hash())));
}
