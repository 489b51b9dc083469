use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use palpsim::io;
use palpsim::raster::{ClassImage, BACKGROUND, BODY, LUMP};

const SMALL_CONFIG: &str = "N_traj = 3\npress_depth = 0.04\nN_trial = 2\n";

fn palpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palpsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path, name: &str, bodies: &str) -> PathBuf {
    let cfg = dir.join("small.cfg");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.join(name);
    let o = palpsim(&[
        "generate", "--config", s(&cfg), "--n-bodies", bodies, "--seed", "1", "--quiet", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn hash_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("tree hash: ")).unwrap().to_string()
}

#[test]
fn usage_errors_exit_1_and_data_errors_exit_2() {
    assert_eq!(palpsim(&["generate", "--bogus"]).status.code(), Some(1));
    assert_eq!(palpsim(&["metrics", "--image", "a.pimg"]).status.code(), Some(1));
    assert_eq!(palpsim(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.palp");
    assert_eq!(palpsim(&["inspect", s(&missing)]).status.code(), Some(2));

    let junk = dir.path().join("junk.pimg");
    std::fs::write(&junk, b"PIMGxx").unwrap();
    let o = palpsim(&["metrics", "--image", s(&junk), "--gt", s(&junk)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "L_grid = -1\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(palpsim(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn generate_is_reproducible_and_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = palpsim(&[
            "generate", "--config", s(&cfg), "--n-bodies", "2", "--seed", "1", "--threads", threads, "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (out, hash_line(&o))
    };
    let (a, ha) = run("a", "1");
    let (_, hb) = run("b", "2");
    assert_eq!(ha, hb);

    let o = palpsim(&["inspect", s(&a)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("bodies: 2"), "{text}");
    assert!(text.contains(&ha));

    let traj = a.join("bodies/00000/trial_0/traj_000.palp");
    let o = palpsim(&["inspect", s(&traj)]);
    assert!(stdout(&o).contains("k = 32"), "{}", stdout(&o));

    // refuses to overwrite
    let o = palpsim(&["generate", "--config", s(&cfg), "--n-bodies", "2", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn render_gt_matches_dataset_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "2");
    let out = dir.path().join("gt.pimg");
    let cfg = dir.path().join("small.cfg");
    let o = palpsim(&[
        "render-gt", "--config", s(&cfg), "--seed", "1", "--body", "1", "--trial", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rendered = io::read_class_image(&out).unwrap();
    let stored = io::read_class_image(&data.join("bodies/00001/trial_1/gt.pimg")).unwrap();
    assert_eq!(rendered, stored);
}

#[test]
fn metrics_of_perfect_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let img = ClassImage::new(4, 2, vec![BACKGROUND, BODY, LUMP, BODY, BACKGROUND, BODY, BODY, BODY]).unwrap();
    let path = dir.path().join("x.pimg");
    io::write_class_image(&path, &img).unwrap();
    let o = palpsim(&["metrics", "--image", s(&path), "--gt", s(&path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(&cols[2..6], &["1.0000", "1.0000", "0.0000", "0.0000"], "{text}");
}

#[test]
fn change_score_pair_mode() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, px: [u8; 4]| {
        let p = dir.path().join(name);
        io::write_class_image(&p, &ClassImage::new(2, 2, px.to_vec()).unwrap()).unwrap();
        p
    };
    let a = [write("a0.pimg", [0, 1, 2, 1]), write("a1.pimg", [0, 1, 0, 1])];
    let b = [write("b0.pimg", [0, 2, 2, 1]), write("b1.pimg", [0, 2, 2, 1])];
    let map = dir.path().join("score.pfim");
    let o = palpsim(&[
        "change-score", "--a", s(&a[0]), s(&a[1]), "--b", s(&b[0]), s(&b[1]), "--c", "0.5", "--score-map", s(&map),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("change score: 0.375000"), "{text}");
    assert!(text.contains("decision: changed"));
    let scores = io::read_real_image(&map).unwrap();
    assert_eq!((scores.width, scores.height), (2, 2));

    let o = palpsim(&["change-score", "--a", s(&a[0]), s(&a[1]), "--b", s(&a[0]), s(&a[1])]);
    assert!(stdout(&o).contains("change score: 0.000000"));
    assert!(stdout(&o).contains("decision: unchanged"));
}

#[test]
fn force_map_writes_prediction_tree_consumed_by_metrics_and_change() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "3");
    let pred = dir.path().join("pred");
    let o = palpsim(&["force-map", "--data", s(&data), "--out", s(&pred), "--val-every", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("threshold: "));
    for b in 0..3 {
        for t in 0..2 {
            let trial = pred.join(format!("bodies/{b:05}/trial_{t}"));
            let map = io::read_real_image(&trial.join("forcemap.pfim")).unwrap();
            assert_eq!((map.width, map.height), (128, 128));
            let mask = io::read_class_image(&trial.join("pred_00.pimg")).unwrap();
            assert!(mask.pixels.iter().all(|&p| p == BACKGROUND || p == LUMP));
        }
    }

    let o = palpsim(&["metrics", "--data", s(&data), "--pred", s(&pred), "--split", "test", "--val-every", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("split"));

    // a single member per stack is not enough for the change statistic
    let o = palpsim(&["change-score", "--data", s(&data), "--pred", s(&pred)]);
    assert_eq!(o.status.code(), Some(2));
    let o = palpsim(&["change-score", "--data", s(&data), "--pred", s(&pred), "--lump-size", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("false alarm rate: "));
}
