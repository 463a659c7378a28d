use std::path::Path;
use std::process::{Command, Output};

fn mottrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mottrack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const PERFECT: &str = "\
1,1,0,0,10,20,1,-1,-1,-1
1,2,100,0,10,20,1,-1,-1,-1
2,1,1,0,10,20,1,-1,-1,-1
2,2,101,0,10,20,1,-1,-1,-1
";

#[test]
fn eval_perfect_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.txt");
    std::fs::write(&gt, PERFECT).unwrap();
    let out = mottrack(&["eval", "--gt", p(&gt), "--hyp", p(&gt)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "MOTA=1.000"), "{text}");
    assert!(text.lines().any(|l| l == "IDF1=1.000"), "{text}");
    assert!(text.lines().any(|l| l == "HOTA=1.000"), "{text}");

    let table = mottrack(&["eval", "--gt", p(&gt), "--hyp", p(&gt), "--format", "table"]);
    assert!(stdout(&table).starts_with(" MOTA"));
}

#[test]
fn simulate_then_track_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = mottrack(&["simulate", "--scenario", "crossing2", "--seed", "4", "--out-dir", p(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gt.txt", "det.txt", "det.aff"] {
        assert!(sim.join(f).exists(), "{f}");
    }

    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# defaults except the match threshold\nassoc.tau_match = 0.2\n").unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for o in [&a, &b] {
        let out = mottrack(&["track", "--det", p(&sim.join("det.txt")), "--config", p(&cfg), "--out", p(o)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);

    let eval = mottrack(&["eval", "--gt", p(&sim.join("gt.txt")), "--hyp", p(&a)]);
    assert!(eval.status.success());
    assert!(stdout(&eval).contains("IDS="));
}

#[test]
fn invalid_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("det.txt");
    std::fs::write(&det, "1,-1,0,0,10,10,0.9\n2,-1,0,0,10\n").unwrap();
    let out_file = dir.path().join("out.txt");
    let out = mottrack(&["track", "--det", p(&det), "--out", p(&out_file)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("det.txt:2:"), "{err}");
    assert!(!out_file.exists());

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "assoc.nonsense = 3\n").unwrap();
    std::fs::write(&det, "1,-1,0,0,10,10,0.9\n").unwrap();
    let out = mottrack(&["track", "--det", p(&det), "--config", p(&cfg), "--out", p(&out_file)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("assoc.nonsense"));
    assert!(!out_file.exists());

    assert!(!mottrack(&["simulate", "--scenario", "nope", "--out-dir", p(dir.path())]).status.success());
    assert!(!mottrack(&["eval", "--gt", p(&dir.path().join("missing.txt")), "--hyp", p(&det)]).status.success());
    assert!(!mottrack(&["sweep", "--suite", "standard", "--grid", "assoc.alpha=7", "--seeds", "1"]).status.success());
}

fn ids_for(table: &str, preset: &str, scenario: &str) -> f64 {
    let line = table
        .lines()
        .find(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            cols.first() == Some(&preset) && cols.get(1) == Some(&scenario)
        })
        .unwrap_or_else(|| panic!("no row for {preset} / {scenario} in\n{table}"));
    line.split_whitespace().nth(3).unwrap().parse().unwrap()
}

#[test]
fn ablate_crossing_favours_full() {
    let out = mottrack(&["ablate", "--suite", "standard", "--scenario", "crossing2", "--seeds", "20"]);
    assert!(out.status.success());
    let table = stdout(&out);
    for preset in ["full", "no-motion-gate", "appearance-only", "motion-only"] {
        assert!(table.contains(preset), "{table}");
    }
    assert!(ids_for(&table, "full", "crossing2") < ids_for(&table, "appearance-only", "crossing2"));
}

#[test]
fn sweep_output_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sweep.txt");
    let run = |threads: &str, out: Option<&Path>| {
        let mut args = vec!["sweep", "--suite", "standard", "--grid", "assoc.alpha=0.25,0.75", "--seeds", "3", "--threads", threads];
        if let Some(o) = out {
            args.extend(["--out", p(o)]);
        }
        let o = mottrack(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let one = run("1", Some(&file));
    let four = run("4", None);
    assert_eq!(one, four);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), one);
    assert_eq!(one.matches("# assoc.alpha=").count(), 2);
}

#[test]
fn keys_lists_every_config_key() {
    let out = mottrack(&["keys"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for key in ["kf.tau_kf", "assoc.alpha", "buffer.tau_gamma", "cache.k", "queue.T", "eval.iou_threshold"] {
        assert!(text.contains(key), "{key}");
    }
}
