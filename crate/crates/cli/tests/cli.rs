//! Command-level tests driving the installed binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::array;
use otds::LabeledDataset;
use otds_cli::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otds"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const Q_SPEC: &str = "seed = 5\nn_per_class = 15\ncomponent = mean 0 0 cov iso 0.3\ncomponent = mean 2 2 cov iso 0.3\n";
const P_SPEC: &str = "seed = 9\nn_per_class = 15\ncomponent = mean 5 0 cov iso 0.4\ncomponent = mean 7 2 cov iso 0.4\n";

fn gen_pair(dir: &Path) -> (PathBuf, PathBuf) {
    write_spec(dir, "q.spec", Q_SPEC);
    write_spec(dir, "p.spec", P_SPEC);
    let q = dir.join("q.otds");
    let p = dir.join("p.otds");
    assert_ok(&run(
        &["gen", "--spec", "q.spec", "--out", "q.otds"],
        dir,
    ));
    assert_ok(&run(
        &["gen", "--spec", "p.spec", "--out", "p.otds"],
        dir,
    ));
    (q, p)
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "a.spec", Q_SPEC);
    assert_ok(&run(&["gen", "--spec", "a.spec", "--out", "one.otds"], dir.path()));
    assert_ok(&run(&["gen", "--spec", "a.spec", "--out", "two.otds"], dir.path()));
    let one = fs::read(dir.path().join("one.otds")).unwrap();
    let two = fs::read(dir.path().join("two.otds")).unwrap();
    assert_eq!(one, two);
    // different seed, different bytes
    assert_ok(&run(
        &["gen", "--spec", "a.spec", "--out", "three.otds", "--seed", "99"],
        dir.path(),
    ));
    assert_ne!(one, fs::read(dir.path().join("three.otds")).unwrap());
}

#[test]
fn gen_rejects_malformed_spec_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "bad.spec", "seed = 1\ncomponent = broken\n");
    let out = run(&["gen", "--spec", "bad.spec", "--out", "x.otds"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn otdd_of_a_file_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (q, _) = gen_pair(dir.path());
    let out = run(
        &["otdd", q.to_str().unwrap(), q.to_str().unwrap(), "--solver", "exact"],
        dir.path(),
    );
    assert_ok(&out);
    let v = json_of(&out);
    assert!(v["distance_squared"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["solver"], "exact");
}

#[test]
fn otdd_rejects_dimension_mismatch_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (q, _) = gen_pair(dir.path());
    let three_d = LabeledDataset::from_hard_labels(
        "w",
        array![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]],
        &[0, 1],
        2,
        None,
    )
    .unwrap();
    let wide = dir.path().join("wide.otds");
    io::save_dataset(&three_d, &wide).unwrap();
    let out = run(
        &["otdd", q.to_str().unwrap(), wide.to_str().unwrap(), "--solver", "exact"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn otdd_is_invariant_under_class_relabeling() {
    let dir = tempfile::tempdir().unwrap();
    let (q, p) = gen_pair(dir.path());
    let ds = io::load_dataset(&p).unwrap();
    let relabeled =
        otds::datagen::shifted_copy(&ds, &ndarray::Array1::zeros(2).view(), Some(&[1, 0]))
            .unwrap();
    let rp = dir.path().join("p-relabel.otds");
    io::save_dataset(&relabeled, &rp).unwrap();

    let base = json_of(&run(
        &["otdd", q.to_str().unwrap(), p.to_str().unwrap(), "--solver", "exact", "--label-method", "exact"],
        dir.path(),
    ));
    let perm = json_of(&run(
        &["otdd", q.to_str().unwrap(), rp.to_str().unwrap(), "--solver", "exact", "--label-method", "exact"],
        dir.path(),
    ));
    let a = base["distance_squared"].as_f64().unwrap();
    let b = perm["distance_squared"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
}

#[test]
fn map_onto_itself_reproduces_features() {
    let dir = tempfile::tempdir().unwrap();
    let (q, _) = gen_pair(dir.path());
    assert_ok(&run(
        &["map", "--source", "q.otds", "--target", "q.otds", "--out", "self.otds", "--solver", "exact"],
        dir.path(),
    ));
    let orig = io::load_dataset(&q).unwrap();
    let pushed = io::load_dataset(&dir.path().join("self.otds")).unwrap();
    // binary stores f32; compare at f32 precision
    for (a, b) in pushed.features().iter().zip(orig.features().iter()) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn batched_map_with_covering_batch_matches_unbatched() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    assert_ok(&run(
        &["map", "--source", "q.otds", "--target", "p.otds", "--out", "full.otds", "--solver", "exact"],
        dir.path(),
    ));
    assert_ok(&run(
        &["map", "--source", "q.otds", "--target", "p.otds", "--out", "batched.otds", "--batched", "64", "--solver", "exact"],
        dir.path(),
    ));
    let full = io::load_dataset(&dir.path().join("full.otds")).unwrap();
    let batched = io::load_dataset(&dir.path().join("batched.otds")).unwrap();
    for (a, b) in batched.features().iter().zip(full.features().iter()) {
        assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
    }
}

#[test]
fn mapped_output_labels_are_soft_and_stochastic() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    assert_ok(&run(
        &["map", "--source", "q.otds", "--target", "p.otds", "--out", "pushed.otds", "--epsilon", "0.5"],
        dir.path(),
    ));
    let pushed = io::load_dataset(&dir.path().join("pushed.otds")).unwrap();
    pushed.validate().unwrap();
    for row in 0..pushed.len() {
        let s: f64 = pushed.labels().row(row).iter().sum();
        assert!((s - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn interpolate_vertex_weights_reduce_to_the_map() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    write_spec(dir.path(), "r.spec", "seed = 30\nn_per_class = 15\ncomponent = mean -4 1 cov iso 0.3\n");
    assert_ok(&run(&["gen", "--spec", "r.spec", "--out", "r.otds"], dir.path()));
    assert_ok(&run(
        &["interpolate", "--target", "q.otds", "--sources", "p.otds", "r.otds", "--weights", "1,0", "--out", "vertex.otds", "--solver", "exact"],
        dir.path(),
    ));
    assert_ok(&run(
        &["map", "--source", "q.otds", "--target", "p.otds", "--out", "mapped.otds", "--solver", "exact"],
        dir.path(),
    ));
    let vertex = io::load_dataset(&dir.path().join("vertex.otds")).unwrap();
    let mapped = io::load_dataset(&dir.path().join("mapped.otds")).unwrap();
    assert_eq!(vertex.features(), mapped.features());
    // labels of the other block stay zero
    let c_p = mapped.num_classes();
    for row in 0..vertex.len() {
        let tail: f64 = vertex.labels().row(row).iter().skip(c_p).sum();
        assert_eq!(tail, 0.0);
    }
}

#[test]
fn interpolate_mccann_at_zero_embeds_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let (q, _) = gen_pair(dir.path());
    assert_ok(&run(
        &["interpolate", "--target", "q.otds", "--sources", "p.otds", "--mccann", "--t", "0", "--out", "t0.otds", "--solver", "exact"],
        dir.path(),
    ));
    let orig = io::load_dataset(&q).unwrap();
    let t0 = io::load_dataset(&dir.path().join("t0.otds")).unwrap();
    assert_eq!(t0.features(), orig.features());
    // all label mass in the first (target) block
    for row in 0..t0.len() {
        let head: f64 = t0.labels().row(row).iter().take(orig.num_classes()).sum();
        assert!((head - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn interpolate_rejects_off_simplex_weights() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    let out = run(
        &["interpolate", "--target", "q.otds", "--sources", "p.otds", "q.otds", "--weights", "0.9,0.9", "--out", "x.otds"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simplex"));
}

#[test]
fn project_single_source_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    let out = run(
        &["project", "--target", "q.otds", "--sources", "p.otds", "--solver", "exact"],
        dir.path(),
    );
    assert_ok(&out);
    let v = json_of(&out);
    assert_eq!(v["a_hat"].as_array().unwrap().len(), 1);
    assert_eq!(v["a_hat"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn grid_emits_the_full_simplex_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = gen_pair(dir.path());
    write_spec(dir.path(), "r.spec", "seed = 31\nn_per_class = 15\ncomponent = mean -4 1 cov iso 0.3\n");
    assert_ok(&run(&["gen", "--spec", "r.spec", "--out", "r.otds"], dir.path()));
    let project = json_of(&run(
        &["project", "--target", "q.otds", "--sources", "p.otds", "r.otds", "q.otds", "--solver", "exact"],
        dir.path(),
    ));
    assert_ok(&run(
        &["grid", "--target", "q.otds", "--sources", "p.otds", "r.otds", "q.otds", "--resolution", "7", "--out", "grid.csv", "--solver", "exact"],
        dir.path(),
    ));
    let text = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 36);

    // vertex rows carry the per-dataset distances
    let d: Vec<f64> = project["per_dataset_distances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let mut best = f64::INFINITY;
    for row in &rows {
        let cols: Vec<f64> = row.split(',').map(|t| t.parse().unwrap()).collect();
        best = best.min(cols[3]);
        for (i, &di) in d.iter().enumerate() {
            let is_vertex = (cols[i] - 1.0).abs() < 1e-12;
            if is_vertex {
                assert!((cols[3] - di).abs() <= 1e-9, "vertex row {row} vs d={di}");
            }
        }
    }
    // the QP objective does at least as well as the grid minimum
    let objective = project["objective"].as_f64().unwrap();
    assert!(objective <= best + 1e-9);
}

#[test]
fn pseudolabel_votes_with_documented_tie_break() {
    let dir = tempfile::tempdir().unwrap();
    // few-shot on the line: class 1 at -1, class 0 at +1
    let few = LabeledDataset::from_hard_labels(
        "few",
        array![[-1.0], [1.0], [10.0]],
        &[1, 0, 0],
        2,
        None,
    )
    .unwrap();
    io::save_dataset(&few, &dir.path().join("few.otds")).unwrap();
    fs::write(dir.path().join("queries.csv"), "x0\n-1\n0.9\n0\n").unwrap();
    assert_ok(&run(
        &["pseudolabel", "--unlabeled", "queries.csv", "--fewshot", "few.otds", "--k", "2", "--out", "labeled.otds"],
        dir.path(),
    ));
    let labeled = io::load_dataset(&dir.path().join("labeled.otds")).unwrap();
    // query -1: neighbors {-1 (c1), 0.9 (c0)} tie -> class 0 wins the vote tie
    // query 0.9: neighbors {0.9 (c0), -1 (c1)} tie -> class 0
    // query 0: equidistant tie -> still one of each -> class 0
    assert_eq!(labeled.hard_class_ids().unwrap(), vec![0, 0, 0]);

    let out = run(
        &["pseudolabel", "--unlabeled", "queries.csv", "--fewshot", "few.otds", "--k", "9", "--out", "x.otds"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["otdd", "nope.otds", "also-nope.otds"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn svg_side_output_is_emitted() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "a.spec", Q_SPEC);
    assert_ok(&run(
        &["gen", "--spec", "a.spec", "--out", "a.otds", "--svg", "a.svg"],
        dir.path(),
    ));
    let svg = fs::read_to_string(dir.path().join("a.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.matches("<circle").count() >= 30);
}

#[test]
fn csv_output_round_trips_through_commands() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "a.spec", Q_SPEC);
    assert_ok(&run(&["gen", "--spec", "a.spec", "--out", "a.csv"], dir.path()));
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(text.starts_with("x0,x1,y\n"));
    let ds = io::load_dataset(&dir.path().join("a.csv")).unwrap();
    assert_eq!(ds.len(), 30);
    let out = run(
        &["otdd", "a.csv", "a.csv", "--solver", "exact"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(json_of(&out)["distance_squared"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn unconverged_solver_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let (q, p) = gen_pair(dir.path());
    let out = run(
        &[
            "otdd",
            q.to_str().unwrap(),
            p.to_str().unwrap(),
            "--solver",
            "sinkhorn",
            "--epsilon",
            "1e-9",
            "--max-iters",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("converge"));
}

#[test]
fn config_file_drives_the_solver_choice() {
    let dir = tempfile::tempdir().unwrap();
    let (q, _) = gen_pair(dir.path());
    fs::write(dir.path().join("run.cfg"), "solver = exact\nseed = 4\n").unwrap();
    let out = run(
        &[
            "otdd",
            q.to_str().unwrap(),
            q.to_str().unwrap(),
            "--config",
            "run.cfg",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let v = json_of(&out);
    assert_eq!(v["solver"], "exact");
    assert_eq!(v["epsilon"], serde_json::Value::Null);

    // flags override the file
    let out = run(
        &[
            "otdd",
            q.to_str().unwrap(),
            q.to_str().unwrap(),
            "--config",
            "run.cfg",
            "--solver",
            "sinkhorn",
            "--epsilon",
            "0.7",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let v = json_of(&out);
    assert_eq!(v["solver"], "sinkhorn");
    assert_eq!(v["epsilon"].as_f64().unwrap(), 0.7);
}
