//! End-to-end checks of the command-line surface: report shapes, the exit
//! code contract, the fit round trip, and byte-level determinism of seeded
//! commands.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graph-rank"))
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

const COMPLETE_K3: &str = "item_i,item_j,outcome\nA,B,1\nA,C,2\nB,C,1\n";

#[test]
fn fit_reports_merits_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "games.csv", COMPLETE_K3);
    let output = bin().arg("fit").arg(&csv).output().unwrap();
    let json = stdout_json(&output);
    assert_eq!(json["schema"], "graph-rank/1");
    let items = json["items"].as_array().unwrap();
    let merits: Vec<f64> = items.iter().map(|i| i["merit"].as_f64().unwrap()).collect();
    assert!((merits[0] - 1.0).abs() < 1e-9);
    assert!(merits[1].abs() < 1e-9);
    assert!((merits[2] + 1.0).abs() < 1e-9);
    let ranks: Vec<u64> = items.iter().map(|i| i["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, vec![1, 2, 3]);
    assert_eq!(json["diagnostics"]["connected"], true);
}

#[test]
fn fit_round_trip_anchored_refit_preserves_differences() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "games.csv",
        "i,j,y\nA,B,1.3\nB,C,-0.4\nA,C,0.8\nC,D,2.0\nB,D,1.1\n",
    );
    let sum_zero = stdout_json(&bin().arg("fit").arg(&csv).output().unwrap());
    let anchored = stdout_json(
        &bin()
            .arg("fit")
            .arg(&csv)
            .args(["--constraint", "anchor=C"])
            .output()
            .unwrap(),
    );
    let merits = |json: &Value| -> Vec<f64> {
        json["items"]
            .as_array()
            .unwrap()
            .iter()
            .map(|i| i["merit"].as_f64().unwrap())
            .collect()
    };
    let a = merits(&sum_zero);
    let b = merits(&anchored);
    // The anchored item is pinned at zero and every difference survives.
    assert!(b[2].abs() < 1e-12);
    for i in 0..a.len() {
        for j in 0..a.len() {
            assert!(
                ((a[i] - a[j]) - (b[i] - b[j])).abs() < 1e-9,
                "pair ({i},{j})"
            );
        }
    }
}

#[test]
fn fit_with_and_without_covariates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "games.csv",
        "i,j,y,home\nA,B,3,1\nA,B,-1,-1\nB,C,1,1\nB,C,0.5,-1\nA,C,2,1\nA,C,1,-1\n",
    );
    let with = stdout_json(&bin().arg("fit").arg(&csv).output().unwrap());
    assert!(with["covariates"]["beta"].as_array().unwrap().len() == 1);
    assert!(with["covariates"]["identifiable"].as_bool().unwrap());
    assert!(with["covariates"]["angle_phi"].as_f64().unwrap() > 0.0);

    let without = stdout_json(
        &bin()
            .arg("fit")
            .arg(&csv)
            .arg("--no-covariates")
            .output()
            .unwrap(),
    );
    assert!(without.get("covariates").is_none());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 2: parse error (empty file).
    let empty = write(dir.path(), "empty.csv", "");
    let output = bin().arg("fit").arg(&empty).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    // 2: bad outcome with the row number in the message.
    let bad = write(dir.path(), "bad.csv", "i,j,y\nA,B,1\nB,C,zzz\n");
    let output = bin().arg("fit").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 3"));

    // 3: disconnected graph, components listed by label.
    let split = write(dir.path(), "split.csv", "i,j,y\nA,B,1\nC,D,1\n");
    let output = bin().arg("fit").arg(&split).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("{A, B}") && stderr.contains("{C, D}"), "{stderr}");

    // 3: confounded covariate (x_ijk = z_i - z_j).
    let confounded = write(
        dir.path(),
        "conf.csv",
        "i,j,y,x\nA,B,1,1\nA,B,0.5,1\nB,C,1,1\nA,C,1,2\n",
    );
    let output = bin().arg("fit").arg(&confounded).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("x"));

    // 4: nonsense flag value.
    let ok = write(dir.path(), "ok.csv", COMPLETE_K3);
    let output = bin()
        .arg("fit")
        .arg(&ok)
        .args(["--constraint", "banana"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));

    // 4: config validation names the problem.
    let cfg = write(dir.path(), "bad.json", "{\"campaign\":\"consistency\"}");
    let output = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn test_command_reports_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "games.csv",
        "i,j,y\nA,B,1.2\nA,B,0.8\nB,C,0.9\nB,C,1.1\nA,C,2.2\nA,C,1.9\n",
    );
    let json = stdout_json(
        &bin()
            .arg("test")
            .arg(&csv)
            .arg("all_equal")
            .output()
            .unwrap(),
    );
    assert_eq!(json["schema"], "graph-rank/1");
    assert_eq!(json["null"]["kind"], "chi_square");
    assert_eq!(json["null"]["df"], 2);
    let p = json["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let json = stdout_json(
        &bin()
            .arg("test")
            .arg(&csv)
            .arg("all_distinct")
            .args(["--mc-b", "500", "--seed", "5"])
            .output()
            .unwrap(),
    );
    assert_eq!(json["null"]["kind"], "monte_carlo");
    assert_eq!(json["seed"], 5);

    let json = stdout_json(
        &bin()
            .arg("test")
            .arg(&csv)
            .arg("item_not_worst")
            .args(["--item", "A", "--mc-b", "500", "--seed", "5"])
            .output()
            .unwrap(),
    );
    assert!(json["statistic"].as_f64().unwrap() > 0.0);

    let json = stdout_json(
        &bin()
            .arg("test")
            .arg(&csv)
            .arg("contrasts")
            .args(["--subset", "A,B"])
            .output()
            .unwrap(),
    );
    assert_eq!(json["null"]["df"], 1);
}

#[test]
fn bootstrap_zero_noise_collapses_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    // Additively exact outcomes: every resample that stays connected
    // reproduces the point ranking.
    let csv = write(
        dir.path(),
        "games.csv",
        "i,j,y\nA,B,1\nA,B,1\nB,C,1\nB,C,1\nA,C,2\nA,C,2\n",
    );
    let quartiles = dir.path().join("q.csv");
    let run = || {
        bin()
            .arg("bootstrap")
            .arg(&csv)
            .args(["--B", "50", "--seed", "9"])
            .arg("--quartiles-csv")
            .arg(&quartiles)
            .output()
            .unwrap()
    };
    let first = run();
    let json = stdout_json(&first);
    assert_eq!(json["replicates"], 50);
    for item in json["items"].as_array().unwrap() {
        assert_eq!(item["q1"], item["median"]);
        assert_eq!(item["median"], item["q3"]);
    }
    let csv_first = std::fs::read_to_string(&quartiles).unwrap();

    let second = run();
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(csv_first, std::fs::read_to_string(&quartiles).unwrap());
}

#[test]
fn env_seed_is_used_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "games.csv",
        "i,j,y\nA,B,1.2\nA,B,0.8\nB,C,0.9\nB,C,1.1\nA,C,2.2\nA,C,1.9\n",
    );
    let with_env = bin()
        .arg("test")
        .arg(&csv)
        .arg("all_distinct")
        .args(["--mc-b", "200"])
        .env("GRAPH_RANK_SEED", "31")
        .output()
        .unwrap();
    let json = stdout_json(&with_env);
    assert_eq!(json["seed"], 31);

    let with_flag = bin()
        .arg("test")
        .arg(&csv)
        .arg("all_distinct")
        .args(["--mc-b", "200", "--seed", "7"])
        .env("GRAPH_RANK_SEED", "31")
        .output()
        .unwrap();
    let json = stdout_json(&with_flag);
    assert_eq!(json["seed"], 7);
}

#[test]
fn simulate_writes_series_and_echo_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "campaign.json",
        r#"{
  "campaign": "consistency",
  "topology": "complete",
  "items": 4,
  "merits": [-3.0, -1.0, 1.0, 3.0],
  "gammas": [0],
  "m_grid": [5, 20],
  "error": {"kind": "normal", "sigma": 1.0},
  "replicates": 40,
  "seed": 3
}"#,
    );
    let run = |threads: &str, out: &Path| {
        let output = bin()
            .arg("simulate")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        (
            std::fs::read_to_string(out.join("consistency_series.csv")).unwrap(),
            std::fs::read_to_string(out.join("consistency_config.json")).unwrap(),
        )
    };
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let out3 = dir.path().join("run3");
    let (csv1, echo1) = run("1", &out1);
    let (csv2, echo2) = run("4", &out2);
    let (csv3, _) = run("4", &out3);
    assert_eq!(csv1, csv2, "thread count changed simulate output");
    assert_eq!(csv2, csv3, "rerun changed simulate output");
    assert_eq!(echo1, echo2);

    let header = csv1.lines().next().unwrap();
    assert_eq!(header, "x,metric,estimate,replicates");
    let echo: Value = serde_json::from_str(&echo1).unwrap();
    assert_eq!(echo["schema"], "graph-rank/1");
    assert_eq!(echo["seed"], 3);
}

#[test]
fn shipped_configs_parse_and_precision_profile_runs() {
    // The repo ships ready-made campaign configs; the precision profile is
    // small enough to execute here.
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let configs = manifest.join("../../configs");
    for name in [
        "consistency_complete_k8.json",
        "sparse_er.json",
        "precision_topologies.json",
    ] {
        let path = configs.join(name);
        assert!(path.exists(), "missing config {name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let small = write(
        dir.path(),
        "precision.json",
        r#"{
  "campaign": "precision",
  "kinds": ["complete", "cycle", "path", "star", "wheel", "tournament"],
  "k_values": [4, 8, 16],
  "scale": true
}"#,
    );
    let out = dir.path().join("out");
    let output = bin()
        .arg("simulate")
        .arg(&small)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let csv = std::fs::read_to_string(out.join("precision_series.csv")).unwrap();
    // Path graphs are the least precise, complete graphs the most.
    let value = |metric: &str, x: f64| -> f64 {
        csv.lines()
            .skip(1)
            .find_map(|line| {
                let mut parts = line.split(',');
                let lx: f64 = parts.next()?.parse().ok()?;
                let m = parts.next()?;
                let est: f64 = parts.next()?.parse().ok()?;
                (m == metric && lx == x).then_some(est)
            })
            .unwrap_or_else(|| panic!("missing {metric} at {x}"))
    };
    for k in [4.0, 8.0, 16.0] {
        assert!(value("pinv_trace[path]", k) > value("pinv_trace[complete]", k));
    }
}
