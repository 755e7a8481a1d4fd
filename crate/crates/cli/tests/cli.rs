use std::process::{Command, Output};

use serde_json::Value;

fn seqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqlab"))
        .args(args)
        .env_remove("SEQLAB_BITS")
        .output()
        .expect("spawn seqlab")
}

fn json(args: &[&str]) -> Value {
    let out = seqlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn code(args: &[&str]) -> i32 {
    seqlab(args).status.code().expect("exit code")
}

fn values(doc: &Value) -> Vec<String> {
    doc["result"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_str().unwrap().to_string())
        .collect()
}

fn slope(doc: &Value) -> f64 {
    doc["result"]["estimate"]["slope"].as_f64().unwrap()
}

#[test]
fn orbit_doubling_third() {
    let doc = json(&["orbit", "--spec", "doubling:1/3", "--n", "3"]);
    let rows = doc["result"]["rows"].as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [0, 1, 2]);
    assert_eq!(
        values(&doc),
        ["0.333333333333333", "0.666666666666666", "0.333333333333333"]
    );
}

#[test]
fn orbit_quarter_polynomial() {
    let doc = json(&["orbit", "--spec", "poly:0,1/4", "--n", "4"]);
    assert_eq!(
        values(&doc),
        [
            "0.250000000000000",
            "0.500000000000000",
            "0.750000000000000",
            "0.000000000000000"
        ]
    );
}

#[test]
fn orbit_alphabeta_periodic() {
    let doc = json(&[
        "orbit",
        "--spec",
        "alphabeta:a=1/4;b=1/2;strategy=periodic:AB",
        "--n",
        "4",
    ]);
    let v = values(&doc);
    assert_eq!(v[0], "0.000000000000000");
    assert_eq!(v[1], "0.250000000000000");
    assert_eq!(v[2], "0.750000000000000");
    assert_eq!(v[3], "0.000000000000000");
}

#[test]
fn orbit_digits_and_hex() {
    let doc = json(&["orbit", "--spec", "rotation:1/2", "--n", "1", "--digits", "3", "--hex", "--bits", "200"]);
    let row = &doc["result"]["rows"][0];
    assert_eq!(row["value"], "0.500");
    assert!(row["hex"].as_str().unwrap().starts_with('8'));
}

#[test]
fn boxdim_examples() {
    let d = json(&["boxdim", "--spec", "doubling:1/7", "--n", "10000"]);
    assert!((0.0..=0.01).contains(&slope(&d)));

    let r = json(&[
        "boxdim", "--spec", "rotation:sqrt2", "--n", "262144", "--depths", "4..12",
    ]);
    assert!((slope(&r) - 1.0).abs() <= 0.02);
    assert_eq!(r["result"]["profile"]["entries"][8]["occupied"], 4096);

    let c = json(&["boxdim", "--spec", "poly:2/5", "--n", "500"]);
    assert_eq!(slope(&c), 0.0);
}

#[test]
fn boxdim_saturation_warns() {
    let out = seqlab(&[
        "boxdim", "--spec", "rotation:sqrt2", "--n", "1000", "--depths", "4..12", "--window", "4..12",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("saturated"));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["estimate"]["saturated"], true);
}

#[test]
fn residue_examples() {
    let cover = json(&["residue", "cover", "--m", "9", "--c", "1"]);
    assert_eq!(cover["result"]["coverage"]["visited"], "9");
    assert_eq!(cover["result"]["coverage"]["missing"], Value::Array(vec![]));

    let solve = json(&["residue", "solve", "--m", "9", "--c", "1", "--t", "0"]);
    let r = &solve["result"];
    assert_eq!(r["verified"], true);
    assert_eq!(r["minimal_witness"], "7");
    assert_eq!(r["constructive"]["witness"], "14");
    assert_eq!(r["verification"], "2^14 + 1*14 mod 9 = 0");

    let chain = json(&["residue", "chain", "--m", "9"]);
    let levels = chain["result"]["chain"]["levels"].as_array().unwrap();
    let triples: Vec<[&str; 3]> = levels
        .iter()
        .map(|l| {
            [
                l["m"].as_str().unwrap(),
                l["order"].as_str().unwrap(),
                l["delta"].as_str().unwrap(),
            ]
        })
        .collect();
    assert_eq!(triples, [["9", "6", "3"], ["3", "2", "1"]]);
}

#[test]
fn residue_usage_errors() {
    assert_eq!(code(&["residue", "cover", "--m", "10"]), 1);
    assert_eq!(code(&["residue", "cover", "--m", "9", "--c", "3"]), 1);
    assert_eq!(code(&["residue", "solve", "--m", "9"]), 1);
    assert_eq!(code(&["residue", "solve", "--m", "9", "--t", "9"]), 1);
    assert_eq!(code(&["residue", "chain"]), 1);
    assert_eq!(code(&["residue", "nope", "--m", "9"]), 1);
}

#[test]
fn independence_examples() {
    let run = |y: &str| {
        json(&[
            "independence", "--spec", "rotation:sqrt2", "--spec", y, "--n", "65536", "--depths", "1..12",
        ])
    };
    let cancel = run("rotation:-sqrt2");
    assert_eq!(cancel["result"]["report"]["sum"]["estimate"]["slope"], 0.0);
    assert_eq!(cancel["result"]["report"]["margin"], -1.0);
    assert_eq!(cancel["result"]["report"]["independent"], false);

    for y in ["rotation:sqrt3", "rotation:sqrt2"] {
        let doc = run(y);
        let report = &doc["result"]["report"];
        assert_eq!(report["target"], 1.0);
        assert!(report["margin"].as_f64().unwrap().abs() <= 0.02, "{y}");
        assert_eq!(report["independent"], true);
        assert_eq!(doc["result"]["verdict"], "independent within margin 0.05");
    }
    assert_eq!(code(&["independence", "--spec", "rotation:sqrt2"]), 1);
}

#[test]
fn sweep_examples() {
    let doc = json(&["sweep", "--m", "3..99", "--c", "1"]);
    assert_eq!(doc["result"]["rows"].as_array().unwrap().len(), 49);
    assert_eq!(doc["result"]["failures"], 0);

    let doc = json(&["sweep", "--m", "3..9", "--c", "2"]);
    assert_eq!(doc["result"]["failures"], 0);

    let doc = json(&["sweep", "--m", "9..3"]);
    assert!(doc["result"]["rows"].as_array().unwrap().is_empty());

    let doc = json(&["sweep", "--m", "3..15", "--c", "1,2,m-2"]);
    assert_eq!(doc["result"]["failures"], 0);
}

#[test]
fn precision_budget_refused() {
    assert_eq!(code(&["orbit", "--spec", "doubling:1/3", "--n", "100", "--bits", "100"]), 3);
    let out = Command::new(env!("CARGO_BIN_EXE_seqlab"))
        .args(["orbit", "--spec", "doubling:1/3", "--n", "100"])
        .env("SEQLAB_BITS", "64")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn env_bits_overrides_default_only() {
    let out = Command::new(env!("CARGO_BIN_EXE_seqlab"))
        .args(["orbit", "--spec", "rotation:sqrt2", "--n", "2"])
        .env("SEQLAB_BITS", "400")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["bits"], "400");

    let out = Command::new(env!("CARGO_BIN_EXE_seqlab"))
        .args(["orbit", "--spec", "rotation:sqrt2", "--n", "2", "--bits", "300"])
        .env("SEQLAB_BITS", "400")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["bits"], "300");
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "orbit",
        "--spec",
        "alphabeta:a=sqrt2;b=sqrt3;strategy=random:0.5",
        "--n",
        "50",
        "--seed",
        "11",
    ];
    let a = seqlab(&args);
    let b = seqlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mut other = args;
    other[6] = "12";
    assert_ne!(seqlab(&other).stdout, a.stdout);
}

#[test]
fn output_embeds_config_and_reproduces() {
    let doc = json(&["boxdim", "--spec", "rotation:sqrt3", "--n", "2000", "--depths", "2..10"]);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    let config = doc["config"].as_object().unwrap();
    for key in ["spec", "n", "depths", "window", "bits", "seed", "format"] {
        assert!(config.contains_key(key), "missing {key}");
    }
    // Feed the embedded config back in as a config file.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    let text: String = config
        .iter()
        .map(|(k, v)| format!("{k}={}\n", v.as_str().unwrap()))
        .collect();
    std::fs::write(&path, text).unwrap();
    let again = json(&["boxdim", "--config", path.to_str().unwrap()]);
    assert_eq!(again, doc);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.cfg");
    std::fs::write(&path, "# residue run\nm = 9\nc = 1\nt = 5\n").unwrap();
    let p = path.to_str().unwrap();
    let doc = json(&["residue", "solve", "--config", p]);
    assert_eq!(doc["result"]["constructive"]["target"], "5");
    let doc = json(&["residue", "solve", "--config", p, "--t", "4"]);
    assert_eq!(doc["result"]["constructive"]["target"], "4");
    assert_eq!(code(&["residue", "solve", "--config", "/nonexistent/x.cfg"]), 1);
}

#[test]
fn independence_specs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.cfg");
    std::fs::write(&path, "spec=rotation:sqrt2\nspec=rotation:sqrt3\nn=4096\ndepths=1..10\n").unwrap();
    let doc = json(&["independence", "--config", path.to_str().unwrap()]);
    assert_eq!(doc["config"]["spec.0"], "rotation:sqrt2");
    assert_eq!(doc["config"]["spec.1"], "rotation:sqrt3");
}

#[test]
fn out_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    let out = seqlab(&[
        "residue", "chain", "--m", "21", "--format", "csv", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# seqlab "));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "m,order,delta");
    assert_eq!(body.last().unwrap().split(',').nth(2), Some("1"));
}

#[test]
fn entropy_and_discrepancy_commands() {
    let doc = json(&["entropy", "--spec", "rotation:sqrt2", "--n", "4096", "--depths", "1..8"]);
    let entries = doc["result"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 8);
    for (i, e) in entries.iter().enumerate() {
        let h = e["entropy"].as_f64().unwrap();
        assert!(h <= (i + 1) as f64 + 1e-12);
    }
    let doc = json(&["discrepancy", "--spec", "rotation:sqrt2", "--n", "100000"]);
    assert!(doc["result"]["star_discrepancy"].as_f64().unwrap() < 1e-2);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&["orbit"]), 1);
    assert_eq!(code(&["orbit", "--spec", "spiral:1"]), 1);
    assert_eq!(code(&["boxdim", "--spec", "rotation:sqrt2", "--depths", "9..3"]), 1);
    assert_eq!(code(&["orbit", "--spec", "rotation:sqrt2", "--format", "xml"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn start_index_is_recorded_and_applied() {
    let doc = json(&["orbit", "--spec", "doubling:1/3", "--n", "2"]);
    assert_eq!(doc["config"]["start"], "0");
    let doc = json(&["orbit", "--spec", "doubling:1/3", "--n", "2", "--start", "1"]);
    assert_eq!(doc["config"]["start"], "1");
    assert_eq!(doc["result"]["rows"][0]["n"], 1);
    assert_eq!(values(&doc)[0], "0.666666666666666");
    let doc = json(&["orbit", "--spec", "rotation:1/4", "--n", "1", "--start", "3"]);
    assert_eq!(values(&doc)[0], "0.750000000000000");
}

#[test]
fn independence_keeps_each_default_start() {
    let doc = json(&[
        "independence", "--spec", "doubling:1/3", "--spec", "rotation:sqrt2", "--n", "512", "--depths", "1..8",
    ]);
    assert!(doc["config"].get("start").is_none());
    assert_eq!(doc["result"]["report"]["x"]["profile"]["metadata"]["start"], 0);
    assert_eq!(doc["result"]["report"]["y"]["profile"]["metadata"]["start"], 1);
}
