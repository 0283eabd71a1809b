use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lagcd_core::baselines::{ScoreKind, ScoreTensor};
use lagcd_core::corpus::Corpus;
use serde_json::Value;
use tempfile::TempDir;

fn lagcd<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_lagcd")).args(args).output().expect("spawn lagcd")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn assert_schema(command: &str, value: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{command}.schema.json"));
    let schema: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("valid schema");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{command}: {errors:?}");
}

fn subdir(root: &TempDir, name: &str) -> PathBuf {
    let p = root.path().join(name);
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn generate(dir: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["--json", "generate", "--count", "8", "--steps", "300"];
    args.extend_from_slice(extra);
    let mut cmd: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    cmd.push(dir.into());
    json_of(&lagcd(cmd))
}

#[test]
fn every_command_matches_its_schema() {
    let root = TempDir::new().unwrap();
    let corpus = subdir(&root, "corpus");
    let scores = subdir(&root, "scores");
    let g = generate(&corpus, &["--seed", "1"]);
    assert_schema("generate", &g);
    assert_eq!(g["count"], 8);

    let var_report = root.path().join("var.json");
    let b = json_of(&lagcd([
        "--json".as_ref(),
        "baseline".as_ref(),
        corpus.as_os_str(),
        "--method".as_ref(),
        "var".as_ref(),
        "--out".as_ref(),
        scores.as_os_str(),
        "--report".as_ref(),
        var_report.as_os_str(),
    ]));
    assert_schema("baseline", &b);

    let corr_report = root.path().join("corr.json");
    let c = json_of(&lagcd([
        "--json".as_ref(),
        "--seed".as_ref(),
        "4".as_ref(),
        "baseline".as_ref(),
        corpus.as_os_str(),
        "--method".as_ref(),
        "corr".as_ref(),
        "--bootstrap".as_ref(),
        "5".as_ref(),
        "--report".as_ref(),
        corr_report.as_os_str(),
    ]));
    assert_schema("baseline", &c);
    assert_eq!(c["report"]["method"], "corr+bootstrap");

    let e = json_of(&lagcd([
        "--json".as_ref(),
        "eval".as_ref(),
        corpus.as_os_str(),
        "--scores".as_ref(),
        scores.as_os_str(),
    ]));
    assert_schema("eval", &e);
    // Re-evaluating stored scores reproduces the baseline's numbers.
    assert_eq!(e["report"]["per_dataset_auc"], b["report"]["per_dataset_auc"]);

    let model = root.path().join("toy.tcm");
    let t = json_of(&lagcd([
        "--json".as_ref(),
        "--seed".as_ref(),
        "2".as_ref(),
        "train".as_ref(),
        corpus.as_os_str(),
        "--model".as_ref(),
        model.as_os_str(),
        "--epochs".as_ref(),
        "2".as_ref(),
        "--hidden".as_ref(),
        "4".as_ref(),
        "--v-max".as_ref(),
        "5".as_ref(),
    ]));
    assert_schema("train", &t);
    assert_eq!(t["history"]["epochs"].as_array().unwrap().len(), 2);

    let p = json_of(&lagcd([
        "--json".as_ref(),
        "--seed".as_ref(),
        "3".as_ref(),
        "predict".as_ref(),
        corpus.as_os_str(),
        "--model".as_ref(),
        model.as_os_str(),
    ]));
    assert_schema("predict", &p);

    let s = json_of(&lagcd(["--json".as_ref(), "stats".as_ref(), var_report.as_os_str(), corr_report.as_os_str()]));
    assert_schema("stats", &s);
    assert_eq!(s["comparisons"], 1);

    let params = json_of(&lagcd(["--json", "params"]));
    assert_schema("params", &params);
}

#[test]
fn generation_is_reproducible() {
    let root = TempDir::new().unwrap();
    let a = subdir(&root, "a");
    let b = subdir(&root, "b");
    let c = subdir(&root, "c");
    let d = subdir(&root, "d");
    let ha = generate(&a, &["--seed", "9", "--jobs", "1"])["content_hash"].clone();
    let hb = generate(&b, &["--seed", "9", "--jobs", "8"])["content_hash"].clone();
    let hc = generate(&c, &["--seed", "10"])["content_hash"].clone();
    assert_eq!(ha, hb);
    assert_ne!(ha, hc);
    assert_eq!(files(&a), files(&b));
    // A config file supplies the seed; flags still override other settings.
    let cfg = root.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 9, "num_steps": 100}"#).unwrap();
    let hd = generate(&d, &["--config", cfg.to_str().unwrap()])["content_hash"].clone();
    assert_eq!(ha, hd);
}

#[test]
fn empty_corpus_is_not_an_error() {
    let root = TempDir::new().unwrap();
    let dir = subdir(&root, "empty");
    let out = lagcd([
        "--json".as_ref(),
        "--seed".as_ref(),
        "1".as_ref(),
        "generate".as_ref(),
        "--count".as_ref(),
        "0".as_ref(),
        dir.as_os_str(),
    ]);
    let v = json_of(&out);
    assert_eq!(v["count"], 0);
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn perfect_scores_evaluate_to_one() {
    let root = TempDir::new().unwrap();
    let corpus = subdir(&root, "corpus");
    let scores = subdir(&root, "scores");
    generate(&corpus, &["--seed", "5"]);
    for inst in Corpus::open(&corpus).unwrap().load_all().unwrap() {
        let truth = inst.graph.tensor().mapv(f64::from);
        let bytes = ScoreTensor::new(truth, ScoreKind::Probability).unwrap().encode(&inst.id).unwrap();
        std::fs::write(scores.join(format!("{}.tcs", inst.id)), bytes).unwrap();
    }
    let v = json_of(&lagcd([
        "--json".as_ref(),
        "eval".as_ref(),
        corpus.as_os_str(),
        "--scores".as_ref(),
        scores.as_os_str(),
    ]));
    assert_eq!(v["report"]["mean"], 1.0);
    assert!(v["report"]["per_dataset_auc"].as_array().unwrap().iter().all(|d| d["auc"] == 1.0));
}

#[test]
fn params_prints_the_head_term() {
    let out = lagcd(["params"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1,921,875"), "{text}");
    assert!(text.contains("k = 3"));
    let nominal = String::from_utf8(lagcd(["params", "--nominal", "24000000"]).stdout).unwrap();
    assert!(nominal.contains("note:") && nominal.lines().count() > text.lines().count());
}

#[test]
fn exit_codes_follow_error_class() {
    let root = TempDir::new().unwrap();
    let missing = root.path().join("nope");
    let code = |out: Output| out.status.code().unwrap();
    assert_eq!(code(lagcd(["--seed".as_ref(), "1".as_ref(), "generate".as_ref(), missing.as_os_str()])), 3);
    assert_eq!(code(lagcd(["baseline".as_ref(), missing.as_os_str(), "--method".as_ref(), "var".as_ref()])), 3);

    let corpus = subdir(&root, "corpus");
    assert_eq!(code(lagcd(["generate".as_ref(), corpus.as_os_str()])), 2, "missing seed");
    assert_eq!(code(lagcd(["baseline".as_ref(), corpus.as_os_str(), "--method".as_ref(), "lasso".as_ref()])), 2);
    assert_eq!(code(lagcd(["baseline".as_ref(), corpus.as_os_str()])), 2, "missing method");
    assert_eq!(code(lagcd(["params", "--heads", "3"])), 2);

    generate(&corpus, &["--seed", "1"]);
    let report = root.path().join("r.json");
    json_of(&lagcd([
        "--json".as_ref(),
        "baseline".as_ref(),
        corpus.as_os_str(),
        "--method".as_ref(),
        "var".as_ref(),
        "--report".as_ref(),
        report.as_os_str(),
    ]));
    let out = lagcd(["stats".as_ref(), report.as_os_str(), report.as_os_str()]);
    assert_eq!(code(out), 4, "identical reports");

    let junk = root.path().join("junk.json");
    std::fs::write(&junk, "not json").unwrap();
    assert_eq!(code(lagcd(["stats".as_ref(), junk.as_os_str(), report.as_os_str()])), 3);
}
