use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn mqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqa")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dataset(name: &str) -> String {
    fixtures().join("datasets").join(name).display().to_string()
}

#[test]
fn run_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let o = mqa(&[
        "run",
        "--task", "mre",
        "--dataset", &dataset("mre.jsonl"),
        "--schema", "mnre_v2",
        "--backend", "content-oracle",
        "--option-seed", "4",
        "--output-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("F1 100.0"));
    for f in ["predictions.jsonl", "report.json", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let report = dir.path().join("again.json");
    let o = mqa(&[
        "eval",
        "--dataset", &dataset("mre.jsonl"),
        "--predictions", out_dir.join("predictions.jsonl").to_str().unwrap(),
        "--output", report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(a["counts"], b["counts"]);
    assert_eq!(a["metrics"], b["metrics"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "task = \"mner\"\ndataset = \"{}\"\nschema = \"twitter17\"\nbackend = \"oracle\"\nmethod = \"mqa_gold_span\"\noutput_dir = \"out\"\ncache_dir = \"cache\"\n",
            dataset("mner.jsonl")
        ),
    )
    .unwrap();
    let o = mqa(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/manifest.json").is_file());
    let o = mqa(&["run", "--config", cfg.to_str().unwrap(), "--backend", "always-nota"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("F1 0.0"), "{}", stdout(&o));
    // a second oracle run is served from the cache
    let o = mqa(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains(" 0 backend calls"), "{}", stdout(&o));
}

#[test]
fn robustness_from_recorded_scores() {
    let o = mqa(&["robustness", "--scores", "62.6,63.1,62.0,62.1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "F1 62.5 ± 0.5");
    let o = mqa(&["robustness", "--scores", "62.6"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn robustness_runs_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = mqa(&[
        "robustness",
        "--task", "mied",
        "--dataset", &dataset("mied.jsonl"),
        "--schema", "m2e2_image",
        "--backend", "content-oracle",
        "--variants", "1,2",
        "--seeds", "0,5",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 6, "{text}");
    assert!(text.ends_with("F1 100.0 ± 0.0\n"));
}

#[test]
fn sample_writes_split_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = mqa(&[
        "sample",
        "--dataset", &dataset("mied_1000.jsonl"),
        "--k", "50",
        "--val", "200",
        "--seed", "3",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let count = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap().lines().count() - 1;
    assert_eq!((count("train.ids"), count("val.ids"), count("test.ids")), (50, 200, 750));

    let o = mqa(&[
        "sample",
        "--dataset", &dataset("mner.jsonl"),
        "--k", "2",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "k below the category count is a data error");
}

#[test]
fn exit_codes() {
    assert_eq!(mqa(&["run", "--task", "mre"]).status.code(), Some(2));
    assert_eq!(mqa(&["run", "--bogus"]).status.code(), Some(2));
    let o = mqa(&[
        "run",
        "--task", "mied",
        "--dataset", &dataset("mied.jsonl"),
        "--schema", "m2e2_image",
        "--backend", "text-only:oracle",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"format\":\"mqa-dataset\",\"version\":1,\"schema\":\"twitter17\",\"task\":\"mner\"}\n\
         {\"id\":\"a\",\"task\":\"mner\",\"sentence\":{\"text\":\"hi\"},\"gold\":{\"entities\":[{\"surface\":\"Oslo\",\"label\":\"location\"}]}}\n",
    )
    .unwrap();
    let o = mqa(&["validate", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("span-substring"));
    assert!(mqa(&["validate", "--dataset", &dataset("mted.jsonl")]).status.success());
}

#[test]
fn rejected_credentials_exit_with_backend_code() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut line = String::new();
        while reader.read_line(&mut line).unwrap() > 2 {
            line.clear();
        }
        let body = "{\"error\":\"bad key\"}";
        write!(
            stream,
            "HTTP/1.1 401 Unauthorized\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
    });
    let dir = tempfile::tempdir().unwrap();
    let remote = dir.path().join("remote.toml");
    std::fs::write(&remote, format!("endpoint = \"http://{addr}/v1/chat/completions\"\nmodel = \"m\"\n")).unwrap();
    let backend = format!("remote:{}", remote.display());
    let o = mqa(&[
        "run",
        "--task", "mre",
        "--dataset", &dataset("mre.jsonl"),
        "--schema", "mnre_v2",
        "--backend", &backend,
        "--concurrency", "1",
        "--output-dir", dir.path().join("out").to_str().unwrap(),
    ]);
    server.join().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn recorded_transcript_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.jsonl");
    let base = |backend: &str, out: &str| -> Vec<String> {
        [
            "run", "--task", "mted", "--dataset", &dataset("mted.jsonl"), "--schema", "m2e2_text",
            "--backend", backend, "--option-seed", "2", "--output-dir", dir.path().join(out).to_str().unwrap(),
        ]
        .map(String::from)
        .to_vec()
    };
    let mut record = base("content-oracle", "live");
    record.extend(["--record-transcript".into(), transcript.display().to_string()]);
    let o = mqa(&record.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replay = base(&format!("transcript:{}", transcript.display()), "replay");
    let o = mqa(&replay.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = |out: &str| -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(dir.path().join(out).join("report.json")).unwrap()).unwrap()
    };
    assert_eq!(report("live")["counts"], report("replay")["counts"]);
    assert_eq!(report("live")["metrics"], report("replay")["metrics"]);
}
