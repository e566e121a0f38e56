//! End-to-end CLI workflow: compile grammars, train an LM, generate
//! training data, train a tiny tagger, convert, and evaluate — plus the
//! documented exit codes.

mod common;

use itn::synth::synth_corpus;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_itn")
}

fn grammar_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/grammars"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn itn")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "itn {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(bin())
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn itn");
    child.stdin.as_mut().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let grammars = grammar_dir().display().to_string();

    // 1. Compile and persist the grammar pack.
    let out = run_ok(&["compile-rules", "--pack", &grammars, "--out", &p("pack")]);
    assert!(out.contains("16 categories compiled"), "{out}");
    assert!(dir.path().join("pack/manifest.json").exists());

    // 2. Synthesize a paired corpus and write both sides.
    let pack = itn::rules::load_pack(&grammar_dir()).unwrap();
    let corpus = synth_corpus(&pack, 120, 11);
    std::fs::write(p("lexical.txt"), corpus.lexical.join("\n")).unwrap();
    std::fs::write(p("written.txt"), corpus.written.join("\n")).unwrap();

    // 3. Train the disambiguation LM from the lexical side.
    let out = run_ok(&["train-lm", "--in", &p("lexical.txt"), "--out", &p("lm.txt")]);
    assert!(out.contains("order 4"), "{out}");

    // 4. Generate tagger training data; a fixed seed is byte-reproducible.
    let gen = |out_name: &str| {
        run_ok(&[
            "gen-data",
            "--pack", &p("pack"),
            "--lm", &p("lm.txt"),
            "--in", &p("written.txt"),
            "--out", &p(out_name),
            "--seed", "7",
        ])
    };
    let stats = gen("corpus.tsv");
    assert!(stats.contains("120 sentences"), "{stats}");
    gen("corpus2.tsv");
    assert_eq!(
        std::fs::read(p("corpus.tsv")).unwrap(),
        std::fs::read(p("corpus2.tsv")).unwrap()
    );

    // 5. Train a tiny tagger.
    std::fs::write(
        p("train.cfg"),
        "num_blocks = 1\nmodel_dim = 16\nnum_heads = 2\nffn_dim = 32\n\
         chunk_size = 3\ndropout = 0.0\nmax_position = 64\n\
         epochs = 2\nbatch_size = 8\nseed = 1\n# comment line\n",
    )
    .unwrap();
    let out = run_ok(&[
        "train",
        "--data", &p("corpus.tsv"),
        "--config", &p("train.cfg"),
        "--out", &p("model.itnt"),
    ]);
    assert!(out.contains("epoch   1"), "{out}");
    assert!(out.contains("checkpoint written"), "{out}");

    // 6. Batch conversion: one output line per input line.
    let out = run_stdin(
        &["run", "--model", &p("model.itnt"), "--pack", &p("pack")],
        "it is four thirty now\nhello there\n",
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);

    // 7. Streaming protocol: tokens echo out as chunks complete.
    let out = run_stdin(
        &[
            "run", "--stream",
            "--model", &p("model.itnt"),
            "--pack", &p("pack"),
        ],
        "hello\nthere\nfriend\n\n",
    );
    assert!(out.status.success());
    let streamed: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(streamed.len(), 3);

    // 8. Chunk override requires --force when it differs from training.
    let out = run_stdin(
        &[
            "run",
            "--model", &p("model.itnt"),
            "--pack", &p("pack"),
            "--chunk", "5",
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run_stdin(
        &[
            "run",
            "--model", &p("model.itnt"),
            "--pack", &p("pack"),
            "--chunk", "5",
            "--force",
        ],
        "hello world\n",
    );
    assert!(out.status.success());

    // 9. Oracle evaluation: references are the original written sentences,
    // tags come from gen-data; transduction must invert them exactly.
    let tagged = itn::datagen::read_corpus(Path::new(&p("corpus.tsv"))).unwrap();
    let mut testset = String::new();
    for (sent, written) in tagged.iter().zip(&corpus.written) {
        testset.push_str(&format!("{}\t{}\n", sent.tokens.join(" "), written));
    }
    std::fs::write(p("test.tsv"), testset).unwrap();
    let out = run_ok(&[
        "eval",
        "--pack", &p("pack"),
        "--test", &p("test.tsv"),
        "--oracle",
        "--tags", &p("corpus.tsv"),
    ]);
    assert!(out.contains("F1 1.0000"), "{out}");
    assert!(out.contains("\"ter\":0.0"), "{out}");

    // 10. Baseline evaluation runs and reports JSON.
    let out = run_ok(&[
        "eval",
        "--pack", &p("pack"),
        "--test", &p("test.tsv"),
        "--baseline", "wfst-ngram",
        "--nbest", "4",
    ]);
    assert!(out.contains("\"precision\""), "{out}");
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["run"]); // missing required flags
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let out = run(&[
        "compile-rules",
        "--pack", "/nonexistent-dir",
        "--out", "/tmp/x-itn-out",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // A broken rule file reports file:line:col and still names the file.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.rules"), "root = ").unwrap();
    std::fs::write(dir.path().join("good.rules"), "root = \"a\":\"1\" ;").unwrap();
    let out = run(&[
        "compile-rules",
        "--pack", &dir.path().display().to_string(),
        "--out", &dir.path().join("out").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.rules"), "{err}");
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
