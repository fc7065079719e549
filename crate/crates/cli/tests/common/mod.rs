#![allow(dead_code)]

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use baitscore::data::{write_instances, write_truths, Dataset};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_baitscore"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_corpus(dir: &Path, name: &str, ds: &Dataset) -> (PathBuf, PathBuf) {
    let inst = dir.join(format!("{name}_instances.jsonl"));
    let truth = dir.join(format!("{name}_truth.jsonl"));
    write_instances(ds.posts(), File::create(&inst).unwrap()).unwrap();
    if ds.truths().is_some() {
        write_truths(ds, File::create(&truth).unwrap()).unwrap();
    }
    (inst, truth)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Flags for a small, fast network.
pub const SMALL: &[&str] = &[
    "--seq-length", "16", "--vocab-size", "100", "--embed-dim", "16", "--lstm-units", "8", "--dense-units", "8",
    "--fusion-units", "8", "--head-units", "8", "--filters-1", "8", "--filters-2", "8", "--batch-size", "16",
    "--learning-rate", "0.01",
];
