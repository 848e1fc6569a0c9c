// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::path::Path;
use std::process::{Command, Output};

use tropic_core::export::{read_csv, HEADER};

const EDGES: &str = "url,user_id\n\
    https://a.com/1,u1\nhttps://a.com/2,u1\nhttps://b.com/1,u1\n\
    https://a.com/1,u2\nhttps://a.com/2,u2\nhttps://b.com/1,u2\n\
    https://c.com/1,u3\n";

fn tropic(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tropic"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("TROPIC_ALPHA")
        .env_remove("TROPIC_SEED")
        .env_remove("TROPIC_LABEL_THRESHOLD")
        .output()
        .expect("binary runs")
}

#[test]
fn run_writes_csv_to_file_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("edges.csv"), EDGES).unwrap();
    std::fs::write(dir.path().join("kb.csv"), "domain,score\na.com,80\n").unwrap();

    let out = tropic(&["run", "edges.csv", "-b", "kb.csv", "-o", "out.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(file.starts_with(HEADER));
    assert!(file.contains("\na.com,A,80.00,1.0000,T,"));
    assert_eq!(read_csv(&file).unwrap().len(), 3);

    let out = tropic(&["run", "edges.csv", "--base-knowledge", "kb.csv"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), file);
}

#[test]
fn run_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("edges.csv"), EDGES).unwrap();
    std::fs::write(dir.path().join("bad.csv"), "a.com,150\n").unwrap();

    let out = tropic(&["run", "edges.csv", "-b", "bad.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("150"));

    let out = tropic(&["run", "missing.csv"], dir.path());
    assert!(!out.status.success());

    let out = tropic(&["run", "edges.csv", "--max-edges", "3"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceed"));

    let out = tropic(&["run", "edges.csv", "--alpha", "0"], dir.path());
    assert!(!out.status.success());
}
