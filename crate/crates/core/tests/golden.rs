//! Byte-exact regression of stored traces. Run with `HOMONYM_BLESS=1` to
//! rewrite the `.trace` files after an intended behaviour change.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use homonym::scenario::{run_scenario, Scenario};

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    files.sort();
    files
}

#[test]
fn traces_reproduce_byte_exact() {
    let bless = std::env::var("HOMONYM_BLESS").is_ok_and(|v| v == "1");
    let mut mismatches = Vec::new();
    for scn in corpus() {
        let scenario = Scenario::parse(&fs::read_to_string(&scn).unwrap()).unwrap();
        let (_, trace) = run_scenario(&scenario).unwrap();
        let text = trace.to_text();
        let golden = scn.with_extension("trace");
        if bless {
            fs::write(&golden, &text).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&golden)
            .unwrap_or_else(|e| panic!("{}: {e}; run with HOMONYM_BLESS=1", golden.display()));
        if expected != text {
            mismatches.push(golden.display().to_string());
        }
    }
    assert!(mismatches.is_empty(), "traces differ: {mismatches:?}");
}

#[test]
fn corpus_spans_every_timing_model() {
    let files = corpus();
    assert!(files.len() >= 10);
    let models: BTreeSet<&str> = files
        .iter()
        .map(|p| {
            Scenario::parse(&fs::read_to_string(p).unwrap())
                .unwrap()
                .timing
                .name()
        })
        .collect();
    assert_eq!(models.len(), 3);
}
