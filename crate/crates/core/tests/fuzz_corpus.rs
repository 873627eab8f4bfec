//! Replays the checked-in fuzz corpus through the parser entry points.

use std::fs;
use std::path::PathBuf;

use default_prior::eb::{fit_marginal, ingest, parse_csv};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty());
    seeds
}

#[test]
fn parse_csv_seeds() {
    let mut ok = 0;
    for (name, bytes) in corpus("parse_csv") {
        match parse_csv(bytes.as_slice()) {
            Ok(records) => {
                ok += 1;
                assert!(records.iter().all(|r| r.line >= 2), "{name}");
            }
            Err(e) => assert!(!e.issues.is_empty(), "{name}"),
        }
    }
    assert!(ok >= 3);
}

#[test]
fn ingest_fit_seeds() {
    let mut fitted = 0;
    for (name, bytes) in corpus("ingest_fit") {
        let Ok(records) = parse_csv(bytes.as_slice()) else { continue };
        let outcome = ingest(&records);
        assert_eq!(outcome.dataset.n_records() + outcome.dropped.len(), records.len(), "{name}");
        if let Ok(fit) = fit_marginal(&outcome.dataset) {
            fitted += 1;
            assert!(fit.phi.is_finite() && fit.sqrt_phi >= 0.0, "{name}");
        }
    }
    assert!(fitted >= 1);
}
