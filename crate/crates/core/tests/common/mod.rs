#![allow(dead_code)]

use std::path::PathBuf;

use pdchem::fcidump::{parse_fcidump, IntegralSet};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load(name: &str) -> IntegralSet {
    let path = fixture_path(&format!("{name}.fcidump"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_fcidump(&text).unwrap()
}

/// `(id, e_rhf, e_fci)` rows of the reference table.
pub fn references() -> Vec<(String, f64, f64)> {
    let text = std::fs::read_to_string(fixture_path("references.csv")).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

pub fn reference(id: &str) -> (f64, f64) {
    let (_, rhf, fci) = references().into_iter().find(|r| r.0 == id).unwrap();
    (rhf, fci)
}
