//! Shared fixtures for the criterion benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

use tdg_core::lexicon::{load_lexicon, Lexicon};
use tdg_core::template::{parse_template, MetaTemplate};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn bundled_lexicon() -> Lexicon {
    load_lexicon(&fs::read_to_string(data_dir().join("lexicon.json")).unwrap()).unwrap()
}

pub fn bundled_templates() -> Vec<MetaTemplate> {
    let mut paths: Vec<_> = fs::read_dir(data_dir().join("templates"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".tdg.json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| parse_template(&fs::read_to_string(p).unwrap()).unwrap())
        .collect()
}

/// The worked six-assignment apple program, used as the interpreter workload.
pub const APPLE_PROGRAM: &str = "\
# Initial number of apples Emily has
initial_apples = 15
# Emily buys 3 times more apples
apples_bought = initial_apples * 3
# Total apples after buying more
total_apples = initial_apples + apples_bought
# Emily gives away 5 apples
apples_given_away = 5
# Apples Emily has now
apples_now = total_apples - apples_given_away
result = apples_now
";
