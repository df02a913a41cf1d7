#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use fsmguard::frontend::{self, FsmAst, SourceText};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn fixture(name: &str) -> SourceText {
    SourceText::from_file(&fixture_path(name)).expect("fixture readable")
}

pub fn parse_fixture(name: &str) -> FsmAst {
    frontend::parse(&fixture(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Designs with no violations under the default rules and no protected state.
pub const CLEAN_BASES: &[&str] = &["vending.v", "traffic.v", "seq_detector.v", "handshake.v"];

pub const ALL_FIXTURES: &[&str] = &[
    "vending.v",
    "vending_deadlock.v",
    "aes_ctrl.v",
    "aes_ctrl_gray.v",
    "pulse_unreachable.v",
    "rsa_ctrl.v",
    "traffic.v",
    "seq_detector.v",
    "handshake.v",
];

pub mod graph_oracle;
pub mod random_fsm;
