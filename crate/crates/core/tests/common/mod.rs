// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::PathBuf;

use rmtiso_core::harness::Scenario;

pub const PROGRAMS: [&str; 8] =
    ["calc", "firewall", "loadbalance", "qos", "sourcerouting", "netcache", "netchain", "multicast"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn program(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("programs").join(format!("{name}.rmt"))).unwrap()
}

pub fn violation(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("violations").join(format!("{name}.rmt"))).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::from_file(&fixtures().join("scenarios").join(format!("{name}.toml"))).unwrap()
}

/// The scenario restricted to one tenant's module and traffic.
pub fn solo(sc: &Scenario, vid: u16) -> Scenario {
    let mut s = sc.clone();
    s.modules.retain(|m| m.vid == vid);
    s.traffic.retain(|t| t.vid == vid);
    s.events.retain(|e| e.vid == vid || e.vid == 0);
    s
}
