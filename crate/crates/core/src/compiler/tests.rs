// SPDX-License-Identifier: Apache-2.0

use std::net::Ipv4Addr;

use proptest::prelude::*;

use super::*;
use crate::config::{Key, KeySlot};
use crate::control::manager::Controller;
use crate::engine::Verdict;
use crate::net::{udp_frame, UdpFlow};
use crate::phv::RawPacket;
use crate::system::{Route, SystemConfig};

macro_rules! fixture {
    ($dir:literal, $name:literal) => {
        include_str!(concat!("../../fixtures/", $dir, "/", $name, ".rmt"))
    };
}

const CLEAN: [(&str, &str); 8] = [
    ("calc", fixture!("programs", "calc")),
    ("firewall", fixture!("programs", "firewall")),
    ("loadbalance", fixture!("programs", "loadbalance")),
    ("qos", fixture!("programs", "qos")),
    ("sourcerouting", fixture!("programs", "sourcerouting")),
    ("netcache", fixture!("programs", "netcache")),
    ("netchain", fixture!("programs", "netchain")),
    ("multicast", fixture!("programs", "multicast")),
];

fn err(src: &str) -> CompileError {
    compile_standalone(src, 10).expect_err("should be rejected")
}

#[test]
fn clean_fixtures_compile() {
    for (name, src) in CLEAN {
        let cm = compile_standalone(src, 10).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cm.name, name);
        assert!(cm.bind);
        // Deterministic output.
        assert_eq!(cm.dump(), compile_standalone(src, 10).unwrap().dump());
    }
}

#[test]
fn violation_exit_codes() {
    let cases = [
        (fixture!("violations", "syntax"), 2),
        (fixture!("violations", "vid_write"), 3),
        (fixture!("violations", "tci_overlap"), 3),
        (fixture!("violations", "stat_write"), 3),
        (fixture!("violations", "recirculate"), 3),
        (fixture!("violations", "parse_actions"), 4),
        (fixture!("violations", "quota_entries"), 4),
        (fixture!("violations", "containers"), 4),
        (fixture!("violations", "dependency_chain"), 5),
        (fixture!("violations", "register_shared"), 5),
    ];
    for (src, code) in cases {
        let e = err(src);
        assert_eq!(e.exit_code(), code, "{e}");
    }
}

#[test]
fn violation_details() {
    match err(fixture!("violations", "vid_write")) {
        CompileError::Static { violations } => {
            assert!(matches!(violations[..], [StaticViolation::VidModification { .. }]))
        }
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "stat_write")) {
        CompileError::Static { violations } => {
            assert!(matches!(&violations[..], [StaticViolation::StatWrite { name, .. }] if name == "queue_len"))
        }
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "parse_actions")) {
        CompileError::Resource { violations } => assert!(violations.iter().any(
            |v| matches!(v, ResourceViolation::Exceeds { resource, used: 11, limit: 9 } if resource == "parser_actions")
        )),
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "quota_entries")) {
        CompileError::Resource { violations } => assert_eq!(
            violations,
            vec![ResourceViolation::Exceeds { resource: "cam_entries[t]".into(), used: 5, limit: 4 }]
        ),
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "containers")) {
        CompileError::Resource { violations } => assert_eq!(
            violations,
            vec![ResourceViolation::Exceeds { resource: "containers_2b".into(), used: 8, limit: 7 }]
        ),
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "dependency_chain")) {
        CompileError::Placement { error: PlacementError::TooManyDependencyLevels { chain, max } } => {
            assert_eq!(chain, ["t1", "t2", "t3", "t4"]);
            assert_eq!(max, 3);
        }
        e => panic!("{e:?}"),
    }
    match err(fixture!("violations", "register_shared")) {
        CompileError::Placement { error: PlacementError::RegisterShared { register, tables } } => {
            assert_eq!((register.as_str(), tables), ("r", vec!["t1".to_string(), "t2".to_string()]));
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn every_static_violation_is_listed() {
    let src = "module m; field op: u16 @ 46; register r[2];
        table t { key op; entry (1) { vid = 1; link_util = 2; recirculate; op = 5000; } entry (2) { op = load r[2]; } }";
    match err(src) {
        CompileError::Static { violations } => assert_eq!(violations.len(), 5, "{violations:?}"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn packing_conflicts() {
    let two_writes = "module m; field a: u16 @ 46; field b: u16 @ 48;
        table t { key a; entry (1) { b = 1; b = 2; } }";
    let read_after_write = "module m; field a: u16 @ 46; field b: u16 @ 48; field c: u16 @ 50;
        table t { key a; entry (1) { b = c; c = 1; } }";
    let two_ports = "module m; field a: u16 @ 46; table t { key a; entry (1) { port 1; discard; } }";
    for src in [two_writes, read_after_write, two_ports] {
        assert!(matches!(err(src), CompileError::Placement { error: PlacementError::ActionConflict { .. } }), "{src}");
    }
}

#[test]
fn independent_tables_share_a_level() {
    let p = plan(parse_dsl(fixture!("programs", "firewall")).unwrap()).unwrap();
    assert_eq!(p.stages.levels.values().copied().collect::<Vec<_>>(), [0, 0]);
    let p = plan(parse_dsl(fixture!("programs", "sourcerouting")).unwrap()).unwrap();
    // `shift` only overwrites what `pop` read; declaration order keeps them apart.
    assert_eq!(p.stages.earliest("shift"), 2);
    assert_eq!(p.used_stages(), [2, 3]);
}

#[test]
fn four_tables_do_not_fit() {
    let src = "module m; field a: u16 @ 46;
        table t1 { key a; entry (1) { port 1; } } table t2 { key a; entry (2) { port 1; } }
        table t3 { key a; entry (3) { port 1; } } table t4 { key a; entry (4) { port 1; } }";
    assert!(matches!(err(src), CompileError::Placement { error: PlacementError::TooManyTables { count: 4, max: 3 } }));
}

#[test]
fn placeholders_never_match() {
    let cm = compile_standalone("module m; field a: u16 @ 46; table t { key a; entry (9) { port 1; } }", 10).unwrap();
    let st = &cm.stages[&2];
    assert_eq!(st.rows.len(), 4);
    let (real, holders): (Vec<&CamRow>, Vec<&CamRow>) = st.rows.iter().partition(|r| !r.placeholder);
    assert_eq!(real.len(), 1);
    let mut keys: Vec<Key> = holders.iter().map(|r| r.cam.key).collect();
    for k in &keys {
        // A lookup key is always masked, so it cannot carry bits outside the mask.
        assert!(!k.within(&st.key_mask));
    }
    keys.dedup();
    assert_eq!(keys.len(), 3);
}

#[test]
fn predicate_lowering() {
    let cm = compile_standalone(fixture!("programs", "qos"), 10).unwrap();
    let police = &cm.stages[&3];
    assert!(police.key_mask.bit(crate::config::PREDICATE_BIT));
    assert!(police.rows.iter().filter(|r| !r.placeholder).all(|r| r.cam.key.bit(crate::config::PREDICATE_BIT)));
    let mut expect = Key::ZERO;
    expect.fill_slot(KeySlot::for_kind(ContainerKind::TwoByte)[0]);
    expect.set_bit(crate::config::PREDICATE_BIT, true);
    assert_eq!(police.key_mask, expect);
}

#[test]
fn reconfig_packets_follow_writes() {
    let cm = compile_standalone(fixture!("programs", "calc"), 10).unwrap();
    let pkts = emit_reconfig_packets(&cm, 7);
    assert_eq!(pkts.len(), cm.writes().len());
    assert!(pkts.iter().all(|p| crate::net::vlan_id(&p.bytes) == Some(crate::config::RECONFIG_VID)));
}

fn calc_packet(vid: u16, op: u16, a: u32, b: u32) -> RawPacket {
    let mut payload = op.to_be_bytes().to_vec();
    payload.extend(a.to_be_bytes());
    payload.extend(b.to_be_bytes());
    payload.extend([0u8; 4]);
    let f = UdpFlow::new(vid, Ipv4Addr::new(10, 0, 0, 9), Ipv4Addr::new(10, 0, 0, 1), 1, 2);
    RawPacket { bytes: udp_frame(&f, &payload), arrival_seq: 0, ingress_port: 0 }
}

#[test]
fn calc_installs_and_computes() {
    let sys = SystemConfig { routes: vec![Route { ip: Ipv4Addr::new(10, 0, 0, 1), port: 3 }], ..Default::default() };
    let mut ctl = Controller::new(1, sys).unwrap();
    let slot = ctl.load_module(fixture!("programs", "calc"), 10).unwrap();
    assert!(ctl.state.diff(&ctl.module(slot).unwrap().compiled.writes()).is_empty());
    let out = ctl.process(calc_packet(10, 2, 7, 9));
    assert_eq!(out.verdict, Verdict::Forwarded { ports: vec![1] });
    let bytes = &out.egress.unwrap().bytes;
    assert_eq!(crate::net::read_be(bytes, 56, 4), 7u32.wrapping_sub(9) as u64);
    // Unknown opcode: the system route alone decides.
    let out = ctl.process(calc_packet(10, 9, 7, 9));
    assert_eq!(out.verdict, Verdict::Forwarded { ports: vec![3] });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn calc_matches_reference(pkts in prop::collection::vec((0u16..6, any::<u32>(), any::<u32>()), 1..40)) {
        let sys = SystemConfig { routes: vec![Route { ip: Ipv4Addr::new(10, 0, 0, 1), port: 3 }], ..Default::default() };
        let mut ctl = Controller::new(1, sys.clone()).unwrap();
        let src = fixture!("programs", "calc");
        ctl.load_module(src, 10).unwrap();
        let prog = parse_dsl(src).unwrap();
        let mut st = RefState::new(&prog);
        for (op, a, b) in pkts {
            let p = calc_packet(10, op, a, b);
            let out = ctl.process(p.clone());
            let r = interpret_reference(&prog, &p, &mut st, &SystemView { config: &sys, vid: 10 });
            match r {
                RefOutcome::Forwarded { ports, bytes } => {
                    prop_assert_eq!(out.verdict, Verdict::Forwarded { ports });
                    prop_assert_eq!(out.egress.unwrap().bytes, bytes);
                }
                RefOutcome::Dropped { reason } => prop_assert_eq!(out.drop_reason(), Some(reason)),
            }
        }
    }
}
