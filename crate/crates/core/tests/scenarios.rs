// SPDX-License-Identifier: Apache-2.0

mod common;

use rmtiso_core::harness::{run, EventAction, EventSpec, ProgramRef, RunOptions, Scenario};

const ALL: [&str; 5] = ["isolation_a", "isolation_b", "qos_multicast", "disruption", "empty"];

#[test]
fn fixtures_parse_and_complete() {
    for name in ALL {
        let sc = common::scenario(name);
        let r = run(&sc, RunOptions::default()).unwrap();
        assert!(r.windows.iter().all(|w| w.error.is_none() && w.end_tick.is_some()), "{name}: {:?}", r.windows);
    }
}

#[test]
fn replay_is_byte_identical() {
    let mut sc = common::scenario("qos_multicast");
    sc.ticks = 60;
    let opts = RunOptions { record_outcomes: true, check_reference: false };
    let a = run(&sc, opts).unwrap();
    let b = run(&sc, opts).unwrap();
    assert_eq!(a.stats_jsonl(), b.stats_jsonl());
    assert_eq!(a.trace_jsonl(), b.trace_jsonl());
    assert!(!a.trace_jsonl().is_empty());
}

#[test]
fn rates_add_up() {
    for name in ALL {
        let r = run(&common::scenario(name), RunOptions::default()).unwrap();
        for t in &r.ticks {
            assert_eq!(t.forwarded + t.dropped, t.injected, "{name}: {t:?}");
        }
        for (vid, tot) in &r.totals {
            let per_tick: u64 = r.ticks.iter().filter(|t| t.vid == *vid).map(|t| t.injected).sum();
            assert_eq!(tot.injected, per_tick);
            assert_eq!(tot.drops.values().sum::<u64>(), tot.dropped);
        }
    }
}

#[test]
fn empty_traffic_gives_empty_trace() {
    let r = run(&common::scenario("empty"), RunOptions { record_outcomes: true, ..Default::default() }).unwrap();
    assert!(r.trace_jsonl().is_empty());
    assert!(r.stats_jsonl().is_empty());
}

#[test]
fn load_and_unload_events() {
    let mut sc = common::scenario("disruption");
    sc.ticks = 120;
    sc.reconfig_per_tick = 8;
    let program = ProgramRef { source: None, program: Some(common::program("multicast")) };
    let ev =
        |tick, action, vid, program| EventSpec { tick, action, vid, slot: None, program, link_util: 0, queue_len: 0 };
    sc.events = vec![ev(10, EventAction::Unload, 102, ProgramRef::default()), ev(40, EventAction::Load, 102, program)];
    let r = run(&sc, RunOptions::default()).unwrap();
    let unload = r.windows[0].end_tick.unwrap();
    let load = r.windows[1].end_tick.unwrap();
    for t in r.ticks.iter().filter(|t| t.vid == 102) {
        if t.tick > unload && t.tick < 40 {
            assert_eq!(t.dropped, t.injected, "{t:?}");
        }
        if t.tick > load {
            assert_eq!(t.under_update, 0, "{t:?}");
        }
    }
    // Between unload and load the VID is unknown; afterwards multicast drops
    // only opcode 4 (discard) and forwards the rest.
    let d = &r.totals[&102].drops;
    assert!(d["unknown_module"] > 0 && d["discarded"] > 0, "{d:?}");
    let untouched = r.totals[&101].dropped + r.totals[&103].dropped;
    assert_eq!(untouched, 0);
}

#[test]
fn bad_scenarios_are_reported() {
    assert!(Scenario::from_toml("ticks = 'x'", None).is_err());
    assert!(Scenario::from_toml("ticks = 1\n[[modules]]\nvid = 5\nsource = 'missing.rmt'", None).is_err());
    assert!(Scenario::from_toml("ticks = 1\n[[system.routes]]\nip = '1.1.1.1'\nport = 40", None).is_err());
}
