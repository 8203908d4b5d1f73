// SPDX-License-Identifier: Apache-2.0

//! Scenario files and the deterministic tick-driven runner.
//!
//! Each tick: scheduled events start their reconfiguration sessions, every
//! active session injects up to `reconfig_per_tick` packets, each traffic
//! source injects `rate` packets (sources interleaved round-robin), and
//! sessions whose packets have all been counted are completed.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{interpret_reference, parse_dsl, ModuleProgram, RefOutcome, RefState, SystemView};
use crate::control::manager::{ActiveChange, ChangeKind, Controller, ManagerError};
use crate::engine::{PacketOutcome, Verdict};
use crate::net::{self, UdpFlow};
use crate::phv::RawPacket;
use crate::system::SystemConfig;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Parse(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("module vid {vid}: {source}")]
    Manager { vid: u16, source: ManagerError },
}

fn default_seed() -> u64 {
    1
}

fn default_cookie() -> u32 {
    0x00C0_FFEE
}

fn one() -> usize {
    1
}

/// Program text given inline or as a path relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProgramRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub vid: u16,
    #[serde(default)]
    pub slot: Option<u8>,
    #[serde(flatten)]
    pub program: ProgramRef,
}

/// Generator for one header field of synthetic packets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldGen {
    pub offset: usize,
    /// Width in bytes.
    pub width: usize,
    /// Cycled in order if given.
    #[serde(default)]
    pub values: Vec<u64>,
    /// Otherwise drawn uniformly from `min..=max`.
    #[serde(default)]
    pub min: u64,
    #[serde(default)]
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub vid: u16,
    /// Packets per tick.
    pub rate: usize,
    #[serde(default)]
    pub start: u64,
    #[serde(default)]
    pub stop: Option<u64>,
    #[serde(default = "TrafficSpec::default_src")]
    pub src: Ipv4Addr,
    #[serde(default = "TrafficSpec::default_dst")]
    pub dst: Ipv4Addr,
    #[serde(default = "TrafficSpec::default_port")]
    pub sport: u16,
    #[serde(default = "TrafficSpec::default_port")]
    pub dport: u16,
    /// UDP payload as hex.
    #[serde(default)]
    pub payload: String,
    #[serde(default)]
    pub ingress_port: u8,
    #[serde(default)]
    pub fields: Vec<FieldGen>,
}

impl TrafficSpec {
    fn default_src() -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, 100)
    }
    fn default_dst() -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, 1)
    }
    fn default_port() -> u16 {
        5000
    }

    fn active(&self, tick: u64) -> bool {
        tick >= self.start && self.stop.is_none_or(|s| tick < s)
    }

    fn template(&self) -> Result<Vec<u8>, HarnessError> {
        let payload = hex::decode(self.payload.trim()).map_err(|e| HarnessError::Parse(format!("payload: {e}")))?;
        let f = UdpFlow::new(self.vid, self.src, self.dst, self.sport, self.dport);
        Ok(net::udp_frame(&f, &payload))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Load,
    Update,
    Unload,
    Stats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub tick: u64,
    pub action: EventAction,
    #[serde(default)]
    pub vid: u16,
    #[serde(default)]
    pub slot: Option<u8>,
    #[serde(flatten)]
    pub program: ProgramRef,
    #[serde(default)]
    pub link_util: u16,
    #[serde(default)]
    pub queue_len: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cookie")]
    pub cookie: u32,
    pub ticks: u64,
    #[serde(default = "one")]
    pub reconfig_per_tick: usize,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub modules: Vec<ModuleSpec>,
    #[serde(default)]
    pub traffic: Vec<TrafficSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

fn resolve(p: &mut ProgramRef, base: Option<&Path>) -> Result<(), HarnessError> {
    if p.program.is_none() {
        if let Some(src) = &p.source {
            let path = base.map_or_else(|| Path::new(src).to_path_buf(), |b| b.join(src));
            let text = std::fs::read_to_string(&path)
                .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
            p.program = Some(text);
        }
    }
    Ok(())
}

impl Scenario {
    /// Parses TOML; `source` paths are resolved against `base`.
    pub fn from_toml(s: &str, base: Option<&Path>) -> Result<Self, HarnessError> {
        let mut sc: Scenario = toml::from_str(s).map_err(|e| HarnessError::Parse(e.to_string()))?;
        sc.system.validate().map_err(|e| HarnessError::Parse(e.to_string()))?;
        for m in &mut sc.modules {
            resolve(&mut m.program, base)?;
        }
        for e in &mut sc.events {
            resolve(&mut e.program, base)?;
        }
        Ok(sc)
    }

    /// First `source` path whose program text was never loaded.
    pub fn unresolved(&self) -> Option<&str> {
        let refs = self.modules.iter().map(|m| &m.program).chain(self.events.iter().map(|e| &e.program));
        refs.filter(|p| p.program.is_none()).find_map(|p| p.source.as_deref())
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        Scenario::from_toml(&text, path.parent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep every packet outcome (for trace output).
    pub record_outcomes: bool,
    /// Compare every admitted packet with the reference semantics.
    pub check_reference: bool,
}

/// Per-tick counts for one VID's traffic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub vid: u16,
    pub slot: Option<u8>,
    pub injected: u64,
    pub forwarded: u64,
    pub dropped: u64,
    pub under_update: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateWindow {
    pub vid: u16,
    pub slot: u8,
    pub kind: ChangeKind,
    pub start_tick: u64,
    /// Tick in which the session completed, if it did.
    pub end_tick: Option<u64>,
    pub packets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub injected: u64,
    pub forwarded: u64,
    pub dropped: u64,
    pub drops: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub tick: u64,
    pub vid: u16,
    pub seq: u64,
    pub pipeline: PacketOutcome,
    pub reference: RefOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub ticks: Vec<TickRecord>,
    pub windows: Vec<UpdateWindow>,
    pub totals: BTreeMap<u16, Totals>,
    /// `(tick, outcome)` for every data packet, when recorded.
    pub outcomes: Vec<(u64, PacketOutcome)>,
    pub mismatches: Vec<Mismatch>,
    pub reference_checked: u64,
}

impl RunReport {
    /// Stats as JSON lines.
    pub fn stats_jsonl(&self) -> String {
        self.ticks.iter().map(|t| serde_json::to_string(t).unwrap() + "\n").collect()
    }

    /// Packet traces as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        self.outcomes
            .iter()
            .map(|(tick, o)| serde_json::to_string(&serde_json::json!({ "tick": tick, "outcome": o })).unwrap() + "\n")
            .collect()
    }
}

fn gen_packet(spec: &TrafficSpec, template: &[u8], n: u64, rng: &mut ChaCha8Rng) -> RawPacket {
    let mut bytes = template.to_vec();
    for f in &spec.fields {
        let v = if f.values.is_empty() {
            rng.gen_range(f.min..=f.max.max(f.min))
        } else {
            f.values[(n % f.values.len() as u64) as usize]
        };
        let limit = bytes.len();
        net::write_be(&mut bytes, f.offset, f.width, v, limit);
    }
    RawPacket { bytes, arrival_seq: 0, ingress_port: spec.ingress_port }
}

struct RefModel {
    program: ModuleProgram,
    state: RefState,
}

fn ref_model(src: &str) -> Option<RefModel> {
    let program = parse_dsl(src).ok()?;
    Some(RefModel { state: RefState::new(&program), program })
}

fn outcome_matches(p: &PacketOutcome, r: &RefOutcome) -> bool {
    match (&p.verdict, r) {
        (Verdict::Forwarded { ports }, RefOutcome::Forwarded { ports: rp, bytes }) => {
            ports == rp && p.egress.as_ref().is_some_and(|e| &e.bytes == bytes)
        }
        (Verdict::Dropped { reason }, RefOutcome::Dropped { reason: rr }) => reason == rr,
        _ => false,
    }
}

/// Runs a scenario from a fresh pipeline.
pub fn run(sc: &Scenario, opts: RunOptions) -> Result<RunReport, HarnessError> {
    let mut ctl =
        Controller::new(sc.cookie, sc.system.clone()).map_err(|source| HarnessError::Manager { vid: 0, source })?;
    let mut refs: BTreeMap<u16, RefModel> = BTreeMap::new();
    for m in &sc.modules {
        let src = m.program.program.as_deref().unwrap_or("");
        let change =
            ctl.prepare_load(src, m.vid, m.slot).map_err(|source| HarnessError::Manager { vid: m.vid, source })?;
        ctl.apply(change).map_err(|source| HarnessError::Manager { vid: m.vid, source })?;
        if let Some(r) = ref_model(src) {
            refs.insert(m.vid, r);
        }
    }

    let templates = sc.traffic.iter().map(|t| t.template()).collect::<Result<Vec<_>, _>>()?;
    // One stream per source, so a source's packets do not depend on which others run.
    let mut rngs: Vec<ChaCha8Rng> = sc
        .traffic
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = ChaCha8Rng::seed_from_u64(sc.seed);
            let nth = sc.traffic[..i].iter().filter(|o| o.vid == t.vid).count() as u64;
            r.set_stream(u64::from(t.vid) << 16 | nth);
            r
        })
        .collect();
    let mut sent = vec![0u64; sc.traffic.len()];
    let mut report = RunReport::default();
    let mut active: Vec<(usize, ActiveChange, Option<String>)> = Vec::new();

    for tick in 0..sc.ticks {
        for ev in sc.events.iter().filter(|e| e.tick == tick) {
            let src = ev.program.program.as_deref().unwrap_or("");
            let prepared = match ev.action {
                EventAction::Stats => {
                    ctl.set_stats(ev.link_util, ev.queue_len);
                    continue;
                }
                EventAction::Load => ctl.prepare_load(src, ev.vid, ev.slot),
                EventAction::Update => match ctl.slot_of_vid(ev.vid) {
                    Some(slot) => ctl.prepare_update(slot, src),
                    None => Err(ManagerError::VidInUse(ev.vid)),
                },
                EventAction::Unload => match ctl.slot_of_vid(ev.vid) {
                    Some(slot) => ctl.prepare_unload(slot),
                    None => Err(ManagerError::VidInUse(ev.vid)),
                },
            };
            let started = prepared.and_then(|c| ctl.begin(c));
            let (kind, slot, packets, error) = match &started {
                Ok(a) => (a.change.kind, a.slot(), a.change.packets.len(), None),
                Err(e) => (ChangeKind::Load, 0, 0, Some(e.to_string())),
            };
            report.windows.push(UpdateWindow {
                vid: ev.vid,
                slot,
                kind,
                start_tick: tick,
                end_tick: None,
                packets,
                error,
            });
            if let Ok(a) = started {
                let new_src = (ev.action != EventAction::Unload).then(|| src.to_string());
                active.push((report.windows.len() - 1, a, new_src));
            }
        }

        for (_, a, _) in active.iter_mut() {
            a.step(&mut ctl.state, sc.reconfig_per_tick);
        }

        let mut per_vid: BTreeMap<u16, TickRecord> = BTreeMap::new();
        let max_rate = sc.traffic.iter().map(|t| t.rate).max().unwrap_or(0);
        for j in 0..max_rate {
            for (i, spec) in sc.traffic.iter().enumerate() {
                if j >= spec.rate || !spec.active(tick) {
                    continue;
                }
                let pkt = gen_packet(spec, &templates[i], sent[i], &mut rngs[i]);
                sent[i] += 1;
                let out = ctl.process(pkt.clone());
                let rec =
                    per_vid.entry(spec.vid).or_insert_with(|| TickRecord { tick, vid: spec.vid, ..Default::default() });
                let tot = report.totals.entry(spec.vid).or_default();
                rec.injected += 1;
                tot.injected += 1;
                match out.drop_reason() {
                    None => {
                        rec.forwarded += 1;
                        tot.forwarded += 1;
                    }
                    Some(r) => {
                        rec.dropped += 1;
                        tot.dropped += 1;
                        *tot.drops.entry(r.name().into()).or_default() += 1;
                        if r == crate::engine::DropReason::UnderUpdate {
                            rec.under_update += 1;
                        }
                    }
                }
                rec.slot = rec.slot.or(out.slot);
                if opts.check_reference && out.slot.is_some() {
                    if let Some(m) = refs.get_mut(&spec.vid) {
                        let view = SystemView { config: &ctl.system, vid: spec.vid };
                        let r = interpret_reference(&m.program, &pkt, &mut m.state, &view);
                        report.reference_checked += 1;
                        if !outcome_matches(&out, &r) {
                            report.mismatches.push(Mismatch {
                                tick,
                                vid: spec.vid,
                                seq: out.seq,
                                pipeline: out.clone(),
                                reference: r,
                            });
                        }
                    }
                }
                if opts.record_outcomes {
                    report.outcomes.push((tick, out));
                }
            }
        }
        report.ticks.extend(per_vid.into_values());

        let mut still = Vec::new();
        for (w, a, new_src) in active.drain(..) {
            if a.remaining() > 0 {
                still.push((w, a, new_src));
                continue;
            }
            let vid = a.change.vid;
            match ctl.complete(a) {
                Ok(()) => {
                    report.windows[w].end_tick = Some(tick);
                    match new_src.as_deref().and_then(ref_model) {
                        Some(r) => refs.insert(vid, r),
                        None => refs.remove(&vid),
                    };
                }
                Err(e) => report.windows[w].error = Some(e.to_string()),
            }
        }
        active = still;
    }
    Ok(report)
}
