// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::check::{available_containers, is_pinned, ResourceViolation};
use super::place::PlacementError;
use super::{CompileError, Placement, Plan, FIRST_USER_STAGE, LAST_USER_STAGE};
use crate::config::{
    operand, AluAction, AluOpcode, CamEntry, ConfigEntry, ConfigWrite, Key, KeyExtractorEntry, KeyOperand, KeySlot,
    PageTableEntry, ParseAction, ParserEntry, ReconfigPacket, RegistryEntry, Resource, ResourceType, TableGeometry,
    VliwEntry, IMM_MAX, KEY_BITS, PARSER_ACTIONS, PREDICATE_BIT,
};
use crate::phv::{ContainerKind, ContainerRef, RawPacket, METADATA_INDEX};
use crate::system;

/// One CAM row and the VLIW row of the same index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamRow {
    pub row: u8,
    pub cam: CamEntry,
    pub vliw: VliwEntry,
    /// Reserved row holding an unreachable key.
    pub placeholder: bool,
}

/// Everything one module owns in one stage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageConfig {
    pub key_extractor: KeyExtractorEntry,
    pub key_mask: Key,
    pub rows: Vec<CamRow>,
    pub page: PageTableEntry,
    /// Initial `(physical address, value)` of every owned word.
    pub memory: Vec<(u8, u32)>,
}

/// Location of a register array after lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLoc {
    pub stage: u8,
    pub vaddr: u16,
    pub size: u16,
}

/// Entries of one module at a fixed placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledModule {
    pub name: String,
    pub slot: u8,
    pub vid: u16,
    /// `None` for a fragment that leaves the parser alone.
    pub parser: Option<ParserEntry>,
    pub deparser: Option<ParserEntry>,
    pub stages: BTreeMap<u8, StageConfig>,
    pub containers: BTreeMap<String, ContainerRef>,
    pub tables: BTreeMap<String, u8>,
    pub registers: BTreeMap<String, RegisterLoc>,
    /// Whether the writes end with the registry binding.
    pub bind: bool,
}

impl CompiledModule {
    pub fn empty(name: &str, slot: u8, vid: u16) -> Self {
        CompiledModule {
            name: name.into(),
            slot,
            vid,
            parser: None,
            deparser: None,
            stages: BTreeMap::new(),
            containers: BTreeMap::new(),
            tables: BTreeMap::new(),
            registers: BTreeMap::new(),
            bind: false,
        }
    }

    /// Adds the stages of another fragment for the same slot.
    pub fn merge(mut self, other: CompiledModule) -> Self {
        assert_eq!((self.slot, self.vid), (other.slot, other.vid));
        for (s, cfg) in other.stages {
            assert!(self.stages.insert(s, cfg).is_none(), "stage {s} configured twice");
        }
        self
    }

    /// Ordered entry writes: parser, each stage (extractor, mask, CAM and
    /// VLIW rows, page table, memory), deparser, and the registry last so
    /// that traffic only reaches a fully configured module.
    pub fn writes(&self) -> Vec<ConfigWrite> {
        let mut out = Vec::new();
        let slot = self.slot;
        if let Some(p) = self.parser {
            out.push(ConfigWrite::new(Resource::PARSER, slot, ConfigEntry::Parser(p)));
        }
        for (&s, cfg) in &self.stages {
            let r = |t| Resource::stage(t, s);
            out.push(ConfigWrite::new(
                r(ResourceType::KeyExtractor),
                slot,
                ConfigEntry::KeyExtractor(cfg.key_extractor),
            ));
            out.push(ConfigWrite::new(r(ResourceType::KeyMask), slot, ConfigEntry::KeyMask(cfg.key_mask)));
            for row in &cfg.rows {
                out.push(ConfigWrite::new(r(ResourceType::Cam), row.row, ConfigEntry::Cam(row.cam)));
                out.push(ConfigWrite::new(r(ResourceType::Vliw), row.row, ConfigEntry::Vliw(row.vliw)));
            }
            out.push(ConfigWrite::new(r(ResourceType::PageTable), slot, ConfigEntry::PageTable(cfg.page)));
            for &(addr, v) in &cfg.memory {
                out.push(ConfigWrite::new(r(ResourceType::MemoryWord), addr, ConfigEntry::MemoryWord(v)));
            }
        }
        if let Some(d) = self.deparser {
            out.push(ConfigWrite::new(Resource::DEPARSER, slot, ConfigEntry::Deparser(d)));
        }
        if self.bind {
            out.push(ConfigWrite::new(Resource::REGISTRY, slot, ConfigEntry::Registry(RegistryEntry::bind(self.vid))));
        }
        out
    }

    /// Human-readable listing: `#` comment lines, then one write per line.
    pub fn dump(&self) -> String {
        let mut s = format!("# module {} slot {} vid {}\n", self.name, self.slot, self.vid);
        for (n, c) in &self.containers {
            s += &format!("# field {n} -> {}B#{}\n", c.kind.bytes(), c.index);
        }
        for (t, st) in &self.tables {
            s += &format!("# table {t} -> stage {st}\n");
        }
        for (r, l) in &self.registers {
            s += &format!("# register {r} -> stage {} vaddr {} size {}\n", l.stage, l.vaddr, l.size);
        }
        for w in self.writes() {
            s += &w.dump_line();
            s.push('\n');
        }
        s
    }

    /// Checks the emitted entries against the hardware and the isolation
    /// invariants.
    pub fn verify(&self, g: &TableGeometry) -> Result<(), String> {
        for e in [self.parser, self.deparser].into_iter().flatten() {
            if e.valid_actions().count() > PARSER_ACTIONS {
                return Err("too many parse actions".into());
            }
        }
        if self.slot as usize >= g.key_extractor_depth {
            return Err(format!("slot {} out of range", self.slot));
        }
        for (&s, cfg) in &self.stages {
            if s == 0 || s as usize > g.stages {
                return Err(format!("stage {s} out of range"));
            }
            if cfg.page.base as usize + cfg.page.range as usize > g.stateful_words {
                return Err(format!("stage {s}: page window exceeds memory"));
            }
            let mut seen = std::collections::BTreeSet::new();
            for r in &cfg.rows {
                if r.row as usize >= g.cam_depth || !seen.insert(r.row) {
                    return Err(format!("stage {s}: bad or repeated row {}", r.row));
                }
                if r.cam.vid != self.vid {
                    return Err(format!("stage {s}: row {} carries foreign VID", r.row));
                }
                if r.cam.key.within(&cfg.key_mask) == r.placeholder {
                    return Err(format!("stage {s}: row {} key/mask mismatch", r.row));
                }
                for a in &r.vliw.actions {
                    if a.imm > IMM_MAX {
                        return Err(format!("stage {s}: immediate out of range"));
                    }
                    if a.opcode.is_memory() && a.imm >= cfg.page.range as u16 {
                        return Err(format!("stage {s}: memory address outside page"));
                    }
                }
            }
            for &(addr, _) in &cfg.memory {
                if addr < cfg.page.base || cfg.page.translate((addr - cfg.page.base) as u16).is_none() {
                    return Err(format!("stage {s}: memory word {addr} outside page"));
                }
            }
        }
        Ok(())
    }
}

/// Assigns containers to the fields the program touches.
fn allocate_containers(plan: &Plan) -> Result<BTreeMap<String, ContainerRef>, CompileError> {
    let mut next = [0u8; 3];
    let mut out = BTreeMap::new();
    let mut violations = Vec::new();
    let mut demand = [0u32; 3];
    for f in plan.program.used_fields() {
        let kind = f.kind();
        if is_pinned(f) {
            out.insert(f.name.clone(), system::DST_CONTAINER);
            continue;
        }
        let k = kind.code() as usize;
        demand[k] += 1;
        while system::is_reserved(ContainerRef::new(kind, next[k])) {
            next[k] += 1;
        }
        if (demand[k] as usize) <= available_containers(kind) {
            out.insert(f.name.clone(), ContainerRef::new(kind, next[k]));
            next[k] += 1;
        }
    }
    for kind in ContainerKind::ALL {
        let (used, available) = (demand[kind.code() as usize], available_containers(kind) as u32);
        if used > available {
            violations.push(ResourceViolation::ContainerExhausted { kind, used, available });
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(CompileError::Resource { violations })
    }
}

struct Lowerer<'a> {
    plan: &'a Plan,
    containers: &'a BTreeMap<String, ContainerRef>,
    registers: &'a BTreeMap<String, RegisterLoc>,
}

impl Lowerer<'_> {
    fn container(&self, name: &str) -> ContainerRef {
        self.containers[name]
    }

    fn selector(&self, name: &str) -> u8 {
        match name {
            builtin::PKT_LEN => operand::PKT_LEN,
            builtin::LINK_UTIL => operand::LINK_UTIL,
            builtin::QUEUE_LEN => operand::QUEUE_LEN,
            builtin::SRC_PORT => operand::SRC_PORT,
            f => self.container(f).flat() as u8,
        }
    }

    fn vaddr(&self, register: &str, index: u16) -> u16 {
        self.registers[register].vaddr + index
    }

    fn alu(&self, a: &Action) -> Option<(usize, AluAction)> {
        use AluOpcode::*;
        let imm = |v: u64| v as u16;
        let op = |o, x, y, i| AluAction::new(o, x, y, i);
        Some(match a {
            Action::Assign { dst, expr } => {
                let alu = self.container(dst).flat();
                let act = match expr {
                    Expr::Value(Value::Imm(v)) => op(Set, operand::IMMEDIATE, 0, imm(*v)),
                    Expr::Value(Value::Name(n)) => op(Set, self.selector(n), 0, 0),
                    Expr::Add(Value::Name(x), Value::Name(y)) => op(Add, self.selector(x), self.selector(y), 0),
                    Expr::Add(Value::Name(x), Value::Imm(v)) | Expr::Add(Value::Imm(v), Value::Name(x)) => {
                        op(Addi, self.selector(x), 0, imm(*v))
                    }
                    Expr::Sub(Value::Name(x), Value::Name(y)) => op(Sub, self.selector(x), self.selector(y), 0),
                    Expr::Sub(Value::Name(x), Value::Imm(v)) => op(Subi, self.selector(x), 0, imm(*v)),
                    Expr::Load { register, index } => op(Load, 0, 0, self.vaddr(register, *index)),
                    Expr::LoadInc { register, index } => op(Loadd, 0, 0, self.vaddr(register, *index)),
                    Expr::Add(Value::Imm(_), Value::Imm(_)) | Expr::Sub(Value::Imm(_), _) => {
                        unreachable!("rejected by the parser")
                    }
                };
                (alu, act)
            }
            Action::Store { register, index, src } => {
                let c = self.container(src).flat();
                (c, op(Store, c as u8, 0, self.vaddr(register, *index)))
            }
            Action::Port(Value::Imm(p)) => (METADATA_INDEX, op(Port, operand::IMMEDIATE, 0, imm(*p))),
            Action::Port(Value::Name(n)) => (METADATA_INDEX, op(Port, self.selector(n), 0, 0)),
            Action::Ports(m) => (METADATA_INDEX, op(Set, operand::IMMEDIATE, 0, imm(*m))),
            Action::Discard => (METADATA_INDEX, op(Discard, 0, 0, 0)),
            Action::Recirculate => return None,
        })
    }

    fn key_operand(&self, v: &Value) -> KeyOperand {
        match v {
            Value::Imm(x) => KeyOperand::Imm(*x as u8),
            Value::Name(n) => KeyOperand::Container(self.container(n)),
        }
    }

    fn table(&self, t: &TableDecl, stage: u8, placement: &Placement) -> Result<StageConfig, CompileError> {
        let mut ke = KeyExtractorEntry::default();
        let mut mask = Key::ZERO;
        let mut slots = Vec::new();
        let mut taken = [0usize; 3];
        for k in &t.keys {
            let c = self.container(k);
            let ks = KeySlot::for_kind(c.kind)[taken[c.kind.code() as usize]];
            taken[c.kind.code() as usize] += 1;
            ke.selectors[ks.position()] = c.index;
            mask.fill_slot(ks);
            slots.push(ks);
        }
        if let Some(p) = &t.predicate {
            ke.cmp = p.op;
            ke.operand_a = self.key_operand(&p.lhs);
            ke.operand_b = self.key_operand(&p.rhs);
            mask.set_bit(PREDICATE_BIT, true);
        }

        let rows = &placement.cam_rows[&stage];
        let mut cfg = StageConfig { key_extractor: ke, key_mask: mask, ..Default::default() };
        for (e, &row) in t.entries.iter().zip(rows) {
            let mut key = Key::ZERO;
            for (v, ks) in e.key.iter().zip(&slots) {
                key.set_slot(*ks, *v);
            }
            if t.predicate.is_some() {
                key.set_bit(PREDICATE_BIT, true);
            }
            let mut vliw = VliwEntry::default();
            for a in &e.actions {
                if let Some((i, act)) = self.alu(&a.action) {
                    vliw.actions[i] = act;
                }
            }
            cfg.rows.push(CamRow { row, cam: CamEntry::new(placement.vid, key), vliw, placeholder: false });
        }

        // Reserved rows get keys with bits outside the mask, which no
        // masked lookup key can equal.
        let free: Vec<usize> = (0..KEY_BITS).filter(|&b| !mask.bit(b)).collect();
        for (n, &row) in rows.iter().enumerate().skip(t.entries.len()) {
            let marker = n + 1 - t.entries.len();
            let width = usize::BITS - marker.leading_zeros();
            if width as usize > free.len() {
                return Err(PlacementError::NoPlaceholderSpace { table: t.name.clone() }.into());
            }
            let mut key = Key::ZERO;
            for (i, &b) in free.iter().enumerate().take(width as usize) {
                key.set_bit(b, marker >> i & 1 == 1);
            }
            let cam = CamEntry::new(placement.vid, key);
            cfg.rows.push(CamRow { row, cam, vliw: VliwEntry::default(), placeholder: true });
        }

        let words: u16 = t.registers().iter().map(|r| self.registers[*r].size).sum();
        if words > 0 {
            let base = placement.mem_base[&stage];
            cfg.page = PageTableEntry::new(base, words as u8).expect("checked against memory size");
            cfg.memory = (0..words).map(|i| (base + i as u8, 0)).collect();
        }
        Ok(cfg)
    }
}

/// Turns a checked plan into entries at `placement`.
pub fn allocate_and_lower(plan: &Plan, placement: &Placement) -> Result<CompiledModule, CompileError> {
    let containers = allocate_containers(plan)?;
    let prog = &plan.program;

    let mut registers = BTreeMap::new();
    for (t, stage) in plan.stages.assignments(prog) {
        let used = t.registers();
        let mut vaddr = 0u16;
        for r in prog.registers.iter().filter(|r| used.contains(&r.name.as_str())) {
            registers.insert(r.name.clone(), RegisterLoc { stage, vaddr, size: r.size });
            vaddr += r.size;
        }
    }

    let lw = Lowerer { plan, containers: &containers, registers: &registers };
    let mut cm = CompiledModule::empty(&prog.name, placement.slot, placement.vid);
    for s in FIRST_USER_STAGE..=LAST_USER_STAGE {
        cm.stages.insert(s, StageConfig::default());
    }
    for (t, stage) in plan.stages.assignments(prog) {
        cm.stages.insert(stage, lw.table(t, stage, placement)?);
        cm.tables.insert(t.name.clone(), stage);
    }

    let field_action = |f: &FieldDecl| ParseAction::new(f.offset as u8, containers[&f.name]);
    let mut parse: Vec<ParseAction> =
        prog.used_fields().into_iter().filter(|f| !is_pinned(f)).map(field_action).collect();
    parse.push(system::dst_parse_action());
    // The destination address goes out first so a user write overlapping it wins.
    let mut deparse = vec![system::dst_parse_action()];
    deparse.extend(prog.written_fields().into_iter().filter(|f| !is_pinned(f)).map(field_action));
    cm.parser = Some(ParserEntry::from_actions(&parse));
    cm.deparser = Some(ParserEntry::from_actions(&deparse));
    debug_assert!(lw.plan.used_stages().iter().all(|s| cm.stages.contains_key(s)));
    cm.containers = containers;
    cm.registers = registers;
    cm.bind = true;
    if let Err(e) = cm.verify(&TableGeometry::DEFAULT) {
        panic!("lowering produced invalid entries: {e}");
    }
    Ok(cm)
}

/// One reconfiguration packet per write, in [`CompiledModule::writes`] order.
pub fn emit_reconfig_packets(cm: &CompiledModule, cookie: u32) -> Vec<RawPacket> {
    cm.writes().into_iter().map(|w| ReconfigPacket::new(cookie, w).to_raw()).collect()
}
