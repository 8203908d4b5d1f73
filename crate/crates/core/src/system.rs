// SPDX-License-Identifier: Apache-2.0

//! The system module.
//!
//! It owns the first and last stages. In stage 1 it maps each tenant's
//! virtual destination addresses to physical ones and picks the egress
//! port (or multicast bitmap) from the shared routing table. In stage 5 it
//! can count a tenant's packets in stateful memory.
//!
//! Because every CAM row carries the VID of the packets it may match, the
//! system entries for a tenant carry that tenant's VID and are installed
//! and removed together with the tenant's own module.
//!
//! Two containers are reserved: the destination address lives in the last
//! 4-byte container so every module's parser can fill it, and the last
//! 2-byte container is scratch space for the packet counter.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{CamRow, CompiledModule, StageConfig};
use crate::config::{
    operand, AluAction, AluOpcode, CamEntry, Key, KeySlot, PageTableEntry, ParseAction, VliwEntry, IMM_MAX,
};
use crate::net;
use crate::phv::{ContainerKind, ContainerRef, METADATA_INDEX};

pub const SYSTEM_SLOT: u8 = 0;
pub const SYSTEM_VID: u16 = 0;
pub const ENTRY_STAGE: u8 = 1;
pub const EXIT_STAGE: u8 = 5;

pub const DST_IP_OFFSET: usize = net::IPV4_DST_OFFSET;
pub const DST_CONTAINER: ContainerRef = ContainerRef::new(ContainerKind::FourByte, 7);
pub const SCRATCH_CONTAINER: ContainerRef = ContainerRef::new(ContainerKind::TwoByte, 7);

/// Largest port usable in a multicast group; the bitmap is an 11-bit immediate.
pub const MAX_GROUP_PORT: u8 = 10;

pub fn is_reserved(c: ContainerRef) -> bool {
    c == DST_CONTAINER || c == SCRATCH_CONTAINER
}

pub fn reserved_containers(kind: ContainerKind) -> usize {
    (0..8).filter(|&i| is_reserved(ContainerRef::new(kind, i))).count()
}

/// Parse (and deparse) action every module carries for the destination address.
pub fn dst_parse_action() -> ParseAction {
    ParseAction::new(DST_IP_OFFSET as u8, DST_CONTAINER)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub ip: Ipv4Addr,
    pub port: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub ip: Ipv4Addr,
    pub ports: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vip {
    #[serde(rename = "virtual")]
    pub virtual_ip: Ipv4Addr,
    pub physical: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantConfig {
    pub vid: u16,
    #[serde(default)]
    pub vips: Vec<Vip>,
    #[serde(default)]
    pub count_packets: bool,
}

/// Operator-supplied system configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub link_util: u16,
    pub queue_len: u16,
    pub routes: Vec<Route>,
    pub groups: Vec<Group>,
    pub tenants: Vec<TenantConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SystemError {
    #[error("tenant {vid} needs {needed} system rows in stage {stage}, {available} available")]
    RouteTableOverflow { vid: u16, stage: u8, needed: usize, available: usize },
    #[error("port {port} out of range for {ip}")]
    BadPort { ip: Ipv4Addr, port: u8 },
    #[error("address {0} listed twice")]
    Duplicate(Ipv4Addr),
    #[error("invalid system configuration: {0}")]
    Parse(String),
}

/// Resources one tenant's system entries need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SystemDemand {
    pub entry_rows: usize,
    pub entry_words: u16,
    pub exit_rows: usize,
    pub exit_words: u16,
}

/// Where one tenant's system entries go.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SystemPlacement {
    pub entry_rows: Vec<u8>,
    pub entry_base: u8,
    pub exit_row: Option<u8>,
    pub exit_base: u8,
}

enum Forward {
    Port(u8),
    Bitmap(u16),
}

impl SystemConfig {
    pub fn from_toml(s: &str) -> Result<Self, SystemError> {
        let c: SystemConfig = toml::from_str(s).map_err(|e| SystemError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let mut seen = BTreeSet::new();
        for r in &self.routes {
            if r.port >= 32 {
                return Err(SystemError::BadPort { ip: r.ip, port: r.port });
            }
            if !seen.insert(r.ip) {
                return Err(SystemError::Duplicate(r.ip));
            }
        }
        for g in &self.groups {
            if let Some(&p) = g.ports.iter().find(|&&p| p > MAX_GROUP_PORT) {
                return Err(SystemError::BadPort { ip: g.ip, port: p });
            }
            if !seen.insert(g.ip) {
                return Err(SystemError::Duplicate(g.ip));
            }
        }
        for t in &self.tenants {
            let mut v = BTreeSet::new();
            for vip in &t.vips {
                if !v.insert(vip.virtual_ip) {
                    return Err(SystemError::Duplicate(vip.virtual_ip));
                }
            }
        }
        Ok(())
    }

    pub fn tenant(&self, vid: u16) -> Option<&TenantConfig> {
        self.tenants.iter().find(|t| t.vid == vid)
    }

    fn forward(&self, ip: Ipv4Addr) -> Option<Forward> {
        if let Some(r) = self.routes.iter().find(|r| r.ip == ip) {
            return Some(Forward::Port(r.port));
        }
        let g = self.groups.iter().find(|g| g.ip == ip)?;
        Some(Forward::Bitmap(g.ports.iter().fold(0u16, |m, p| m | 1 << p)))
    }

    /// Destination address and port bitmap the system assigns to a
    /// tenant's packet before any user table runs.
    pub fn resolve(&self, vid: u16, dst: u32) -> (u32, u32) {
        let dst_ip = Ipv4Addr::from(dst);
        let new_dst = self
            .tenant(vid)
            .and_then(|t| t.vips.iter().find(|v| v.virtual_ip == dst_ip))
            .map_or(dst_ip, |v| v.physical);
        let bitmap = match self.forward(new_dst) {
            Some(Forward::Port(p)) => 1u32 << p,
            Some(Forward::Bitmap(m)) => m as u32,
            None => 0,
        };
        (u32::from(new_dst), bitmap)
    }

    /// Stage-1 keys for a tenant: its virtual addresses first, then shared
    /// routes and groups not shadowed by a virtual address.
    fn entry_keys(&self, vid: u16) -> Vec<(Ipv4Addr, Option<(u16, Ipv4Addr)>)> {
        let vips: Vec<&Vip> = self.tenant(vid).map(|t| t.vips.iter().collect()).unwrap_or_default();
        let mut out: Vec<_> =
            vips.iter().enumerate().map(|(i, v)| (v.virtual_ip, Some((i as u16, v.physical)))).collect();
        let shadowed = |ip: &Ipv4Addr| vips.iter().any(|v| v.virtual_ip == *ip);
        out.extend(self.routes.iter().map(|r| r.ip).filter(|ip| !shadowed(ip)).map(|ip| (ip, None)));
        out.extend(self.groups.iter().map(|g| g.ip).filter(|ip| !shadowed(ip)).map(|ip| (ip, None)));
        out
    }

    pub fn demand(&self, vid: u16) -> SystemDemand {
        let t = self.tenant(vid);
        let count = t.is_some_and(|t| t.count_packets);
        SystemDemand {
            entry_rows: self.entry_keys(vid).len(),
            entry_words: t.map_or(0, |t| t.vips.len() as u16),
            exit_rows: count as usize,
            exit_words: count as u16,
        }
    }
}

fn forward_action(f: Forward) -> AluAction {
    match f {
        Forward::Port(p) => AluAction::new(AluOpcode::Port, operand::IMMEDIATE, 0, p as u16),
        Forward::Bitmap(m) => {
            debug_assert!(m <= IMM_MAX);
            AluAction::new(AluOpcode::Set, operand::IMMEDIATE, 0, m)
        }
    }
}

/// System entries for one tenant in stages 1 and 5.
pub fn build_system_module(
    cfg: &SystemConfig,
    slot: u8,
    vid: u16,
    placement: &SystemPlacement,
) -> Result<CompiledModule, SystemError> {
    let demand = cfg.demand(vid);
    if demand.entry_rows > placement.entry_rows.len() {
        return Err(SystemError::RouteTableOverflow {
            vid,
            stage: ENTRY_STAGE,
            needed: demand.entry_rows,
            available: placement.entry_rows.len(),
        });
    }
    if demand.exit_rows > placement.exit_row.iter().count() {
        return Err(SystemError::RouteTableOverflow { vid, stage: EXIT_STAGE, needed: 1, available: 0 });
    }

    let mut entry = StageConfig::default();
    entry.key_extractor.selectors[KeySlot::FourA.position()] = DST_CONTAINER.index;
    entry.key_mask.fill_slot(KeySlot::FourA);
    for ((ip, vip), &row) in cfg.entry_keys(vid).into_iter().zip(&placement.entry_rows) {
        let mut key = Key::ZERO;
        key.set_slot(KeySlot::FourA, u32::from(ip) as u64);
        let mut vliw = VliwEntry::default();
        let target = match vip {
            Some((word, phys)) => {
                vliw.actions[DST_CONTAINER.flat()] = AluAction::new(AluOpcode::Load, 0, 0, word);
                phys
            }
            None => ip,
        };
        if let Some(f) = cfg.forward(target) {
            vliw.actions[METADATA_INDEX] = forward_action(f);
        }
        entry.rows.push(CamRow { row, cam: CamEntry::new(vid, key), vliw, placeholder: false });
    }
    if let Some(t) = cfg.tenant(vid).filter(|t| !t.vips.is_empty()) {
        let base = placement.entry_base;
        entry.page = PageTableEntry::new(base, t.vips.len() as u8).expect("allocated window");
        entry.memory = t.vips.iter().enumerate().map(|(i, v)| (base + i as u8, u32::from(v.physical))).collect();
    }

    let mut exit = StageConfig::default();
    if let (true, Some(row)) = (demand.exit_rows > 0, placement.exit_row) {
        let mut vliw = VliwEntry::default();
        vliw.actions[SCRATCH_CONTAINER.flat()] = AluAction::new(AluOpcode::Loadd, 0, 0, 0);
        exit.rows.push(CamRow { row, cam: CamEntry::new(vid, Key::ZERO), vliw, placeholder: false });
        exit.page = PageTableEntry::new(placement.exit_base, 1).expect("allocated window");
        exit.memory = vec![(placement.exit_base, 0)];
    }

    let mut cm = CompiledModule::empty("system", slot, vid);
    cm.stages.insert(ENTRY_STAGE, entry);
    cm.stages.insert(EXIT_STAGE, exit);
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SystemConfig {
        SystemConfig::from_toml(
            r#"
            link_util = 40
            [[routes]]
            ip = "192.168.0.1"
            port = 3
            [[routes]]
            ip = "192.168.0.2"
            port = 4
            [[groups]]
            ip = "239.0.0.1"
            ports = [1, 2, 5]
            [[tenants]]
            vid = 10
            count_packets = true
            vips = [{ virtual = "10.0.0.1", physical = "192.168.0.2" }]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn resolve_semantics() {
        let c = cfg();
        let ip = |s: &str| u32::from(s.parse::<Ipv4Addr>().unwrap());
        assert_eq!(c.resolve(10, ip("10.0.0.1")), (ip("192.168.0.2"), 1 << 4));
        assert_eq!(c.resolve(11, ip("10.0.0.1")), (ip("10.0.0.1"), 0));
        assert_eq!(c.resolve(11, ip("192.168.0.1")), (ip("192.168.0.1"), 1 << 3));
        assert_eq!(c.resolve(11, ip("239.0.0.1")), (ip("239.0.0.1"), 0b100110));
    }

    #[test]
    fn demand_and_entries() {
        let c = cfg();
        assert_eq!(c.demand(10), SystemDemand { entry_rows: 4, entry_words: 1, exit_rows: 1, exit_words: 1 });
        assert_eq!(c.demand(11), SystemDemand { entry_rows: 3, entry_words: 0, exit_rows: 0, exit_words: 0 });
        let p = SystemPlacement { entry_rows: vec![0, 1, 2, 3], entry_base: 8, exit_row: Some(0), exit_base: 0 };
        let m = build_system_module(&c, 1, 10, &p).unwrap();
        let entry = &m.stages[&ENTRY_STAGE];
        assert_eq!(entry.rows.len(), 4);
        assert_eq!(entry.memory, vec![(8, u32::from(Ipv4Addr::new(192, 168, 0, 2)))]);
        assert_eq!(entry.page, PageTableEntry::new(8, 1).unwrap());
        assert_eq!(m.stages[&EXIT_STAGE].rows.len(), 1);
        let short = SystemPlacement { entry_rows: vec![0, 1], ..p };
        assert!(matches!(build_system_module(&c, 1, 10, &short), Err(SystemError::RouteTableOverflow { .. })));
    }

    #[test]
    fn validation() {
        assert!(SystemConfig::from_toml("[[groups]]\nip = \"239.0.0.1\"\nports = [11]").is_err());
        assert!(SystemConfig::from_toml(
            "[[routes]]\nip = \"1.1.1.1\"\nport = 1\n[[routes]]\nip = \"1.1.1.1\"\nport = 2"
        )
        .is_err());
        assert_eq!(reserved_containers(ContainerKind::TwoByte), 1);
        assert_eq!(reserved_containers(ContainerKind::SixByte), 0);
    }
}
