// SPDX-License-Identifier: Apache-2.0

//! Reconfiguration packet framing.
//!
//! A reconfiguration packet is an ordinary VLAN-tagged IPv4/UDP frame on the
//! reserved VID 0xFFF, sent to UDP port [`RECONFIG_UDP_PORT`]. The UDP
//! payload is
//!
//! ```text
//! +--------+-------------+-------+------------------------------+
//! | cookie | resource id | index | entry (right-aligned bits)   |
//! |  4 B   |     2 B     |  1 B  | ceil(width/8) B              |
//! +--------+-------------+-------+------------------------------+
//! ```

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CodecError, ConfigEntry, ConfigWrite, Resource};
use crate::net::{self, UdpFlow};
use crate::phv::RawPacket;

pub const RECONFIG_VID: u16 = 0x0fff;
pub const RECONFIG_UDP_PORT: u16 = 0xf1f2;
const RECONFIG_SRC_PORT: u16 = 0xf1f1;
const HEADER_LEN: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconfigError {
    #[error("not a reconfiguration frame")]
    NotReconfig,
    #[error("payload length {got} does not match the {expected}-byte entry of the resource")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown resource id {0:#06x}")]
    UnknownResource(u16),
    #[error("entry decode failed: {0}")]
    Entry(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigPacket {
    pub cookie: u32,
    pub write: ConfigWrite,
}

impl ReconfigPacket {
    pub fn new(cookie: u32, write: ConfigWrite) -> Self {
        ReconfigPacket { cookie, write }
    }

    pub fn to_raw(&self) -> RawPacket {
        build_reconfig_packet(self.cookie, self.write.resource.id(), self.write.index, &self.write.entry.encode())
            .expect("well-formed entry")
    }
}

fn flow() -> UdpFlow {
    let mut f = UdpFlow::new(
        RECONFIG_VID,
        Ipv4Addr::new(10, 255, 255, 254),
        Ipv4Addr::new(10, 255, 255, 255),
        RECONFIG_SRC_PORT,
        RECONFIG_UDP_PORT,
    );
    f.src_mac = [0x02, 0xc0, 0x00, 0x00, 0x00, 0x01];
    f.dst_mac = [0x02, 0xc0, 0x00, 0x00, 0x00, 0x02];
    f
}

/// Frames one entry write. Fails if `entry` is not exactly the addressed
/// resource's encoded width.
pub fn build_reconfig_packet(
    cookie: u32,
    resource_id: u16,
    index: u8,
    entry: &[u8],
) -> Result<RawPacket, ReconfigError> {
    let resource = Resource::from_id(resource_id)?;
    let expected = resource.rtype.width_bytes();
    if entry.len() != expected {
        return Err(ReconfigError::LengthMismatch { expected, got: entry.len() });
    }
    let mut payload = Vec::with_capacity(HEADER_LEN + entry.len());
    payload.extend_from_slice(&cookie.to_be_bytes());
    payload.extend_from_slice(&resource_id.to_be_bytes());
    payload.push(index);
    payload.extend_from_slice(entry);
    Ok(RawPacket::new(net::udp_frame(&flow(), &payload)))
}

/// UDP payload of a frame with reconfiguration framing, if it has one.
fn reconfig_payload(frame: &[u8]) -> Option<&[u8]> {
    if net::vlan_id(frame)? != RECONFIG_VID || frame.len() < net::PAYLOAD_OFFSET {
        return None;
    }
    let ethertype = u16::from_be_bytes([frame[16], frame[17]]);
    let proto = frame[net::IPV4_OFFSET + 9];
    let dport = u16::from_be_bytes([frame[net::UDP_DPORT_OFFSET], frame[net::UDP_DPORT_OFFSET + 1]]);
    if ethertype != net::ETHERTYPE_IPV4 || proto != net::IPPROTO_UDP || dport != RECONFIG_UDP_PORT {
        return None;
    }
    let udp_len = u16::from_be_bytes([frame[net::UDP_OFFSET + 4], frame[net::UDP_OFFSET + 5]]) as usize;
    let payload_len = udp_len.checked_sub(8)?;
    frame.get(net::PAYLOAD_OFFSET..net::PAYLOAD_OFFSET + payload_len)
}

/// True for frames on the control VID, whether or not well formed.
pub fn is_control_vid(frame: &[u8]) -> bool {
    net::vlan_id(frame) == Some(RECONFIG_VID)
}

/// Cookie of a well-framed reconfiguration packet.
pub fn peek_cookie(frame: &[u8]) -> Option<u32> {
    let p = reconfig_payload(frame)?;
    (p.len() >= 4).then(|| u32::from_be_bytes([p[0], p[1], p[2], p[3]]))
}

pub fn parse_reconfig_packet(pkt: &RawPacket) -> Result<ReconfigPacket, ReconfigError> {
    let p = reconfig_payload(&pkt.bytes).ok_or(ReconfigError::NotReconfig)?;
    if p.len() < HEADER_LEN {
        return Err(ReconfigError::LengthMismatch { expected: HEADER_LEN, got: p.len() });
    }
    let cookie = u32::from_be_bytes([p[0], p[1], p[2], p[3]]);
    let resource = Resource::from_id(u16::from_be_bytes([p[4], p[5]]))?;
    let index = p[6];
    let body = &p[HEADER_LEN..];
    let expected = resource.rtype.width_bytes();
    if body.len() != expected {
        return Err(ReconfigError::LengthMismatch { expected, got: body.len() });
    }
    let entry = ConfigEntry::decode(resource.rtype, body)?;
    Ok(ReconfigPacket { cookie, write: ConfigWrite { resource, index, entry } })
}
