// SPDX-License-Identifier: Apache-2.0

//! Fixed Ethernet / 802.1Q / IPv4 / UDP framing used by data and
//! reconfiguration packets.

use std::net::Ipv4Addr;

pub const ETH_ALEN: usize = 6;
pub const TPID_8021Q: u16 = 0x8100;
pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const IPPROTO_UDP: u8 = 17;

/// Offset of the 802.1Q TCI (PCP/DEI/VID).
pub const TCI_OFFSET: usize = 14;
pub const IPV4_OFFSET: usize = 18;
pub const IPV4_SRC_OFFSET: usize = IPV4_OFFSET + 12;
pub const IPV4_DST_OFFSET: usize = IPV4_OFFSET + 16;
pub const UDP_OFFSET: usize = IPV4_OFFSET + 20;
pub const UDP_SPORT_OFFSET: usize = UDP_OFFSET;
pub const UDP_DPORT_OFFSET: usize = UDP_OFFSET + 2;
/// First byte after the common Ethernet/VLAN/IPv4/UDP headers.
pub const PAYLOAD_OFFSET: usize = UDP_OFFSET + 8;

pub const VID_MASK: u16 = 0x0fff;

/// VLAN ID carried by a tagged frame, `None` for untagged frames.
pub fn vlan_id(frame: &[u8]) -> Option<u16> {
    if frame.len() < TCI_OFFSET + 2 {
        return None;
    }
    if u16::from_be_bytes([frame[12], frame[13]]) != TPID_8021Q {
        return None;
    }
    Some(u16::from_be_bytes([frame[14], frame[15]]) & VID_MASK)
}

fn ipv4_checksum(hdr: &[u8]) -> u16 {
    let mut sum: u32 = hdr.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Addressing for [`udp_frame`].
#[derive(Debug, Clone, Copy)]
pub struct UdpFlow {
    pub vid: u16,
    pub src_mac: [u8; ETH_ALEN],
    pub dst_mac: [u8; ETH_ALEN],
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
}

impl UdpFlow {
    pub fn new(vid: u16, src_ip: Ipv4Addr, dst_ip: Ipv4Addr, src_port: u16, dst_port: u16) -> Self {
        UdpFlow {
            vid,
            src_mac: [0x02, 0, 0, 0, 0, 0x01],
            dst_mac: [0x02, 0, 0, 0, 0, 0x02],
            src_ip,
            dst_ip,
            src_port,
            dst_port,
        }
    }
}

/// Builds a VLAN-tagged IPv4/UDP frame around `payload`.
pub fn udp_frame(flow: &UdpFlow, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(PAYLOAD_OFFSET + payload.len());
    f.extend_from_slice(&flow.dst_mac);
    f.extend_from_slice(&flow.src_mac);
    f.extend_from_slice(&TPID_8021Q.to_be_bytes());
    f.extend_from_slice(&(flow.vid & VID_MASK).to_be_bytes());
    f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

    let udp_len = (8 + payload.len()) as u16;
    let total_len = 20 + udp_len;
    let mut ip = [0u8; 20];
    ip[0] = 0x45;
    ip[2..4].copy_from_slice(&total_len.to_be_bytes());
    ip[8] = 64;
    ip[9] = IPPROTO_UDP;
    ip[12..16].copy_from_slice(&flow.src_ip.octets());
    ip[16..20].copy_from_slice(&flow.dst_ip.octets());
    let csum = ipv4_checksum(&ip);
    ip[10..12].copy_from_slice(&csum.to_be_bytes());
    f.extend_from_slice(&ip);

    f.extend_from_slice(&flow.src_port.to_be_bytes());
    f.extend_from_slice(&flow.dst_port.to_be_bytes());
    f.extend_from_slice(&udp_len.to_be_bytes());
    f.extend_from_slice(&[0, 0]);
    f.extend_from_slice(payload);
    f
}

/// Reads a big-endian value of `n` bytes at `off`, zero-filling past the end.
pub fn read_be(bytes: &[u8], off: usize, n: usize) -> u64 {
    (0..n).fold(0u64, |acc, i| acc << 8 | *bytes.get(off + i).unwrap_or(&0) as u64)
}

/// Writes the low `n` bytes of `value` big-endian at `off`, skipping bytes
/// past `limit`.
pub fn write_be(bytes: &mut [u8], off: usize, n: usize, value: u64, limit: usize) {
    let be = value.to_be_bytes();
    for i in 0..n {
        let pos = off + i;
        if pos < limit && pos < bytes.len() {
            bytes[pos] = be[8 - n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout() {
        let flow = UdpFlow::new(7, Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), 1000, 2000);
        let f = udp_frame(&flow, &[0xaa, 0xbb]);
        assert_eq!(f.len(), PAYLOAD_OFFSET + 2);
        assert_eq!(vlan_id(&f), Some(7));
        assert_eq!(read_be(&f, IPV4_DST_OFFSET, 4), 0x0a00_0002);
        assert_eq!(read_be(&f, UDP_DPORT_OFFSET, 2), 2000);
        assert_eq!(&f[PAYLOAD_OFFSET..], &[0xaa, 0xbb]);
        // A correct header checksums to zero.
        assert_eq!(ipv4_checksum(&f[IPV4_OFFSET..IPV4_OFFSET + 20]), 0);
    }

    #[test]
    fn untagged_has_no_vid() {
        let mut f = vec![0u8; 60];
        f[12] = 0x08;
        assert_eq!(vlan_id(&f), None);
        assert_eq!(vlan_id(&[0u8; 10]), None);
    }

    #[test]
    fn be_helpers_clip() {
        let b = [1u8, 2, 3];
        assert_eq!(read_be(&b, 1, 4), 0x0203_0000);
        let mut w = [0u8; 4];
        write_be(&mut w, 2, 4, 0x1122_3344, 4);
        assert_eq!(w, [0, 0, 0x11, 0x22]);
    }
}
