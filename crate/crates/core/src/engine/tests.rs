// SPDX-License-Identifier: Apache-2.0

use std::net::Ipv4Addr;

use proptest::prelude::*;

use super::*;
use crate::config::{
    AluAction, CamEntry, CmpOp, KeyExtractorEntry, PageTableEntry, ParseAction, ParserEntry, RegistryEntry, VliwEntry,
};
use crate::net::UdpFlow;
use crate::phv::ContainerKind::{FourByte, SixByte, TwoByte};

fn frame(vid: u16, payload: &[u8]) -> RawPacket {
    let f = UdpFlow::new(vid, Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), 1000, 2000);
    RawPacket::new(net::udp_frame(&f, payload))
}

fn bound(vid: u16, slot: u8) -> PipelineState {
    let mut st = PipelineState::new(0xC0FFEE);
    st.registry[slot as usize] = RegistryEntry::bind(vid);
    st
}

#[test]
fn parse_copies_big_endian_bytes() {
    let mut st = bound(5, 1);
    st.parser[1] = ParserEntry::from_actions(&[ParseAction::new(14, ContainerRef::new(FourByte, 0))]);
    let mut bytes = vec![0u8; 64];
    bytes[14..18].copy_from_slice(&[0x0A, 0x0B, 0x0C, 0x0D]);
    let phv = parse(&st, &RawPacket::new(bytes), 1);
    assert_eq!(phv.value(8), 0x0A0B0C0D);
    for i in (0..24).filter(|&i| i != 8) {
        assert_eq!(phv.value(i), 0);
    }
}

#[test]
fn parse_zero_pads_past_header_region() {
    let mut st = bound(5, 1);
    st.parser[1] = ParserEntry::from_actions(&[ParseAction::new(126, ContainerRef::new(SixByte, 2))]);
    let mut bytes = vec![0u8; 300];
    bytes[126] = 0xAB;
    bytes[127] = 0xCD;
    bytes[128] = 0xFF;
    let phv = parse(&st, &RawPacket::new(bytes), 1);
    assert_eq!(phv.value(18), 0xABCD_0000_0000);
}

#[test]
fn parse_fills_metadata() {
    let mut st = bound(9, 3);
    st.stats.link_util = 70;
    st.stats.queue_len = 12;
    let mut pkt = frame(9, &[1, 2, 3]);
    pkt.ingress_port = 4;
    let phv = parse(&st, &pkt, 3);
    let m = phv.metadata;
    assert_eq!((m.vid, m.module_slot, m.pkt_len, m.src_port), (9, 3, pkt.bytes.len() as u16, 4));
    assert_eq!((m.link_util, m.queue_len), (70, 12));
}

#[test]
fn key_predicate_eq_immediate() {
    let mut stage = StageState::new(&Default::default());
    stage.key_extractor[1] = KeyExtractorEntry {
        selectors: [0; 6],
        cmp: CmpOp::Eq,
        operand_a: KeyOperand::Container(ContainerRef::new(TwoByte, 0)),
        operand_b: KeyOperand::Imm(5),
    };
    let mut mask = Key::ZERO;
    mask.fill_slot(KeySlot::TwoA);
    mask.set_bit(PREDICATE_BIT, true);
    stage.key_mask[1] = mask;
    let phv = Phv::zeroed().with(0, 5).unwrap();
    let k = extract_key(&stage, &phv, 1);
    assert!(k.predicate());
    assert_eq!(k.slot(KeySlot::TwoA), 5);
    let k = extract_key(&stage, &phv.clone().with(0, 6).unwrap(), 1);
    assert!(!k.predicate());
}

#[test]
fn key_is_masked() {
    let mut stage = StageState::new(&Default::default());
    stage.key_extractor[0].selectors = [1, 0, 0, 0, 0, 0];
    let mut mask = Key::ZERO;
    mask.fill_slot(KeySlot::TwoA);
    stage.key_mask[0] = mask;
    let phv = Phv::zeroed().with(1, 0xBEEF).unwrap().with(0, 0x1234).unwrap().with(16, 7).unwrap();
    let k = extract_key(&stage, &phv, 0);
    assert_eq!(k.slot(KeySlot::TwoA), 0xBEEF);
    assert_eq!(k.slot(KeySlot::TwoB), 0);
    assert_eq!(k.slot(KeySlot::SixA), 0);
    assert!(k.within(&mask));
}

#[test]
fn cam_match_is_vid_isolated() {
    let mut stage = StageState::new(&Default::default());
    let mut k = Key::ZERO;
    k.set_slot(KeySlot::FourA, 0xAB);
    stage.cam[3] = Some(CamEntry::new(1, k));
    assert_eq!(match_cam(&stage, &k, 1), Some(3));
    assert_eq!(match_cam(&stage, &k, 2), None);
    let mut other = k;
    other.set_slot(KeySlot::FourA, 0xAC);
    assert_eq!(match_cam(&stage, &other, 1), None);
}

fn vliw(actions: &[(usize, AluAction)]) -> VliwEntry {
    let mut e = VliwEntry::default();
    for &(i, a) in actions {
        e.actions[i] = a;
    }
    e
}

#[test]
fn vliw_add() {
    let mut stage = StageState::new(&Default::default());
    stage.vliw[0] = vliw(&[(2, AluAction::new(AluOpcode::Add, 0, 1, 0))]);
    let phv = Phv::zeroed().with(0, 7).unwrap().with(1, 5).unwrap();
    let (out, fired) = execute_vliw(&mut stage, &phv, 1, Some(0));
    assert_eq!(out.value(2), 12);
    assert_eq!(out.value(0), 7);
    assert_eq!(fired.len(), 1);
}

#[test]
fn vliw_reads_are_parallel() {
    let mut stage = StageState::new(&Default::default());
    stage.vliw[0] = vliw(&[(0, AluAction::new(AluOpcode::Set, 1, 0, 0)), (1, AluAction::new(AluOpcode::Set, 0, 0, 0))]);
    let phv = Phv::zeroed().with(0, 7).unwrap().with(1, 5).unwrap();
    let (out, _) = execute_vliw(&mut stage, &phv, 1, Some(0));
    assert_eq!((out.value(0), out.value(1)), (5, 7));
}

#[test]
fn vliw_wraps_at_container_width() {
    let mut stage = StageState::new(&Default::default());
    stage.vliw[0] =
        vliw(&[(0, AluAction::new(AluOpcode::Addi, 0, 0, 2)), (8, AluAction::new(AluOpcode::Subi, 8, 0, 1))]);
    let phv = Phv::zeroed().with(0, 0xFFFF).unwrap();
    let (out, _) = execute_vliw(&mut stage, &phv, 1, Some(0));
    assert_eq!(out.value(0), 1);
    assert_eq!(out.value(8), 0xFFFF_FFFF);
}

#[test]
fn vliw_metadata_alu() {
    let mut stage = StageState::new(&Default::default());
    stage.vliw[0] = vliw(&[(24, AluAction::new(AluOpcode::Port, operand::IMMEDIATE, 0, 3))]);
    stage.vliw[1] = vliw(&[(24, AluAction::new(AluOpcode::Set, operand::IMMEDIATE, 0, 0b101))]);
    stage.vliw[2] = vliw(&[(24, AluAction::new(AluOpcode::Discard, 0, 0, 0))]);
    stage.vliw[3] = vliw(&[(24, AluAction::new(AluOpcode::Port, operand::SRC_PORT, 0, 0))]);
    let mut phv = Phv::zeroed();
    phv.metadata.src_port = 6;
    assert_eq!(execute_vliw(&mut stage, &phv, 1, Some(0)).0.metadata.dest_port_bitmap, 1 << 3);
    assert_eq!(execute_vliw(&mut stage, &phv, 1, Some(1)).0.metadata.dest_port_bitmap, 0b101);
    assert!(execute_vliw(&mut stage, &phv, 1, Some(2)).0.metadata.discard);
    assert_eq!(execute_vliw(&mut stage, &phv, 1, Some(3)).0.metadata.dest_port_bitmap, 1 << 6);
}

#[test]
fn miss_is_identity() {
    let mut stage = StageState::new(&Default::default());
    stage.vliw[0] = vliw(&[(0, AluAction::new(AluOpcode::Addi, 0, 0, 1))]);
    let phv = Phv::zeroed().with(0, 9).unwrap();
    let (out, fired) = execute_vliw(&mut stage, &phv, 1, None);
    assert_eq!(out, phv);
    assert!(fired.is_empty());
}

#[test]
fn page_table_translation_and_faults() {
    let mut stage = StageState::new(&Default::default());
    stage.page_table[2] = PageTableEntry::new(16, 8).unwrap();
    stage.memory[19] = 77;
    assert_eq!(access_memory(&mut stage, 2, 3, MemOp::Load), Ok(77));
    let before = stage.memory.clone();
    assert_eq!(access_memory(&mut stage, 2, 9, MemOp::Store(5)), Err(MemoryFault));
    assert_eq!(stage.memory, before);
    assert_eq!(stage.faults[2], 1);
    // Slot without a page table entry owns nothing.
    assert_eq!(access_memory(&mut stage, 3, 0, MemOp::Load), Err(MemoryFault));
}

#[test]
fn loadd_returns_old_and_increments() {
    let mut stage = StageState::new(&Default::default());
    stage.page_table[1] = PageTableEntry::new(0, 4).unwrap();
    stage.memory[2] = 41;
    stage.vliw[0] = vliw(&[(8, AluAction::new(AluOpcode::Loadd, 0, 0, 2))]);
    let (out, _) = execute_vliw(&mut stage, &Phv::zeroed(), 1, Some(0));
    assert_eq!(out.value(8), 41);
    assert_eq!(stage.memory[2], 42);
}

#[test]
fn store_keeps_container_and_fault_zeroes_it() {
    let mut stage = StageState::new(&Default::default());
    stage.page_table[1] = PageTableEntry::new(10, 1).unwrap();
    stage.vliw[0] = vliw(&[(9, AluAction::new(AluOpcode::Store, 9, 0, 0))]);
    stage.vliw[1] = vliw(&[(9, AluAction::new(AluOpcode::Store, 9, 0, 1))]);
    let phv = Phv::zeroed().with(9, 1234).unwrap();
    let (out, _) = execute_vliw(&mut stage, &phv, 1, Some(0));
    assert_eq!(out.value(9), 1234);
    assert_eq!(stage.memory[10], 1234);
    let (out, fired) = execute_vliw(&mut stage, &phv, 1, Some(1));
    assert_eq!(out.value(9), 0);
    assert!(fired[0].fault);
}

#[test]
fn deparse_rewrites_only_selected_bytes() {
    let mut st = bound(5, 1);
    st.deparser[1] = ParserEntry::from_actions(&[ParseAction::new(46, ContainerRef::new(TwoByte, 0))]);
    let pkt = frame(5, &[0u8; 16]);
    let phv = Phv::zeroed().with(0, 0xABCD).unwrap();
    let (out, writes) = deparse(&st, &phv, &pkt, 1);
    assert_eq!(writes, 1);
    let diff: Vec<usize> = (0..pkt.bytes.len()).filter(|&i| pkt.bytes[i] != out.bytes[i]).collect();
    assert_eq!(diff, vec![46, 47]);
    assert_eq!(&out.bytes[46..48], &[0xAB, 0xCD]);
}

#[test]
fn deparse_never_writes_past_header_region() {
    let mut st = bound(5, 1);
    st.deparser[1] = ParserEntry::from_actions(&[ParseAction::new(126, ContainerRef::new(SixByte, 0))]);
    let pkt = RawPacket::new(vec![0u8; 200]);
    let phv = Phv::zeroed().with(16, 0xFFFF_FFFF_FFFF).unwrap();
    let (out, _) = deparse(&st, &phv, &pkt, 1);
    assert_eq!(&out.bytes[126..128], &[0xFF, 0xFF]);
    assert!(out.bytes[128..].iter().all(|&b| b == 0));
}

#[test]
fn filter_verdicts() {
    let mut st = bound(5, 1);
    assert_eq!(filter_packet(&st, &RawPacket::new(vec![0u8; 60])), FilterVerdict::Drop(DropReason::NoVlan));
    assert_eq!(filter_packet(&st, &frame(6, &[])), FilterVerdict::Drop(DropReason::UnknownModule));
    assert_eq!(filter_packet(&st, &frame(5, &[])), FilterVerdict::Data { slot: 1, vid: 5 });
    assert_eq!(filter_packet(&st, &frame(5, &[0u8; 1500])), FilterVerdict::Drop(DropReason::Oversize));
    assert_eq!(filter_packet(&st, &frame(0xFFF, &[])), FilterVerdict::Drop(DropReason::ControlFraming));
    st.filter.update_bitmap = 1 << 1;
    assert_eq!(filter_packet(&st, &frame(5, &[])), FilterVerdict::Drop(DropReason::UnderUpdate));
}

#[test]
fn filter_cookie_check() {
    use crate::config::{build_reconfig_packet, Resource};
    let st = PipelineState::new(0xC0FFEE);
    let good = build_reconfig_packet(0xC0FFEE, Resource::REGISTRY.id(), 1, &[0x80, 0x05]).unwrap();
    let bad = build_reconfig_packet(0xC0FFEF, Resource::REGISTRY.id(), 1, &[0x80, 0x05]).unwrap();
    assert_eq!(filter_packet(&st, &good), FilterVerdict::Reconfig);
    assert_eq!(filter_packet(&st, &bad), FilterVerdict::Drop(DropReason::BadCookie));
}

#[test]
fn process_without_route_is_dropped() {
    let mut st = bound(5, 1);
    let out = st.process_packet(frame(5, &[1, 2]));
    assert_eq!(out.drop_reason(), Some(DropReason::NoRoute));
    assert_eq!(out.stage_hits().count(), 5);
    assert_eq!(st.stats.modules[1].packets, 1);
    assert_eq!(st.stats.modules[1].dropped, 1);
}

#[test]
fn process_forwards_and_counts() {
    let mut st = bound(5, 1);
    // Stage 1: empty key, always hits, sends to port 2.
    st.stages[0].cam[0] = Some(CamEntry::new(5, Key::ZERO));
    st.stages[0].vliw[0] = vliw(&[(24, AluAction::new(AluOpcode::Port, operand::IMMEDIATE, 0, 2))]);
    let pkt = frame(5, &[9; 10]);
    let out = st.process_packet(pkt.clone());
    assert_eq!(out.verdict, Verdict::Forwarded { ports: vec![2] });
    assert_eq!(out.egress.unwrap().bytes, pkt.bytes);
    assert_eq!(st.stats.modules[1].forwarded, 1);
    // Another tenant's packet misses the row.
    st.registry[2] = RegistryEntry::bind(6);
    assert_eq!(st.process_packet(frame(6, &[])).drop_reason(), Some(DropReason::NoRoute));
}

#[test]
fn under_update_drops_are_counted() {
    let mut st = bound(5, 1);
    st.filter.update_bitmap = 0b10;
    let out = st.process_packet(frame(5, &[]));
    assert_eq!(out.drop_reason(), Some(DropReason::UnderUpdate));
    assert_eq!(st.stats.modules[1].dropped_under_update, 1);
    assert_eq!(st.stats.modules[1].packets, 0);
}

proptest! {
    #[test]
    fn nop_vliw_hit_is_identity(vals in proptest::array::uniform24(any::<u64>())) {
        let mut phv = Phv::zeroed();
        for (i, v) in vals.iter().enumerate() {
            phv.store_wrapping(i, *v);
        }
        let mut stage = StageState::new(&Default::default());
        let (out, fired) = execute_vliw(&mut stage, &phv, 0, Some(0));
        prop_assert_eq!(out, phv);
        prop_assert!(fired.is_empty());
    }

    #[test]
    fn out_of_window_never_touches_memory(base in 0u8..128, range in 0u8..128, vaddr in 0u16..2048) {
        let mut stage = StageState::new(&Default::default());
        stage.page_table[1] = PageTableEntry::new(base, range).unwrap();
        let r = access_memory(&mut stage, 1, vaddr, MemOp::Store(0xDEAD));
        let touched: Vec<usize> = stage.memory.iter().enumerate().filter(|(_, &w)| w != 0).map(|(i, _)| i).collect();
        if vaddr < range as u16 {
            prop_assert!(r.is_ok());
            prop_assert_eq!(touched, vec![base as usize + vaddr as usize]);
        } else {
            prop_assert!(r.is_err());
            prop_assert!(touched.is_empty());
        }
    }

    #[test]
    fn deparse_without_actions_is_identity(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
        let st = PipelineState::new(1);
        let pkt = RawPacket::new(bytes);
        let (out, _) = deparse(&st, &parse(&st, &pkt, 0), &pkt, 0);
        prop_assert_eq!(out.bytes, pkt.bytes);
    }
}
