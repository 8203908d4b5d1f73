// SPDX-License-Identifier: Apache-2.0

//! Entry encodings checked against vectors from an independent encoder
//! (`tests/golden/gen.py`).

use rmtiso_core::config::{
    build_reconfig_packet, parse_reconfig_packet, AluAction, AluOpcode, CamEntry, CmpOp, ConfigEntry, Key,
    KeyExtractorEntry, KeyOperand, KeySlot, PageTableEntry, ParseAction, ParserEntry, RegistryEntry, ResourceType,
    VliwEntry, PREDICATE_BIT,
};
use rmtiso_core::phv::{ContainerKind, ContainerRef};
use rmtiso_core::RawPacket;
use serde_json::Value;

fn vectors() -> Value {
    serde_json::from_str(include_str!("golden/vectors.json")).unwrap()
}

fn kind(v: &Value) -> ContainerKind {
    match v.as_str().unwrap() {
        "2B" => ContainerKind::TwoByte,
        "4B" => ContainerKind::FourByte,
        "6B" => ContainerKind::SixByte,
        k => panic!("{k}"),
    }
}

fn num(v: &Value) -> u64 {
    v.as_u64().unwrap()
}

fn cases<'a>(all: &'a Value, name: &str) -> &'a Vec<Value> {
    all[name].as_array().unwrap()
}

fn assert_codec(t: ResourceType, e: ConfigEntry, hex: &Value) {
    let bytes = hex::decode(hex.as_str().unwrap()).unwrap();
    assert_eq!(hex::encode(e.encode()), hex.as_str().unwrap(), "{t:?} {e:?}");
    assert_eq!(ConfigEntry::decode(t, &bytes).unwrap(), e);
}

#[test]
fn parser_entries() {
    let all = vectors();
    for c in cases(&all, "parser") {
        let acts: Vec<ParseAction> = c["actions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| ParseAction::new(num(&a[0]) as u8, ContainerRef::new(kind(&a[1]), num(&a[2]) as u8)))
            .collect();
        let e = ParserEntry::from_actions(&acts);
        assert_codec(ResourceType::Parser, ConfigEntry::Parser(e), &c["hex"]);
        assert_codec(ResourceType::Deparser, ConfigEntry::Deparser(e), &c["hex"]);
    }
}

fn operand(v: &Value) -> KeyOperand {
    match v.get("imm") {
        Some(i) => KeyOperand::Imm(num(i) as u8),
        None => KeyOperand::Container(ContainerRef::new(kind(&v["c"][0]), num(&v["c"][1]) as u8)),
    }
}

#[test]
fn key_extractor_entries() {
    let all = vectors();
    let cmps = ["false", "eq", "ne", "gt", "ge", "lt", "le", "true"];
    for c in cases(&all, "key_extractor") {
        let mut selectors = [0u8; 6];
        for (s, v) in selectors.iter_mut().zip(c["selectors"].as_array().unwrap()) {
            *s = num(v) as u8;
        }
        let code = cmps.iter().position(|x| *x == c["cmp"].as_str().unwrap()).unwrap();
        let e = KeyExtractorEntry {
            selectors,
            cmp: CmpOp::from_code(code as u8).unwrap(),
            operand_a: operand(&c["a"]),
            operand_b: operand(&c["b"]),
        };
        assert_codec(ResourceType::KeyExtractor, ConfigEntry::KeyExtractor(e), &c["hex"]);
    }
}

#[test]
fn cam_entries() {
    let all = vectors();
    for c in cases(&all, "cam") {
        let mut key = Key::ZERO;
        for (name, v) in c["slots"].as_object().unwrap() {
            let slot = KeySlot::ALL.into_iter().find(|s| format!("{s:?}") == *name).unwrap();
            key.set_slot(slot, num(v));
        }
        key.set_bit(PREDICATE_BIT, c["predicate"].as_bool().unwrap());
        let e = CamEntry::new(num(&c["vid"]) as u16, key);
        assert_codec(ResourceType::Cam, ConfigEntry::Cam(e), &c["hex"]);
    }
}

#[test]
fn vliw_entries() {
    let all = vectors();
    let ops = ["nop", "add", "sub", "addi", "subi", "set", "load", "store", "loadd", "port", "discard"];
    for c in cases(&all, "vliw") {
        let mut e = VliwEntry::default();
        for a in c["actions"].as_array().unwrap() {
            let op = ops.iter().position(|x| *x == a[1].as_str().unwrap()).unwrap();
            e.actions[num(&a[0]) as usize] = AluAction::new(
                AluOpcode::from_code(op as u8).unwrap(),
                num(&a[2]) as u8,
                num(&a[3]) as u8,
                num(&a[4]) as u16,
            );
        }
        assert_codec(ResourceType::Vliw, ConfigEntry::Vliw(e), &c["hex"]);
    }
}

#[test]
fn page_and_registry_entries() {
    let all = vectors();
    for c in cases(&all, "page") {
        let e = PageTableEntry::new(num(&c["base"]) as u8, num(&c["range"]) as u8).unwrap();
        assert_codec(ResourceType::PageTable, ConfigEntry::PageTable(e), &c["hex"]);
    }
    for c in cases(&all, "registry") {
        let e = RegistryEntry::bind(num(&c["vid"]) as u16);
        assert_codec(ResourceType::Registry, ConfigEntry::Registry(e), &c["hex"]);
    }
}

#[test]
fn reconfig_frames() {
    let all = vectors();
    for c in cases(&all, "frames") {
        let id = (num(&c["stage"]) << 8 | num(&c["rtype"])) as u16;
        let entry = hex::decode(c["entry_hex"].as_str().unwrap()).unwrap();
        let pkt = build_reconfig_packet(num(&c["cookie"]) as u32, id, num(&c["index"]) as u8, &entry).unwrap();
        assert_eq!(hex::encode(&pkt.bytes), c["hex"].as_str().unwrap());
    }
}

#[test]
fn frame_files_round_trip() {
    let all = vectors();
    for c in cases(&all, "frames") {
        let name = c["file"].as_str().unwrap();
        let path = format!("{}/tests/golden/frames/{name}.hex", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap();
        let raw = RawPacket::from_hex(&text).unwrap();
        let pkt = parse_reconfig_packet(&raw).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(pkt.cookie as u64, num(&c["cookie"]), "{name}");
        assert_eq!(pkt.write.index as u64, num(&c["index"]), "{name}");
        assert_eq!(hex::encode(pkt.write.entry.encode()), c["entry_hex"].as_str().unwrap(), "{name}");
        assert_eq!(pkt.to_raw().bytes, raw.bytes, "{name}");
    }
}
