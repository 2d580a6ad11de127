mod common;

use platoon_core::protocol::*;
use proptest::prelude::*;
use std::path::PathBuf;

fn vectors_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/vectors/messages.bin")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn round_trip(msg in common::message()) {
        let bytes = encode_message(&msg);
        prop_assert_eq!(decode_message(&bytes), Ok(msg));
    }

    #[test]
    fn every_strict_prefix_is_malformed(msg in common::message()) {
        let bytes = encode_message(&msg);
        for n in 0..bytes.len() {
            prop_assert!(decode_message(&bytes[..n]).is_err());
        }
    }

    #[test]
    fn corrupted_frames_never_panic(msg in common::message(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = encode_message(&msg);
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        if let Ok(m) = decode_message(&bytes) {
            prop_assert!(m.validate().is_ok());
        }
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_message(&bytes);
        let _ = decode_stream(&bytes);
    }

    #[test]
    fn streams_split_into_frames(msgs in prop::collection::vec(common::message(), 1..8)) {
        let bytes: Vec<u8> = msgs.iter().flat_map(encode_message).collect();
        prop_assert_eq!(decode_stream(&bytes), Ok(msgs));
    }
}

#[test]
fn invalid_messages_are_rejected_after_decode() {
    let mut msg = common::golden_messages().remove(0);
    if let Payload::Control(c) = &mut msg.payload {
        c.gap_setpoint_thw = 0.5;
    }
    let err = decode_message(&encode_message(&msg)).unwrap_err();
    assert!(matches!(err.0, Malformed::Invalid(_)));
}

#[test]
fn control_frame_header_layout() {
    let bytes = encode_message(&common::golden_messages()[0]);
    assert_eq!(bytes[0], 0x01);
    let body_len = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    assert_eq!(body_len, bytes.len() - 5);
    // two truck endpoints (5 bytes each), sender, seq, five f64 fields
    assert_eq!(body_len, 5 + 5 + 4 + 4 + 5 * 8);
    assert_eq!(&bytes[5..10], &[0, 1, 0, 0, 0]);
    assert_eq!(&bytes[10..15], &[0, 2, 0, 0, 0]);
    assert_eq!(f64::from_le_bytes(bytes[23..31].try_into().unwrap()), 5.0);
}

#[test]
fn golden_vectors() {
    let expected: Vec<u8> = common::golden_messages().iter().flat_map(encode_message).collect();
    let path = vectors_path();
    if std::env::var_os("PLATOON_WRITE_VECTORS").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    let stored = std::fs::read(&path).expect("golden vector file");
    assert_eq!(stored, expected, "encoder output differs from {}", path.display());
    assert_eq!(decode_stream(&stored).unwrap(), common::golden_messages());
}
