//! Round-trip and framing properties of both wire forms.

mod common;

use common::population;
use ebbflow_consensus::codec::{decode, decode_text, encode, encode_text, message_digest, CodecError};
use proptest::prelude::*;

proptest! {
    /// Binary encoding round-trips and consumes exactly its own frame.
    #[test]
    fn binary_round_trip(msgs in population(6, 10)) {
        for m in &msgs {
            let enc = encode(m);
            let (dec, used) = decode(&enc).unwrap();
            prop_assert_eq!(used, enc.len());
            prop_assert_eq!(&dec, m);
        }
    }

    /// Concatenated frames decode back in order.
    #[test]
    fn binary_stream_round_trip(msgs in population(5, 8)) {
        let mut stream = Vec::new();
        for m in &msgs {
            stream.extend_from_slice(&encode(m));
        }
        let mut out = Vec::new();
        let mut rest: &[u8] = &stream;
        while !rest.is_empty() {
            let (m, used) = decode(rest).unwrap();
            out.push(m);
            rest = &rest[used..];
        }
        prop_assert_eq!(out, msgs);
    }

    /// Text encoding is one line per message and round-trips.
    #[test]
    fn text_round_trip(msgs in population(6, 10)) {
        for m in &msgs {
            let line = encode_text(m);
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(&decode_text(&line).unwrap(), m);
        }
    }

    /// Every strict prefix of a frame fails as truncated, never panics.
    #[test]
    fn truncation_is_detected(msgs in population(4, 6)) {
        for m in &msgs {
            let enc = encode(m);
            for cut in 0..enc.len() {
                prop_assert!(matches!(decode(&enc[..cut]), Err(CodecError::Truncated)));
            }
        }
    }

    /// The digest separates distinct messages and is stable per message.
    #[test]
    fn digest_is_stable_and_separating(msgs in population(6, 10)) {
        for (i, a) in msgs.iter().enumerate() {
            prop_assert_eq!(message_digest(a), message_digest(a));
            for b in msgs.iter().skip(i + 1) {
                if a != b {
                    prop_assert_ne!(message_digest(a), message_digest(b));
                }
            }
        }
    }
}
