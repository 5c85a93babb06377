use hopcast::rlnc::{
    decode, encode, encode_with, rank, recode, CodedPacket, Decoded, Decoder, Gf256,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Carry-less multiply reduced by x^8 + x^4 + x^3 + x + 1.
fn slow_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        let hi = a & 0x80;
        a <<= 1;
        if hi != 0 {
            a ^= 0x1b;
        }
        b >>= 1;
    }
    p
}

fn generation(g: usize, s: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(any::<u8>(), s), g)
}

fn encode_to_full_rank(sources: &[Vec<u8>], seed: u64) -> Vec<CodedPacket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dec = Decoder::new(sources.len(), sources[0].len());
    let mut kept = Vec::new();
    while !dec.is_complete() {
        let p = encode(sources, &mut rng).unwrap();
        if dec.push(&p).unwrap() {
            kept.push(p);
        }
    }
    kept
}

proptest! {
    #[test]
    fn multiplication_matches_shift_and_add(a in any::<u8>(), b in any::<u8>()) {
        prop_assert_eq!((Gf256(a) * Gf256(b)).0, slow_mul(a, b));
    }

    #[test]
    fn field_axioms(a in any::<u8>(), b in any::<u8>(), c in any::<u8>()) {
        let (a, b, c) = (Gf256(a), Gf256(b), Gf256(c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * b, b * a);
        prop_assert_eq!(a + a, Gf256(0));
        match a.inverse() {
            Some(inv) => prop_assert_eq!(a * inv, Gf256(1)),
            None => prop_assert_eq!(a, Gf256(0)),
        }
    }

    #[test]
    fn round_trip_small_generations(
        (sources, seed) in (1usize..=8, 1usize..=24)
            .prop_flat_map(|(g, s)| (generation(g, s), any::<u64>()))
    ) {
        let packets = encode_to_full_rank(&sources, seed);
        prop_assert_eq!(packets.len(), sources.len());
        prop_assert_eq!(decode(&packets).unwrap(), Decoded::Complete(sources));
    }

    #[test]
    fn recoded_packets_stay_in_the_span(
        (sources, seed) in (1usize..=8, 1usize..=16)
            .prop_flat_map(|(g, s)| (generation(g, s), any::<u64>()))
    ) {
        let packets = encode_to_full_rank(&sources, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        // each recoded packet must equal encoding the sources with its own
        // coefficient vector
        let mut recoded = Vec::new();
        for _ in 0..3 * sources.len() {
            let r = recode(&packets, &mut rng).unwrap();
            prop_assert_eq!(&encode_with(&sources, &r.coeffs).unwrap(), &r);
            recoded.push(r);
        }
        if rank(&recoded).unwrap() == sources.len() {
            prop_assert_eq!(decode(&recoded).unwrap(), Decoded::Complete(sources));
        }
    }

    #[test]
    fn rank_deficient_sets_do_not_decode(
        (sources, seed) in (2usize..=8, 1usize..=8)
            .prop_flat_map(|(g, s)| (generation(g, s), any::<u64>()))
    ) {
        let mut packets = encode_to_full_rank(&sources, seed);
        packets.pop();
        let g = sources.len();
        prop_assert_eq!(decode(&packets).unwrap(), Decoded::InsufficientRank(g - 1));
    }

    #[test]
    fn wire_format_round_trip(coeffs in prop::collection::vec(any::<u8>(), 0..40), payload in prop::collection::vec(any::<u8>(), 0..80)) {
        let p = CodedPacket { coeffs, payload };
        let bytes = p.to_bytes().unwrap();
        prop_assert_eq!(bytes.len(), 4 + p.coeffs.len() + p.payload.len());
        prop_assert_eq!(CodedPacket::from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn truncated_wire_packets_rejected(bytes in prop::collection::vec(any::<u8>(), 4..40), cut in 1usize..4) {
        let p = CodedPacket { coeffs: bytes[..2].to_vec(), payload: bytes[2..].to_vec() };
        let wire = p.to_bytes().unwrap();
        prop_assert!(CodedPacket::from_bytes(&wire[..wire.len() - cut]).is_err());
    }
}

#[test]
fn systematic_packets_decode_in_any_order() {
    let sources: Vec<Vec<u8>> = (0..5u8)
        .map(|i| vec![i, i.wrapping_mul(37), 200 - i])
        .collect();
    let mut packets: Vec<CodedPacket> = (0..5)
        .map(|i| {
            let mut c = vec![0u8; 5];
            c[i] = 1;
            encode_with(&sources, &c).unwrap()
        })
        .collect();
    packets.reverse();
    assert_eq!(decode(&packets).unwrap(), Decoded::Complete(sources));
}
