//! Random linear network coding over GF(2^8).
//!
//! The field uses the reduction polynomial x^8 + x^4 + x^3 + x + 1 (0x11B);
//! multiplication goes through log/antilog tables built at compile time with
//! generator 0x03. A generation of `G` source payloads of `S` bytes each is
//! encoded into packets carrying their `G` coefficients in the header.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_GENERATION: usize = 16;
pub const DEFAULT_SYMBOLS: usize = 64;

const POLY: u16 = 0x11B;

const fn xtime_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= (POLY & 0xFF) as u8;
        }
        b >>= 1;
    }
    p
}

const fn tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x = 1u8;
    let mut i = 0;
    while i < 255 {
        exp[i] = x;
        exp[i + 255] = x;
        log[x as usize] = i as u8;
        x = xtime_mul(x, 0x03);
        i += 1;
    }
    exp[510] = exp[0];
    exp[511] = exp[1];
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = tables();
const EXP: [u8; 512] = TABLES.0;
const LOG: [u8; 256] = TABLES.1;

/// Element of GF(2^8).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(self) -> Option<Gf256> {
        (self.0 != 0).then(|| Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

// addition in characteristic 2 is xor
impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        field_mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = field_mul(*self, rhs);
    }
}

pub fn field_mul(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(mul(a.0, b.0))
}

#[inline]
fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
    }
}

/// `dst += c * src`, elementwise.
fn axpy(dst: &mut [u8], c: u8, src: &[u8]) {
    if c == 0 {
        return;
    }
    let lc = LOG[c as usize] as usize;
    for (d, &s) in dst.iter_mut().zip(src) {
        if s != 0 {
            *d ^= EXP[lc + LOG[s as usize] as usize];
        }
    }
}

fn scale(row: &mut [u8], c: u8) {
    for x in row.iter_mut() {
        *x = mul(*x, c);
    }
}

/// One coded packet: coefficient header and combined payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedPacket {
    pub coeffs: Vec<u8>,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    pub fn generation_size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn symbols(&self) -> usize {
        self.payload.len()
    }

    /// `[G: u16 BE][S: u16 BE][G coefficient bytes][S payload bytes]`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let g = u16::try_from(self.coeffs.len())
            .map_err(|_| Error::Codec("generation size exceeds u16".into()))?;
        let s = u16::try_from(self.payload.len())
            .map_err(|_| Error::Codec("symbol count exceeds u16".into()))?;
        let mut out = Vec::with_capacity(4 + self.coeffs.len() + self.payload.len());
        out.extend_from_slice(&g.to_be_bytes());
        out.extend_from_slice(&s.to_be_bytes());
        out.extend_from_slice(&self.coeffs);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CodedPacket> {
        if bytes.len() < 4 {
            return Err(Error::Codec("truncated header".into()));
        }
        let g = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let s = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
        if bytes.len() != 4 + g + s {
            return Err(Error::Codec(format!(
                "header announces {} bytes, packet has {}",
                4 + g + s,
                bytes.len()
            )));
        }
        Ok(CodedPacket {
            coeffs: bytes[4..4 + g].to_vec(),
            payload: bytes[4 + g..].to_vec(),
        })
    }
}

fn check_sources(sources: &[Vec<u8>]) -> Result<usize> {
    let first = sources
        .first()
        .ok_or(Error::Codec("empty generation".into()))?;
    if let Some(p) = sources.iter().position(|p| p.len() != first.len()) {
        return Err(Error::Dimension(format!(
            "payload {p} has {} bytes, expected {}",
            sources[p].len(),
            first.len()
        )));
    }
    Ok(first.len())
}

/// Combines `sources` with the given coefficients.
pub fn encode_with(sources: &[Vec<u8>], coeffs: &[u8]) -> Result<CodedPacket> {
    let s = check_sources(sources)?;
    if coeffs.len() != sources.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a generation of {}",
            coeffs.len(),
            sources.len()
        )));
    }
    let mut payload = vec![0u8; s];
    for (&c, src) in coeffs.iter().zip(sources) {
        axpy(&mut payload, c, src);
    }
    Ok(CodedPacket {
        coeffs: coeffs.to_vec(),
        payload,
    })
}

/// Random combination of `sources` with coefficients drawn uniformly from the
/// whole field.
pub fn encode<R: Rng + ?Sized>(sources: &[Vec<u8>], rng: &mut R) -> Result<CodedPacket> {
    check_sources(sources)?;
    let coeffs: Vec<u8> = (0..sources.len()).map(|_| rng.random()).collect();
    encode_with(sources, &coeffs)
}

pub fn encode_seeded(sources: &[Vec<u8>], seed: u64) -> Result<CodedPacket> {
    encode(sources, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn check_packets(packets: &[CodedPacket]) -> Result<(usize, usize)> {
    let Some(first) = packets.first() else {
        return Ok((0, 0));
    };
    let dims = (first.generation_size(), first.symbols());
    for (i, p) in packets.iter().enumerate() {
        if (p.generation_size(), p.symbols()) != dims {
            return Err(Error::Dimension(format!(
                "packet {i} is {}x{}, expected {}x{}",
                p.generation_size(),
                p.symbols(),
                dims.0,
                dims.1
            )));
        }
    }
    Ok(dims)
}

/// Random combination of already coded packets, as a relay would send.
pub fn recode<R: Rng + ?Sized>(packets: &[CodedPacket], rng: &mut R) -> Result<CodedPacket> {
    let weights: Vec<u8> = packets.iter().map(|_| rng.random()).collect();
    recode_with(packets, &weights)
}

pub fn recode_with(packets: &[CodedPacket], weights: &[u8]) -> Result<CodedPacket> {
    let (g, s) = check_packets(packets)?;
    if packets.is_empty() {
        return Err(Error::Codec("nothing to recode".into()));
    }
    if weights.len() != packets.len() {
        return Err(Error::Dimension("one weight per packet".into()));
    }
    let mut out = CodedPacket {
        coeffs: vec![0; g],
        payload: vec![0; s],
    };
    for (&w, p) in weights.iter().zip(packets) {
        axpy(&mut out.coeffs, w, &p.coeffs);
        axpy(&mut out.payload, w, &p.payload);
    }
    Ok(out)
}

/// Incremental Gaussian elimination keeping the received rows in reduced
/// row echelon form.
#[derive(Clone, Debug)]
pub struct Decoder {
    generation: usize,
    symbols: usize,
    /// `pivots[c]` is the row whose leading coefficient sits in column `c`.
    pivots: Vec<Option<usize>>,
    rows: Vec<CodedPacket>,
}

impl Decoder {
    pub fn new(generation: usize, symbols: usize) -> Self {
        Decoder {
            generation,
            symbols,
            pivots: vec![None; generation],
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.generation
    }

    /// Adds a packet; returns whether it raised the rank.
    pub fn push(&mut self, packet: &CodedPacket) -> Result<bool> {
        if packet.generation_size() != self.generation || packet.symbols() != self.symbols {
            return Err(Error::Dimension(format!(
                "packet is {}x{}, decoder expects {}x{}",
                packet.generation_size(),
                packet.symbols(),
                self.generation,
                self.symbols
            )));
        }
        let mut p = packet.clone();
        for c in 0..self.generation {
            if let Some(r) = self.pivots[c] {
                let f = p.coeffs[c];
                if f != 0 {
                    let row = &self.rows[r];
                    axpy(&mut p.coeffs, f, &row.coeffs);
                    axpy(&mut p.payload, f, &row.payload);
                }
            }
        }
        let Some(lead) = p.coeffs.iter().position(|&c| c != 0) else {
            return Ok(false);
        };
        let inv = Gf256(p.coeffs[lead]).inverse().expect("nonzero").0;
        scale(&mut p.coeffs, inv);
        scale(&mut p.payload, inv);
        // clear the new pivot column from the existing rows
        for row in &mut self.rows {
            let f = row.coeffs[lead];
            if f != 0 {
                axpy(&mut row.coeffs, f, &p.coeffs);
                axpy(&mut row.payload, f, &p.payload);
            }
        }
        self.pivots[lead] = Some(self.rows.len());
        self.rows.push(p);
        Ok(true)
    }

    /// Source payloads once the rank is full.
    pub fn payloads(&self) -> Option<Vec<Vec<u8>>> {
        if !self.is_complete() {
            return None;
        }
        Some(
            self.pivots
                .iter()
                .map(|r| self.rows[r.expect("full rank")].payload.clone())
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoded {
    Complete(Vec<Vec<u8>>),
    InsufficientRank(usize),
}

/// Decodes a batch; all packets must share `G` and `S`.
pub fn decode(packets: &[CodedPacket]) -> Result<Decoded> {
    let (g, s) = check_packets(packets)?;
    let mut dec = Decoder::new(g, s);
    for p in packets {
        dec.push(p)?;
    }
    Ok(match dec.payloads() {
        Some(out) if g > 0 => Decoded::Complete(out),
        _ => Decoded::InsufficientRank(dec.rank()),
    })
}

/// Rank of a set of coefficient vectors.
pub fn rank(packets: &[CodedPacket]) -> Result<usize> {
    let (g, s) = check_packets(packets)?;
    let mut dec = Decoder::new(g, s);
    for p in packets {
        dec.push(p)?;
    }
    Ok(dec.rank())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slow_mul(a: u8, b: u8) -> u8 {
        // carry-less product then reduction, bit by bit
        let mut prod: u16 = 0;
        for i in 0..8 {
            if b >> i & 1 == 1 {
                prod ^= (a as u16) << i;
            }
        }
        for i in (8..16).rev() {
            if prod >> i & 1 == 1 {
                prod ^= POLY << (i - 8);
            }
        }
        prod as u8
    }

    #[test]
    fn table_matches_bitwise_product() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(mul(a, b), slow_mul(a, b), "{a} * {b}");
            }
        }
    }

    #[test]
    fn known_inverse_pair() {
        assert_eq!(field_mul(Gf256(0x53), Gf256(0xCA)), Gf256(0x01));
        assert_eq!(Gf256(0x53).inverse(), Some(Gf256(0xCA)));
    }

    #[test]
    fn identity_and_inverses() {
        for a in 0..=255u8 {
            assert_eq!(Gf256(a) * Gf256::ONE, Gf256(a));
            if a != 0 {
                assert_eq!(Gf256(a) * Gf256(a).inverse().unwrap(), Gf256::ONE);
            }
        }
        assert_eq!(Gf256::ZERO.inverse(), None);
    }

    #[test]
    fn single_packet_unit_coefficient() {
        let src = vec![vec![9, 8, 7]];
        let p = encode_with(&src, &[1]).unwrap();
        assert_eq!(p.payload, src[0]);
    }

    #[test]
    fn seeded_encode_matches_hand_combination() {
        let src = vec![vec![0x01, 0x02, 0x53], vec![0x10, 0x00, 0xFF]];
        let p = encode_seeded(&src, 42).unwrap();
        let (a, b) = (p.coeffs[0], p.coeffs[1]);
        let expect: Vec<u8> = (0..3)
            .map(|i| slow_mul(a, src[0][i]) ^ slow_mul(b, src[1][i]))
            .collect();
        assert_eq!(p.payload, expect);
        assert_eq!(encode_seeded(&src, 42).unwrap(), p);
    }

    #[test]
    fn repeated_draws_differ() {
        let src: Vec<Vec<u8>> = (0..16).map(|i| vec![i as u8; 4]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = encode(&src, &mut rng).unwrap();
        let b = encode(&src, &mut rng).unwrap();
        assert_ne!(a.coeffs, b.coeffs);
    }

    #[test]
    fn duplicate_packet_has_rank_one() {
        let src = vec![vec![1, 2], vec![3, 4]];
        let p = encode_seeded(&src, 5).unwrap();
        assert_eq!(
            decode(&[p.clone(), p]).unwrap(),
            Decoded::InsufficientRank(1)
        );
    }

    #[test]
    fn mismatched_payloads_rejected() {
        let src = vec![vec![1, 2], vec![3]];
        assert!(matches!(encode_seeded(&src, 0), Err(Error::Dimension(_))));
        assert!(matches!(encode_seeded(&[], 0), Err(Error::Codec(_))));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let a = CodedPacket {
            coeffs: vec![1, 0],
            payload: vec![0; 3],
        };
        let b = CodedPacket {
            coeffs: vec![1, 0],
            payload: vec![0; 4],
        };
        assert!(matches!(decode(&[a, b]), Err(Error::Dimension(_))));
    }

    #[test]
    fn wire_round_trip() {
        let p = CodedPacket {
            coeffs: vec![0xAB, 0x01],
            payload: vec![1, 2, 3],
        };
        let bytes = p.to_bytes().unwrap();
        assert_eq!(bytes, [0, 2, 0, 3, 0xAB, 0x01, 1, 2, 3]);
        assert_eq!(CodedPacket::from_bytes(&bytes).unwrap(), p);
        assert!(CodedPacket::from_bytes(&bytes[..8]).is_err());
        assert!(CodedPacket::from_bytes(&[0, 1]).is_err());
    }
}
