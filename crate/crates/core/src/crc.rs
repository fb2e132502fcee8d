//! CRC-4 with generator x^4 + x + 1.
//!
//! Bits are shifted in MSB-first from a zero register with no final XOR, so
//! the checksum equals the remainder of `message * x^4` modulo the generator.
//! The checksum goes on the wire MSB-first.

/// Generator polynomial x^4 + x + 1 (`0b1_0011`).
pub const POLY: u8 = 0b1_0011;
pub const WIDTH: usize = 4;

/// Serial LFSR as it would sit next to the transmitter's shift registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Crc4 {
    reg: u8,
}

impl Crc4 {
    pub fn new() -> Self {
        Crc4 { reg: 0 }
    }

    pub fn push(&mut self, bit: bool) {
        let feedback = ((self.reg >> 3) & 1 != 0) ^ bit;
        self.reg = (self.reg << 1) & 0x0f;
        if feedback {
            self.reg ^= POLY & 0x0f;
        }
    }

    pub fn value(&self) -> u8 {
        self.reg
    }
}

pub fn crc4_compute(bits: &[bool]) -> u8 {
    let mut lfsr = Crc4::new();
    for &b in bits {
        lfsr.push(b);
    }
    lfsr.value()
}

/// The four checksum bits, MSB first.
pub fn crc4_bits(bits: &[bool]) -> [bool; WIDTH] {
    let c = crc4_compute(bits);
    [c & 8 != 0, c & 4 != 0, c & 2 != 0, c & 1 != 0]
}

/// Pass iff the trailing four bits equal the checksum of everything before them.
///
/// Inputs shorter than the checksum never pass.
pub fn crc4_check(bits_with_checksum: &[bool]) -> bool {
    if bits_with_checksum.len() < WIDTH {
        return false;
    }
    let (payload, sent) = bits_with_checksum.split_at(bits_with_checksum.len() - WIDTH);
    crc4_bits(payload) == sent
}
