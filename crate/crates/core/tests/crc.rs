use linkbo_core::crc::{crc4_bits, crc4_check, crc4_compute};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Remainder of `bits * x^4` divided by x^4 + x + 1, by schoolbook long division.
fn long_division(bits: &[bool]) -> u8 {
    let mut dividend: u128 = 0;
    for &b in bits {
        dividend = (dividend << 1) | b as u128;
    }
    dividend <<= 4;
    let gen: u128 = 0b1_0011;
    let mut top = 127 - dividend.leading_zeros().min(127) as i32;
    while dividend >= 16 {
        if dividend >> top & 1 == 1 {
            dividend ^= gen << (top - 4);
        }
        top -= 1;
    }
    dividend as u8
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

fn codeword(body: &[bool]) -> Vec<bool> {
    let mut v = body.to_vec();
    v.extend_from_slice(&crc4_bits(body));
    v
}

#[test]
fn known_remainders() {
    assert_eq!(long_division(&[true]), 0b0011);
    assert_eq!(crc4_compute(&[true]), 0b0011);
    // x^5 mod g = x^2 + x
    assert_eq!(long_division(&[true, false]), 0b0110);
    assert_eq!(crc4_compute(&[true, false]), 0b0110);
}

#[test]
fn single_bit_flips_always_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 15..=66 {
        for _ in 0..4 {
            let cw = codeword(&random_bits(&mut rng, n - 4));
            assert!(crc4_check(&cw));
            for i in 0..n {
                let mut bad = cw.clone();
                bad[i] = !bad[i];
                assert!(!crc4_check(&bad), "n={n} flip at {i}");
            }
        }
    }
}

#[test]
fn bursts_up_to_four_always_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 15..=66 {
        let cw = codeword(&random_bits(&mut rng, n - 4));
        for width in 1..=4usize {
            // every pattern whose first and last bits are set
            let inner = width.saturating_sub(2);
            for mid in 0..(1u32 << inner) {
                let mut pattern = vec![true; width];
                for j in 0..inner {
                    pattern[1 + j] = mid >> j & 1 == 1;
                }
                for start in 0..=n - width {
                    let mut bad = cw.clone();
                    for (j, &p) in pattern.iter().enumerate() {
                        bad[start + j] ^= p;
                    }
                    assert!(!crc4_check(&bad), "n={n} width={width} at {start}");
                }
            }
        }
    }
}

#[test]
fn long_burst_detection_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 100_000;
    let mut detected = 0;
    for _ in 0..trials {
        let n = rng.gen_range(15..=66);
        let width = rng.gen_range(5..=12);
        let cw = codeword(&random_bits(&mut rng, n - 4));
        let start = rng.gen_range(0..=n - width);
        let mut bad = cw;
        bad[start] ^= true;
        bad[start + width - 1] ^= true;
        for j in 1..width - 1 {
            bad[start + j] ^= rng.gen::<bool>();
        }
        if !crc4_check(&bad) {
            detected += 1;
        }
    }
    let rate = detected as f64 / trials as f64;
    assert!((rate - 0.9375).abs() <= 0.015, "detection rate {rate}");
}

proptest! {
    #[test]
    fn lfsr_matches_long_division(bits in prop::collection::vec(any::<bool>(), 0..=70)) {
        prop_assert_eq!(crc4_compute(&bits), long_division(&bits));
    }

    #[test]
    fn crc_is_linear(pair in (1usize..=66).prop_flat_map(|n| (
        prop::collection::vec(any::<bool>(), n),
        prop::collection::vec(any::<bool>(), n),
    ))) {
        let (a, b) = pair;
        let x: Vec<bool> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        prop_assert_eq!(crc4_compute(&x), crc4_compute(&a) ^ crc4_compute(&b));
    }

    #[test]
    fn appended_checksum_passes(bits in prop::collection::vec(any::<bool>(), 0..=62)) {
        prop_assert!(crc4_check(&codeword(&bits)));
    }
}
