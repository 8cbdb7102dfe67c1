use crate::bitio::BitString;

/// Emits the first bit of every discordant pair `(x_{2i}, x_{2i+1})`; an odd
/// trailing bit is dropped.
pub fn von_neumann(s: &BitString) -> BitString {
    let bytes = s.as_bytes();
    let pairs = s.len() / 2;
    let mut out = BitString::with_capacity(pairs / 2);
    for i in 0..pairs {
        let byte = bytes[i / 4];
        let shift = 6 - 2 * (i % 4);
        match (byte >> shift) & 0b11 {
            0b10 => out.push(true),
            0b01 => out.push(false),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::biased_iid_generate;
    use crate::stattests::monobit_p;

    #[test]
    fn examples() {
        let s = BitString::parse_ascii01("0110").unwrap();
        assert_eq!(von_neumann(&s).to_ascii01(), "01");
        assert!(von_neumann(&BitString::from_byte_slice(&[0; 100])).is_empty());
        assert_eq!(
            von_neumann(&BitString::parse_ascii01("10011").unwrap()).to_ascii01(),
            "10"
        );
    }

    #[test]
    fn length_is_discordant_pair_count() {
        let s = biased_iid_generate(0.7, 100_001, 5).unwrap();
        let v = s.to_bit_values();
        let oracle: Vec<u8> = v.chunks_exact(2).filter(|p| p[0] != p[1]).map(|p| p[0]).collect();
        assert_eq!(von_neumann(&s), BitString::from_bit_values(&oracle));
    }

    #[test]
    fn conditional_uniformity_by_enumeration() {
        // P(out = 0 | kept) = p(1−p) / (2p(1−p)) for every bias
        for p in [0.01f64, 0.25, 0.5, 0.75, 0.999] {
            let (p01, p10) = (p * (1.0 - p), (1.0 - p) * p);
            assert_eq!(p01 / (p01 + p10), 0.5);
        }
    }

    #[test]
    fn biased_source_yield_and_balance() {
        let n = 1_000_000;
        let s = biased_iid_generate(0.75, n, 8).unwrap();
        let out = von_neumann(&s);
        // kept pairs ~ Binomial(n/2, 2·0.75·0.25)
        let q = 0.375;
        let mean = n as f64 / 2.0 * q;
        let sd = (n as f64 / 2.0 * q * (1.0 - q)).sqrt();
        assert!((out.len() as f64 - mean).abs() < 4.0 * sd);
        assert!((mean - 187_500.0).abs() < 1e-9);
        let p = monobit_p(&out).unwrap().p.value();
        assert!((0.005..=0.995).contains(&p), "{p}");
    }
}
