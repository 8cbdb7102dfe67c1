use super::{chi2_upper, require_bits, TestError, TestOutcome};
use crate::bitio::BitString;

/// `ψ²_m = (2^m / n) Σ ν_i² − n` over overlapping, wrapped `m`-bit patterns.
fn psi_sq(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut word = 0usize;
    for &b in &bits[..m - 1] {
        word = (word << 1) | b as usize;
    }
    for i in 0..n {
        word = ((word << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[word] += 1;
    }
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    (1u64 << m) as f64 / n as f64 * sum_sq - n as f64
}

/// Serial test on overlapping `m`-bit patterns using the first difference
/// `∇ψ²_m = ψ²_m − ψ²_{m−1}`, chi-square with `2^{m−1}` degrees of freedom.
pub fn serial_p(s: &BitString, m: usize) -> Result<TestOutcome, TestError> {
    if !(2..=20).contains(&m) {
        return Err(TestError::BadParameter {
            test: "serial",
            reason: format!("pattern length {m} not in 2..=20"),
        });
    }
    // keep m below log2(n) − 2
    let needed = 1000usize.max(1 << (m + 3));
    require_bits("serial", needed, s.len())?;
    let bits = s.to_bit_values();
    let del = psi_sq(&bits, m) - psi_sq(&bits, m - 1);
    let dof = (1u64 << (m - 1)) as f64;
    let name = if m == 2 {
        "serial-2".to_string()
    } else {
        format!("serial-{m}")
    };
    TestOutcome::new(name, del, chi2_upper(del, dof))
}

/// Serial test on overlapping 2-bit patterns.
pub fn serial2_p(s: &BitString) -> Result<TestOutcome, TestError> {
    serial_p(s, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::uniform_generate;

    #[test]
    fn reference_example_psi_values() {
        // SP800-22 2.11.8: ε = 0011011101, m = 3 → ψ²_3 = 2.8, ψ²_2 = 1.2, ψ²_1 = 0.4
        let bits = [0u8, 0, 1, 1, 0, 1, 1, 1, 0, 1];
        assert!((psi_sq(&bits, 3) - 2.8).abs() < 1e-12);
        assert!((psi_sq(&bits, 2) - 1.2).abs() < 1e-12);
        assert!((psi_sq(&bits, 1) - 0.4).abs() < 1e-12);
        // ∇ψ² = 1.6 → p = igamc(2, 0.8) = 0.808792
        assert!((chi2_upper(1.6, 4.0) - 0.808_792).abs() < 1e-6);
    }

    #[test]
    fn periodic_stream_fails() {
        let s: BitString = (0..10_000).map(|i| i % 2 == 1).collect();
        let o = serial2_p(&s).unwrap();
        assert_eq!(o.statistic, 10_000.0);
        assert!(o.p.value() < 1e-100);
    }

    #[test]
    fn all_zeros_fails() {
        let s = BitString::from_bytes(vec![0; 1250], 10_000);
        assert!(serial2_p(&s).unwrap().p.value() < 1e-100);
    }

    #[test]
    fn uniform_passes() {
        let u = uniform_generate(1_000_000, 77);
        for m in [2, 8] {
            let p = serial_p(&u, m).unwrap().p.value();
            assert!((0.005..=0.995).contains(&p), "m={m}: {p}");
        }
    }

    #[test]
    fn size_checks() {
        let s = uniform_generate(999, 1);
        assert!(serial2_p(&s).unwrap_err().is_skip());
        assert!(serial_p(&uniform_generate(2000, 1), 8).unwrap_err().is_skip());
        assert!(matches!(serial_p(&s, 1), Err(TestError::BadParameter { .. })));
    }
}
