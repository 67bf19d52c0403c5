//! Decimal rendering shared by every file writer.

/// Renders `x` with 17 significant digits, which round-trips any `f64`.
/// Moderate magnitudes use positional notation, the rest scientific.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        sci
    }
}

#[cfg(test)]
mod tests {
    use super::sig17;

    #[test]
    fn renders_seventeen_digits() {
        assert_eq!(sig17(1.0), "1.0000000000000000");
        assert_eq!(sig17(-0.5), "-0.50000000000000000");
        assert_eq!(sig17(0.0), "0");
        assert_eq!(sig17(1e-300), "1.0000000000000000e-300");
        assert_eq!(sig17(123.0), "123.00000000000000");
    }

    #[test]
    fn round_trips() {
        for &x in &[0.1, 1.0 / 3.0, std::f64::consts::PI, 2.0f64.sqrt() * 1e-7, 6.02214076e23, -9.999999999999999e-6] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
