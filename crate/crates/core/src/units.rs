//! Physical constants and unit-suffixed quantity parsing for config files.

use crate::error::{Error, Result};

/// Reduced flux quantum hbar/2e in Wb (CODATA 2018, exact SI definitions).
pub const PHI0: f64 = 1.054_571_817e-34 / (2.0 * 1.602_176_634e-19);

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parses strings like `"84 pH"`, `"1.57uA"`, `"12.92 GHz"` into SI values.
///
/// `dimension` is the SI base symbol expected after the prefix (`"H"`, `"F"`,
/// `"A"`, `"Hz"`, `"Ohm"`, `"s"`, `"V"`, `"rad"`). A bare number is accepted as
/// already being in SI units.
pub fn parse_quantity(text: &str, dimension: &str) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse number in {text:?}")))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let aliases: &[&str] = match dimension {
        "Ohm" => &["Ohm", "ohm", "Ω"],
        "H" => &["H"],
        "F" => &["F"],
        "A" => &["A"],
        "Hz" => &["Hz"],
        "s" => &["s"],
        "V" => &["V"],
        "rad" => &["rad"],
        other => return Err(Error::Config(format!("unsupported dimension {other:?}"))),
    };
    for base in aliases {
        if let Some(prefix) = unit.strip_suffix(base) {
            let scale = match prefix {
                "" => 1.0,
                "f" => 1e-15,
                "p" => 1e-12,
                "n" => 1e-9,
                "u" | "µ" => 1e-6,
                "m" => 1e-3,
                "k" => 1e3,
                "M" => 1e6,
                "G" => 1e9,
                "T" => 1e12,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown SI prefix {prefix:?} in {text:?}"
                    )))
                }
            };
            return Ok(value * scale);
        }
    }
    Err(Error::Config(format!(
        "expected a quantity in {dimension}, got {text:?}"
    )))
}

/// Formats an SI value with an engineering prefix, the inverse of [`parse_quantity`].
pub fn format_quantity(value: f64, dimension: &str) -> String {
    const PREFIXES: [(f64, &str); 10] = [
        (1e12, "T"),
        (1e9, "G"),
        (1e6, "M"),
        (1e3, "k"),
        (1.0, ""),
        (1e-3, "m"),
        (1e-6, "u"),
        (1e-9, "n"),
        (1e-12, "p"),
        (1e-15, "f"),
    ];
    if value == 0.0 || !value.is_finite() {
        return format!("{value} {dimension}");
    }
    let magnitude = value.abs();
    let (scale, prefix) = PREFIXES
        .iter()
        .find(|(s, _)| magnitude >= *s * 0.999_999_999)
        .copied()
        .unwrap_or((1e-15, "f"));
    format!("{} {prefix}{dimension}", value / scale)
}

/// Power in dBm from watts.
pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p.abs() / 1e-3).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi0_value() {
        assert!((PHI0 - 3.291_059_783e-16).abs() < 1e-25);
    }

    #[test]
    fn parses_prefixed_quantities() {
        assert!((parse_quantity("84 pH", "H").unwrap() - 84e-12).abs() < 1e-24);
        assert!((parse_quantity("1.57uA", "A").unwrap() - 1.57e-6).abs() < 1e-18);
        assert!((parse_quantity("12.92 GHz", "Hz").unwrap() - 12.92e9).abs() < 1e-3);
        assert!((parse_quantity("50 Ohm", "Ohm").unwrap() - 50.0).abs() < 1e-12);
        assert!((parse_quantity("16.5 mV", "V").unwrap() - 16.5e-3).abs() < 1e-15);
        assert_eq!(parse_quantity("3", "Hz").unwrap(), 3.0);
        assert!(parse_quantity("84 pF", "H").is_err());
        assert!(parse_quantity("84 xH", "H").is_err());
    }

    #[test]
    fn format_roundtrip() {
        for (v, d) in [(84e-12, "H"), (8.8e-15, "F"), (12.92e9, "Hz"), (50.0, "Ohm")] {
            let back = parse_quantity(&format_quantity(v, d), d).unwrap();
            assert!((back - v).abs() <= 1e-12 * v.abs(), "{v} {d}");
        }
    }
}
