//! Output helpers: complex numbers as `re+imi` with 12 significant digits,
//! CSV and aligned tables.

use expint::Complex64;

const DIGITS: usize = 12;

/// `%g`-style rendering of a real with [`DIGITS`] significant digits.
pub fn real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS as i32).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn complex(z: Complex64) -> String {
    let im = real(z.im.abs());
    let sign = if z.im < 0.0 && im != "0" { '-' } else { '+' };
    format!("{}{}{}i", real(z.re), sign, im)
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(header.to_vec())];
    for row in rows {
        out.push(line(row.iter().map(String::as_str).collect()));
    }
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(real(0.5), "0.5");
        assert_eq!(real(1.0), "1");
        assert_eq!(real(-0.0), "0");
        assert_eq!(real(std::f64::consts::PI), "3.14159265359");
        assert_eq!(real(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
        assert_eq!(real(123456789012345.0), "1.23456789012e14");
        assert_eq!(complex(Complex64::new(0.5, 3f64.sqrt() / 2.0)), "0.5+0.866025403784i");
        assert_eq!(complex(Complex64::new(1.0, -2.0)), "1-2i");
        assert_eq!(complex(Complex64::new(1.0, -1e-300)), "1-1e-300i");
    }

    #[test]
    fn csv_quotes_commas() {
        assert_eq!(csv_row(&["a,b".into(), "c".into()]), "\"a,b\",c");
    }

    #[test]
    fn table_aligns() {
        let t = table(&["x", "value"], &[vec!["long".into(), "1".into()]]);
        assert_eq!(t, "x     value\nlong  1");
    }
}
