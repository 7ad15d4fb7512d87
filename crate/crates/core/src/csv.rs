//! Minimal CSV emission with round-trip float formatting.

use std::io::{self, Write};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes a header and rows of floats.
pub fn write_table<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parses a float table produced by [`write_table`], returning header and rows.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| "empty table".to_string())?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("row {}: {e}", k + 1))?;
        if row.len() != header.len() {
            return Err(format!(
                "row {}: expected {} columns, found {}",
                k + 1,
                header.len(),
                row.len()
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI * 8.0, 1e-300, -0.1, 0.0, 123456789.123] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn table_round_trip() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["a", "b"], &[vec![1.0, 2.5], vec![-3.0, 1e-9]]).unwrap();
        let (h, rows) = read_table(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[1], vec![-3.0, 1e-9]);
    }
}
