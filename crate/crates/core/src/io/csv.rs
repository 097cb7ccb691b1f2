use std::fs;
use std::io;
use std::path::Path;

/// Numbers with 17 significant digits, comma separated.
pub fn format_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Write a header row and one numeric row per entry; a leading label column is
/// included when `labels` is given.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    labels: Option<&[String]>,
    rows: &[Vec<f64>],
) -> io::Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if let Some(l) = labels {
            out.push_str(&l[i]);
            out.push(',');
        }
        out.push_str(&format_row(row));
        out.push('\n');
    }
    fs::write(path, out)
}
