//! Output rendering. JSON output is canonical: keys sorted, stable float
//! formatting, one trailing newline — identical inputs always produce
//! identical bytes.

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

/// Serialize any value with lexicographically sorted object keys.
pub fn to_canonical_json<T: serde::Serialize>(value: &T) -> String {
    // serde_json's Value keeps maps in a BTreeMap, so a round-trip through
    // it sorts every object's keys.
    let value = serde_json::to_value(value).expect("serializable");
    let mut body = serde_json::to_string_pretty(&value).expect("serializable");
    body.push('\n');
    body
}

/// Render a two-column key/value table.
pub fn kv_table(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, value) in rows {
        out.push_str(&format!("{key:<width$}  {value}\n"));
    }
    out
}

/// Render an aligned table with a header row.
pub fn grid_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if cell.len() > widths[i] {
                widths[i] = cell.len();
            }
        }
    }
    let mut out = String::new();
    let render = |cells: Vec<String>, widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<width$}", width = widths[i]));
        }
        line.trim_end().to_string()
    };
    out.push_str(&render(header.iter().map(|s| s.to_string()).collect(), &widths));
    out.push('\n');
    for row in rows {
        out.push_str(&render(row.clone(), &widths));
        out.push('\n');
    }
    out
}
