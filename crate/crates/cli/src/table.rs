//! Plain-text tables rendered from records alone.

use serde_json::Value;

fn text(v: &Value, key: &str) -> String {
    match v.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    }
}

/// One row per record: experiment id, kind, status, headline.
pub fn render(records: &[Value]) -> String {
    let rows: Vec<[String; 4]> = records
        .iter()
        .map(|r| [text(r, "experiment"), text(r, "kind"), text(r, "status"), text(r, "headline")])
        .collect();
    render_rows(["experiment", "kind", "status", "result"], &rows)
}

pub fn render_rows<const N: usize>(header: [&str; N], rows: &[[String; N]]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i + 1 == N { c.to_string() } else { format!("{c:<w$}") })
            .collect();
        padded.join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
