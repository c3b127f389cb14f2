use super::protocol::EvaluationReport;

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub values: Option<[f64; 6]>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

impl TableRow {
    pub fn from_report(r: &EvaluationReport) -> Self {
        Self {
            method: r.method.clone(),
            values: Some([r.heads_pct, r.train, r.val, r.test, r.test_1, r.test_2]),
            gap: r.gap,
            error: None,
        }
    }

    pub fn failed(method: &str, error: &str) -> Self {
        Self { method: method.to_string(), values: None, gap: None, error: Some(error.to_string()) }
    }
}

const HEADERS: [&str; 8] = ["Method", "Heads[%]", "Train", "Val", "Test", "Test(1)", "Test(2)", "Gap[%]"];

/// Aligned plain-text table, one row per method.
pub fn format_table(rows: &[TableRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.method.clone()];
            match r.values {
                Some(v) => {
                    line.push(format!("{:.1}", v[0]));
                    line.extend(v[1..].iter().map(|a| format!("{a:.3}")));
                    line.push(r.gap.map_or_else(|| "-".to_string(), |g| format!("{g:.3}")));
                }
                None => line.push(format!("error: {}", r.error.as_deref().unwrap_or("unknown"))),
            }
            line
        })
        .collect();
    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.len()).collect();
    for line in cells.iter().filter(|l| l.len() == HEADERS.len()) {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.len());
        }
    }
    let render = |line: &[String]| -> String {
        let mut out = String::new();
        for (i, c) in line.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(&format!("{c:<w$}", w = widths[0]));
            } else if line.len() == HEADERS.len() {
                out.push_str(&format!("{c:>w$}", w = widths[i]));
            } else {
                out.push_str(c);
            }
        }
        out.trim_end().to_string()
    };
    let header: Vec<String> = HEADERS.iter().map(|h| h.to_string()).collect();
    let mut out = render(&header);
    out.push('\n');
    for line in &cells {
        out.push_str(&render(line));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let rows = vec![
            TableRow { method: "all".into(), values: Some([100.0, 0.9, 0.85, 0.8, 0.75, 0.7]), gap: Some(0.0), error: None },
            TableRow::failed("lasso:1000", "selector kept no heads"),
        ];
        let t = format_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Method"));
        assert!(lines[1].contains("100.0") && lines[1].ends_with("0.000"));
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[2].contains("error: selector kept no heads"));
    }
}
