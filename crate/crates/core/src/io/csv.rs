//! Comma-separated tables: `# key: value` metadata lines, a header row, a
//! unit row, then numeric rows. Empty cells are missing values. Numbers are
//! written in shortest round-trip form, so output is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::CurveSeries;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub metadata: BTreeMap<String, String>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Every value of column `k`, failing on gaps.
    pub fn column(&self, k: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[k].ok_or_else(|| Error::config(format!("missing value in column '{}' at data row {}", self.columns[k], i + 1))))
            .collect()
    }
}

fn clean(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

pub fn render_table(t: &Table) -> String {
    let mut s = String::new();
    for (k, v) in &t.metadata {
        let _ = writeln!(s, "# {}: {}", clean(k), clean(v));
    }
    let _ = writeln!(s, "{}", t.columns.join(","));
    let _ = writeln!(s, "{}", t.units.join(","));
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| v.map_or(String::new(), |x| format!("{x}"))).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut t = Table::default();
    let mut lines = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once(':') {
                t.metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        lines.push(line);
    }
    if lines.len() < 2 {
        return Err(Error::config("table needs a header row and a unit row"));
    }
    let split = |l: &str| l.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>();
    t.columns = split(lines[0]);
    t.units = split(lines[1]);
    if t.units.len() != t.columns.len() {
        return Err(Error::config(format!(
            "unit row has {} cells, header has {}",
            t.units.len(),
            t.columns.len()
        )));
    }
    if t.units.iter().any(|u| u.parse::<f64>().is_ok() && u != "1") {
        return Err(Error::config("second row must hold units, found a number"));
    }
    for (i, l) in lines[2..].iter().enumerate() {
        let cells = split(l);
        if cells.len() != t.columns.len() {
            return Err(Error::config(format!(
                "data row {} has {} cells, expected {}",
                i + 1,
                cells.len(),
                t.columns.len()
            )));
        }
        let row = cells
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::config(format!("data row {}: '{c}' is not a number", i + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        t.rows.push(row);
    }
    Ok(t)
}

/// `x,y,sigma` table with the curve's units and metadata plus `extra`.
pub fn render_curve(c: &CurveSeries, extra: &BTreeMap<String, String>) -> String {
    let mut metadata = c.metadata.clone();
    metadata.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    let rows = (0..c.len())
        .map(|i| vec![Some(c.x[i]), Some(c.y[i]), c.sigma.as_ref().map(|s| s[i])])
        .collect();
    render_table(&Table {
        columns: vec!["x".into(), "y".into(), "sigma".into()],
        units: vec![c.x_unit.clone(), c.y_unit.clone(), c.y_unit.clone()],
        rows,
        metadata,
    })
}

/// Parses an `x,y[,sigma]` table. σ must be given for every row or none.
pub fn parse_curve(text: &str) -> Result<CurveSeries> {
    let t = parse_table(text)?;
    let (Some(ix), Some(iy)) = (t.column_index("x"), t.column_index("y")) else {
        return Err(Error::config(format!("curve needs columns x and y, found {:?}", t.columns)));
    };
    let x = t.column(ix)?;
    let y = t.column(iy)?;
    let sigma = match t.column_index("sigma") {
        Some(k) if t.rows.iter().all(|r| r[k].is_none()) => None,
        Some(k) => Some(t.column(k)?),
        None => None,
    };
    let mut c = CurveSeries::new(x, y, sigma, &t.units[ix], &t.units[iy]).map_err(|e| Error::config(e.to_string()))?;
    c.metadata = t.metadata;
    Ok(c)
}

pub fn read_curve(path: &Path) -> Result<CurveSeries> {
    let text = std::fs::read_to_string(path)?;
    parse_curve(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip_is_exact() {
        let c = CurveSeries::new(
            vec![0.1, 1.0 / 3.0, 7.0],
            vec![1.0, 0.5e-17, -2.25],
            Some(vec![0.01, 1e-300, 0.3]),
            "us",
            "1",
        )
        .unwrap()
        .with_meta("b", "2")
        .with_meta("a", "line\nbreak");
        let text = render_curve(&c, &BTreeMap::from([("config_sha256".to_string(), "abc".to_string())]));
        assert!(text.starts_with("# a: line break\n# b: 2\n# config_sha256: abc\nx,y,sigma\nus,1,1\n"));
        let back = parse_curve(&text).unwrap();
        assert_eq!(back.x, c.x);
        assert_eq!(back.y, c.y);
        assert_eq!(back.sigma, c.sigma);
        assert_eq!(back.metadata["config_sha256"], "abc");
        assert_eq!(render_curve(&back, &BTreeMap::new()), text);
    }

    #[test]
    fn missing_sigma() {
        let c = parse_curve("x,y,sigma\nus,1,1\n1,2,\n3,4,\n").unwrap();
        assert!(c.sigma.is_none());
        assert!(parse_curve("x,y,sigma\nus,1,1\n1,2,\n3,4,0.1\n").is_err());
        let c = parse_curve("x,y\nms,1\n1,2\n2,3\n").unwrap();
        assert_eq!(c.x_unit, "ms");
    }

    #[test]
    fn malformed_tables() {
        assert!(parse_curve("x,y\n1,2\n3,4\n").is_err(), "unit row missing");
        assert!(parse_curve("x,y\nus,1\n1,abc\n").is_err());
        assert!(parse_curve("x,y\nus,1\n1\n").is_err());
        assert!(parse_curve("a,b\nus,1\n1,2\n").is_err());
        assert!(parse_curve("x,y\nus,1\n2,1\n1,1\n").is_err(), "decreasing x");
    }
}
