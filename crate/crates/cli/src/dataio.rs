//! Dataset CSV format.
//!
//! Data files have header `y,x1,...,xp` and one row per observation; truth
//! files have header `beta_star` and one row per coefficient. All values are
//! decimal text with `.` radix and no thousands separators; floats are
//! written in shortest round-trip form so save/load is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use decouple_core::linalg::Mat;
use decouple_core::Dataset;

use crate::{CliError, CliResult};

fn parse_cell(raw: &str, row: usize, col_name: &str) -> CliResult<f64> {
    let trimmed = raw.trim();
    trimmed.parse::<f64>().map_err(|_| {
        CliError::Io(format!(
            "parse error at row {row}, column {col_name}: {trimmed:?} is not a number"
        ))
    })
}

/// Load `y,x1..xp` data and, optionally, a `beta_star` truth file.
pub fn load_csv(path: &Path, truth_path: Option<&Path>) -> CliResult<Dataset> {
    let file = File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(CliError::Io(format!("{}: empty file", path.display()))),
    };
    let cols: Vec<&str> = header.trim_end().split(',').map(|c| c.trim()).collect();
    if cols.first() != Some(&"y") {
        return Err(CliError::Io(format!(
            "{}: first header column must be `y`, found {:?}",
            path.display(),
            cols.first().unwrap_or(&"")
        )));
    }
    let p = cols.len() - 1;
    for (j, c) in cols.iter().skip(1).enumerate() {
        let expect = format!("x{}", j + 1);
        if *c != expect {
            return Err(CliError::Io(format!(
                "{}: header column {} must be `{expect}`, found {c:?}",
                path.display(),
                j + 2
            )));
        }
    }
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row_no = i + 1; // 1-based data row
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != p + 1 {
            return Err(CliError::Io(format!(
                "{}: ragged row {row_no}: expected {} cells, found {}",
                path.display(),
                p + 1,
                cells.len()
            )));
        }
        y.push(parse_cell(cells[0], row_no, "y")?);
        let mut row = Vec::with_capacity(p);
        for (j, cell) in cells.iter().skip(1).enumerate() {
            row.push(parse_cell(cell, row_no, &format!("x{}", j + 1))?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Io(format!("{}: no data rows", path.display())));
    }
    let n = rows.len();
    let mut x = Mat::zeros(n, p);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let truth = match truth_path {
        None => None,
        Some(tp) => Some(load_truth(tp, p)?),
    };
    Dataset::new(y, x, truth).map_err(|e| CliError::Validation(e.to_string()))
}

/// Load a `beta_star` coefficient file.
pub fn load_truth(path: &Path, expect_p: usize) -> CliResult<Vec<f64>> {
    let file = File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(h) => {
            let h = h?;
            if h.trim() != "beta_star" {
                return Err(CliError::Io(format!(
                    "{}: truth header must be `beta_star`, found {:?}",
                    path.display(),
                    h.trim()
                )));
            }
        }
        None => return Err(CliError::Io(format!("{}: empty file", path.display()))),
    }
    let mut truth = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        truth.push(parse_cell(&line, i + 1, "beta_star")?);
    }
    if truth.len() != expect_p {
        return Err(CliError::Validation(format!(
            "{}: truth has {} entries but design has {} columns",
            path.display(),
            truth.len(),
            expect_p
        )));
    }
    Ok(truth)
}

pub fn save_csv(ds: &Dataset, path: &Path) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let p = ds.p();
    write!(w, "y")?;
    for j in 1..=p {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    for i in 0..ds.n() {
        write!(w, "{}", ds.y[i])?;
        for j in 0..p {
            write!(w, ",{}", ds.x[(i, j)])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_truth(truth: &[f64], path: &Path) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "beta_star")?;
    for v in truth {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use decouple_core::data::{generate_synthetic, SimConfig};

    #[test]
    fn round_trip_reproduces_values_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(SimConfig {
            n: 5,
            p: 3,
            k: 1,
            s_star: 2.0,
            rho: 0.2,
            seed: 9,
        })
        .unwrap();
        let data = dir.path().join("data.csv");
        let truth = dir.path().join("truth.csv");
        save_csv(&ds, &data).unwrap();
        save_truth(ds.truth.as_ref().unwrap(), &truth).unwrap();
        let back = load_csv(&data, Some(&truth)).unwrap();
        assert_eq!(back.y, ds.y);
        assert_eq!(back.x, ds.x);
        assert_eq!(back.truth, ds.truth);
    }

    #[test]
    fn string_cell_cites_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "y,x1,x2").unwrap();
        writeln!(f, "1.0,2.0,3.0").unwrap();
        writeln!(f, "1.5,0.5,-1.0").unwrap();
        writeln!(f, "0.25,1.25,2.25").unwrap();
        writeln!(f, "2.0,oops,1.0").unwrap();
        drop(f);
        let err = load_csv(&p, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 4"), "message: {msg}");
        assert!(msg.contains("x1"), "message: {msg}");
    }

    #[test]
    fn ragged_row_is_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ragged.csv");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "y,x1,x2").unwrap();
        writeln!(f, "1.0,2.0,3.0").unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        drop(f);
        let err = load_csv(&p, None).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn missing_y_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("noy.csv");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "resp,x1").unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        drop(f);
        let err = load_csv(&p, None).unwrap_err();
        assert!(err.to_string().contains("`y`"), "{err}");
    }

    #[test]
    fn wide_table_shape() {
        // n = 120, p = 600 loads with the right dimensions.
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(SimConfig {
            n: 120,
            p: 600,
            k: 5,
            s_star: 1.0,
            rho: 0.0,
            seed: 77,
        })
        .unwrap();
        let path = dir.path().join("wide.csv");
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path, None).unwrap();
        assert_eq!(back.n(), 120);
        assert_eq!(back.p(), 600);
    }
}
