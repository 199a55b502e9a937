//! Field file formats.
//!
//! `column-text`: self-describing single file.
//!   line 1: `DSAFIELD v1`
//!   line 2: `<n_comp> <n_time> <n_lat> <n_lon>`
//!   line 3: lat values, line 4: lon values, line 5: timestamps
//!   then one value per line in (comp, time, lat, lon) lexicographic order.
//!   Missing values are the sentinel -9999.0.
//!
//! `csv-grid`: one file per time step; header row = lon values, first column
//! of each following row = lat value. A directory of `.csv` files (sorted by
//! name) is read as consecutive time steps; a single file is one step.
//!
//! Values are written with the shortest round-tripping decimal form, so a
//! write/read cycle is bit-identical.

use super::{Grid, SpatioTemporalField, TimeAxis};
use crate::error::{Error, Result};
use ndarray::Array4;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const MISSING_SENTINEL: f64 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    ColumnText,
    CsvGrid,
}

impl std::str::FromStr for FieldFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column-text" => Ok(FieldFormat::ColumnText),
            "csv-grid" => Ok(FieldFormat::CsvGrid),
            other => Err(Error::Config(format!("unknown field format `{other}`"))),
        }
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a real number, got `{tok}`"),
    })
}

fn parse_row(line_str: &str, line: usize) -> Result<Vec<f64>> {
    line_str
        .split_whitespace()
        .map(|t| parse_f64(t, line))
        .collect()
}

pub fn read_field(path: &Path, format: FieldFormat) -> Result<SpatioTemporalField> {
    match format {
        FieldFormat::ColumnText => read_column_text(path),
        FieldFormat::CsvGrid => read_csv_grid(path),
    }
}

fn read_column_text(path: &Path) -> Result<SpatioTemporalField> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(s))) => Ok((i + 1, s)),
            Some((i, Err(e))) => Err(Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            }),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {expect}"),
            }),
        }
    };

    let (ln, magic) = next_line("header")?;
    if magic.trim() != "DSAFIELD v1" {
        return Err(Error::Parse {
            line: ln,
            msg: format!("bad magic `{}`, expected `DSAFIELD v1`", magic.trim()),
        });
    }
    let (ln, dims) = next_line("dimensions")?;
    let d = parse_row(&dims, ln)?;
    if d.len() != 4 || d.iter().any(|&x| x < 1.0 || x.fract() != 0.0) {
        return Err(Error::Parse {
            line: ln,
            msg: "dimension line must hold 4 positive integers".into(),
        });
    }
    let (nc, nt, ny, nx) = (d[0] as usize, d[1] as usize, d[2] as usize, d[3] as usize);

    let (ln, lat_line) = next_line("lat values")?;
    let lat = parse_row(&lat_line, ln)?;
    let (ln2, lon_line) = next_line("lon values")?;
    let lon = parse_row(&lon_line, ln2)?;
    let (ln3, ts_line) = next_line("timestamps")?;
    let ts = parse_row(&ts_line, ln3)?;
    if lat.len() != ny || lon.len() != nx || ts.len() != nt {
        return Err(Error::Parse {
            line: ln3,
            msg: format!(
                "axis lengths ({},{},{}) disagree with header ({},{},{})",
                lat.len(),
                lon.len(),
                ts.len(),
                ny,
                nx,
                nt
            ),
        });
    }
    let grid = Grid::new(lat, lon)?;
    let time = TimeAxis::new(ts)?;

    let mut values = Array4::zeros((nc, nt, ny, nx));
    let mut mask = Array4::from_elem((nc, nt, ny, nx), false);
    for c in 0..nc {
        for t in 0..nt {
            for i in 0..ny {
                for j in 0..nx {
                    let (ln, row) = next_line("value row")?;
                    let v = parse_f64(row.trim(), ln)?;
                    if v == MISSING_SENTINEL {
                        mask[(c, t, i, j)] = true;
                    } else {
                        values[(c, t, i, j)] = v;
                    }
                }
            }
        }
    }
    SpatioTemporalField::new(grid, time, values, mask)
}

fn read_csv_grid(path: &Path) -> Result<SpatioTemporalField> {
    let files: Vec<std::path::PathBuf> = if path.is_dir() {
        let mut v: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no .csv files under {}", path.display()),
        });
    }

    let mut lat: Option<Vec<f64>> = None;
    let mut lon: Option<Vec<f64>> = None;
    let mut steps: Vec<Vec<Vec<f64>>> = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| Error::io(f.display().to_string(), e))?;
        let mut rows = text.lines().enumerate();
        let (hln, header) = rows.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty csv-grid file".into(),
        })?;
        let head: Vec<f64> = header
            .split(',')
            .skip(1)
            .map(|t| parse_f64(t.trim(), hln + 1))
            .collect::<Result<_>>()?;
        let mut lats = Vec::new();
        let mut grid_rows = Vec::new();
        for (i, row) in rows {
            if row.trim().is_empty() {
                continue;
            }
            let mut toks = row.split(',');
            let lat_v = parse_f64(toks.next().unwrap_or("").trim(), i + 1)?;
            let vals: Vec<f64> = toks.map(|t| parse_f64(t.trim(), i + 1)).collect::<Result<_>>()?;
            if vals.len() != head.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("row has {} values, header has {}", vals.len(), head.len()),
                });
            }
            lats.push(lat_v);
            grid_rows.push(vals);
        }
        match (&lat, &lon) {
            (None, None) => {
                lat = Some(lats);
                lon = Some(head);
            }
            (Some(la), Some(lo)) => {
                if *la != lats || *lo != head {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("inconsistent grid in {}", f.display()),
                    });
                }
            }
            _ => unreachable!(),
        }
        steps.push(grid_rows);
    }
    let lat = lat.unwrap();
    let lon = lon.unwrap();
    let (ny, nx, nt) = (lat.len(), lon.len(), steps.len());
    let grid = Grid::new(lat, lon)?;
    let time = TimeAxis::regular(0.0, 1.0, nt)?;
    let mut values = Array4::zeros((1, nt, ny, nx));
    let mut mask = Array4::from_elem((1, nt, ny, nx), false);
    for t in 0..nt {
        let src = &steps[t];
        for i in 0..ny {
            for j in 0..nx {
                let v = src[i][j];
                if v == MISSING_SENTINEL {
                    mask[(0, t, i, j)] = true;
                } else {
                    values[(0, t, i, j)] = v;
                }
            }
        }
    }
    SpatioTemporalField::new(grid, time, values, mask)
}

/// Shortest decimal form that parses back to the identical f64.
fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

pub fn write_field(field: &SpatioTemporalField, path: &Path, format: FieldFormat) -> Result<()> {
    match format {
        FieldFormat::ColumnText => write_column_text(field, path),
        FieldFormat::CsvGrid => write_csv_grid(field, path),
    }
}

/// Atomic write: temp file in the same directory, then rename.
pub(crate) fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        f.write_all(content.as_bytes())
            .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_column_text(field: &SpatioTemporalField, path: &Path) -> Result<()> {
    let (nc, nt, ny, nx) = field.values().dim();
    let mut out = String::new();
    out.push_str("DSAFIELD v1\n");
    let _ = writeln!(out, "{nc} {nt} {ny} {nx}");
    let join = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "{}", join(field.grid.lat()));
    let _ = writeln!(out, "{}", join(field.grid.lon()));
    let _ = writeln!(out, "{}", join(field.time.timestamps()));
    for c in 0..nc {
        for t in 0..nt {
            for i in 0..ny {
                for j in 0..nx {
                    if field.mask()[(c, t, i, j)] {
                        let _ = writeln!(out, "{MISSING_SENTINEL}");
                    } else {
                        let _ = writeln!(out, "{}", fmt_f64(field.values()[(c, t, i, j)]));
                    }
                }
            }
        }
    }
    atomic_write(path, &out)
}

fn write_csv_grid(field: &SpatioTemporalField, path: &Path) -> Result<()> {
    if field.n_components() != 1 {
        return Err(Error::Config("csv-grid holds a single component".into()));
    }
    let (ny, nx, nt) = (field.grid.n_lat(), field.grid.n_lon(), field.n_time());
    let one = |t: usize| -> String {
        let mut out = String::new();
        out.push_str("lat/lon");
        for j in 0..nx {
            let _ = write!(out, ",{}", fmt_f64(field.grid.lon()[j]));
        }
        out.push('\n');
        for i in 0..ny {
            let _ = write!(out, "{}", fmt_f64(field.grid.lat()[i]));
            for j in 0..nx {
                if field.mask()[(0, t, i, j)] {
                    let _ = write!(out, ",{MISSING_SENTINEL}");
                } else {
                    let _ = write!(out, ",{}", fmt_f64(field.values()[(0, t, i, j)]));
                }
            }
            out.push('\n');
        }
        out
    };
    if nt == 1 {
        atomic_write(path, &one(0))
    } else {
        fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for t in 0..nt {
            atomic_write(&path.join(format!("t{t:06}.csv")), &one(t))?;
        }
        Ok(())
    }
}

/// Write a bare 2D map (single time slice view) as csv-grid.
pub fn write_map_csv(grid: &Grid, map: &ndarray::Array2<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("lat/lon");
    for j in 0..grid.n_lon() {
        let _ = write!(out, ",{}", fmt_f64(grid.lon()[j]));
    }
    out.push('\n');
    for i in 0..grid.n_lat() {
        let _ = write!(out, "{}", fmt_f64(grid.lat()[i]));
        for j in 0..grid.n_lon() {
            let _ = write!(out, ",{}", fmt_f64(map[(i, j)]));
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, SpatioTemporalField, TimeAxis};
    use ndarray::Array4;

    fn sample_field() -> SpatioTemporalField {
        let grid = Grid::new(vec![40.0, 42.5, 45.0], vec![0.0, 2.5, 5.0, 7.5]).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, 2).unwrap();
        let mut values = Array4::zeros((2, 2, 3, 4));
        for (k, v) in values.iter_mut().enumerate() {
            *v = (k as f64) * 0.37 - 3.0 + (k as f64).sin() * 1e-7;
        }
        let mut mask = Array4::from_elem((2, 2, 3, 4), false);
        mask[(0, 1, 2, 3)] = true;
        SpatioTemporalField::new(grid, time, values, mask).unwrap()
    }

    #[test]
    fn column_text_round_trip_is_bit_identical() {
        let f = sample_field();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_field(&f, &p, FieldFormat::ColumnText).unwrap();
        let g = read_field(&p, FieldFormat::ColumnText).unwrap();
        for ((idx, a), b) in f.values().indexed_iter().zip(g.values().iter()) {
            if !f.mask()[idx] {
                assert_eq!(a, b, "value mismatch at {idx:?}");
            }
        }
        assert_eq!(f.mask(), g.mask());
        assert_eq!(f.grid.lat(), g.grid.lat());
        assert_eq!(f.time.timestamps(), g.time.timestamps());
        // second write must produce the same bytes
        let p2 = dir.path().join("g.txt");
        write_field(&g, &p2, FieldFormat::ColumnText).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn header_shape_echo() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.txt");
        let body: String = (0..24).map(|i| format!("{}\n", i)).collect();
        let text = format!(
            "DSAFIELD v1\n1 2 3 4\n40 42.5 45\n0 2.5 5 7.5\n0 1\n{body}"
        );
        std::fs::write(&p, text).unwrap();
        let f = read_field(&p, FieldFormat::ColumnText).unwrap();
        assert_eq!(f.n_components(), 1);
        assert_eq!(f.n_time(), 2);
        assert_eq!(f.grid.n_lat(), 3);
        assert_eq!(f.grid.n_lon(), 4);
    }

    #[test]
    fn sentinel_sets_mask() {
        let f = sample_field();
        assert!(f.mask()[(0, 1, 2, 3)]);
        assert!(!f.mask()[(0, 0, 0, 0)]);
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        std::fs::write(&p, "DSAFIELD v1\n1 1 2 2\n40 45\n0 5\nanswer\n1\n1\n1\n1\n").unwrap();
        match read_field(&p, FieldFormat::ColumnText) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_axis_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ax.txt");
        std::fs::write(&p, "DSAFIELD v1\n1 2 2 2\n40 40\n0 5\n0 1\n1\n1\n1\n1\n1\n1\n1\n1\n").unwrap();
        assert!(matches!(
            read_field(&p, FieldFormat::ColumnText),
            Err(Error::InvalidAxis(_))
        ));
    }

    #[test]
    fn csv_grid_round_trip() {
        let f = sample_field();
        // csv-grid is single-component; slice the first component
        let mut vals = Array4::zeros((1, 2, 3, 4));
        vals.index_axis_mut(ndarray::Axis(0), 0)
            .assign(&f.values().index_axis(ndarray::Axis(0), 0));
        let single =
            SpatioTemporalField::new(f.grid.clone(), f.time.clone(), vals, {
                let mut m = Array4::from_elem((1, 2, 3, 4), false);
                m[(0, 1, 2, 3)] = true;
                m
            })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("steps");
        write_field(&single, &p, FieldFormat::CsvGrid).unwrap();
        let g = read_field(&p, FieldFormat::CsvGrid).unwrap();
        for ((idx, a), b) in single.values().indexed_iter().zip(g.values().iter()) {
            if !single.mask()[idx] {
                assert_eq!(a, b, "value mismatch at {idx:?}");
            }
        }
        assert_eq!(single.mask(), g.mask());
    }
}
