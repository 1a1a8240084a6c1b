//! Node fields as legacy VTK structured points or `x,y,value` CSV.
//!
//! The VTK grid has `(n+1) x (n+1) x 1` points with spacing `h`; the last row and column
//! repeat the first, so viewers show a closed periodic cell. Values are written in
//! shortest round-trip form, so reading a dump back reproduces the arrays bitwise.

use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::levelset::LevelSet;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub grid: PeriodicGrid,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 2]>)>,
}

impl FieldDump {
    pub fn new(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            scalars: Vec::new(),
            vectors: Vec::new(),
        }
    }

    fn check(&self, name: &str, len: usize) -> Result<()> {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!(
                "array name `{name}` must be a single word"
            )));
        }
        if len != self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "array `{name}` has {len} values, grid has {}",
                self.grid.len()
            )));
        }
        Ok(())
    }

    pub fn with_scalar(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.check(name, values.len())?;
        self.scalars.push((name.into(), values.to_vec()));
        Ok(self)
    }

    pub fn with_vector(mut self, name: &str, values: &[[f64; 2]]) -> Result<Self> {
        self.check(name, values.len())?;
        self.vectors.push((name.into(), values.to_vec()));
        Ok(self)
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
    }

    /// The `psi` array as a level set.
    pub fn level_set(&self) -> Result<LevelSet> {
        let values = self
            .scalar("psi")
            .ok_or_else(|| Error::Missing("field dump has no `psi` array".into()))?;
        LevelSet::new(self.grid, values.to_vec())
    }

    /// Periodic point index `(a, b)`, `0 <= a, b <= n`, to node index.
    fn node(&self, a: usize, b: usize) -> usize {
        let n = self.grid.n();
        self.grid.index(a % n, b % n)
    }

    pub fn to_vtk(&self) -> String {
        let n = self.grid.n();
        let points = (n + 1) * (n + 1);
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "microtube periodic cell");
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
        let _ = writeln!(s, "DIMENSIONS {} {} 1", n + 1, n + 1);
        let _ = writeln!(s, "ORIGIN 0 0 0");
        let _ = writeln!(s, "SPACING {:e} {:e} 1", self.grid.h(), self.grid.h());
        let _ = writeln!(s, "POINT_DATA {points}");
        for (name, values) in &self.scalars {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for b in 0..=n {
                for a in 0..=n {
                    let _ = writeln!(s, "{:e}", values[self.node(a, b)]);
                }
            }
        }
        for (name, values) in &self.vectors {
            let _ = writeln!(s, "VECTORS {name} double");
            for b in 0..=n {
                for a in 0..=n {
                    let [x, y] = values[self.node(a, b)];
                    let _ = writeln!(s, "{x:e} {y:e} 0");
                }
            }
        }
        s
    }

    pub fn from_vtk(text: &str, source: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format(source, reason);
        let mut lines = text.lines();
        if !lines
            .next()
            .is_some_and(|l| l.starts_with("# vtk DataFile"))
        {
            return Err(bad("missing `# vtk DataFile` header".into()));
        }
        lines.next();
        if lines.next().map(str::trim) != Some("ASCII") {
            return Err(bad("only ASCII files are supported".into()));
        }
        let mut t = Tokens {
            items: lines.flat_map(str::split_whitespace).collect(),
            pos: 0,
            source,
        };
        t.expect("DATASET")?;
        t.expect("STRUCTURED_POINTS")?;
        t.expect("DIMENSIONS")?;
        let dims = [t.usize()?, t.usize()?, t.usize()?];
        if dims[0] != dims[1] || dims[2] != 1 || dims[0] < 2 {
            return Err(bad(format!("unsupported dimensions {dims:?}")));
        }
        let n = dims[0] - 1;
        let grid = PeriodicGrid::square(n).map_err(|e| bad(e.to_string()))?;
        t.expect("ORIGIN")?;
        let origin = [t.f64()?, t.f64()?, t.f64()?];
        if origin != [0.0; 3] {
            return Err(bad(format!("unsupported origin {origin:?}")));
        }
        t.expect("SPACING")?;
        let spacing = [t.f64()?, t.f64()?, t.f64()?];
        if spacing[0] != spacing[1] || (spacing[0] * n as f64 - 1.0).abs() > 1e-12 {
            return Err(bad(format!(
                "spacing {spacing:?} does not span the unit cell"
            )));
        }
        t.expect("POINT_DATA")?;
        let points = (n + 1) * (n + 1);
        if t.usize()? != points {
            return Err(bad(format!("expected POINT_DATA {points}")));
        }

        let mut dump = FieldDump::new(grid);
        while let Some(kind) = t.peek() {
            t.pos += 1;
            let name = t.word()?.to_string();
            let ty = t.word()?;
            if ty != "double" && ty != "float" {
                return Err(bad(format!("`{name}`: unsupported type `{ty}`")));
            }
            let components = match kind {
                "SCALARS" => {
                    if t.peek() != Some("LOOKUP_TABLE") && t.usize()? != 1 {
                        return Err(bad(format!("`{name}`: only one component supported")));
                    }
                    t.expect("LOOKUP_TABLE")?;
                    t.word()?;
                    1
                }
                "VECTORS" => 3,
                other => return Err(bad(format!("unsupported section `{other}`"))),
            };
            let mut nodes = vec![[0.0; 3]; grid.len()];
            for b in 0..=n {
                for a in 0..=n {
                    let mut v = [0.0; 3];
                    for c in v.iter_mut().take(components) {
                        *c = t.f64()?;
                    }
                    let k = dump.node(a, b);
                    if a < n && b < n {
                        nodes[k] = v;
                    } else if nodes[k].map(f64::to_bits) != v.map(f64::to_bits) {
                        return Err(bad(format!("`{name}` is not periodic at point ({a}, {b})")));
                    }
                }
            }
            dump = if components == 1 {
                let values: Vec<f64> = nodes.iter().map(|v| v[0]).collect();
                dump.with_scalar(&name, &values)?
            } else {
                let values: Vec<[f64; 2]> = nodes.iter().map(|v| [v[0], v[1]]).collect();
                dump.with_vector(&name, &values)?
            };
        }
        Ok(dump)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_vtk().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_vtk(&text, path)
    }
}

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
    source: &'a Path,
}

impl<'a> Tokens<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).copied()
    }

    fn word(&mut self) -> Result<&'a str> {
        let t = self
            .peek()
            .ok_or_else(|| Error::format(self.source, "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let got = self.word()?;
        if got != want {
            return Err(Error::format(
                self.source,
                format!("expected `{want}`, found `{got}`"),
            ));
        }
        Ok(())
    }

    fn usize(&mut self) -> Result<usize> {
        let t = self.word()?;
        t.parse()
            .map_err(|e| Error::format(self.source, format!("`{t}`: {e}")))
    }

    fn f64(&mut self) -> Result<f64> {
        let t = self.word()?;
        t.parse()
            .map_err(|e| Error::format(self.source, format!("`{t}`: {e}")))
    }
}

/// One node per row, `x,y,value`, `x` varying fastest.
pub fn write_scalar_csv(path: &Path, grid: &PeriodicGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values for a grid of {}",
            values.len(),
            grid.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["x", "y", "value"]).map_err(csv_err)?;
    for (k, v) in values.iter().enumerate() {
        let (i, j) = grid.coords(k);
        let [x, y] = grid.node_position(i, j);
        w.serialize((x, y, v)).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Inverse of [`write_scalar_csv`]; the grid size is inferred from the row count.
pub fn read_scalar_csv(path: &Path) -> Result<(PeriodicGrid, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let rows = r
        .deserialize::<(f64, f64, f64)>()
        .map(|row| row.map(|(_, _, v)| v))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let n = (rows.len() as f64).sqrt().round() as usize;
    if n * n != rows.len() {
        return Err(Error::format(
            path,
            format!("{} rows do not form a square grid", rows.len()),
        ));
    }
    let grid = PeriodicGrid::square(n).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((grid, rows))
}

/// Level set from a field dump: `.vtk` (its `psi` array) or `x,y,value` CSV.
pub fn read_level_set(path: &Path) -> Result<LevelSet> {
    if !path.exists() {
        return Err(Error::Missing(format!("{} does not exist", path.display())));
    }
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let (grid, values) = read_scalar_csv(path)?;
        LevelSet::new(grid, values)
    } else {
        FieldDump::read(path)?.level_set()
    }
}
