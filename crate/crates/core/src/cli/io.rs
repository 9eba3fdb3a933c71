//! Comma-separated files with a header row. Floats are written with 17
//! significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::TransitionSample;
use crate::{Error, Point, Result};

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// An in-memory CSV table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    body: String,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    /// Appends a row of pre-formatted cells.
    pub fn push_cells<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.header.len());
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            self.body.push_str(c.as_ref());
        }
        self.body.push('\n');
    }

    pub fn push(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        self.push_cells(&cells);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.render())?;
        Ok(())
    }
}

pub fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

/// Header `x0..,u0..,y0..` then one transition per line.
pub fn sample_table(s: &TransitionSample) -> Table {
    let (n, m) = (s.state_dim(), s.action_dim());
    let mut header = numbered("x", n);
    header.extend(numbered("u", m));
    header.extend(numbered("y", n));
    let mut t = Table::new(&header);
    let mut row = Vec::with_capacity(2 * n + m);
    for i in 0..s.len() {
        row.clear();
        row.extend_from_slice(&s.states()[i]);
        row.extend_from_slice(&s.actions()[i]);
        row.extend_from_slice(&s.successors()[i]);
        t.push(&row);
    }
    t
}

pub fn write_sample(s: &TransitionSample, path: &Path) -> Result<()> {
    sample_table(s).write(path)
}

/// Parses a sample file written by [`write_sample`], or any CSV with the
/// same header layout.
pub fn parse_sample(text: &str) -> Result<TransitionSample> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Empty("sample file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let count = |p: char| cols.iter().filter(|c| c.starts_with(p)).count();
    let (n, m) = (count('x'), count('u'));
    let expected: Vec<String> = numbered("x", n)
        .into_iter()
        .chain(numbered("u", m))
        .chain(numbered("y", n))
        .collect();
    if n == 0 || m == 0 || cols != expected {
        return Err(Error::InvalidParameter(format!(
            "sample header must read x0..x(n-1),u0..u(m-1),y0..y(n-1), got `{header}`"
        )));
    }
    let (mut xs, mut us, mut ys): (Vec<Point>, Vec<Point>, Vec<Point>) = (vec![], vec![], vec![]);
    for (ln, line) in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("sample line {}: {e}", ln + 1)))?;
        if vals.len() != 2 * n + m {
            return Err(Error::InvalidParameter(format!(
                "sample line {}: expected {} values, got {}",
                ln + 1,
                2 * n + m,
                vals.len()
            )));
        }
        xs.push(vals[..n].to_vec());
        us.push(vals[n..n + m].to_vec());
        ys.push(vals[n + m..].to_vec());
    }
    TransitionSample::new(xs, us, ys)
}

pub fn read_sample(path: &Path) -> Result<TransitionSample> {
    parse_sample(&fs::read_to_string(path)?)
}

/// Two-column `key,value` summary.
#[derive(Debug, Default)]
pub struct Summary {
    text: String,
}

impl Summary {
    pub fn new() -> Self {
        Summary {
            text: "key,value\n".into(),
        }
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        let _ = writeln!(self.text, "{key},{}", fmt_f64(v));
        self
    }

    pub fn text(&mut self, key: &str, v: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key},{v}");
        self
    }

    pub fn render(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.text)?;
        Ok(())
    }
}
