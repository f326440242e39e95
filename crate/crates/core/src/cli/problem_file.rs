//! Line-oriented text format for AVI instances.
//!
//! ```text
//! avi-problem 1
//! n 2
//! m 1
//! M
//! 1 0
//! 0 1
//! q
//! -0.5 -2
//! A
//! 1 1
//! b
//! 1.5
//! lower
//! 0 0
//! upper
//! 1 1
//! reference_solution
//! 0.5 1
//! ```
//!
//! Matrices are written one row per line. Blank lines and lines starting
//! with `#` are ignored. `reference_solution` is optional. Numbers are
//! written with 17 significant digits, which round-trips every `f64`.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};

use crate::avi::AviProblem;
use crate::error::Error;
use crate::polytope::Polytope;

const MAGIC: &str = "avi-problem";
const VERSION: &str = "1";
const SECTIONS: [&str; 7] = ["M", "q", "A", "b", "lower", "upper", "reference_solution"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Raw contents of a problem file, before any semantic checks on `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub m: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub reference_solution: Option<DVector<f64>>,
}

impl ProblemFile {
    pub fn from_problem(avi: &AviProblem, reference: Option<DVector<f64>>) -> Self {
        let k = avi.polytope();
        Self {
            m: avi.m().clone(),
            q: avi.q().clone(),
            a: k.a().clone(),
            b: k.b().clone(),
            lower: k.lower().clone(),
            upper: k.upper().clone(),
            reference_solution: reference,
        }
    }

    /// Build the instance; an empty box is reported as [`Error::InfeasibleSet`].
    pub fn to_problem(&self) -> Result<AviProblem, Error> {
        let k = Polytope::new(self.a.clone(), self.b.clone(), self.lower.clone(), self.upper.clone())?;
        AviProblem::new(self.m.clone(), self.q.clone(), k)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn parse_numbers(line: &Line<'_>) -> Result<Vec<f64>, ParseError> {
    line.text
        .split_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(line.number, format!("invalid number `{tok}`")))?;
            if !v.is_finite() {
                return Err(err(line.number, format!("non-finite value `{tok}`")));
            }
            Ok(v)
        })
        .collect()
}

fn parse_header(line: Option<&Line<'_>>, key: &str, prev_line: usize) -> Result<usize, ParseError> {
    let line = line.ok_or_else(|| err(prev_line + 1, format!("missing `{key}` line")))?;
    let mut toks = line.text.split_whitespace();
    if toks.next() != Some(key) {
        return Err(err(line.number, format!("expected `{key} <count>`")));
    }
    let value = toks
        .next()
        .ok_or_else(|| err(line.number, format!("missing value for `{key}`")))?;
    if toks.next().is_some() {
        return Err(err(line.number, format!("trailing tokens after `{key}`")));
    }
    value
        .parse()
        .map_err(|_| err(line.number, format!("`{key}` must be a nonnegative integer")))
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, ParseError> {
    let lines: Vec<Line<'_>> = text
        .lines()
        .enumerate()
        .map(|(i, t)| Line {
            number: i + 1,
            text: t.trim(),
        })
        .filter(|l| !l.text.is_empty() && !l.text.starts_with('#'))
        .collect();
    let first = lines.first().ok_or_else(|| err(1, "empty problem file"))?;
    let mut magic = first.text.split_whitespace();
    if magic.next() != Some(MAGIC) || magic.next() != Some(VERSION) || magic.next().is_some() {
        return Err(err(first.number, format!("expected header `{MAGIC} {VERSION}`")));
    }
    let n = parse_header(lines.get(1), "n", first.number)?;
    let m = parse_header(lines.get(2), "m", lines.get(1).map_or(first.number, |l| l.number))?;
    if n == 0 {
        return Err(err(lines[1].number, "n must be positive"));
    }

    // Group the remaining lines under their section keywords.
    let mut sections: Vec<(&str, usize, Vec<&Line<'_>>)> = Vec::new();
    for line in &lines[3..] {
        if SECTIONS.contains(&line.text) {
            if sections.iter().any(|(name, _, _)| *name == line.text) {
                return Err(err(line.number, format!("duplicate section `{}`", line.text)));
            }
            sections.push((line.text, line.number, Vec::new()));
        } else {
            match sections.last_mut() {
                Some((_, _, rows)) => rows.push(line),
                None => return Err(err(line.number, format!("unexpected line `{}`", line.text))),
            }
        }
    }
    let last_line = lines.last().map_or(1, |l| l.number);
    let section = |name: &str| sections.iter().find(|(s, _, _)| *s == name);

    let matrix = |name: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>, ParseError> {
        let (_, at, body) = section(name).ok_or_else(|| err(last_line, format!("missing section `{name}`")))?;
        if body.len() != rows {
            return Err(err(*at, format!("section `{name}` needs {rows} rows, found {}", body.len())));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for line in body {
            let vals = parse_numbers(line)?;
            if vals.len() != cols {
                return Err(err(
                    line.number,
                    format!("row of `{name}` needs {cols} values, found {}", vals.len()),
                ));
            }
            data.extend(vals);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    };
    let vector = |name: &str, len: usize| -> Result<DVector<f64>, ParseError> {
        let (_, at, body) = section(name).ok_or_else(|| err(last_line, format!("missing section `{name}`")))?;
        let mut data = Vec::with_capacity(len);
        for line in body {
            data.extend(parse_numbers(line)?);
        }
        if data.len() != len {
            return Err(err(*at, format!("section `{name}` needs {len} values, found {}", data.len())));
        }
        Ok(DVector::from_vec(data))
    };

    let file = ProblemFile {
        m: matrix("M", n, n)?,
        q: vector("q", n)?,
        a: matrix("A", m, n)?,
        b: vector("b", m)?,
        lower: vector("lower", n)?,
        upper: vector("upper", n)?,
        reference_solution: match section("reference_solution") {
            Some(_) => Some(vector("reference_solution", n)?),
            None => None,
        },
    };
    Ok(file)
}

fn write_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let row: Vec<String> = values.map(|v| format!("{v:.16e}")).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    out.push_str(name);
    out.push('\n');
    for i in 0..m.nrows() {
        write_row(out, m.row(i).iter());
    }
}

fn write_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    out.push_str(name);
    out.push('\n');
    if !v.is_empty() {
        write_row(out, v.iter());
    }
}

pub fn format_problem(p: &ProblemFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "n {}", p.dim());
    let _ = writeln!(out, "m {}", p.a.nrows());
    write_matrix(&mut out, "M", &p.m);
    write_vector(&mut out, "q", &p.q);
    write_matrix(&mut out, "A", &p.a);
    write_vector(&mut out, "b", &p.b);
    write_vector(&mut out, "lower", &p.lower);
    write_vector(&mut out, "upper", &p.upper);
    if let Some(r) = &p.reference_solution {
        write_vector(&mut out, "reference_solution", r);
    }
    out
}
