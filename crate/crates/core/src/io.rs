//! Text formats for systems, trajectories, fits and sample sets.
//!
//! A matrix is written as a `rows cols` line followed by `rows` lines of
//! whitespace-separated values. Structured documents are sequences of
//! `key value` scalar lines and `key` lines followed by a matrix block.
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{LatentLinearSystem, Trajectory};
use crate::infotheory::SampleSet;
use crate::varfit::VarFit;
use crate::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| Error::parse(line, format!("bad number {tok:?}: {e}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|e| Error::parse(line, format!("bad count {tok:?}: {e}")))
}

pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let vals: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

/// Reads one matrix block from `lines`, which yields `(line_number, text)`.
fn read_matrix_block<'a, I>(lines: &mut I, context: &str) -> Result<DMatrix<f64>>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("missing matrix header for {context}")))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::parse(ln, format!("expected `rows cols` for {context}")));
    }
    let (rows, cols) = (parse_usize(dims[0], ln)?, parse_usize(dims[1], ln)?);
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (ln, text) = lines
            .next()
            .ok_or_else(|| Error::parse(ln, format!("{context}: expected {rows} rows, found {r}")))?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != cols {
            return Err(Error::parse(ln, format!("{context}: expected {cols} values, found {}", toks.len())));
        }
        for (c, tok) in toks.iter().enumerate() {
            m[(r, c)] = parse_f64(tok, ln)?;
        }
    }
    Ok(m)
}

/// Parses a standalone matrix in the text format.
pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let m = read_matrix_block(&mut lines, "matrix")?;
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(ln, format!("trailing content {extra:?}")));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
enum Entry {
    Scalar(String),
    Matrix(DMatrix<f64>),
}

/// Ordered key/value document.
#[derive(Clone, Debug, Default, PartialEq)]
struct TextDoc {
    entries: Vec<(String, Entry)>,
}

impl TextDoc {
    fn scalar(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.into(), Entry::Scalar(value.to_string())));
    }

    fn matrix(&mut self, key: &str, m: DMatrix<f64>) {
        self.entries.push((key.into(), Entry::Matrix(m)));
    }

    fn vector(&mut self, key: &str, v: &DVector<f64>) {
        self.matrix(key, DMatrix::from_row_slice(1, v.len(), v.as_slice()));
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (key, entry) in &self.entries {
            match entry {
                Entry::Scalar(v) => writeln!(out, "{key} {v}").unwrap(),
                Entry::Matrix(m) => {
                    writeln!(out, "{key}").unwrap();
                    out.push_str(&write_matrix(m));
                }
            }
        }
        out
    }

    fn parse(text: &str) -> Result<Self> {
        let mut doc = TextDoc::default();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        while let Some((ln, line)) = lines.next() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => continue,
                [key] => {
                    let m = read_matrix_block(&mut lines, key)?;
                    doc.matrix(key, m);
                }
                [key, value] => doc.scalar(key, value),
                _ => return Err(Error::parse(ln, format!("unexpected line {line:?}"))),
            }
        }
        Ok(doc)
    }

    fn get(&self, key: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::parse(0, format!("missing key `{key}`")))
    }

    fn get_scalar(&self, key: &str) -> Result<&str> {
        match self.get(key)? {
            Entry::Scalar(s) => Ok(s),
            Entry::Matrix(_) => Err(Error::parse(0, format!("`{key}` should be a scalar"))),
        }
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        parse_usize(self.get_scalar(key)?, 0)
    }

    fn get_matrix(&self, key: &str) -> Result<&DMatrix<f64>> {
        match self.get(key)? {
            Entry::Matrix(m) => Ok(m),
            Entry::Scalar(_) => Err(Error::parse(0, format!("`{key}` should be a matrix"))),
        }
    }

    fn get_vector(&self, key: &str) -> Result<DVector<f64>> {
        let m = self.get_matrix(key)?;
        if m.nrows() != 1 {
            return Err(Error::parse(0, format!("`{key}` should be a single row")));
        }
        Ok(m.row(0).transpose())
    }
}

pub fn write_system(sys: &LatentLinearSystem) -> String {
    let mut doc = TextDoc::default();
    doc.scalar("n", sys.n());
    doc.scalar("m", sys.m());
    doc.matrix("a11", sys.a11.clone());
    doc.matrix("a12", sys.a12.clone());
    doc.matrix("a21", sys.a21.clone());
    doc.matrix("a22", sys.a22.clone());
    doc.vector("noise_var", &sys.noise_var);
    doc.vector("z0", &sys.z0);
    doc.render()
}

pub fn read_system(text: &str) -> Result<LatentLinearSystem> {
    let doc = TextDoc::parse(text)?;
    let (n, m) = (doc.get_usize("n")?, doc.get_usize("m")?);
    let sys = LatentLinearSystem::new(
        doc.get_matrix("a11")?.clone(),
        doc.get_matrix("a12")?.clone(),
        doc.get_matrix("a21")?.clone(),
        doc.get_matrix("a22")?.clone(),
        doc.get_vector("noise_var")?,
        doc.get_vector("z0")?,
    )?;
    if sys.n() != n || sys.m() != m {
        return Err(Error::Dimension(format!(
            "declared n = {n}, m = {m} but blocks give n = {}, m = {}",
            sys.n(),
            sys.m()
        )));
    }
    Ok(sys)
}

pub fn write_var_fit(fit: &VarFit) -> String {
    let mut doc = TextDoc::default();
    doc.scalar("lag", fit.lag);
    doc.scalar("n", fit.dim());
    doc.scalar("sample_count", fit.sample_count);
    doc.scalar("drop_prefix", fit.drop_prefix);
    doc.scalar("degenerate", u8::from(fit.degenerate));
    for (k, c) in fit.coeffs.iter().enumerate() {
        doc.matrix(&format!("coeffs[{k}]"), c.clone());
    }
    doc.vector("residual_var", &fit.residual_var);
    doc.render()
}

pub fn read_var_fit(text: &str) -> Result<VarFit> {
    let doc = TextDoc::parse(text)?;
    let lag = doc.get_usize("lag")?;
    let n = doc.get_usize("n")?;
    if lag == 0 {
        return Err(Error::parse(0, "lag must be >= 1"));
    }
    let coeffs = (0..lag)
        .map(|k| {
            let c = doc.get_matrix(&format!("coeffs[{k}]"))?;
            if c.shape() != (n, n) {
                return Err(Error::Dimension(format!("coeffs[{k}] is not {n}x{n}")));
            }
            Ok(c.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let residual_var = doc.get_vector("residual_var")?;
    if residual_var.len() != n {
        return Err(Error::Dimension(format!("residual_var must have length {n}")));
    }
    let degenerate = match doc.get_scalar("degenerate")? {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(0, format!("degenerate must be 0 or 1, got {other:?}"))),
    };
    Ok(VarFit {
        lag,
        coeffs,
        residual_var,
        sample_count: doc.get_usize("sample_count")?,
        drop_prefix: doc.get_usize("drop_prefix")?,
        degenerate,
    })
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for c in 1..=traj.dim() {
        write!(out, ",x{c}").unwrap();
    }
    out.push('\n');
    for (t, row) in traj.data.row_iter().enumerate() {
        write!(out, "{t}").unwrap();
        for &v in row.iter() {
            write!(out, ",{}", fmt_f64(v)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn read_csv_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        rows.push(rec.iter().map(|tok| parse_f64(tok, line)).collect::<Result<Vec<f64>>>()?);
    }
    Ok((header, rows))
}

/// Parses a `t,x1,...,xn` CSV; the time column must count up from 0.
/// The returned trajectory has seed 0.
pub fn read_trajectory(text: &str) -> Result<Trajectory> {
    let (header, rows) = read_csv_table(text)?;
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(Error::parse(1, "trajectory header must be `t,x1,...,xn`"));
    }
    for (c, name) in header.iter().enumerate().skip(1) {
        if *name != format!("x{c}") {
            return Err(Error::parse(1, format!("expected column x{c}, found {name:?}")));
        }
    }
    let n = header.len() - 1;
    for (t, row) in rows.iter().enumerate() {
        if row[0] != t as f64 {
            return Err(Error::parse(t + 2, format!("time column should be {t}")));
        }
    }
    let data = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c + 1]);
    Trajectory::new(data, 0)
}

pub fn write_sample_set(samples: &SampleSet) -> String {
    let mut out = samples.column_labels.join(",");
    out.push('\n');
    for row in samples.points.row_iter() {
        let vals: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&vals.join(","));
        out.push('\n');
    }
    out
}

pub fn read_sample_set(text: &str) -> Result<SampleSet> {
    let (header, rows) = read_csv_table(text)?;
    let points = DMatrix::from_fn(rows.len(), header.len(), |r, c| rows[r][c]);
    SampleSet::new(points, header)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_lossless() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE, 0.3 - 0.1] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -2.0, 3.5e-12, 4.0, 1.0 / 7.0, 0.0]);
        let text = write_matrix(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(read_matrix(&text).unwrap(), m);
        assert!(read_matrix("2 2\n1 2\n3\n").is_err());
        assert!(read_matrix("1 1\n1\n2 2\n").is_err());
    }

    #[test]
    fn system_round_trip_with_empty_latent_block() {
        let sys = LatentLinearSystem::fully_observed(
            DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.1, -0.2]),
            DVector::from_vec(vec![0.1, 0.2]),
        )
        .unwrap();
        assert_eq!(read_system(&write_system(&sys)).unwrap(), sys);
        let intro = LatentLinearSystem::intro_example(0.1);
        assert_eq!(read_system(&write_system(&intro)).unwrap(), intro);
    }

    #[test]
    fn system_errors() {
        let text = write_system(&LatentLinearSystem::intro_example(0.1));
        assert!(read_system(&text.replace("n 2", "n 3")).is_err());
        assert!(read_system(&text.replace("a21\n", "a2x\n")).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let traj = Trajectory::new(DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.5, -0.25, 1e-9, 2.0]), 5).unwrap();
        let text = write_trajectory(&traj);
        assert!(text.starts_with("t,x1,x2\n0,"));
        let back = read_trajectory(&text).unwrap();
        assert_eq!(back.data, traj.data);
        assert_eq!(back.seed, 0);
        assert!(read_trajectory("t,x1\n1,0.5\n").is_err());
        assert!(read_trajectory("time,x1\n0,0.5\n").is_err());
    }

    #[test]
    fn sample_set_round_trip() {
        let s = SampleSet::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(read_sample_set(&write_sample_set(&s)).unwrap(), s);
    }
}
