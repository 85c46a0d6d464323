//! Observed triples `(Y_i, Delta_i, W_i)` and their CSV form.
//!
//! CSV layout: header `y,delta,w1,...,wm`, one record per row, `delta` in
//! `{0, 1}`, decimal-point floats.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Record<'a> {
    pub y: f64,
    pub delta: bool,
    pub w: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    tau: f64,
    dim: usize,
    y: Vec<f64>,
    delta: Vec<bool>,
    // row-major n x dim
    w: Vec<f64>,
}

impl Dataset {
    pub fn new(tau: f64, dim: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::usage(format!("tau must be positive and finite, got {tau}")));
        }
        if dim == 0 {
            return Err(Error::usage("covariate dimension must be positive"));
        }
        Ok(Dataset { tau, dim, y: Vec::new(), delta: Vec::new(), w: Vec::new() })
    }

    pub fn push(&mut self, y: f64, delta: bool, w: &[f64]) -> Result<()> {
        if y.is_nan() || y < 0.0 || y > self.tau {
            return Err(Error::Domain { what: "y", value: y, tau: self.tau });
        }
        if w.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: w.len(), context: "surrogate covariate" });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("surrogate covariates must be finite"));
        }
        self.y.push(y);
        self.delta.push(delta);
        self.w.extend_from_slice(w);
        Ok(())
    }

    pub fn from_records<'a, I>(tau: f64, dim: usize, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, bool, &'a [f64])>,
    {
        let mut d = Dataset::new(tau, dim)?;
        for (y, delta, w) in records {
            d.push(y, delta, w)?;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn w(&self, i: usize) -> &[f64] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    pub fn record(&self, i: usize) -> Record<'_> {
        Record { y: self.y[i], delta: self.delta[i], w: self.w(i) }
    }

    pub fn records(&self) -> impl Iterator<Item = Record<'_>> + '_ {
        (0..self.len()).map(move |i| self.record(i))
    }

    pub fn event_count(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn read_csv<R: Read>(reader: R, tau: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Row { row: 1, message: e.to_string() })?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 3 || names[0] != "y" || names[1] != "delta" {
            return Err(Error::Row { row: 1, message: "header must be y,delta,w1,...,wm".into() });
        }
        for (j, name) in names[2..].iter().enumerate() {
            if *name != format!("w{}", j + 1) {
                return Err(Error::Row { row: 1, message: format!("expected column w{}, found {name}", j + 1) });
            }
        }
        let dim = names.len() - 2;
        let mut data = Dataset::new(tau, dim)?;
        let mut w = vec![0.0; dim];
        for result in rdr.records() {
            let rec = result.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line() as usize);
                Error::Row { row, message: e.to_string() }
            })?;
            let row = rec.position().map_or(0, |p| p.line() as usize);
            let bad = |message: String| Error::Row { row, message };
            if rec.len() != dim + 2 {
                return Err(bad(format!("expected {} fields, found {}", dim + 2, rec.len())));
            }
            let parse = |s: &str, col: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| bad(format!("column {col}: cannot parse {s:?} as a number")))
            };
            let y = parse(&rec[0], "y")?;
            if y.is_nan() || y < 0.0 || y > tau {
                return Err(bad(format!("y = {y} must lie in [0, {tau}]")));
            }
            let delta = match &rec[1] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("delta must be 0 or 1, found {other:?}"))),
            };
            for j in 0..dim {
                w[j] = parse(&rec[j + 2], names[j + 2])?;
                if !w[j].is_finite() {
                    return Err(bad(format!("column {} is not finite", names[j + 2])));
                }
            }
            data.push(y, delta, &w)?;
        }
        Ok(data)
    }

    pub fn load_csv(path: &Path, tau: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), tau)
    }

    /// Writes the CSV form; floats use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("y,delta");
        for j in 1..=self.dim {
            line.push_str(&format!(",w{j}"));
        }
        writeln!(out, "{line}")?;
        for r in self.records() {
            line.clear();
            line.push_str(&format!("{},{}", r.y, u8::from(r.delta)));
            for x in r.w {
                line.push_str(&format!(",{x}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}
