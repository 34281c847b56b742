use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrfSource {
    Model,
    Imported,
}

/// Complex frequency response sampled on a strictly increasing grid in `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfData {
    omegas: Vec<f64>,
    values: Vec<Complex64>,
    source: FrfSource,
}

impl FrfData {
    pub fn new(omegas: Vec<f64>, values: Vec<Complex64>, source: FrfSource) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::InvalidFrf(format!(
                "{} frequencies but {} values",
                omegas.len(),
                values.len()
            )));
        }
        if let Some(w) = omegas.iter().find(|w| !(0.0..=PI).contains(*w)) {
            return Err(Error::InvalidFrf(format!("omega {w} outside [0, pi]")));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidFrf(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidFrf("non-finite response value".into()));
        }
        Ok(Self {
            omegas,
            values,
            source,
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn source(&self) -> FrfSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.omegas.iter().copied().zip(self.values.iter().copied())
    }

    pub fn same_grid(&self, other: &FrfData) -> bool {
        self.omegas == other.omegas
    }

    /// Pointwise combination of two responses on the same grid.
    pub fn zip_with(
        &self,
        other: &FrfData,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<FrfData> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        FrfData::new(self.omegas.clone(), values, self.source)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<FrfData> {
        FrfData::new(
            self.omegas.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.source,
        )
    }

    /// CSV with header `omega,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,re,im\n");
        for (w, v) in self.iter() {
            let _ = writeln!(out, "{w},{},{}", v.re, v.im);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidFrf("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["omega", "re", "im"] {
            return Err(Error::InvalidFrf(format!(
                "expected header `omega,re,im`, found `{header}`"
            )));
        }
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::InvalidFrf(format!(
                    "row {}: expected 3 fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidFrf(format!("row {}: cannot parse `{s}`", lineno + 2))
                })
            };
            omegas.push(parse(fields[0])?);
            values.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        if omegas.is_empty() {
            return Err(Error::InvalidFrf("no data rows".into()));
        }
        FrfData::new(omegas, values, FrfSource::Imported)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_grid() {
        let v = vec![Complex64::new(1.0, 0.0); 2];
        assert!(FrfData::new(vec![0.0, 1.0], v.clone(), FrfSource::Model).is_ok());
        assert!(FrfData::new(vec![1.0, 1.0], v.clone(), FrfSource::Model).is_err());
        assert!(FrfData::new(vec![0.0, 4.0], v.clone(), FrfSource::Model).is_err());
        assert!(FrfData::new(vec![0.0], v, FrfSource::Model).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let frf = FrfData::new(
            vec![0.0, 0.5, PI],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.25, -0.125),
                Complex64::new(-1.0, 1e-17),
            ],
            FrfSource::Model,
        )
        .unwrap();
        let back = FrfData::from_csv(&frf.to_csv()).unwrap();
        assert_eq!(back.omegas(), frf.omegas());
        assert_eq!(back.values(), frf.values());
        assert_eq!(back.source(), FrfSource::Imported);
    }

    #[test]
    fn csv_rejects_non_monotone_and_bad_header() {
        assert!(FrfData::from_csv("omega,re,im\n0.5,1,0\n0.2,1,0\n").is_err());
        assert!(FrfData::from_csv("w,re,im\n0.5,1,0\n").is_err());
        assert!(FrfData::from_csv("omega,re,im\n0.5,x,0\n").is_err());
    }
}
