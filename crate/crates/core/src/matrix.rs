//! Square variable-by-variable matrix with explicit undefined cells.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Text written for an undefined cell.
pub const UNDEFINED: &str = "NA";

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    names: Vec<String>,
    cells: Vec<Option<f64>>,
}

impl Matrix {
    pub fn from_fn(names: Vec<String>, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let n = names.len();
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                cells.push(f(i, j));
            }
        }
        Self { names, cells }
    }

    pub fn from_cells(names: Vec<String>, cells: Vec<Option<f64>>) -> Result<Self> {
        if cells.len() != names.len() * names.len() {
            return Err(Error::Dimension(format!(
                "{} cells for a {}×{} matrix",
                cells.len(),
                names.len(),
                names.len()
            )));
        }
        Ok(Self { names, cells })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Option<f64>) {
        let n = self.dim();
        self.cells[i * n + j] = value;
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.names.clone(), |i, j| self.get(j, i))
    }

    /// Cell-wise average with the transpose; undefined if either side is.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.names.clone(), |i, j| {
            Some(0.5 * (self.get(i, j)? + self.get(j, i)?))
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim()).all(|i| {
            (i + 1..self.dim()).all(|j| match (self.get(i, j), self.get(j, i)) {
                (Some(a), Some(b)) => (a - b).abs() <= tol,
                (None, None) => true,
                _ => false,
            })
        })
    }

    /// Smallest eigenvalue of the defined sub-matrix (rows and columns without
    /// any undefined cell), or `None` when nothing is defined.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&i| (0..self.dim()).all(|j| self.get(i, j).is_some()))
            .collect();
        if keep.is_empty() {
            return None;
        }
        let m = DMatrix::from_fn(keep.len(), keep.len(), |a, b| {
            self.get(keep[a], keep[b]).unwrap_or(0.0)
        });
        m.symmetric_eigenvalues().iter().copied().reduce(f64::min)
    }

    /// Full matrix as CSV: header of names, one row per variable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.dim() {
            let mut rec = vec![self.names[i].clone()];
            rec.extend((0..self.dim()).map(|j| format_cell(self.get(i, j))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }

    /// Long format `p,q,value` for heatmap tooling.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "q", "value"])?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                w.write_record([
                    self.names[i].as_str(),
                    self.names[j].as_str(),
                    &format_cell(self.get(i, j)),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }
}

pub(crate) fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => UNDEFINED.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn csv_layouts() {
        let m = Matrix::from_fn(names(2), |i, j| if i == j { Some(1.0) } else { None });
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ",x1,x2\nx1,1,NA\nx2,NA,1\n");
        let mut buf = Vec::new();
        m.write_long_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "p,q,value\nx1,x1,1\nx1,x2,NA\nx2,x1,NA\nx2,x2,1\n"
        );
    }

    #[test]
    fn eigen_and_symmetry() {
        let m = Matrix::from_fn(names(2), |i, j| Some(if i == j { 1.0 } else { 0.5 }));
        assert!(m.is_symmetric(0.0));
        assert!((m.min_eigenvalue().unwrap() - 0.5).abs() < 1e-12);
        let a = Matrix::from_fn(names(2), |i, j| Some((i * 2 + j) as f64));
        assert!(!a.is_symmetric(1e-9));
        assert_eq!(a.symmetrized().get(0, 1), Some(1.5));
    }
}
