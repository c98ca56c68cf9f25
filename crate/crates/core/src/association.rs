//! Empirical pairwise association between categorical columns.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{format_cell, Matrix};
use crate::model::{Dataset, Variable, VariableDomain, VariableKind};

/// Cross-tabulation of two columns; rows index the first variable's levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} counts for a {rows}×{cols} table",
                counts.len()
            )));
        }
        Ok(Self { rows, cols, counts })
    }

    /// Row-major nested counts, e.g. `[[2, 0], [0, 2]]`.
    pub fn from_nested(cells: &[Vec<u64>]) -> Result<Self> {
        let cols = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged contingency table".into()));
        }
        Self::new(cells.len(), cols, cells.concat())
    }

    /// Tabulates `x` against `y` over the declared level codes.
    pub fn from_columns(x: &[i32], x_levels: &[i32], y: &[i32], y_levels: &[i32]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "columns of length {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut t = Self::new(x_levels.len(), y_levels.len(), vec![0; x_levels.len() * y_levels.len()])?;
        let (xi, yi) = (level_index(x, x_levels)?, level_index(y, y_levels)?);
        for (&a, &b) in xi.iter().zip(&yi) {
            t.counts[a * t.cols + b] += 1;
        }
        Ok(t)
    }

    fn from_indices(xi: &[usize], m_x: usize, yi: &[usize], m_y: usize) -> Self {
        let mut counts = vec![0; m_x * m_y];
        for (&a, &b) in xi.iter().zip(yi) {
            counts[a * m_y + b] += 1;
        }
        Self {
            rows: m_x,
            cols: m_y,
            counts,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = Vec::with_capacity(self.counts.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                counts.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            counts,
        }
    }
}

fn level_index(col: &[i32], levels: &[i32]) -> Result<Vec<usize>> {
    col.iter()
        .map(|&v| {
            levels
                .binary_search(&v)
                .map_err(|_| Error::Spec(format!("value {v} is not one of the levels {levels:?}")))
        })
        .collect()
}

/// Pearson's χ² for independence. Rows and columns with a zero margin are
/// left out.
pub fn chi_square(table: &ContingencyTable) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let (rs, cs) = (table.row_sums(), table.col_sums());
    let n = n as f64;
    let mut chi = 0.0;
    for (i, &ri) in rs.iter().enumerate().filter(|(_, &r)| r > 0) {
        for (j, &cj) in cs.iter().enumerate().filter(|(_, &c)| c > 0) {
            let expected = ri as f64 * cj as f64 / n;
            let d = table.get(i, j) as f64 - expected;
            chi += d * d / expected;
        }
    }
    Ok(chi)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CramersVariant {
    /// `χ² / (n · min{M_p, M_q})`, no square root. Bounded by `(m−1)/m`.
    #[default]
    Paper,
    /// `√(χ² / (n · (min{M_p, M_q} − 1)))`, bounded by 1.
    Standard,
}

impl CramersVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CramersVariant::Paper => "paper",
            CramersVariant::Standard => "standard",
        }
    }
}

/// Cramér's V; `min{M_p, M_q}` is taken from the table's declared shape.
pub fn cramers_v(table: &ContingencyTable, variant: CramersVariant) -> Result<f64> {
    let chi = chi_square(table)?;
    let n = table.total() as f64;
    let m = table.rows.min(table.cols) as f64;
    match variant {
        CramersVariant::Paper => Ok(chi / (n * m)),
        CramersVariant::Standard => {
            if m < 2.0 {
                return Err(Error::Dimension("Cramér's V needs at least two levels per side".into()));
            }
            Ok((chi / (n * (m - 1.0))).sqrt())
        }
    }
}

/// Goodman–Kruskal concentration coefficient, with rows as the explanatory
/// variable and columns as the response:
/// `[Σ_ij π_ij²/π_i+ − Σ_j π_+j²] / [1 − Σ_j π_+j²]`.
///
/// `Ok(None)` when the column margin is degenerate.
pub fn concentration_coefficient(table: &ContingencyTable) -> Result<Option<f64>> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    // Multiplied through by n² so the margins stay integral and each row
    // term is a single rounded division.
    let n = u128::from(n);
    let col_sq: u128 = table.col_sums().iter().map(|&c| u128::from(c).pow(2)).sum();
    let denom = n * n - col_sq;
    if denom == 0 {
        return Ok(None);
    }
    let mut explained = 0.0;
    for (i, &ri) in table.row_sums().iter().enumerate() {
        if ri == 0 {
            continue;
        }
        let sq: u128 = (0..table.cols).map(|j| u128::from(table.get(i, j)).pow(2)).sum();
        explained += (n * sq) as f64 / ri as f64;
    }
    let (col_sq, denom) = (col_sq as f64, denom as f64);
    Ok(Some(((explained - col_sq) / denom).clamp(0.0, 1.0)))
}

/// Concordant minus discordant pairs, counting pairs tied in either
/// coordinate as neither. Knight's sort-and-merge method, O(n log n).
pub fn concordance_difference(x: &[i32], y: &[i32]) -> i64 {
    let n = x.len();
    if n < 2 {
        return 0;
    }
    let mut pairs: Vec<(i32, i32)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();

    let tied = |len: usize| (len * (len - 1) / 2) as i64;
    let runs = |v: &[(i32, i32)], key: fn(&(i32, i32)) -> (i32, i32)| -> i64 {
        v.chunk_by(|a, b| key(a) == key(b)).map(|c| tied(c.len())).sum()
    };
    let n0 = tied(n);
    let n1 = runs(&pairs, |p| (p.0, 0));
    let n3 = runs(&pairs, |p| *p);

    let mut ys: Vec<i32> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2: i64 = ys.chunk_by(|a, b| a == b).map(|c| tied(c.len())).sum();

    n0 - n1 - n2 + n3 - 2 * swaps
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [i32], buf: &mut [i32]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (a, b) = v.split_at_mut(mid);
        let (ba, bb) = buf.split_at_mut(mid);
        merge_count(a, ba) + merge_count(b, bb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Stuart–Kendall τ_c: `2(n_c − n_d) / [n² (m − 1)/m]` with
/// `m = min{M_p, M_q}` from the declared level counts.
pub fn stuart_kendall_tau_c(x: &[i32], y: &[i32], m_p: usize, m_q: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("columns of length {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Precondition(format!("τ_c needs at least 2 subjects, got {n}")));
    }
    let m = m_p.min(m_q);
    if m < 2 {
        return Err(Error::Precondition("τ_c needs at least two levels per variable".into()));
    }
    let s = concordance_difference(x, y) as f64;
    let n = n as f64;
    let m = m as f64;
    Ok(2.0 * s / (n * n * (m - 1.0) / m))
}

/// Sample Pearson correlation of level codes; `None` for a constant column.
pub fn pearson(x: &[i32], y: &[i32]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mean = |v: &[i32]| v.iter().map(|&a| a as f64).sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a as f64 - mx, b as f64 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Unbiased sample covariance of level codes.
pub fn sample_covariance(x: &[i32], y: &[i32]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mean = |v: &[i32]| v.iter().map(|&a| a as f64).sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let s: f64 = x.iter().zip(y).map(|(&a, &b)| (a as f64 - mx) * (b as f64 - my)).sum();
    Some(s / (n - 1) as f64)
}

/// Columns of observed level codes with their declared domains.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    variables: Vec<Variable>,
    columns: Vec<Vec<i32>>,
}

impl Observations {
    pub fn new(variables: Vec<Variable>, columns: Vec<Vec<i32>>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} variables for {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (v, col) in variables.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Dimension(format!("column `{}` has {} rows, expected {n}", v.name, col.len())));
            }
            level_index(col, v.domain.levels())
                .map_err(|e| Error::Spec(format!("column `{}`: {e}", v.name)))?;
        }
        Ok(Self { variables, columns })
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            variables: ds.variables().to_vec(),
            columns: (0..ds.num_variables()).map(|p| ds.column(p)).collect(),
        }
    }

    /// Reads a headered integer CSV. With `variables`, the header must match
    /// their names; otherwise each column's levels are the distinct observed
    /// codes and its kind is `default_kind`.
    pub fn from_csv<R: Read>(
        reader: R,
        variables: Option<&[Variable]>,
        default_kind: VariableKind,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (p, field) in rec.iter().enumerate() {
                let v = field.trim().parse::<i32>().map_err(|_| {
                    Error::Spec(format!("row {}, column `{}`: `{field}` is not an integer", line + 1, names[p]))
                })?;
                columns[p].push(v);
            }
        }
        let variables = match variables {
            Some(vars) => {
                let declared: Vec<&str> = vars.iter().map(|v| v.name.as_str()).collect();
                if declared != names {
                    return Err(Error::Dimension(format!(
                        "data header {names:?} does not match declared variables {declared:?}"
                    )));
                }
                vars.to_vec()
            }
            None => names
                .iter()
                .zip(&columns)
                .map(|(name, col)| {
                    let levels: Vec<i32> = col.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
                    let domain = VariableDomain::new(levels, default_kind).map_err(|_| {
                        Error::Spec(format!(
                            "column `{name}` has fewer than two observed levels; declare its levels"
                        ))
                    })?;
                    Ok(Variable::new(name.clone(), domain))
                })
                .collect::<Result<_>>()?,
        };
        Self::new(variables, columns)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn column(&self, p: usize) -> &[i32] {
        &self.columns[p]
    }

    pub fn num_subjects(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn num_variables(&self) -> usize {
        self.columns.len()
    }

    fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    CramersV(CramersVariant),
    /// Directed; see [`association_matrix`] for the orientation.
    Vcc,
    TauC,
    Pearson,
}

impl Measure {
    pub fn tag(self) -> String {
        match self {
            Measure::CramersV(v) => format!("cramers_v_{}", v.as_str()),
            Measure::Vcc => "vcc".into(),
            Measure::TauC => "tau_c".into(),
            Measure::Pearson => "pearson".into(),
        }
    }

    fn accepts(self, kind: VariableKind) -> bool {
        match self {
            Measure::CramersV(_) | Measure::Vcc => true,
            Measure::TauC => kind.is_ordered(),
            Measure::Pearson => kind == VariableKind::Interval,
        }
    }

    /// Valid range of an off-diagonal value for `m = min{M_p, M_q}`.
    fn range(self, m: usize) -> (f64, f64) {
        match self {
            Measure::CramersV(CramersVariant::Paper) => (0.0, (m as f64 - 1.0) / m as f64),
            Measure::CramersV(CramersVariant::Standard) | Measure::Vcc => (0.0, 1.0),
            Measure::TauC | Measure::Pearson => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// P × P grid of one association measure.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationMatrix {
    pub measure: Measure,
    pub values: Matrix,
}

impl AssociationMatrix {
    /// Averages `(p, q)` with `(q, p)`; only changes V_cc.
    pub fn symmetrized(&self) -> Self {
        Self {
            measure: self.measure,
            values: self.values.symmetrized(),
        }
    }

    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "q", "measure", "value"])?;
        let names = self.values.names();
        let tag = self.measure.tag();
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                w.write_record([a, b, &tag, &format_cell(self.values.get(i, j))])?;
            }
        }
        w.flush().map_err(|e| Error::io("<association>", e))?;
        Ok(())
    }
}

/// Index form of a column, shared by every pair it takes part in.
struct Coded {
    idx: Vec<usize>,
    levels: usize,
    varies: bool,
}

/// All pairwise values of `measure`.
///
/// The diagonal is 1 for any column with at least two observed levels and
/// undefined otherwise. Pairs whose kinds the measure does not accept are
/// undefined. V_cc is directed: cell `(p, q)` treats `x_p` as the rows and
/// `x_q` as the columns of the table, so it measures how well `x_p` explains
/// `x_q`. The other measures are symmetric.
pub fn association_matrix(obs: &Observations, measure: Measure) -> Result<AssociationMatrix> {
    let p = obs.num_variables();
    if obs.num_subjects() == 0 {
        return Err(Error::EmptyTable);
    }
    let coded: Vec<Coded> = obs
        .variables
        .iter()
        .zip(&obs.columns)
        .map(|(v, col)| {
            let idx = level_index(col, v.domain.levels())?;
            let varies = idx.windows(2).any(|w| w[0] != w[1]);
            Ok(Coded {
                idx,
                levels: v.domain.len(),
                varies,
            })
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let values: Vec<(Option<f64>, Option<f64>)> = pairs
        .par_iter()
        .map(|&(i, j)| pair_value(obs, &coded, measure, i, j))
        .collect::<Result<_>>()?;

    let mut m = Matrix::from_fn(obs.names(), |i, j| {
        (i == j && coded[i].varies).then_some(1.0)
    });
    for (&(i, j), &(ij, ji)) in pairs.iter().zip(&values) {
        m.set(i, j, ij);
        m.set(j, i, ji);
    }
    Ok(AssociationMatrix { measure, values: m })
}

fn pair_value(
    obs: &Observations,
    coded: &[Coded],
    measure: Measure,
    i: usize,
    j: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    let (vi, vj) = (&obs.variables[i], &obs.variables[j]);
    if !measure.accepts(vi.domain.kind()) || !measure.accepts(vj.domain.kind()) {
        return Ok((None, None));
    }
    let (a, b) = (&coded[i], &coded[j]);
    let (ij, ji) = match measure {
        Measure::Pearson => {
            let r = pearson(&obs.columns[i], &obs.columns[j]);
            (r, r)
        }
        Measure::TauC => {
            let t = stuart_kendall_tau_c(&obs.columns[i], &obs.columns[j], a.levels, b.levels)?;
            (Some(t), Some(t))
        }
        Measure::CramersV(variant) => {
            let t = ContingencyTable::from_indices(&a.idx, a.levels, &b.idx, b.levels);
            let v = cramers_v(&t, variant)?;
            (Some(v), Some(v))
        }
        Measure::Vcc => {
            let t = ContingencyTable::from_indices(&a.idx, a.levels, &b.idx, b.levels);
            (concentration_coefficient(&t)?, concentration_coefficient(&t.transpose())?)
        }
    };
    let (lo, hi) = measure.range(a.levels.min(b.levels));
    for v in [ij, ji].into_iter().flatten() {
        debug_assert!(
            v >= lo - 1e-12 && v <= hi + 1e-12,
            "{measure} value {v} outside [{lo}, {hi}]"
        );
    }
    Ok((ij, ji))
}
