//! H/L block layouts that give each cluster a distinct profile.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DependenceTarget, GroupStructure};

/// Correlation assigned to padding groups.
pub const PAD_CORRELATION: f64 = 0.01;
/// Variables per padding group.
pub const DEFAULT_PAD_SIZE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    H,
    L,
    /// Noise: drawn from one distribution irrespective of the cluster.
    A,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::H => "H",
            Label::L => "L",
            Label::A => "A",
        })
    }
}

/// Cluster-by-variable grid of H/L/A labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternMatrix {
    rows: Vec<Vec<Label>>,
}

impl PatternMatrix {
    pub fn from_rows(rows: Vec<Vec<Label>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("pattern rows must be non-empty and equal length".into()));
        }
        Ok(Self { rows })
    }

    pub fn num_clusters(&self) -> usize {
        self.rows.len()
    }

    pub fn num_variables(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<Label>] {
        &self.rows
    }

    /// Label of cluster `c`, variable `p` (zero-based).
    pub fn get(&self, c: usize, p: usize) -> Label {
        self.rows[c][p]
    }

    pub fn column(&self, p: usize) -> Vec<Label> {
        self.rows.iter().map(|r| r[p]).collect()
    }

    /// Keeps the first `c` cluster rows.
    pub fn truncate(mut self, c: usize) -> Self {
        self.rows.truncate(c.max(1));
        self
    }

    /// Row rendered as a compact string, e.g. `"LLHH"`.
    pub fn row_string(&self, c: usize) -> String {
        self.rows[c].iter().map(Label::to_string).collect()
    }

    /// Number of cluster pairs `c1 < c2` whose labels differ in column `p`.
    pub fn differing_pairs(&self, p: usize) -> usize {
        let col = self.column(p);
        let mut count = 0;
        for c1 in 0..col.len() {
            for c2 in c1 + 1..col.len() {
                if col[c1] != col[c2] {
                    count += 1;
                }
            }
        }
        count
    }

    /// CSV with a `cluster` column followed by one column per variable.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        if names.len() != self.num_variables() {
            return Err(Error::Dimension(format!(
                "{} names for {} pattern columns",
                names.len(),
                self.num_variables()
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["cluster".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (c, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(c + 1).to_string()];
            rec.extend(row.iter().map(Label::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<pattern>", e))?;
        Ok(())
    }
}

/// Label of one-based cluster `c` at column `j` of a `width`-column layout.
///
/// Odd clusters alternate L/H blocks of `width / 2^((c−1)/2)` columns starting
/// with L; even clusters alternate H/L blocks of `width / 2^(c/2 − 1)` columns
/// starting with H.
fn block_label(c: usize, j: usize, width: usize) -> Label {
    let (halvings, first, second) = if c % 2 == 1 {
        ((c - 1) / 2, Label::L, Label::H)
    } else {
        (c / 2 - 1, Label::H, Label::L)
    };
    let block = width >> halvings;
    if (j / block).is_multiple_of(2) {
        first
    } else {
        second
    }
}

/// Number of column blocks the last cluster row needs: `2^(C/2 − 1)` for even
/// `C`, `2^((C+1)/2 − 1)` for odd `C`.
pub fn required_multiple(c: usize) -> Result<usize> {
    if c == 0 {
        return Err(Error::Spec("at least one cluster is required".into()));
    }
    let exponent = c.div_ceil(2) - 1;
    if exponent >= usize::BITS as usize - 1 {
        return Err(Error::Spec(format!("{c} clusters is too many for a balanced pattern")));
    }
    Ok(1 << exponent)
}

/// Balanced H/L layout for `c` clusters over `p` variables.
pub fn balanced_pattern(c: usize, p: usize) -> Result<PatternMatrix> {
    let multiple = required_multiple(c)?;
    if p == 0 || !p.is_multiple_of(multiple) {
        return Err(Error::Spec(format!(
            "{c} clusters need P to be a positive multiple of {multiple}, got {p}"
        )));
    }
    let rows = (1..=c)
        .map(|cl| (0..p).map(|j| block_label(cl, j, p)).collect())
        .collect();
    Ok(PatternMatrix { rows })
}

/// Layout for homogenous groups of unequal size.
///
/// The balanced layout is built over the `k` groups with `C = 2(log₂k + 1)`,
/// each group column is repeated `l_v` times and noise columns are appended
/// with label A.
pub fn grouped_pattern(groups: &GroupStructure) -> Result<(PatternMatrix, usize)> {
    let k = groups.k();
    if !k.is_power_of_two() {
        return Err(Error::Spec(format!(
            "number of homogenous groups must be a power of 2, got {k}"
        )));
    }
    let c = groups.num_clusters();
    let coarse = balanced_pattern(c, k)?;
    let rows = coarse
        .rows
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(groups.num_variables());
            for (label, &size) in row.iter().zip(groups.sizes()) {
                out.extend(std::iter::repeat_n(*label, size));
            }
            out.extend(std::iter::repeat_n(Label::A, groups.noise_count()));
            out
        })
        .collect();
    Ok((PatternMatrix { rows }, c))
}

/// Appends padding groups of `pad_size` variables at correlation 0.01 until the
/// group count is a power of two.
pub fn pad_groups_with(real: &[(usize, f64)], pad_size: usize) -> Result<GroupStructure> {
    if real.is_empty() {
        return Err(Error::Spec("at least one group is required".into()));
    }
    if pad_size == 0 {
        return Err(Error::Spec("padding groups need at least one variable".into()));
    }
    let k = real.len().next_power_of_two();
    let mut sizes: Vec<usize> = real.iter().map(|&(l, _)| l).collect();
    let mut targets: Vec<Option<DependenceTarget>> = real
        .iter()
        .map(|&(_, r)| Some(DependenceTarget::Correlation(r)))
        .collect();
    sizes.resize(k, pad_size);
    targets.resize(k, Some(DependenceTarget::Correlation(PAD_CORRELATION)));
    GroupStructure::new(sizes, targets, 0)
}

pub fn pad_groups(real: &[(usize, f64)]) -> Result<GroupStructure> {
    pad_groups_with(real, DEFAULT_PAD_SIZE)
}
