use super::{musa_pool, Complex64, NomaError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    PdNoma,
    Scma,
    Pdma,
    Musa,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PdNoma => "pd-noma",
            Scheme::Scma => "scma",
            Scheme::Pdma => "pdma",
            Scheme::Musa => "musa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd-noma" | "pdnoma" | "pd_noma" => Some(Scheme::PdNoma),
            "scma" => Some(Scheme::Scma),
            "pdma" => Some(Scheme::Pdma),
            "musa" => Some(Scheme::Musa),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scheme-specific construction parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixParams {
    PdNoma,
    Scma { column_weight: usize },
    /// One 0/1 pattern of length K per column.
    Pdma { patterns: Vec<Vec<u8>> },
    /// Sequences drawn from `alphabet`; `restarts` bounds the pool search.
    Musa { alphabet: Vec<Complex64>, restarts: usize },
}

impl MatrixParams {
    pub fn scheme(&self) -> Scheme {
        match self {
            MatrixParams::PdNoma => Scheme::PdNoma,
            MatrixParams::Scma { .. } => Scheme::Scma,
            MatrixParams::Pdma { .. } => Scheme::Pdma,
            MatrixParams::Musa { .. } => Scheme::Musa,
        }
    }
}

/// K resource blocks by N layers. An entry is occupied iff its coefficient
/// is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingMatrix {
    scheme: Scheme,
    rows: usize,
    cols: usize,
    coefficients: Vec<Complex64>,
}

impl SpreadingMatrix {
    /// `coefficients` is row-major.
    pub fn new(
        scheme: Scheme,
        rows: usize,
        cols: usize,
        coefficients: Vec<Complex64>,
    ) -> Result<Self, NomaError> {
        if rows == 0 || cols == 0 {
            return Err(NomaError::EmptyMatrix { rows, cols });
        }
        if coefficients.len() != rows * cols {
            return Err(NomaError::CoefficientCount { expected: rows * cols, got: coefficients.len() });
        }
        let m = Self { scheme, rows, cols, coefficients };
        m.validate()?;
        Ok(m)
    }

    pub fn from_occupancy(scheme: Scheme, occupancy: &[Vec<u8>]) -> Result<Self, NomaError> {
        let rows = occupancy.len();
        let cols = occupancy.first().map_or(0, Vec::len);
        let mut coefficients = Vec::with_capacity(rows * cols);
        for row in occupancy {
            if row.len() != cols {
                return Err(NomaError::CoefficientCount { expected: cols, got: row.len() });
            }
            coefficients.extend(row.iter().map(|&b| {
                if b != 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
        Self::new(scheme, rows, cols, coefficients)
    }

    fn validate(&self) -> Result<(), NomaError> {
        for c in 0..self.cols {
            if self.weight(c) == 0 {
                return Err(NomaError::ZeroColumn(c));
            }
        }
        match self.scheme {
            Scheme::PdNoma => {
                if self.rows != 1 {
                    return Err(NomaError::PdNomaRows(self.rows));
                }
            }
            Scheme::Scma | Scheme::Pdma => {
                if self.scheme == Scheme::Scma {
                    let expected = self.weight(0);
                    for c in 1..self.cols {
                        let w = self.weight(c);
                        if w != expected {
                            return Err(NomaError::UnequalWeights { col: c, weight: w, expected });
                        }
                    }
                }
                if self.rows > 1
                    && self.cols > 1
                    && (0..self.rows).all(|k| self.row_weight(k) == self.cols)
                {
                    return Err(NomaError::DenseMatrix { rows: self.rows, cols: self.cols });
                }
                for a in 0..self.cols {
                    for b in a + 1..self.cols {
                        if (0..self.rows).all(|k| self.is_occupied(k, a) == self.is_occupied(k, b)) {
                            return Err(NomaError::DuplicateColumns(a, b));
                        }
                    }
                }
            }
            Scheme::Musa => {}
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coefficient(&self, row: usize, col: usize) -> Complex64 {
        self.coefficients[row * self.cols + col]
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.coefficient(row, col) != Complex64::new(0.0, 0.0)
    }

    fn weight(&self, col: usize) -> usize {
        (0..self.rows).filter(|&k| self.is_occupied(k, col)).count()
    }

    pub fn row_weight(&self, row: usize) -> usize {
        (0..self.cols).filter(|&c| self.is_occupied(row, c)).count()
    }

    /// Number of resource blocks occupied by column `col`.
    pub fn column_weight(&self, col: usize) -> Result<usize, NomaError> {
        if col >= self.cols {
            return Err(NomaError::ColumnOutOfRange { index: col, cols: self.cols });
        }
        Ok(self.weight(col))
    }

    /// Rows occupied by a column, ascending.
    pub fn column_support(&self, col: usize) -> Vec<usize> {
        (0..self.rows).filter(|&k| self.is_occupied(k, col)).collect()
    }

    /// Columns occupying a row, ascending.
    pub fn row_support(&self, row: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.is_occupied(row, c)).collect()
    }

    /// Copy with columns reordered: new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self, NomaError> {
        if perm.len() != self.cols {
            return Err(NomaError::CoefficientCount { expected: self.cols, got: perm.len() });
        }
        let mut coefficients = Vec::with_capacity(self.coefficients.len());
        for k in 0..self.rows {
            for &src in perm {
                if src >= self.cols {
                    return Err(NomaError::ColumnOutOfRange { index: src, cols: self.cols });
                }
                coefficients.push(self.coefficient(k, src));
            }
        }
        Self::new(self.scheme, self.rows, self.cols, coefficients)
    }

    /// Occupancy as a 0/1 grid, one row per line.
    pub fn to_grid(&self) -> String {
        let mut out = String::new();
        for k in 0..self.rows {
            let line: Vec<&str> = (0..self.cols)
                .map(|c| if self.is_occupied(k, c) { "1" } else { "0" })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Lexicographic k-subsets of `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Builds a scheme-consistent `rows x cols` spreading matrix.
///
/// SCMA takes the first `cols` weight-`d_v` columns in lexicographic order of
/// their supports, so `K=4, N=6, d_v=2` yields all six distinct columns.
pub fn build_matrix<R: Rng + ?Sized>(
    params: &MatrixParams,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<SpreadingMatrix, NomaError> {
    if rows == 0 || cols == 0 {
        return Err(NomaError::EmptyMatrix { rows, cols });
    }
    match params {
        MatrixParams::PdNoma => {
            if rows != 1 {
                return Err(NomaError::PdNomaRows(rows));
            }
            SpreadingMatrix::new(Scheme::PdNoma, 1, cols, vec![Complex64::new(1.0, 0.0); cols])
        }
        MatrixParams::Scma { column_weight } => {
            let d = *column_weight;
            if d == 0 || d > rows {
                return Err(NomaError::InvalidColumnWeight { weight: d, rows });
            }
            let available = binomial(rows, d);
            if available < cols as u128 {
                return Err(NomaError::NotEnoughColumns { available, weight: d, requested: cols });
            }
            let supports = combinations(rows, d);
            let mut occupancy = vec![vec![0u8; cols]; rows];
            for (c, support) in supports.iter().take(cols).enumerate() {
                for &k in support {
                    occupancy[k][c] = 1;
                }
            }
            SpreadingMatrix::from_occupancy(Scheme::Scma, &occupancy)
        }
        MatrixParams::Pdma { patterns } => {
            if patterns.len() != cols || patterns.iter().any(|p| p.len() != rows) {
                return Err(NomaError::PatternShape {
                    expected: cols,
                    rows,
                    detail: format!(
                        "{} patterns with lengths {:?}",
                        patterns.len(),
                        patterns.iter().map(Vec::len).collect::<Vec<_>>()
                    ),
                });
            }
            let occupancy: Vec<Vec<u8>> = (0..rows)
                .map(|k| patterns.iter().map(|p| p[k]).collect())
                .collect();
            SpreadingMatrix::from_occupancy(Scheme::Pdma, &occupancy)
        }
        MatrixParams::Musa { alphabet, restarts } => {
            let pool = musa_pool(cols, rows, alphabet, *restarts, rng)?;
            let mut coefficients = Vec::with_capacity(rows * cols);
            for k in 0..rows {
                for seq in &pool.sequences {
                    coefficients.push(seq[k]);
                }
            }
            SpreadingMatrix::new(Scheme::Musa, rows, cols, coefficients)
        }
    }
}

/// Maps users (listed strongest first by average received power) to columns:
/// the i-th strongest user receives the i-th lightest column, ties between
/// equal weights going to the lower column index.
///
/// Returns the column for each input user, aligned with `users`.
pub fn assign_columns(matrix: &SpreadingMatrix, users: &[usize]) -> Result<Vec<usize>, NomaError> {
    if users.len() > matrix.cols() {
        return Err(NomaError::TooManyUsers { users: users.len(), cols: matrix.cols() });
    }
    let mut order: Vec<usize> = (0..matrix.cols()).collect();
    order.sort_by_key(|&c| (matrix.weight(c), c));
    Ok(order.into_iter().take(users.len()).collect())
}
