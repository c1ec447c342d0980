use super::{Complex64, Constellation, NomaError, Scheme, SpreadingMatrix};
use std::f64::consts::PI;
use std::fmt::Write as _;

const ENERGY_TOLERANCE: f64 = 1e-9;

/// Per-layer map from a Q-ary symbol to a K-dimensional codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    scheme: Scheme,
    rows: usize,
    order: usize,
    /// `codewords[layer][symbol][row]`
    codewords: Vec<Vec<Vec<Complex64>>>,
}

impl Codebook {
    pub fn new(
        scheme: Scheme,
        rows: usize,
        order: usize,
        codewords: Vec<Vec<Vec<Complex64>>>,
    ) -> Result<Self, NomaError> {
        if !matches!(order, 2 | 4 | 8) {
            return Err(NomaError::UnsupportedOrder(order));
        }
        if codewords.is_empty() || rows == 0 {
            return Err(NomaError::CodebookMismatch("codebook has no layers or rows".into()));
        }
        for (l, layer) in codewords.iter().enumerate() {
            if layer.len() != order {
                return Err(NomaError::CodebookMismatch(format!(
                    "layer {l} has {} codewords, expected {order}",
                    layer.len()
                )));
            }
            for (s, cw) in layer.iter().enumerate() {
                if cw.len() != rows {
                    return Err(NomaError::CodebookMismatch(format!(
                        "layer {l} symbol {s} has length {}, expected {rows}",
                        cw.len()
                    )));
                }
            }
            let energy = layer.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>() / order as f64;
            if (energy - 1.0).abs() > ENERGY_TOLERANCE {
                return Err(NomaError::CodebookMismatch(format!(
                    "layer {l} has average energy {energy}, expected 1"
                )));
            }
        }
        Ok(Self { scheme, rows, order, codewords })
    }

    /// PSK symbols spread over each column's support with the column's
    /// coefficients, normalised to unit energy and rotated per layer by
    /// `2πl/(N·Q)`.
    pub fn default_for(matrix: &SpreadingMatrix, order: usize) -> Result<Self, NomaError> {
        let base = Constellation::psk(order)?;
        let n = matrix.cols();
        let mut codewords = Vec::with_capacity(n);
        for l in 0..n {
            let norm = (0..matrix.rows())
                .map(|k| matrix.coefficient(k, l).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let rotation = Complex64::from_polar(1.0, 2.0 * PI * l as f64 / (n * order) as f64);
            let layer = base
                .points()
                .iter()
                .map(|&x| {
                    (0..matrix.rows())
                        .map(|k| matrix.coefficient(k, l) / norm * x * rotation)
                        .collect()
                })
                .collect();
            codewords.push(layer);
        }
        Self::new(matrix.scheme(), matrix.rows(), order, codewords)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn layers(&self) -> usize {
        self.codewords.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn codeword(&self, layer: usize, symbol: usize) -> &[Complex64] {
        &self.codewords[layer][symbol]
    }

    /// Noiseless superposition of one symbol per layer.
    pub fn transmit(&self, symbols: &[usize]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for (l, &s) in symbols.iter().enumerate() {
            for (yk, c) in y.iter_mut().zip(&self.codewords[l][s]) {
                *yk += c;
            }
        }
        y
    }

    /// Layers reordered so that new layer `j` is old layer `perm[j]`.
    pub fn permute_layers(&self, perm: &[usize]) -> Result<Self, NomaError> {
        if perm.len() != self.layers() || perm.iter().any(|&p| p >= self.layers()) {
            return Err(NomaError::CodebookMismatch("invalid layer permutation".into()));
        }
        let codewords = perm.iter().map(|&p| self.codewords[p].clone()).collect();
        Self::new(self.scheme, self.rows, self.order, codewords)
    }

    /// Checks dimensions and that no codeword leaves its column's support.
    pub fn check_against(&self, matrix: &SpreadingMatrix) -> Result<(), NomaError> {
        if matrix.rows() != self.rows || matrix.cols() != self.layers() {
            return Err(NomaError::CodebookMismatch(format!(
                "codebook is {}x{}, matrix is {}x{}",
                self.rows,
                self.layers(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        for (l, layer) in self.codewords.iter().enumerate() {
            for (s, cw) in layer.iter().enumerate() {
                for (k, c) in cw.iter().enumerate() {
                    if !matrix.is_occupied(k, l) && c.norm_sqr() != 0.0 {
                        return Err(NomaError::CodebookMismatch(format!(
                            "layer {l} symbol {s} uses row {k} outside its column support"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Text form:
    ///
    /// ```text
    /// scheme scma
    /// rows 4
    /// cols 6
    /// order 4
    /// cw <layer> <symbol> <re_0> <im_0> ... <re_{K-1}> <im_{K-1}>
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "scheme {}", self.scheme).unwrap();
        writeln!(out, "rows {}", self.rows).unwrap();
        writeln!(out, "cols {}", self.layers()).unwrap();
        writeln!(out, "order {}", self.order).unwrap();
        for (l, layer) in self.codewords.iter().enumerate() {
            for (s, cw) in layer.iter().enumerate() {
                write!(out, "cw {l} {s}").unwrap();
                for c in cw {
                    write!(out, " {:?} {:?}", c.re, c.im).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NomaError> {
        let mut scheme = None;
        let mut rows = None;
        let mut cols = None;
        let mut order = None;
        let mut entries: Vec<(usize, usize, usize, Vec<Complex64>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| NomaError::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let single = |rest: &[&str]| -> Result<usize, NomaError> {
                match rest {
                    [v] => v.parse().map_err(|_| err(format!("invalid integer {v:?}"))),
                    _ => Err(err(format!("expected one value after {key}"))),
                }
            };
            match key {
                "scheme" => {
                    let name = rest.first().ok_or_else(|| err("missing scheme name".into()))?;
                    scheme = Some(Scheme::parse(name).ok_or_else(|| err(format!("unknown scheme {name}")))?);
                }
                "rows" => rows = Some(single(&rest)?),
                "cols" => cols = Some(single(&rest)?),
                "order" => order = Some(single(&rest)?),
                "cw" => {
                    if rest.len() < 2 || !rest.len().is_multiple_of(2) {
                        return Err(err("cw needs layer, symbol and re/im pairs".into()));
                    }
                    let layer: usize = rest[0].parse().map_err(|_| err("invalid layer".into()))?;
                    let symbol: usize = rest[1].parse().map_err(|_| err("invalid symbol".into()))?;
                    let nums: Vec<f64> = rest[2..]
                        .iter()
                        .map(|v| v.parse::<f64>().map_err(|_| err(format!("invalid number {v:?}"))))
                        .collect::<Result<_, _>>()?;
                    let cw = nums.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
                    entries.push((line_no, layer, symbol, cw));
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |what: &str| NomaError::Parse { line: 0, msg: format!("missing {what}") };
        let scheme = scheme.ok_or_else(|| missing("scheme"))?;
        let rows = rows.ok_or_else(|| missing("rows"))?;
        let cols = cols.ok_or_else(|| missing("cols"))?;
        let order = order.ok_or_else(|| missing("order"))?;
        let mut slots: Vec<Vec<Option<Vec<Complex64>>>> = vec![vec![None; order]; cols];
        for (line, layer, symbol, cw) in entries {
            if layer >= cols || symbol >= order {
                return Err(NomaError::Parse { line, msg: "layer or symbol out of range".into() });
            }
            if slots[layer][symbol].replace(cw).is_some() {
                return Err(NomaError::Parse { line, msg: "duplicate codeword".into() });
            }
        }
        let codewords = slots
            .into_iter()
            .enumerate()
            .map(|(l, layer)| {
                layer
                    .into_iter()
                    .enumerate()
                    .map(|(s, cw)| cw.ok_or_else(|| missing(&format!("codeword for layer {l} symbol {s}"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(scheme, rows, order, codewords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::{build_matrix, MatrixParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scma() -> SpreadingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        build_matrix(&MatrixParams::Scma { column_weight: 2 }, 4, 6, &mut rng).unwrap()
    }

    #[test]
    fn default_codebook_respects_support_and_energy() {
        let m = scma();
        for q in [2, 4, 8] {
            let cb = Codebook::default_for(&m, q).unwrap();
            cb.check_against(&m).unwrap();
            for l in 0..6 {
                let e: f64 = (0..q).map(|s| cb.codeword(l, s).iter().map(|c| c.norm_sqr()).sum::<f64>()).sum();
                assert!((e / q as f64 - 1.0).abs() < 1e-12);
            }
        }
        assert!(Codebook::default_for(&m, 16).is_err());
    }

    #[test]
    fn support_violation_detected() {
        let m = scma();
        let cb = Codebook::default_for(&m, 4).unwrap();
        // layer 0 of the SCMA matrix occupies rows {0,1}; swap in layer 5 (rows {2,3})
        let perm = [5, 1, 2, 3, 4, 0];
        let bad = cb.permute_layers(&perm).unwrap();
        assert!(matches!(bad.check_against(&m), Err(NomaError::CodebookMismatch(_))));
    }

    #[test]
    fn energy_enforced() {
        let cw = vec![vec![vec![Complex64::new(2.0, 0.0)], vec![Complex64::new(-2.0, 0.0)]]];
        assert!(Codebook::new(Scheme::PdNoma, 1, 2, cw).is_err());
    }

    #[test]
    fn parse_errors_name_line() {
        let err = Codebook::from_text("scheme scma\nrows x\n").unwrap_err();
        assert!(matches!(err, NomaError::Parse { line: 2, .. }));
        let err = Codebook::from_text("bogus 1\n").unwrap_err();
        assert!(matches!(err, NomaError::Parse { line: 1, .. }));
        let err = Codebook::from_text("scheme scma\nrows 1\ncols 1\norder 2\ncw 0 0 1 0\n").unwrap_err();
        assert!(matches!(err, NomaError::Parse { .. }));
    }

    proptest! {
        #[test]
        fn text_round_trip(q_idx in 0usize..3, phase in 0.0f64..std::f64::consts::TAU) {
            let q = [2, 4, 8][q_idx];
            let m = scma();
            let base = Codebook::default_for(&m, q).unwrap();
            let rot = Complex64::from_polar(1.0, phase);
            let rotated: Vec<Vec<Vec<Complex64>>> = base
                .codewords
                .iter()
                .map(|layer| layer.iter().map(|cw| cw.iter().map(|c| c * rot).collect()).collect())
                .collect();
            let cb = Codebook::new(Scheme::Scma, 4, q, rotated).unwrap();
            let back = Codebook::from_text(&cb.to_text()).unwrap();
            prop_assert_eq!(back, cb);
        }
    }
}
