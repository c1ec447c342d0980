use super::{Complex64, NomaError};
use std::f64::consts::PI;

/// Unit average-energy PSK alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
}

impl Constellation {
    /// BPSK for 2, QPSK (Gray-free, π/4 offset) for 4, 8-PSK for 8.
    pub fn psk(order: usize) -> Result<Self, NomaError> {
        let offset = match order {
            2 => 0.0,
            4 => PI / 4.0,
            8 => 0.0,
            _ => return Err(NomaError::UnsupportedOrder(order)),
        };
        let points = (0..order)
            .map(|m| Complex64::from_polar(1.0, offset + 2.0 * PI * m as f64 / order as f64))
            .collect();
        Ok(Self { points })
    }

    pub fn from_points(points: Vec<Complex64>) -> Result<Self, NomaError> {
        if points.is_empty() {
            return Err(NomaError::EmptyAlphabet);
        }
        Ok(Self { points })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Result<Complex64, NomaError> {
        self.points
            .get(index)
            .copied()
            .ok_or(NomaError::SymbolOutOfRange { index, order: self.points.len() })
    }

    /// Minimum-distance decision; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            // the relative margin keeps float noise from breaking exact ties
            if d < best_d * (1.0 - 1e-12) {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}
