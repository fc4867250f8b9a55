//! Sample containers shared by the estimators.

use crate::error::{Error, Result};

/// `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
}

impl PointSet {
    /// Builds a point set from row-major coordinates.
    pub fn new(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::InvalidInput("point set is empty".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into rows of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { coords, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, dim)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Keeps the rows whose index satisfies `keep`; `None` if no row survives.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> Option<PointSet> {
        let coords: Vec<f64> = self
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        if coords.is_empty() {
            None
        } else {
            Some(PointSet {
                coords,
                dim: self.dim,
            })
        }
    }
}

/// Covariates paired with one real response per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub covariates: PointSet,
    pub responses: Vec<f64>,
}

impl Sample {
    pub fn new(covariates: PointSet, responses: Vec<f64>) -> Result<Self> {
        if covariates.len() != responses.len() {
            return Err(Error::InvalidInput(format!(
                "{} covariate rows but {} responses",
                covariates.len(),
                responses.len()
            )));
        }
        if let Some(i) = responses.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response in row {i}")));
        }
        Ok(Self {
            covariates,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    /// Same covariates, responses replaced.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::new(self.covariates.clone(), responses)
    }
}

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSupport {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSupport {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite bound on axis {i}")));
            }
            if a >= b {
                return Err(Error::InvalidInput(format!(
                    "lower bound {a} is not below upper bound {b} on axis {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Maps a point of the unit cube onto the box, coordinate by coordinate.
    #[inline]
    pub fn from_unit(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.lower.len() {
            out[i] = self.lower[i] + (self.upper[i] - self.lower[i]) * u[i];
        }
    }
}

/// Outcomes, covariates and binary treatment indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentDataset {
    pub outcomes: Vec<f64>,
    pub covariates: PointSet,
    pub treated: Vec<bool>,
}

impl TreatmentDataset {
    pub fn new(outcomes: Vec<f64>, covariates: PointSet, treated: Vec<bool>) -> Result<Self> {
        if outcomes.len() != covariates.len() || treated.len() != outcomes.len() {
            return Err(Error::InvalidInput(format!(
                "lengths disagree: {} outcomes, {} covariate rows, {} treatment indicators",
                outcomes.len(),
                covariates.len(),
                treated.len()
            )));
        }
        if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite outcome in row {i}")));
        }
        Ok(Self {
            outcomes,
            covariates,
            treated,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    /// Units of one arm as a regression sample; `None` if the arm is empty.
    pub fn arm(&self, treated: bool) -> Option<Sample> {
        let covariates = self.covariates.select(|i| self.treated[i] == treated)?;
        let responses = self
            .outcomes
            .iter()
            .zip(&self.treated)
            .filter(|(_, &t)| t == treated)
            .map(|(y, _)| *y)
            .collect();
        Some(Sample {
            covariates,
            responses,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_point_set_is_rejected() {
        assert!(PointSet::new(vec![], 2).is_err());
        assert!(PointSet::new(vec![0.0, f64::NAN], 2).is_err());
        assert!(PointSet::new(vec![0.0, 1.0, 2.0], 2).is_err());
    }

    #[test]
    fn box_volume_and_membership() {
        let b = BoxSupport::cube(0.2, 0.8, 3).unwrap();
        assert!((b.volume() - 0.216).abs() < 1e-15);
        assert!(b.contains(&[0.2, 0.5, 0.8]));
        assert!(!b.contains(&[0.1, 0.5, 0.5]));
        assert!(BoxSupport::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn arms_split_by_indicator() {
        let z = PointSet::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let data = TreatmentDataset::new(vec![1.0, 2.0, 3.0], z, vec![true, false, true]).unwrap();
        let t = data.arm(true).unwrap();
        assert_eq!(t.responses, vec![1.0, 3.0]);
        assert_eq!(t.covariates.point(1), &[2.0]);
        assert_eq!(data.n_control(), 1);
        let all_treated = TreatmentDataset::new(
            vec![1.0],
            PointSet::from_rows(&[[0.0]]).unwrap(),
            vec![true],
        )
        .unwrap();
        assert!(all_treated.arm(false).is_none());
    }
}
