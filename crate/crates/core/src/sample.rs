use crate::error::{Error, Result};

/// Strictly increasing observation grid with positive weights summing to one.
///
/// Tied observations are collapsed into a single point whose weight is the
/// tie count over `n_raw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
    n_raw: usize,
}

impl SortedSample {
    /// Builds a sample from raw observations in any order.
    pub fn from_observations(obs: &[f64]) -> Result<Self> {
        if let Some(i) = obs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut sorted = obs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut counts: Vec<usize> = Vec::with_capacity(sorted.len());
        for x in sorted {
            match points.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    points.push(x);
                    counts.push(1);
                }
            }
        }
        if points.len() < 2 {
            return Err(Error::DegenerateSample(points.len()));
        }
        let weights = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(SortedSample {
            points,
            weights,
            n_raw: obs.len(),
        })
    }

    /// Builds a sample from an already collapsed grid.
    pub fn from_weighted(points: Vec<f64>, weights: Vec<f64>, n_raw: usize) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(points.len(), weights.len()));
        }
        if points.len() < 2 {
            return Err(Error::DegenerateSample(points.len()));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::BadWeights("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights(format!("weights sum to {total}")));
        }
        if n_raw < points.len() {
            return Err(Error::BadWeights(format!(
                "n_raw = {n_raw} is below the number of distinct points {}",
                points.len()
            )));
        }
        Ok(SortedSample {
            points,
            weights,
            n_raw,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_raw(&self) -> usize {
        self.n_raw
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Right-continuous empirical distribution function, `P_n((−∞, t])`.
    pub fn ecdf(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&x| x <= t);
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// Empirical mass of `[t, ∞)`; closed at `t`.
    pub fn survival_closed(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&x| x < t);
        self.weights[k..].iter().sum::<f64>().min(1.0)
    }

    /// Weight of the atom at `t`, zero if `t` is not a sample point.
    pub fn atom(&self, t: f64) -> f64 {
        match self.points.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    /// Variance of the empirical distribution (divisor `n`).
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - mu) * (x - mu))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_collapse_into_weights() {
        let s = SortedSample::from_observations(&[2.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.points(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.weights(), &[0.25, 0.5, 0.25]);
        assert_eq!(s.n_raw(), 4);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            SortedSample::from_observations(&[1.0, 1.0]),
            Err(Error::DegenerateSample(1))
        ));
        assert!(matches!(
            SortedSample::from_observations(&[1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(SortedSample::from_weighted(vec![0.0, 1.0], vec![0.4, 0.4], 2).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 0.0], vec![0.5, 0.5], 2).is_err());
    }

    #[test]
    fn empirical_conventions_at_atoms() {
        let s = SortedSample::from_observations(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.ecdf(1.0), 0.5);
        assert_eq!(s.survival_closed(1.0), 0.75);
        // closed at both ends: the atom is counted twice
        assert_eq!(s.ecdf(1.0) + s.survival_closed(1.0), 1.0 + s.atom(1.0));
        assert_eq!(s.ecdf(0.5) + s.survival_closed(0.5), 1.0);
        assert_eq!(s.atom(0.5), 0.0);
    }
}
