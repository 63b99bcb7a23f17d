use crate::sample::SortedSample;

/// Sample grid with the candidate mode merged in.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub base: SortedSample,
    pub m: f64,
    /// Sorted union of the sample points and `m`.
    pub z: Vec<f64>,
    /// Empirical weight at each `z`; zero at an inserted mode.
    pub weights: Vec<f64>,
    pub mode_index: usize,
    pub mode_is_datum: bool,
}

impl AugmentedSample {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// The grid with an inserted mode removed again.
    pub fn without_mode(&self) -> Vec<f64> {
        let mut z = self.z.clone();
        if !self.mode_is_datum {
            z.remove(self.mode_index);
        }
        z
    }
}

/// Inserts `m` into the sample grid unless it already is a sample point.
pub fn augment(s: &SortedSample, m: f64) -> AugmentedSample {
    let points = s.points();
    let k = points.partition_point(|&x| x < m);
    let mode_is_datum = k < points.len() && points[k] == m;
    let (z, weights) = if mode_is_datum {
        (points.to_vec(), s.weights().to_vec())
    } else {
        let mut z = points.to_vec();
        let mut w = s.weights().to_vec();
        z.insert(k, m);
        w.insert(k, 0.0);
        (z, w)
    };
    AugmentedSample {
        base: s.clone(),
        m,
        z,
        weights,
        mode_index: k,
        mode_is_datum,
    }
}
