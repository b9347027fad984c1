use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::partition::ArealPartition;
use crate::error::{Error, Result};
use crate::linalg;

/// Above this many units the extreme eigenvalues come from power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// Symmetric binary contiguity matrix `W` with zero diagonal, kept as
/// sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialWeights {
    neighbours: Vec<Vec<usize>>,
}

impl SpatialWeights {
    /// Builds `W` from undirected index pairs. Duplicate pairs are accepted.
    pub fn from_index_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut neighbours = vec![Vec::new(); n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::UnknownUnit(format!("index {}", i.max(j))));
            }
            if i == j {
                return Err(Error::SelfEdge(format!("index {i}")));
            }
            neighbours[i].push(j);
            neighbours[j].push(i);
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbours })
    }

    /// Rook-contiguity lattice on a `side × side` grid, units numbered row by row.
    pub fn lattice(side: usize) -> Self {
        let mut pairs = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                if c + 1 < side {
                    pairs.push((i, i + 1));
                }
                if r + 1 < side {
                    pairs.push((i, i + side));
                }
            }
        }
        Self::from_index_pairs(side * side, pairs).expect("lattice pairs are valid")
    }

    pub fn n(&self) -> usize {
        self.neighbours.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbours[i].len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbours[i].binary_search(&j).is_ok()
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// S0 = Σ_ij w_ij.
    pub fn total_weight(&self) -> f64 {
        (2 * self.n_edges()) as f64
    }

    /// out = W x
    pub fn lag_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, nb) in out.iter_mut().zip(&self.neighbours) {
            *o = nb.iter().map(|&j| x[j]).sum();
        }
    }

    pub fn lag(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.lag_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, nb) in self.neighbours.iter().enumerate() {
            for &j in nb {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// Connected components, each a sorted list of unit indices, ordered by
    /// their smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(i) = stack.pop() {
                members.push(i);
                for &j in &self.neighbours[i] {
                    if label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    /// Dense `I − λW`.
    pub fn shifted_identity(&self, lambda: f64) -> DMatrix<f64> {
        let mut m = self.to_dense() * (-lambda);
        for i in 0..self.n() {
            m[(i, i)] = 1.0;
        }
        m
    }
}

/// Builds `W` from unit-id pairs of a partition.
pub fn build_weights<S: AsRef<str>>(
    partition: &ArealPartition,
    edges: impl IntoIterator<Item = (S, S)>,
) -> Result<SpatialWeights> {
    let mut pairs = Vec::new();
    for (a, b) in edges {
        let (a, b) = (a.as_ref(), b.as_ref());
        let i = partition.index_of(a).ok_or_else(|| Error::UnknownUnit(a.to_string()))?;
        let j = partition.index_of(b).ok_or_else(|| Error::UnknownUnit(b.to_string()))?;
        if i == j {
            return Err(Error::SelfEdge(a.to_string()));
        }
        pairs.push((i, j));
    }
    SpatialWeights::from_index_pairs(partition.len(), pairs)
}

/// Intrinsic-CAR precision `Q`: neighbour counts on the diagonal, −1 for
/// each neighbour pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionStructure {
    weights: SpatialWeights,
}

pub fn build_precision(w: &SpatialWeights) -> PrecisionStructure {
    PrecisionStructure { weights: w.clone() }
}

impl PrecisionStructure {
    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        if i == j {
            self.weights.degree(i) as i64
        } else if self.weights.contains(i, j) {
            -1
        } else {
            0
        }
    }

    pub fn weights(&self) -> &SpatialWeights {
        &self.weights
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lag = self.weights.lag(x);
        x.iter()
            .enumerate()
            .map(|(i, &xi)| self.weights.degree(i) as f64 * xi - lag[i])
            .collect()
    }

    /// xᵀQx = Σ_{edges} (x_i − x_j)²
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n() {
            for &j in self.weights.neighbours(i) {
                if j > i {
                    let d = x[i] - x[j];
                    acc += d * d;
                }
            }
        }
        acc
    }

    /// Rank of `Q`: units minus connected components.
    pub fn rank(&self) -> usize {
        self.n() - self.weights.components().len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl SpectralBounds {
    fn from_extremes(omega_min: f64, omega_max: f64) -> Result<Self> {
        if !(omega_min < 0.0 && omega_max > 0.0) {
            return Err(Error::EdgelessGraph);
        }
        Ok(Self {
            lower: 1.0 / omega_min,
            upper: 1.0 / omega_max,
            omega_min,
            omega_max,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        value > self.lower && value < self.upper
    }
}

/// Admissible interval (1/ω_min, 1/ω_max) for ρ or δ.
pub fn spectral_bounds(w: &SpatialWeights) -> Result<SpectralBounds> {
    if w.n_edges() == 0 {
        return Err(Error::EdgelessGraph);
    }
    let (lo, hi) = if w.n() <= DENSE_EIGEN_LIMIT {
        let ev = eigenvalues(w);
        (ev[0], ev[ev.len() - 1])
    } else {
        extreme_eigenvalues_power(w, 1e-12, 100_000)
    };
    SpectralBounds::from_extremes(lo, hi)
}

/// All eigenvalues of `W`, ascending.
pub fn eigenvalues(w: &SpatialWeights) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(w.to_dense()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// (ω_min, ω_max) by power iteration on the shifted operators
/// `W + dI` and `dI − W`, with `d` the maximum degree.
pub fn extreme_eigenvalues_power(w: &SpatialWeights, tol: f64, max_iter: usize) -> (f64, f64) {
    let n = w.n();
    let d = (0..n).map(|i| w.degree(i)).max().unwrap_or(0) as f64;
    let dominant = |sign: f64| -> f64 {
        // deterministic start vector with no special symmetry
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut lambda = 0.0;
        let mut wv = vec![0.0; n];
        for _ in 0..max_iter {
            w.lag_into(&v, &mut wv);
            let next: Vec<f64> = v.iter().zip(&wv).map(|(&x, &y)| d * x + sign * y).collect();
            let new_lambda: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = next.into_iter().map(|x| x / norm).collect();
            if (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(1.0) {
                return new_lambda;
            }
            lambda = new_lambda;
        }
        lambda
    };
    let top = dominant(1.0) - d;
    let bottom = d - dominant(-1.0);
    (bottom, top)
}

/// `W` together with its spectrum, shared by the SAR/CAR estimators and
/// predictors.
#[derive(Debug, Clone)]
pub struct SpatialStructure {
    weights: SpatialWeights,
    eigenvalues: Vec<f64>,
    bounds: SpectralBounds,
}

impl SpatialStructure {
    pub fn new(weights: SpatialWeights) -> Result<Self> {
        if weights.n_edges() == 0 {
            return Err(Error::EdgelessGraph);
        }
        let ev = eigenvalues(&weights);
        let bounds = SpectralBounds::from_extremes(ev[0], ev[ev.len() - 1])?;
        Ok(Self {
            weights,
            eigenvalues: ev,
            bounds,
        })
    }

    pub fn weights(&self) -> &SpatialWeights {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    /// log|I_N − λW| = Σ_k log(1 − λω_k).
    pub fn log_det(&self, lambda: f64) -> f64 {
        self.eigenvalues.iter().map(|&w| (1.0 - lambda * w).ln()).sum()
    }

    /// Solves (I − λW) x = b for each length-N block of `b`.
    pub fn solve_shifted(&self, lambda: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = linalg::cholesky(self.weights.shifted_identity(lambda), "I - λW")?;
        let n = self.n();
        let mut out = DVector::zeros(b.len());
        for (k, block) in b.as_slice().chunks(n).enumerate() {
            let x = chol.solve(&DVector::from_column_slice(block));
            out.rows_mut(k * n, n).copy_from(&x);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> ArealPartition {
        ArealPartition::new(vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn path_weights() {
        let w = build_weights(&abc(), [("a", "b"), ("b", "c")]).unwrap();
        let d = w.to_dense();
        let expect = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        assert_eq!(d, expect);
    }

    #[test]
    fn empty_edge_list_gives_zero_matrix() {
        let p = ArealPartition::new(vec!["a".into(), "b".into()]).unwrap();
        let w = build_weights::<&str>(&p, []).unwrap();
        assert_eq!(w.to_dense(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn edge_errors() {
        assert!(matches!(build_weights(&abc(), [("a", "a")]), Err(Error::SelfEdge(_))));
        assert!(matches!(
            build_weights(&abc(), [("a", "z")]),
            Err(Error::UnknownUnit(_))
        ));
        let dup = build_weights(&abc(), [("a", "b"), ("b", "a"), ("a", "b")]).unwrap();
        assert_eq!(dup.n_edges(), 1);
    }

    #[test]
    fn precision_examples() {
        let path = build_weights(&abc(), [("a", "b"), ("b", "c")]).unwrap();
        let q = build_precision(&path).to_dense();
        let expect = DMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(q, expect);

        let isolated = build_weights(&abc(), [("a", "b")]).unwrap();
        let q = build_precision(&isolated);
        for k in 0..3 {
            assert_eq!(q.entry(2, k), 0);
            assert_eq!(q.entry(k, 2), 0);
        }

        let complete = build_weights(&abc(), [("a", "b"), ("b", "c"), ("a", "c")]).unwrap();
        let q = build_precision(&complete);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q.entry(i, j), if i == j { 2 } else { -1 });
            }
        }
    }

    #[test]
    fn bounds_two_nodes() {
        let w = SpatialWeights::from_index_pairs(2, [(0, 1)]).unwrap();
        let b = spectral_bounds(&w).unwrap();
        assert!((b.lower + 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edgeless_bounds_error() {
        let w = SpatialWeights::from_index_pairs(3, []).unwrap();
        assert!(matches!(spectral_bounds(&w), Err(Error::EdgelessGraph)));
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let w = SpatialWeights::lattice(6);
        let dense = spectral_bounds(&w).unwrap();
        let (lo, hi) = extreme_eigenvalues_power(&w, 1e-14, 200_000);
        assert!((lo - dense.omega_min).abs() < 1e-6, "{lo} vs {}", dense.omega_min);
        assert!((hi - dense.omega_max).abs() < 1e-6, "{hi} vs {}", dense.omega_max);
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let w = SpatialWeights::lattice(4);
        let q = build_precision(&w);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let dense = q.to_dense();
        let xv = DVector::from_vec(x.clone());
        let expect = (xv.transpose() * &dense * &xv)[(0, 0)];
        assert!((q.quadratic_form(&x) - expect).abs() < 1e-12);
        let applied = DVector::from_vec(q.apply(&x));
        assert!((applied - dense * xv).norm() < 1e-12);
        assert_eq!(q.rank(), 15);
    }
}
