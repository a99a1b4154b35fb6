//! Undirected interaction topologies and the structural matrices used by the
//! cost expressions.
//!
//! Agents are indexed from 0 internally. Edges are stored once, in canonical
//! `(min, max)` order, sorted. Edge weights live outside the topology (as a
//! slice aligned with [`Topology::edges`]) so a simulation can evolve them
//! without touching the graph.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matops::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(usize, usize);

impl Edge {
    pub fn new(i: usize, k: usize) -> Self {
        if i <= k {
            Self(i, k)
        } else {
            Self(k, i)
        }
    }

    pub fn lo(&self) -> usize {
        self.0
    }

    pub fn hi(&self) -> usize {
        self.1
    }

    pub fn touches(&self, agent: usize) -> bool {
        self.0 == agent || self.1 == agent
    }

    /// The endpoint that is not `agent`.
    pub fn other(&self, agent: usize) -> Option<usize> {
        if self.0 == agent {
            Some(self.1)
        } else if self.1 == agent {
            Some(self.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: Vec<Edge>,
    initial_weights: Vec<f64>,
    leader: Option<usize>,
}

impl Topology {
    /// Validates and canonicalises a weighted edge list.
    pub fn new(n: usize, edges: &[(usize, usize, f64)], leader: Option<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Size(n));
        }
        let mut list: Vec<(Edge, f64)> = Vec::with_capacity(edges.len());
        for &(i, k, w) in edges {
            if i >= n || k >= n {
                return Err(Error::Topology(format!("edge ({i}, {k}) references agent outside 0..{n}")));
            }
            if i == k {
                return Err(Error::Topology(format!("self-loop on agent {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight { edge: (i, k), weight: w });
            }
            list.push((Edge::new(i, k), w));
        }
        list.sort_by_key(|e| e.0);
        if let Some(dup) = list.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(Error::Topology(format!("duplicate edge {:?}", dup[0].0)));
        }
        if let Some(l) = leader {
            if l >= n {
                return Err(Error::Topology(format!("leader {l} outside 0..{n}")));
            }
        }
        let (edges, initial_weights) = list.into_iter().unzip();
        Ok(Self {
            n,
            edges,
            initial_weights,
            leader,
        })
    }

    pub fn unweighted(n: usize, pairs: &[(usize, usize)], leader: Option<usize>) -> Result<Self> {
        let edges: Vec<_> = pairs.iter().map(|&(i, k)| (i, k, 1.0)).collect();
        Self::new(n, &edges, leader)
    }

    pub fn path(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::unweighted(n, &pairs, None)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Self::path(n);
        }
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::unweighted(n, &pairs, None)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |k| (i, k)))
            .collect();
        Self::unweighted(n, &pairs, None)
    }

    /// Star centred on agent 0.
    pub fn star(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..n).map(|k| (0, k)).collect();
        Self::unweighted(n, &pairs, None)
    }

    pub fn with_leader(mut self, leader: usize) -> Result<Self> {
        if leader >= self.n {
            return Err(Error::Topology(format!("leader {leader} outside 0..{}", self.n)));
        }
        self.leader = Some(leader);
        Ok(self)
    }

    pub fn with_uniform_weight(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidWeight { edge: (0, 0), weight: w });
        }
        self.initial_weights.iter_mut().for_each(|v| *v = w);
        Ok(self)
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn initial_weights(&self) -> &[f64] {
        &self.initial_weights
    }

    pub fn leader(&self) -> Option<usize> {
        self.leader
    }

    pub fn neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |e| e.other(agent))
    }

    pub fn edge_index(&self, i: usize, k: usize) -> Option<usize> {
        self.edges.binary_search(&Edge::new(i, k)).ok()
    }

    fn bfs_reach(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for u in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_reach(0).into_iter().all(|s| s)
    }

    /// Every follower has an undirected path to the leader. The follower
    /// subgraph itself may be disconnected.
    pub fn leader_reachable(&self) -> bool {
        match self.leader {
            Some(l) => self.bfs_reach(l).into_iter().all(|s| s),
            None => false,
        }
    }
}

/// `L = D − W` for the given per-edge weights (aligned with `topology.edges()`).
pub fn laplacian(topology: &Topology, weights: &[f64]) -> Result<Matrix> {
    if weights.len() != topology.edges.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} edges",
            weights.len(),
            topology.edges.len()
        )));
    }
    let mut l = Matrix::zeros(topology.n, topology.n);
    for (e, &w) in topology.edges.iter().zip(weights) {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidWeight {
                edge: (e.lo(), e.hi()),
                weight: w,
            });
        }
        let (i, k) = (e.lo(), e.hi());
        l[(i, i)] += w;
        l[(k, k)] += w;
        l[(i, k)] -= w;
        l[(k, i)] -= w;
    }
    Ok(l)
}

/// Laplacian of the complete graph on `n` agents with every edge weighted
/// `edge_weight`. With `edge_weight = 1/n` this is `I − 11ᵀ/n`.
pub fn complete_laplacian(n: usize, edge_weight: f64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::Size(n));
    }
    if !(edge_weight > 0.0 && edge_weight.is_finite()) {
        return Err(Error::InvalidWeight {
            edge: (0, 1),
            weight: edge_weight,
        });
    }
    Ok(Matrix::from_fn(n, n, |i, k| {
        if i == k {
            (n - 1) as f64 * edge_weight
        } else {
            -edge_weight
        }
    }))
}

/// Unit-weight star Laplacian centred on agent 0:
/// `[[n−1, −1ᵀ], [−1, I]]`.
pub fn star_laplacian(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::Size(n));
    }
    Ok(Matrix::from_fn(n, n, |i, k| match (i, k) {
        (0, 0) => (n - 1) as f64,
        (0, _) | (_, 0) => -1.0,
        _ if i == k => 1.0,
        _ => 0.0,
    }))
}

/// `I − 11ᵀ/n`, the orthogonal projector onto the disagreement subspace.
pub fn disagreement_projector(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::Size(n));
    }
    let inv = 1.0 / n as f64;
    Ok(Matrix::from_fn(n, n, |i, k| if i == k { 1.0 - inv } else { -inv }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::sym_eig;

    #[test]
    fn path_laplacian() {
        let t = Topology::path(3).unwrap();
        let l = laplacian(&t, t.initial_weights()).unwrap();
        assert_eq!(
            l,
            Matrix::from_rows(&[&[1.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 1.0]])
        );
    }

    #[test]
    fn single_weighted_edge() {
        let t = Topology::new(2, &[(0, 1, 2.0)], None).unwrap();
        let l = laplacian(&t, t.initial_weights()).unwrap();
        assert_eq!(l, Matrix::from_rows(&[&[2.0, -2.0], &[-2.0, 2.0]]));
    }

    #[test]
    fn path_spectrum_matches_characteristic_polynomial() {
        // det(L − λI) for the P3 Laplacian expands by hand to −λ(λ−1)(λ−3)
        let charpoly = |x: f64| -x * (x - 1.0) * (x - 3.0);
        let t = Topology::path(3).unwrap();
        let l = laplacian(&t, t.initial_weights()).unwrap();
        let det3 = |m: &Matrix| {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        };
        for x in [-0.7, 0.4, 2.2, 5.0] {
            let shifted = &l - &Matrix::identity(3).scale(x);
            assert!((det3(&shifted) - charpoly(x)).abs() < 1e-12);
        }
        let eig = sym_eig(&l).unwrap().eigenvalues;
        for (got, want) in eig.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_laplacian_cases() {
        let l = complete_laplacian(3, 1.0 / 3.0).unwrap();
        let expected = &Matrix::identity(3) - &Matrix::from_fn(3, 3, |_, _| 1.0 / 3.0);
        assert!(l.max_abs_diff(&expected) < 1e-15);

        let eig = sym_eig(&complete_laplacian(3, 1.0).unwrap()).unwrap().eigenvalues;
        for (got, want) in eig.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(
            complete_laplacian(2, 0.5).unwrap(),
            Matrix::from_rows(&[&[0.5, -0.5], &[-0.5, 0.5]])
        );
        assert_eq!(complete_laplacian(1, 1.0), Err(Error::Size(1)));
    }

    #[test]
    fn star_cases() {
        assert_eq!(
            star_laplacian(3).unwrap(),
            Matrix::from_rows(&[&[2.0, -1.0, -1.0], &[-1.0, 1.0, 0.0], &[-1.0, 0.0, 1.0]])
        );
        assert_eq!(star_laplacian(2).unwrap(), Matrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        let eig = sym_eig(&star_laplacian(4).unwrap()).unwrap().eigenvalues;
        for (got, want) in eig.iter().zip([0.0, 1.0, 1.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let t = Topology::star(4).unwrap();
        assert_eq!(laplacian(&t, t.initial_weights()).unwrap(), star_laplacian(4).unwrap());
    }

    #[test]
    fn projector_properties() {
        assert_eq!(
            disagreement_projector(2).unwrap(),
            Matrix::from_rows(&[&[0.5, -0.5], &[-0.5, 0.5]])
        );
        let m = disagreement_projector(5).unwrap();
        assert!((&(&m * &m) - &m).max_abs() < 1e-12);
        let ones = vec![1.0; 5];
        assert!(m.mul_vec(&ones).iter().all(|v| v.abs() < 1e-15));
        // identical agent states: 1 ⊗ v lies in the kernel
        let big = m.kron(&Matrix::identity(2));
        let stacked: Vec<f64> = (0..5).flat_map(|_| [0.3, -1.7]).collect();
        assert!(big.quadratic_form(&stacked).abs() < 1e-14);
    }

    #[test]
    fn connectivity() {
        assert!(Topology::path(3).unwrap().is_connected());
        let split = Topology::unweighted(4, &[(0, 1), (2, 3)], None).unwrap();
        assert!(!split.is_connected());
        // followers isolated from each other but all tied to the leader
        let star = Topology::star(5).unwrap().with_leader(0).unwrap();
        assert!(star.leader_reachable());
        let orphan = Topology::unweighted(4, &[(0, 1), (2, 3)], Some(0)).unwrap();
        assert!(!orphan.leader_reachable());
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            Topology::new(3, &[(0, 0, 1.0)], None),
            Err(Error::Topology(_))
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 1, 1.0), (1, 0, 1.0)], None),
            Err(Error::Topology(_))
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 1, 0.0)], None),
            Err(Error::InvalidWeight { .. })
        ));
        let t = Topology::path(3).unwrap();
        assert!(matches!(laplacian(&t, &[1.0]), Err(Error::Shape(_))));
        assert!(matches!(
            laplacian(&t, &[1.0, -1.0]),
            Err(Error::InvalidWeight { .. })
        ));
    }
}
