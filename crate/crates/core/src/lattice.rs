//! Cavity–fiber network topology.
//!
//! Nodes are atom–cavity sites; bonds are the fibers joining pairs of
//! cavities. Every builder funnels into [`Lattice::from_parts`], which
//! checks the edge list and connectivity once.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};

/// A fiber joining cavities `i` and `j`. The bond index is its position in
/// [`Lattice::bonds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
}

impl Bond {
    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: usize) -> Option<usize> {
        if node == self.i {
            Some(self.j)
        } else if node == self.j {
            Some(self.i)
        } else {
            None
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.i == node || self.j == node
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LatticeKind {
    Chain { n: usize, periodic: bool },
    Square { nx: usize, ny: usize, periodic: bool },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    kind: LatticeKind,
    n_nodes: usize,
    bonds: Vec<Bond>,
    coords: Vec<(i64, i64)>,
    #[serde(skip)]
    incident: Vec<Vec<usize>>,
}

impl Lattice {
    /// Open chain (`periodic = false`) or ring of `n` nodes.
    pub fn chain(n: usize, periodic: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("chain needs at least 2 nodes, got {n}")));
        }
        if periodic && n < 3 {
            return Err(Error::InvalidSize(format!("ring needs at least 3 nodes, got {n}")));
        }
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        if periodic {
            edges.push((n - 1, 0));
        }
        let coords = (0..n).map(|i| (i as i64, 0)).collect();
        Self::from_parts(LatticeKind::Chain { n, periodic }, n, &edges, coords)
    }

    /// Square lattice with row-major numbering: node `y * nx + x` sits at
    /// `(x, y)`. Each site bonds to its +x and +y neighbour, wrapping when
    /// periodic.
    pub fn square(nx: usize, ny: usize, periodic: bool) -> Result<Self> {
        if nx == 0 || ny == 0 || nx * ny < 2 {
            return Err(Error::InvalidSize(format!("square {nx}x{ny} has fewer than 2 sites")));
        }
        // A wrap in a direction of length 2 would duplicate the open bond,
        // and length 1 would be a self-loop.
        if periodic && (nx < 3 || ny < 3) {
            return Err(Error::InvalidSize(format!(
                "periodic square needs both sides >= 3, got {nx}x{ny}"
            )));
        }
        let idx = |x: usize, y: usize| y * nx + x;
        let mut edges = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                if x + 1 < nx {
                    edges.push((idx(x, y), idx(x + 1, y)));
                } else if periodic {
                    edges.push((idx(x, y), idx(0, y)));
                }
                if y + 1 < ny {
                    edges.push((idx(x, y), idx(x, y + 1)));
                } else if periodic {
                    edges.push((idx(x, y), idx(x, 0)));
                }
            }
        }
        let coords = (0..ny)
            .flat_map(|y| (0..nx).map(move |x| (x as i64, y as i64)))
            .collect();
        Self::from_parts(LatticeKind::Square { nx, ny, periodic }, nx * ny, &edges, coords)
    }

    /// Arbitrary graph; bond indices follow the order of `edges`.
    pub fn custom(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let coords = (0..n).map(|i| (i as i64, 0)).collect();
        Self::from_parts(LatticeKind::Custom, n, edges, coords)
    }

    /// As [`Lattice::custom`] but with explicit node coordinates.
    pub fn custom_with_coords(
        n: usize,
        edges: &[(usize, usize)],
        coords: Vec<(i64, i64)>,
    ) -> Result<Self> {
        if coords.len() != n {
            return Err(Error::InvalidSize(format!(
                "{} coordinates given for {n} nodes",
                coords.len()
            )));
        }
        Self::from_parts(LatticeKind::Custom, n, edges, coords)
    }

    fn from_parts(
        kind: LatticeKind,
        n: usize,
        edges: &[(usize, usize)],
        coords: Vec<(i64, i64)>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("lattice needs at least 2 nodes, got {n}")));
        }
        let mut seen = HashSet::new();
        let mut bonds = Vec::with_capacity(edges.len());
        let mut incident = vec![Vec::new(); n];
        for (b, &(i, j)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::InvalidEdge(i, j, format!("node out of range (n = {n})")));
            }
            if i == j {
                return Err(Error::InvalidEdge(i, j, "self-loop".into()));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidEdge(i, j, "duplicate bond".into()));
            }
            bonds.push(Bond { i, j });
            incident[i].push(b);
            incident[j].push(b);
        }
        let lattice = Self { kind, n_nodes: n, bonds, coords, incident };
        let components = lattice.components();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(lattice)
    }

    fn components(&self) -> usize {
        let mut seen = vec![false; self.n_nodes];
        let mut count = 0;
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        count
    }

    pub fn kind(&self) -> &LatticeKind {
        &self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, b: usize) -> Option<Bond> {
        self.bonds.get(b).copied()
    }

    pub fn coords(&self) -> &[(i64, i64)] {
        &self.coords
    }

    /// Indices of the bonds touching `node`.
    pub fn incident_bonds(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    /// `(neighbour, bond index)` pairs of `node`.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.incident[node].iter().map(move |&b| {
            let bond = self.bonds[b];
            (bond.other(node).expect("incidence list is consistent"), b)
        })
    }

    /// Bond joining `i` and `j`, if any.
    pub fn bond_between(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors(i).find(|&(v, _)| v == j).map(|(_, b)| b)
    }

    /// Shortest path from `from` to `to` by breadth-first search, skipping
    /// nodes for which `blocked` returns true (endpoints are never blocked).
    pub fn shortest_path(
        &self,
        from: usize,
        to: usize,
        blocked: impl Fn(usize) -> bool,
    ) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n_nodes];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for (v, _) in self.neighbors(u) {
                if prev[v] == usize::MAX && (v == to || !blocked(v)) {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// True when the graph is a simple open path `0 - 1 - ... - (n-1)`.
    pub fn is_open_chain(&self) -> bool {
        self.n_bonds() + 1 == self.n_nodes
            && (0..self.n_nodes - 1).all(|i| self.bond_between(i, i + 1).is_some())
    }

    /// Number of bipartite connected components; for a connected lattice
    /// this is 1 if the graph has no odd cycle and 0 otherwise.
    pub fn bipartite_components(&self) -> usize {
        usize::from(self.sublattice_signs().is_some())
    }

    /// Two-colouring as `+1`/`-1` per node (node 0 is `+1`), or `None` if
    /// the graph has an odd cycle.
    pub fn sublattice_signs(&self) -> Option<Vec<f64>> {
        let mut color = vec![0.0f64; self.n_nodes];
        color[0] = 1.0;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in self.neighbors(u) {
                if color[v] == 0.0 {
                    color[v] = -color[u];
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    return None;
                }
            }
        }
        Some(color)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_counts() {
        let l = Lattice::chain(6, false).unwrap();
        assert_eq!((l.n_nodes(), l.n_bonds()), (6, 5));
        let r = Lattice::chain(4, true).unwrap();
        assert_eq!((r.n_nodes(), r.n_bonds()), (4, 4));
        assert_eq!(r.bonds()[3], Bond { i: 3, j: 0 });
        let two = Lattice::chain(2, false).unwrap();
        assert_eq!(two.n_bonds(), 1);
        assert_eq!(two.coords(), &[(0, 0), (1, 0)]);
    }

    #[test]
    fn chain_rejects_small() {
        assert!(matches!(Lattice::chain(1, false), Err(Error::InvalidSize(_))));
        assert!(matches!(Lattice::chain(2, true), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn square_counts() {
        assert_eq!(Lattice::square(3, 3, false).unwrap().n_bonds(), 12);
        assert_eq!(Lattice::square(2, 2, false).unwrap().n_bonds(), 4);
        assert_eq!(Lattice::square(4, 3, false).unwrap().n_bonds(), 4 * 2 + 3 * 3);
        let sq = Lattice::square(3, 3, false).unwrap();
        assert_eq!(sq.coords()[5], (2, 1));
        assert!(Lattice::square(1, 1, false).is_err());
        assert!(Lattice::square(2, 3, true).is_err());
    }

    /// Count torus edges by enumerating unordered neighbour pairs.
    #[test]
    fn torus_edges_by_enumeration() {
        let (nx, ny) = (3usize, 3usize);
        let mut pairs = HashSet::new();
        for y in 0..ny {
            for x in 0..nx {
                let a = y * nx + x;
                for (dx, dy) in [(1, 0), (nx - 1, 0), (0, 1), (0, ny - 1)] {
                    let b = ((y + dy) % ny) * nx + (x + dx) % nx;
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
        let torus = Lattice::square(nx, ny, true).unwrap();
        assert_eq!(pairs.len(), 18);
        assert_eq!(torus.n_bonds(), pairs.len());
    }

    #[test]
    fn custom_equivalent_to_chain() {
        let c = Lattice::custom(3, &[(0, 1), (1, 2)]).unwrap();
        let ch = Lattice::chain(3, false).unwrap();
        assert_eq!(c.bonds(), ch.bonds());
        assert_eq!(c.coords(), ch.coords());
    }

    #[test]
    fn custom_errors() {
        assert_eq!(
            Lattice::custom(4, &[(0, 1), (2, 3)]),
            Err(Error::Disconnected { components: 2 })
        );
        assert!(matches!(Lattice::custom(3, &[(0, 1), (0, 1)]), Err(Error::InvalidEdge(..))));
        assert!(matches!(Lattice::custom(3, &[(0, 1), (1, 0)]), Err(Error::InvalidEdge(..))));
        assert!(matches!(Lattice::custom(3, &[(1, 1), (0, 2)]), Err(Error::InvalidEdge(..))));
        assert!(matches!(Lattice::custom(2, &[(0, 5)]), Err(Error::InvalidEdge(..))));
    }

    #[test]
    fn neighbour_queries_match_bond_list() {
        for l in [
            Lattice::chain(5, true).unwrap(),
            Lattice::square(3, 4, false).unwrap(),
            Lattice::square(3, 3, true).unwrap(),
        ] {
            for node in 0..l.n_nodes() {
                let listed: Vec<usize> = (0..l.n_bonds()).filter(|&b| l.bonds()[b].touches(node)).collect();
                let mut queried: Vec<usize> = l.neighbors(node).map(|(_, b)| b).collect();
                queried.sort_unstable();
                assert_eq!(listed, queried);
            }
        }
    }

    #[test]
    fn shortest_path_avoids_blocked() {
        let sq = Lattice::square(3, 3, false).unwrap();
        let p = sq.shortest_path(2, 4, |v| v == 1).unwrap();
        assert_eq!(p, vec![2, 5, 4]);
        assert!(sq.shortest_path(0, 8, |_| true).is_none());
        assert!(Lattice::chain(5, false).unwrap().is_open_chain());
        assert!(!Lattice::chain(5, true).unwrap().is_open_chain());
    }

    #[test]
    fn bipartiteness() {
        assert_eq!(Lattice::chain(4, true).unwrap().bipartite_components(), 1);
        assert_eq!(Lattice::chain(3, true).unwrap().bipartite_components(), 0);
        assert_eq!(Lattice::square(3, 3, true).unwrap().bipartite_components(), 0);
    }
}
