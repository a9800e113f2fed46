use std::collections::HashMap;

use super::basis::LagrangeBasis;

/// Global numbering of the degree-`k` lattice nodes of a triangle mesh.
///
/// A lattice node is identified by the global vertices it is a barycentric
/// combination of, together with their multiplicities. That key is shared by
/// every element touching the node, so edge and vertex nodes are matched
/// regardless of local orientation.
#[derive(Clone, Debug)]
pub struct DofMap {
    degree: usize,
    n_local: usize,
    n_nodes: usize,
    elem_nodes: Vec<usize>,
    /// First (element, local index) that introduced each global node.
    owner: Vec<(usize, usize)>,
}

type NodeKey = [(u32, u32); 3];

fn node_key(tri: &[usize; 3], mult: &[usize; 3]) -> NodeKey {
    let mut key = [(u32::MAX, 0u32); 3];
    let mut n = 0;
    for c in 0..3 {
        if mult[c] > 0 {
            key[n] = (tri[c] as u32, mult[c] as u32);
            n += 1;
        }
    }
    key[..n].sort_unstable();
    key
}

impl DofMap {
    pub fn new(triangles: &[[usize; 3]], degree: usize) -> Self {
        let basis = LagrangeBasis::new(degree);
        let n_local = basis.len();
        let mut index: HashMap<NodeKey, usize> = HashMap::with_capacity(triangles.len() * n_local / 2);
        let mut elem_nodes = Vec::with_capacity(triangles.len() * n_local);
        let mut owner = Vec::new();
        for (e, tri) in triangles.iter().enumerate() {
            for (m, mult) in basis.lattice().iter().enumerate() {
                let key = node_key(tri, mult);
                let next = owner.len();
                let id = *index.entry(key).or_insert(next);
                if id == next {
                    owner.push((e, m));
                }
                elem_nodes.push(id);
            }
        }
        DofMap { degree, n_local, n_nodes: owner.len(), elem_nodes, owner }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len() / self.n_local
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elem_nodes[e * self.n_local..(e + 1) * self.n_local]
    }

    pub fn owner(&self, node: usize) -> (usize, usize) {
        self.owner[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangles_share_edge_nodes() {
        // triangles (0,1,2) and (2,1,3) share edge 1-2 with opposite orientation
        let tris = [[0, 1, 2], [2, 1, 3]];
        for k in 1..=5 {
            let map = DofMap::new(&tris, k);
            let n_loc = (k + 1) * (k + 2) / 2;
            // 4 vertices, 5 edges, 2 interiors
            let expect = 4 + 5 * (k - 1) + 2 * (n_loc - 3 - 3 * (k - 1));
            assert_eq!(map.n_nodes(), expect, "k = {k}");
        }
    }

    #[test]
    fn shared_nodes_have_matching_barycentric_positions() {
        let tris = [[0, 1, 2], [2, 1, 3]];
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let k = 4;
        let map = DofMap::new(&tris, k);
        let basis = LagrangeBasis::new(k);
        let mut pos: Vec<Option<[f64; 2]>> = vec![None; map.n_nodes()];
        for (e, tri) in tris.iter().enumerate() {
            for (m, &node) in map.element(e).iter().enumerate() {
                let a = basis.lattice()[m];
                let mut p = [0.0; 2];
                for c in 0..3 {
                    for d in 0..2 {
                        p[d] += a[c] as f64 / k as f64 * verts[tri[c]][d];
                    }
                }
                if let Some(q) = pos[node] {
                    assert!((q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15);
                } else {
                    pos[node] = Some(p);
                }
            }
        }
    }
}
