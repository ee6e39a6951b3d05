use nalgebra::DMatrix;

/// Rows and columns of one connected block of a bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.rows.len().max(self.cols.len())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Splits the bipartite graph whose edges are the strictly positive entries
/// of `q` into connected components.
///
/// Isolated rows and columns form their own single-sided components.
/// Components are ordered by their smallest row (then column) index and
/// their index lists are ascending.
pub fn connected_components(q: &DMatrix<f64>) -> Vec<Component> {
    let (m, n) = q.shape();
    let mut parent: Vec<usize> = (0..m + n).collect();
    for k in 0..m {
        for j in 0..n {
            if q[(k, j)] > 0.0 {
                let a = find(&mut parent, k);
                let b = find(&mut parent, m + j);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot_of_root: Vec<Option<usize>> = vec![None; m + n];
    let mut out: Vec<Component> = Vec::new();
    for node in 0..m + n {
        let root = find(&mut parent, node);
        let slot = *slot_of_root[root].get_or_insert_with(|| {
            out.push(Component { rows: Vec::new(), cols: Vec::new() });
            out.len() - 1
        });
        if node < m {
            out[slot].rows.push(node);
        } else {
            out[slot].cols.push(node - m);
        }
    }
    out
}
