use super::assignment::PercolationConfig;
use super::grid::Grid;
use super::union_find::UnionFind;

/// Connected components of closed vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    /// Cluster id per vertex; `None` for open vertices. Ids follow the order
    /// in which clusters are first met when scanning vertices.
    pub labels: Vec<Option<u32>>,
    pub sizes: Vec<usize>,
}

impl ClusterLabeling {
    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

pub fn find_clusters(cfg: &PercolationConfig) -> ClusterLabeling {
    label_closed(&cfg.grid, &cfg.open)
}

pub fn label_closed(grid: &Grid, open: &[bool]) -> ClusterLabeling {
    assert_eq!(grid.len(), open.len(), "field size differs from grid");
    let mut uf = UnionFind::new(open.len());
    grid.for_each_forward_edge(|a, b| {
        if !open[a] && !open[b] {
            uf.union(a, b);
        }
    });
    let mut root_label = vec![u32::MAX; open.len()];
    let mut sizes = Vec::new();
    let labels = (0..open.len())
        .map(|v| {
            if open[v] {
                return None;
            }
            let r = uf.find(v);
            if root_label[r] == u32::MAX {
                root_label[r] = sizes.len() as u32;
                sizes.push(0);
            }
            sizes[root_label[r] as usize] += 1;
            Some(root_label[r])
        })
        .collect();
    ClusterLabeling { labels, sizes }
}

/// Largest closed cluster, without building labels.
pub fn max_closed_cluster(grid: &Grid, open: &[bool]) -> usize {
    let mut uf = UnionFind::new(open.len());
    grid.for_each_forward_edge(|a, b| {
        if !open[a] && !open[b] {
            uf.union(a, b);
        }
    });
    (0..open.len())
        .filter(|&v| !open[v])
        .map(|v| uf.set_size(v))
        .max()
        .unwrap_or(0)
}

/// Whether vertices in state `state` connect the first and last layer along axis 0.
pub fn spans_axis0(grid: &Grid, open: &[bool], state: bool) -> bool {
    let n = grid.len();
    let (top, bottom) = (n, n + 1);
    let mut uf = UnionFind::new(n + 2);
    let last = grid.dims()[0] - 1;
    for (v, &o) in open.iter().enumerate() {
        if o != state {
            continue;
        }
        let layer = grid.coord(v, 0);
        if layer == 0 {
            uf.union(v, top);
        }
        if layer == last {
            uf.union(v, bottom);
        }
    }
    grid.for_each_forward_edge(|a, b| {
        if open[a] == state && open[b] == state {
            uf.union(a, b);
        }
    });
    uf.connected(top, bottom)
}
