use rayon::prelude::*;

pub(crate) const LEAF: u32 = u32::MAX;

/// Quantile cut points per feature. `bin(x)` is the number of cuts strictly
/// below `x`, so `x <= cuts[b]` exactly when `bin(x) <= b`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BinMapper {
    pub cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    /// `columns[f]` holds every value of feature `f`.
    pub fn fit(columns: &[Vec<f64>], n_bins: usize) -> Self {
        let cuts = columns
            .par_iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(f64::total_cmp);
                let mut distinct = sorted.clone();
                distinct.dedup();
                if distinct.len() <= n_bins {
                    // One bin per distinct value.
                    distinct
                        .windows(2)
                        .map(|w| w[0] + (w[1] - w[0]) / 2.0)
                        .collect()
                } else {
                    let n = sorted.len();
                    let max = distinct[distinct.len() - 1];
                    let mut cuts: Vec<f64> =
                        (1..n_bins).map(|j| sorted[j * n / n_bins - 1]).collect();
                    cuts.dedup();
                    cuts.retain(|&c| c < max);
                    cuts
                }
            })
            .collect();
        Self { cuts }
    }

    pub fn bin(&self, feature: usize, x: f64) -> u8 {
        self.cuts[feature].partition_point(|&c| c < x) as u8
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Node {
    /// `LEAF` for leaves.
    pub feature: u32,
    pub bin: u8,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn predict_binned(&self, binned: &Binned, row: usize) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if binned.get(n.feature as usize, row) <= n.bin {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

/// Column-major bin indices.
pub(crate) struct Binned {
    pub n_rows: usize,
    pub data: Vec<u8>,
}

impl Binned {
    pub fn get(&self, feature: usize, row: usize) -> u8 {
        self.data[feature * self.n_rows + row]
    }

    fn column(&self, feature: usize) -> &[u8] {
        &self.data[feature * self.n_rows..(feature + 1) * self.n_rows]
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    bin: u8,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    g * g / (h + l2)
}

fn best_split(
    binned: &Binned,
    mapper: &BinMapper,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> Option<Split> {
    let (g_tot, h_tot) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
        (g + grad[r as usize], h + hess[r as usize])
    });
    let parent = score(g_tot, h_tot, p.l2);
    let n_features = mapper.cuts.len();

    let per_feature: Vec<Option<Split>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            let nb = mapper.n_bins(f);
            if nb < 2 {
                return None;
            }
            let col = binned.column(f);
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            let mut hc = vec![0usize; nb];
            for &r in rows {
                let b = col[r as usize] as usize;
                hg[b] += grad[r as usize];
                hh[b] += hess[r as usize];
                hc[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            let mut best: Option<Split> = None;
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                cl += hc[b];
                let cr = rows.len() - cl;
                if cl < p.min_samples_leaf {
                    continue;
                }
                if cr < p.min_samples_leaf {
                    break;
                }
                if hc[b] == 0 {
                    // Same partition as the previous bin.
                    continue;
                }
                let gain = score(gl, hl, p.l2) + score(g_tot - gl, h_tot - hl, p.l2) - parent;
                if best.is_none_or(|s| gain > s.gain) {
                    best = Some(Split {
                        gain,
                        feature: f,
                        bin: b as u8,
                    });
                }
            }
            best
        })
        .collect();

    // Sequential reduction: ties go to the lowest feature index.
    let mut best: Option<Split> = None;
    for s in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| s.gain > b.gain) {
            best = Some(s);
        }
    }
    best.filter(|s| s.gain > 1e-12)
}

pub(crate) fn grow(
    binned: &Binned,
    mapper: &BinMapper,
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> Tree {
    let mut nodes = Vec::new();
    grow_node(&mut nodes, binned, mapper, rows, grad, hess, p, 0);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    nodes: &mut Vec<Node>,
    binned: &Binned,
    mapper: &BinMapper,
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
    depth: usize,
) -> u32 {
    let id = nodes.len() as u32;
    let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
        (g + grad[r as usize], h + hess[r as usize])
    });
    nodes.push(Node {
        feature: LEAF,
        bin: 0,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: -p.learning_rate * g / (h + p.l2),
    });
    if depth >= p.max_depth || rows.len() < 2 * p.min_samples_leaf.max(1) {
        return id;
    }
    let Some(split) = best_split(binned, mapper, &rows, grad, hess, p) else {
        return id;
    };
    let (left, right): (Vec<u32>, Vec<u32>) = rows
        .into_iter()
        .partition(|&r| binned.get(split.feature, r as usize) <= split.bin);
    let l = grow_node(nodes, binned, mapper, left, grad, hess, p, depth + 1);
    let r = grow_node(nodes, binned, mapper, right, grad, hess, p, depth + 1);
    let node = &mut nodes[id as usize];
    node.feature = split.feature as u32;
    node.bin = split.bin;
    node.threshold = mapper.cuts[split.feature][split.bin as usize];
    node.left = l;
    node.right = r;
    node.value = 0.0;
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_bins_for_few_distinct_values() {
        let m = BinMapper::fit(&[vec![3.0, 1.0, 2.0, 2.0, 1.0]], 255);
        assert_eq!(m.cuts[0], vec![1.5, 2.5]);
        assert_eq!(m.bin(0, 1.0), 0);
        assert_eq!(m.bin(0, 2.0), 1);
        assert_eq!(m.bin(0, 3.0), 2);
        assert_eq!(m.bin(0, 1.5), 0);
    }

    #[test]
    fn quantile_bins_are_bounded() {
        let col: Vec<f64> = (0..10_000).map(|i| (i as f64).sqrt()).collect();
        let m = BinMapper::fit(std::slice::from_ref(&col), 255);
        assert!(m.n_bins(0) <= 255);
        assert!(m.cuts[0].windows(2).all(|w| w[0] < w[1]));
        for &x in col.iter().step_by(97) {
            let b = m.bin(0, x) as usize;
            assert!(b == m.cuts[0].len() || x <= m.cuts[0][b]);
            assert!(b == 0 || x > m.cuts[0][b - 1]);
        }
    }

    #[test]
    fn constant_feature_has_one_bin() {
        let m = BinMapper::fit(&[vec![4.0; 10]], 255);
        assert_eq!(m.n_bins(0), 1);
    }
}
