// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{sq_dist, SomError, SomGrid};

/// One agglomeration step. Leaves are `0..n`; the cluster formed by merge `i`
/// gets id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Increase in total within-cluster sum of squares caused by the merge.
    pub height: f64,
    pub size: usize,
}

/// Node-level part of the macro-classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeClassification {
    pub k: usize,
    /// Class id (1-based) of every grid node.
    pub node_to_class: Vec<usize>,
    pub linkage: Vec<Merge>,
}

struct Cluster {
    id: usize,
    size: usize,
    centroid: Vec<f64>,
}

/// Full Ward agglomeration of `points`.
///
/// At each step the pair with the smallest sum-of-squares increase
/// `n_a n_b / (n_a + n_b) * |c_a - c_b|^2` is merged; ties go to the pair
/// with the smallest cluster ids.
pub fn ward_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let mut active: Vec<Cluster> = points
        .iter()
        .enumerate()
        .map(|(id, p)| Cluster {
            id,
            size: 1,
            centroid: p.clone(),
        })
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut floor = 0.0f64;

    while active.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let (ca, cb) = (&active[a], &active[b]);
                let (na, nb) = (ca.size as f64, cb.size as f64);
                let cost = na * nb / (na + nb) * sq_dist(&ca.centroid, &cb.centroid);
                if cost < best.2 {
                    best = (a, b, cost);
                }
            }
        }
        let (a, b, cost) = best;
        let right = active.remove(b);
        let left = &mut active[a];
        let (na, nb) = (left.size as f64, right.size as f64);
        for (c, r) in left.centroid.iter_mut().zip(&right.centroid) {
            *c = (na * *c + nb * r) / (na + nb);
        }
        // Ward is monotone; the max only absorbs last-bit round-off on ties.
        floor = floor.max(cost);
        merges.push(Merge {
            left: left.id,
            right: right.id,
            height: floor,
            size: left.size + right.size,
        });
        left.size += right.size;
        left.id = n + merges.len() - 1;
    }
    merges
}

/// Class of each leaf after applying the first `n - k` merges. Classes are
/// numbered from 1 in order of first appearance over the leaves.
pub fn cut_linkage(linkage: &[Merge], n: usize, k: usize) -> Result<Vec<usize>, SomError> {
    if k == 0 || k > n || linkage.len() + 1 < n {
        return Err(SomError::ClassCount { k, nodes: n });
    }
    // Union-find over leaf and internal ids.
    let mut parent: Vec<usize> = (0..n + linkage.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, m) in linkage.iter().take(n - k).enumerate() {
        let new = n + i;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = new;
        parent[r] = new;
    }
    let mut label_of_root: Vec<Option<usize>> = vec![None; parent.len()];
    let mut next = 1;
    let mut classes = Vec::with_capacity(n);
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        let label = *label_of_root[root].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        classes.push(label);
    }
    Ok(classes)
}

/// Groups the grid's code vectors into `k` macro-classes with Ward linkage.
pub fn hac_macro_classes(grid: &SomGrid, k: usize) -> Result<NodeClassification, SomError> {
    let n = grid.node_count();
    if k == 0 || k > n {
        return Err(SomError::ClassCount { k, nodes: n });
    }
    let linkage = ward_linkage(&grid.code_vectors);
    let node_to_class = cut_linkage(&linkage, n, k)?;
    Ok(NodeClassification {
        k,
        node_to_class,
        linkage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_from(points: Vec<Vec<f64>>) -> SomGrid {
        SomGrid {
            rows: 1,
            cols: points.len(),
            dim: points[0].len(),
            code_vectors: points,
            trained_epochs: 0,
            seed: 0,
            schedule: Default::default(),
        }
    }

    fn within_ss(points: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut total = 0.0;
        let max = *labels.iter().max().unwrap();
        for c in 0..=max {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let dim = members[0].len();
            let centroid: Vec<f64> = (0..dim)
                .map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64)
                .collect();
            total += members.iter().map(|p| sq_dist(p, &centroid)).sum::<f64>();
        }
        total
    }

    #[test]
    fn k_equal_nodes_and_k_one() {
        let points: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let grid = grid_from(points);
        let all = hac_macro_classes(&grid, 6).unwrap();
        assert_eq!(all.node_to_class, vec![1, 2, 3, 4, 5, 6]);
        let one = hac_macro_classes(&grid, 1).unwrap();
        assert_eq!(one.node_to_class, vec![1; 6]);
        assert!(hac_macro_classes(&grid, 0).is_err());
        assert!(hac_macro_classes(&grid, 7).is_err());
    }

    #[test]
    fn two_pairs_match_best_two_partition() {
        let points = vec![
            vec![0.0, 0.0],
            vec![10.0, 10.0],
            vec![0.3, -0.2],
            vec![10.1, 9.7],
        ];
        // Oracle: every labelling of the 4 points into 2 non-empty groups.
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << 3) {
            let labels: Vec<usize> = (0..4).map(|i| ((mask << 1) >> i & 1) as usize).collect();
            let ss = within_ss(&points, &labels);
            if ss < best.0 {
                best = (ss, labels);
            }
        }
        let oracle = canonical(&best.1);
        let got = hac_macro_classes(&grid_from(points), 2).unwrap();
        assert_eq!(got.node_to_class, oracle);
        assert_eq!(got.node_to_class, vec![1, 2, 1, 2]);
    }

    fn canonical(labels: &[usize]) -> Vec<usize> {
        let mut map = std::collections::HashMap::new();
        labels
            .iter()
            .map(|l| {
                let next = map.len() + 1;
                *map.entry(*l).or_insert(next)
            })
            .collect()
    }

    #[test]
    fn merge_height_is_sum_of_squares_increase() {
        let points = vec![vec![0.0], vec![2.0], vec![10.0]];
        let linkage = ward_linkage(&points);
        assert_eq!(linkage.len(), 2);
        assert_eq!((linkage[0].left, linkage[0].right), (0, 1));
        assert!((linkage[0].height - 2.0).abs() < 1e-12);
        // {0,2} centroid 1 with 10: 2*1/3 * 81 = 54
        assert!((linkage[1].height - 54.0).abs() < 1e-12);
        assert_eq!(linkage[1].size, 3);
        assert_eq!(linkage[1].left, 3);
    }

    proptest! {
        #[test]
        fn heights_monotone_and_cuts_nested(
            points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..26)
        ) {
            let n = points.len();
            let linkage = ward_linkage(&points);
            prop_assert_eq!(linkage.len(), n - 1);
            for w in linkage.windows(2) {
                prop_assert!(w[1].height >= w[0].height);
            }
            for k in 2..=n {
                let fine = cut_linkage(&linkage, n, k).unwrap();
                let coarse = cut_linkage(&linkage, n, k - 1).unwrap();
                prop_assert_eq!(fine.iter().max().copied(), Some(k));
                // Same fine class implies same coarse class.
                for a in 0..n {
                    for b in 0..n {
                        if fine[a] == fine[b] {
                            prop_assert_eq!(coarse[a], coarse[b]);
                        }
                    }
                }
            }
        }
    }
}
