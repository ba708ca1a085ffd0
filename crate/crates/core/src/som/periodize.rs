// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Merge, NodeClassification, SomError, SomGrid};
use crate::data::{FeatureSet, WeekId};

/// Per-class size and mean of every raw variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: usize,
    pub count: usize,
    /// `None` for a class that no week falls into.
    pub means: Option<Vec<f64>>,
}

/// A maximal run of consecutive weeks sharing a class; `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassInterval {
    pub class: usize,
    pub start: usize,
    pub end: usize,
    pub first_week: WeekId,
    pub last_week: WeekId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroClassification {
    pub k: usize,
    pub node_to_class: Vec<usize>,
    pub linkage: Vec<Merge>,
    pub weeks: Vec<WeekId>,
    pub week_to_node: Vec<usize>,
    pub week_to_class: Vec<usize>,
    pub variable_names: Vec<String>,
    pub class_means: Vec<ClassSummary>,
    pub intervals: Vec<ClassInterval>,
}

/// Assigns every week to the class of its best-matching node and summarizes
/// the classes on the unstandardized variables.
pub fn periodize(
    features: &FeatureSet,
    grid: &SomGrid,
    nodes: &NodeClassification,
) -> Result<MacroClassification, SomError> {
    if nodes.node_to_class.len() != grid.node_count() {
        return Err(SomError::DimensionMismatch {
            expected: grid.node_count(),
            actual: nodes.node_to_class.len(),
        });
    }
    let mut week_to_node = Vec::with_capacity(features.len());
    for v in &features.vectors {
        week_to_node.push(grid.best_matching_unit(&v.standardized)?);
    }
    let week_to_class: Vec<usize> = week_to_node
        .iter()
        .map(|&node| nodes.node_to_class[node])
        .collect();
    let weeks: Vec<WeekId> = features.vectors.iter().map(|v| v.week).collect();

    let variable_names = FeatureSet::raw_names();
    let mut sums = vec![vec![0.0; variable_names.len()]; nodes.k];
    let mut counts = vec![0usize; nodes.k];
    for (v, &class) in features.vectors.iter().zip(&week_to_class) {
        counts[class - 1] += 1;
        for (s, x) in sums[class - 1].iter_mut().zip(v.raw()) {
            *s += x;
        }
    }
    let class_means = sums
        .into_iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (s, &count))| ClassSummary {
            class: i + 1,
            count,
            means: (count > 0).then(|| s.iter().map(|x| x / count as f64).collect()),
        })
        .collect();

    let mut intervals: Vec<ClassInterval> = Vec::new();
    for (i, &class) in week_to_class.iter().enumerate() {
        match intervals.last_mut() {
            Some(last) if last.class == class => {
                last.end = i + 1;
                last.last_week = weeks[i];
            }
            _ => intervals.push(ClassInterval {
                class,
                start: i,
                end: i + 1,
                first_week: weeks[i],
                last_week: weeks[i],
            }),
        }
    }

    Ok(MacroClassification {
        k: nodes.k,
        node_to_class: nodes.node_to_class.clone(),
        linkage: nodes.linkage.clone(),
        weeks,
        week_to_node,
        week_to_class,
        variable_names,
        class_means,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_features, FeatureConfig, QuotationWeek};

    fn features(n: usize) -> FeatureSet {
        let weeks: Vec<QuotationWeek> = (0..n)
            .map(|i| {
                let x = i as f64;
                QuotationWeek::complete(
                    WeekId::new(1821 + (i / 52) as i32, (i % 52) as u32 + 1),
                    [
                        [15.0 + x, 15.1 + x],
                        [15.2 + (x * 0.5).sin(), 15.3 + (x * 0.7).cos()],
                        [15.4 + x * 0.1, 15.5 + (x * 0.2).cos()],
                        [25.0 + x.sqrt(), 25.1 + x * 0.02],
                        [13.0 + (x * 0.9).sin(), 13.1 + x * 0.01],
                        [1.8 + x * 0.001, 1.9 + (x * 0.3).sin() * 0.01],
                    ],
                )
            })
            .collect();
        build_features(&weeks, &FeatureConfig::default()).unwrap()
    }

    fn grid_for(set: &FeatureSet) -> SomGrid {
        SomGrid::initialize(&set.matrix(), 2, 2, 1).unwrap()
    }

    #[test]
    fn single_class_gives_one_interval() {
        let set = features(10);
        let grid = grid_for(&set);
        let nodes = NodeClassification {
            k: 4,
            node_to_class: vec![4; 4],
            linkage: vec![],
        };
        let mc = periodize(&set, &grid, &nodes).unwrap();
        assert_eq!(mc.intervals.len(), 1);
        assert_eq!((mc.intervals[0].start, mc.intervals[0].end), (0, 10));
        assert_eq!(mc.intervals[0].class, 4);
        assert_eq!(mc.class_means[3].count, 10);
        assert!(mc.class_means[0].means.is_none());
    }

    #[test]
    fn singleton_class_mean_is_the_week() {
        let set = features(8);
        // One node per week, sitting exactly on it; only node 5 is class 1.
        let mut grid = SomGrid::initialize(&set.matrix(), 2, 4, 1).unwrap();
        grid.code_vectors = set.matrix();
        let nodes = NodeClassification {
            k: 2,
            node_to_class: (0..8).map(|n| if n == 5 { 1 } else { 2 }).collect(),
            linkage: vec![],
        };
        let mc = periodize(&set, &grid, &nodes).unwrap();
        let class1: Vec<usize> = (0..8).filter(|&i| mc.week_to_class[i] == 1).collect();
        assert_eq!(class1, vec![5]);
        assert_eq!(mc.class_means[0].means.as_ref().unwrap(), &set.vectors[5].raw());
    }

    #[test]
    fn intervals_partition_weeks() {
        let set = features(40);
        let grid = grid_for(&set);
        let nodes = NodeClassification {
            k: 3,
            node_to_class: vec![1, 2, 3, 1],
            linkage: vec![],
        };
        let mc = periodize(&set, &grid, &nodes).unwrap();
        let mut next = 0;
        for (a, b) in mc.intervals.iter().zip(mc.intervals.iter().skip(1)) {
            assert_ne!(a.class, b.class);
        }
        for iv in &mc.intervals {
            assert_eq!(iv.start, next);
            assert!(iv.end > iv.start);
            assert!(mc.week_to_class[iv.start..iv.end].iter().all(|&c| c == iv.class));
            next = iv.end;
        }
        assert_eq!(next, 40);
        let total: usize = mc.class_means.iter().map(|c| c.count).sum();
        assert_eq!(total, 40);
    }
}
