//! Adaptive quadtree with 2:1 level balance.
//!
//! Boxes live in physical coordinates; the root square is recorded as
//! `(origin, side)` so box geometry is exact dyadic arithmetic on top of it.
//! Every box gets a neighbor list (same-level adjacent boxes, itself included)
//! and an interaction list (children of the parent's neighbors that are not
//! adjacent). Leaves additionally get a near list: the boxes whose particles
//! reach the leaf neither through an ancestor's interaction list nor through
//! its own, found by walking the tree from the root.

use std::collections::HashMap;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::Point2;

/// Source/target point with a complex strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Point2,
    pub strength: Complex64,
}

impl Particle {
    pub fn new(x: f64, y: f64, strength: Complex64) -> Self {
        Self {
            position: Point2::new(x, y),
            strength,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    /// Largest particle count of a leaf (`s`).
    pub leaf_capacity: usize,
    pub max_level: u32,
    /// Refine until adjacent leaves differ by at most one level.
    pub balance: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            leaf_capacity: 40,
            max_level: 30,
            balance: true,
        }
    }
}

impl TreeConfig {
    pub fn with_leaf_capacity(leaf_capacity: usize) -> Self {
        Self {
            leaf_capacity,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadtreeNode {
    pub level: u32,
    /// `(ix, iy)` at this level, counted from the root's lower-left corner.
    pub index: (i64, i64),
    pub center: Point2,
    pub half_width: f64,
    /// Range into the permuted particle order.
    pub span: Range<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub neighbor_list: Vec<usize>,
    pub interaction_list: Vec<usize>,
    /// Leaves only; boxes handled pairwise or through near-field tables.
    pub near_list: Vec<usize>,
}

impl QuadtreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn count(&self) -> usize {
        self.span.len()
    }

    pub fn side(&self) -> f64 {
        2.0 * self.half_width
    }
}

/// Lower-left corner and side of the root square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBox {
    pub origin: Point2,
    pub side: f64,
}

impl RootBox {
    pub fn box_side(&self, level: u32) -> f64 {
        self.side / (1u64 << level) as f64
    }

    pub fn center(&self, level: u32, index: (i64, i64)) -> Point2 {
        let h = self.box_side(level);
        Point2::new(
            self.origin.x + (index.0 as f64 + 0.5) * h,
            self.origin.y + (index.1 as f64 + 0.5) * h,
        )
    }

    /// Cell coordinate of `u ∈ [0, 1]` at `level`; points on a split line go
    /// to the lower cell.
    fn cell(u: f64, level: u32) -> i64 {
        let n = (1u64 << level) as f64;
        let c = (u * n).ceil() - 1.0;
        c.clamp(0.0, n - 1.0) as i64
    }

    fn unit(&self, p: Point2) -> (f64, f64) {
        (
            ((p.x - self.origin.x) / self.side).clamp(0.0, 1.0),
            ((p.y - self.origin.y) / self.side).clamp(0.0, 1.0),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub nodes: Vec<QuadtreeNode>,
    pub root_box: RootBox,
    pub config: TreeConfig,
    /// Positions in tree order.
    pub points: Vec<Point2>,
    /// `permutation[tree_slot] = original index`.
    pub permutation: Vec<usize>,
    /// Node ids per level, sorted by `(iy, ix)`.
    pub levels: Vec<Vec<usize>>,
    lookup: HashMap<(u32, i64, i64), usize>,
    lists_built: bool,
}

pub const ROOT: usize = 0;

/// Build the tree and, when requested by the config, balance it.
pub fn build_tree(particles: &[Particle], config: TreeConfig) -> Result<Tree> {
    let positions: Vec<Point2> = particles.iter().map(|p| p.position).collect();
    Tree::build(&positions, config)
}

/// Attach neighbor, interaction and near lists.
pub fn build_lists(tree: &mut Tree) -> Result<()> {
    tree.build_lists()
}

impl Tree {
    pub fn build(positions: &[Point2], config: TreeConfig) -> Result<Tree> {
        if positions.is_empty() {
            return Err(Error::Tree("no particles".into()));
        }
        if config.leaf_capacity == 0 || config.max_level == 0 || config.max_level > 40 {
            return Err(Error::Tree(format!(
                "invalid tree config: leaf_capacity {} max_level {}",
                config.leaf_capacity, config.max_level
            )));
        }
        if positions.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Tree("non-finite particle position".into()));
        }
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in positions {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let mut side = (xmax - xmin).max(ymax - ymin);
        if side == 0.0 {
            side = 1.0;
        }
        let root_box = RootBox {
            origin: Point2::new(xmin, ymin),
            side,
        };
        let units: Vec<(f64, f64)> = positions.iter().map(|&p| root_box.unit(p)).collect();
        let mut tree = Tree {
            nodes: Vec::new(),
            root_box,
            config,
            points: Vec::new(),
            permutation: (0..positions.len()).collect(),
            levels: Vec::new(),
            lookup: HashMap::new(),
            lists_built: false,
        };
        tree.push_node(0, (0, 0), 0..positions.len(), None);
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            let node = &tree.nodes[id];
            if node.count() > config.leaf_capacity && node.level < config.max_level {
                let kids = tree.split(id, &units);
                stack.extend(kids.into_iter().rev());
            }
        }
        if config.balance {
            tree.balance(&units);
        }
        tree.points = tree.permutation.iter().map(|&i| positions[i]).collect();
        tree.index_levels();
        Ok(tree)
    }

    fn push_node(&mut self, level: u32, index: (i64, i64), span: Range<usize>, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(QuadtreeNode {
            level,
            index,
            center: self.root_box.center(level, index),
            half_width: 0.5 * self.root_box.box_side(level),
            span,
            parent,
            children: Vec::new(),
            neighbor_list: Vec::new(),
            interaction_list: Vec::new(),
            near_list: Vec::new(),
        });
        self.lookup.insert((level, index.0, index.1), id);
        id
    }

    /// Split a leaf into its non-empty quadrants, reordering its span.
    fn split(&mut self, id: usize, units: &[(f64, f64)]) -> Vec<usize> {
        let (level, (ix, iy), span) = {
            let n = &self.nodes[id];
            (n.level, n.index, n.span.clone())
        };
        let child_level = level + 1;
        let mut buckets: [Vec<usize>; 4] = Default::default();
        for &orig in &self.permutation[span.clone()] {
            let (u, v) = units[orig];
            let cx = RootBox::cell(u, child_level) - 2 * ix;
            let cy = RootBox::cell(v, child_level) - 2 * iy;
            buckets[(2 * cy + cx) as usize].push(orig);
        }
        let mut start = span.start;
        let mut kids = Vec::new();
        for (q, bucket) in buckets.iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let end = start + bucket.len();
            self.permutation[start..end].copy_from_slice(bucket);
            let index = (2 * ix + (q as i64 & 1), 2 * iy + (q as i64 >> 1));
            let kid = self.push_node(child_level, index, start..end, Some(id));
            kids.push(kid);
            start = end;
        }
        self.nodes[id].children = kids.clone();
        kids
    }

    /// Deepest existing box strictly coarser than `level` that contains the
    /// level-`level` cell `(jx, jy)`.
    fn coarser_container(&self, level: u32, jx: i64, jy: i64) -> Option<usize> {
        (0..level).rev().find_map(|m| {
            let s = level - m;
            self.lookup.get(&(m, jx >> s, jy >> s)).copied()
        })
    }

    fn balance(&mut self, units: &[(f64, f64)]) {
        loop {
            let mut changed = false;
            let leaves: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect();
            for leaf in leaves {
                let (l, (ix, iy)) = (self.nodes[leaf].level, self.nodes[leaf].index);
                if l < 2 {
                    continue;
                }
                let n = 1i64 << l;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (jx, jy) = (ix + dx, iy + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= n || jy >= n {
                            continue;
                        }
                        if self.lookup.contains_key(&(l, jx, jy)) {
                            continue;
                        }
                        if let Some(c) = self.coarser_container(l, jx, jy) {
                            if self.nodes[c].is_leaf() && self.nodes[c].level + 1 < l {
                                self.split(c, units);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn index_levels(&mut self) {
        let depth = self.nodes.iter().map(|n| n.level).max().unwrap_or(0) as usize;
        let mut levels = vec![Vec::new(); depth + 1];
        for (id, n) in self.nodes.iter().enumerate() {
            levels[n.level as usize].push(id);
        }
        for ids in &mut levels {
            ids.sort_by_key(|&id| {
                let (ix, iy) = self.nodes[id].index;
                (iy, ix)
            });
        }
        self.levels = levels;
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Deepest level present.
    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn node_at(&self, level: u32, ix: i64, iy: i64) -> Option<usize> {
        self.lookup.get(&(level, ix, iy)).copied()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn lists_built(&self) -> bool {
        self.lists_built
    }

    /// Reorder values given in original particle order into tree order.
    pub fn to_tree_order<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&i| values[i]).collect()
    }

    /// Inverse of [`Tree::to_tree_order`].
    pub fn to_original_order<T: Copy + Default>(&self, values: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); values.len()];
        for (slot, &orig) in self.permutation.iter().enumerate() {
            out[orig] = values[slot];
        }
        out
    }

    /// Whether every pair of adjacent leaves differs by at most one level.
    pub fn is_balanced(&self) -> bool {
        self.leaves().all(|leaf| {
            let (l, (ix, iy)) = (self.nodes[leaf].level, self.nodes[leaf].index);
            let n = 1i64 << l;
            (-1..=1).all(|dy| {
                (-1..=1).all(|dx| {
                    let (jx, jy) = (ix + dx, iy + dy);
                    if jx < 0 || jy < 0 || jx >= n || jy >= n || self.lookup.contains_key(&(l, jx, jy)) {
                        return true;
                    }
                    match self.coarser_container(l, jx, jy) {
                        Some(c) => !self.nodes[c].is_leaf() || self.nodes[c].level + 1 >= l,
                        None => true,
                    }
                })
            })
        })
    }

    /// Ancestor of `id` at `level` (itself when equal).
    pub fn ancestor(&self, mut id: usize, level: u32) -> usize {
        while self.nodes[id].level > level {
            id = self.nodes[id].parent.expect("non-root node has a parent");
        }
        id
    }

    /// Whether two boxes (any levels) touch or overlap.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        let l = na.level.max(nb.level);
        let range = |n: &QuadtreeNode| {
            let s = l - n.level;
            let (ix, iy) = n.index;
            ((ix << s, ((ix + 1) << s) - 1), (iy << s, ((iy + 1) << s) - 1))
        };
        let ((ax0, ax1), (ay0, ay1)) = range(na);
        let ((bx0, bx1), (by0, by1)) = range(nb);
        ax0 <= bx1 + 1 && bx0 <= ax1 + 1 && ay0 <= by1 + 1 && by0 <= ay1 + 1
    }

    pub fn build_lists(&mut self) -> Result<()> {
        if self.config.balance && !self.is_balanced() {
            return Err(Error::Tree("tree is not 2:1 balanced".into()));
        }
        for id in 0..self.nodes.len() {
            let (l, (ix, iy)) = (self.nodes[id].level, self.nodes[id].index);
            let mut nb = Vec::with_capacity(9);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(j) = self.node_at(l, ix + dx, iy + dy) {
                        nb.push(j);
                    }
                }
            }
            self.nodes[id].neighbor_list = nb;
        }
        for id in 0..self.nodes.len() {
            let Some(parent) = self.nodes[id].parent else {
                continue;
            };
            let (ix, iy) = self.nodes[id].index;
            let mut list = Vec::new();
            for &pn in &self.nodes[parent].neighbor_list {
                for &c in &self.nodes[pn].children {
                    let (cx, cy) = self.nodes[c].index;
                    if (cx - ix).abs().max((cy - iy).abs()) >= 2 {
                        list.push(c);
                    }
                }
            }
            list.sort_by_key(|&c| {
                let (cx, cy) = self.nodes[c].index;
                (cy, cx)
            });
            self.nodes[id].interaction_list = list;
        }
        let leaves: Vec<usize> = self.leaves().collect();
        for t in leaves {
            let mut near = Vec::new();
            self.collect_near(t, ROOT, &mut near);
            self.nodes[t].near_list = near;
        }
        self.lists_built = true;
        Ok(())
    }

    fn collect_near(&self, target: usize, source: usize, out: &mut Vec<usize>) {
        let ls = self.nodes[source].level;
        let lt = self.nodes[target].level;
        if ls <= lt {
            let t_l = self.ancestor(target, ls);
            if !self.adjacent(source, t_l) {
                // Reached through the interaction list of `t_l`.
                return;
            }
        } else if !self.adjacent(source, target) {
            // Small box beside a coarser target: summed directly as a whole.
            out.push(source);
            return;
        }
        if self.nodes[source].is_leaf() {
            out.push(source);
        } else {
            for &c in &self.nodes[source].children {
                self.collect_near(target, c, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, side: f64, origin: Point2) -> Vec<Point2> {
        let h = side / n as f64;
        (0..n * n)
            .map(|i| {
                Point2::new(
                    origin.x + (i % n) as f64 * h + 0.5 * h,
                    origin.y + (i / n) as f64 * h + 0.5 * h,
                )
            })
            .collect()
    }

    #[test]
    fn single_particle_is_root_leaf() {
        let t = Tree::build(&[Point2::new(0.2, 0.3)], TreeConfig::with_leaf_capacity(10)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!(t.nodes[ROOT].is_leaf());
    }

    #[test]
    fn quadrant_centers_split_once() {
        let pts = [
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.25),
            Point2::new(0.25, 0.75),
            Point2::new(0.75, 0.75),
        ];
        let t = Tree::build(&pts, TreeConfig::with_leaf_capacity(1)).unwrap();
        assert_eq!(t.nodes.len(), 5);
        assert!(t.nodes[1..].iter().all(|n| n.level == 1 && n.is_leaf()));
    }

    #[test]
    fn split_line_ties_go_low() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(0.5, 0.5), Point2::new(1.0, 1.0)];
        let t = Tree::build(&pts, TreeConfig::with_leaf_capacity(1)).unwrap();
        let leaf_of = |orig: usize| {
            let slot = t.permutation.iter().position(|&o| o == orig).unwrap();
            t.leaves().find(|&l| t.nodes[l].span.contains(&slot)).unwrap()
        };
        let n = &t.nodes[t.ancestor(leaf_of(1), 1)];
        assert_eq!(n.index, (0, 0));
    }

    #[test]
    fn empty_input_and_bad_config() {
        assert!(Tree::build(&[], TreeConfig::default()).is_err());
        assert!(Tree::build(&[Point2::new(0.0, 1.0)], TreeConfig::with_leaf_capacity(0)).is_err());
    }

    #[test]
    fn coincident_points_stop_at_max_level() {
        let pts = vec![Point2::new(0.5, 0.5); 5];
        let cfg = TreeConfig {
            leaf_capacity: 2,
            max_level: 6,
            balance: true,
        };
        let t = Tree::build(&pts, cfg).unwrap();
        assert_eq!(t.depth(), 6);
        let leaf = t.leaves().next().unwrap();
        assert_eq!(t.nodes[leaf].count(), 5);
    }

    #[test]
    fn uniform_level_three() {
        let pts = grid(100, 1.0, Point2::new(-0.5, 1.0));
        let t = Tree::build(&pts, TreeConfig::with_leaf_capacity(200)).unwrap();
        assert_eq!(t.depth(), 3);
        assert!(t.leaves().all(|l| t.nodes[l].level == 3));
        assert_eq!(t.leaves().count(), 64);
    }

    #[test]
    fn interaction_list_sizes() {
        let pts = grid(32, 1.0, Point2::new(0.0, 0.0));
        let mut t = Tree::build(&pts, TreeConfig::with_leaf_capacity(16)).unwrap();
        t.build_lists().unwrap();
        assert_eq!(t.depth(), 3);
        assert!(t.nodes[ROOT].interaction_list.is_empty());
        assert_eq!(t.nodes[ROOT].neighbor_list, vec![ROOT]);
        let interior = t.node_at(3, 3, 3).unwrap();
        assert_eq!(t.nodes[interior].interaction_list.len(), 27);
        let corner = t.node_at(2, 0, 0).unwrap();
        assert_eq!(t.nodes[corner].interaction_list.len(), 12);
        // Brute force: same-level boxes whose parents touch, themselves not touching.
        for level in 1..=3u32 {
            for &id in &t.levels[level as usize] {
                let (ix, iy) = t.nodes[id].index;
                let expect = t.levels[level as usize]
                    .iter()
                    .filter(|&&j| {
                        let (jx, jy) = t.nodes[j].index;
                        let parents_touch = ((jx >> 1) - (ix >> 1)).abs() <= 1 && ((jy >> 1) - (iy >> 1)).abs() <= 1;
                        parents_touch && (jx - ix).abs().max((jy - iy).abs()) >= 2
                    })
                    .count();
                assert_eq!(t.nodes[id].interaction_list.len(), expect);
            }
        }
    }
}
