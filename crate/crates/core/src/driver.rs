//! The hierarchical sum: upward pass, downward pass with free-space and
//! heterogeneous M2L, near field, plus the O(N²) reference and the error
//! metric used to compare the two.
//!
//! Every parallel loop maps over boxes (or targets) and collects results in
//! a fixed order, so outputs do not depend on the number of threads.

use std::borrow::Cow;
use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansions::{bessel_waves, m2l_operator, p2m_accumulate, shift_operator, toeplitz_apply, MultipoleExpansion};
use crate::greens::{free_space, line_image_segment, mirror_image, scattered_direct, MediaConfig, Point2, SpectralRules};
use crate::layered::{far_op, image_coefficients, near_op, precompute_tables, FarKey, NearKey, ScatterOp, TableStore};
use crate::tree::{Particle, Tree, TreeConfig};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest N accepted by [`direct_apply`] unless overridden.
pub const DIRECT_GUARD: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub enum TablePolicy {
    Precompute,
    /// Compute every scattered operator when it is applied.
    OnTheFly,
    /// Precompute, reusing (or creating) a table file on disk.
    Cache(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub media: MediaConfig,
    /// Expansion order `P`.
    pub order: usize,
    /// Leaf capacity `s`.
    pub leaf_capacity: usize,
    pub max_level: u32,
    pub tables: TablePolicy,
    /// Tolerance of the Sommerfeld quadrature used for pairwise terms.
    pub oracle_tol: f64,
    pub rules: SpectralRules,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(media: MediaConfig, order: usize, leaf_capacity: usize) -> Self {
        Self {
            media,
            order,
            leaf_capacity,
            max_level: 30,
            tables: TablePolicy::Precompute,
            oracle_tol: 1e-12,
            rules: SpectralRules::default(),
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn validate(&self) -> Result<()> {
        self.media.validate()?;
        if self.order == 0 {
            return Err(Error::Invalid("expansion order must be at least 1".into()));
        }
        if self.leaf_capacity == 0 {
            return Err(Error::Invalid("leaf capacity must be at least 1".into()));
        }
        if !(1e-14..=1e-6).contains(&self.oracle_tol) {
            return Err(Error::Invalid(format!("oracle tolerance {} outside [1e-14, 1e-6]", self.oracle_tol)));
        }
        Ok(())
    }
}

/// Potentials in the original particle order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PotentialVector {
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTimings {
    pub build: Duration,
    pub tables: Duration,
    pub upward: Duration,
    pub downward: Duration,
    pub near: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.build + self.tables + self.upward + self.downward + self.near
    }
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn check_positions(media: &MediaConfig, points: &[Point2]) -> Result<()> {
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::Geometry("non-finite particle position".into()));
        }
        if media.is_layered() && !(p.y > 0.0) {
            return Err(Error::BelowInterface { x: p.x, y: p.y });
        }
    }
    Ok(())
}

enum Tables {
    Stored(TableStore),
    OnTheFly,
}

/// Tree, tables and translation operators for a fixed set of positions.
/// Applying it to several strength vectors reuses all of them.
pub struct FmmPlan {
    pub tree: Tree,
    pub config: RunConfig,
    tables: Tables,
    /// Per level (index = child level), per quadrant: M2M and L2L operators.
    m2m_ops: Vec<[Vec<Complex64>; 4]>,
    l2l_ops: Vec<[Vec<Complex64>; 4]>,
    /// Free M2L operators keyed by (level, ox, oy).
    m2l_ops: HashMap<(u32, i64, i64), Vec<Complex64>>,
    pub timings: PhaseTimings,
}

impl FmmPlan {
    pub fn new(positions: &[Point2], config: &RunConfig) -> Result<FmmPlan> {
        config.validate()?;
        check_positions(&config.media, positions)?;
        with_threads(config.threads, || Self::build(positions, config))?
    }

    fn build(positions: &[Point2], config: &RunConfig) -> Result<FmmPlan> {
        let k = config.media.wavenumber();
        let order = config.order;
        let t0 = Instant::now();
        let tree_config = TreeConfig {
            leaf_capacity: config.leaf_capacity,
            max_level: config.max_level,
            balance: true,
        };
        let mut tree = Tree::build(positions, tree_config)?;
        tree.build_lists()?;
        let mut m2m_ops = vec![Default::default()];
        let mut l2l_ops = vec![Default::default()];
        for level in 1..=tree.depth() {
            let hc = tree.root_box.box_side(level);
            let mut m: [Vec<Complex64>; 4] = Default::default();
            let mut l: [Vec<Complex64>; 4] = Default::default();
            for q in 0..4 {
                let d = Point2::new(if q & 1 == 0 { -0.5 } else { 0.5 } * hc, if q & 2 == 0 { -0.5 } else { 0.5 } * hc);
                let origin = Point2::default();
                m[q] = shift_operator(k, d, origin, order)?;
                l[q] = shift_operator(k, origin, d, order)?;
            }
            m2m_ops.push(m);
            l2l_ops.push(l);
        }
        let mut offsets = std::collections::BTreeSet::new();
        for node in &tree.nodes {
            for &s in &node.interaction_list {
                let src = &tree.nodes[s];
                offsets.insert((node.level, node.index.0 - src.index.0, node.index.1 - src.index.1));
            }
        }
        let offsets: Vec<_> = offsets.into_iter().collect();
        let ops: Vec<Vec<Complex64>> = offsets
            .par_iter()
            .map(|&(level, ox, oy)| {
                let h = tree.root_box.box_side(level);
                m2l_operator(k, Point2::default(), Point2::new(ox as f64 * h, oy as f64 * h), order)
            })
            .collect::<Result<_>>()?;
        let m2l_ops = offsets.into_iter().zip(ops).collect();
        let build = t0.elapsed();

        let t1 = Instant::now();
        let tables = match &config.tables {
            TablePolicy::OnTheFly => Tables::OnTheFly,
            TablePolicy::Precompute => Tables::Stored(precompute_tables(&tree, &config.media, order, &config.rules)?),
            TablePolicy::Cache(path) => Tables::Stored(cached_tables(&tree, config, path)?),
        };
        let timings = PhaseTimings {
            build,
            tables: t1.elapsed(),
            ..Default::default()
        };
        Ok(FmmPlan {
            tree,
            config: config.clone(),
            tables,
            m2m_ops,
            l2l_ops,
            m2l_ops,
            timings,
        })
    }

    pub fn table_store(&self) -> Option<&TableStore> {
        match &self.tables {
            Tables::Stored(s) => Some(s),
            Tables::OnTheFly => None,
        }
    }

    fn far(&self, key: &FarKey) -> Result<Cow<'_, ScatterOp>> {
        let stored = match &self.tables {
            Tables::Stored(s) => s.far_op(key),
            Tables::OnTheFly => None,
        };
        match stored {
            Some(op) => Ok(Cow::Borrowed(op)),
            None => Ok(Cow::Owned(far_op(&key.geometry(&self.tree.root_box), &self.config.media, self.config.order, &self.config.rules)?)),
        }
    }

    fn near(&self, key: &NearKey) -> Result<Cow<'_, ScatterOp>> {
        let stored = match &self.tables {
            Tables::Stored(s) => s.near_op(key),
            Tables::OnTheFly => None,
        };
        match stored {
            Some(op) => Ok(Cow::Borrowed(op)),
            None => Ok(Cow::Owned(near_op(&key.geometry(&self.tree.root_box), &self.config.media, self.config.order, &self.config.rules)?)),
        }
    }

    fn quadrant(&self, id: usize) -> usize {
        let (ix, iy) = self.tree.nodes[id].index;
        ((iy & 1) * 2 + (ix & 1)) as usize
    }

    /// Potentials for strengths given in the original particle order.
    pub fn apply(&mut self, strengths: &[Complex64]) -> Result<PotentialVector> {
        if strengths.len() != self.tree.len() {
            return Err(Error::Invalid(format!(
                "expected {} strengths, got {}",
                self.tree.len(),
                strengths.len()
            )));
        }
        let threads = self.config.threads;
        let (values, up, down, near) = {
            let this = &*self;
            with_threads(threads, || this.run(strengths))??
        };
        self.timings.upward = up;
        self.timings.downward = down;
        self.timings.near = near;
        Ok(PotentialVector { values })
    }

    fn run(&self, strengths: &[Complex64]) -> Result<(Vec<Complex64>, Duration, Duration, Duration)> {
        let tree = &self.tree;
        let k = self.config.media.wavenumber();
        let order = self.config.order;
        let len = 2 * order + 1;
        let q = tree.to_tree_order(strengths);

        // Upward pass.
        let t0 = Instant::now();
        let mut mult: Vec<Vec<Complex64>> = vec![Vec::new(); tree.nodes.len()];
        for level in (0..tree.levels.len()).rev() {
            let computed: Vec<Vec<Complex64>> = tree.levels[level]
                .par_iter()
                .map(|&id| {
                    let node = &tree.nodes[id];
                    let mut exp = MultipoleExpansion::zero(node.center, order);
                    if node.is_leaf() {
                        p2m_accumulate(&mut exp, k, &tree.points[node.span.clone()], &q[node.span.clone()])?;
                    } else {
                        for &c in &node.children {
                            let op = &self.m2m_ops[level + 1][self.quadrant(c)];
                            toeplitz_apply(&mult[c], op, &mut exp.coeffs);
                        }
                    }
                    Ok(exp.coeffs)
                })
                .collect::<Result<_>>()?;
            for (&id, c) in tree.levels[level].iter().zip(computed) {
                mult[id] = c;
            }
        }
        let layered = self.config.media.is_layered();
        let images: Vec<Vec<Complex64>> = if layered {
            mult.par_iter().map(|m| image_coefficients(m)).collect()
        } else {
            Vec::new()
        };
        let upward = t0.elapsed();

        // Downward pass. Far pairs without a compressed form are collected
        // for the pairwise stage.
        let t1 = Instant::now();
        let mut local: Vec<Vec<Complex64>> = vec![Vec::new(); tree.nodes.len()];
        let mut pairwise_far: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        for level in 0..tree.levels.len() {
            let computed: Vec<(Vec<Complex64>, Vec<usize>)> = tree.levels[level]
                .par_iter()
                .map(|&id| {
                    let node = &tree.nodes[id];
                    let mut loc = vec![ZERO; len];
                    if let Some(p) = node.parent {
                        toeplitz_apply(&local[p], &self.l2l_ops[level][self.quadrant(id)], &mut loc);
                    }
                    let mut pairwise = Vec::new();
                    for &s in &node.interaction_list {
                        let src = &tree.nodes[s];
                        let (ox, oy) = (node.index.0 - src.index.0, node.index.1 - src.index.1);
                        toeplitz_apply(&mult[s], &self.m2l_ops[&(node.level, ox, oy)], &mut loc);
                        if layered {
                            let key = FarKey {
                                level: src.level,
                                y_index: src.index.1,
                                ox,
                                oy,
                            };
                            match &*self.far(&key)? {
                                ScatterOp::Translate(a) => toeplitz_apply(&images[s], a, &mut loc),
                                ScatterOp::Split(_) => {
                                    return Err(Error::Invalid("split operator on a well-separated pair".into()))
                                }
                                ScatterOp::Pairwise => pairwise.push(s),
                            }
                        }
                    }
                    Ok((loc, pairwise))
                })
                .collect::<Result<_>>()?;
            for (&id, (loc, pw)) in tree.levels[level].iter().zip(computed) {
                local[id] = loc;
                pairwise_far[id] = pw;
            }
        }
        let downward = t1.elapsed();

        // Near field, one leaf at a time.
        let t2 = Instant::now();
        let leaves: Vec<usize> = tree.leaves().collect();
        let per_leaf: Vec<Vec<Complex64>> = leaves
            .par_iter()
            .map(|&t| self.leaf_potentials(t, &q, &local[t], &images, &pairwise_far))
            .collect::<Result<_>>()?;
        let mut out = vec![ZERO; tree.len()];
        for (&t, vals) in leaves.iter().zip(per_leaf) {
            out[tree.nodes[t].span.clone()].copy_from_slice(&vals);
        }
        let near = t2.elapsed();
        Ok((tree.to_original_order(&out), upward, downward, near))
    }

    fn leaf_potentials(
        &self,
        t: usize,
        q: &[Complex64],
        inherited: &[Complex64],
        images: &[Vec<Complex64>],
        pairwise_far: &[Vec<usize>],
    ) -> Result<Vec<Complex64>> {
        let tree = &self.tree;
        let media = &self.config.media;
        let k = media.wavenumber();
        let target = &tree.nodes[t];
        let span = target.span.clone();
        let mut loc = inherited.to_vec();
        let mut vals = vec![ZERO; span.len()];

        // Sources whose scattered field is summed pairwise, with the cutoff
        // of the point and segment images (`None` means the full oracle).
        let mut pairwise: Vec<(usize, Option<f64>)> = Vec::new();
        for &s in &target.near_list {
            let src = &tree.nodes[s];
            for (slot, v) in span.clone().zip(vals.iter_mut()) {
                let x = tree.points[slot];
                for j in src.span.clone() {
                    if j != slot {
                        *v += q[j] * free_space(k, x, tree.points[j])?;
                    }
                }
            }
            if media.is_layered() {
                match &*self.near(&NearKey::between(tree, s, t))? {
                    ScatterOp::Translate(a) => toeplitz_apply(&images[s], a, &mut loc),
                    ScatterOp::Split(split) => {
                        toeplitz_apply(&images[s], &split.tail, &mut loc);
                        pairwise.push((s, Some(split.cutoff)));
                    }
                    ScatterOp::Pairwise => pairwise.push((s, None)),
                }
            }
        }
        let mut anc = Some(t);
        while let Some(a) = anc {
            pairwise.extend(pairwise_far[a].iter().map(|&s| (s, None)));
            anc = tree.nodes[a].parent;
        }
        for (s, cutoff) in pairwise {
            for (slot, v) in span.clone().zip(vals.iter_mut()) {
                let x = tree.points[slot];
                for j in tree.nodes[s].span.clone() {
                    let x0 = tree.points[j];
                    let g = match (cutoff, media) {
                        (Some(c), MediaConfig::TwoLayer { alpha, .. }) => {
                            free_space(k, x, mirror_image(x0))? + line_image_segment(k, *alpha, x, x0, c)?
                        }
                        _ => scattered_direct(media, x, x0, self.config.oracle_tol)?,
                    };
                    *v += q[j] * g;
                }
            }
        }
        for (slot, v) in span.zip(vals.iter_mut()) {
            let w = bessel_waves(k, tree.points[slot] - target.center, self.config.order)?;
            let s: Complex64 = loc.iter().zip(&w).map(|(a, b)| a * b).sum();
            *v += 0.25 * I * s;
        }
        Ok(vals)
    }
}

fn cached_tables(tree: &Tree, config: &RunConfig, path: &std::path::Path) -> Result<TableStore> {
    if path.exists() {
        let store = TableStore::read_cache(path)?;
        store.check_matches(&config.media, &tree.root_box, config.order, &config.rules)?;
        return Ok(store);
    }
    let store = precompute_tables(tree, &config.media, config.order, &config.rules)?;
    store.write_cache(path)?;
    Ok(store)
}

/// `Σ_j q_j u_{x_j}(x_i)` for every particle, self term of the free-space
/// kernel omitted.
pub fn fmm_apply(particles: &[Particle], config: &RunConfig) -> Result<PotentialVector> {
    let positions: Vec<Point2> = particles.iter().map(|p| p.position).collect();
    let strengths: Vec<Complex64> = particles.iter().map(|p| p.strength).collect();
    FmmPlan::new(&positions, config)?.apply(&strengths)
}

/// O(N²) reference over the Sommerfeld oracle. `guard` caps N
/// (default [`DIRECT_GUARD`]).
pub fn direct_apply(particles: &[Particle], media: &MediaConfig, tol: f64, guard: Option<usize>) -> Result<PotentialVector> {
    direct_apply_threads(particles, media, tol, guard, None)
}

pub fn direct_apply_threads(
    particles: &[Particle],
    media: &MediaConfig,
    tol: f64,
    guard: Option<usize>,
    threads: Option<usize>,
) -> Result<PotentialVector> {
    let limit = guard.unwrap_or(DIRECT_GUARD);
    let n = particles.len();
    if n > limit {
        return Err(Error::CostGuard { n, limit });
    }
    media.validate()?;
    let points: Vec<Point2> = particles.iter().map(|p| p.position).collect();
    check_positions(media, &points)?;
    let k = media.wavenumber();
    // The kernel is symmetric, so each unordered pair is evaluated once.
    let pair = |i: usize, j: usize| -> Result<Complex64> {
        let mut g = if i == j { ZERO } else { free_space(k, points[i], points[j])? };
        if media.is_layered() {
            g += scattered_direct(media, points[i], points[j], tol)?;
        }
        Ok(g)
    };
    const BLOCK: usize = 64;
    with_threads(threads, || {
        let mut out = vec![ZERO; n];
        for start in (0..n).step_by(BLOCK) {
            let rows: Vec<Vec<Complex64>> = (start..(start + BLOCK).min(n))
                .into_par_iter()
                .map(|i| (i..n).map(|j| pair(i, j)).collect::<Result<_>>())
                .collect::<Result<_>>()?;
            for (r, row) in rows.iter().enumerate() {
                let i = start + r;
                for (off, g) in row.iter().enumerate() {
                    let j = i + off;
                    out[i] += particles[j].strength * g;
                    if j != i {
                        out[j] += particles[i].strength * g;
                    }
                }
            }
        }
        Ok(PotentialVector { values: out })
    })?
}

/// Relative ℓ² error over the first `m` entries.
pub fn error_metric(reference: &[Complex64], test: &[Complex64], m: usize) -> Result<f64> {
    if m == 0 || reference.len() < m || test.len() < m {
        return Err(Error::Invalid(format!(
            "error metric needs {m} entries, got {} and {}",
            reference.len(),
            test.len()
        )));
    }
    let den: f64 = reference[..m].iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Invalid("reference has zero norm".into()));
    }
    let num: f64 = reference[..m].iter().zip(&test[..m]).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok((num / den).sqrt())
}
