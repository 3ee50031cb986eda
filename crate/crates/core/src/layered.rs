//! Scattered-field translations: the heterogeneous M2L operator `A`, the
//! line-image tail operator `B` and the table store that caches both.
//!
//! For a source box centered at `c` and a target box centered at `l`, both
//! above the interface, the scattered field of the source multipole seen at
//! the target is `β_p = Σ_m a_m A(m − p)` where `a_m = (−1)^m α_{−m}` are the
//! coefficients of the mirrored multipole and `A(ν)` is the reflected
//! cylindrical wave at `(X, Y) = (l_x − c_x, l_y + c_y)`.
//!
//! The spectral integral for `A` loses roughly `(r/Y)^|ν|` digits when the
//! boxes (radius sum `r`) sit close to the interface, so each pair gets a
//! cutoff `C = max(0, 2(h_s + h_t) − Y)`. With `C > 0` the two-layer line image is
//! split at depth `C`: the part beyond `C` (operator `B`) is well separated
//! and spectral, the part above it is handled either exactly in the table
//! (well separated boxes) or pairwise (adjacent boxes).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansions::{hankel_waves, toeplitz_apply, LocalExpansion, MultipoleExpansion};
use crate::greens::media::Fnv;
use crate::greens::{cylindrical_waves, line_image_density, MediaConfig, Point2, SpectralRules, SpectralSum, SpectralWeight};
use crate::quadrature::gauss_legendre;
use crate::tree::{RootBox, Tree};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative disagreement allowed between a rule and its node-doubled copy.
pub const CONVERGENCE_TOL: f64 = 1e-11;

/// Geometry of one scattered-field translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationGeometry {
    /// Target center minus source center, horizontally.
    pub dx: f64,
    /// Target center height plus source center height.
    pub dy: f64,
    pub source_half: f64,
    pub target_half: f64,
}

impl TranslationGeometry {
    pub fn between(source_center: Point2, source_half: f64, target_center: Point2, target_half: f64) -> Self {
        Self {
            dx: target_center.x - source_center.x,
            dy: target_center.y + source_center.y,
            source_half,
            target_half,
        }
    }

    /// Depth along the image ray beyond which the image is well separated.
    pub fn cutoff(&self) -> f64 {
        (2.0 * (self.source_half + self.target_half) - self.dy).max(0.0)
    }

    fn check(&self) -> Result<()> {
        if !(self.dy > 0.0 && self.dy.is_finite() && self.dx.is_finite()) {
            return Err(Error::Geometry(format!(
                "scattered translation needs dy > 0, got dy = {}",
                self.dy
            )));
        }
        Ok(())
    }
}

/// Cutoff and tail operator of an adjacent pair close to the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldSplit {
    pub cutoff: f64,
    /// `B(ν)` over `ν ∈ [−2P, 2P]`.
    pub tail: Vec<Complex64>,
}

/// What a stored key translates to.
#[derive(Debug, Clone, PartialEq)]
pub enum ScatterOp {
    /// Full operator `A(ν)` over `ν ∈ [−2P, 2P]`.
    Translate(Vec<Complex64>),
    /// Pairwise point and segment images plus the `B` tail.
    Split(NearFieldSplit),
    /// No compressed form; sum pairwise with the Sommerfeld oracle.
    Pairwise,
}

/// `A(ν)` for `ν ∈ [−2P, 2P]` (index `ν + 2P`).
///
/// Uses the spectral integral of the full reflectance when the pair is far
/// enough from the interface. Otherwise, for two layers, the point image is
/// taken in closed form, the first `C` of the line image by quadrature over
/// Hankel waves and the rest from [`compute_b_tail`].
pub fn compute_a(geom: &TranslationGeometry, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<Vec<Complex64>> {
    Ok(a_with_mass(geom, media, order, rules)?.0)
}

/// `A` together with the absolute size of what was summed for each order.
fn a_with_mass(
    geom: &TranslationGeometry,
    media: &MediaConfig,
    order: usize,
    rules: &SpectralRules,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    geom.check()?;
    media.validate()?;
    let n = 2 * order;
    let k = media.wavenumber();
    let cutoff = geom.cutoff();
    match *media {
        MediaConfig::Free { .. } => Err(Error::Media("free space has no scattered field".into())),
        MediaConfig::TwoLayer { alpha, .. } if cutoff > 0.0 => {
            let mut a = hankel_waves(k, Point2::new(geom.dx, geom.dy), n)?;
            let mut mass: Vec<f64> = a.iter().map(|v| v.norm()).collect();
            if alpha != 0.0 {
                let seg = line_segment_waves(k, alpha, geom.dx, geom.dy, cutoff, n)?;
                let tail = tail_sum(geom, cutoff, alpha, k, n, rules)?;
                for (i, v) in a.iter_mut().enumerate() {
                    *v += seg[i] + tail.values[i];
                    mass[i] += seg[i].norm() + tail.mass[i];
                }
            }
            Ok((a, mass))
        }
        _ => {
            let s = cylindrical_waves(k, geom.dx, geom.dy, n, &SpectralWeight::Reflection(*media), rules)?;
            Ok((s.values, s.mass))
        }
    }
}

fn tail_sum(geom: &TranslationGeometry, cutoff: f64, alpha: f64, k: f64, n: usize, rules: &SpectralRules) -> Result<SpectralSum> {
    cylindrical_waves(k, geom.dx, geom.dy, n, &SpectralWeight::LineTail { alpha, cutoff }, rules)
}

/// `B(ν)`: the line image beyond depth `cutoff`, two layers only.
pub fn compute_b_tail(
    geom: &TranslationGeometry,
    cutoff: f64,
    media: &MediaConfig,
    order: usize,
    rules: &SpectralRules,
) -> Result<Vec<Complex64>> {
    geom.check()?;
    let MediaConfig::TwoLayer { k, alpha } = *media else {
        return Err(Error::Media("the tail operator exists for two layers only".into()));
    };
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::Geometry(format!("tail cutoff must be positive, got {cutoff}")));
    }
    if geom.dy + cutoff < 2.0 * (geom.source_half + geom.target_half) * (1.0 - 1e-12) {
        return Err(Error::Geometry(format!(
            "tail starting at depth {cutoff} is not separated from the target box"
        )));
    }
    let n = 2 * order;
    if alpha == 0.0 {
        return Ok(vec![ZERO; 2 * n + 1]);
    }
    Ok(tail_sum(geom, cutoff, alpha, k, n, rules)?.values)
}

/// `∫_0^C μ(s) W_ν(X, Y + s) ds` for `ν ∈ [−n, n]`.
///
/// Panels are a quarter of the distance to the image point, which keeps the
/// nearest singularity of the integrand far outside each panel.
pub fn line_segment_waves(k: f64, alpha: f64, x: f64, y: f64, cutoff: f64, n: usize) -> Result<Vec<Complex64>> {
    const NODES: usize = 24;
    let base = gauss_legendre(NODES, 0.0, 1.0)?;
    let mut acc = vec![ZERO; 2 * n + 1];
    let mut lo = 0.0;
    while lo < cutoff {
        let hi = (lo + 0.25 * x.hypot(y + lo)).min(cutoff);
        for (&u, &wu) in base.nodes.iter().zip(&base.weights) {
            let s = lo + (hi - lo) * u;
            let w = hankel_waves(k, Point2::new(x, y + s), n)?;
            let f = line_image_density(alpha, s) * (wu * (hi - lo));
            for (a, v) in acc.iter_mut().zip(&w) {
                *a += f * v;
            }
        }
        lo = hi;
    }
    Ok(acc)
}

/// Largest change of `A` under node doubling, relative to the absolute
/// quadrature mass of each order. High orders near the interface cancel
/// heavily, so the mass rather than the entry is the meaningful scale.
pub fn convergence_defect(geom: &TranslationGeometry, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<f64> {
    let (a, mass) = a_with_mass(geom, media, order, rules)?;
    let b = compute_a(geom, media, order, &rules.doubled_nodes())?;
    let defect = a
        .iter()
        .zip(&b)
        .zip(&mass)
        .map(|((u, v), m)| (u - v).norm() / m.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(defect)
}

/// Like [`compute_a`] but fails when node doubling moves any entry by more
/// than [`CONVERGENCE_TOL`].
pub fn compute_a_checked(geom: &TranslationGeometry, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<Vec<Complex64>> {
    let d = convergence_defect(geom, media, order, rules)?;
    if d > CONVERGENCE_TOL {
        return Err(Error::NonConvergence(format!(
            "translation entries moved by {d:e} under node doubling"
        )));
    }
    compute_a(geom, media, order, rules)
}

/// Coefficients of the mirrored multipole: `a_m = (−1)^m α_{−m}`.
pub fn image_coefficients(alpha: &[Complex64]) -> Vec<Complex64> {
    let p = alpha.len() / 2;
    (0..alpha.len())
        .map(|i| {
            let m = i as i64 - p as i64;
            let v = alpha[alpha.len() - 1 - i];
            if m & 1 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn check_entries(entries: &[Complex64], order: usize) -> Result<()> {
    if entries.len() != 4 * order + 1 {
        return Err(Error::OrderMismatch {
            expected: 4 * order + 1,
            got: entries.len(),
        });
    }
    Ok(())
}

/// `β_p = Σ_m A(m − p) conj(α_m)`.
///
/// The conjugated coefficients equal the mirrored multipole only for real
/// source strengths; [`m2l_image`] is exact for complex strengths.
pub fn m2l_heterogeneous(exp: &MultipoleExpansion, entries: &[Complex64], target_center: Point2) -> Result<LocalExpansion> {
    check_entries(entries, exp.order)?;
    let conj: Vec<Complex64> = exp.coeffs.iter().map(|c| c.conj()).collect();
    let mut out = LocalExpansion::zero(target_center, exp.order);
    toeplitz_apply(&conj, entries, &mut out.coeffs);
    Ok(out)
}

/// `β_p = Σ_m A(m − p) (−1)^m α_{−m}`.
pub fn m2l_image(exp: &MultipoleExpansion, entries: &[Complex64], target_center: Point2) -> Result<LocalExpansion> {
    check_entries(entries, exp.order)?;
    let mut out = LocalExpansion::zero(target_center, exp.order);
    toeplitz_apply(&image_coefficients(&exp.coeffs), entries, &mut out.coeffs);
    Ok(out)
}

/// Key of a well-separated translation: source level and height, target
/// offset in boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FarKey {
    pub level: u32,
    pub y_index: i64,
    pub ox: i64,
    pub oy: i64,
}

/// Key of an adjacent-pair translation. `dx_units` is the horizontal center
/// offset in half-sides of the finer box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NearKey {
    pub source_level: u32,
    pub source_iy: i64,
    pub target_level: u32,
    pub target_iy: i64,
    pub dx_units: i64,
}

impl FarKey {
    pub fn geometry(&self, root: &RootBox) -> TranslationGeometry {
        let h = root.box_side(self.level);
        let ys = root.origin.y + (self.y_index as f64 + 0.5) * h;
        let yt = root.origin.y + ((self.y_index + self.oy) as f64 + 0.5) * h;
        TranslationGeometry {
            dx: self.ox as f64 * h,
            dy: ys + yt,
            source_half: 0.5 * h,
            target_half: 0.5 * h,
        }
    }
}

impl NearKey {
    pub fn between(tree: &Tree, source: usize, target: usize) -> Self {
        let (s, t) = (&tree.nodes[source], &tree.nodes[target]);
        let fine = s.level.max(t.level);
        let center_units = |level: u32, ix: i64| (2 * ix + 1) << (fine - level);
        Self {
            source_level: s.level,
            source_iy: s.index.1,
            target_level: t.level,
            target_iy: t.index.1,
            dx_units: center_units(t.level, t.index.0) - center_units(s.level, s.index.0),
        }
    }

    pub fn geometry(&self, root: &RootBox) -> TranslationGeometry {
        let fine = self.source_level.max(self.target_level);
        let unit = 0.5 * root.box_side(fine);
        let hs = root.box_side(self.source_level);
        let ht = root.box_side(self.target_level);
        TranslationGeometry {
            dx: self.dx_units as f64 * unit,
            dy: root.origin.y + (self.source_iy as f64 + 0.5) * hs + root.origin.y + (self.target_iy as f64 + 0.5) * ht,
            source_half: 0.5 * hs,
            target_half: 0.5 * ht,
        }
    }
}

/// Operator for a well-separated pair.
pub fn far_op(geom: &TranslationGeometry, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<ScatterOp> {
    if matches!(media, MediaConfig::ThreeLayer { .. }) && geom.cutoff() > 0.0 {
        return Ok(ScatterOp::Pairwise);
    }
    Ok(ScatterOp::Translate(compute_a(geom, media, order, rules)?))
}

/// Operator for an adjacent pair.
pub fn near_op(geom: &TranslationGeometry, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<ScatterOp> {
    let cutoff = geom.cutoff();
    if cutoff == 0.0 {
        return Ok(ScatterOp::Translate(compute_a(geom, media, order, rules)?));
    }
    match media {
        MediaConfig::TwoLayer { .. } => Ok(ScatterOp::Split(NearFieldSplit {
            cutoff,
            tail: compute_b_tail(geom, cutoff, media, order, rules)?,
        })),
        _ => Ok(ScatterOp::Pairwise),
    }
}

/// Far tables of one level and source height, keyed by target offset.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTable {
    pub fingerprint: u64,
    pub level: u32,
    pub y_index: i64,
    pub entries: BTreeMap<(i64, i64), ScatterOp>,
}

/// All scattered-field operators a tree needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TableStore {
    pub fingerprint: u64,
    pub order: usize,
    pub depth: u32,
    pub far: BTreeMap<(u32, i64), TranslationTable>,
    pub near: BTreeMap<NearKey, ScatterOp>,
}

/// Identity of everything a table depends on.
pub fn store_fingerprint(media: &MediaConfig, root: &RootBox, order: usize, rules: &SpectralRules) -> u64 {
    let mut h = Fnv::new();
    h.write(&media.fingerprint().to_le_bytes());
    for v in [root.origin.x, root.origin.y, root.side, rules.prop_budget, rules.evan_budget, rules.tail_margin] {
        h.write(&v.to_bits().to_le_bytes());
    }
    h.write(&(order as u64).to_le_bytes());
    h.write(&(rules.nodes_per_panel as u64).to_le_bytes());
    h.finish()
}

/// Far and near keys used by `tree`, deduplicated and sorted.
pub fn table_keys(tree: &Tree) -> Result<(Vec<FarKey>, Vec<NearKey>)> {
    if !tree.lists_built() {
        return Err(Error::Tree("tables need a tree with lists".into()));
    }
    let mut far = std::collections::BTreeSet::new();
    let mut near = std::collections::BTreeSet::new();
    for (id, node) in tree.nodes.iter().enumerate() {
        for &s in &node.interaction_list {
            let src = &tree.nodes[s];
            far.insert(FarKey {
                level: src.level,
                y_index: src.index.1,
                ox: node.index.0 - src.index.0,
                oy: node.index.1 - src.index.1,
            });
        }
        for &s in &node.near_list {
            near.insert(NearKey::between(tree, s, id));
        }
    }
    Ok((far.into_iter().collect(), near.into_iter().collect()))
}

/// Compute every operator `tree` needs. Keys are independent, so they are
/// evaluated in parallel; the result does not depend on the thread count.
pub fn precompute_tables(tree: &Tree, media: &MediaConfig, order: usize, rules: &SpectralRules) -> Result<TableStore> {
    media.validate()?;
    let fingerprint = store_fingerprint(media, &tree.root_box, order, rules);
    let mut store = TableStore {
        fingerprint,
        order,
        depth: tree.depth(),
        far: BTreeMap::new(),
        near: BTreeMap::new(),
    };
    if !media.is_layered() {
        return Ok(store);
    }
    let (far_keys, near_keys) = table_keys(tree)?;
    let root = tree.root_box;
    let far_ops: Vec<ScatterOp> = far_keys
        .par_iter()
        .map(|key| far_op(&key.geometry(&root), media, order, rules))
        .collect::<Result<_>>()?;
    let near_ops: Vec<ScatterOp> = near_keys
        .par_iter()
        .map(|key| near_op(&key.geometry(&root), media, order, rules))
        .collect::<Result<_>>()?;
    for (key, op) in far_keys.into_iter().zip(far_ops) {
        store.insert_far(key, op);
    }
    store.near.extend(near_keys.into_iter().zip(near_ops));
    Ok(store)
}

impl TableStore {
    fn insert_far(&mut self, key: FarKey, op: ScatterOp) {
        let fingerprint = self.fingerprint;
        self.far
            .entry((key.level, key.y_index))
            .or_insert_with(|| TranslationTable {
                fingerprint,
                level: key.level,
                y_index: key.y_index,
                entries: BTreeMap::new(),
            })
            .entries
            .insert((key.ox, key.oy), op);
    }

    pub fn far_op(&self, key: &FarKey) -> Option<&ScatterOp> {
        self.far.get(&(key.level, key.y_index))?.entries.get(&(key.ox, key.oy))
    }

    pub fn near_op(&self, key: &NearKey) -> Option<&ScatterOp> {
        self.near.get(key)
    }

    pub fn far_key_count(&self) -> usize {
        self.far.values().map(|t| t.entries.len()).sum()
    }

    /// Complex values held by the far tables.
    pub fn far_entry_count(&self) -> usize {
        self.far
            .values()
            .flat_map(|t| t.entries.values())
            .map(|op| match op {
                ScatterOp::Translate(v) => v.len(),
                ScatterOp::Split(s) => s.tail.len(),
                ScatterOp::Pairwise => 0,
            })
            .sum()
    }

    /// Fail unless the store was built for this medium, root, order and rules.
    pub fn check_matches(&self, media: &MediaConfig, root: &RootBox, order: usize, rules: &SpectralRules) -> Result<()> {
        let want = store_fingerprint(media, root, order, rules);
        if want != self.fingerprint || order != self.order {
            return Err(Error::Cache(format!(
                "table store fingerprint {:016x} does not match {:016x}",
                self.fingerprint, want
            )));
        }
        Ok(())
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&encode_store(self)).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read_cache(path: &Path) -> Result<TableStore> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        let mut bytes = Vec::new();
        BufReader::new(File::open(path).map_err(io)?).read_to_end(&mut bytes).map_err(io)?;
        decode_store(&bytes)
    }
}

const MAGIC: &[u8; 8] = b"HFMMTBL\0";
const FORMAT_VERSION: u32 = 1;

fn put_op(buf: &mut Vec<u8>, op: &ScatterOp) {
    let values: &[Complex64] = match op {
        ScatterOp::Translate(v) => {
            buf.push(0);
            v
        }
        ScatterOp::Split(s) => {
            buf.push(1);
            buf.extend_from_slice(&s.cutoff.to_le_bytes());
            &s.tail
        }
        ScatterOp::Pairwise => {
            buf.push(2);
            &[]
        }
    };
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn encode_store(store: &TableStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&store.fingerprint.to_le_bytes());
    out.extend_from_slice(&(store.order as u64).to_le_bytes());
    out.extend_from_slice(&store.depth.to_le_bytes());
    let mut records: Vec<Vec<u8>> = Vec::new();
    for t in store.far.values() {
        for (&(ox, oy), op) in &t.entries {
            let mut r = vec![0u8];
            for v in [i64::from(t.level), t.y_index, ox, oy] {
                r.extend_from_slice(&v.to_le_bytes());
            }
            put_op(&mut r, op);
            records.push(r);
        }
    }
    for (key, op) in &store.near {
        let mut r = vec![1u8];
        for v in [
            i64::from(key.source_level),
            key.source_iy,
            i64::from(key.target_level),
            key.target_iy,
            key.dx_units,
        ] {
            r.extend_from_slice(&v.to_le_bytes());
        }
        put_op(&mut r, op);
        records.push(r);
    }
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.len() as u64).to_le_bytes());
        out.extend_from_slice(&r);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Cache("truncated table cache".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(self.u64()? as i64)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn level(&mut self) -> Result<u32> {
        u32::try_from(self.i64()?).map_err(|_| Error::Cache("bad level in table cache".into()))
    }
    fn op(&mut self) -> Result<ScatterOp> {
        let tag = self.u8()?;
        let cutoff = if tag == 1 { Some(self.f64()?) } else { None };
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Cache("bad length".into()))?;
        if len > self.bytes.len() / 16 {
            return Err(Error::Cache("record length exceeds file size".into()));
        }
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            let re = self.f64()?;
            let im = self.f64()?;
            v.push(Complex64::new(re, im));
        }
        match (tag, cutoff) {
            (0, _) => Ok(ScatterOp::Translate(v)),
            (1, Some(cutoff)) => Ok(ScatterOp::Split(NearFieldSplit { cutoff, tail: v })),
            (2, _) => Ok(ScatterOp::Pairwise),
            _ => Err(Error::Cache(format!("unknown operator tag {tag}"))),
        }
    }
}

fn decode_store(bytes: &[u8]) -> Result<TableStore> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Cache("not a table cache".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!("unsupported cache version {version}")));
    }
    let fingerprint = c.u64()?;
    let order = usize::try_from(c.u64()?).map_err(|_| Error::Cache("bad order".into()))?;
    let depth = c.u32()?;
    let mut store = TableStore {
        fingerprint,
        order,
        depth,
        far: BTreeMap::new(),
        near: BTreeMap::new(),
    };
    let count = c.u64()?;
    for _ in 0..count {
        let len = usize::try_from(c.u64()?).map_err(|_| Error::Cache("bad record length".into()))?;
        let start = c.pos;
        match c.u8()? {
            0 => {
                let key = FarKey {
                    level: c.level()?,
                    y_index: c.i64()?,
                    ox: c.i64()?,
                    oy: c.i64()?,
                };
                let op = c.op()?;
                store.insert_far(key, op);
            }
            1 => {
                let key = NearKey {
                    source_level: c.level()?,
                    source_iy: c.i64()?,
                    target_level: c.level()?,
                    target_iy: c.i64()?,
                    dx_units: c.i64()?,
                };
                let op = c.op()?;
                store.near.insert(key, op);
            }
            t => return Err(Error::Cache(format!("unknown record tag {t}"))),
        }
        if c.pos - start != len {
            return Err(Error::Cache("record length mismatch".into()));
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::Cache("trailing bytes in table cache".into()));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansions::{eval_local, hankel_waves, m2l_free, p2m};
    use crate::greens::scattered_direct;
    use crate::tree::Particle;

    fn far_geom() -> TranslationGeometry {
        TranslationGeometry {
            dx: 0.75,
            dy: 2.6,
            source_half: 0.125,
            target_half: 0.125,
        }
    }

    #[test]
    fn zero_impedance_collapses_to_point_image() {
        let g = far_geom();
        let m = MediaConfig::TwoLayer { k: 1.0, alpha: 0.0 };
        let a = compute_a(&g, &m, 6, &SpectralRules::default()).unwrap();
        let h = hankel_waves(1.0, Point2::new(g.dx, g.dy), 12).unwrap();
        for (u, v) in a.iter().zip(&h) {
            assert!((u - v).norm() <= 1e-12 * v.norm());
        }
    }

    #[test]
    fn image_coefficients_are_conjugates_for_real_strengths() {
        let src = [
            Particle::new(0.1, 1.05, Complex64::new(1.0, 0.0)),
            Particle::new(-0.05, 0.95, Complex64::new(-0.4, 0.0)),
        ];
        let e = p2m(&src, Point2::new(0.0, 1.0), 5, 1.0).unwrap();
        for (a, b) in image_coefficients(&e.coeffs).iter().zip(&e.coeffs) {
            assert!((a - b.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn scattered_translation_matches_oracle() {
        let k = 1.0;
        let media = MediaConfig::TwoLayer { k, alpha: 1.0 };
        let sc = Point2::new(0.125, 0.625);
        let src: Vec<Particle> = (0..8)
            .map(|i| {
                let t = i as f64;
                Particle::new(sc.x + 0.1 * (1.3 * t).sin(), sc.y + 0.1 * (0.7 * t).cos(), Complex64::new(t.cos(), 0.5 * t.sin()))
            })
            .collect();
        let order = 25;
        let e = p2m(&src, sc, order, k).unwrap();
        let tc = Point2::new(0.875, 0.875);
        let geom = TranslationGeometry::between(sc, 0.125, tc, 0.125);
        let a = compute_a(&geom, &media, order, &SpectralRules::default()).unwrap();
        let local = m2l_image(&e, &a, tc).unwrap();
        for d in [Point2::new(0.1, -0.1), Point2::new(-0.05, 0.12), Point2::new(0.0, 0.0)] {
            let x = tc + d;
            let want: Complex64 = src
                .iter()
                .map(|p| p.strength * scattered_direct(&media, x, p.position, 1e-13).unwrap())
                .sum();
            let got = eval_local(&local, k, x).unwrap();
            assert!((got - want).norm() <= 1e-9 * want.norm(), "{got} vs {want}");
        }
    }

    #[test]
    fn split_and_spectral_routes_agree() {
        // Far from the interface both routes are accurate; force the split by
        // inflating the box sizes used for the cutoff.
        let media = MediaConfig::TwoLayer { k: 1.0, alpha: 0.7 };
        let rules = SpectralRules::default();
        let plain = TranslationGeometry { dx: 0.9, dy: 2.0, source_half: 0.1, target_half: 0.1 };
        let forced = TranslationGeometry { source_half: 0.6, target_half: 0.6, ..plain };
        assert!(forced.cutoff() > 0.0 && plain.cutoff() == 0.0);
        let a = compute_a(&plain, &media, 8, &rules).unwrap();
        let b = compute_a(&forced, &media, 8, &rules).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() <= 1e-11 * u.norm().max(1e-3), "{u} vs {v}");
        }
    }

    #[test]
    fn tail_limits() {
        let g = far_geom();
        let rules = SpectralRules::default();
        let zero = MediaConfig::TwoLayer { k: 1.0, alpha: 0.0 };
        assert!(compute_b_tail(&g, 0.3, &zero, 4, &rules).unwrap().iter().all(|v| *v == ZERO));
        let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
        let b = compute_b_tail(&g, 1e-13, &media, 4, &rules).unwrap();
        let a = compute_a(&g, &media, 4, &rules).unwrap();
        let h = hankel_waves(1.0, Point2::new(g.dx, g.dy), 8).unwrap();
        for ((u, v), w) in b.iter().zip(&a).zip(&h) {
            let line = v - w;
            assert!((u - line).norm() <= 1e-10 * line.norm().max(1e-3));
        }
        assert!(compute_b_tail(&g, 0.0, &media, 4, &rules).is_err());
        assert!(compute_b_tail(&g, 0.1, &MediaConfig::Free { k: 1.0 }, 4, &rules).is_err());
    }

    #[test]
    fn anti_linear_contract() {
        let g = far_geom();
        let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
        let a = compute_a(&g, &media, 3, &SpectralRules::default()).unwrap();
        let mut e = MultipoleExpansion::zero(Point2::new(0.0, 1.0), 3);
        for (i, c) in e.coeffs.iter_mut().enumerate() {
            *c = Complex64::new(i as f64 - 2.0, 0.5 * i as f64);
        }
        let base = m2l_heterogeneous(&e, &a, Point2::new(0.75, 1.6)).unwrap();
        let c = Complex64::new(0.0, 2.0);
        let mut scaled = e.clone();
        scaled.scale(c);
        let out = m2l_heterogeneous(&scaled, &a, Point2::new(0.75, 1.6)).unwrap();
        for (u, v) in out.coeffs.iter().zip(&base.coeffs) {
            assert!((u - c.conj() * v).norm() <= 1e-13 * v.norm().max(1.0));
        }
        assert!(m2l_heterogeneous(&e, &a[1..], Point2::default()).is_err());
    }

    #[test]
    fn real_alpha_zero_matches_mirrored_free_m2l() {
        let media = MediaConfig::TwoLayer { k: 1.0, alpha: 0.0 };
        let src = [Particle::new(0.05, 1.02, Complex64::new(1.0, 0.0)), Particle::new(-0.1, 0.9, Complex64::new(0.3, 0.0))];
        let sc = Point2::new(0.0, 1.0);
        let e = p2m(&src, sc, 10, 1.0).unwrap();
        let tc = Point2::new(0.8, 1.4);
        let a = compute_a(&TranslationGeometry::between(sc, 0.125, tc, 0.125), &media, 10, &SpectralRules::default()).unwrap();
        let het = m2l_heterogeneous(&e, &a, tc).unwrap();
        let mut mirrored = e.clone();
        mirrored.center = Point2::new(0.0, -1.0);
        mirrored.coeffs = e.coeffs.iter().map(|c| c.conj()).collect();
        let free = m2l_free(&mirrored, tc, 1.0).unwrap();
        for (u, v) in het.coeffs.iter().zip(&free.coeffs) {
            assert!((u - v).norm() <= 1e-11 * v.norm().max(1e-6));
        }
    }

    #[test]
    fn geometry_errors() {
        let bad = TranslationGeometry { dx: 0.0, dy: 0.0, source_half: 0.1, target_half: 0.1 };
        let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
        assert!(compute_a(&bad, &media, 2, &SpectralRules::default()).is_err());
    }
}
