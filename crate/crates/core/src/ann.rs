//! Nearest-neighbor machinery over the complex rotations of a code.
//!
//! Complex vectors in `C^m` are packed as `[Re; Im]` into `R^{2m}`, which
//! preserves Euclidean distances. [`RotationSet`] holds the `n * n_rot` packed
//! rotations `c_u e^{i 2 pi k / n_rot}` in owner-major order, and [`NnIndex`]
//! is a median-split k-d tree over them supporting exact K-NN, leaf-budgeted
//! best-bin-first K-NN, and radius queries. All queries can exclude every
//! point owned by one codeword.
//!
//! Equidistant points are ordered by point id, i.e. by `(owner, rotation)`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

use crate::codes::SphericalCode;
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_LEAF_CAPACITY: usize = 32;

/// `[Re(c); Im(c)]`.
pub fn pack_complex(c: &[Complex64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * c.len()];
    pack_into(c, &mut out);
    out
}

pub fn pack_into(c: &[Complex64], out: &mut [f64]) {
    let m = c.len();
    assert_eq!(out.len(), 2 * m);
    let (re, im) = out.split_at_mut(m);
    for (w, z) in c.iter().enumerate() {
        re[w] = z.re;
        im[w] = z.im;
    }
}

/// Inverse of [`pack_complex`].
pub fn unpack_real(p: &[f64]) -> Vec<Complex64> {
    assert!(p.len() % 2 == 0, "packed vector must have even length");
    let m = p.len() / 2;
    (0..m).map(|w| Complex64::new(p[w], p[m + w])).collect()
}

/// The unit phases `e^{i 2 pi k / n_rot}`, `k = 0..n_rot`.
pub fn rotation_phases(n_rot: usize) -> Vec<Complex64> {
    (0..n_rot)
        .map(|k| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                math::cis(2.0 * core::f64::consts::PI * k as f64 / n_rot as f64)
            }
        })
        .collect()
}

/// One packed rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackedPoint<'a> {
    pub id: usize,
    pub owner: usize,
    pub rotation: usize,
    pub coords: &'a [f64],
}

/// All `n_rot` complex rotations of every codeword, packed into `R^{2m}`.
#[derive(Debug, Clone)]
pub struct RotationSet {
    m: usize,
    n: usize,
    n_rot: usize,
    phases: Vec<Complex64>,
    coords: Vec<f64>,
}

impl RotationSet {
    pub fn build(code: &SphericalCode, n_rot: usize) -> Result<Self> {
        if n_rot < 2 {
            return Err(Error::InvalidConfig("n_rot must be at least 2"));
        }
        let mut set = RotationSet { m: 0, n: 0, n_rot, phases: rotation_phases(n_rot), coords: Vec::new() };
        set.rebuild(code);
        Ok(set)
    }

    /// Recomputes the rotations of `code` in place, keeping `n_rot`.
    pub fn rebuild(&mut self, code: &SphericalCode) {
        let (m, n, n_rot) = (code.m(), code.n(), self.n_rot);
        let dim = 2 * m;
        self.m = m;
        self.n = n;
        self.coords.resize(n * n_rot * dim, 0.0);
        for (u, c) in code.columns().enumerate() {
            for (k, phase) in self.phases.iter().enumerate() {
                let out = &mut self.coords[(u * n_rot + k) * dim..(u * n_rot + k + 1) * dim];
                for (w, z) in c.iter().enumerate() {
                    let r = z * phase;
                    out[w] = r.re;
                    out[m + w] = r.im;
                }
            }
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_rot(&self) -> usize {
        self.n_rot
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    pub fn len(&self) -> usize {
        self.n * self.n_rot
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phases(&self) -> &[Complex64] {
        &self.phases
    }

    pub fn id(&self, owner: usize, rotation: usize) -> usize {
        owner * self.n_rot + rotation
    }

    pub fn coords(&self, id: usize) -> &[f64] {
        let dim = self.dim();
        &self.coords[id * dim..(id + 1) * dim]
    }

    pub fn point(&self, id: usize) -> PackedPoint<'_> {
        PackedPoint { id, owner: id / self.n_rot, rotation: id % self.n_rot, coords: self.coords(id) }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = PackedPoint<'_>> + '_ {
        (0..self.len()).map(move |id| self.point(id))
    }
}

/// A search hit. `dist2` is the squared Euclidean distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub owner: usize,
    pub rotation: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Neighbor) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.id.cmp(&other.id))
    }
}

/// Hits sorted by ascending distance, ties by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
}

impl NeighborList {
    /// Sorts `entries` into canonical order.
    pub fn from_unsorted(mut entries: Vec<Neighbor>) -> Self {
        entries.sort_by(Neighbor::key_cmp);
        NeighborList { entries }
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Neighbor> {
        self.entries.iter()
    }

    pub fn into_vec(self) -> Vec<Neighbor> {
        self.entries
    }
}

/// Fraction of `exact` recovered by `approx`, matched by point id.
pub fn recall(approx: &NeighborList, exact: &NeighborList) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::LengthMismatch(approx.len(), exact.len()));
    }
    if exact.is_empty() {
        return Ok(1.0);
    }
    let mut truth: Vec<usize> = exact.iter().map(|e| e.id).collect();
    truth.sort_unstable();
    let hits = approx.iter().filter(|a| truth.binary_search(&a.id).is_ok()).count();
    Ok(hits as f64 / exact.len() as f64)
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { dim: u32, value: f64, left: u32, right: u32 },
}

/// Median-split k-d tree over a [`RotationSet`].
///
/// Points are copied into leaf order so a leaf scan reads contiguous memory.
/// [`rebuild`](Self::rebuild) reuses all buffers.
#[derive(Debug, Clone)]
pub struct NnIndex {
    dim: usize,
    leaf_capacity: usize,
    points: Vec<f64>,
    ids: Vec<u32>,
    owners: Vec<u32>,
    rotations: Vec<u32>,
    owner_counts: Vec<u32>,
    nodes: Vec<Node>,
    leaves: usize,
    perm: Vec<u32>,
    keys: Vec<(f64, u32)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Reusable buffers for repeated queries.
#[derive(Debug, Default)]
pub struct SearchScratch {
    best: KBest,
    sorted: Vec<Candidate>,
    offsets: Vec<f64>,
    queue: BinaryHeap<Branch>,
}

// Lower bounds are inflated by this relative slack before pruning so that
// rounding in the incremental bound never discards an exact tie.
const BOUND_SLACK: f64 = 1.0 - 1e-12;

impl NnIndex {
    /// An empty index; call [`rebuild`](Self::rebuild) before searching.
    pub fn new(leaf_capacity: usize) -> Result<Self> {
        if leaf_capacity == 0 {
            return Err(Error::InvalidConfig("leaf capacity must be positive"));
        }
        Ok(NnIndex {
            dim: 0,
            leaf_capacity,
            points: Vec::new(),
            ids: Vec::new(),
            owners: Vec::new(),
            rotations: Vec::new(),
            owner_counts: Vec::new(),
            nodes: Vec::new(),
            leaves: 0,
            perm: Vec::new(),
            keys: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        })
    }

    /// Builds the tree: each node splits its widest-spread coordinate at the
    /// median; nodes with at most `leaf_capacity` points become leaves.
    pub fn build(set: &RotationSet, leaf_capacity: usize) -> Result<Self> {
        let mut index = NnIndex::new(leaf_capacity)?;
        index.rebuild(set)?;
        Ok(index)
    }

    pub fn rebuild(&mut self, set: &RotationSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::InvalidConfig("cannot index an empty point set"));
        }
        let dim = set.dim();
        self.dim = dim;
        self.nodes.clear();
        self.leaves = 0;
        self.lo.resize(dim, 0.0);
        self.hi.resize(dim, 0.0);
        self.perm.clear();
        self.perm.extend(0..set.len() as u32);
        self.build_node(&set.coords, 0, set.len());

        self.points.clear();
        self.ids.clear();
        self.owners.clear();
        self.rotations.clear();
        let n_rot = set.n_rot() as u32;
        for &p in &self.perm {
            let i = p as usize;
            self.points.extend_from_slice(&set.coords[i * dim..(i + 1) * dim]);
            self.ids.push(p);
            self.owners.push(p / n_rot);
            self.rotations.push(p % n_rot);
        }
        self.owner_counts.clear();
        self.owner_counts.resize(set.n(), n_rot);
        Ok(())
    }

    fn push_leaf(&mut self, start: usize, end: usize) -> u32 {
        self.nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
        self.leaves += 1;
        (self.nodes.len() - 1) as u32
    }

    fn build_node(&mut self, coords: &[f64], start: usize, end: usize) -> u32 {
        if end - start <= self.leaf_capacity {
            return self.push_leaf(start, end);
        }
        let dim = self.dim;
        self.lo.fill(f64::INFINITY);
        self.hi.fill(f64::NEG_INFINITY);
        for &p in &self.perm[start..end] {
            let row = &coords[p as usize * dim..(p as usize + 1) * dim];
            for ((lo, hi), &x) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(row) {
                *lo = if x < *lo { x } else { *lo };
                *hi = if x > *hi { x } else { *hi };
            }
        }
        let mut split_dim = 0;
        let mut spread = -1.0;
        for d in 0..dim {
            let s = self.hi[d] - self.lo[d];
            if s > spread {
                spread = s;
                split_dim = d;
            }
        }
        if spread <= 0.0 {
            // all points identical
            return self.push_leaf(start, end);
        }
        self.keys.clear();
        self.keys.extend(self.perm[start..end].iter().map(|&p| (coords[p as usize * dim + split_dim], p)));
        let mid = (end - start) / 2;
        self.keys.select_nth_unstable_by(mid, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let value = self.keys[mid].0;
        for (slot, &(_, p)) in self.perm[start..end].iter_mut().zip(&self.keys) {
            *slot = p;
        }
        let index = self.nodes.len() as u32;
        self.nodes.push(Node::Split { dim: split_dim as u32, value, left: 0, right: 0 });
        let left = self.build_node(coords, start, start + mid);
        let right = self.build_node(coords, start + mid, end);
        self.nodes[index as usize] = Node::Split { dim: split_dim as u32, value, left, right };
        index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Point ids in leaf order; every id appears exactly once.
    pub fn leaf_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids.iter().map(|&i| i as usize)
    }

    fn available(&self, exclude_owner: Option<usize>) -> usize {
        let excluded = exclude_owner.and_then(|o| self.owner_counts.get(o)).copied().unwrap_or(0);
        self.len() - excluded as usize
    }

    fn neighbor(&self, slot: usize, dist2: f64) -> Neighbor {
        Neighbor {
            id: self.ids[slot] as usize,
            owner: self.owners[slot] as usize,
            rotation: self.rotations[slot] as usize,
            dist2,
        }
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidConfig("index has not been built"));
        }
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        Ok(())
    }

    /// The `k` nearest points whose owner is not `exclude_owner`.
    ///
    /// Without a budget the result is exact. With `Some(b)` the best-bin-first
    /// search stops once it has scanned `b` leaves and holds `k` candidates, so
    /// some true neighbors may be missed; any budget of at least
    /// [`leaf_count`](Self::leaf_count) is exact.
    pub fn knn_search(
        &self,
        query: &[f64],
        k: usize,
        exclude_owner: Option<usize>,
        budget: Option<usize>,
    ) -> Result<NeighborList> {
        let mut entries = Vec::with_capacity(k);
        self.knn_into(query, k, exclude_owner, budget, &mut SearchScratch::default(), &mut entries)?;
        Ok(NeighborList { entries })
    }

    /// [`knn_search`](Self::knn_search) writing into `out` with caller-owned buffers.
    pub fn knn_into(
        &self,
        query: &[f64],
        k: usize,
        exclude_owner: Option<usize>,
        budget: Option<usize>,
        scratch: &mut SearchScratch,
        out: &mut Vec<Neighbor>,
    ) -> Result<()> {
        self.check_query(query)?;
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1"));
        }
        let available = self.available(exclude_owner);
        if available < k {
            return Err(Error::InsufficientCandidates { requested: k, available });
        }
        let exclude = exclude_owner.map_or(u32::MAX, |o| o as u32);
        scratch.best.reset(k);
        match budget {
            None => {
                scratch.offsets.clear();
                scratch.offsets.resize(self.dim, 0.0);
                self.descend(0, query, 0.0, &mut scratch.offsets, exclude, &mut scratch.best);
            }
            Some(b) => self.best_bin_first(query, exclude, b.max(1), &mut scratch.queue, &mut scratch.best),
        }
        scratch.best.drain_sorted(&mut scratch.sorted);
        out.clear();
        out.extend(scratch.sorted.iter().map(|c| self.neighbor(c.slot as usize, c.dist2)));
        Ok(())
    }

    /// All points within Euclidean distance `r` of `query`, excluding `exclude_owner`.
    pub fn radius_search(&self, query: &[f64], r: f64, exclude_owner: Option<usize>) -> Result<NeighborList> {
        self.check_query(query)?;
        if !(r >= 0.0) {
            return Ok(NeighborList::default());
        }
        let mut ball = Ball { r2: r * r, hits: Vec::new() };
        let exclude = exclude_owner.map_or(u32::MAX, |o| o as u32);
        let mut offsets = vec![0.0; self.dim];
        self.descend(0, query, 0.0, &mut offsets, exclude, &mut ball);
        let entries = ball.hits.into_iter().map(|(d2, slot)| self.neighbor(slot as usize, d2)).collect();
        Ok(NeighborList::from_unsorted(entries))
    }

    fn scan_leaf<C: Collector>(&self, start: u32, end: u32, query: &[f64], exclude: u32, out: &mut C) {
        let dim = self.dim;
        let (start, end) = (start as usize, end as usize);
        // four independent sums per pass; each keeps the sequential order of a plain loop
        let mut slot = start;
        while slot + 4 <= end {
            let rows = &self.points[slot * dim..(slot + 4) * dim];
            let (p0, rest) = rows.split_at(dim);
            let (p1, rest) = rest.split_at(dim);
            let (p2, p3) = rest.split_at(dim);
            let mut d = [0.0f64; 4];
            for ((((q, a), b), c), e) in query.iter().zip(p0).zip(p1).zip(p2).zip(p3) {
                let t = [q - a, q - b, q - c, q - e];
                d[0] += t[0] * t[0];
                d[1] += t[1] * t[1];
                d[2] += t[2] * t[2];
                d[3] += t[3] * t[3];
            }
            for (j, &d2) in d.iter().enumerate() {
                let s = slot + j;
                if d2 <= out.bound() && self.owners[s] != exclude {
                    out.offer(d2, self.ids[s], s as u32);
                }
            }
            slot += 4;
        }
        for s in slot..end {
            let p = &self.points[s * dim..(s + 1) * dim];
            let mut d2 = 0.0;
            for (q, a) in query.iter().zip(p) {
                let t = q - a;
                d2 += t * t;
            }
            if d2 <= out.bound() && self.owners[s] != exclude {
                out.offer(d2, self.ids[s], s as u32);
            }
        }
    }

    // Exact depth-first search with incremental cell-distance bounds.
    fn descend<C: Collector>(&self, node: u32, query: &[f64], rd: f64, offsets: &mut [f64], exclude: u32, out: &mut C) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => self.scan_leaf(start, end, query, exclude, out),
            Node::Split { dim, value, left, right } => {
                let d = dim as usize;
                let diff = query[d] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.descend(near, query, rd, offsets, exclude, out);
                let old = offsets[d];
                let far_rd = rd - old * old + diff * diff;
                if far_rd * BOUND_SLACK <= out.bound() {
                    offsets[d] = diff;
                    self.descend(far, query, far_rd, offsets, exclude, out);
                    offsets[d] = old;
                }
            }
        }
    }

    fn best_bin_first(&self, query: &[f64], exclude: u32, budget: usize, queue: &mut BinaryHeap<Branch>, out: &mut KBest) {
        queue.clear();
        queue.push(Branch { bound: 0.0, node: 0 });
        let mut scanned = 0;
        while let Some(Branch { bound, mut node }) = queue.pop() {
            if bound * BOUND_SLACK > out.bound() {
                break;
            }
            loop {
                match self.nodes[node as usize] {
                    Node::Leaf { start, end } => {
                        self.scan_leaf(start, end, query, exclude, out);
                        break;
                    }
                    Node::Split { dim, value, left, right } => {
                        let diff = query[dim as usize] - value;
                        let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                        let far_bound = bound.max(diff * diff);
                        if far_bound * BOUND_SLACK <= out.bound() {
                            queue.push(Branch { bound: far_bound, node: far });
                        }
                        node = near;
                    }
                }
            }
            scanned += 1;
            if scanned >= budget && out.is_full() {
                break;
            }
        }
    }
}

trait Collector {
    /// Squared radius beyond which nothing can be accepted.
    fn bound(&self) -> f64;
    fn offer(&mut self, dist2: f64, id: u32, slot: u32);
}

#[derive(Debug, Default)]
struct KBest {
    k: usize,
    // max-heap on (dist2, id); the root is the current k-th best
    heap: BinaryHeap<Candidate>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    id: u32,
    slot: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.id.cmp(&other.id))
    }
}

impl KBest {
    fn reset(&mut self, k: usize) {
        self.k = k;
        self.heap.clear();
    }

    fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// Drains the candidates in ascending `(dist2, id)` order.
    fn drain_sorted(&mut self, out: &mut Vec<Candidate>) {
        out.clear();
        out.extend(self.heap.drain());
        out.sort_unstable();
    }
}

impl Collector for KBest {
    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist2)
        }
    }

    fn offer(&mut self, dist2: f64, id: u32, slot: u32) {
        let c = Candidate { dist2, id, slot };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if c < *top {
                *top = c;
            }
        }
    }
}

struct Ball {
    r2: f64,
    hits: Vec<(f64, u32)>,
}

impl Collector for Ball {
    fn bound(&self) -> f64 {
        self.r2
    }

    fn offer(&mut self, dist2: f64, _id: u32, slot: u32) {
        if dist2 <= self.r2 {
            self.hits.push((dist2, slot));
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    bound: f64,
    node: u32,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Branch {
    // reversed: BinaryHeap is a max-heap and we want the closest cell first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.node.cmp(&self.node))
    }
}
