//! Finite metric spaces, point sets and the basic ball/diameter operations.

use std::fmt;
use std::ops::ControlFlow;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cliques;
use crate::dist::Dist;
use crate::error::{Error, Result};

/// Outcome of a visitor-driven enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Walk {
    Complete,
    Stopped,
}

/// A finite metric space with exact distances.
///
/// Implementations are immutable; every method is a pure read.
pub trait MetricSpace: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;

    fn len(&self) -> usize;

    fn dist(&self, i: usize, j: usize) -> Dist;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> String {
        i.to_string()
    }

    /// Truncation of "every scale r": checks certify scales up to this value.
    fn scale_cap(&self) -> Dist {
        self.diameter()
    }

    fn diameter(&self) -> Dist {
        let all: Vec<usize> = (0..self.len()).collect();
        self.diameter_of(&all)
    }

    /// Diameter of a sorted list of point indices (0 for fewer than two points).
    fn diameter_of(&self, members: &[usize]) -> Dist {
        let mut best = Dist::ZERO;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    /// Sorted distinct pairwise distances, including 0.
    fn distinct_distances(&self) -> Vec<Dist> {
        let n = self.len();
        let mut out = vec![Dist::ZERO];
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.dist(i, j));
            }
            if out.len() > 1 << 20 {
                out.sort_unstable();
                out.dedup();
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Visits every inclusion-maximal subset of diameter at most `r`
    /// (the maximal cliques of the threshold graph `d <= r`).
    fn for_each_maximal_set(
        &self,
        r: Dist,
        budget: u64,
        visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> Result<Walk> {
        cliques::maximal_cliques(self.len(), &|i, j| self.dist(i, j) <= r, budget, visit)
    }

    fn as_lattice(&self) -> Option<&Lattice> {
        None
    }

    /// Sorted indices within closed distance `r` of `x`.
    fn close_points(&self, x: usize, r: Dist) -> Vec<usize> {
        (0..self.len()).filter(|&y| self.dist(x, y) <= r).collect()
    }

    /// For spaces in which `d <= r` is an equivalence relation (ultrametrics),
    /// a class label per point.
    fn ball_classes(&self, _r: Dist) -> Option<Vec<usize>> {
        None
    }

    /// JSON form, for spaces that have one.
    fn space_file(&self) -> Option<SpaceFile> {
        None
    }
}

pub type SpaceRef = Arc<dyn MetricSpace>;

pub(crate) fn check_index(space: &dyn MetricSpace, index: usize) -> Result<()> {
    if index < space.len() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            space: space.id().to_string(),
            index,
            len: space.len(),
        })
    }
}

pub(crate) fn check_same_space(expected: &dyn MetricSpace, found: &dyn MetricSpace) -> Result<()> {
    if expected.id() == found.id() && expected.len() == found.len() {
        Ok(())
    } else {
        Err(Error::SpaceMismatch {
            expected: expected.id().to_string(),
            found: found.id().to_string(),
        })
    }
}

/// A sorted set of point indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet(Vec<usize>);

impl PointSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> PointSet {
        let mut v: Vec<usize> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        PointSet(v)
    }

    pub fn singleton(x: usize) -> PointSet {
        PointSet(vec![x])
    }

    pub fn range(lo: usize, hi_exclusive: usize) -> PointSet {
        PointSet((lo..hi_exclusive).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }

    pub fn intersects(&self, other: &PointSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        PointSet::new(self.0.iter().chain(&other.0).copied())
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        PointSet::new(iter)
    }
}

/// Diameter of a point set; 0 for the empty set and for singletons.
pub fn diameter(space: &dyn MetricSpace, a: &PointSet) -> Result<Dist> {
    for &x in a.members() {
        check_index(space, x)?;
    }
    Ok(space.diameter_of(a.members()))
}

/// Open (`d < r`) or closed (`d <= r`) ball around `x`.
pub fn ball(space: &dyn MetricSpace, x: usize, r: Dist, closed: bool) -> Result<PointSet> {
    check_index(space, x)?;
    let mut members = space.close_points(x, r);
    if !closed {
        members.retain(|&y| space.dist(x, y) < r);
    }
    Ok(PointSet(members))
}

/// Largest integer strictly below `t`.
fn open_radius(t: Dist) -> u64 {
    match t.as_int() {
        Some(k) => k.saturating_sub(1),
        None => t.floor_int(),
    }
}

/// Points within integer distance `k` of `a` on an L1 or Linf lattice, by
/// breadth-first search over unit (L1) or king (Linf) moves.
fn lattice_dilation(space: &dyn MetricSpace, a: &PointSet, k: u64) -> Option<PointSet> {
    let l = space.as_lattice()?;
    let dim = l.dim();
    let steps: Vec<Vec<i64>> = match l.norm() {
        Norm::L1 => (0..dim)
            .flat_map(|axis| {
                [-1, 1].map(|s| {
                    let mut v = vec![0; dim];
                    v[axis] = s;
                    v
                })
            })
            .collect(),
        Norm::Linf if dim <= 6 => (0..3usize.pow(dim as u32))
            .map(|code| (0..dim).map(|axis| (code / 3usize.pow(axis as u32) % 3) as i64 - 1).collect::<Vec<i64>>())
            .filter(|v| v.iter().any(|&c| c != 0))
            .collect(),
        _ => return None,
    };
    let mut seen = vec![false; l.len()];
    let mut frontier: Vec<usize> = a.members().to_vec();
    for &x in &frontier {
        seen[x] = true;
    }
    let mut out = frontier.clone();
    let mut point = vec![0i64; dim];
    for _ in 0..k {
        let mut next = Vec::new();
        for &x in &frontier {
            for step in &steps {
                for (axis, p) in point.iter_mut().enumerate() {
                    *p = l.coords(x)[axis] + step[axis];
                }
                if let Some(y) = l.index_of(&point) {
                    if !seen[y] {
                        seen[y] = true;
                        next.push(y);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend_from_slice(&next);
        frontier = next;
    }
    Some(PointSet::new(out))
}

/// Points at distance `< t` from some member of `a`; `a` itself when `t = 0`.
pub fn neighborhood(space: &dyn MetricSpace, a: &PointSet, t: Dist) -> Result<PointSet> {
    for &x in a.members() {
        check_index(space, x)?;
    }
    if t == Dist::ZERO {
        return Ok(a.clone());
    }
    if let Some(out) = lattice_dilation(space, a, open_radius(t)) {
        return Ok(out);
    }
    let mut out: Vec<usize> = a.members().to_vec();
    for &x in a.members() {
        out.extend(space.close_points(x, t).into_iter().filter(|&y| space.dist(x, y) < t));
    }
    Ok(PointSet::new(out))
}

/// Points at distance `<= t` from some member of `a`.
pub fn closed_neighborhood(space: &dyn MetricSpace, a: &PointSet, t: Dist) -> Result<PointSet> {
    for &x in a.members() {
        check_index(space, x)?;
    }
    if let Some(out) = lattice_dilation(space, a, t.floor_int()) {
        return Ok(out);
    }
    let mut out: Vec<usize> = a.members().to_vec();
    for &x in a.members() {
        out.extend(space.close_points(x, t));
    }
    Ok(PointSet::new(out))
}

/// Geometric scale sweep `1, 2, 4, ...` below `r_max`, closed by `r_max` itself.
pub fn scale_schedule(r_max: Dist) -> Vec<Dist> {
    let mut out = Vec::new();
    let mut r = 1u64;
    while Dist::from_int(r) < r_max {
        out.push(Dist::from_int(r));
        r *= 2;
    }
    out.push(r_max);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    Linf,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Norm> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "linf" | "max" => Ok(Norm::Linf),
            "l2" => Ok(Norm::L2),
            other => Err(Error::InvalidSpace(format!("unknown norm {other:?}"))),
        }
    }
}

/// Integer points of an axis-aligned box with an Lp norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    bounds: Vec<(i64, i64)>,
    norm: Norm,
    coords: Vec<i64>,
}

impl Lattice {
    pub fn new(bounds: Vec<(i64, i64)>, norm: Norm) -> Result<Lattice> {
        if bounds.is_empty() {
            return Err(Error::InvalidSpace("lattice dimension must be positive".into()));
        }
        let mut count: usize = 1;
        for &(lo, hi) in &bounds {
            if hi < lo {
                return Err(Error::InvalidSpace(format!("empty axis range {lo}:{hi}")));
            }
            count = count
                .checked_mul((hi - lo + 1) as usize)
                .filter(|&c| c <= 50_000_000)
                .ok_or_else(|| Error::InvalidSpace("lattice too large".into()))?;
        }
        let dim = bounds.len();
        let mut coords = Vec::with_capacity(count * dim);
        let mut cur: Vec<i64> = bounds.iter().map(|b| b.0).collect();
        for _ in 0..count {
            coords.extend_from_slice(&cur);
            for axis in (0..dim).rev() {
                if cur[axis] < bounds[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = bounds[axis].0;
            }
        }
        Ok(Lattice {
            bounds,
            norm,
            coords,
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(i64, i64)] {
        &self.bounds
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, i: usize) -> &[i64] {
        let m = self.dim();
        &self.coords[i * m..(i + 1) * m]
    }

    /// Index of the point with the given coordinates, if inside the box.
    pub fn index_of(&self, point: &[i64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut idx = 0usize;
        for (&c, &(lo, hi)) in point.iter().zip(&self.bounds) {
            if c < lo || c > hi {
                return None;
            }
            idx = idx * (hi - lo + 1) as usize + (c - lo) as usize;
        }
        Some(idx)
    }

    fn extents(&self) -> Vec<u64> {
        self.bounds.iter().map(|&(lo, hi)| (hi - lo) as u64).collect()
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> Dist {
        let (a, b) = (self.coords(i), self.coords(j));
        match self.norm {
            Norm::L1 => Dist::from_int(a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()),
            Norm::Linf => Dist::from_int(a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)),
            Norm::L2 => Dist::from_squared(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x.abs_diff(*y) as u128;
                        d * d
                    })
                    .sum(),
            ),
        }
    }

    fn close_points(&self, x: usize, r: Dist) -> Vec<usize> {
        let reach = r.floor_int().min(i64::MAX as u64 / 4) as i64;
        let center = self.coords(x).to_vec();
        let ranges: Vec<(i64, i64)> = center
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &(lo, hi))| ((c - reach).max(lo), (c + reach).min(hi)))
            .collect();
        let mut out = Vec::new();
        let mut point: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'points: loop {
            let y = self.index_of(&point).expect("inside box");
            if self.dist(x, y) <= r {
                out.push(y);
            }
            for axis in (0..self.dim()).rev() {
                if point[axis] < ranges[axis].1 {
                    point[axis] += 1;
                    continue 'points;
                }
                point[axis] = ranges[axis].0;
            }
            return out;
        }
    }

    /// Every axis-aligned window of side `r` (clipped to the box); these are
    /// exactly the maximal subsets of Linf-diameter at most `r`.
    fn for_each_window(&self, r: u64, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> Walk {
        let dim = self.dim();
        let starts: Vec<(i64, i64)> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let last = (hi - r as i64).max(lo);
                (lo, last)
            })
            .collect();
        let mut anchor: Vec<i64> = starts.iter().map(|s| s.0).collect();
        let mut buf = Vec::new();
        let mut point = vec![0i64; dim];
        loop {
            buf.clear();
            let ranges: Vec<(i64, i64)> = anchor
                .iter()
                .zip(&self.bounds)
                .map(|(&a, &(_, hi))| (a, (a + r as i64).min(hi)))
                .collect();
            point.copy_from_slice(&ranges.iter().map(|r| r.0).collect::<Vec<_>>());
            'points: loop {
                buf.push(self.index_of(&point).expect("window inside box"));
                for axis in (0..dim).rev() {
                    if point[axis] < ranges[axis].1 {
                        point[axis] += 1;
                        continue 'points;
                    }
                    point[axis] = ranges[axis].0;
                }
                break;
            }
            if visit(&buf).is_break() {
                return Walk::Stopped;
            }
            let mut advanced = false;
            for axis in (0..dim).rev() {
                if anchor[axis] < starts[axis].1 {
                    anchor[axis] += 1;
                    advanced = true;
                    break;
                }
                anchor[axis] = starts[axis].0;
            }
            if !advanced {
                return Walk::Complete;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Geometry {
    /// Row-major symmetric matrix of nonnegative integers.
    Matrix { size: usize, entries: Vec<u64> },
    Lattice(Lattice),
}

/// An indexed point set with a deterministic exact metric.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    id: String,
    labels: Option<Vec<String>>,
    geometry: Geometry,
    scale_cap: Dist,
}

impl FiniteMetricSpace {
    /// Lattice `Z^m ∩ box` with the given norm; `R_max` defaults to the diameter.
    pub fn lattice(id: impl Into<String>, bounds: Vec<(i64, i64)>, norm: Norm) -> Result<FiniteMetricSpace> {
        let lattice = Lattice::new(bounds, norm)?;
        let mut space = FiniteMetricSpace {
            id: id.into(),
            labels: None,
            geometry: Geometry::Lattice(lattice),
            scale_cap: Dist::ZERO,
        };
        space.scale_cap = space.diameter();
        Ok(space)
    }

    /// `Z ∩ [lo, hi]`.
    pub fn interval(id: impl Into<String>, lo: i64, hi: i64) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::lattice(id, vec![(lo, hi)], Norm::L1)
    }

    /// Explicit distance matrix; validated against the metric axioms.
    pub fn from_matrix(id: impl Into<String>, rows: Vec<Vec<u64>>) -> Result<FiniteMetricSpace> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidSpace(format!(
                    "matrix row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        let mut space = FiniteMetricSpace {
            id: id.into(),
            labels: None,
            geometry: Geometry::Matrix { size, entries },
            scale_cap: Dist::ZERO,
        };
        space.validate()?;
        space.scale_cap = space.diameter();
        Ok(space)
    }

    /// Matrix space induced by a point cloud in `Z^m` under a norm.
    pub fn from_points(id: impl Into<String>, points: &[Vec<i64>], norm: Norm) -> Result<FiniteMetricSpace> {
        if norm == Norm::L2 {
            return Err(Error::InvalidSpace("matrix spaces carry integer distances; use a lattice for L2".into()));
        }
        let rows = points
            .iter()
            .map(|a| {
                points
                    .iter()
                    .map(|b| {
                        let diffs = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y));
                        match norm {
                            Norm::L1 => diffs.sum(),
                            _ => diffs.max().unwrap_or(0),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut space = FiniteMetricSpace::from_matrix(id, rows)?;
        space.labels = Some(
            points
                .iter()
                .map(|p| format_coords(p))
                .collect(),
        );
        Ok(space)
    }

    pub fn with_scale_cap(mut self, cap: Dist) -> FiniteMetricSpace {
        self.scale_cap = cap;
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<FiniteMetricSpace> {
        if labels.len() != self.len() {
            return Err(Error::InvalidSpace(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn into_ref(self) -> SpaceRef {
        Arc::new(self)
    }

    /// Checks the metric axioms. Triangle inequality is exhaustive up to
    /// 1000 points and sampled (10^6 seeded triples) above that.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            if self.dist(i, i) != Dist::ZERO {
                return Err(Error::NotAMetric(format!("d({i},{i}) = {} is not 0", self.dist(i, i))));
            }
            for j in i + 1..n {
                let (a, b) = (self.dist(i, j), self.dist(j, i));
                if a != b {
                    return Err(Error::NotAMetric(format!("d({i},{j}) = {a} but d({j},{i}) = {b}")));
                }
                if a == Dist::ZERO {
                    return Err(Error::NotAMetric(format!("distinct points {i} and {j} at distance 0")));
                }
            }
        }
        let check = |i: usize, j: usize, k: usize| -> Result<()> {
            let (dij, djk, dik) = (self.dist(i, j), self.dist(j, k), self.dist(i, k));
            if dik.le_sum(dij, djk) {
                Ok(())
            } else {
                Err(Error::TriangleViolation { i, j, k, dij, djk, dik })
            }
        };
        if n <= 1000 {
            for i in 0..n {
                for j in 0..n {
                    for k in i + 1..n {
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..1_000_000 {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> SpaceFile {
        let geometry = match &self.geometry {
            Geometry::Matrix { size, entries } => GeometryFile::Matrix {
                entries: entries.chunks(*size.max(&1)).map(|c| c.to_vec()).collect(),
            },
            Geometry::Lattice(l) => GeometryFile::Lattice {
                dim: l.dim(),
                bounds: l.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
                norm: l.norm,
            },
        };
        SpaceFile {
            id: self.id.clone(),
            geometry,
            scale_cap: Some(self.scale_cap),
            labels: match (&self.geometry, &self.labels) {
                (Geometry::Matrix { .. }, Some(l)) => Some(l.clone()),
                _ => None,
            },
        }
    }

    pub fn from_file(file: SpaceFile) -> Result<FiniteMetricSpace> {
        let mut space = match file.geometry {
            GeometryFile::Matrix { entries } => FiniteMetricSpace::from_matrix(file.id, entries)?,
            GeometryFile::Lattice { dim, bounds, norm } => {
                if bounds.len() != dim {
                    return Err(Error::InvalidSpace(format!(
                        "lattice of dimension {dim} has {} box axes",
                        bounds.len()
                    )));
                }
                FiniteMetricSpace::lattice(file.id, bounds.iter().map(|b| (b[0], b[1])).collect(), norm)?
            }
        };
        if let Some(labels) = file.labels {
            space = space.with_labels(labels)?;
        }
        if let Some(cap) = file.scale_cap {
            space.scale_cap = cap;
        }
        Ok(space)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FiniteMetricSpace> {
        let text = std::fs::read_to_string(path)?;
        FiniteMetricSpace::from_file(serde_json::from_str(&text)?)
    }
}

fn format_coords(c: &[i64]) -> String {
    if c.len() == 1 {
        c[0].to_string()
    } else {
        let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

impl MetricSpace for FiniteMetricSpace {
    fn id(&self) -> &str {
        &self.id
    }

    fn len(&self) -> usize {
        match &self.geometry {
            Geometry::Matrix { size, .. } => *size,
            Geometry::Lattice(l) => l.len(),
        }
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> Dist {
        match &self.geometry {
            Geometry::Matrix { size, entries } => Dist::from_int(entries[i * size + j]),
            Geometry::Lattice(l) => l.dist(i, j),
        }
    }

    fn label(&self, i: usize) -> String {
        if let Some(labels) = &self.labels {
            return labels[i].clone();
        }
        match &self.geometry {
            Geometry::Lattice(l) => format_coords(l.coords(i)),
            Geometry::Matrix { .. } => i.to_string(),
        }
    }

    fn scale_cap(&self) -> Dist {
        self.scale_cap
    }

    fn diameter(&self) -> Dist {
        match &self.geometry {
            Geometry::Lattice(l) => {
                let ext = l.extents();
                match l.norm {
                    Norm::L1 => Dist::from_int(ext.iter().sum()),
                    Norm::Linf => Dist::from_int(ext.iter().copied().max().unwrap_or(0)),
                    Norm::L2 => Dist::from_squared(ext.iter().map(|&e| e as u128 * e as u128).sum()),
                }
            }
            Geometry::Matrix { entries, .. } => Dist::from_int(entries.iter().copied().max().unwrap_or(0)),
        }
    }

    fn diameter_of(&self, members: &[usize]) -> Dist {
        let Geometry::Lattice(l) = &self.geometry else {
            return pairwise_diameter(self, members);
        };
        if members.len() < 2 {
            return Dist::ZERO;
        }
        match l.norm {
            Norm::Linf => {
                let mut best = 0u64;
                for axis in 0..l.dim() {
                    let vals = members.iter().map(|&p| l.coords(p)[axis]);
                    let (lo, hi) = vals.fold((i64::MAX, i64::MIN), |(a, b), v| (a.min(v), b.max(v)));
                    best = best.max(hi.abs_diff(lo));
                }
                Dist::from_int(best)
            }
            Norm::L1 if l.dim() <= 8 => {
                // max over sign patterns of (max - min) of the signed coordinate sum
                let m = l.dim();
                let mut best = 0u64;
                for signs in 0..(1u32 << (m - 1)) {
                    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
                    for &p in members {
                        let c = l.coords(p);
                        let v: i64 = (0..m)
                            .map(|a| if a > 0 && signs & (1 << (a - 1)) != 0 { -c[a] } else { c[a] })
                            .sum();
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    best = best.max(hi.abs_diff(lo));
                }
                Dist::from_int(best)
            }
            _ => pairwise_diameter(self, members),
        }
    }

    fn distinct_distances(&self) -> Vec<Dist> {
        let Geometry::Lattice(l) = &self.geometry else {
            let Geometry::Matrix { entries, .. } = &self.geometry else { unreachable!() };
            let mut v: Vec<Dist> = entries.iter().map(|&e| Dist::from_int(e)).collect();
            v.push(Dist::ZERO);
            v.sort_unstable();
            v.dedup();
            return v;
        };
        let ext = l.extents();
        match l.norm {
            Norm::L1 => (0..=ext.iter().sum::<u64>()).map(Dist::from_int).collect(),
            Norm::Linf => (0..=ext.iter().copied().max().unwrap_or(0)).map(Dist::from_int).collect(),
            Norm::L2 => {
                let mut sums = vec![0u128];
                for &e in &ext {
                    let mut next = Vec::with_capacity(sums.len() * (e as usize + 1));
                    for &s in &sums {
                        for d in 0..=e as u128 {
                            next.push(s + d * d);
                        }
                    }
                    next.sort_unstable();
                    next.dedup();
                    sums = next;
                }
                sums.into_iter().map(Dist::from_squared).collect()
            }
        }
    }

    fn space_file(&self) -> Option<SpaceFile> {
        Some(self.to_file())
    }

    fn as_lattice(&self) -> Option<&Lattice> {
        match &self.geometry {
            Geometry::Lattice(l) => Some(l),
            Geometry::Matrix { .. } => None,
        }
    }

    fn close_points(&self, x: usize, r: Dist) -> Vec<usize> {
        match &self.geometry {
            Geometry::Lattice(l) => l.close_points(x, r),
            Geometry::Matrix { .. } => (0..self.len()).filter(|&y| self.dist(x, y) <= r).collect(),
        }
    }

    fn for_each_maximal_set(
        &self,
        r: Dist,
        budget: u64,
        visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> Result<Walk> {
        match &self.geometry {
            Geometry::Lattice(l) if l.norm == Norm::Linf || l.dim() == 1 => {
                Ok(l.for_each_window(r.floor_int(), visit))
            }
            _ => cliques::maximal_cliques(self.len(), &|i, j| self.dist(i, j) <= r, budget, visit),
        }
    }
}

pub(crate) fn pairwise_diameter(space: &dyn MetricSpace, members: &[usize]) -> Dist {
    let mut best = Dist::ZERO;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            best = best.max(space.dist(i, j));
        }
    }
    best
}

/// JSON form of a space: `{ "id", "geometry": {"kind": "matrix"|"lattice", ...}, "scale_cap" }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    pub id: String,
    pub geometry: GeometryFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_cap: Option<Dist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometryFile {
    Matrix {
        entries: Vec<Vec<u64>>,
    },
    Lattice {
        dim: usize,
        #[serde(rename = "box")]
        bounds: Vec<[i64; 2]>,
        norm: Norm,
    },
}

/// Cartesian product under the max-metric `max(d_X, d_Y)`.
///
/// Point `(a, b)` has index `a * |Y| + b`.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    id: String,
    left: SpaceRef,
    right: SpaceRef,
}

impl ProductSpace {
    pub fn new(left: SpaceRef, right: SpaceRef) -> ProductSpace {
        ProductSpace {
            id: format!("{}x{}", left.id(), right.id()),
            left,
            right,
        }
    }

    pub fn left(&self) -> &SpaceRef {
        &self.left
    }

    pub fn right(&self) -> &SpaceRef {
        &self.right
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.right.len() + b
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.right.len(), i % self.right.len())
    }
}

impl MetricSpace for ProductSpace {
    fn id(&self) -> &str {
        &self.id
    }

    fn len(&self) -> usize {
        self.left.len() * self.right.len()
    }

    fn dist(&self, i: usize, j: usize) -> Dist {
        let (a, b) = self.split(i);
        let (c, d) = self.split(j);
        self.left.dist(a, c).max(self.right.dist(b, d))
    }

    fn label(&self, i: usize) -> String {
        let (a, b) = self.split(i);
        format!("({}|{})", self.left.label(a), self.right.label(b))
    }

    fn scale_cap(&self) -> Dist {
        self.left.scale_cap().max(self.right.scale_cap())
    }

    fn diameter(&self) -> Dist {
        self.left.diameter().max(self.right.diameter())
    }

    fn diameter_of(&self, members: &[usize]) -> Dist {
        let (l, r): (Vec<usize>, Vec<usize>) = members.iter().map(|&i| self.split(i)).unzip();
        let l = PointSet::new(l);
        let r = PointSet::new(r);
        self.left.diameter_of(l.members()).max(self.right.diameter_of(r.members()))
    }

    fn distinct_distances(&self) -> Vec<Dist> {
        let mut v = self.left.distinct_distances();
        v.extend(self.right.distinct_distances());
        v.sort_unstable();
        v.dedup();
        v
    }

    fn close_points(&self, x: usize, r: Dist) -> Vec<usize> {
        let (a, b) = self.split(x);
        let right = self.right.close_points(b, r);
        let mut out = Vec::new();
        for i in self.left.close_points(a, r) {
            out.extend(right.iter().map(|&j| self.index(i, j)));
        }
        out
    }

    /// Maximal sets of a max-product are products of maximal sets of the factors.
    fn for_each_maximal_set(
        &self,
        r: Dist,
        budget: u64,
        visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> Result<Walk> {
        let mut right_sets = Vec::new();
        self.right.for_each_maximal_set(r, budget, &mut |s| {
            right_sets.push(s.to_vec());
            ControlFlow::Continue(())
        })?;
        let mut buf = Vec::new();
        let mut stopped = false;
        self.left.for_each_maximal_set(r, budget, &mut |ls| {
            for rs in &right_sets {
                buf.clear();
                for &a in ls {
                    for &b in rs {
                        buf.push(self.index(a, b));
                    }
                }
                if visit(&buf).is_break() {
                    stopped = true;
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        })?;
        Ok(if stopped { Walk::Stopped } else { Walk::Complete })
    }

    fn ball_classes(&self, r: Dist) -> Option<Vec<usize>> {
        let lc = self.left.ball_classes(r)?;
        let rc = self.right.ball_classes(r)?;
        let width = rc.iter().copied().max().map_or(1, |m| m + 1);
        Some(
            (0..self.len())
                .map(|i| {
                    let (a, b) = self.split(i);
                    lc[a] * width + rc[b]
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(lo: i64, hi: i64) -> FiniteMetricSpace {
        FiniteMetricSpace::interval("z", lo, hi).unwrap()
    }

    #[test]
    fn diameter_examples() {
        let s = z(0, 10);
        assert_eq!(diameter(&s, &PointSet::singleton(5)).unwrap(), Dist::ZERO);
        assert_eq!(diameter(&s, &PointSet::new([0, 1, 2, 3])).unwrap(), Dist::from_int(3));
        assert_eq!(diameter(&s, &PointSet::default()).unwrap(), Dist::ZERO);
        let plane = FiniteMetricSpace::lattice("p", vec![(0, 3), (0, 3)], Norm::Linf).unwrap();
        let a = plane.index_of_coords(&[0, 0]);
        let b = plane.index_of_coords(&[2, 3]);
        assert_eq!(diameter(&plane, &PointSet::new([a, b])).unwrap(), Dist::from_int(3));
        assert!(matches!(
            diameter(&s, &PointSet::singleton(99)),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    impl FiniteMetricSpace {
        fn index_of_coords(&self, c: &[i64]) -> usize {
            self.as_lattice().unwrap().index_of(c).unwrap()
        }
    }

    #[test]
    fn ball_examples() {
        let s = z(0, 10);
        assert_eq!(ball(&s, 0, Dist::ONE, false).unwrap(), PointSet::singleton(0));
        assert_eq!(ball(&s, 5, Dist::from_int(2), true).unwrap(), PointSet::new([3, 4, 5, 6, 7]));
        let plane = FiniteMetricSpace::lattice("p", vec![(-2, 2), (-2, 2)], Norm::L1).unwrap();
        let got: Vec<String> = ball(&plane, plane.index_of_coords(&[0, 0]), Dist::ONE, true)
            .unwrap()
            .members()
            .iter()
            .map(|&i| plane.label(i))
            .collect();
        assert_eq!(got, vec!["(-1,0)", "(0,-1)", "(0,0)", "(0,1)", "(1,0)"]);
    }

    #[test]
    fn neighborhood_examples() {
        let s = z(0, 10);
        assert_eq!(neighborhood(&s, &PointSet::singleton(3), Dist::ZERO).unwrap(), PointSet::singleton(3));
        assert_eq!(neighborhood(&s, &PointSet::new([0, 1]), Dist::from_int(2)).unwrap(), PointSet::new([0, 1, 2]));
        assert_eq!(neighborhood(&s, &PointSet::singleton(5), Dist::from_int(2)).unwrap(), PointSet::new([4, 5, 6]));
    }

    #[test]
    fn lattice_distances_are_exact() {
        let l2 = FiniteMetricSpace::lattice("e", vec![(0, 2), (0, 2)], Norm::L2).unwrap();
        let a = l2.index_of_coords(&[0, 0]);
        let b = l2.index_of_coords(&[1, 2]);
        assert_eq!(l2.dist(a, b), Dist::from_squared(5));
        assert_eq!(l2.diameter(), Dist::from_squared(8));
        let brute: Vec<Dist> = {
            let mut v: Vec<Dist> = (0..l2.len())
                .flat_map(|i| (0..l2.len()).map(move |j| (i, j)))
                .map(|(i, j)| l2.dist(i, j))
                .collect();
            v.sort();
            v.dedup();
            v
        };
        assert_eq!(l2.distinct_distances(), brute);
    }

    #[test]
    fn matrix_validation_reports_triangle_counterexample() {
        let bad = vec![vec![0, 1, 5], vec![1, 0, 1], vec![5, 1, 0]];
        match FiniteMetricSpace::from_matrix("bad", bad) {
            Err(Error::TriangleViolation { dik, .. }) => assert_eq!(dik, Dist::from_int(5)),
            other => panic!("expected triangle violation, got {other:?}"),
        }
        let asym = vec![vec![0, 1], vec![2, 0]];
        assert!(FiniteMetricSpace::from_matrix("asym", asym).is_err());
    }

    #[test]
    fn space_file_round_trip() {
        let s = FiniteMetricSpace::lattice("sq", vec![(-1, 1), (0, 2)], Norm::Linf).unwrap();
        let text = serde_json::to_string(&s.to_file()).unwrap();
        assert!(text.contains(r#""kind":"lattice""#));
        let back = FiniteMetricSpace::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.len(), 9);
        assert_eq!(back.scale_cap(), Dist::from_int(2));
    }

    #[test]
    fn windows_cover_clipped_boxes() {
        let s = z(0, 4);
        let mut sets = Vec::new();
        s.for_each_maximal_set(Dist::from_int(2), 100, &mut |m| {
            sets.push(m.to_vec());
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(sets, vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4]]);
        let mut big = Vec::new();
        s.for_each_maximal_set(Dist::from_int(10), 100, &mut |m| {
            big.push(m.to_vec());
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(big, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn schedule_is_geometric_and_capped() {
        assert_eq!(
            scale_schedule(Dist::from_int(10)),
            [1, 2, 4, 8, 10].map(Dist::from_int).to_vec()
        );
        assert_eq!(scale_schedule(Dist::from_int(8)), [1, 2, 4, 8].map(Dist::from_int).to_vec());
    }

    #[test]
    fn lattice_neighborhoods_match_brute_force() {
        for norm in [Norm::L1, Norm::Linf] {
            let s = FiniteMetricSpace::lattice("b", vec![(-4, 5), (0, 6)], norm).unwrap();
            let a = PointSet::new([3, 17, 40, 41]);
            for t in 0..6u64 {
                let t = Dist::from_int(t);
                let brute_open: Vec<usize> = (0..s.len()).filter(|&y| a.members().iter().any(|&x| s.dist(x, y) < t)).collect();
                let brute_closed: Vec<usize> = (0..s.len()).filter(|&y| a.members().iter().any(|&x| s.dist(x, y) <= t)).collect();
                if t > Dist::ZERO {
                    assert_eq!(neighborhood(&s, &a, t).unwrap().members(), &brute_open[..]);
                }
                assert_eq!(closed_neighborhood(&s, &a, t).unwrap().members(), &brute_closed[..]);
            }
        }
    }
}
