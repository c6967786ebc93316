//! Cluster decomposition of the integer paraboloid over an affine sublattice.
//!
//! The points `(−|k|², k)` with `k ∈ Γ`, `|k| ≤ F` are joined whenever their
//! distance in `ℤ^{1+d}` is at most `100R`; clusters are the connected
//! components. Every comparison is on exact squared distances.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{checked, invalid, Error, Result};
use crate::lattice::{affine_hull, AffineSublattice, IntVector};
use crate::report::fmt_f64;
use crate::spectral::FreqSet;

/// Edge length of the cluster graph, in units of the scale `R`.
pub const EDGE_FACTOR: i64 = 100;
/// Half-width of the neighborhoods `N^α`, in units of `R`.
pub const NEAR_FACTOR: i64 = 10;

const MAX_FREQ_BOUND: i64 = 10_000;
const MAX_SCALE: i64 = 1_000_000;

/// A point `(n, k)` of the paraboloid, `n = −|k|²`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SigmaPoint {
    pub n: i64,
    pub k: IntVector,
}

impl SigmaPoint {
    pub fn from_spatial(k: IntVector) -> Result<Self> {
        let n = checked(k.norm_sq()?.checked_neg(), "paraboloid point")?;
        Ok(SigmaPoint { n, k })
    }

    /// Squared distance in `ℤ^{1+d}`. Coordinates are bounded by the
    /// validated frequency box, so the sum cannot overflow.
    pub fn dist_sq(&self, other: &SigmaPoint) -> i64 {
        let dn = self.n - other.n;
        dn * dn + spatial_dist_sq(&self.k, &other.k)
    }
}

fn spatial_dist_sq(a: &IntVector, b: &IntVector) -> i64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Flat,
    Sharp,
}

impl ClusterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterKind::Flat => "flat",
            ClusterKind::Sharp => "sharp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub points: Vec<SigmaPoint>,
    pub shadow: Vec<IntVector>,
    pub hull: AffineSublattice,
    pub kind: ClusterKind,
    /// Some point has a paraboloid neighbour (distance ≤ 100R) outside the
    /// frequency box, so the box may cut the true cluster.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub gamma: AffineSublattice,
    pub scale: i64,
    pub freq_bound: i64,
    pub clusters: Vec<Cluster>,
}

impl ClusterDecomposition {
    pub fn reach(&self) -> i64 {
        EDGE_FACTOR * self.scale
    }

    pub fn point_count(&self) -> usize {
        self.clusters.iter().map(|c| c.points.len()).sum()
    }

    /// Cluster id of every shadow point.
    pub fn cluster_of(&self) -> BTreeMap<IntVector, usize> {
        self.clusters
            .iter()
            .flat_map(|c| c.shadow.iter().map(move |k| (k.clone(), c.id)))
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// Connects every pair at squared distance `≤ reach²`.
///
/// Points are grouped into shells of equal `n`; only shells whose `n` differ by
/// at most `reach` can be adjacent, and pairs of shells already inside one
/// component are skipped without distance checks.
fn link(points: &[SigmaPoint], reach: i64) -> UnionFind {
    let reach_sq = reach * reach;
    let mut uf = UnionFind::new(points.len());
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(points[i].n), i));
    let mut shells: Vec<(i64, Vec<usize>)> = Vec::new();
    for i in order {
        match shells.last_mut() {
            Some((n, members)) if *n == points[i].n => members.push(i),
            _ => shells.push((points[i].n, vec![i])),
        }
    }
    let mut settled = vec![false; shells.len()];
    let is_settled = |uf: &mut UnionFind, settled: &mut Vec<bool>, s: usize| -> bool {
        if !settled[s] {
            let members = &shells[s].1;
            let root = uf.find(members[0]);
            settled[s] = members.iter().all(|&i| uf.find(i) == root);
        }
        settled[s]
    };
    for a in 0..shells.len() {
        for b in a..shells.len() {
            // shells are ordered by decreasing n
            if shells[a].0 - shells[b].0 > reach {
                break;
            }
            if a != b
                && is_settled(&mut uf, &mut settled, a)
                && is_settled(&mut uf, &mut settled, b)
                && uf.find(shells[a].1[0]) == uf.find(shells[b].1[0])
            {
                continue;
            }
            let (sa, sb) = (&shells[a].1, &shells[b].1);
            for (ii, &i) in sa.iter().enumerate() {
                let others = if a == b { &sb[ii + 1..] } else { &sb[..] };
                for &j in others {
                    if uf.find(i) != uf.find(j) && points[i].dist_sq(&points[j]) <= reach_sq {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    uf
}

fn validate(scale: i64, freq_bound: i64) -> Result<()> {
    if !(1..=MAX_SCALE).contains(&scale) {
        return Err(invalid(
            "scale",
            format!("must lie in [1, {MAX_SCALE}], got {scale}"),
        ));
    }
    if !(0..=MAX_FREQ_BOUND).contains(&freq_bound) {
        return Err(invalid(
            "freq_bound",
            format!("must lie in [0, {MAX_FREQ_BOUND}], got {freq_bound}"),
        ));
    }
    Ok(())
}

/// All `(−|k|², k)` with `k ∈ Γ`, `|k| ≤ F`, ordered by `k`.
pub fn sigma_points(gamma: &AffineSublattice, freq_bound: i64) -> Result<Vec<SigmaPoint>> {
    if freq_bound < 0 {
        return Err(invalid("freq_bound", "must be nonnegative"));
    }
    gamma
        .points_in_ball(freq_bound * freq_bound)?
        .into_iter()
        .map(SigmaPoint::from_spatial)
        .collect()
}

pub fn classify(cluster: &Cluster, gamma: &AffineSublattice) -> ClusterKind {
    if cluster.hull.rank() == gamma.rank() {
        ClusterKind::Flat
    } else {
        ClusterKind::Sharp
    }
}

pub fn decompose(
    gamma: &AffineSublattice,
    scale: i64,
    freq_bound: i64,
) -> Result<ClusterDecomposition> {
    validate(scale, freq_bound)?;
    let reach = EDGE_FACTOR * scale;
    let points = sigma_points(gamma, freq_bound)?;
    let mut uf = link(&points, reach);

    // Truncation: relink together with the shell just outside the box that is
    // within temporal reach; a box cluster is cut iff its component picks up an
    // outside point.
    let inner_sq = freq_bound * freq_bound;
    let outer: Vec<SigmaPoint> = gamma
        .points_in_ball(inner_sq + reach)?
        .into_iter()
        .filter(|k| k.norm_sq().map(|m| m > inner_sq).unwrap_or(false))
        .map(SigmaPoint::from_spatial)
        .collect::<Result<_>>()?;
    let mut extended_points = points.clone();
    extended_points.extend(outer.iter().cloned());
    let mut extended = link(&extended_points, reach);
    let cut_roots: HashSet<usize> = (points.len()..extended_points.len())
        .map(|i| extended.find(i))
        .collect();

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..points.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut raw: Vec<(Vec<SigmaPoint>, bool)> = groups
        .into_values()
        .map(|members| {
            let truncated = members
                .iter()
                .any(|&i| cut_roots.contains(&extended.find(i)));
            let mut pts: Vec<SigmaPoint> = members.iter().map(|&i| points[i].clone()).collect();
            pts.sort();
            (pts, truncated)
        })
        .collect();
    raw.sort_by(|a, b| a.0[0].cmp(&b.0[0]));

    let clusters = raw
        .into_iter()
        .enumerate()
        .map(|(id, (pts, truncated))| {
            let mut shadow: Vec<IntVector> = pts.iter().map(|p| p.k.clone()).collect();
            shadow.sort();
            let hull = affine_hull(&shadow)?;
            let kind = if hull.rank() == gamma.rank() {
                ClusterKind::Flat
            } else {
                ClusterKind::Sharp
            };
            Ok(Cluster {
                id,
                points: pts,
                shadow,
                hull,
                kind,
                truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterDecomposition {
        gamma: gamma.clone(),
        scale,
        freq_bound,
        clusters,
    })
}

/// Exact squared distance between two clusters.
pub fn cluster_distance_sq(a: &Cluster, b: &Cluster) -> i64 {
    a.points
        .iter()
        .flat_map(|p| b.points.iter().map(move |q| p.dist_sq(q)))
        .min()
        .unwrap_or(i64::MAX)
}

/// Exact squared diameter of a point set.
pub fn diameter_sq(points: &[SigmaPoint]) -> i64 {
    if points.len() < 2 {
        return 0;
    }
    let mut sorted: Vec<&SigmaPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.n);
    let d = points[0].k.dim();
    let spread: i64 = (0..d)
        .map(|j| {
            let lo = points.iter().map(|p| p.k[j]).min().unwrap_or(0);
            let hi = points.iter().map(|p| p.k[j]).max().unwrap_or(0);
            (hi - lo) * (hi - lo)
        })
        .sum();
    let last_n = sorted[sorted.len() - 1].n;
    let mut best = 0i64;
    for i in 0..sorted.len() {
        let dn = last_n - sorted[i].n;
        if dn * dn + spread <= best {
            break;
        }
        for j in ((i + 1)..sorted.len()).rev() {
            let dn = sorted[j].n - sorted[i].n;
            if dn * dn + spread <= best {
                break;
            }
            best = best.max(sorted[i].dist_sq(sorted[j]));
        }
    }
    best
}

/// Smallest squared distance between points carrying different labels, if it
/// is below `cap_sq`. Points are swept in order of their first coordinate.
pub(crate) fn min_cross_label_sq<F>(items: &[(i64, usize)], cap_sq: i64, dist_sq: F) -> Option<i64>
where
    F: Fn(usize, usize) -> i64,
{
    // items: (sweep coordinate, label); indices into the caller's storage are positions.
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| items[i].0);
    let mut best = cap_sq;
    let mut found = false;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let dn = items[j].0 - items[i].0;
            if dn * dn >= best {
                break;
            }
            if items[i].1 == items[j].1 {
                continue;
            }
            let dsq = dist_sq(i, j);
            if dsq < best {
                best = dsq;
                found = true;
            }
        }
    }
    found.then_some(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub size: usize,
    pub diameter_sq: i64,
    pub kind: ClusterKind,
    pub truncated: bool,
    pub hull_rank: usize,
    pub max_shadow_projection: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub scale: i64,
    pub freq_bound: i64,
    pub records: Vec<ClusterRecord>,
    /// Smallest squared distance between distinct clusters, when below
    /// `separation_cap_sq`; `None` means every pair is at least that far apart.
    pub min_separation_sq: Option<i64>,
    pub separation_cap_sq: i64,
    pub flat_count: usize,
    pub sharp_count: usize,
    pub truncated_count: usize,
}

pub fn cluster_stats(decomp: &ClusterDecomposition) -> Result<ClusterStats> {
    let lat = decomp.gamma.direction();
    let records = decomp
        .clusters
        .iter()
        .map(|c| {
            let max_proj = c
                .shadow
                .iter()
                .map(|k| lat.projected_norm_sq(k))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0f64, f64::max)
                .sqrt();
            Ok(ClusterRecord {
                id: c.id,
                size: c.points.len(),
                diameter_sq: diameter_sq(&c.points),
                kind: c.kind,
                truncated: c.truncated,
                hull_rank: c.hull.rank(),
                max_shadow_projection: max_proj,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cap = 4 * decomp.reach();
    let cap_sq = cap * cap;
    let min_separation_sq = if decomp.clusters.len() < 2 {
        None
    } else {
        let flat: Vec<&SigmaPoint> = decomp
            .clusters
            .iter()
            .flat_map(|c| c.points.iter())
            .collect();
        let items: Vec<(i64, usize)> = decomp
            .clusters
            .iter()
            .flat_map(|c| c.points.iter().map(move |p| (p.n, c.id)))
            .collect();
        min_cross_label_sq(&items, cap_sq, |i, j| flat[i].dist_sq(flat[j]))
    };
    Ok(ClusterStats {
        scale: decomp.scale,
        freq_bound: decomp.freq_bound,
        flat_count: records
            .iter()
            .filter(|r| r.kind == ClusterKind::Flat)
            .count(),
        sharp_count: records
            .iter()
            .filter(|r| r.kind == ClusterKind::Sharp)
            .count(),
        truncated_count: records.iter().filter(|r| r.truncated).count(),
        records,
        min_separation_sq,
        separation_cap_sq: cap_sq,
    })
}

impl ClusterStats {
    /// One row per cluster: id, size, diameter², kind, truncated, hull rank,
    /// max shadow projection.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id",
            "size",
            "diameter_sq",
            "kind",
            "truncated",
            "hull_rank",
            "max_shadow_projection",
        ])?;
        for r in &self.records {
            w.write_record([
                r.id.to_string(),
                r.size.to_string(),
                r.diameter_sq.to_string(),
                r.kind.as_str().to_string(),
                r.truncated.to_string(),
                r.hull_rank.to_string(),
                fmt_f64(r.max_shadow_projection),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A run `{(n, k) : n_lo ≤ n ≤ n_hi}` of a neighborhood.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearSegment {
    pub k: IntVector,
    pub n_lo: i64,
    pub n_hi: i64,
}

impl NearSegment {
    pub fn center(&self) -> i64 {
        (self.n_lo + self.n_hi) / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Near(usize),
    Far,
    Outside,
}

/// Partition of the box `{|n| ≤ T} × (Γ ∩ {|k| ≤ F})` into the neighborhoods
/// `N^α = {|n + |k|²| ≤ 10R, k ∈ Z^α}` and the remainder `N^c`.
///
/// Neighborhoods are stored as one segment per shadow point; the far set is
/// the complement inside the box and is enumerated on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSplit {
    pub scale: i64,
    pub time_bound: i64,
    pub freq_bound: i64,
    pub near: BTreeMap<usize, Vec<NearSegment>>,
    cluster_of: BTreeMap<IntVector, usize>,
}

impl NeighborhoodSplit {
    pub fn half_width(&self) -> i64 {
        NEAR_FACTOR * self.scale
    }

    pub fn spatial_points(&self) -> impl Iterator<Item = &IntVector> {
        self.cluster_of.keys()
    }

    pub fn region(&self, n: i64, k: &IntVector) -> Region {
        if n.abs() > self.time_bound {
            return Region::Outside;
        }
        match self.cluster_of.get(k) {
            None => Region::Outside,
            Some(&alpha) => {
                let m: i64 = k.coords().iter().map(|c| c * c).sum();
                if (n + m).abs() <= self.half_width() {
                    Region::Near(alpha)
                } else {
                    Region::Far
                }
            }
        }
    }

    pub fn near_points(&self, alpha: usize) -> impl Iterator<Item = (i64, IntVector)> + '_ {
        self.near
            .get(&alpha)
            .into_iter()
            .flatten()
            .flat_map(|s| (s.n_lo..=s.n_hi).map(move |n| (n, s.k.clone())))
    }

    pub fn far_points(&self) -> impl Iterator<Item = (i64, IntVector)> + '_ {
        let t = self.time_bound;
        self.cluster_of.keys().flat_map(move |k| {
            (-t..=t)
                .filter(move |&n| self.region(n, k) == Region::Far)
                .map(move |n| (n, k.clone()))
        })
    }

    /// `N^α` as a frequency set.
    pub fn near_set(&self, alpha: usize) -> FreqSet {
        let split = self.clone();
        FreqSet::from_predicate(move |p| split.region(p.n, &p.k) == Region::Near(alpha))
    }

    /// `N^c` inside the box.
    pub fn far_set(&self) -> FreqSet {
        let split = self.clone();
        FreqSet::from_predicate(move |p| split.region(p.n, &p.k) == Region::Far)
    }

    pub fn box_size(&self) -> usize {
        self.cluster_of.len() * (2 * self.time_bound as usize + 1)
    }

    pub fn near_size(&self) -> usize {
        self.near
            .values()
            .flatten()
            .map(|s| (s.n_hi - s.n_lo + 1) as usize)
            .sum()
    }

    pub fn far_size(&self) -> usize {
        self.box_size() - self.near_size()
    }

    /// Smallest squared distance between neighborhoods of distinct clusters,
    /// if it is below `cap_sq`.
    pub fn min_separation_sq(&self, cap_sq: i64) -> Option<i64> {
        let segs: Vec<(&NearSegment, usize)> = self
            .near
            .iter()
            .flat_map(|(&a, v)| v.iter().map(move |s| (s, a)))
            .collect();
        let items: Vec<(i64, usize)> = segs.iter().map(|(s, a)| (s.n_lo, *a)).collect();
        let width = 2 * self.half_width();
        // sweep on n_lo; two segments of equal width satisfy gap = |Δn_lo| − width
        let shifted_cap = {
            let c = (cap_sq as f64).sqrt() as i64 + width + 1;
            c * c
        };
        let mut best: Option<i64> = None;
        let found = min_cross_label_sq(&items, shifted_cap, |i, j| {
            let (a, b) = (segs[i].0, segs[j].0);
            let gap = ((a.n_lo - b.n_lo).abs() - width).max(0);
            gap * gap + spatial_dist_sq(&a.k, &b.k)
        });
        if let Some(v) = found {
            if v < cap_sq {
                best = Some(v);
            }
        }
        best
    }
}

/// `Q^α`: every temporal frequency over the shadow of cluster `alpha`.
pub fn cluster_set(decomp: &ClusterDecomposition, alpha: usize) -> FreqSet {
    let shadow: BTreeSet<IntVector> = decomp
        .clusters
        .iter()
        .filter(|c| c.id == alpha)
        .flat_map(|c| c.shadow.iter().cloned())
        .collect();
    FreqSet::from_predicate(move |p| shadow.contains(&p.k))
}

/// Smallest admissible time bound: every neighborhood fits inside `|n| ≤ T`.
pub fn required_time_bound(decomp: &ClusterDecomposition) -> i64 {
    let max_m = decomp
        .clusters
        .iter()
        .flat_map(|c| c.points.iter().map(|p| -p.n))
        .max()
        .unwrap_or(0);
    max_m + NEAR_FACTOR * decomp.scale
}

/// Default time box: `10R + F²`.
pub fn default_time_bound(decomp: &ClusterDecomposition) -> i64 {
    NEAR_FACTOR * decomp.scale + decomp.freq_bound * decomp.freq_bound
}

pub fn neighborhoods(decomp: &ClusterDecomposition, time_bound: i64) -> Result<NeighborhoodSplit> {
    let needed = required_time_bound(decomp);
    if time_bound < needed {
        return Err(Error::InsufficientTimeBound {
            needed,
            given: time_bound,
        });
    }
    let h = NEAR_FACTOR * decomp.scale;
    let near = decomp
        .clusters
        .iter()
        .map(|c| {
            let segs = c
                .points
                .iter()
                .map(|p| NearSegment {
                    k: p.k.clone(),
                    n_lo: p.n - h,
                    n_hi: p.n + h,
                })
                .collect();
            (c.id, segs)
        })
        .collect();
    Ok(NeighborhoodSplit {
        scale: decomp.scale,
        time_bound,
        freq_bound: decomp.freq_bound,
        near,
        cluster_of: decomp.cluster_of(),
    })
}

/// Re-verifies that every cluster is connected by hops of length `≤ 100R`.
pub fn verify_paths(cluster: &Cluster, reach: i64) -> bool {
    let n = cluster.points.len();
    if n <= 1 {
        return true;
    }
    let reach_sq = reach * reach;
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && cluster.points[i].dist_sq(&cluster.points[j]) <= reach_sq {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// Checks that cluster point sets partition the box and shadows partition `Γ ∩ box`.
pub fn verify_partition(decomp: &ClusterDecomposition) -> Result<bool> {
    let expected: BTreeSet<SigmaPoint> = sigma_points(&decomp.gamma, decomp.freq_bound)?
        .into_iter()
        .collect();
    let mut seen = BTreeSet::new();
    for c in &decomp.clusters {
        for p in &c.points {
            if !seen.insert(p.clone()) {
                return Ok(false);
            }
        }
        let shadow: BTreeSet<&IntVector> = c.points.iter().map(|p| &p.k).collect();
        if shadow.len() != c.shadow.len() || c.shadow.iter().any(|k| !shadow.contains(k)) {
            return Ok(false);
        }
    }
    Ok(seen == expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Sublattice;

    fn iv(c: &[i64]) -> IntVector {
        IntVector::new(c.to_vec())
    }

    fn line(offset: i64, step: i64) -> AffineSublattice {
        AffineSublattice::new(
            iv(&[offset]),
            Sublattice::from_generators(1, &[iv(&[step])]).unwrap(),
        )
        .unwrap()
    }

    fn ns(points: &[SigmaPoint]) -> Vec<(i64, i64)> {
        points.iter().map(|p| (p.n, p.k[0])).collect()
    }

    #[test]
    fn sigma_points_in_one_dimension() {
        let mut pts = ns(&sigma_points(&line(0, 1), 2).unwrap());
        pts.sort();
        assert_eq!(pts, vec![(-4, -2), (-4, 2), (-1, -1), (-1, 1), (0, 0)]);
        let mut pts = ns(&sigma_points(&line(0, 2), 2).unwrap());
        pts.sort();
        assert_eq!(pts, vec![(-4, -2), (-4, 2), (0, 0)]);
        let mut pts = ns(&sigma_points(&line(1, 2), 3).unwrap());
        pts.sort();
        assert_eq!(pts, vec![(-9, -3), (-9, 3), (-1, -1), (-1, 1)]);
    }

    #[test]
    fn reference_decomposition_d1() {
        let dec = decompose(&line(0, 1), 1, 60).unwrap();
        assert_eq!(dec.clusters.len(), 21);
        let mut sizes: Vec<usize> = dec.clusters.iter().map(|c| c.points.len()).collect();
        sizes.sort();
        assert_eq!(sizes[20], 101);
        assert!(sizes[..20].iter().all(|&s| s == 1));
        let central = dec.clusters.iter().find(|c| c.points.len() == 101).unwrap();
        assert_eq!(central.kind, ClusterKind::Flat);
        assert!(!central.truncated);
        assert!(dec
            .clusters
            .iter()
            .filter(|c| c.points.len() == 1)
            .all(|c| c.kind == ClusterKind::Sharp));
        assert!(verify_partition(&dec).unwrap());
    }

    #[test]
    fn single_point_and_complete_graphs() {
        let g = AffineSublattice::new(iv(&[5]), Sublattice::zero(1).unwrap()).unwrap();
        let dec = decompose(&g, 1, 10).unwrap();
        assert_eq!(dec.clusters.len(), 1);
        assert_eq!(dec.clusters[0].kind, ClusterKind::Flat);

        // max distance in the box |k| ≤ 3 is below 100
        let dec = decompose(&line(0, 1), 1, 3).unwrap();
        assert_eq!(dec.clusters.len(), 1);
        assert_eq!(dec.clusters[0].points.len(), 7);
    }

    #[test]
    fn far_singleton_in_two_dimensions_is_sharp() {
        let diagonal = Sublattice::from_generators(2, &[iv(&[1, 1])]).unwrap();
        let gamma = AffineSublattice::new(iv(&[0, 0]), diagonal).unwrap();
        let dec = decompose(&gamma, 1, 60).unwrap();
        let c = dec
            .clusters
            .iter()
            .find(|c| c.shadow.contains(&iv(&[40, 40])))
            .unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.kind, ClusterKind::Sharp);
        assert_eq!(classify(c, &dec.gamma), ClusterKind::Sharp);
    }

    #[test]
    fn stats_and_distances() {
        let dec = decompose(&line(0, 1), 1, 60).unwrap();
        let find = |k: i64| {
            dec.clusters
                .iter()
                .find(|c| c.shadow == vec![iv(&[k])])
                .unwrap()
        };
        assert_eq!(cluster_distance_sq(find(51), find(53)), 43268);
        let stats = cluster_stats(&dec).unwrap();
        assert!(stats.min_separation_sq.is_none_or(|s| s > 100 * 100));
        let singles = stats.records.iter().filter(|r| r.size == 1);
        assert!(singles.into_iter().all(|r| r.diameter_sq == 0));
        let big = stats.records.iter().find(|r| r.size == 101).unwrap();
        assert_eq!(big.diameter_sq, 2500 * 2500 + 50 * 50);
        assert_eq!(big.max_shadow_projection, 50.0);
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn diameter_matches_brute_force() {
        let dec = decompose(&AffineSublattice::full(2).unwrap(), 1, 12).unwrap();
        for c in &dec.clusters {
            let brute = c
                .points
                .iter()
                .flat_map(|p| c.points.iter().map(move |q| p.dist_sq(q)))
                .max()
                .unwrap();
            assert_eq!(diameter_sq(&c.points), brute);
        }
    }

    #[test]
    fn neighborhood_membership() {
        let dec = decompose(&line(0, 1), 1, 60).unwrap();
        let t = default_time_bound(&dec);
        let split = neighborhoods(&dec, t).unwrap();
        assert_eq!(split.region(12, &iv(&[0])), Region::Far);
        let alpha = dec.cluster_of()[&iv(&[1])];
        assert_eq!(split.region(5, &iv(&[1])), Region::Near(alpha));
        assert_eq!(split.region(t + 1, &iv(&[1])), Region::Outside);
        assert!(matches!(
            neighborhoods(&dec, 100),
            Err(Error::InsufficientTimeBound { .. })
        ));
    }

    #[test]
    fn neighborhoods_partition_small_box() {
        let dec = decompose(&line(0, 1), 1, 6).unwrap();
        let split = neighborhoods(&dec, default_time_bound(&dec)).unwrap();
        let mut seen = BTreeSet::new();
        for &alpha in split.near.keys() {
            for p in split.near_points(alpha) {
                assert!((p.0 + p.1[0] * p.1[0]).abs() <= 10);
                assert!(seen.insert(p));
            }
        }
        for p in split.far_points() {
            assert!((p.0 + p.1[0] * p.1[0]).abs() > 10);
            assert!(seen.insert(p));
        }
        assert_eq!(seen.len(), split.box_size());
    }

    #[test]
    fn invalid_scale_is_rejected() {
        assert!(matches!(
            decompose(&line(0, 1), 0, 5),
            Err(Error::InvalidParameter { name: "scale", .. })
        ));
    }
}
