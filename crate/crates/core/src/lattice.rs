//! Exact integer-lattice algebra over `ℤ^d`.
//!
//! Sublattices are stored in row-style Hermite normal form: basis rows in
//! echelon order, positive pivots, and every entry above a pivot reduced into
//! `[0, pivot)`. The form is unique, so structural equality of [`Sublattice`]
//! values is lattice equality. All arithmetic is checked `i64`; overflow is
//! reported as [`Error::Overflow`] and never wraps.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::Index;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{checked, Error, Result};

pub type Rational = Ratio<i64>;

/// A point of `ℤ^d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntVector(Vec<i64>);

impl IntVector {
    pub fn new(coords: Vec<i64>) -> Self {
        IntVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        IntVector(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = 1;
        IntVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    fn check_dim(&self, other: &IntVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &IntVector) -> Result<IntVector> {
        self.check_dim(other)?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| checked((*a).checked_add(*b), "vector addition"))
            .collect::<Result<Vec<_>>>()
            .map(IntVector)
    }

    pub fn checked_sub(&self, other: &IntVector) -> Result<IntVector> {
        self.check_dim(other)?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| checked((*a).checked_sub(*b), "vector subtraction"))
            .collect::<Result<Vec<_>>>()
            .map(IntVector)
    }

    pub fn checked_scale(&self, factor: i64) -> Result<IntVector> {
        self.0
            .iter()
            .map(|a| checked((*a).checked_mul(factor), "vector scaling"))
            .collect::<Result<Vec<_>>>()
            .map(IntVector)
    }

    pub fn neg(&self) -> IntVector {
        IntVector(self.0.iter().map(|a| -a).collect())
    }

    pub fn dot(&self, other: &IntVector) -> Result<i64> {
        self.check_dim(other)?;
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> Result<i64> {
        dot(&self.0, &self.0)
    }
}

impl Index<usize> for IntVector {
    type Output = i64;

    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl From<Vec<i64>> for IntVector {
    fn from(v: Vec<i64>) -> Self {
        IntVector(v)
    }
}

impl fmt::Display for IntVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn dot(a: &[i64], b: &[i64]) -> Result<i64> {
    let mut acc = 0i64;
    for (x, y) in a.iter().zip(b) {
        let p = checked((*x).checked_mul(*y), "dot product")?;
        acc = checked(acc.checked_add(p), "dot product")?;
    }
    Ok(acc)
}

/// `row_a -= q * row_b`
fn sub_multiple(row_a: &mut [i64], row_b: &[i64], q: i64) -> Result<()> {
    if q == 0 {
        return Ok(());
    }
    for (a, b) in row_a.iter_mut().zip(row_b) {
        let p = checked((*b).checked_mul(q), "row reduction")?;
        *a = checked(a.checked_sub(p), "row reduction")?;
    }
    Ok(())
}

/// Row-style Hermite normal form of the lattice generated by `rows`.
/// Zero rows are dropped, so the result has exactly `rank` rows.
fn hermite_rows(mut rows: Vec<Vec<i64>>, dim: usize) -> Result<Vec<Vec<i64>>> {
    let m = rows.len();
    let mut r = 0;
    for col in 0..dim {
        if r == m {
            break;
        }
        loop {
            let pick = (r..m)
                .filter(|&i| rows[i][col] != 0)
                .min_by_key(|&i| rows[i][col].unsigned_abs());
            let Some(p) = pick else { break };
            rows.swap(r, p);
            let mut cleared = true;
            for i in (r + 1)..m {
                if rows[i][col] != 0 {
                    let q = rows[i][col] / rows[r][col];
                    let (head, tail) = rows.split_at_mut(i);
                    sub_multiple(&mut tail[0], &head[r], q)?;
                    if tail[0][col] != 0 {
                        cleared = false;
                    }
                }
            }
            if cleared {
                break;
            }
        }
        if rows[r][col] == 0 {
            continue;
        }
        if rows[r][col] < 0 {
            for a in rows[r].iter_mut() {
                *a = checked(a.checked_neg(), "row negation")?;
            }
        }
        let pivot = rows[r][col];
        for i in 0..r {
            let q = rows[i][col].div_euclid(pivot);
            let (head, tail) = rows.split_at_mut(r);
            sub_multiple(&mut head[i], &tail[0], q)?;
        }
        r += 1;
    }
    rows.truncate(r);
    Ok(rows)
}

/// Bareiss fraction-free determinant of a positive definite integer matrix.
fn bareiss_determinant(mut a: Vec<Vec<i64>>) -> Result<i64> {
    let n = a.len();
    if n == 0 {
        return Ok(1);
    }
    let mut sign = 1i64;
    let mut prev = 1i64;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = ((k + 1)..n).find(|&i| a[i][k] != 0) else {
                return Ok(0);
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let lhs =
                    (a[i][j] as i128) * (a[k][k] as i128) - (a[i][k] as i128) * (a[k][j] as i128);
                let v = lhs / prev as i128;
                a[i][j] = checked(i64::try_from(v).ok(), "Bareiss elimination")?;
            }
        }
        prev = a[k][k];
    }
    checked(a[n - 1][n - 1].checked_mul(sign), "determinant")
}

/// Solves `m y = rhs` over the rationals for a nonsingular `m`.
fn solve_rational(m: &[Vec<i64>], rhs: &[i64]) -> Result<Vec<Rational>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .zip(rhs)
        .map(|(row, &b)| {
            row.iter()
                .map(|&x| Rational::from_integer(x))
                .chain(std::iter::once(Rational::from_integer(b)))
                .collect()
        })
        .collect();
    for col in 0..n {
        let p = (col..n)
            .find(|&i| !a[i][col].is_zero())
            .ok_or(Error::Overflow("singular system in rational solve"))?;
        a.swap(col, p);
        let pivot = a[col][col];
        for j in col..=n {
            a[col][j] = checked(a[col][j].checked_div(&pivot), "rational solve")?;
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col];
                for j in col..=n {
                    let p = checked(f.checked_mul(&a[col][j]), "rational solve")?;
                    a[i][j] = checked(a[i][j].checked_sub(&p), "rational solve")?;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n]).collect())
}

/// A sublattice of `ℤ^d` in canonical Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sublattice {
    ambient_dim: usize,
    basis: Vec<IntVector>,
}

/// Canonical basis of the lattice generated by `generators` (which may be dependent).
pub fn hnf_canonicalize(ambient_dim: usize, generators: &[IntVector]) -> Result<Sublattice> {
    Sublattice::from_generators(ambient_dim, generators)
}

impl Sublattice {
    pub fn from_generators(ambient_dim: usize, generators: &[IntVector]) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::EmptyDimension);
        }
        for g in generators {
            if g.dim() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: g.dim(),
                });
            }
        }
        let rows = generators.iter().map(|g| g.0.clone()).collect();
        let basis = hermite_rows(rows, ambient_dim)?
            .into_iter()
            .map(IntVector)
            .collect();
        Ok(Sublattice { ambient_dim, basis })
    }

    pub fn full(ambient_dim: usize) -> Result<Self> {
        let gens: Vec<_> = (0..ambient_dim)
            .map(|j| IntVector::unit(ambient_dim, j))
            .collect();
        Self::from_generators(ambient_dim, &gens)
    }

    pub fn zero(ambient_dim: usize) -> Result<Self> {
        Self::from_generators(ambient_dim, &[])
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[IntVector] {
        &self.basis
    }

    fn pivot_col(row: &IntVector) -> usize {
        row.0
            .iter()
            .position(|&c| c != 0)
            .expect("HNF rows are nonzero")
    }

    /// Reduces `v` modulo the lattice. The result is the canonical
    /// representative of `v + self`; it is zero iff `v` belongs to the lattice.
    pub fn reduce(&self, v: &IntVector) -> Result<IntVector> {
        if v.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: v.dim(),
            });
        }
        let mut out = v.0.clone();
        for row in &self.basis {
            let c = Self::pivot_col(row);
            let q = out[c].div_euclid(row.0[c]);
            sub_multiple(&mut out, &row.0, q)?;
        }
        Ok(IntVector(out))
    }

    pub fn contains(&self, v: &IntVector) -> Result<bool> {
        Ok(self.reduce(v)?.is_zero())
    }

    /// Column reduction `B W = [H | 0]` with `W` unimodular. Returns `(W, W⁻¹)`.
    fn column_reduction(&self) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>)> {
        let d = self.ambient_dim;
        let s = self.rank();
        let mut m: Vec<Vec<i64>> = self.basis.iter().map(|b| b.0.clone()).collect();
        let identity = |n: usize| -> Vec<Vec<i64>> {
            (0..n)
                .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
                .collect()
        };
        let mut w = identity(d);
        let mut w_inv = identity(d);
        for i in 0..s {
            loop {
                let j = (i..d)
                    .filter(|&j| m[i][j] != 0)
                    .min_by_key(|&j| m[i][j].unsigned_abs())
                    .expect("HNF basis has full row rank");
                if j != i {
                    for row in m.iter_mut() {
                        row.swap(i, j);
                    }
                    for row in w.iter_mut() {
                        row.swap(i, j);
                    }
                    w_inv.swap(i, j);
                }
                let mut cleared = true;
                for j in (i + 1)..d {
                    if m[i][j] == 0 {
                        continue;
                    }
                    let q = m[i][j] / m[i][i];
                    for row in m.iter_mut().chain(w.iter_mut()) {
                        let p = checked(row[i].checked_mul(q), "column reduction")?;
                        row[j] = checked(row[j].checked_sub(p), "column reduction")?;
                    }
                    // W ← W E with E = I − q e_i e_jᵀ, so W⁻¹ ← (I + q e_i e_jᵀ) W⁻¹.
                    let src = w_inv[j].clone();
                    sub_multiple(&mut w_inv[i], &src, -q)?;
                    if m[i][j] != 0 {
                        cleared = false;
                    }
                }
                if cleared {
                    break;
                }
            }
        }
        Ok((w, w_inv))
    }

    /// `lsp(self) ∩ ℤ^d`.
    pub fn saturate(&self) -> Result<Sublattice> {
        let (_, w_inv) = self.column_reduction()?;
        let gens: Vec<IntVector> = w_inv.into_iter().take(self.rank()).map(IntVector).collect();
        Sublattice::from_generators(self.ambient_dim, &gens)
    }

    pub fn is_primitive(&self) -> Result<bool> {
        Ok(self.saturate()? == *self)
    }

    /// The full integer orthogonal complement `{k ∈ ℤ^d : k ⊥ self}`.
    pub fn perp(&self) -> Result<Sublattice> {
        let (w, _) = self.column_reduction()?;
        let d = self.ambient_dim;
        let gens: Vec<IntVector> = (self.rank()..d)
            .map(|j| IntVector((0..d).map(|i| w[i][j]).collect()))
            .collect();
        Sublattice::from_generators(d, &gens)
    }

    pub fn gram_matrix(&self) -> Result<Vec<Vec<i64>>> {
        self.basis
            .iter()
            .map(|a| self.basis.iter().map(|b| a.dot(b)).collect())
            .collect()
    }

    /// `det(B Bᵀ)`, exactly. The rank-0 lattice has Gram determinant 1.
    pub fn gram_determinant(&self) -> Result<i64> {
        bareiss_determinant(self.gram_matrix()?)
    }

    /// Covolume inside the real span: `√det(B Bᵀ)`.
    pub fn covolume(&self) -> Result<f64> {
        Ok((self.gram_determinant()? as f64).sqrt())
    }

    /// Index of the lattice inside its saturation.
    pub fn saturation_index(&self) -> Result<i64> {
        let own = self.gram_determinant()?;
        let sat = self.saturate()?.gram_determinant()?;
        let ratio = own / sat;
        let root = (ratio as f64).sqrt().round() as i64;
        debug_assert_eq!(own % sat, 0);
        debug_assert_eq!(root * root, ratio);
        Ok(root)
    }

    /// Exact orthogonal projection of `v` onto the real span.
    pub fn project(&self, v: &IntVector) -> Result<Vec<Rational>> {
        if v.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: v.dim(),
            });
        }
        let d = self.ambient_dim;
        if self.rank() == 0 {
            return Ok(vec![Rational::zero(); d]);
        }
        let rhs: Vec<i64> = self.basis.iter().map(|b| b.dot(v)).collect::<Result<_>>()?;
        let y = solve_rational(&self.gram_matrix()?, &rhs)?;
        let mut out = vec![Rational::zero(); d];
        for (coef, b) in y.iter().zip(&self.basis) {
            for (o, &bj) in out.iter_mut().zip(&b.0) {
                let p = checked(coef.checked_mul(&Rational::from_integer(bj)), "projection")?;
                *o = checked(o.checked_add(&p), "projection")?;
            }
        }
        Ok(out)
    }

    /// Squared Euclidean norm of the projection of `v`, as a float.
    pub fn projected_norm_sq(&self, v: &IntVector) -> Result<f64> {
        Ok(self
            .project(v)?
            .iter()
            .map(|r| {
                let x = r.to_f64().unwrap_or(f64::NAN);
                x * x
            })
            .sum())
    }
}

/// Exact orthogonal projection of `v` onto `lsp(lat)`.
pub fn project_span(v: &IntVector, lat: &Sublattice) -> Result<Vec<Rational>> {
    lat.project(v)
}

/// An affine sublattice `offset + direction` with canonical offset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineSublattice {
    offset: IntVector,
    direction: Sublattice,
}

impl AffineSublattice {
    pub fn new(offset: IntVector, direction: Sublattice) -> Result<Self> {
        let offset = direction.reduce(&offset)?;
        Ok(AffineSublattice { offset, direction })
    }

    /// `ℤ^d` itself.
    pub fn full(ambient_dim: usize) -> Result<Self> {
        Self::new(
            IntVector::zeros(ambient_dim),
            Sublattice::full(ambient_dim)?,
        )
    }

    pub fn offset(&self) -> &IntVector {
        &self.offset
    }

    pub fn direction(&self) -> &Sublattice {
        &self.direction
    }

    pub fn ambient_dim(&self) -> usize {
        self.direction.ambient_dim()
    }

    pub fn rank(&self) -> usize {
        self.direction.rank()
    }

    pub fn contains(&self, k: &IntVector) -> Result<bool> {
        self.direction.contains(&k.checked_sub(&self.offset)?)
    }

    pub fn translate(&self, p: &IntVector) -> Result<Self> {
        Self::new(self.offset.checked_add(p)?, self.direction.clone())
    }

    /// Points of the affine lattice with `|k|² ≤ radius_sq`, in lexicographic order.
    pub fn points_in_ball(&self, radius_sq: i64) -> Result<Vec<IntVector>> {
        let d = self.ambient_dim();
        let r = (radius_sq.max(0) as f64).sqrt().floor() as i64;
        let mut out = Vec::new();
        let mut cur = vec![-r; d];
        loop {
            let v = IntVector(cur.clone());
            if v.norm_sq()? <= radius_sq && self.contains(&v)? {
                out.push(v);
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                if cur[axis] < r {
                    cur[axis] += 1;
                    for c in cur.iter_mut().skip(axis + 1) {
                        *c = -r;
                    }
                    break;
                }
            }
        }
    }

    /// Points `k` with `|proj_Λ k|² ≤ radius_sq`, where `Λ` is the direction.
    /// This box is carried onto itself by translations orthogonal to `Λ`.
    pub fn points_in_projected_ball(&self, radius_sq: i64) -> Result<Vec<IntVector>> {
        let lat = &self.direction;
        let s = lat.rank();
        if s == 0 {
            return Ok(vec![self.offset.clone()]);
        }
        let radius_sq_q = Rational::from_integer(radius_sq);
        let base = lat.project(&self.offset)?;
        // |B c| ≥ √λ_min |c| bounds the coefficient box; the +1 absorbs float error.
        let gram = lat.gram_matrix()?;
        let g = nalgebra::DMatrix::from_fn(s, s, |i, j| gram[i][j] as f64);
        let lambda_min = g.symmetric_eigenvalues().min().max(1e-12);
        let base_norm: f64 = base
            .iter()
            .map(|r| r.to_f64().unwrap_or(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = (((radius_sq as f64).sqrt() + base_norm) / lambda_min.sqrt()).ceil() as i64 + 1;
        let mut out = Vec::new();
        let mut coef = vec![-bound; s];
        loop {
            let mut k = self.offset.clone();
            for (c, b) in coef.iter().zip(lat.basis()) {
                k = k.checked_add(&b.checked_scale(*c)?)?;
            }
            let mut norm = Rational::zero();
            for x in lat.project(&k)? {
                let sq = checked(x.checked_mul(&x), "projected norm")?;
                norm = checked(norm.checked_add(&sq), "projected norm")?;
            }
            if norm <= radius_sq_q {
                out.push(k);
            }
            let mut axis = s;
            loop {
                if axis == 0 {
                    out.sort();
                    return Ok(out);
                }
                axis -= 1;
                if coef[axis] < bound {
                    coef[axis] += 1;
                    for c in coef.iter_mut().skip(axis + 1) {
                        *c = -bound;
                    }
                    break;
                }
            }
        }
    }
}

impl fmt::Display for AffineSublattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + span{{", self.offset)?;
        for (i, b) in self.direction.basis().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

/// Smallest primitive affine sublattice containing every point.
pub fn affine_hull(points: &[IntVector]) -> Result<AffineSublattice> {
    let first = points
        .first()
        .ok_or(Error::EmptyInput("affine_hull points"))?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    let diffs: Vec<IntVector> = points[1..]
        .iter()
        .map(|p| p.checked_sub(first))
        .collect::<Result<_>>()?;
    let direction = Sublattice::from_generators(d, &diffs)?.saturate()?;
    AffineSublattice::new(first.clone(), direction)
}

/// Orbits of the translation action of `Λ⊥` on the translates of `Λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitCensus {
    pub lattice: Sublattice,
    pub class_reps: Vec<AffineSublattice>,
    pub class_count: usize,
}

/// Enumerates `𝔸_Λ / Λ⊥` through the projection `p + Λ ↦ proj_{Λ⊥} p`, counting
/// the cosets of `Λ⊥` inside `proj_{Λ⊥}(ℤ^d)` exactly.
pub fn orbit_census(lat: &Sublattice) -> Result<OrbitCensus> {
    if !lat.is_primitive()? {
        return Err(Error::NotPrimitive);
    }
    let d = lat.ambient_dim();
    let perp = lat.perp()?;
    let r = perp.rank();
    if r == 0 {
        let rep = AffineSublattice::new(IntVector::zeros(d), lat.clone())?;
        return Ok(OrbitCensus {
            lattice: lat.clone(),
            class_reps: vec![rep],
            class_count: 1,
        });
    }
    // Coordinates of proj_{Λ⊥}(e_j) in the basis of Λ⊥.
    let gram = perp.gram_matrix()?;
    let coords: Vec<Vec<Rational>> = (0..d)
        .map(|j| {
            let rhs: Vec<i64> = perp.basis().iter().map(|p| p[j]).collect();
            solve_rational(&gram, &rhs)
        })
        .collect::<Result<_>>()?;
    let mut denom = 1i64;
    for c in coords.iter().flatten() {
        denom = denom.lcm(c.denom());
    }
    let gens: Vec<Vec<i64>> = coords
        .iter()
        .map(|c| {
            c.iter()
                .map(|x| {
                    let scaled = checked(
                        x.checked_mul(&Rational::from_integer(denom)),
                        "census scaling",
                    )?;
                    Ok(scaled.to_integer().rem_euclid(denom))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let start = vec![0i64; r];
    let mut seen: HashMap<Vec<i64>, IntVector> = HashMap::new();
    let mut order = vec![start.clone()];
    seen.insert(start.clone(), IntVector::zeros(d));
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        let p = seen[&state].clone();
        for (j, g) in gens.iter().enumerate() {
            let next: Vec<i64> = state
                .iter()
                .zip(g)
                .map(|(a, b)| (a + b).rem_euclid(denom))
                .collect();
            if !seen.contains_key(&next) {
                let q = p.checked_add(&IntVector::unit(d, j))?;
                seen.insert(next.clone(), q);
                order.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    let class_reps: Vec<AffineSublattice> = order
        .iter()
        .map(|s| AffineSublattice::new(seen[s].clone(), lat.clone()))
        .collect::<Result<_>>()?;
    Ok(OrbitCensus {
        lattice: lat.clone(),
        class_count: class_reps.len(),
        class_reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(c: &[i64]) -> IntVector {
        IntVector::new(c.to_vec())
    }

    fn lat(d: usize, gens: &[&[i64]]) -> Sublattice {
        let gens: Vec<_> = gens.iter().map(|g| iv(g)).collect();
        Sublattice::from_generators(d, &gens).unwrap()
    }

    #[test]
    fn identity_basis_is_canonical() {
        let z2 = lat(2, &[&[1, 0], &[0, 1]]);
        assert_eq!(z2.basis(), &[iv(&[1, 0]), iv(&[0, 1])]);
        assert_eq!(z2, Sublattice::full(2).unwrap());
    }

    #[test]
    fn index_two_lattice() {
        let l = lat(2, &[&[2, 4], &[1, 3]]);
        assert_eq!(l.basis(), &[iv(&[1, 1]), iv(&[0, 2])]);
        assert_eq!(l, lat(2, &[&[1, 1], &[0, 2]]));
        assert_eq!(l, lat(2, &[&[1, 3], &[1, 1], &[3, 5]]));
    }

    #[test]
    fn empty_dimension_is_rejected() {
        assert_eq!(
            Sublattice::from_generators(0, &[]),
            Err(Error::EmptyDimension)
        );
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(lat(2, &[&[2, 2]]).saturate().unwrap(), lat(2, &[&[1, 1]]));
        assert_eq!(
            lat(2, &[&[2, 0], &[0, 2]]).saturate().unwrap(),
            Sublattice::full(2).unwrap()
        );
        assert!(lat(2, &[&[1, 1]]).is_primitive().unwrap());
        assert!(!lat(2, &[&[2, 2]]).is_primitive().unwrap());
        assert!(Sublattice::full(3).unwrap().is_primitive().unwrap());
    }

    #[test]
    fn covolume_examples() {
        assert_eq!(Sublattice::full(2).unwrap().covolume().unwrap(), 1.0);
        assert_eq!(lat(2, &[&[1, 1]]).gram_determinant().unwrap(), 2);
        assert_eq!(lat(2, &[&[1, 2]]).gram_determinant().unwrap(), 5);
        assert_eq!(Sublattice::zero(3).unwrap().covolume().unwrap(), 1.0);
        assert_eq!(lat(2, &[&[2, 2]]).saturation_index().unwrap(), 2);
    }

    #[test]
    fn perp_examples() {
        assert_eq!(Sublattice::full(3).unwrap().perp().unwrap().rank(), 0);
        assert_eq!(lat(2, &[&[1, 1]]).perp().unwrap(), lat(2, &[&[1, -1]]));
        assert_eq!(
            Sublattice::zero(2).unwrap().perp().unwrap(),
            Sublattice::full(2).unwrap()
        );
        assert_eq!(
            lat(3, &[&[2, 2, 0]]).perp().unwrap(),
            lat(3, &[&[1, -1, 0], &[0, 0, 1]])
        );
    }

    #[test]
    fn projection_examples() {
        let l = lat(2, &[&[1, 1]]);
        let p = l.project(&iv(&[3, 1])).unwrap();
        assert_eq!(
            p,
            vec![Rational::from_integer(2), Rational::from_integer(2)]
        );
        assert!(l
            .project(&iv(&[1, -1]))
            .unwrap()
            .iter()
            .all(|x| x.is_zero()));
        let p = l.project(&iv(&[4, 4])).unwrap();
        assert_eq!(
            p,
            vec![Rational::from_integer(4), Rational::from_integer(4)]
        );
    }

    #[test]
    fn census_examples() {
        assert_eq!(
            orbit_census(&Sublattice::full(3).unwrap())
                .unwrap()
                .class_count,
            1
        );
        assert_eq!(orbit_census(&lat(2, &[&[1, 1]])).unwrap().class_count, 2);
        assert_eq!(orbit_census(&lat(2, &[&[1, 2]])).unwrap().class_count, 5);
        assert_eq!(orbit_census(&lat(2, &[&[2, 2]])), Err(Error::NotPrimitive));
    }

    #[test]
    fn census_reps_are_inequivalent() {
        let l = lat(2, &[&[1, 2]]);
        let census = orbit_census(&l).unwrap();
        let perp = l.perp().unwrap();
        for (i, a) in census.class_reps.iter().enumerate() {
            for b in &census.class_reps[i + 1..] {
                // a ~ b iff b.offset − a.offset ∈ Λ + Λ⊥
                let diff = b.offset().checked_sub(a.offset()).unwrap();
                let mut gens = l.basis().to_vec();
                gens.extend(perp.basis().iter().cloned());
                let sum = Sublattice::from_generators(2, &gens).unwrap();
                assert!(!sum.contains(&diff).unwrap());
            }
        }
    }

    #[test]
    fn affine_hull_examples() {
        let single = affine_hull(&[iv(&[3, -1])]).unwrap();
        assert_eq!(single.rank(), 0);
        assert_eq!(single.offset(), &iv(&[3, -1]));

        let line = affine_hull(&[iv(&[0, 0]), iv(&[2, 0])]).unwrap();
        assert_eq!(line.direction(), &lat(2, &[&[1, 0]]));
        assert_eq!(line.offset(), &iv(&[0, 0]));

        let plane = affine_hull(&[iv(&[0, 0]), iv(&[1, 1]), iv(&[2, 0])]).unwrap();
        assert_eq!(plane, AffineSublattice::full(2).unwrap());

        assert_eq!(
            affine_hull(&[]),
            Err(Error::EmptyInput("affine_hull points"))
        );
    }

    #[test]
    fn affine_offsets_are_canonical() {
        let dir = lat(2, &[&[1, 2]]);
        let a = AffineSublattice::new(iv(&[1, 0]), dir.clone()).unwrap();
        let b = AffineSublattice::new(iv(&[4, 6]), dir.clone()).unwrap();
        let c = AffineSublattice::new(iv(&[-2, -6]), dir).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.contains(&iv(&[2, 2])).unwrap());
        assert!(!a.contains(&iv(&[2, 3])).unwrap());
    }

    #[test]
    fn ball_enumeration() {
        let odd = AffineSublattice::new(iv(&[1]), lat(1, &[&[2]])).unwrap();
        let pts = odd.points_in_ball(9).unwrap();
        assert_eq!(pts, vec![iv(&[-3]), iv(&[-1]), iv(&[1]), iv(&[3])]);
    }

    #[test]
    fn projected_ball_is_translation_invariant() {
        let l = lat(2, &[&[1, 1]]);
        let g = AffineSublattice::new(iv(&[1, 0]), l.clone()).unwrap();
        let p = iv(&[3, -3]);
        let a = g.points_in_projected_ball(8).unwrap();
        let b = g
            .translate(&p)
            .unwrap()
            .points_in_projected_ball(8)
            .unwrap();
        assert_eq!(a.len(), b.len());
        let shifted: Vec<_> = a.iter().map(|k| k.checked_add(&p).unwrap()).collect();
        let mut shifted = shifted;
        shifted.sort();
        assert_eq!(shifted, b);
    }

    #[test]
    fn overflow_is_reported() {
        let big = i64::MAX / 2;
        let l = lat(2, &[&[big, 1]]);
        assert!(matches!(l.gram_determinant(), Err(Error::Overflow(_))));
    }
}
