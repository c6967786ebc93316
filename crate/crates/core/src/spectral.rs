//! Finitely supported space-time Fourier series on `𝕋^{1+d}`.
//!
//! A [`SpectrumField`] stores coefficients `c(n, k)` of
//! `f(t, x) = Σ c(n, k) e^{i(nt + k·x)}`. Integrals use normalized Haar measure,
//! so `c(n, k)` is the mean of `f·e^{−i(nt+k·x)}` and a single unit mode has
//! unit `L²` norm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::IntVector;
use crate::report::fmt_f64;
use crate::tolerances::PRUNE;

/// A point `(n, k) ∈ ℤ × ℤ^d`; `n` is the temporal frequency.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FreqPoint {
    pub n: i64,
    pub k: IntVector,
}

impl FreqPoint {
    pub fn new(n: i64, k: IntVector) -> Self {
        FreqPoint { n, k }
    }

    pub fn spatial(k: IntVector) -> Self {
        FreqPoint { n: 0, k }
    }

    pub fn temporal(n: i64, dim: usize) -> Self {
        FreqPoint {
            n,
            k: IntVector::zeros(dim),
        }
    }

    pub fn k_sq(&self) -> i64 {
        self.k.coords().iter().map(|c| c * c).sum()
    }

    /// `n + |k|²`, the signed distance to the paraboloid along `n`.
    pub fn dispersion(&self) -> i64 {
        self.n + self.k_sq()
    }

    pub fn on_sigma(&self) -> bool {
        self.dispersion() == 0
    }

    pub fn norm_sq(&self) -> i64 {
        self.n * self.n + self.k_sq()
    }
}

impl fmt::Display for FreqPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; {})", self.n, self.k)
    }
}

/// Japanese bracket `⟨s⟩ = (1 + s²)^{1/2}`.
pub fn bracket(s: f64) -> f64 {
    (1.0 + s * s).sqrt()
}

/// Frequency set: a membership predicate, optionally with an explicit
/// enumeration when the set is finite.
#[derive(Clone)]
pub struct FreqSet {
    pred: Arc<dyn Fn(&FreqPoint) -> bool + Send + Sync>,
    points: Option<Arc<BTreeSet<FreqPoint>>>,
}

impl FreqSet {
    pub fn from_predicate<F>(pred: F) -> Self
    where
        F: Fn(&FreqPoint) -> bool + Send + Sync + 'static,
    {
        FreqSet {
            pred: Arc::new(pred),
            points: None,
        }
    }

    pub fn from_points<I: IntoIterator<Item = FreqPoint>>(points: I) -> Self {
        let set: Arc<BTreeSet<FreqPoint>> = Arc::new(points.into_iter().collect());
        let lookup = Arc::clone(&set);
        FreqSet {
            pred: Arc::new(move |p| lookup.contains(p)),
            points: Some(set),
        }
    }

    pub fn contains(&self, p: &FreqPoint) -> bool {
        (self.pred)(p)
    }

    pub fn points(&self) -> Option<&BTreeSet<FreqPoint>> {
        self.points.as_deref()
    }

    pub fn complement(&self) -> FreqSet {
        let pred = Arc::clone(&self.pred);
        FreqSet::from_predicate(move |p| !pred(p))
    }
}

impl fmt::Debug for FreqSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.points {
            Some(p) => write!(f, "FreqSet({} points)", p.len()),
            None => write!(f, "FreqSet(predicate)"),
        }
    }
}

/// One serialized coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub n: i64,
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FieldRecords {
    dim: usize,
    modes: Vec<ModeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FieldRecords", try_from = "FieldRecords")]
pub struct SpectrumField {
    dim: usize,
    coeffs: BTreeMap<FreqPoint, Complex64>,
}

impl From<SpectrumField> for FieldRecords {
    fn from(f: SpectrumField) -> Self {
        FieldRecords {
            dim: f.dim,
            modes: f.records(),
        }
    }
}

impl TryFrom<FieldRecords> for SpectrumField {
    type Error = Error;

    fn try_from(r: FieldRecords) -> Result<Self> {
        let mut f = SpectrumField::zero(r.dim);
        for m in r.modes {
            f.add_mode(m.n, IntVector::new(m.k), Complex64::new(m.re, m.im))?;
        }
        Ok(f)
    }
}

impl SpectrumField {
    pub fn zero(dim: usize) -> Self {
        SpectrumField {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, a: Complex64) -> Self {
        let mut f = Self::zero(dim);
        f.insert_unchecked(FreqPoint::temporal(0, dim), a);
        f
    }

    pub fn mode(n: i64, k: IntVector, a: Complex64) -> Self {
        let mut f = Self::zero(k.dim());
        f.insert_unchecked(FreqPoint::new(n, k), a);
        f
    }

    /// Sums repeated frequencies.
    pub fn from_modes<I>(dim: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FreqPoint, Complex64)>,
    {
        let mut f = Self::zero(dim);
        for (p, a) in modes {
            f.add_at(p, a)?;
        }
        Ok(f)
    }

    /// Spatial field `Σ a_k e^{ik·x}`.
    pub fn spatial<I>(dim: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (IntVector, Complex64)>,
    {
        Self::from_modes(
            dim,
            modes.into_iter().map(|(k, a)| (FreqPoint::spatial(k), a)),
        )
    }

    /// Temporal field `Σ a_n e^{int}` embedded in dimension `dim`.
    pub fn temporal<I>(dim: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        Self::from_modes(
            dim,
            modes
                .into_iter()
                .map(|(n, a)| (FreqPoint::temporal(n, dim), a)),
        )
    }

    fn insert_unchecked(&mut self, p: FreqPoint, a: Complex64) {
        if a.norm() >= PRUNE {
            self.coeffs.insert(p, a);
        }
    }

    pub fn add_at(&mut self, p: FreqPoint, a: Complex64) -> Result<()> {
        if p.k.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.k.dim(),
            });
        }
        let slot = self.coeffs.entry(p).or_insert(Complex64::new(0.0, 0.0));
        *slot += a;
        Ok(())
    }

    pub fn add_mode(&mut self, n: i64, k: IntVector, a: Complex64) -> Result<()> {
        self.add_at(FreqPoint::new(n, k), a)?;
        self.prune();
        Ok(())
    }

    pub fn prune(&mut self) {
        self.coeffs.retain(|_, a| a.norm() >= PRUNE);
    }

    fn pruned(mut self) -> Self {
        self.prune();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &BTreeMap<FreqPoint, Complex64> {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FreqPoint, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn get(&self, p: &FreqPoint) -> Complex64 {
        self.coeffs.get(p).copied().unwrap_or_default()
    }

    pub fn coeff(&self, n: i64, k: &IntVector) -> Complex64 {
        self.get(&FreqPoint::new(n, k.clone()))
    }

    pub fn support(&self) -> impl Iterator<Item = &FreqPoint> {
        self.coeffs.keys()
    }

    pub fn is_spatial(&self) -> bool {
        self.coeffs.keys().all(|p| p.n == 0)
    }

    pub fn is_temporal(&self) -> bool {
        self.coeffs.keys().all(|p| p.k.is_zero())
    }

    fn check_same_dim(&self, other: &SpectrumField) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, c)| (p.clone(), c * a))
                .collect(),
        }
        .pruned()
    }

    pub fn add(&self, other: &SpectrumField) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut out = self.clone();
        for (p, a) in &other.coeffs {
            *out.coeffs.entry(p.clone()).or_default() += a;
        }
        Ok(out.pruned())
    }

    pub fn sub(&self, other: &SpectrumField) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Coefficients of `conj(f)`: `c(n, k) ↦ conj c(−n, −k)`.
    pub fn conj(&self) -> Self {
        SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, a)| (FreqPoint::new(-p.n, p.k.neg()), a.conj()))
                .collect(),
        }
    }

    /// Multiplies every coefficient by `w(p)`.
    pub fn map_weights<F: Fn(&FreqPoint) -> Complex64>(&self, w: F) -> Self {
        SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, a)| (p.clone(), a * w(p)))
                .collect(),
        }
        .pruned()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs
            .values()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ ⟨n + |k|²⟩^{2b} |c(n,k)|²)^{1/2}`.
    pub fn xb_norm(&self, b: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(p, a)| bracket(p.dispersion() as f64).powf(2.0 * b) * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Temporal Sobolev norm `(Σ ⟨n⟩^{2b} |c(n,k)|²)^{1/2}`.
    pub fn hb_norm_t(&self, b: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(p, a)| bracket(p.n as f64).powf(2.0 * b) * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn project(&self, set: &FreqSet) -> Self {
        SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(p, _)| set.contains(p))
                .map(|(p, a)| (p.clone(), *a))
                .collect(),
        }
    }

    pub fn filter<F: Fn(&FreqPoint) -> bool>(&self, keep: F) -> Self {
        SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(p, _)| keep(p))
                .map(|(p, a)| (p.clone(), *a))
                .collect(),
        }
    }

    /// `e^{itΔ}u₀`: the amplitude of `k` moves to `(−|k|², k)`.
    pub fn free_evolve(&self) -> Result<Self> {
        if let Some(p) = self.coeffs.keys().find(|p| p.n != 0) {
            return Err(Error::NotSpatial(p.n));
        }
        Ok(SpectrumField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, a)| (FreqPoint::new(-p.k_sq(), p.k.clone()), *a))
                .collect(),
        })
    }

    /// `(𝒢_p u)(t,x) = e^{i(p·x − |p|²t)} u(t, x − 2pt)`, acting by
    /// `(n, k) ↦ (n − |p|² − 2p·k, k + p)`.
    pub fn galilean(&self, p: &IntVector) -> Result<Self> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        let p_sq = p.norm_sq()?;
        let coeffs = self
            .coeffs
            .iter()
            .map(|(q, a)| {
                let n = q.n - p_sq - 2 * p.dot(&q.k)?;
                Ok((FreqPoint::new(n, q.k.checked_add(p)?), *a))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(SpectrumField {
            dim: self.dim,
            coeffs,
        })
    }

    /// Pointwise product, i.e. convolution of coefficients.
    pub fn multiply(&self, other: &SpectrumField) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut out: BTreeMap<FreqPoint, Complex64> = BTreeMap::new();
        for (p, a) in &self.coeffs {
            for (q, b) in &other.coeffs {
                let s = FreqPoint::new(p.n + q.n, p.k.checked_add(&q.k)?);
                *out.entry(s).or_default() += a * b;
            }
        }
        Ok(SpectrumField {
            dim: self.dim,
            coeffs: out,
        }
        .pruned())
    }

    /// Largest squared Euclidean norm of `(n, k)` over the support.
    pub fn degree_sq(&self) -> i64 {
        self.coeffs
            .keys()
            .map(FreqPoint::norm_sq)
            .max()
            .unwrap_or(0)
    }

    pub fn degree(&self) -> f64 {
        (self.degree_sq() as f64).sqrt()
    }

    /// Largest `|k|` over the support.
    pub fn spatial_degree(&self) -> f64 {
        self.coeffs
            .keys()
            .map(FreqPoint::k_sq)
            .max()
            .map_or(0.0, |m| (m as f64).sqrt())
    }

    pub fn max_abs_n(&self) -> i64 {
        self.coeffs.keys().map(|p| p.n.abs()).max().unwrap_or(0)
    }

    pub fn max_abs_k(&self) -> i64 {
        self.coeffs
            .keys()
            .flat_map(|p| p.k.coords().iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &SpectrumField) -> f64 {
        let keys: BTreeSet<&FreqPoint> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        keys.into_iter()
            .map(|p| (self.get(p) - other.get(p)).norm())
            .fold(0.0, f64::max)
    }

    /// Point value `f(t, x)` by direct summation.
    pub fn evaluate_at(&self, t: f64, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(p, a)| {
                let phase = p.n as f64 * t
                    + p.k
                        .coords()
                        .iter()
                        .zip(x)
                        .map(|(&k, &xj)| k as f64 * xj)
                        .sum::<f64>();
                a * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Samples at `t_a = 2πa/nt`, `x_b = 2πb/nx` on the row-major grid of
    /// shape `[nt, nx, …, nx]`.
    pub fn evaluate_grid(&self, nt: usize, nx: usize) -> Result<Grid<Complex64>> {
        let shape: Vec<usize> = std::iter::once(nt)
            .chain(std::iter::repeat_n(nx, self.dim))
            .collect();
        if nt == 0
            || nx == 0
            || nt as i64 <= 2 * self.max_abs_n()
            || nx as i64 <= 2 * self.max_abs_k()
        {
            return Err(Error::Unresolved { shape });
        }
        let mut grid = Grid::filled(shape, Complex64::default());
        for (p, a) in &self.coeffs {
            let idx: Vec<usize> = std::iter::once(p.n.rem_euclid(nt as i64) as usize)
                .chain(
                    p.k.coords()
                        .iter()
                        .map(|&c| c.rem_euclid(nx as i64) as usize),
                )
                .collect();
            let flat = grid.flat_index(&idx);
            grid.data[flat] += a;
        }
        fft_nd(&mut grid.data, &grid.shape, true);
        Ok(grid)
    }

    /// Inverse of [`evaluate_grid`](Self::evaluate_grid) on resolved fields:
    /// coefficients are read off with symmetric index ranges and those below
    /// `threshold` are dropped.
    pub fn from_grid(grid: &Grid<Complex64>, threshold: f64) -> Result<Self> {
        if grid.shape.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let dim = grid.shape.len() - 1;
        let mut data = grid.data.clone();
        fft_nd(&mut data, &grid.shape, false);
        let total = data.len() as f64;
        let mut f = SpectrumField::zero(dim);
        for (flat, v) in data.iter().enumerate() {
            let a = v / total;
            if a.norm() < threshold.max(PRUNE) {
                continue;
            }
            let idx = grid.unflatten(flat);
            let signed: Vec<i64> = idx
                .iter()
                .zip(&grid.shape)
                .map(|(&i, &s)| {
                    if 2 * i >= s {
                        i as i64 - s as i64
                    } else {
                        i as i64
                    }
                })
                .collect();
            f.coeffs.insert(
                FreqPoint::new(signed[0], IntVector::new(signed[1..].to_vec())),
                a,
            );
        }
        Ok(f)
    }

    pub fn records(&self) -> Vec<ModeRecord> {
        self.coeffs
            .iter()
            .map(|(p, a)| ModeRecord {
                n: p.n,
                k: p.k.coords().to_vec(),
                re: a.re,
                im: a.im,
            })
            .collect()
    }

    /// Random field with `count` modes, `|n| ≤ n_max`, `|k_j| ≤ k_max`, and
    /// standard complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        dim: usize,
        n_max: i64,
        k_max: i64,
        count: usize,
    ) -> Self {
        let mut f = SpectrumField::zero(dim);
        for _ in 0..count {
            let n = rng.random_range(-n_max..=n_max);
            let k = IntVector::new((0..dim).map(|_| rng.random_range(-k_max..=k_max)).collect());
            let a = complex_gaussian(rng);
            *f.coeffs.entry(FreqPoint::new(n, k)).or_default() += a;
        }
        f.pruned()
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A dense row-major array on a uniform grid of `𝕋^{1+d}` (or `𝕋^d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Grid {
            shape,
            data: vec![value; len],
        }
    }

    pub fn from_fn<F: FnMut(&[usize]) -> T>(shape: Vec<usize>, mut f: F) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut g = Grid {
            shape,
            data: Vec::new(),
        };
        for flat in 0..len {
            data.push(f(&g.unflatten(flat)));
        }
        g.data = data;
        g
    }
}

impl<T> Grid<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for (slot, &s) in idx.iter_mut().zip(&self.shape).rev() {
            *slot = flat % s;
            flat /= s;
        }
        idx
    }

    /// Angle `2πi/s` of each index.
    pub fn coordinates(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.shape)
            .map(|(&i, &s)| std::f64::consts::TAU * i as f64 / s as f64)
            .collect()
    }

    pub fn cell_measure(&self) -> f64 {
        1.0 / self.data.len() as f64
    }
}

impl Grid<Complex64> {
    pub fn mean_abs_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// CSV rows: time index, spatial indices, real part, imaginary part.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..self.shape.len()).map(|j| format!("x{j}")));
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for (flat, v) in self.data.iter().enumerate() {
            let mut row: Vec<String> = self.unflatten(flat).iter().map(|i| i.to_string()).collect();
            row.push(fmt_f64(v.re));
            row.push(fmt_f64(v.im));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// In-place multidimensional FFT over every axis of a row-major array.
/// `inverse` selects `e^{+i}` kernels; no normalization is applied.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = total;
    for &len in shape {
        stride /= len;
        if len <= 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let mut line = vec![Complex64::default(); len];
        let block = len * stride;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}
