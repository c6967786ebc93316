//! Duhamel machinery on the space-time torus: the multiplier `Θ`, the
//! collapses `𝒯` and `𝒫`, periodized cutoffs, the truncated Duhamel operator
//! `ℰη𝔇`, and fixed-point solvers for the periodized equation
//! `u = 𝒰₀u₀ + ℰη𝔇V_Λu + g` and its approximate form `v = 𝒰₀u₀ + 𝒦W_Λv + g`.
//!
//! For `f = Σ f̂(m,k) e^{i(mt+k·x)}` and `ω = m + |k|²`,
//! `𝔇f(t) = −i∫₀ᵗ e^{i(t−s)Δ} f(s) ds` equals
//! `−Θf + 𝒰₀𝒯Θf − i t 𝒰₀𝒫f`, so after the cutoff
//!
//! ```text
//! ℰη𝔇f(n,k) = −Σ_m (ĉ_η(n−m) − ĉ_η(n+|k|²)) θ(m,k) f̂(m,k) − i ĉ_{tη}(n+|k|²) f̂(−|k|²,k).
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{AffineSublattice, IntVector, Sublattice};
use crate::spectral::{bracket, fft_nd, FreqPoint, Grid, SpectrumField};
use crate::tolerances::{
    DEFAULT_B, DEFAULT_PLATEAU, DEFAULT_TAU, DEFAULT_TOL, HERMITIAN_TOL, MAX_ITERATIONS,
    MAX_TAU_HALVINGS,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Time samples used by [`duhamel_quadrature`].
pub const QUADRATURE_SAMPLES: usize = 1 << 14;
/// Target `ℓ²` tail of an automatically sized cutoff series.
pub const CUTOFF_TAIL_TARGET: f64 = 1e-12;
const MIN_AUTO_TRUNCATION: usize = 64;
const MAX_AUTO_TRUNCATION: usize = 1 << 14;

/// `θ(n,k) = 1/(n+|k|²)` off the paraboloid, `0` on it.
pub fn theta(p: &FreqPoint) -> f64 {
    match p.dispersion() {
        0 => 0.0,
        w => 1.0 / w as f64,
    }
}

pub fn theta_apply(f: &SpectrumField) -> SpectrumField {
    f.map_weights(|p| Complex64::new(theta(p), 0.0))
}

/// `𝒯̂f(k) = Σ_n f̂(n,k)`.
pub fn op_t(f: &SpectrumField) -> SpectrumField {
    let mut out: BTreeMap<IntVector, Complex64> = BTreeMap::new();
    for (p, a) in f.iter() {
        *out.entry(p.k.clone()).or_default() += a;
    }
    SpectrumField::spatial(f.dim(), out).expect("dimensions agree")
}

/// `𝒫̂f(k) = f̂(−|k|², k)`.
pub fn op_p(f: &SpectrumField) -> SpectrumField {
    SpectrumField::spatial(
        f.dim(),
        f.iter()
            .filter(|(p, _)| p.on_sigma())
            .map(|(p, a)| (p.k.clone(), *a)),
    )
    .expect("dimensions agree")
}

/// `(Σ_n ⟨n⟩^{−2b})^{1/2}`, the Cauchy–Schwarz constant of `𝒯` on `X^b`.
///
/// The tail beyond the explicit sum is bounded by the integral, so the value
/// is a slight overestimate.
pub fn bourgain_constant(b: f64) -> f64 {
    assert!(b > 0.5, "bourgain_constant needs b > 1/2");
    const N: usize = 1_000_000;
    let head: f64 = 1.0
        + 2.0
            * (1..=N)
                .map(|n| bracket(n as f64).powf(-2.0 * b))
                .sum::<f64>();
    let tail = 2.0 * (N as f64).powf(1.0 - 2.0 * b) / (2.0 * b - 1.0);
    (head + tail).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffWeight {
    Eta,
    TEta,
}

/// Smooth even bump `η_τ`: equal to 1 on `|t| ≤ plateau·τ`, vanishing for
/// `|t| ≥ τ`, with a `C^∞` transition built from `e^{−1/x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub half_width: f64,
    pub plateau: f64,
    pub fourier_truncation: usize,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec::automatic(DEFAULT_TAU, DEFAULT_PLATEAU, 0).expect("default cutoff is valid")
    }
}

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

impl CutoffSpec {
    pub fn new(half_width: f64, plateau: f64, fourier_truncation: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width < PI) {
            return Err(invalid(
                "half_width",
                format!("must lie in (0, π), got {half_width}"),
            ));
        }
        if !(plateau > 0.0 && plateau < 1.0) {
            return Err(invalid(
                "plateau",
                format!("must lie in (0, 1), got {plateau}"),
            ));
        }
        if fourier_truncation == 0 {
            return Err(invalid("fourier_truncation", "must be positive"));
        }
        Ok(CutoffSpec {
            half_width,
            plateau,
            fourier_truncation,
        })
    }

    /// Truncation `max(4·degree, J)`, where `J` is the smallest power of two
    /// whose coefficient tails of `η` and `tη` are below
    /// [`CUTOFF_TAIL_TARGET`].
    pub fn automatic(half_width: f64, plateau: f64, field_degree: usize) -> Result<Self> {
        let probe = CutoffSpec::new(half_width, plateau, MAX_AUTO_TRUNCATION)?;
        let eta = cutoff_coefficients(&probe, CutoffWeight::Eta);
        let teta = cutoff_coefficients(&probe, CutoffWeight::TEta);
        let mut j = MIN_AUTO_TRUNCATION;
        while j < MAX_AUTO_TRUNCATION
            && (tail_mass(&eta, j) > CUTOFF_TAIL_TARGET || tail_mass(&teta, j) > CUTOFF_TAIL_TARGET)
        {
            j *= 2;
        }
        CutoffSpec::new(half_width, plateau, j.max(4 * field_degree))
    }

    pub fn plateau_radius(&self) -> f64 {
        self.plateau * self.half_width
    }

    /// Value of the periodic extension at `t`.
    pub fn eta(&self, t: f64) -> f64 {
        let t = (t + PI).rem_euclid(2.0 * PI) - PI;
        let s = (t.abs() / self.half_width - self.plateau) / (1.0 - self.plateau);
        if s <= 0.0 {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            let (a, b) = (smooth_step(1.0 - s), smooth_step(s));
            a / (a + b)
        }
    }

    /// Value of the periodic extension of `tη(t)`.
    pub fn t_eta(&self, t: f64) -> f64 {
        let t = (t + PI).rem_euclid(2.0 * PI) - PI;
        t * self.eta(t)
    }

    /// Same plateau fraction at half the width, truncation resized for the
    /// narrower bump.
    pub fn halved(&self) -> Result<Self> {
        let auto = CutoffSpec::automatic(self.half_width / 2.0, self.plateau, 0)?;
        CutoffSpec::new(
            self.half_width / 2.0,
            self.plateau,
            auto.fourier_truncation.max(self.fourier_truncation),
        )
    }
}

/// Coefficients `c_j`, `|j| ≤ radius`, of a temporal trigonometric polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalSeries {
    pub radius: usize,
    pub coeffs: Vec<Complex64>,
    /// `ℓ²` mass of the discarded coefficients (zero for exact polynomials).
    pub tail_mass: f64,
}

impl TemporalSeries {
    pub fn zero() -> Self {
        TemporalSeries {
            radius: 0,
            coeffs: vec![Complex64::default()],
            tail_mass: 0.0,
        }
    }

    pub fn get(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.radius {
            return Complex64::default();
        }
        self.coeffs[(j + self.radius as i64) as usize]
    }

    pub fn from_field(f: &SpectrumField) -> Result<Self> {
        if !f.is_temporal() {
            return Err(invalid(
                "series",
                "temporal polynomial must have k = 0 only",
            ));
        }
        let radius = f.max_abs_n() as usize;
        let mut coeffs = vec![Complex64::default(); 2 * radius + 1];
        for (p, a) in f.iter() {
            coeffs[(p.n + radius as i64) as usize] = *a;
        }
        Ok(TemporalSeries {
            radius,
            coeffs,
            tail_mass: 0.0,
        })
    }

    pub fn to_field(&self, dim: usize) -> SpectrumField {
        let r = self.radius as i64;
        SpectrumField::temporal(dim, (-r..=r).map(|j| (j, self.get(j)))).expect("temporal field")
    }

    pub fn truncated(&self, radius: usize) -> Self {
        let r = radius.min(self.radius) as i64;
        let kept: f64 = (-r..=r).map(|j| self.get(j).norm_sqr()).sum();
        let all: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        TemporalSeries {
            radius: r as usize,
            coeffs: (-r..=r).map(|j| self.get(j)).collect(),
            tail_mass: ((all - kept).max(0.0) + self.tail_mass * self.tail_mass).sqrt(),
        }
    }

    /// `(Σ ⟨j⟩^{2b} |c_j|²)^{1/2}`.
    pub fn hb_norm(&self, b: f64) -> f64 {
        let r = self.radius as i64;
        (-r..=r)
            .map(|j| bracket(j as f64).powf(2.0 * b) * self.get(j).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// All coefficients of the sampled weight, indexed `j + M/2` for `|j| < M/2`.
fn cutoff_coefficients(spec: &CutoffSpec, weight: CutoffWeight) -> Vec<Complex64> {
    let m = (16 * spec.fourier_truncation)
        .next_power_of_two()
        .max(1 << 16);
    let mut data: Vec<Complex64> = (0..m)
        .map(|i| {
            let t = -PI + 2.0 * PI * i as f64 / m as f64;
            let v = match weight {
                CutoffWeight::Eta => spec.eta(t),
                CutoffWeight::TEta => t * spec.eta(t),
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    fft_nd(&mut data, &[m], false);
    let half = m as i64 / 2;
    (-half + 1..half)
        .map(|j| {
            // t_i = −π + 2πi/M contributes e^{ijπ} = (−1)^j
            let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            data[j.rem_euclid(m as i64) as usize] * (sign / m as f64)
        })
        .collect()
}

fn tail_mass(all: &[Complex64], radius: usize) -> f64 {
    let centre = all.len() / 2;
    all.iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(centre) > radius)
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Temporal Fourier coefficients of `ℰη` or `ℰ(tη)` up to the spec's
/// truncation, computed by trapezoidal quadrature (spectrally accurate for the
/// smooth periodic extension).
pub fn cutoff_fourier(spec: &CutoffSpec, weight: CutoffWeight) -> TemporalSeries {
    let all = cutoff_coefficients(spec, weight);
    let centre = (all.len() / 2) as i64;
    let r = spec.fourier_truncation as i64;
    TemporalSeries {
        radius: spec.fourier_truncation,
        coeffs: (-r..=r).map(|j| all[(centre + j) as usize]).collect(),
        tail_mass: tail_mass(&all, spec.fourier_truncation),
    }
}

/// `𝒦f = −φΘf + φ𝒰₀𝒯Θf − iψ𝒰₀𝒫f` for temporal polynomials `φ`, `ψ`.
pub fn apply_k(f: &SpectrumField, phi: &TemporalSeries, psi: &TemporalSeries) -> SpectrumField {
    let dim = f.dim();
    let mut out: BTreeMap<FreqPoint, Complex64> = BTreeMap::new();
    let mut sums: BTreeMap<IntVector, (Complex64, Complex64)> = BTreeMap::new();
    let (rp, rs) = (phi.radius as i64, psi.radius as i64);
    for (p, a) in f.iter() {
        let th = theta(p);
        let entry = sums.entry(p.k.clone()).or_default();
        if th == 0.0 {
            entry.1 += a;
            continue;
        }
        let scaled = a * th;
        entry.0 += scaled;
        for j in -rp..=rp {
            *out.entry(FreqPoint::new(p.n + j, p.k.clone())).or_default() -= phi.get(j) * scaled;
        }
    }
    for (k, (s, resonant)) in sums {
        let base = -FreqPoint::spatial(k.clone()).k_sq();
        if s != Complex64::default() {
            for j in -rp..=rp {
                *out.entry(FreqPoint::new(base + j, k.clone())).or_default() += phi.get(j) * s;
            }
        }
        if resonant != Complex64::default() {
            for j in -rs..=rs {
                *out.entry(FreqPoint::new(base + j, k.clone())).or_default() -=
                    I * psi.get(j) * resonant;
            }
        }
    }
    SpectrumField::from_modes(dim, out).expect("dimensions agree")
}

/// `ℰη𝔇f` through its Fourier kernel.
pub fn duhamel_fourier(f: &SpectrumField, spec: &CutoffSpec) -> SpectrumField {
    let phi = cutoff_fourier(spec, CutoffWeight::Eta);
    let psi = cutoff_fourier(spec, CutoffWeight::TEta);
    apply_k(f, &phi, &psi)
}

/// Right-hand side `−ℰηΘf + ℰη𝒰₀𝒯Θf − iℰ(tη)𝒰₀𝒫f` assembled from the
/// separate primitives and field products.
pub fn duhamel_identity_rhs(f: &SpectrumField, spec: &CutoffSpec) -> Result<SpectrumField> {
    let dim = f.dim();
    let eta = cutoff_fourier(spec, CutoffWeight::Eta).to_field(dim);
    let teta = cutoff_fourier(spec, CutoffWeight::TEta).to_field(dim);
    let th = theta_apply(f);
    let first = eta.multiply(&th)?.scale(Complex64::new(-1.0, 0.0));
    let second = eta.multiply(&op_t(&th).free_evolve()?)?;
    let third = teta.multiply(&op_p(f).free_evolve()?)?.scale(-I);
    first.add(&second)?.add(&third)
}

/// `ℰη𝔇f` by direct time quadrature: the Duhamel integral is accumulated
/// from `t = 0` with the trapezoid rule on `samples` points of `[−π, π]`
/// (Richardson-extrapolated against the half-resolution rule), multiplied by
/// `η`, and transformed back.
pub fn duhamel_quadrature(
    f: &SpectrumField,
    spec: &CutoffSpec,
    samples: usize,
) -> Result<SpectrumField> {
    if samples < 8 || !samples.is_multiple_of(4) {
        return Err(invalid("samples", "must be a multiple of 4 and at least 8"));
    }
    let dim = f.dim();
    let h = 2.0 * PI / samples as f64;
    let centre = samples / 2;
    let mut rows: BTreeMap<IntVector, Vec<(i64, Complex64)>> = BTreeMap::new();
    for (p, a) in f.iter() {
        rows.entry(p.k.clone()).or_default().push((p.n, *a));
    }
    let mut out = SpectrumField::zero(dim);
    let eta: Vec<f64> = (0..samples).map(|i| spec.eta(-PI + h * i as f64)).collect();
    for (k, modes) in rows {
        let ksq = FreqPoint::spatial(k.clone()).k_sq() as f64;
        // integrand e^{is|k|²} g_k(s) on the closed grid
        let integrand: Vec<Complex64> = (0..=samples)
            .map(|i| {
                let s = -PI + h * i as f64;
                modes
                    .iter()
                    .map(|&(m, a)| a * Complex64::from_polar(1.0, (m as f64 + ksq) * s))
                    .sum()
            })
            .collect();
        let fine = cumulative_trapezoid(&integrand, centre, 1, h);
        let coarse = cumulative_trapezoid(&integrand, centre, 2, 2.0 * h);
        let mut values: Vec<Complex64> = (0..samples)
            .map(|i| {
                let integral = if (i as i64 - centre as i64) % 2 == 0 {
                    (fine[i] * 4.0 - coarse[i]) / 3.0
                } else {
                    fine[i]
                };
                let t = -PI + h * i as f64;
                -I * Complex64::from_polar(1.0, -ksq * t) * integral * eta[i]
            })
            .collect();
        fft_nd(&mut values, &[samples], false);
        let half = samples as i64 / 2;
        for n in (-half + 1)..half {
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let c = values[n.rem_euclid(samples as i64) as usize] * (sign / samples as f64);
            out.add_at(FreqPoint::new(n, k.clone()), c)?;
        }
    }
    out.prune();
    Ok(out)
}

/// `∫₀^{t_i} y` at every grid index reachable from `centre` in steps of
/// `stride`; other entries are left at zero.
fn cumulative_trapezoid(y: &[Complex64], centre: usize, stride: usize, h: f64) -> Vec<Complex64> {
    let mut acc = vec![Complex64::default(); y.len()];
    let mut i = centre;
    while i + stride < y.len() {
        acc[i + stride] = acc[i] + (y[i] + y[i + stride]) * (h / 2.0);
        i += stride;
    }
    let mut i = centre;
    while i >= stride {
        acc[i - stride] = acc[i] - (y[i] + y[i - stride]) * (h / 2.0);
        i -= stride;
    }
    acc
}

/// A real potential `V(x)` on `𝕋^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    FourierModes {
        dim: usize,
        modes: Vec<PotentialMode>,
        degree: i64,
    },
    GridSamples {
        shape: Vec<usize>,
        values: Vec<f64>,
        degree: i64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialMode {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl PotentialSpec {
    pub fn zero(dim: usize) -> Self {
        PotentialSpec::FourierModes {
            dim,
            modes: Vec::new(),
            degree: 0,
        }
    }

    /// `V = Σ amplitude·cos(k·x)` for each pair.
    pub fn cosines(dim: usize, terms: &[(IntVector, f64)]) -> Result<Self> {
        let mut modes = Vec::new();
        let mut degree = 0;
        for (k, a) in terms {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.dim(),
                });
            }
            degree = degree.max(k.coords().iter().map(|c| c.abs()).max().unwrap_or(0));
            for kk in [k.clone(), k.neg()] {
                modes.push(PotentialMode {
                    k: kk.into_coords(),
                    re: a / 2.0,
                    im: 0.0,
                });
            }
        }
        Ok(PotentialSpec::FourierModes { dim, modes, degree })
    }

    pub fn from_field(f: &SpectrumField) -> Result<Self> {
        if !f.is_spatial() {
            return Err(Error::NotSpatial(f.max_abs_n()));
        }
        Ok(PotentialSpec::FourierModes {
            dim: f.dim(),
            modes: f
                .iter()
                .map(|(p, a)| PotentialMode {
                    k: p.k.coords().to_vec(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
            degree: f.max_abs_k(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialSpec::FourierModes { dim, .. } => *dim,
            PotentialSpec::GridSamples { shape, .. } => shape.len(),
        }
    }

    pub fn degree(&self) -> i64 {
        match self {
            PotentialSpec::FourierModes { degree, .. }
            | PotentialSpec::GridSamples { degree, .. } => *degree,
        }
    }

    /// Spatial coefficients; grid samples keep modes with `|k_j| ≤ degree`.
    pub fn to_field(&self) -> Result<SpectrumField> {
        let field = match self {
            PotentialSpec::FourierModes { dim, modes, .. } => SpectrumField::spatial(
                *dim,
                modes
                    .iter()
                    .map(|m| (IntVector::new(m.k.clone()), Complex64::new(m.re, m.im))),
            )?,
            PotentialSpec::GridSamples {
                shape,
                values,
                degree,
            } => {
                if shape.is_empty() {
                    return Err(Error::EmptyDimension);
                }
                if shape.iter().product::<usize>() != values.len() {
                    return Err(invalid("values", "length does not match grid shape"));
                }
                let mut data: Vec<Complex64> =
                    values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft_nd(&mut data, shape, false);
                let grid = Grid {
                    shape: shape.clone(),
                    data,
                };
                let total = values.len() as f64;
                let mut f = SpectrumField::zero(shape.len());
                for (flat, v) in grid.data.iter().enumerate() {
                    let k: Vec<i64> = grid
                        .unflatten(flat)
                        .iter()
                        .zip(shape)
                        .map(|(&i, &s)| {
                            if 2 * i >= s {
                                i as i64 - s as i64
                            } else {
                                i as i64
                            }
                        })
                        .collect();
                    if k.iter().all(|c| c.abs() <= *degree) {
                        f.add_at(FreqPoint::spatial(IntVector::new(k)), v / total)?;
                    }
                }
                f.prune();
                f
            }
        };
        let asym = hermitian_defect(&field);
        if asym > HERMITIAN_TOL {
            return Err(Error::NonHermitian(asym));
        }
        Ok(field)
    }
}

/// `max_k |V̂(−k) − conj V̂(k)|`.
pub fn hermitian_defect(f: &SpectrumField) -> f64 {
    f.iter()
        .map(|(p, a)| {
            let mirror = f.get(&FreqPoint::new(-p.n, p.k.neg()));
            (mirror - a.conj()).norm()
        })
        .fold(0.0, f64::max)
}

/// Keeps the modes with `k ∈ Λ`, i.e. averages `V` over the fibres of `𝕋_{Λ⊥}`.
pub fn project_potential(v: &PotentialSpec, lat: &Sublattice) -> Result<PotentialSpec> {
    if lat.ambient_dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: lat.ambient_dim(),
        });
    }
    let field = v.to_field()?;
    let keep: BTreeSet<FreqPoint> = field
        .support()
        .filter(|p| lat.contains(&p.k).unwrap_or(false))
        .cloned()
        .collect();
    let projected = field.filter(|p| keep.contains(p));
    match v {
        PotentialSpec::FourierModes { .. } => {
            let mut out = PotentialSpec::from_field(&projected)?;
            if let PotentialSpec::FourierModes { degree, .. } = &mut out {
                *degree = v.degree();
            }
            Ok(out)
        }
        PotentialSpec::GridSamples { shape, degree, .. } => {
            let n = shape[0];
            let resolved = shape.iter().all(|&s| s == n);
            if !resolved {
                return Err(invalid(
                    "shape",
                    "projection of grid samples needs a cubic grid",
                ));
            }
            let mut data = vec![Complex64::default(); shape.iter().product()];
            let grid = Grid {
                shape: shape.clone(),
                data: Vec::<Complex64>::new(),
            };
            for (p, a) in projected.iter() {
                let idx: Vec<usize> =
                    p.k.coords()
                        .iter()
                        .zip(shape)
                        .map(|(&c, &s)| c.rem_euclid(s as i64) as usize)
                        .collect();
                data[grid.flat_index(&idx)] += a;
            }
            fft_nd(&mut data, shape, true);
            Ok(PotentialSpec::GridSamples {
                shape: shape.clone(),
                values: data.iter().map(|c| c.re).collect(),
                degree: *degree,
            })
        }
    }
}

/// Options shared by the fixed-point solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    pub b: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Spatial box `|k| ≤ F`.
    pub freq_bound: i64,
    /// Temporal box `|n| ≤ T`; defaults to `F² + J` for cutoff truncation `J`.
    pub time_bound: Option<i64>,
    pub max_tau_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            b: DEFAULT_B,
            tol: DEFAULT_TOL,
            max_iterations: MAX_ITERATIONS,
            freq_bound: 16,
            time_bound: None,
            max_tau_halvings: MAX_TAU_HALVINGS,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.b > 0.5 && self.b < 1.0) {
            return Err(invalid(
                "b",
                format!("must lie in (1/2, 1), got {}", self.b),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.freq_bound < 0 || self.freq_bound > 1000 {
            return Err(invalid("freq_bound", "must lie in [0, 1000]"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: SpectrumField,
    pub iterations: usize,
    pub residual_xb: f64,
    /// Ratio of the last two successive-difference norms.
    pub contraction_estimate: f64,
    pub residual_history: Vec<f64>,
    /// Cutoff width actually used (after any halving).
    pub half_width: Option<f64>,
    pub plateau_radius: Option<f64>,
    pub time_bound: i64,
    pub basis_size: usize,
}

/// Dense storage of fields on `{|n| ≤ T} × K`, one row per `k ∈ K`.
struct Layout {
    ks: Vec<IntVector>,
    k_sq: Vec<i64>,
    index: HashMap<IntVector, usize>,
    t: i64,
}

impl Layout {
    fn new(ks: Vec<IntVector>, t: i64) -> Self {
        let k_sq = ks
            .iter()
            .map(|k| k.coords().iter().map(|c| c * c).sum())
            .collect();
        let index = ks.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Layout { ks, k_sq, index, t }
    }

    fn width(&self) -> usize {
        (2 * self.t + 1) as usize
    }

    fn load(&self, f: &SpectrumField, what: &'static str) -> Result<Vec<Complex64>> {
        let w = self.width();
        let mut data = vec![Complex64::default(); self.ks.len() * w];
        for (p, a) in f.iter() {
            let row = self
                .index
                .get(&p.k)
                .ok_or_else(|| invalid(what, format!("mode {p} lies outside the spatial box")))?;
            if p.n.abs() > self.t {
                return Err(invalid(what, format!("mode {p} lies outside the time box")));
            }
            data[row * w + (p.n + self.t) as usize] += a;
        }
        Ok(data)
    }

    fn store(&self, data: &[Complex64], dim: usize) -> SpectrumField {
        let w = self.width();
        let mut f = SpectrumField::zero(dim);
        for (row, k) in self.ks.iter().enumerate() {
            for i in 0..w {
                let a = data[row * w + i];
                if a != Complex64::default() {
                    f.add_at(FreqPoint::new(i as i64 - self.t, k.clone()), a)
                        .expect("dimension");
                }
            }
        }
        f.prune();
        f
    }

    fn xb_norm(&self, data: &[Complex64], b: f64) -> f64 {
        let w = self.width();
        data.par_chunks(w)
            .zip(self.k_sq.par_iter())
            .map(|(row, &ksq)| {
                row.iter()
                    .enumerate()
                    .map(|(i, a)| {
                        bracket((i as i64 - self.t + ksq) as f64).powf(2.0 * b) * a.norm_sqr()
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            .sqrt()
    }
}

/// The map `u ↦ base + 𝒦(W u)` on a [`Layout`].
struct FixedPointMap {
    layout: Layout,
    couplings: Vec<Vec<(usize, Complex64)>>,
    phi: TemporalSeries,
    psi: TemporalSeries,
    base: Vec<Complex64>,
    fft_len: usize,
    phi_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FixedPointMap {
    fn new(
        layout: Layout,
        potential: &SpectrumField,
        phi: TemporalSeries,
        psi: TemporalSeries,
        base: Vec<Complex64>,
    ) -> Self {
        // couplings[target] = (source row, V̂(k_target − k_source))
        let mut couplings = vec![Vec::new(); layout.ks.len()];
        for (src, k) in layout.ks.iter().enumerate() {
            for (p, v) in potential.iter() {
                if let Ok(target) = k.checked_add(&p.k) {
                    if let Some(&dst) = layout.index.get(&target) {
                        couplings[dst].push((src, *v));
                    }
                }
            }
        }
        let fft_len = (layout.width() + phi.coeffs.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut phi_hat = vec![Complex64::default(); fft_len];
        phi_hat[..phi.coeffs.len()].copy_from_slice(&phi.coeffs);
        forward.process(&mut phi_hat);
        FixedPointMap {
            layout,
            couplings,
            phi,
            psi,
            base,
            fft_len,
            phi_hat,
            forward,
            inverse,
        }
    }

    fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let w = self.layout.width();
        let t = self.layout.t;
        let j = self.phi.radius as i64;
        let mut out = self.base.clone();
        out.par_chunks_mut(w)
            .enumerate()
            .for_each(|(row, out_row)| {
                let ksq = self.layout.k_sq[row];
                let mut wrow = vec![Complex64::default(); w];
                for &(src, v) in &self.couplings[row] {
                    for (dst, a) in wrow.iter_mut().zip(&u[src * w..(src + 1) * w]) {
                        *dst += v * a;
                    }
                }
                let mut buf = vec![Complex64::default(); self.fft_len];
                let mut sum = Complex64::default();
                for (i, a) in wrow.iter().enumerate() {
                    let omega = i as i64 - t + ksq;
                    if omega != 0 {
                        let th = *a / omega as f64;
                        buf[i] = th;
                        sum += th;
                    }
                }
                self.forward.process(&mut buf);
                for (b, p) in buf.iter_mut().zip(&self.phi_hat) {
                    *b *= p;
                }
                self.inverse.process(&mut buf);
                let scale = 1.0 / self.fft_len as f64;
                // conv index l = i + j' corresponds to n = l − T − J
                for (i, o) in out_row.iter_mut().enumerate() {
                    *o -= buf[i + j as usize] * scale;
                }
                let resonant_idx = t - ksq;
                let resonant = if (0..w as i64).contains(&resonant_idx) {
                    wrow[resonant_idx as usize]
                } else {
                    Complex64::default()
                };
                for (i, o) in out_row.iter_mut().enumerate() {
                    let omega = i as i64 - t + ksq;
                    *o += self.phi.get(omega) * sum - I * self.psi.get(omega) * resonant;
                }
            });
        out
    }

    fn solve(&self, b: f64, tol: f64, max_iterations: usize) -> Result<Iterated> {
        let mut u = self.base.clone();
        let mut history = Vec::new();
        let scale = self.layout.xb_norm(&u, b).max(1.0);
        for iter in 1..=max_iterations {
            let next = self.apply(&u);
            let diff: Vec<Complex64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
            let r = self.layout.xb_norm(&diff, b);
            history.push(r);
            u = next;
            if !r.is_finite() {
                return Err(Error::NonContracting {
                    factor: f64::INFINITY,
                    tau: f64::NAN,
                });
            }
            if r <= tol {
                let again = self.apply(&u);
                let diff: Vec<Complex64> = again.iter().zip(&u).map(|(a, b)| a - b).collect();
                let residual = self.layout.xb_norm(&diff, b);
                return Ok(Iterated {
                    u,
                    iterations: iter,
                    residual,
                    history,
                });
            }
            let n = history.len();
            if n >= 4 && history[n - 1] >= history[n - 2] {
                let factor = history[n - 1] / history[n - 2];
                if history[n - 1] < 1e-13 * scale {
                    return Err(Error::NotConverged {
                        iterations: iter,
                        residual: r,
                        tol,
                    });
                }
                return Err(Error::NonContracting {
                    factor,
                    tau: f64::NAN,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: max_iterations,
            residual: *history.last().unwrap_or(&f64::NAN),
            tol,
        })
    }
}

struct Iterated {
    u: Vec<Complex64>,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

fn contraction_of(history: &[f64]) -> f64 {
    match history.len() {
        0 | 1 => 0.0,
        n => {
            if history[n - 2] == 0.0 {
                0.0
            } else {
                history[n - 1] / history[n - 2]
            }
        }
    }
}

/// Spatial box: `|k| ≤ F` intersected with the `Λ`-classes of the data.
fn spatial_box(
    fields: &[&SpectrumField],
    lat: &Sublattice,
    freq_bound: i64,
) -> Result<Vec<IntVector>> {
    let mut reps: Vec<AffineSublattice> = Vec::new();
    for f in fields {
        for p in f.support() {
            if p.k_sq() > freq_bound * freq_bound {
                return Err(invalid(
                    "freq_bound",
                    format!("data mode {p} lies outside |k| ≤ {freq_bound}"),
                ));
            }
            let class = AffineSublattice::new(p.k.clone(), lat.clone())?;
            if !reps.contains(&class) {
                reps.push(class);
            }
        }
    }
    let mut ks: BTreeSet<IntVector> = BTreeSet::new();
    for class in reps {
        ks.extend(class.points_in_ball(freq_bound * freq_bound)?);
    }
    Ok(ks.into_iter().collect())
}

fn check_dims(u0: &SpectrumField, lat: &Sublattice, g: Option<&SpectrumField>) -> Result<()> {
    if lat.ambient_dim() != u0.dim() {
        return Err(Error::DimensionMismatch {
            expected: u0.dim(),
            found: lat.ambient_dim(),
        });
    }
    if let Some(g) = g {
        if g.dim() != u0.dim() {
            return Err(Error::DimensionMismatch {
                expected: u0.dim(),
                found: g.dim(),
            });
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_fixed_point(
    u0: &SpectrumField,
    potential: &SpectrumField,
    lat: &Sublattice,
    g: Option<&SpectrumField>,
    phi: TemporalSeries,
    psi: TemporalSeries,
    opts: &SolveOptions,
) -> Result<(FixedPointMap, Iterated)> {
    let zero = SpectrumField::zero(u0.dim());
    let g = g.unwrap_or(&zero);
    let ks = spatial_box(&[u0, g], lat, opts.freq_bound)?;
    let radius = phi.radius.max(psi.radius) as i64;
    let t = opts
        .time_bound
        .unwrap_or(opts.freq_bound * opts.freq_bound + radius);
    let layout = Layout::new(ks, t);
    let mut base = layout.load(&u0.free_evolve()?, "u0")?;
    for (b, x) in base.iter_mut().zip(layout.load(g, "g")?) {
        *b += x;
    }
    let map = FixedPointMap::new(layout, potential, phi, psi, base);
    let it = map.solve(opts.b, opts.tol, opts.max_iterations)?;
    Ok((map, it))
}

/// Fixed point of `u = 𝒰₀u₀ + ℰη𝔇V_Λu + g` in the truncated `X^b` space.
/// `τ` is halved (at most `max_tau_halvings` times) while the iteration fails
/// to contract.
pub fn solve_periodized(
    u0: &SpectrumField,
    v: &PotentialSpec,
    lat: &Sublattice,
    g: Option<&SpectrumField>,
    spec: &CutoffSpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_dims(u0, lat, g)?;
    let potential = project_potential(v, lat)?.to_field()?;
    let mut spec = *spec;
    let mut last_err = None;
    for _ in 0..=opts.max_tau_halvings {
        let phi = cutoff_fourier(&spec, CutoffWeight::Eta);
        let psi = cutoff_fourier(&spec, CutoffWeight::TEta);
        match run_fixed_point(u0, &potential, lat, g, phi, psi, opts) {
            Ok((map, it)) => {
                return Ok(SolveReport {
                    solution: map.layout.store(&it.u, u0.dim()),
                    iterations: it.iterations,
                    residual_xb: it.residual,
                    contraction_estimate: contraction_of(&it.history),
                    residual_history: it.history,
                    half_width: Some(spec.half_width),
                    plateau_radius: Some(spec.plateau_radius()),
                    time_bound: map.layout.t,
                    basis_size: map.layout.ks.len(),
                });
            }
            Err(Error::NonContracting { factor, .. }) => {
                last_err = Some(Error::NonContracting {
                    factor,
                    tau: spec.half_width,
                });
                spec = spec.halved()?;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Fixed point of `v = 𝒰₀u₀ + 𝒦W_Λv + g` with `𝒦 = −φΘ + φ𝒰₀𝒯Θ − iψ𝒰₀𝒫`.
#[allow(clippy::too_many_arguments)]
pub fn solve_approximate(
    u0: &SpectrumField,
    w: &PotentialSpec,
    phi: &TemporalSeries,
    psi: &TemporalSeries,
    lat: &Sublattice,
    g: Option<&SpectrumField>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_dims(u0, lat, g)?;
    let potential = project_potential(w, lat)?.to_field()?;
    let (map, it) = run_fixed_point(u0, &potential, lat, g, phi.clone(), psi.clone(), opts)?;
    Ok(SolveReport {
        solution: map.layout.store(&it.u, u0.dim()),
        iterations: it.iterations,
        residual_xb: it.residual,
        contraction_estimate: contraction_of(&it.history),
        residual_history: it.history,
        half_width: None,
        plateau_radius: None,
        time_bound: map.layout.t,
        basis_size: map.layout.ks.len(),
    })
}

/// Norm of `ℰη_τ𝔇 : X^{b−1+ε} → X^b` restricted to inputs with
/// `|n + |k|²| ≤ window`. The kernel depends on `(n,k)` only through
/// `n + |k|²`, so a single matrix suffices for every `k`.
pub fn duhamel_operator_norm(spec: &CutoffSpec, b: f64, epsilon: f64, window: i64) -> f64 {
    let phi = cutoff_fourier(spec, CutoffWeight::Eta);
    let psi = cutoff_fourier(spec, CutoffWeight::TEta);
    let j = phi.radius as i64;
    let rows = (2 * (window + j) + 1) as usize;
    let cols = (2 * window + 1) as usize;
    let a = nalgebra::DMatrix::<Complex64>::from_fn(rows, cols, |r, c| {
        let out = r as i64 - window - j;
        let inp = c as i64 - window;
        let value = if inp == 0 {
            -I * psi.get(out)
        } else {
            (phi.get(out) - phi.get(out - inp)) / inp as f64
        };
        value * bracket(out as f64).powf(b) * bracket(inp as f64).powf(1.0 - b - epsilon)
    });
    a.singular_values().max()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionPoint {
    pub half_width: f64,
    pub fourier_truncation: usize,
    pub operator_norm: f64,
}

/// Operator norms for `τ, τ/2, …` (`halvings + 1` values).
pub fn contraction_scan(
    spec: &CutoffSpec,
    b: f64,
    epsilon: f64,
    window: i64,
    halvings: usize,
) -> Result<Vec<ContractionPoint>> {
    let mut spec = *spec;
    let mut out = Vec::with_capacity(halvings + 1);
    for step in 0..=halvings {
        out.push(ContractionPoint {
            half_width: spec.half_width,
            fourier_truncation: spec.fourier_truncation,
            operator_norm: duhamel_operator_norm(&spec, b, epsilon, window),
        });
        if step < halvings {
            spec = spec.halved()?;
        }
    }
    Ok(out)
}
