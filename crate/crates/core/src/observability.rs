//! Observation of Schrödinger waves through a multiplier `|χ|²` on `𝕋^{1+d}`.
//!
//! For data `u₀ = Σ a_k e^{ik·x}` on a basis `k_1, …, k_N`, the Gram matrix
//! satisfies `a^H G a = ‖χ e^{−itℋ}u₀‖²` with normalized measures. For the
//! free flow `G[i][j] = c(|k_j|² − |k_i|², k_i − k_j)`, where `c` denotes the
//! normalized Fourier coefficient of `|χ|²`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::clusters::ClusterDecomposition;
use crate::duhamel::{hermitian_defect, PotentialSpec};
use crate::error::{invalid, Error, Result};
use crate::lattice::{AffineSublattice, IntVector};
use crate::spectral::{complex_gaussian, fft_nd, FreqPoint, Grid, SpectrumField};
use crate::tolerances::{HERMITIAN_TOL, NONNEGATIVE_TOL, PSD_TOL};

/// Gauss–Legendre nodes per quadrature panel.
pub const NODES_PER_PANEL: usize = 20;
/// Largest phase change `Ω·length` allowed on one panel.
const PANEL_PHASE: f64 = 10.0;

/// Serialized form of a multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    /// Trigonometric polynomial in `(t, x)`.
    Spectrum { field: SpectrumField },
    /// Piecewise constant on the cells of a uniform grid of shape
    /// `[nt, nx_1, …, nx_d]`; cell `a` covers `[2πa/n, 2π(a+1)/n)` per axis.
    Cells { shape: Vec<usize>, values: Vec<f64> },
}

struct CellData {
    shape: Vec<usize>,
    /// Space-time DFT divided by the cell count.
    dft: Vec<Complex64>,
    /// Spatial DFT of each time slice divided by the spatial cell count.
    slices: Vec<Vec<Complex64>>,
    max: f64,
}

/// A real nonnegative multiplier `|χ|²` with exact Fourier coefficients.
#[derive(Clone)]
pub struct Multiplier {
    spec: MultiplierSpec,
    dim: usize,
    cells: Option<Arc<CellData>>,
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Multiplier({:?})", self.spec)
    }
}

/// Mean of `e^{−iqs}` over the first cell of `cells` equal cells of `[0, 2π)`.
fn cell_factor(q: i64, cells: usize) -> Complex64 {
    if q == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if q % cells as i64 == 0 {
        return Complex64::default();
    }
    let z = Complex64::new(0.0, q as f64 * TAU / cells as f64);
    (Complex64::new(1.0, 0.0) - (-z).exp()) / z
}

fn wrap_index(q: i64, len: usize) -> usize {
    q.rem_euclid(len as i64) as usize
}

fn grid_index(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &s)| acc * s + i)
}

fn resolved_len(max_abs: i64) -> usize {
    (2 * max_abs as usize + 1).next_power_of_two().max(2)
}

impl Multiplier {
    pub fn spectrum(field: SpectrumField) -> Result<Self> {
        let defect = hermitian_defect(&field);
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitian(defect));
        }
        if !field.is_empty() {
            let grid = field.evaluate_grid(
                resolved_len(field.max_abs_n()),
                resolved_len(field.max_abs_k()),
            )?;
            let min = grid.data.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
            if min < -NONNEGATIVE_TOL {
                return Err(Error::NegativeMultiplier(min));
            }
        }
        Ok(Multiplier {
            dim: field.dim(),
            spec: MultiplierSpec::Spectrum { field },
            cells: None,
        })
    }

    pub fn cells(grid: Grid<f64>) -> Result<Self> {
        let Grid { shape, data } = grid;
        if shape.len() < 2 || shape.contains(&0) {
            return Err(invalid(
                "shape",
                "need a time axis and at least one nonempty spatial axis",
            ));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(invalid("values", "length does not match grid shape"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        let min = data.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -NONNEGATIVE_TOL {
            return Err(Error::NegativeMultiplier(min));
        }
        let mut dft: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut dft, &shape, false);
        let total = data.len() as f64;
        dft.iter_mut().for_each(|v| *v /= total);
        let slice_len = data.len() / shape[0];
        let slices = data
            .chunks(slice_len)
            .map(|row| {
                let mut s: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft_nd(&mut s, &shape[1..], false);
                s.iter_mut().for_each(|v| *v /= slice_len as f64);
                s
            })
            .collect();
        let max = data.iter().copied().fold(0.0, f64::max);
        Ok(Multiplier {
            dim: shape.len() - 1,
            cells: Some(Arc::new(CellData {
                shape: shape.clone(),
                dft,
                slices,
                max,
            })),
            spec: MultiplierSpec::Cells {
                shape,
                values: data,
            },
        })
    }

    pub fn from_spec(spec: MultiplierSpec) -> Result<Self> {
        match spec {
            MultiplierSpec::Spectrum { field } => Self::spectrum(field),
            MultiplierSpec::Cells { shape, values } => Self::cells(Grid {
                shape,
                data: values,
            }),
        }
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::spectrum(SpectrumField::constant(dim, Complex64::new(value, 0.0)))
    }

    /// Indicator of the product of index ranges on a cell grid.
    pub fn indicator(shape: Vec<usize>, ranges: &[Range<usize>]) -> Result<Self> {
        if ranges.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                found: ranges.len(),
            });
        }
        if ranges.iter().zip(&shape).any(|(r, &s)| r.end > s) {
            return Err(invalid("ranges", "index range exceeds grid shape"));
        }
        let grid = Grid::from_fn(shape, |idx| {
            if idx.iter().zip(ranges).all(|(i, r)| r.contains(i)) {
                1.0
            } else {
                0.0
            }
        });
        Self::cells(grid)
    }

    /// `|χ|²` for a trigonometric polynomial `χ`.
    pub fn from_amplitude_field(chi: &SpectrumField) -> Result<Self> {
        let sq = chi.multiply(&chi.conj())?;
        Self::spectrum(sq)
    }

    /// `|χ|²` for a cell function `χ`.
    pub fn from_amplitude_cells(chi: &Grid<f64>) -> Result<Self> {
        Self::cells(Grid {
            shape: chi.shape.clone(),
            data: chi.data.iter().map(|v| v * v).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &MultiplierSpec {
        &self.spec
    }

    /// Normalized coefficient `c(n, k)` of `|χ|²`.
    pub fn coeff(&self, n: i64, k: &IntVector) -> Complex64 {
        match (&self.spec, &self.cells) {
            (MultiplierSpec::Spectrum { field }, _) => field.coeff(n, k),
            (_, Some(cells)) => {
                let freqs: Vec<i64> = std::iter::once(n)
                    .chain(k.coords().iter().copied())
                    .collect();
                let idx: Vec<usize> = freqs
                    .iter()
                    .zip(&cells.shape)
                    .map(|(&q, &s)| wrap_index(q, s))
                    .collect();
                let factor: Complex64 = freqs
                    .iter()
                    .zip(&cells.shape)
                    .map(|(&q, &s)| cell_factor(q, s))
                    .product();
                cells.dft[grid_index(&cells.shape, &idx)] * factor
            }
            _ => unreachable!("cell multipliers carry their transform"),
        }
    }

    /// Spatial coefficient of `|χ(t, ·)|²` on time cell `a`.
    fn slice_coeff(cells: &CellData, a: usize, k: &IntVector) -> Complex64 {
        let space = &cells.shape[1..];
        let idx: Vec<usize> = k
            .coords()
            .iter()
            .zip(space)
            .map(|(&q, &s)| wrap_index(q, s))
            .collect();
        let factor: Complex64 = k
            .coords()
            .iter()
            .zip(space)
            .map(|(&q, &s)| cell_factor(q, s))
            .product();
        cells.slices[a][grid_index(space, &idx)] * factor
    }

    /// An upper bound for `sup |χ|²`: the maximum cell value, or the `ℓ¹`
    /// norm of the coefficients.
    pub fn sup_bound(&self) -> f64 {
        match (&self.spec, &self.cells) {
            (MultiplierSpec::Spectrum { field }, _) => field.iter().map(|(_, a)| a.norm()).sum(),
            (_, Some(cells)) => cells.max,
            _ => unreachable!("cell multipliers carry their transform"),
        }
    }

    /// `‖χ‖_{L²}` with normalized measure.
    pub fn l2_norm(&self) -> f64 {
        self.coeff(0, &IntVector::zeros(self.dim))
            .re
            .max(0.0)
            .sqrt()
    }

    /// `‖χu‖²` for a space-time field `u`, from the coefficients.
    pub fn observation_norm_sq(&self, u: &SpectrumField) -> Result<f64> {
        if u.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.dim(),
            });
        }
        let modes: Vec<(&FreqPoint, &Complex64)> = u.iter().collect();
        let total: Complex64 = modes
            .par_iter()
            .map(|(p, a)| {
                modes
                    .iter()
                    .map(|(q, b)| {
                        let k = q.k.checked_sub(&p.k).expect("frequency overflow");
                        *a * b.conj() * self.coeff(q.n - p.n, &k)
                    })
                    .sum::<Complex64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        Ok(total.re)
    }
}

/// What is observed: `|χ|²`, the data subspace `{k ∈ Γ : |proj_Λ k| ≤ F}`
/// with `Λ` the direction of `Γ`, and an optional potential.
#[derive(Clone, Debug)]
pub struct ObservationSetup {
    pub multiplier: Multiplier,
    pub subspace: AffineSublattice,
    pub freq_bound: i64,
    pub potential: Option<PotentialSpec>,
}

impl ObservationSetup {
    pub fn new(
        multiplier: Multiplier,
        subspace: AffineSublattice,
        freq_bound: i64,
    ) -> Result<Self> {
        if subspace.ambient_dim() != multiplier.dim() {
            return Err(Error::DimensionMismatch {
                expected: multiplier.dim(),
                found: subspace.ambient_dim(),
            });
        }
        if freq_bound < 0 {
            return Err(invalid("freq_bound", "must be nonnegative"));
        }
        Ok(ObservationSetup {
            multiplier,
            subspace,
            freq_bound,
            potential: None,
        })
    }

    pub fn with_potential(mut self, potential: PotentialSpec) -> Result<Self> {
        if potential.dim() != self.multiplier.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.multiplier.dim(),
                found: potential.dim(),
            });
        }
        self.potential = Some(potential);
        Ok(self)
    }

    pub fn with_freq_bound(&self, freq_bound: i64) -> Self {
        ObservationSetup {
            freq_bound,
            ..self.clone()
        }
    }

    pub fn basis(&self) -> Result<Vec<IntVector>> {
        let basis = self
            .subspace
            .points_in_projected_ball(self.freq_bound * self.freq_bound)?;
        if basis.is_empty() {
            return Err(Error::EmptyInput("subspace box"));
        }
        Ok(basis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramMethod {
    ClosedForm,
    Quadrature,
    Eigenspace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureInfo {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub resolution: usize,
    /// Asymmetry of the truncated Hamiltonian before symmetrization.
    pub hamiltonian_asymmetry: f64,
}

fn serialize_matrix<S: Serializer>(
    m: &DMatrix<Complex64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect();
    rows.serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservabilityReport {
    pub method: GramMethod,
    pub freq_bound: Option<i64>,
    pub basis: Vec<IntVector>,
    /// Entries as `[re, im]` pairs.
    #[serde(serialize_with = "serialize_matrix")]
    pub gram: DMatrix<Complex64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `√max(λ_min, 0)`.
    pub obs_constant: f64,
    /// `max |G − G^H|` before symmetrization.
    pub gram_asymmetry: f64,
    pub multiplier_sup: f64,
    pub quadrature: Option<QuadratureInfo>,
}

impl ObservabilityReport {
    fn assemble(
        method: GramMethod,
        freq_bound: Option<i64>,
        basis: Vec<IntVector>,
        gram: DMatrix<Complex64>,
        multiplier_sup: f64,
        quadrature: Option<QuadratureInfo>,
    ) -> Self {
        let gram_asymmetry = (&gram - gram.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
        let mut eigenvalues: Vec<f64> = gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_min = eigenvalues[0];
        let lambda_max = *eigenvalues.last().expect("nonempty basis");
        ObservabilityReport {
            method,
            freq_bound,
            basis,
            gram,
            obs_constant: lambda_min.max(0.0).sqrt(),
            eigenvalues,
            lambda_min,
            lambda_max,
            gram_asymmetry,
            multiplier_sup,
            quadrature,
        }
    }

    /// Broken report invariants, as readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gram_asymmetry > HERMITIAN_TOL {
            out.push(format!(
                "gram asymmetry {:.3e} exceeds {HERMITIAN_TOL:e}",
                self.gram_asymmetry
            ));
        }
        if self.lambda_min < -PSD_TOL {
            out.push(format!("lambda_min {:.3e} is negative", self.lambda_min));
        }
        if self.lambda_max > self.multiplier_sup + PSD_TOL {
            out.push(format!(
                "lambda_max {:.6e} exceeds sup |chi|^2 bound {:.6e}",
                self.lambda_max, self.multiplier_sup
            ));
        }
        out
    }
}

fn k_sq(k: &IntVector) -> i64 {
    k.coords().iter().map(|c| c * c).sum()
}

fn diff(a: &IntVector, b: &IntVector) -> IntVector {
    a.checked_sub(b).expect("frequency overflow")
}

/// Closed-form Gram of the free flow.
pub fn gram_free(setup: &ObservationSetup) -> Result<ObservabilityReport> {
    if setup.potential.is_some() {
        return Err(invalid("potential", "the closed-form Gram requires V = 0"));
    }
    let basis = setup.basis()?;
    let sq: Vec<i64> = basis.iter().map(k_sq).collect();
    let m = &setup.multiplier;
    let n = basis.len();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        m.coeff(sq[j] - sq[i], &diff(&basis[i], &basis[j]))
    });
    Ok(ObservabilityReport::assemble(
        GramMethod::ClosedForm,
        Some(setup.freq_bound),
        basis,
        gram,
        m.sup_bound(),
        None,
    ))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(q, q, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..q)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Time interval on which `U^H M_t U = Σ e^{int} B_n`.
struct Segment {
    start: f64,
    end: f64,
    terms: Vec<(i64, DMatrix<Complex64>)>,
}

/// Gram of `u₀ ↦ χ e^{−itℋ}u₀` with `ℋ = diag|k|² + V̂(k_i − k_j)`, by
/// Gauss–Legendre quadrature in time in the eigenbasis of `ℋ`.
pub fn gram_potential(setup: &ObservationSetup) -> Result<ObservabilityReport> {
    gram_potential_with(setup, 1)
}

/// [`gram_potential`] with `resolution` times the default panel count.
pub fn gram_potential_with(
    setup: &ObservationSetup,
    resolution: usize,
) -> Result<ObservabilityReport> {
    if resolution == 0 {
        return Err(invalid("resolution", "must be positive"));
    }
    let basis = setup.basis()?;
    let n = basis.len();
    let v = match &setup.potential {
        Some(p) => p.to_field()?,
        None => SpectrumField::zero(setup.multiplier.dim()),
    };
    let h = DMatrix::from_fn(n, n, |i, j| {
        let base = if i == j { k_sq(&basis[i]) as f64 } else { 0.0 };
        Complex64::new(base, 0.0) + v.coeff(0, &diff(&basis[i], &basis[j]))
    });
    let asym = (&h - h.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if asym > HERMITIAN_TOL {
        return Err(Error::NonHermitian(asym));
    }
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let u = eig.eigenvectors;
    let spread = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - lambda.iter().copied().fold(f64::INFINITY, f64::min);

    let m = &setup.multiplier;
    let in_basis = |mat: DMatrix<Complex64>| u.adjoint() * mat * &u;
    let segments: Vec<Segment> = match (&m.spec, &m.cells) {
        (MultiplierSpec::Spectrum { field }, _) => {
            let ns: BTreeSet<i64> = field.support().map(|p| p.n).collect();
            let terms = ns
                .into_iter()
                .map(|t| {
                    let mat =
                        DMatrix::from_fn(n, n, |i, j| field.coeff(t, &diff(&basis[i], &basis[j])));
                    (t, in_basis(mat))
                })
                .collect();
            vec![Segment {
                start: 0.0,
                end: TAU,
                terms,
            }]
        }
        (_, Some(cells)) => {
            let nt = cells.shape[0];
            (0..nt)
                .map(|a| {
                    let mat = DMatrix::from_fn(n, n, |i, j| {
                        Multiplier::slice_coeff(cells, a, &diff(&basis[i], &basis[j]))
                    });
                    Segment {
                        start: TAU * a as f64 / nt as f64,
                        end: TAU * (a + 1) as f64 / nt as f64,
                        terms: vec![(0, in_basis(mat))],
                    }
                })
                .collect()
        }
        _ => unreachable!("cell multipliers carry their transform"),
    };

    let rule = gauss_legendre(NODES_PER_PANEL);
    let mut panels: Vec<(f64, f64, usize)> = Vec::new();
    for (s, seg) in segments.iter().enumerate() {
        let max_n = seg
            .terms
            .iter()
            .map(|(t, _)| t.unsigned_abs())
            .max()
            .unwrap_or(0) as f64;
        let len = seg.end - seg.start;
        let count = (((spread + max_n) * len / PANEL_PHASE).ceil() as usize).max(1) * resolution;
        let step = len / count as f64;
        panels.extend((0..count).map(|p| (seg.start + step * p as f64, step, s)));
    }
    let partial: Vec<DMatrix<Complex64>> = panels
        .par_iter()
        .map(|&(a, step, s)| {
            let mut acc = DMatrix::<Complex64>::zeros(n, n);
            for &(x, w) in &rule {
                let t = a + step * (x + 1.0) / 2.0;
                let weight = w * step / 2.0 / TAU;
                let phase: Vec<Complex64> = lambda
                    .iter()
                    .map(|&l| Complex64::from_polar(1.0, t * l))
                    .collect();
                for (tn, b) in &segments[s].terms {
                    let rot = Complex64::from_polar(weight, *tn as f64 * t);
                    for j in 0..n {
                        let cj = phase[j].conj() * rot;
                        for i in 0..n {
                            acc[(i, j)] += phase[i] * b[(i, j)] * cj;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut tilde = DMatrix::<Complex64>::zeros(n, n);
    for p in &partial {
        tilde += p;
    }
    let gram = &u * tilde * u.adjoint();
    Ok(ObservabilityReport::assemble(
        GramMethod::Quadrature,
        Some(setup.freq_bound),
        basis,
        gram,
        m.sup_bound(),
        Some(QuadratureInfo {
            panels: panels.len(),
            nodes_per_panel: NODES_PER_PANEL,
            resolution,
            hamiltonian_asymmetry: asym,
        }),
    ))
}

/// Free Gram when `V` is absent, quadrature Gram otherwise.
pub fn gram(setup: &ObservationSetup) -> Result<ObservabilityReport> {
    match setup.potential {
        None => gram_free(setup),
        Some(_) => gram_potential(setup),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub freq_bound: i64,
    pub basis_size: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub obs_constant: f64,
}

/// Truncated observability constants over increasing frequency bounds.
pub fn obs_constant_scan(setup: &ObservationSetup, freq_bounds: &[i64]) -> Result<Vec<ScanRow>> {
    if freq_bounds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("freq_bounds", "must be strictly increasing"));
    }
    freq_bounds
        .iter()
        .map(|&f| {
            let rep = gram(&setup.with_freq_bound(f))?;
            Ok(ScanRow {
                freq_bound: f,
                basis_size: rep.basis.len(),
                lambda_min: rep.lambda_min,
                lambda_max: rep.lambda_max,
                obs_constant: rep.obs_constant,
            })
        })
        .collect()
}

/// Independent substream `index` of the generator seeded by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Spatial data with complex Gaussian amplitudes on `ks`, normalized in `L²`.
pub fn random_unit_data<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    ks: &[IntVector],
) -> Result<SpectrumField> {
    let f = SpectrumField::spatial(dim, ks.iter().map(|k| (k.clone(), complex_gaussian(rng))))?;
    let norm = f.l2_norm();
    if norm == 0.0 {
        return Err(Error::EmptyInput("random data support"));
    }
    Ok(f.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// `{k ∈ ℤ^d : |k| ≤ F}`.
pub fn frequency_ball(dim: usize, freq_bound: i64) -> Result<Vec<IntVector>> {
    AffineSublattice::full(dim)?.points_in_ball(freq_bound * freq_bound)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub scale: i64,
    pub zeta_degree: f64,
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

/// `max |‖ζu‖² − Σ_α ‖ζu_α‖²|` over free waves `u = e^{itΔ}u₀`, where `u_α`
/// keeps the modes over the shadow of cluster `α`. Modes of `u₀` outside the
/// decomposition box are discarded.
pub fn decoupling_defect(
    zeta: &SpectrumField,
    decomp: &ClusterDecomposition,
    samples: &[SpectrumField],
) -> Result<DecouplingReport> {
    let owner = decomp.cluster_of();
    let defects: Vec<f64> = samples
        .par_iter()
        .map(|u0| -> Result<f64> {
            if !u0.is_spatial() {
                return Err(Error::NotSpatial(u0.max_abs_n()));
            }
            let mut parts: BTreeMap<usize, SpectrumField> = BTreeMap::new();
            for (p, a) in u0.iter() {
                if let Some(&alpha) = owner.get(&p.k) {
                    parts
                        .entry(alpha)
                        .or_insert_with(|| SpectrumField::zero(u0.dim()))
                        .add_at(FreqPoint::new(-p.k_sq(), p.k.clone()), *a)?;
                }
            }
            let mut whole = SpectrumField::zero(u0.dim());
            let mut split = 0.0;
            for part in parts.values() {
                whole = whole.add(part)?;
                split += zeta.multiply(part)?.l2_norm().powi(2);
            }
            let total = zeta.multiply(&whole)?.l2_norm().powi(2);
            Ok((total - split).abs())
        })
        .collect::<Result<_>>()?;
    Ok(DecouplingReport {
        scale: decomp.scale,
        zeta_degree: zeta.degree(),
        max_defect: defects.iter().copied().fold(0.0, f64::max),
        defects,
    })
}

/// Spatial Gram `G[i][j] = c(0, k_i − k_j)` over `{k ∈ ℤ^d : |k|² = n}`.
pub fn eigenspace_gram(n: i64, multiplier: &Multiplier, dim: usize) -> Result<ObservabilityReport> {
    if dim != multiplier.dim() {
        return Err(Error::DimensionMismatch {
            expected: multiplier.dim(),
            found: dim,
        });
    }
    let basis: Vec<IntVector> = AffineSublattice::full(dim)?
        .points_in_ball(n)?
        .into_iter()
        .filter(|k| k_sq(k) == n)
        .collect();
    if basis.is_empty() {
        return Err(Error::EmptyInput("eigenspace"));
    }
    let len = basis.len();
    let gram = DMatrix::from_fn(len, len, |i, j| {
        multiplier.coeff(0, &diff(&basis[i], &basis[j]))
    });
    Ok(ObservabilityReport::assemble(
        GramMethod::Eigenspace,
        None,
        basis,
        gram,
        multiplier.sup_bound(),
        None,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UIProfile {
    pub dim: usize,
    pub freq_bound: i64,
    pub p: f64,
    pub seed: Option<u64>,
    pub sample_count: usize,
    pub delta_grid: Vec<f64>,
    /// Largest share of `‖u‖²` carried by grid cells of total measure `δ`.
    pub worst_mass: Vec<f64>,
    /// `sup mean |u|^p` over the normalized samples.
    pub moment_bound: f64,
    pub grid_shape: Vec<usize>,
}

/// `mean |u|^p` of `u = e^{itΔ}u₀`, exact through the power `u^{p/2}`.
pub fn even_moment(u0: &SpectrumField, p: u32) -> Result<f64> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(invalid(
            "p",
            format!("must be a positive even integer, got {p}"),
        ));
    }
    let u = u0.free_evolve()?;
    let mut w = u.clone();
    for _ in 1..p / 2 {
        w = w.multiply(&u)?;
    }
    Ok(w.l2_norm().powi(2))
}

fn even_exponent(p: f64) -> Option<u32> {
    (p >= 2.0 && p.fract() == 0.0 && (p as u32).is_multiple_of(2)).then_some(p as u32)
}

/// Profile of given data (normalized internally).
pub fn ui_profile_of(samples: &[SpectrumField], delta_grid: &[f64], p: f64) -> Result<UIProfile> {
    if !(p >= 2.0) {
        return Err(invalid("p", format!("must be at least 2, got {p}")));
    }
    if delta_grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(invalid("delta_grid", "measures must lie in [0, 1]"));
    }
    let first = samples.first().ok_or(Error::EmptyInput("samples"))?;
    let dim = first.dim();
    let max_k = samples.iter().map(|s| s.max_abs_k()).max().unwrap_or(0);
    let nt = resolved_len(max_k * max_k * dim as i64);
    let nx = resolved_len(max_k);
    let per_sample: Vec<(Vec<f64>, f64)> = samples
        .par_iter()
        .map(|u0| -> Result<(Vec<f64>, f64)> {
            let norm = u0.l2_norm();
            if norm == 0.0 {
                return Err(Error::EmptyInput("sample data"));
            }
            let u0 = u0.scale(Complex64::new(1.0 / norm, 0.0));
            let grid = u0.free_evolve()?.evaluate_grid(nt, nx)?;
            let mut dens: Vec<f64> = grid.data.iter().map(|v| v.norm_sqr()).collect();
            let moment = match even_exponent(p) {
                Some(q) => even_moment(&u0, q)?,
                None => dens.iter().map(|s| s.powf(p / 2.0)).sum::<f64>() / dens.len() as f64,
            };
            dens.sort_by(|a, b| b.total_cmp(a));
            let total: f64 = dens.iter().sum();
            let mut prefix = Vec::with_capacity(dens.len() + 1);
            prefix.push(0.0);
            for d in &dens {
                prefix.push(prefix.last().unwrap() + d);
            }
            let masses = delta_grid
                .iter()
                .map(|&delta| {
                    let cells = delta * dens.len() as f64;
                    let whole = (cells.floor() as usize).min(dens.len());
                    let frac = cells - whole as f64;
                    let extra = if whole < dens.len() {
                        frac * dens[whole]
                    } else {
                        0.0
                    };
                    ((prefix[whole] + extra) / total).min(1.0)
                })
                .collect();
            Ok((masses, moment))
        })
        .collect::<Result<_>>()?;
    let mut worst = vec![0.0f64; delta_grid.len()];
    let mut moment_bound = 0.0f64;
    for (masses, moment) in &per_sample {
        for (w, m) in worst.iter_mut().zip(masses) {
            *w = w.max(*m);
        }
        moment_bound = moment_bound.max(*moment);
    }
    let grid_shape = std::iter::once(nt)
        .chain(std::iter::repeat_n(nx, dim))
        .collect();
    Ok(UIProfile {
        dim,
        freq_bound: max_k,
        p,
        seed: None,
        sample_count: samples.len(),
        delta_grid: delta_grid.to_vec(),
        worst_mass: worst,
        moment_bound,
        grid_shape,
    })
}

/// Profile of `sample_count` random unit data supported in `|k| ≤ F`.
pub fn ui_profile(
    dim: usize,
    freq_bound: i64,
    sample_count: usize,
    delta_grid: &[f64],
    p: f64,
    seed: u64,
) -> Result<UIProfile> {
    if sample_count == 0 {
        return Err(invalid("sample_count", "must be positive"));
    }
    if freq_bound < 0 {
        return Err(invalid("freq_bound", "must be nonnegative"));
    }
    let ks = frequency_ball(dim, freq_bound)?;
    let samples = (0..sample_count)
        .map(|i| random_unit_data(&mut sample_rng(seed, i as u64), dim, &ks))
        .collect::<Result<Vec<_>>>()?;
    let mut prof = ui_profile_of(&samples, delta_grid, p)?;
    prof.freq_bound = freq_bound;
    prof.seed = Some(seed);
    Ok(prof)
}

/// `‖e^{itΔ}u₀‖_{L^p} / ‖u₀‖_{L²}` for even `p`.
pub fn lp_ratio(u0: &SpectrumField, p: u32) -> Result<f64> {
    let norm = u0.l2_norm();
    if norm == 0.0 {
        return Err(Error::EmptyInput("data"));
    }
    Ok(even_moment(u0, p)?.powf(1.0 / p as f64) / norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzRow {
    pub freq_bound: i64,
    pub sup_ratio: f64,
    pub argmax: String,
    pub random_sup: f64,
    pub single_mode: f64,
    pub mode_pair: Option<f64>,
    pub flat_ball: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzScan {
    pub dim: usize,
    pub p: u32,
    pub seed: u64,
    pub sample_count: usize,
    pub rows: Vec<StrichartzRow>,
}

/// Empirical `sup ‖e^{itΔ}u₀‖_{L^p}/‖u₀‖` over random data and the designed
/// candidates (one mode, two adjacent modes, the flat ball).
pub fn strichartz_scan(
    dim: usize,
    p: u32,
    freq_bounds: &[i64],
    sample_count: usize,
    seed: u64,
) -> Result<StrichartzScan> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(invalid(
            "p",
            format!("must be a positive even integer, got {p}"),
        ));
    }
    if freq_bounds.iter().any(|&f| f < 0) {
        return Err(invalid("freq_bounds", "must be nonnegative"));
    }
    let one = Complex64::new(1.0, 0.0);
    let rows = freq_bounds
        .iter()
        .map(|&f| -> Result<StrichartzRow> {
            let ks = frequency_ball(dim, f)?;
            let ratios: Vec<f64> = (0..sample_count)
                .into_par_iter()
                .map(|i| {
                    lp_ratio(
                        &random_unit_data(&mut sample_rng(seed, i as u64), dim, &ks)?,
                        p,
                    )
                })
                .collect::<Result<_>>()?;
            let random_sup = ratios.iter().copied().fold(0.0, f64::max);
            let zero = IntVector::zeros(dim);
            let single_mode = lp_ratio(&SpectrumField::spatial(dim, [(zero.clone(), one)])?, p)?;
            let mode_pair = if f >= 1 {
                Some(lp_ratio(
                    &SpectrumField::spatial(dim, [(zero, one), (IntVector::unit(dim, 0), one)])?,
                    p,
                )?)
            } else {
                None
            };
            let flat_ball = lp_ratio(
                &SpectrumField::spatial(dim, ks.iter().map(|k| (k.clone(), one)))?,
                p,
            )?;
            let mut best = ("random", random_sup);
            for (name, v) in [
                ("single_mode", Some(single_mode)),
                ("mode_pair", mode_pair),
                ("flat_ball", Some(flat_ball)),
            ] {
                if let Some(v) = v {
                    if v > best.1 {
                        best = (name, v);
                    }
                }
            }
            Ok(StrichartzRow {
                freq_bound: f,
                sup_ratio: best.1,
                argmax: best.0.to_string(),
                random_sup,
                single_mode,
                mode_pair,
                flat_ball,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StrichartzScan {
        dim,
        p,
        seed,
        sample_count,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YNormReport {
    pub freq_bound: i64,
    pub basis_size: usize,
    pub power_iteration: f64,
    pub dense: f64,
    pub iterations: usize,
}

const POWER_MAX_ITERATIONS: usize = 100_000;

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn power_iteration(g: &DMatrix<Complex64>, seed: u64) -> (f64, usize) {
    let n = g.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(n, |_, _| complex_gaussian(&mut rng));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    let mut stable = 0;
    for iter in 1..=POWER_MAX_ITERATIONS {
        let w = g * &v;
        let next = v.dotc(&w).re;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, iter);
        }
        v = w / Complex64::new(norm, 0.0);
        if (next - lambda).abs() <= 1e-15 * next.abs().max(1.0) {
            stable += 1;
            if stable >= 5 {
                return (next, iter);
            }
        } else {
            stable = 0;
        }
        lambda = next;
    }
    (lambda, POWER_MAX_ITERATIONS)
}

/// Truncated norm of `u₀ ↦ χ e^{itΔ}u₀` on `|k| ≤ F`, given `|χ|²`.
pub fn y_norm_estimate(chi_sq: &Multiplier, freq_bound: i64) -> Result<YNormReport> {
    let setup = ObservationSetup::new(
        chi_sq.clone(),
        AffineSublattice::full(chi_sq.dim())?,
        freq_bound,
    )?;
    let rep = gram_free(&setup)?;
    let (lambda, iterations) = power_iteration(&rep.gram, 0);
    Ok(YNormReport {
        freq_bound,
        basis_size: rep.basis.len(),
        power_iteration: lambda.max(0.0).sqrt(),
        dense: rep.lambda_max.max(0.0).sqrt(),
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiemannApproximation {
    pub level: usize,
    /// Fejér order `M = 4·level²`.
    pub degree: i64,
    pub delta: f64,
    pub epsilon: f64,
    pub approximant: SpectrumField,
    /// Normalized measure of the cells where the `δ`-oscillation is `≥ ε`.
    pub oscillation_measure: f64,
    pub sup_error_off_set: f64,
    pub sup_error: f64,
    pub chi_sup: f64,
    pub approximant_sup: f64,
}

/// Samples per cell and axis when measuring errors.
const RIEMANN_SUBSAMPLES: usize = 4;

/// Fejér mean of a spatial cell function: a trigonometric polynomial of
/// degree `4·level²` bounded by `sup |χ|`, compared with `χ` off the cells
/// where the oscillation at scale `δ = π/level` is at least `ε = 1/level`.
pub fn riemann_approximate(chi: &Grid<f64>, level: usize) -> Result<RiemannApproximation> {
    if level == 0 {
        return Err(invalid("level", "must be positive"));
    }
    let shape = &chi.shape;
    let dim = shape.len();
    if dim == 0 || shape.contains(&0) || shape.iter().product::<usize>() != chi.data.len() {
        return Err(invalid("chi", "grid shape does not match its values"));
    }
    let degree = 4 * (level * level) as i64;
    let delta = PI / level as f64;
    let epsilon = 1.0 / level as f64;
    let total = chi.data.len() as f64;
    let mut dft: Vec<Complex64> = chi.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut dft, shape, false);

    let side = 2 * degree as usize + 1;
    let freq_shape = vec![side; dim];
    let freq_count = side.pow(dim as u32);
    let mut approximant = SpectrumField::zero(dim);
    for flat in 0..freq_count {
        let mut rem = flat;
        let mut k = vec![0i64; dim];
        for slot in k.iter_mut().rev() {
            *slot = (rem % side) as i64 - degree;
            rem /= side;
        }
        let fejer: f64 = k
            .iter()
            .map(|&q| 1.0 - q.abs() as f64 / (degree + 1) as f64)
            .product();
        let idx: Vec<usize> = k
            .iter()
            .zip(shape)
            .map(|(&q, &s)| wrap_index(q, s))
            .collect();
        let factor: Complex64 = k
            .iter()
            .zip(shape)
            .map(|(&q, &s)| cell_factor(q, s))
            .product();
        let c = dft[grid_index(shape, &idx)] / total * factor * fejer;
        approximant.add_at(FreqPoint::spatial(IntVector::new(k)), c)?;
    }
    approximant.prune();
    let _ = freq_shape;

    // values at sub-cell centres through one folded inverse FFT
    let fine: Vec<usize> = shape.iter().map(|&s| s * RIEMANN_SUBSAMPLES).collect();
    let mut folded = vec![Complex64::default(); fine.iter().product()];
    for (p, a) in approximant.iter() {
        let idx: Vec<usize> =
            p.k.coords()
                .iter()
                .zip(&fine)
                .map(|(&q, &s)| wrap_index(q, s))
                .collect();
        let shift: f64 =
            p.k.coords()
                .iter()
                .zip(&fine)
                .map(|(&q, &s)| q as f64 * PI / s as f64)
                .sum();
        folded[grid_index(&fine, &idx)] += a * Complex64::from_polar(1.0, shift);
    }
    fft_nd(&mut folded, &fine, true);

    let radius: Vec<usize> = shape
        .iter()
        .map(|&s| ((delta / (TAU / s as f64)) + 1e-9).floor() as usize)
        .collect();
    let cell_grid = Grid {
        shape: shape.clone(),
        data: Vec::<f64>::new(),
    };
    let in_set: Vec<bool> = (0..chi.data.len())
        .into_par_iter()
        .map(|flat| {
            let centre = cell_grid.unflatten(flat);
            let spans: Vec<usize> = radius
                .iter()
                .zip(shape)
                .map(|(&r, &s)| (2 * r + 1).min(s))
                .collect();
            let count: usize = spans.iter().product();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for off in 0..count {
                let mut rem = off;
                let mut idx = vec![0usize; dim];
                for ax in (0..dim).rev() {
                    let o = rem % spans[ax];
                    rem /= spans[ax];
                    let start = if spans[ax] == shape[ax] {
                        0
                    } else {
                        centre[ax] + shape[ax] - radius[ax]
                    };
                    idx[ax] = (start + o) % shape[ax];
                }
                let v = chi.data[grid_index(shape, &idx)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo >= epsilon
        })
        .collect();

    let fine_grid = Grid {
        shape: fine.clone(),
        data: Vec::<f64>::new(),
    };
    let (mut err_off, mut err_all, mut approx_sup) = (0.0f64, 0.0f64, 0.0f64);
    for (flat, v) in folded.iter().enumerate() {
        let idx: Vec<usize> = fine_grid
            .unflatten(flat)
            .iter()
            .map(|i| i / RIEMANN_SUBSAMPLES)
            .collect();
        let cell = grid_index(shape, &idx);
        let err = (v - Complex64::new(chi.data[cell], 0.0)).norm();
        err_all = err_all.max(err);
        if !in_set[cell] {
            err_off = err_off.max(err);
        }
        approx_sup = approx_sup.max(v.norm());
    }
    Ok(RiemannApproximation {
        level,
        degree,
        delta,
        epsilon,
        approximant,
        oscillation_measure: in_set.iter().filter(|&&b| b).count() as f64 / total,
        sup_error_off_set: err_off,
        sup_error: err_all,
        chi_sup: chi.data.iter().fold(0.0, |m, v| m.max(v.abs())),
        approximant_sup: approx_sup,
    })
}

/// Truncated `Y`-norm of `χ − approximant` at each level, on the cell grid
/// refined by the sub-sampling factor.
pub fn riemann_y_gaps(
    chi: &Grid<f64>,
    levels: &[usize],
    freq_bound: i64,
) -> Result<Vec<(usize, f64)>> {
    let fine: Vec<usize> = chi.shape.iter().map(|&s| s * RIEMANN_SUBSAMPLES).collect();
    levels
        .iter()
        .map(|&level| {
            let approx = riemann_approximate(chi, level)?;
            let fine_grid = Grid::from_fn(fine.clone(), |idx| {
                let x: Vec<f64> = idx
                    .iter()
                    .zip(&fine)
                    .map(|(&i, &s)| TAU * (i as f64 + 0.5) / s as f64)
                    .collect();
                let coarse: Vec<usize> = idx.iter().map(|i| i / RIEMANN_SUBSAMPLES).collect();
                chi.data[grid_index(&chi.shape, &coarse)]
                    - approx.approximant.evaluate_at(0.0, &x).re
            });
            let spacetime = Grid {
                shape: std::iter::once(1).chain(fine.iter().copied()).collect(),
                data: fine_grid.data,
            };
            let y = y_norm_estimate(&Multiplier::from_amplitude_cells(&spacetime)?, freq_bound)?;
            Ok((level, y.dense))
        })
        .collect()
}
