//! Quick self-checks of a build, grouped by module.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use torobs_core::clusters::{cluster_stats, default_time_bound, verify_partition};
use torobs_core::duhamel::{
    duhamel_fourier, duhamel_identity_rhs, duhamel_quadrature, solve_periodized, PotentialSpec,
    QUADRATURE_SAMPLES,
};
use torobs_core::observability::{
    gram_free, gram_potential, lp_ratio, obs_constant_scan, sample_rng,
};
use torobs_core::{
    decompose, neighborhoods, orbit_census, AffineSublattice, CutoffSpec, IntVector, Multiplier,
    ObservationSetup, SolveOptions, SpectrumField, Sublattice,
};

use crate::config::Suite;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn(u64) -> Result<String, String>;

fn lattice_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("census_matches_determinant", census_matches_determinant),
        ("covolume_duality", covolume_duality),
        ("hnf_canonical", hnf_canonical),
        ("double_perp_is_saturation", double_perp_is_saturation),
    ]
}

fn cluster_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("reference_decomposition", reference_decomposition),
        ("partition", partition),
        ("separation", separation),
    ]
}

fn spectral_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("galilean_group_law", galilean_group_law),
        ("free_flow_intertwining", free_flow_intertwining),
        ("xb_monotone_in_b", xb_monotone),
    ]
}

fn duhamel_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("kernel_vs_quadrature", kernel_vs_quadrature),
        ("solver_residual", solver_residual),
    ]
}

fn observability_checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("identity_gram", identity_gram),
        ("single_mode_constant", single_mode_constant),
        ("closed_form_vs_quadrature", closed_vs_quadrature),
        ("scan_monotone", scan_monotone),
        ("l4_two_modes", l4_two_modes),
    ]
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    let groups: Vec<(&'static str, Vec<(&'static str, CheckFn)>)> = vec![
        ("lattice", lattice_checks()),
        ("clusters", cluster_checks()),
        ("spectral", spectral_checks()),
        ("duhamel", duhamel_checks()),
        ("observability", observability_checks()),
    ];
    let wanted = |name: &str| match suite {
        Suite::All => true,
        Suite::Lattice => name == "lattice",
        Suite::Clusters => name == "clusters",
        Suite::Spectral => name == "spectral",
        Suite::Duhamel => name == "duhamel",
        Suite::Observability => name == "observability",
    };
    groups
        .into_iter()
        .filter(|(g, _)| wanted(g))
        .flat_map(|(g, checks)| {
            checks.into_iter().map(move |(name, f)| {
                let (passed, detail) = match f(seed) {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                Check {
                    suite: g,
                    name,
                    passed,
                    detail,
                }
            })
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn box_vectors(d: usize, r: i64) -> Vec<IntVector> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                (-r..=r).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out.into_iter().map(IntVector::new).collect()
}

fn random_lattice(seed: u64, i: u64, d: usize) -> Result<Sublattice, String> {
    let mut rng = sample_rng(seed, i);
    let rank = rng.random_range(1..=d);
    let gens: Vec<IntVector> = (0..rank)
        .map(|_| IntVector::new((0..d).map(|_| rng.random_range(-4..=4)).collect()))
        .collect();
    Sublattice::from_generators(d, &gens).map_err(s)
}

fn census_matches_determinant(_: u64) -> Result<String, String> {
    let mut count = 0;
    for d in [2, 3] {
        for v in box_vectors(d, 2) {
            if v.is_zero() {
                continue;
            }
            let line = Sublattice::from_generators(d, &[v])
                .map_err(s)?
                .saturate()
                .map_err(s)?;
            for lat in [line.perp().map_err(s)?, line] {
                let census = orbit_census(&lat).map_err(s)?;
                let det = lat.gram_determinant().map_err(s)?;
                ensure(census.class_count as i64 == det, || {
                    format!(
                        "{:?}: {} classes, det {det}",
                        lat.basis(),
                        census.class_count
                    )
                })?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} lattices"))
}

fn covolume_duality(seed: u64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let lat = random_lattice(seed, i, 2 + (i as usize) % 3)?
            .saturate()
            .map_err(s)?;
        let gap =
            (lat.perp().map_err(s)?.covolume().map_err(s)? - lat.covolume().map_err(s)?).abs();
        worst = worst.max(gap);
    }
    ensure(worst <= 1e-9, || format!("gap {worst:e}"))?;
    Ok(format!("max gap {worst:.1e}"))
}

fn hnf_canonical(seed: u64) -> Result<String, String> {
    for i in 0..100 {
        let d = 2 + (i as usize) % 3;
        let lat = random_lattice(seed, i, d)?;
        let b = lat.basis().to_vec();
        let mut mixed: Vec<IntVector> = b.iter().rev().cloned().collect();
        if mixed.len() >= 2 {
            mixed[0] = mixed[0]
                .checked_add(&mixed[1].checked_scale(3).map_err(s)?)
                .map_err(s)?;
            mixed[1] = mixed[1].neg();
        }
        mixed.push(IntVector::zeros(d));
        let again = Sublattice::from_generators(d, &mixed).map_err(s)?;
        ensure(again == lat, || format!("basis {b:?} not canonical"))?;
    }
    Ok("100 lattices".into())
}

fn double_perp_is_saturation(seed: u64) -> Result<String, String> {
    for i in 0..100 {
        let lat = random_lattice(seed, 1000 + i, 2 + (i as usize) % 3)?;
        let pp = lat.perp().map_err(s)?.perp().map_err(s)?;
        ensure(pp == lat.saturate().map_err(s)?, || {
            format!("{:?}", lat.basis())
        })?;
    }
    Ok("100 lattices".into())
}

fn reference_decomposition(_: u64) -> Result<String, String> {
    let dec = decompose(&AffineSublattice::full(1).map_err(s)?, 1, 60).map_err(s)?;
    let mut sizes: Vec<usize> = dec.clusters.iter().map(|c| c.points.len()).collect();
    sizes.sort_unstable();
    let mut expected = vec![1; 20];
    expected.push(101);
    ensure(sizes == expected, || format!("sizes {sizes:?}"))?;
    Ok("101 + 20 x 1".into())
}

fn partition(_: u64) -> Result<String, String> {
    for (d, f) in [(1, 80), (2, 12), (3, 5)] {
        let dec = decompose(&AffineSublattice::full(d).map_err(s)?, 1, f).map_err(s)?;
        ensure(verify_partition(&dec).map_err(s)?, || {
            format!("d={d} F={f}")
        })?;
    }
    Ok("d = 1, 2, 3".into())
}

fn separation(_: u64) -> Result<String, String> {
    for (d, f, r) in [(1, 200, 1), (1, 200, 2), (2, 20, 1)] {
        let dec = decompose(&AffineSublattice::full(d).map_err(s)?, r, f).map_err(s)?;
        let stats = cluster_stats(&dec).map_err(s)?;
        ensure(
            stats
                .min_separation_sq
                .is_none_or(|x| x > dec.reach().pow(2)),
            || {
                format!(
                    "d={d} R={r}: clusters at distance^2 {:?}",
                    stats.min_separation_sq
                )
            },
        )?;
        let split = neighborhoods(&dec, default_time_bound(&dec)).map_err(s)?;
        let gap = (10 * r).pow(2);
        ensure(split.min_separation_sq(gap + 1).is_none(), || {
            format!("d={d} R={r}: neighborhoods touch")
        })?;
    }
    Ok("clusters > 100R, neighborhoods > 10R".into())
}

fn random_field(
    seed: u64,
    i: u64,
    d: usize,
    n_max: i64,
    k_max: i64,
    count: usize,
) -> SpectrumField {
    SpectrumField::random(&mut sample_rng(seed, i), d, n_max, k_max, count)
}

fn galilean_group_law(seed: u64) -> Result<String, String> {
    for i in 0..30 {
        let d = 1 + (i as usize) % 3;
        let f = random_field(seed, i, d, 10, 5, 12);
        let mut rng = sample_rng(seed, 500 + i);
        let p = IntVector::new((0..d).map(|_| rng.random_range(-4..=4)).collect());
        let q = IntVector::new((0..d).map(|_| rng.random_range(-4..=4)).collect());
        let lhs = f.galilean(&p).map_err(s)?.galilean(&q).map_err(s)?;
        let rhs = f.galilean(&p.checked_add(&q).map_err(s)?).map_err(s)?;
        ensure(lhs == rhs, || format!("p={p} q={q}"))?;
        ensure(
            f.galilean(&p).map_err(s)?.galilean(&p.neg()).map_err(s)? == f,
            || "inverse".into(),
        )?;
    }
    Ok("30 fields".into())
}

fn free_flow_intertwining(seed: u64) -> Result<String, String> {
    for i in 0..30 {
        let d = 1 + (i as usize) % 3;
        let u0 = random_field(seed, i, d, 0, 5, 6);
        let p = IntVector::unit(d, 0)
            .checked_scale(1 + i as i64 % 3)
            .map_err(s)?;
        let lhs = u0.free_evolve().map_err(s)?.galilean(&p).map_err(s)?;
        let shifted = SpectrumField::mode(0, p, Complex64::new(1.0, 0.0))
            .multiply(&u0)
            .map_err(s)?;
        ensure(lhs == shifted.free_evolve().map_err(s)?, || {
            format!("field {i}")
        })?;
    }
    Ok("30 fields".into())
}

fn xb_monotone(seed: u64) -> Result<String, String> {
    for i in 0..30 {
        let f = random_field(seed, i, 2, 20, 5, 20);
        let norms: Vec<f64> = [0.0, 0.25, 0.5, 0.6, 1.0]
            .iter()
            .map(|&b| f.xb_norm(b))
            .collect();
        ensure(norms.windows(2).all(|w| w[0] <= w[1]), || {
            format!("{norms:?}")
        })?;
    }
    Ok("30 fields".into())
}

fn kernel_vs_quadrature(seed: u64) -> Result<String, String> {
    let spec = CutoffSpec::default();
    let mut worst = 0.0f64;
    for i in 0..4 {
        let f = random_field(seed, i, 1 + (i as usize) % 2, 4, 2, 4);
        if f.is_empty() {
            continue;
        }
        let oracle = duhamel_quadrature(&f, &spec, QUADRATURE_SAMPLES).map_err(s)?;
        let scale = oracle.l2_norm();
        let kernel = duhamel_fourier(&f, &spec);
        let identity = duhamel_identity_rhs(&f, &spec).map_err(s)?;
        worst = worst
            .max(kernel.sub(&oracle).map_err(s)?.l2_norm() / scale)
            .max(identity.sub(&oracle).map_err(s)?.l2_norm() / scale);
    }
    ensure(worst <= 1e-6, || format!("relative error {worst:e}"))?;
    Ok(format!("relative error {worst:.1e}"))
}

fn solver_residual(_: u64) -> Result<String, String> {
    let u0 = SpectrumField::mode(0, IntVector::new(vec![1]), Complex64::new(1.0, 0.0));
    let v = PotentialSpec::cosines(1, &[(IntVector::new(vec![1]), 0.3)]).map_err(s)?;
    let opts = SolveOptions::default();
    let rep = solve_periodized(
        &u0,
        &v,
        &Sublattice::full(1).map_err(s)?,
        None,
        &CutoffSpec::default(),
        &opts,
    )
    .map_err(s)?;
    ensure(rep.residual_xb <= opts.tol, || {
        format!("residual {:e}", rep.residual_xb)
    })?;
    Ok(format!(
        "{} iterations, residual {:.1e}",
        rep.iterations, rep.residual_xb
    ))
}

fn identity_gram(_: u64) -> Result<String, String> {
    let setup = ObservationSetup::new(
        Multiplier::constant(2, 1.0).map_err(s)?,
        AffineSublattice::full(2).map_err(s)?,
        3,
    )
    .map_err(s)?;
    let rep = gram_free(&setup).map_err(s)?;
    let err = rep
        .eigenvalues
        .iter()
        .map(|l| (l - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(err <= 1e-12, || format!("eigenvalue error {err:e}"))?;
    Ok(format!("{} modes", rep.basis.len()))
}

fn single_mode_constant(_: u64) -> Result<String, String> {
    let m = Multiplier::indicator(vec![4, 8], &[1..3, 2..7]).map_err(s)?;
    let expected = (2.0 * 5.0 / 32.0f64).sqrt();
    let gamma = AffineSublattice::new(IntVector::new(vec![3]), Sublattice::zero(1).map_err(s)?)
        .map_err(s)?;
    let rep = gram_free(&ObservationSetup::new(m, gamma, 0).map_err(s)?).map_err(s)?;
    let err = (rep.obs_constant - expected).abs();
    ensure(err <= 1e-10, || format!("error {err:e}"))?;
    Ok(format!("error {err:.1e}"))
}

fn window() -> Result<Multiplier, String> {
    Multiplier::indicator(vec![8, 16], &[0..3, 0..8]).map_err(s)
}

fn closed_vs_quadrature(_: u64) -> Result<String, String> {
    let setup =
        ObservationSetup::new(window()?, AffineSublattice::full(1).map_err(s)?, 6).map_err(s)?;
    let a = gram_free(&setup).map_err(s)?;
    let b = gram_potential(&setup).map_err(s)?;
    let err = (&a.gram - &b.gram)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    ensure(err <= 1e-8, || format!("difference {err:e}"))?;
    Ok(format!("difference {err:.1e}"))
}

fn scan_monotone(_: u64) -> Result<String, String> {
    let setup =
        ObservationSetup::new(window()?, AffineSublattice::full(1).map_err(s)?, 1).map_err(s)?;
    let rows = obs_constant_scan(&setup, &[1, 2, 4, 8]).map_err(s)?;
    let c: Vec<f64> = rows.iter().map(|r| r.obs_constant).collect();
    ensure(c.windows(2).all(|w| w[1] <= w[0]), || format!("{c:?}"))?;
    Ok(format!("{c:.4?}"))
}

fn l4_two_modes(_: u64) -> Result<String, String> {
    let one = Complex64::new(1.0, 0.0);
    let u0 = SpectrumField::spatial(
        1,
        [
            (IntVector::new(vec![1]), one),
            (IntVector::new(vec![4]), one),
        ],
    )
    .map_err(s)?;
    let r4 = lp_ratio(&u0, 4).map_err(s)?.powi(4);
    ensure((r4 - 1.5).abs() <= 1e-6, || format!("ratio^4 = {r4}"))?;
    Ok(format!("ratio^4 = {r4:.12}"))
}
