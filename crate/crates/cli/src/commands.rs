//! Experiment dispatch.

use serde_json::json;
use torobs_core::clusters::{cluster_stats, default_time_bound, verify_partition};
use torobs_core::duhamel::solve_periodized;
use torobs_core::observability::{
    gram, obs_constant_scan, strichartz_scan, ui_profile, y_norm_estimate,
};
use torobs_core::report::fmt_f64;
use torobs_core::{
    decompose, neighborhoods, orbit_census, Error, Multiplier, ObservationSetup, SolveOptions,
};

use crate::config::{ConfigError, RunConfig, ScanKind};
use crate::report::{Outcome, Table};
use crate::verify;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A computation failed to meet its numerical target.
    Numeric {
        stage: String,
        message: String,
    },
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numeric { stage, message } => write!(f, "{stage} failed: {message}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } | CliError::Io(_) => 1,
        }
    }
}

/// Splits library errors into configuration problems (attributed to
/// `field` unless the library names one) and numerical failures.
fn lift(stage: &'static str, field: &'static str) -> impl Fn(Error) -> CliError {
    move |e| match e {
        Error::InvalidParameter { name, ref reason } => {
            CliError::Config(ConfigError::field(name, reason.clone()))
        }
        Error::EmptyDimension
        | Error::DimensionMismatch { .. }
        | Error::NotPrimitive
        | Error::EmptyInput(_)
        | Error::NotSpatial(_)
        | Error::NegativeMultiplier(_)
        | Error::InsufficientTimeBound { .. } => {
            CliError::Config(ConfigError::field(field, e.to_string()))
        }
        _ => CliError::Numeric {
            stage: stage.to_string(),
            message: e.to_string(),
        },
    }
}

fn vec_cell(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn clusters(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let gamma = cfg.gamma_lattice()?;
    let dec = decompose(&gamma, cfg.r, cfg.f).map_err(lift("clusters", "f"))?;
    let stats = cluster_stats(&dec).map_err(lift("clusters", "f"))?;
    let time_bound = cfg.time_bound.unwrap_or_else(|| default_time_bound(&dec));
    let split = neighborhoods(&dec, time_bound).map_err(lift("clusters", "time_bound"))?;
    let near_gap_sq = (10 * cfg.r).pow(2);
    let near_violation = split.min_separation_sq(near_gap_sq + 1);
    let partition = verify_partition(&dec).map_err(lift("clusters", "f"))?;

    let mut table = Table::new(
        "clusters",
        &[
            "id",
            "size",
            "diameter_sq",
            "kind",
            "truncated",
            "hull_rank",
            "max_shadow_projection",
        ],
    );
    for r in &stats.records {
        table.push(vec![
            r.id.to_string(),
            r.size.to_string(),
            r.diameter_sq.to_string(),
            r.kind.as_str().to_string(),
            r.truncated.to_string(),
            r.hull_rank.to_string(),
            fmt_f64(r.max_shadow_projection),
        ]);
    }
    let mut failures = Vec::new();
    if !partition {
        failures.push("cluster partition".to_string());
    }
    if stats
        .min_separation_sq
        .is_some_and(|s| s <= dec.reach().pow(2))
    {
        failures.push("cluster separation".to_string());
    }
    if near_violation.is_some() {
        failures.push("neighborhood separation".to_string());
    }
    let result = json!({
        "cluster_count": stats.records.len(),
        "point_count": dec.point_count(),
        "flat_count": stats.flat_count,
        "sharp_count": stats.sharp_count,
        "truncated_count": stats.truncated_count,
        "reach": dec.reach(),
        "min_separation_sq": stats.min_separation_sq,
        "separation_cap_sq": stats.separation_cap_sq,
        "time_bound": time_bound,
        "box_size": split.box_size(),
        "near_size": split.near_size(),
        "far_size": split.far_size(),
        "neighborhood_min_separation_sq": near_violation,
        "partition_ok": partition,
    });
    Ok(Outcome {
        result,
        tables: vec![table],
        failures,
    })
}

pub fn orbits(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lat = cfg.orbit_lattice()?;
    let census = orbit_census(&lat).map_err(lift("orbits", "lattice"))?;
    let perp = lat.perp().map_err(lift("orbits", "lattice"))?;
    let det_sq = lat.gram_determinant().map_err(lift("orbits", "lattice"))?;
    let covolume = lat.covolume().map_err(lift("orbits", "lattice"))?;
    let mut table = Table::new("orbits", &["class", "offset"]);
    for (i, rep) in census.class_reps.iter().enumerate() {
        table.push(vec![i.to_string(), vec_cell(rep.offset().coords())]);
    }
    let mut failures = Vec::new();
    if census.class_count as i64 != det_sq {
        failures.push("orbit count".to_string());
    }
    let result = json!({
        "basis": lat.basis(),
        "rank": lat.rank(),
        "perp_basis": perp.basis(),
        "gram_determinant": det_sq,
        "covolume": covolume,
        "class_count": census.class_count,
    });
    Ok(Outcome {
        result,
        tables: vec![table],
        failures,
    })
}

fn observation_setup(cfg: &RunConfig, freq_bound: i64) -> Result<ObservationSetup, CliError> {
    let mult = Multiplier::from_spec(cfg.chi_spec()).map_err(lift("gram", "chi"))?;
    let setup = ObservationSetup::new(mult, cfg.gamma_lattice()?, freq_bound)
        .map_err(lift("gram", "chi"))?;
    match &cfg.potential {
        Some(v) => setup
            .with_potential(v.clone())
            .map_err(lift("gram", "potential")),
        None => Ok(setup),
    }
}

pub fn gram_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rep = gram(&observation_setup(cfg, cfg.f)?).map_err(lift("gram", "f"))?;
    let mut eig = Table::new("eigenvalues", &["index", "eigenvalue"]);
    for (i, l) in rep.eigenvalues.iter().enumerate() {
        eig.push(vec![i.to_string(), fmt_f64(*l)]);
    }
    let mut basis = Table::new("basis", &["index", "k"]);
    for (i, k) in rep.basis.iter().enumerate() {
        basis.push(vec![i.to_string(), vec_cell(k.coords())]);
    }
    let failures = rep.violations();
    let mut out = Outcome::ok(&rep, vec![eig, basis]);
    out.failures = failures;
    Ok(out)
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let gamma = cfg.gamma_lattice()?;
    let spec = cfg.cutoff_spec()?;
    let opts = SolveOptions {
        b: cfg.b,
        tol: cfg.tol,
        max_iterations: cfg.max_iterations,
        freq_bound: cfg.f,
        time_bound: cfg.time_bound,
        max_tau_halvings: cfg.max_tau_halvings,
    };
    let rep = solve_periodized(
        &cfg.initial_data(),
        &cfg.potential_spec(),
        gamma.direction(),
        None,
        &spec,
        &opts,
    )
    .map_err(lift("solve", "initial"))?;
    let mut solution = Table::new("solution", &["n", "k", "re", "im"]);
    for (p, a) in rep.solution.iter() {
        solution.push(vec![
            p.n.to_string(),
            vec_cell(p.k.coords()),
            fmt_f64(a.re),
            fmt_f64(a.im),
        ]);
    }
    let mut history = Table::new("residuals", &["iteration", "residual_xb"]);
    for (i, r) in rep.residual_history.iter().enumerate() {
        history.push(vec![(i + 1).to_string(), fmt_f64(*r)]);
    }
    let result = json!({
        "cutoff": spec,
        "iterations": rep.iterations,
        "residual_xb": rep.residual_xb,
        "contraction_estimate": rep.contraction_estimate,
        "half_width": rep.half_width,
        "plateau_radius": rep.plateau_radius,
        "time_bound": rep.time_bound,
        "basis_size": rep.basis_size,
        "solution_modes": rep.solution.len(),
        "solution_l2": rep.solution.l2_norm(),
    });
    Ok(Outcome::ok(result, vec![solution, history]))
}

pub fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = &cfg.scan;
    match sc.kind {
        ScanKind::Strichartz => {
            if sc.p.fract() != 0.0 || !(sc.p as u32).is_multiple_of(2) {
                return Err(ConfigError::field(
                    "scan.p",
                    "must be an even integer for the Strichartz scan",
                )
                .into());
            }
            let rep = strichartz_scan(cfg.d, sc.p as u32, &sc.freq_bounds, sc.samples, cfg.seed)
                .map_err(lift("scan", "scan"))?;
            let mut t = Table::new(
                "strichartz",
                &[
                    "freq_bound",
                    "sup_ratio",
                    "argmax",
                    "random_sup",
                    "single_mode",
                    "mode_pair",
                    "flat_ball",
                ],
            );
            for r in &rep.rows {
                t.push(vec![
                    r.freq_bound.to_string(),
                    fmt_f64(r.sup_ratio),
                    r.argmax.clone(),
                    fmt_f64(r.random_sup),
                    fmt_f64(r.single_mode),
                    r.mode_pair.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(r.flat_ball),
                ]);
            }
            Ok(Outcome::ok(rep, vec![t]))
        }
        ScanKind::Ui => {
            let rep = ui_profile(cfg.d, cfg.f, sc.samples, &sc.deltas, sc.p, cfg.seed)
                .map_err(lift("scan", "scan"))?;
            let mut t = Table::new("ui", &["delta", "worst_mass"]);
            for (d, m) in rep.delta_grid.iter().zip(&rep.worst_mass) {
                t.push(vec![fmt_f64(*d), fmt_f64(*m)]);
            }
            Ok(Outcome::ok(rep, vec![t]))
        }
        ScanKind::Ynorm => {
            let mult = Multiplier::from_spec(cfg.chi_spec()).map_err(lift("scan", "chi"))?;
            let rows = sc
                .freq_bounds
                .iter()
                .map(|&f| y_norm_estimate(&mult, f))
                .collect::<Result<Vec<_>, _>>()
                .map_err(lift("scan", "scan.freq_bounds"))?;
            let mut t = Table::new(
                "ynorm",
                &[
                    "freq_bound",
                    "basis_size",
                    "power_iteration",
                    "dense",
                    "iterations",
                ],
            );
            for r in &rows {
                t.push(vec![
                    r.freq_bound.to_string(),
                    r.basis_size.to_string(),
                    fmt_f64(r.power_iteration),
                    fmt_f64(r.dense),
                    r.iterations.to_string(),
                ]);
            }
            Ok(Outcome::ok(rows, vec![t]))
        }
        ScanKind::Obs => {
            let setup = observation_setup(cfg, sc.freq_bounds[0])?;
            let rows = obs_constant_scan(&setup, &sc.freq_bounds)
                .map_err(lift("scan", "scan.freq_bounds"))?;
            let mut t = Table::new(
                "obs",
                &[
                    "freq_bound",
                    "basis_size",
                    "lambda_min",
                    "lambda_max",
                    "obs_constant",
                ],
            );
            for r in &rows {
                t.push(vec![
                    r.freq_bound.to_string(),
                    r.basis_size.to_string(),
                    fmt_f64(r.lambda_min),
                    fmt_f64(r.lambda_max),
                    fmt_f64(r.obs_constant),
                ]);
            }
            Ok(Outcome::ok(rows, vec![t]))
        }
    }
}

pub fn verify_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let checks = verify::run_suite(cfg.suite, cfg.seed);
    let mut t = Table::new("verify", &["suite", "check", "passed", "detail"]);
    for c in &checks {
        t.push(vec![
            c.suite.to_string(),
            c.name.to_string(),
            c.passed.to_string(),
            c.detail.clone(),
        ]);
    }
    let failures = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}/{}", c.suite, c.name))
        .collect();
    let mut out = Outcome::ok(&checks, vec![t]);
    out.failures = failures;
    Ok(out)
}
