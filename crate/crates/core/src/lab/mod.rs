//! Experiment orchestration behind the command-line front end.

pub mod config;
pub mod report;
pub mod svg;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::conjugacy::{conjugacy_checks, estimate_t, h_samples, ArclengthLeaf, ConjugacyInputs};
use crate::foliation::{
    direction_by_iteration, growth_diagnostics, no_crossing_check, product_structure_check,
    seed_foliation, unstable_leaf, CenterLeaf, GrowthInputs, IterationMode, LeafBuilder,
};
use crate::geometry::{
    classify_linearisation, Direction, GeometryError, IntMatrix, LatticeVector, LinearClass, Vec2,
};
use crate::incoherent::{figure_curves, AnalysisError, IncoherentAnalysis, DEFAULT_DELTA};
use crate::models::{
    cone_invariance_check, ConeAxis, ConeFamily, ConeReport, Endomorphism, IncoherentModel,
    ModelError, ModelSpec,
};
use crate::polyline::LeafPolyline;
use crate::semiconjugacy::SemiconjugacyApprox;

pub use config::{resolve, ConfigError, ConfigOverrides, ExperimentConfig, ModelKind};
pub use report::{CheckEntry, ReportEnvelope, StageStatus, Timing};

/// Half-angle of the constant cone about `v_u` for hyperbolic models.
pub const HYPERBOLIC_CONE: f64 = 0.3;
/// Half-angle of the cone about `E^u` for the incoherent model.
pub const INCOHERENT_CONE: f64 = 0.1;
/// Centre and unstable leaves in the product-structure layout.
pub const PRODUCT_LEAVES: usize = 20;
pub const UNSTABLE_LENGTH: f64 = 4.0;
pub const H_PER_LEAF: usize = 50;
pub const GROWTH_N_MAX: usize = 10;
/// Leaves in the pairwise no-crossing check.
pub const CROSSING_LEAVES: usize = 100;
pub const FIGURE_PER_SIDE: usize = 8;
pub const FIGURE_SAMPLES: usize = 200;
pub const CONTACT_ANGLE_TOL: f64 = 0.05;
/// Off-circle ODE continuation length.
pub const UNIQUENESS_ARCLENGTH: f64 = 0.05;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl LabError {
    /// Every error is an input problem; acceptance failures are reported, not raised.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: ReportEnvelope,
    pub timing: Timing,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

fn write_outputs(
    cfg: &ExperimentConfig,
    files: &[(&str, String)],
) -> Result<Vec<PathBuf>, LabError> {
    let mut out = Vec::new();
    for (name, contents) in files {
        report::write_file(&cfg.out, name, contents).map_err(|source| LabError::Io {
            path: cfg.out.join(name),
            source,
        })?;
        out.push(cfg.out.join(name));
    }
    Ok(out)
}

fn finish(
    cfg: &ExperimentConfig,
    report: ReportEnvelope,
    mut timing: Timing,
    mut files: Vec<(&str, String)>,
) -> Result<RunOutcome, LabError> {
    timing.stop();
    files.push(("report.json", report.to_json()));
    files.push(("timing.json", timing.to_json()));
    let files = write_outputs(cfg, &files)?;
    Ok(RunOutcome {
        report,
        timing,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub matrix: IntMatrix,
    pub class: LinearClass,
    pub det: i64,
    pub trace: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_s: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_u: Option<[f64; 2]>,
}

pub fn classify(matrix: IntMatrix) -> Result<Classification, LabError> {
    let lin = classify_linearisation(matrix)?;
    let e = lin.eigen;
    Ok(Classification {
        matrix,
        class: lin.class,
        det: matrix.det(),
        trace: matrix.trace(),
        lambda_s: e.map(|e| e.lambda_s),
        lambda_u: e.map(|e| e.lambda_u),
        v_s: e.map(|e| [e.v_s.x, e.v_s.y]),
        v_u: e.map(|e| [e.v_u.x, e.v_u.y]),
    })
}

/// The cone used by the checks: about `E^u` for the incoherent model, about `v_u` otherwise.
pub fn default_cone(model: &dyn Endomorphism, spec: &ModelSpec) -> Result<ConeFamily, LabError> {
    let cone = match spec {
        ModelSpec::Incoherent { c } => {
            let a = IncoherentAnalysis::new(IncoherentModel::new(*c)?, 40, DEFAULT_DELTA)?;
            ConeFamily::new(
                ConeAxis::field(move |p| a.unstable_direction(p).direction),
                INCOHERENT_CONE,
            )
        }
        _ => {
            let e = model.linearisation().hyperbolic_eigen()?;
            ConeFamily::new(
                ConeAxis::Constant(Direction::from_vector(e.v_u)),
                HYPERBOLIC_CONE,
            )
        }
    };
    Ok(cone.expect("half-angles are in range"))
}

fn cone_entry(r: &ConeReport) -> CheckEntry {
    CheckEntry::new("cone_invariance", r.passed, r.worst_margin_angle, 0.0).with_detail(r)
}

fn model_spec_any(cfg: &ExperimentConfig) -> ModelSpec {
    match cfg.model {
        Some(ModelKind::Incoherent) => ModelSpec::Incoherent { c: cfg.c },
        Some(ModelKind::Linear) => ModelSpec::Linear {
            matrix: cfg.int_matrix(),
        },
        _ => ModelSpec::Perturbed {
            matrix: cfg.int_matrix(),
            eps: cfg.eps,
        },
    }
}

pub fn run_verify_cone(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let spec = model_spec_any(cfg);
    let model = spec.build()?;
    let cone = default_cone(model.as_ref(), &spec)?;
    let mut timing = Timing::new("verify-cone");
    let mut report = ReportEnvelope::new("verify-cone", cfg);
    timing.start("cone");
    let r = cone_invariance_check(model.as_ref(), &cone, cfg.grid_n);
    report.check(cone_entry(&r));
    report.stage_ok("cone");
    finish(cfg, report, timing, Vec::new())
}

fn anchor_entry(a: &IncoherentAnalysis) -> CheckEntry {
    let s = a.series();
    let psi = a.model().psi();
    let k_tail = s.gamma_tail();
    let mu = psi.multiplier();
    let beta_half = s
        .beta(0.5, DEFAULT_DELTA)
        .map(|v| v.value)
        .unwrap_or(f64::NAN);
    let vals = [
        ("gamma(1/2)", s.gamma(0.5).value, 0.0, 1e-14),
        ("beta(1/2)", beta_half, 0.0, 1e-14),
        ("gamma(0)", s.gamma(0.0).value, -2.0, k_tail),
        ("psi(0)", psi.apply(0.0), 0.0, 1e-14),
        ("psi(1/2)", psi.apply(0.5), 0.5, 1e-14),
        ("psi'(0)", psi.derivative(0.0), mu, 1e-12),
        ("psi'(1/2)", psi.derivative(0.5), 1.0 / mu, 1e-12),
    ];
    let mut worst: f64 = 0.0;
    let mut passed = true;
    let mut detail = Vec::new();
    for (name, v, expect, tol) in vals {
        let err = (v - expect).abs();
        passed &= err <= tol;
        worst = worst.max(err / tol);
        detail.push(
            serde_json::json!({"name": name, "value": v, "expected": expect, "tolerance": tol}),
        );
    }
    CheckEntry::new("anchor_values", passed, worst, 1.0).with_detail(&detail)
}

/// Cohomology, bundles, partial hyperbolicity, certificate, uniqueness and the figure.
pub fn run_incoherent_report(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let model = IncoherentModel::new(cfg.c)?;
    let a = IncoherentAnalysis::new(model, cfg.depth_k, DEFAULT_DELTA)?;
    let mut timing = Timing::new("incoherent-report");
    let mut report = ReportEnvelope::new("incoherent-report", cfg);
    let tol = &cfg.tolerances;

    if !cfg.svg_only {
        timing.start("cohomology");
        let c = a.cohomology_report(10 * cfg.samples);
        report.check(
            CheckEntry::at_most("gamma_residual", c.gamma_max_residual, c.gamma_bound + 1e-9)
                .with_tail(c.gamma_bound),
        );
        report.check(
            CheckEntry::at_most("beta_residual_excess", c.beta_max_excess, 1e-9).with_detail(&c),
        );
        let beta_tail = a
            .series()
            .beta_tail(DEFAULT_DELTA)
            .map(|t| 3.0 * t)
            .unwrap_or(f64::INFINITY);
        let tail = c.gamma_bound.max(beta_tail);
        report.check(CheckEntry::at_most("cohomology_tail", tail, tol.residual).with_tail(tail));
        report.check(anchor_entry(&a));
        report.stage_ok("cohomology");

        timing.start("partial_hyperbolicity");
        let ph = a.ph_inequality_report(cfg.grid_n);
        report.check(
            CheckEntry::above("min_unstable_stretch", ph.min_unstable_stretch, 1.0)
                .with_detail(&ph),
        );
        report.check(CheckEntry::new(
            "max_center_ratio",
            ph.max_ratio < 1.0,
            ph.max_ratio,
            1.0,
        ));
        let circles_ok = ph.circles.len() == 2
            && (ph.circles[0].unstable_stretch - 2.0).abs() <= 1e-6
            && (ph.circles[0].ratio - 0.125).abs() <= 1e-6
            && (ph.circles[1].unstable_stretch - 4.0).abs() <= 1e-6
            && (ph.circles[1].ratio - 0.5).abs() <= 1e-6;
        let circle_err = ph
            .circles
            .iter()
            .zip([(2.0, 0.125), (4.0, 0.5)])
            .map(|(c, (u, r))| (c.unstable_stretch - u).abs().max((c.ratio - r).abs()))
            .fold(0.0, f64::max);
        report.check(
            CheckEntry::new("circle_values", circles_ok, circle_err, 1e-6).with_detail(&ph.circles),
        );
        let tr = a.transversality_report(cfg.grid_n, 1e-9);
        report.check(CheckEntry::above("transversality", tr.min_angle, 0.0).with_detail(&tr));
        report.stage_ok("partial_hyperbolicity");

        timing.start("splitting_invariance");
        let inv = a.invariance_report(cfg.samples, cfg.seed, tol.residual);
        report.check(CheckEntry::at_most(
            "splitting_invariance",
            inv.max_residual,
            tol.residual,
        ));
        report.stage_ok("splitting_invariance");

        timing.start("branching");
        match a.branching_certificate(0.0) {
            Ok(c) => {
                report.check(
                    CheckEntry::above("branching_separation", c.separation, 0.1).with_detail(
                        &serde_json::json!({
                            "touch_point": c.touch_point,
                            "max_tangency_defect": c.max_tangency_defect,
                            "tolerance": c.tolerance,
                        }),
                    ),
                );
                report.stage_ok("branching");
            }
            Err(e) => {
                report.check(CheckEntry::failed("branching_separation", &e.to_string()));
                report.stage_failed("branching", e);
            }
        }
        let u = a.uniqueness_report(
            cfg.samples,
            cfg.seed.wrapping_add(1),
            UNIQUENESS_ARCLENGTH,
            tol.uniqueness,
        );
        report.check(
            CheckEntry::at_most("off_circle_uniqueness", u.max_deviation, tol.uniqueness)
                .with_detail(&u),
        );
    }

    timing.start("figure");
    let mut files = Vec::new();
    match figure_curves(&a, FIGURE_PER_SIDE, FIGURE_SAMPLES) {
        Ok(curves) => {
            let meet = curves
                .iter()
                .filter(|c| (c.curve.last().y - 0.5).abs() < 1e-12)
                .count();
            let angle = curves
                .iter()
                .map(|c| c.contact_tangent_angle)
                .fold(0.0, f64::max);
            report.check(CheckEntry::new(
                "figure_curves_meeting_middle",
                meet == 2 * FIGURE_PER_SIDE,
                meet as f64,
                (2 * FIGURE_PER_SIDE) as f64,
            ));
            report.check(CheckEntry::at_most(
                "figure_contact_angle",
                angle,
                CONTACT_ANGLE_TOL,
            ));
            files.push(("figure1.svg", svg::figure1(&curves)));
            report.stage_ok("figure");
        }
        Err(e) => {
            report.check(CheckEntry::failed(
                "figure_curves_meeting_middle",
                &e.to_string(),
            ));
            report.stage_failed("figure", e);
        }
    }
    finish(cfg, report, timing, files)
}

/// Base points `π^s = 0`, `π^u ∈ [−1, 1]` and `π^u = 0`, `π^s ∈ [−1, 1]`.
pub fn product_layout(builder: &LeafBuilder<'_>, n: usize) -> (Vec<Vec2>, Vec<Vec2>) {
    let proj = builder.projections();
    let t = |i: usize| -1.0 + 2.0 * i as f64 / (n.max(2) - 1) as f64;
    (
        (0..n).map(|i| proj.point(0.0, t(i))).collect(),
        (0..n).map(|i| proj.point(t(i), 0.0)).collect(),
    )
}

pub fn random_points(n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Vec2::new(rng.gen(), rng.gen())).collect()
}

/// Geometric mean of the per-step decrease of the tangent error over `n = 3..10`.
pub fn tangent_contraction(
    model: &dyn Endomorphism,
    builder: &LeafBuilder<'_>,
    p: Vec2,
) -> Result<f64, LabError> {
    let target = direction_by_iteration(model, p, IterationMode::Center, 40)
        .map_err(|e| LabError::Config(ConfigError::Invalid(e.to_string())))?;
    let err = |n: usize| -> Result<f64, LabError> {
        Ok(builder
            .leaf_tangent(p, n)
            .map_err(|e| LabError::Config(ConfigError::Invalid(e.to_string())))?
            .distance(target))
    };
    let (e3, e10) = (err(3)?, err(10)?);
    Ok((e10 / e3).powf(1.0 / 7.0))
}

macro_rules! stage {
    ($report:expr, $name:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => {
                $report.check(CheckEntry::failed($name, &e.to_string()));
                $report.stage_failed($name, e);
                break;
            }
        }
    };
}

const COHERENT_STAGES: [&str; 10] = [
    "cone",
    "seed",
    "center_leaves",
    "unstable_leaves",
    "foliation_checks",
    "growth",
    "semiconjugacy",
    "t_estimate",
    "h_samples",
    "conjugacy",
];

/// The full hyperbolic pipeline, from cone check to leaf conjugacy.
pub fn run_coherent_suite(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let spec = cfg.hyperbolic_spec()?;
    let model = spec.build()?;
    let model = model.as_ref();
    model.linearisation().hyperbolic_eigen()?;
    let mut timing = Timing::new("coherent-suite");
    let mut report = ReportEnvelope::new("coherent-suite", cfg);
    let tol = cfg.tolerances.clone();
    let mut files: Vec<(&str, String)> = Vec::new();
    let mut centers: Vec<CenterLeaf> = Vec::new();
    let mut unstables: Vec<LeafPolyline> = Vec::new();
    let mut conj_samples = Vec::new();

    #[allow(clippy::never_loop)]
    loop {
        timing.start("cone");
        let cone = default_cone(model, &spec)?;
        let cr = cone_invariance_check(model, &cone, cfg.grid_n);
        report.check(cone_entry(&cr));
        if !cr.passed {
            report.stage_failed(
                "cone",
                format!(
                    "cone of half-angle {HYPERBOLIC_CONE} is not invariant (margin {:e} at {:?})",
                    cr.worst_margin_angle, cr.worst_margin_point
                ),
            );
            break;
        }
        report.stage_ok("cone");

        timing.start("seed");
        let seed = stage!(report, "seed", seed_foliation(model, &cone, 64));
        report.check(CheckEntry::above("seed_margin", seed.margin, 0.0).with_detail(&seed));
        report.stage_ok("seed");

        timing.start("center_leaves");
        let builder = stage!(
            report,
            "center_leaves",
            LeafBuilder::new(model, seed.seed, cfg.window)
        );
        let (cbase, ubase) = product_layout(&builder, PRODUCT_LEAVES);
        centers = stage!(
            report,
            "center_leaves",
            builder.center_leaves(&cbase, tol.leaf)
        );
        let max_gap = centers.iter().map(|c| c.gap).fold(0.0, f64::max);
        let depth = centers.iter().map(|c| c.depth).max().unwrap_or(0);
        report.check(
            CheckEntry::at_most("center_convergence", max_gap, tol.leaf)
                .with_detail(&serde_json::json!({ "depth": depth })),
        );
        report.stage_ok("center_leaves");

        timing.start("unstable_leaves");
        unstables = stage!(
            report,
            "unstable_leaves",
            ubase
                .iter()
                .map(|&p| unstable_leaf(model, p, UNSTABLE_LENGTH))
                .collect::<Result<Vec<_>, _>>()
        );
        report.stage_ok("unstable_leaves");

        timing.start("foliation_checks");
        let polys: Vec<LeafPolyline> = centers.iter().map(|c| c.leaf.clone()).collect();
        let pr = product_structure_check(&polys, &unstables);
        report.check(
            CheckEntry::new(
                "product_structure",
                pr.passed,
                pr.pairs_exactly_once as f64,
                (pr.centers * pr.unstables) as f64,
            )
            .with_detail(&pr),
        );
        let crossing_pts = random_points(CROSSING_LEAVES, cfg.seed);
        let crossing = stage!(
            report,
            "foliation_checks",
            builder.center_leaves(&crossing_pts, tol.leaf)
        );
        let crossing: Vec<LeafPolyline> = crossing.into_iter().map(|c| c.leaf).collect();
        let nc = no_crossing_check(&crossing);
        report.check(
            CheckEntry::new("no_crossing", nc.passed, nc.crossings as f64, 0.0).with_detail(&nc),
        );
        let mut inv = 0.0f64;
        let mut deck = 0.0f64;
        for c in &centers {
            inv = inv.max(stage!(
                report,
                "foliation_checks",
                builder.invariance_defect(c, tol.leaf)
            ));
            for v in [LatticeVector::new(1, 0), LatticeVector::new(0, 1)] {
                deck = deck.max(stage!(
                    report,
                    "foliation_checks",
                    builder.deck_defect(c, v)
                ));
            }
        }
        report.check(CheckEntry::at_most(
            "center_f_invariance",
            inv,
            2.0 * tol.leaf,
        ));
        report.check(CheckEntry::at_most(
            "center_deck_invariance",
            deck,
            2.0 * tol.leaf,
        ));
        let mut factor = 0.0f64;
        for p in random_points(3, cfg.seed.wrapping_add(7)) {
            factor = factor.max(stage!(
                report,
                "foliation_checks",
                tangent_contraction(model, &builder, p)
            ));
        }
        report.check(CheckEntry::new(
            "tangent_contraction",
            factor < 0.9,
            factor,
            0.9,
        ));
        report.stage_ok("foliation_checks");

        timing.start("growth");
        let deep: Vec<CenterLeaf> = stage!(
            report,
            "growth",
            centers
                .iter()
                .map(|c| {
                    let p = Vec2::new(c.base[0], c.base[1]);
                    Ok(CenterLeaf {
                        leaf: builder.backward_leaf(p, c.depth + GROWTH_N_MAX)?,
                        depth: c.depth + GROWTH_N_MAX,
                        ..c.clone()
                    })
                })
                .collect::<Result<Vec<_>, crate::foliation::FoliationError>>()
        );
        let gi = GrowthInputs {
            centers: &deep,
            unstables: &unstables,
            seed: seed.seed,
            rng_seed: cfg.seed,
        };
        let mut growth = stage!(
            report,
            "growth",
            growth_diagnostics(model, &gi, GROWTH_N_MAX)
        );
        report.stage_ok("growth");

        timing.start("semiconjugacy");
        let approx = stage!(
            report,
            "semiconjugacy",
            SemiconjugacyApprox::new(model, cfg.depth_n)
        );
        let (tail_s, tail_u) = approx.tails();
        let res = approx.residual_report(cfg.samples, cfg.seed, tol.residual);
        report.check(
            CheckEntry::at_most("semiconjugacy_residual", res.max_residual, tol.residual)
                .with_tail(res.tail_bound),
        );
        let lattice = [LatticeVector::new(1, 0), LatticeVector::new(0, 1)];
        let eq = approx.deck_equivariance_report(cfg.samples, cfg.seed, &lattice, 1e-9);
        report.check(
            CheckEntry::at_most("semiconjugacy_deck_equivariance", eq.max_defect, 1e-9)
                .with_tail(tail_s + tail_u)
                .with_detail(&eq),
        );
        let collapse = stage!(
            report,
            "semiconjugacy",
            approx.unstable_leaf_collapse(&unstables, tol.leaf)
        );
        report.check(
            CheckEntry::at_most(
                "hs_constant_on_unstable_leaves",
                collapse.max_hs_spread,
                tol.leaf,
            )
            .with_tail(tail_s)
            .with_detail(&collapse),
        );
        report.stage_ok("semiconjugacy");

        timing.start("t_estimate");
        let proj = *builder.projections();
        let mut t_runs = Vec::new();
        let mut conj_centers = Vec::new();
        for w in [cfg.window, 2.0 * cfg.window] {
            let b = stage!(report, "t_estimate", builder.with_window(w));
            let leaves = stage!(
                report,
                "t_estimate",
                b.center_leaves(&cbase, tol.conjugacy_leaf)
            );
            let arcs: Vec<ArclengthLeaf> = leaves
                .iter()
                .map(|c| ArclengthLeaf::new(c.leaf.clone(), &proj))
                .collect();
            t_runs.push(stage!(report, "t_estimate", estimate_t(&arcs, &proj)));
            if conj_centers.is_empty() {
                conj_centers = leaves;
            }
        }
        if t_runs.len() < 2 {
            break;
        }
        let drift = (t_runs[1].raw - t_runs[0].raw).abs() / t_runs[0].raw;
        report.check(CheckEntry::at_most("t_window_stability", drift, 0.05).with_detail(&t_runs));
        let t = t_runs[0].t;
        growth.t_estimate = Some(t);
        let c5 = growth.c_by_n[..=5].iter().copied().fold(0.0, f64::max);
        let c_drift = (growth.c_estimate - c5) / growth.c_estimate.max(cfg.tolerances.leaf);
        report.check(
            CheckEntry::at_most("c_estimate_stability", c_drift, 0.1).with_detail(&growth.c_by_n),
        );
        report.check(CheckEntry::new(
            "r_feasibility",
            growth.r_feasible,
            growth.r_estimate,
            growth.r_bound,
        ));
        report.check(CheckEntry::new(
            "unstable_gap_growth",
            growth.unstable_gap_growth == growth.unstable_samples,
            growth.unstable_gap_growth as f64,
            growth.unstable_samples as f64,
        ));
        report.check(
            CheckEntry::new(
                "growth_finite",
                growth.finite_nonnegative(),
                growth.c_estimate,
                f64::INFINITY,
            )
            .with_detail(&growth),
        );
        report.stage_ok("t_estimate");

        timing.start("h_samples");
        let arcs: Vec<ArclengthLeaf> = conj_centers
            .iter()
            .map(|c| ArclengthLeaf::new(c.leaf.clone(), &proj))
            .collect();
        conj_samples = stage!(
            report,
            "h_samples",
            h_samples(&approx, &arcs, H_PER_LEAF, t)
        );
        report.stage_ok("h_samples");

        timing.start("conjugacy");
        let inputs = ConjugacyInputs {
            centers: &conj_centers,
            samples: &conj_samples,
            t,
            tolerance: tol.conjugacy,
            leaf_tolerance: tol.conjugacy_leaf,
        };
        let cr = stage!(
            report,
            "conjugacy",
            conjugacy_checks(&approx, &builder, &inputs)
        );
        for c in [&cr.leaf_to_leaf, &cr.equivariance, &cr.injectivity] {
            report.check(
                CheckEntry::new(
                    &format!("conjugacy_{}", c.name),
                    c.passed,
                    c.value,
                    c.tolerance,
                )
                .with_detail(&c.worst_sample),
            );
        }
        let m = &cr.monotonicity;
        report.check(
            CheckEntry::new("conjugacy_derivative", m.passed, m.value, m.tolerance)
                .with_detail(&m.worst_sample),
        );
        report.stage_ok("conjugacy");
        break;
    }
    let done: Vec<String> = report.stages.iter().map(|s| s.name.clone()).collect();
    for s in COHERENT_STAGES {
        if !done.iter().any(|d| d == s) {
            report.stage_skipped(s);
        }
    }

    let leaves = centers
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("c{i}"), &c.leaf))
        .chain(
            unstables
                .iter()
                .enumerate()
                .map(|(i, l)| (format!("u{i}"), l)),
        );
    files.push(("leaves.csv", report::leaves_csv(leaves)));
    files.push(("h_samples.csv", report::h_samples_csv(&conj_samples)));
    if !centers.is_empty() {
        let polys: Vec<LeafPolyline> = centers.iter().map(|c| c.leaf.clone()).collect();
        files.push(("atlas.svg", svg::atlas(&polys, &unstables)));
    }
    finish(cfg, report, timing, files)
}

/// Figures only: the branching foliation for the incoherent model, the leaf atlas otherwise.
pub fn run_render(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let mut timing = Timing::new("render");
    let mut report = ReportEnvelope::new("render", cfg);
    timing.start("render");
    let files = if cfg.model == Some(ModelKind::Incoherent) {
        let a = IncoherentAnalysis::new(IncoherentModel::new(cfg.c)?, cfg.depth_k, DEFAULT_DELTA)?;
        let curves = figure_curves(&a, FIGURE_PER_SIDE, FIGURE_SAMPLES)?;
        vec![("figure1.svg", svg::figure1(&curves))]
    } else {
        let spec = cfg.hyperbolic_spec()?;
        let model = spec.build()?;
        let model = model.as_ref();
        let cone = default_cone(model, &spec)?;
        let seed = match seed_foliation(model, &cone, 64) {
            Ok(s) => s,
            Err(e) => {
                report.stage_failed("render", e);
                return finish(cfg, report, timing, Vec::new());
            }
        };
        let built = LeafBuilder::new(model, seed.seed, cfg.window).and_then(|b| {
            let (cbase, ubase) = product_layout(&b, PRODUCT_LEAVES);
            let c = b.center_leaves(&cbase, cfg.tolerances.leaf)?;
            let u = ubase
                .iter()
                .map(|&p| unstable_leaf(model, p, UNSTABLE_LENGTH))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((c, u))
        });
        match built {
            Ok((c, u)) => {
                let polys: Vec<LeafPolyline> = c.into_iter().map(|c| c.leaf).collect();
                vec![("atlas.svg", svg::atlas(&polys, &u))]
            }
            Err(e) => {
                report.stage_failed("render", e);
                Vec::new()
            }
        }
    };
    if report.passed {
        report.stage_ok("render");
    }
    finish(cfg, report, timing, files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        let c = classify(IntMatrix::new(2, 0, 0, 1)).unwrap();
        assert_eq!(c.class, LinearClass::NonHyperbolic);
        let c = classify(IntMatrix::new(3, 1, 1, 1)).unwrap();
        assert_eq!(c.class, LinearClass::Hyperbolic);
        assert!((c.lambda_u.unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"class\":\"hyperbolic\""));
        let c = classify(IntMatrix::new(1, 0, 0, 1)).unwrap();
        assert_eq!(c.class, LinearClass::Degenerate);
        assert!(classify(IntMatrix::new(1, 2, 2, 4)).is_err());
    }

    #[test]
    fn product_layout_is_centred() {
        let m = crate::models::LinearModel::new(IntMatrix::new(3, 1, 1, 1)).unwrap();
        let b = LeafBuilder::new(&m, crate::foliation::SeedLine::new(1, -1).unwrap(), 1.0).unwrap();
        let (c, u) = product_layout(&b, 5);
        let proj = b.projections();
        assert!(c.iter().all(|p| proj.s(*p).abs() < 1e-12));
        assert!(u.iter().all(|p| proj.u(*p).abs() < 1e-12));
        assert!((proj.u(c[4]) - 1.0).abs() < 1e-12);
    }
}
