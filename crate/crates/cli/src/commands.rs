//! Command implementations: each consumes a validated scene and produces a
//! [`Report`].

use std::fmt::Write as _;
use std::time::Instant;

use kundt::killing::{
    causal_classify, classify_case, frame_killing_report, lie_residual_report, CoordinateVector,
    KillingCandidate, KvForm,
};
use kundt::{CausalLabel, EvalCache};

use crate::report::{fmt_f64, Check, Report};
use crate::scene::Scene;

/// Tolerances used by the verify command; recorded per check in the report.
const CCNV_TOL: f64 = 1e-10;
const KILLING_TOL: f64 = 1e-8;
const KILLING_TOL_QUAD: f64 = 1e-7;
const BRACKET_TOL: f64 = 1e-10;
const YC_NORM_TOL: f64 = 1e-8;
const PROBE_TOL: f64 = 1e-8;

pub struct RunError(pub String);

impl<E: std::fmt::Display> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError(e.to_string())
    }
}

fn killing_tol(scene: &Scene) -> f64 {
    if scene.quadrature {
        KILLING_TOL_QUAD
    } else {
        KILLING_TOL
    }
}

fn base_report(scene: &Scene, command: &str, digest: String) -> Report {
    let mut report = Report {
        command: command.to_string(),
        scene_digest: digest,
        dimension: scene.chart.dim(),
        seed: scene.seed,
        samples: scene.samples,
        metric_kind: scene.metric_kind.clone(),
        checks: Vec::new(),
        wall_ms: 0,
    };
    if scene.mutated {
        report.checks.push(Check::flag(
            "scene_mutated",
            true,
            "perturbation keys were applied to the inputs",
        ));
    }
    report
}

/// CCNV residual, then dual-path Killing checks for `ell` and every KV block,
/// plus the oracle-agreement record.
pub fn run_verify(scene: &Scene, digest: String) -> Result<Report, RunError> {
    let t0 = Instant::now();
    let mut report = base_report(scene, "verify", digest);
    let sample = scene.region.sample(&scene.chart, scene.seed, scene.samples);

    let ccnv = scene.metric.ccnv_residual(&sample)?;
    let grad = ccnv.get("ccnv_grad_ell").unwrap();
    report.checks.push(
        Check::new("ccnv_grad_ell", grad.max_abs, CCNV_TOL).with_point(grad.worst_point.clone()),
    );
    let norm = ccnv.get("ell_norm").unwrap();
    report.checks.push(
        Check::new("ell_null_norm", norm.max_abs, CCNV_TOL).with_point(norm.worst_point.clone()),
    );

    let tol = killing_tol(scene);
    let mut blocks: Vec<(String, KillingCandidate)> =
        vec![("ell".to_string(), KillingCandidate::ell(&scene.chart))];
    for (label, kv) in &scene.kvs {
        blocks.push((label.clone(), kv.clone()));
    }
    for (idx, (label, kv)) in blocks.iter().enumerate() {
        let tag = if idx == 0 {
            "ell".to_string()
        } else {
            format!("kv{idx}:{label}")
        };
        let lie = lie_residual_report(&kv.to_coordinate_vector(&scene.metric), &scene.metric, &sample)?;
        let worst = lie.get("lie_derivative").unwrap();
        report.checks.push(
            Check::new(format!("{tag}.lie"), worst.max_abs, tol)
                .with_point(worst.worst_point.clone()),
        );
        let frame = frame_killing_report(kv, &scene.metric, &sample)?;
        let fw = frame.worst().unwrap();
        report.checks.push(
            Check::new(format!("{tag}.frame"), fw.max_abs, tol)
                .with_point(fw.worst_point.clone())
                .with_note(format!("worst group {}", fw.name)),
        );
        let agree = (worst.max_abs < tol) == (fw.max_abs < tol);
        report.checks.push(Check::flag(
            format!("{tag}.oracle_agreement"),
            agree,
            format!(
                "lie {} vs frame {}",
                fmt_f64(worst.max_abs),
                fmt_f64(fw.max_abs)
            ),
        ));
    }

    report.wall_ms = t0.elapsed().as_millis();
    Ok(report)
}

/// Case tags and causal classification over a grid, with optional grid
/// export (one row per point: coordinates, norm, label).
pub fn run_classify(
    scene: &Scene,
    digest: String,
) -> Result<(Report, Option<String>), RunError> {
    let t0 = Instant::now();
    let mut report = base_report(scene, "classify", digest);
    if scene.kvs.is_empty() {
        return Err(RunError("classify needs at least one [kv] block".into()));
    }
    let sample = scene.region.sample(&scene.chart, scene.seed, scene.samples);
    let grid = scene.region.grid(&scene.chart, scene.grid);

    let mut export = String::new();
    let _ = write!(export, "label_index");
    for s in 0..scene.chart.dim() {
        let _ = write!(export, ",{}", scene.chart.coord_name(s));
    }
    let _ = writeln!(export, ",norm,label");

    for (idx, (label, kv)) in scene.kvs.iter().enumerate() {
        let tag = format!("kv{}:{label}", idx + 1);
        let case = classify_case(kv, &scene.metric, &sample)?;
        report.checks.push(Check::flag(
            format!("{tag}.case"),
            true,
            format!("{case:?}"),
        ));
        let causal = causal_classify(kv, &scene.metric, &grid)?;
        let n = causal.entries.len() as f64;
        let note = format!(
            "timelike {:.1}% null {:.1}% spacelike {:.1}% over {} grid points",
            100.0 * causal.count(CausalLabel::Timelike) as f64 / n,
            100.0 * causal.count(CausalLabel::Null) as f64 / n,
            100.0 * causal.count(CausalLabel::Spacelike) as f64 / n,
            causal.entries.len()
        );
        report
            .checks
            .push(Check::flag(format!("{tag}.causal"), true, note));
        report.checks.push(Check::flag(
            format!("{tag}.global_non_spacelike"),
            true,
            format!(
                "derived {} (authoritative), printed-form {}, d3x1_zero {}, v_coefficient_zero {}",
                causal.global_non_spacelike(),
                causal.inequality_printed,
                causal.d3x1_zero,
                causal.v_coefficient_zero
            ),
        ));
        for (p, norm, lab) in &causal.entries {
            let _ = write!(export, "{}", idx + 1);
            for c in p.coords() {
                let _ = write!(export, ",{}", fmt_f64(*c));
            }
            let _ = writeln!(export, ",{},{lab}", fmt_f64(*norm));
        }
    }

    report.wall_ms = t0.elapsed().as_millis();
    Ok((report, Some(export)))
}

/// The three curvature invariants over the sample with CSI/VSI verdicts.
pub fn run_invariants(scene: &Scene, digest: String) -> Result<Report, RunError> {
    let t0 = Instant::now();
    let mut report = base_report(scene, "invariants", digest);
    if scene.samples < 10 {
        return Err(RunError(
            "invariants needs at least 10 samples for the probe".into(),
        ));
    }
    let sample = scene.region.sample(&scene.chart, scene.seed, scene.samples);
    let probe = scene.metric.vsi_csi_probe(&sample)?;
    report.checks.push(
        Check::info("csi_spread", probe.max_spread, PROBE_TOL).with_note(format!(
            "constant = {} (probe, not a proof)",
            probe.constant()
        )),
    );
    report.checks.push(
        Check::info("vsi_magnitude", probe.max_magnitude, PROBE_TOL).with_note(format!(
            "vanishing = {} (probe, not a proof)",
            probe.vanishing()
        )),
    );
    let worst = probe
        .values
        .iter()
        .flat_map(|v| v.iter().copied())
        .fold(0.0f64, |a, b| a.max(b.abs()));
    report.checks.push(Check::flag(
        "invariants_evaluated",
        true,
        format!(
            "{} points, max |invariant| = {}",
            probe.values.len(),
            fmt_f64(worst)
        ),
    ));
    report.wall_ms = t0.elapsed().as_millis();
    Ok(report)
}

/// Commutator checks of every KV with `ell`: proportionality, the recorded
/// scale, and the extracted bracket vector norm for form-C candidates.
pub fn run_bracket(scene: &Scene, digest: String) -> Result<Report, RunError> {
    let t0 = Instant::now();
    let mut report = base_report(scene, "bracket", digest);
    if scene.kvs.is_empty() {
        return Err(RunError("bracket needs at least one [kv] block".into()));
    }
    let sample = scene.region.sample(&scene.chart, scene.seed, scene.samples);
    let ell = CoordinateVector::ell(&scene.chart);

    for (idx, (label, kv)) in scene.kvs.iter().enumerate() {
        let tag = format!("kv{}:{label}", idx + 1);
        let x = kv.to_coordinate_vector(&scene.metric);
        let bracket = x.commutator(&ell);
        let form = kv.form();

        // proportionality to ell: every non-v component must vanish
        let mut max_off = 0.0f64;
        let mut sigma_min = f64::INFINITY;
        let mut sigma_max = f64::NEG_INFINITY;
        let mut worst_point = None;
        for p in &sample {
            let mut cache = EvalCache::new();
            let b = bracket.eval_cached(p, &mut cache)?;
            for (slot, v) in b.iter().enumerate() {
                if slot == kundt::chart::V {
                    sigma_min = sigma_min.min(*v);
                    sigma_max = sigma_max.max(*v);
                } else if v.abs() > max_off {
                    max_off = v.abs();
                    worst_point = Some(p.clone());
                }
            }
        }

        match form {
            KvForm::A | KvForm::B => {
                report.checks.push(
                    Check::new(format!("{tag}.bracket_prop_ell"), max_off, BRACKET_TOL)
                        .with_point(worst_point.clone())
                        .with_note(format!("form {form:?}")),
                );
                report.checks.push(
                    Check::new(
                        format!("{tag}.sigma_constant"),
                        sigma_max - sigma_min,
                        BRACKET_TOL,
                    )
                    .with_note(format!("sigma = {}", fmt_f64(0.5 * (sigma_min + sigma_max)))),
                );
            }
            _ => {
                // form C: Y_C = [X, ell] has no u-component and norm (D_3 F_1)^2
                let d3f1 = kv.d3x1(&scene.metric);
                let mut worst = 0.0f64;
                let mut worst_p = None;
                for p in &sample {
                    let mut cache = EvalCache::new();
                    let b = bracket.eval_cached(p, &mut cache)?;
                    let g = scene.metric.metric_at(p)?;
                    let mut norm = 0.0;
                    for a in 0..scene.chart.dim() {
                        for bb in 0..scene.chart.dim() {
                            norm += g[(a, bb)] * b[a] * b[bb];
                        }
                    }
                    let want = d3f1.eval(p)?.powi(2);
                    let diff = (norm - want).abs();
                    if diff > worst {
                        worst = diff;
                        worst_p = Some(p.clone());
                    }
                }
                report.checks.push(
                    Check::new(format!("{tag}.yc_norm_identity"), worst, YC_NORM_TOL)
                        .with_point(worst_p)
                        .with_note("norm [X_C, ell] vs (D_3 F_1)^2".to_string()),
                );
            }
        }
    }

    report.wall_ms = t0.elapsed().as_millis();
    Ok(report)
}
