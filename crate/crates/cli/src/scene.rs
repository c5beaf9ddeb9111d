//! Scene files: sectioned plain-text key-value descriptions of a chart, a
//! metric source, and zero or more Killing vector candidate blocks.
//!
//! ```text
//! ccnv-scene v1
//!
//! [chart]
//! dimension = 5
//! seed = 42
//! samples = 60
//! grid = 5
//! region_u = 0.5..2        # per-coordinate overrides of the sampling box
//!
//! [metric]
//! kind = example-II        # flat | pp-wave | raw | case-1.1i | case-1.1ii |
//!                          # case-2.2 | example-I | example-I-separable |
//!                          # example-II | example-II-analytic
//! eps = 1
//! f2 = -1                  # free functions as DSL expressions
//! perturb_H = 0.1*v        # optional additive mutation, checked not hidden
//!
//! [kv]
//! name = custom            # or: ell | n
//! F1 = 1
//! F2 = -1
//! F3 = 0
//! perturb_F2 = 0.1*x3      # optional additive mutation
//! ```
//!
//! The version header is mandatory. Expressions use the chart coordinate
//! names; every free function is validated against its declared dependency
//! mask when the metric is built, and violations are reported with the
//! offending function and coordinate.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fmt;

use kundt::chart::Chart;
use kundt::examples::{
    build_example_i, build_example_i_separable, build_example_ii, build_example_ii_analytic,
    ExampleIIAnalyticSpec, ExampleIISpec, ExampleISeparableSpec, ExampleISpec,
};
use kundt::families::{
    build_case_1_1_i, build_case_1_1_ii, build_case_2_2, Case11iSpec, Case11iiSpec, Case22Spec,
};
use kundt::killing::KillingCandidate;
use kundt::{parse_field, CCNVMetric, Region, ScalarField, TransverseFrame};

#[derive(Debug)]
pub struct SceneError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "scene line {line}: {}", self.message),
            None => write!(f, "scene: {}", self.message),
        }
    }
}

impl std::error::Error for SceneError {}

fn err(line: Option<usize>, message: impl Into<String>) -> SceneError {
    SceneError {
        line,
        message: message.into(),
    }
}

/// One parsed `key = value` entry with its source line.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Default)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn require(&self, key: &str) -> Result<&str, SceneError> {
        self.get(key)
            .ok_or_else(|| err(Some(self.line), format!("[{}] is missing '{key}'", self.name)))
    }
}

/// A fully validated scene: chart, sampling setup, metric, and candidates.
#[derive(Debug)]
pub struct Scene {
    pub chart: Chart,
    pub seed: u64,
    pub samples: usize,
    pub grid: usize,
    pub region: Region,
    pub metric_kind: String,
    pub metric: CCNVMetric,
    /// `(label, candidate)` pairs in file order.
    pub kvs: Vec<(String, KillingCandidate)>,
    /// Whether the metric kind carries quadrature fields (relaxes the
    /// Killing tolerance from 1e-8 to 1e-7).
    pub quadrature: bool,
    /// True when a perturbation key was applied to the metric or a KV.
    pub mutated: bool,
}

pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(err(None, "empty scene file")),
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some((n, l)) => break (n + 1, l.trim().to_string()),
        }
    };
    if header.1 != "ccnv-scene v1" {
        return Err(err(
            Some(header.0),
            format!("unsupported format header '{}', expected 'ccnv-scene v1'", header.1),
        ));
    }

    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in lines {
        let line_no = n + 1;
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_string(),
                line: line_no,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(Some(line_no), format!("expected 'key = value', got '{line}'")));
        };
        let section = sections
            .last_mut()
            .ok_or_else(|| err(Some(line_no), "key outside of any [section]"))?;
        let key = key.trim().to_string();
        if section.entries.contains_key(&key) {
            return Err(err(
                Some(line_no),
                format!("duplicate key '{key}' in [{}]", section.name),
            ));
        }
        section.entries.insert(
            key,
            Entry {
                line: line_no,
                value: value.trim().to_string(),
            },
        );
    }

    let chart_sec = sections
        .iter()
        .find(|s| s.name == "chart")
        .ok_or_else(|| err(None, "missing [chart] section"))?;
    let metric_sec = sections
        .iter()
        .find(|s| s.name == "metric")
        .ok_or_else(|| err(None, "missing [metric] section"))?;

    let dimension: usize = parse_num(chart_sec, "dimension")?.unwrap_or(5.0) as usize;
    let chart = Chart::new(dimension)
        .map_err(|e| err(chart_sec.line_of("dimension"), e.to_string()))?;
    let seed = parse_num(chart_sec, "seed")?.unwrap_or(1.0) as u64;
    let samples = parse_num(chart_sec, "samples")?.unwrap_or(60.0) as usize;
    let grid = parse_num(chart_sec, "grid")?.unwrap_or(5.0) as usize;

    let mut region = Region::default_box(&chart);
    for slot in 0..chart.dim() {
        let key = format!("region_{}", chart.coord_name(slot));
        if let Some(v) = chart_sec.get(&key) {
            let range = parse_range(v)
                .ok_or_else(|| err(chart_sec.line_of(&key), format!("bad range '{v}' for {key}")))?;
            region.ranges[slot] = range;
        }
    }

    let (metric_kind, metric, quadrature, mut mutated) =
        build_metric(&chart, metric_sec, &region)?;

    let mut kvs = Vec::new();
    for sec in sections.iter().filter(|s| s.name == "kv") {
        let (label, kv, was_mutated) = build_kv(&chart, sec)?;
        mutated |= was_mutated;
        kvs.push((label, kv));
    }

    Ok(Scene {
        chart,
        seed,
        samples,
        grid,
        region,
        metric_kind,
        metric,
        kvs,
        quadrature,
        mutated,
    })
}

fn parse_num(sec: &Section, key: &str) -> Result<Option<f64>, SceneError> {
    match sec.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| err(sec.line_of(key), format!("'{key}' must be a number, got '{v}'"))),
    }
}

fn parse_range(v: &str) -> Option<(f64, f64)> {
    let (lo, hi) = v.split_once("..")?;
    Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
}

fn parse_expr(chart: &Chart, sec: &Section, key: &str) -> Result<Option<ScalarField>, SceneError> {
    match sec.get(key) {
        None => Ok(None),
        Some(text) => parse_field(text, chart)
            .map(Some)
            .map_err(|e| err(sec.line_of(key), format!("in '{key}': {e}"))),
    }
}

fn expr_or_zero(chart: &Chart, sec: &Section, key: &str) -> Result<ScalarField, SceneError> {
    Ok(parse_expr(chart, sec, key)?.unwrap_or_else(|| ScalarField::zero(chart)))
}

fn require_expr(chart: &Chart, sec: &Section, key: &str) -> Result<ScalarField, SceneError> {
    parse_expr(chart, sec, key)?
        .ok_or_else(|| err(Some(sec.line), format!("[metric] is missing '{key}'")))
}

/// Upper-triangular frame from `mNE = expr` keys, defaulting to the identity.
fn frame_from_keys(chart: &Chart, sec: &Section) -> Result<TransverseFrame, SceneError> {
    let n = chart.transverse_count();
    let mut rows = vec![vec![ScalarField::zero(chart); n]; n];
    for i in 0..n {
        rows[i][i] = ScalarField::one(chart);
    }
    for i in 3..=chart.dim() {
        for e in 3..=chart.dim() {
            let key = format!("m{i}{e}");
            if let Some(f) = parse_expr(chart, sec, &key)? {
                rows[i - 3][e - 3] = f;
            }
        }
    }
    TransverseFrame::new(chart, rows).map_err(|e| err(Some(sec.line), e.to_string()))
}

fn w_slots(chart: &Chart, sec: &Section, prefix: &str) -> Result<Vec<ScalarField>, SceneError> {
    (4..=chart.dim())
        .map(|e| expr_or_zero(chart, sec, &format!("{prefix}{e}")))
        .collect()
}

fn build_metric(
    chart: &Chart,
    sec: &Section,
    region: &Region,
) -> Result<(String, CCNVMetric, bool, bool), SceneError> {
    let kind = sec.require("kind")?.to_string();
    let input_err = |e: &dyn fmt::Display| err(Some(sec.line), e.to_string());

    let (metric, quadrature) = match kind.as_str() {
        "flat" => (CCNVMetric::flat(chart), false),
        "pp-wave" => {
            let h = require_expr(chart, sec, "H")?;
            let w = vec![ScalarField::zero(chart); chart.transverse_count()];
            let m = CCNVMetric::new(chart, h, w, TransverseFrame::identity(chart))
                .map_err(|e| input_err(&e))?;
            (m, false)
        }
        "raw" => {
            let h = expr_or_zero(chart, sec, "H")?;
            let w: Vec<ScalarField> = (3..=chart.dim())
                .map(|e| expr_or_zero(chart, sec, &format!("W{e}")))
                .collect::<Result<_, _>>()?;
            let frame = frame_from_keys(chart, sec)?;
            // raw metrics may deliberately violate the v-independence; the
            // CCNV check reports it instead of refusing to load
            let m = CCNVMetric::new_unchecked(chart, h, w, frame).map_err(|e| input_err(&e))?;
            (m, false)
        }
        "case-1.1i" => {
            let spec = Case11iSpec {
                f2: expr_or_zero(chart, sec, "f2")?,
                g2: expr_or_zero(chart, sec, "g2")?,
                b: w_slots(chart, sec, "B")?,
                frame: frame_from_keys(chart, sec)?,
            };
            let (m, _) = build_case_1_1_i(chart, &spec, region).map_err(|e| input_err(&e))?;
            (m, false)
        }
        "case-1.1ii" => {
            let spec = Case11iiSpec {
                f2: expr_or_zero(chart, sec, "f2")?,
                a0: expr_or_zero(chart, sec, "A0")?,
                c: w_slots(chart, sec, "C")?,
                frame: frame_from_keys(chart, sec)?,
            };
            let (m, _) = build_case_1_1_ii(chart, &spec).map_err(|e| input_err(&e))?;
            (m, true)
        }
        "case-2.2" => {
            let q = chart.transverse_count() - 1;
            let mut block = vec![vec![ScalarField::zero(chart); q]; q];
            for i in 0..q {
                block[i][i] = ScalarField::one(chart);
            }
            for nleg in 4..=chart.dim() {
                for r in 4..=chart.dim() {
                    let key = format!("m{nleg}{r}");
                    if let Some(f) = parse_expr(chart, sec, &key)? {
                        block[nleg - 4][r - 4] = f;
                    }
                }
            }
            let spec = Case22Spec {
                a: expr_or_zero(chart, sec, "a")?,
                b: expr_or_zero(chart, sec, "b")?,
                a60: expr_or_zero(chart, sec, "A60")?,
                a61: expr_or_zero(chart, sec, "A61")?,
                a62: expr_or_zero(chart, sec, "A62")?,
                c_h: parse_num(sec, "c_h")?.unwrap_or(0.0),
                c2: parse_num(sec, "c2")?.unwrap_or(0.0),
                n_block: block,
            };
            let (m, _) = build_case_2_2(chart, &spec, region).map_err(|e| input_err(&e))?;
            (m, false)
        }
        "example-I" => {
            let spec = ExampleISpec {
                eps: parse_num(sec, "eps")?.unwrap_or(1.0),
                m_base: frame_base_from_keys(chart, sec)?,
                f2: expr_or_zero(chart, sec, "f2")?,
                a_base: expr_or_zero(chart, sec, "A")?,
                b_base: w_slots(chart, sec, "B")?,
            };
            let built = build_example_i(chart, &spec, region).map_err(|e| input_err(&e))?;
            (built.metric, true)
        }
        "example-I-separable" => {
            let n = chart.transverse_count();
            let mut p = Vec::with_capacity(n);
            let mut h = Vec::with_capacity(n);
            for s in 3..=chart.dim() {
                p.push(parse_num(sec, &format!("p{s}"))?.unwrap_or(0.0));
                h.push(expr_or_zero(chart, sec, &format!("h{s}"))?);
            }
            let spec = ExampleISeparableSpec {
                eps: parse_num(sec, "eps")?.unwrap_or(1.0),
                p,
                h,
                g: expr_or_zero(chart, sec, "g")?,
                a_base: expr_or_zero(chart, sec, "A")?,
                b_base: w_slots(chart, sec, "B")?,
            };
            let built =
                build_example_i_separable(chart, &spec, region).map_err(|e| input_err(&e))?;
            (built.metric, false)
        }
        "example-II" => {
            let spec = ExampleIISpec {
                eps: parse_num(sec, "eps")?.unwrap_or(1.0),
                m_base: frame_base_from_keys(chart, sec)?,
                h: expr_or_zero(chart, sec, "H")?,
                f2_base: expr_or_zero(chart, sec, "f2")?,
                f: expr_or_zero(chart, sec, "f")?,
                e_base: w_slots(chart, sec, "E")?,
            };
            let built = build_example_ii(chart, &spec, region).map_err(|e| input_err(&e))?;
            (built.metric, true)
        }
        "example-II-analytic" => {
            let spec = ExampleIIAnalyticSpec {
                eps: parse_num(sec, "eps")?.unwrap_or(1.0),
                m_base: frame_base_from_keys(chart, sec)?,
                h_base: expr_or_zero(chart, sec, "H")?,
                f2_base: expr_or_zero(chart, sec, "f2")?,
                f: expr_or_zero(chart, sec, "f")?,
                e_base: w_slots(chart, sec, "E")?,
                order: parse_num(sec, "order")?.unwrap_or(4.0) as usize,
            };
            let built =
                build_example_ii_analytic(chart, &spec, region).map_err(|e| input_err(&e))?;
            (built.metric, false)
        }
        other => {
            return Err(err(
                sec.line_of("kind"),
                format!("unknown metric kind '{other}'"),
            ))
        }
    };

    // optional additive mutation of H, applied after the build so the
    // verifiers can catch it
    let mut mutated = false;
    let metric = if let Some(perturb) = parse_expr(chart, sec, "perturb_H")? {
        mutated = true;
        let w: Vec<ScalarField> = (3..=chart.dim())
            .map(|e| metric.w_hat(e).clone())
            .collect();
        CCNVMetric::new_unchecked(
            chart,
            metric.h().add(&perturb),
            w,
            metric.frame().clone(),
        )
        .map_err(|e| input_err(&e))?
    } else {
        metric
    };

    Ok((kind, metric, quadrature, mutated))
}

/// Frame *base* entries for the worked examples (functions of the transverse
/// coordinates before the characteristic shift), same `mNE` keys.
fn frame_base_from_keys(
    chart: &Chart,
    sec: &Section,
) -> Result<Vec<Vec<ScalarField>>, SceneError> {
    let n = chart.transverse_count();
    let mut rows = vec![vec![ScalarField::zero(chart); n]; n];
    for i in 0..n {
        rows[i][i] = ScalarField::one(chart);
    }
    for i in 3..=chart.dim() {
        for e in 3..=chart.dim() {
            let key = format!("m{i}{e}");
            if let Some(f) = parse_expr(chart, sec, &key)? {
                rows[i - 3][e - 3] = f;
            }
        }
    }
    Ok(rows)
}

fn build_kv(
    chart: &Chart,
    sec: &Section,
) -> Result<(String, KillingCandidate, bool), SceneError> {
    let name = sec.get("name").unwrap_or("custom").to_string();
    let kv = match name.as_str() {
        "ell" => KillingCandidate::ell(chart),
        "n" => KillingCandidate::n(chart),
        _ => {
            let f1 = expr_or_zero(chart, sec, "F1")?;
            let f2 = expr_or_zero(chart, sec, "F2")?;
            let f3 = expr_or_zero(chart, sec, "F3")?;
            KillingCandidate::new(f1, f2, f3).map_err(|e| err(Some(sec.line), e.to_string()))?
        }
    };
    let mut mutated = false;
    let kv = if let Some(delta) = parse_expr(chart, sec, "perturb_F2")? {
        mutated = true;
        kv.perturb_f2(&delta)
    } else {
        kv
    };
    Ok((name, kv, mutated))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_flat_scene() {
        let scene = load_scene(
            "ccnv-scene v1\n\n[chart]\ndimension = 4\n\n[metric]\nkind = flat\n",
        )
        .unwrap();
        assert_eq!(scene.chart.dim(), 4);
        assert!(scene.kvs.is_empty());
        assert!(!scene.mutated);
        assert_eq!(scene.metric_kind, "flat");
    }

    #[test]
    fn header_is_mandatory() {
        let e = load_scene("[chart]\ndimension = 4\n").unwrap_err();
        assert!(e.message.contains("format header"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = load_scene(
            "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = pp-wave\nH = u + )\n",
        )
        .unwrap_err();
        assert_eq!(e.line, Some(6));
    }

    #[test]
    fn mask_violation_names_function_and_coordinate() {
        let e = load_scene(
            "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = case-1.1i\nf2 = v\n",
        )
        .unwrap_err();
        assert!(e.message.contains("f_2"), "message: {}", e.message);
        assert!(e.message.contains('v'), "message: {}", e.message);
    }

    #[test]
    fn unknown_kind_rejected() {
        let e = load_scene(
            "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = warp-drive\n",
        )
        .unwrap_err();
        assert!(e.message.contains("unknown metric kind"));
    }

    #[test]
    fn kv_blocks_and_regions() {
        let scene = load_scene(
            "ccnv-scene v1\n[chart]\ndimension = 5\nseed = 9\nsamples = 33\nregion_u = 1..1.5\n\
             [metric]\nkind = pp-wave\nH = x3^2\n\n[kv]\nname = ell\n\n[kv]\nF1 = 1\nF2 = x3^2\n",
        )
        .unwrap();
        assert_eq!(scene.seed, 9);
        assert_eq!(scene.samples, 33);
        assert_eq!(scene.region.ranges[0], (1.0, 1.5));
        assert_eq!(scene.kvs.len(), 2);
        assert_eq!(scene.kvs[0].0, "ell");
    }

    #[test]
    fn perturbations_mark_scene_mutated() {
        let scene = load_scene(
            "ccnv-scene v1\n[chart]\ndimension = 5\n[metric]\nkind = pp-wave\nH = x3^2\nperturb_H = 0.1*v\n",
        )
        .unwrap();
        assert!(scene.mutated);
        assert!(scene.metric.h().depends_on(1));
    }
}
