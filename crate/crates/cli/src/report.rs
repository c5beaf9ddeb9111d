//! Run reports: a machine-readable structured-text document with stable key
//! order, and a human rendering that agrees with it on every number.

use std::fmt::Write as _;

use kundt::chart::Point;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub worst_point: Option<Point>,
    pub tolerance: f64,
    pub pass: bool,
    /// Observations rather than gates: rendered as `info` and never able to
    /// fail the run (probe verdicts, classification tags).
    pub informational: bool,
    /// Extra annotation rendered alongside the check (labels, counts, flags).
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            max_residual,
            worst_point: None,
            tolerance,
            pass: max_residual < tolerance,
            informational: false,
            note: None,
        }
    }

    /// An observation carrying a number and threshold but no pass/fail
    /// semantics of its own.
    pub fn info(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let mut c = Check::new(name, value, threshold);
        c.pass = true;
        c.informational = true;
        c
    }

    pub fn with_point(mut self, p: Option<Point>) -> Self {
        self.worst_point = p;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A pure flag check with no residual semantics.
    pub fn flag(name: impl Into<String>, pass: bool, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            max_residual: 0.0,
            worst_point: None,
            tolerance: 0.0,
            pass,
            informational: false,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub scene_digest: String,
    pub dimension: usize,
    pub seed: u64,
    pub samples: usize,
    pub metric_kind: String,
    pub checks: Vec<Check>,
    pub wall_ms: u128,
}

/// Full-precision float formatting: stable and round-trippable, used by both
/// renderings so they agree bit for bit on every number.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

fn fmt_point(p: &Point) -> String {
    p.coords()
        .iter()
        .map(|c| fmt_f64(*c))
        .collect::<Vec<_>>()
        .join(",")
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Machine-readable rendering. Key order is fixed; `wall_ms` is the only
    /// field allowed to differ between identical runs.
    pub fn render_machine(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kundt-report v1");
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "scene_digest = {}", self.scene_digest);
        let _ = writeln!(out, "tool_version = {TOOL_VERSION}");
        let _ = writeln!(out, "rng = {RNG_NAME}");
        let _ = writeln!(out, "dimension = {}", self.dimension);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "metric = {}", self.metric_kind);
        let _ = writeln!(out, "checks = {}", self.checks.len());
        for (i, c) in self.checks.iter().enumerate() {
            let _ = writeln!(out, "check.{i}.name = {}", c.name);
            let _ = writeln!(out, "check.{i}.max_residual = {}", fmt_f64(c.max_residual));
            let _ = writeln!(out, "check.{i}.tolerance = {}", fmt_f64(c.tolerance));
            if let Some(p) = &c.worst_point {
                let _ = writeln!(out, "check.{i}.worst_point = {}", fmt_point(p));
            }
            if let Some(n) = &c.note {
                let _ = writeln!(out, "check.{i}.note = {n}");
            }
            let status = if c.informational {
                "info"
            } else if c.pass {
                "pass"
            } else {
                "fail"
            };
            let _ = writeln!(out, "check.{i}.status = {status}");
        }
        let _ = writeln!(
            out,
            "status = {}",
            if self.all_pass() { "pass" } else { "fail" }
        );
        let _ = writeln!(out, "wall_ms = {}", self.wall_ms);
        out
    }

    /// Human rendering printed to stdout; same numbers, looser layout.
    pub fn render_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} on {} metric (D = {}, seed {}, {} samples)",
            self.command, self.metric_kind, self.dimension, self.seed, self.samples
        );
        for c in &self.checks {
            let status = if c.informational {
                "info"
            } else if c.pass {
                "PASS"
            } else {
                "FAIL"
            };
            if c.tolerance == 0.0 {
                let _ = write!(out, "  [{status}] {:<28}", c.name);
            } else if c.informational {
                let _ = write!(
                    out,
                    "  [{status}] {:<28} value {} (threshold {})",
                    c.name,
                    fmt_f64(c.max_residual),
                    fmt_f64(c.tolerance)
                );
            } else {
                let _ = write!(
                    out,
                    "  [{status}] {:<28} max residual {} (tol {})",
                    c.name,
                    fmt_f64(c.max_residual),
                    fmt_f64(c.tolerance)
                );
            }
            if let Some(n) = &c.note {
                let _ = write!(out, "  {n}");
            }
            let _ = writeln!(out);
            if !c.pass {
                if let Some(p) = &c.worst_point {
                    let _ = writeln!(out, "         worst point: {}", fmt_point(p));
                }
            }
        }
        let _ = writeln!(
            out,
            "result: {} ({} ms)",
            if self.all_pass() { "PASS" } else { "FAIL" },
            self.wall_ms
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_rendering_is_stable() {
        let mut report = Report {
            command: "verify".into(),
            scene_digest: "abc".into(),
            dimension: 5,
            seed: 42,
            samples: 10,
            metric_kind: "flat".into(),
            checks: vec![Check::new("ccnv", 1e-16, 1e-10)],
            wall_ms: 5,
        };
        let a = report.render_machine();
        report.wall_ms = 9;
        let b = report.render_machine();
        let strip = |s: &str| {
            s.lines()
                .filter(|l| !l.starts_with("wall_ms"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&a), strip(&b));
        assert!(a.contains("check.0.status = pass"));
        assert!(a.contains("status = pass"));
    }

    #[test]
    fn renderings_agree_on_numbers() {
        let report = Report {
            command: "verify".into(),
            scene_digest: "abc".into(),
            dimension: 5,
            seed: 42,
            samples: 10,
            metric_kind: "flat".into(),
            checks: vec![Check::new("lie", 3.25e-9, 1e-8)],
            wall_ms: 5,
        };
        let number = fmt_f64(3.25e-9);
        assert!(report.render_machine().contains(&number));
        assert!(report.render_human().contains(&number));
    }
}
