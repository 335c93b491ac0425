use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::problem::fmt17;

use super::config::{check_stop, SolverConfig, StopCriteria};

/// Scalar record for iterate `z^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub k: usize,
    /// `‖V(z^k)‖`
    pub residual: f64,
    /// `‖z^k − z^{k−1}‖`, absent at `k = 0`.
    pub velocity: Option<f64>,
    /// Gap surrogate, present when the run had a reference solution.
    pub gap: Option<f64>,
    /// `‖V(z̄^k)‖` for methods with an extrapolated sequence.
    pub residual_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub z: Vector,
    pub zbar: Option<Vector>,
}

/// Trajectory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateLog {
    pub method: String,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
    pub stopped_at: Option<usize>,
    pub final_iterate: Vector,
    /// Operator evaluations made by the algorithm itself.
    pub evaluations: usize,
    /// Extra evaluations made only to log `‖V(z^k)‖`.
    pub monitor_evaluations: usize,
    /// Implicit methods: `‖z^{k+1} + cV(z^{k+1}) − anchor‖` per step.
    pub step_residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "k,residual,velocity,gap,residual_bar";

impl IterateLog {
    /// Index of the last recorded iterate.
    pub fn last_k(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn snapshot(&self, k: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&k, |s| s.k)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 96);
        let _ = writeln!(s, "# method = {}", self.method);
        if let Some(k) = self.stopped_at {
            let _ = writeln!(s, "# stopped_at = {k}");
        }
        let _ = writeln!(s, "{CSV_HEADER}");
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.k,
                fmt17(r.residual),
                opt(r.velocity),
                opt(r.gap),
                opt(r.residual_bar)
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, preamble: &str) -> Result<()> {
        let mut text = String::from(preamble);
        text.push_str(&self.to_csv());
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads the scalar part of a log back. Iterates are not stored in the
    /// CSV, so `final_iterate` is empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut method = String::from("unknown");
        let mut stopped_at = None;
        let mut records = Vec::new();
        let mut seen_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, val)) = rest.split_once('=') {
                    match key.trim() {
                        "method" => method = val.trim().to_string(),
                        "stopped_at" => {
                            stopped_at = val.trim().parse().ok();
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(Error::Parse(format!(
                        "expected header '{CSV_HEADER}', got '{line}'"
                    )));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |t: &str| -> Result<Option<f64>> {
                if t.is_empty() {
                    Ok(None)
                } else {
                    t.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Parse(format!("line {}: '{t}': {e}", lineno + 1)))
                }
            };
            let k = fields[0]
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("line {}: bad k: {e}", lineno + 1)))?;
            if records.last().is_some_and(|r: &Record| r.k >= k) {
                return Err(Error::Parse(format!(
                    "line {}: k must increase strictly",
                    lineno + 1
                )));
            }
            records.push(Record {
                k,
                residual: num(fields[1])?
                    .ok_or_else(|| Error::Parse(format!("line {}: missing residual", lineno + 1)))?,
                velocity: num(fields[2])?,
                gap: num(fields[3])?,
                residual_bar: num(fields[4])?,
            });
        }
        if !seen_header {
            return Err(Error::Parse("missing log header".into()));
        }
        Ok(Self {
            method,
            records,
            snapshots: Vec::new(),
            stopped_at,
            final_iterate: Vector::zeros(0),
            evaluations: 0,
            monitor_evaluations: 0,
            step_residuals: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Builds an [`IterateLog`] while a solver runs: divergence guard, gap
/// surrogate, stop rule, snapshot thinning.
pub(crate) struct Recorder {
    log: IterateLog,
    stop: Option<StopCriteria>,
    record_every: usize,
    keep_snapshots: bool,
    reference: Option<Vector>,
    delta0: f64,
    bound: f64,
    initial_residual: f64,
}

impl Recorder {
    pub(crate) fn new(method: &str, cfg: &SolverConfig) -> Self {
        let delta0 = cfg
            .reference
            .as_ref()
            .map_or(0.0, |zs| (&cfg.z0 - zs).norm());
        Self {
            log: IterateLog {
                method: method.to_string(),
                records: Vec::new(),
                snapshots: Vec::new(),
                stopped_at: None,
                final_iterate: cfg.z0.clone(),
                evaluations: 0,
                monitor_evaluations: 0,
                step_residuals: Vec::new(),
                warnings: Vec::new(),
            },
            stop: cfg.stop,
            record_every: cfg.record_every,
            keep_snapshots: cfg.keep_snapshots,
            reference: cfg.reference.clone(),
            delta0,
            bound: 1e12 * (1.0 + cfg.z0.norm()),
            initial_residual: f64::NAN,
        }
    }

    pub(crate) fn warn(&mut self, msg: String) {
        self.log.warnings.push(msg);
    }

    pub(crate) fn step_residual(&mut self, r: f64) {
        self.log.step_residuals.push(r);
    }

    /// Records `z^k` with `vz = V(z^k)`. Returns `true` when the stop rule
    /// fires at this index.
    pub(crate) fn record(
        &mut self,
        k: usize,
        z: &Vector,
        z_prev: Option<&Vector>,
        vz: &Vector,
        vbar: Option<&Vector>,
        zbar: Option<&Vector>,
    ) -> Result<bool> {
        let z_norm = z.norm();
        if !all_finite(z) || !all_finite(vz) || z_norm > self.bound {
            return Err(Error::Divergence {
                k,
                last_finite: k.saturating_sub(1),
            });
        }
        let residual = vz.norm();
        if k == 0 {
            self.initial_residual = residual;
        }
        let velocity = z_prev.map(|zp| (z - zp).norm());
        let gap = self
            .reference
            .as_ref()
            .map(|zs| crate::reference::gap_value(z, zs, self.delta0, vz));
        self.log.records.push(Record {
            k,
            residual,
            velocity,
            gap,
            residual_bar: vbar.map(|v| v.norm()),
        });
        if self.keep_snapshots && k % self.record_every == 0 {
            self.log.snapshots.push(Snapshot {
                k,
                z: z.clone(),
                zbar: zbar.cloned(),
            });
        }
        let stop = self
            .stop
            .as_ref()
            .is_some_and(|st| check_stop(st, residual, self.initial_residual, velocity, z_norm));
        if stop {
            self.log.stopped_at = Some(k);
        }
        Ok(stop)
    }

    pub(crate) fn finish(mut self, z_final: Vector, evaluations: usize, monitor: usize) -> IterateLog {
        self.log.final_iterate = z_final;
        self.log.evaluations = evaluations;
        self.log.monitor_evaluations = monitor;
        self.log
    }
}
