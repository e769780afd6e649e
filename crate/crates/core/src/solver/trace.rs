use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::io::write_text;
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl Status {
    /// Process exit code reported by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIterations => 2,
            Status::LineSearchFailed => 3,
        }
    }
}

/// One row of the iteration trace. Record 0 describes the starting point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub eta: f64,
    pub backtracks: usize,
    pub accel_accepted: bool,
    pub time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub solution: Vector,
    /// Outer iterations; one accelerated step counts once.
    pub iterations: usize,
    /// Plain MM updates performed, two per accelerated step.
    pub mm_steps: usize,
    pub wall_time: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    status: Status,
    iterations: usize,
    mm_steps: usize,
    final_f: f64,
    final_grad_norm: f64,
    wall_time: f64,
    solution: &'a [f64],
}

impl SolveTrace {
    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].f <= w[0].f)
    }

    pub fn accepted_accelerations(&self) -> usize {
        self.records.iter().filter(|r| r.accel_accepted).count()
    }

    /// Median wall time between consecutive records.
    pub fn median_iteration_time(&self) -> Option<f64> {
        let mut gaps: Vec<f64> = self.records.windows(2).map(|w| w[1].time_s - w[0].time_s).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,f,grad_norm,eta,backtracks,accel_accepted,time_s\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{},{},{}",
                r.iter, r.f, r.grad_norm, r.eta, r.backtracks, r.accel_accepted, r.time_s
            );
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(Summary {
            status: self.status,
            iterations: self.iterations,
            mm_steps: self.mm_steps,
            final_f: self.final_value(),
            final_grad_norm: self.final_grad_norm(),
            wall_time: self.wall_time,
            solution: self.solution.as_slice(),
        })
        .expect("summary is always serializable")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary_json()).expect("valid json");
        write_text(path, &(text + "\n"))
    }
}
