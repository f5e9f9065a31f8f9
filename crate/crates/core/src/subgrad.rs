//! Held-Karp lower bound and subgradient ascent on node penalties.

use std::fmt::Write as _;

use crate::cost::CostView;
use crate::error::{Error, Result};
use crate::instance::TspInstance;
use crate::onetree::{minimum_one_tree_with, select_special, OneTree};

/// One penalty per node, in distance units.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PiVector(Vec<f64>);

impl PiVector {
    pub fn zeros(n: usize) -> Self {
        PiVector(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> PiVector {
        PiVector(self.0.iter().map(|p| p * factor).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for PiVector {
    fn from(v: Vec<f64>) -> Self {
        PiVector(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentSchedule {
    pub initial_step: f64,
    pub initial_period: usize,
    pub max_steps: usize,
}

/// Ascent stops once the step size falls below this.
pub const MIN_STEP: f64 = 1e-9;

impl AscentSchedule {
    pub fn new(initial_step: f64, initial_period: usize, max_steps: usize) -> Result<Self> {
        if !(initial_step > 0.0 && initial_step.is_finite()) || initial_period == 0 || max_steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid ascent schedule: step {initial_step}, period {initial_period}, max steps {max_steps}"
            )));
        }
        Ok(Self { initial_step, initial_period, max_steps })
    }

    /// Period `n / 2`, `10 n` steps, and a first step of 1% of the mean
    /// unpenalised 1-tree edge; the first period doubles it while the bound improves.
    pub fn for_instance(inst: &TspInstance) -> Self {
        let n = inst.n();
        let costs = CostView::new(inst);
        let tree = minimum_one_tree_with(&costs, select_special(&costs)).expect("n >= 3");
        let mean_edge = tree.length / n as f64;
        let initial_step = if mean_edge > 0.0 { 0.01 * mean_edge } else { 1.0 };
        Self { initial_step, initial_period: (n / 2).max(1), max_steps: 10 * n }
    }
}

/// `w(π) = L(T_π) − 2 Σ π`.
pub fn held_karp_bound(inst: &TspInstance, pi: &PiVector) -> Result<f64> {
    if pi.len() != inst.n() {
        return Err(Error::InvalidArgument("penalty vector length".into()));
    }
    let costs = CostView::penalized(inst, pi.values());
    let tree = minimum_one_tree_with(&costs, select_special(&costs))?;
    Ok(bound_of(&tree, pi))
}

fn bound_of(tree: &OneTree, pi: &PiVector) -> f64 {
    tree.length - 2.0 * pi.sum()
}

/// `π ← π + t (d − 2)`.
pub fn update_penalties(pi: &mut PiVector, degrees: &[usize], step: f64) {
    for (p, &d) in pi.0.iter_mut().zip(degrees) {
        *p += step * (d as f64 - 2.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub bound: f64,
    pub step_size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AscentStop {
    /// The 1-tree became a tour; its length is optimal.
    Tour,
    MaxSteps,
    StepUnderflow,
}

#[derive(Clone, Debug)]
pub struct AscentResult {
    pub pi_best: PiVector,
    pub w_best: f64,
    pub trace: Vec<TracePoint>,
    pub stop: AscentStop,
}

impl AscentResult {
    /// `step w step_size` per line.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for p in &self.trace {
            writeln!(out, "{} {:.17e} {:.17e}", p.step, p.bound, p.step_size).unwrap();
        }
        out
    }
}

/// Maximises `w(π)` from `π = 0`.
///
/// Within the first period the step doubles after every improving iteration.
/// A period that ends without improvement halves both period and step; a
/// period whose last iteration still improved is doubled.
pub fn subgradient_ascent(inst: &TspInstance, schedule: &AscentSchedule) -> AscentResult {
    let n = inst.n();
    let base = CostView::new(inst);
    let special = select_special(&base);
    let mut pi = PiVector::zeros(n);
    let mut pi_best = pi.clone();
    let mut w_best = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut step = schedule.initial_step;
    let mut period = schedule.initial_period;
    let mut first_period = true;
    let mut steps = 0;

    let stop = 'outer: loop {
        let mut improved_in_period = false;
        for k in 0..period {
            if steps >= schedule.max_steps {
                break 'outer AscentStop::MaxSteps;
            }
            let tree = minimum_one_tree_with(&base.with_penalties(pi.values()), special)
                .expect("n >= 3");
            let w = bound_of(&tree, &pi);
            trace.push(TracePoint { step: steps, bound: w, step_size: step });
            if w > w_best {
                w_best = w;
                pi_best = pi.clone();
                improved_in_period = true;
                if first_period {
                    step *= 2.0;
                }
                if k + 1 == period {
                    period *= 2;
                }
            }
            if tree.is_tour() {
                break 'outer AscentStop::Tour;
            }
            update_penalties(&mut pi, &tree.degrees, step);
            steps += 1;
        }
        first_period = false;
        if !improved_in_period {
            period = (period / 2).max(1);
            step /= 2.0;
        }
        if step < MIN_STEP {
            break AscentStop::StepUnderflow;
        }
    };
    AscentResult { pi_best, w_best, trace, stop }
}
