//! One instance through the whole pipeline: penalties, candidates, trials.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use tsplab::candidates::{from_alpha, from_nearest, from_scores, DEFAULT_K};
use tsplab::instance::build_sparse_graph;
use tsplab::onetree::alpha_measures;
use tsplab::search::{run_trials, TrialConfig, DEFAULT_LAMBDA_MAX};
use tsplab::sgn::{forward, prepare_input, GraphBatch, Mode};
use tsplab::subgrad::{subgradient_ascent, AscentSchedule};
use tsplab::{CandidateSet, PiVector, SgnModel32, Tour, TspInstance};

use crate::error::{Error, Result};

/// α is evaluated on at most this many nearest neighbours per node.
pub const ALPHA_GRAPH_GAMMA: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSource {
    Alpha,
    Sgn,
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PiSource {
    Subgradient,
    Sgn,
    Zero,
}

macro_rules! token_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", stringify!($ty), " {:?}"), s))),
                }
            }
        }
    };
}

token_enum!(CandidateSource { Alpha => "alpha", Sgn => "sgn", Nearest => "nearest" });
token_enum!(PiSource { Subgradient => "subgradient", Sgn => "sgn", Zero => "zero" });

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub candidates: CandidateSource,
    pub pi: PiSource,
    pub k: usize,
    pub trials: usize,
    pub lambda_max: usize,
    pub time_limit: Option<Duration>,
    pub seed: u64,
}

impl SolverConfig {
    /// `alpha` (subgradient penalties, α candidates), `sgn` (network scores and
    /// penalties) or `nearest` (nearest neighbours, no penalties).
    pub fn preset(name: &str) -> Result<Self> {
        let (candidates, pi) = match name {
            "alpha" => (CandidateSource::Alpha, PiSource::Subgradient),
            "sgn" => (CandidateSource::Sgn, PiSource::Sgn),
            "nearest" => (CandidateSource::Nearest, PiSource::Zero),
            _ => return Err(Error::Config(format!("unknown solver preset {name:?} (alpha, sgn, nearest)"))),
        };
        Ok(SolverConfig { candidates, pi, k: DEFAULT_K, trials: 1, lambda_max: DEFAULT_LAMBDA_MAX, time_limit: None, seed: 0 })
    }

    pub fn needs_model(&self) -> bool {
        self.candidates == CandidateSource::Sgn || self.pi == PiSource::Sgn
    }

    /// Stable identifier written into reports.
    pub fn id(&self) -> String {
        let mut id = format!(
            "cand={},pi={},k={},trials={},lambda={},seed={}",
            self.candidates, self.pi, self.k, self.trials, self.lambda_max, self.seed
        );
        if let Some(t) = self.time_limit {
            id.push_str(&format!(",time_limit={}", t.as_secs_f64()));
        }
        id
    }

    pub fn validate(&self, model: Option<&SgnModel32>) -> Result<()> {
        if self.k == 0 || self.trials == 0 || !(2..=tsplab::search::MAX_LAMBDA).contains(&self.lambda_max) {
            return Err(Error::Config(format!("need k >= 1, trials >= 1, lambda in [2, 5]: {}", self.id())));
        }
        if self.needs_model() && model.is_none() {
            return Err(Error::Config("the sgn sources need a model file (--model)".into()));
        }
        if let (Some(m), CandidateSource::Sgn) = (model, self.candidates) {
            if self.k > m.gamma {
                return Err(Error::Config(format!("k = {} exceeds the model's gamma = {}", self.k, m.gamma)));
            }
        }
        Ok(())
    }
}

/// Everything produced for one instance.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub tour: Tour,
    /// Original-metric length of `tour`.
    pub length: f64,
    pub trials_run: usize,
    /// Best original length after each trial.
    pub trace: Vec<f64>,
    /// Held-Karp bound reached by subgradient ascent.
    pub bound: Option<f64>,
    pub candidates: CandidateSet,
    pub pi: PiVector,
    /// Network inference, ascent and search together.
    pub elapsed: Duration,
    pub interrupted: bool,
}

/// Network outputs mapped back to the instance's units.
pub struct NetworkGuess {
    pub candidates: CandidateSet,
    pub pi: PiVector,
}

pub fn network_guess(inst: &TspInstance, model: &SgnModel32, k: usize) -> Result<NetworkGuess> {
    let gamma = model.gamma;
    if inst.n() <= gamma {
        return Err(Error::InvalidArgument(format!("n = {} needs to exceed the model's gamma = {gamma}", inst.n())));
    }
    let (norm, graph, scale) = prepare_input(inst, gamma)?;
    let batch = GraphBatch::<f32>::single(&graph, norm.coords())?;
    let (out, _) = forward(model, &batch, Mode::Infer)?;
    let candidates = from_scores(&graph, &out.beta_f64(), k)?;
    Ok(NetworkGuess { candidates, pi: PiVector::from(out.pi_f64()).scaled(scale) })
}

pub fn alpha_candidates(inst: &TspInstance, pi: &PiVector, k: usize) -> Result<CandidateSet> {
    let graph = build_sparse_graph(inst, ALPHA_GRAPH_GAMMA.min(inst.n() - 1))?;
    let alpha = alpha_measures(inst, pi, &graph)?;
    Ok(from_alpha(&graph, &alpha, k.min(inst.n() - 1))?)
}

/// Penalties and candidates for one instance, before any search.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub candidates: CandidateSet,
    pub pi: PiVector,
    /// Held-Karp bound reached by subgradient ascent.
    pub bound: Option<f64>,
}

pub fn prepare(inst: &TspInstance, cfg: &SolverConfig, model: Option<&SgnModel32>) -> Result<Prepared> {
    cfg.validate(model)?;
    let n = inst.n();
    let guess = match model {
        Some(m) if cfg.needs_model() => Some(network_guess(inst, m, cfg.k)?),
        _ => None,
    };
    let mut bound = None;
    let pi = match cfg.pi {
        PiSource::Zero => PiVector::zeros(n),
        PiSource::Sgn => guess.as_ref().expect("model checked").pi.clone(),
        PiSource::Subgradient => {
            let res = subgradient_ascent(inst, &AscentSchedule::for_instance(inst));
            bound = Some(res.w_best);
            res.pi_best
        }
    };
    let candidates = match cfg.candidates {
        CandidateSource::Alpha => alpha_candidates(inst, &pi, cfg.k)?,
        CandidateSource::Nearest => from_nearest(inst, cfg.k.min(n - 1))?,
        CandidateSource::Sgn => guess.expect("model checked").candidates,
    };
    Ok(Prepared { candidates, pi, bound })
}

pub fn solve_instance(inst: &TspInstance, cfg: &SolverConfig, model: Option<&SgnModel32>, seed: u64) -> Result<SolveOutcome> {
    let start = Instant::now();
    let Prepared { candidates, pi, bound } = prepare(inst, cfg, model)?;
    let remaining = cfg.time_limit.map(|t| t.saturating_sub(start.elapsed()));
    let trial_cfg = TrialConfig { trials: cfg.trials, time_limit: remaining, seed, lambda_max: cfg.lambda_max };
    let (tour, stats) = run_trials(inst, &candidates, &pi, &trial_cfg)?;
    let length = inst.tour_length(tour.order());
    Ok(SolveOutcome {
        tour,
        length,
        trials_run: stats.trials_run,
        trace: stats.trace.iter().map(|r| r.best_original).collect(),
        bound,
        candidates,
        pi,
        elapsed: start.elapsed(),
        interrupted: stats.interrupted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsplab::instance::generate_uniform;

    #[test]
    fn presets_and_ids() {
        let a = SolverConfig::preset("alpha").unwrap();
        assert_eq!((a.candidates, a.pi), (CandidateSource::Alpha, PiSource::Subgradient));
        assert!(!a.needs_model());
        assert!(SolverConfig::preset("sgn").unwrap().needs_model());
        assert!(SolverConfig::preset("lkh").is_err());
        assert_eq!(a.id(), "cand=alpha,pi=subgradient,k=5,trials=1,lambda=5,seed=0");
        assert_eq!("zero".parse::<PiSource>().unwrap(), PiSource::Zero);
        assert!(matches!(SolverConfig::preset("sgn").unwrap().validate(None), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_pipeline_solves_small_instances() {
        let inst = generate_uniform(9, 4).unwrap();
        let cfg = SolverConfig { trials: 20, ..SolverConfig::preset("alpha").unwrap() };
        let out = solve_instance(&inst, &cfg, None, 1).unwrap();
        let opt = tsplab::oracle::exact_bruteforce(&inst).unwrap();
        assert!((out.length - opt.length).abs() < 1e-9);
        assert!(out.bound.unwrap() <= opt.length + 1e-9);
        assert_eq!(out.trace.len(), 20);
    }
}
