//! Phase-transition sweeps: success probability against the number of measurements.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{generate_signal, ScenarioSpec};
use crate::error::{Error, Result};
use crate::solver::{lasso_model, recover, MeasurementEnsemble, Method, RecoveryMode, SolverConfig};
use crate::subspace::SubspaceModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub scenario: ScenarioSpec,
    pub n_values: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Wall-clock timings make the CSV differ between runs, so they are off
    /// by default and `runtime_ms` is written as 0.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Glasso]
}

/// One row of the CSV: a single solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub method: Method,
    pub scenario: String,
    /// NaN when the solve failed.
    pub rel_err: f64,
    pub success: bool,
    pub iters: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseCell {
    pub n: usize,
    pub method: Method,
    pub scenario: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rel_err: f64,
    pub mean_runtime_ms: f64,
    /// Solves that returned an error instead of a result.
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub cells: Vec<PhaseCell>,
    pub rows: Vec<TrialRow>,
}

impl PhaseDiagram {
    pub fn cell(&self, n: usize, method: Method) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.n == n && c.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Seed of trial `t` under a base seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

/// A single seeded solve: signal from `trial_seed`, Gaussian ensemble
/// `(n, p, trial_seed)`, exact-mode recovery. Solver errors are recorded in
/// the row rather than propagated.
pub fn run_trial(
    spec: &ScenarioSpec,
    n: usize,
    method: Method,
    trial: usize,
    seed: u64,
    cfg: &SolverConfig,
    record_timing: bool,
) -> Result<TrialRow> {
    let tseed = trial_seed(seed, trial);
    let (sig, groups) = generate_signal(&spec.clone().with_seed(tseed))?;
    let model = match method {
        Method::Glasso => SubspaceModel::from_groups(&groups)?,
        Method::Lasso => lasso_model(groups.p, &groups.unpenalized)?,
    };
    let x = sig.vector();
    let phi = MeasurementEnsemble::gaussian(n, groups.p, tseed);
    let y = phi.measure(&x)?;
    let start = Instant::now();
    let res = recover(&y, &phi, &model, RecoveryMode::Exact, cfg, Some(&x));
    let runtime_ms = if record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let (rel_err, success, iters) = match res {
        Ok(r) => (r.rel_err.unwrap_or(f64::NAN), r.success, r.iterations),
        Err(_) => (f64::NAN, false, 0),
    };
    Ok(TrialRow {
        trial,
        seed: tseed,
        n,
        method,
        scenario: spec.kind.as_str().to_string(),
        rel_err,
        success,
        iters,
        runtime_ms,
    })
}

fn aggregate(rows: &[TrialRow], n: usize, method: Method, scenario: &str) -> PhaseCell {
    let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.n == n && r.method == method).collect();
    let trials = mine.len();
    let successes = mine.iter().filter(|r| r.success).count();
    let finite: Vec<f64> = mine.iter().map(|r| r.rel_err).filter(|e| e.is_finite()).collect();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let runtimes: Vec<f64> = mine.iter().map(|r| r.runtime_ms).collect();
    PhaseCell {
        n,
        method,
        scenario: scenario.to_string(),
        trials,
        successes,
        success_rate: successes as f64 / trials.max(1) as f64,
        mean_rel_err: mean(&finite),
        mean_runtime_ms: mean(&runtimes),
        failures: trials - finite.len(),
    }
}

/// Runs every `(method, n, trial)` solve of `cfg`, concurrently, and
/// aggregates in a fixed order so the output depends only on the config.
pub fn run_phase(cfg: &PhaseConfig) -> Result<PhaseDiagram> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if cfg.n_values.is_empty() || cfg.n_values.contains(&0) {
        return Err(Error::Config("n values must be positive".into()));
    }
    cfg.scenario.validate()?;
    cfg.solver.validate()?;
    let jobs: Vec<(Method, usize, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| {
            cfg.n_values
                .iter()
                .flat_map(move |&n| (0..cfg.trials).map(move |t| (m, n, t)))
        })
        .collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(m, n, t)| run_trial(&cfg.scenario, n, m, t, cfg.seed, &cfg.solver, cfg.record_timing))
        .collect::<Result<_>>()?;
    let scenario = cfg.scenario.kind.as_str();
    let cells = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.n_values.iter().map(move |&n| (m, n)))
        .map(|(m, n)| aggregate(&rows, n, m, scenario))
        .collect();
    Ok(PhaseDiagram { cells, rows })
}

/// Smallest `n` reaching `target` success rate: a coarse upward scan with
/// step `coarse`, then a scan with step `fine` inside the last coarse gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub scenario: ScenarioSpec,
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    pub target: f64,
    pub start: usize,
    pub stop: usize,
    pub coarse: usize,
    pub fine: usize,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// `None` if the target was never reached up to `stop`.
    pub n: Option<usize>,
    /// Every evaluated `(n, success rate)`, in evaluation order.
    pub evaluated: Vec<(usize, f64)>,
}

pub fn find_threshold(s: &ThresholdSearch) -> Result<ThresholdResult> {
    if s.coarse == 0 || s.fine == 0 || s.start == 0 || s.start > s.stop {
        return Err(Error::Config("invalid threshold search range".into()));
    }
    let mut evaluated = Vec::new();
    let rate = |n: usize, evaluated: &mut Vec<(usize, f64)>| -> Result<f64> {
        let d = run_phase(&PhaseConfig {
            scenario: s.scenario.clone(),
            n_values: vec![n],
            trials: s.trials,
            methods: vec![s.method],
            seed: s.seed,
            solver: s.solver.clone(),
            record_timing: false,
        })?;
        let r = d.cells[0].success_rate;
        evaluated.push((n, r));
        Ok(r)
    };
    let mut prev = None;
    let mut n = s.start;
    let hit = loop {
        if rate(n, &mut evaluated)? >= s.target {
            break Some(n);
        }
        if n >= s.stop {
            break None;
        }
        prev = Some(n);
        n = (n + s.coarse).min(s.stop);
    };
    let Some(hit) = hit else {
        return Ok(ThresholdResult { n: None, evaluated });
    };
    if let Some(lo) = prev {
        let mut m = lo + s.fine;
        while m < hit {
            if rate(m, &mut evaluated)? >= s.target {
                return Ok(ThresholdResult { n: Some(m), evaluated });
            }
            m += s.fine;
        }
    }
    Ok(ThresholdResult { n: Some(hit), evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ScenarioKind;

    fn small() -> PhaseConfig {
        PhaseConfig {
            scenario: ScenarioSpec::new(ScenarioKind::NoOverlap, 10, 3, 2),
            n_values: vec![8, 24],
            trials: 3,
            methods: vec![Method::Glasso, Method::Lasso],
            seed: 11,
            solver: SolverConfig::default(),
            record_timing: false,
        }
    }

    #[test]
    fn deterministic_csv() {
        let a = run_phase(&small()).unwrap().to_csv_string().unwrap();
        let b = run_phase(&small()).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("trial,seed,n,method,scenario,rel_err,success,iters,runtime_ms"));
        assert_eq!(a.lines().count(), 1 + 2 * 2 * 3);
    }

    #[test]
    fn cells_are_consistent() {
        let d = run_phase(&small()).unwrap();
        for c in &d.cells {
            assert_eq!(c.trials, 3);
            assert!((0.0..=1.0).contains(&c.success_rate));
        }
        // 24 measurements of a 6-sparse vector in R^30 always succeed
        assert_eq!(d.cell(24, Method::Glasso).unwrap().success_rate, 1.0);
    }

    #[test]
    fn rejects_empty_runs() {
        let mut c = small();
        c.trials = 0;
        assert!(run_phase(&c).is_err());
    }
}
