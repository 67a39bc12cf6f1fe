//! The eight acceptance criteria, one PASS/FAIL line each.
//!
//! Heavy: roughly fifteen minutes on a single core. `UOS_CRITERIA=1,8`
//! restricts the run to a subset.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use uos_core::bounds::{noisy_bound, theorem2_bound};
use uos_core::experiments::{
    estimate_width_ub, find_threshold, generate_signal, run_noise_sweep, run_phase, trial_seed,
    NoiseSweepConfig, PhaseConfig, ScenarioKind, ScenarioSpec, ThresholdSearch,
};
use uos_core::solver::{
    recover, replicate, LatentGroups, MeasurementEnsemble, Method, PenalizedProblem, RecoveryMode, SolverConfig,
};
use uos_core::wavelet::{blocks, haar_analyze, k_measured, recover_in_wavelet_domain};
use uos_core::{GroupStructure, SubspaceModel};

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

// written straight to stderr so the lines survive the harness's capture
fn report(v: &Verdict) {
    use std::io::Write;
    let _ = writeln!(
        std::io::stderr(),
        "[{}] criterion {} {}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.id,
        v.name,
        v.detail
    );
}

fn bound_via_cli(m: usize, k: usize, b: usize) -> f64 {
    let out = Command::new(env!("CARGO_BIN_EXE_uos"))
        .args(["bound", "--M", &m.to_string(), "--k", &k.to_string(), "--B", &b.to_string(), "--json"])
        .output()
        .expect("run uos");
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    v["theorem2"].as_f64().unwrap()
}

fn criterion1() -> Verdict {
    let t = Instant::now();
    let points = [((100, 5, 20), 380.0, 1.0), ((100, 5, 40), 630.0, 10.0), ((16382, 47, 2), 1690.0, 10.0)];
    let mut pass = true;
    let mut detail = Vec::new();
    for ((m, k, b), quoted, tol) in points {
        let v = bound_via_cli(m, k, b);
        pass &= (v - quoted).abs() <= tol;
        detail.push(format!("{v:.1} vs {quoted}"));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    Verdict {
        id: 1,
        name: "bound reproduction",
        pass,
        detail: format!("{} in {:.0} ms", detail.join(", "), elapsed.as_secs_f64() * 1e3),
    }
}

fn criterion2() -> Verdict {
    let t = Instant::now();
    let scenario = ScenarioSpec::new(ScenarioKind::NoOverlap, 100, 20, 5).with_seed(11);
    let glasso = run_phase(&PhaseConfig {
        scenario: scenario.clone(),
        n_values: vec![150, 380],
        trials: 50,
        methods: vec![Method::Glasso],
        seed: 11,
        solver: SolverConfig::default(),
        record_timing: false,
    })
    .unwrap();
    let lasso = run_phase(&PhaseConfig {
        scenario,
        n_values: vec![380],
        trials: 50,
        methods: vec![Method::Lasso],
        seed: 11,
        solver: SolverConfig::default(),
        record_timing: false,
    })
    .unwrap();
    let elapsed = t.elapsed();
    let g380 = glasso.cell(380, Method::Glasso).unwrap().success_rate;
    let g150 = glasso.cell(150, Method::Glasso).unwrap().success_rate;
    let l380 = lasso.cell(380, Method::Lasso).unwrap().success_rate;
    Verdict {
        id: 2,
        name: "phase transition at the bound",
        pass: g380 >= 0.9 && g150 <= 0.1 && l380 <= 0.1 && elapsed <= Duration::from_secs(600),
        detail: format!(
            "glasso n=380 {g380:.2}, n=150 {g150:.2}; lasso n=380 {l380:.2}; {:.0} s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion3() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [50usize, 100] {
        let mut ns = Vec::new();
        for (kind, overlap) in [(ScenarioKind::NoOverlap, 0), (ScenarioKind::PartialOverlap, 3)] {
            let r = find_threshold(&ThresholdSearch {
                scenario: ScenarioSpec::new(kind, m, 6, m / 10).with_overlap(overlap),
                method: Method::Glasso,
                trials: 20,
                seed: 3,
                target: 0.9,
                start: 20,
                stop: 400,
                coarse: 10,
                fine: 2,
                solver: SolverConfig::default(),
            })
            .unwrap();
            ns.push(r.n);
        }
        match (ns[0], ns[1]) {
            (Some(a), Some(b)) => {
                let ratio = a.max(b) as f64 / a.min(b) as f64;
                pass &= ratio <= 1.15;
                detail.push(format!("M={m}: {a} vs {b} (ratio {ratio:.3})"));
            }
            _ => {
                pass = false;
                detail.push(format!("M={m}: threshold not reached {ns:?}"));
            }
        }
    }
    Verdict {
        id: 3,
        name: "universality",
        pass,
        detail: detail.join("; "),
    }
}

fn criterion4() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (m, b, k) in [(100usize, 20usize, 5usize), (40, 6, 4)] {
        let (sig, groups) = generate_signal(&ScenarioSpec::new(ScenarioKind::NoOverlap, m, b, k).with_seed(5)).unwrap();
        let w = estimate_width_ub(&sig.vector(), &groups, 10_000, 5).unwrap();
        let bound = theorem2_bound(m, k, b).unwrap();
        let se = (w.stderr.powi(2) + w.construction_stderr.powi(2)).sqrt();
        let ok = w.mean_dist_sq <= w.construction_mean + 3.0 * se
            && w.construction_mean <= bound + 3.0 * w.construction_stderr;
        pass &= ok;
        detail.push(format!(
            "({m},{b},{k}) {:.2} <= {:.2} <= {:.2}",
            w.mean_dist_sq, w.construction_mean, bound
        ));
    }
    Verdict {
        id: 4,
        name: "width sandwich",
        pass,
        detail: detail.join("; "),
    }
}

fn criterion5() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_uos"))
        .args(["verify-lemmas", "--trials", "100000", "--seed", "7"])
        .output()
        .expect("run uos");
    let failed_lines = String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| l.starts_with("FAIL"))
        .count();
    Verdict {
        id: 5,
        name: "lemma oracles",
        pass: out.status.code() == Some(0),
        detail: format!("exit {:?}, {failed_lines} failing checks", out.status.code()),
    }
}

fn criterion6() -> Verdict {
    let (m, b, k) = (40usize, 6usize, 4usize);
    let eps = 0.5;
    let n = noisy_bound(theorem2_bound(m, k, b).unwrap(), eps).unwrap().ceil() as usize;
    let delta = 0.1;
    let trials = 30;
    let mut hits = 0;
    for t in 0..trials {
        let seed = trial_seed(21, t);
        let (sig, groups) = generate_signal(&ScenarioSpec::new(ScenarioKind::NoOverlap, m, b, k).with_seed(seed)).unwrap();
        let model = SubspaceModel::from_groups(&groups).unwrap();
        let x = sig.vector();
        let phi = MeasurementEnsemble::gaussian(n, x.len(), seed);
        let theta = {
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(7);
            let v = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
            &v * (delta / v.norm())
        };
        let y = phi.measure(&x).unwrap() + theta;
        let r = recover(&y, &phi, &model, RecoveryMode::Noisy { delta }, &SolverConfig::default(), Some(&x)).unwrap();
        if r.abs_err.unwrap() <= 2.0 * delta / eps {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    Verdict {
        id: 6,
        name: "noisy recovery",
        pass: rate >= 0.9,
        detail: format!("n={n}, {hits}/{trials} within 2δ/ε"),
    }
}

fn criterion7() -> Verdict {
    let p = 1024;
    let signal = blocks(p);
    let k = k_measured(&haar_analyze(&signal, 10).unwrap()).unwrap();
    let n = theorem2_bound(p - 2, k, 2).unwrap().ceil() as usize;
    let trials = 20;
    let mut hits = 0;
    for t in 0..trials {
        let phi = MeasurementEnsemble::gaussian(n, p, trial_seed(31, t));
        let r = recover_in_wavelet_domain(&signal, &phi, None, Method::Glasso, RecoveryMode::Exact, &SolverConfig::default())
            .unwrap();
        if r.coefficients.success {
            hits += 1;
        }
    }
    let sweep = run_noise_sweep(&NoiseSweepConfig::default()).unwrap();
    let exact = hits as f64 / trials as f64 >= 0.9;
    Verdict {
        id: 7,
        name: "wavelet pipeline",
        pass: exact && sweep.ordered(),
        detail: format!(
            "k={k} n={n}: {hits}/{trials} exact; noise ordering {}",
            sweep
                .rows
                .iter()
                .map(|r| format!("σ={}:{}", r.sigma, if r.ordered { "ok" } else { "violated" }))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
}

/// `max_G ‖(Aᵀy)_G‖` computed without the solver.
fn lambda_max_oracle(a: &DMatrix<f64>, y: &DVector<f64>, blocks: &[Vec<usize>]) -> f64 {
    let g = a.transpose() * y;
    blocks
        .iter()
        .map(|b| b.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn criterion8() -> Verdict {
    let mut detail = Vec::new();

    // certificates along full continuation paths, disjoint and overlapping
    let mut worst = 0.0f64;
    let mut converged = 0;
    for (kind, n) in [(ScenarioKind::NoOverlap, 380), (ScenarioKind::NoOverlap, 200), (ScenarioKind::RandomOverlap, 400)] {
        for t in 0..3 {
            let seed = trial_seed(41, t);
            let (sig, groups) = generate_signal(&ScenarioSpec::new(kind, 100, 20, 5).with_seed(seed)).unwrap();
            let model = SubspaceModel::from_groups(&groups).unwrap();
            let x = sig.vector();
            let phi = MeasurementEnsemble::gaussian(n, x.len(), seed);
            let y = phi.measure(&x).unwrap();
            let r = recover(&y, &phi, &model, RecoveryMode::Exact, &SolverConfig::default(), Some(&x)).unwrap();
            for pt in r.path.iter().filter(|pt| pt.converged) {
                worst = worst.max(pt.certificate);
                converged += 1;
            }
        }
    }
    let cert_ok = converged > 0 && worst <= 1e-6;
    detail.push(format!("{converged} converged solves, worst certificate {worst:.1e}"));

    // replication on disjoint groups against the groups placed directly on the
    // original (shuffled) coordinates
    let (m, b) = (30, 4);
    let p = m * b;
    let mut order: Vec<usize> = (0..p).collect();
    {
        use rand::seq::SliceRandom;
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(2));
    }
    let groups: Vec<Vec<usize>> = order.chunks(b).map(|c| c.to_vec()).collect();
    let gs = GroupStructure::new(p, groups.clone()).unwrap();
    let model = SubspaceModel::from_groups(&gs).unwrap();
    let phi = MeasurementEnsemble::gaussian(60, p, 9);
    let mut x = DVector::zeros(p);
    for (j, &g) in [3usize, 17, 22].iter().enumerate() {
        for (i, &c) in groups[g].iter().enumerate() {
            x[c] = 1.0 + 0.25 * (i + j) as f64;
        }
    }
    let y = phi.measure(&x).unwrap();
    let (latent_design, latent_groups) = replicate(&phi.matrix, &model).unwrap();
    let direct_groups = LatentGroups::new(p, groups.clone(), vec![]).unwrap();
    let cfg = SolverConfig {
        max_iters: 50_000,
        tol: 1e-15,
        certificate_tol: 1e-13,
        ..SolverConfig::default()
    };
    let via_latent = PenalizedProblem::new(&y, &latent_design, &latent_groups).unwrap();
    let direct = PenalizedProblem::new(&y, &phi.matrix, &direct_groups).unwrap();
    let lambda = 0.1 * direct.lambda_max();
    let zl = via_latent.solve(lambda, None, &cfg).unwrap().latent;
    let zd = direct.solve(lambda, None, &cfg).unwrap().latent;
    let mut xl = DVector::zeros(p);
    for (g, grp) in groups.iter().enumerate() {
        for (k, &c) in grp.iter().enumerate() {
            xl[c] = zl[g * b + k];
        }
    }
    let rep_gap = (&xl - &zd).amax();
    let rep_ok = rep_gap <= 1e-10;
    detail.push(format!("replication gap {rep_gap:.1e}"));

    // λ_max against the direct formula, and the null solution on either side
    let oracle = lambda_max_oracle(&phi.matrix, &y, &groups);
    let lm = direct.lambda_max();
    let lm_gap = (lm - oracle).abs() / oracle;
    let above = direct.solve(lm * (1.0 + 1e-8), None, &cfg).unwrap().latent.amax();
    let below = direct.solve(lm * (1.0 - 1e-4), None, &cfg).unwrap().latent.amax();
    let lm_ok = lm_gap <= 1e-8 && above == 0.0 && below > 0.0;
    detail.push(format!("lambda_max rel gap {lm_gap:.1e}, zero above: {}, nonzero below: {}", above == 0.0, below > 0.0));

    Verdict {
        id: 8,
        name: "solver correctness",
        pass: cert_ok && rep_ok && lm_ok,
        detail: detail.join("; "),
    }
}

fn selected(id: usize) -> bool {
    match std::env::var("UOS_CRITERIA") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

#[test]
fn acceptance_criteria() {
    let verdicts: Vec<Verdict> = [
        criterion1 as fn() -> Verdict,
        criterion2,
        criterion3,
        criterion4,
        criterion5,
        criterion6,
        criterion7,
        criterion8,
    ]
    .iter()
    .enumerate()
    .filter(|(i, _)| selected(i + 1))
    .map(|(_, c)| {
        let v = c();
        report(&v);
        v
    })
    .collect();
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
