//! Experiment presets: the two-initializer convergence comparison, the
//! success-probability sweep, the noisy estimation-error sweep, and the
//! theory checks.

use rayon::prelude::*;

use relu_recover::evaluation::{
    best_permutation_match, check_local_strong_convexity, concentration_sweep, is_success,
    lipschitz_probe, ProbeRecord,
};
use relu_recover::teacher::{generate_dataset, make_ground_truth};
use relu_recover::training::{gradient_descent, random_init, warm_start_init};
use relu_recover::{derive_seed, hash_label, Dataset, Error, GDConfig, Result, RngStream,
    TeacherSpec, Trajectory};

use crate::config::{ExperimentConfig, InitKind};
use crate::table::ResultTable;

pub const SUCCESS_THRESHOLD: f64 = 1e-3;
const SIGMA_MIN: f64 = 1.0;
const SIGMA_MAX: f64 = 2.0;

/// Per-trial seed: hash of master seed, experiment label, grid cell, and
/// trial index, so adding grid points never perturbs existing cells.
pub fn trial_seed(master: u64, experiment: &str, d: usize, n: usize, trial: usize) -> u64 {
    derive_seed(master, &[hash_label(experiment), d as u64, n as u64, trial as u64])
}

fn teacher_for(cfg: &ExperimentConfig, d: usize, rng: &mut RngStream) -> Result<TeacherSpec> {
    Ok(make_ground_truth(d, cfg.k, SIGMA_MIN, SIGMA_MAX, rng)?.with_noise(cfg.nu))
}

fn initial_point(
    cfg: &ExperimentConfig,
    spec: &TeacherSpec,
    rng: &mut RngStream,
) -> Result<relu_recover::Matrix> {
    match cfg.init {
        InitKind::Warm => warm_start_init(spec, cfg.warm_radius * spec.sigma_min(), rng),
        InitKind::Random => random_init(spec.d(), spec.k(), rng),
    }
}

#[derive(Debug)]
pub enum CurveOutcome {
    Converged(Trajectory),
    Diverged { iteration: usize },
}

impl CurveOutcome {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            CurveOutcome::Converged(t) => Some(t),
            CurveOutcome::Diverged { .. } => None,
        }
    }
}

#[derive(Debug)]
pub struct Fig2aRun {
    pub table: ResultTable,
    pub warm: CurveOutcome,
    pub random: CurveOutcome,
}

/// One dataset, two gradient-descent runs (warm start and random init),
/// log10 losses side by side. Divergence of one curve leaves the other
/// intact; the failed curve's column simply ends early.
pub fn run_fig2a(cfg: &ExperimentConfig) -> Result<Fig2aRun> {
    let d = cfg.d.unwrap_or(10);
    let n = cfg.n.unwrap_or(5000);
    let root = RngStream::new(trial_seed(cfg.master_seed, "fig2a", d, n, 0));
    let spec = teacher_for(cfg, d, &mut root.derive(&[hash_label("teacher")]))?;
    let data = generate_dataset(&spec, n, &mut root.derive(&[hash_label("data")]))?;

    let gd = GDConfig {
        eta: cfg.eta,
        max_iters: cfg.iters,
        grad_tol: cfg.grad_tol,
        record_every: 1,
    };
    let run = |w0: &relu_recover::Matrix| -> Result<CurveOutcome> {
        match gradient_descent(w0, &data, &gd, Some(&spec.w_star)) {
            Ok(t) => Ok(CurveOutcome::Converged(t)),
            Err(Error::Diverged { iteration, .. }) => Ok(CurveOutcome::Diverged { iteration }),
            Err(e) => Err(e),
        }
    };
    let w0_warm = warm_start_init(
        &spec,
        cfg.warm_radius * spec.sigma_min(),
        &mut root.derive(&[hash_label("warm_init")]),
    )?;
    let w0_random = random_init(d, cfg.k, &mut root.derive(&[hash_label("random_init")]))?;
    let warm = run(&w0_warm)?;
    let random = run(&w0_random)?;

    let mut table = ResultTable::new(
        vec!["iter", "log10_loss_warm", "log10_loss_random"],
        cfg.clone(),
    );
    for (name, outcome) in [("warm", &warm), ("random", &random)] {
        if let CurveOutcome::Diverged { iteration } = outcome {
            table.notes.push(format!("{name} curve diverged at iteration {iteration}"));
        }
    }
    let cell = |outcome: &CurveOutcome, idx: usize| -> String {
        match outcome.trajectory() {
            Some(t) if idx < t.losses.len() => {
                format!("{:.16e}", t.losses[idx].max(1e-300).log10())
            }
            _ => String::new(),
        }
    };
    let len = [&warm, &random]
        .iter()
        .filter_map(|o| o.trajectory().map(|t| t.iterations.len()))
        .max()
        .unwrap_or(0);
    for idx in 0..len {
        let iter = warm
            .trajectory()
            .filter(|t| idx < t.iterations.len())
            .or_else(|| random.trajectory())
            .map(|t| t.iterations[idx])
            .unwrap_or(idx);
        table.push_row(vec![iter.to_string(), cell(&warm, idx), cell(&random, idx)]);
    }
    Ok(Fig2aRun { table, warm, random })
}

/// One grid-cell trial for the sweeps: fresh teacher, dataset, and init from
/// the trial seed, then gradient descent to the iteration budget or tolerance.
fn sweep_trial(
    cfg: &ExperimentConfig,
    experiment: &str,
    d: usize,
    n: usize,
    trial: usize,
) -> Result<Option<(relu_recover::Matrix, TeacherSpec)>> {
    let root = RngStream::new(trial_seed(cfg.master_seed, experiment, d, n, trial));
    let spec = teacher_for(cfg, d, &mut root.derive(&[hash_label("teacher")]))?;
    let data = generate_dataset(&spec, n, &mut root.derive(&[hash_label("data")]))?;
    let w0 = initial_point(cfg, &spec, &mut root.derive(&[hash_label("init")]))?;
    let gd = GDConfig {
        eta: cfg.eta,
        max_iters: cfg.iters,
        grad_tol: cfg.grad_tol,
        record_every: cfg.iters,
    };
    match gradient_descent(&w0, &data, &gd, None) {
        Ok(t) => Ok(Some((t.final_w, spec))),
        Err(Error::Diverged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Success-count sweep over (d, N/d) cells: `d,N,ratio,success_count,trials`.
/// A diverged trial counts as a failure.
pub fn run_fig2b(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cells: Vec<(usize, usize)> = cfg
        .effective_d_grid()
        .into_iter()
        .flat_map(|d| cfg.ratios.iter().map(move |&r| (d, r)))
        .collect();
    let rows: Vec<Result<Vec<String>>> = cells
        .par_iter()
        .map(|&(d, ratio)| {
            let n = ratio * d;
            let mut successes = 0usize;
            for trial in 0..cfg.trials {
                if let Some((w, spec)) = sweep_trial(cfg, "fig2b", d, n, trial)? {
                    if is_success(&w, &spec.w_star, SUCCESS_THRESHOLD)? {
                        successes += 1;
                    }
                }
            }
            Ok(vec![
                d.to_string(),
                n.to_string(),
                ratio.to_string(),
                successes.to_string(),
                cfg.trials.to_string(),
            ])
        })
        .collect();
    let mut table = ResultTable::new(
        vec!["d", "N", "ratio", "success_count", "trials"],
        cfg.clone(),
    );
    for row in rows {
        table.push_row(row?);
    }
    Ok(table)
}

/// Estimation-error sweep under label noise: `d,N,ratio,avg_error` with the
/// permutation-matched Frobenius error averaged over trials.
pub fn run_fig2c(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cells: Vec<(usize, usize)> = cfg
        .effective_d_grid()
        .into_iter()
        .flat_map(|d| cfg.ratios.iter().map(move |&r| (d, r)))
        .collect();
    let rows: Vec<Result<Vec<String>>> = cells
        .par_iter()
        .map(|&(d, ratio)| {
            let n = ratio * d;
            let mut sum = 0.0;
            for trial in 0..cfg.trials {
                let (w, spec) = sweep_trial(cfg, "fig2c", d, n, trial)?.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "fig2c trial diverged at d={d}, N={n}, trial={trial}"
                    ))
                })?;
                sum += best_permutation_match(&w, &spec.w_star)?.error;
            }
            Ok(vec![
                d.to_string(),
                n.to_string(),
                ratio.to_string(),
                format!("{:.16e}", sum / cfg.trials as f64),
            ])
        })
        .collect();
    let mut table = ResultTable::new(vec!["d", "N", "ratio", "avg_error"], cfg.clone());
    for row in rows {
        table.push_row(row?);
    }
    Ok(table)
}

pub const THEORY_PROBES: usize = 10;
pub const THEORY_RADIUS_FACTOR: f64 = 0.1;
pub const CONCENTRATION_N_LIST: [usize; 7] = [1024, 2048, 4096, 8192, 16384, 32768, 65536];
pub const CONCENTRATION_MC_REF: usize = 1_000_000;

/// Runs the three local-geometry checks and emits one probe table:
/// `check,probe_id,seed,N,radius,value`, with summary rows (`mu_hat`,
/// `l_hat`, `concentration_slope`) appended. A failing check becomes an
/// `error_*` row instead of aborting the other checks.
pub fn run_check_theory(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let d = cfg.d.unwrap_or(10);
    let n = cfg.n.unwrap_or(100_000);
    let root = RngStream::new(trial_seed(cfg.master_seed, "check-theory", d, n, 0));
    let spec = teacher_for(cfg, d, &mut root.derive(&[hash_label("teacher")]))?;
    let radius = THEORY_RADIUS_FACTOR * spec.sigma_min();

    let mut table = ResultTable::new(
        vec!["check", "probe_id", "seed", "N", "radius", "value"],
        cfg.clone(),
    );
    let push_probes = |probes: &[ProbeRecord], table: &mut ResultTable| {
        for p in probes {
            table.push_row(vec![
                p.check.to_string(),
                p.probe_id.to_string(),
                p.seed.to_string(),
                p.n.to_string(),
                format!("{:.16e}", p.radius),
                format!("{:.16e}", p.value),
            ]);
        }
    };
    let push_summary = |name: &str, value: f64, table: &mut ResultTable| {
        table.push_row(vec![
            name.to_string(),
            "0".to_string(),
            "0".to_string(),
            "0".to_string(),
            format!("{:.16e}", 0.0),
            format!("{:.16e}", value),
        ]);
    };

    match check_local_strong_convexity(
        &spec,
        n,
        THEORY_PROBES,
        radius,
        &mut root.derive(&[hash_label("strong_convexity")]),
    ) {
        Ok((mu_hat, probes)) => {
            push_probes(&probes, &mut table);
            push_summary("mu_hat", mu_hat, &mut table);
        }
        Err(e) => table.notes.push(format!("strong_convexity failed: {e}")),
    }
    match lipschitz_probe(
        &spec,
        THEORY_PROBES,
        radius,
        n,
        &mut root.derive(&[hash_label("lipschitz")]),
    ) {
        Ok((l_hat, probes)) => {
            push_probes(&probes, &mut table);
            push_summary("l_hat", l_hat, &mut table);
        }
        Err(e) => table.notes.push(format!("lipschitz failed: {e}")),
    }
    let w_probe = warm_start_init(
        &spec,
        cfg.warm_radius * spec.sigma_min(),
        &mut root.derive(&[hash_label("probe_point")]),
    )?;
    match concentration_sweep(
        &spec,
        &w_probe,
        &CONCENTRATION_N_LIST,
        cfg.trials,
        CONCENTRATION_MC_REF,
        &mut root.derive(&[hash_label("concentration")]),
    ) {
        Ok((slope, probes)) => {
            push_probes(&probes, &mut table);
            push_summary("concentration_slope", slope, &mut table);
        }
        Err(e) => table.notes.push(format!("concentration failed: {e}")),
    }
    Ok(table)
}

#[derive(Debug)]
pub struct TrainRun {
    pub table: ResultTable,
    pub trajectory: Trajectory,
    pub spec: TeacherSpec,
}

/// Single training run with full trajectory logging:
/// `iter,loss,grad_norm,param_error`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    let d = cfg.d.unwrap_or(10);
    let n = cfg.n.unwrap_or(5000);
    let root = RngStream::new(trial_seed(cfg.master_seed, "train", d, n, 0));
    let spec = teacher_for(cfg, d, &mut root.derive(&[hash_label("teacher")]))?;
    let data = generate_dataset(&spec, n, &mut root.derive(&[hash_label("data")]))?;
    let w0 = initial_point(cfg, &spec, &mut root.derive(&[hash_label("init")]))?;
    let gd = GDConfig {
        eta: cfg.eta,
        max_iters: cfg.iters,
        grad_tol: cfg.grad_tol,
        record_every: 1,
    };
    let trajectory = gradient_descent(&w0, &data, &gd, Some(&spec.w_star))?;
    let mut table = ResultTable::new(
        vec!["iter", "loss", "grad_norm", "param_error"],
        cfg.clone(),
    );
    for (idx, &it) in trajectory.iterations.iter().enumerate() {
        table.push_row(vec![
            it.to_string(),
            format!("{:.16e}", trajectory.losses[idx]),
            format!("{:.16e}", trajectory.grad_norms[idx]),
            format!("{:.16e}", trajectory.param_errors.as_ref().unwrap()[idx]),
        ]);
    }
    Ok(TrainRun {
        table,
        trajectory,
        spec,
    })
}

/// Draws one dataset from a fresh teacher; serialized in the dataset CSV
/// format rather than a result table.
pub fn run_gen_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = cfg.d.unwrap_or(10);
    let n = cfg.n.unwrap_or(5000);
    let root = RngStream::new(trial_seed(cfg.master_seed, "gen-data", d, n, 0));
    let spec = teacher_for(cfg, d, &mut root.derive(&[hash_label("teacher")]))?;
    generate_dataset(&spec, n, &mut root.derive(&[hash_label("data")]))
}
