use std::time::Instant;

use grevf_core::prelude::*;
use grevf_core::variational::OptimizationResult;
use log::{debug, info};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{Context, Result};
use crate::report::{Report, TracePoint};

/// Runs the configured experiment on an already loaded dataset.
pub fn run_experiment(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let kernel = cfg.kernel()?;
    let rule = cfg.rule()?;
    let grid = cfg.grid()?;
    let mut report = Report::new(cfg.clone());
    report.set("observations", ds.len() as f64);
    info!("mode {:?}: N = {}, {} quadrature nodes", cfg.mode, ds.len(), rule.len());

    let log_marginal = || grevf_core::exact::log_marginal(ds, &kernel).at("exact", "dataset");

    match cfg.mode {
        Mode::Exact => {
            let post = ExactPosterior::fit_with_rule(ds, &kernel, rule.clone()).at("exact", "dataset")?;
            report.set("log_marginal", post.log_marginal());
            report.set("jitter", post.factor().jitter_used());
            let (m, v) = post.predict_points(&grid).at("exact", "grid")?;
            report.push_points("exact", &grid, &m, Some(&v));
        }
        Mode::VariationalClosed => {
            let fs = cfg.feature_set(&kernel, &rule)?;
            report.set("features", fs.len() as f64);
            let state = optimal_state(&fs, ds).at("variational", "features")?;
            variational_scalars(&mut report, &state, ds, log_marginal()?)?;
            let (m, v) = state.predict_points(&grid).at("variational", "grid")?;
            report.push_points("variational", &grid, &m, Some(&v));
        }
        Mode::VariationalOpt | Mode::ElboTrace => {
            let fs = cfg.feature_set(&kernel, &rule)?;
            report.set("features", fs.len() as f64);
            let optimum = elbo(&optimal_state(&fs, ds).at("variational", "features")?, ds)
                .at("variational", "features")?;
            let res = optimize_elbo(&fs, ds, &(&cfg.optimizer).into()).at("variational", "optimizer")?;
            debug!("optimizer: {} iterations, {} accepted", res.iterations, res.accepted);
            variational_scalars(&mut report, &res.state, ds, log_marginal()?)?;
            report.set("optimal_elbo", optimum);
            report.set("elbo_gap", (res.final_elbo() - optimum).abs());
            report.set("iterations", res.iterations as f64);
            report.set("accepted_steps", res.accepted as f64);
            let (m, v) = res.state.predict_points(&grid).at("variational", "grid")?;
            report.push_points("variational", &grid, &m, Some(&v));
            if cfg.mode == Mode::ElboTrace {
                report.trace = trace_points(&res);
            }
        }
        Mode::Nystrom => {
            let fs = cfg.feature_set(&kernel, &rule)?;
            report.set("features", fs.len() as f64);
            let lambda = cfg.lambda.expect("validated");
            let model = krr_nystrom_fit(&fs, ds, lambda).at("nystrom", "lambda")?;
            report.set("lambda", lambda);
            report.set("krr_objective", model.objective());
            let m = krr_predict(&model, &grid).at("nystrom", "grid")?;
            report.push_points("nystrom", &grid, &m, None);
        }
        Mode::Equivalence => equivalence(&mut report, cfg, ds, &kernel, &rule, &grid)?,
    }

    report.timings.insert("run_seconds".into(), start.elapsed().as_secs_f64());
    report.check_finite()?;
    Ok(report)
}

fn variational_scalars(report: &mut Report, state: &VariationalState, ds: &Dataset, lm: f64) -> Result<()> {
    let e = elbo(state, ds).at("variational", "features")?;
    report.set("elbo", e);
    report.set("log_marginal", lm);
    report.set("kl_to_posterior", lm - e);
    Ok(())
}

fn trace_points(res: &OptimizationResult) -> Vec<TracePoint> {
    res.trace
        .iter()
        .enumerate()
        .map(|(iteration, &elbo)| TracePoint { iteration, elbo })
        .collect()
}

/// Nystrom KRR at `λ = σ²/N` against the optimal variational mean, plus the
/// variational-versus-exact comparison. The three fits run concurrently.
fn equivalence(
    report: &mut Report,
    cfg: &ExperimentConfig,
    ds: &Dataset,
    kernel: &Kernel,
    rule: &QuadratureRule,
    grid: &[f64],
) -> Result<()> {
    let fs = cfg.feature_set(kernel, rule)?;
    report.set("features", fs.len() as f64);
    let lambda = ds.noise_variance() / ds.len() as f64;
    let targets = DualElement::diracs(grid);

    let (exact, variational, krr) = std::thread::scope(|s| {
        let exact = s.spawn(|| -> Result<_> {
            let t = Instant::now();
            let post = ExactPosterior::fit_with_rule(ds, kernel, rule.clone()).at("exact", "dataset")?;
            let pred = post.predict_points(grid).at("exact", "grid")?;
            Ok((post.log_marginal(), pred, t.elapsed().as_secs_f64()))
        });
        let variational = s.spawn(|| -> Result<_> {
            let t = Instant::now();
            let state = optimal_state(&fs, ds).at("variational", "features")?;
            let e = elbo(&state, ds).at("variational", "features")?;
            let (m, c) = optimal_predict(&fs, ds, &targets).at("variational", "grid")?;
            Ok((e, m, c.diagonal(), t.elapsed().as_secs_f64()))
        });
        let krr = s.spawn(|| -> Result<_> {
            let t = Instant::now();
            let model = krr_nystrom_fit(&fs, ds, lambda).at("nystrom", "features")?;
            let m = krr_predict(&model, grid).at("nystrom", "grid")?;
            Ok((m, t.elapsed().as_secs_f64()))
        });
        (
            exact.join().expect("exact fit thread"),
            variational.join().expect("variational fit thread"),
            krr.join().expect("nystrom fit thread"),
        )
    });
    let (lm, (exact_mean, exact_var), t_exact) = exact?;
    let (e, var_mean, var_var, t_var) = variational?;
    let (krr_mean, t_krr) = krr?;

    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
    report.set("lambda", lambda);
    report.set("equivalence_gap", max_diff(&krr_mean, &var_mean));
    report.set("log_marginal", lm);
    report.set("elbo", e);
    report.set("kl_to_posterior", lm - e);
    report.set("variational_exact_mean_gap", max_diff(&var_mean, &exact_mean));
    report.set("variational_exact_variance_gap", max_diff(&var_var, &exact_var));
    report.push_points("exact", grid, &exact_mean, Some(&exact_var));
    report.push_points("variational", grid, &var_mean, Some(&var_var));
    report.push_points("nystrom", grid, &krr_mean, None);
    report.timings.insert("exact_seconds".into(), t_exact);
    report.timings.insert("variational_seconds".into(), t_var);
    report.timings.insert("nystrom_seconds".into(), t_krr);
    Ok(())
}
