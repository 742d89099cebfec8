use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use abstain::calibration::{
    emit_score_partition, emit_simplex_partition, lemma_identities_check, sweep_bound, write_score_csv,
    write_simplex_csv, SweepConfig,
};
use abstain::data::{
    bayes_risk_monte_carlo, calibrate_tau, read_sparse, save_sparse, split, Dataset, SyntheticSpec,
};
use abstain::kernel::KernelSpec;
use abstain::loss::{empirical_risk, RiskReport};
use abstain::solver::{
    train_bep, train_ova, train_subgradient, BepOptions, KernelModel, OvaOptions, SubgradientOptions,
};
use abstain::{AbstainLoss, Prediction, SurrogateKind};

use crate::{CliError, Command, Figure, RunConfig};

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match cmd {
        Command::Synth => synth(cfg),
        Command::Train => train(cfg),
        Command::Predict => predict(cfg),
        Command::Eval => eval(cfg),
        Command::Sweep => sweep(cfg),
        Command::Verify => verify(cfg),
        Command::Partition => partition(cfg),
        Command::Calibrate => calibrate(cfg),
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

/// CSV destination: `--out` when given, standard output otherwise.
fn csv_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn synthetic_spec(cfg: &RunConfig) -> Result<SyntheticSpec, CliError> {
    let spec = SyntheticSpec {
        n_classes: cfg.n.unwrap_or(8),
        sigma: cfg.sigma,
        seed: cfg.seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = synthetic_spec(cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    fs::create_dir_all(&dir)?;
    let train = spec.sample(cfg.m_train, 0)?;
    let test = spec.sample(cfg.m_test, 1)?;
    let train_path = dir.join("train.svm");
    let test_path = dir.join("test.svm");
    let proto_path = dir.join("prototypes.csv");
    save_sparse(&train_path, &train)?;
    save_sparse(&test_path, &test)?;
    let mut w = BufWriter::new(File::create(&proto_path)?);
    writeln!(w, "class,x1,x2")?;
    for (y, v) in spec.prototypes().iter().enumerate() {
        writeln!(w, "{},{},{}", y + 1, v[0], v[1])?;
    }
    w.flush()?;
    eprintln!(
        "synthetic data: {} classes, sigma {}, seed {} -> {}",
        spec.n_classes,
        spec.sigma,
        spec.seed,
        dir.display()
    );
    let mut out = io::stdout().lock();
    writeln!(out, "file,rows")?;
    writeln!(out, "{},{}", train_path.display(), train.len())?;
    writeln!(out, "{},{}", test_path.display(), test.len())?;
    writeln!(out, "{},{}", proto_path.display(), spec.n_classes)?;
    Ok(())
}

struct TrainSummary {
    solver: &'static str,
    objective: f64,
    iterations: usize,
    gap: Option<f64>,
    converged: bool,
}

fn fit(
    kind: SurrogateKind,
    data: &Dataset,
    kernel: &KernelSpec,
    cfg: &RunConfig,
) -> Result<(KernelModel, TrainSummary), CliError> {
    // the dual solvers cover the α = 1/2 surrogates
    let dual = cfg.alpha == 0.5;
    Ok(match kind {
        SurrogateKind::Bep if dual => {
            let opts = BepOptions {
                max_epochs: cfg.max_epochs,
                gap_tol: cfg.gap_tol,
                seed: cfg.seed,
                ..Default::default()
            };
            let (model, r) = train_bep(data, kernel, cfg.lambda, &opts)?;
            if r.skipped_blocks > 0 {
                eprintln!(
                    "warning: {} examples have zero kernel self-similarity; their dual blocks were left at zero weight",
                    r.skipped_blocks
                );
            }
            let summary = TrainSummary {
                solver: "dual",
                objective: r.primal,
                iterations: r.epochs,
                gap: Some(r.gap),
                converged: r.converged,
            };
            (model, summary)
        }
        SurrogateKind::Ova if dual => {
            let opts = OvaOptions {
                seed: cfg.seed,
                max_epochs: cfg.max_epochs,
                ..Default::default()
            };
            let (model, r) = train_ova(data, kernel, cfg.lambda, &opts)?;
            let summary = TrainSummary {
                solver: "dual",
                objective: r.objective,
                iterations: r.classes.iter().map(|c| c.epochs).max().unwrap_or(0),
                gap: Some(r.classes.iter().map(|c| c.primal - c.dual).sum()),
                converged: r.converged,
            };
            (model, summary)
        }
        _ => {
            let opts = SubgradientOptions {
                steps: cfg.steps,
                seed: cfg.seed,
                batch: cfg.batch,
                ..Default::default()
            };
            let (model, r) = train_subgradient(data, kind, cfg.alpha, kernel, cfg.lambda, &opts)?;
            let summary = TrainSummary {
                solver: "subgradient",
                objective: r.averaged_objective,
                iterations: r.steps,
                gap: None,
                converged: true,
            };
            (model, summary)
        }
    })
}

fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let data = read_sparse(require(&cfg.input, "in")?)?;
    let kind = cfg.kind();
    let kernel = cfg.kernel_spec()?;
    let (mut model, s) = fit(kind, &data, &kernel, cfg)?;
    model.tau = cfg.tau.unwrap_or(kind.never_reject_tau());
    model.validate()?;
    let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    model.save(&path)?;
    if !s.converged {
        eprintln!("warning: solver stopped before reaching its tolerance");
    }
    eprintln!(
        "trained {kind} on {} examples ({} solver, {} iterations), objective {}, model -> {}",
        data.len(),
        s.solver,
        s.iterations,
        s.objective,
        path.display()
    );
    let mut out = io::stdout().lock();
    writeln!(out, "surrogate,solver,m,objective,iterations,gap,converged,support_points")?;
    writeln!(
        out,
        "{kind},{},{},{},{},{},{},{}",
        s.solver,
        data.len(),
        s.objective,
        s.iterations,
        s.gap.map(|g| g.to_string()).unwrap_or_default(),
        s.converged,
        model.support_points.len()
    )?;
    Ok(())
}

/// Reads a data file and expresses it in the model's feature and label space.
fn load_for_model(path: &Path, model: &KernelModel) -> Result<Dataset, CliError> {
    let mut data = read_sparse(path)?;
    if let Some(dim) = model.input_dim() {
        data.pad_to(dim)?;
    }
    Ok(data.align_labels(&model.labels)?)
}

fn load_model(cfg: &RunConfig) -> Result<KernelModel, CliError> {
    Ok(KernelModel::load(require(&cfg.model, "model")?)?)
}

fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_model(cfg)?;
    let data = load_for_model(require(&cfg.input, "in")?, &model)?;
    let preds = model.predict(&data.features, cfg.tau)?;
    let mut w = csv_sink(&cfg.out)?;
    writeln!(w, "index,label,prediction")?;
    for (i, (p, &y)) in preds.iter().zip(&data.labels).enumerate() {
        let pred = match p {
            Prediction::Class(c) => model.labels[*c].as_str(),
            Prediction::Reject => "reject",
        };
        writeln!(w, "{},{},{}", i + 1, model.labels[y], pred)?;
    }
    w.flush()?;
    let rejected = preds.iter().filter(|p| p.is_reject()).count();
    eprintln!("{} predictions, {} rejected", preds.len(), rejected);
    Ok(())
}

fn risk_at(model: &KernelModel, data: &Dataset, tau: f64, alpha: f64) -> Result<RiskReport, CliError> {
    let loss = AbstainLoss::new(model.n_classes, alpha)?;
    let preds = model.predict(&data.features, Some(tau))?;
    Ok(empirical_risk(&data.labels, &preds, &loss)?)
}

fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_model(cfg)?;
    let data = load_for_model(require(&cfg.input, "in")?, &model)?;
    let (tau, calib_reject, report, m) = match cfg.target_reject {
        Some(target) => {
            let (calib, rest) = split(&data, cfg.calib_fraction, cfg.seed)?;
            let tau = calibrate_tau(&model, &calib, target)?;
            let calib_reject = risk_at(&model, &calib, tau, cfg.alpha)?.reject_rate;
            eprintln!(
                "threshold {tau} calibrated on {} points (reject rate {calib_reject}); evaluating on {}",
                calib.len(),
                rest.len()
            );
            (tau, Some(calib_reject), risk_at(&model, &rest, tau, cfg.alpha)?, rest.len())
        }
        None => {
            let tau = cfg.tau.unwrap_or(model.tau);
            (tau, None, risk_at(&model, &data, tau, cfg.alpha)?, data.len())
        }
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv_sink(&cfg.out)?;
    writeln!(w, "surrogate,alpha,tau,target_reject,calib_reject,m,risk,error,reject")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        model.kind,
        cfg.alpha,
        tau,
        opt(cfg.target_reject),
        opt(calib_reject),
        m,
        report.risk,
        report.error_rate,
        report.reject_rate
    )?;
    w.flush()?;
    Ok(())
}

fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut model = load_model(cfg)?;
    let data = load_for_model(require(&cfg.input, "in")?, &model)?;
    let target = cfg
        .target_reject
        .ok_or_else(|| CliError::Usage("calibrate needs --target-reject".into()))?;
    let tau = calibrate_tau(&model, &data, target)?;
    let achieved = risk_at(&model, &data, tau, cfg.alpha)?.reject_rate;
    if let Some(path) = &cfg.out {
        model.tau = tau;
        model.save(path)?;
        eprintln!("model with threshold {tau} -> {}", path.display());
    }
    let mut out = io::stdout().lock();
    writeln!(out, "surrogate,target_reject,tau,reject,m")?;
    writeln!(out, "{},{target},{tau},{achieved},{}", model.kind, data.len())?;
    Ok(())
}

fn default_tau_grid(kind: SurrogateKind) -> Vec<f64> {
    match kind {
        SurrogateKind::Ova => vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        _ => vec![0.0, 0.25, 0.5, 0.75, 1.0],
    }
}

fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let kind = cfg.kind();
    let kernel = cfg.kernel_spec()?;
    let spec = synthetic_spec(cfg)?;
    let m_grid = cfg.m_grid.clone().unwrap_or_else(|| vec![200, 800, 3200]);
    let tau_grid = cfg.tau_grid.clone().unwrap_or_else(|| default_tau_grid(kind));
    if m_grid.is_empty() || tau_grid.is_empty() || m_grid.contains(&0) {
        return Err(CliError::Usage("sweep grids must be nonempty with positive sizes".into()));
    }
    let max_m = m_grid.iter().copied().max().unwrap_or(0);
    let train_all = spec.sample(max_m, 0)?;
    let test = spec.sample(cfg.m_test, 1)?;
    let samples = cfg.samples.unwrap_or(1_000_000);
    let bayes = bayes_risk_monte_carlo(&spec, cfg.alpha, samples, cfg.seed)?;
    eprintln!("Bayes risk {} (standard error {:.1e}, {samples} samples)", bayes.mean, bayes.std_error);

    let mut w = csv_sink(&cfg.out)?;
    writeln!(w, "surrogate,m,tau,risk,error,reject,bayes_risk,bayes_std_error")?;
    for &m in &m_grid {
        let data = train_all.head(m)?;
        let (model, s) = fit(kind, &data, &kernel, cfg)?;
        eprintln!("m={m}: {} objective {}", s.solver, s.objective);
        for &tau in &tau_grid {
            let r = risk_at(&model, &test, tau, cfg.alpha)?;
            writeln!(
                w,
                "{kind},{m},{tau},{},{},{},{},{}",
                r.risk, r.error_rate, r.reject_rate, bayes.mean, bayes.std_error
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn default_verify_taus(kind: SurrogateKind) -> Vec<f64> {
    match kind {
        SurrogateKind::Ova => vec![-0.9, -0.5, 0.0, 0.5, 0.9],
        _ => vec![0.1, 0.25, 0.5, 0.75, 0.9],
    }
}

fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let kinds: Vec<SurrogateKind> = match cfg.surrogate {
        Some(s) => vec![s.into()],
        None => SurrogateKind::ALL.to_vec(),
    };
    let ns = match cfg.n {
        Some(n) if n >= 2 => vec![n],
        Some(n) => return Err(CliError::Usage(format!("--n must be at least 2, got {n}"))),
        None => vec![2, 4, 8],
    };
    if !(0.0..=0.5).contains(&cfg.alpha) {
        return Err(CliError::Usage(format!("--alpha must lie in [0, 1/2] for the bounds, got {}", cfg.alpha)));
    }
    let samples = cfg.samples.unwrap_or(100_000);
    let mut plan = Vec::new();
    for &kind in &kinds {
        let taus = match (&cfg.tau_grid, cfg.tau) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => default_verify_taus(kind),
        };
        if let Some(t) = taus.iter().find(|&&t| !kind.tau_is_calibrated(t)) {
            return Err(CliError::Usage(format!("threshold {t} is outside the calibrated interval for {kind}")));
        }
        plan.push((kind, taus));
    }

    let mut failures = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut w = csv_sink(&cfg.out)?;
    writeln!(w, "surrogate,n,alpha,tau,samples,min_slack,hits_1a,hits_1b,hits_1c,hits_2a,hits_2b,pass")?;
    for (kind, taus) in &plan {
        for &n in &ns {
            let lemma = lemma_identities_check(*kind, n, 10_000, cfg.seed)?;
            eprintln!(
                "{kind} n={n}: identities worst deviation {:.1e}, worst inequality slack {:.1e} ({})",
                lemma.worst_equality_dev,
                lemma.worst_inequality_slack,
                if lemma.pass { "pass" } else { "FAIL" }
            );
            failures += usize::from(!lemma.pass);
            let reports = sweep_bound(&SweepConfig {
                kind: *kind,
                n,
                taus: taus.clone(),
                alpha: cfg.alpha,
                samples,
                seed: cfg.seed,
            })?;
            for r in reports {
                min_slack = min_slack.min(r.min_slack);
                failures += usize::from(!r.pass);
                let h = r.case_hits;
                writeln!(
                    w,
                    "{kind},{n},{},{},{},{},{},{},{},{},{},{}",
                    r.alpha, r.tau, r.samples, r.min_slack, h[0], h[1], h[2], h[3], h[4], r.pass
                )?;
            }
        }
    }
    w.flush()?;
    eprintln!("min slack {min_slack:.3e}");
    if failures > 0 {
        return Err(CliError::Check(format!("{failures} checks failed")));
    }
    Ok(())
}

fn partition(cfg: &RunConfig) -> Result<(), CliError> {
    let mut w = csv_sink(&cfg.out)?;
    match cfg.figure {
        Figure::Simplex => {
            let cells = emit_simplex_partition(cfg.alpha, cfg.resolution.unwrap_or(50))?;
            write_simplex_csv(&mut w, &cells)?;
            let rejects = cells.iter().filter(|c| c.region == 4).count();
            eprintln!("{} grid points, {rejects} in the reject region", cells.len());
        }
        Figure::Scores => {
            let kind = cfg.kind();
            let tau = cfg.tau.unwrap_or(0.5);
            let cells = emit_score_partition(kind, tau, cfg.range, cfg.resolution.unwrap_or(101))?;
            write_score_csv(&mut w, &cells)?;
            eprintln!("{} grid points for {kind} at threshold {tau}", cells.len());
        }
    }
    w.flush()?;
    Ok(())
}
