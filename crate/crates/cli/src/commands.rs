use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use nalgebra::DMatrix;
use regvar_core::analysis::{
    edges_to_json, evaluate_model, export_edges, influence, rank_influence, variable_sections,
    write_edges_csv, write_influence_csv,
};
use regvar_core::dataset::{
    aggregate, impute_historical, load_days, parse_raw_logs, read_section_list, save_days,
    split_days, ColumnMapping, SlotSpec, SplitSpec,
};
use regvar_core::regime::{cv_risk_curve, detect_switch, greedy_switches, RegimeOptions};
use regvar_core::simgen::{gen_dataset, GeneratorSpec, TruthFile};
use regvar_core::solver::{Penalty, PenaltyFamily, SolverConfig};
use regvar_core::varmodel::{
    fit, FitOptions, LinearPredictor, ModelFile, PenaltyChoice, PiecewisePredictor, SlotWindow,
};
use regvar_core::DayTensor;

use crate::args::*;
use crate::manifest::{manifest_path, Recorder};
use crate::reproduce::{policy, render_table, run_all, Settings};
use crate::{io_error, methods, CliError};

pub struct Context {
    pub threads: usize,
    pub verbose: bool,
}

pub fn dispatch(command: Command, ctx: &Context) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a, ctx),
        Command::Split(a) => split(a, ctx),
        Command::Fit(a) => fit_cmd(a, ctx),
        Command::Predict(a) => predict(a, ctx),
        Command::Evaluate(a) => evaluate(a, ctx),
        Command::DetectSwitch(a) => detect(a, ctx),
        Command::Simulate(a) => simulate(a, ctx),
        Command::ExportGraph(a) => export_graph(a, ctx),
        Command::Influence(a) => influence_cmd(a, ctx),
        Command::VariableSections(a) => variable(a, ctx),
        Command::ReproduceSim(a) => reproduce(a, ctx),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| io_error(path, e))
}

fn read_tensor(path: &Path) -> Result<DayTensor, CliError> {
    load_days(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_tensor(path: &Path, tensor: &DayTensor) -> Result<(), CliError> {
    save_days(tensor, create(path)?)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<PiecewisePredictor, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(ModelFile::from_json(&text)?.into_predictor()?)
}

fn piece(model: &PiecewisePredictor, index: usize) -> Result<&LinearPredictor, CliError> {
    model.pieces.get(index).ok_or_else(|| {
        CliError::Usage(format!(
            "--piece {index} but the model has {} pieces",
            model.pieces.len()
        ))
    })
}

fn parse_time(flag: &str, value: &str) -> Result<NaiveTime, CliError> {
    NaiveTime::parse_from_str(value, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(value, "%H:%M:%S"))
        .map_err(|_| CliError::Usage(format!("{flag} `{value}` is not HH:MM")))
}

fn solver_config(a: &SolverArgs) -> Result<SolverConfig, CliError> {
    let config = SolverConfig {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        lambda_grid_size: a.lambda_grid_size,
        lambda_min_ratio: a.lambda_min_ratio,
        folds: a.folds,
        seed: a.seed,
        record_objective: false,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn ingest(a: IngestArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("ingest", &a, None, ctx.threads);
    let start = parse_time("--day-start", &a.day_start)?;
    let end = parse_time("--day-end", &a.day_end)?;
    let spec = SlotSpec::new(start, end, a.slot_minutes)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_utc_offset(a.utc_offset);
    let sections = read_section_list(open(&a.sections)?)?;
    let logs = parse_raw_logs(open(&a.raw)?, &ColumnMapping::default())
        .map_err(|e| CliError::Data(format!("{}: {e}", a.raw.display())))?;
    let tensor = aggregate(&logs, &spec, &sections)?;
    write_tensor(&a.out, &tensor)?;
    println!(
        "{} days x {} sections x {} slots, {} missing cells",
        tensor.n_days(),
        tensor.n_sections(),
        tensor.n_slots(),
        tensor.missing_count()
    );
    rec.input(&a.raw);
    rec.input(&a.sections);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn split_path(prefix: &Path, part: &str) -> PathBuf {
    with_suffix(prefix, &format!("_{part}.csv"))
}

fn split(a: SplitArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("split", &a, None, ctx.threads);
    let spec =
        SplitSpec::new(a.train, a.val, a.test).map_err(|e| CliError::Usage(e.to_string()))?;
    let tensor = read_tensor(&a.data)?;
    let (mut train, mut val, mut test) = split_days(&tensor, &spec)?;
    if a.impute {
        let reference = train.clone();
        train = impute_historical(&train, &reference)?;
        val = impute_historical(&val, &reference)?;
        test = impute_historical(&test, &reference)?;
    }
    rec.input(&a.data);
    for (part, t) in [("train", &train), ("val", &val), ("test", &test)] {
        let path = split_path(&a.out_prefix, part);
        write_tensor(&path, t)?;
        println!("{part}: {} days -> {}", t.n_days(), path.display());
        rec.output(&path);
    }
    rec.finish(&with_suffix(&a.out_prefix, "_split.manifest.json"))
}

fn parse_window(text: &str, slots: usize) -> Result<SlotWindow, CliError> {
    let bad = || CliError::Usage(format!("--window `{text}` is not FIRST:LAST"));
    let (first, last) = text.split_once(':').ok_or_else(bad)?;
    let first: usize = first.trim().parse().map_err(|_| bad())?;
    let last: usize = last.trim().parse().map_err(|_| bad())?;
    if last >= slots {
        return Err(CliError::Usage(format!(
            "--window ends at {last}, the day has slots 0..{}",
            slots - 1
        )));
    }
    SlotWindow::new(first, last).map_err(|e| CliError::Usage(e.to_string()))
}

fn penalty_choice(a: &FitArgs, family: PenaltyFamily) -> PenaltyChoice {
    match a.lambda {
        Some(l) => PenaltyChoice::Fixed(Penalty::new(family, l, a.alpha)),
        None => PenaltyChoice::Cv {
            family,
            alpha: a.alpha,
            per_line: !a.single_lambda && family != PenaltyFamily::GroupLasso,
        },
    }
}

fn fit_cmd(a: FitArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("fit", &a, Some(a.solver.seed), ctx.threads);
    let config = solver_config(&a.solver)?;
    let train = read_tensor(&a.data)?;
    let slots = train.n_slots();
    let window = match &a.window {
        Some(w) => parse_window(w, slots)?,
        None => SlotWindow::full(slots),
    };
    let family = match a.method {
        Method::Ols => Some(PenaltyFamily::None),
        Method::Lasso => Some(PenaltyFamily::Lasso),
        Method::Ridge => Some(PenaltyFamily::Ridge),
        Method::Enet => Some(PenaltyFamily::ElasticNet),
        Method::Group => Some(PenaltyFamily::GroupLasso),
        _ => None,
    };
    let model = match (a.method, family) {
        (_, Some(family)) => {
            let choice = if family == PenaltyFamily::None {
                PenaltyChoice::Fixed(Penalty::none())
            } else {
                penalty_choice(&a, family)
            };
            let mut options = FitOptions::new(choice, config.clone());
            options.lags = a.lags;
            options.diagonal = a.diagonal;
            options.standardize = a.standardize;
            let (model, report) = fit(&train, window, &options)?;
            if !report.flagged.is_empty() {
                eprintln!(
                    "warning: {} lines did not converge: {:?}",
                    report.flagged.len(),
                    report.flagged
                );
            }
            if ctx.verbose {
                eprintln!(
                    "fit: {} nonzeros, max KKT violation {:e}, {:.2} s",
                    report.nonzeros.iter().sum::<usize>(),
                    report.max_kkt_violation,
                    report.wall_time_secs
                );
            }
            PiecewisePredictor::single(model)
        }
        (Method::RsLasso, _) => {
            let mut options = RegimeOptions::lasso(config.clone());
            options.policy = policy(a.lambda_policy);
            let t = match a.switch {
                Some(t) => t,
                None => {
                    let curve = cv_risk_curve(&train, &options, None)?;
                    let t = detect_switch(&curve);
                    println!("t_hat={t}");
                    t
                }
            };
            methods::rs_lasso(&train, t, &options, None)?
        }
        (Method::TsLasso, _) => methods::ts_lasso(&train, &config)?,
        (Method::Ha, _) => methods::ha(&train)?,
        (Method::Ar, _) => methods::ar(&train, a.order)?,
        (Method::Po, _) => methods::po(&train),
        _ => unreachable!("penalized methods handled above"),
    };
    write_text(&a.out, &ModelFile::from_predictor(&model).to_json())?;
    let nnz: usize = model.pieces.iter().map(|p| p.a.nnz()).sum();
    println!(
        "{}: {} pieces, {} nonzero coefficients -> {}",
        model.method,
        model.pieces.len(),
        nnz,
        a.out.display()
    );
    rec.input(&a.data);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn write_predictions(
    path: &Path,
    tensor: &DayTensor,
    preds: &[DMatrix<f64>],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["day".to_string(), "slot".to_string()];
    header.extend(tensor.sections().iter().cloned());
    w.write_record(&header)?;
    for (day, pred) in tensor.days().iter().zip(preds) {
        for c in 0..pred.ncols() {
            let mut row = vec![day.format("%Y-%m-%d").to_string(), (c + 1).to_string()];
            row.extend(pred.column(c).iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn predict(a: PredictArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("predict", &a, None, ctx.threads);
    let model = read_model(&a.model)?;
    let data = read_tensor(&a.data)?;
    if data.sections() != model.sections() {
        return Err(CliError::Data("model and data sections differ".into()));
    }
    let mut preds = Vec::with_capacity(data.n_days());
    for d in 0..data.n_days() {
        let day = data.day_matrix(d);
        let pred = match a.observed {
            Some(k) => {
                let full = model.rollout(&day, k)?;
                full.columns(1, full.ncols() - 1).into_owned()
            }
            None => regvar_core::DayPredictor::predict_day(&model, &day)?,
        };
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Data(format!(
                "day {} has missing inputs; impute before predicting",
                data.days()[d]
            )));
        }
        preds.push(pred);
    }
    write_predictions(&a.out, &data, &preds)?;
    rec.input(&a.model);
    rec.input(&a.data);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn evaluate(a: EvaluateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("evaluate", &a, None, ctx.threads);
    let model = read_model(&a.model)?;
    let data = read_tensor(&a.data)?;
    if data.sections() != model.sections() {
        return Err(CliError::Data("model and data sections differ".into()));
    }
    rec.input(&a.model);
    rec.input(&a.data);
    let subset = match &a.subset {
        Some(path) => {
            rec.input(path);
            let ids = read_section_list(open(path)?)?;
            let idx =
                ids.iter()
                    .map(|id| {
                        data.sections().iter().position(|s| s == id).ok_or_else(|| {
                            CliError::Data(format!("subset section `{id}` not in data"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
            Some(idx)
        }
        None => None,
    };
    let report = evaluate_model(&model, &data, subset.as_deref())?;
    write_text(&a.out, &report.to_json())?;
    println!(
        "mse={:.6} mae={:.6} cells={}",
        report.mse, report.mae, report.cells
    );
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn detect(a: DetectArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("detect-switch", &a, Some(a.solver.seed), ctx.threads);
    let config = solver_config(&a.solver)?;
    let train = read_tensor(&a.data)?;
    let mut options = RegimeOptions::lasso(config);
    options.policy = policy(a.lambda_policy);
    rec.input(&a.data);
    if let Some(max) = a.greedy {
        let switches = greedy_switches(&train, &options, max)?;
        let list: Vec<String> = switches.iter().map(|t| t.to_string()).collect();
        println!("switches={}", list.join(","));
    }
    let curve = cv_risk_curve(&train, &options, a.checkpoint.as_deref())?;
    let mut out = create(&a.out)?;
    curve.write_csv(&mut out).map_err(|e| io_error(&a.out, e))?;
    out.flush().map_err(|e| io_error(&a.out, e))?;
    drop(out);
    if curve.unequal_folds() {
        eprintln!(
            "note: fold sizes differ ({:?}); risks use per-day weights",
            curve.fold_sizes
        );
    }
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))?;
    println!("t_hat={}", detect_switch(&curve));
    Ok(())
}

fn simulate(a: SimulateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("simulate", &a, Some(a.seed), ctx.threads);
    let spec = GeneratorSpec {
        p: a.p,
        n: a.days,
        slots: a.slots,
        switch_t: a.switch,
        avg_degree: a.avg_degree,
        seed: a.seed,
        ..GeneratorSpec::default()
    };
    let spec = if a.raw_t { spec.with_raw_hours() } else { spec };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (tensor, truth) = gen_dataset(&spec)?;
    write_tensor(&a.out, &tensor)?;
    write_text(
        &a.truth,
        &serde_json::to_string_pretty(&TruthFile::from_truth(&truth))?,
    )?;
    println!(
        "{} days x {} sections x {} slots; A has {} nonzeros, A' has {}",
        tensor.n_days(),
        tensor.n_sections(),
        tensor.n_slots(),
        truth.a.nnz(),
        truth.a_prime.nnz()
    );
    rec.output(&a.out);
    rec.output(&a.truth);
    rec.finish(&manifest_path(&a.out))
}

fn export_graph(a: GraphArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("export-graph", &a, None, ctx.threads);
    if !(a.min_weight >= 0.0) {
        return Err(CliError::Usage("--min-weight must be non-negative".into()));
    }
    let model = read_model(&a.model)?;
    let edges = export_edges(piece(&model, a.piece)?, a.min_weight);
    match a.format {
        GraphFormat::Csv => write_edges_csv(&edges, create(&a.out)?)?,
        GraphFormat::Json => write_text(&a.out, &edges_to_json(&edges))?,
    }
    println!("{} edges -> {}", edges.len(), a.out.display());
    rec.input(&a.model);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn influence_cmd(a: InfluenceArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("influence", &a, None, ctx.threads);
    let model = read_model(&a.model)?;
    let chosen = piece(&model, a.piece)?;
    let ranked = rank_influence(&chosen.sections, &influence(chosen));
    write_influence_csv(&ranked, create(&a.out)?)?;
    for (name, c) in ranked.iter().take(5) {
        println!("{name}\t{c:.6}");
    }
    rec.input(&a.model);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn variable(a: VariableArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("variable-sections", &a, Some(a.seed), ctx.threads);
    let data = read_tensor(&a.data)?;
    let result = variable_sections(&data, a.seed)?;
    write_text(&a.out, &serde_json::to_string_pretty(&result)?)?;
    println!(
        "{} of {} sections ({:.1}%) in the variable cluster",
        result.indices.len(),
        data.n_sections(),
        100.0 * result.fraction
    );
    rec.input(&a.data);
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn reproduce(a: ReproduceArgs, ctx: &Context) -> Result<(), CliError> {
    let mut rec = Recorder::new("reproduce-sim", &a, Some(a.seed), ctx.threads);
    let settings = Settings::from_args(&a);
    let report = run_all(&settings, &a.out_dir, a.resume, true)?;
    let table = render_table(&report);
    let results = a.out_dir.join("results.json");
    let table_path = a.out_dir.join("table.txt");
    write_text(&results, &serde_json::to_string_pretty(&report)?)?;
    write_text(&table_path, &table)?;
    print!("{table}");
    rec.output(&results);
    rec.output(&table_path);
    rec.finish(&a.out_dir.join("manifest.json"))
}
