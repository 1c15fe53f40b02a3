//! Subcommand implementations.

use crate::config::{Overlay, RangeSpec};
use crate::output::{in_dir, write_output, Cell, Format, Table, ARTIFACT_VERSION};
use anyhow::{anyhow, Result};
use imbal_core::attractors::classify;
use imbal_core::kernel::{ModelParams, TransitionKernel};
use imbal_core::measure::{all_branches, measure_stats, InvariantMeasure};
use imbal_core::oracle::{build_chain, stationary_solve, StationaryOutcome};
use imbal_core::simulator::{run, RecordFlags, SimConfig, SpinInit};
use imbal_core::wealth::{conflict_scan, optimal_q, stationary_expected_increment, ImpactFunction};
use imbal_core::CoreError;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Usage errors exit with code 1; everything else with 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing --{name}")))
}

/// Build validated model parameters from the merged overlay.
fn resolve_params(o: &Overlay, default_q: Option<f64>) -> Result<ModelParams> {
    let q = match (o.q, default_q) {
        (Some(q), _) => q,
        (None, Some(dq)) => dq,
        (None, None) => return Err(usage("missing --q")),
    };
    ModelParams::new(
        require(o.n, "n")?,
        require(o.d, "d")?,
        require(o.alpha, "alpha")?,
        require(o.gamma, "gamma")?,
        q,
        o.beta.unwrap_or(f64::INFINITY),
    )
    .map_err(|e| usage(e.to_string()))
}

fn resolve_impact(o: &Overlay, params: &ModelParams) -> Result<ImpactFunction> {
    ImpactFunction::new(o.f_plus.unwrap_or(1.0), params.gamma).map_err(|e| usage(e.to_string()))
}

/// Fixed-size worker pool mapping `items` in order.
fn parallel_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::Relaxed);
                if idx >= items.len() {
                    break;
                }
                let result = f(&items[idx]);
                slots.lock().expect("pool poisoned")[idx] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("pool poisoned")
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}

// ---------------------------------------------------------------------------
// kernel / classify
// ---------------------------------------------------------------------------

/// Debug dump of the per-level kernel quantities.
pub fn cmd_kernel(overlay: &Overlay, out: &Path, format: Format) -> Result<()> {
    // the kernel itself does not involve q; default to 1 for convenience
    let params = resolve_params(overlay, Some(1.0))?;
    let kernel = TransitionKernel::new(params)?;
    let mut table = Table::new(
        "kernel",
        overlay.render(),
        vec!["i", "stay_plus", "stay_minus", "p_pp", "p_pm", "p_mm", "p_mp", "e_plus"],
    );
    for i in 0..kernel.levels() {
        let t = kernel.transition(i);
        table.push(vec![
            Cell::U(i as u64),
            Cell::F(kernel.stay_plus[i]),
            Cell::F(kernel.stay_minus[i]),
            Cell::F(t.p_pp),
            Cell::F(t.p_pm),
            Cell::F(t.p_mm),
            Cell::F(t.p_mp),
            Cell::F(kernel.e_plus[i]),
        ]);
    }
    write_output(out, &table.render(format))
}

/// Per-level attractor classification.
pub fn cmd_classify(overlay: &Overlay, out: &Path, format: Format) -> Result<()> {
    let params = resolve_params(overlay, None)?;
    let kernel = TransitionKernel::new(params)?;
    let classes = classify(&kernel);
    let mut table = Table::new(
        "classify",
        overlay.render(),
        vec!["i", "e_plus", "in_B", "in_C", "class"],
    );
    for i in 0..kernel.levels() {
        table.push(vec![
            Cell::U(i as u64),
            Cell::F(kernel.e_plus[i]),
            Cell::B(classes.in_b[i]),
            Cell::B(classes.in_c[i]),
            Cell::S(classes.a_class[i].to_string()),
        ]);
    }
    write_output(out, &table.render(format))
}

// ---------------------------------------------------------------------------
// measure
// ---------------------------------------------------------------------------

fn branch_label(m: &InvariantMeasure) -> String {
    if m.branch.is_empty() {
        "-".to_string()
    } else {
        m.branch
            .iter()
            .map(|(lvl, s)| format!("{lvl}{}", if *s == 1 { "+" } else { "-" }))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Stationary measure branches plus a JSON metadata record. Writes files
/// into the output directory.
pub fn cmd_measure(overlay: &Overlay, out_dir: &Path, format: Format) -> Result<()> {
    let params = resolve_params(overlay, None)?;
    let kernel = TransitionKernel::new(params)?;
    let classes = classify(&kernel);
    let a2 = classes.a2_levels();

    let mut per_branch = Vec::new();
    let mut files = Vec::new();
    let exists = !classes.has_a3();
    let mut first_stats: Option<(u64, f64, f64)> = None;

    if exists {
        let branch_count: u64 = 1u64 << a2.len().min(63);
        if a2.len() > imbal_core::measure::BRANCH_CAP {
            return Err(anyhow!("{}", CoreError::BranchExplosion {
                a2_count: a2.len(),
                cap: imbal_core::measure::BRANCH_CAP
            }));
        }
        for bits in 0..branch_count {
            let branch: Vec<i8> =
                (0..a2.len()).map(|k| if bits >> k & 1 == 0 { 1 } else { -1 }).collect();
            let file = format!("measure_branch_{bits:03}.csv");
            match imbal_core::measure::invariant_measure(&kernel, &classes, &branch) {
                Ok(m) => {
                    let pi = m.pi()?;
                    let mut table = Table::new(
                        "measure",
                        format!("{} branch={}", overlay.render(), branch_label(&m)),
                        vec!["level", "pi"],
                    );
                    for (level, &p) in pi.iter().enumerate() {
                        table.push(vec![Cell::U(level as u64), Cell::F(p)]);
                    }
                    write_output(&in_dir(out_dir, &file), &table.render(format))?;
                    let stats = measure_stats(&m)?;
                    if first_stats.is_none() {
                        first_stats =
                            Some((stats.global_mode as u64, stats.mean, stats.mode_mass_5));
                    }
                    per_branch.push(serde_json::json!({
                        "branch": branch_label(&m),
                        "file": file,
                        "mode": stats.global_mode,
                        "mode_tie": stats.mode_tie,
                        "mean": stats.mean,
                        "mass5": stats.mode_mass_5,
                        "mode_list": stats.mode_list,
                        "degenerate_fallback": false,
                    }));
                    files.push(file);
                }
                Err(CoreError::DegenerateChain { level }) => {
                    // fall back to the dense solve on the explicit rates
                    let chain = build_chain(&kernel, &classes, &branch)?;
                    match stationary_solve(&chain)? {
                        StationaryOutcome::Unique(pi) => {
                            let mut table = Table::new(
                                "measure",
                                format!(
                                    "{} branch={} degenerate_at={level} solver=dense",
                                    overlay.render(),
                                    branch_label_from(&a2, &branch)
                                ),
                                vec!["level", "pi"],
                            );
                            for (lvl, &p) in pi.iter().enumerate() {
                                table.push(vec![Cell::U(lvl as u64), Cell::F(p)]);
                            }
                            write_output(&in_dir(out_dir, &file), &table.render(format))?;
                            let mean: f64 =
                                pi.iter().enumerate().map(|(i, &p)| i as f64 * p).sum();
                            per_branch.push(serde_json::json!({
                                "branch": branch_label_from(&a2, &branch),
                                "file": file,
                                "mean": mean,
                                "degenerate_fallback": true,
                                "degenerate_level": level,
                            }));
                            files.push(file);
                        }
                        StationaryOutcome::Reducible(report) => {
                            per_branch.push(serde_json::json!({
                                "branch": branch_label_from(&a2, &branch),
                                "degenerate_fallback": true,
                                "degenerate_level": level,
                                "recurrent_classes": report.recurrent_classes,
                            }));
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    let (mode, mean, mass5) = match first_stats {
        Some((m, mn, m5)) => {
            (serde_json::json!(m), serde_json::json!(mn), serde_json::json!(m5))
        }
        None => (serde_json::Value::Null, serde_json::Value::Null, serde_json::Value::Null),
    };
    let meta = serde_json::json!({
        "artifact": format!("imbal {ARTIFACT_VERSION}"),
        "config": overlay.render().trim(),
        "exists": exists,
        "unique": exists && a2.is_empty(),
        "branches": if exists { per_branch.len() } else { 0 },
        "a2_levels": a2,
        "a3_levels": classes.a3_levels(),
        "mode": mode,
        "mean": mean,
        "mass5": mass5,
        "per_branch": per_branch,
        "files": files,
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    write_output(&in_dir(out_dir, "measure_meta.json"), &text)
}

fn branch_label_from(a2: &[usize], branch: &[i8]) -> String {
    if a2.is_empty() {
        "-".to_string()
    } else {
        a2.iter()
            .zip(branch)
            .map(|(lvl, s)| format!("{lvl}{}", if *s == 1 { "+" } else { "-" }))
            .collect::<Vec<_>>()
            .join("|")
    }
}

// ---------------------------------------------------------------------------
// wealth / qstar / sweep
// ---------------------------------------------------------------------------

struct CellOutcome {
    exists: bool,
    unique: bool,
    a2: Vec<usize>,
    mode: Option<u64>,
    mean: Option<f64>,
    mass5: Option<f64>,
    dw: Option<f64>,
    note: String,
}

/// Classify one grid cell and compute its branch-max statistics.
fn evaluate_cell(params: ModelParams, f_plus: f64, price: f64) -> Result<CellOutcome> {
    let kernel = TransitionKernel::new(params)?;
    let impact = ImpactFunction::new(f_plus, params.gamma)?;
    let classes = classify(&kernel);
    let a2 = classes.a2_levels();
    if classes.has_a3() {
        return Ok(CellOutcome {
            exists: false,
            unique: a2.is_empty(),
            a2,
            mode: None,
            mean: None,
            mass5: None,
            dw: None,
            note: "no-invariant-measure".into(),
        });
    }
    let branches = match all_branches(&kernel, &classes) {
        Ok(b) => b,
        Err(CoreError::DegenerateChain { level }) => {
            return Ok(CellOutcome {
                exists: true,
                unique: a2.is_empty(),
                a2,
                mode: None,
                mean: None,
                mass5: None,
                dw: None,
                note: format!("degenerate-at-{level}"),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let mut best: Option<(f64, &InvariantMeasure)> = None;
    for m in &branches {
        let dw = stationary_expected_increment(m, &kernel, &impact, price)?;
        if best.map_or(true, |(b, _)| dw > b) {
            best = Some((dw, m));
        }
    }
    let (dw, m) = best.expect("at least one branch");
    let stats = measure_stats(m)?;
    Ok(CellOutcome {
        exists: true,
        unique: branches.len() == 1,
        a2,
        mode: Some(stats.global_mode as u64),
        mean: Some(stats.mean),
        mass5: Some(stats.mode_mass_5),
        dw: Some(dw),
        note: String::new(),
    })
}

fn opt_f(v: Option<f64>) -> Cell {
    match v {
        Some(x) => Cell::F(x),
        None => Cell::S(String::new()),
    }
}

fn opt_u(v: Option<u64>) -> Cell {
    match v {
        Some(x) => Cell::U(x),
        None => Cell::S(String::new()),
    }
}

/// Per-q wealth table at fixed (alpha, gamma).
pub fn cmd_wealth(
    overlay: &Overlay,
    q_range: Option<RangeSpec>,
    out: &Path,
    format: Format,
    jobs: usize,
) -> Result<()> {
    let base = resolve_params(overlay, Some(1.0))?;
    let f_plus = overlay.f_plus.unwrap_or(1.0);
    let price = overlay.price.unwrap_or(1.0);
    let qs = q_values(q_range, overlay)?;

    let cells = parallel_map(jobs, qs, |&q| -> Result<(f64, CellOutcome, usize)> {
        let params = ModelParams { q, ..base };
        params.validate().map_err(|e| usage(e.to_string()))?;
        let outcome = evaluate_cell(params, f_plus, price)?;
        let kernel = TransitionKernel::new(params)?;
        let report = conflict_scan(std::iter::once(&kernel), f_plus, price)?;
        Ok((q, outcome, report.disagreement_count))
    });

    let mut table = Table::new(
        "wealth",
        overlay.render(),
        vec!["q", "exists", "unique", "dW", "mode", "mean", "disagreement_count", "note"],
    );
    for cell in cells {
        let (q, outcome, disagreements) = cell?;
        table.push(vec![
            Cell::F(q),
            Cell::B(outcome.exists),
            Cell::B(outcome.unique),
            opt_f(outcome.dw),
            opt_u(outcome.mode),
            opt_f(outcome.mean),
            Cell::U(disagreements as u64),
            Cell::S(outcome.note),
        ]);
    }
    write_output(out, &table.render(format))
}

fn q_values(q_range: Option<RangeSpec>, overlay: &Overlay) -> Result<Vec<f64>> {
    let spec = match (q_range, overlay.q) {
        (Some(r), _) => r,
        (None, Some(q)) => RangeSpec::scalar(q),
        (None, None) => RangeSpec { start: 0.01, stop: 1.0, step: 0.01 },
    };
    let values = spec.values()?;
    if values.is_empty() {
        return Err(usage("empty q grid"));
    }
    Ok(values)
}

/// Optimal-q tables as alpha and/or gamma vary.
pub fn cmd_qstar(
    overlay: &Overlay,
    alpha_range: Option<RangeSpec>,
    gamma_range: Option<RangeSpec>,
    q_range: Option<RangeSpec>,
    out: &Path,
    format: Format,
    jobs: usize,
) -> Result<()> {
    let n = require(overlay.n, "n")?;
    let d = require(overlay.d, "d")?;
    let f_plus = overlay.f_plus.unwrap_or(1.0);
    let price = overlay.price.unwrap_or(1.0);
    let alphas = range_or_scalar(alpha_range, overlay.alpha, "alpha")?;
    let gammas = range_or_scalar(gamma_range, overlay.gamma, "gamma")?;
    let qs = q_values(q_range, overlay)?;

    let mut grid_cells = Vec::new();
    for &alpha in &alphas {
        for &gamma in &gammas {
            grid_cells.push((alpha, gamma));
        }
    }

    let rows = parallel_map(jobs, grid_cells, |&(alpha, gamma)| -> Result<Vec<Cell>> {
        let base = ModelParams::new(n, d, alpha, gamma, qs[0], f64::INFINITY)
            .map_err(|e| usage(e.to_string()))?;
        let impact = ImpactFunction::new(f_plus, gamma).map_err(|e| usage(e.to_string()))?;
        match optimal_q(&base, &qs, &impact, price) {
            Ok(opt) => Ok(vec![
                Cell::F(alpha),
                Cell::F(gamma),
                Cell::F(opt.q_star),
                Cell::F(opt.dw_star),
                Cell::B(opt.unique),
                Cell::B(opt.tie),
                Cell::U(opt.skipped_no_measure.len() as u64),
                Cell::U(opt.skipped_degenerate.len() as u64),
                Cell::S(String::new()),
            ]),
            Err(CoreError::NoInvariantMeasure) => Ok(vec![
                Cell::F(alpha),
                Cell::F(gamma),
                Cell::S(String::new()),
                Cell::S(String::new()),
                Cell::S(String::new()),
                Cell::S(String::new()),
                Cell::U(qs.len() as u64),
                Cell::U(0),
                Cell::S("no-cell-admits-a-measure".into()),
            ]),
            Err(e) => Err(e.into()),
        }
    });

    let mut table = Table::new(
        "qstar",
        overlay.render(),
        vec![
            "alpha",
            "gamma",
            "q_star",
            "dw_star",
            "unique",
            "tie",
            "skipped_no_measure",
            "skipped_degenerate",
            "note",
        ],
    );
    for row in rows {
        table.push(row?);
    }
    write_output(out, &table.render(format))
}

fn range_or_scalar(
    range: Option<RangeSpec>,
    scalar: Option<f64>,
    name: &str,
) -> Result<Vec<f64>> {
    match (range, scalar) {
        (Some(r), _) => r.values(),
        (None, Some(x)) => Ok(vec![x]),
        (None, None) => Err(usage(format!("missing --{name}"))),
    }
}

/// Full (alpha, gamma, q) grid sweep.
#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    overlay: &Overlay,
    alpha_range: Option<RangeSpec>,
    gamma_range: Option<RangeSpec>,
    q_range: Option<RangeSpec>,
    out: &Path,
    format: Format,
    jobs: usize,
) -> Result<()> {
    let n = require(overlay.n, "n")?;
    let d = require(overlay.d, "d")?;
    let f_plus = overlay.f_plus.unwrap_or(1.0);
    let price = overlay.price.unwrap_or(1.0);
    let alphas = range_or_scalar(alpha_range, overlay.alpha, "alpha")?;
    let gammas = range_or_scalar(gamma_range, overlay.gamma, "gamma")?;
    let qs = q_values(q_range, overlay)?;

    let mut grid_cells = Vec::new();
    for &alpha in &alphas {
        for &gamma in &gammas {
            for &q in &qs {
                grid_cells.push((alpha, gamma, q));
            }
        }
    }
    if grid_cells.is_empty() {
        return Err(usage("empty sweep grid"));
    }

    let rows = parallel_map(jobs, grid_cells, |&(alpha, gamma, q)| -> Result<Vec<Cell>> {
        let params = ModelParams::new(n, d, alpha, gamma, q, f64::INFINITY)
            .map_err(|e| usage(e.to_string()))?;
        let outcome = evaluate_cell(params, f_plus, price)?;
        let a2_join = outcome
            .a2
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("|");
        Ok(vec![
            Cell::F(alpha),
            Cell::F(gamma),
            Cell::F(q),
            Cell::B(outcome.exists),
            Cell::B(outcome.unique),
            Cell::U(outcome.a2.len() as u64),
            Cell::S(a2_join),
            opt_u(outcome.mode),
            opt_f(outcome.mean),
            opt_f(outcome.mass5),
            opt_f(outcome.dw),
            Cell::S(outcome.note),
        ])
    });

    let mut table = Table::new(
        "sweep",
        overlay.render(),
        vec![
            "alpha", "gamma", "q", "exists", "unique", "a2_size", "a2_levels", "mode", "mean",
            "mass5", "dW", "note",
        ],
    );
    for row in rows {
        table.push(row?);
    }
    write_output(out, &table.render(format))
}

// ---------------------------------------------------------------------------
// simulate / oracle
// ---------------------------------------------------------------------------

pub fn parse_spin_init(spec: &str, expect_len: usize) -> Result<SpinInit> {
    match spec {
        "random" => Ok(SpinInit::RandomUniform),
        "plus" => Ok(SpinInit::AllPlus),
        "minus" => Ok(SpinInit::AllMinus),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read spin file {path:?}: {e}")))?;
            let values: Vec<i8> = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<i8>().map_err(|e| usage(format!("bad spin {t:?} in {path:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != expect_len {
                return Err(usage(format!(
                    "spin file {path:?} has {} entries, expected {expect_len}",
                    values.len()
                )));
            }
            Ok(SpinInit::Given(values))
        }
    }
}

pub fn parse_record(spec: &str) -> Result<RecordFlags> {
    let mut flags = RecordFlags::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "nplus" => flags.n_plus_path = true,
            "price" => flags.price_path = true,
            "wealth" => flags.wealth_path = true,
            "eta2" => flags.eta2_trace = true,
            "all" => {
                flags = RecordFlags {
                    n_plus_path: true,
                    price_path: true,
                    wealth_path: true,
                    eta2_trace: true,
                }
            }
            "none" | "hist" => {}
            other => return Err(usage(format!("unknown record flag {other:?}"))),
        }
    }
    Ok(flags)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    overlay: &Overlay,
    init_eta1: &str,
    init_eta2: &str,
    record: &str,
    out_dir: &Path,
    format: Format,
) -> Result<()> {
    let params = resolve_params(overlay, None)?;
    let impact = resolve_impact(overlay, &params)?;
    let config = SimConfig {
        params,
        impact,
        init_eta1: parse_spin_init(init_eta1, params.n)?,
        init_eta2: parse_spin_init(init_eta2, params.n + 1)?,
        initial_price: overlay.price.unwrap_or(1.0),
        initial_capital: overlay.capital.unwrap_or(0.0),
        epochs: require(overlay.epochs, "epochs")?,
        seed: overlay.seed.unwrap_or(0),
        record: parse_record(record)?,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let trajectory = run(&config)?;

    // histogram
    let total: u64 = trajectory.histogram.iter().sum();
    let mut hist = Table::new("simulate", overlay.render(), vec!["level", "count", "fraction"]);
    for (level, &count) in trajectory.histogram.iter().enumerate() {
        hist.push(vec![
            Cell::U(level as u64),
            Cell::U(count),
            Cell::F(count as f64 / total as f64),
        ]);
    }
    write_output(&in_dir(out_dir, "histogram.csv"), &hist.render(format))?;

    // optional paths
    if trajectory.n_plus_path.is_some()
        || trajectory.price_path.is_some()
        || trajectory.wealth_path.is_some()
    {
        let mut cols: Vec<&'static str> = vec!["epoch"];
        if trajectory.n_plus_path.is_some() {
            cols.push("n_plus");
        }
        if trajectory.price_path.is_some() {
            cols.push("price");
        }
        if trajectory.wealth_path.is_some() {
            cols.push("aggregate_wealth");
        }
        let mut paths = Table::new("simulate", overlay.render(), cols);
        for e in 0..trajectory.epochs as usize {
            let mut row = vec![Cell::U(e as u64 + 1)];
            if let Some(p) = &trajectory.n_plus_path {
                row.push(Cell::U(p[e] as u64));
            }
            if let Some(p) = &trajectory.price_path {
                row.push(Cell::F(p[e]));
            }
            if let Some(p) = &trajectory.wealth_path {
                row.push(Cell::F(p[e]));
            }
            paths.push(row);
        }
        write_output(&in_dir(out_dir, "paths.csv"), &paths.render(format))?;
    }

    if let Some(trace) = &trajectory.eta2_trace {
        let mut t = Table::new("simulate", overlay.render(), vec!["epoch", "level", "eta2"]);
        for (e, snap) in trace.iter().enumerate() {
            for (level, &v) in snap.iter().enumerate() {
                t.push(vec![Cell::U(e as u64 + 1), Cell::U(level as u64), Cell::I(v as i64)]);
            }
        }
        write_output(&in_dir(out_dir, "eta2.csv"), &t.render(format))?;
    }

    let summary = serde_json::json!({
        "artifact": format!("imbal {ARTIFACT_VERSION}"),
        "config": overlay.render().trim(),
        "rng": trajectory.rng_algorithm,
        "seed": trajectory.seed,
        "epochs": trajectory.epochs,
        "mean_n_plus": trajectory.mean_n_plus,
        "final_price": trajectory.final_price,
        "final_aggregate_wealth": trajectory.final_aggregate_wealth,
        "init_eta1": init_eta1,
        "init_eta2": init_eta2,
        "recorded": record,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_output(&in_dir(out_dir, "summary.json"), &text)
}

/// Hidden debugging view of the explicit chain and its dense solve.
pub fn cmd_oracle(overlay: &Overlay, branch_bits: u64, out: &Path, format: Format) -> Result<()> {
    let params = resolve_params(overlay, None)?;
    let kernel = TransitionKernel::new(params)?;
    let classes = classify(&kernel);
    if classes.has_a3() {
        return Err(anyhow!(
            "no settled chain: oscillating levels {:?}",
            classes.a3_levels()
        ));
    }
    let a2 = classes.a2_levels();
    let branch: Vec<i8> =
        (0..a2.len()).map(|k| if branch_bits >> k & 1 == 0 { 1 } else { -1 }).collect();
    let chain = build_chain(&kernel, &classes, &branch)?;
    let solved = stationary_solve(&chain)?;
    let pi = match &solved {
        StationaryOutcome::Unique(pi) => Some(pi),
        StationaryOutcome::Reducible(report) => {
            eprintln!("reducible chain; recurrent classes: {:?}", report.recurrent_classes);
            None
        }
    };
    let mut table = Table::new(
        "oracle",
        format!("{} branch={}", overlay.render(), branch_label_from(&a2, &branch)),
        vec!["level", "up", "down", "stay", "pi"],
    );
    for level in 0..chain.levels() {
        table.push(vec![
            Cell::U(level as u64),
            Cell::F(chain.up[level]),
            Cell::F(chain.down[level]),
            Cell::F(chain.stay[level]),
            match pi {
                Some(p) => Cell::F(p[level]),
                None => Cell::S(String::new()),
            },
        ]);
    }
    write_output(out, &table.render(format))
}
