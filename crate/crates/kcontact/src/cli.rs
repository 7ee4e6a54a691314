//! Command-line front door: load `.kc` models, run derivations, symmetry
//! checks, dissipation verification, and simulations.
//!
//! Exit codes: 0 — command ran and every check passed; 1 — command ran but
//! a check failed; 2 — usage or processing error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::chart::{BundleChart, Coord};
use crate::dissipation::{
    verify_on_solution_with, verify_symbolic_with, SymbolicConfig, VerificationReport,
    DEFAULT_NUMERIC_C,
};
use crate::expr::{parse, Expr, ZeroConfig, DEFAULT_SEED};
use crate::lagrangian::RegularityVerdict;
use crate::model::{ModelFile, Preset, VectorFieldDef};
use crate::solver::{
    el_residual_on_grid, estimate_order, manufactured_string_solution, reconstruct_s_fields,
    solve_coupled_strings, solve_damped_laplace, solve_damped_string, solve_telegrapher,
    BoundaryConditions, BoundaryKind, CoupledParams, DirichletBox, FieldSolution, Gauge, GridSpec,
    InitialData, LaplaceParams, ScalarFn, StringParams, TelegrapherParams,
};
use crate::symmetry::{
    cartan_like_check_with, is_k_contact_symmetry_with, is_natural_symmetry_with,
    is_newtonoid_with, SymmetryVerdict,
};

type CliError = Box<dyn std::error::Error>;
type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Symbolic,
    Numeric,
}

#[derive(Debug, Parser)]
#[command(
    name = "kcontact",
    version,
    about = "Symbolic-numeric toolkit for dissipative k-contact Lagrangian field theory"
)]
pub struct Cli {
    /// report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// RNG seed threaded through every probabilistic check
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// worker cap (reserved: current computations are sequential, so the
    /// flag only documents intent)
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// directory for files written by `simulate` (default `out`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived geometry: energy, contact forms, Hessian,
    /// regularity, Euler-Lagrange residual system.
    Derive { model: PathBuf },
    /// Run a symmetry check against a named vector field.
    Check {
        model: PathBuf,
        /// natural/k-contact check of this vector field
        #[arg(long)]
        symmetry: Option<String>,
        /// Newtonoid check of this vector field (needs --sopde)
        #[arg(long)]
        newtonoid: Option<String>,
        /// SOPDE fixture name for --newtonoid
        #[arg(long)]
        sopde: Option<String>,
        /// Cartan-like check of this vector field (needs --g)
        #[arg(long)]
        cartan: Option<String>,
        /// `;`-separated g^alpha expressions for --cartan
        #[arg(long)]
        g: Option<String>,
    },
    /// Verify a named dissipation law symbolically or numerically.
    Verify {
        model: PathBuf,
        #[arg(long)]
        law: String,
        #[arg(long, value_enum, default_value_t = VerifyMode::Symbolic)]
        mode: VerifyMode,
        /// refinement node counts for numeric mode
        #[arg(long, num_args = 1.., default_values_t = vec![51usize, 101, 201])]
        nodes: Vec<usize>,
        /// numeric tolerance calibration constant C in C*(dt^2 + dx^2)
        #[arg(long, default_value_t = DEFAULT_NUMERIC_C)]
        cal: f64,
    },
    /// Run the model's preset solver and write the solution grid.
    Simulate {
        model: PathBuf,
        /// nodes along axis 1 (space)
        #[arg(long, default_value_t = 101)]
        nx: usize,
        /// nodes along axis 0 (time, or x1 for elliptic presets)
        #[arg(long, default_value_t = 101)]
        nt: usize,
        /// parameter overrides, `name=value`
        #[arg(long)]
        param: Vec<String>,
        /// additionally run a {1,2,4} refinement study
        #[arg(long, default_value_t = false)]
        refine: bool,
    },
}

/// Collected command output: human-readable lines plus a JSON tree, and
/// the aggregate pass flag that decides between exit codes 0 and 1.
#[derive(Debug)]
pub struct Output {
    pub pass: bool,
    lines: Vec<String>,
    json: serde_json::Map<String, Value>,
}

impl Output {
    fn new() -> Output {
        Output {
            pass: true,
            lines: Vec::new(),
            json: serde_json::Map::new(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn set(&mut self, key: &str, v: Value) {
        self.json.insert(key.to_string(), v);
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn json(&self) -> Value {
        Value::Object(self.json.clone())
    }

    fn emit(&self, format: Format) {
        match format {
            Format::Text => {
                for l in &self.lines {
                    println!("{l}");
                }
            }
            Format::Json => {
                let mut tree = self.json.clone();
                tree.insert("pass".into(), Value::Bool(self.pass));
                println!(
                    "{}",
                    serde_json::to_string_pretty(&Value::Object(tree)).unwrap()
                );
            }
        }
    }
}

/// Entry point used by the binary; parses `std::env::args`.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let is_usage = e.use_stderr();
            let _ = e.print();
            return if is_usage { 2 } else { 0 };
        }
    };
    let format = cli.format;
    match execute(&cli) {
        Ok(out) => {
            out.emit(format);
            if out.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs a fully parsed invocation; separated from [`main_entry`] so tests
/// can inspect the report instead of scraping stdout.
pub fn execute(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Derive { model } => cmd_derive(&ModelFile::load(model)?),
        Command::Check {
            model,
            symmetry,
            newtonoid,
            sopde,
            cartan,
            g,
        } => cmd_check(
            &ModelFile::load(model)?,
            symmetry.as_deref(),
            newtonoid.as_deref(),
            sopde.as_deref(),
            cartan.as_deref(),
            g.as_deref(),
            cli.seed,
        ),
        Command::Verify {
            model,
            law,
            mode,
            nodes,
            cal,
        } => cmd_verify(&ModelFile::load(model)?, law, *mode, nodes, *cal, cli.seed),
        Command::Simulate {
            model,
            nx,
            nt,
            param,
            refine,
        } => {
            let overrides = parse_overrides(param)?;
            let m = ModelFile::load_with_overrides(model, &overrides)?;
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            cmd_simulate(&m, *nx, *nt, *refine, &out_dir)
        }
    }
}

fn parse_overrides(specs: &[String]) -> CliResult<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for spec in specs {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| format!("expected `name=value`, got `{spec}`"))?;
        map.insert(name.trim().to_string(), value.trim().parse::<f64>()?);
    }
    Ok(map)
}

fn coord_label(chart: &BundleChart, c: Coord) -> String {
    match c {
        Coord::Q(i) => chart.base_name(i).to_string(),
        Coord::V(i, alpha) => format!("v[{},{}]", chart.base_name(i), alpha + 1),
        Coord::S(alpha) => format!("s[{}]", alpha + 1),
    }
}

// ---------------------------------------------------------------- derive

fn cmd_derive(model: &ModelFile) -> CliResult<Output> {
    let mut out = Output::new();
    let chart = &model.chart;
    let lag = &model.lagrangian;
    out.line(format!("model: {}", model.name));
    out.set("model", json!(model.name));

    let energy = lag.energy().to_dsl(chart);
    out.line(format!("energy E_L = {energy}"));
    out.set("energy", json!(energy));

    let mut eta_json = Vec::new();
    for (alpha, eta) in lag.contact_forms().iter().enumerate() {
        let mut terms = Vec::new();
        for (idx, coord) in chart.coords().into_iter().enumerate() {
            let coeff = &eta.coeffs()[idx];
            if coeff.is_num_zero() {
                continue;
            }
            terms.push(format!("({}) d{}", coeff.to_dsl(chart), coord_label(chart, coord)));
        }
        let text = terms.join(" + ");
        out.line(format!("eta[{}] = {text}", alpha + 1));
        eta_json.push(json!(text));
    }
    out.set("contact_forms", Value::Array(eta_json));

    let hessian = lag.hessian();
    let det = hessian.determinant().normalize().to_dsl(chart);
    out.line(format!("hessian det = {det}"));
    out.set("hessian_det", json!(det));
    let verdict = match lag.is_regular() {
        RegularityVerdict::Regular => "regular",
        RegularityVerdict::Singular => "singular",
        RegularityVerdict::Pointwise(_) => "pointwise",
    };
    out.line(format!("regularity: {verdict}"));
    out.set("regularity", json!(verdict));

    let sys = lag.euler_lagrange_residuals();
    let mut residual_json = Vec::new();
    for (i, r) in sys.residuals.iter().enumerate() {
        let text = r.to_dsl(chart);
        out.line(format!("EL[{}] = {text} = 0", chart.base_name(i)));
        residual_json.push(json!(text));
    }
    out.set("el_residuals", Value::Array(residual_json));
    let div = sys.divergence.to_dsl(chart);
    out.line(format!("divergence: {div} = 0"));
    out.set("divergence", json!(div));
    Ok(out)
}

// ----------------------------------------------------------------- check

fn cmd_check(
    model: &ModelFile,
    symmetry: Option<&str>,
    newtonoid: Option<&str>,
    sopde: Option<&str>,
    cartan: Option<&str>,
    g: Option<&str>,
    seed: u64,
) -> CliResult<Output> {
    let mut out = Output::new();
    let chart = &model.chart;
    let lag = &model.lagrangian;
    let cfg = ZeroConfig {
        seed,
        ..ZeroConfig::default()
    };
    let selected = [symmetry.is_some(), newtonoid.is_some(), cartan.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if selected != 1 {
        return Err("pass exactly one of --symmetry, --newtonoid, --cartan".into());
    }
    let lookup = |name: &str| -> CliResult<&VectorFieldDef> {
        model
            .vector_fields
            .get(name)
            .ok_or_else(|| format!("model declares no vector field `{name}`").into())
    };
    let mut verdicts: Vec<SymmetryVerdict> = Vec::new();
    if let Some(name) = symmetry {
        match lookup(name)? {
            VectorFieldDef::Base(z) => {
                verdicts.push(is_natural_symmetry_with(lag, z, &cfg)?);
                verdicts.push(is_k_contact_symmetry_with(lag, &z.complete_lift(), &cfg)?);
            }
            VectorFieldDef::Bundle(x) => {
                verdicts.push(is_k_contact_symmetry_with(lag, x, &cfg)?);
            }
        }
    } else if let Some(name) = newtonoid {
        let sopde_name = sopde.ok_or("--newtonoid needs --sopde NAME")?;
        let gamma = model
            .sopdes
            .get(sopde_name)
            .ok_or_else(|| format!("model declares no SOPDE `{sopde_name}`"))?;
        verdicts.push(is_newtonoid_with(gamma, &lookup(name)?.as_bundle(), &cfg)?);
    } else if let Some(name) = cartan {
        let g_text = g.ok_or("--cartan needs --g EXPR;EXPR;...")?;
        let gs: Vec<Expr> = g_text
            .split(';')
            .map(|t| parse(t.trim(), chart))
            .collect::<Result<_, _>>()?;
        verdicts.push(cartan_like_check_with(
            lag,
            &lookup(name)?.as_bundle(),
            &gs,
            &cfg,
        )?);
    }
    let mut verdict_json = Vec::new();
    for v in &verdicts {
        let ok = v.is_symmetry();
        out.pass &= ok;
        out.line(format!(
            "{}: {}",
            v.class,
            if ok { "pass" } else { "FAIL" }
        ));
        let mut cond_json = Vec::new();
        for c in &v.conditions {
            if !c.verdict.is_zeroish() {
                out.line(format!("  condition `{}`: {}", c.name, c.verdict));
            }
            cond_json.push(json!({ "name": c.name, "verdict": c.verdict }));
        }
        let law_json = v.law.as_ref().map(|law| {
            let comps: Vec<String> =
                law.components().iter().map(|e| e.to_dsl(chart)).collect();
            for (alpha, text) in comps.iter().enumerate() {
                out.line(format!("  F[{}] = {text}", alpha + 1));
            }
            json!(comps)
        });
        verdict_json.push(json!({
            "class": v.class.to_string(),
            "pass": ok,
            "conditions": cond_json,
            "law": law_json,
        }));
    }
    out.set("verdicts", Value::Array(verdict_json));
    Ok(out)
}

// ---------------------------------------------------------------- verify

fn report_json(report: &VerificationReport) -> Value {
    json!({
        "mode": report.mode.to_string(),
        "linf": report.norms.linf,
        "l2": report.norms.l2,
        "tolerance": report.tolerance,
        "pass": report.verdict,
        "certificate": report.certificate.map(|c| json!({
            "exists": c.exists,
            "residual": c.residual,
        })),
        "note": report.note,
    })
}

fn cmd_verify(
    model: &ModelFile,
    law_name: &str,
    mode: VerifyMode,
    nodes: &[usize],
    cal: f64,
    seed: u64,
) -> CliResult<Output> {
    let mut out = Output::new();
    let lag = &model.lagrangian;
    let law = model
        .laws
        .get(law_name)
        .ok_or_else(|| format!("model declares no law `{law_name}`"))?;
    match mode {
        VerifyMode::Symbolic => {
            let cfg = SymbolicConfig {
                seed,
                ..SymbolicConfig::default()
            };
            let report = verify_symbolic_with(lag, law, &cfg)?;
            out.pass = report.passed();
            out.line(format!(
                "symbolic: {} (max residual {:.3e}, tolerance {:.0e})",
                if report.verdict { "pass" } else { "FAIL" },
                report.norms.linf,
                report.tolerance
            ));
            if let Some(cert) = report.certificate {
                out.line(format!(
                    "certificate i_X d(eta) = dF: {}",
                    if cert.exists { "solvable" } else { "not solvable" }
                ));
            }
            out.line(format!("note: {}", report.note));
            out.set("report", report_json(&report));
        }
        VerifyMode::Numeric => {
            if model.preset != Some(Preset::DampedString) {
                return Err(
                    "numeric verification is wired to the damped-string preset only".into(),
                );
            }
            let params = string_params(&model.chart)?;
            let oracle = manufactured_string_solution(&params, 1.0)?;
            let bc = oracle.boundary_conditions();
            let mut errors = Vec::new();
            let mut level_json = Vec::new();
            for &count in nodes {
                let grid = GridSpec::from_extents([0.5, 1.0], [count, count])?;
                let sol = solve_damped_string(&params, &grid, &bc)?;
                let sol = reconstruct_s_fields(lag, &sol, Gauge::ZeroAllButFirst)?;
                let report = verify_on_solution_with(lag, law, &sol, cal)?;
                out.pass &= report.verdict;
                out.line(format!(
                    "numeric {count}x{count}: {} (linf {:.3e}, tolerance {:.3e})",
                    if report.verdict { "pass" } else { "FAIL" },
                    report.norms.linf,
                    report.tolerance
                ));
                errors.push((grid.h(), report.norms.linf));
                level_json.push(report_json(&report));
            }
            if errors.len() >= 2 {
                let order = estimate_order(&errors);
                out.line(format!("observed residual order: {order:.2}"));
                out.set("order", json!(order));
            }
            out.set("levels", Value::Array(level_json));
        }
    }
    Ok(out)
}

// -------------------------------------------------------------- simulate

fn param_value(chart: &BundleChart, name: &str) -> CliResult<f64> {
    chart
        .param(name)
        .and_then(|p| p.default)
        .ok_or_else(|| format!("model does not bind parameter `{name}`").into())
}

fn string_params(chart: &BundleChart) -> CliResult<StringParams> {
    Ok(StringParams {
        rho: param_value(chart, "rho")?,
        tau: param_value(chart, "tau")?,
        gamma: param_value(chart, "gamma")?,
    })
}

/// Zero-Dirichlet standing-wave data shared by the presets without a
/// closed-form oracle.
fn standing_wave_bc(n_fields: usize) -> BoundaryConditions {
    let zero: ScalarFn = std::sync::Arc::new(|_| 0.0);
    let disp: ScalarFn = std::sync::Arc::new(|x: f64| 0.1 * (std::f64::consts::PI * x).sin());
    BoundaryConditions {
        left: BoundaryKind::Dirichlet(vec![zero.clone(); n_fields]),
        right: BoundaryKind::Dirichlet(vec![zero.clone(); n_fields]),
        initial: (0..n_fields)
            .map(|_| InitialData {
                displacement: disp.clone(),
                velocity: zero.clone(),
            })
            .collect(),
    }
}

/// One solver run of the preset at the given node counts; returns the
/// reconstructed solution and the oracle error when an oracle exists.
fn run_preset(
    model: &ModelFile,
    preset: Preset,
    shape: [usize; 2],
) -> CliResult<(FieldSolution, Option<f64>)> {
    let chart = &model.chart;
    match preset {
        Preset::DampedString => {
            let params = string_params(chart)?;
            let oracle = manufactured_string_solution(&params, 1.0)?;
            let grid = GridSpec::from_extents([0.5, 1.0], shape)?;
            let sol = solve_damped_string(&params, &grid, &oracle.boundary_conditions())?;
            let mut err: f64 = 0.0;
            for i0 in 0..shape[0] {
                for i1 in 0..shape[1] {
                    let exact = oracle.phi(grid.coord(0, i0), grid.coord(1, i1));
                    err = err.max((sol.phi[0][[i0, i1]] - exact).abs());
                }
            }
            Ok((sol, Some(err)))
        }
        Preset::Telegrapher => {
            let params = TelegrapherParams {
                inductance: param_value(chart, "L")?,
                capacitance: param_value(chart, "C")?,
                resistance: param_value(chart, "R")?,
                conductance: param_value(chart, "G")?,
            };
            let grid = GridSpec::from_extents([0.5, 1.0], shape)?;
            let sol = solve_telegrapher(&params, &grid, &standing_wave_bc(1))?;
            Ok((sol, None))
        }
        Preset::CoupledStrings => {
            let kernel = chart
                .kernels()
                .first()
                .ok_or("coupled-strings model declares no kernel")?;
            let params = CoupledParams {
                gamma: param_value(chart, "gamma")?,
                coupling: crate::chart::KernelImpl {
                    name: kernel.name.clone(),
                    fns: kernel.fns.clone(),
                    ratio_limit_at_zero: kernel.ratio_limit_at_zero,
                },
            };
            let grid = GridSpec::from_extents([0.5, 1.0], shape)?;
            let sol = solve_coupled_strings(&params, &grid, &standing_wave_bc(2))?;
            Ok((sol, None))
        }
        Preset::DampedLaplace => {
            let g1 = param_value(chart, "g1")?;
            let g2 = param_value(chart, "g2")?;
            // φ = e^{−g1·x1} solves the damped Laplace equation exactly and
            // doubles as Dirichlet data: a manufactured oracle.
            let exact = move |x: f64, _y: f64| (-g1 * x).exp();
            let grid = GridSpec::from_extents([1.0, 1.0], shape)?;
            let sol = solve_damped_laplace(
                &LaplaceParams { gamma: [g1, g2] },
                &grid,
                &DirichletBox {
                    value: std::sync::Arc::new(exact),
                },
            )?;
            let mut err: f64 = 0.0;
            for i0 in 0..shape[0] {
                for i1 in 0..shape[1] {
                    let e = exact(grid.coord(0, i0), grid.coord(1, i1));
                    err = err.max((sol.phi[0][[i0, i1]] - e).abs());
                }
            }
            Ok((sol, Some(err)))
        }
    }
}

fn axis_names(preset: Preset) -> [&'static str; 2] {
    match preset {
        Preset::DampedLaplace => ["x1", "x2"],
        _ => ["t", "x"],
    }
}

fn write_csv(
    path: &Path,
    axes: [&'static str; 2],
    chart: &BundleChart,
    sol: &FieldSolution,
) -> CliResult<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = vec![axes[0].to_string(), axes[1].to_string()];
    for i in 0..sol.n_fields() {
        header.push(format!("phi_{}", chart.base_name(i)));
    }
    for alpha in 0..sol.s.len() {
        header.push(format!("s_{}", alpha + 1));
    }
    writeln!(file, "{}", header.join(","))?;
    for i0 in 0..sol.grid.shape[0] {
        for i1 in 0..sol.grid.shape[1] {
            let mut row = vec![
                format!("{:.16e}", sol.grid.coord(0, i0)),
                format!("{:.16e}", sol.grid.coord(1, i1)),
            ];
            for phi in &sol.phi {
                row.push(format!("{:.16e}", phi[[i0, i1]]));
            }
            for s in &sol.s {
                row.push(format!("{:.16e}", s[[i0, i1]]));
            }
            writeln!(file, "{}", row.join(","))?;
        }
    }
    Ok(())
}

fn grid_json(sol: &FieldSolution) -> Value {
    json!({
        "shape": sol.grid.shape,
        "spacing": sol.grid.spacing,
        "origin": sol.grid.origin,
        "phi": sol.phi.iter().map(|a| {
            a.outer_iter().map(|row| row.to_vec()).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "s": sol.s.iter().map(|a| {
            a.outer_iter().map(|row| row.to_vec()).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    })
}

fn cmd_simulate(
    model: &ModelFile,
    nx: usize,
    nt: usize,
    refine: bool,
    out_dir: &Path,
) -> CliResult<Output> {
    let mut out = Output::new();
    let preset = model
        .preset
        .ok_or("model declares no preset; nothing to simulate")?;
    let lag = &model.lagrangian;
    let (sol, err) = run_preset(model, preset, [nt, nx])?;
    let sol = reconstruct_s_fields(lag, &sol, Gauge::ZeroAllButFirst)?;
    let norms = el_residual_on_grid(lag, &sol)?;
    out.line(format!("preset: {preset} ({nt}x{nx} nodes)"));
    out.set("preset", json!(preset.to_string()));
    for (i, f) in norms.fields.iter().enumerate() {
        out.line(format!(
            "EL residual [{}]: linf {:.3e}, l2 {:.3e}",
            model.chart.base_name(i),
            f.linf,
            f.l2
        ));
    }
    out.set(
        "el_residual_linf",
        json!(norms.fields.iter().map(|f| f.linf).collect::<Vec<_>>()),
    );
    if let Some(e) = err {
        out.line(format!("error vs manufactured oracle: {e:.3e}"));
        out.set("oracle_error", json!(e));
    }

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", model.name));
    write_csv(&csv_path, axis_names(preset), &model.chart, &sol)?;
    out.line(format!("wrote {}", csv_path.display()));
    let json_path = out_dir.join(format!("{}.json", model.name));
    std::fs::write(&json_path, serde_json::to_string(&grid_json(&sol))?)?;
    out.line(format!("wrote {}", json_path.display()));
    out.set("files", json!([csv_path, json_path]));

    if refine {
        let mut table = Vec::new();
        let mut lines = Vec::new();
        for factor in [1usize, 2, 4] {
            let shape = [(nt - 1) * factor + 1, (nx - 1) * factor + 1];
            let (sol, err) = run_preset(model, preset, shape)?;
            let h = sol.grid.h();
            let value = match err {
                Some(e) => e,
                None => {
                    let sol = reconstruct_s_fields(lag, &sol, Gauge::ZeroAllButFirst)?;
                    el_residual_on_grid(lag, &sol)?.fields[0].linf
                }
            };
            lines.push(format!(
                "refine x{factor}: h {h:.4e}, {} {value:.4e}",
                if err.is_some() { "error" } else { "residual" }
            ));
            table.push((h, value));
        }
        for l in lines {
            out.line(l);
        }
        let order = estimate_order(&table);
        out.line(format!("observed order: {order:.2}"));
        out.set(
            "refinement",
            json!(table
                .iter()
                .map(|(h, e)| json!({ "h": h, "error": e }))
                .collect::<Vec<_>>()),
        );
        out.set("order", json!(order));
    }
    Ok(out)
}
