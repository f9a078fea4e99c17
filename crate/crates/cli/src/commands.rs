//! Subcommand bodies. Each takes a validated [`Plan`] and renders its result
//! in the requested format; nothing here touches the file system.

use nalgebra::DMatrix;
use pcsft::correspondence::{
    classical_average_exact, classical_average_mc, h_scaling_study, quantum_average, t_variable,
    DensityOperator,
};
use pcsft::dynamics::{complex_flow, ensemble_evolve_times, evolve_point, make_flow, vonneumann_lift};
use pcsft::linalg::{max_abs_c, trace_of_product_c};
use pcsft::phase::to_complex_operator;
use pcsft::wick::MAX_FACTORS;
use pcsft::{Complex64, ComplexOperator};
use serde_json::json;

use crate::config::{ConfigError, Plan};
use crate::output::{to_json_string, Cell, Format, Table};
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Correspondence,
    Scaling,
    Dynamics,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandError {
    Config(ConfigError),
    /// An internal invariant broke during the run, e.g. a non-finite value.
    Failure(String),
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => e.fmt(f),
            CommandError::Failure(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

fn failure(e: impl std::fmt::Display) -> CommandError {
    CommandError::Failure(e.to_string())
}

fn field_error(field: &str, message: impl std::fmt::Display) -> CommandError {
    CommandError::Config(ConfigError::Field {
        field: field.to_string(),
        message: message.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    /// Side document, such as the slope summary of `scaling` in CSV mode.
    pub summary: Option<String>,
    /// Whether every check held; only `verify` can report `false`.
    pub passed: bool,
}

impl Output {
    fn table(table: Table, format: Format) -> Result<Self, CommandError> {
        table.check_finite().map_err(failure)?;
        let body = match format {
            Format::Csv => table.to_csv(),
            Format::Json => to_json_string(&table.to_json_value()),
        };
        Ok(Output {
            body,
            summary: None,
            passed: true,
        })
    }
}

pub fn run(command: Command, plan: &Plan, format: Format) -> Result<Output, CommandError> {
    match command {
        Command::Verify => cmd_verify(plan, format),
        Command::Correspondence => cmd_correspondence(plan, format),
        Command::Scaling => cmd_scaling(plan, format),
        Command::Dynamics => cmd_dynamics(plan, format),
        Command::Ensemble => cmd_ensemble(plan, format),
    }
}

pub fn cmd_verify(plan: &Plan, format: Format) -> Result<Output, CommandError> {
    let report = verify::run(plan);
    let body = match format {
        Format::Json => to_json_string(&report),
        Format::Csv => {
            let mut s = String::from("check,status,max_residual,tolerance\n");
            for c in &report.checks {
                let status = if c.passed() { "pass" } else { "fail" };
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    c.check,
                    status,
                    crate::output::format_f64(c.max_residual),
                    crate::output::format_f64(c.tolerance)
                ));
            }
            s
        }
    };
    Ok(Output {
        body,
        summary: None,
        passed: report.passed,
    })
}

fn require_density<'a>(plan: &'a Plan, command: &str) -> Result<&'a DensityOperator, CommandError> {
    plan.density.as_ref().ok_or_else(|| {
        field_error(
            "state",
            format!(
                "`{command}` needs a symplectically invariant state with dispersion 2h = {}",
                2.0 * plan.h
            ),
        )
    })
}

fn exact_supported(plan: &Plan) -> bool {
    plan.variable.degree() <= MAX_FACTORS
}

pub fn cmd_correspondence(plan: &Plan, format: Format) -> Result<Output, CommandError> {
    let density = require_density(plan, "correspondence")?;
    let f = &plan.variable;
    let exact = if exact_supported(plan) {
        Some(classical_average_exact(f, &plan.state).map_err(failure)?)
    } else {
        None
    };
    let mc = classical_average_mc(f, &plan.state, plan.samples, plan.seed, plan.partitions)
        .map_err(failure)?;
    let observable = t_variable(f, plan.h).map_err(failure)?;
    let quantum = quantum_average(density, &observable).map_err(failure)?;
    let mut table = Table::new(["h", "classical_exact", "classical_mc", "mc_stderr", "quantum"]);
    table.push(vec![
        plan.h.into(),
        exact.into(),
        mc.estimate.into(),
        mc.stderr.into(),
        quantum.into(),
    ]);
    Output::table(table, format)
}

pub fn cmd_scaling(plan: &Plan, format: Format) -> Result<Output, CommandError> {
    let density = require_density(plan, "scaling")?;
    if !exact_supported(plan) {
        return Err(field_error(
            "variable",
            format!("scaling needs exact averages: at most {MAX_FACTORS} factors per term"),
        ));
    }
    let study = h_scaling_study(&plan.variable, density, &plan.h_grid)
        .map_err(|e| field_error("h_grid", e))?;
    let mut table = Table::new(["h", "classical", "quantum", "abs_error"]);
    for r in &study.rows {
        table.push(vec![r.h.into(), r.classical.into(), r.quantum.into(), r.abs_error.into()]);
    }
    table.check_finite().map_err(failure)?;
    let summary = json!({
        "slope": study.fit.map(|f| f.slope),
        "r2": study.fit.map(|f| f.r2),
        "exact": study.exact,
    });
    match format {
        Format::Csv => Ok(Output {
            body: table.to_csv(),
            summary: Some(to_json_string(&summary)),
            passed: true,
        }),
        Format::Json => {
            let mut doc = summary;
            doc["table"] = table.to_json_value();
            Ok(Output {
                body: to_json_string(&doc),
                summary: None,
                passed: true,
            })
        }
    }
}

/// `Re tr(B^c_t M) / 2h`: the quantum-style average `tr(T(ρ_t) T(f))`, written
/// through the complex covariance so it is defined for any state.
fn observable_average(bc: &DMatrix<Complex64>, m: &ComplexOperator, h: f64) -> f64 {
    trace_of_product_c(bc, &m.m).re / (2.0 * h)
}

pub fn cmd_dynamics(plan: &Plan, format: Format) -> Result<Output, CommandError> {
    let n = plan.n;
    let observable = t_variable(&plan.variable, plan.h).map_err(failure)?;
    let m = ComplexOperator::new(observable.matrix().clone());
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=n).map(|i| format!("q{i}")));
    columns.extend((1..=n).map(|i| format!("p{i}")));
    columns.push("dispersion".into());
    columns.push("observable".into());
    let mut table = Table::new(columns);
    for &t in &plan.times {
        let flow = make_flow(&plan.generator, t, plan.h).map_err(failure)?;
        if !flow.matrix().iter().all(|x| x.is_finite()) {
            return Err(failure(format!("flow overflowed at t = {t}")));
        }
        let point = evolve_point(&flow, &plan.point).map_err(failure)?;
        let state = vonneumann_lift(&plan.state, &flow).map_err(failure)?;
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(point.as_vector().iter().map(|&x| Cell::Num(x)));
        row.push(state.dispersion().into());
        row.push(observable_average(&state.complex_covariance().bc, &m, plan.h).into());
        table.push(row);
    }
    Output::table(table, format)
}

pub fn cmd_ensemble(plan: &Plan, format: Format) -> Result<Output, CommandError> {
    let mh = to_complex_operator(&plan.generator).map_err(|e| {
        field_error("generator", format!("ensemble evolution needs a J-commuting generator: {e}"))
    })?;
    let estimates = ensemble_evolve_times(
        &plan.state,
        &mh,
        &plan.times,
        plan.h,
        plan.samples,
        plan.seed,
        plan.partitions,
    )
    .map_err(failure)?;
    let bc0 = plan.state.complex_covariance().bc;
    let mut table = Table::new([
        "t",
        "dispersion",
        "dispersion_stderr",
        "dispersion_exact",
        "max_abs_residual",
        "max_z",
    ]);
    for est in &estimates {
        let v = complex_flow(&mh, est.time, plan.h).map_err(failure)?;
        let exact = &v * &bc0 * v.adjoint();
        table.push(vec![
            est.time.into(),
            est.dispersion.into(),
            est.dispersion_stderr.into(),
            exact.trace().re.into(),
            max_abs_c(&(&est.mean - &exact)).into(),
            est.max_z_score(&exact).into(),
        ]);
    }
    Output::table(table, format)
}
