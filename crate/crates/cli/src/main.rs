//! `tft`: spectra, fusion data, correlators and Thompson-group actions of
//! tree-network field theories.

mod format;

use std::fmt::Write as _;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use tft_core::correlator::{
    self, CorrelatorRequest, CorrelatorState, InsertionDoc, OpeTerm, RequestDoc, StaircaseRow,
};
use tft_core::dyadic::CirclePoint;
use tft_core::models::{self, Model};
use tft_core::spectral::Isometry3Box;
use tft_core::thompson::{self, ThompsonElement};

use format::{complex, pair, real, table};

#[derive(Parser, Debug)]
#[command(
    name = "tft",
    version,
    about = "Spectra, fusion rules and correlators of tree-network field theories"
)]
struct Cli {
    /// Preset name (qutrit, fibonacci, fixture) or path to a model JSON file.
    #[arg(long, short, global = true, default_value = "qutrit")]
    model: String,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues, multiplicities and scaling dimensions, with the label table.
    Spectrum,
    /// Fusion coefficients f and the fusion-rule tensor N.
    Fusion,
    /// Operator product expansion of two fields.
    Ope { alpha: String, beta: String },
    /// Evaluates an n-point correlator.
    Correlator(RequestArgs),
    /// Evaluates a correlator with both the engine and the full-vector oracle.
    OracleDiff(RequestArgs),
    /// Two-point values against a uniform dyadic grid, as CSV.
    Staircase(StaircaseArgs),
    /// Thompson-group elements.
    #[command(subcommand)]
    Thompson(ThompsonCommand),
    /// Structural checks on the model's isometry.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Writes the model as JSON.
    Export {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RequestArgs {
    /// Request JSON file, or `-` for stdin.
    #[arg(long, conflicts_with_all = ["at", "fields"])]
    request: Option<PathBuf>,
    /// Insertion point (`p/q`, `a/2^l` or `0.bbb`); repeat per insertion.
    #[arg(long)]
    at: Vec<String>,
    /// Field labels, one per insertion.
    #[arg(long, num_args = 1..)]
    fields: Vec<String>,
    /// Thompson element for the transformed state (word or JSON).
    #[arg(long)]
    transform: Option<String>,
}

#[derive(Args, Debug)]
struct StaircaseArgs {
    /// Fixed insertion point.
    #[arg(long, default_value = "0")]
    x: String,
    /// The two field labels.
    #[arg(long, num_args = 2, required = true)]
    fields: Vec<String>,
    /// Evaluation depth.
    #[arg(long, default_value_t = 8)]
    depth: u32,
    /// The grid has 2^grid points.
    #[arg(long, default_value_t = 8)]
    grid: u32,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ThompsonCommand {
    /// Product g1∘g2∘… (the rightmost acts first).
    Compose {
        #[arg(required = true)]
        elements: Vec<String>,
    },
    /// Reduced tree-pair form.
    Reduce { element: String },
    /// Jumps of the log-slope, as point and weight.
    Schwarzian { element: String },
    /// Images of points.
    Apply {
        element: String,
        #[arg(required = true)]
        points: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// Isometry under every bipartition of the three legs.
    Perfect,
    /// Symmetry under exchange of the two output legs.
    Swap,
    /// Invariance under cyclic shift of the three legs.
    Rotation,
    /// Vacuum invariance under Thompson elements.
    Modular {
        /// Elements to check; S and C when omitted.
        #[arg(long = "element")]
        elements: Vec<String>,
        #[arg(long, default_value_t = 3)]
        level: u32,
    },
}

/// Bad input shape, as opposed to a failed computation.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> Result<String> {
    let model = models::load_model_ref(&cli.model)?;
    match &cli.command {
        Command::Spectrum => spectrum(&model, cli.json),
        Command::Fusion => fusion(&model, cli.json),
        Command::Ope { alpha, beta } => ope(&model, alpha, beta, cli.json),
        Command::Correlator(args) => evaluate(&model, args, cli.json),
        Command::OracleDiff(args) => oracle_diff(&model, args, cli.json),
        Command::Staircase(args) => staircase(&model, args),
        Command::Thompson(cmd) => thompson_cmd(cmd, cli.json),
        Command::Check(cmd) => check(&model, cmd, cli.json),
        Command::Export { output } => {
            let text = model.to_json() + "\n";
            write_or_return(output.as_ref(), text)
        }
    }
}

fn write_or_return(path: Option<&PathBuf>, text: String) -> Result<String> {
    match path {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn to_json(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

// ---------------------------------------------------------------------------

fn spectrum(model: &Model, as_json: bool) -> Result<String> {
    let h = |a: usize| model.scaling_dimension(a).ok();
    // Distinct eigenvalues in label order.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for a in 0..model.len() {
        match groups
            .iter_mut()
            .find(|(r, _)| (model.eigenvalue(*r) - model.eigenvalue(a)).norm() <= 1e-9)
        {
            Some(g) => g.1 += 1,
            None => groups.push((a, 1)),
        }
    }
    if as_json {
        let eigenvalues: Vec<_> = groups
            .iter()
            .map(|&(r, n)| json!({"value": pair(model.eigenvalue(r)), "multiplicity": n, "h": h(r).map(|s| s.h_real)}))
            .collect();
        let labels: Vec<_> = (0..model.len())
            .map(|a| {
                json!({
                    "index": a,
                    "label": model.labels()[a],
                    "eigenvalue": pair(model.eigenvalue(a)),
                    "h": h(a).map(|s| s.h_real),
                    "phase": h(a).map(|s| s.phase),
                })
            })
            .collect();
        return to_json(
            &json!({"model": model.name(), "eigenvalues": eigenvalues, "labels": labels}),
        );
    }
    let show_h = |a: usize| h(a).map_or("-".to_string(), |s| real(s.h_real));
    let mut out = format!("model {}\n\n", model.name());
    let mut rows = vec![vec![
        "eigenvalue".to_string(),
        "multiplicity".into(),
        "h".into(),
    ]];
    rows.extend(
        groups
            .iter()
            .map(|&(r, n)| vec![complex(model.eigenvalue(r)), n.to_string(), show_h(r)]),
    );
    out += &table(&rows);
    out.push('\n');
    let mut rows = vec![vec![
        "index".to_string(),
        "label".into(),
        "eigenvalue".into(),
        "h".into(),
    ]];
    rows.extend((0..model.len()).map(|a| {
        vec![
            a.to_string(),
            model.labels()[a].clone(),
            complex(model.eigenvalue(a)),
            show_h(a),
        ]
    }));
    out += &table(&rows);
    Ok(out)
}

fn fusion(model: &Model, as_json: bool) -> Result<String> {
    let f = model.fusion();
    let ring = model.ring();
    let labels = model.labels();
    if as_json {
        let nested: Vec<Vec<Vec<[f64; 2]>>> = f
            .nested()
            .iter()
            .map(|m| {
                m.iter()
                    .map(|r| r.iter().map(|z| pair(*z)).collect())
                    .collect()
            })
            .collect();
        return to_json(&json!({
            "labels": labels,
            "f": nested,
            "n": ring.n_tensor,
            "is_associative": ring.is_associative,
            "is_associative_integer": ring.is_associative_integer,
            "is_commutative": ring.is_commutative,
            "complex_associative": ring.complex_associative,
        }));
    }
    let mut out = String::new();
    for (a, la) in labels.iter().enumerate() {
        writeln!(out, "f^{la}  (rows β, columns γ)")?;
        let mut rows = vec![std::iter::once(String::new())
            .chain(labels.iter().cloned())
            .collect::<Vec<_>>()];
        for (b, lb) in labels.iter().enumerate() {
            let mut row = vec![lb.clone()];
            row.extend((0..labels.len()).map(|g| complex(f.get(a, b, g))));
            rows.push(row);
        }
        out += &table(&rows);
        out.push('\n');
    }
    writeln!(out, "fusion rules")?;
    let mut rows = vec![std::iter::once("×".to_string())
        .chain(labels.iter().cloned())
        .collect::<Vec<_>>()];
    for (a, la) in labels.iter().enumerate() {
        let mut row = vec![la.clone()];
        for b in 0..labels.len() {
            let terms: Vec<&str> = (0..labels.len())
                .filter(|&g| ring.n_tensor[a][b][g] == 1)
                .map(|g| labels[g].as_str())
                .collect();
            row.push(if terms.is_empty() {
                "0".into()
            } else {
                terms.join("+")
            });
        }
        rows.push(row);
    }
    out += &table(&rows);
    writeln!(
        out,
        "\nassociative (support) {}, associative (integer) {}, commutative {}, associative (f) {}",
        ring.is_associative,
        ring.is_associative_integer,
        ring.is_commutative,
        ring.complex_associative
    )?;
    Ok(out)
}

fn ope(model: &Model, alpha: &str, beta: &str, as_json: bool) -> Result<String> {
    let a = model.label_index(alpha)?;
    let b = model.label_index(beta)?;
    let terms: Vec<OpeTerm> = correlator::ope_terms(a, b, model)?;
    if as_json {
        return to_json(&terms);
    }
    let (la, lb) = (&model.labels()[a], &model.labels()[b]);
    let mut out = format!("{la} × {lb}\n");
    if terms.is_empty() {
        out += "no terms\n";
        return Ok(out);
    }
    let mut rows = vec![vec![
        "field".to_string(),
        "coefficient".into(),
        "exponent".into(),
    ]];
    let with_overlap = terms.iter().any(|t| t.overlap.is_some());
    if with_overlap {
        rows[0].push("μ-overlap".into());
    }
    for t in &terms {
        let mut row = vec![t.label.clone(), complex(t.coefficient), real(t.exponent)];
        if let Some(o) = t.overlap {
            row.push(complex(o));
        }
        rows.push(row);
    }
    out += &table(&rows);
    Ok(out)
}

// ---------------------------------------------------------------------------

fn request(model: &Model, args: &RequestArgs) -> Result<CorrelatorRequest> {
    let mut doc = match &args.request {
        Some(path) => {
            let mut text = String::new();
            if path.as_os_str() == "-" {
                std::io::stdin().read_to_string(&mut text)?;
            } else {
                text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
            }
            serde_json::from_str::<RequestDoc>(&text)
                .map_err(|e| usage(format!("invalid request: {e}")))?
        }
        None => {
            if args.at.is_empty() {
                return Err(usage("give --request or at least one --at with --fields"));
            }
            if args.at.len() != args.fields.len() {
                return Err(usage(format!(
                    "{} positions but {} fields",
                    args.at.len(),
                    args.fields.len()
                )));
            }
            let insertions = args
                .at
                .iter()
                .zip(&args.fields)
                .map(|(at, field)| InsertionDoc {
                    at: at.clone(),
                    field: field.clone(),
                })
                .collect();
            RequestDoc {
                insertions,
                transform: None,
            }
        }
    };
    if let Some(t) = &args.transform {
        doc.transform = Some(serde_json::Value::String(t.clone()));
    }
    Ok(doc.resolve(model)?)
}

fn evaluate(model: &Model, args: &RequestArgs, as_json: bool) -> Result<String> {
    let req = request(model, args)?;
    let e = correlator::n_point(&req, model)?;
    if as_json {
        return to_json(&json!({"value": pair(e.value), "partition": e.partition.to_string()}));
    }
    Ok(format!(
        "value      {}\npartition  {}\n",
        complex(e.value),
        e.partition
    ))
}

fn oracle_diff(model: &Model, args: &RequestArgs, as_json: bool) -> Result<String> {
    let req = request(model, args)?;
    let engine = correlator::n_point(&req, model)?;
    let oracle = correlator::oracle_n_point(&req, model)?;
    let covariance = match &req.state {
        CorrelatorState::Vacuum => None,
        CorrelatorState::Transformed(f) => {
            Some(thompson::transformed_correlator(f, &req.insertions, model)?)
        }
    };
    let diff = (engine.value - oracle).norm();
    if as_json {
        return to_json(&json!({
            "engine": pair(engine.value),
            "oracle": pair(oracle),
            "covariance": covariance.map(pair),
            "discrepancy": diff,
            "partition": engine.partition.to_string(),
        }));
    }
    let mut out = format!(
        "engine       {}\noracle       {}\n",
        complex(engine.value),
        complex(oracle)
    );
    if let Some(c) = covariance {
        writeln!(out, "covariance   {}", complex(c))?;
    }
    writeln!(
        out,
        "discrepancy  {diff:.3e}\npartition    {}",
        engine.partition
    )?;
    Ok(out)
}

fn staircase(model: &Model, args: &StaircaseArgs) -> Result<String> {
    let x: CirclePoint = args.x.parse().map_err(|e| usage(format!("--x: {e}")))?;
    let a = model.label_index(&args.fields[0])?;
    let b = model.label_index(&args.fields[1])?;
    let rows: Vec<StaircaseRow> =
        correlator::staircase_samples(&x, a, b, args.depth, args.grid, model)?;
    write_or_return(args.output.as_ref(), correlator::staircase_csv(&rows))
}

// ---------------------------------------------------------------------------

fn element(s: &str) -> Result<ThompsonElement> {
    ThompsonElement::parse(s).map_err(|e| anyhow!("{s:?}: {e}"))
}

fn describe(f: &ThompsonElement, as_json: bool) -> Result<String> {
    let pw = f.to_piecewise();
    if as_json {
        return to_json(&json!({"element": f, "in_f": f.in_f(), "piecewise": pw}));
    }
    let mut out = format!("element  {f}\nin F     {}\n", f.in_f());
    let mut rows = vec![vec!["from".to_string(), "slope".into()]];
    rows.extend(
        pw.breakpoints
            .iter()
            .zip(&pw.slopes)
            .map(|(x, c)| vec![x.to_string(), format!("2^{c}")]),
    );
    out += &table(&rows);
    writeln!(out, "f(0) = {}", pw.shift)?;
    Ok(out)
}

fn thompson_cmd(cmd: &ThompsonCommand, as_json: bool) -> Result<String> {
    match cmd {
        ThompsonCommand::Compose { elements } => {
            let mut acc = ThompsonElement::identity();
            for e in elements {
                acc = thompson::compose(&acc, &element(e)?);
            }
            describe(&acc, as_json)
        }
        ThompsonCommand::Reduce { element: e } => describe(&element(e)?.reduce(), as_json),
        ThompsonCommand::Schwarzian { element: e } => {
            let m = element(e)?.schwarzian_measure();
            if as_json {
                let v: Vec<_> = m
                    .iter()
                    .map(|(x, w)| json!({"at": x, "weight": w}))
                    .collect();
                return to_json(&v);
            }
            let mut rows = vec![vec!["at".to_string(), "weight".into()]];
            rows.extend(m.iter().map(|(x, w)| vec![x.to_string(), w.to_string()]));
            Ok(table(&rows))
        }
        ThompsonCommand::Apply { element: e, points } => {
            let f = element(e)?;
            let mut images = Vec::new();
            for p in points {
                let x: CirclePoint = p.parse().map_err(|err| usage(format!("{p:?}: {err}")))?;
                images.push((x.clone(), f.apply(&x)));
            }
            if as_json {
                let v: Vec<_> = images
                    .iter()
                    .map(|(x, y)| json!({"x": x, "image": y}))
                    .collect();
                return to_json(&v);
            }
            let mut rows = vec![vec!["x".to_string(), "f(x)".into()]];
            rows.extend(
                images
                    .iter()
                    .map(|(x, y)| vec![x.to_string(), y.to_string()]),
            );
            Ok(table(&rows))
        }
    }
}

// ---------------------------------------------------------------------------

fn isometry(model: &Model) -> Result<&Isometry3Box> {
    Ok(model.require_isometry()?)
}

fn check(model: &Model, cmd: &CheckCommand, as_json: bool) -> Result<String> {
    let v = isometry(model)?;
    match cmd {
        CheckCommand::Perfect => {
            let r = models::check_perfect(v);
            if as_json {
                return to_json(&r);
            }
            let mut rows = vec![vec![
                "leg".to_string(),
                "isometric".into(),
                "constant".into(),
                "deviation".into(),
            ]];
            rows.extend(r.pairings.iter().map(|p| {
                vec![
                    p.leg.to_string(),
                    p.passes.to_string(),
                    real(p.constant),
                    format!("{:.3e}", p.deviation),
                ]
            }));
            Ok(table(&rows) + &format!("perfect  {}\n", r.perfect))
        }
        CheckCommand::Swap | CheckCommand::Rotation => {
            let (name, r) = match cmd {
                CheckCommand::Swap => ("swap", models::check_swap(v)),
                _ => ("rotation", models::check_rotation(v)),
            };
            if as_json {
                return to_json(&r);
            }
            Ok(format!(
                "{name}  {}\ndeviation  {:.3e}\n",
                r.holds, r.deviation
            ))
        }
        CheckCommand::Modular { elements, level } => {
            let names: Vec<String> = if elements.is_empty() {
                vec!["S".into(), "C".into()]
            } else {
                elements.clone()
            };
            let mut reports = Vec::new();
            for n in &names {
                let f = element(n)?;
                reports.push((n.clone(), thompson::vacuum_invariance_check(&f, v, *level)?));
            }
            if as_json {
                let v: Vec<_> = reports
                    .iter()
                    .map(|(n, r)| json!({"element": n, "report": r}))
                    .collect();
                return to_json(&v);
            }
            let mut rows = vec![vec![
                "element".to_string(),
                "invariant".into(),
                "max deviation".into(),
                "insertions".into(),
            ]];
            rows.extend(reports.iter().map(|(n, r)| {
                vec![
                    n.clone(),
                    r.invariant.to_string(),
                    format!("{:.3e}", r.max_deviation),
                    r.insertions_checked.to_string(),
                ]
            }));
            let rot = reports
                .first()
                .map(|r| r.1.rotation_invariant)
                .unwrap_or(false);
            Ok(table(&rows) + &format!("level {level}, rotation invariant {rot}\n"))
        }
    }
}
