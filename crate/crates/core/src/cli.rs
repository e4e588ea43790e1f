//! Batch front end. Every JSON document carries `"schema"`, the command name,
//! the resolved configuration and a `"status"`; exit codes are 0 on
//! success, 2 when a computation finished but failed its checks, 1 on usage
//! errors (bad flags, unreadable or malformed input).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::boundary::{self, BoundaryGrid, FitCandidate, FitVerdict};
use crate::cx::{self, C64};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::extremal_map::ExtremalMapParams;
use crate::functionals::{self, BoundaryFunctional, DiscMap, FnDisc, PolynomialDisc, ProblemSpec};
use crate::polyfactor::{self, SelfInversivePoly};
use crate::solver::{self, BruteForceConfig, GeodesicProblem, SolveConfig};
use crate::SCHEMA;

#[derive(Debug, Parser)]
#[command(name = "ellipso-geo", version, about = "Extremal discs in complex ellipsoids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Input file (JSON, or CSV boundary grids for `fit`); repeatable.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// `r` flags over all coordinates, e.g. `1,0,1`.
    #[arg(long, global = true)]
    pub r_pattern: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evaluate a map at points and trace its boundary.
    Eval,
    /// Check the constraint identity and the boundary condition.
    Validate,
    /// Solve a two-point or point-direction problem.
    Solve {
        #[arg(long, conflicts_with = "point_direction")]
        two_point: bool,
        #[arg(long)]
        point_direction: bool,
    },
    /// Factor a self-inversive polynomial.
    Factor,
    /// Fit boundary data to the extremal family.
    Fit,
    /// Evaluate boundary functionals or build problem functionals.
    Functional,
    /// Closed-form or brute-force reference values.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
    },
    /// Boundary curve and defining-function profile as CSV.
    PlotData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Mobius,
    Ball,
    BruteForce,
}

enum Failure {
    Usage(String),
    /// Computed, but a check failed; the document is the report.
    Check(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_check_failure(&e) {
            Failure::Check(json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } }))
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn is_check_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotSelfInversive(_)
            | Error::NegativeOnCircle(_)
            | Error::OddUnimodularMultiplicity { .. }
            | Error::ScaleNotReal(_)
            | Error::RootFinding(_)
            | Error::OutOfBand(_)
            | Error::FitDiverged(_)
            | Error::NoConvergence(_)
            | Error::Infeasible(_)
            | Error::AllSamplesNonFinite
            | Error::OffBoundary(_)
    )
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NotSelfInversive(_) => "not_self_inversive",
        Error::NegativeOnCircle(_) => "negative_on_circle",
        Error::OddUnimodularMultiplicity { .. } => "odd_unimodular_multiplicity",
        Error::ScaleNotReal(_) => "scale_not_real",
        Error::RootFinding(_) => "root_finding",
        Error::OutOfBand(_) => "out_of_band",
        Error::FitDiverged(_) => "fit_diverged",
        Error::NoConvergence(_) => "no_convergence",
        Error::Infeasible(_) => "infeasible",
        Error::AllSamplesNonFinite => "all_samples_non_finite",
        Error::OffBoundary(_) => "off_boundary",
        _ => "error",
    }
}

enum Artifact {
    Json(Map<String, Value>),
    Csv(Vec<u8>),
}

type Outcome = std::result::Result<Artifact, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> i32 {
    let name = command_name(&cli.command);
    let config = match resolve_config(&cli.command, &cli.flags) {
        Ok(c) => c,
        Err(msg) => return usage(&msg),
    };
    let outcome = dispatch(&cli.command, &cli.flags, &config);
    let (code, artifact) = match outcome {
        Ok(a) => (0, a),
        Err(Failure::Usage(msg)) => return usage(&msg),
        Err(Failure::Check(report)) => {
            let mut body = Map::new();
            if let Value::Object(m) = report {
                body = m;
            }
            (2, Artifact::Json(with_header(name, &config, "failed", body)))
        }
    };
    let bytes = match artifact {
        Artifact::Json(body) => {
            let body = if code == 0 { with_header(name, &config, "ok", body) } else { body };
            let mut s = serde_json::to_string_pretty(&Value::Object(body)).expect("JSON values serialize");
            s.push('\n');
            s.into_bytes()
        }
        Artifact::Csv(b) => b,
    };
    if let Err(e) = emit(cli.flags.output.as_deref(), &bytes) {
        return usage(&format!("cannot write output: {e}"));
    }
    code
}

fn usage(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    1
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eval => "eval",
        Command::Validate => "validate",
        Command::Solve { .. } => "solve",
        Command::Factor => "factor",
        Command::Fit => "fit",
        Command::Functional => "functional",
        Command::Oracle { .. } => "oracle",
        Command::PlotData => "plot-data",
    }
}

fn with_header(name: &str, config: &Map<String, Value>, status: &str, body: Map<String, Value>) -> Map<String, Value> {
    let mut out = Map::new();
    out.insert("schema".into(), SCHEMA.into());
    out.insert("command".into(), name.into());
    out.insert("status".into(), status.into());
    out.insert("config".into(), Value::Object(config.clone()));
    for (k, v) in body {
        out.insert(k, v);
    }
    out
}

/// Writes next to the target then renames, so readers never see a partial file.
fn emit(path: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return out.flush();
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

const DEFAULT_TOL: f64 = 1e-10;

/// Flags each command accepts; anything else is a usage error.
fn allowed(c: &Command) -> &'static [&'static str] {
    match c {
        Command::Eval => &["grid"],
        Command::Validate => &["tol", "grid"],
        Command::Solve { .. } => &["tol", "grid", "starts", "seed", "r-pattern"],
        Command::Factor => &["tol"],
        Command::Fit => &["tol", "grid", "seed", "m"],
        Command::Functional => &["grid"],
        Command::Oracle { .. } => &["grid", "seed", "degree"],
        Command::PlotData => &["grid"],
    }
}

fn resolve_config(c: &Command, f: &Flags) -> std::result::Result<Map<String, Value>, String> {
    let given = [
        ("tol", f.tol.is_some()),
        ("grid", f.grid.is_some()),
        ("starts", f.starts.is_some()),
        ("seed", f.seed.is_some()),
        ("degree", f.degree.is_some()),
        ("m", f.m.is_some()),
        ("r-pattern", f.r_pattern.is_some()),
    ];
    let ok = allowed(c);
    for (name, set) in given {
        if set && !ok.contains(&name) {
            return Err(format!("--{name} does not apply to `{}`", command_name(c)));
        }
    }
    if f.input.is_empty() {
        return Err("at least one --input is required".into());
    }
    if let Some(t) = f.tol {
        if !(t > 0.0) {
            return Err(format!("--tol must be positive, got {t}"));
        }
    }
    let mut cfg = Map::new();
    let inputs: Vec<Value> = f.input.iter().map(|p| p.display().to_string().into()).collect();
    cfg.insert("input".into(), inputs.into());
    let solve = SolveConfig::default();
    let bf = BruteForceConfig::default();
    for &name in ok {
        let v: Value = match name {
            "tol" => f.tol.unwrap_or(match c {
                Command::Solve { .. } => solve.tol,
                Command::Fit => 1e-6,
                _ => DEFAULT_TOL,
            })
            .into(),
            "grid" => f
                .grid
                .unwrap_or(match c {
                    Command::Solve { .. } => solve.grid,
                    Command::Functional => 256,
                    Command::Oracle { .. } => bf.grid,
                    _ => 512,
                })
                .into(),
            "starts" => f.starts.unwrap_or(solve.starts).into(),
            "seed" => f.seed.unwrap_or(0).into(),
            "degree" => f.degree.unwrap_or(bf.degree).into(),
            "m" => f.m.unwrap_or(1).into(),
            "r-pattern" => match &f.r_pattern {
                Some(s) => parse_r_pattern(s)?.into(),
                None => Value::Null,
            },
            _ => unreachable!("flag table"),
        };
        cfg.insert(name.replace('-', "_"), v);
    }
    match c {
        Command::Solve { two_point, point_direction } => {
            let kind = if *two_point {
                "two_point".into()
            } else if *point_direction {
                "point_direction".into()
            } else {
                Value::Null
            };
            cfg.insert("kind".into(), kind);
        }
        Command::Oracle { kind } => {
            cfg.insert("kind".into(), serde_json::to_value(kind).expect("enum serializes"));
        }
        _ => {}
    }
    Ok(cfg)
}

fn parse_r_pattern(s: &str) -> std::result::Result<Vec<u8>, String> {
    s.chars()
        .filter(|ch| !matches!(ch, ',' | ' '))
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(format!("--r-pattern takes 0/1 flags, got {s:?}")),
        })
        .collect()
}

fn cfg_f64(cfg: &Map<String, Value>, k: &str) -> f64 {
    cfg[k].as_f64().expect("resolved config")
}

fn cfg_usize(cfg: &Map<String, Value>, k: &str) -> usize {
    cfg[k].as_u64().expect("resolved config") as usize
}

fn dispatch(c: &Command, f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    match c {
        Command::Eval => cmd_eval(f, cfg),
        Command::Validate => cmd_validate(f, cfg),
        Command::Solve { .. } => cmd_solve(f, cfg),
        Command::Factor => cmd_factor(f, cfg),
        Command::Fit => cmd_fit(f, cfg),
        Command::Functional => cmd_functional(f, cfg),
        Command::Oracle { kind } => cmd_oracle(*kind, f, cfg),
        Command::PlotData => cmd_plot_data(f, cfg),
    }
}

fn read_json(path: &Path) -> std::result::Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: malformed JSON: {e}", path.display())))?;
    if let Some(s) = v.get("schema") {
        if s != SCHEMA {
            return Err(Failure::Usage(format!("{}: unsupported schema {s}", path.display())));
        }
    }
    Ok(v)
}

fn single_json(f: &Flags) -> std::result::Result<Value, Failure> {
    if f.input.len() != 1 {
        return Err(Failure::Usage("expected exactly one --input".into()));
    }
    read_json(&f.input[0])
}

fn field<T: DeserializeOwned>(doc: &Value, key: &str) -> std::result::Result<T, Failure> {
    let v = doc.get(key).ok_or_else(|| Failure::Usage(format!("missing field `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| Failure::Usage(format!("field `{key}`: {e}")))
}

fn opt_field<T: DeserializeOwned>(doc: &Value, key: &str) -> std::result::Result<Option<T>, Failure> {
    match doc.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => field(doc, key).map(Some),
    }
}

fn points(doc: &Value, key: &str) -> std::result::Result<Option<Vec<C64>>, Failure> {
    Ok(opt_field::<Vec<[f64; 2]>>(doc, key)?.map(|v| v.into_iter().map(cx::pair::from_pair).collect()))
}

fn req_points(doc: &Value, key: &str) -> std::result::Result<Vec<C64>, Failure> {
    points(doc, key)?.ok_or_else(|| Failure::Usage(format!("missing field `{key}`")))
}

fn pairs(v: &[C64]) -> Value {
    v.iter().map(|&z| json!(cx::pair::to_pair(z))).collect()
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("object literal"),
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("library types serialize")
}

/// The ellipsoid the params live on: restricted to `active` when the
/// document came from `solve`.
struct MapDoc {
    ellipsoid: Ellipsoid,
    reduced: Ellipsoid,
    active: Option<Vec<usize>>,
    params: ExtremalMapParams,
}

impl MapDoc {
    fn read(doc: &Value) -> std::result::Result<Self, Failure> {
        let ellipsoid: Ellipsoid = field(doc, "ellipsoid")?;
        let params: ExtremalMapParams = field(doc, "params")?;
        let active: Option<Vec<usize>> = opt_field(doc, "active")?;
        let reduced = match &active {
            Some(a) => ellipsoid.restrict(a)?,
            None => ellipsoid.clone(),
        };
        if params.n() != reduced.dim() {
            return Err(Error::Dimension {
                expected: reduced.dim(),
                got: params.n(),
            }
            .into());
        }
        Ok(Self {
            ellipsoid,
            reduced,
            active,
            params,
        })
    }

    fn lift(&self, v: Vec<C64>) -> Vec<C64> {
        match &self.active {
            None => v,
            Some(a) => {
                let mut out = vec![cx::ZERO; self.ellipsoid.dim()];
                for (&j, x) in a.iter().zip(v) {
                    out[j] = x;
                }
                out
            }
        }
    }

    fn eval(&self, lambda: C64) -> Result<Vec<C64>> {
        Ok(self.lift(self.params.evaluate(&self.reduced, lambda)?))
    }

    fn echo(&self, out: &mut Map<String, Value>) {
        out.insert("ellipsoid".into(), to_value(&self.ellipsoid));
        if let Some(a) = &self.active {
            out.insert("active".into(), to_value(a));
        }
        out.insert("params".into(), to_value(&self.params));
    }
}

fn cmd_eval(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let map = MapDoc::read(&doc)?;
    let grid = cfg_usize(cfg, "grid");
    let pts = points(&doc, "points")?.unwrap_or_default();
    let mut values = Vec::with_capacity(pts.len());
    for &p in &pts {
        if !(p.norm() <= 1.0) {
            return Err(Error::OutsideDisc(p.to_string()).into());
        }
        values.push(pairs(&map.eval(p)?));
    }
    let trace = map.params.boundary_trace(&map.reduced, grid)?;
    let rows: Vec<Value> = (0..grid)
        .map(|k| {
            if trace.finite[k] {
                pairs(&map.lift(trace.point(k)))
            } else {
                Value::Null
            }
        })
        .collect();
    let mut out = Map::new();
    map.echo(&mut out);
    out.insert("points".into(), pairs(&pts));
    out.insert("values".into(), values.into());
    out.insert("boundary_trace".into(), rows.into());
    Ok(Artifact::Json(out))
}

fn check(name: &str, value: f64, tol: f64) -> Value {
    json!({ "name": name, "value": value, "tol": tol, "pass": value <= tol })
}

fn cmd_validate(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let map = MapDoc::read(&doc)?;
    let tol = cfg_f64(cfg, "tol");
    let grid = cfg_usize(cfg, "grid");
    let mut checks = Vec::new();
    let shape = map.params.validate();
    checks.push(json!({
        "name": "parameters",
        "pass": shape.is_ok(),
        "message": shape.as_ref().err().map(|e| e.to_string()),
    }));
    let constraint = map.params.constraint_residual(&map.reduced)?;
    checks.push(check("constraint", constraint, tol));
    let defect = map.params.boundary_defect(&map.reduced, grid)?;
    checks.push(check("boundary", defect.max, tol));
    let pass = checks.iter().all(|c| c["pass"] == true);
    let mut out = Map::new();
    map.echo(&mut out);
    out.insert(
        "residuals".into(),
        json!({ "constraint": constraint, "boundary": defect.max, "boundary_excluded": defect.excluded }),
    );
    out.insert("checks".into(), checks.into());
    if pass {
        Ok(Artifact::Json(out))
    } else {
        Err(Failure::Check(Value::Object(out)))
    }
}

/// Reads `{"ellipsoid", "z", "w"}`, `{"ellipsoid", "z", "x"}` or
/// `{"ellipsoid", "problem": {"kind", …}}`.
fn read_problem(doc: &Value, kind: Option<&str>) -> std::result::Result<(Ellipsoid, GeodesicProblem), Failure> {
    let e: Ellipsoid = field(doc, "ellipsoid")?;
    let problem = if let Some(p) = opt_field::<GeodesicProblem>(doc, "problem")? {
        p
    } else {
        let z = req_points(doc, "z")?;
        let w = points(doc, "w")?;
        let x = points(doc, "x")?;
        match (kind, w, x) {
            (Some("two_point") | None, Some(w), None) => GeodesicProblem::TwoPoint { z, w },
            (Some("point_direction") | None, None, Some(x)) => GeodesicProblem::PointDirection { z, x },
            (Some("two_point"), None, _) => return Err(Failure::Usage("two-point problems need `w`".into())),
            (Some("point_direction"), _, None) => {
                return Err(Failure::Usage("point-direction problems need `x`".into()))
            }
            _ => return Err(Failure::Usage("give exactly one of `w` and `x`".into())),
        }
    };
    let matches = match kind {
        Some("two_point") => problem.is_two_point(),
        Some("point_direction") => !problem.is_two_point(),
        _ => true,
    };
    if !matches {
        return Err(Failure::Usage("problem kind disagrees with the flag".into()));
    }
    problem.check(&e)?;
    Ok((e, problem))
}

fn cmd_solve(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let (e, problem) = read_problem(&doc, cfg["kind"].as_str())?;
    let sc = SolveConfig {
        tol: cfg_f64(cfg, "tol"),
        starts: cfg_usize(cfg, "starts"),
        seed: cfg["seed"].as_u64().expect("resolved config"),
        grid: cfg_usize(cfg, "grid"),
        r_pattern: opt_field(&Value::Object(cfg.clone()), "r_pattern")?,
    };
    let res = solver::solve(&e, &problem, &sc)?;
    let mut out = Map::new();
    out.insert("ellipsoid".into(), to_value(&e));
    if problem.is_two_point() {
        out.insert("sigma".into(), res.scalar.into());
    } else {
        out.insert("t".into(), res.scalar.into());
    }
    for (k, v) in obj(to_value(&res)) {
        out.insert(k, v);
    }
    Ok(Artifact::Json(out))
}

fn cmd_factor(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let coeffs = req_points(&doc, "coeffs")?;
    let p = SelfInversivePoly::new(coeffs)?;
    let form = polyfactor::factor(&p, cfg_f64(cfg, "tol"))?;
    let mut out = Map::new();
    out.insert("coeffs".into(), pairs(p.coeffs()));
    out.insert("r".into(), form.scale.into());
    out.insert("alpha".into(), pairs(&form.zeros));
    out.insert("symmetry_residual".into(), p.symmetry_residual().into());
    Ok(Artifact::Json(out))
}

/// Either a JSON with `ellipsoid` and per-component `zeros` plus a CSV of
/// boundary grids, or a single map document whose boundary is sampled.
fn cmd_fit(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let (csvs, jsons): (Vec<&PathBuf>, Vec<&PathBuf>) =
        f.input.iter().partition(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")));
    if jsons.len() != 1 || csvs.len() > 1 {
        return Err(Failure::Usage("fit takes one JSON input and at most one CSV input".into()));
    }
    let doc = read_json(jsons[0])?;
    let grid = cfg_usize(cfg, "grid");
    let (e, candidate) = if let Some(path) = csvs.first() {
        let e: Ellipsoid = field(&doc, "ellipsoid")?;
        let zeros: Vec<Vec<[f64; 2]>> = field(&doc, "zeros")?;
        let file = fs::File::open(path).map_err(|err| Failure::Usage(format!("{}: {err}", path.display())))?;
        let components = boundary::read_grids_csv(file)?;
        let zeros = zeros
            .into_iter()
            .map(|z| z.into_iter().map(cx::pair::from_pair).collect())
            .collect();
        (e, FitCandidate { components, zeros })
    } else {
        let map = MapDoc::read(&doc)?;
        let trace = map.params.boundary_trace(&map.reduced, grid)?;
        let components = trace
            .values
            .into_iter()
            .map(BoundaryGrid::new)
            .collect::<Result<Vec<_>>>()?;
        (
            map.reduced.clone(),
            FitCandidate {
                components,
                zeros: map.params.component_zeros(),
            },
        )
    };
    let report = boundary::membership_fit(
        &candidate,
        &e,
        cfg_usize(cfg, "m"),
        cfg_f64(cfg, "tol"),
        cfg["seed"].as_u64().expect("resolved config"),
    )?;
    let mut out = Map::new();
    out.insert("ellipsoid".into(), to_value(&e));
    out.insert("report".into(), to_value(&report));
    if report.verdict == FitVerdict::InFamily {
        Ok(Artifact::Json(out))
    } else {
        Err(Failure::Check(Value::Object(out)))
    }
}

/// `{"build": "kappa", "z", "x"}`, `{"build": "ktilde", "z", "w", "sigma"}`,
/// or a functional / problem applied to a `disc` (polynomial coefficients)
/// or to an extremal map (`ellipsoid` + `params`).
fn cmd_functional(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let quad = cfg_usize(cfg, "grid");
    let mut out = Map::new();
    if let Some(kind) = opt_field::<String>(&doc, "build")? {
        let z = req_points(&doc, "z")?;
        let spec = match kind.as_str() {
            "kappa" => functionals::build_kappa_problem(&z, &req_points(&doc, "x")?)?,
            "ktilde" => functionals::build_ktilde_problem(&z, &req_points(&doc, "w")?, field(&doc, "sigma")?)?,
            other => return Err(Failure::Usage(format!("unknown builder {other:?}; use kappa or ktilde"))),
        };
        out.insert("problem".into(), to_value(&spec));
        out.insert("type_pm".into(), spec.is_type_pm().into());
        return Ok(Artifact::Json(out));
    }

    let poly: Option<PolynomialDisc> = opt_field(&doc, "disc")?;
    let map = if poly.is_none() { Some(MapDoc::read(&doc)?) } else { None };
    let fn_disc;
    let h: &dyn DiscMap = match (&poly, &map) {
        (Some(p), _) => p,
        (None, Some(m)) => {
            fn_disc = FnDisc {
                n: m.ellipsoid.dim(),
                f: |l: C64| m.eval(l).unwrap_or_else(|_| vec![C64::new(f64::NAN, f64::NAN); m.ellipsoid.dim()]),
            };
            &fn_disc
        }
        (None, None) => unreachable!("one branch is set"),
    };
    if let Some(phi) = opt_field::<BoundaryFunctional>(&doc, "functional")? {
        let phi = BoundaryFunctional::new(phi.nu, phi.kernels)?;
        out.insert("value".into(), functionals::eval_functional(&phi, h, quad)?.into());
    } else {
        let spec: ProblemSpec = field(&doc, "problem")?;
        for phi in &spec.functionals {
            BoundaryFunctional::new(phi.nu, phi.kernels.clone())?;
        }
        if spec.targets.len() != spec.len() {
            return Err(Error::Dimension {
                expected: spec.len(),
                got: spec.targets.len(),
            }
            .into());
        }
        out.insert("values".into(), spec.evaluate(h, quad)?.into());
        out.insert("residual".into(), spec.residual(h, quad)?.into());
    }
    Ok(Artifact::Json(out))
}

fn cmd_oracle(kind: OracleKind, f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let (e, problem) = read_problem(&doc, None)?;
    let mut out = Map::new();
    out.insert("ellipsoid".into(), to_value(&e));
    out.insert("problem".into(), to_value(&problem));
    match kind {
        OracleKind::Mobius => {
            if e.dim() != 1 {
                return Err(Failure::Usage("the Möbius oracle needs n = 1".into()));
            }
            let (z, s) = (problem.z()[0], problem.second()[0]);
            let sol = if problem.is_two_point() {
                solver::mobius_two_point(z, s)?
            } else {
                solver::mobius_point_direction(z, s)?
            };
            out.insert("scalar".into(), sol.scalar.into());
            out.insert("params".into(), to_value(&sol.params));
        }
        OracleKind::Ball => {
            let s = if problem.is_two_point() {
                solver::ball_two_point(e.exponents(), problem.z(), problem.second())?
            } else {
                solver::ball_point_direction(e.exponents(), problem.z(), problem.second())?
            };
            out.insert("scalar".into(), s.into());
        }
        OracleKind::BruteForce => {
            let bc = BruteForceConfig {
                degree: cfg_usize(cfg, "degree"),
                grid: cfg_usize(cfg, "grid"),
                seed: cfg["seed"].as_u64().expect("resolved config"),
                ..Default::default()
            };
            let res = solver::brute_force_disc(&e, &problem, &bc)?;
            let bound = if problem.is_two_point() { "upper" } else { "lower" };
            out.insert("scalar".into(), res.scalar.into());
            out.insert("bound".into(), bound.into());
            out.insert("witness".into(), to_value(&res.witness));
            out.insert("max_u".into(), res.max_u.into());
        }
    }
    Ok(Artifact::Json(out))
}

fn cmd_plot_data(f: &Flags, cfg: &Map<String, Value>) -> Outcome {
    let doc = single_json(f)?;
    let map = MapDoc::read(&doc)?;
    let grid = cfg_usize(cfg, "grid");
    let trace = map.params.boundary_trace(&map.reduced, grid)?;
    let n = map.ellipsoid.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["angle_index".to_string(), "theta".to_string()];
    for j in 1..=n {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    header.push("u".into());
    let csv_err = |e: csv::Error| Failure::Usage(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..grid {
        let theta = std::f64::consts::TAU * k as f64 / grid as f64;
        let mut row = vec![k.to_string(), format!("{theta:e}")];
        if trace.finite[k] {
            let z = map.lift(trace.point(k));
            for v in &z {
                row.push(format!("{:e}", v.re));
                row.push(format!("{:e}", v.im));
            }
            row.push(format!("{:e}", map.ellipsoid.defining_value(&z)?));
        } else {
            row.extend(std::iter::repeat_n("nan".to_string(), 2 * n + 1));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Artifact::Csv(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_pattern_forms() {
        assert_eq!(parse_r_pattern("1,0,1").unwrap(), vec![1, 0, 1]);
        assert_eq!(parse_r_pattern("011").unwrap(), vec![0, 1, 1]);
        assert!(parse_r_pattern("1,2").is_err());
    }

    #[test]
    fn check_failures_are_classified() {
        assert!(is_check_failure(&Error::NoConvergence("x".into())));
        assert!(!is_check_failure(&Error::Parse("x".into())));
    }

    #[test]
    fn flags_outside_the_command_are_rejected() {
        let f = Flags {
            input: vec!["a.json".into()],
            degree: Some(3),
            ..Default::default()
        };
        assert!(resolve_config(&Command::Factor, &f).is_err());
        let cfg = resolve_config(&Command::Validate, &Flags { degree: None, ..f }).unwrap();
        assert_eq!(cfg["tol"], 1e-10);
        assert_eq!(cfg["grid"], 512);
    }
}
