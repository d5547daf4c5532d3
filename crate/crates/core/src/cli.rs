//! Command-line front end: operator literals in, JSON or CSV reports out.
//!
//! Exit codes: 0 pass or success, 1 fail, 2 usage error, 3 inconclusive.

use std::ffi::OsString;
use std::io::Write;
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{CPlusFunction, EqualsOptions, GrowthCertificate, Operator};
use crate::cesaro::{estimate, estimate_alpha, verify_claim, CesaroClaim, Verdict};
use crate::localization::{support, DEFAULT_SUPPORT_TOL};
use crate::numerics::QuadConfig;
use crate::special::gamma;
use crate::transforms::{
    abelian_laplace_check, abelian_stieltjes_check, classical_stieltjes, laplace, stieltjes, stirling_config,
    stirling_demo, tauberian_check, AbelianOptions, AbelianRow, ComplexValue, RayDirection, SectorRay,
    TauberianOptions,
};

pub const SCHEMA: &str = "opcalc.report/1";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Envelope of every report written to standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
    pub result: Value,
}

#[derive(Parser, Debug)]
#[command(name = "opcalc", version, about = "Operator calculus on f/H^k quotients")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Absolute quadrature tolerance.
    #[arg(long, global = true, env = "OPCALC_ABS_TOL")]
    abs_tol: Option<f64>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true, env = "OPCALC_REL_TOL")]
    rel_tol: Option<f64>,
    /// Bound on the truncated tail of semi-infinite integrals.
    #[arg(long, global = true, env = "OPCALC_TAIL_TOL")]
    tail_tol: Option<f64>,
    /// JSON report (the default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// CSV rows `|z|, theta, raw, scaled, corrected, err_est` (ray reports only).
    #[arg(long, global = true)]
    csv: bool,
    /// Omit the timestamp so reports are byte-reproducible.
    #[arg(long, global = true, env = "OPCALC_NO_TIMESTAMP")]
    no_timestamp: bool,
    /// Growth certificate for the numerator: `power:p,C,T0` or `exp:sigma,C,T0`.
    #[arg(long, global = true, value_parser = parse_growth, allow_hyphen_values = true)]
    growth: Option<GrowthCertificate>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an operator literal `"<expr>"/H^k`.
    Parse { literal: String },
    /// Evaluate the numerator at a point.
    Eval {
        literal: String,
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
    },
    /// Compare two operators at a common level.
    Equal {
        a: String,
        b: String,
        #[arg(long, default_value_t = 50.0)]
        x_max: f64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Locate the support inside a window.
    Support {
        literal: String,
        #[arg(long, default_value = "-1,10", value_parser = parse_pair, allow_hyphen_values = true)]
        window: (f64, f64),
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        #[arg(long, default_value_t = DEFAULT_SUPPORT_TOL)]
        tol: f64,
    },
    /// Cesàro asymptotics.
    Cesaro {
        #[command(subcommand)]
        action: CesaroCmd,
    },
    /// Operator Stieltjes transform `Λ_r W(z)`.
    Stieltjes {
        literal: String,
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Operator Laplace transform `L W(z)`.
    Laplace {
        literal: String,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Abelian, Tauberian and Stirling verification runs.
    Verify {
        #[command(subcommand)]
        check: VerifyCmd,
    },
    /// Short tour of the library with built-in oracles.
    Demo,
}

#[derive(Subcommand, Debug)]
enum CesaroCmd {
    /// Check a claim `(alpha, gamma, p)` at the literal's level.
    Verify {
        literal: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        /// Polynomial part, constant term first.
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
        #[arg(long, default_value = "10,1e4", value_parser = parse_pair)]
        window: (f64, f64),
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Fit `gamma` and `p` for a given `alpha`.
    Estimate {
        literal: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value = "10,1e4", value_parser = parse_pair)]
        window: (f64, f64),
    },
    /// Estimate the exponent itself.
    Alpha {
        literal: String,
        #[arg(long, default_value = "10,1e4", value_parser = parse_pair)]
        window: (f64, f64),
    },
}

#[derive(Args, Debug)]
struct OperatorArgs {
    /// Operator literal `"<expr>"/H^k`.
    #[arg(long, conflicts_with = "f")]
    op: Option<String>,
    /// Numerator expression, used with `--k`.
    #[arg(long)]
    f: Option<String>,
    #[arg(long, default_value_t = 1)]
    k: u32,
}

#[derive(Args, Debug)]
struct ClaimArgs {
    /// Exponent; the suffix `-normalized` is shorthand for `--normalize`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: String,
    /// Cesàro constant; estimated from the numerator when omitted.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    /// Also report `limit / gamma`.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "10,1e4", value_parser = parse_pair)]
    claim_window: (f64, f64),
    #[arg(long, default_value_t = 1e-2)]
    claim_tol: f64,
    /// Skip the numerator-side check of the claim.
    #[arg(long)]
    no_claim_check: bool,
}

#[derive(Args, Debug)]
struct RayArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// `r0,ratio,N` with `N` points.
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<(f64, f64, usize)>,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    AbelianStieltjes {
        #[command(flatten)]
        op: OperatorArgs,
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        #[command(flatten)]
        ray: RayArgs,
    },
    AbelianLaplace {
        #[command(flatten)]
        op: OperatorArgs,
        #[command(flatten)]
        claim: ClaimArgs,
        #[command(flatten)]
        ray: RayArgs,
    },
    Tauberian {
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Expected constant; reported against the recovered one.
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[command(flatten)]
        ray: RayArgs,
        #[arg(long, default_value = "10,1e4", value_parser = parse_pair)]
        cesaro_window: (f64, f64),
        #[arg(long, default_value_t = 1e-2)]
        cesaro_tol: f64,
    },
    Stirling,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_f64).collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        &[a, b] if a < b => Ok((a, b)),
        &[a, b] => Err(format!("window ({a}, {b}) is empty")),
        _ => Err(format!("expected 'a,b', got {s:?}")),
    }
}

fn parse_schedule(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected 'r0,ratio,N', got {s:?}"));
    }
    let n: usize = parts[2].trim().parse().map_err(|_| format!("N = {:?} is not a count", parts[2]))?;
    Ok((parse_f64(parts[0])?, parse_f64(parts[1])?, n))
}

/// `a`, `bi`, `a+bi` or `a-bi`, with optional exponents.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("{s:?} is not a complex number of the form a+bi");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return parse_f64(&t).map(|re| Complex64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |part: &str| -> Result<f64, String> {
        match part {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            p => parse_f64(p).map_err(|_| err()),
        }
    };
    match split {
        Some(i) => Ok(Complex64::new(parse_f64(&body[..i]).map_err(|_| err())?, imag(&body[i..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

fn parse_growth(s: &str) -> Result<GrowthCertificate, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("expected 'power:p,C,T0' or 'exp:sigma,C,T0', got {s:?}"))?;
    let v = parse_list(rest)?;
    if v.len() != 3 {
        return Err(format!("growth certificate needs three numbers, got {}", v.len()));
    }
    if !(v[1] > 0.0 && v[2] > 0.0) {
        return Err("growth constants C and T0 must be positive".into());
    }
    match kind {
        "power" => Ok(GrowthCertificate::power(v[0], v[1], v[2])),
        "exp" => Ok(GrowthCertificate::exponential(v[0], v[1], v[2])),
        other => Err(format!("unknown growth kind {other:?}")),
    }
}

enum Failure {
    Usage(String),
    Compute(String),
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn compute<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Compute(e.to_string())
}

enum Output {
    Json { command: String, verdict: String, result: Value },
    Csv { verdict: String, rows: Vec<[String; 6]> },
}

fn verdict_name(v: Verdict) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => "inconclusive".into(),
    }
}

fn exit_code(verdict: &str) -> i32 {
    match verdict {
        "pass" | "success" => EXIT_PASS,
        "inconclusive" => EXIT_INCONCLUSIVE,
        _ => EXIT_FAIL,
    }
}

fn quad_config(g: &GlobalArgs, base: QuadConfig) -> Result<QuadConfig, Failure> {
    let cfg = QuadConfig {
        abs_tol: g.abs_tol.unwrap_or(base.abs_tol),
        rel_tol: g.rel_tol.unwrap_or(base.rel_tol),
        tail_tol: g.tail_tol.unwrap_or(base.tail_tol),
        ..base
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn operator(literal: &str, g: &GlobalArgs, cfg: QuadConfig) -> Result<Operator, Failure> {
    let mut w = Operator::parse_literal(literal, cfg).map_err(usage)?;
    if let Some(cert) = g.growth {
        w.num = w.num.with_growth(cert).map_err(usage)?;
    }
    Ok(w)
}

fn operator_from(args: &OperatorArgs, g: &GlobalArgs, cfg: QuadConfig) -> Result<Operator, Failure> {
    match (&args.op, &args.f) {
        (Some(lit), None) => operator(lit, g, cfg),
        (None, Some(f)) => {
            let mut num = CPlusFunction::parse(f, cfg).map_err(usage)?;
            if let Some(cert) = g.growth {
                num = num.with_growth(cert).map_err(usage)?;
            }
            Operator::new(num, args.k).map_err(usage)
        }
        _ => Err(Failure::Usage("give exactly one of --op or --f".into())),
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn ray(args: &RayArgs, default: (f64, f64, usize), direction: RayDirection) -> Result<SectorRay, Failure> {
    let (r0, ratio, n) = args.schedule.unwrap_or(default);
    if n == 0 {
        return Err(Failure::Usage("--schedule needs at least one point".into()));
    }
    positive("tol", args.tol)?;
    SectorRay::new(args.theta, r0, ratio, n - 1, direction).map_err(usage)
}

/// Resolves `--alpha` (with its optional suffix) and the claim at `w`'s level.
fn claim_from(args: &ClaimArgs, w: &Operator) -> Result<(CesaroClaim, bool), Failure> {
    let (text, normalize) = match args.alpha.strip_suffix("-normalized") {
        Some(t) => (t, true),
        None => (args.alpha.as_str(), args.normalize),
    };
    let alpha = parse_f64(text).map_err(Failure::Usage)?;
    let claim = match args.gamma {
        Some(g) => CesaroClaim::new(alpha, g, w.k, args.p.clone().unwrap_or_default()).map_err(usage)?,
        None => estimate(w, alpha, args.claim_window).map_err(compute)?.claim,
    };
    Ok((claim, normalize))
}

fn abelian_options(claim: &ClaimArgs, ray: &RayArgs) -> AbelianOptions {
    AbelianOptions {
        tol: ray.tol,
        claim_window: if claim.no_claim_check { None } else { Some(claim.claim_window) },
        claim_tol: claim.claim_tol,
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_rows(rows: &[AbelianRow]) -> Vec<[String; 6]> {
    rows.iter()
        .map(|r| {
            [
                fmt_num(r.modulus),
                fmt_num(r.theta),
                r.raw.to_string(),
                r.scaled.to_string(),
                r.corrected.to_string(),
                fmt_num(r.err_est),
            ]
        })
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(compute)
}

fn execute(cli: &Cli) -> Result<Output, Failure> {
    let g = &cli.global;
    let csv_ok = matches!(&cli.command, Command::Verify { .. });
    if g.csv && !csv_ok {
        return Err(Failure::Usage("--csv applies to `verify` reports only".into()));
    }
    let json = |command: &str, verdict: &str, result: Value| Output::Json {
        command: command.into(),
        verdict: verdict.into(),
        result,
    };
    match &cli.command {
        Command::Parse { literal } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator(literal, g, cfg)?;
            Ok(json(
                "parse",
                "success",
                json!({
                    "operator": w.to_string(),
                    "numerator": w.num.to_string(),
                    "k": w.k,
                    "has_floor": w.num.has_floor(),
                    "power_sum": w.num.as_power_sum().map(|p| p.terms().to_vec()),
                }),
            ))
        }
        Command::Eval { literal, at } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator(literal, g, cfg)?;
            let est = w.num.eval_est(*at).map_err(compute)?;
            Ok(json("eval", "success", json!({ "x": at, "value": est.value, "err_est": est.err })))
        }
        Command::Equal { a, b, x_max, tol } => {
            positive("x-max", *x_max)?;
            positive("tol", *tol)?;
            let cfg = quad_config(g, QuadConfig::default())?;
            let (wa, wb) = (operator(a, g, cfg)?, operator(b, g, cfg)?);
            let opts = EqualsOptions { x_max: *x_max, tol: *tol, ..EqualsOptions::default() };
            let eq = wa.equals(&wb, &opts).map_err(compute)?;
            Ok(json("equal", if eq.equal { "pass" } else { "fail" }, to_value(&eq)?))
        }
        Command::Support { literal, window, resolution, tol } => {
            positive("resolution", *resolution)?;
            positive("tol", *tol)?;
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator(literal, g, cfg)?;
            let rep = support(&w, *window, *resolution, *tol).map_err(compute)?;
            let verdict = if rep.unresolved.is_empty() { "success" } else { "inconclusive" };
            Ok(json("support", verdict, to_value(&rep)?))
        }
        Command::Cesaro { action } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            match action {
                CesaroCmd::Verify { literal, alpha, gamma, p, window, tol } => {
                    positive("tol", *tol)?;
                    let w = operator(literal, g, cfg)?;
                    let claim = CesaroClaim::new(*alpha, *gamma, w.k, p.clone().unwrap_or_default()).map_err(usage)?;
                    let rep = verify_claim(&w, &claim, *window, *tol).map_err(compute)?;
                    Ok(json("cesaro verify", &verdict_name(rep.verdict), json!({ "claim": claim, "report": rep })))
                }
                CesaroCmd::Estimate { literal, alpha, window } => {
                    let w = operator(literal, g, cfg)?;
                    let est = estimate(&w, *alpha, *window).map_err(compute)?;
                    Ok(json("cesaro estimate", &verdict_name(est.verify.verdict), to_value(&est)?))
                }
                CesaroCmd::Alpha { literal, window } => {
                    let w = operator(literal, g, cfg)?;
                    let est = estimate_alpha(&w, *window).map_err(compute)?;
                    Ok(json("cesaro alpha", "success", to_value(&est)?))
                }
            }
        }
        Command::Stieltjes { literal, r, z } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator(literal, g, cfg)?;
            let t = stieltjes(&w, *r, *z, &cfg).map_err(compute)?;
            Ok(json("stieltjes", "success", json!({ "r": r, "z": ComplexValue::from(*z), "transform": t })))
        }
        Command::Laplace { literal, z } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator(literal, g, cfg)?;
            let t = laplace(&w, *z, &cfg).map_err(compute)?;
            Ok(json("laplace", "success", json!({ "z": ComplexValue::from(*z), "transform": t })))
        }
        Command::Verify { check } => verify(check, g),
        Command::Demo => demo(g),
    }
}

fn abelian_output(command: &str, rep: crate::transforms::AbelianReport, normalize: bool, csv: bool) -> Result<Output, Failure> {
    let verdict = verdict_name(rep.verdict);
    if csv {
        return Ok(Output::Csv { verdict, rows: csv_rows(&rep.rows) });
    }
    let mut result = to_value(&rep)?;
    if normalize && rep.claim.gamma != 0.0 {
        let l = Complex64::from(rep.limit) / rep.claim.gamma;
        result["normalized_limit"] = to_value(&ComplexValue::from(l))?;
    }
    Ok(Output::Json { command: command.into(), verdict, result })
}

fn verify(check: &VerifyCmd, g: &GlobalArgs) -> Result<Output, Failure> {
    match check {
        VerifyCmd::AbelianStieltjes { op, claim, r, ray: ray_args } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator_from(op, g, cfg)?;
            let ray = ray(ray_args, (10.0, 2.0, 11), RayDirection::ToInfinity)?;
            let (c, normalize) = claim_from(claim, &w)?;
            let rep = abelian_stieltjes_check(&w, &c, *r, &ray, &cfg, &abelian_options(claim, ray_args)).map_err(compute)?;
            abelian_output("verify abelian-stieltjes", rep, normalize, g.csv)
        }
        VerifyCmd::AbelianLaplace { op, claim, ray: ray_args } => {
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator_from(op, g, cfg)?;
            let ray = ray(ray_args, (0.1, 2.0, 11), RayDirection::ToZero)?;
            let (c, normalize) = claim_from(claim, &w)?;
            let rep = abelian_laplace_check(&w, &c, &ray, &cfg, &abelian_options(claim, ray_args)).map_err(compute)?;
            abelian_output("verify abelian-laplace", rep, normalize, g.csv)
        }
        VerifyCmd::Tauberian { f, k, alpha, gamma: expected, ray: ray_args, cesaro_window, cesaro_tol } => {
            positive("cesaro-tol", *cesaro_tol)?;
            let cfg = quad_config(g, QuadConfig::default())?;
            let w = operator_from(&OperatorArgs { op: None, f: Some(f.clone()), k: *k }, g, cfg)?;
            let ray = ray(ray_args, (0.1, 1.5, 8), RayDirection::ToZero)?;
            let opts = TauberianOptions { tol: ray_args.tol, cesaro_window: *cesaro_window, cesaro_tol: *cesaro_tol };
            let rep = tauberian_check(&w.num, w.k, *alpha, &ray, &cfg, &opts).map_err(compute)?;
            let verdict = verdict_name(rep.verdict);
            if g.csv {
                return Ok(Output::Csv { verdict, rows: csv_rows(&rep.laplace_side) });
            }
            let mut result = to_value(&rep)?;
            if let Some(e) = expected {
                result["expected_gamma"] = json!(e);
                result["gamma_error"] = json!((rep.gamma_hat - e).abs());
            }
            Ok(Output::Json { command: "verify tauberian".into(), verdict, result })
        }
        VerifyCmd::Stirling => {
            let cfg = quad_config(g, stirling_config())?;
            let rep = stirling_demo(&cfg).map_err(compute)?;
            let verdict = if rep.winner == "undecided" { "inconclusive" } else { "success" };
            if g.csv {
                let rows = rep
                    .points
                    .iter()
                    .map(|p| {
                        let z = Complex64::from(p.z);
                        let lambda = Complex64::from(p.lambda);
                        let half = z.inv() * 0.5;
                        let identity =
                            if rep.winner == "plus" { z.ln() + half } else { z.ln() - half } - Complex64::from(p.psi);
                        [
                            fmt_num(p.modulus),
                            fmt_num(p.theta),
                            p.lambda.to_string(),
                            ComplexValue::from(lambda * z * z).to_string(),
                            ComplexValue::from(lambda - identity).to_string(),
                            fmt_num(p.err_est),
                        ]
                    })
                    .collect();
                return Ok(Output::Csv { verdict: verdict.into(), rows });
            }
            Ok(Output::Json { command: "verify stirling".into(), verdict: verdict.into(), result: to_value(&rep)? })
        }
    }
}

fn demo(g: &GlobalArgs) -> Result<Output, Failure> {
    let cfg = quad_config(g, QuadConfig::default())?;
    let mut checks = Vec::new();

    let w = Operator::parse_literal("\"x^2 + sin(x)\"/H^2", cfg).map_err(compute)?;
    let lhs = w.mul_by_x().map_err(compute)?.derivative();
    let rhs = w.add(&w.derivative().mul_by_x().map_err(compute)?).map_err(compute)?;
    let eq = lhs.equals(&rhs, &EqualsOptions::default()).map_err(compute)?;
    checks.push(json!({ "name": "D(xW) = W + xDW", "pass": eq.equal, "detail": eq }));

    let sup = support(&Operator::delta(cfg), (-1.0, 1.0), 0.01, DEFAULT_SUPPORT_TOL).map_err(compute)?;
    let inside = sup.intervals.iter().all(|&(a, b)| a >= -0.01 && b <= 0.01) && !sup.intervals.is_empty();
    checks.push(json!({ "name": "supp delta = {0}", "pass": inside, "detail": sup }));

    let half = CPlusFunction::parse("x^0.5", cfg).map_err(compute)?;
    let g15 = gamma(1.5).map_err(compute)?;
    let claim = CesaroClaim::new(0.5, g15, 1, Vec::new()).map_err(compute)?;
    let emb = Operator::embed(&half).map_err(compute)?;
    let rep = verify_claim(&emb, &claim, (10.0, 1e4), 1e-6).map_err(compute)?;
    checks.push(json!({ "name": "W_{x^0.5} ~ x^0.5 (C)", "pass": rep.pass, "detail": rep }));

    let z = Complex64::new(10.0, 0.0);
    let s = classical_stieltjes(&half, 2.0, z, &cfg).map_err(compute)?;
    let oracle = z.powf(-1.5) * (g15 * g15 / 2.0);
    let rel = (s.complex() - oracle).norm() / oracle.norm();
    checks.push(json!({ "name": "S_2(x^0.5)(10) against Beta", "pass": rel < 1e-7, "detail": { "value": s.value, "relative_error": rel } }));

    let all = checks.iter().all(|c| c["pass"] == json!(true));
    Ok(Output::Json { command: "demo".into(), verdict: if all { "pass" } else { "fail" }.into(), result: json!({ "checks": checks }) })
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

/// Runs the CLI with explicit streams; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let stamp = (!cli.global.no_timestamp).then(timestamp);
    let output = match execute(&cli) {
        Ok(o) => o,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nUsage: opcalc [OPTIONS] <COMMAND>\n\nFor more information, try '--help'.");
            return EXIT_USAGE;
        }
        Err(Failure::Compute(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            Output::Json {
                command: command_name(&cli.command),
                verdict: "inconclusive".into(),
                result: json!({ "error": msg }),
            }
        }
    };
    match output {
        Output::Json { command, verdict, result } => {
            let code = exit_code(&verdict);
            let report = Report { schema: SCHEMA.into(), command, verdict, timestamp: stamp, result };
            match serde_json::to_string_pretty(&report) {
                Ok(s) => {
                    let _ = writeln!(out, "{s}");
                    code
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_INCONCLUSIVE
                }
            }
        }
        Output::Csv { verdict, rows, .. } => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let written = w
                .write_record(["|z|", "theta", "raw", "scaled", "corrected", "err_est"])
                .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)));
            match written.map_err(|e| e.to_string()).and_then(|_| w.into_inner().map_err(|e| e.to_string())) {
                Ok(bytes) => {
                    let _ = out.write_all(&bytes);
                    exit_code(&verdict)
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_INCONCLUSIVE
                }
            }
        }
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Parse { .. } => "parse".into(),
        Command::Eval { .. } => "eval".into(),
        Command::Equal { .. } => "equal".into(),
        Command::Support { .. } => "support".into(),
        Command::Cesaro { action } => match action {
            CesaroCmd::Verify { .. } => "cesaro verify".into(),
            CesaroCmd::Estimate { .. } => "cesaro estimate".into(),
            CesaroCmd::Alpha { .. } => "cesaro alpha".into(),
        },
        Command::Stieltjes { .. } => "stieltjes".into(),
        Command::Laplace { .. } => "laplace".into(),
        Command::Verify { check } => match check {
            VerifyCmd::AbelianStieltjes { .. } => "verify abelian-stieltjes".into(),
            VerifyCmd::AbelianLaplace { .. } => "verify abelian-laplace".into(),
            VerifyCmd::Tauberian { .. } => "verify tauberian".into(),
            VerifyCmd::Stirling => "verify stirling".into(),
        },
        Command::Demo => "demo".into(),
    }
}

/// Runs the CLI on the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    run_with(args, &mut out, &mut err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("opcalc").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn report(s: &str) -> Report {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn complex_literals() {
        let c = |s| parse_complex(s).unwrap();
        assert_eq!(c("3"), Complex64::new(3.0, 0.0));
        assert_eq!(c("3+4i"), Complex64::new(3.0, 4.0));
        assert_eq!(c("-1.5e-3-2i"), Complex64::new(-1.5e-3, -2.0));
        assert_eq!(c("2e+1i"), Complex64::new(0.0, 20.0));
        assert_eq!(c("-i"), Complex64::new(0.0, -1.0));
        assert_eq!(c("1 + i"), Complex64::new(1.0, 1.0));
        assert!(parse_complex("1+2j").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn eval_reports_value() {
        let (code, out, _) = call(&["eval", "\"x^2\"/H^1", "--at", "3", "--no-timestamp"]);
        assert_eq!(code, 0);
        let r = report(&out);
        assert_eq!(r.schema, SCHEMA);
        assert_eq!(r.result["value"], json!(9.0));
        assert!(r.timestamp.is_none());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = call(&["eval", "x^2/H", "--at", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("quoted"));
        let (code, _, err) = call(&["stieltjes", "\"x\"/H", "--z", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--r"));
        let (code, _, _) = call(&["eval", "\"x\"/H", "--at", "1", "--csv"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = call(&["--abs-tol", "-1", "eval", "\"x\"/H", "--at", "1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn equal_verdicts() {
        let (code, out, _) = call(&["equal", "\"x\"/H^2", "\"x^2/2\"/H^3", "--no-timestamp"]);
        assert_eq!(code, 0);
        assert_eq!(report(&out).verdict, "pass");
        let (code, _, _) = call(&["equal", "\"x\"/H^2", "\"x^2\"/H^3", "--no-timestamp"]);
        assert_eq!(code, EXIT_FAIL);
    }

    #[test]
    fn abelian_stieltjes_normalized() {
        let (code, out, _) = call(&[
            "verify", "abelian-stieltjes", "--f", "x^0.5", "--k", "1", "--alpha", "-0.5-normalized", "--r", "2",
            "--theta", "0.785", "--no-timestamp",
        ]);
        assert_eq!(code, 0, "{out}");
        let r = report(&out);
        let l = r.result["normalized_limit"]["re"].as_f64().unwrap();
        assert!((l - 1.0).abs() < 1e-3, "{l}");
    }

    #[test]
    fn csv_rows_match_schedule() {
        let (code, out, _) = call(&[
            "verify", "abelian-laplace", "--op", "\"x^3/3\"/H", "--alpha", "2", "--gamma", "2", "--schedule", "0.1,2,9", "--csv",
        ]);
        assert_eq!(code, 0);
        let mut rdr = csv::Reader::from_reader(out.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), 6);
        assert_eq!(rdr.records().count(), 9);
    }

    #[test]
    fn missing_certificate_is_inconclusive() {
        let (code, out, err) = call(&["laplace", "\"sin(x)^2\"/H", "--z", "1", "--no-timestamp"]);
        assert_eq!(code, EXIT_INCONCLUSIVE);
        assert!(err.contains("certificate"));
        assert!(report(&out).result["error"].is_string());
        let (code, _, _) = call(&["laplace", "\"sin(x)^2\"/H", "--z", "1", "--growth", "power:0,1,1"]);
        assert_eq!(code, 0);
    }

    #[test]
    fn deterministic_without_timestamp() {
        let args = ["cesaro", "estimate", "\"x^2.5 + x\"/H^2", "--alpha", "0.5", "--no-timestamp"];
        assert_eq!(call(&args).1, call(&args).1);
    }
}
