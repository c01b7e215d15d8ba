use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use mu0::covering::{cylinder_demo, family_audit, BallFamily};
use mu0::kronecker::{
    counting_bound, covering_constant, hitting_measure, orbit_distinctness_check, product_constant,
    product_constant_bracket, select_indices, FrequencySequence, IndexSelection,
};
use mu0::measure::{Atom, Ball, MeasureContext, RegionPi, UnionOptions};
use mu0::sampling::{mc_region, mc_volume, SampleMethod};
use mu0::volume::{shell_check, sum_density, volume_conv_with_budget, volume_ie, FiniteBallSpec};
use mu0::{Error, Point, WeightSchedule};

use crate::config::{Format, RunConfig};
use crate::{EXIT_BUDGET, EXIT_PRECONDITION};

/// Partial product length; the neglected tail is about `2c / M`.
const PRODUCT_TERMS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VolumeMethod {
    Conv,
    Ie,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fallback {
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Volume of a truncated ball B_N(θ, r) in [0,1]^N
    Volume {
        #[arg(long)]
        dim: usize,
        /// point literal `[v1,v2,...;tail]`
        #[arg(long, default_value = "[;0]")]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, value_enum, default_value = "conv")]
        method: VolumeMethod,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// low-discrepancy points for --method mc
        #[arg(long)]
        quasi: bool,
        /// also write the exact density of the truncated distance as JSON
        #[arg(long)]
        dump_density: Option<PathBuf>,
    },
    /// Certified enclosure of the measure of a ball of the infinite cube
    BallMeasure {
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        /// measure the complement instead
        #[arg(long)]
        complement: bool,
        #[arg(long, default_value_t = 40)]
        max_dim: usize,
    },
    /// Certified enclosure of the measure of a finite union of balls and complements
    UnionMeasure {
        /// `point:radius`, repeatable
        #[arg(long = "ball")]
        balls: Vec<String>,
        /// `point:radius`, repeatable
        #[arg(long = "complement")]
        complements: Vec<String>,
        #[arg(long, value_enum)]
        fallback: Option<Fallback>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 40)]
        max_dim: usize,
    },
    /// Shell volume against the ε 2^N majorant, singly or over a grid
    ShellCheck {
        #[arg(long, default_value = "[;0]")]
        center: String,
        #[arg(long, required_unless_present = "grid")]
        dim: Option<usize>,
        #[arg(long, required_unless_present = "grid")]
        radius: Option<f64>,
        #[arg(long, required_unless_present = "grid")]
        eps: Option<f64>,
        /// sweep N = 1..10, r ∈ {0.1, 0.3, 0.5, 1, 1.5}, ε ∈ {1e-2, 1e-3}
        #[arg(long)]
        grid: bool,
        /// additional seeded random centers for the sweep
        #[arg(long, default_value_t = 0)]
        random_centers: usize,
    },
    /// Time a Kronecker curve spends in a δ-cube, against the counting bound
    CurveHit {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        /// comma-separated cube center (default: all 0.5)
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        strengthened: bool,
        /// scan step (default: the coarsest admissible)
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Frequency indices satisfying the growth constraints
    Indices {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        strengthened: bool,
    },
    /// Check that curve points at distinct times are not permutations of each other
    OrbitCheck {
        #[arg(long, requires = "t2")]
        t1: Option<f64>,
        #[arg(long, requires = "t1")]
        t2: Option<f64>,
        /// number of seeded random pairs instead of --t1/--t2
        #[arg(long, conflicts_with = "t1")]
        pairs: Option<usize>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        perms: usize,
    },
    /// Nested-free cylinder family with unbounded overlap at 0
    CylinderDemo {
        #[arg(long)]
        k: usize,
    },
    /// Containment and overlap audit of a ball family given as JSON
    CoveringAudit {
        /// JSON list of {"center": "[...;...]", "radius": r}
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Volume { .. } => "volume",
            Command::BallMeasure { .. } => "ball-measure",
            Command::UnionMeasure { .. } => "union-measure",
            Command::ShellCheck { .. } => "shell-check",
            Command::CurveHit { .. } => "curve-hit",
            Command::Indices { .. } => "indices",
            Command::OrbitCheck { .. } => "orbit-check",
            Command::CylinderDemo { .. } => "cylinder-demo",
            Command::CoveringAudit { .. } => "covering-audit",
        }
    }
}

pub enum Failure {
    Precondition(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Precondition(e.to_string())
        }
    }
}

pub enum Body {
    Json(Value),
    Csv(String),
}

pub struct Outcome {
    pub body: Body,
    pub exit: u8,
    pub warning: Option<String>,
}

fn point(literal: &str) -> Result<Point, Failure> {
    Ok(literal.parse::<Point>()?)
}

/// `point:radius`, split at the last colon.
fn ball_literal(literal: &str) -> Result<Ball, Failure> {
    let (p, r) = literal.rsplit_once(':').ok_or_else(|| {
        Failure::Precondition(format!("`{literal}` is not of the form point:radius"))
    })?;
    let r: f64 = r
        .trim()
        .parse()
        .map_err(|_| Failure::Precondition(format!("`{r}` is not a radius")))?;
    Ok(Ball::new(point(p)?, r)?)
}

fn record(cmd: &Command, cfg: &RunConfig, inputs: Value, result: Value) -> Value {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp,
        "config": cfg,
        "inputs": inputs,
        "result": result,
    })
}

fn json_only(cfg: &RunConfig) -> Result<(), Failure> {
    if cfg.format == Some(Format::Csv) {
        return Err(Failure::Precondition(
            "csv output is only produced by sweeps (shell-check --grid)".into(),
        ));
    }
    Ok(())
}

fn done(value: Value) -> Outcome {
    Outcome {
        body: Body::Json(value),
        exit: 0,
        warning: None,
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let weights = WeightSchedule::new(cfg.base)?;
    if !matches!(cmd, Command::ShellCheck { grid: true, .. }) {
        json_only(cfg)?;
    }
    match cmd {
        Command::Volume {
            dim,
            center,
            radius,
            method,
            samples,
            quasi,
            dump_density,
        } => {
            if *dim == 0 {
                return Err(Failure::Precondition("dimension must be at least 1".into()));
            }
            let c = point(center)?;
            let spec = FiniteBallSpec::new(c.head(*dim), *radius, weights)?;
            if let Some(path) = dump_density {
                let d = sum_density(spec.center(), &weights, cfg.budgets.breakpoints)?;
                let text = serde_json::to_string(&d.to_record()).expect("records serialize");
                std::fs::write(path, text).map_err(|e| {
                    Failure::Precondition(format!("cannot write {}: {e}", path.display()))
                })?;
            }
            let result = match method {
                VolumeMethod::Conv => json!({
                    "value": volume_conv_with_budget(&spec, cfg.budgets.breakpoints)?,
                    "method": "conv",
                    "certified": true,
                }),
                VolumeMethod::Ie => json!({
                    "value": volume_ie(&spec)?,
                    "method": "ie",
                    "certified": true,
                }),
                VolumeMethod::Mc => {
                    let m = if *quasi {
                        SampleMethod::Quasi
                    } else {
                        SampleMethod::Plain
                    };
                    let rep = mc_volume(&spec, *samples, cfg.seed, m)?;
                    json!({
                        "value": rep.estimate,
                        "method": "mc",
                        "certified": false,
                        "sampling": rep,
                    })
                }
            };
            let inputs = json!({
                "dim": dim,
                "center": c.to_string(),
                "radius": radius,
                "method": format!("{method:?}").to_lowercase(),
                "samples": samples,
                "quasi": quasi,
            });
            Ok(done(record(cmd, cfg, inputs, result)))
        }

        Command::BallMeasure {
            center,
            radius,
            complement,
            max_dim,
        } => {
            let ball = Ball::new(point(center)?, *radius)?;
            let ctx = MeasureContext {
                weights,
                breakpoint_budget: cfg.budgets.breakpoints,
                max_dim: *max_dim,
            };
            let e = if *complement {
                ctx.measure_complement(&ball, cfg.tol)?
            } else {
                ctx.measure_ball(&ball, cfg.tol)?
            };
            let mut result = serde_json::to_value(e).expect("enclosures serialize");
            result["method"] = json!("conv");
            result["width"] = json!(e.width());
            let inputs = json!({
                "center": ball.center().to_string(),
                "radius": radius,
                "complement": complement,
                "max_dim": max_dim,
            });
            let mut out = done(record(cmd, cfg, inputs, result));
            if !e.converged {
                out.exit = EXIT_BUDGET;
                out.warning = Some(format!(
                    "tolerance {} not reached; enclosure width {}",
                    cfg.tol,
                    e.width()
                ));
            }
            Ok(out)
        }

        Command::UnionMeasure {
            balls,
            complements,
            fallback,
            samples,
            max_dim,
        } => {
            let mut atoms = Vec::new();
            for b in balls {
                atoms.push(Atom::Ball(ball_literal(b)?));
            }
            for b in complements {
                atoms.push(Atom::Complement(ball_literal(b)?));
            }
            let region = RegionPi::new(atoms)?;
            let ctx = MeasureContext {
                weights,
                breakpoint_budget: cfg.budgets.breakpoints,
                max_dim: *max_dim,
            };
            let opts = UnionOptions {
                tol: cfg.tol,
                node_budget: cfg.budgets.bnb_nodes,
            };
            let rep = ctx.measure_union(&region, &opts)?;
            let mut result = serde_json::to_value(&rep).expect("reports serialize");
            result["method"] = json!("bnb");
            let converged = rep.enclosure.converged;
            if !converged && fallback.is_some() {
                let mc = mc_region(
                    &region,
                    rep.enclosure.n_used,
                    &weights,
                    *samples,
                    cfg.seed,
                    SampleMethod::Plain,
                )?;
                result["fallback"] = json!({
                    "value": mc.estimate,
                    "method": "mc",
                    "certified": false,
                    "sampling": mc,
                });
            }
            let inputs = json!({
                "balls": balls,
                "complements": complements,
                "fallback": fallback.map(|_| "mc"),
                "samples": samples,
                "max_dim": max_dim,
            });
            let mut out = done(record(cmd, cfg, inputs, result));
            if !converged && fallback.is_none() {
                out.exit = EXIT_BUDGET;
                out.warning = Some(format!(
                    "node budget exhausted before reaching tolerance {}",
                    cfg.tol
                ));
            }
            Ok(out)
        }

        Command::ShellCheck {
            center,
            dim,
            radius,
            eps,
            grid,
            random_centers,
        } => {
            let c = point(center)?;
            if !grid {
                let (dim, radius, eps) = (dim.unwrap(), radius.unwrap(), eps.unwrap());
                if dim == 0 {
                    return Err(Failure::Precondition("dimension must be at least 1".into()));
                }
                let check = shell_check(&c.head(dim), radius, eps, &weights)?;
                let mut result = serde_json::to_value(check).expect("checks serialize");
                result["method"] = json!("conv");
                result["certified"] = json!(true);
                let inputs =
                    json!({"center": c.to_string(), "dim": dim, "radius": radius, "eps": eps});
                return Ok(done(record(cmd, cfg, inputs, result)));
            }
            let mut centers = vec![c];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..*random_centers {
                let prefix = (0..10).map(|_| rng.gen::<f64>()).collect();
                centers.push(Point::new(prefix, 0.0)?);
            }
            let mut rows = Vec::new();
            for (ci, center) in centers.iter().enumerate() {
                for n in 1..=10 {
                    for r in [0.1, 0.3, 0.5, 1.0, 1.5] {
                        for e in [1e-2, 1e-3] {
                            rows.push((ci, center, shell_check(&center.head(n), r, e, &weights)?));
                        }
                    }
                }
            }
            let violations = rows.iter().filter(|r| !r.2.holds).count();
            let exit = if violations > 0 { EXIT_PRECONDITION } else { 0 };
            let warning = (violations > 0).then(|| format!("{violations} shell-bound violations"));
            if cfg.format == Some(Format::Json) {
                let table: Vec<Value> = rows
                    .iter()
                    .map(|(ci, center, s)| {
                        let mut v = serde_json::to_value(s).expect("checks serialize");
                        v["center_id"] = json!(ci);
                        v["center"] = json!(center.to_string());
                        v
                    })
                    .collect();
                let result = json!({"rows": table, "violations": violations, "method": "conv", "certified": true});
                let inputs = json!({"center": centers[0].to_string(), "grid": true, "random_centers": random_centers});
                return Ok(Outcome {
                    body: Body::Json(record(cmd, cfg, inputs, result)),
                    exit,
                    warning,
                });
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "center_id",
                "center",
                "dim",
                "radius",
                "eps",
                "shell",
                "bound",
                "holds",
                "method",
            ])
            .expect("in-memory writer");
            for (ci, center, s) in &rows {
                w.write_record([
                    ci.to_string(),
                    center.to_string(),
                    s.dim.to_string(),
                    s.radius.to_string(),
                    s.eps.to_string(),
                    s.shell.to_string(),
                    s.bound.to_string(),
                    s.holds.to_string(),
                    "conv".to_string(),
                ])
                .expect("in-memory writer");
            }
            let bytes = w.into_inner().expect("in-memory writer");
            Ok(Outcome {
                body: Body::Csv(String::from_utf8(bytes).expect("utf-8 fields")),
                exit,
                warning,
            })
        }

        Command::CurveHit {
            k,
            delta,
            alpha,
            strengthened,
            resolution,
        } => {
            let mut freqs =
                FrequencySequence::sqrt_primes(1)?.with_budget(cfg.budgets.freq_extension);
            let sel = select_indices(*delta, *k, &mut freqs, *strengthened)?;
            let alpha: Vec<f64> = match alpha {
                None => vec![0.5; *k],
                Some(s) => s
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Failure::Precondition(format!("`{t}` is not a number")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let res = resolution.unwrap_or(delta / (4.0 * sel.lambdas[sel.k() - 1]));
            let e = hitting_measure(&alpha, &sel, res)?;
            let bound = counting_bound(&sel);
            let mut result = json!({
                "selection": selection_json(&sel, &freqs),
                "lo": e.lo,
                "hi": e.hi,
                "counting_bound": bound,
                "within_bound": e.hi <= bound,
                "method": "scan",
                "certified": e.certified,
            });
            if *strengthened {
                result["product_majorant"] = json!(delta.powi(*k as i32) * product_constant());
            }
            let inputs = json!({"k": k, "delta": delta, "alpha": alpha, "strengthened": strengthened, "resolution": res});
            Ok(done(record(cmd, cfg, inputs, result)))
        }

        Command::Indices {
            delta,
            k,
            strengthened,
        } => {
            let mut freqs =
                FrequencySequence::sqrt_primes(1)?.with_budget(cfg.budgets.freq_extension);
            let sel = select_indices(*delta, *k, &mut freqs, *strengthened)?;
            let (lo, hi) = product_constant_bracket(PRODUCT_TERMS);
            let result = json!({
                "selection": selection_json(&sel, &freqs),
                "counting_bound": counting_bound(&sel),
                "product_constant": {
                    "closed_form": product_constant(),
                    "partial_bracket": [lo, hi],
                    "partial_terms": PRODUCT_TERMS,
                    "covering_constant": covering_constant(),
                },
                "method": "exact",
                "certified": true,
            });
            let inputs = json!({"k": k, "delta": delta, "strengthened": strengthened});
            Ok(done(record(cmd, cfg, inputs, result)))
        }

        Command::OrbitCheck {
            t1,
            t2,
            pairs,
            k,
            perms,
        } => {
            let mut freqs =
                FrequencySequence::sqrt_primes(*k)?.with_budget(cfg.budgets.freq_extension);
            let inputs = json!({"t1": t1, "t2": t2, "pairs": pairs, "k": k, "perms": perms});
            let result = match (t1, t2, pairs) {
                (Some(a), Some(b), _) => {
                    let mut v = serde_json::to_value(orbit_distinctness_check(
                        *a, *b, &mut freqs, *k, *perms,
                    )?)
                    .expect("checks serialize");
                    v["method"] = json!("exact");
                    v
                }
                (_, _, Some(n)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    let mut distinct = 0usize;
                    let mut min_sep = f64::INFINITY;
                    for _ in 0..*n {
                        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                        if a == b {
                            continue;
                        }
                        let c = orbit_distinctness_check(a, b, &mut freqs, *k, *perms)?;
                        distinct += c.distinct as usize;
                        min_sep = min_sep.min(c.min_separation);
                    }
                    json!({
                        "pairs": n,
                        "distinct": distinct,
                        "all_distinct": distinct == *n,
                        "min_separation": min_sep,
                        "method": "exact",
                    })
                }
                _ => {
                    return Err(Failure::Precondition(
                        "give --t1 and --t2, or --pairs".into(),
                    ))
                }
            };
            Ok(done(record(cmd, cfg, inputs, result)))
        }

        Command::CylinderDemo { k } => {
            let demo = cylinder_demo(*k)?;
            let mut result = serde_json::to_value(&demo).expect("reports serialize");
            result["method"] = json!("exact");
            result["certified"] = json!(true);
            Ok(done(record(cmd, cfg, json!({"k": k}), result)))
        }

        Command::CoveringAudit { family, samples } => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Entry {
                center: String,
                radius: f64,
            }
            let text = std::fs::read_to_string(family).map_err(|e| {
                Failure::Precondition(format!("cannot read {}: {e}", family.display()))
            })?;
            let entries: Vec<Entry> = serde_json::from_str(&text)
                .map_err(|e| Failure::Precondition(format!("bad family file: {e}")))?;
            let balls = entries
                .iter()
                .map(|e| Ok(Ball::new(point(&e.center)?, e.radius)?))
                .collect::<Result<Vec<_>, Failure>>()?;
            let fam = BallFamily::new(balls);
            let inputs = json!({
                "family": fam.balls.iter().map(|b| json!({"center": b.center().to_string(), "radius": b.radius()})).collect::<Vec<_>>(),
                "samples": samples,
            });
            match family_audit(&fam, *samples, cfg.seed, &weights) {
                Ok(rep) => {
                    let mut result = serde_json::to_value(&rep).expect("reports serialize");
                    result["passed"] = json!(true);
                    result["method"] = json!("mc");
                    result["certified"] = json!(false);
                    Ok(done(record(cmd, cfg, inputs, result)))
                }
                Err(Error::Containment { inner, outer }) => {
                    let result = json!({
                        "passed": false,
                        "violation": {"inner": inner, "outer": outer},
                        "method": "exact",
                        "certified": true,
                    });
                    Ok(Outcome {
                        body: Body::Json(record(cmd, cfg, inputs, result)),
                        exit: EXIT_PRECONDITION,
                        warning: Some(format!("ball {inner} is contained in ball {outer}")),
                    })
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn selection_json(sel: &IndexSelection, freqs: &FrequencySequence) -> Value {
    let primes: Vec<u64> = sel.indices.iter().map(|&n| freqs.primes()[n - 1]).collect();
    let mut v = serde_json::to_value(sel).expect("selections serialize");
    v["primes"] = json!(primes);
    v
}
