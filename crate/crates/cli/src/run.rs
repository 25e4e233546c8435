//! Executes experiment stanzas and turns their results into records.

use std::path::Path;

use rcabench::engine::{sample_state, Rule};
use rcabench::lattice::{Configuration, FullState, Geometry, Region};
use rcabench::measure::{CylinderSet, DEFAULT_ENUMERATION_CAP};
use rcabench::thermo::{
    check_complexity_prior_bound, cycle_cost, cycle_cost_average, cycle_cost_estimate, entropy_influx_experiment,
    kraft_check, physical_complexity, physical_prior, prior_sketch, weak_mixing_order, ComplexityBounds,
    ComplexityCertificate, ComplexityOutcome, ComplexityTarget, MixingMode, PriorMode, PriorQuery, PriorValue,
    SplitSpec,
};
use rcabench::universality::{
    persistence_probe, search_conditional_prep, search_map, search_unconditional_prep, BijectionTask, MapTable,
    PersistenceReport, PreparationTask, SearchMode, SearchOutcome, DEFAULT_SEARCH_CAP,
};
use rcabench::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Caps, Cylinder, Experiment, ExperimentConfig, MapSpec, Split};

/// Why a run stopped early. Maps onto the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Config(String),
    CapExceeded(String),
    Violation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::CapExceeded(_) => 3,
            Failure::Violation(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::CapExceeded(m) | Failure::Violation(m) => m,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            Failure::Config(_) => "error",
            Failure::CapExceeded(_) => "cap-exceeded",
            Failure::Violation(_) => "violation",
        }
    }
}

fn from_error(e: Error) -> Failure {
    match e {
        Error::CapExceeded { .. } => Failure::CapExceeded(e.to_string()),
        Error::Unsound(_) => Failure::Violation(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cap: Option<u64>,
}

/// Cap precedence: `--cap`, then the config, then `RCABENCH_CAP`, then the built-in default.
pub fn resolve_caps(caps: &Caps, overrides: &Overrides) -> (u64, u64) {
    let env = std::env::var("RCABENCH_CAP").ok().and_then(|v| v.trim().parse::<u64>().ok());
    let pick = |own: Option<u64>, default: u64| overrides.cap.or(own).or(env).unwrap_or(default);
    (
        pick(caps.enumeration, DEFAULT_ENUMERATION_CAP),
        pick(caps.search, DEFAULT_SEARCH_CAP),
    )
}

struct Ctx<'a> {
    rule: &'a Rule,
    g: &'a Geometry,
    seed: u64,
    enumeration_cap: u64,
    search_cap: u64,
}

struct Outcome {
    result: Value,
    headline: String,
    violation: Option<String>,
}

impl Outcome {
    fn ok(result: Value, headline: String) -> Self {
        Outcome {
            result,
            headline,
            violation: None,
        }
    }
}

type Job<'a> = Box<dyn FnOnce(&Ctx) -> Result<Outcome, Error> + 'a>;

pub fn region(g: &Geometry, text: &str) -> Result<Region, String> {
    Region::parse(g, text).map_err(|e| format!("region {text:?}: {e}"))
}

pub fn configuration(g: &Geometry, text: &str) -> Result<Configuration, String> {
    if text.trim().is_empty() || text.trim() == "=" {
        return Ok(Configuration::empty());
    }
    Configuration::parse(g, text).map_err(|e| format!("configuration {text:?}: {e}"))
}

pub fn split(g: &Geometry, s: &Split) -> Result<SplitSpec, String> {
    match s.hot_width {
        Some(w) => SplitSpec::with_width(g, s.axis, s.boundary, w),
        None => SplitSpec::new(g, s.axis, s.boundary),
    }
    .map_err(|e| format!("split: {e}"))
}

pub fn map_table(g: &Geometry, m: &MapSpec) -> Result<MapTable, String> {
    let r = region(g, &m.region)?;
    MapTable::parse(r, g.alphabet(), &m.table.join("\n")).map_err(|e| format!("map table: {e}"))
}

fn cylinder(g: &Geometry, c: &Cylinder) -> Result<CylinderSet, String> {
    let r = region(g, &c.region)?;
    let members = c
        .members
        .iter()
        .map(|s| Configuration::from_text(g, r.clone(), s).map_err(|e| format!("member {s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    CylinderSet::new(r, g.alphabet(), members).map_err(|e| e.to_string())
}

fn search_mode(h: &Option<crate::config::Heuristic>, seed: u64) -> SearchMode {
    match h {
        Some(h) => SearchMode::Sampled { samples: h.samples, seed },
        None => SearchMode::Exhaustive,
    }
}

pub fn digest(state: &FullState) -> String {
    hex::encode(Sha256::digest(state.to_text().as_bytes()))
}

/// Largest state written out verbatim in simulate records.
const STATE_TEXT_LIMIT: usize = 4096;

fn search_record(outcome: &SearchOutcome, g: &Geometry) -> (Value, String) {
    match outcome {
        SearchOutcome::Found(c) => (
            json!({"outcome": "found", "certificate": c.to_record(g)}),
            format!("found t={} |R_p|={}", c.time, c.program.len()),
        ),
        SearchOutcome::NotFoundWithinBounds(b) => (
            json!({"outcome": "not-found-within-bounds", "bounds": b}),
            format!("not found within T={} |W|={}", b.max_time, b.window_cells),
        ),
    }
}

pub fn complexity_record(c: &ComplexityCertificate, g: &Geometry) -> Value {
    let target = match &c.target {
        ComplexityTarget::Config(x) => json!({"config": x.to_text(g)}),
        ComplexityTarget::Map(m) => json!({"map": {
            "region": m.region().to_text(g),
            "table": m.to_text().lines().collect::<Vec<_>>(),
        }}),
    };
    json!({
        "target": target,
        "program": c.program.to_text(g),
        "time": c.time,
        "value": c.value,
        "hash": c.hash,
    })
}

/// Parses a stanza into a job. All input errors surface here, before anything runs.
fn prepare<'a>(exp: &'a Experiment, g: &'a Geometry) -> Result<Job<'a>, String> {
    Ok(match exp {
        Experiment::Simulate { state, config, steps, .. } => {
            let start = match (state, config) {
                (Some(_), Some(_)) => return Err("give either state or config, not both".into()),
                (Some(s), None) => {
                    let st = FullState::parse(s).map_err(|e| e.to_string())?;
                    if st.geometry() != g {
                        return Err("state geometry differs from the config geometry".into());
                    }
                    Some(st)
                }
                (None, Some(c)) => {
                    Some(FullState::with_configuration(g, &configuration(g, c)?).map_err(|e| e.to_string())?)
                }
                (None, None) => None,
            };
            let steps = *steps;
            Box::new(move |ctx: &Ctx| {
                let s = start.unwrap_or_else(|| sample_state(ctx.g, ctx.seed));
                let end = rcabench::engine::evolve(&s, ctx.rule, steps)?;
                let mut result = json!({
                    "steps": steps,
                    "initial_digest": digest(&s),
                    "final_digest": digest(&end),
                    "final_clock": end.clock(),
                });
                if ctx.g.cell_count() <= STATE_TEXT_LIMIT {
                    result["final_state"] = json!(end.to_text());
                }
                let head = format!("final {}", &digest(&end)[..16]);
                Ok(Outcome::ok(result, head))
            })
        }
        Experiment::SearchPrep {
            target,
            initial,
            window,
            max_time,
            policy,
            heuristic,
            ..
        } => {
            let target = configuration(g, target)?;
            let window = region(g, window)?;
            let initial = initial
                .as_ref()
                .map(|s| Configuration::from_text(g, target.region().clone(), s).map_err(|e| e.to_string()))
                .transpose()?;
            Box::new(move |ctx: &Ctx| {
                let mut task = PreparationTask::new(ctx.rule.clone(), ctx.g.clone(), target, *max_time, window)
                    .with_policy(*policy)
                    .with_mode(search_mode(heuristic, ctx.seed))
                    .with_cap(ctx.search_cap);
                let outcome = match initial {
                    Some(ci) => {
                        task = task.with_initial(ci);
                        search_conditional_prep(&task)?
                    }
                    None => search_unconditional_prep(&task)?,
                };
                let (result, head) = search_record(&outcome, ctx.g);
                Ok(Outcome::ok(result, head))
            })
        }
        Experiment::SearchMap {
            map,
            window,
            max_time,
            policy,
            heuristic,
            ..
        } => {
            let table = map_table(g, map)?;
            let window = region(g, window)?;
            Box::new(move |ctx: &Ctx| {
                let task = BijectionTask::new(ctx.rule.clone(), ctx.g.clone(), table, *max_time, window)
                    .with_policy(*policy)
                    .with_mode(search_mode(heuristic, ctx.seed))
                    .with_cap(ctx.search_cap);
                let outcome = search_map(&task)?;
                let (mut result, head) = search_record(&outcome, ctx.g);
                result["bijective"] = json!(task.is_bijective());
                Ok(Outcome::ok(result, head))
            })
        }
        Experiment::Prior {
            split: sp,
            target,
            time,
            samples,
            ..
        } => {
            let split = split(g, sp)?;
            let target = configuration(g, target)?;
            Box::new(move |ctx: &Ctx| {
                let mode = match samples {
                    Some(n) => PriorMode::Mc {
                        samples: *n,
                        seed: ctx.seed,
                    },
                    None => PriorMode::Exact,
                };
                let q = PriorQuery {
                    rule: ctx.rule.clone(),
                    split,
                    target,
                    time: *time,
                    mode,
                };
                let v = physical_prior(&q, ctx.enumeration_cap)?;
                let head = match &v {
                    PriorValue::Exact(r) => format!("P = {}/{}", r.hits, r.total),
                    PriorValue::Mc(e) => format!("P ~ {:.6} [{:.6}, {:.6}]", e.estimate, e.low, e.high),
                };
                Ok(Outcome::ok(json!({"value": v.value(), "prior": v}), head))
            })
        }
        Experiment::PriorSketch {
            split: sp,
            target,
            max_time,
            ..
        } => {
            let split = split(g, sp)?;
            let target = configuration(g, target)?;
            Box::new(move |ctx: &Ctx| {
                let s = prior_sketch(ctx.rule, &split, &target, *max_time, ctx.enumeration_cap)?;
                let head = format!("weight {:.6} over t <= {} (approximate)", s.weight, s.max_time);
                Ok(Outcome::ok(json!(s), head))
            })
        }
        Experiment::Complexity {
            split: sp,
            target,
            map,
            window,
            max_time,
            max_program,
            ..
        } => {
            let split = split(g, sp)?;
            let goal = match (target, map) {
                (Some(t), None) => ComplexityTarget::Config(configuration(g, t)?),
                (None, Some(m)) => ComplexityTarget::Map(map_table(g, m)?),
                _ => return Err("give exactly one of target or map".into()),
            };
            let window = region(g, window)?;
            Box::new(move |ctx: &Ctx| {
                let bounds = ComplexityBounds {
                    max_time: *max_time,
                    window,
                    max_program: *max_program,
                    cap: ctx.search_cap,
                };
                let out = physical_complexity(ctx.rule, &split, &goal, &bounds)?;
                let mut result = match &out {
                    ComplexityOutcome::Found(c) => json!({"outcome": "found", "certificate": complexity_record(c, ctx.g)}),
                    ComplexityOutcome::NotFoundWithinBounds { .. } => json!({"outcome": "not-found-within-bounds"}),
                };
                let mut head = match out.certificate() {
                    Some(c) => format!("C = {} bits at t={}", c.value, c.time),
                    None => "not found within bounds".to_string(),
                };
                let mut violation = None;
                if let ComplexityTarget::Config(c) = &goal {
                    let bounds = ComplexityBounds {
                        cap: ctx.enumeration_cap.max(ctx.search_cap),
                        ..bounds
                    };
                    let report = check_complexity_prior_bound(ctx.rule, &split, c, &bounds)?;
                    head.push_str(&format!("; prior side {} holds={}", report.bound, report.holds));
                    if !report.holds {
                        violation = Some("complexity below the prior lower bound".to_string());
                    }
                    result["prior_bound"] = json!(report);
                }
                Ok(Outcome {
                    result,
                    headline: head,
                    violation,
                })
            })
        }
        Experiment::Kraft {
            split: sp,
            region: r,
            members,
            window,
            max_time,
            max_program,
            ..
        } => {
            let split = split(g, sp)?;
            let r = region(g, r)?;
            let family: Vec<Configuration> = match members {
                Some(list) => list
                    .iter()
                    .map(|s| Configuration::from_text(g, r.clone(), s).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?,
                None => (0..g.configurations(r.len()))
                    .map(|i| Configuration::from_index(r.clone(), g.alphabet(), i))
                    .collect(),
            };
            let window = region(g, window)?;
            Box::new(move |ctx: &Ctx| {
                let bounds = ComplexityBounds {
                    max_time: *max_time,
                    window,
                    max_program: *max_program,
                    cap: ctx.search_cap,
                };
                let rep = kraft_check(ctx.rule, &split, &family, &bounds)?;
                let head = format!("sum = {}/{} ({} of {} found)", rep.numerator, rep.denominator, rep.found, rep.members);
                let violation = (!rep.holds).then(|| "Kraft sum exceeds 1".to_string());
                Ok(Outcome {
                    result: json!(rep),
                    headline: head,
                    violation,
                })
            })
        }
        Experiment::CycleCost {
            target,
            tau,
            k,
            tau_max,
            samples,
            ..
        } => {
            let c = configuration(g, target)?;
            if samples.is_some() && tau_max.is_some() {
                return Err("tau_max averaging is exact only".into());
            }
            Box::new(move |ctx: &Ctx| {
                if let Some(t1) = tau_max {
                    let (reports, avg) = cycle_cost_average(ctx.rule, ctx.g, &c, *k, *tau, *t1, ctx.enumeration_cap)?;
                    let head = format!("mean F_{k} over tau in [{tau}, {t1}] = {avg}");
                    return Ok(Outcome::ok(json!({"reports": reports, "average": avg}), head));
                }
                let rep = match samples {
                    Some(n) => cycle_cost_estimate(ctx.rule, ctx.g, &c, *tau, *k, *n, ctx.seed)?,
                    None => cycle_cost(ctx.rule, ctx.g, &c, *tau, *k, ctx.enumeration_cap)?,
                };
                let head = format!("F_{k}({tau}) = {}", json!(rep.value));
                Ok(Outcome::ok(json!(rep), head))
            })
        }
        Experiment::Influx {
            region: r,
            displacement,
            program,
            time,
            initial,
            ..
        } => {
            let r = region(g, r)?;
            let program = configuration(g, program.as_deref().unwrap_or(""))?;
            let initial = initial
                .as_ref()
                .map(|s| Configuration::from_text(g, r.clone(), s).map_err(|e| e.to_string()))
                .transpose()?;
            Box::new(move |ctx: &Ctx| {
                let rep = entropy_influx_experiment(
                    ctx.rule,
                    ctx.g,
                    &r,
                    displacement,
                    &program,
                    *time,
                    initial.as_ref(),
                    ctx.enumeration_cap,
                )?;
                let head = format!(
                    "transfer {} measured {:.6} bound {:.6}",
                    if rep.transfer_verified { "verified" } else { "not verified" },
                    rep.measured,
                    rep.bound
                );
                let violation = (!rep.holds).then(|| "entropy influx below the bound".to_string());
                Ok(Outcome {
                    result: json!(rep),
                    headline: head,
                    violation,
                })
            })
        }
        Experiment::Mixing { sets, horizon, samples, .. } => {
            let sets = sets.iter().map(|c| cylinder(g, c)).collect::<Result<Vec<_>, _>>()?;
            Box::new(move |ctx: &Ctx| {
                let mode = match samples {
                    Some(n) => MixingMode::Mc {
                        samples: *n,
                        seed: ctx.seed,
                    },
                    None => MixingMode::Exact,
                };
                let rep = weak_mixing_order(ctx.rule, ctx.g, &sets, *horizon, mode, ctx.enumeration_cap)?;
                let head = format!("average {:.6} product {:.6} gap {:.3e}", rep.average, rep.product, rep.gap);
                Ok(Outcome::ok(json!(rep), head))
            })
        }
        Experiment::Persistence {
            target,
            program,
            horizon,
            ..
        } => {
            let target = configuration(g, target)?;
            let program = configuration(g, program.as_deref().unwrap_or(""))?;
            Box::new(move |ctx: &Ctx| {
                let rep = persistence_probe(ctx.rule, ctx.g, &program, &target, *horizon, ctx.enumeration_cap)?;
                Ok(match rep {
                    PersistenceReport::Deviation { time, witness } => Outcome::ok(
                        json!({"outcome": "deviation", "time": time, "witness": witness.to_text(ctx.g)}),
                        format!("deviates at t={time}"),
                    ),
                    PersistenceReport::Held { horizon } => Outcome::ok(
                        json!({"outcome": "held", "horizon": horizon}),
                        format!("held to t={horizon} (inconclusive)"),
                    ),
                })
            })
        }
    })
}

/// Runs every stanza in order, handing each record to `emit` as soon as it
/// exists. Stops at the first failing stanza after emitting its record.
pub fn run(
    cfg: &ExperimentConfig,
    base: &Path,
    overrides: &Overrides,
    emit: &mut dyn FnMut(&Value),
) -> Result<(), Failure> {
    let rule = cfg.rule.load(base).map_err(Failure::Config)?;
    let g = &cfg.geometry;
    // validates dimension, alphabet and side lengths up front
    rcabench::engine::Dynamics::new(&rule, g).map_err(|e| Failure::Config(format!("rule: {e}")))?;
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let (enumeration_cap, search_cap) = resolve_caps(&cfg.caps, overrides);
    let jobs = cfg
        .experiments
        .iter()
        .enumerate()
        .map(|(i, e)| prepare(e, g).map_err(|m| Failure::Config(format!("experiment {}: {m}", e.id(i)))))
        .collect::<Result<Vec<_>, _>>()?;
    let ctx = Ctx {
        rule: &rule,
        g,
        seed,
        enumeration_cap,
        search_cap,
    };
    for (i, (exp, job)) in cfg.experiments.iter().zip(jobs).enumerate() {
        let id = exp.id(i);
        let mut record = json!({
            "experiment": id,
            "index": i,
            "kind": exp.kind(),
            "rule": rule,
            "rule_label": rule.label(),
            "geometry": g,
            "inputs": exp,
            "seed": seed,
            "caps": {"enumeration": enumeration_cap, "search": search_cap},
        });
        match job(&ctx) {
            Ok(out) => {
                record["result"] = out.result;
                record["headline"] = json!(out.headline);
                record["status"] = json!(if out.violation.is_some() { "violation" } else { "ok" });
                emit(&record);
                if let Some(v) = out.violation {
                    return Err(Failure::Violation(format!("experiment {id}: {v}")));
                }
            }
            Err(e) => {
                let f = from_error(e);
                record["status"] = json!(f.status());
                record["error"] = json!(f.message());
                record["headline"] = json!(f.message());
                emit(&record);
                return Err(match f {
                    Failure::Config(m) => Failure::Config(format!("experiment {id}: {m}")),
                    Failure::CapExceeded(m) => Failure::CapExceeded(format!("experiment {id}: {m}")),
                    Failure::Violation(m) => Failure::Violation(format!("experiment {id}: {m}")),
                });
            }
        }
    }
    Ok(())
}
