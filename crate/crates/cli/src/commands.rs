//! The five commands behind the binary: verify, nf, reduce, simulate,
//! goldens. Each returns its process exit code; usage problems surface as
//! [`Failure::Usage`] and exit 2, runtime problems exit 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::{json, Value};

use stark_core::error::StarkError;
use stark_core::numeric::{self, tol, IntegratorConfig, Method, Params};
use stark_core::verify::Suite;
use stark_core::xieta::{self, Convention};
use stark_core::{goldens, grammar, normalform, verify, Poly, Rat};

use crate::config::{Failure, FileConfig, RunConfig};
use crate::{Format, GoldensAction, MethodArg, NfArgs, ReduceArgs, SimulateArgs, Stage, VerifyArgs};

/// Usage-class core errors: the input named an impossible level or failed
/// to parse. Everything else is a runtime failure.
fn classify(e: StarkError) -> Failure {
    match e {
        StarkError::BadLevel(_)
        | StarkError::EmptyReducedSpace { .. }
        | StarkError::Parse { .. } => Failure::usage(e),
        other => Failure::runtime(other),
    }
}

fn emit(p: &Poly) -> String {
    grammar::emit(p)
}

/// One-line effective-configuration echo, printed at the top of every
/// text report.
fn echo_line(cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut parts: Vec<String> =
        cfg.entries().into_iter().map(|(k, v)| format!("{k} = {v}")).collect();
    parts.extend(extra.iter().map(|(k, v)| format!("{k} = {v}")));
    format!("config: {}", parts.join(", "))
}

fn config_value(cfg: &RunConfig, extra: &[(&str, String)]) -> Value {
    let mut map = serde_json::Map::new();
    for (k, v) in cfg.entries() {
        map.insert(k.to_string(), json!(v));
    }
    for (k, v) in extra {
        map.insert(k.to_string(), json!(v));
    }
    Value::Object(map)
}

fn print_json(v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::runtime(anyhow!(e)))?;
    println!("{text}");
    Ok(())
}

pub fn verify_cmd(args: VerifyArgs, file: &FileConfig) -> Result<i32, Failure> {
    let suite_sel = crate::config::resolve(args.suite, file, "suite", "all".to_string())?;
    let format = crate::config::resolve_enum(args.format, file, "format", Format::Text)?;
    let out = match args.out {
        Some(p) => Some(p),
        None => file.get("out").map(PathBuf::from),
    };

    let suites = Suite::parse_list(&suite_sel).map_err(Failure::usage)?;
    let mut rep = verify::run(&suites);
    rep.set_config("command", "verify");
    if let Some(p) = &out {
        rep.set_config("out", p.display().to_string());
    }

    let jsontext = rep.to_json().map_err(classify)?;
    if let Some(p) = &out {
        std::fs::write(p, &jsontext)
            .with_context(|| format!("writing report to {}", p.display()))
            .map_err(Failure::runtime)?;
    }
    match format {
        Format::Text => print!("{rep}"),
        Format::Json => println!("{jsontext}"),
    }
    Ok(rep.exit_code())
}

pub fn nf_cmd(args: NfArgs, file: &FileConfig) -> Result<i32, Failure> {
    let order = crate::config::resolve(args.order, file, "order", 2u8)?;
    if !(1..=2).contains(&order) {
        return Err(Failure::usage(anyhow!("--order takes 1 or 2")));
    }
    let stage = crate::config::resolve_enum(args.stage, file, "stage", Stage::First)?;
    let format = crate::config::resolve_enum(args.format, file, "format", Format::Text)?;
    let audit = args.audit || file.get("audit") == Some("true");
    if stage == Stage::Second && order != 2 {
        return Err(Failure::usage(anyhow!("the second stage rests on the order-2 form; use --order 2")));
    }

    let cfg = RunConfig::for_command("nf");
    let stage_name = if stage == Stage::First { "first" } else { "second" };
    let extra = [
        ("order", order.to_string()),
        ("stage", stage_name.to_string()),
        ("audit", audit.to_string()),
    ];

    let mut text = String::new();
    let mut body = serde_json::Map::new();
    writeln!(text, "{}", echo_line(&cfg, &extra)).unwrap();

    let first = normalform::first_stage();
    if order == 1 {
        writeln!(text, "order-1 normal form: {}", emit(&first.nf1)).unwrap();
        writeln!(text, "on the orbit cross-section: {}", emit(&first.nf1_on_orbit)).unwrap();
        body.insert("normal_form".into(), json!(emit(&first.nf1)));
        body.insert("on_orbit".into(), json!(emit(&first.nf1_on_orbit)));
        if audit {
            writeln!(text, "oscillation mean: {}", emit(&first.mean)).unwrap();
            writeln!(text, "mean certificate: {}", first.mean_chain.weakest()).unwrap();
            writeln!(text, "generator: {}", emit(&first.generator)).unwrap();
            let gen_match = first.generator.sub(&first.reference_generator).is_zero();
            if gen_match {
                writeln!(text, "generator display: matches").unwrap();
            } else {
                writeln!(text, "generator display: DIFFERS: {}", emit(&first.reference_generator))
                    .unwrap();
            }
            let mut rows = Vec::new();
            writeln!(text, "derivative audit:").unwrap();
            for d in normalform::derivative_audits() {
                let verdict = if d.matches_exactly {
                    "matches the printed form".to_string()
                } else {
                    format!(
                        "printed form differs (orbit-space agreement: {}): {}",
                        d.matches_on_orbit,
                        emit(&d.reference)
                    )
                };
                writeln!(text, "  d/dt under Y_{}: {}", d.flow_var, verdict).unwrap();
                rows.push(json!({
                    "flow": d.flow_var,
                    "computed": emit(&d.computed),
                    "printed": emit(&d.reference),
                    "matches_exactly": d.matches_exactly,
                    "matches_on_orbit": d.matches_on_orbit,
                }));
            }
            body.insert("mean".into(), json!(emit(&first.mean)));
            body.insert("mean_certificate".into(), json!(first.mean_chain.weakest().to_string()));
            body.insert("generator".into(), json!(emit(&first.generator)));
            body.insert("generator_matches_display".into(), json!(gen_match));
            body.insert("derivatives".into(), Value::Array(rows));
        }
    } else {
        let second = normalform::second_order();
        match stage {
            Stage::First => {
                writeln!(text, "order-2 normal form: {}", emit(&second.nf2)).unwrap();
                writeln!(text, "printed form: {}", emit(&second.reference_nf2)).unwrap();
                body.insert("normal_form".into(), json!(emit(&second.nf2)));
                body.insert("printed_form".into(), json!(emit(&second.reference_nf2)));
                if audit {
                    let mut rows = Vec::new();
                    writeln!(text, "term audit:").unwrap();
                    for t in &second.terms {
                        let verdict =
                            if t.matches_on_orbit { "agrees on the orbit space" } else { "DIFFERS" };
                        writeln!(text, "  term {}: {}", t.label, verdict).unwrap();
                        writeln!(text, "    average: {}", emit(&t.average)).unwrap();
                        writeln!(text, "    printed: {}", emit(&t.reference)).unwrap();
                        rows.push(json!({
                            "label": t.label,
                            "average": emit(&t.average),
                            "printed": emit(&t.reference),
                            "matches_on_orbit": t.matches_on_orbit,
                        }));
                    }
                    writeln!(text, "  total: {}", emit(&second.total)).unwrap();
                    writeln!(text, "  printed total: {}", emit(&second.reference_total)).unwrap();
                    body.insert("terms".into(), Value::Array(rows));
                    body.insert("total".into(), json!(emit(&second.total)));
                    body.insert("printed_total".into(), json!(emit(&second.reference_total)));
                }
            }
            Stage::Second => {
                let vertical = normalform::second_stage();
                writeln!(text, "restricted order-1 form: {}", emit(&vertical.restricted)).unwrap();
                writeln!(text, "on the energy level: {}", emit(&vertical.level_display)).unwrap();
                writeln!(text, "dropped constant: {}", emit(&vertical.dropped_constant)).unwrap();
                writeln!(text, "rescaled hamiltonian: {}", emit(&vertical.rescaled)).unwrap();
                writeln!(text, "on the twin spheres: {}", emit(&vertical.on_sphere)).unwrap();
                body.insert("restricted".into(), json!(emit(&vertical.restricted)));
                body.insert("on_level".into(), json!(emit(&vertical.level_display)));
                body.insert("dropped_constant".into(), json!(emit(&vertical.dropped_constant)));
                body.insert("rescaled".into(), json!(emit(&vertical.rescaled)));
                body.insert("on_sphere".into(), json!(emit(&vertical.on_sphere)));
                if audit {
                    writeln!(text, "level certificate: {}", vertical.level_chain.weakest()).unwrap();
                    writeln!(text, "sphere certificate: {}", vertical.sphere_chain.weakest())
                        .unwrap();
                    writeln!(text, "vertical average input: {}", emit(&vertical.t_poly)).unwrap();
                    writeln!(text, "vertical average: {}", emit(&vertical.t_avg)).unwrap();
                    writeln!(text, "printed sphere form: {}", emit(&vertical.reference_on_sphere))
                        .unwrap();
                    let mut rows = Vec::new();
                    writeln!(text, "sphere identities:").unwrap();
                    for id in xieta::sphere_identities() {
                        let verdict = if id.holds {
                            "holds".to_string()
                        } else {
                            format!("defect: {}", emit(&id.defect))
                        };
                        writeln!(text, "  {}: {verdict}", id.label).unwrap();
                        rows.push(json!({
                            "label": id.label,
                            "holds": id.holds,
                            "defect": emit(&id.defect),
                        }));
                    }
                    body.insert(
                        "level_certificate".into(),
                        json!(vertical.level_chain.weakest().to_string()),
                    );
                    body.insert(
                        "sphere_certificate".into(),
                        json!(vertical.sphere_chain.weakest().to_string()),
                    );
                    body.insert("vertical_average_input".into(), json!(emit(&vertical.t_poly)));
                    body.insert("vertical_average".into(), json!(emit(&vertical.t_avg)));
                    body.insert(
                        "printed_sphere_form".into(),
                        json!(emit(&vertical.reference_on_sphere)),
                    );
                    body.insert("sphere_identities".into(), Value::Array(rows));
                }
            }
        }
    }

    match format {
        Format::Text => print!("{text}"),
        Format::Json => {
            body.insert("config".into(), config_value(&cfg, &extra));
            body.insert("order".into(), json!(order));
            body.insert("stage".into(), json!(stage_name));
            print_json(&Value::Object(body))?;
        }
    }
    Ok(0)
}

fn parse_rat(name: &str, raw: &str) -> Result<Rat, Failure> {
    raw.parse().map_err(|e| {
        Failure::usage(anyhow!("--{name}: `{raw}` is not an exact rational (p/q or integer): {e}"))
    })
}

fn set_levels(p: &Poly, h: &Rat, k: &Rat) -> Result<Poly, Failure> {
    p.set_var("h", h).and_then(|q| q.set_var("k", k)).map_err(classify)
}

pub fn reduce_cmd(args: ReduceArgs, file: &FileConfig) -> Result<i32, Failure> {
    let h_raw = crate::config::resolve(args.h, file, "h", String::new())?;
    let k_raw = crate::config::resolve(args.k, file, "k", String::new())?;
    if h_raw.is_empty() || k_raw.is_empty() {
        return Err(Failure::usage(anyhow!("reduce needs both --h and --k")));
    }
    let format = crate::config::resolve_enum(args.format, file, "format", Format::Text)?;
    let h = parse_rat("h", &h_raw)?;
    let k = parse_rat("k", &k_raw)?;

    let leaf = xieta::build_reduced_space(&h, &k).map_err(classify)?;
    let model = xieta::reduced_model(Convention::FlowDisplay);
    let engine_ham = set_levels(&model.hamiltonian, &h, &k)?;
    let engine_const = set_levels(&model.dropped_constant, &h, &k)?;
    let reference_ham = set_levels(&model.reference_hamiltonian, &h, &k)?;
    let reference_const = set_levels(&model.reference_dropped, &h, &k)?;

    let mut cfg = RunConfig::for_command("reduce");
    cfg.h = h.to_string();
    cfg.k = k.to_string();
    let extra = [("format", format!("{:?}", format).to_lowercase())];

    let mut text = String::new();
    writeln!(text, "{}", echo_line(&cfg, &extra)).unwrap();
    writeln!(text, "leaf kind: {}", leaf.kind).unwrap();
    writeln!(text, "vertical range: |sigma6| <= {}", leaf.sigma6_bound).unwrap();
    writeln!(text, "engine hamiltonian: {}", emit(&engine_ham)).unwrap();
    writeln!(text, "engine constant part: {}", emit(&engine_const)).unwrap();
    writeln!(text, "reference hamiltonian: {}", emit(&reference_ham)).unwrap();
    writeln!(text, "reference constant part: {}", emit(&reference_const)).unwrap();
    if !leaf.singular_points.is_empty() {
        let pts: Vec<String> = leaf
            .singular_points
            .iter()
            .map(|p| format!("({}, {}, {})", p[0], p[1], p[2]))
            .collect();
        writeln!(text, "singular points (sigma3, sigma4, sigma6): {}", pts.join(", ")).unwrap();
    }
    if args.emit_space {
        writeln!(text, "reduced space: {}", emit(&leaf.defining)).unwrap();
    }
    let mut eqs = Vec::new();
    if args.emit_eom {
        writeln!(text, "equations of motion:").unwrap();
        for (name, rhs) in &model.equations {
            let pinned = set_levels(rhs, &h, &k)?;
            writeln!(text, "  d/dt {name} = {}", emit(&pinned)).unwrap();
            eqs.push((name.to_string(), emit(&pinned)));
        }
    }

    match format {
        Format::Text => print!("{text}"),
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert("config".into(), config_value(&cfg, &extra));
            body.insert("h".into(), json!(h.to_string()));
            body.insert("k".into(), json!(k.to_string()));
            body.insert("kind".into(), json!(leaf.kind.to_string()));
            body.insert("sigma6_bound".into(), json!(leaf.sigma6_bound.to_string()));
            body.insert(
                "singular_points".into(),
                json!(leaf
                    .singular_points
                    .iter()
                    .map(|p| [p[0].to_string(), p[1].to_string(), p[2].to_string()])
                    .collect::<Vec<_>>()),
            );
            body.insert(
                "engine".into(),
                json!({"hamiltonian": emit(&engine_ham), "constant": emit(&engine_const)}),
            );
            body.insert(
                "reference".into(),
                json!({"hamiltonian": emit(&reference_ham), "constant": emit(&reference_const)}),
            );
            if args.emit_space {
                body.insert("space".into(), json!(emit(&leaf.defining)));
            }
            if args.emit_eom {
                let mut m = serde_json::Map::new();
                for (name, rhs) in eqs {
                    m.insert(name, json!(rhs));
                }
                body.insert("equations".into(), Value::Object(m));
            }
            print_json(&Value::Object(body))?;
        }
    }
    Ok(0)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A uniform draw in [0, 1) with 53 random bits.
fn unit(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::runtime)
}

/// Render a float for the series and summaries. `Display` on f64 is the
/// shortest digit string that parses back to the same value, so reruns of
/// the same configuration are byte-identical.
fn num(v: f64) -> String {
    format!("{v}")
}

struct DriftLine {
    label: &'static str,
    value: f64,
    bound: f64,
}

impl DriftLine {
    fn ok(&self) -> bool {
        self.value <= self.bound
    }
}

pub fn simulate_cmd(args: SimulateArgs, file: &FileConfig) -> Result<i32, Failure> {
    let eps = crate::config::resolve(args.eps, file, "eps", 1e-3)?;
    let beta = crate::config::resolve(args.beta, file, "beta", 1.0)?;
    let h = crate::config::resolve(args.h, file, "h", 1.0)?;
    let tmax = crate::config::resolve(args.tmax, file, "tmax", 100.0)?;
    let method_arg = crate::config::resolve_enum(args.method, file, "method", MethodArg::Gauss)?;
    let seed = crate::config::resolve(args.seed, file, "seed", 11u64)?;
    if !args.reduced && args.k.is_some() {
        return Err(Failure::usage(anyhow!("--k applies to reduced runs; add --reduced")));
    }
    if args.reduced && args.scaling {
        return Err(Failure::usage(anyhow!("the scaling study runs on the full flow; drop --reduced")));
    }
    let k = if args.reduced { crate::config::resolve(args.k, file, "k", 0.0)? } else { 0.0 };
    if !(tmax > 0.0 && tmax.is_finite()) {
        return Err(Failure::usage(anyhow!("--tmax must be positive and finite")));
    }

    let method = match method_arg {
        MethodArg::Gauss => Method::symmetric(),
        MethodArg::Dopri5 => Method::adaptive(),
    };
    let method_name = match method_arg {
        MethodArg::Gauss => "gauss",
        MethodArg::Dopri5 => "dopri5",
    };
    let params = Params::new(eps, beta, h, k).map_err(classify)?;
    let integ = IntegratorConfig { method, t_max: tmax };

    let dir = match args.out {
        Some(p) => p,
        None => file.get("out").map(PathBuf::from).unwrap_or_else(|| {
            PathBuf::from(format!(
                "stark-run-{}-seed{seed}",
                if args.reduced { "reduced" } else { "full" }
            ))
        }),
    };
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::runtime)?;

    let mut cfg = RunConfig::for_command("simulate");
    cfg.eps = num(eps);
    cfg.beta = num(beta);
    cfg.h = num(h);
    if args.reduced {
        cfg.k = num(k);
    }
    cfg.out = dir.display().to_string();
    cfg.seed = seed.to_string();
    let extra = [
        ("tmax", num(tmax)),
        ("method", method_name.to_string()),
        ("reduced", args.reduced.to_string()),
    ];

    // The manifest doubles as a configuration file; feeding it back through
    // --config reproduces the run.
    let mut manifest = cfg.canonical_text()?;
    manifest.push_str(&format!("tmax = {}\nmethod = {method_name}\n", num(tmax)));
    write_file(&dir.join("manifest.txt"), &manifest)?;

    let mut csv = String::new();
    let mut drifts: Vec<DriftLine> = Vec::new();
    let mut summary = serde_json::Map::new();
    summary.insert("schema".into(), json!("stark-run/1"));
    summary.insert("config".into(), config_value(&cfg, &extra));

    let traj;
    if args.reduced {
        let mut rng = seed;
        let margin = params.h - k.abs();
        let sigma6 = (2.0 * unit(&mut rng) - 1.0) * 0.85 * margin;
        let phase_xi = 2.0 * tol::PI * unit(&mut rng);
        let phase_eta = 2.0 * tol::PI * unit(&mut rng);
        let (xi0, eta0) =
            numeric::reduced_state(&params, sigma6, phase_xi, phase_eta).map_err(classify)?;
        traj = numeric::integrate_reduced(&xi0, &eta0, &params, &integ).map_err(Failure::runtime)?;

        let cols = ["Hred", "sigma5", "sigma6", "xi_sphere", "eta_sphere", "relation"];
        csv.push_str("t,xi1,xi2,xi3,eta1,eta2,eta3,");
        csv.push_str(&cols.join(","));
        csv.push('\n');
        for (i, t) in traj.times.iter().enumerate() {
            let mut row = vec![num(*t)];
            row.extend(traj.states[i].iter().map(|v| num(*v)));
            row.extend(cols.iter().map(|c| num(traj.log(c)[i])));
            csv.push_str(&row.join(","));
            csv.push('\n');
        }

        drifts.push(DriftLine {
            label: "reduced energy drift (relative)",
            value: traj.relative_drift("Hred"),
            bound: tol::REDUCED_DRIFT,
        });
        drifts.push(DriftLine {
            label: "sphere casimir drift",
            value: traj.drift("xi_sphere").max(traj.drift("eta_sphere")),
            bound: tol::REDUCED_DRIFT,
        });
        drifts.push(DriftLine {
            label: "defining-relation residual",
            value: traj.max_abs("relation"),
            bound: tol::REDUCED_DRIFT,
        });
        summary.insert(
            "initial".into(),
            json!({"sigma6": sigma6, "phase_xi": phase_xi, "phase_eta": phase_eta}),
        );
    } else {
        let level = Rat::from_float(h)
            .filter(|r| r > &Rat::from_integer(0.into()))
            .ok_or_else(|| Failure::usage(anyhow!("--h must be a positive finite level")))?;
        let (x0, _) = numeric::sampled_level_state(seed, &level).map_err(classify)?;
        traj = numeric::integrate_full(&x0, &params, &integ).map_err(Failure::runtime)?;

        let cols = ["H", "H2", "Xi", "K3", "L3"];
        csv.push_str("t,q1,q2,q3,q4,p1,p2,p3,p4,");
        csv.push_str(&cols.join(","));
        csv.push('\n');
        for (i, t) in traj.times.iter().enumerate() {
            let mut row = vec![num(*t)];
            row.extend(traj.states[i].iter().map(|v| num(*v)));
            row.extend(cols.iter().map(|c| num(traj.log(c)[i])));
            csv.push_str(&row.join(","));
            csv.push('\n');
        }

        drifts.push(DriftLine {
            label: "energy drift (relative)",
            value: traj.relative_drift("H"),
            bound: tol::ENERGY_DRIFT,
        });
        drifts.push(DriftLine {
            label: "constraint residual |Xi|",
            value: traj.max_abs("Xi"),
            bound: tol::XI_DRIFT,
        });
    }
    write_file(&dir.join("series.csv"), &csv)?;

    let mut scaling_value = Value::Null;
    let mut scaling_line = None;
    if args.scaling {
        if !(eps > 0.0) {
            return Err(Failure::usage(anyhow!("the scaling study needs --eps > 0")));
        }
        let ladder = [4.0 * eps, 2.0 * eps, eps];
        let x0 = traj.states[0].clone();
        let study = numeric::compare_normalform(&ladder, 1.0, beta, &x0, &Method::adaptive())
            .map_err(Failure::runtime)?;
        let last = study.ratios.last().copied().unwrap_or(f64::NAN);
        scaling_line = Some(format!(
            "scaling ratios: {} (window {}..{})",
            study.ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", "),
            tol::RATIO_LOW,
            tol::RATIO_HIGH,
        ));
        drifts.push(DriftLine {
            label: "scaling ratio shortfall",
            value: if last >= tol::RATIO_LOW && last <= tol::RATIO_HIGH { 0.0 } else { 1.0 },
            bound: 0.5,
        });
        scaling_value = json!({
            "slow_time": study.slow_time,
            "eps_ladder": study.eps_ladder,
            "horizons": study.horizons,
            "deviations": study.deviations,
            "ratios": study.ratios,
        });
    }

    let mut drift_map = serde_json::Map::new();
    let mut ok_map = serde_json::Map::new();
    for d in &drifts {
        let key = d.label.replace(' ', "_").replace(['(', ')', '|'], "");
        drift_map.insert(key.clone(), json!(d.value));
        ok_map.insert(key, json!(d.ok()));
    }
    summary.insert("samples".into(), json!(traj.times.len()));
    summary.insert(
        "steps".into(),
        json!({"accepted": traj.steps_accepted, "rejected": traj.steps_rejected}),
    );
    summary.insert("drifts".into(), Value::Object(drift_map));
    summary.insert("within_tolerance".into(), Value::Object(ok_map));
    summary.insert("final_state".into(), json!(traj.last_state()));
    summary.insert("scaling".into(), scaling_value);
    let summary_text = serde_json::to_string_pretty(&Value::Object(summary))
        .map_err(|e| Failure::runtime(anyhow!(e)))?;
    write_file(&dir.join("summary.json"), &format!("{summary_text}\n"))?;

    println!("{}", echo_line(&cfg, &extra));
    for name in ["manifest.txt", "series.csv", "summary.json"] {
        println!("wrote {}", dir.join(name).display());
    }
    let mut failed = false;
    for d in &drifts {
        if d.label.starts_with("scaling") {
            continue;
        }
        let verdict = if d.ok() { "within" } else { "EXCEEDS" };
        println!("{}: {:.3e} {verdict} {:.0e}", d.label, d.value, d.bound);
        failed |= !d.ok();
    }
    if let Some(line) = scaling_line {
        println!("{line}");
        failed |= drifts.iter().any(|d| d.label.starts_with("scaling") && !d.ok());
    }
    Ok(if failed { 1 } else { 0 })
}

pub fn goldens_cmd(action: GoldensAction, file: &FileConfig) -> Result<i32, Failure> {
    let resolve_dir = |flag: Option<PathBuf>| -> PathBuf {
        flag.or_else(|| file.get("dir").map(PathBuf::from)).unwrap_or_else(goldens::default_dir)
    };
    match action {
        GoldensAction::Emit { dir } => {
            let dir = resolve_dir(dir);
            let mut cfg = RunConfig::for_command("goldens");
            cfg.out = dir.display().to_string();
            println!("{}", echo_line(&cfg, &[("action", "emit".to_string())]));
            let written = goldens::emit(&dir).map_err(classify)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        GoldensAction::Check { dir } => {
            let dir = resolve_dir(dir);
            let mut cfg = RunConfig::for_command("goldens");
            cfg.out = dir.display().to_string();
            println!("{}", echo_line(&cfg, &[("action", "check".to_string())]));
            let checks = goldens::check(&dir).map_err(classify)?;
            let mut failed = false;
            for c in &checks {
                println!("{c}");
                failed |= !c.ok();
            }
            Ok(if failed { 1 } else { 0 })
        }
    }
}
