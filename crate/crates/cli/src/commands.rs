use std::path::PathBuf;

use fiocalc_core::acceptance;
use fiocalc_core::classes::{validate_amplitude, validate_phase, validate_symbol, AmplitudeSpec, DecayFlags, PhaseProfile, PhaseSpec};
use fiocalc_core::composer::{psido_reduce, pt_expand, tp_expand, tp_reduce, ComposeError, ExpandOptions, ExpansionKind, ExpansionSeries};
use fiocalc_core::gridquant::{
    assemble_amplitude_op, fio_op, opnorm, psido_op, th25_bound, weight_op, weight_tilde_op,
    Grid, GridError, GridField, LinearOp,
};
use fiocalc_core::oscoracle::{eval_c_psido, eval_c_pt, eval_c_tp, eval_c_tp_reduce, eval_t, OracleError, OracleValue};
use fiocalc_core::smoothlab::{commutator_residual, gaussian_family, seeded_gaussians, smoothing_ratio, SmoothError};
use fiocalc_core::{parse, CExpr, Point, Var};
use serde_json::{json, Value};

use crate::config::{load_object, ObjectKind, OperatorKind, RunConfig};
use crate::output::{num, Table};
use crate::Failure;

/// What a subcommand produced: the artifact body, its CSV view and the
/// exit status it implies.
pub struct Emitted {
    pub kind: &'static str,
    pub result: Value,
    pub table: Table,
    pub status: i32,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("artifact types serialize")
}

fn grid_err(e: GridError) -> Failure {
    match e {
        GridError::NonFinite(m) => Failure::NonConvergence(m),
        GridError::BadGrid(_) | GridError::SizeCap { .. } | GridError::Dimension { .. } | GridError::Unbound(_) => {
            Failure::Config(e.to_string())
        }
        other => Failure::Validation(other.to_string()),
    }
}

fn oracle_err(e: OracleError) -> Failure {
    match e {
        OracleError::NonFinite { .. } => Failure::NonConvergence(e.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

fn compose_err(e: ComposeError) -> Failure {
    match e {
        ComposeError::Validation { .. } | ComposeError::FlagViolation(_) => Failure::Validation(e.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

fn smooth_err(e: SmoothError) -> Failure {
    match e {
        SmoothError::Grid(g) => grid_err(g),
        SmoothError::Boundary { .. } | SmoothError::Precondition(_) => Failure::Validation(e.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

fn c(v: num_complex::Complex64) -> [f64; 2] {
    [v.re, v.im]
}

pub fn check(cfg: &RunConfig, specs: &[PathBuf]) -> Result<Emitted, Failure> {
    let v = &cfg.validate;
    let mut items = Vec::new();
    let mut objects = Vec::new();
    for path in specs {
        let o = load_object(path)?;
        let kind = o.kind.ok_or_else(|| Failure::Config(format!("{}: spec file needs a kind", path.display())))?;
        objects.push((path.display().to_string(), kind, o));
    }
    for (name, slot, kind) in [
        ("amplitude", &cfg.amplitude, ObjectKind::Amplitude),
        ("symbol", &cfg.symbol, ObjectKind::Symbol),
        ("phase", &cfg.phase, ObjectKind::Phase),
        ("dispersion", &cfg.dispersion, ObjectKind::Dispersion),
    ] {
        if let Some(crate::config::ObjectRef::Inline(o)) = slot {
            objects.push((format!("[{name}]"), kind, o.clone()));
        }
    }
    if objects.is_empty() {
        return Err(Failure::Config("nothing to check: pass --spec or a config with object sections".into()));
    }
    let mut table = Table::new(&["source", "kind", "label", "sup", "passed"]);
    let mut all_pass = true;
    for (source, kind, o) in objects {
        let (passed, report) = match kind {
            ObjectKind::Amplitude => {
                let r = validate_amplitude(&o.amplitude()?, v.max_order, v.cap, &v.sample).map_err(|e| Failure::Config(e.to_string()))?;
                (r.passed, to_value(&r))
            }
            ObjectKind::Symbol => {
                let r = validate_symbol(&o.symbol()?, v.max_order, v.cap, &v.sample).map_err(|e| Failure::Config(e.to_string()))?;
                (r.passed, to_value(&r))
            }
            ObjectKind::Phase => {
                let r = validate_phase(&o.phase()?, v.max_order, v.cap, &v.sample).map_err(|e| Failure::Config(e.to_string()))?;
                (r.passed, to_value(&r))
            }
            ObjectKind::Dispersion => {
                let d = o.dispersion()?;
                let g = match cfg.grid {
                    Some(_) => cfg.grid()?,
                    None => Grid::new(d.dim, if d.dim == 1 { 256 } else { 64 }, 32.0).map_err(grid_err)?,
                };
                let r = d.validate(&g, v.max_order, v.cap, &v.sample).map_err(smooth_err)?;
                (r.passed, to_value(&r))
            }
        };
        if let Some(entries) = report.get("entries").and_then(Value::as_array) {
            for e in entries {
                table.push(vec![
                    source.clone(),
                    format!("{kind:?}").to_lowercase(),
                    e["label"].as_str().unwrap_or_default().to_string(),
                    e["sup"].to_string(),
                    e["passed"].to_string(),
                ]);
            }
        } else {
            table.push(vec![source.clone(), format!("{kind:?}").to_lowercase(), "summary".into(), String::new(), passed.to_string()]);
        }
        all_pass &= passed;
        items.push(json!({ "source": source, "kind": kind, "report": report }));
    }
    let result = if items.len() == 1 { items[0]["report"].clone() } else { Value::Array(items) };
    Ok(Emitted { kind: "check", result, table, status: if all_pass { 0 } else { 3 } })
}

fn series(cfg: &RunConfig, kind: ExpansionKind, order: usize, validate: bool) -> Result<ExpansionSeries, Failure> {
    let opts = ExpandOptions {
        validate,
        max_order: cfg.validate.max_order,
        cap: cfg.validate.cap,
        plan: cfg.validate.sample.clone(),
    };
    let s = match kind {
        ExpansionKind::Tp => tp_expand(&cfg.amplitude()?, &cfg.symbol()?, order, &opts),
        ExpansionKind::Pt => pt_expand(&cfg.amplitude()?, &cfg.symbol()?, &cfg.phase()?, order, &opts),
        ExpansionKind::TpReduce => tp_reduce(&cfg.amplitude()?, &cfg.symbol()?, &cfg.phase()?, order, &opts),
        ExpansionKind::PsdoReduce => psido_reduce(&cfg.amplitude()?, order, &opts),
    };
    s.map_err(compose_err)
}

pub fn expand(cfg: &RunConfig, kind: Option<String>, order: Option<usize>) -> Result<Emitted, Failure> {
    let ec = cfg.expand.clone();
    let kind_text = kind
        .or_else(|| ec.as_ref().map(|e| e.kind.clone()))
        .ok_or_else(|| Failure::Config("expansion kind not given (--kind or [expand].kind)".into()))?;
    let kind: ExpansionKind = kind_text.parse().map_err(|e: ComposeError| Failure::Config(e.to_string()))?;
    let order = order.or(ec.as_ref().map(|e| e.order)).unwrap_or(3);
    let s = series(cfg, kind, order, ec.map_or(true, |e| e.validate))?;
    let mut table = Table::new(&["order", "index", "coefficient", "coefficient_re", "coefficient_im", "body"]);
    for t in &s.terms {
        let v = t.coefficient.value();
        table.push(vec![
            t.order().to_string(),
            t.index.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(""),
            t.coefficient.to_string(),
            num(v.re),
            num(v.im),
            t.body.to_string(),
        ]);
    }
    Ok(Emitted { kind: "expand", result: to_value(&s), table, status: 0 })
}

pub fn oracle(cfg: &RunConfig) -> Result<Emitted, Failure> {
    let oc = cfg.oracle.clone().ok_or_else(|| Failure::Config("missing [oracle] section".into()))?;
    let plan = &cfg.plan;
    plan.validate().map_err(oracle_err)?;
    let (arity, kind) = match oc.target.as_str() {
        "c_tp" => (3, Some(ExpansionKind::Tp)),
        "c_pt" => (3, Some(ExpansionKind::Pt)),
        "c_tp_reduce" => (2, Some(ExpansionKind::TpReduce)),
        "c_psido" => (2, Some(ExpansionKind::PsdoReduce)),
        "t" => (1, None),
        other => return Err(Failure::Config(format!("unknown oracle target {other:?}"))),
    };
    let compare = match (oc.compare_order, kind) {
        (Some(n), Some(k)) => Some((n, series(cfg, k, n, false)?.compiled())),
        (Some(_), None) => return Err(Failure::Config("compare_order has no expansion for target t".into())),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut table = Table::new(&["x", "z", "xi", "re", "im", "spread", "converged", "partial_sum_errors"]);
    let mut all_converged = true;
    for pt in &oc.points {
        if pt.len() != arity {
            return Err(Failure::Config(format!("target {} takes points of length {arity}", oc.target)));
        }
        let (x, z, xi) = match arity {
            3 => (pt[0], pt[1], pt[2]),
            2 => (pt[0], 0.0, pt[1]),
            _ => (pt[0], 0.0, 0.0),
        };
        let v: OracleValue = match oc.target.as_str() {
            "c_tp" => eval_c_tp(&cfg.amplitude()?, &cfg.symbol()?, x, z, xi, plan),
            "c_pt" => eval_c_pt(&cfg.amplitude()?, &cfg.symbol()?, &cfg.phase()?, x, z, xi, plan),
            "c_tp_reduce" => {
                let p = cfg.symbol.as_ref().map(|_| cfg.symbol()).transpose()?;
                eval_c_tp_reduce(&cfg.amplitude()?, p.as_ref(), &cfg.phase()?, x, xi, plan)
            }
            "c_psido" => eval_c_psido(&cfg.amplitude()?, x, xi, plan),
            _ => {
                let u = oc.u.as_deref().ok_or_else(|| Failure::Config("target t needs u".into()))?;
                let u = parse(u, 1).map_err(|e| Failure::Config(e.to_string()))?;
                eval_t(&cfg.amplitude()?, &cfg.phase()?, &u, x, plan)
            }
        }
        .map_err(oracle_err)?;
        all_converged &= v.converged;
        let errs: Vec<f64> = compare
            .as_ref()
            .map(|(n, cs)| {
                let at = Point::new().with(Var::x(0), x).with(Var::z(0), z).with(Var::xi(0), xi);
                cs.partial_sums(&at, *n).iter().map(|s| (s - v.value).norm()).collect()
            })
            .unwrap_or_default();
        table.push(vec![
            num(x),
            num(z),
            num(xi),
            num(v.value.re),
            num(v.value.im),
            num(v.spread),
            v.converged.to_string(),
            errs.iter().map(|e| num(*e)).collect::<Vec<_>>().join(";"),
        ]);
        rows.push(json!({ "point": pt, "oracle": v, "partial_sum_errors": errs }));
    }
    let result = json!({ "target": oc.target, "values": rows });
    Ok(Emitted { kind: "oracle", result, table, status: if all_converged { 0 } else { 4 } })
}

fn inputs(cfg: &RunConfig, g: Grid, expr: Option<&str>, count: usize) -> Result<Vec<(String, GridField)>, Failure> {
    match expr {
        Some(text) => {
            let e = CExpr::real(parse(text, g.dim).map_err(|e| Failure::Config(e.to_string()))?);
            Ok(vec![(text.to_string(), GridField::from_expr(g, &e).map_err(grid_err)?)])
        }
        None => Ok(seeded_gaussians(&g, count, cfg.seed)
            .into_iter()
            .enumerate()
            .map(|(i, u)| (format!("gaussian[{i}]"), u))
            .collect()),
    }
}

fn build_op(cfg: &RunConfig, kind: OperatorKind, g: Grid) -> Result<(LinearOp, Option<AmplitudeSpec>), Failure> {
    match kind {
        OperatorKind::Psido => Ok((psido_op(&CExpr::real(cfg.symbol()?.expr), g).map_err(grid_err)?, None)),
        OperatorKind::Fio => Ok((fio_op(&CExpr::real(cfg.symbol()?.expr), &cfg.phase()?, g).map_err(grid_err)?, None)),
        OperatorKind::Amplitude => {
            let a = cfg.amplitude()?;
            Ok((assemble_amplitude_op(&a, &cfg.phase()?, g).map_err(grid_err)?, Some(a)))
        }
    }
}

pub fn quantize(cfg: &RunConfig) -> Result<Emitted, Failure> {
    let qc = cfg.quantize.clone().ok_or_else(|| Failure::Config("missing [quantize] section".into()))?;
    let g = cfg.grid()?;
    let (op, _) = build_op(cfg, qc.operator, g)?;
    let reference = if qc.compare_dense {
        // The same operator assembled from its kernel with the symbol as an
        // (x, ξ) amplitude.
        let (sym, phi) = match qc.operator {
            OperatorKind::Psido => {
                let text = (1..=g.dim).map(|i| format!("x{i}*xi{i}")).collect::<Vec<_>>().join(" + ");
                (cfg.symbol()?, PhaseSpec::new(parse(&text, g.dim).expect("linear phase"), g.dim, PhaseProfile::L2))
            }
            OperatorKind::Fio => (cfg.symbol()?, Ok(cfg.phase()?)),
            OperatorKind::Amplitude => return Err(Failure::Config("compare_dense applies to psido and fio operators".into())),
        };
        let phi = phi.map_err(|e| Failure::Config(e.to_string()))?;
        let a = AmplitudeSpec::new(sym.expr, sym.dim, Default::default(), DecayFlags::NONE).map_err(|e| Failure::Config(e.to_string()))?;
        Some(assemble_amplitude_op(&a, &phi, g).map_err(grid_err)?)
    } else {
        None
    };
    let mut table = Table::new(&["datum", "index", "x1", "x2", "re", "im"]);
    let mut out = Vec::new();
    for (d, (label, u)) in inputs(cfg, g, qc.input.as_deref(), qc.count)?.into_iter().enumerate() {
        let v = op.apply(&u).map_err(grid_err)?;
        let dense_diff = match &reference {
            Some(m) => Some(m.apply(&u).map_err(grid_err)?.max_abs_diff(&v).map_err(grid_err)?),
            None => None,
        };
        for (j, z) in v.values().iter().enumerate() {
            let x = g.coords(j);
            table.push(vec![d.to_string(), j.to_string(), num(x[0]), num(x[1]), num(z.re), num(z.im)]);
        }
        out.push(json!({
            "input": label,
            "input_norm": u.norm_l2(),
            "output_norm": v.norm_l2(),
            "dense_max_abs_diff": dense_diff,
            "output": v.values().iter().map(|z| c(*z)).collect::<Vec<_>>(),
        }));
    }
    let result = json!({ "operator": op.label(), "grid": g, "outputs": out });
    Ok(Emitted { kind: "quantize", result, table, status: 0 })
}

pub fn opnorm_cmd(cfg: &RunConfig) -> Result<Emitted, Failure> {
    let oc = cfg.opnorm.clone().ok_or_else(|| Failure::Config("missing [opnorm] section".into()))?;
    let base = cfg.grid()?;
    let sizes = if oc.points.is_empty() { vec![base.points] } else { oc.points.clone() };
    let mut table = Table::new(&["points", "half_width", "norm", "iters", "converged", "rel_change", "th25_bound", "ratio"]);
    let mut rows = Vec::new();
    let mut status = 0;
    for n in sizes {
        let g = Grid::new(base.dim, n, base.half_width).map_err(grid_err)?;
        let (t, amp) = build_op(cfg, oc.operator, g)?;
        let op = match (oc.weights, &amp) {
            (Some([s1, s2]), Some(a)) => weight_op(s1 - a.orders.m1 - a.orders.m2, s2 - a.orders.m3, g)
                .compose(&t)
                .and_then(|o| o.compose(&weight_tilde_op(-s1, -s2, g)))
                .map_err(grid_err)?,
            (Some(_), None) => return Err(Failure::Config("weights apply to amplitude operators".into())),
            (None, _) => t,
        };
        let r = opnorm(&op, oc.iters, cfg.seed).map_err(grid_err)?;
        if !r.converged {
            status = 4;
        }
        let th = match (&amp, oc.th25) {
            (Some(a), true) => Some(th25_bound(a, &cfg.validate.sample).map_err(grid_err)?),
            (None, true) => return Err(Failure::Config("th25 applies to amplitude operators".into())),
            _ => None,
        };
        let ratio = th.as_ref().map(|b| r.norm / b.value);
        table.push(vec![
            n.to_string(),
            num(g.half_width),
            num(r.norm),
            r.iters.to_string(),
            r.converged.to_string(),
            num(r.rel_change),
            th.as_ref().map(|b| num(b.value)).unwrap_or_default(),
            ratio.map(num).unwrap_or_default(),
        ]);
        rows.push(json!({ "opnorm": r, "th25": th, "ratio": ratio }));
    }
    let result = json!({ "operator": oc.operator, "weights": oc.weights, "sweep": rows });
    Ok(Emitted { kind: "opnorm", result, table, status })
}

pub fn smoothing(cfg: &RunConfig) -> Result<Emitted, Failure> {
    let sc = cfg.smoothing.clone().ok_or_else(|| Failure::Config("missing [smoothing] section".into()))?;
    let g = cfg.grid()?;
    let spec = cfg.dispersion()?;
    let family = match sc.family.as_str() {
        "gaussian75" => gaussian_family(&g, cfg.seed),
        "seeded" => seeded_gaussians(&g, sc.count, cfg.seed),
        other => return Err(Failure::Config(format!("unknown family {other:?}"))),
    };
    let nt = sc.nt.unwrap_or_else(|| {
        let n = (8.0 * sc.t_max / g.dx()).ceil() as usize;
        n + n % 2
    });
    let r = smoothing_ratio(&spec, &family, sc.k, sc.s, sc.t_max, nt).map_err(smooth_err)?;
    let residuals = match sc.commutator_t {
        Some(t) => Some(
            family
                .iter()
                .map(|u| commutator_residual(&spec, u, t))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(smooth_err)?,
        ),
        None => None,
    };
    let mut table = Table::new(&["datum", "tau", "ratio"]);
    for (d, curve) in r.curves.iter().enumerate() {
        for (tau, v) in r.taus.iter().zip(curve) {
            table.push(vec![d.to_string(), num(*tau), num(*v)]);
        }
    }
    let mut result = to_value(&r);
    result["commutator_residuals"] = to_value(&residuals);
    Ok(Emitted { kind: "smoothing", result, table, status: 0 })
}

pub fn acceptance_cmd(suite: &str, only: &[u8], timing: bool) -> Result<Emitted, Failure> {
    if suite != "primary" {
        return Err(Failure::Config(format!("unknown suite {suite:?}; the only suite is \"primary\"")));
    }
    let ids: Vec<u8> = if only.is_empty() { acceptance::CRITERIA.iter().map(|c| c.0).collect() } else { only.to_vec() };
    let mut table = Table::new(&["id", "name", "passed", "measured", "threshold", "seconds", "detail"]);
    let mut out = Vec::new();
    let mut ok = true;
    for id in ids {
        let o = acceptance::run(id).ok_or_else(|| Failure::Config(format!("no criterion {id}")))?;
        eprintln!("{}", o.line());
        ok &= o.passed;
        table.push(vec![
            o.id.to_string(),
            o.name.to_string(),
            o.passed.to_string(),
            num(o.measured),
            num(o.threshold),
            if timing { format!("{:.3}", o.seconds) } else { String::new() },
            o.detail.clone(),
        ]);
        let mut v = to_value(&o);
        if !timing {
            v.as_object_mut().expect("outcome is an object").remove("seconds");
        }
        out.push(v);
    }
    let result = json!({ "suite": suite, "seed": acceptance::SEED, "passed": ok, "criteria": out });
    Ok(Emitted { kind: "acceptance", result, table, status: if ok { 0 } else { 3 } })
}
