use crate::args::*;
use crate::output::{csv_table, num, parse_json, CliError, CliResult, Output};
use halfspace::flow::{
    amputation_comparison, integrate_bulk_tadpole, integrate_surface_tadpole, one_loop_four_point, power_counting_probe,
    robin_dirichlet_limit, tadpole::dirichlet_surface_check, FlowParams, FourPointKinematics, GridSpec, LambdaSchedule,
};
use halfspace::forests::{self, Forest, MergeMode, Structure, Tree};
use halfspace::kernels::{eval_kernel, eval_surface_kernel, robin_image_integral};
use halfspace::propagators::{closed_form_propagator, flowing_propagator, propagator_derivative};
use halfspace::weights::{run_sweep, SweepConfig};
use halfspace::{BoundaryKind, CutoffPair, KernelContext, KernelQuery, Part, PropagatorQuery};
use serde_json::{json, Value};

/// Mass entering a kernel context; heat kernels do not depend on it.
const KERNEL_MASS: f64 = 1.0;

pub fn kernel(a: &KernelArgs) -> CliResult<Output> {
    let bc = a.bc.kind()?;
    let ctx = KernelContext::new(KERNEL_MASS, bc)?;
    let q = KernelQuery::new(a.tau, a.z, a.zp);
    let value = if a.surface { eval_surface_kernel(ctx, q)? } else { eval_kernel(ctx, q)? };
    let mut method = match bc {
        BoundaryKind::Robin { .. } => "robin_closed_form",
        _ => "images",
    }
    .to_string();
    if a.check && matches!(bc, BoundaryKind::Robin { c } if c > 0.0) {
        robin_image_integral(ctx, q)?;
        method.push_str("+quadrature_check");
    }
    let summary = json!({
        "query": { "bc": bc, "tau": a.tau, "z": a.z, "zp": a.zp, "part": if a.surface { "surface" } else { "full" } },
        "value": value,
        "method": method,
    });
    let csv = csv_table(&["tau", "z", "zp", "value"], [vec![num(a.tau), num(a.z), num(a.zp), num(value)]])?;
    Ok(Output::json("kernel", summary).with_csv(csv))
}

pub fn prop(a: &PropArgs) -> CliResult<Output> {
    let bc = a.bc.kind()?;
    let ctx = KernelContext::new(a.m, bc)?;
    let part: Part = a.part.into();
    let cut = CutoffPair::new(a.lambda, a.lambda0)?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &p in &a.p {
        for &z in &a.z {
            for &zp in &a.zp {
                let q = PropagatorQuery { p, z, zp, ctx, cut };
                let (value, method) = match a.method {
                    PropMethod::Flow => (flowing_propagator(q, part)?, "proper_time_quadrature"),
                    PropMethod::Derivative => (propagator_derivative(q, part)?, "lambda_derivative"),
                    PropMethod::Closed => {
                        let bulk = closed_form_propagator(BoundaryKind::Bulk, p, z, zp, a.m)?;
                        let v = match part {
                            Part::Bulk => bulk,
                            Part::Full => closed_form_propagator(bc, p, z, zp, a.m)?,
                            Part::Surface => closed_form_propagator(bc, p, z, zp, a.m)? - bulk,
                        };
                        (v, "closed_form")
                    }
                };
                records.push(json!({
                    "query": { "bc": bc, "m": a.m, "p": p, "z": z, "zp": zp, "lambda": a.lambda, "lambda0": a.lambda0, "part": a.part },
                    "value": value,
                    "method": method,
                }));
                rows.push(vec![num(p), num(z), num(zp), num(value)]);
            }
        }
    }
    let csv = csv_table(&["p", "z", "zp", "value"], rows)?;
    Ok(Output::json("prop", json!({ "records": records })).with_csv(csv))
}

fn tree_row(i: usize, t: &Tree) -> Vec<String> {
    vec![i.to_string(), t.internal_count().to_string(), t.v2().to_string(), t.canonical()]
}

pub fn forest(cmd: &ForestCommand) -> CliResult<Output> {
    match cmd {
        ForestCommand::Enumerate(a) => {
            let (structures, rows): (Vec<Value>, Vec<Vec<String>>) = match a.family {
                FamilyName::Forest => {
                    let fs = forests::enumerate_all_forests(a.s, a.l, a.max_internal)?;
                    let rows = fs
                        .iter()
                        .enumerate()
                        .map(|(i, f)| {
                            let internal: usize = f.trees.iter().map(|t| t.internal_count()).sum();
                            let v2: usize = f.trees.iter().map(|t| t.v2()).sum();
                            vec![i.to_string(), internal.to_string(), v2.to_string(), f.canonical()]
                        })
                        .collect();
                    (fs.iter().map(|f| json!(f)).collect(), rows)
                }
                fam => {
                    let ts = match fam {
                        FamilyName::Surface => forests::enumerate_surface_trees(a.s, a.l, a.max_internal)?,
                        FamilyName::Bulk => forests::enumerate_bulk_trees(a.s, a.l, a.max_internal)?,
                        _ => forests::enumerate_rooted_trees(a.s, a.l, a.max_internal)?,
                    };
                    let rows = ts.iter().enumerate().map(|(i, t)| tree_row(i, t)).collect();
                    (ts.iter().map(|t| json!(t)).collect(), rows)
                }
            };
            let csv = csv_table(&["index", "internal", "v2", "canonical"], rows)?;
            let summary = json!({ "count": structures.len(), "structures": structures });
            Ok(Output::json("forest enumerate", summary).with_csv(csv))
        }
        ForestCommand::Reduce(a) => {
            let w: Forest = parse_json(&a.input)?;
            w.validate()?;
            let r = forests::reduce_forest(&w, a.a, a.b)?;
            let check = r.forest.validate();
            let summary = json!({
                "reduction": r,
                "valid": check.is_ok(),
                "validation_error": check.as_ref().err().map(|e| e.to_string()),
            });
            Ok(Output::json("forest reduce", summary).passed(check.is_ok()))
        }
        ForestCommand::Merge(a) => {
            let t: Tree = parse_json(&a.tree)?;
            // the joining label of `w` is usually a placeholder outside 1..s
            let w: Forest = parse_json(&a.forest)?;
            let mode = match a.mode {
                MergeName::A => MergeMode::A,
                MergeName::B => MergeMode::B,
            };
            let f = forests::merge(mode, &t, &w, a.t_label, a.w_label)?;
            let check = f.validate();
            let summary = json!({
                "forest": f,
                "internal_before": t.internal_count() + w.trees.iter().map(|x| x.internal_count()).sum::<usize>(),
                "internal_after": f.trees.iter().map(|x| x.internal_count()).sum::<usize>(),
                "valid": check.is_ok(),
                "validation_error": check.as_ref().err().map(|e| e.to_string()),
            });
            Ok(Output::json("forest merge", summary).passed(check.is_ok()))
        }
        ForestCommand::Validate(a) => {
            let s: Structure = parse_json(&a.input)?;
            let check = s.validate();
            let kind = match &s {
                Structure::Forest(_) => "forest",
                Structure::Tree(_) => "tree",
            };
            let summary = json!({
                "kind": kind,
                "valid": check.is_ok(),
                "validation_error": check.as_ref().err().map(|e| e.to_string()),
            });
            Ok(Output::json("forest validate", summary).passed(check.is_ok()))
        }
    }
}

pub fn lemma(a: &LemmaArgs) -> CliResult<Output> {
    let mut reports = Vec::new();
    let mut csv = String::new();
    let mut extra = Vec::new();
    let kinds = a.lemma.kinds();
    for (k, kind) in kinds.iter().enumerate() {
        let cfg = SweepConfig { s: a.s, l: a.l, cap: a.cap, u_rel_tol: a.u_rel_tol, ..SweepConfig::new(*kind, a.samples, a.seed) };
        cfg.validate()?;
        let r = run_sweep(&cfg)?;
        let block = r.to_csv();
        if kinds.len() > 1 {
            if k > 0 {
                csv.push('\n');
            }
            csv.push_str(&format!("# {}\n", r.lemma));
        }
        csv.push_str(&block);
        extra.push((format!("lemma-{}.csv", r.lemma), block));
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed());
    let verdicts: Vec<Value> = reports.iter().map(|r| json!({ "lemma": r.lemma, "passed": r.passed() })).collect();
    let summary = json!({ "reports": reports, "verdicts": verdicts });
    let mut out = Output::json("lemma", summary).with_csv(csv).passed(passed);
    if kinds.len() > 1 {
        out.extra_csv = extra;
    }
    Ok(out)
}

fn legs<const N: usize>(v: &[Leg]) -> CliResult<[(f64, f64); N]> {
    if v.len() != N {
        return Err(CliError::Usage(format!("expected {N} leg kernels, got {}", v.len())));
    }
    Ok(std::array::from_fn(|i| (v[i].0, v[i].1)))
}

/// Tolerance of the renormalization conditions reported by `flow tadpole`.
const CONDITION_TOL: f64 = 1e-8;

pub fn flow(cmd: &FlowCommand) -> CliResult<Output> {
    match cmd {
        FlowCommand::Tadpole(a) => tadpole(a),
        FlowCommand::Fourpoint(a) => {
            let params = FlowParams::new(a.common.coupling, a.common.mass, a.lambda0)?;
            let kin = FourPointKinematics::new(legs::<4>(&a.kernels)?);
            let r = one_loop_four_point(params, a.bc.kind()?, a.lambda, kin, &a.z)?;
            let rows = (0..r.z.len()).map(|i| vec![num(r.z[i]), num(r.c[i]), num(r.c_flow[i])]);
            let csv = csv_table(&["z", "c", "c_flow"], rows)?;
            Ok(Output::json("flow fourpoint", json!(r)).with_csv(csv))
        }
        FlowCommand::RobinLimit(a) => {
            let params = FlowParams::new(a.common.coupling, a.common.mass, a.lambda0)?;
            let r = robin_dirichlet_limit(params, a.lambda, &a.c_list, legs::<2>(&a.kernels)?, a.common.schedule.spec())?;
            let rows = (0..r.c.len()).map(|i| vec![num(r.c[i]), num(r.robin[i]), num(r.gaps[i])]);
            let csv = csv_table(&["c", "robin", "gap"], rows)?;
            let ok = r.gaps_decreasing;
            Ok(Output::json("flow robin-limit", json!(r)).with_csv(csv).passed(ok))
        }
        FlowCommand::Amputation(a) => {
            let params = FlowParams::new(a.common.coupling, a.common.mass, a.lambda0)?;
            let bc = BoundaryKind::robin(a.c)?;
            let sched = LambdaSchedule::complete(&params, a.common.schedule.spec())?;
            let tp = integrate_surface_tadpole(params, bc, &sched)?;
            let b = tp.boundary();
            let e = if a.force_e_zero { 0.0 } else { b.e };
            let r = amputation_comparison(b.s, e, a.c, a.common.mass, a.p, a.y1, a.y2)?;
            let ok = if a.force_e_zero { r.degenerate } else { r.strict };
            Ok(Output::json("flow amputation", json!(r)).passed(ok))
        }
        FlowCommand::PowerCounting(a) => {
            if a.range.len() != 2 {
                return Err(CliError::Usage("--range takes two values lo,hi".into()));
            }
            let r = power_counting_probe(
                a.common.coupling,
                a.common.mass,
                a.bc.kind()?,
                (a.range[0], a.range[1]),
                a.points,
                a.common.schedule.spec(),
            )?;
            let rows = (0..r.lambda.len()).map(|i| vec![num(r.lambda[i]), num(r.bulk[i]), num(r.surface[i]), num(r.surface_first[i])]);
            let csv = csv_table(&["lambda", "bulk", "surface", "surface_first"], rows)?;
            Ok(Output::json("flow power-counting", json!(r)).with_csv(csv))
        }
    }
}

fn tadpole(a: &TadpoleArgs) -> CliResult<Output> {
    let params = FlowParams::new(a.common.coupling, a.common.mass, a.lambda0)?;
    let spec = a.common.schedule.spec();
    let bc = a.bc.kind()?;
    if bc == BoundaryKind::Dirichlet {
        let l0s = [0.5 * a.lambda0, a.lambda0];
        let r = dirichlet_surface_check(params.coupling, params.mass, 0.0, &l0s, legs::<2>(&a.kernels)?, spec)?;
        let rows = (0..r.values.len()).map(|i| vec![num(r.lambda0s[i]), num(r.values[i])]);
        let csv = csv_table(&["lambda0", "folded"], rows)?;
        return Ok(Output::json("flow tadpole", json!({ "dirichlet": r })).with_csv(csv).prefer(Format::Csv));
    }
    let sched = LambdaSchedule::complete(&params, spec)?;
    let tp = integrate_surface_tadpole(params, bc, &sched)?;
    let bulk = integrate_bulk_tadpole(params, &sched)?;
    let grid = GridSpec::uniform(params.mass, a.grid_nodes)?;
    let at_zero = tp.at_zero();
    let round_trip = tp.reintegrate(&sched.refined(2))?;
    let e_minus_h = tp.e.iter().zip(&tp.h).map(|(e, h)| (e - h).abs()).fold(0.0, f64::max);
    let residual = at_zero.s.abs().max(at_zero.e.abs());
    let object = tp.object_at(tp.lambda.len() - 1, &grid)?;
    let summary = json!({
        "params": params,
        "bc": bc,
        "steps": sched.points().len() - 1,
        "boundary": tp.boundary(),
        "at_zero": at_zero,
        "round_trip": round_trip,
        "max_e_minus_h": e_minus_h,
        "bulk_boundary_a": bulk.boundary(),
        "counterterms": tp.counterterms(),
        "object_at_zero": object,
    });
    let ok = residual <= CONDITION_TOL && e_minus_h == 0.0;
    Ok(Output::json("flow tadpole", summary).with_csv(tp.to_csv()).prefer(Format::Csv).passed(ok))
}
