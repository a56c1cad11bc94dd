use serde_json::json;

use super::{quotient_bn, validation_verdict, Criterion, Verdict};
use crate::budget::Budgets;
use crate::builders::{build_precode_an, build_precode_asdim, BuilderTrace, ControlCoverProvider, ProviderKind};
use crate::coarse_maps::check_cn;
use crate::dist::Dist;
use crate::error::Result;
use crate::metric::{FiniteMetricSpace, Norm, SpaceRef};
use crate::precode::{
    certify_zero_dim_equivalence, default_scales, example_clusters, quotient_map, validate_precode, PrecodeKind, Selector,
};

const LEVEL_CAP: usize = 64;

fn trace_verdict(name: &str, trace: &BuilderTrace) -> Verdict {
    let failed: Vec<_> = trace
        .levels
        .iter()
        .flat_map(|l| l.checks.iter().filter(|c| !c.pass).map(move |c| json!({ "level": l.level, "check": c })))
        .collect();
    Verdict::new(
        name,
        trace.complete && failed.is_empty(),
        json!({
            "levels": trace.levels.len(),
            "checks": trace.levels.iter().map(|l| l.checks.len()).sum::<usize>(),
            "complete": trace.complete,
            "failed": failed,
        }),
    )
}

fn asdim_case(name: &str, space: SpaceRef, n: usize, x0: usize, budgets: Budgets) -> Result<Vec<Verdict>> {
    let provider = ControlCoverProvider::new(space, ProviderKind::GridBrick)?;
    let (p, trace) = build_precode_asdim(&provider, n, x0, LEVEL_CAP, budgets)?;
    let report = validate_precode(&p, n + 1, &default_scales(&p), budgets)?;
    let q = quotient_map(&p, &Selector::MinPoint)?;
    let mut bn = quotient_bn(&p, &q, &report, n + 1, budgets)?;
    bn.check = format!("{name}_{}", bn.check);
    Ok(vec![
        trace_verdict(&format!("{name}_trace"), &trace),
        validation_verdict(&format!("{name}_is_{}_precode", n + 1), &report),
        bn,
    ])
}

/// The asdim construction on a line segment (`n = 1`) and a square (`n = 2`).
pub fn asdim_builder(budgets: Budgets) -> Result<Criterion> {
    let line = FiniteMetricSpace::interval("Z[-200,200]", -200, 200)?.into_ref();
    let square = FiniteMetricSpace::lattice("Z2[-40,40]linf", vec![(-40, 40), (-40, 40)], Norm::Linf)?.into_ref();
    let origin = square.as_lattice().and_then(|l| l.index_of(&[0, 0])).expect("origin in the box");
    let mut checks = asdim_case("line", line, 1, 200, budgets)?;
    checks.extend(asdim_case("square", square, 2, origin, budgets)?);
    Ok(Criterion::new("asdim_builder", checks))
}

/// The AN construction on a long segment with measured provider constants.
pub fn an_builder(budgets: Budgets) -> Result<Criterion> {
    let space = FiniteMetricSpace::interval("Z[-3000,3000]", -3000, 3000)?.into_ref();
    let mut provider = ControlCoverProvider::new(space, ProviderKind::GridBrick)?;
    let probes = provider.default_probes();
    let g = provider.measure_an(&probes)?;
    let (p, trace) = build_precode_an(&provider, 1, 3000, LEVEL_CAP, budgets)?;
    let a = 14 * g.c;
    let kind_ok = p.kind == PrecodeKind::An { a, i0: 0 };
    let mut mesh_rows = Vec::new();
    let mut mesh_ok = true;
    for (i, level) in p.levels.iter().enumerate() {
        let bound = (a as u128).checked_pow(i as u32);
        let ok = match bound {
            Some(b) => level.mesh() <= Dist::from_int(b.min(u64::MAX as u128) as u64),
            None => true,
        };
        mesh_ok &= ok;
        mesh_rows.push(json!({ "level": i, "mesh": level.mesh(), "bound": bound.map(|b| b.to_string()), "pass": ok }));
    }
    let report = validate_precode(&p, 2, &default_scales(&p), budgets)?;
    let q = quotient_map(&p, &Selector::MinPoint)?;
    let cn = check_cn(&q.map, 2, budgets)?;
    let mut cn_ok = true;
    let mut rows = Vec::new();
    for s in &cn.bn.scales {
        let bound = match report.level_for(s.r) {
            Some(i) => Some(p.power(i)?),
            None => None,
        };
        let ok = s.complete && bound.is_some_and(|b| s.d.upper() <= b);
        cn_ok &= ok;
        rows.push(json!({ "r": s.r, "d": s.d, "bound": bound, "pass": ok }));
    }
    Ok(Criterion::new(
        "an_builder",
        vec![
            trace_verdict("an_trace", &trace),
            Verdict::new(
                "an_kind_base",
                kind_ok,
                json!({ "c": g.c, "d": g.d, "fitted": g.fitted.to_string(), "base": a, "kind": p.kind }),
            ),
            Verdict::new("an_mesh_powers", mesh_ok, json!({ "levels": mesh_rows })),
            validation_verdict("an_is_2_precode", &report),
            Verdict::new(
                "an_quotient_cn_2",
                cn_ok,
                json!({ "c": cn.c, "r0": cn.r0, "affine": cn.affine.to_string(), "scales": rows }),
            ),
        ],
    ))
}

/// A zero-dimensional input built with the components provider yields a
/// 1-precode whose quotient is a coarse equivalence.
pub fn zero_dim_builder(budgets: Budgets) -> Result<Criterion> {
    let space = example_clusters(7)?.space;
    let provider = ControlCoverProvider::new(space, ProviderKind::Components)?;
    let (p, trace) = build_precode_asdim(&provider, 0, 0, LEVEL_CAP, budgets)?;
    let z = certify_zero_dim_equivalence(&p, budgets)?;
    Ok(Criterion::new(
        "zero_dim_builder",
        vec![
            trace_verdict("components_trace", &trace),
            validation_verdict("components_is_1_precode", &z.validation),
            Verdict::new(
                "components_equivalence",
                z.holds,
                json!({ "closeness": z.closeness, "mesh_bottom": z.mesh_bottom, "section_identity": z.section_identity }),
            ),
        ],
    ))
}
