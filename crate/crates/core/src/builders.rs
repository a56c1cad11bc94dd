//! Inductive precode constructions from control-cover providers.

use serde::Serialize;

use crate::budget::Budgets;
use crate::covers::Cover;
use crate::dimension::{expanded_cover, CheckRecord, FamilyGenerator};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::fit::{fit_upper, upper_points, AffineFit};
use crate::metric::{check_index, scale_schedule, PointSet, SpaceRef};
use crate::precode::{PrecodeKind, PrecodeStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    GridBrick,
    GreedyNet,
    Components,
    Table,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ProviderKind> {
        match s {
            "grid-brick" | "brick" | "bricks" => Ok(ProviderKind::GridBrick),
            "greedy-net" | "net" => Ok(ProviderKind::GreedyNet),
            "components" => Ok(ProviderKind::Components),
            "table" => Ok(ProviderKind::Table),
            other => Err(Error::Precondition(format!("unknown provider {other:?}"))),
        }
    }
}

/// Measured affine mesh control `mesh <= c (s + 4t) + d`, clamped to `c >= d >= 2`.
#[derive(Debug, Clone, Serialize)]
pub struct AnGuarantee {
    pub c: u64,
    pub d: u64,
    pub fitted: AffineFit,
    pub probes: usize,
}

/// A preloaded cover claimed to satisfy `(s, t)`.
#[derive(Debug, Clone)]
pub struct TableEntry {
    pub s: Dist,
    pub t: Dist,
    pub cover: Cover,
}

/// Source of covers with `s`-multiplicity at most `n + 1` and Lebesgue
/// number at least `t`; every cover is re-verified before use.
#[derive(Debug, Clone)]
pub struct ControlCoverProvider {
    space: SpaceRef,
    kind: ProviderKind,
    table: Vec<TableEntry>,
    an: Option<AnGuarantee>,
}

/// A cover that passed its claim, with the exact values found.
#[derive(Debug, Clone)]
pub struct ProvidedCover {
    pub s: Dist,
    pub t: Dist,
    pub cover: Cover,
    pub mesh: Dist,
    pub s_multiplicity: usize,
}

impl ControlCoverProvider {
    pub fn new(space: SpaceRef, kind: ProviderKind) -> Result<ControlCoverProvider> {
        if kind == ProviderKind::GridBrick && space.as_lattice().is_none() {
            return Err(Error::Precondition("grid-brick provider needs a lattice space".into()));
        }
        Ok(ControlCoverProvider {
            space,
            kind,
            table: Vec::new(),
            an: None,
        })
    }

    pub fn table(space: SpaceRef, entries: Vec<TableEntry>) -> ControlCoverProvider {
        ControlCoverProvider {
            space,
            kind: ProviderKind::Table,
            table: entries,
            an: None,
        }
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn an_guarantee(&self) -> Option<&AnGuarantee> {
        self.an.as_ref()
    }

    fn generator(&self) -> FamilyGenerator {
        match self.kind {
            ProviderKind::GridBrick => FamilyGenerator::for_space(self.space.as_ref()),
            ProviderKind::Components => FamilyGenerator::Components,
            _ => FamilyGenerator::GreedyNet,
        }
    }

    /// The raw cover for `(s, t)`, before claim verification.
    pub fn cover(&self, s: Dist, t: Dist) -> Result<Cover> {
        if self.kind == ProviderKind::Table {
            return self
                .table
                .iter()
                .find(|e| e.s == s && e.t == t)
                .map(|e| e.cover.clone())
                .ok_or_else(|| Error::CertificateAbsent(format!("no table cover for s = {s}, t = {t}")));
        }
        let (Some(si), Some(ti)) = (s.as_int(), t.as_int()) else {
            return Err(Error::Precondition(format!("provider scales must be integers, got {s}, {t}")));
        };
        let families = self.generator().generate(&self.space, Dist::from_int(si + 4 * ti))?;
        expanded_cover(&families, s, t)
    }

    /// A cover for `(s, t)` whose `s`-multiplicity is at most `parts`, whose
    /// Lebesgue number is at least `t` and, with an AN guarantee, whose mesh is
    /// at most `c (s + 4t) + d`.
    pub fn verified(&self, s: Dist, t: Dist, parts: usize, budgets: Budgets) -> Result<ProvidedCover> {
        let cover = self.cover(s, t)?;
        if !cover.is_cover() {
            return Err(Error::ClaimFailed(format!("provider output for s = {s}, t = {t} does not cover")));
        }
        if let Some(set) = cover.r_multiplicity_violation(s, parts, budgets)? {
            return Err(Error::ClaimFailed(format!(
                "provider cover has {s}-multiplicity above {parts}: set {set:?}"
            )));
        }
        if let Some(set) = cover.lebesgue_violation(t, budgets)? {
            return Err(Error::ClaimFailed(format!(
                "provider cover has Lebesgue number below {t}: set {set:?} lies in no element"
            )));
        }
        let mesh = cover.mesh();
        if let Some(g) = &self.an {
            let (Some(si), Some(ti)) = (s.as_int(), t.as_int()) else {
                return Err(Error::Precondition("AN scales must be integers".into()));
            };
            let bound = Dist::from_int(g.c * (si + 4 * ti) + g.d);
            if mesh > bound {
                return Err(Error::ClaimFailed(format!(
                    "provider mesh {mesh} exceeds c(s + 4t) + d = {bound} at s = {s}, t = {t}"
                )));
            }
        }
        let s_multiplicity = cover.r_multiplicity(s, budgets)?;
        Ok(ProvidedCover {
            s,
            t,
            cover,
            mesh,
            s_multiplicity,
        })
    }

    /// Probe grid for constant measurement: `s` over the geometric schedule
    /// and `t` over `0` and the schedule, with `s + 4t` at most twice the cap.
    pub fn default_probes(&self) -> Vec<(Dist, Dist)> {
        let cap = self.space.scale_cap().ceil_int().max(1);
        let ss = scale_schedule(Dist::from_int(cap));
        let mut ts = vec![Dist::ZERO];
        ts.extend(scale_schedule(Dist::from_int(cap / 4 + 1)));
        let mut out = Vec::new();
        for &s in &ss {
            for &t in &ts {
                let (si, ti) = (s.ceil_int(), t.ceil_int());
                if s > Dist::ZERO && si + 4 * ti <= 2 * cap {
                    out.push((Dist::from_int(si), Dist::from_int(ti)));
                }
            }
        }
        out
    }

    /// Measures `(c, d)` from the provider's actual meshes on `probes` and
    /// clamps them to `c >= d >= 2`.
    pub fn measure_an(&mut self, probes: &[(Dist, Dist)]) -> Result<AnGuarantee> {
        self.an = None;
        let mut table = Vec::with_capacity(probes.len());
        for &(s, t) in probes {
            let cover = self.cover(s, t)?;
            let x = s.ceil_int() + 4 * t.ceil_int();
            table.push((Dist::from_int(x), cover.mesh()));
        }
        let fitted = fit_upper(&upper_points(&table));
        let ceil = |q: crate::fit::Rational| q.ceil().to_integer().max(0) as u64;
        let d = ceil(fitted.offset).max(2);
        let c = ceil(fitted.slope).max(d);
        let g = AnGuarantee {
            c,
            d,
            fitted,
            probes: probes.len(),
        };
        self.an = Some(g.clone());
        Ok(g)
    }

    /// Installs constants without measuring; they are still enforced per cover.
    pub fn with_an(mut self, c: u64, d: u64) -> Result<ControlCoverProvider> {
        if !(c >= d && d >= 2) {
            return Err(Error::Precondition(format!("AN constants need c >= d >= 2, got c = {c}, d = {d}")));
        }
        self.an = Some(AnGuarantee {
            c,
            d,
            fitted: AffineFit::default(),
            probes: 0,
        });
        Ok(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub s: Option<Dist>,
    pub t: Option<Dist>,
    /// Mesh of the provider cover (`N`).
    pub provider_mesh: Option<Dist>,
    pub mesh: Dist,
    /// `2 M_k + N` for the asdim construction, `(14c)^i` for the AN one.
    pub mesh_bound: Option<Dist>,
    pub ball_radius: Dist,
    /// Provider element containing the ball.
    pub alpha: Option<usize>,
    /// Provider element assigned to each element of the previous level.
    pub tau: Vec<usize>,
    pub elements: usize,
    pub checks: Vec<CheckRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuilderTrace {
    pub space: String,
    pub construction: &'static str,
    pub n: usize,
    pub x0: usize,
    pub provider: ProviderKind,
    pub constants: Option<AnGuarantee>,
    pub ball_convention: &'static str,
    pub levels: Vec<LevelRecord>,
    /// The last level is a single element covering the space.
    pub complete: bool,
}

impl BuilderTrace {
    pub fn all_checks_pass(&self) -> bool {
        self.levels.iter().all(|l| l.checks.iter().all(|c| c.pass))
    }
}

const BALL_CONVENTION: &str = "closed balls: B(x0, r) = {y : d(x0, y) <= r}";

struct Step {
    s: Dist,
    t: Dist,
    ball: Dist,
    mul_scale: Dist,
}

struct Merge {
    next: Vec<PointSet>,
    tau: Vec<usize>,
    /// Provider index to new element index.
    renumber: Vec<usize>,
    alpha: usize,
}

/// Assigns each current element to the ball element when they meet, else to
/// the smallest-index provider element it meets, and unites each class.
fn merge_level(current: &[PointSet], v: &Cover, ball: &[usize]) -> Result<Merge> {
    let alpha = (0..v.len())
        .find(|&b| ball.iter().all(|&y| v.element(b).contains(y)))
        .ok_or_else(|| {
            Error::ClaimFailed(format!("no provider element contains the ball of {} points", ball.len()))
        })?;
    let va = v.element(alpha);
    let tau: Vec<usize> = current
        .iter()
        .map(|u| {
            if u.intersects(va) {
                alpha
            } else {
                u.members()
                    .iter()
                    .flat_map(|&x| v.incident(x).iter().map(|&e| e as usize))
                    .min()
                    .expect("provider output covers")
            }
        })
        .collect();
    let mut unions: Vec<Vec<usize>> = vec![Vec::new(); v.len()];
    for (u, &b) in current.iter().zip(&tau) {
        unions[b].extend_from_slice(u.members());
    }
    let mut next = Vec::new();
    let mut renumber = vec![usize::MAX; v.len()];
    for (b, members) in unions.into_iter().enumerate() {
        if !members.is_empty() {
            renumber[b] = next.len();
            next.push(PointSet::new(members));
        }
    }
    Ok(Merge {
        next,
        tau,
        alpha: renumber[alpha],
        renumber,
    })
}

fn common_checks(
    previous: &[PointSet],
    next: &Cover,
    merge: &Merge,
    ball: &[usize],
    step: &Step,
    parts: usize,
    budgets: Budgets,
) -> Result<Vec<CheckRecord>> {
    let mul = next.r_multiplicity(step.mul_scale, budgets)?;
    let disjoint = next.is_cover() && next.multiplicity() <= 1;
    let nested = previous
        .iter()
        .zip(&merge.tau)
        .all(|(u, &b)| u.is_subset(next.element(merge.renumber[b])));
    let ball_ok = ball.iter().all(|&y| next.element(merge.alpha).contains(y));
    Ok(vec![
        CheckRecord::new("scale_multiplicity", mul, parts, mul <= parts),
        CheckRecord::new("disjoint", next.multiplicity(), 1, disjoint),
        CheckRecord::new("nesting", nested, true, nested),
        CheckRecord::new("ball_containment", ball.len(), step.ball, ball_ok),
    ])
}

fn level_zero(space: &SpaceRef, x0: usize) -> (Vec<PointSet>, LevelRecord) {
    let singletons: Vec<PointSet> = (0..space.len()).map(PointSet::singleton).collect();
    let record = LevelRecord {
        level: 0,
        s: None,
        t: None,
        provider_mesh: None,
        mesh: Dist::ZERO,
        mesh_bound: Some(Dist::ZERO),
        ball_radius: Dist::ZERO,
        alpha: Some(x0),
        tau: Vec::new(),
        elements: singletons.len(),
        checks: vec![
            CheckRecord::new("scale_multiplicity", 1, 1, true),
            CheckRecord::new("disjoint", 1, 1, true),
            CheckRecord::new("ball_containment", 1, 0, true),
        ],
    };
    (singletons, record)
}

fn fail_on_check(level: usize, checks: &[CheckRecord]) -> Result<()> {
    match checks.iter().find(|c| !c.pass) {
        None => Ok(()),
        Some(c) => Err(Error::Internal(format!(
            "level {level} fails {}: {} against {}",
            c.check, c.value, c.bound
        ))),
    }
}

fn finish(
    space: &SpaceRef,
    levels: Vec<Vec<PointSet>>,
    kind: PrecodeKind,
) -> Result<PrecodeStructure> {
    let mut p = PrecodeStructure::new(space.clone(), levels, kind)?;
    p.disjoint = true;
    Ok(p)
}

/// Builds an `(n + 1)`-precode from covers with `(k+1+2M_k)`-multiplicity at
/// most `n + 1` and Lebesgue number at least `2(k + 1)`; `U_0` is singletons.
/// Stops at `cap` levels or when one element covers the space.
pub fn build_precode_asdim(
    provider: &ControlCoverProvider,
    n: usize,
    x0: usize,
    cap: usize,
    budgets: Budgets,
) -> Result<(PrecodeStructure, BuilderTrace)> {
    let space = provider.space().clone();
    check_index(space.as_ref(), x0)?;
    let parts = n + 1;
    let (mut current, rec0) = level_zero(&space, x0);
    let mut levels = vec![current.clone()];
    let mut records = vec![rec0];
    let mut mesh = Dist::ZERO;
    let mut k = 0usize;
    while (current.len() > 1 || levels.len() == 1) && levels.len() < cap.max(2) {
        let m = mesh.ceil_int();
        let step = Step {
            s: Dist::from_int(k as u64 + 1 + 2 * m),
            t: Dist::from_int(2 * (k as u64 + 1)),
            ball: Dist::from_int(k as u64 + 1),
            mul_scale: Dist::from_int(k as u64 + 1),
        };
        let v = provider.verified(step.s, step.t, parts, budgets)?;
        let ball = space.close_points(x0, step.ball);
        let merge = merge_level(&current, &v.cover, &ball)?;
        let next_cover = Cover::family(space.clone(), merge.next.clone())?;
        let next_mesh = next_cover.mesh();
        let mut checks = vec![CheckRecord::new(
            "bounded",
            next_mesh,
            format!("2*{mesh} + {}", v.mesh),
            next_mesh.le_sum(mesh.times(2), v.mesh),
        )];
        checks.extend(common_checks(&current, &next_cover, &merge, &ball, &step, parts, budgets)?);
        fail_on_check(k + 1, &checks)?;
        records.push(LevelRecord {
            level: k + 1,
            s: Some(step.s),
            t: Some(step.t),
            provider_mesh: Some(v.mesh),
            mesh: next_mesh,
            mesh_bound: v.mesh.as_int().map(|nv| Dist::from_int(2 * m + nv)),
            ball_radius: step.ball,
            alpha: Some(merge.alpha),
            elements: merge.next.len(),
            tau: merge.tau,
            checks,
        });
        mesh = next_mesh;
        levels.push(merge.next.clone());
        current = merge.next;
        k += 1;
    }
    let complete = current.len() == 1;
    let p = finish(&space, levels, PrecodeKind::Asdim)?;
    Ok((
        p,
        BuilderTrace {
            space: space.id().to_string(),
            construction: "asdim",
            n,
            x0,
            provider: provider.kind(),
            constants: None,
            ball_convention: BALL_CONVENTION,
            levels: records,
            complete,
        },
    ))
}

fn checked_pow(base: u64, k: usize) -> Result<u64> {
    u32::try_from(k)
        .ok()
        .and_then(|k| base.checked_pow(k))
        .ok_or_else(|| Error::Precondition(format!("{base}^{k} overflows")))
}

/// Builds an AN-kind `(n + 1)`-precode with base `a = 14c`: step `k + 1` uses
/// `s = 3^k + 2(14c)^k`, `t = 2 * 3^k` and keeps `mesh(U_i) <= (14c)^i`.
pub fn build_precode_an(
    provider: &ControlCoverProvider,
    n: usize,
    x0: usize,
    cap: usize,
    budgets: Budgets,
) -> Result<(PrecodeStructure, BuilderTrace)> {
    let space = provider.space().clone();
    check_index(space.as_ref(), x0)?;
    let g = provider
        .an_guarantee()
        .cloned()
        .ok_or_else(|| Error::Precondition("AN construction needs provider constants (c, d)".into()))?;
    if !(g.c >= g.d && g.d >= 2) {
        return Err(Error::Precondition(format!("AN constants need c >= d >= 2, got c = {}, d = {}", g.c, g.d)));
    }
    let a = g.c.checked_mul(14).ok_or_else(|| Error::Precondition("14c overflows".into()))?;
    let parts = n + 1;
    let (mut current, rec0) = level_zero(&space, x0);
    let mut levels = vec![current.clone()];
    let mut records = vec![rec0];
    let mut mesh = Dist::ZERO;
    let mut k = 0usize;
    while (current.len() > 1 || levels.len() == 1) && levels.len() < cap.max(2) {
        let p3 = checked_pow(3, k)?;
        let ak = checked_pow(a, k)?;
        let ak1 = checked_pow(a, k + 1)?;
        let s = p3 + 2 * ak;
        let t = 2 * p3;
        let radius = Dist::at_most_ratio(3 * p3 as u128 - 1, 3);
        let step = Step {
            s: Dist::from_int(s),
            t: Dist::from_int(t),
            ball: radius,
            mul_scale: radius,
        };
        let v = provider.verified(step.s, step.t, parts, budgets)?;
        let ball = space.close_points(x0, step.ball);
        let merge = merge_level(&current, &v.cover, &ball)?;
        let next_cover = Cover::family(space.clone(), merge.next.clone())?;
        let next_mesh = next_cover.mesh();
        let provider_bound = g.c * (9 * p3 + 2 * ak) + g.d;
        let chain_total = 2 * ak + provider_bound;
        let mut checks = vec![
            CheckRecord::new("mesh", next_mesh, ak1, next_mesh <= Dist::from_int(ak1)),
            CheckRecord::new(
                "mesh_step",
                next_mesh,
                format!("2*{mesh} + {}", v.mesh),
                next_mesh.le_sum(mesh.times(2), v.mesh),
            ),
            CheckRecord::new("provider_mesh", v.mesh, provider_bound, v.mesh <= Dist::from_int(provider_bound)),
            CheckRecord::new("mesh_chain", chain_total, ak1, chain_total <= ak1),
        ];
        checks.extend(common_checks(&current, &next_cover, &merge, &ball, &step, parts, budgets)?);
        fail_on_check(k + 1, &checks)?;
        records.push(LevelRecord {
            level: k + 1,
            s: Some(step.s),
            t: Some(step.t),
            provider_mesh: Some(v.mesh),
            mesh: next_mesh,
            mesh_bound: Some(Dist::from_int(ak1)),
            ball_radius: radius,
            alpha: Some(merge.alpha),
            elements: merge.next.len(),
            tau: merge.tau,
            checks,
        });
        mesh = next_mesh;
        levels.push(merge.next.clone());
        current = merge.next;
        k += 1;
    }
    let complete = current.len() == 1;
    let p = finish(&space, levels, PrecodeKind::An { a, i0: 0 })?;
    Ok((
        p,
        BuilderTrace {
            space: space.id().to_string(),
            construction: "an",
            n,
            x0,
            provider: provider.kind(),
            constants: Some(g),
            ball_convention: BALL_CONVENTION,
            levels: records,
            complete,
        },
    ))
}
