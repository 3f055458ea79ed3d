use crate::error::{Error, Result};
use crate::htm::{base_trixels, subdivide, trixel_contains, Trixel, TrixelId, MAX_LEVEL};
use crate::sphere::{HalfSpace, Region, UnitVec};

/// Region coverage at a cut depth: trixels entirely inside the region, and
/// bisected trixels at the cut. Everything else was proven disjoint.
///
/// FULL entries may sit above the cut (recording a whole subtree); PARTIAL
/// entries are always at the cut depth. FULL and rejection verdicts are
/// exact; PARTIAL is the conservative fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    full: Vec<TrixelId>,
    partial: Vec<TrixelId>,
    level: u8,
}

impl Coverage {
    pub fn new(mut full: Vec<TrixelId>, mut partial: Vec<TrixelId>, level: u8) -> Coverage {
        full.sort_unstable();
        partial.sort_unstable();
        Coverage {
            full,
            partial,
            level,
        }
    }

    pub fn empty(level: u8) -> Coverage {
        Coverage {
            full: Vec::new(),
            partial: Vec::new(),
            level,
        }
    }

    /// Every base trixel marked FULL: the whole sphere.
    pub fn whole_sky(level: u8) -> Coverage {
        Coverage {
            full: (0..8).map(TrixelId::base).collect(),
            partial: Vec::new(),
            level,
        }
    }

    pub fn full(&self) -> &[TrixelId] {
        &self.full
    }

    pub fn partial(&self) -> &[TrixelId] {
        &self.partial
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty() && self.partial.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Full,
    Partial,
    Reject,
}

/// Does the boundary circle of `h` cross the great-circle arc from `a` to `b`?
///
/// Points on the arc are a·cos t + u·sin t for t in [0, arc], with u the unit
/// tangent at `a` towards `b`; n·p(t) = d reduces to A·cos t + B·sin t = d,
/// solved in closed form. Near-tangent cases count as crossings, which can
/// only demote a verdict to the safe PARTIAL.
fn boundary_crosses_edge(h: &HalfSpace, a: UnitVec, b: UnitVec) -> bool {
    const T_TOL: f64 = 1e-12;
    let n = h.normal();
    let d = h.offset();
    let cos_ab = a.dot(b);
    let tangent = b.as_vec3().sub(a.as_vec3().scale(cos_ab));
    let u = match tangent.normalized() {
        Ok(u) => u,
        Err(_) => return false, // degenerate edge
    };
    let arc = a.angular_distance(b);
    let big_a = n.dot(a);
    let big_b = n.dot(u);
    let c = big_a.hypot(big_b);
    if c < d.abs() - 1e-15 {
        return false;
    }
    let phi = big_b.atan2(big_a);
    let delta = (d / c).clamp(-1.0, 1.0).acos();
    for t in [phi - delta, phi + delta] {
        let t = t.rem_euclid(std::f64::consts::TAU);
        if (-T_TOL..=arc + T_TOL).contains(&t) || (t - std::f64::consts::TAU) >= -T_TOL {
            return true;
        }
    }
    false
}

fn boundary_crosses_any_edge(h: &HalfSpace, t: &Trixel) -> bool {
    boundary_crosses_edge(h, t.v0, t.v1)
        || boundary_crosses_edge(h, t.v1, t.v2)
        || boundary_crosses_edge(h, t.v2, t.v0)
}

/// Exact half-space vs trixel test.
///
/// Corner counting decides the mixed case; otherwise the verdict flips to
/// PARTIAL when the constraint's boundary circle crosses an edge, when the
/// cap sits wholly inside the trixel (no corner inside the cap), or when the
/// complement cap sits wholly inside the trixel (all corners inside, but the
/// constraint has a hole within the trixel).
fn constraint_vs_trixel(h: &HalfSpace, t: &Trixel) -> Verdict {
    if h.offset() <= -1.0 {
        return Verdict::Full; // whole sphere
    }
    let inside = t.corners().iter().filter(|&&c| h.contains(c)).count();
    match inside {
        1 | 2 => Verdict::Partial,
        3 => {
            if boundary_crosses_any_edge(h, t) || trixel_contains(t, h.normal().antipode()) {
                Verdict::Partial
            } else {
                Verdict::Full
            }
        }
        _ => {
            if boundary_crosses_any_edge(h, t) || trixel_contains(t, h.normal()) {
                Verdict::Partial
            } else {
                Verdict::Reject
            }
        }
    }
}

/// AND of the per-constraint verdicts; any REJECT rejects, PARTIAL dominates
/// FULL. An empty constraint list (whole sky) is FULL.
fn convex_vs_trixel(c: &crate::sphere::Convex, t: &Trixel) -> Verdict {
    let mut all_full = true;
    for h in c.constraints() {
        match constraint_vs_trixel(h, t) {
            Verdict::Reject => return Verdict::Reject,
            Verdict::Partial => all_full = false,
            Verdict::Full => {}
        }
    }
    if all_full {
        Verdict::Full
    } else {
        Verdict::Partial
    }
}

/// OR over the convexes; any FULL dominates, all REJECT rejects.
fn region_vs_trixel(r: &Region, t: &Trixel) -> Verdict {
    let mut any_partial = false;
    for c in r.convexes() {
        match convex_vs_trixel(c, t) {
            Verdict::Full => return Verdict::Full,
            Verdict::Partial => any_partial = true,
            Verdict::Reject => {}
        }
    }
    if any_partial {
        Verdict::Partial
    } else {
        Verdict::Reject
    }
}

/// Classifies the mesh against `region` down to `level`.
///
/// FULL trixels are recorded without descending, rejected ones are dropped
/// without descending, and bisected ones recurse until the cut depth.
pub fn classify(region: &Region, level: u8) -> Result<Coverage> {
    if level > MAX_LEVEL {
        return Err(Error::domain(format!(
            "classification level {level} out of range 0..={MAX_LEVEL}"
        )));
    }
    let mut full = Vec::new();
    let mut partial = Vec::new();
    fn descend(
        region: &Region,
        t: &Trixel,
        level: u8,
        full: &mut Vec<TrixelId>,
        partial: &mut Vec<TrixelId>,
    ) {
        match region_vs_trixel(region, t) {
            Verdict::Full => full.push(t.id),
            Verdict::Reject => {}
            Verdict::Partial => {
                if t.id.level() == level {
                    partial.push(t.id);
                } else {
                    for c in subdivide(t) {
                        descend(region, &c, level, full, partial);
                    }
                }
            }
        }
    }
    for t in base_trixels() {
        descend(region, &t, level, &mut full, &mut partial);
    }
    Ok(Coverage::new(full, partial, level))
}
