use std::time::Duration;

use crate::error::{Error, Result};
use crate::htm::{classify, estimate_selectivity, Coverage};
use crate::queryl::ast::*;
use crate::queryl::pred::{band_index, AttrRef, NamedAttr, Pred};
use crate::sphere::{
    cap, from_lonlat, latitude_band, Convex, Frame, FrameSet, HalfSpace, Region, UnitVec,
};
use crate::store::{CatalogMeta, ObjClass, Projection};

/// Planner hard limit on the spatial disjunctive normal form.
pub const MAX_SPATIAL_DISJUNCTS: usize = 64;

#[derive(Debug, Clone)]
pub struct PlanOptions {
    /// Coverage classification depth; defaults to storage_depth + 2.
    pub level: Option<u8>,
    /// Force whole-sky coverage with the entire predicate as residual.
    pub no_index: bool,
    pub frames: FrameSet,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            level: None,
            no_index: false,
            frames: FrameSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agg {
    Count,
    Min(NamedAttr),
    Max(NamedAttr),
    Avg(NamedAttr),
}

impl Agg {
    pub fn output_name(&self) -> String {
        match self {
            Agg::Count => "count".into(),
            Agg::Min(a) => format!("min({})", a.name),
            Agg::Max(a) => format!("max({})", a.name),
            Agg::Avg(a) => format!("avg({})", a.name),
        }
    }
}

/// What the consumer prints per row.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputShape {
    Tag,
    Full,
    Columns(Vec<NamedAttr>),
    Agg(String),
}

/// Scan leaf: pruned coverage plus the residual predicate.
#[derive(Debug, Clone)]
pub struct ScanNode {
    pub region: Region,
    pub coverage: Coverage,
    pub residual: Pred,
    pub projection: Projection,
    /// Testing/debug knob: sleep per container read to make a scan slow.
    pub per_container_delay: Option<Duration>,
}

/// Query execution tree. Scan nodes are leaves; set operations take their
/// children as a list (always ≥ 2); the rest are single-child operators.
#[derive(Debug, Clone)]
pub enum QetNode {
    Scan(ScanNode),
    Union(Vec<QetNode>),
    Intersect(Vec<QetNode>),
    Except(Vec<QetNode>),
    Sort {
        child: Box<QetNode>,
        key: NamedAttr,
        desc: bool,
    },
    Limit {
        child: Box<QetNode>,
        n: u64,
    },
    Aggregate {
        child: Box<QetNode>,
        agg: Agg,
    },
    Project {
        child: Box<QetNode>,
        columns: Vec<NamedAttr>,
    },
}

#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub root: QetNode,
    pub output: OutputShape,
    pub catalog_name: String,
}

struct Resolver<'a> {
    meta: &'a CatalogMeta,
    frames: &'a FrameSet,
}

impl Resolver<'_> {
    fn attr(&self, term: &AttrTerm) -> Result<NamedAttr> {
        let name = term.to_string();
        let attr = match term {
            AttrTerm::Name(n) => match n.as_str() {
                "obj_id" => AttrRef::ObjId,
                "size_arcsec" => AttrRef::Size,
                "class" => AttrRef::Class,
                other => {
                    if let Some(band) = band_index(other) {
                        AttrRef::Mag(band)
                    } else if let Some(idx) = self.meta.schema.extra_index(other) {
                        AttrRef::Extra(idx)
                    } else {
                        return Err(Error::plan(format!("unknown attribute {other:?}")));
                    }
                }
            },
            AttrTerm::Color(a, b) => {
                let ia = band_index(a).ok_or_else(|| {
                    Error::plan(format!("color term wants magnitude bands, got {a:?}"))
                })?;
                let ib = band_index(b).ok_or_else(|| {
                    Error::plan(format!("color term wants magnitude bands, got {b:?}"))
                })?;
                AttrRef::Color(ia, ib)
            }
        };
        Ok(NamedAttr { name, attr })
    }

    fn spatial_region(&self, e: &Expr) -> Result<Convex> {
        match e {
            Expr::Circle {
                ra_deg,
                dec_deg,
                radius_arcsec,
            } => {
                let center = from_lonlat(*ra_deg, *dec_deg, &Frame::equatorial())?;
                Ok(Convex::new(vec![cap(center, *radius_arcsec)?]))
            }
            Expr::LatBand {
                frame,
                lo_deg,
                hi_deg,
            } => {
                let frame = self.frames.get(frame).ok_or_else(|| {
                    Error::plan(format!("unknown frame {frame:?} (load it with a frame config)"))
                })?;
                latitude_band(frame, *lo_deg, *hi_deg)
            }
            Expr::HalfSpaceAtom { nx, ny, nz, d } => {
                let normal = UnitVec::new(*nx, *ny, *nz)
                    .map_err(|_| Error::plan("HALFSPACE normal must be non-zero".to_string()))?;
                Ok(Convex::new(vec![HalfSpace::new(normal, *d)?]))
            }
            _ => unreachable!("spatial_region on non-spatial expr"),
        }
    }

    /// Resolves a full expression into a residual predicate, with spatial
    /// atoms kept as exact pointwise membership tests.
    fn pred(&self, e: &Expr) -> Result<Pred> {
        Ok(match e {
            Expr::And(es) => Pred::And(es.iter().map(|x| self.pred(x)).collect::<Result<_>>()?),
            Expr::Or(es) => Pred::Or(es.iter().map(|x| self.pred(x)).collect::<Result<_>>()?),
            Expr::Not(inner) => Pred::Not(Box::new(self.pred(inner)?)),
            Expr::Cmp { attr, op, value } => {
                let named = self.attr(attr)?;
                match (&named.attr, value) {
                    (AttrRef::Class, Literal::Word(w)) => {
                        let class = ObjClass::parse(w)
                            .map_err(|_| Error::plan(format!("unknown class {w:?}")))?;
                        match op {
                            CmpOp::Eq => Pred::ClassIs {
                                class,
                                negated: false,
                            },
                            CmpOp::Ne => Pred::ClassIs {
                                class,
                                negated: true,
                            },
                            _ => {
                                return Err(Error::plan(format!(
                                    "class supports = and !=, not {}",
                                    op.symbol()
                                )))
                            }
                        }
                    }
                    (AttrRef::Class, Literal::Num(_)) => {
                        return Err(Error::plan(
                            "type mismatch: class compared to a number".to_string(),
                        ))
                    }
                    (_, Literal::Word(w)) => {
                        return Err(Error::plan(format!(
                            "type mismatch: {} compared to word {w:?}",
                            named.name
                        )))
                    }
                    (_, Literal::Num(v)) => Pred::Cmp {
                        attr: named,
                        op: *op,
                        value: *v,
                    },
                }
            }
            spatial => {
                let convex = self.spatial_region(spatial)?;
                Pred::Spatial(Region::from_convex(convex))
            }
        })
    }
}

/// Disjunctive normal form over {And, Or}; everything else is a leaf.
fn to_dnf<'a>(e: &'a Expr) -> Result<Vec<Vec<&'a Expr>>> {
    let limit_err = || {
        Error::plan(format!(
            "spatial normal form exceeds {MAX_SPATIAL_DISJUNCTS} disjuncts"
        ))
    };
    Ok(match e {
        Expr::Or(es) => {
            let mut out = Vec::new();
            for x in es {
                out.extend(to_dnf(x)?);
                if out.len() > MAX_SPATIAL_DISJUNCTS {
                    return Err(limit_err());
                }
            }
            out
        }
        Expr::And(es) => {
            let mut acc: Vec<Vec<&Expr>> = vec![vec![]];
            for x in es {
                let d = to_dnf(x)?;
                let mut next = Vec::with_capacity(acc.len() * d.len());
                for a in &acc {
                    for b in &d {
                        let mut merged = a.clone();
                        merged.extend(b.iter().copied());
                        next.push(merged);
                    }
                }
                if next.len() > MAX_SPATIAL_DISJUNCTS {
                    return Err(limit_err());
                }
                acc = next;
            }
            acc
        }
        leaf => vec![vec![leaf]],
    })
}

/// Extracts the index-prunable region of an expression.
///
/// Returns (region, residual). Disjunctions that do not factor into spatial
/// conjunctions, and spatial atoms under NOT, fall back to whole-sky with the
/// entire expression as residual.
fn extract_spatial(resolver: &Resolver<'_>, e: &Expr) -> Result<(Region, Pred)> {
    let full_residual = |r: &Resolver<'_>| -> Result<(Region, Pred)> {
        Ok((Region::whole_sky(), r.pred(e)?))
    };
    if !e.contains_spatial() || e.spatial_under_not() {
        return full_residual(resolver);
    }
    let dnf = to_dnf(e)?;
    let mut convexes = Vec::with_capacity(dnf.len());
    for disjunct in &dnf {
        let atoms: Vec<&&Expr> = disjunct.iter().filter(|x| x.is_spatial_atom()).collect();
        if atoms.is_empty() {
            // a disjunct with no spatial constraint covers the whole sky
            return full_residual(resolver);
        }
        let mut convex = Convex::whole_sky();
        for atom in atoms {
            for h in resolver.spatial_region(atom)?.constraints() {
                convex.push(*h);
            }
        }
        convexes.push(convex);
    }
    let region = Region::new(convexes);
    let residual = if dnf.len() == 1 {
        // single conjunction: the region captures the spatial atoms exactly,
        // only the non-spatial terms remain
        let rest: Vec<Pred> = dnf[0]
            .iter()
            .filter(|x| !x.is_spatial_atom())
            .map(|x| resolver.pred(x))
            .collect::<Result<_>>()?;
        match rest.len() {
            0 => Pred::True,
            1 => rest.into_iter().next().unwrap(),
            _ => Pred::And(rest),
        }
    } else {
        // several spatial disjuncts: the union region prunes, the original
        // expression decides exactly
        resolver.pred(e)?
    };
    Ok((region, residual))
}

fn plan_select(sel: &SelectAst, meta: &CatalogMeta, opts: &PlanOptions) -> Result<(QetNode, OutputShape)> {
    let resolver = Resolver {
        meta,
        frames: &opts.frames,
    };
    let level = opts.level.unwrap_or(meta.counts_level());

    let (region, residual) = if opts.no_index {
        (Region::whole_sky(), resolver.pred(&sel.where_expr)?)
    } else {
        extract_spatial(&resolver, &sel.where_expr)?
    };
    let coverage = classify(&region, level)?;

    // projection shape and the attributes it needs
    let (output, agg, columns) = match &sel.projection {
        ProjectionAst::Tag => (OutputShape::Tag, None, None),
        ProjectionAst::Full => (OutputShape::Full, None, None),
        ProjectionAst::Count => (OutputShape::Agg("count".into()), Some(Agg::Count), None),
        ProjectionAst::Min(a) | ProjectionAst::Max(a) | ProjectionAst::Avg(a) => {
            let named = resolver.attr(a)?;
            if named.attr == AttrRef::Class {
                return Err(Error::plan("aggregates want a numeric attribute"));
            }
            let agg = match &sel.projection {
                ProjectionAst::Min(_) => Agg::Min(named),
                ProjectionAst::Max(_) => Agg::Max(named),
                _ => Agg::Avg(named),
            };
            (OutputShape::Agg(agg.output_name()), Some(agg), None)
        }
        ProjectionAst::Columns(cols) => {
            let named: Vec<NamedAttr> = cols
                .iter()
                .map(|c| resolver.attr(c))
                .collect::<Result<_>>()?;
            (OutputShape::Columns(named.clone()), None, Some(named))
        }
    };

    let order = match &sel.order_by {
        Some((attr, desc)) => Some((resolver.attr(attr)?, *desc)),
        None => None,
    };

    // tag scan unless extras are referenced anywhere
    let mut needs_full = matches!(output, OutputShape::Full) || residual.needs_full();
    if let Some((k, _)) = &order {
        needs_full |= k.attr.needs_full();
    }
    if let Some(cols) = &columns {
        needs_full |= cols.iter().any(|c| c.attr.needs_full());
    }
    if let Some(Agg::Min(a) | Agg::Max(a) | Agg::Avg(a)) = &agg {
        needs_full |= a.attr.needs_full();
    }

    let mut node = QetNode::Scan(ScanNode {
        region,
        coverage,
        residual,
        projection: if needs_full {
            Projection::Full
        } else {
            Projection::Tag
        },
        per_container_delay: None,
    });
    if let Some((key, desc)) = order {
        node = QetNode::Sort {
            child: Box::new(node),
            key,
            desc,
        };
    }
    if let Some(n) = sel.limit {
        node = QetNode::Limit {
            child: Box::new(node),
            n,
        };
    }
    if let Some(agg) = agg {
        node = QetNode::Aggregate {
            child: Box::new(node),
            agg,
        };
    }
    if let Some(columns) = columns {
        node = QetNode::Project {
            child: Box::new(node),
            columns,
        };
    }
    Ok((node, output))
}

/// Plans a parsed query against a catalog.
///
/// Set-operation chains fold left to right; every member must produce the
/// same record shape (aggregates cannot feed a set operation).
pub fn plan(ast: &QueryAst, meta: &CatalogMeta, opts: &PlanOptions) -> Result<QueryPlan> {
    let (first, output) = plan_select(&ast.first, meta, opts)?;
    if ast.rest.is_empty() {
        return Ok(QueryPlan {
            root: first,
            output,
            catalog_name: ast.first.catalog.clone(),
        });
    }
    if matches!(output, OutputShape::Agg(_)) {
        return Err(Error::plan(
            "set operations combine record sets, not aggregates",
        ));
    }
    let mut node = first;
    for (op, sel) in &ast.rest {
        if sel.catalog != ast.first.catalog {
            return Err(Error::plan(format!(
                "set operation mixes catalogs {:?} and {:?}",
                ast.first.catalog, sel.catalog
            )));
        }
        let (sub, sub_output) = plan_select(sel, meta, opts)?;
        if sub_output != output {
            return Err(Error::plan(
                "set operation members must share the same projection",
            ));
        }
        let children = vec![node, sub];
        node = match op {
            SetOp::Union => QetNode::Union(children),
            SetOp::Intersect => QetNode::Intersect(children),
            SetOp::Except => QetNode::Except(children),
        };
    }
    Ok(QueryPlan {
        root: node,
        output,
        catalog_name: ast.first.catalog.clone(),
    })
}

/// Renders the plan tree with coverage sizes and selectivity estimates.
pub fn explain(plan: &QueryPlan, meta: &CatalogMeta) -> String {
    let counts = meta.trixel_counts();
    let mut out = String::new();
    fn walk(
        node: &QetNode,
        depth: usize,
        counts: &crate::htm::TrixelCounts,
        catalog: &str,
        out: &mut String,
    ) {
        let pad = "  ".repeat(depth);
        match node {
            QetNode::Scan(s) => {
                let est = match estimate_selectivity(&s.coverage, counts) {
                    Ok(e) => format!("estimate(min={} expected={} max={})", e.min, e.expected, e.max),
                    Err(_) => "estimate(unavailable: coverage finer than stored counts)".into(),
                };
                out.push_str(&format!(
                    "{pad}SCAN {catalog} projection={} coverage(full={} partial={} level={}) {est} residual=[{}]\n",
                    match s.projection {
                        Projection::Tag => "tag",
                        Projection::Full => "full",
                    },
                    s.coverage.full().len(),
                    s.coverage.partial().len(),
                    s.coverage.level(),
                    s.residual,
                ));
            }
            QetNode::Union(cs) => {
                out.push_str(&format!("{pad}UNION\n"));
                for c in cs {
                    walk(c, depth + 1, counts, catalog, out);
                }
            }
            QetNode::Intersect(cs) => {
                out.push_str(&format!("{pad}INTERSECT\n"));
                for c in cs {
                    walk(c, depth + 1, counts, catalog, out);
                }
            }
            QetNode::Except(cs) => {
                out.push_str(&format!("{pad}EXCEPT\n"));
                for c in cs {
                    walk(c, depth + 1, counts, catalog, out);
                }
            }
            QetNode::Sort { child, key, desc } => {
                out.push_str(&format!(
                    "{pad}SORT key={} {}\n",
                    key.name,
                    if *desc { "desc" } else { "asc" }
                ));
                walk(child, depth + 1, counts, catalog, out);
            }
            QetNode::Limit { child, n } => {
                out.push_str(&format!("{pad}LIMIT {n}\n"));
                walk(child, depth + 1, counts, catalog, out);
            }
            QetNode::Aggregate { child, agg } => {
                out.push_str(&format!("{pad}AGGREGATE {}\n", agg.output_name()));
                walk(child, depth + 1, counts, catalog, out);
            }
            QetNode::Project { child, columns } => {
                let names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
                out.push_str(&format!("{pad}PROJECT {}\n", names.join(", ")));
                walk(child, depth + 1, counts, catalog, out);
            }
        }
    }
    walk(&plan.root, 0, &counts, &plan.catalog_name, &mut out);
    out
}
