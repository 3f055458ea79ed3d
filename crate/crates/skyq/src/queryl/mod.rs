//! The query language: lexer, parser, and the planner that turns query text
//! into a query execution tree with spatial constraints extracted into
//! regions for index pruning.

mod ast;
mod lex;
mod parse;
mod plan;
mod pred;

pub use ast::{AttrTerm, CmpOp, Expr, Literal, ProjectionAst, QueryAst, SelectAst, SetOp};
pub use parse::parse;
pub use plan::{
    explain, plan, Agg, OutputShape, PlanOptions, QetNode, QueryPlan, ScanNode,
    MAX_SPATIAL_DISJUNCTS,
};
pub use pred::{band_index, AttrRef, NamedAttr, Pred};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{CatalogMeta, Schema};

    fn meta() -> CatalogMeta {
        let mut m = CatalogMeta::new(4, Schema::new(vec!["flux".into()]).unwrap());
        m.total_objects = 0;
        m
    }

    fn plan_text(q: &str) -> QueryPlan {
        plan(&parse(q).unwrap(), &meta(), &PlanOptions::default()).unwrap()
    }

    fn scan_of(node: &QetNode) -> &ScanNode {
        match node {
            QetNode::Scan(s) => s,
            QetNode::Sort { child, .. }
            | QetNode::Limit { child, .. }
            | QetNode::Aggregate { child, .. }
            | QetNode::Project { child, .. } => scan_of(child),
            _ => panic!("no single scan"),
        }
    }

    #[test]
    fn pure_circle_gets_cap_coverage_and_true_residual() {
        let p = plan_text("SELECT TAG FROM cat WHERE CIRCLE(185, 2, 3600)");
        let s = scan_of(&p.root);
        assert_eq!(s.residual, Pred::True);
        assert!(!s.coverage.is_empty());
        // a one-degree cap never covers the sky
        assert!(s.coverage.full().len() + s.coverage.partial().len() < 100);
    }

    #[test]
    fn non_factorable_disjunction_falls_back_to_whole_sky() {
        let p = plan_text("SELECT TAG FROM cat WHERE CIRCLE(185, 2, 3600) OR r < 20");
        let s = scan_of(&p.root);
        // whole sky: all 8 bases full
        assert_eq!(s.coverage.full().len(), 8);
        assert!(matches!(s.residual, Pred::Or(_)));
    }

    #[test]
    fn spatial_under_not_falls_back() {
        let p = plan_text("SELECT TAG FROM cat WHERE NOT CIRCLE(185, 2, 3600)");
        let s = scan_of(&p.root);
        assert_eq!(s.coverage.full().len(), 8);
        assert!(matches!(s.residual, Pred::Not(_)));
    }

    #[test]
    fn conjunction_splits_spatial_and_residual() {
        let p = plan_text("SELECT TAG FROM cat WHERE CIRCLE(185, 2, 3600) AND class = QSO AND r < 22");
        let s = scan_of(&p.root);
        assert!(s.coverage.full().len() + s.coverage.partial().len() < 100);
        match &s.residual {
            Pred::And(ps) => assert_eq!(ps.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_band_conjunction_builds_one_convex_with_four_halfspaces() {
        let p = plan_text(
            "SELECT TAG FROM cat WHERE LATBAND(EQUATORIAL, -1.25, 1.25) AND LATBAND(GALACTIC, 40, 90)",
        );
        let s = scan_of(&p.root);
        assert_eq!(s.region.convexes().len(), 1);
        assert_eq!(s.region.convexes()[0].constraints().len(), 4);
        assert_eq!(s.residual, Pred::True);
    }

    #[test]
    fn spatial_disjunction_of_two_caps_prunes_with_union_region() {
        let p = plan_text("SELECT TAG FROM cat WHERE CIRCLE(10, 0, 3600) OR CIRCLE(200, 40, 3600)");
        let s = scan_of(&p.root);
        assert_eq!(s.region.convexes().len(), 2);
        // residual is the whole expression, evaluated exactly
        assert!(matches!(s.residual, Pred::Or(_)));
        assert!(s.coverage.full().len() + s.coverage.partial().len() < 200);
    }

    #[test]
    fn unknown_attribute_is_a_plan_error() {
        let err = plan(
            &parse("SELECT TAG FROM cat WHERE width < 2").unwrap(),
            &meta(),
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("width"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn type_mismatches_are_plan_errors() {
        for q in [
            "SELECT TAG FROM cat WHERE class < 2",
            "SELECT TAG FROM cat WHERE class = 2",
            "SELECT TAG FROM cat WHERE r = QSO",
            "SELECT TAG FROM cat WHERE class > QSO",
            "SELECT MIN(class) FROM cat WHERE r < 99",
        ] {
            let err = plan(&parse(q).unwrap(), &meta(), &PlanOptions::default()).unwrap_err();
            assert!(matches!(err, crate::error::Error::Plan(_)), "{q}");
        }
    }

    #[test]
    fn extras_force_full_projection() {
        let p = plan_text("SELECT TAG FROM cat WHERE flux > 1.0");
        assert_eq!(scan_of(&p.root).projection, crate::store::Projection::Full);
        let p = plan_text("SELECT TAG FROM cat WHERE r < 20");
        assert_eq!(scan_of(&p.root).projection, crate::store::Projection::Tag);
        let p = plan_text("SELECT flux FROM cat WHERE r < 20");
        assert_eq!(scan_of(&p.root).projection, crate::store::Projection::Full);
        let p = plan_text("SELECT TAG FROM cat WHERE r < 20 ORDER BY flux");
        assert_eq!(scan_of(&p.root).projection, crate::store::Projection::Full);
    }

    #[test]
    fn count_plans_aggregate_over_scan() {
        let p = plan_text("SELECT COUNT FROM cat WHERE r < 22");
        assert!(matches!(
            &p.root,
            QetNode::Aggregate {
                agg: Agg::Count,
                ..
            }
        ));
        assert_eq!(p.output, OutputShape::Agg("count".into()));
    }

    #[test]
    fn dnf_blowup_is_rejected() {
        // (a1 OR a2)^7 conjunctions -> 2^7 = 128 > 64 disjuncts
        let caps = "(CIRCLE(1, 0, 60) OR CIRCLE(2, 0, 60))";
        let q = format!(
            "SELECT TAG FROM cat WHERE {}",
            vec![caps; 7].join(" AND ")
        );
        let err = plan(&parse(&q).unwrap(), &meta(), &PlanOptions::default()).unwrap_err();
        assert!(err.to_string().contains("64"));
    }

    #[test]
    fn no_index_forces_whole_sky() {
        let opts = PlanOptions {
            no_index: true,
            ..Default::default()
        };
        let p = plan(
            &parse("SELECT TAG FROM cat WHERE CIRCLE(185, 2, 3600)").unwrap(),
            &meta(),
            &opts,
        )
        .unwrap();
        let s = scan_of(&p.root);
        assert_eq!(s.coverage.full().len(), 8);
        assert!(matches!(s.residual, Pred::Spatial(_)));
    }

    #[test]
    fn set_ops_need_matching_projections() {
        let err = plan(
            &parse("SELECT TAG FROM cat WHERE r < 20 UNION SELECT FULL FROM cat WHERE g < 20").unwrap(),
            &meta(),
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("projection"));
        let err = plan(
            &parse("SELECT COUNT FROM cat WHERE r < 20 UNION SELECT COUNT FROM cat WHERE g < 20").unwrap(),
            &meta(),
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("aggregate"));
    }

    #[test]
    fn unknown_frame_is_a_plan_error() {
        let err = plan(
            &parse("SELECT TAG FROM cat WHERE LATBAND(SUPERGALACTIC, 0, 10)").unwrap(),
            &meta(),
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("SUPERGALACTIC"));
    }

    #[test]
    fn explain_renders_counts_and_estimates() {
        let p = plan_text("SELECT COUNT FROM cat WHERE CIRCLE(185, 2, 3600)");
        let text = explain(&p, &meta());
        assert!(text.contains("AGGREGATE count"), "{text}");
        assert!(text.contains("coverage(full="), "{text}");
        assert!(text.contains("estimate(min=0 expected=0 max=0)"), "{text}");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn dump_ast_is_stable() {
        let ast = parse("SELECT TAG FROM cat WHERE CIRCLE(185, 2, 3600) AND class = QSO").unwrap();
        assert_eq!(
            ast.dump(),
            "(query (select (proj TAG) (from cat) (where (and (circle 185 2 3600) (cmp class = QSO)))))"
        );
    }
}
