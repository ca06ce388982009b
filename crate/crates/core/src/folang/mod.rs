//! First-order language of images: colour `C`, the position relations
//! `U`, `R`, `D1`, `D2`, equality, and the distance guard `dist>`.

mod ast;
mod eval;
mod parse;

pub use ast::{Formula, Relation, WellFormednessError};
pub use eval::{eval, Assignment, Compiled, EvalError, Evaluator, PlainGrid, Structure, DEFAULT_WORK_BUDGET};
pub use parse::{parse, SyntaxError};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Pixel;
    use crate::image::{derive_seed, sample, Image, SampleSpec};
    use alloc::string::ToString;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const TAUTOLOGY_1: &str = "forall x. forall y. forall z. (R(x,y) & U(y,z)) -> D1(x,z)";
    const TAUTOLOGY_2: &str = "forall x. forall z. (exists y. (R(x,y) & U(y,z))) <-> D1(x,z)";

    fn holds(img: &Image, text: &str) -> bool {
        Evaluator::default().holds(img, &parse(text).unwrap()).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse("exists x. C(x)").unwrap(), Formula::exists("x", Formula::color("x")));
        let t = parse(TAUTOLOGY_1).unwrap();
        let expected = Formula::forall(
            "x",
            Formula::forall(
                "y",
                Formula::forall(
                    "z",
                    Formula::implies(
                        Formula::and(Formula::rel(Relation::Right, "x", "y"), Formula::rel(Relation::Up, "y", "z")),
                        Formula::rel(Relation::Diag1, "x", "z"),
                    ),
                ),
            ),
        );
        assert_eq!(t, expected);
        t.check_sentence().unwrap();

        let free = parse("exists x. C(y)").unwrap();
        assert_eq!(free.check_sentence(), Err(WellFormednessError::UnboundVariable("y".into())));
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse("!C(x) & C(y) | C(z) -> C(x) <-> C(y)").unwrap();
        let expected = Formula::iff(
            Formula::implies(
                Formula::or(Formula::and(Formula::not(Formula::color("x")), Formula::color("y")), Formula::color("z")),
                Formula::color("x"),
            ),
            Formula::color("y"),
        );
        assert_eq!(f, expected);
        assert_eq!(
            parse("C(a) -> C(b) -> C(c)").unwrap(),
            Formula::implies(Formula::color("a"), Formula::implies(Formula::color("b"), Formula::color("c")))
        );
        assert_eq!(
            parse("x != y # comment\n").unwrap(),
            Formula::not(Formula::Eq("x".into(), "y".into()))
        );
        assert_eq!(parse("dist>(x, y, 2)").unwrap(), Formula::dist_gt("x", "y", 2));
        assert_eq!(parse("not true").unwrap(), Formula::not(Formula::True));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert_eq!(parse("exists x C(x)").unwrap_err().position, 9);
        assert_eq!(parse("C(x) &").unwrap_err().position, 6);
        assert_eq!(parse("Q(x)").unwrap_err().position, 0);
        assert_eq!(parse("C(x) $").unwrap_err().position, 5);
        assert_eq!(parse("dist>(x,y,z)").unwrap_err().position, 10);
        assert!(parse("forall forall. C(x)").is_err());
        assert!(parse("(C(x)").is_err());
    }

    #[test]
    fn shadowing_is_rejected() {
        let f = parse("exists x. exists x. C(x)").unwrap();
        assert_eq!(f.check_sentence(), Err(WellFormednessError::ShadowedVariable("x".into())));
    }

    #[test]
    fn eval_examples() {
        let white = Image::white(5).unwrap();
        assert!(!holds(&white, "exists x. C(x)"));
        let mut one = white.clone();
        one.set(Pixel::new(3, 1), true);
        assert!(holds(&one, "exists x. C(x)"));
        assert!(holds(&white, TAUTOLOGY_1));
        assert!(holds(&white, TAUTOLOGY_2));
    }

    #[test]
    fn tautologies_on_random_images() {
        let t1 = parse(TAUTOLOGY_1).unwrap();
        let t2 = parse(TAUTOLOGY_2).unwrap();
        let ev = Evaluator::default();
        for i in 0..200u64 {
            let n = 3 + (i % 6) as usize;
            let img = sample(&SampleSpec::new(n, 0.5, derive_seed(11, i)).unwrap());
            assert!(ev.holds(&img, &t1).unwrap());
            assert!(ev.holds(&img, &t2).unwrap());
        }
    }

    #[test]
    fn relation_semantics_on_the_torus() {
        let img = Image::white(4).unwrap();
        let ev = Evaluator::default();
        let check = |text: &str, x: Pixel, y: Pixel| {
            let a = Assignment::new().with("x", x).with("y", y);
            ev.eval(&img, &parse(text).unwrap(), &a, None).unwrap()
        };
        assert!(check("R(x,y)", Pixel::new(1, 3), Pixel::new(1, 0)));
        assert!(check("U(x,y)", Pixel::new(0, 2), Pixel::new(3, 2)));
        assert!(check("D1(x,y)", Pixel::new(0, 3), Pixel::new(3, 0)));
        assert!(check("D2(x,y)", Pixel::new(3, 3), Pixel::new(0, 0)));
        assert!(!check("R(x,y)", Pixel::new(1, 0), Pixel::new(1, 3)));
        assert!(check("dist>(x,y,1)", Pixel::new(0, 0), Pixel::new(2, 0)));
        assert!(!check("dist>(x,y,1)", Pixel::new(0, 0), Pixel::new(3, 3)));
    }

    #[test]
    fn unassigned_free_variable() {
        let img = Image::white(3).unwrap();
        let err = eval(&img, &parse("C(x)").unwrap(), &Assignment::new(), None).unwrap_err();
        assert_eq!(err, EvalError::UnassignedFreeVariable("x".into()));
    }

    #[test]
    fn work_budget_is_enforced() {
        let img = Image::white(8).unwrap();
        let f = parse("forall x. forall y. forall z. C(x) | !C(y) | C(z)").unwrap();
        let err = Evaluator::new(10_000).holds(&img, &f).unwrap_err();
        assert_eq!(err, EvalError::WorkBudgetExceeded(10_000));
        assert!(Evaluator::new(64 + 64 * 64 + 64 * 64 * 64).holds(&img, &f).unwrap());
    }

    #[test]
    fn full_domain_equals_unrestricted() {
        let f = parse("exists y. (R(x,y) & C(y)) | forall z. (dist>(x,z,1) | !C(z))").unwrap();
        for seed in 0..30 {
            let img = sample(&SampleSpec::new(5, 0.4, seed).unwrap());
            let all: Vec<Pixel> = img.geometry().pixels().collect();
            for x in img.geometry().pixels() {
                let a = Assignment::new().with("x", x);
                assert_eq!(eval(&img, &f, &a, None).unwrap(), eval(&img, &f, &a, Some(&all)).unwrap());
            }
        }
    }

    #[test]
    fn domain_restricts_quantifiers_only() {
        let mut img = Image::white(6).unwrap();
        img.set(Pixel::new(0, 5), true);
        let ball = img.geometry().ball(Pixel::new(0, 0), 1).unwrap();
        let a = Assignment::new().with("z", Pixel::new(0, 0));
        // (0,5) is inside the wrapped ball around (0,0) and is its left neighbour.
        let f = parse("exists y. (R(y,z) & C(y))").unwrap();
        assert!(eval(&img, &f, &a, Some(&ball)).unwrap());

        let far = img.geometry().ball(Pixel::new(3, 3), 1).unwrap();
        let a = Assignment::new().with("z", Pixel::new(3, 3));
        assert!(!eval(&img, &parse("exists y. C(y)").unwrap(), &a, Some(&far)).unwrap());
        assert!(eval(&img, &parse("exists y. C(y)").unwrap(), &a, None).unwrap());

        let outside = Assignment::new().with("z", Pixel::new(0, 0));
        assert_eq!(
            eval(&img, &parse("C(z)").unwrap(), &outside, Some(&far)),
            Err(EvalError::AssignmentOutsideDomain("z".into()))
        );
    }

    #[test]
    fn color_swap_matches_complement() {
        let f = parse("exists x. C(x) & forall y. (R(x,y) -> !C(y))").unwrap();
        let g = f.color_swapped();
        for seed in 0..40 {
            let img = sample(&SampleSpec::new(4, 0.5, seed).unwrap());
            assert_eq!(holds(&img, &f.to_string()), holds(&img.complement(), &g.to_string()));
        }
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let var = prop::sample::select(alloc::vec!["x", "y", "z"]);
        let leaf = prop_oneof![
            Just(Formula::True),
            Just(Formula::False),
            var.clone().prop_map(|v| Formula::color(v)),
            (prop::sample::select(Relation::ALL.to_vec()), var.clone(), var.clone())
                .prop_map(|(r, a, b)| Formula::rel(r, a, b)),
            (var.clone(), var.clone()).prop_map(|(a, b)| Formula::Eq(a.into(), b.into())),
            (var.clone(), var.clone(), 0u32..4).prop_map(|(a, b, c)| Formula::dist_gt(a, b, c)),
        ];
        leaf.prop_recursive(4, 24, 2, move |inner| {
            let var = prop::sample::select(alloc::vec!["x", "y", "z"]);
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::iff(a, b)),
                (var.clone(), inner.clone()).prop_map(|(v, b)| Formula::forall(v, b)),
                (var, inner).prop_map(|(v, b)| Formula::exists(v, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(f in arb_formula()) {
            let text = f.to_string();
            prop_assert_eq!(parse(&text).unwrap(), f);
        }

        #[test]
        fn quantifier_duality(f in arb_formula(), seed in 0u64..1000) {
            let img = sample(&SampleSpec::new(3, 0.5, seed).unwrap());
            let a = Assignment::new()
                .with("x", Pixel::new(0, 1))
                .with("y", Pixel::new(2, 2))
                .with("z", Pixel::new(1, 0));
            let lhs = Formula::not(Formula::forall("x", f.clone()));
            let rhs = Formula::exists("x", Formula::not(f.clone()));
            prop_assert_eq!(eval(&img, &lhs, &a, None).unwrap(), eval(&img, &rhs, &a, None).unwrap());
            let lhs = Formula::not(Formula::and(f.clone(), Formula::color("y")));
            let rhs = Formula::or(Formula::not(f), Formula::not(Formula::color("y")));
            prop_assert_eq!(eval(&img, &lhs, &a, None).unwrap(), eval(&img, &rhs, &a, None).unwrap());
        }
    }
}
