use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::grid::Offset;

/// The four binary position relations of the image vocabulary.
///
/// Positions follow the usual picture orientation: "right" increases the
/// column, "up" decreases the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    /// `U(x,y)`: `y` is directly above `x`.
    Up,
    /// `R(x,y)`: `y` is directly right of `x`.
    Right,
    /// `D1(x,y)`: `y` is above and right of `x`.
    Diag1,
    /// `D2(x,y)`: `y` is below and right of `x`.
    Diag2,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Up, Relation::Right, Relation::Diag1, Relation::Diag2];

    /// `(drow, dcol)` with `y = x + offset`.
    pub fn offset(self) -> Offset {
        match self {
            Relation::Up => (-1, 0),
            Relation::Right => (0, 1),
            Relation::Diag1 => (-1, 1),
            Relation::Diag2 => (1, 1),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Up => "U",
            Relation::Right => "R",
            Relation::Diag1 => "D1",
            Relation::Diag2 => "D2",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.symbol() == s)
    }
}

/// First-order formula over `{C, U, R, D1, D2}` with equality and a distance
/// guard `dist>(x, y, c)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    /// `C(x)`: `x` is black.
    Color(String),
    Rel(Relation, String, String),
    Eq(String, String),
    /// `dist>(x, y, c)`: graph distance between `x` and `y` exceeds `c`.
    DistGt(String, String, u32),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WellFormednessError {
    #[error("variable `{0}` is not bound by any quantifier")]
    UnboundVariable(String),
    #[error("variable `{0}` is bound by more than one enclosing quantifier")]
    ShadowedVariable(String),
    #[error("expected exactly one free variable, found {0:?}")]
    FreeVariableCount(Vec<String>),
}

impl Formula {
    pub fn color(v: &str) -> Formula {
        Formula::Color(v.into())
    }

    pub fn rel(rel: Relation, a: &str, b: &str) -> Formula {
        Formula::Rel(rel, a.into(), b.into())
    }

    pub fn dist_gt(a: &str, b: &str, c: u32) -> Formula {
        Formula::DistGt(a.into(), b.into(), c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(v: &str, body: Formula) -> Formula {
        Formula::Forall(v.into(), Box::new(body))
    }

    pub fn exists(v: &str, body: Formula) -> Formula {
        Formula::Exists(v.into(), Box::new(body))
    }

    /// Conjunction of all items, `True` when empty.
    pub fn conjunction(items: impl IntoIterator<Item = Formula>) -> Formula {
        items.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Disjunction of all items, `False` when empty.
    pub fn disjunction(items: impl IntoIterator<Item = Formula>) -> Formula {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    /// Free variables, sorted.
    pub fn free_vars(&self) -> Vec<String> {
        let mut free = BTreeSet::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut free);
        free.into_iter().collect()
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, free: &mut BTreeSet<String>) {
        let mut note = |v: &'a String, bound: &Vec<&'a str>| {
            if !bound.contains(&v.as_str()) {
                free.insert(v.clone());
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Color(v) => note(v, bound),
            Formula::Rel(_, a, b) | Formula::Eq(a, b) | Formula::DistGt(a, b, _) => {
                note(a, bound);
                note(b, bound);
            }
            Formula::Not(f) => f.collect_free(bound, free),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_free(bound, free);
                b.collect_free(bound, free);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                bound.push(v);
                f.collect_free(bound, free);
                bound.pop();
            }
        }
    }

    /// Every variable name occurring in the formula, free or bound.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_all(&mut out);
        out
    }

    fn collect_all(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Color(v) => {
                out.insert(v.clone());
            }
            Formula::Rel(_, a, b) | Formula::Eq(a, b) | Formula::DistGt(a, b, _) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            Formula::Not(f) => f.collect_all(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_all(out);
                b.collect_all(out);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                out.insert(v.clone());
                f.collect_all(out);
            }
        }
    }

    /// Rejects shadowed quantifiers and, for sentences, free variables.
    pub fn check_sentence(&self) -> Result<(), WellFormednessError> {
        self.check_no_shadowing()?;
        match self.free_vars().into_iter().next() {
            Some(v) => Err(WellFormednessError::UnboundVariable(v)),
            None => Ok(()),
        }
    }

    /// Checks the formula has exactly one free variable and returns it.
    pub fn single_free_var(&self) -> Result<String, WellFormednessError> {
        self.check_no_shadowing()?;
        let mut free = self.free_vars();
        if free.len() != 1 {
            return Err(WellFormednessError::FreeVariableCount(free));
        }
        Ok(free.pop().unwrap())
    }

    pub fn check_no_shadowing(&self) -> Result<(), WellFormednessError> {
        fn walk<'a>(f: &'a Formula, bound: &mut Vec<&'a str>) -> Result<(), WellFormednessError> {
            match f {
                Formula::Not(g) => walk(g, bound),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    walk(a, bound)?;
                    walk(b, bound)
                }
                Formula::Forall(v, g) | Formula::Exists(v, g) => {
                    if bound.contains(&v.as_str()) {
                        return Err(WellFormednessError::ShadowedVariable(v.clone()));
                    }
                    bound.push(v);
                    let res = walk(g, bound);
                    bound.pop();
                    res
                }
                _ => Ok(()),
            }
        }
        walk(self, &mut Vec::new())
    }

    /// Number of nested quantifiers along the deepest branch.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Not(f) => f.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Formula::Forall(_, f) | Formula::Exists(_, f) => 1 + f.quantifier_depth(),
            _ => 0,
        }
    }

    /// Exchanges black and white: every `C(v)` becomes `!C(v)`.
    pub fn color_swapped(&self) -> Formula {
        self.map_atoms(&|atom| match atom {
            Formula::Color(_) => Formula::not(atom.clone()),
            other => other.clone(),
        })
    }

    /// Confines every quantifier to the radius-`r` ball around `center`.
    pub fn relativize(&self, center: &str, r: u32) -> Formula {
        let inside = |v: &str| Formula::not(Formula::dist_gt(center, v, r));
        match self {
            Formula::Forall(v, f) => Formula::forall(v, Formula::implies(inside(v), f.relativize(center, r))),
            Formula::Exists(v, f) => Formula::exists(v, Formula::and(inside(v), f.relativize(center, r))),
            Formula::Not(f) => Formula::not(f.relativize(center, r)),
            Formula::And(a, b) => Formula::and(a.relativize(center, r), b.relativize(center, r)),
            Formula::Or(a, b) => Formula::or(a.relativize(center, r), b.relativize(center, r)),
            Formula::Implies(a, b) => Formula::implies(a.relativize(center, r), b.relativize(center, r)),
            Formula::Iff(a, b) => Formula::iff(a.relativize(center, r), b.relativize(center, r)),
            atom => atom.clone(),
        }
    }

    /// Renames free occurrences of `from` to `to`.
    pub fn rename_free(&self, from: &str, to: &str) -> Formula {
        let swap = |v: &String| if v == from { String::from(to) } else { v.clone() };
        match self {
            Formula::Color(v) => Formula::Color(swap(v)),
            Formula::Rel(rel, a, b) => Formula::Rel(*rel, swap(a), swap(b)),
            Formula::Eq(a, b) => Formula::Eq(swap(a), swap(b)),
            Formula::DistGt(a, b, c) => Formula::DistGt(swap(a), swap(b), *c),
            Formula::Not(f) => Formula::not(f.rename_free(from, to)),
            Formula::And(a, b) => Formula::and(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Or(a, b) => Formula::or(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Implies(a, b) => Formula::implies(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Iff(a, b) => Formula::iff(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Forall(v, f) if v != from => Formula::forall(v, f.rename_free(from, to)),
            Formula::Exists(v, f) if v != from => Formula::exists(v, f.rename_free(from, to)),
            other => other.clone(),
        }
    }

    fn map_atoms(&self, g: &dyn Fn(&Formula) -> Formula) -> Formula {
        match self {
            Formula::Not(f) => Formula::not(f.map_atoms(g)),
            Formula::And(a, b) => Formula::and(a.map_atoms(g), b.map_atoms(g)),
            Formula::Or(a, b) => Formula::or(a.map_atoms(g), b.map_atoms(g)),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(g), b.map_atoms(g)),
            Formula::Iff(a, b) => Formula::iff(a.map_atoms(g), b.map_atoms(g)),
            Formula::Forall(v, f) => Formula::forall(v, f.map_atoms(g)),
            Formula::Exists(v, f) => Formula::exists(v, f.map_atoms(g)),
            atom => g(atom),
        }
    }
}

/// Prints in the concrete syntax accepted by [`parse`](super::parse).
/// Compound subformulas are parenthesised, so printing and reparsing is
/// the identity.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Color(v) => write!(f, "C({v})"),
            Formula::Rel(rel, a, b) => write!(f, "{}({a},{b})", rel.symbol()),
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::DistGt(a, b, c) => write!(f, "dist>({a},{b},{c})"),
            Formula::Not(g) => match **g {
                Formula::Eq(..) => write!(f, "!({g})"),
                _ => write!(f, "!{}", Paren(g)),
            },
            Formula::And(a, b) => write!(f, "{} & {}", Paren(a), Paren(b)),
            Formula::Or(a, b) => write!(f, "{} | {}", Paren(a), Paren(b)),
            Formula::Implies(a, b) => write!(f, "{} -> {}", Paren(a), Paren(b)),
            Formula::Iff(a, b) => write!(f, "{} <-> {}", Paren(a), Paren(b)),
            Formula::Forall(v, g) => write!(f, "forall {v}. {g}"),
            Formula::Exists(v, g) => write!(f, "exists {v}. {g}"),
        }
    }
}

struct Paren<'a>(&'a Formula);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Formula::True
            | Formula::False
            | Formula::Color(_)
            | Formula::Rel(..)
            | Formula::DistGt(..)
            | Formula::Not(_) => write!(f, "{}", self.0),
            other => f.write_str(&format!("({other})")),
        }
    }
}
