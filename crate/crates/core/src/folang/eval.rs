//! Brute-force Tarskian evaluation.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::{Formula, Relation};
use crate::grid::Pixel;
use crate::image::Image;

/// Quantifier iterations allowed per evaluation unless configured otherwise.
pub const DEFAULT_WORK_BUDGET: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("free variable `{0}` has no assigned pixel")]
    UnassignedFreeVariable(String),
    #[error("variable `{0}` is assigned a pixel outside the quantifier domain")]
    AssignmentOutsideDomain(String),
    #[error("assigned element {0} is outside the structure")]
    AssignmentOutOfRange(usize),
    #[error("evaluation exceeded the work budget of {0} quantifier steps")]
    WorkBudgetExceeded(u64),
}

/// A finite structure over the image vocabulary. Elements are `0..universe()`.
pub trait Structure {
    fn universe(&self) -> usize;
    fn is_black(&self, e: usize) -> bool;
    /// Whether `b` is the `rel`-neighbour of `a`.
    fn related(&self, rel: Relation, a: usize, b: usize) -> bool;
    fn distance(&self, a: usize, b: usize) -> usize;
}

/// Images are structures on the torus; elements are row-major indices.
impl Structure for Image {
    fn universe(&self) -> usize {
        self.geometry().cells()
    }

    #[inline]
    fn is_black(&self, e: usize) -> bool {
        self.get_index(e)
    }

    #[inline]
    fn related(&self, rel: Relation, a: usize, b: usize) -> bool {
        let g = self.geometry();
        g.index(g.wrap_add(g.pixel(a), rel.offset())) == b
    }

    #[inline]
    fn distance(&self, a: usize, b: usize) -> usize {
        let g = self.geometry();
        g.distance(g.pixel(a), g.pixel(b))
    }
}

/// A `side x side` square without wraparound: relations stop at the border
/// and distance is the plain Chebyshev distance. Used to evaluate local
/// formulas on an isolated ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlainGrid {
    side: usize,
    bits: u64,
}

impl PlainGrid {
    /// `bits` holds the cells in row-major order; `side * side <= 64`.
    pub fn new(side: usize, bits: u64) -> PlainGrid {
        assert!(side >= 1 && side * side <= 64, "plain grid side {side} out of range");
        PlainGrid { side, bits }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn center(&self) -> usize {
        let c = self.side / 2;
        c * self.side + c
    }
}

impl Structure for PlainGrid {
    fn universe(&self) -> usize {
        self.side * self.side
    }

    #[inline]
    fn is_black(&self, e: usize) -> bool {
        self.bits >> e & 1 == 1
    }

    fn related(&self, rel: Relation, a: usize, b: usize) -> bool {
        let (dr, dc) = rel.offset();
        let row = (a / self.side) as isize + dr;
        let col = (a % self.side) as isize + dc;
        let s = self.side as isize;
        (0..s).contains(&row) && (0..s).contains(&col) && (row * s + col) as usize == b
    }

    fn distance(&self, a: usize, b: usize) -> usize {
        let (ar, ac) = (a / self.side, a % self.side);
        let (br, bc) = (b / self.side, b % self.side);
        ar.abs_diff(br).max(ac.abs_diff(bc))
    }
}

/// Pixels assigned to free variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pairs: Vec<(String, Pixel)>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment::default()
    }

    pub fn with(mut self, var: &str, x: Pixel) -> Assignment {
        self.set(var, x);
        self
    }

    pub fn set(&mut self, var: &str, x: Pixel) {
        match self.pairs.iter_mut().find(|(v, _)| v == var) {
            Some(slot) => slot.1 = x,
            None => self.pairs.push((var.into(), x)),
        }
    }

    pub fn get(&self, var: &str) -> Option<Pixel> {
        self.pairs.iter().find(|(v, _)| v == var).map(|&(_, x)| x)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(bool),
    Color(usize),
    Rel(Relation, usize, usize),
    Eq(usize, usize),
    DistGt(usize, usize, usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
    Forall(usize, Box<Node>),
    Exists(usize, Box<Node>),
}

/// A formula with variables resolved to slots, reusable across structures.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    free: Vec<String>,
    slots: usize,
}

impl Compiled {
    /// Resolves variables. `free` lists the variables that will be supplied
    /// at evaluation time, in order; any other free variable is an error.
    pub fn new(f: &Formula, free: &[&str]) -> Result<Compiled, EvalError> {
        let mut scope: Vec<String> = free.iter().map(|&s| s.into()).collect();
        let mut slots = scope.len();
        let root = compile(f, &mut scope, &mut slots)?;
        Ok(Compiled { root, free: free.iter().map(|&s| s.into()).collect(), slots })
    }

    pub fn free_vars(&self) -> &[String] {
        &self.free
    }

    /// Evaluates with `env[i]` assigned to the i-th free variable.
    /// Quantifiers range over `domain` when given, otherwise over the whole
    /// universe.
    pub fn eval<S: Structure>(
        &self,
        s: &S,
        env: &[usize],
        domain: Option<&[usize]>,
        budget: u64,
    ) -> Result<bool, EvalError> {
        assert_eq!(env.len(), self.free.len(), "one element per free variable");
        for (i, &e) in env.iter().enumerate() {
            if e >= s.universe() {
                return Err(EvalError::AssignmentOutOfRange(e));
            }
            if let Some(d) = domain {
                if !d.contains(&e) {
                    return Err(EvalError::AssignmentOutsideDomain(self.free[i].clone()));
                }
            }
        }
        let mut values = vec![0usize; self.slots];
        values[..env.len()].copy_from_slice(env);
        let len = domain.map_or(s.universe(), <[usize]>::len);
        let mut run = Run { s, domain, len, values, remaining: budget, budget };
        run.eval(&self.root)
    }
}

fn compile(f: &Formula, scope: &mut Vec<String>, slots: &mut usize) -> Result<Node, EvalError> {
    let lookup = |v: &String, scope: &Vec<String>| {
        scope
            .iter()
            .rposition(|s| s == v)
            .ok_or_else(|| EvalError::UnassignedFreeVariable(v.clone()))
    };
    let bin = |a: &Formula, b: &Formula, scope: &mut Vec<String>, slots: &mut usize| -> Result<(Box<Node>, Box<Node>), EvalError> {
        Ok((Box::new(compile(a, scope, slots)?), Box::new(compile(b, scope, slots)?)))
    };
    Ok(match f {
        Formula::True => Node::Const(true),
        Formula::False => Node::Const(false),
        Formula::Color(v) => Node::Color(lookup(v, scope)?),
        Formula::Rel(rel, a, b) => Node::Rel(*rel, lookup(a, scope)?, lookup(b, scope)?),
        Formula::Eq(a, b) => Node::Eq(lookup(a, scope)?, lookup(b, scope)?),
        Formula::DistGt(a, b, c) => Node::DistGt(lookup(a, scope)?, lookup(b, scope)?, *c as usize),
        Formula::Not(g) => Node::Not(Box::new(compile(g, scope, slots)?)),
        Formula::And(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::And(a, b)
        }
        Formula::Or(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Or(a, b)
        }
        Formula::Implies(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Implies(a, b)
        }
        Formula::Iff(a, b) => {
            let (a, b) = bin(a, b, scope, slots)?;
            Node::Iff(a, b)
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            scope.push(v.clone());
            let slot = scope.len() - 1;
            *slots = (*slots).max(scope.len());
            let body = compile(g, scope, slots);
            scope.pop();
            let body = Box::new(body?);
            if matches!(f, Formula::Forall(..)) {
                Node::Forall(slot, body)
            } else {
                Node::Exists(slot, body)
            }
        }
    })
}

struct Run<'a, S> {
    s: &'a S,
    domain: Option<&'a [usize]>,
    len: usize,
    values: Vec<usize>,
    remaining: u64,
    budget: u64,
}

impl<S: Structure> Run<'_, S> {
    fn eval(&mut self, node: &Node) -> Result<bool, EvalError> {
        let v = &self.values;
        Ok(match node {
            Node::Const(b) => *b,
            Node::Color(a) => self.s.is_black(v[*a]),
            Node::Rel(rel, a, b) => self.s.related(*rel, v[*a], v[*b]),
            Node::Eq(a, b) => v[*a] == v[*b],
            Node::DistGt(a, b, c) => self.s.distance(v[*a], v[*b]) > *c,
            Node::Not(g) => !self.eval(g)?,
            Node::And(a, b) => self.eval(a)? && self.eval(b)?,
            Node::Or(a, b) => self.eval(a)? || self.eval(b)?,
            Node::Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Node::Iff(a, b) => self.eval(a)? == self.eval(b)?,
            Node::Forall(slot, body) => {
                for i in 0..self.len {
                    self.tick()?;
                    self.values[*slot] = self.domain.map_or(i, |d| d[i]);
                    if !self.eval(body)? {
                        return Ok(false);
                    }
                }
                true
            }
            Node::Exists(slot, body) => {
                for i in 0..self.len {
                    self.tick()?;
                    self.values[*slot] = self.domain.map_or(i, |d| d[i]);
                    if self.eval(body)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    #[inline]
    fn tick(&mut self) -> Result<(), EvalError> {
        if self.remaining == 0 {
            return Err(EvalError::WorkBudgetExceeded(self.budget));
        }
        self.remaining -= 1;
        Ok(())
    }
}

/// Evaluation with a configurable work budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Evaluator {
    pub budget: u64,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator { budget: DEFAULT_WORK_BUDGET }
    }
}

impl Evaluator {
    pub fn new(budget: u64) -> Evaluator {
        Evaluator { budget }
    }

    /// Evaluates `f` on an image. Quantifiers range over `domain` when given;
    /// relations are always decided on the torus.
    pub fn eval(
        &self,
        img: &Image,
        f: &Formula,
        a: &Assignment,
        domain: Option<&[Pixel]>,
    ) -> Result<bool, EvalError> {
        let free = f.free_vars();
        let mut env = Vec::with_capacity(free.len());
        for v in &free {
            let x = a.get(v).ok_or_else(|| EvalError::UnassignedFreeVariable(v.clone()))?;
            if x.row >= img.n() || x.col >= img.n() {
                return Err(EvalError::AssignmentOutOfRange(x.row * img.n() + x.col));
            }
            env.push(img.geometry().index(x));
        }
        let names: Vec<&str> = free.iter().map(String::as_str).collect();
        let compiled = Compiled::new(f, &names)?;
        let domain: Option<Vec<usize>> = domain.map(|d| d.iter().map(|&x| img.geometry().index(x)).collect());
        compiled.eval(img, &env, domain.as_deref(), self.budget)
    }

    /// Evaluates a sentence on an image over the full pixel set.
    pub fn holds(&self, img: &Image, sentence: &Formula) -> Result<bool, EvalError> {
        self.eval(img, sentence, &Assignment::new(), None)
    }
}

/// [`Evaluator::eval`] with the default budget.
pub fn eval(img: &Image, f: &Formula, a: &Assignment, domain: Option<&[Pixel]>) -> Result<bool, EvalError> {
    Evaluator::default().eval(img, f, a, domain)
}
