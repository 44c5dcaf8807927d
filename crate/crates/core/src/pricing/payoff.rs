//! Cash-flow payoff expressions over factor ids and their conditional expectations.
//!
//! Grammar: numbers, factor identifiers, `+ - * / ^`, parentheses and
//! `min(a, b, ...)` / `max(a, b, ...)`. `^` binds tightest and is right-associative.

use crate::error::{Error, Result};
use crate::filter::ConditionalDensity;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// Log-weight cut below the per-factor maximum used when forming tensor products.
const TENSOR_PRUNE_LOG: f64 = -46.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Factor(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn factor(id: &str) -> Self {
        Expr::Factor(id.to_string())
    }

    /// Factor ids referenced by the expression.
    pub fn factors(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_factors(&mut out);
        out
    }

    fn collect_factors(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Factor(id) => {
                out.insert(id.clone());
            }
            Expr::Neg(a) => a.collect_factors(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_factors(out);
                b.collect_factors(out);
            }
            Expr::Min(v) | Expr::Max(v) => v.iter().for_each(|e| e.collect_factors(out)),
        }
    }

    /// Evaluates with factor values supplied by `value`.
    pub fn eval<F: Fn(&str) -> f64 + Copy>(&self, value: F) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Factor(id) => value(id),
            Expr::Neg(a) => -a.eval(value),
            Expr::Add(a, b) => a.eval(value) + b.eval(value),
            Expr::Sub(a, b) => a.eval(value) - b.eval(value),
            Expr::Mul(a, b) => a.eval(value) * b.eval(value),
            Expr::Div(a, b) => a.eval(value) / b.eval(value),
            Expr::Pow(a, b) => a.eval(value).powf(b.eval(value)),
            Expr::Min(v) => v.iter().map(|e| e.eval(value)).fold(f64::INFINITY, f64::min),
            Expr::Max(v) => v.iter().map(|e| e.eval(value)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        if self.factors().is_empty() {
            Some(self.eval(|_| f64::NAN))
        } else {
            None
        }
    }

    fn flatten_product<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Mul(a, b) => {
                a.flatten_product(out);
                b.flatten_product(out);
            }
            other => out.push(other),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Factor(id) => write!(f, "{id}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Min(v) | Expr::Max(v) => {
                let name = if matches!(self, Expr::Min(_)) { "min" } else { "max" };
                let args: Vec<String> = v.iter().map(|e| e.to_string()).collect();
                write!(f, "{name}({})", args.join(", "))
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                if self.peek().is_some_and(|c| c == 'e' || c == 'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.peek().is_some_and(|c| c == '+' || c == '-') {
                        self.pos += 1;
                    }
                    if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                            self.pos += 1;
                        }
                    } else {
                        self.pos = save;
                    }
                }
                self.src[start..self.pos].parse::<f64>().map(Expr::Const).map_err(|_| Error::Expression {
                    pos: start,
                    msg: format!("bad number `{}`", &self.src[start..self.pos]),
                })
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '.') {
                    self.pos += c.len_utf8().max(1);
                }
                let name = &self.src[start..self.pos];
                if matches!(name, "min" | "max") && self.eat('(') {
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return Err(self.error("expected `)` after arguments"));
                    }
                    return Ok(if name == "min" { Expr::Min(args) } else { Expr::Max(args) });
                }
                Ok(Expr::Factor(name.to_string()))
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }
}

/// Conditional expectation of `expr` under independent per-factor densities.
///
/// Sums and products over disjoint factor groups are split analytically; any
/// remaining coupled sub-expression is integrated on the tensor product of the
/// factors' supports, limited to `tensor_limit` non-degenerate factors.
pub fn expectation(expr: &Expr, densities: &HashMap<String, ConditionalDensity>, tensor_limit: usize) -> Result<f64> {
    for id in expr.factors() {
        if !densities.contains_key(&id) {
            return Err(Error::MissingFactorState(id));
        }
    }
    Engine { densities, tensor_limit }.expect(expr)
}

struct Engine<'a> {
    densities: &'a HashMap<String, ConditionalDensity>,
    tensor_limit: usize,
}

impl Engine<'_> {
    fn expect(&self, e: &Expr) -> Result<f64> {
        if let Some(c) = e.constant_value() {
            return Ok(c);
        }
        match e {
            Expr::Factor(id) => Ok(self.densities[id].mean()),
            Expr::Neg(a) => Ok(-self.expect(a)?),
            Expr::Add(a, b) => Ok(self.expect(a)? + self.expect(b)?),
            Expr::Sub(a, b) => Ok(self.expect(a)? - self.expect(b)?),
            Expr::Div(a, b) => match b.constant_value() {
                Some(c) => Ok(self.expect(a)? / c),
                None => self.tensor(e),
            },
            Expr::Mul(..) => {
                let mut parts = Vec::new();
                e.flatten_product(&mut parts);
                if let Some(k) = parts.iter().position(|p| matches!(p, Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_))) {
                    return self.distribute(&parts, k);
                }
                self.product(parts)
            }
            _ => self.tensor(e),
        }
    }

    /// Expands the sum at `parts[k]` across the other multiplicands.
    fn distribute(&self, parts: &[&Expr], k: usize) -> Result<f64> {
        let with = |replacement: &Expr| {
            parts
                .iter()
                .enumerate()
                .map(|(i, p)| if i == k { replacement.clone() } else { (*p).clone() })
                .reduce(|a, b| Expr::Mul(Box::new(a), Box::new(b)))
                .expect("non-empty product")
        };
        match parts[k] {
            Expr::Add(a, b) => Ok(self.expect(&with(a))? + self.expect(&with(b))?),
            Expr::Sub(a, b) => Ok(self.expect(&with(a))? - self.expect(&with(b))?),
            Expr::Neg(a) => Ok(-self.expect(&with(a))?),
            _ => unreachable!("only sums are distributed"),
        }
    }

    /// Groups the multiplicands into classes sharing factors; classes are independent.
    fn product(&self, parts: Vec<&Expr>) -> Result<f64> {
        let mut groups: Vec<(BTreeSet<String>, Vec<&Expr>)> = Vec::new();
        let mut result = 1.0;
        for p in parts {
            let fs = p.factors();
            if fs.is_empty() {
                result *= p.eval(|_| f64::NAN);
                continue;
            }
            let mut merged = (fs, vec![p]);
            let mut i = 0;
            while i < groups.len() {
                if !groups[i].0.is_disjoint(&merged.0) {
                    let (gf, ge) = groups.swap_remove(i);
                    merged.0.extend(gf);
                    merged.1.extend(ge);
                } else {
                    i += 1;
                }
            }
            groups.push(merged);
        }
        for (_, members) in groups {
            result *= if members.len() == 1 {
                self.expect(members[0])?
            } else {
                let joined = members
                    .into_iter()
                    .cloned()
                    .reduce(|a, b| Expr::Mul(Box::new(a), Box::new(b)))
                    .expect("non-empty group");
                self.tensor(&joined)?
            };
        }
        Ok(result)
    }

    fn tensor(&self, e: &Expr) -> Result<f64> {
        let ids: Vec<String> = e.factors().into_iter().collect();
        let supports: Vec<Vec<(f64, f64)>> = ids
            .iter()
            .map(|id| {
                let d = &self.densities[id];
                let max = d.log_weights().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                d.nodes()
                    .iter()
                    .zip(d.log_weights())
                    .filter(|(_, &l)| l >= max + TENSOR_PRUNE_LOG)
                    .map(|(&x, &l)| (x, l.exp()))
                    .collect()
            })
            .collect();
        let dims = supports.iter().filter(|s| s.len() > 1).count();
        if dims > self.tensor_limit {
            return Err(Error::TensorTooLarge {
                dims,
                limit: self.tensor_limit,
            });
        }
        let mut idx = vec![0usize; ids.len()];
        let mut values = vec![0.0; ids.len()];
        let mut total = 0.0;
        let mut mass = 0.0;
        loop {
            let mut w = 1.0;
            for (k, s) in supports.iter().enumerate() {
                values[k] = s[idx[k]].0;
                w *= s[idx[k]].1;
            }
            let f = e.eval(|id| values[ids.iter().position(|x| x == id).unwrap()]);
            if !f.is_finite() {
                return Err(Error::NonFiniteIntegrand { index: 0, node: values[0] });
            }
            total += w * f;
            mass += w;
            // odometer increment
            let mut k = 0;
            loop {
                if k == idx.len() {
                    // pruning drops at most e^-46 of the mass; renormalize over what is kept
                    return Ok(total / mass);
                }
                idx[k] += 1;
                if idx[k] < supports[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::PriorDistribution;
    use approx::assert_abs_diff_eq;

    fn env() -> HashMap<String, ConditionalDensity> {
        let mut m = HashMap::new();
        let two = PriorDistribution::atoms(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let three = PriorDistribution::atoms(vec![(0.0, 0.25), (2.0, 0.75)]).unwrap();
        m.insert("A".into(), ConditionalDensity::from_prior(&two, 0).unwrap());
        m.insert("B".into(), ConditionalDensity::from_prior(&three, 0).unwrap());
        m.insert("C".into(), ConditionalDensity::degenerate(0.0, 4.0));
        m
    }

    #[test]
    fn parse_and_eval() {
        let e = Expr::parse("2 * X + max(Y, 1.5e0) ^ 2 - -3 / (1 + Z)").unwrap();
        let v = e.eval(|id| match id {
            "X" => 1.0,
            "Y" => 2.0,
            _ => 0.0,
        });
        assert_abs_diff_eq!(v, 2.0 + 4.0 + 3.0);
        assert_eq!(e.factors().into_iter().collect::<Vec<_>>(), vec!["X", "Y", "Z"]);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(|_| 0.0), 512.0);
        assert_eq!(Expr::parse("-2^2").unwrap().eval(|_| 0.0), -4.0);
        assert_eq!(Expr::parse("min(X, 3, Y)").unwrap().eval(|_| 5.0), 3.0);
    }

    #[test]
    fn parse_errors_report_position() {
        for bad in ["1 +", "(X", "X $ 2", "max(1,", "2 3"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Expression { .. })), "{bad}");
        }
        match Expr::parse("X + $").unwrap_err() {
            Error::Expression { pos, .. } => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expectations_by_enumeration() {
        let env = env();
        // enumerate the four joint atoms of (A, B) directly
        let joint = [(1.0, 0.0, 0.125), (1.0, 2.0, 0.375), (3.0, 0.0, 0.125), (3.0, 2.0, 0.375)];
        let check = |src: &str, f: &dyn Fn(f64, f64) -> f64| {
            let e = Expr::parse(src).unwrap();
            let exact: f64 = joint.iter().map(|&(a, b, p)| p * f(a, b)).sum();
            let got = expectation(&e, &env, 3).unwrap();
            assert_abs_diff_eq!(got, exact, epsilon = 1e-14);
        };
        check("A + B", &|a, b| a + b);
        check("A * B * C", &|a, b| a * b * 4.0);
        check("max(A, B)", &|a, b| a.max(b));
        check("A * (A - B) * 2", &|a, b| a * (a - b) * 2.0);
        check("A ^ 2 / 4", &|a, _| a * a / 4.0);
        check("C ^ A", &|a, _| 4f64.powf(a));
        check("7", &|_, _| 7.0);
    }

    #[test]
    fn tensor_limit_and_missing_factor() {
        let env = env();
        let e = Expr::parse("max(A, B)").unwrap();
        assert_eq!(expectation(&e, &env, 1).unwrap_err(), Error::TensorTooLarge { dims: 2, limit: 1 });
        // degenerate factors do not count towards the limit
        assert!(expectation(&Expr::parse("max(A, C)").unwrap(), &env, 1).is_ok());
        assert_eq!(
            expectation(&Expr::parse("A + Q").unwrap(), &env, 3).unwrap_err(),
            Error::MissingFactorState("Q".into())
        );
    }
}
