use std::fmt;

use crate::error::{EvalError, ParseError};
use crate::scalar::Scalar;

/// Coefficient expression in the single variable `phi`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<T> {
    Const(T),
    Var,
    Add(Box<Expr<T>>, Box<Expr<T>>),
    Sub(Box<Expr<T>>, Box<Expr<T>>),
    Mul(Box<Expr<T>>, Box<Expr<T>>),
    Div(Box<Expr<T>>, Box<Expr<T>>),
    Neg(Box<Expr<T>>),
    /// Power with a constant exponent.
    Pow(Box<Expr<T>>, T),
    Abs(Box<Expr<T>>),
}

impl<T: Scalar> Expr<T> {
    pub fn constant(&self) -> Option<T> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, x: T) -> Result<T, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == T::zero() {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Pow(a, p) => {
                let b = a.eval(x)?;
                if b < T::zero() && p.fract() != T::zero() {
                    return Err(EvalError::NegativeBase);
                }
                if b == T::zero() && *p < T::zero() {
                    return Err(EvalError::PowerPole);
                }
                powc(b, *p)
            }
            Expr::Abs(a) => a.eval(x)?.abs(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Symbolic derivative with respect to `phi`.
    ///
    /// `abs(u)` differentiates to `u / abs(u) * u'`, which reports a
    /// division by zero at the kink instead of inventing a value.
    pub fn differentiate(&self) -> Expr<T> {
        match self {
            Expr::Const(_) => Expr::Const(T::zero()),
            Expr::Var => Expr::Const(T::one()),
            Expr::Add(a, b) => add(a.differentiate(), b.differentiate()),
            Expr::Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Expr::Div(a, b) => {
                if let Some(c) = b.constant() {
                    return div(a.differentiate(), Expr::Const(c));
                }
                div(
                    sub(
                        mul(a.differentiate(), (**b).clone()),
                        mul((**a).clone(), b.differentiate()),
                    ),
                    pow((**b).clone(), T::lit(2.0)),
                )
            }
            Expr::Neg(a) => neg(a.differentiate()),
            Expr::Pow(a, p) => mul(
                mul(Expr::Const(*p), pow((**a).clone(), *p - T::one())),
                a.differentiate(),
            ),
            Expr::Abs(a) => mul(
                div((**a).clone(), Expr::Abs(a.clone())),
                a.differentiate(),
            ),
        }
    }
}

// Integer exponents go through powi so negative bases stay exact.
fn powc<T: Scalar>(b: T, p: T) -> T {
    if p.fract() == T::zero() && p.abs() < T::lit(64.0) {
        b.powi(p.to_i32().unwrap_or(0))
    } else {
        b.powf(p)
    }
}

fn add<T: Scalar>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == T::zero() => b,
        (_, Some(y)) if y == T::zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub<T: Scalar>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == T::zero() => neg(b),
        (_, Some(y)) if y == T::zero() => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul<T: Scalar>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == T::zero() => Expr::Const(T::zero()),
        (Some(x), _) if x == T::one() => b,
        (_, Some(y)) if y == T::one() => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div<T: Scalar>(a: Expr<T>, b: Expr<T>) -> Expr<T> {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) if y != T::zero() => Expr::Const(x / y),
        (Some(x), _) if x == T::zero() => Expr::Const(T::zero()),
        (_, Some(y)) if y == T::one() => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg<T: Scalar>(a: Expr<T>) -> Expr<T> {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow<T: Scalar>(a: Expr<T>, p: T) -> Expr<T> {
    if p == T::zero() {
        return Expr::Const(T::one());
    }
    if p == T::one() {
        return a;
    }
    match a {
        Expr::Const(x) if x >= T::zero() || p.fract() == T::zero() => Expr::Const(powc(x, p)),
        other => Expr::Pow(Box::new(other), p),
    }
}

impl<T: Scalar> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < T::zero() => write!(f, "(-{})", -*c),
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var => write!(f, "phi"),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Pow(a, p) if *p < T::zero() => write!(f, "({}^(-{}))", a, -*p),
            Expr::Pow(a, p) => write!(f, "({}^{})", a, p),
            Expr::Abs(a) => write!(f, "abs({})", a),
        }
    }
}

/// Parse the coefficient grammar: decimal literals, `phi`, `+ - * / ^`,
/// `abs(...)` and parentheses. Exponents must be constant.
pub fn parse_expression<T: Scalar>(src: &str) -> Result<Expr<T>, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let p = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    // Right-associative chain of constant exponents: a^b^c = a^(b^c).
    fn exponent<T: Scalar>(&mut self) -> Result<T, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut sign = T::one();
        while self.eat(b'-') {
            sign = -sign;
        }
        let e: Expr<T> = self.atom()?;
        let v = const_fold(&e).ok_or(ParseError::NonConstantExponent { pos: start })?;
        let v = sign * v;
        if self.eat(b'^') {
            let rest = self.exponent::<T>()?;
            return Ok(powc(v, rest));
        }
        Ok(v)
    }

    fn atom<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "phi" => Ok(Expr::Var),
                    "abs" => {
                        if !self.eat(b'(') {
                            return Err(self.syntax("expected `(` after abs"));
                        }
                        let e = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.syntax("expected `)`"));
                        }
                        Ok(Expr::Abs(Box::new(e)))
                    }
                    _ => Err(ParseError::UnknownIdentifier { pos: start, name: name.to_string() }),
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number<T: Scalar>(&mut self) -> Result<Expr<T>, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap_or("");
        let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
            pos: start,
            msg: format!("malformed number `{}`", text),
        })?;
        self.pos = i;
        Ok(Expr::Const(T::lit(v)))
    }
}

fn const_fold<T: Scalar>(e: &Expr<T>) -> Option<T> {
    Some(match e {
        Expr::Const(c) => *c,
        Expr::Var => return None,
        Expr::Add(a, b) => const_fold(a)? + const_fold(b)?,
        Expr::Sub(a, b) => const_fold(a)? - const_fold(b)?,
        Expr::Mul(a, b) => const_fold(a)? * const_fold(b)?,
        Expr::Div(a, b) => const_fold(a)? / const_fold(b)?,
        Expr::Neg(a) => -const_fold(a)?,
        Expr::Pow(a, p) => powc(const_fold(a)?, *p),
        Expr::Abs(a) => const_fold(a)?.abs(),
    })
}
