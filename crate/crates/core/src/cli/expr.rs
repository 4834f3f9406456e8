//! State expressions such as `ghz(3)`, `ghz(2,30)*zero(1)` or
//! `mix(0.5,ghz(2),zero(2))`.
//!
//! Angles are in degrees. A bare `ghz`, `w` or `zero` takes its party count
//! from the scenario.

use std::fmt;

use crate::error::{Error, Result};
use crate::state::{
    make_dicke, make_ghz, make_named, make_product_zero, make_psi3, mix, random_pure_state, NamedState,
    QuantumState,
};

#[derive(Clone, Debug, PartialEq)]
pub enum StateExpr {
    Ghz { parties: Option<usize>, alpha: Option<f64> },
    Dicke { parties: Option<usize>, excitations: usize },
    Psi3 { theta: Option<f64> },
    Zero { parties: Option<usize> },
    Random { parties: usize, seed: u64 },
    Named(NamedState),
    Mix { weight: f64, a: Box<StateExpr>, b: Box<StateExpr> },
    Tensor(Vec<StateExpr>),
}

/// Values the expression may leave open. A GHZ state without an angle has
/// equal weights on all branches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Defaults {
    pub parties: Option<usize>,
    pub dim: Option<usize>,
    /// Degrees.
    pub alpha: Option<f64>,
    /// Degrees.
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    Open,
    Close,
    Comma,
    Star,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' => { out.push(Token::Open); i += 1; }
            ')' => { out.push(Token::Close); i += 1; }
            ',' => { out.push(Token::Comma); i += 1; }
            '*' => { out.push(Token::Star); i += 1; }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let c = chars[i];
                    let exp_sign = (c == '-' || c == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token::Number(chars[start..i].iter().collect()));
            }
            _ => return Err(Error::Argument(format!("unexpected {c:?} in state expression {s:?}"))),
        }
    }
    Ok(out)
}

enum Arg {
    Number(f64),
    Expr(StateExpr),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    source: String,
}

impl Parser {
    fn err(&self, msg: impl fmt::Display) -> Error {
        Error::Argument(format!("state expression {:?}: {msg}", self.source))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {t:?}")))
        }
    }

    fn product(&mut self) -> Result<StateExpr> {
        let mut factors = vec![self.atom()?];
        while self.peek() == Some(&Token::Star) {
            self.pos += 1;
            factors.push(self.atom()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { StateExpr::Tensor(factors) })
    }

    fn arg(&mut self) -> Result<Arg> {
        match self.peek() {
            Some(Token::Number(n)) => {
                let v = n.parse::<f64>().map_err(|_| self.err(format!("bad number {n:?}")))?;
                self.pos += 1;
                Ok(Arg::Number(v))
            }
            _ => Ok(Arg::Expr(self.product()?)),
        }
    }

    fn atom(&mut self) -> Result<StateExpr> {
        let name = match self.peek() {
            Some(Token::Ident(name)) => name.clone(),
            other => return Err(self.err(format!("expected a state name, found {other:?}"))),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(&Token::Open) {
            self.pos += 1;
            loop {
                args.push(self.arg()?);
                match self.peek() {
                    Some(Token::Comma) => self.pos += 1,
                    _ => break,
                }
            }
            self.expect(Token::Close)?;
        }
        self.build(&name, args)
    }

    fn build(&self, name: &str, args: Vec<Arg>) -> Result<StateExpr> {
        let mut numbers = Vec::new();
        let mut exprs = Vec::new();
        for a in args {
            match a {
                Arg::Number(v) => numbers.push(v),
                Arg::Expr(e) => exprs.push(e),
            }
        }
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v < 64.0 {
                Ok(v as usize)
            } else {
                Err(self.err(format!("{name}: {v} is not a valid count")))
            }
        };
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if exprs.is_empty() && (lo..=hi).contains(&numbers.len()) {
                Ok(())
            } else {
                Err(self.err(format!("{name} takes {lo} to {hi} numeric arguments")))
            }
        };
        let lower = name.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "ghz" => {
                arity(0, 2)?;
                StateExpr::Ghz {
                    parties: numbers.first().map(|&v| count(v)).transpose()?,
                    alpha: numbers.get(1).copied(),
                }
            }
            "w" => {
                arity(0, 1)?;
                StateExpr::Dicke { parties: numbers.first().map(|&v| count(v)).transpose()?, excitations: 1 }
            }
            "dicke" => {
                arity(2, 2)?;
                StateExpr::Dicke { parties: Some(count(numbers[0])?), excitations: count(numbers[1])? }
            }
            "psi3" => {
                arity(0, 1)?;
                StateExpr::Psi3 { theta: numbers.first().copied() }
            }
            "zero" => {
                arity(0, 1)?;
                StateExpr::Zero { parties: numbers.first().map(|&v| count(v)).transpose()? }
            }
            "random" => {
                arity(2, 2)?;
                if numbers[1] < 0.0 || numbers[1].fract() != 0.0 {
                    return Err(self.err("random seed must be a nonnegative integer"));
                }
                StateExpr::Random { parties: count(numbers[0])?, seed: numbers[1] as u64 }
            }
            "mix" => {
                if numbers.len() != 1 || exprs.len() != 2 {
                    return Err(self.err("mix takes a weight and two states: mix(w,A,B)"));
                }
                let mut exprs = exprs.into_iter();
                StateExpr::Mix {
                    weight: numbers[0],
                    a: Box::new(exprs.next().unwrap()),
                    b: Box::new(exprs.next().unwrap()),
                }
            }
            _ => {
                arity(0, 0)?;
                StateExpr::Named(name.parse()?)
            }
        })
    }
}

pub fn parse_state_expr(s: &str) -> Result<StateExpr> {
    let mut p = Parser { tokens: tokenize(s)?, pos: 0, source: s.to_string() };
    let e = p.product()?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

fn angle_rad(degrees: f64, name: &str) -> Result<f64> {
    if !degrees.is_finite() {
        return Err(Error::Argument(format!("{name} = {degrees}")));
    }
    Ok(degrees.to_radians())
}

impl StateExpr {
    /// Fills open parameters; `defaults.parties` only applies at the top
    /// level of a non-product expression.
    pub fn resolve(&self, defaults: &Defaults) -> Result<StateExpr> {
        let inner = Defaults { parties: None, ..*defaults };
        let parties = |p: Option<usize>, name: &str| {
            p.or(defaults.parties).ok_or_else(|| {
                Error::Argument(format!("{name} needs an explicit party count here, e.g. {name}(3)"))
            })
        };
        Ok(match self {
            StateExpr::Ghz { parties: p, alpha } => {
                StateExpr::Ghz { parties: Some(parties(*p, "ghz")?), alpha: alpha.or(defaults.alpha) }
            }
            StateExpr::Dicke { parties: p, excitations } => {
                StateExpr::Dicke { parties: Some(parties(*p, "w")?), excitations: *excitations }
            }
            StateExpr::Psi3 { theta } => StateExpr::Psi3 {
                theta: Some(theta.or(defaults.theta).ok_or_else(|| {
                    Error::Argument("psi3 needs an angle: psi3(deg) or --theta".into())
                })?),
            },
            StateExpr::Zero { parties: p } => StateExpr::Zero { parties: Some(parties(*p, "zero")?) },
            StateExpr::Mix { weight, a, b } => StateExpr::Mix {
                weight: *weight,
                a: Box::new(a.resolve(&inner)?),
                b: Box::new(b.resolve(&inner)?),
            },
            StateExpr::Tensor(fs) => StateExpr::Tensor(fs.iter().map(|f| f.resolve(&inner)).collect::<Result<_>>()?),
            other => other.clone(),
        })
    }

    /// Builds the state of a resolved expression.
    pub fn build(&self, dim: Option<usize>) -> Result<QuantumState> {
        let open = || Error::Argument(format!("unresolved expression {self}"));
        let d = dim.unwrap_or(2);
        let qubits_only = |name: &str| {
            if d == 2 {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{name} is a qubit state, but --dim is {d}")))
            }
        };
        Ok(match self {
            StateExpr::Ghz { parties, alpha } => {
                // equal weights on all d branches unless an angle is given
                let alpha = match alpha {
                    Some(a) => angle_rad(*a, "alpha")?,
                    None => (1.0 / (d as f64).sqrt()).asin(),
                };
                QuantumState::Pure(make_ghz(parties.ok_or_else(open)?, d, alpha)?)
            }
            StateExpr::Dicke { parties, excitations } => {
                qubits_only("dicke")?;
                QuantumState::Pure(make_dicke(parties.ok_or_else(open)?, *excitations)?)
            }
            StateExpr::Psi3 { theta } => {
                qubits_only("psi3")?;
                QuantumState::Pure(make_psi3(angle_rad(theta.ok_or_else(open)?, "theta")?)?)
            }
            StateExpr::Zero { parties } => QuantumState::Pure(make_product_zero(parties.ok_or_else(open)?, d)?),
            StateExpr::Random { parties, seed } => QuantumState::Pure(random_pure_state(*parties, d, *seed)?),
            StateExpr::Named(n) => make_named(*n)?,
            StateExpr::Mix { weight, a, b } => {
                let (a, b) = (a.build(dim)?, b.build(dim)?);
                QuantumState::Mixed(mix(
                    &[a.to_density_matrix(), b.to_density_matrix()],
                    &[*weight, 1.0 - *weight],
                )?)
            }
            StateExpr::Tensor(fs) => {
                let mut it = fs.iter();
                let mut acc = it.next().ok_or_else(open)?.build(dim)?;
                for f in it {
                    acc = acc.tensor(&f.build(dim)?)?;
                }
                acc
            }
        })
    }
}

fn opt(f: &mut fmt::Formatter<'_>, v: Option<impl fmt::Display>) -> fmt::Result {
    match v {
        Some(v) => write!(f, "{v}"),
        None => Ok(()),
    }
}

impl fmt::Display for StateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateExpr::Ghz { parties, alpha } => {
                f.write_str("ghz")?;
                if parties.is_some() || alpha.is_some() {
                    f.write_str("(")?;
                    opt(f, *parties)?;
                    if let Some(a) = alpha {
                        write!(f, ",{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            StateExpr::Dicke { parties, excitations: 1 } => {
                f.write_str("w")?;
                match parties {
                    Some(p) => write!(f, "({p})"),
                    None => Ok(()),
                }
            }
            StateExpr::Dicke { parties, excitations } => {
                f.write_str("dicke(")?;
                opt(f, *parties)?;
                write!(f, ",{excitations})")
            }
            StateExpr::Psi3 { theta } => match theta {
                Some(t) => write!(f, "psi3({t})"),
                None => f.write_str("psi3"),
            },
            StateExpr::Zero { parties } => match parties {
                Some(p) => write!(f, "zero({p})"),
                None => f.write_str("zero"),
            },
            StateExpr::Random { parties, seed } => write!(f, "random({parties},{seed})"),
            StateExpr::Named(n) => write!(f, "{n}"),
            StateExpr::Mix { weight, a, b } => write!(f, "mix({weight},{a},{b})"),
            StateExpr::Tensor(fs) => {
                for (i, x) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(s: &str, defaults: Defaults) -> (String, QuantumState) {
        let e = parse_state_expr(s).unwrap().resolve(&defaults).unwrap();
        let st = e.build(defaults.dim).unwrap();
        (e.to_string(), st)
    }

    #[test]
    fn ghz_defaults() {
        let (label, st) = build("ghz", Defaults { parties: Some(3), ..Default::default() });
        assert_eq!(label, "ghz(3)");
        assert_eq!((st.parties(), st.dim()), (3, 2));
        let (label, _) = build("GHZ(2, 30)", Defaults::default());
        assert_eq!(label, "ghz(2,30)");
        let (_, st) = build("ghz(2)", Defaults { dim: Some(3), ..Default::default() });
        assert_eq!(st.dim(), 3);
    }

    #[test]
    fn tensor_and_mix() {
        let (label, st) = build("ghz(2,45)*zero(1)", Defaults::default());
        assert_eq!(label, "ghz(2,45)*zero(1)");
        assert_eq!(st.parties(), 3);
        let (label, st) = build("mix(0.25, ghz(2,45), zero(2))", Defaults::default());
        assert_eq!(label, "mix(0.25,ghz(2,45),zero(2))");
        assert!(matches!(st, QuantumState::Mixed(_)));
        let (label, st) = build("ghz(2,45)*ghz(2,45)*ghz(2,45)", Defaults::default());
        assert_eq!(label.matches('*').count(), 2);
        assert_eq!(st.parties(), 6);
    }

    #[test]
    fn named_and_families() {
        assert_eq!(build("cluster4", Defaults::default()).1.parties(), 4);
        assert_eq!(build("qutrit_dicke_q1", Defaults::default()).1.dim(), 3);
        assert_eq!(build("w(3)", Defaults::default()).0, "w(3)");
        assert_eq!(build("dicke(4,2)", Defaults::default()).0, "dicke(4,2)");
        assert_eq!(build("psi3", Defaults { theta: Some(20.0), ..Default::default() }).0, "psi3(20)");
        assert_eq!(build("random(2,7)", Defaults::default()).1.parties(), 2);
    }

    #[test]
    fn bare_family_inside_product_needs_count() {
        let e = parse_state_expr("ghz*zero(1)").unwrap();
        assert!(e.resolve(&Defaults { parties: Some(3), ..Default::default() }).is_err());
    }

    #[test]
    fn malformed() {
        for s in ["", "ghz(", "ghz(2,,3)", "nosuch", "ghz(2)*", "mix(ghz(2),zero(2))", "ghz(2.5)", "w(3)$"] {
            assert!(parse_state_expr(s).and_then(|e| e.resolve(&Defaults::default())).is_err(), "{s}");
        }
        let e = parse_state_expr("psi3").unwrap();
        assert!(e.resolve(&Defaults::default()).is_err());
    }

    #[test]
    fn qubit_families_reject_other_dims() {
        let e = parse_state_expr("w(3)").unwrap().resolve(&Defaults::default()).unwrap();
        assert!(matches!(e.build(Some(3)), Err(Error::Dimension(_))));
    }
}
