//! Observable expressions for `expand` runs.
//!
//! Grammar, with both products left-associative and at equal precedence:
//!
//! ```text
//! expr     := atom (('⋆' | '*') atom)*        ⋆ deformed, * pointwise
//! atom     := '(' expr ')' | call | monomial
//! call     := 'T' '(' expr (',' expr)* ')'
//!           | 'Tbar' '(' expr (',' expr)* ')'
//!           | 'S' '(' expr ')' | 'Sinv' '(' expr ')'
//!           | 'R' '(' expr ',' expr ')'
//!           | 'V' '[' label ']'
//! monomial := factor+ '[' label ']'
//! factor   := species ('^' integer)?
//! ```
//!
//! Species and call names are case-insensitive; `V[g]` is the interaction
//! of the configured model smeared with `g`, and S, Sinv, and R are
//! truncated at the order the run configuration supplies. A label is any
//! text up to the closing bracket, so smearings like `f'` are fine.

use std::fmt;

use frg_core::algebra::{
    anti_time_ordered_product, bogoliubov_truncated, dirac_potential, msr_potential,
    pointwise_product, s_matrix_truncated, star_h, time_ordered_product, two_scalar_potential,
    Functional, Model, Species,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Monomial { factors: Vec<(Species, u32)>, label: String },
    Potential { label: String },
    Star(Box<Expr>, Box<Expr>),
    Pointwise(Box<Expr>, Box<Expr>),
    TimeOrdered(Vec<Expr>),
    AntiTimeOrdered(Vec<Expr>),
    SMatrix(Box<Expr>),
    SMatrixInverse(Box<Expr>),
    Bogoliubov(Box<Expr>, Box<Expr>),
}

/// Evaluate against a model. `order` is the truncation order of every S,
/// Sinv, and R form in the expression.
pub fn evaluate(expr: &Expr, model: Model, order: u32) -> Result<Functional, String> {
    match expr {
        Expr::Monomial { factors, label } => {
            Functional::monomial(model, factors, label).map_err(|e| e.to_string())
        }
        Expr::Potential { label } => Ok(match model {
            Model::TwoScalar => two_scalar_potential(label),
            Model::Msr => msr_potential(label),
            Model::Dirac => dirac_potential(label),
        }),
        Expr::Star(a, b) => {
            let (a, b) = (evaluate(a, model, order)?, evaluate(b, model, order)?);
            star_h(&a, &b).map_err(|e| e.to_string())
        }
        Expr::Pointwise(a, b) => {
            let (a, b) = (evaluate(a, model, order)?, evaluate(b, model, order)?);
            pointwise_product(&a, &b).map_err(|e| e.to_string())
        }
        Expr::TimeOrdered(items) => {
            let vals = eval_list(items, model, order)?;
            let refs: Vec<&Functional> = vals.iter().collect();
            time_ordered_product(&refs).map_err(|e| e.to_string())
        }
        Expr::AntiTimeOrdered(items) => {
            let vals = eval_list(items, model, order)?;
            let refs: Vec<&Functional> = vals.iter().collect();
            anti_time_ordered_product(&refs).map_err(|e| e.to_string())
        }
        Expr::SMatrix(e) => {
            let v = evaluate(e, model, order)?;
            s_matrix_truncated(&v, order, false).map_err(|e| e.to_string())
        }
        Expr::SMatrixInverse(e) => {
            let v = evaluate(e, model, order)?;
            s_matrix_truncated(&v, order, true).map_err(|e| e.to_string())
        }
        Expr::Bogoliubov(v, f) => {
            let (v, f) = (evaluate(v, model, order)?, evaluate(f, model, order)?);
            bogoliubov_truncated(&v, &f, order).map_err(|e| e.to_string())
        }
    }
}

fn eval_list(items: &[Expr], model: Model, order: u32) -> Result<Vec<Functional>, String> {
    items.iter().map(|e| evaluate(e, model, order)).collect()
}

/// Parse an observable expression. Errors carry the byte offset they were
/// detected at.
pub fn parse(text: &str) -> Result<Expr, String> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.expr()?;
    match p.peek() {
        None => Ok(expr),
        Some(t) => Err(format!("unexpected {t} after a complete expression")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(u32),
    Label(String),
    Caret,
    LParen,
    RParen,
    Comma,
    StarOp,
    MulOp,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "'{s}'"),
            Token::Int(n) => write!(f, "'{n}'"),
            Token::Label(s) => write!(f, "'[{s}]'"),
            Token::Caret => write!(f, "'^'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::Comma => write!(f, "','"),
            Token::StarOp => write!(f, "'⋆'"),
            Token::MulOp => write!(f, "'*'"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '⋆' => {
                tokens.push(Token::StarOp);
                i += 1;
            }
            '*' => {
                tokens.push(Token::MulOp);
                i += 1;
            }
            '[' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != ']' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err("unterminated '[' smearing label".into());
                }
                let label: String = chars[start..j].iter().collect();
                let label = label.trim().to_string();
                if label.is_empty() {
                    return Err("empty smearing label".into());
                }
                tokens.push(Token::Label(label));
                i = j + 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let digits: String = chars[i..j].iter().collect();
                let n: u32 =
                    digits.parse().map_err(|_| format!("integer '{digits}' is too large"))?;
                tokens.push(Token::Int(n));
                i = j;
            }
            c if c.is_alphabetic() || c == '~' => {
                let mut j = i;
                while j < chars.len()
                    && (chars[j].is_alphanumeric() || chars[j] == '~' || chars[j] == '_')
                {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                tokens.push(Token::Ident(word));
                i = j;
            }
            other => return Err(format!("unexpected character '{other}'")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Token) -> Result<(), String> {
        match self.next() {
            Some(t) if t == *want => Ok(()),
            Some(t) => Err(format!("expected {want}, found {t}")),
            None => Err(format!("expected {want}, found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut left = self.atom()?;
        loop {
            match self.peek() {
                Some(Token::StarOp) => {
                    self.pos += 1;
                    let right = self.atom()?;
                    left = Expr::Star(Box::new(left), Box::new(right));
                }
                Some(Token::MulOp) => {
                    self.pos += 1;
                    let right = self.atom()?;
                    left = Expr::Pointwise(Box::new(left), Box::new(right));
                }
                _ => return Ok(left),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(word)) => {
                let lower = word.to_lowercase();
                let callish = matches!(self.tokens.get(self.pos + 1), Some(Token::LParen));
                match lower.as_str() {
                    "t" | "tbar" | "s" | "sinv" | "r" if callish => self.call(&lower),
                    "v" if matches!(self.tokens.get(self.pos + 1), Some(Token::Label(_))) => {
                        self.pos += 1;
                        match self.next() {
                            Some(Token::Label(label)) => Ok(Expr::Potential { label }),
                            _ => unreachable!("label presence checked above"),
                        }
                    }
                    _ => self.monomial(),
                }
            }
            Some(t) => Err(format!("expected an operand, found {t}")),
            None => Err("expected an operand, found end of input".into()),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr, String> {
        self.pos += 1;
        self.expect(&Token::LParen)?;
        let mut args = vec![self.expr()?];
        while matches!(self.peek(), Some(Token::Comma)) {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(&Token::RParen)?;
        match name {
            "t" => Ok(Expr::TimeOrdered(args)),
            "tbar" => Ok(Expr::AntiTimeOrdered(args)),
            "s" | "sinv" => {
                if args.len() != 1 {
                    return Err(format!("{name} takes exactly one argument, got {}", args.len()));
                }
                let arg = Box::new(args.pop().expect("one argument"));
                Ok(if name == "s" { Expr::SMatrix(arg) } else { Expr::SMatrixInverse(arg) })
            }
            "r" => {
                if args.len() != 2 {
                    return Err(format!("r takes exactly two arguments, got {}", args.len()));
                }
                let f = Box::new(args.pop().expect("two arguments"));
                let v = Box::new(args.pop().expect("two arguments"));
                Ok(Expr::Bogoliubov(v, f))
            }
            _ => unreachable!("caller filters names"),
        }
    }

    fn monomial(&mut self) -> Result<Expr, String> {
        let mut factors = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Ident(word)) => {
                    let lower = word.to_lowercase();
                    let species = Species::parse(&lower)
                        .ok_or_else(|| format!("'{word}' is not a field species"))?;
                    self.pos += 1;
                    let power = if matches!(self.peek(), Some(Token::Caret)) {
                        self.pos += 1;
                        match self.next() {
                            Some(Token::Int(n)) if n >= 1 => n,
                            Some(t) => return Err(format!("expected a power >= 1, found {t}")),
                            None => return Err("expected a power, found end of input".into()),
                        }
                    } else {
                        1
                    };
                    factors.push((species, power));
                }
                Some(Token::Label(_)) => {
                    let label = match self.next() {
                        Some(Token::Label(l)) => l,
                        _ => unreachable!("peeked a label"),
                    };
                    if factors.is_empty() {
                        return Err("smearing label without field factors".into());
                    }
                    return Ok(Expr::Monomial { factors, label });
                }
                Some(t) => return Err(format!("expected a species or '[label]', found {t}")),
                None => return Err("monomial is missing its '[label]' smearing".into()),
            }
        }
    }
}
