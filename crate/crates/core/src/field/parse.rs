//! Recursive-descent parser for the field expression DSL.
//!
//! Grammar (standard precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | coord | func '(' expr ')' | '(' expr ')'
//! func    := 'exp' | 'log' | 'sin' | 'cos'
//! ```
//!
//! Identifiers are the chart coordinate names (`u`, `v`, `x3`, ...).

use thiserror::Error;

use super::ScalarField;
use crate::chart::Chart;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token at position {pos}: expected {expected}")]
    Unexpected { pos: usize, expected: &'static str },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function '{name}' at position {pos} takes exactly one argument")]
    ArityMismatch { name: String, pos: usize },
    #[error("malformed number at position {pos}")]
    BadNumber { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        match ch {
            c if c.is_whitespace() => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // optional exponent
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = bytes[start..i].iter().collect();
                let value: f64 = s.parse().map_err(|_| ParseError::BadNumber { pos: start })?;
                toks.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                toks.push((Tok::Ident(s), start));
            }
            _ => return Err(ParseError::UnexpectedChar { ch, pos: i }),
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    chart: &'a Chart,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, p)| *p)
            .unwrap_or(0)
    }

    fn expr(&mut self) -> Result<ScalarField, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.next();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarField, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    acc = acc.mul(&self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.next();
                    acc = acc.div(&self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarField, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.next();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarField, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.next();
            let expo = self.unary()?;
            return Ok(base.pow(&expo));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarField, ParseError> {
        let _pos = self.here();
        match self.next() {
            None => Err(ParseError::UnexpectedEnd),
            Some((Tok::Num(n), _)) => Ok(ScalarField::constant(self.chart, n)),
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(ParseError::Unexpected {
                        pos: self.here(),
                        expected: "')'",
                    }),
                }
            }
            Some((Tok::Ident(name), ipos)) => {
                let is_func = matches!(name.as_str(), "exp" | "log" | "sin" | "cos");
                if is_func {
                    match self.next() {
                        Some((Tok::LParen, _)) => {}
                        _ => {
                            return Err(ParseError::ArityMismatch {
                                name,
                                pos: ipos,
                            })
                        }
                    }
                    let arg = self.expr()?;
                    if let Some(Tok::Comma) = self.peek() {
                        return Err(ParseError::ArityMismatch { name, pos: ipos });
                    }
                    match self.next() {
                        Some((Tok::RParen, _)) => {}
                        _ => {
                            return Err(ParseError::Unexpected {
                                pos: self.here(),
                                expected: "')'",
                            })
                        }
                    }
                    return Ok(match name.as_str() {
                        "exp" => arg.exp(),
                        "log" => arg.log(),
                        "sin" => arg.sin(),
                        _ => arg.cos(),
                    });
                }
                match self.chart.coord_index(&name) {
                    Some(slot) => Ok(ScalarField::coord(self.chart, slot)),
                    None => Err(ParseError::UnknownIdentifier { name, pos: ipos }),
                }
            }
            Some((_, p)) => Err(ParseError::Unexpected {
                pos: p,
                expected: "number, coordinate, function, or '('",
            }),
        }
    }
}

/// Parse an expression over the chart's coordinate names into a symbolic tree.
pub fn parse_field(text: &str, chart: &Chart) -> Result<ScalarField, ParseError> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        chart,
    };
    let field = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return Err(ParseError::Unexpected {
            pos: parser.here(),
            expected: "end of expression",
        });
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Point, U, X3};

    fn chart() -> Chart {
        Chart::new(5).unwrap()
    }

    fn pt(chart: &Chart, coords: &[f64]) -> Point {
        Point::new(chart, coords.to_vec()).unwrap()
    }

    #[test]
    fn zero_literal_is_constant_with_empty_mask() {
        let c = chart();
        let f = parse_field("0", &c).unwrap();
        assert!(f.is_zero());
        assert!(f.mask().is_empty());
    }

    #[test]
    fn mask_is_syntactic_presence() {
        let c = chart();
        let f = parse_field("2*u + x3^2", &c).unwrap();
        assert!(f.depends_on(U));
        assert!(f.depends_on(X3));
        assert!(!f.depends_on(1));
    }

    #[test]
    fn hand_arithmetic_example() {
        let c = chart();
        // oracle: (3 - 1*1)^2 * 1 = 4
        let f = parse_field("u*(x3 - 1*u)^2", &c).unwrap();
        let p = pt(&c, &[1.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(f.eval(&p).unwrap(), 4.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let c = chart();
        let f = parse_field("-u^2", &c).unwrap();
        let p = pt(&c, &[3.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.eval(&p).unwrap(), -9.0);
        let g = parse_field("2^3^2", &c).unwrap();
        assert_eq!(g.as_const(), Some(512.0));
        let h = parse_field("1 - 2 - 3", &c).unwrap();
        assert_eq!(h.as_const(), Some(-4.0));
    }

    #[test]
    fn errors_carry_positions() {
        let c = chart();
        match parse_field("u + w", &c) {
            Err(ParseError::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "w");
                assert_eq!(pos, 4);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        assert!(matches!(
            parse_field("sin(u, v)", &c),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_field("sin u", &c),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_field("(u + 1", &c),
            Err(ParseError::Unexpected { .. })
        ));
        assert!(matches!(
            parse_field("u @ v", &c),
            Err(ParseError::UnexpectedChar { ch: '@', pos: 2 })
        ));
    }

    #[test]
    fn scientific_notation() {
        let c = chart();
        let f = parse_field("1.5e-2 * u", &c).unwrap();
        let p = pt(&c, &[2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((f.eval(&p).unwrap() - 0.03).abs() < 1e-15);
    }

    #[test]
    fn print_round_trip_evaluates_identically() {
        let c = chart();
        let exprs = [
            "u*(x3 - 1*u)^2",
            "exp(-u) + sin(x4*x5)/(1 + x3^2)",
            "-(u - v)*cos(x3) + 2.5",
            "u^2^2 - x3/x4/2",
        ];
        let p = pt(&c, &[0.7, -0.3, 1.1, 0.4, -0.9]);
        for text in exprs {
            let f = parse_field(text, &c).unwrap();
            let g = parse_field(&f.display(), &c).unwrap();
            let a = f.eval(&p).unwrap();
            let b = g.eval(&p).unwrap();
            assert!(
                (a - b).abs() <= 1e-14 * (1.0 + a.abs()),
                "round trip changed value of {text}: {a} vs {b} (printed as {})",
                f.display()
            );
        }
    }
}
