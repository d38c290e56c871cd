//! Polynomial text grammar: parsing and canonical emission.
//!
//! A polynomial prints as a signed sum of terms `c * v1^e1 * v2 * ...` with
//! exact rational `c` (`n` or `n/d`), an optional `pi` or `pi^2` factor on
//! the coefficient, exponent 1 suppressed and coefficient 1 reduced to the
//! bare sign. Parsing accepts arbitrary whitespace; emission is canonical:
//! terms ascend by total degree, ties print structurally larger monomials
//! first, parameters (eps, beta, h, k) print before main variables inside a
//! term. Round-tripping emit -> parse is the identity.

use crate::coeff::{Coeff, Rat};
use crate::error::StarkError;
use crate::poly::{Monomial, Poly};
use crate::space::{Space, SpaceId};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Print position of a main variable inside a product. Storage order is kept
/// for the monomial order; display groups the energy and constraint variables
/// ahead of the angular-momentum block so products read H2*K3, not K3*H2.
fn display_rank(space: &Space, idx: usize) -> usize {
    match space.id {
        SpaceId::Invariant => {
            const ORDER: [usize; 16] = [6, 7, 0, 1, 2, 3, 4, 5, 8, 9, 10, 11, 12, 13, 14, 15];
            ORDER.iter().position(|&i| i == idx).unwrap_or(idx)
        }
        _ => idx,
    }
}

/// Canonical text form.
pub fn emit(p: &Poly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let space = p.space();
    // print order for parameters, then main variables by space index
    let param_pref = ["eps", "beta", "h", "k"];
    let mut entries: Vec<(&Monomial, &Coeff)> = p.terms().collect();
    entries.sort_by(|(ma, _), (mb, _)| {
        ma.total_degree()
            .cmp(&mb.total_degree())
            .then_with(|| mb.cmp(ma))
    });
    let mut out = String::new();
    for (m, c) in entries {
        for d in 0..3u32 {
            let r = c.part(d);
            if r.is_zero() {
                continue;
            }
            let neg = r.is_negative();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            let abs = r.abs();
            let has_vars = !m.is_unit() || d > 0;
            if !abs.is_one() || !has_vars {
                factors.push(format_rat(&abs));
            }
            if d == 1 {
                factors.push("pi".to_string());
            } else if d == 2 {
                factors.push("pi^2".to_string());
            }
            let mut var_factors: Vec<(usize, String)> = Vec::new();
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = space.name(i);
                let rank = if let Some(pos) = param_pref.iter().position(|p| *p == name) {
                    pos
                } else {
                    param_pref.len() + display_rank(space, i)
                };
                let f = if e == 1 {
                    name.to_string()
                } else {
                    format!("{name}^{e}")
                };
                var_factors.push((rank, f));
            }
            var_factors.sort_by_key(|(r, _)| *r);
            factors.extend(var_factors.into_iter().map(|(_, f)| f));
            out.push_str(&factors.join("*"));
        }
    }
    out
}

fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Debug form of a bare coefficient.
pub fn emit_coeff_debug(c: &Coeff) -> String {
    let mut parts = Vec::new();
    for d in 0..3u32 {
        let r = c.part(d);
        if r.is_zero() {
            continue;
        }
        let tag = match d {
            0 => String::new(),
            1 => "*pi".to_string(),
            _ => "*pi^2".to_string(),
        };
        parts.push(format!("{}{}", format_rat(r), tag));
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, PartialEq)]
enum Tok {
    Plus,
    Minus,
    Star,
    Caret,
    Int(BigInt),
    Ident(String),
    Slash,
    End,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> StarkError {
        StarkError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn next(&mut self) -> Result<Tok, StarkError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(Tok::End);
        }
        let b = self.src[self.pos];
        self.pos += 1;
        match b {
            b'+' => Ok(Tok::Plus),
            b'-' => Ok(Tok::Minus),
            b'*' => Ok(Tok::Star),
            b'^' => Ok(Tok::Caret),
            b'/' => Ok(Tok::Slash),
            b'0'..=b'9' => {
                let start = self.pos - 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(Tok::Int(s.parse().unwrap()))
            }
            b if b.is_ascii_alphabetic() => {
                let start = self.pos - 1;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(Tok::Ident(
                    std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .to_string(),
                ))
            }
            _ => Err(self.err(&format!("unexpected byte `{}`", b as char))),
        }
    }

    fn peek(&mut self) -> Result<Tok, StarkError> {
        let save = self.pos;
        let t = self.next()?;
        self.pos = save;
        Ok(t)
    }
}

/// Parse the canonical grammar into a polynomial over the given space.
pub fn parse(space: &Space, src: &str) -> Result<Poly, StarkError> {
    let mut lx = Lexer::new(src);
    let mut acc = Poly::zero(space.clone());
    let mut first = true;
    loop {
        let mut tok = lx.next()?;
        if tok == Tok::End {
            if first {
                return Err(lx.err("empty input"));
            }
            break;
        }
        let mut sign = 1i32;
        match tok {
            Tok::Plus => {
                if first {
                    return Err(lx.err("leading `+` not allowed"));
                }
                tok = lx.next()?;
            }
            Tok::Minus => {
                sign = -1;
                tok = lx.next()?;
            }
            _ => {
                if !first {
                    return Err(lx.err("expected `+` or `-` between terms"));
                }
            }
        }
        first = false;
        // one term: factors separated by '*'
        let mut coeff = Coeff::from_int(sign as i64);
        let mut mono = Monomial::unit(space.dim());
        loop {
            match tok {
                Tok::Int(n) => {
                    let mut num = n;
                    let mut den = BigInt::one();
                    if lx.peek()? == Tok::Slash {
                        lx.next()?;
                        match lx.next()? {
                            Tok::Int(d) => {
                                if d.is_zero() {
                                    return Err(lx.err("zero denominator"));
                                }
                                den = d;
                            }
                            _ => return Err(lx.err("expected denominator")),
                        }
                    }
                    if lx.peek()? == Tok::Caret {
                        lx.next()?;
                        match lx.next()? {
                            Tok::Int(e) => {
                                let e: u32 = e
                                    .try_into()
                                    .map_err(|_| lx.err("exponent out of range"))?;
                                num = num.pow(e);
                                den = den.pow(e);
                            }
                            _ => return Err(lx.err("expected exponent")),
                        }
                    }
                    coeff = &coeff * &Coeff::from_rat(Rat::new(num, den));
                }
                Tok::Ident(name) => {
                    let mut exp: u16 = 1;
                    if lx.peek()? == Tok::Caret {
                        lx.next()?;
                        match lx.next()? {
                            Tok::Int(e) => {
                                exp = e.try_into().map_err(|_| lx.err("exponent out of range"))?;
                            }
                            _ => return Err(lx.err("expected exponent")),
                        }
                    }
                    if name == "pi" {
                        if exp > 2 {
                            return Err(StarkError::PiDegreeOverflow(exp as u32));
                        }
                        coeff = &coeff * &Coeff::pi_term(Rat::one(), exp as u32);
                    } else {
                        let idx = space.index_of(&name)?;
                        mono.0[idx] = mono.0[idx]
                            .checked_add(exp)
                            .ok_or_else(|| lx.err("exponent overflow"))?;
                    }
                }
                _ => return Err(lx.err("expected a factor")),
            }
            match lx.peek()? {
                Tok::Star => {
                    lx.next()?;
                    tok = lx.next()?;
                }
                _ => break,
            }
        }
        acc.add_term(mono, coeff);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space;

    #[test]
    fn parse_reference_normal_form() {
        let inv = space::invariant();
        let p = parse(&inv, "H2 - 3/2*eps*beta*H2*K3").unwrap();
        assert_eq!(emit(&p), "H2 - 3/2*eps*beta*H2*K3");
        let same = parse(&inv, "  H2-3/2 * eps*beta* H2 * K3 ").unwrap();
        assert_eq!(p, same);
    }

    #[test]
    fn emit_orders_by_degree_then_structure() {
        let inv = space::invariant();
        let p = parse(
            &inv,
            "1/8*beta*U1*U4 - 1/2*beta*K3*U1 - 1/8*beta*V1*V4 - 1/2*beta*H2*V4",
        )
        .unwrap();
        assert_eq!(
            emit(&p),
            "-1/2*beta*K3*U1 - 1/2*beta*H2*V4 + 1/8*beta*U1*U4 - 1/8*beta*V1*V4"
        );
    }

    #[test]
    fn pi_coefficients_roundtrip() {
        let inv = space::invariant();
        let p = parse(&inv, "1/4*pi*U4*V1 - pi^2*K3 + 2*H2").unwrap();
        let s = emit(&p);
        assert_eq!(parse(&inv, &s).unwrap(), p);
        assert!(s.contains("pi"));
    }

    #[test]
    fn mixed_rational_and_pi_coefficient_splits() {
        let inv = space::invariant();
        let p = parse(&inv, "1/2*K3 + 1/4*pi*K3").unwrap();
        assert_eq!(emit(&p), "1/2*K3 + 1/4*pi*K3");
    }

    #[test]
    fn zero_and_constants() {
        let inv = space::invariant();
        assert_eq!(emit(&Poly::zero(inv.clone())), "0");
        let p = parse(&inv, "0").unwrap();
        assert!(p.is_zero());
        let c = parse(&inv, "-7/3").unwrap();
        assert_eq!(emit(&c), "-7/3");
        let one = parse(&inv, "K3^0").unwrap();
        assert_eq!(emit(&one), "1");
    }

    #[test]
    fn rejects_garbage() {
        let inv = space::invariant();
        assert!(parse(&inv, "K3 +").is_err());
        assert!(parse(&inv, "K3 K2").is_err());
        assert!(parse(&inv, "W9").is_err());
        assert!(parse(&inv, "1/0").is_err());
        assert!(parse(&inv, "pi^3").is_err());
        assert!(parse(&inv, "").is_err());
    }

    #[test]
    fn numeric_power_in_coefficient() {
        let inv = space::invariant();
        let p = parse(&inv, "2^3*K3").unwrap();
        assert_eq!(emit(&p), "8*K3");
    }
}
