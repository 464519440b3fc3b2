//! Recursive-descent parser for `datapath_a(...)` / `datapath_m(...)` lines.

use std::collections::BTreeMap;

use super::ast::{DataType, Endpoint, Expr, Mode, Request, Requirements, SourceRef, DEFAULT_USER};
use super::DslError;
use crate::op::OpKind;
use crate::topology::NodeId;

/// Upper bound on the jitter requirement, in milliseconds.
pub const MAX_JITTER_MS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number {s}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str, first_line: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, first_line, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let err = |message: String| DslError::Syntax {
            line: start_line,
            col: start_col,
            message,
        };
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '=' => Tok::Eq,
            '\u{2190}' => Tok::Arrow,
            '<' if chars.get(i + 1) == Some(&'-') => {
                advance(2, &mut i);
                out.push(Token {
                    tok: Tok::Arrow,
                    line: start_line,
                    col: start_col,
                });
                continue;
            }
            '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&ch| ch == '"' || ch == '\n')
                    .map(|p| p + i + 1)
                    .filter(|&p| chars[p] == '"')
                    .ok_or_else(|| err("unterminated string".into()))?;
                let s: String = chars[i + 1..end].iter().collect();
                if s.is_empty() {
                    return Err(err("empty string".into()));
                }
                advance(end + 1 - i, &mut i);
                out.push(Token {
                    tok: Tok::Str(s),
                    line: start_line,
                    col: start_col,
                });
                continue;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                advance(j - i, &mut i);
                out.push(Token {
                    tok: Tok::Number(s),
                    line: start_line,
                    col: start_col,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < chars.len()
                    && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '-')
                {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                advance(j - i, &mut i);
                out.push(Token {
                    tok: Tok::Ident(s),
                    line: start_line,
                    col: start_col,
                });
                continue;
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        };
        advance(1, &mut i);
        out.push(Token {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Parses one request. Line numbers in errors start at 1.
pub fn parse_request(text: &str) -> Result<Request, DslError> {
    parse_request_at(text, 1)
}

/// Like [`parse_request`], reporting errors relative to `line` (for script
/// files).
pub fn parse_request_at(text: &str, line: usize) -> Result<Request, DslError> {
    let tokens = lex(text, line)?;
    Parser { tokens, pos: 0 }.request()
}

enum Positional {
    Expr(Expr, (usize, usize)),
    Set(Vec<SourceRef>),
}

enum KwValue {
    Endpoint(Endpoint),
    Node(NodeId),
    Op(OpKind),
    Word(String),
    Requirements(Requirements),
    Sources(Vec<SourceRef>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        let (line, col) = self.here();
        Err(DslError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<(), DslError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            ))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected a name, found {}", other.describe())),
        }
    }

    fn node_id(&mut self) -> Result<NodeId, DslError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        NodeId::new(name).map_err(|e| DslError::Syntax {
            line,
            col,
            message: e.to_string(),
        })
    }

    fn request(mut self) -> Result<Request, DslError> {
        let head_pos = self.here();
        let head = self.ident()?;
        let mode = match head.as_str() {
            "datapath_a" => Mode::Automated,
            "datapath_m" => Mode::Manual,
            _ => {
                return Err(DslError::Syntax {
                    line: head_pos.0,
                    col: head_pos.1,
                    message: format!("expected datapath_a or datapath_m, found `{head}`"),
                })
            }
        };
        self.expect(Tok::LParen)?;
        let mut positional = Vec::new();
        let mut kwargs: BTreeMap<&'static str, (KwValue, (usize, usize))> = BTreeMap::new();
        if *self.peek() != Tok::RParen {
            loop {
                if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::Arrow {
                    let pos = self.here();
                    let (key, value) = self.kwarg()?;
                    if kwargs.insert(key, (value, pos)).is_some() {
                        return Err(DslError::Syntax {
                            line: pos.0,
                            col: pos.1,
                            message: format!("`{key}` given more than once"),
                        });
                    }
                } else if *self.peek() == Tok::LBrace {
                    positional.push(Positional::Set(self.source_set()?));
                } else {
                    let pos = self.here();
                    positional.push(Positional::Expr(self.expr()?, pos));
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        if *self.peek() != Tok::Eof {
            return self.error(format!("unexpected {} after request", self.peek().describe()));
        }
        assemble(mode, head_pos, positional, kwargs)
    }

    fn kwarg(&mut self) -> Result<(&'static str, KwValue), DslError> {
        let pos = self.here();
        let key = self.ident()?;
        self.expect(Tok::Arrow)?;
        Ok(match key.as_str() {
            "destination" => ("destination", KwValue::Endpoint(self.endpoint()?)),
            "switch" => ("switch", KwValue::Node(self.node_id()?)),
            "compute" | "computation" => {
                let p = self.here();
                let name = self.ident()?;
                ("compute", KwValue::Op(op_kind(&name, p)?))
            }
            "user" => match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    ("user", KwValue::Word(s))
                }
                _ => ("user", KwValue::Word(self.ident()?)),
            },
            "requirement" => ("requirement", KwValue::Requirements(self.requirements()?)),
            "sources" => {
                let list = if *self.peek() == Tok::LBrace {
                    self.source_set()?
                } else {
                    vec![self.source()?]
                };
                ("sources", KwValue::Sources(list))
            }
            _ => {
                return Err(DslError::Syntax {
                    line: pos.0,
                    col: pos.1,
                    message: format!("unknown argument `{key}`"),
                })
            }
        })
    }

    fn endpoint(&mut self) -> Result<Endpoint, DslError> {
        let node = self.node_id()?;
        if *self.peek() == Tok::LBracket {
            self.engine_suffix()?;
            Ok(Endpoint::EngineOf(node))
        } else {
            Ok(Endpoint::Node(node))
        }
    }

    fn engine_suffix(&mut self) -> Result<(), DslError> {
        self.expect(Tok::LBracket)?;
        let word = self.ident()?;
        if word != "engine" {
            return self.error(format!("expected `engine`, found `{word}`"));
        }
        self.expect(Tok::RBracket)
    }

    fn source_set(&mut self) -> Result<Vec<SourceRef>, DslError> {
        self.expect(Tok::LBrace)?;
        let mut out = vec![self.source()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.source()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::LParen {
            let pos = self.here();
            let name = self.ident()?;
            let kind = op_kind(&name, pos)?;
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                loop {
                    if *self.peek() == Tok::LBrace {
                        args.extend(self.source_set()?.into_iter().map(Expr::Source));
                    } else {
                        args.push(self.expr()?);
                    }
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen)?;
            if kind == OpKind::Sub
                && args.len() == 1
                && matches!(
                    args[0],
                    Expr::Source(SourceRef::Node(_)) | Expr::Source(SourceRef::EngineOf(_))
                )
            {
                return Err(DslError::Arity {
                    op: kind,
                    at: Some(pos),
                });
            }
            Ok(Expr::Op { kind, args })
        } else {
            self.source().map(Expr::Source)
        }
    }

    fn source(&mut self) -> Result<SourceRef, DslError> {
        let pos = self.here();
        if let Tok::Str(s) = self.peek().clone() {
            self.bump();
            return Ok(SourceRef::Region(s));
        }
        let node = self.node_id()?;
        match self.peek().clone() {
            Tok::Colon => {
                self.bump();
                let (prefix, from) = node.numeric_suffix().ok_or_else(|| DslError::Syntax {
                    line: pos.0,
                    col: pos.1,
                    message: format!("range start `{node}` has no numeric suffix"),
                })?;
                let prefix = prefix.to_owned();
                let to_pos = self.here();
                let to = match self.bump().tok {
                    Tok::Number(n) => n.parse::<u64>().ok(),
                    Tok::Ident(s) => NodeId::new(s)
                        .ok()
                        .and_then(|n| n.numeric_suffix().filter(|(p, _)| *p == prefix).map(|(_, v)| v)),
                    _ => None,
                }
                .ok_or_else(|| DslError::Syntax {
                    line: to_pos.0,
                    col: to_pos.1,
                    message: format!("bad range end for prefix `{prefix}`"),
                })?;
                Ok(SourceRef::Range { prefix, from, to })
            }
            Tok::LBracket => {
                self.engine_suffix()?;
                Ok(SourceRef::EngineOf(node))
            }
            _ => Ok(SourceRef::Node(node)),
        }
    }

    fn requirements(&mut self) -> Result<Requirements, DslError> {
        self.expect(Tok::LBrace)?;
        let mut req = Requirements::default();
        let mut seen = Vec::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let pos = self.here();
                let key = self.ident()?;
                if seen.contains(&key) {
                    return Err(DslError::Syntax {
                        line: pos.0,
                        col: pos.1,
                        message: format!("requirement `{key}` given more than once"),
                    });
                }
                self.expect(Tok::Eq)?;
                match key.as_str() {
                    "delay" => req.delay_ms = Some(self.positive_duration("delay")?),
                    "rate" => req.rate_ms = Some(self.positive_duration("rate")?),
                    "jitter" => {
                        let jpos = self.here();
                        let j = self.duration()?;
                        if !(0.0..=MAX_JITTER_MS).contains(&j) {
                            return Err(DslError::Syntax {
                                line: jpos.0,
                                col: jpos.1,
                                message: format!("jitter must be within 0..={MAX_JITTER_MS}ms"),
                            });
                        }
                        req.jitter_ms = Some(j);
                    }
                    "coverage" => {
                        req.coverage = Some(match self.peek().clone() {
                            Tok::Str(s) => {
                                self.bump();
                                s
                            }
                            _ => self.ident()?,
                        })
                    }
                    "datatype" => {
                        let tpos = self.here();
                        req.data_type = Some(match self.ident()?.as_str() {
                            "scalar" => DataType::Scalar,
                            "vector" => DataType::Vector,
                            "matrix" => DataType::Matrix,
                            other => {
                                return Err(DslError::Syntax {
                                    line: tpos.0,
                                    col: tpos.1,
                                    message: format!("unknown data type `{other}`"),
                                })
                            }
                        })
                    }
                    _ => {
                        return Err(DslError::Syntax {
                            line: pos.0,
                            col: pos.1,
                            message: format!("unknown requirement `{key}`"),
                        })
                    }
                }
                seen.push(key);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(req)
    }

    fn positive_duration(&mut self, what: &str) -> Result<f64, DslError> {
        let pos = self.here();
        let d = self.duration()?;
        if d > 0.0 {
            Ok(d)
        } else {
            Err(DslError::Syntax {
                line: pos.0,
                col: pos.1,
                message: format!("{what} must be positive"),
            })
        }
    }

    /// `10ms`, `1s`, `2.5s`; a bare number means milliseconds.
    fn duration(&mut self) -> Result<f64, DslError> {
        let value: f64 = match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                n.parse().map_err(|_| DslError::Syntax {
                    line: 0,
                    col: 0,
                    message: format!("bad number {n}"),
                })?
            }
            other => return self.error(format!("expected a duration, found {}", other.describe())),
        };
        let scale = match self.peek() {
            Tok::Ident(u) if u == "ms" => 1.0,
            Tok::Ident(u) if u == "s" => 1000.0,
            Tok::Ident(u) => return self.error(format!("unknown duration unit `{u}`")),
            _ => return Ok(value),
        };
        self.bump();
        Ok(value * scale)
    }
}

fn op_kind(name: &str, (line, col): (usize, usize)) -> Result<OpKind, DslError> {
    name.parse().map_err(|_| DslError::UnknownOperation {
        name: name.to_owned(),
        line,
        col,
    })
}

fn assemble(
    mode: Mode,
    head_pos: (usize, usize),
    positional: Vec<Positional>,
    mut kwargs: BTreeMap<&'static str, (KwValue, (usize, usize))>,
) -> Result<Request, DslError> {
    let syntax = |(line, col): (usize, usize), message: &str| DslError::Syntax {
        line,
        col,
        message: message.to_owned(),
    };

    let user = match kwargs.remove("user") {
        Some((KwValue::Word(u), _)) => u,
        _ => DEFAULT_USER.to_owned(),
    };
    let requirements = match kwargs.remove("requirement") {
        Some((KwValue::Requirements(r), _)) => r,
        _ => Requirements::default(),
    };
    let destination = match kwargs.remove("destination") {
        Some((KwValue::Endpoint(e), _)) => e,
        _ => return Err(syntax(head_pos, "missing `destination<-...`")),
    };
    let switch = match kwargs.remove("switch") {
        Some((KwValue::Node(n), pos)) => Some((n, pos)),
        _ => None,
    };
    let compute = match kwargs.remove("compute") {
        Some((KwValue::Op(k), pos)) => Some((k, pos)),
        _ => None,
    };
    let extra_sources = match kwargs.remove("sources") {
        Some((KwValue::Sources(s), pos)) => Some((s, pos)),
        _ => None,
    };

    let mut expr = match mode {
        Mode::Automated => {
            if let Some((_, pos)) = switch {
                return Err(syntax(pos, "automated requests choose switches themselves; drop `switch<-`"));
            }
            if let Some((_, pos)) = compute {
                return Err(syntax(pos, "`compute<-` is only valid in datapath_m"));
            }
            if let Some((_, pos)) = extra_sources {
                return Err(syntax(pos, "`sources<-` is only valid in datapath_m"));
            }
            if let Endpoint::EngineOf(_) = destination {
                return Err(syntax(head_pos, "automated destinations must be hosts"));
            }
            let mut it = positional.into_iter();
            match (it.next(), it.next()) {
                (Some(Positional::Expr(e @ Expr::Op { .. }, _)), None) => e,
                _ => {
                    return Err(syntax(
                        head_pos,
                        "datapath_a takes exactly one operation expression",
                    ))
                }
            }
        }
        Mode::Manual => {
            if switch.is_none() {
                return Err(syntax(head_pos, "datapath_m requires `switch<-...`"));
            }
            let mut sources = Vec::new();
            let mut op: Option<OpKind> = None;
            for p in positional {
                match p {
                    Positional::Set(s) => sources.extend(s),
                    Positional::Expr(Expr::Source(s), _) => sources.push(s),
                    Positional::Expr(Expr::Op { kind, args }, pos) => {
                        if op.is_some() || !sources.is_empty() {
                            return Err(syntax(pos, "datapath_m takes a single operation over sources"));
                        }
                        for a in args {
                            match a {
                                Expr::Source(s) => sources.push(s),
                                Expr::Op { .. } => {
                                    return Err(syntax(pos, "datapath_m operations cannot be nested"))
                                }
                            }
                        }
                        op = Some(kind);
                    }
                }
            }
            if let Some((extra, _)) = extra_sources {
                sources.extend(extra);
            }
            let kind = match (op, compute) {
                (Some(a), Some((b, pos))) if a != b => {
                    return Err(syntax(pos, "`compute<-` disagrees with the operation"))
                }
                (Some(a), _) => a,
                (None, Some((b, _))) => b,
                (None, None) => return Err(syntax(head_pos, "datapath_m requires `compute<-...`")),
            };
            if kind == OpKind::Sub
                && sources.len() == 1
                && matches!(sources[0], SourceRef::Node(_) | SourceRef::EngineOf(_))
            {
                return Err(DslError::Arity {
                    op: kind,
                    at: Some(head_pos),
                });
            }
            Expr::Op {
                kind,
                args: sources.into_iter().map(Expr::Source).collect(),
            }
        }
    };

    fill_empty_ops(&mut expr, requirements.coverage.as_deref(), head_pos)?;

    Ok(Request {
        mode,
        expr,
        destination,
        switch: switch.map(|(n, _)| n),
        requirements,
        user,
    })
}

/// Operations written with no operands draw them from the coverage region.
fn fill_empty_ops(expr: &mut Expr, coverage: Option<&str>, pos: (usize, usize)) -> Result<(), DslError> {
    if let Expr::Op { kind, args } = expr {
        if args.is_empty() {
            match coverage {
                Some(region) => args.push(Expr::Source(SourceRef::Region(region.to_owned()))),
                None => {
                    return Err(DslError::Syntax {
                        line: pos.0,
                        col: pos.1,
                        message: format!("`{kind}()` has no operands and no coverage requirement"),
                    })
                }
            }
        }
        for a in args {
            fill_empty_ops(a, coverage, pos)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::id;

    const NESTED: &str = "datapath_a(max(avg(bs1:bs10),avg(bs11:bs100),max(min(bs101:bs200),min(bs201:bs300))),destination<-user)";

    #[test]
    fn nested_shape() {
        let r = parse_request(NESTED).unwrap();
        assert_eq!(r.mode, Mode::Automated);
        assert_eq!(r.expr.op_count(), 6);
        assert_eq!(r.destination, Endpoint::Node(id("user")));
        assert_eq!(r.to_string(), NESTED);
    }

    #[test]
    fn degenerate_single_source() {
        let r = parse_request("datapath_a(max(bs1),destination<-user)").unwrap();
        assert_eq!(
            r.expr,
            Expr::Op {
                kind: OpKind::Max,
                args: vec![Expr::Source(SourceRef::Node(id("bs1")))]
            }
        );
    }

    #[test]
    fn unknown_operation() {
        let e = parse_request("datapath_a(foo(bs1:bs2),destination<-user)").unwrap_err();
        assert!(matches!(e, DslError::UnknownOperation { ref name, line: 1, col: 12 } if name == "foo"));
    }

    #[test]
    fn sub_needs_two_operands() {
        let e = parse_request("datapath_a(sub(bs1),destination<-user)").unwrap_err();
        assert!(matches!(e, DslError::Arity { op: OpKind::Sub, .. }));
        assert!(parse_request("datapath_a(sub(bs1,bs2),destination<-user)").is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_request("datapath_a(max(bs1),destination<-user").unwrap_err();
        assert!(matches!(e, DslError::Syntax { line: 1, col: 38, .. }), "{e:?}");
        let e = parse_request_at("datapath_a(max(bs1) $", 7).unwrap_err();
        assert!(matches!(e, DslError::Syntax { line: 7, col: 21, .. }), "{e:?}");
    }

    #[test]
    fn requirements_and_units() {
        let r = parse_request(
            "datapath_a(avg(bs1:bs4),destination<-user,requirement<-{delay=10ms,rate=1s,jitter=5ms,datatype=vector},user<-shahzad)",
        )
        .unwrap();
        assert_eq!(r.requirements.delay_ms, Some(10.0));
        assert_eq!(r.requirements.rate_ms, Some(1000.0));
        assert_eq!(r.requirements.jitter_ms, Some(5.0));
        assert_eq!(r.requirements.data_type, Some(DataType::Vector));
        assert_eq!(r.user, "shahzad");
        assert_eq!(parse_request(&r.to_string()).unwrap(), r);
    }

    #[test]
    fn jitter_is_capped() {
        assert!(parse_request("datapath_a(avg(bs1),destination<-user,requirement<-{jitter=25ms})").is_ok());
        assert!(parse_request("datapath_a(avg(bs1),destination<-user,requirement<-{jitter=26ms})").is_err());
        assert!(parse_request("datapath_a(avg(bs1),destination<-user,requirement<-{delay=0ms})").is_err());
    }

    #[test]
    fn unicode_arrow_and_short_range_end() {
        let r = parse_request("datapath_a(min(bs201:300),destination\u{2190}user)").unwrap();
        assert_eq!(
            r.expr.to_string(),
            "min(bs201:bs300)"
        );
    }

    #[test]
    fn manual_forms() {
        let a = parse_request("datapath_m(bs1,bs2,switch<-sw,computation<-sum,destination<-dest)").unwrap();
        assert_eq!(a.mode, Mode::Manual);
        assert_eq!(a.switch, Some(id("sw")));
        assert_eq!(a.to_string(), "datapath_m(sum(bs1,bs2),switch<-sw,destination<-dest)");
        let b = parse_request("datapath_m({bs201:bs300},switch<-sw4,compute<-min,destination<-sw5[engine])").unwrap();
        assert_eq!(b.destination, Endpoint::EngineOf(id("sw5")));
        let c = parse_request(
            "datapath_m(sw1[engine],sw2[engine],sw5[engine],switch<-sw3,compute<-max,destination<-user)",
        )
        .unwrap();
        assert_eq!(c.expr.to_string(), "max(sw1[engine],sw2[engine],sw5[engine])");
        assert_eq!(parse_request(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn mode_constraints() {
        assert!(parse_request("datapath_m(bs1,compute<-sum,destination<-dest)").is_err());
        assert!(parse_request("datapath_a(sum(bs1),switch<-sw1,destination<-dest)").is_err());
        assert!(parse_request("datapath_m(sum(max(bs1)),switch<-sw1,destination<-dest)").is_err());
        assert!(parse_request("datapath_a(sum(bs1))").is_err());
    }

    #[test]
    fn coverage_fills_empty_operation() {
        let r = parse_request("datapath_a(avg(),destination<-user,requirement<-{coverage=Seoul})").unwrap();
        assert_eq!(r.expr.to_string(), "avg(\"Seoul\")");
        assert_eq!(parse_request(&r.to_string()).unwrap(), r);
        assert!(parse_request("datapath_a(avg(),destination<-user)").is_err());
    }
}
