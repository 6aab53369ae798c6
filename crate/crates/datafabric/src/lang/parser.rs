//! Recursive-descent parser for request programs.
//!
//! ```text
//! program  := request* EOF
//! request  := "MATCH" ("ANY" | "ALL") "(" ident ("," ident)* ")"
//!             ["WHERE" cond ("AND" cond)*]
//!             "APPLY" ident ["(" arg ("," arg)* ")"] ";"
//! cond     := ident cmp literal
//! arg      := ident | literal
//! literal  := int | real | string
//! ```

use crate::fabric::FieldValue;
use crate::lang::ast::{ArgAst, ConditionAst, MatchMode, RequestAst, Span};
use crate::lang::lexer::{tokenize, Token, TokenKind};
use crate::lang::ParseError;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, message: String) -> ParseError {
        ParseError {
            line: tok.line,
            col: tok.col,
            message,
            lexeme: tok.lexeme.clone(),
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<Token, ParseError> {
        if std::mem::discriminant(&self.peek().kind) == std::mem::discriminant(kind) {
            Ok(self.bump())
        } else {
            let tok = self.peek();
            Err(self.error_at(
                tok,
                format!("expected {what}, found {}", tok.kind.describe()),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Ident(name) => {
                self.bump();
                Ok((name, Span::new(tok.line, tok.col)))
            }
            _ => Err(self.error_at(
                &tok,
                format!("expected {what}, found {}", tok.kind.describe()),
            )),
        }
    }

    fn parse_literal(&mut self) -> Result<(FieldValue, Span), ParseError> {
        let tok = self.peek().clone();
        let span = Span::new(tok.line, tok.col);
        let value = match tok.kind {
            TokenKind::Int(i) => FieldValue::Int(i),
            TokenKind::Real(r) => FieldValue::Real(r),
            TokenKind::Str(s) => FieldValue::Text(s),
            _ => {
                return Err(self.error_at(
                    &tok,
                    format!("expected literal, found {}", tok.kind.describe()),
                ))
            }
        };
        self.bump();
        Ok((value, span))
    }

    fn parse_condition(&mut self) -> Result<ConditionAst, ParseError> {
        let (field, field_span) = self.expect_ident("field name")?;
        let tok = self.peek().clone();
        let cmp = match tok.kind {
            TokenKind::Cmp(cmp) => cmp,
            _ => {
                return Err(self.error_at(
                    &tok,
                    format!("expected comparator, found {}", tok.kind.describe()),
                ))
            }
        };
        let cmp_span = Span::new(tok.line, tok.col);
        self.bump();
        let (literal, literal_span) = self.parse_literal()?;
        if cmp.is_ordered() && matches!(literal, FieldValue::Text(_)) {
            return Err(ParseError {
                line: cmp_span.line,
                col: cmp_span.col,
                message: "ordered comparator on string literal".to_string(),
                lexeme: cmp.as_str().to_string(),
            });
        }
        Ok(ConditionAst { field, field_span, cmp, cmp_span, literal, literal_span })
    }

    fn parse_arg(&mut self) -> Result<ArgAst, ParseError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Ident(name) => {
                self.bump();
                Ok(ArgAst::Field(name, Span::new(tok.line, tok.col)))
            }
            TokenKind::Int(_) | TokenKind::Real(_) | TokenKind::Str(_) => {
                let (value, span) = self.parse_literal()?;
                Ok(ArgAst::Literal(value, span))
            }
            _ => Err(self.error_at(
                &tok,
                format!("expected argument, found {}", tok.kind.describe()),
            )),
        }
    }

    fn parse_request(&mut self) -> Result<RequestAst, ParseError> {
        let start = self.expect(&TokenKind::Match, "'MATCH'")?;
        let span = Span::new(start.line, start.col);

        let mode_tok = self.peek().clone();
        let mode = match mode_tok.kind {
            TokenKind::Any => MatchMode::Any,
            TokenKind::All => MatchMode::All,
            _ => {
                return Err(self.error_at(
                    &mode_tok,
                    format!("expected 'ANY' or 'ALL', found {}", mode_tok.kind.describe()),
                ))
            }
        };
        self.bump();

        self.expect(&TokenKind::LParen, "'('")?;
        let mut keywords = vec![self.expect_ident("keyword")?];
        while self.peek().kind == TokenKind::Comma {
            self.bump();
            keywords.push(self.expect_ident("keyword")?);
        }
        self.expect(&TokenKind::RParen, "')'")?;

        let mut conditions = Vec::new();
        if self.peek().kind == TokenKind::Where {
            self.bump();
            conditions.push(self.parse_condition()?);
            while self.peek().kind == TokenKind::And {
                self.bump();
                conditions.push(self.parse_condition()?);
            }
        }

        self.expect(&TokenKind::Apply, "'APPLY'")?;
        let (op, op_span) = self.expect_ident("operation name")?;

        let mut args = Vec::new();
        if self.peek().kind == TokenKind::LParen {
            self.bump();
            args.push(self.parse_arg()?);
            while self.peek().kind == TokenKind::Comma {
                self.bump();
                args.push(self.parse_arg()?);
            }
            self.expect(&TokenKind::RParen, "')'")?;
        }

        self.expect(&TokenKind::Semi, "';'")?;
        Ok(RequestAst { span, mode, keywords, conditions, op, op_span, args })
    }
}

/// Parses a whole program, returning every request or the first error.
/// An empty program (only whitespace and comments) parses to an empty list.
pub fn parse_program(text: &str) -> Result<Vec<RequestAst>, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut requests = Vec::new();
    while parser.peek().kind != TokenKind::Eof {
        requests.push(parser.parse_request()?);
    }
    Ok(requests)
}

/// Parses exactly one request.
pub fn parse_request(text: &str) -> Result<RequestAst, ParseError> {
    let requests = parse_program(text)?;
    match requests.len() {
        1 => Ok(requests.into_iter().next().unwrap()),
        0 => Err(ParseError {
            line: 1,
            col: 1,
            message: "expected a request".to_string(),
            lexeme: String::new(),
        }),
        _ => Err(ParseError {
            line: 1,
            col: 1,
            message: "expected a single request".to_string(),
            lexeme: String::new(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ast::Comparator;

    #[test]
    fn parses_the_minimal_request() {
        let ast = parse_request("MATCH ANY(temp) APPLY count;").unwrap();
        assert_eq!(ast.mode, MatchMode::Any);
        assert_eq!(ast.keywords[0].0, "temp");
        assert!(ast.conditions.is_empty());
        assert_eq!(ast.op, "count");
        assert!(ast.args.is_empty());
    }

    #[test]
    fn parses_conditions_and_args() {
        let ast = parse_request(
            "MATCH ALL(sensor, temp) WHERE value >= 20.5 AND unit == \"c\" APPLY scale(value, 2);",
        )
        .unwrap();
        assert_eq!(ast.conditions.len(), 2);
        assert_eq!(ast.conditions[0].cmp, Comparator::Ge);
        assert_eq!(ast.conditions[1].literal, FieldValue::Text("c".into()));
        assert_eq!(ast.args.len(), 2);
        match &ast.args[1] {
            ArgAst::Literal(FieldValue::Int(2), _) => {}
            other => panic!("unexpected arg {other:?}"),
        }
    }

    #[test]
    fn rejects_ordered_comparator_on_string() {
        let err =
            parse_request("MATCH ANY(a) WHERE city < \"Oslo\" APPLY count;").unwrap_err();
        assert_eq!(err.message, "ordered comparator on string literal");
        assert_eq!((err.line, err.col), (1, 25));
        assert_eq!(err.lexeme, "<");
    }

    #[test]
    fn reports_missing_semicolon_with_position() {
        let err = parse_request("MATCH ANY(a) APPLY count").unwrap_err();
        assert_eq!(err.message, "expected ';', found end of input");
        assert_eq!((err.line, err.col), (1, 25));
    }

    #[test]
    fn rejects_empty_keyword_list() {
        let err = parse_request("MATCH ANY() APPLY count;").unwrap_err();
        assert!(err.message.starts_with("expected keyword"));
    }

    #[test]
    fn empty_program_parses_to_no_requests() {
        assert!(parse_program("# nothing here\n").unwrap().is_empty());
    }

    #[test]
    fn program_with_two_requests() {
        let prog = parse_program(
            "MATCH ANY(a) APPLY count;\n# note\nMATCH ALL(b) APPLY sum(v);\n",
        )
        .unwrap();
        assert_eq!(prog.len(), 2);
    }

    #[test]
    fn pretty_print_reparses_structurally_equal() {
        let text =
            "MATCH ALL(sensor,temp) WHERE value>=20.5 AND unit!=\"f\" APPLY scale(value,1.5);";
        let ast = parse_request(text).unwrap();
        let reparsed = parse_request(&ast.pretty()).unwrap();
        assert!(ast.structurally_eq(&reparsed));
        assert_eq!(ast.pretty(), reparsed.pretty());
    }
}
