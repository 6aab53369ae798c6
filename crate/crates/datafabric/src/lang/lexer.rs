//! Lexer for the request language. `#` starts a comment to end of line,
//! whitespace is insignificant, and every error carries a line:column.

use crate::lang::ast::Comparator;
use crate::lang::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Match,
    Any,
    All,
    Where,
    And,
    Apply,
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    Cmp(Comparator),
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Match => "'MATCH'".into(),
            TokenKind::Any => "'ANY'".into(),
            TokenKind::All => "'ALL'".into(),
            TokenKind::Where => "'WHERE'".into(),
            TokenKind::And => "'AND'".into(),
            TokenKind::Apply => "'APPLY'".into(),
            TokenKind::Ident(s) => format!("identifier {s:?}"),
            TokenKind::Int(i) => format!("integer {i}"),
            TokenKind::Real(r) => format!("real {r:?}"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Cmp(c) => format!("'{}'", c.as_str()),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Semi => "';'".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub col: u32,
    pub lexeme: String,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn error(&self, line: u32, col: u32, message: &str, lexeme: &str) -> ParseError {
        ParseError {
            line,
            col,
            message: message.to_string(),
            lexeme: lexeme.to_string(),
        }
    }
}

/// Splits request text into tokens. The returned vector always ends with a
/// single `Eof` token so parsers can report positioned end-of-input errors.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer::new(text);
    let mut tokens = Vec::new();

    while let Some(c) = lx.peek() {
        let (line, col) = (lx.line, lx.col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                lx.bump();
            }
            '#' => {
                while let Some(c) = lx.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
            }
            '(' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::LParen, line, col, lexeme: "(".into() });
            }
            ')' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::RParen, line, col, lexeme: ")".into() });
            }
            ',' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::Comma, line, col, lexeme: ",".into() });
            }
            ';' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::Semi, line, col, lexeme: ";".into() });
            }
            '=' | '!' | '<' | '>' => {
                lx.bump();
                let two = lx.peek() == Some('=');
                let cmp = match (c, two) {
                    ('=', true) => Some(Comparator::Eq),
                    ('!', true) => Some(Comparator::Ne),
                    ('<', true) => Some(Comparator::Le),
                    ('>', true) => Some(Comparator::Ge),
                    ('<', false) => Some(Comparator::Lt),
                    ('>', false) => Some(Comparator::Gt),
                    _ => None,
                };
                match cmp {
                    Some(cmp) => {
                        if two {
                            lx.bump();
                        }
                        let lexeme = cmp.as_str().to_string();
                        tokens.push(Token { kind: TokenKind::Cmp(cmp), line, col, lexeme });
                    }
                    None => {
                        return Err(lx.error(line, col, "unknown comparator", &c.to_string()));
                    }
                }
            }
            '"' => {
                lx.bump();
                let mut s = String::new();
                loop {
                    match lx.peek() {
                        None | Some('\n') => {
                            return Err(lx.error(line, col, "unterminated string", &s));
                        }
                        Some('"') => {
                            lx.bump();
                            break;
                        }
                        Some(c) if c.is_control() => {
                            return Err(lx.error(
                                lx.line,
                                lx.col,
                                "illegal character in string",
                                &c.to_string(),
                            ));
                        }
                        Some(c) => {
                            s.push(c);
                            lx.bump();
                        }
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Str(s.clone()),
                    line,
                    col,
                    lexeme: format!("\"{s}\""),
                });
            }
            c if c.is_ascii_digit() || c == '-' => {
                tokens.push(lex_number(&mut lx, line, col)?);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(c) = lx.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        word.push(c);
                        lx.bump();
                    } else {
                        break;
                    }
                }
                let kind = match word.as_str() {
                    "MATCH" => TokenKind::Match,
                    "ANY" => TokenKind::Any,
                    "ALL" => TokenKind::All,
                    "WHERE" => TokenKind::Where,
                    "AND" => TokenKind::And,
                    "APPLY" => TokenKind::Apply,
                    _ => TokenKind::Ident(word.clone()),
                };
                tokens.push(Token { kind, line, col, lexeme: word });
            }
            other => {
                return Err(lx.error(line, col, "illegal character", &other.to_string()));
            }
        }
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        line: lx.line,
        col: lx.col,
        lexeme: String::new(),
    });
    Ok(tokens)
}

fn lex_number(lx: &mut Lexer<'_>, line: u32, col: u32) -> Result<Token, ParseError> {
    let mut text = String::new();
    if lx.peek() == Some('-') {
        text.push('-');
        lx.bump();
        if !lx.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(lx.error(line, col, "illegal character", "-"));
        }
    }
    let mut is_real = false;
    while let Some(c) = lx.peek() {
        if c.is_ascii_digit() {
            text.push(c);
            lx.bump();
        } else {
            break;
        }
    }
    if lx.peek() == Some('.') {
        is_real = true;
        text.push('.');
        lx.bump();
        if !lx.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(lx.error(line, col, "malformed real literal", &text));
        }
        while let Some(c) = lx.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                lx.bump();
            } else {
                break;
            }
        }
    }
    if matches!(lx.peek(), Some('e') | Some('E')) {
        is_real = true;
        text.push('e');
        lx.bump();
        if matches!(lx.peek(), Some('+') | Some('-')) {
            text.push(lx.bump().unwrap());
        }
        if !lx.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(lx.error(line, col, "malformed real literal", &text));
        }
        while let Some(c) = lx.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                lx.bump();
            } else {
                break;
            }
        }
    }
    let kind = if is_real {
        match text.parse::<f64>() {
            Ok(r) if r.is_finite() => TokenKind::Real(r),
            _ => return Err(lx.error(line, col, "real literal out of range", &text)),
        }
    } else {
        match text.parse::<i64>() {
            Ok(i) => TokenKind::Int(i),
            Err(_) => return Err(lx.error(line, col, "integer literal out of range", &text)),
        }
    };
    Ok(Token { kind, line, col, lexeme: text })
}
