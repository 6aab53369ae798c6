//! The request language: lexing, parsing, and compilation against the
//! functional block registry. Scripts hold any number of requests, each
//! terminated by `;`, with `#` comments between them.

pub mod ast;
pub mod compile;
pub mod lexer;
pub mod parser;

pub use ast::{ArgAst, Comparator, ConditionAst, MatchMode, RequestAst, Span};
pub use compile::{conditions_hold, Arg, Compiler, Condition, Request};
pub use parser::{parse_program, parse_request};

/// Lexical or syntactic fault, positioned at the offending lexeme.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message} ({lexeme:?})")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
    pub lexeme: String,
}

/// Semantic fault found while checking a parsed request against the registry.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct CompileError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// Any reason a script fails to become runnable requests.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LangError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Parses and compiles a whole script in one pass, stopping at the first fault.
pub fn compile_program(
    text: &str,
    compiler: &mut Compiler,
) -> Result<Vec<Request>, LangError> {
    let asts = parse_program(text)?;
    let mut requests = Vec::with_capacity(asts.len());
    for ast in &asts {
        requests.push(compiler.compile(ast)?);
    }
    Ok(requests)
}
