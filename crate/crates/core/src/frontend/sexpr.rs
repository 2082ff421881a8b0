//! Minimal s-expression reader for SMT-LIB 2 scripts.

use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    /// Numerals, decimals, symbols and keywords.
    Atom(String),
    /// `"..."` string literal, kept without quotes.
    Str(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(s) => write!(f, "{s}"),
            SExpr::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            SExpr::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Reads every top-level s-expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut reader = Reader {
        chars: text.char_indices().peekable(),
        line: 1,
    };
    let mut out = Vec::new();
    let mut stack: Vec<Vec<SExpr>> = Vec::new();
    while let Some(tok) = reader.next_token()? {
        match tok {
            Token::Open => stack.push(Vec::new()),
            Token::Close => {
                let items = stack.pop().ok_or_else(|| ParseError::Syntax {
                    line: reader.line,
                    msg: "unbalanced ')'".into(),
                })?;
                push(&mut stack, &mut out, SExpr::List(items));
            }
            Token::Atom(s) => push(&mut stack, &mut out, SExpr::Atom(s)),
            Token::Str(s) => push(&mut stack, &mut out, SExpr::Str(s)),
        }
    }
    if !stack.is_empty() {
        return Err(ParseError::Syntax {
            line: reader.line,
            msg: "unexpected end of input inside '('".into(),
        });
    }
    Ok(out)
}

fn push(stack: &mut [Vec<SExpr>], out: &mut Vec<SExpr>, e: SExpr) {
    match stack.last_mut() {
        Some(top) => top.push(e),
        None => out.push(e),
    }
}

enum Token {
    Open,
    Close,
    Atom(String),
    Str(String),
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
}

impl Reader<'_> {
    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        loop {
            match self.peek() {
                None => return Ok(None),
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
            }
        }
        let c = self.bump().expect("peeked");
        match c {
            '(' => Ok(Some(Token::Open)),
            ')' => Ok(Some(Token::Close)),
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => {
                            return Err(ParseError::Syntax {
                                line: self.line,
                                msg: "unterminated string literal".into(),
                            })
                        }
                        Some('"') if self.peek() == Some('"') => {
                            self.bump();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                    }
                }
                Ok(Some(Token::Str(s)))
            }
            '|' => {
                // Quoted symbols are stored without bars; `|x|` and `x` name the same symbol.
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => {
                            return Err(ParseError::Syntax {
                                line: self.line,
                                msg: "unterminated quoted symbol".into(),
                            })
                        }
                        Some('|') => break,
                        Some(c) => s.push(c),
                    }
                }
                Ok(Some(Token::Atom(s)))
            }
            c => {
                let mut s = String::from(c);
                while let Some(n) = self.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' || n == '"' || n == '|' {
                        break;
                    }
                    s.push(n);
                    self.bump();
                }
                Ok(Some(Token::Atom(s)))
            }
        }
    }
}

/// Renders a symbol, adding `|...|` quoting when it is not a simple SMT-LIB symbol.
pub fn quote_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}
