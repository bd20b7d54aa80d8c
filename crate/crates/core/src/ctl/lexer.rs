use super::ast::{is_keyword, Pos};
use super::error::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Keyword(&'static str),
    Int(i64),
    Float(f64),
    Str(String),
    /// `=`
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Keyword(k) => format!("`{k}`"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Float(x) => format!("number {x}"),
            Tok::Str(_) => "string".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    col: u32,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer { chars: src.char_indices().peekable(), src, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let token = lx.next_token()?;
        let done = token.tok == Tok::Eof;
        out.push(token);
        if done {
            return Ok(out);
        }
    }
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, pos: Pos, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(pos.line, pos.col, msg)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, SyntaxError> {
        self.skip_trivia();
        let pos = Pos::new(self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, pos });
        };
        let tok = match c {
            'a'..='z' | 'A'..='Z' | '_' => self.ident(),
            '0'..='9' => self.number(pos)?,
            '"' | '\'' => self.string(pos)?,
            _ => {
                self.bump();
                let next = self.peek();
                let two = |lx: &mut Self, t: Tok| {
                    lx.bump();
                    t
                };
                match (c, next) {
                    ('=', Some('=')) => two(self, Tok::EqEq),
                    ('!', Some('=')) => two(self, Tok::NotEq),
                    ('<', Some('=')) => two(self, Tok::Le),
                    ('>', Some('=')) => two(self, Tok::Ge),
                    ('=', _) => Tok::Assign,
                    ('<', _) => Tok::Lt,
                    ('>', _) => Tok::Gt,
                    ('+', _) => Tok::Plus,
                    ('-', _) => Tok::Minus,
                    ('*', _) => Tok::Star,
                    ('/', _) => Tok::Slash,
                    ('(', _) => Tok::LParen,
                    (')', _) => Tok::RParen,
                    ('[', _) => Tok::LBracket,
                    (']', _) => Tok::RBracket,
                    ('{', _) => Tok::LBrace,
                    ('}', _) => Tok::RBrace,
                    (',', _) => Tok::Comma,
                    (':', _) => Tok::Colon,
                    ('.', _) => Tok::Dot,
                    _ => return Err(self.err(pos, format!("unexpected character {c:?}"))),
                }
            }
        };
        Ok(Token { tok, pos })
    }

    fn ident(&mut self) -> Tok {
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if is_keyword(&word) {
            let kw = super::ast::KEYWORDS.iter().find(|k| **k == word).copied().unwrap_or("?");
            Tok::Keyword(kw)
        } else {
            Tok::Ident(word)
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, SyntaxError> {
        let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
        let mut end = start;
        let mut is_float = false;
        let eat_digits = |lx: &mut Self, end: &mut usize| {
            while let Some(c) = lx.peek() {
                if c.is_ascii_digit() {
                    lx.bump();
                    *end += 1;
                } else {
                    break;
                }
            }
        };
        eat_digits(self, &mut end);
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            self.bump();
            end += 1;
            eat_digits(self, &mut end);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut it = self.chars.clone();
            it.next();
            let mut lookahead = it.next().map(|(_, c)| c);
            let mut extra = 1;
            if matches!(lookahead, Some('+' | '-')) {
                lookahead = it.next().map(|(_, c)| c);
                extra += 1;
            }
            if lookahead.is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                for _ in 0..extra {
                    self.bump();
                }
                end += extra;
                eat_digits(self, &mut end);
            }
        }
        let text = &self.src[start..end];
        if is_float {
            match text.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Tok::Float(x)),
                _ => Err(self.err(pos, format!("float literal out of range: {text}"))),
            }
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| self.err(pos, format!("integer literal out of range: {text}")))
        }
    }

    fn string(&mut self, pos: Pos) -> Result<Tok, SyntaxError> {
        let quote = self.bump().unwrap_or('"');
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(pos, "unterminated string literal"));
            };
            match c {
                c if c == quote => return Ok(Tok::Str(out)),
                '\n' => return Err(self.err(pos, "newline in string literal")),
                '\\' => {
                    let esc_pos = Pos::new(self.line, self.col);
                    match self.bump() {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('r') => out.push('\r'),
                        Some('\\') => out.push('\\'),
                        Some('"') => out.push('"'),
                        Some('\'') => out.push('\''),
                        Some('u') => out.push(self.unicode_escape(esc_pos)?),
                        Some(other) => return Err(self.err(esc_pos, format!("unknown escape \\{other}"))),
                        None => return Err(self.err(pos, "unterminated string literal")),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn unicode_escape(&mut self, pos: Pos) -> Result<char, SyntaxError> {
        if self.bump() != Some('{') {
            return Err(self.err(pos, "expected `{` after \\u"));
        }
        let mut hex = String::new();
        loop {
            match self.bump() {
                Some('}') => break,
                Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
                _ => return Err(self.err(pos, "malformed \\u{...} escape")),
            }
        }
        u32::from_str_radix(&hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| self.err(pos, "invalid unicode scalar in escape"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_member_dots() {
        assert_eq!(toks("1.5"), vec![Tok::Float(1.5), Tok::Eof]);
        assert_eq!(toks("2e3"), vec![Tok::Float(2000.0), Tok::Eof]);
        assert_eq!(toks("x.y"), vec![Tok::Ident("x".into()), Tok::Dot, Tok::Ident("y".into()), Tok::Eof]);
        assert_eq!(toks("1.y"), vec![Tok::Int(1), Tok::Dot, Tok::Ident("y".into()), Tok::Eof]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(toks("# hi\nreturn # x\n1"), vec![Tok::Keyword("return"), Tok::Int(1), Tok::Eof]);
    }

    #[test]
    fn integer_overflow_is_a_syntax_error() {
        let err = tokenize("99999999999999999999").unwrap_err();
        assert!(err.message.contains("out of range"));
    }

    #[test]
    fn escapes() {
        assert_eq!(toks(r#""a\"b\n\u{41}""#), vec![Tok::Str("a\"b\nA".into()), Tok::Eof]);
        assert!(tokenize("\"abc").is_err());
    }
}
