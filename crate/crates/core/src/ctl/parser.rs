use std::collections::BTreeSet;

use super::ast::*;
use super::error::SyntaxError;
use super::lexer::{tokenize, Tok, Token};
use super::value::Value;

/// Largest accepted source text.
pub const MAX_SOURCE_BYTES: usize = 64 * 1024;

/// Nesting bound for expressions and blocks; keeps hostile input off the stack.
pub const MAX_DEPTH: usize = 96;

pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    if source.len() > MAX_SOURCE_BYTES {
        return Err(SyntaxError::new(1, 1, format!("source is {} bytes; limit is {MAX_SOURCE_BYTES}", source.len())));
    }
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, at: 0, depth: 0 };
    let body = p.stmts_until(|t| *t == Tok::Eof)?;
    Ok(Program { source: source.to_string(), body })
}

/// Parses raw bytes, reporting invalid UTF-8 as a syntax error.
pub fn parse_bytes(bytes: &[u8]) -> Result<Program, SyntaxError> {
    match std::str::from_utf8(bytes) {
        Ok(src) => parse(src),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count() as u32;
            let col = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count() as u32;
            Err(SyntaxError::new(line, col, "source is not valid UTF-8"))
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn error(&self, msg: impl Into<String>) -> SyntaxError {
        let pos = self.pos();
        SyntaxError::new(pos.line, pos.col, msg)
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error("nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn stmts_until(&mut self, stop: impl Fn(&Tok) -> bool) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        while !stop(self.peek()) {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.enter()?;
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.stmts_until(|t| *t == Tok::RBrace)?;
        self.expect(Tok::RBrace, "`}`")?;
        self.leave();
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Keyword("return") => {
                self.advance();
                StmtKind::Return(self.expr()?)
            }
            Tok::Keyword("if") => {
                self.advance();
                let cond = self.expr()?;
                let then_body = self.block()?;
                let else_body = if self.eat(&Tok::Keyword("else")) { Some(self.block()?) } else { None };
                StmtKind::If { cond, then_body, else_body }
            }
            Tok::Keyword("for") => {
                self.advance();
                let var = self.ident("loop variable")?;
                self.expect(Tok::Keyword("in"), "`in`")?;
                let iter = self.expr()?;
                let body = self.block()?;
                StmtKind::For { var, iter, body }
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::Assign => {
                self.advance();
                self.advance();
                StmtKind::Assign { name, value: self.expr()? }
            }
            _ => StmtKind::Expr(self.expr()?),
        };
        Ok(Stmt { kind, pos })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let e = self.or_expr();
        self.leave();
        e
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Keyword("or")) {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::Keyword("and")) {
            let rhs = self.not_expr()?;
            lhs = Expr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat(&Tok::Keyword("not")) {
            let operand = self.cmp_expr()?;
            Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand) })
        } else {
            self.cmp_expr()
        }
    }

    fn cmp_expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.add_expr()?;
        Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    fn add_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat(&Tok::Minus) {
            let operand = self.postfix_expr()?;
            Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand) })
        } else {
            self.postfix_expr()
        }
    }

    fn postfix_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut base = self.atom()?;
        loop {
            match self.peek() {
                Tok::LBracket => {
                    self.advance();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    base = Expr::Index { base: Box::new(base), index: Box::new(index) };
                }
                Tok::Dot => {
                    self.advance();
                    let field = self.ident("field name after `.`")?;
                    base = Expr::Index { base: Box::new(base), index: Box::new(Expr::Literal(Value::Str(field))) };
                }
                _ => return Ok(base),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Literal(Value::Int(i)))
            }
            Tok::Float(x) => {
                self.advance();
                Ok(Expr::Literal(Value::Float(x)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Value::Str(s)))
            }
            Tok::Keyword("true") => {
                self.advance();
                Ok(Expr::Literal(Value::Bool(true)))
            }
            Tok::Keyword("false") => {
                self.advance();
                Ok(Expr::Literal(Value::Bool(false)))
            }
            Tok::Keyword("null") => {
                self.advance();
                Ok(Expr::Literal(Value::Null))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.call(name)
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LBracket => {
                self.advance();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `]`")?;
                    }
                }
                Ok(Expr::List(items))
            }
            Tok::LBrace => {
                self.advance();
                let mut entries = Vec::new();
                let mut seen = BTreeSet::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let key = match self.peek().clone() {
                            Tok::Str(s) => s,
                            _ => return Err(self.unexpected("string key")),
                        };
                        if !seen.insert(key.clone()) {
                            return Err(self.error(format!("duplicate map key {key:?}")));
                        }
                        self.advance();
                        self.expect(Tok::Colon, "`:`")?;
                        entries.push((key, self.expr()?));
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `}`")?;
                    }
                }
                Ok(Expr::Map(entries))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        if is_builtin(&name) {
            let mut args = Vec::new();
            if !self.eat(&Tok::RParen) {
                loop {
                    args.push(self.expr()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma, "`,` or `)`")?;
                }
            }
            return Ok(Expr::Call { name, args: CallArgs::Positional(args) });
        }
        let mut args = Vec::new();
        let mut seen = BTreeSet::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let is_keyword_arg = matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Assign;
                if !is_keyword_arg {
                    return Err(self.error(format!("tool `{name}` must be called with keyword arguments (name=value)")));
                }
                let key = self.ident("argument name")?;
                if !seen.insert(key.clone()) {
                    return Err(self.error(format!("duplicate argument `{key}`")));
                }
                self.expect(Tok::Assign, "`=`")?;
                args.push((key, self.expr()?));
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        Ok(Expr::Call { name, args: CallArgs::Keyword(args) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: impl Into<Value>) -> Expr {
        Expr::Literal(v.into())
    }

    fn stmt(kind: StmtKind) -> Stmt {
        Stmt { kind, pos: Pos::default() }
    }

    #[test]
    fn minimal_return() {
        let p = parse("return 1 + 2").unwrap();
        assert_eq!(
            p.body,
            vec![stmt(StmtKind::Return(Expr::Binary {
                op: BinOp::Add,
                lhs: Box::new(lit(1i64)),
                rhs: Box::new(lit(2i64)),
            }))]
        );
    }

    #[test]
    fn order_lookup_program_matches_hand_built_ast() {
        let src = "x = get_order_details(order_id=\"#W1\")\nreturn x[\"status\"] == \"cancelled\"";
        let expected = vec![
            stmt(StmtKind::Assign {
                name: "x".into(),
                value: Expr::Call {
                    name: "get_order_details".into(),
                    args: CallArgs::Keyword(vec![("order_id".into(), lit("#W1"))]),
                },
            }),
            stmt(StmtKind::Return(Expr::Binary {
                op: BinOp::Eq,
                lhs: Box::new(Expr::Index { base: Box::new(Expr::Var("x".into())), index: Box::new(lit("status")) }),
                rhs: Box::new(lit("cancelled")),
            })),
        ];
        assert_eq!(parse(src).unwrap().body, expected);
    }

    #[test]
    fn member_access_is_index_sugar() {
        assert_eq!(parse("return a.b").unwrap(), parse("return a[\"b\"]").unwrap());
    }

    #[test]
    fn incomplete_for_is_an_error() {
        assert!(parse("for x in").is_err());
    }

    #[test]
    fn positional_tool_call_is_rejected() {
        let err = parse("get_order_details(\"#W1\")").unwrap_err();
        assert!(err.message.contains("keyword"));
        assert_eq!((err.line, err.col), (1, 19));
    }

    #[test]
    fn builtins_take_positional_arguments() {
        assert!(parse("result = len([1, 2, 3])").is_ok());
        assert!(parse("result = max([1], 2)").is_ok());
    }

    #[test]
    fn chained_comparison_and_double_not_are_rejected() {
        assert!(parse("return 1 < 2 < 3").is_err());
        assert!(parse("return not not true").is_err());
        assert!(parse("return --1").is_err());
    }

    #[test]
    fn duplicate_keys_and_arguments_are_rejected() {
        assert!(parse("return {\"a\": 1, \"a\": 2}").is_err());
        assert!(parse("f(a=1, a=2)").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("return {}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse(&src).is_err());
    }

    #[test]
    fn oversized_source_is_rejected() {
        let src = "x = 1\n".repeat(20_000);
        assert!(parse(&src).is_err());
    }

    #[test]
    fn invalid_utf8_is_located() {
        let err = parse_bytes(b"x = 1\ny = \xff").unwrap_err();
        assert_eq!((err.line, err.col), (2, 5));
    }

    #[test]
    fn else_block_and_for_loop() {
        let p = parse("for o in orders { if o.ok { n = n + 1 } else { m = 1 } }").unwrap();
        assert_eq!(p.body.len(), 1);
        match &p.body[0].kind {
            StmtKind::For { var, body, .. } => {
                assert_eq!(var, "o");
                assert!(matches!(body[0].kind, StmtKind::If { else_body: Some(_), .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
