//! A lossless tokenizer for C, C++ and Python source fragments.
//!
//! Concatenating the token texts reproduces the input byte-for-byte. Chunks
//! are arbitrary line windows, so unterminated comments and strings are
//! accepted and simply run to the end of the line (or input).

use crate::patch::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Comment,
    Punct,
    Space,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
}

impl Token<'_> {
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Space | TokenKind::Comment)
    }
}

const C_PUNCT: &[&str] = &[
    "<<=", ">>=", "...", "->*", "<=>", "->", "::", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##", ".*",
];
const PY_PUNCT: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
];

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

pub fn tokenize(src: &str, language: Language) -> Vec<Token<'_>> {
    Lexer {
        src,
        pos: 0,
        language,
    }
    .run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    language: Language,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }

    fn run(mut self) -> Vec<Token<'a>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let kind = self.next_kind();
            debug_assert!(self.pos > start);
            out.push(Token {
                kind,
                text: &self.src[start..self.pos],
            });
        }
        out
    }

    fn next_kind(&mut self) -> TokenKind {
        let c = self.peek().expect("not at end");
        let python = self.language == Language::Python;

        if c.is_whitespace() {
            self.eat_while(char::is_whitespace);
            return TokenKind::Space;
        }
        if python && c == '#' {
            self.line_comment();
            return TokenKind::Comment;
        }
        if !python && self.rest().starts_with("//") {
            self.line_comment();
            return TokenKind::Comment;
        }
        if !python && self.rest().starts_with("/*") {
            self.pos += 2;
            match self.rest().find("*/") {
                Some(end) => self.pos += end + 2,
                None => self.pos = self.src.len(),
            }
            return TokenKind::Comment;
        }
        if let Some(prefix_len) = self.string_prefix() {
            self.pos += prefix_len;
            return self.string_body(prefix_len);
        }
        if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            self.number();
            return TokenKind::Number;
        }
        if is_ident_start(c) {
            self.bump();
            self.eat_while(is_ident_continue);
            return TokenKind::Ident;
        }
        let table = if python { PY_PUNCT } else { C_PUNCT };
        if let Some(p) = table.iter().find(|p| self.rest().starts_with(**p)) {
            self.pos += p.len();
        } else {
            self.bump();
        }
        TokenKind::Punct
    }

    fn line_comment(&mut self) {
        match self.rest().find('\n') {
            Some(end) => self.pos += end,
            None => self.pos = self.src.len(),
        }
    }

    /// Length of a string-literal prefix (possibly 0) when a literal starts here.
    fn string_prefix(&self) -> Option<usize> {
        let rest = self.rest();
        let prefix_len = rest
            .char_indices()
            .find(|&(_, ch)| !ch.is_ascii_alphanumeric() && ch != '_')
            .map_or(rest.len(), |(i, _)| i);
        let quote = rest[prefix_len..].chars().next()?;
        if quote != '"' && quote != '\'' {
            return None;
        }
        let prefix = &rest[..prefix_len];
        let ok = match self.language {
            Language::Python => {
                let p = prefix.to_ascii_lowercase();
                matches!(p.as_str(), "" | "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf")
            }
            _ => matches!(prefix, "" | "L" | "u" | "U" | "u8" | "R" | "LR" | "uR" | "UR" | "u8R"),
        };
        ok.then_some(prefix_len)
    }

    fn string_body(&mut self, prefix_len: usize) -> TokenKind {
        let python = self.language == Language::Python;
        let prefix = &self.src[self.pos - prefix_len..self.pos];
        let quote = self.bump().expect("quote");

        if python {
            let raw = prefix.to_ascii_lowercase().contains('r');
            let triple: String = std::iter::repeat_n(quote, 3).collect();
            if self.rest().starts_with(&triple[1..]) {
                self.pos += 2;
                self.scan_until(&triple, raw, true);
            } else {
                self.scan_until(&quote.to_string(), raw, false);
            }
            return TokenKind::Str;
        }

        if quote == '"' && prefix.ends_with('R') {
            // C++ raw string R"delim( ... )delim"
            if let Some(open) = self.rest().find('(') {
                let delim = &self.rest()[..open];
                let close = format!("){delim}\"");
                self.pos += open + 1;
                match self.rest().find(&close) {
                    Some(end) => self.pos += end + close.len(),
                    None => self.pos = self.src.len(),
                }
                return TokenKind::Str;
            }
        }
        self.scan_until(&quote.to_string(), false, false);
        if quote == '\'' {
            TokenKind::Char
        } else {
            TokenKind::Str
        }
    }

    fn scan_until(&mut self, close: &str, raw: bool, multiline: bool) {
        while let Some(c) = self.peek() {
            if self.rest().starts_with(close) {
                self.pos += close.len();
                return;
            }
            if c == '\n' && !multiline {
                return;
            }
            self.bump();
            if c == '\\' && (!raw || self.peek() == close.chars().next()) {
                self.bump();
            }
        }
    }

    fn number(&mut self) {
        let mut prev = '\0';
        while let Some(c) = self.peek() {
            let exp_sign = (c == '+' || c == '-') && matches!(prev, 'e' | 'E' | 'p' | 'P');
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || exp_sign || (c == '\'' && prev.is_ascii_hexdigit()) {
                prev = c;
                self.bump();
            } else {
                break;
            }
        }
    }
}
