//! Lenient parser for the dictionary literals LLMs reply with.
//!
//! Accepts JSON as well as Python literal syntax: single-quoted strings,
//! `None`/`True`/`False`, bare-word keys and trailing commas.

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Dict(Vec<(String, Value)>),
    List(Vec<Value>),
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
}

impl Value {
    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Dict(entries) => entries.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }
}

/// Parse one literal from the start of `input` (leading whitespace
/// allowed). Returns the value and the number of bytes consumed.
pub fn parse_literal(input: &str) -> Option<(Value, usize)> {
    let mut p = Parser { src: input, pos: 0 };
    let v = p.value(0)?;
    Some((v, p.pos))
}

const MAX_DEPTH: usize = 64;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn value(&mut self, depth: usize) -> Option<Value> {
        if depth > MAX_DEPTH {
            return None;
        }
        self.ws();
        match self.peek()? {
            '{' => self.dict(depth),
            '[' | '(' => self.list(depth),
            '"' | '\'' => self.string().map(Value::Str),
            c if c == '-' || c == '+' || c.is_ascii_digit() => self.number(),
            c if c.is_alphabetic() || c == '_' => {
                let word = self.word();
                match word.as_str() {
                    "None" | "null" => Some(Value::Null),
                    "True" | "true" => Some(Value::Bool(true)),
                    "False" | "false" => Some(Value::Bool(false)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    fn dict(&mut self, depth: usize) -> Option<Value> {
        self.pos += 1;
        let mut entries = Vec::new();
        loop {
            if self.eat('}') {
                return Some(Value::Dict(entries));
            }
            self.ws();
            let key = match self.peek()? {
                '"' | '\'' => self.string()?,
                c if c.is_alphabetic() || c == '_' => self.word(),
                _ => return None,
            };
            if !self.eat(':') {
                return None;
            }
            let v = self.value(depth + 1)?;
            entries.push((key, v));
            if !self.eat(',') {
                return self.eat('}').then_some(Value::Dict(entries));
            }
        }
    }

    fn list(&mut self, depth: usize) -> Option<Value> {
        let close = if self.peek() == Some('[') { ']' } else { ')' };
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if self.eat(close) {
                return Some(Value::List(items));
            }
            items.push(self.value(depth + 1)?);
            if !self.eat(',') {
                return self.eat(close).then_some(Value::List(items));
            }
        }
    }

    fn word(&mut self) -> String {
        let len = self
            .rest()
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || c == '_'))
            .map_or(self.rest().len(), |(i, _)| i);
        let w = self.rest()[..len].to_owned();
        self.pos += len;
        w
    }

    fn number(&mut self) -> Option<Value> {
        let len = self
            .rest()
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || ((c == '-' || c == '+') && i == 0))
            })
            .map_or(self.rest().len(), |(i, _)| i);
        let text = &self.rest()[..len];
        let v = if let Ok(i) = text.parse::<i64>() {
            Value::Int(i)
        } else {
            Value::Float(text.parse::<f64>().ok()?)
        };
        self.pos += len;
        Some(v)
    }

    fn string(&mut self) -> Option<String> {
        let quote = self.peek()?;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                c if c == quote => {
                    self.pos += i + 1;
                    return Some(out);
                }
                '\\' => {
                    let (_, e) = chars.next()?;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        'u' => {
                            let hex: String = (0..4).filter_map(|_| chars.next().map(|(_, h)| h)).collect();
                            let code = u32::from_str_radix(&hex, 16).ok()?;
                            out.push(char::from_u32(code).unwrap_or('\u{FFFD}'));
                        }
                        '\n' => {}
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
        None
    }
}
