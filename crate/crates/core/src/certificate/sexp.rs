//! S-expressions and top-level script items, with a printer that inverts
//! the parser on everything the printer produces.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(s: impl Into<String>) -> Sexp {
        Sexp::Atom(s.into())
    }

    pub fn list(items: Vec<Sexp>) -> Sexp {
        Sexp::List(items)
    }

    /// `(head args...)`
    pub fn app(head: &str, args: Vec<Sexp>) -> Sexp {
        let mut v = vec![Sexp::atom(head)];
        v.extend(args);
        Sexp::List(v)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Comment(String),
    Command(Sexp),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub items: Vec<Item>,
}

impl Script {
    pub fn comment(&mut self, text: impl Into<String>) {
        self.items.push(Item::Comment(text.into()));
    }

    pub fn command(&mut self, s: Sexp) {
        self.items.push(Item::Command(s));
    }

    pub fn commands(&self) -> impl Iterator<Item = &Sexp> {
        self.items.iter().filter_map(|i| match i {
            Item::Command(s) => Some(s),
            Item::Comment(_) => None,
        })
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            match item {
                Item::Comment(c) if c.is_empty() => writeln!(f, ";")?,
                Item::Comment(c) => writeln!(f, "; {c}")?,
                Item::Command(s) => writeln!(f, "{s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// Parse a script. Comments between commands are kept; comments inside a
/// command are skipped.
pub fn parse_script(text: &str) -> Result<Script, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut line = 1;
    let mut script = Script::default();
    let err = |line: usize, msg: &str| ParseError { line, msg: msg.to_string() };
    // Stack of open lists.
    let mut stack: Vec<Vec<Sexp>> = Vec::new();
    while pos < chars.len() {
        let c = chars[pos];
        match c {
            '\n' => {
                line += 1;
                pos += 1;
            }
            c if c.is_whitespace() => pos += 1,
            ';' => {
                let start = pos + 1;
                while pos < chars.len() && chars[pos] != '\n' {
                    pos += 1;
                }
                if stack.is_empty() {
                    let body: String = chars[start..pos].iter().collect();
                    script.comment(body.strip_prefix(' ').unwrap_or(&body).to_string());
                }
            }
            '(' => {
                stack.push(Vec::new());
                pos += 1;
            }
            ')' => {
                let done = stack.pop().ok_or_else(|| err(line, "unbalanced `)`"))?;
                let s = Sexp::List(done);
                match stack.last_mut() {
                    Some(parent) => parent.push(s),
                    None => script.command(s),
                }
                pos += 1;
            }
            '|' => {
                let start = pos;
                pos += 1;
                while pos < chars.len() && chars[pos] != '|' {
                    if chars[pos] == '\n' {
                        line += 1;
                    }
                    pos += 1;
                }
                if pos == chars.len() {
                    return Err(err(line, "unterminated quoted symbol"));
                }
                pos += 1;
                let a: String = chars[start..pos].iter().collect();
                stack.last_mut().ok_or_else(|| err(line, "atom outside a command"))?.push(Sexp::Atom(a));
            }
            '"' => {
                let start = pos;
                pos += 1;
                while pos < chars.len() && chars[pos] != '"' {
                    pos += 1;
                }
                if pos == chars.len() {
                    return Err(err(line, "unterminated string"));
                }
                pos += 1;
                let a: String = chars[start..pos].iter().collect();
                stack.last_mut().ok_or_else(|| err(line, "atom outside a command"))?.push(Sexp::Atom(a));
            }
            _ => {
                let start = pos;
                while pos < chars.len() && !chars[pos].is_whitespace() && !matches!(chars[pos], '(' | ')' | ';') {
                    pos += 1;
                }
                let a: String = chars[start..pos].iter().collect();
                stack.last_mut().ok_or_else(|| err(line, "atom outside a command"))?.push(Sexp::Atom(a));
            }
        }
    }
    if !stack.is_empty() {
        return Err(err(line, "unexpected end of input"));
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "; header\n;\n(set-logic QF_BV)\n(define-fun g () Bool (and a (not b)))\n(check-sat)\n";
        let s = parse_script(text).unwrap();
        assert_eq!(s.to_string(), text);
        assert_eq!(s.commands().count(), 3);
    }

    #[test]
    fn errors() {
        assert!(parse_script("(a (b)").is_err());
        assert!(parse_script("a)").is_err());
        assert!(parse_script("x").is_err());
    }

    #[test]
    fn inner_comments_skipped() {
        let s = parse_script("(and ; note\n a b)\n").unwrap();
        assert_eq!(s.to_string(), "(and a b)\n");
    }
}
