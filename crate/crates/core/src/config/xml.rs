//! Minimal XML reader/writer for the network description dialect.
//!
//! Supported: elements, single- or double-quoted attributes, text content,
//! self-closing tags, comments, `<?...?>` declarations, and the five
//! predefined entities. Not supported: namespaces, CDATA, DTDs, mixed content.

use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// Trimmed text content. Elements with children carry no text.
    pub text: String,
    /// 1-based source line of the start tag, 0 for generated elements.
    pub line: usize,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), attrs: Vec::new(), children: Vec::new(), text: String::new(), line: 0 }
    }

    pub fn with_text(name: impl Into<String>, text: impl ToString) -> Self {
        Self { text: text.to_string(), ..Self::new(name) }
    }

    pub fn attr(mut self, key: &str, value: impl ToString) -> Self {
        self.attrs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn get_attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn find(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn find_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Structural equality ignoring source line numbers.
    pub fn same_shape(&self, other: &Element) -> bool {
        self.name == other.name
            && self.attrs == other.attrs
            && self.text == other.text
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|(a, b)| a.same_shape(b))
    }
}

/// Equality is structural; source lines are ignored.
impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other)
    }
}

impl Eq for Element {}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct XmlError {
    pub line: usize,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, XmlError> {
        Err(XmlError { line: self.line, message: message.into() })
    }

    fn advance(&mut self, n: usize) {
        self.line += self.src[self.pos..self.pos + n].matches('\n').count();
        self.pos += n;
    }

    fn skip_ws(&mut self) {
        let n = self.rest().len() - self.rest().trim_start().len();
        self.advance(n);
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.advance(token.len());
            true
        } else {
            false
        }
    }

    fn skip_until(&mut self, token: &str, what: &str) -> Result<(), XmlError> {
        match self.rest().find(token) {
            Some(i) => {
                self.advance(i + token.len());
                Ok(())
            }
            None => self.err(format!("unterminated {what}")),
        }
    }

    /// Skips whitespace, comments and declarations.
    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.eat("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.eat("<?") {
                self.skip_until("?>", "declaration")?;
            } else if self.rest().starts_with("<!") {
                return self.err("DTD and CDATA sections are not supported");
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return self.err("expected a name");
        }
        let name = self.rest()[..len].to_string();
        if name.contains(':') {
            return self.err(format!("namespaced name {name:?} is not supported"));
        }
        self.advance(len);
        Ok(name)
    }

    fn element(&mut self) -> Result<Element, XmlError> {
        let line = self.line;
        if !self.eat("<") {
            return self.err("expected '<'");
        }
        let name = self.name()?;
        let mut el = Element { line, ..Element::new(name) };
        loop {
            self.skip_ws();
            if self.eat("/>") {
                return Ok(el);
            }
            if self.eat(">") {
                break;
            }
            let key = self.name()?;
            self.skip_ws();
            if !self.eat("=") {
                return self.err(format!("attribute {key:?} has no value"));
            }
            self.skip_ws();
            let quote = match self.rest().chars().next() {
                Some(q @ ('"' | '\'')) => q,
                _ => return self.err(format!("attribute {key:?} value must be quoted")),
            };
            self.advance(1);
            let Some(end) = self.rest().find(quote) else {
                return self.err("unterminated attribute value");
            };
            let raw = &self.rest()[..end];
            let value = unescape(raw).or_else(|m| self.err(m))?;
            self.advance(end + 1);
            if el.get_attr(&key).is_some() {
                return self.err(format!("duplicate attribute {key:?}"));
            }
            el.attrs.push((key, value));
        }

        let mut text = String::new();
        loop {
            let upto = self.rest().find('<').unwrap_or(self.rest().len());
            text.push_str(&self.rest()[..upto]);
            self.advance(upto);
            if self.rest().is_empty() {
                return Err(XmlError { line, message: format!("element <{}> is never closed", el.name) });
            }
            if self.eat("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.eat("</") {
                let close = self.name()?;
                self.skip_ws();
                if !self.eat(">") {
                    return self.err("expected '>'");
                }
                if close != el.name {
                    return self.err(format!("</{close}> does not match <{}> opened on line {line}", el.name));
                }
                break;
            } else if self.rest().starts_with("<!") || self.rest().starts_with("<?") {
                return self.err("unsupported markup inside element");
            } else {
                el.children.push(self.element()?);
            }
        }
        let text = text.trim();
        if !text.is_empty() {
            if !el.children.is_empty() {
                return self.err(format!("mixed content in <{}> is not supported", el.name));
            }
            el.text = unescape(text).or_else(|m| self.err(m))?;
        }
        Ok(el)
    }
}

fn unescape(raw: &str) -> Result<String, String> {
    if !raw.contains('&') {
        return Ok(raw.to_string());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let Some(end) = rest[i..].find(';') else {
            return Err("unterminated entity".into());
        };
        let entity = &rest[i + 1..i + end];
        out.push(match entity {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            other => return Err(format!("unknown entity &{other};")),
        });
        rest = &rest[i + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

/// Parses a document with exactly one root element.
pub fn parse(src: &str) -> Result<Element, XmlError> {
    let mut cur = Cursor { src: src.strip_prefix('\u{feff}').unwrap_or(src), pos: 0, line: 1 };
    cur.skip_misc()?;
    if cur.rest().is_empty() {
        return cur.err("document has no root element");
    }
    let root = cur.element()?;
    cur.skip_misc()?;
    if !cur.rest().is_empty() {
        return cur.err("content after the root element");
    }
    Ok(root)
}

/// Pretty-prints with two-space indentation and an XML declaration.
pub fn write(root: &Element) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    write_element(root, 0, &mut out);
    out
}

fn write_element(el: &Element, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = write!(out, "{pad}<{}", el.name);
    for (k, v) in &el.attrs {
        let _ = write!(out, " {k}=\"");
        escape(v, out);
        out.push('"');
    }
    out.push('>');
    if el.children.is_empty() {
        escape(&el.text, out);
    } else {
        out.push('\n');
        for c in &el.children {
            write_element(c, depth + 1, out);
        }
        out.push_str(&pad);
    }
    let _ = writeln!(out, "</{}>", el.name);
}
