//! Line-oriented model format parser with 1-based line/column diagnostics.
//!
//! Directives:
//!   node <id> dim=<n>
//!   edge <a> -> <b>          directed
//!   edge <a> -- <b>          undirected
//!   root {<ids>} component [w=<f>] matrix=[r1c1,...;r2c1,...]
//!   channel {<ids>} from {<ids>} component kraus=[...],[...]
//!   projset <name> on <id> proj=[...] proj=[...]
//!   state <name> on <id> matrix=[...]
//! `#` begins a comment; complex literals are `a`, `bi`, `a+bi`, `a-bi`.

use crate::linalg::{ComplexMatrix, C64};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct NodeDecl {
    pub id: String,
    pub dim: usize,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Directed,
    Undirected,
}

#[derive(Debug, Clone)]
pub struct EdgeDecl {
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct RootComponentDecl {
    pub members: Vec<String>,
    pub weight: f64,
    pub matrix: ComplexMatrix,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct ChannelComponentDecl {
    pub members: Vec<String>,
    pub parents: Vec<String>,
    pub kraus: Vec<ComplexMatrix>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct ProjsetDecl {
    pub name: String,
    pub node: String,
    pub projectors: Vec<ComplexMatrix>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct StateDecl {
    pub name: String,
    pub node: String,
    pub matrix: ComplexMatrix,
    pub pos: Pos,
}

/// Parse-level model structure; reference resolution and semantic checks
/// happen at load time.
#[derive(Debug, Clone, Default)]
pub struct ModelDocument {
    pub nodes: Vec<NodeDecl>,
    pub edges: Vec<EdgeDecl>,
    pub roots: Vec<RootComponentDecl>,
    pub channels: Vec<ChannelComponentDecl>,
    pub projsets: Vec<ProjsetDecl>,
    pub states: Vec<StateDecl>,
}

struct Cursor<'a> {
    line: usize,
    text: &'a [u8],
    idx: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Self { line, text: text.as_bytes(), idx: 0 }
    }

    fn col(&self) -> usize {
        self.idx + 1
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col(), message: message.into() }
    }

    fn err_at(&self, col: usize, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.idx < self.text.len() && self.text[self.idx].is_ascii_whitespace() {
            self.idx += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.idx >= self.text.len()
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.idx).copied()
    }

    /// A bare word: letters, digits, `_`, `-`, `.`, `>`.
    fn word(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.idx;
        while self.idx < self.text.len() {
            let c = self.text[self.idx];
            if c.is_ascii_whitespace() || c == b'{' || c == b'}' || c == b'=' || c == b',' {
                break;
            }
            self.idx += 1;
        }
        if self.idx == start {
            return Err(self.err("expected a word"));
        }
        Ok(String::from_utf8_lossy(&self.text[start..self.idx]).into_owned())
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.text[self.idx..].starts_with(lit.as_bytes()) {
            self.idx += lit.len();
            Ok(())
        } else {
            Err(self.err(format!("expected `{lit}`")))
        }
    }

    /// `{A, B}` or `{A B}` — a braced id list.
    fn id_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect("{")?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'}') => {
                    self.idx += 1;
                    break;
                }
                Some(b',') => {
                    self.idx += 1;
                }
                Some(_) => out.push(self.word()?),
                None => return Err(self.err("unterminated `{` list")),
            }
        }
        if out.is_empty() {
            return Err(self.err("empty id list"));
        }
        Ok(out)
    }

    /// `key=` for a known key (already peeked by caller).
    fn key(&mut self, name: &str) -> Result<(), ParseError> {
        self.expect(name)?;
        self.expect("=")?;
        Ok(())
    }

    /// `[a,b;c,d]` — one bracketed matrix.
    fn matrix(&mut self) -> Result<ComplexMatrix, ParseError> {
        self.skip_ws();
        let open = self.col();
        self.expect("[")?;
        let start = self.idx;
        while self.idx < self.text.len() && self.text[self.idx] != b']' {
            self.idx += 1;
        }
        if self.idx >= self.text.len() {
            return Err(self.err_at(open, "unterminated `[` matrix"));
        }
        let body = String::from_utf8_lossy(&self.text[start..self.idx]).into_owned();
        let body_col = start + 1;
        self.idx += 1;
        let mut rows: Vec<Vec<C64>> = Vec::new();
        let mut offset = 0usize;
        for row in body.split(';') {
            let mut entries = Vec::new();
            let mut entry_off = 0usize;
            for entry in row.split(',') {
                let z = parse_complex(entry).ok_or_else(|| {
                    self.err_at(
                        body_col + offset + entry_off,
                        format!("invalid complex literal `{}`", entry.trim()),
                    )
                })?;
                entries.push(z);
                entry_off += entry.len() + 1;
            }
            if let Some(first) = rows.first() {
                if entries.len() != first.len() {
                    return Err(self.err_at(body_col + offset, "ragged matrix rows"));
                }
            }
            offset += row.len() + 1;
            rows.push(entries);
        }
        let r = rows.len();
        let c = rows[0].len();
        let flat: Vec<C64> = rows.into_iter().flatten().collect();
        ComplexMatrix::from_rows(r, c, &flat)
            .map_err(|e| self.err_at(open, format!("bad matrix: {e}")))
    }

    fn integer(&mut self) -> Result<usize, ParseError> {
        self.skip_ws();
        let col = self.col();
        let w = self.word()?;
        w.parse().map_err(|_| self.err_at(col, format!("invalid integer `{w}`")))
    }

    fn float(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let col = self.col();
        let w = self.word()?;
        w.parse().map_err(|_| self.err_at(col, format!("invalid number `{w}`")))
    }

    fn peek_word(&mut self) -> Option<String> {
        self.skip_ws();
        let save = self.idx;
        let w = self.word().ok();
        self.idx = save;
        w
    }
}

/// Parse one complex literal: `a`, `bi`, `a+bi`, `a-bi` (scientific notation
/// allowed in each part).
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some(body) = s.strip_suffix(['i', 'I']) {
        if let Some(p) = imaginary_split(body) {
            let re: f64 = body[..p].parse().ok()?;
            let rest = &body[p..];
            let im: f64 = match rest {
                "+" => 1.0,
                "-" => -1.0,
                _ => rest.parse().ok()?,
            };
            Some(C64::new(re, im))
        } else {
            let im: f64 = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse().ok()?,
            };
            Some(C64::new(0.0, im))
        }
    } else {
        s.parse::<f64>().ok().map(|x| C64::new(x, 0.0))
    }
}

/// Index of the sign separating real and imaginary parts, skipping a leading
/// sign and exponent signs.
fn imaginary_split(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    (1..b.len())
        .rev()
        .find(|&i| (b[i] == b'+' || b[i] == b'-') && b[i - 1] != b'e' && b[i - 1] != b'E')
}

/// Parse the model text into a document, or the first error with its 1-based
/// line and column.
pub fn parse_model(text: &str) -> Result<ModelDocument, ParseError> {
    let mut doc = ModelDocument::default();
    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let mut c = Cursor::new(line_no, content);
        let col0 = {
            c.skip_ws();
            c.col()
        };
        let head = c.word()?;
        let pos = Pos { line: line_no, col: col0 };
        match head.as_str() {
            "node" => {
                let id = c.word()?;
                c.key("dim")?;
                let dim = c.integer()?;
                doc.nodes.push(NodeDecl { id, dim, pos });
            }
            "edge" => {
                let a = c.word()?;
                c.skip_ws();
                let kind = if c.text[c.idx..].starts_with(b"->") {
                    c.idx += 2;
                    EdgeKind::Directed
                } else if c.text[c.idx..].starts_with(b"--") {
                    c.idx += 2;
                    EdgeKind::Undirected
                } else {
                    return Err(c.err("expected `->` or `--`"));
                };
                let b = c.word()?;
                doc.edges.push(EdgeDecl { a, b, kind, pos });
            }
            "root" => {
                let members = c.id_list()?;
                c.expect("component")?;
                let mut weight = 1.0;
                if c.peek_word().as_deref() == Some("w") {
                    c.key("w")?;
                    weight = c.float()?;
                }
                c.key("matrix")?;
                let matrix = c.matrix()?;
                doc.roots.push(RootComponentDecl { members, weight, matrix, pos });
            }
            "channel" => {
                let members = c.id_list()?;
                c.expect("from")?;
                let parents = c.id_list()?;
                c.expect("component")?;
                c.key("kraus")?;
                let mut kraus = vec![c.matrix()?];
                loop {
                    c.skip_ws();
                    if c.peek() == Some(b',') {
                        c.idx += 1;
                        kraus.push(c.matrix()?);
                    } else {
                        break;
                    }
                }
                doc.channels.push(ChannelComponentDecl { members, parents, kraus, pos });
            }
            "projset" => {
                let name = c.word()?;
                c.expect("on")?;
                let node = c.word()?;
                let mut projectors = Vec::new();
                while c.peek_word().as_deref() == Some("proj") {
                    c.key("proj")?;
                    projectors.push(c.matrix()?);
                }
                if projectors.is_empty() {
                    return Err(c.err("projset needs at least one proj=[...]"));
                }
                doc.projsets.push(ProjsetDecl { name, node, projectors, pos });
            }
            "state" => {
                let name = c.word()?;
                c.expect("on")?;
                let node = c.word()?;
                c.key("matrix")?;
                let matrix = c.matrix()?;
                doc.states.push(StateDecl { name, node, matrix, pos });
            }
            other => {
                return Err(c.err_at(col0, format!("unknown directive `{other}`")));
            }
        }
        if !c.at_end() {
            return Err(c.err("trailing input"));
        }
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let cases = [
            ("1", C64::new(1.0, 0.0)),
            ("-2.5", C64::new(-2.5, 0.0)),
            ("3i", C64::new(0.0, 3.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("i", C64::new(0.0, 1.0)),
            ("1+2i", C64::new(1.0, 2.0)),
            ("1-2i", C64::new(1.0, -2.0)),
            ("2e-3+1e2i", C64::new(0.002, 100.0)),
            ("-0.5-0.5i", C64::new(-0.5, -0.5)),
            ("0.5+0i", C64::new(0.5, 0.0)),
        ];
        for (s, want) in cases {
            let got = parse_complex(s).unwrap_or_else(|| panic!("failed on `{s}`"));
            assert_eq!(got, want, "{s}");
        }
        for bad in ["", "1+", "i2", "1 2", "+-3i", "2ii"] {
            assert!(parse_complex(bad).is_none(), "accepted `{bad}`");
        }
    }

    #[test]
    fn minimal_model_parses() {
        let doc = parse_model(
            "# comment\nnode X dim=2\nroot {X} component matrix=[1,0;0,0]\n",
        )
        .unwrap();
        assert_eq!(doc.nodes.len(), 1);
        assert_eq!(doc.nodes[0].dim, 2);
        assert_eq!(doc.roots.len(), 1);
        assert_eq!(doc.roots[0].matrix.get(0, 0), C64::new(1.0, 0.0));
    }

    #[test]
    fn edges_and_channels() {
        let doc = parse_model(
            "node X dim=2\nnode Y dim=2\nedge X -> Y\nedge X -- Y\n\
             channel {Y} from {X} component kraus=[1,0;0,1]\n",
        )
        .unwrap();
        assert_eq!(doc.edges[0].kind, EdgeKind::Directed);
        assert_eq!(doc.edges[1].kind, EdgeKind::Undirected);
        assert_eq!(doc.channels[0].kraus.len(), 1);
    }

    #[test]
    fn multi_kraus_and_weight() {
        let doc = parse_model(
            "root {X} component w=0.5 matrix=[1]\n\
             channel {Y} from {X} component kraus=[1,0;0,0],[0,0;0,1]\n",
        )
        .unwrap();
        assert_eq!(doc.roots[0].weight, 0.5);
        assert_eq!(doc.channels[0].kraus.len(), 2);
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_model("node X dim=2\nbogus Y\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.col, 1);
        let e = parse_model("node X dim=two\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("invalid integer"));
        let e = parse_model("root {X} component matrix=[1,zz;0,0]\n").unwrap_err();
        assert!(e.message.contains("invalid complex literal"));
        assert!(e.col > 20, "column {} should point into the matrix", e.col);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let e = parse_model("root {X} component matrix=[1,0;0]\n").unwrap_err();
        assert!(e.message.contains("ragged"));
    }

    #[test]
    fn fuzz_never_panics() {
        use proptest::prelude::*;
        proptest!(ProptestConfig::with_cases(256), |(s in "[ -~\n]{0,200}")| {
            let _ = parse_model(&s);
        });
    }
}
