//! Prefix (Polish) notation, one tree per line.
//!
//! ```text
//! tree     := expr
//! expr     := "(" PRIMITIVE expr+ ")" | feature | window | number
//! feature  := "x" INDEX                  e.g. x0
//! window   := "v" START ":" LEN          e.g. v0:81
//! number   := any Rust f64 literal       printed as {:.16e}
//! ```
//!
//! A mezzanine primitive takes exactly one `window`; low-level primitives take
//! scalar expressions.

use std::fmt;

use super::{Node, Tree, Window};
use crate::error::{GpError, Result};
use crate::primitives::Primitive;

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(self.nodes(), 0, f).map(|_| ())
    }
}

fn write_node(
    nodes: &[Node],
    index: usize,
    f: &mut fmt::Formatter<'_>,
) -> std::result::Result<usize, fmt::Error> {
    match nodes[index] {
        Node::Constant(c) => write!(f, "{c:.16e}").map(|_| index + 1),
        Node::Feature(i) => write!(f, "x{i}").map(|_| index + 1),
        Node::Vector(w) => write!(f, "v{}:{}", w.start, w.len).map(|_| index + 1),
        Node::Function(p) => {
            write!(f, "({p}")?;
            let mut next = index + 1;
            for _ in 0..p.arity() {
                f.write_str(" ")?;
                next = write_node(nodes, next, f)?;
            }
            f.write_str(")")?;
            Ok(next)
        }
    }
}

impl Tree {
    /// Parses prefix notation. The resulting bound is `max_depth` if given,
    /// otherwise the parsed tree's own depth.
    pub fn parse(text: &str, max_depth: Option<usize>) -> Result<Tree> {
        let mut parser = Parser {
            src: text,
            pos: 0,
            nodes: Vec::new(),
        };
        parser.expr()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("trailing input"));
        }
        let nodes = parser.nodes;
        let bound = match max_depth {
            Some(d) => d,
            None => {
                // depth is only defined once the structure is valid
                Tree::new(nodes.clone(), usize::MAX)?.depth()
            }
        };
        Tree::new(nodes, bound)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> GpError {
        GpError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn atom(&mut self) -> &str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn expr(&mut self) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with('(') {
            self.pos += 1;
            let start = self.pos;
            let id = self.atom();
            let p: Primitive = id.parse().map_err(|_| GpError::Parse {
                pos: start,
                msg: format!("unknown primitive '{id}'"),
            })?;
            self.nodes.push(Node::Function(p));
            for _ in 0..p.arity() {
                self.expr()?;
            }
            self.skip_ws();
            if !self.src[self.pos..].starts_with(')') {
                return Err(self.error(&format!("expected ')' closing {p}")));
            }
            self.pos += 1;
            return Ok(());
        }
        let start = self.pos;
        let atom = self.atom().to_string();
        let node = parse_leaf(&atom).ok_or(GpError::Parse {
            pos: start,
            msg: format!("invalid terminal '{atom}'"),
        })?;
        self.nodes.push(node);
        Ok(())
    }
}

fn parse_leaf(atom: &str) -> Option<Node> {
    if let Some(idx) = atom.strip_prefix('x') {
        return idx.parse().ok().map(Node::Feature);
    }
    if let Some(win) = atom.strip_prefix('v') {
        let (start, len) = win.split_once(':')?;
        return Some(Node::Vector(Window {
            start: start.parse().ok()?,
            len: len.parse().ok()?,
        }));
    }
    atom.parse::<f64>()
        .ok()
        .filter(|c| c.is_finite())
        .map(Node::Constant)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::figure_one;
    use super::super::{InitMethod, TreeConfig};
    use super::*;
    use crate::primitives::PrimitiveSet;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn figure_one_text() {
        let t = figure_one(6);
        assert_eq!(
            t.to_string(),
            "(ADD (SUB (RELU x0) (RELU x1)) -2.0000000000000000e-3)"
        );
        let short = Tree::parse("(ADD (SUB (RELU x0) (RELU x1)) -0.002)", Some(6)).unwrap();
        assert_eq!(short, t);
    }

    #[test]
    fn parse_defaults_bound_to_depth() {
        let t = Tree::parse("(VMAX v2:3)", None).unwrap();
        assert_eq!(t.max_depth(), 1);
        assert_eq!(t.eval_reference(&[0.0, 0.0, 1.0, 4.0, 2.0]), 4.0);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            "(ADD x0)",
            "(ADD x0 x1 x2)",
            "(FOO x0)",
            "(ADD x0 x1",
            "xq",
            "(VMEAN x0)",
            "v1:2",
            "nan",
            "(RELU x0) x1",
        ] {
            assert!(Tree::parse(bad, None).is_err(), "{bad:?} parsed");
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(seed in any::<u64>(), depth in 1usize..=8, mezz in any::<bool>()) {
            let set = if mezz { PrimitiveSet::default() } else { PrimitiveSet::scalar_default() };
            let c = TreeConfig::new(set, 7, depth).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = c.generate(&mut rng, InitMethod::Grow);
            let back = Tree::parse(&t.to_string(), Some(depth)).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
