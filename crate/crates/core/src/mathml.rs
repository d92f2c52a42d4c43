//! Presentation-MathML input and content-MathML serialization for the
//! subset of MathML this engine understands.
//!
//! Presentation layout elements become sub-expression atoms; the tokens of
//! each `mrow` are re-parsed with the text grammar's precedence table.
//! Content MathML is written operator-element first, then operands left to
//! right, with no namespace declarations.

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::expr::{self, BinOp, Expr, Func, SyntaxError, Token};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathmlError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("unsupported element <{0}>")]
    UnsupportedElement(String),
    #[error("malformed layout: {0}")]
    MalformedLayout(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("<{op}> expects {expected} operand(s), found {found}")]
    Arity {
        op: String,
        expected: String,
        found: usize,
    },
    #[error("invalid <{element}> content `{text}`")]
    InvalidLeaf { element: String, text: String },
}

/// Property values attached to annotated content-MathML nodes.
pub const PROP_BINARY_OPERATOR: &str = "m:binary-operator";
pub const PROP_UNARY_OPERATOR: &str = "m:unary-operator";
pub const PROP_IDENTIFIER: &str = "m:identifier";
pub const PROP_NUMBER: &str = "m:number";

fn element_children<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

fn check_no_stray_text(node: Node<'_, '_>) -> Result<(), MathmlError> {
    for child in node.children().filter(Node::is_text) {
        let text = child.text().unwrap_or("").trim();
        if !text.is_empty() {
            return Err(MathmlError::MalformedLayout(format!(
                "unexpected text `{text}` inside <{}>",
                node.tag_name().name()
            )));
        }
    }
    Ok(())
}

fn parse_root(xml: &str) -> Result<Document<'_>, MathmlError> {
    let doc = Document::parse(xml).map_err(|e| MathmlError::Xml(e.to_string()))?;
    let name = doc.root_element().tag_name().name();
    if name != "math" {
        return Err(MathmlError::UnsupportedElement(name.to_string()));
    }
    Ok(doc)
}

// ---------------------------------------------------------------------------
// Presentation MathML

pub fn parse_presentation(xml: &str) -> Result<Expr, MathmlError> {
    let doc = parse_root(xml)?;
    presentation_node(doc.root_element())
}

/// Converts a presentation `math` element that lives inside a larger document.
pub fn presentation_from_node(math: Node<'_, '_>) -> Result<Expr, MathmlError> {
    presentation_node(math)
}

fn leaf_text(node: Node<'_, '_>) -> String {
    node.descendants()
        .filter(Node::is_text)
        .filter_map(|t| t.text())
        .collect::<String>()
        .trim()
        .to_string()
}

fn mo_token(text: &str) -> Option<Token> {
    Some(match text {
        "(" => Token::LParen,
        ")" => Token::RParen,
        "," => Token::Comma,
        "\u{2212}" => Token::Op(BinOp::Sub),
        "\u{00d7}" | "\u{22c5}" | "\u{00b7}" => Token::Op(BinOp::Mul),
        "\u{00f7}" => Token::Op(BinOp::Div),
        other => Token::Op(BinOp::from_symbol(other)?),
    })
}

/// A node whose children form an inferred mrow (`math`, `mrow`, `msqrt`).
fn presentation_row(node: Node<'_, '_>) -> Result<Expr, MathmlError> {
    check_no_stray_text(node)?;
    let tokens = row_tokens(node)?;
    let end = tokens.len();
    Ok(expr::parse_tokens(tokens, end)?)
}

fn presentation_node(node: Node<'_, '_>) -> Result<Expr, MathmlError> {
    match node.tag_name().name() {
        "math" | "mrow" => presentation_row(node),
        _ => {
            let tokens = node_tokens(node)?;
            Ok(expr::parse_tokens(
                tokens.into_iter().map(|t| (t, 0)).collect(),
                1,
            )?)
        }
    }
}

/// The row opens with `(` whose matching `)` is its last child.
fn is_fenced(children: &[Node<'_, '_>]) -> bool {
    let mut depth = 0usize;
    for (i, child) in children.iter().enumerate() {
        if child.tag_name().name() != "mo" {
            if i == 0 {
                return false;
            }
            continue;
        }
        match leaf_text(*child).as_str() {
            "(" => depth += 1,
            ")" => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return i == children.len() - 1;
                }
            }
            _ if i == 0 => return false,
            _ => {}
        }
    }
    false
}

fn row_tokens(node: Node<'_, '_>) -> Result<Vec<expr::Spanned>, MathmlError> {
    let mut tokens: Vec<Token> = Vec::new();
    for child in element_children(node) {
        tokens.extend(node_tokens(child)?);
    }
    // adjacent operands without an <mo> between them are not inferred as products
    for pair in tokens.windows(2) {
        let ends_operand = matches!(
            pair[0],
            Token::Number(_) | Token::Identifier(_) | Token::Atom(_) | Token::RParen
        );
        let starts_operand = matches!(
            pair[1],
            Token::Number(_)
                | Token::Identifier(_)
                | Token::Atom(_)
                | Token::Func(_)
                | Token::LParen
        );
        if ends_operand && starts_operand {
            return Err(MathmlError::MalformedLayout(format!(
                "adjacent operands without an operator inside <{}>",
                node.tag_name().name()
            )));
        }
    }
    Ok(tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect())
}

/// Tokens contributed by one presentation element to its enclosing row.
fn node_tokens(node: Node<'_, '_>) -> Result<Vec<Token>, MathmlError> {
    let name = node.tag_name().name();
    match name {
        "mi" => {
            let text = leaf_text(node);
            if let Some(f) = Func::from_name(&text) {
                Ok(vec![Token::Func(f)])
            } else if expr::is_identifier(&text) {
                Ok(vec![Token::Identifier(text)])
            } else {
                Err(MathmlError::InvalidLeaf {
                    element: name.to_string(),
                    text,
                })
            }
        }
        "mn" => {
            let text = leaf_text(node);
            if expr::is_number_literal(&text) {
                Ok(vec![Token::Number(text)])
            } else {
                Err(MathmlError::InvalidLeaf {
                    element: name.to_string(),
                    text,
                })
            }
        }
        "mo" => {
            let text = leaf_text(node);
            match mo_token(&text) {
                Some(tok) => Ok(vec![tok]),
                None => Err(MathmlError::InvalidLeaf {
                    element: name.to_string(),
                    text,
                }),
            }
        }
        "mrow" => {
            check_no_stray_text(node)?;
            let children: Vec<_> = element_children(node).collect();
            let inner = row_tokens(node)?;
            if inner.is_empty() {
                return Err(MathmlError::MalformedLayout("empty <mrow>".into()));
            }
            let mut tokens: Vec<Token> = inner.into_iter().map(|(t, _)| t).collect();
            // a fenced row keeps its own parentheses so `sin<mrow>(x)</mrow>` and
            // `int<mrow>(a, b)</mrow>` still read as call arguments
            if !is_fenced(&children) {
                tokens.insert(0, Token::LParen);
                tokens.push(Token::RParen);
            }
            Ok(tokens)
        }
        "msup" | "mfrac" => {
            check_no_stray_text(node)?;
            let children: Vec<_> = element_children(node).collect();
            if children.len() != 2 {
                return Err(MathmlError::MalformedLayout(format!(
                    "<{name}> needs exactly 2 children, found {}",
                    children.len()
                )));
            }
            let lhs = presentation_node(children[0])?;
            let rhs = presentation_node(children[1])?;
            let op = if name == "msup" {
                BinOp::Pow
            } else {
                BinOp::Div
            };
            Ok(vec![Token::Atom(Expr::binary(op, lhs, rhs))])
        }
        "msqrt" => {
            if element_children(node).next().is_none() {
                return Err(MathmlError::MalformedLayout("empty <msqrt>".into()));
            }
            let inner = presentation_row(node)?;
            Ok(vec![Token::Atom(Expr::call(Func::Sqrt, vec![inner]))])
        }
        other => Err(MathmlError::UnsupportedElement(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Content MathML

fn content_operator(e: &Expr) -> Option<&'static str> {
    Some(match e {
        Expr::Number(_) | Expr::Identifier(_) => return None,
        Expr::Neg(_) => "minus",
        Expr::Binary { op, .. } => match op {
            BinOp::Add => "plus",
            BinOp::Sub => "minus",
            BinOp::Mul => "times",
            BinOp::Div => "divide",
            BinOp::Pow => "power",
            BinOp::Eq => "eq",
        },
        Expr::Call { func, .. } => match func {
            Func::Sqrt => "root",
            other => other.name(),
        },
    })
}

fn write_content(e: &Expr, annotated: bool, out: &mut String) {
    let prop = |value: &str| {
        if annotated {
            format!(" property=\"{value}\"")
        } else {
            String::new()
        }
    };
    match e {
        Expr::Number(n) => {
            out.push_str(&format!("<cn{}>{n}</cn>", prop(PROP_NUMBER)));
        }
        Expr::Identifier(n) => {
            out.push_str(&format!("<ci{}>{n}</ci>", prop(PROP_IDENTIFIER)));
        }
        _ => {
            let children = e.children();
            let kind = if children.len() == 1 {
                PROP_UNARY_OPERATOR
            } else {
                PROP_BINARY_OPERATOR
            };
            let name = content_operator(e).expect("operator node");
            out.push_str(&format!("<apply><{name}{}/>", prop(kind)));
            for child in children {
                write_content(child, annotated, out);
            }
            out.push_str("</apply>");
        }
    }
}

pub fn to_content(e: &Expr) -> String {
    let mut out = String::from("<math>");
    write_content(e, false, &mut out);
    out.push_str("</math>");
    out
}

/// Content MathML with `m:` vocabulary `property` attributes on every node.
pub fn to_annotated_content(e: &Expr) -> String {
    let mut out = String::from("<math>");
    write_content(e, true, &mut out);
    out.push_str("</math>");
    out
}

pub fn parse_content(xml: &str) -> Result<Expr, MathmlError> {
    let doc = parse_root(xml)?;
    content_from_node(doc.root_element())
}

/// Reads a content `math` element; attributes (including RDFa `property`) are ignored.
pub fn content_from_node(math: Node<'_, '_>) -> Result<Expr, MathmlError> {
    check_no_stray_text(math)?;
    let children: Vec<_> = element_children(math).collect();
    match children.as_slice() {
        [only] => content_node(*only),
        _ => Err(MathmlError::Arity {
            op: "math".into(),
            expected: "1".into(),
            found: children.len(),
        }),
    }
}

fn content_node(node: Node<'_, '_>) -> Result<Expr, MathmlError> {
    let name = node.tag_name().name();
    match name {
        "ci" => {
            let text = leaf_text(node);
            if expr::is_identifier(&text) {
                Ok(Expr::Identifier(text))
            } else {
                Err(MathmlError::InvalidLeaf {
                    element: name.into(),
                    text,
                })
            }
        }
        "cn" => {
            let text = leaf_text(node);
            if expr::is_number_literal(&text) {
                Ok(Expr::Number(text))
            } else {
                Err(MathmlError::InvalidLeaf {
                    element: name.into(),
                    text,
                })
            }
        }
        "apply" => content_apply(node),
        other => Err(MathmlError::UnsupportedElement(other.into())),
    }
}

fn content_apply(node: Node<'_, '_>) -> Result<Expr, MathmlError> {
    check_no_stray_text(node)?;
    let mut children = element_children(node);
    let Some(head) = children.next() else {
        return Err(MathmlError::MalformedLayout("empty <apply>".into()));
    };
    let op = head.tag_name().name();
    let operands = children.map(content_node).collect::<Result<Vec<_>, _>>()?;
    let found = operands.len();
    let arity_error = |expected: &str| MathmlError::Arity {
        op: op.to_string(),
        expected: expected.to_string(),
        found,
    };

    let binary = match op {
        "plus" => Some(BinOp::Add),
        "times" => Some(BinOp::Mul),
        "divide" => Some(BinOp::Div),
        "power" => Some(BinOp::Pow),
        "eq" => Some(BinOp::Eq),
        _ => None,
    };
    if let Some(bin) = binary {
        let [lhs, rhs]: [Expr; 2] = operands.try_into().map_err(|_| arity_error("2"))?;
        return Ok(Expr::binary(bin, lhs, rhs));
    }
    if op == "minus" {
        let count = operands.len();
        let mut it = operands.into_iter();
        return match (it.next(), it.next(), count) {
            (Some(x), None, 1) => Ok(Expr::negate(x)),
            (Some(l), Some(r), 2) => Ok(Expr::binary(BinOp::Sub, l, r)),
            _ => Err(MathmlError::Arity {
                op: op.into(),
                expected: "1 or 2".into(),
                found: count,
            }),
        };
    }
    let func = match op {
        "root" => Func::Sqrt,
        other => Func::from_name(other)
            .filter(|f| *f != Func::Sqrt)
            .ok_or_else(|| MathmlError::UnsupportedElement(other.into()))?,
    };
    if operands.len() != func.arity() {
        return Err(arity_error(&func.arity().to_string()));
    }
    Ok(Expr::call(func, operands))
}

/// True when any element below `math` belongs to the content vocabulary.
pub fn looks_like_content(math: Node<'_, '_>) -> bool {
    math.descendants()
        .any(|n| matches!(n.tag_name().name(), "apply" | "ci" | "cn"))
}
