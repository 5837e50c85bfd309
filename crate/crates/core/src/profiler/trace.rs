//! Parsing execution-trace logs into invocation trees.
//!
//! One event per line: `ENTER <method>`, `EXIT`, or `BC <name> [k=v ...]`.
//! Blank lines and lines starting with `#` are skipped. Enter/exit pairs
//! must balance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::profiler::ProfilerError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Enter { name: String },
    Exit,
    Bytecode { name: String, attributes: Vec<(String, String)> },
}

/// One node of the invocation tree: a method call with everything that ran
/// inside it, or a bytecode leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceNode {
    Method { name: String, children: Vec<TraceNode> },
    Bytecode { name: String, attributes: Vec<(String, String)> },
}

impl TraceNode {
    /// Feature occurrences within this node's trace segment, the node
    /// itself included for methods.
    pub fn counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        self.accumulate(&mut counts);
        counts
    }

    fn accumulate(&self, counts: &mut BTreeMap<String, u64>) {
        match self {
            TraceNode::Method { name, children } => {
                *counts.entry(name.clone()).or_insert(0) += 1;
                for child in children {
                    child.accumulate(counts);
                }
            }
            TraceNode::Bytecode { name, .. } => {
                *counts.entry(name.clone()).or_insert(0) += 1;
            }
        }
    }
}

/// The whole trace as a forest of invocation nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvocationTree {
    roots: Vec<TraceNode>,
}

impl InvocationTree {
    pub fn roots(&self) -> &[TraceNode] {
        &self.roots
    }

    /// Reproduces the event sequence the tree was built from.
    pub fn flatten(&self) -> Vec<TraceEvent> {
        fn walk(node: &TraceNode, out: &mut Vec<TraceEvent>) {
            match node {
                TraceNode::Method { name, children } => {
                    out.push(TraceEvent::Enter { name: name.clone() });
                    for child in children {
                        walk(child, out);
                    }
                    out.push(TraceEvent::Exit);
                }
                TraceNode::Bytecode { name, attributes } => {
                    out.push(TraceEvent::Bytecode {
                        name: name.clone(),
                        attributes: attributes.clone(),
                    });
                }
            }
        }
        let mut out = Vec::new();
        for root in &self.roots {
            walk(root, &mut out);
        }
        out
    }

    /// Indented text form: methods bare, bytecode leaves with a dash.
    pub fn render(&self) -> String {
        fn walk(node: &TraceNode, depth: usize, out: &mut String) {
            let indent = "  ".repeat(depth);
            match node {
                TraceNode::Method { name, children } => {
                    let _ = writeln!(out, "{indent}{name}");
                    for child in children {
                        walk(child, depth + 1, out);
                    }
                }
                TraceNode::Bytecode { name, attributes } => {
                    let _ = write!(out, "{indent}- {name}");
                    for (key, value) in attributes {
                        let _ = write!(out, " {key}={value}");
                    }
                    out.push('\n');
                }
            }
        }
        let mut out = String::new();
        for root in &self.roots {
            walk(root, 0, &mut out);
        }
        out
    }
}

/// A parsed trace with its feature counts: one count per method entry and
/// per bytecode execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTrace {
    pub tree: InvocationTree,
    pub counts: BTreeMap<String, u64>,
}

/// Parses one trace document. Errors carry 1-based line numbers.
pub fn parse_trace(document: &str) -> Result<ParsedTrace, ProfilerError> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut roots: Vec<TraceNode> = Vec::new();
    // Open method calls: (name, line it was entered on, children so far).
    let mut stack: Vec<(String, usize, Vec<TraceNode>)> = Vec::new();

    for (index, raw_line) in document.lines().enumerate() {
        let line = index + 1;
        let text = raw_line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let directive = tokens.next().expect("non-empty line has a first token");
        match directive {
            "ENTER" => {
                let name = tokens.next().ok_or_else(|| ProfilerError::TraceParse {
                    line,
                    reason: "ENTER needs a method name".into(),
                })?;
                if tokens.next().is_some() {
                    return Err(ProfilerError::TraceParse {
                        line,
                        reason: "unexpected tokens after the method name".into(),
                    });
                }
                *counts.entry(name.to_string()).or_insert(0) += 1;
                stack.push((name.to_string(), line, Vec::new()));
            }
            "EXIT" => {
                if tokens.next().is_some() {
                    return Err(ProfilerError::TraceParse {
                        line,
                        reason: "unexpected tokens after EXIT".into(),
                    });
                }
                let (name, _, children) = stack.pop().ok_or_else(|| ProfilerError::Unbalanced {
                    line,
                    reason: "EXIT without a matching ENTER".into(),
                })?;
                attach(TraceNode::Method { name, children }, &mut stack, &mut roots);
            }
            "BC" => {
                let name = tokens.next().ok_or_else(|| ProfilerError::TraceParse {
                    line,
                    reason: "BC needs a bytecode name".into(),
                })?;
                let mut attributes = Vec::new();
                for token in tokens {
                    let (key, value) =
                        token.split_once('=').ok_or_else(|| ProfilerError::TraceParse {
                            line,
                            reason: format!("attribute `{token}` is not key=value"),
                        })?;
                    if key.is_empty() {
                        return Err(ProfilerError::TraceParse {
                            line,
                            reason: format!("attribute `{token}` has an empty key"),
                        });
                    }
                    attributes.push((key.to_string(), value.to_string()));
                }
                *counts.entry(name.to_string()).or_insert(0) += 1;
                attach(
                    TraceNode::Bytecode { name: name.to_string(), attributes },
                    &mut stack,
                    &mut roots,
                );
            }
            other => {
                return Err(ProfilerError::TraceParse {
                    line,
                    reason: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    if let Some((name, line, _)) = stack.last() {
        return Err(ProfilerError::Unbalanced {
            line: *line,
            reason: format!("ENTER {name} is never exited"),
        });
    }
    Ok(ParsedTrace { tree: InvocationTree { roots }, counts })
}

fn attach(
    node: TraceNode,
    stack: &mut [(String, usize, Vec<TraceNode>)],
    roots: &mut Vec<TraceNode>,
) {
    match stack.last_mut() {
        Some((_, _, children)) => children.push(node),
        None => roots.push(node),
    }
}
