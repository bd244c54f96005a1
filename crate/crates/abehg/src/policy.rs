//! Threshold-gate access policies: attribute normalization, the postfix and
//! infix policy languages, satisfiability, and selection of a minimal
//! satisfying assignment for decryption.
//!
//! The canonical policy text is the postfix form, e.g. `"a b 2of2"`: an
//! attribute token pushes a leaf, a `kofn` token pops `n` nodes into a
//! threshold gate. `AND`/`OR` in the infix form map to n-of-n / 1-of-n gates
//! over their flattened operand chains. The language is monotone; there is no
//! NOT gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("attribute is empty after normalization")]
    EmptyAttribute,
    #[error("attribute {0:?} collides with the gate token syntax")]
    ReservedAttribute(String),
    #[error("empty policy")]
    EmptyPolicy,
    #[error("token {pos} ({token:?}): malformed gate token")]
    MalformedGate { pos: usize, token: String },
    #[error("token {pos} ({token:?}): threshold out of range")]
    ThresholdOutOfRange { pos: usize, token: String },
    #[error("token {pos} ({token:?}): gate needs {needed} operands but only {available} are available")]
    StackUnderflow {
        pos: usize,
        token: String,
        needed: usize,
        available: usize,
    },
    #[error("{remaining} nodes left over after parsing; a policy must reduce to one root")]
    TrailingNodes { remaining: usize },
    #[error("token {pos} ({token:?}): unexpected token")]
    UnexpectedToken { pos: usize, token: String },
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("empty operand list")]
    EmptyOperands,
    #[error("invalid gate: threshold {threshold} with {children} children")]
    InvalidGate { threshold: usize, children: usize },
}

/// A normalized attribute string such as `"position:doctor"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Attribute(String);

impl Attribute {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Normalizes raw attribute text: trims, lowercases, unifies the `=`
/// separator to `:`, and strips whitespace so the result is a single policy
/// token. `"Position: Doctor"`, `"position = Doctor"` and `"position:doctor"`
/// all normalize to the same attribute.
pub fn normalize_attribute(raw: &str) -> Result<Attribute, PolicyError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(PolicyError::EmptyAttribute);
    }
    let out: String = trimmed
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == '=' { ':' } else { c })
        .collect();
    if out.is_empty() {
        return Err(PolicyError::EmptyAttribute);
    }
    if parse_gate_token(&out).is_some() {
        return Err(PolicyError::ReservedAttribute(out));
    }
    Ok(Attribute(out))
}

/// An unordered, duplicate-free set of attributes (the `S` of a data user).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttributeSet(BTreeSet<Attribute>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from raw strings, normalizing each.
    pub fn from_raw<I, S>(items: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for item in items {
            set.insert(normalize_attribute(item.as_ref())?);
        }
        Ok(AttributeSet(set))
    }

    /// Parses a comma-separated attribute list such as
    /// `"Position: Doctor, Department: Radiology"`.
    pub fn parse_list(text: &str) -> Result<Self, PolicyError> {
        Self::from_raw(text.split(','))
    }

    pub fn insert(&mut self, attr: Attribute) {
        self.0.insert(attr);
    }

    pub fn contains(&self, attr: &Attribute) -> bool {
        self.0.contains(attr)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.0.iter()
    }

    pub fn union(&self, other: &AttributeSet) -> AttributeSet {
        AttributeSet(self.0.union(&other.0).cloned().collect())
    }
}

impl fmt::Display for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            f.write_str(a.as_str())?;
            first = false;
        }
        Ok(())
    }
}

/// A node of an access tree: either an attribute leaf or a threshold gate
/// requiring `threshold` of its ordered children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyNode {
    Leaf(Attribute),
    Gate {
        threshold: usize,
        children: Vec<PolicyNode>,
    },
}

/// Path of 1-based child indices from the root; the root itself is `[]`.
pub type NodePath = Vec<usize>;

/// A threshold-gate policy tree (the `T` bound into a ciphertext).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTree {
    root: PolicyNode,
}

impl AccessTree {
    /// Validates gate thresholds recursively.
    pub fn new(root: PolicyNode) -> Result<Self, PolicyError> {
        fn check(node: &PolicyNode) -> Result<(), PolicyError> {
            if let PolicyNode::Gate {
                threshold,
                children,
            } = node
            {
                if children.is_empty() || *threshold < 1 || *threshold > children.len() {
                    return Err(PolicyError::InvalidGate {
                        threshold: *threshold,
                        children: children.len(),
                    });
                }
                for child in children {
                    check(child)?;
                }
            }
            Ok(())
        }
        check(&root)?;
        Ok(AccessTree { root })
    }

    pub fn leaf(attr: Attribute) -> Self {
        AccessTree {
            root: PolicyNode::Leaf(attr),
        }
    }

    pub fn root(&self) -> &PolicyNode {
        &self.root
    }

    /// Leaves in pre-order together with their node paths; this ordering is
    /// what ciphertext leaf components follow.
    pub fn leaves(&self) -> Vec<(NodePath, &Attribute)> {
        fn walk<'a>(
            node: &'a PolicyNode,
            path: NodePath,
            out: &mut Vec<(NodePath, &'a Attribute)>,
        ) {
            match node {
                PolicyNode::Leaf(attr) => out.push((path, attr)),
                PolicyNode::Gate { children, .. } => {
                    for (i, child) in children.iter().enumerate() {
                        let mut p = path.clone();
                        p.push(i + 1);
                        walk(child, p, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, Vec::new(), &mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&PolicyNode> {
        let mut node = &self.root;
        for &idx in path {
            match node {
                PolicyNode::Gate { children, .. } => node = children.get(idx.checked_sub(1)?)?,
                PolicyNode::Leaf(_) => return None,
            }
        }
        Some(node)
    }
}

fn parse_gate_token(tok: &str) -> Option<(&str, &str)> {
    // <digits>of<digits>, scanning every "of" occurrence
    for (i, _) in tok.match_indices("of") {
        let (k, n) = (&tok[..i], &tok[i + 2..]);
        if !k.is_empty()
            && !n.is_empty()
            && k.bytes().all(|b| b.is_ascii_digit())
            && n.bytes().all(|b| b.is_ascii_digit())
        {
            return Some((k, n));
        }
    }
    None
}

/// Splits policy text into tokens, joining separator-adjacent pieces so that
/// `"Position: Doctor"` and `"position = Doctor"` each form a single
/// attribute token. Returns `(starting word index, token)` pairs.
fn merged_tokens(text: &str) -> Vec<(usize, String)> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        let start = i;
        let mut cur = parts[i].to_string();
        i += 1;
        loop {
            if (cur.ends_with(':') || cur.ends_with('=')) && i < parts.len() {
                cur.push_str(parts[i]);
                i += 1;
            } else if i < parts.len() && (parts[i].starts_with(':') || parts[i].starts_with('=')) {
                cur.push_str(parts[i]);
                i += 1;
            } else {
                break;
            }
        }
        out.push((start + 1, cur));
    }
    out
}

/// Parses the canonical postfix policy language by stack evaluation.
pub fn parse_postfix(text: &str) -> Result<AccessTree, PolicyError> {
    let tokens = merged_tokens(text);
    if tokens.is_empty() {
        return Err(PolicyError::EmptyPolicy);
    }
    let mut stack: Vec<PolicyNode> = Vec::new();
    for (pos, token) in &tokens {
        if let Some((k_str, n_str)) = parse_gate_token(token) {
            let k: usize = k_str.parse().map_err(|_| PolicyError::MalformedGate {
                pos: *pos,
                token: token.clone(),
            })?;
            let n: usize = n_str.parse().map_err(|_| PolicyError::MalformedGate {
                pos: *pos,
                token: token.clone(),
            })?;
            if k < 1 || k > n {
                return Err(PolicyError::ThresholdOutOfRange {
                    pos: *pos,
                    token: token.clone(),
                });
            }
            if stack.len() < n {
                return Err(PolicyError::StackUnderflow {
                    pos: *pos,
                    token: token.clone(),
                    needed: n,
                    available: stack.len(),
                });
            }
            let children = stack.split_off(stack.len() - n);
            stack.push(PolicyNode::Gate {
                threshold: k,
                children,
            });
        } else {
            let attr = normalize_attribute(token)?;
            stack.push(PolicyNode::Leaf(attr));
        }
    }
    match stack.len() {
        1 => AccessTree::new(stack.pop().expect("len checked")),
        0 => Err(PolicyError::EmptyPolicy),
        n => Err(PolicyError::TrailingNodes { remaining: n }),
    }
}

/// Canonical postfix text of a tree; `parse_postfix` inverts it.
pub fn serialize_policy(tree: &AccessTree) -> String {
    fn walk(node: &PolicyNode, out: &mut String) {
        match node {
            PolicyNode::Leaf(attr) => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(attr.as_str());
            }
            PolicyNode::Gate {
                threshold,
                children,
            } => {
                for child in children {
                    walk(child, out);
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&format!("{}of{}", threshold, children.len()));
            }
        }
    }
    let mut out = String::new();
    walk(tree.root(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
enum InfixTok {
    LParen,
    RParen,
    Comma,
    Word(String),
}

fn lex_infix(text: &str) -> Vec<(usize, InfixTok)> {
    let mut raw: Vec<(usize, InfixTok)> = Vec::new();
    let mut word = String::new();
    let mut word_pos = 0;
    let mut pos = 0;
    let flush = |raw: &mut Vec<(usize, InfixTok)>, word: &mut String, word_pos: usize| {
        if !word.is_empty() {
            raw.push((word_pos, InfixTok::Word(std::mem::take(word))));
        }
    };
    for c in text.chars() {
        match c {
            '(' | '[' => {
                flush(&mut raw, &mut word, word_pos);
                pos += 1;
                raw.push((pos, InfixTok::LParen));
            }
            ')' | ']' => {
                flush(&mut raw, &mut word, word_pos);
                pos += 1;
                raw.push((pos, InfixTok::RParen));
            }
            ',' => {
                flush(&mut raw, &mut word, word_pos);
                pos += 1;
                raw.push((pos, InfixTok::Comma));
            }
            c if c.is_whitespace() => flush(&mut raw, &mut word, word_pos),
            c => {
                if word.is_empty() {
                    pos += 1;
                    word_pos = pos;
                }
                word.push(c);
            }
        }
    }
    flush(&mut raw, &mut word, word_pos);

    // join separator-adjacent words ("position" "=" "doctor" -> one token)
    let mut out: Vec<(usize, InfixTok)> = Vec::new();
    for (p, tok) in raw {
        if let (InfixTok::Word(w), Some((_, InfixTok::Word(prev)))) = (&tok, out.last_mut()) {
            if prev.ends_with(':') || prev.ends_with('=') || w.starts_with(':') || w.starts_with('=')
            {
                prev.push_str(w);
                continue;
            }
        }
        out.push((p, tok));
    }
    out
}

struct InfixParser {
    tokens: Vec<(usize, InfixTok)>,
    cursor: usize,
}

impl InfixParser {
    fn peek(&self) -> Option<&(usize, InfixTok)> {
        self.tokens.get(self.cursor)
    }

    fn next(&mut self) -> Option<(usize, InfixTok)> {
        let t = self.tokens.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<PolicyNode, PolicyError> {
        let mut terms = vec![self.term()?];
        while let Some((_, InfixTok::Word(w))) = self.peek() {
            if w.eq_ignore_ascii_case("or") {
                self.next();
                terms.push(self.term()?);
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("nonempty")
        } else {
            PolicyNode::Gate {
                threshold: 1,
                children: terms,
            }
        })
    }

    fn term(&mut self) -> Result<PolicyNode, PolicyError> {
        let mut factors = vec![self.factor()?];
        while let Some((_, InfixTok::Word(w))) = self.peek() {
            if w.eq_ignore_ascii_case("and") {
                self.next();
                factors.push(self.factor()?);
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().expect("nonempty")
        } else {
            PolicyNode::Gate {
                threshold: factors.len(),
                children: factors,
            }
        })
    }

    fn factor(&mut self) -> Result<PolicyNode, PolicyError> {
        match self.next() {
            Some((_, InfixTok::LParen)) => {
                let node = self.expr()?;
                match self.next() {
                    Some((_, InfixTok::RParen)) => Ok(node),
                    _ => Err(PolicyError::UnbalancedParens),
                }
            }
            Some((pos, InfixTok::Word(w))) => {
                let is_kof = w
                    .strip_suffix("of")
                    .map(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
                    .unwrap_or(false);
                if is_kof && matches!(self.peek(), Some((_, InfixTok::LParen))) {
                    let k: usize = w
                        .strip_suffix("of")
                        .expect("checked")
                        .parse()
                        .map_err(|_| PolicyError::MalformedGate {
                            pos,
                            token: w.clone(),
                        })?;
                    self.next(); // consume '('
                    let mut operands = vec![self.expr()?];
                    loop {
                        match self.next() {
                            Some((_, InfixTok::Comma)) => operands.push(self.expr()?),
                            Some((_, InfixTok::RParen)) => break,
                            _ => return Err(PolicyError::UnbalancedParens),
                        }
                    }
                    if k < 1 || k > operands.len() {
                        return Err(PolicyError::ThresholdOutOfRange { pos, token: w });
                    }
                    Ok(PolicyNode::Gate {
                        threshold: k,
                        children: operands,
                    })
                } else if w.eq_ignore_ascii_case("or") || w.eq_ignore_ascii_case("and") {
                    Err(PolicyError::UnexpectedToken { pos, token: w })
                } else {
                    Ok(PolicyNode::Leaf(normalize_attribute(&w)?))
                }
            }
            Some((pos, tok)) => Err(PolicyError::UnexpectedToken {
                pos,
                token: format!("{tok:?}"),
            }),
            None => Err(PolicyError::EmptyPolicy),
        }
    }
}

/// Parses the boolean infix form: `expr := term (OR term)*`,
/// `term := factor (AND factor)*`,
/// `factor := attribute | (expr) | <k>of(expr, ...)`.
///
/// Chained `AND`/`OR` operands flatten into a single n-of-n / 1-of-n gate so
/// the result is structurally identical to the equivalent postfix policy.
/// Square brackets are accepted as parentheses.
pub fn parse_infix(text: &str) -> Result<AccessTree, PolicyError> {
    let tokens = lex_infix(text);
    if tokens.is_empty() {
        return Err(PolicyError::EmptyPolicy);
    }
    let mut parser = InfixParser { tokens, cursor: 0 };
    let root = parser.expr()?;
    if let Some((pos, tok)) = parser.next() {
        return Err(PolicyError::UnexpectedToken {
            pos,
            token: format!("{tok:?}"),
        });
    }
    AccessTree::new(root)
}

/// True iff `attrs` satisfies the tree: a leaf is satisfied by membership, a
/// gate by having at least `threshold` satisfied children.
pub fn satisfies(tree: &AccessTree, attrs: &AttributeSet) -> bool {
    fn eval(node: &PolicyNode, attrs: &AttributeSet) -> bool {
        match node {
            PolicyNode::Leaf(a) => attrs.contains(a),
            PolicyNode::Gate {
                threshold,
                children,
            } => children.iter().filter(|c| eval(c, attrs)).count() >= *threshold,
        }
    }
    eval(tree.root(), attrs)
}

/// The child choices made at every gate of a satisfying evaluation, plus the
/// leaves those choices bottom out in. Drives recursive decryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatisfyingAssignment {
    /// Gate path → the 1-based indices of the `threshold` children used.
    pub chosen: BTreeMap<NodePath, Vec<usize>>,
    /// Leaf path → the leaf's attribute, for every used leaf.
    pub used_leaves: BTreeSet<(NodePath, Attribute)>,
}

impl SatisfyingAssignment {
    pub fn leaf_attributes(&self) -> AttributeSet {
        let mut set = AttributeSet::new();
        for (_, attr) in &self.used_leaves {
            set.insert(attr.clone());
        }
        set
    }
}

/// Smallest satisfying assignment by used-leaf count, ties broken by lowest
/// child indices; `None` iff the set does not satisfy the tree.
pub fn min_satisfying_assignment(
    tree: &AccessTree,
    attrs: &AttributeSet,
) -> Option<SatisfyingAssignment> {
    fn solve(
        node: &PolicyNode,
        path: &NodePath,
        attrs: &AttributeSet,
    ) -> Option<(usize, SatisfyingAssignment)> {
        match node {
            PolicyNode::Leaf(attr) => {
                if attrs.contains(attr) {
                    let mut used = BTreeSet::new();
                    used.insert((path.clone(), attr.clone()));
                    Some((
                        1,
                        SatisfyingAssignment {
                            chosen: BTreeMap::new(),
                            used_leaves: used,
                        },
                    ))
                } else {
                    None
                }
            }
            PolicyNode::Gate {
                threshold,
                children,
            } => {
                let mut satisfied: Vec<(usize, usize, SatisfyingAssignment)> = Vec::new();
                for (i, child) in children.iter().enumerate() {
                    let mut child_path = path.clone();
                    child_path.push(i + 1);
                    if let Some((cost, sub)) = solve(child, &child_path, attrs) {
                        satisfied.push((i + 1, cost, sub));
                    }
                }
                if satisfied.len() < *threshold {
                    return None;
                }
                // cheapest children win; equal costs go to the lower index
                satisfied.sort_by_key(|(idx, cost, _)| (*cost, *idx));
                satisfied.truncate(*threshold);
                let mut indices: Vec<usize> = satisfied.iter().map(|(i, _, _)| *i).collect();
                indices.sort_unstable();
                let mut total = 0;
                let mut merged = SatisfyingAssignment {
                    chosen: BTreeMap::new(),
                    used_leaves: BTreeSet::new(),
                };
                for (_, cost, sub) in satisfied {
                    total += cost;
                    merged.chosen.extend(sub.chosen);
                    merged.used_leaves.extend(sub.used_leaves);
                }
                merged.chosen.insert(path.clone(), indices);
                Some((total, merged))
            }
        }
    }
    solve(tree.root(), &Vec::new(), attrs).map(|(_, assignment)| assignment)
}
