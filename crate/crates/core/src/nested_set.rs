//! Nested-set encoding of document trees.
//!
//! A pre-order walk visits every node twice: once on entry (left index) and
//! once on exit (right index). A node is a descendant of another exactly when
//! its interval is strictly nested inside the other's.

use serde::{Deserialize, Serialize};

use crate::doc::InfographicDoc;
use crate::error::StructureError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedSetEntry {
    pub id: String,
    pub left: u32,
    pub right: u32,
}

impl NestedSetEntry {
    pub fn is_descendant_of(&self, other: &NestedSetEntry) -> bool {
        other.left < self.left && self.right < other.right
    }
}

/// Entries in pre-order (ascending `left`).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NestedSetIndex {
    pub entries: Vec<NestedSetEntry>,
}

impl NestedSetIndex {
    pub fn get(&self, id: &str) -> Option<&NestedSetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Bare tree shape: ids and ordered children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeShape {
    pub id: String,
    pub children: Vec<TreeShape>,
}

impl TreeShape {
    pub fn leaf(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            children: Vec::new(),
        }
    }

    pub fn node(id: impl Into<String>, children: Vec<TreeShape>) -> Self {
        Self {
            id: id.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeShape::size).sum::<usize>()
    }

    /// Shape of a document, following stored child order.
    pub fn of_doc(doc: &InfographicDoc) -> Result<Self, StructureError> {
        // preorder() performs the cycle check.
        let visits = doc.preorder()?;
        fn build(doc: &InfographicDoc, id: &str) -> TreeShape {
            let node = doc.node(id).expect("checked by preorder");
            TreeShape::node(
                id,
                node.children.iter().map(|c| build(doc, c)).collect(),
            )
        }
        Ok(build(doc, &visits[0].node.id))
    }

    pub fn encode(&self) -> NestedSetIndex {
        fn walk(t: &TreeShape, counter: &mut u32, out: &mut Vec<NestedSetEntry>) {
            *counter += 1;
            let slot = out.len();
            out.push(NestedSetEntry {
                id: t.id.clone(),
                left: *counter,
                right: 0,
            });
            for c in &t.children {
                walk(c, counter, out);
            }
            *counter += 1;
            out[slot].right = *counter;
        }
        let mut out = Vec::with_capacity(self.size());
        walk(self, &mut 0, &mut out);
        NestedSetIndex { entries: out }
    }
}

pub fn encode_nested_set(doc: &InfographicDoc) -> Result<NestedSetIndex, StructureError> {
    Ok(TreeShape::of_doc(doc)?.encode())
}

pub fn decode_nested_set(idx: &NestedSetIndex) -> Result<TreeShape, StructureError> {
    let malformed = |msg: String| StructureError::MalformedIndices(msg);
    let n = idx.entries.len();
    if n == 0 {
        return Err(malformed("empty index".into()));
    }
    let mut entries: Vec<&NestedSetEntry> = idx.entries.iter().collect();
    entries.sort_by_key(|e| e.left);

    let mut seen = vec![false; 2 * n + 1];
    for e in &entries {
        if e.left >= e.right {
            return Err(malformed(format!("{}: left {} >= right {}", e.id, e.left, e.right)));
        }
        for v in [e.left, e.right] {
            if v == 0 || v as usize > 2 * n {
                return Err(malformed(format!("{}: index {v} outside 1..={}", e.id, 2 * n)));
            }
            if std::mem::replace(&mut seen[v as usize], true) {
                return Err(malformed(format!("index {v} used twice")));
            }
        }
    }
    if entries[0].left != 1 || entries[0].right as usize != 2 * n {
        return Err(malformed("first entry must span the whole index range".into()));
    }

    // Stack of open nodes; each entry must sit inside the innermost open one.
    let mut stack: Vec<(u32, TreeShape)> = vec![(entries[0].right, TreeShape::leaf(&entries[0].id))];
    let close = |stack: &mut Vec<(u32, TreeShape)>| {
        let (_, done) = stack.pop().unwrap();
        stack.last_mut().unwrap().1.children.push(done);
    };
    for e in &entries[1..] {
        while stack.last().is_some_and(|(right, _)| *right < e.left) {
            if stack.len() == 1 {
                return Err(malformed(format!("{} lies outside the root", e.id)));
            }
            close(&mut stack);
        }
        let (parent_right, _) = stack.last().unwrap();
        if e.right > *parent_right {
            return Err(malformed(format!("{} straddles its parent's interval", e.id)));
        }
        stack.push((e.right, TreeShape::leaf(&e.id)));
    }
    while stack.len() > 1 {
        close(&mut stack);
    }
    let tree = stack.pop().unwrap().1;
    // Distinct indices with proper nesting are necessary; left/right must also
    // be consecutive visit numbers, which re-encoding confirms.
    let mut expected: Vec<NestedSetEntry> = tree.encode().entries;
    let mut given: Vec<NestedSetEntry> = idx.entries.clone();
    expected.sort_by_key(|e| e.left);
    given.sort_by_key(|e| e.left);
    if expected != given {
        return Err(malformed("indices are not a contiguous pre-order numbering".into()));
    }
    Ok(tree)
}
