//! Typed property-graph store for educational knowledge graphs.
//!
//! Holds the EduKG proper (learning material, slides, main and related
//! concepts, paragraph nodes) together with per-learner PKG overlays (learner
//! nodes and their "did not understand" edges). The store is deliberately
//! small: typed nodes, typed edges with endpoint-kind constraints, insertion-
//! ordered traversal, and a canonical snapshot format for persistence.
//!
//! Mutations require exclusive access (`&mut self`); traversals take `&self`
//! and may run concurrently between mutations. The store owns all its data,
//! so it is `Send + Sync` and can be handed across threads behind a lock.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// What a node is. Fixed at creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    LearningMaterial,
    Slide,
    MainConcept,
    RelatedConcept,
    Learner,
    WikiParagraph,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::LearningMaterial => "learning_material",
            NodeKind::Slide => "slide",
            NodeKind::MainConcept => "main_concept",
            NodeKind::RelatedConcept => "related_concept",
            NodeKind::Learner => "learner",
            NodeKind::WikiParagraph => "wiki_paragraph",
        }
    }
}

impl core::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Edge label. Each label admits exactly one (source kind, target kind) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Learning material → slide.
    Contains,
    /// Slide → main concept.
    ConsistsOf,
    /// Main concept → related concept.
    RelatedTo,
    /// Learner → main concept ("did not understand").
    Dnu,
    /// Main concept → paragraph of its article.
    HasParagraph,
}

impl EdgeKind {
    /// The only endpoint kinds this edge label admits, as (source, target).
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::Contains => (NodeKind::LearningMaterial, NodeKind::Slide),
            EdgeKind::ConsistsOf => (NodeKind::Slide, NodeKind::MainConcept),
            EdgeKind::RelatedTo => (NodeKind::MainConcept, NodeKind::RelatedConcept),
            EdgeKind::Dnu => (NodeKind::Learner, NodeKind::MainConcept),
            EdgeKind::HasParagraph => (NodeKind::MainConcept, NodeKind::WikiParagraph),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Contains => "contains",
            EdgeKind::ConsistsOf => "consists_of",
            EdgeKind::RelatedTo => "related_to",
            EdgeKind::Dnu => "dnu",
            EdgeKind::HasParagraph => "has_paragraph",
        }
    }
}

impl core::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Engine-assigned node identifier: a monotonically increasing integer,
/// rendered as a string on every external surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl core::str::FromStr for NodeId {
    type Err = core::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u64>().map(NodeId)
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse()
            .map_err(|_| D::Error::custom(format!("invalid node id {s:?}")))
    }
}

/// Scalar property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl From<&str> for PropValue {
    fn from(s: &str) -> Self {
        PropValue::Str(s.to_string())
    }
}

impl From<String> for PropValue {
    fn from(s: String) -> Self {
        PropValue::Str(s)
    }
}

impl From<i64> for PropValue {
    fn from(v: i64) -> Self {
        PropValue::Int(v)
    }
}

pub type Props = BTreeMap<String, PropValue>;

/// A node with its kind, scalar properties, and (for paragraph nodes) an
/// attached embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub props: Props,
    pub embedding: Option<Vec<f64>>,
}

impl Node {
    pub fn prop_str(&self, key: &str) -> Option<&str> {
        match self.props.get(key) {
            Some(PropValue::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn prop_int(&self, key: &str) -> Option<i64> {
        match self.props.get(key) {
            Some(PropValue::Int(v)) => Some(*v),
            _ => None,
        }
    }
}

/// Traversal direction relative to the queried node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

/// Per-learner view of the graph: the learner's DNU concepts and, for each,
/// one slide that contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct PkgView {
    pub learner_id: NodeId,
    /// Main-concept nodes marked DNU, in marking order. Concepts without a
    /// containing slide are omitted (and logged).
    pub dnu_concepts: Vec<NodeId>,
    /// Concept → first slide (by insertion order) with a CONSISTS_OF edge to
    /// that concept.
    pub containing_slides: BTreeMap<NodeId, NodeId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("{key} required")]
    MissingProp { key: String },
    #[error("{message}")]
    InvalidProp { message: String },
    #[error("node {id} not found")]
    NotFound { id: NodeId },
    #[error("{message}")]
    SchemaViolation { message: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported snapshot version {found}")]
    Version { found: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Edge {
    src: NodeId,
    kind: EdgeKind,
    dst: NodeId,
}

/// The property graph. See the module docs for the contract.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<NodeId, Node>,
    /// Edges in insertion order (drives snapshot layout).
    edges: Vec<Edge>,
    edge_set: BTreeSet<(NodeId, EdgeKind, NodeId)>,
    out_adj: BTreeMap<NodeId, Vec<(EdgeKind, NodeId)>>,
    in_adj: BTreeMap<NodeId, Vec<(EdgeKind, NodeId)>>,
    next_id: u64,
}

const SNAPSHOT_VERSION: u64 = 1;

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self {
            next_id: 1,
            ..Self::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    /// Nodes in id (= creation) order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, EdgeKind, NodeId)> + '_ {
        self.edges.iter().map(|e| (e.src, e.kind, e.dst))
    }

    pub fn has_edge(&self, src: NodeId, kind: EdgeKind, dst: NodeId) -> bool {
        self.edge_set.contains(&(src, kind, dst))
    }

    fn validate_props(kind: NodeKind, props: &Props) -> Result<(), GraphError> {
        let require_nonempty = |key: &str| -> Result<(), GraphError> {
            match props.get(key) {
                Some(PropValue::Str(s)) if !s.trim().is_empty() => Ok(()),
                _ => Err(GraphError::MissingProp {
                    key: key.to_string(),
                }),
            }
        };
        let require_present = |key: &str| -> Result<(), GraphError> {
            match props.get(key) {
                Some(PropValue::Str(_)) => Ok(()),
                _ => Err(GraphError::MissingProp {
                    key: key.to_string(),
                }),
            }
        };
        match kind {
            NodeKind::LearningMaterial => require_nonempty("title"),
            NodeKind::Slide => require_nonempty("slide_text"),
            NodeKind::MainConcept => {
                require_nonempty("concept_name")?;
                // Untagged concepts carry an empty article_title; the key
                // itself is still mandatory.
                require_present("article_title")
            }
            NodeKind::RelatedConcept => require_nonempty("article_title"),
            NodeKind::Learner => require_nonempty("learner_name"),
            NodeKind::WikiParagraph => {
                require_nonempty("paragraph_text")?;
                match props.get("paragraph_index") {
                    Some(PropValue::Int(v)) if *v >= 0 => Ok(()),
                    Some(_) => Err(GraphError::InvalidProp {
                        message: "paragraph_index must be a non-negative integer".to_string(),
                    }),
                    None => Err(GraphError::MissingProp {
                        key: "paragraph_index".to_string(),
                    }),
                }
            }
        }?;
        for (key, value) in props {
            if let PropValue::Float(f) = value {
                if !f.is_finite() {
                    return Err(GraphError::InvalidProp {
                        message: format!("prop {key} must be finite"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Adds a node, assigning it a fresh id.
    pub fn add_node(&mut self, kind: NodeKind, props: Props) -> Result<NodeId, GraphError> {
        Self::validate_props(kind, &props)?;
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                id,
                kind,
                props,
                embedding: None,
            },
        );
        Ok(id)
    }

    fn insert_node_raw(&mut self, node: Node) -> Result<(), GraphError> {
        Self::validate_props(node.kind, &node.props)?;
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::SchemaViolation {
                message: format!("duplicate node id {}", node.id),
            });
        }
        self.next_id = self.next_id.max(node.id.0 + 1);
        self.nodes.insert(node.id, node);
        Ok(())
    }

    /// Sets or replaces a scalar property on an existing node.
    pub fn set_prop(&mut self, id: NodeId, key: &str, value: PropValue) -> Result<(), GraphError> {
        let node = self.nodes.get_mut(&id).ok_or(GraphError::NotFound { id })?;
        node.props.insert(key.to_string(), value);
        Ok(())
    }

    /// Attaches (or clears) an embedding vector on an existing node.
    pub fn set_embedding(
        &mut self,
        id: NodeId,
        embedding: Option<Vec<f64>>,
    ) -> Result<(), GraphError> {
        let node = self.nodes.get_mut(&id).ok_or(GraphError::NotFound { id })?;
        node.embedding = embedding;
        Ok(())
    }

    /// Adds an edge. Re-inserting an existing edge is a no-op.
    pub fn add_edge(&mut self, src: NodeId, kind: EdgeKind, dst: NodeId) -> Result<(), GraphError> {
        let src_kind = self
            .nodes
            .get(&src)
            .ok_or(GraphError::NotFound { id: src })?
            .kind;
        let dst_kind = self
            .nodes
            .get(&dst)
            .ok_or(GraphError::NotFound { id: dst })?
            .kind;
        let (want_src, want_dst) = kind.endpoints();
        if src == dst {
            return Err(GraphError::SchemaViolation {
                message: format!("self-loop on node {src} not allowed"),
            });
        }
        if (src_kind, dst_kind) != (want_src, want_dst) {
            return Err(GraphError::SchemaViolation {
                message: format!(
                    "{kind} edge requires {want_src} -> {want_dst}, got {src_kind} -> {dst_kind}"
                ),
            });
        }
        if self.edge_set.insert((src, kind, dst)) {
            self.edges.push(Edge { src, kind, dst });
            self.out_adj.entry(src).or_default().push((kind, dst));
            self.in_adj.entry(dst).or_default().push((kind, src));
        }
        Ok(())
    }

    /// Removes an edge if present. Returns whether anything was removed.
    pub fn remove_edge(&mut self, src: NodeId, kind: EdgeKind, dst: NodeId) -> bool {
        if !self.edge_set.remove(&(src, kind, dst)) {
            return false;
        }
        self.edges
            .retain(|e| !(e.src == src && e.kind == kind && e.dst == dst));
        if let Some(adj) = self.out_adj.get_mut(&src) {
            adj.retain(|&(k, d)| !(k == kind && d == dst));
        }
        if let Some(adj) = self.in_adj.get_mut(&dst) {
            adj.retain(|&(k, s)| !(k == kind && s == src));
        }
        true
    }

    /// Removes a node and all incident edges.
    pub fn remove_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        if self.nodes.remove(&id).is_none() {
            return Err(GraphError::NotFound { id });
        }
        self.edges.retain(|e| e.src != id && e.dst != id);
        self.edge_set.retain(|&(s, _, d)| s != id && d != id);
        self.out_adj.remove(&id);
        self.in_adj.remove(&id);
        for adj in self.out_adj.values_mut() {
            adj.retain(|&(_, d)| d != id);
        }
        for adj in self.in_adj.values_mut() {
            adj.retain(|&(_, s)| s != id);
        }
        Ok(())
    }

    /// Ids of nodes connected to `id` via `kind` edges in `direction`, in
    /// edge insertion order.
    pub fn neighbor_ids(
        &self,
        id: NodeId,
        kind: EdgeKind,
        direction: Direction,
    ) -> Result<Vec<NodeId>, GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::NotFound { id });
        }
        let adj = match direction {
            Direction::Out => self.out_adj.get(&id),
            Direction::In => self.in_adj.get(&id),
        };
        Ok(adj
            .map(|v| {
                v.iter()
                    .filter(|(k, _)| *k == kind)
                    .map(|&(_, n)| n)
                    .collect()
            })
            .unwrap_or_default())
    }

    /// Like [`Self::neighbor_ids`] but resolves the nodes.
    pub fn neighbors(
        &self,
        id: NodeId,
        kind: EdgeKind,
        direction: Direction,
    ) -> Result<Vec<&Node>, GraphError> {
        Ok(self
            .neighbor_ids(id, kind, direction)?
            .into_iter()
            .map(|nid| &self.nodes[&nid])
            .collect())
    }

    /// Records a learner's "did not understand" mark on a main concept.
    /// Idempotent. Only main concepts are markable.
    pub fn mark_dnu(&mut self, learner: NodeId, concept: NodeId) -> Result<(), GraphError> {
        let learner_kind = self
            .nodes
            .get(&learner)
            .ok_or(GraphError::NotFound { id: learner })?
            .kind;
        let concept_kind = self
            .nodes
            .get(&concept)
            .ok_or(GraphError::NotFound { id: concept })?
            .kind;
        if learner_kind != NodeKind::Learner {
            return Err(GraphError::SchemaViolation {
                message: format!("node {learner} is a {learner_kind}, not a learner"),
            });
        }
        if concept_kind != NodeKind::MainConcept {
            return Err(GraphError::SchemaViolation {
                message: format!(
                    "only main concepts can be marked DNU; node {concept} is a {concept_kind}"
                ),
            });
        }
        self.add_edge(learner, EdgeKind::Dnu, concept)
    }

    /// The learner's personal view: DNU concepts with one containing slide
    /// each. Concepts that no slide contains are dropped with a warning.
    pub fn pkg_view(&self, learner: NodeId) -> Result<PkgView, GraphError> {
        let node = self
            .nodes
            .get(&learner)
            .ok_or(GraphError::NotFound { id: learner })?;
        if node.kind != NodeKind::Learner {
            return Err(GraphError::SchemaViolation {
                message: format!("node {learner} is a {}, not a learner", node.kind),
            });
        }
        let mut dnu_concepts = Vec::new();
        let mut containing_slides = BTreeMap::new();
        for concept in self.neighbor_ids(learner, EdgeKind::Dnu, Direction::Out)? {
            let slides = self.neighbor_ids(concept, EdgeKind::ConsistsOf, Direction::In)?;
            match slides.first() {
                Some(&slide) => {
                    dnu_concepts.push(concept);
                    containing_slides.insert(concept, slide);
                }
                None => {
                    log::warn!("pkg_view: DNU concept {concept} has no containing slide; omitted");
                }
            }
        }
        Ok(PkgView {
            learner_id: learner,
            dnu_concepts,
            containing_slides,
        })
    }

    /// Serializes the graph to its canonical snapshot document: a single
    /// UTF-8 JSON document with sorted keys, nodes in id order, and edges in
    /// insertion order, so identical graphs produce identical bytes.
    pub fn snapshot(&self) -> Vec<u8> {
        use serde_json::{Map, Number, Value};
        let nodes: Vec<Value> = self
            .nodes
            .values()
            .map(|node| {
                let mut obj = Map::new();
                if let Some(embedding) = &node.embedding {
                    let vals: Vec<Value> = embedding
                        .iter()
                        .map(|v| {
                            Number::from_f64(*v)
                                .map(Value::Number)
                                .unwrap_or(Value::Null)
                        })
                        .collect();
                    obj.insert("embedding".to_string(), Value::Array(vals));
                }
                obj.insert("id".to_string(), Value::String(node.id.to_string()));
                obj.insert(
                    "kind".to_string(),
                    Value::String(node.kind.as_str().to_string()),
                );
                let props: Map<String, Value> = node
                    .props
                    .iter()
                    .map(|(k, v)| {
                        let val = match v {
                            PropValue::Str(s) => Value::String(s.clone()),
                            PropValue::Int(i) => Value::Number((*i).into()),
                            PropValue::Float(f) => Number::from_f64(*f)
                                .map(Value::Number)
                                .unwrap_or(Value::Null),
                        };
                        (k.clone(), val)
                    })
                    .collect();
                obj.insert("props".to_string(), Value::Object(props));
                Value::Object(obj)
            })
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let mut obj = Map::new();
                obj.insert("dst".to_string(), Value::String(e.dst.to_string()));
                obj.insert(
                    "kind".to_string(),
                    Value::String(e.kind.as_str().to_string()),
                );
                obj.insert("src".to_string(), Value::String(e.src.to_string()));
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("edges".to_string(), Value::Array(edges));
        doc.insert("nodes".to_string(), Value::Array(nodes));
        doc.insert(
            "version".to_string(),
            Value::Number(SNAPSHOT_VERSION.into()),
        );
        serde_json::to_vec(&Value::Object(doc)).expect("snapshot serialization cannot fail")
    }

    /// Parses a snapshot produced by [`Self::snapshot`], revalidating all
    /// node and edge invariants.
    pub fn load(bytes: &[u8]) -> Result<Self, GraphError> {
        #[derive(Deserialize)]
        struct NodeDoc {
            id: NodeId,
            kind: NodeKind,
            #[serde(default)]
            props: Props,
            #[serde(default)]
            embedding: Option<Vec<f64>>,
        }
        #[derive(Deserialize)]
        struct SnapshotDoc {
            version: u64,
            nodes: Vec<NodeDoc>,
            edges: Vec<Edge>,
        }

        let doc: SnapshotDoc = serde_json::from_slice(bytes).map_err(|e| GraphError::Parse {
            offset: crate::text::line_col_to_offset(bytes, e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.version != SNAPSHOT_VERSION {
            return Err(GraphError::Version { found: doc.version });
        }
        let mut graph = KnowledgeGraph::new();
        for nd in doc.nodes {
            graph.insert_node_raw(Node {
                id: nd.id,
                kind: nd.kind,
                props: nd.props,
                embedding: nd.embedding,
            })?;
        }
        for e in doc.edges {
            graph.add_edge(e.src, e.kind, e.dst)?;
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn props(pairs: &[(&str, PropValue)]) -> Props {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    fn slide_props(text: &str) -> Props {
        props(&[("slide_text", text.into())])
    }

    fn mc_props(name: &str, article: &str) -> Props {
        props(&[
            ("concept_name", name.into()),
            ("article_title", article.into()),
        ])
    }

    #[test]
    fn first_insertion_assigns_id() {
        let mut g = KnowledgeGraph::new();
        let id = g
            .add_node(NodeKind::Slide, slide_props("Machine Learning is..."))
            .unwrap();
        assert_eq!(id, NodeId(1));
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn mc_node_with_article_tag() {
        let mut g = KnowledgeGraph::new();
        let id = g
            .add_node(
                NodeKind::MainConcept,
                mc_props("Artificial Intelligence", "Artificial intelligence"),
            )
            .unwrap();
        assert_eq!(
            g.node(id).unwrap().prop_str("article_title"),
            Some("Artificial intelligence")
        );
    }

    #[test]
    fn missing_mandatory_prop_names_key() {
        let mut g = KnowledgeGraph::new();
        let err = g.add_node(NodeKind::Slide, Props::new()).unwrap_err();
        assert_eq!(err.to_string(), "slide_text required");
    }

    #[test]
    fn add_edge_schema_conformant_and_reversed() {
        let mut g = KnowledgeGraph::new();
        let lm = g
            .add_node(
                NodeKind::LearningMaterial,
                props(&[("title", "Intro".into())]),
            )
            .unwrap();
        let slide = g.add_node(NodeKind::Slide, slide_props("text")).unwrap();
        g.add_edge(lm, EdgeKind::Contains, slide).unwrap();
        assert_eq!(g.edge_count(), 1);

        let err = g.add_edge(slide, EdgeKind::Contains, lm).unwrap_err();
        assert!(matches!(err, GraphError::SchemaViolation { .. }), "{err}");
    }

    #[test]
    fn duplicate_edge_is_idempotent() {
        let mut g = KnowledgeGraph::new();
        let lm = g
            .add_node(
                NodeKind::LearningMaterial,
                props(&[("title", "Intro".into())]),
            )
            .unwrap();
        let slide = g.add_node(NodeKind::Slide, slide_props("text")).unwrap();
        g.add_edge(lm, EdgeKind::Contains, slide).unwrap();
        g.add_edge(lm, EdgeKind::Contains, slide).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn unknown_endpoint_is_not_found() {
        let mut g = KnowledgeGraph::new();
        let lm = g
            .add_node(
                NodeKind::LearningMaterial,
                props(&[("title", "Intro".into())]),
            )
            .unwrap();
        let err = g.add_edge(lm, EdgeKind::Contains, NodeId(99)).unwrap_err();
        assert_eq!(err, GraphError::NotFound { id: NodeId(99) });
    }

    /// Six-node fixture: one MC with three RCs, plus an isolated slide and a
    /// learner.
    fn fixture() -> (KnowledgeGraph, NodeId, [NodeId; 3], NodeId, NodeId) {
        let mut g = KnowledgeGraph::new();
        let mc = g
            .add_node(NodeKind::MainConcept, mc_props("ml", "Machine learning"))
            .unwrap();
        let rc1 = g
            .add_node(
                NodeKind::RelatedConcept,
                props(&[("article_title", "A".into())]),
            )
            .unwrap();
        let rc2 = g
            .add_node(
                NodeKind::RelatedConcept,
                props(&[("article_title", "B".into())]),
            )
            .unwrap();
        let rc3 = g
            .add_node(
                NodeKind::RelatedConcept,
                props(&[("article_title", "C".into())]),
            )
            .unwrap();
        let slide = g.add_node(NodeKind::Slide, slide_props("lonely")).unwrap();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        g.add_edge(mc, EdgeKind::RelatedTo, rc1).unwrap();
        g.add_edge(mc, EdgeKind::RelatedTo, rc2).unwrap();
        g.add_edge(mc, EdgeKind::RelatedTo, rc3).unwrap();
        (g, mc, [rc1, rc2, rc3], slide, learner)
    }

    #[test]
    fn neighbors_enumerates_in_insertion_order() {
        let (g, mc, rcs, slide, _) = fixture();
        let got = g
            .neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out)
            .unwrap();
        assert_eq!(got, rcs.to_vec());
        assert!(g
            .neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)
            .unwrap()
            .is_empty());
        assert_eq!(
            g.neighbor_ids(NodeId(99), EdgeKind::RelatedTo, Direction::Out)
                .unwrap_err(),
            GraphError::NotFound { id: NodeId(99) }
        );
    }

    #[test]
    fn neighbors_is_deterministic() {
        let (g, mc, _, _, _) = fixture();
        let a = g
            .neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out)
            .unwrap();
        let b = g
            .neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mark_dnu_and_neighbors() {
        let mut g = KnowledgeGraph::new();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        let mc1 = g
            .add_node(NodeKind::MainConcept, mc_props("ai", "AI"))
            .unwrap();
        let mc2 = g
            .add_node(NodeKind::MainConcept, mc_props("ml", "ML"))
            .unwrap();
        g.mark_dnu(learner, mc1).unwrap();
        g.mark_dnu(learner, mc2).unwrap();
        assert_eq!(
            g.neighbor_ids(learner, EdgeKind::Dnu, Direction::Out)
                .unwrap(),
            vec![mc1, mc2]
        );

        // Idempotent.
        g.mark_dnu(learner, mc1).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn mark_dnu_rejects_non_mc() {
        let (mut g, _, rcs, _, learner) = fixture();
        let err = g.mark_dnu(learner, rcs[0]).unwrap_err();
        assert!(matches!(err, GraphError::SchemaViolation { .. }), "{err}");
    }

    #[test]
    fn pkg_view_lists_concepts_with_slides() {
        let mut g = KnowledgeGraph::new();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        let slide = g
            .add_node(NodeKind::Slide, slide_props("slide 4 text"))
            .unwrap();
        let mc = g
            .add_node(NodeKind::MainConcept, mc_props("ai", "AI"))
            .unwrap();
        g.add_edge(slide, EdgeKind::ConsistsOf, mc).unwrap();
        g.mark_dnu(learner, mc).unwrap();
        let view = g.pkg_view(learner).unwrap();
        assert_eq!(view.dnu_concepts, vec![mc]);
        assert_eq!(view.containing_slides.get(&mc), Some(&slide));
    }

    #[test]
    fn pkg_view_empty_for_fresh_learner() {
        let (g, _, _, _, learner) = fixture();
        let view = g.pkg_view(learner).unwrap();
        assert!(view.dnu_concepts.is_empty());
    }

    #[test]
    fn pkg_view_two_concepts_same_slide() {
        let mut g = KnowledgeGraph::new();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        let slide = g.add_node(NodeKind::Slide, slide_props("slide")).unwrap();
        let mc1 = g
            .add_node(NodeKind::MainConcept, mc_props("a", "A"))
            .unwrap();
        let mc2 = g
            .add_node(NodeKind::MainConcept, mc_props("b", "B"))
            .unwrap();
        g.add_edge(slide, EdgeKind::ConsistsOf, mc1).unwrap();
        g.add_edge(slide, EdgeKind::ConsistsOf, mc2).unwrap();
        g.mark_dnu(learner, mc1).unwrap();
        g.mark_dnu(learner, mc2).unwrap();
        let view = g.pkg_view(learner).unwrap();
        assert_eq!(view.dnu_concepts, vec![mc1, mc2]);
        assert_eq!(view.containing_slides.get(&mc1), Some(&slide));
        assert_eq!(view.containing_slides.get(&mc2), Some(&slide));
    }

    #[test]
    fn pkg_view_omits_slideless_concepts() {
        let mut g = KnowledgeGraph::new();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        let mc = g
            .add_node(NodeKind::MainConcept, mc_props("a", "A"))
            .unwrap();
        g.mark_dnu(learner, mc).unwrap();
        let view = g.pkg_view(learner).unwrap();
        assert!(view.dnu_concepts.is_empty());
    }

    fn ten_node_fixture() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        let lm = g
            .add_node(
                NodeKind::LearningMaterial,
                props(&[("title", "Intro".into())]),
            )
            .unwrap();
        for i in 0..3 {
            let slide = g
                .add_node(NodeKind::Slide, slide_props(&alloc::format!("slide {i}")))
                .unwrap();
            g.add_edge(lm, EdgeKind::Contains, slide).unwrap();
            let mc = g
                .add_node(
                    NodeKind::MainConcept,
                    mc_props(&alloc::format!("c{i}"), "T"),
                )
                .unwrap();
            g.add_edge(slide, EdgeKind::ConsistsOf, mc).unwrap();
        }
        let wp = g
            .add_node(
                NodeKind::WikiParagraph,
                props(&[
                    ("paragraph_text", "Some paragraph.".into()),
                    ("paragraph_index", PropValue::Int(0)),
                ]),
            )
            .unwrap();
        g.set_embedding(wp, Some(vec![0.6, 0.8])).unwrap();
        let mc3 = NodeId(3);
        g.add_edge(mc3, EdgeKind::HasParagraph, wp).unwrap();
        let learner = g
            .add_node(
                NodeKind::Learner,
                props(&[("learner_name", "Farah".into())]),
            )
            .unwrap();
        g.mark_dnu(learner, mc3).unwrap();
        g
    }

    #[test]
    fn snapshot_roundtrip_is_byte_identical() {
        let g = ten_node_fixture();
        assert_eq!(g.node_count(), 9);
        let bytes = g.snapshot();
        let loaded = KnowledgeGraph::load(&bytes).unwrap();
        assert_eq!(loaded.snapshot(), bytes);
        assert_eq!(loaded.node_count(), g.node_count());
        assert_eq!(loaded.edge_count(), g.edge_count());
    }

    #[test]
    fn load_empty_is_parse_error() {
        let err = KnowledgeGraph::load(b"").unwrap_err();
        assert!(matches!(err, GraphError::Parse { .. }), "{err}");
    }

    #[test]
    fn load_rejects_unknown_version() {
        let err = KnowledgeGraph::load(br#"{"edges":[],"nodes":[],"version":9}"#).unwrap_err();
        assert_eq!(err, GraphError::Version { found: 9 });
    }

    #[test]
    fn parse_error_reports_offset() {
        let bytes = b"{\"version\": 1,\n  garbage";
        match KnowledgeGraph::load(bytes).unwrap_err() {
            GraphError::Parse { offset, .. } => assert!(offset > 0 && offset <= bytes.len()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dnu_edge_survives_roundtrip() {
        let g = ten_node_fixture();
        let loaded = KnowledgeGraph::load(&g.snapshot()).unwrap();
        let learner = loaded
            .nodes()
            .find(|n| n.kind == NodeKind::Learner)
            .map(|n| n.id)
            .unwrap();
        assert_eq!(
            loaded
                .neighbor_ids(learner, EdgeKind::Dnu, Direction::Out)
                .unwrap(),
            vec![NodeId(3)]
        );
    }

    #[test]
    fn embedding_survives_roundtrip() {
        let g = ten_node_fixture();
        let loaded = KnowledgeGraph::load(&g.snapshot()).unwrap();
        let wp = loaded
            .nodes()
            .find(|n| n.kind == NodeKind::WikiParagraph)
            .unwrap();
        assert_eq!(wp.embedding, Some(vec![0.6, 0.8]));
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let (mut g, mc, rcs, _, _) = fixture();
        g.remove_node(rcs[1]).unwrap();
        assert_eq!(
            g.neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out)
                .unwrap(),
            vec![rcs[0], rcs[2]]
        );
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn store_is_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<KnowledgeGraph>();
    }
}
