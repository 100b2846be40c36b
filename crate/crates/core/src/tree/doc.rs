//! Canonical node-array document for survival trees.
//!
//! ```json
//! {"origin_site":"a","train_size":4,"nodes":[
//!   {"id":0,"feature":"x","threshold":0.5,"left":1,"right":2},
//!   {"id":1,"leaf":true,"times":[1.0],"chf":[0.5],"surv":[0.5],"n":2}, ...]}
//! ```
//!
//! `split_features` is never stored; it is recomputed on load.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Leaf, Node, SurvivalTree};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize)]
struct TreeDocRef<'a, S> {
    origin_site: &'a str,
    train_size: usize,
    nodes: Vec<NodeDocRef<'a, S>>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum NodeDocRef<'a, S> {
    Internal {
        id: usize,
        feature: &'a str,
        threshold: S,
        left: usize,
        right: usize,
    },
    Leaf {
        id: usize,
        leaf: bool,
        times: &'a [S],
        chf: &'a [S],
        #[serde(skip_serializing_if = "Option::is_none")]
        surv: Option<&'a [S]>,
        n: usize,
    },
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct TreeDoc<S> {
    origin_site: String,
    train_size: usize,
    nodes: Vec<NodeDoc<S>>,
}

#[derive(Deserialize)]
#[serde(untagged, bound = "S: Scalar")]
enum NodeDoc<S> {
    Leaf {
        id: usize,
        leaf: bool,
        times: Vec<S>,
        chf: Vec<S>,
        #[serde(default)]
        surv: Option<Vec<S>>,
        n: usize,
    },
    Internal {
        id: usize,
        feature: String,
        threshold: S,
        left: usize,
        right: usize,
    },
}

impl<S: Scalar> Serialize for SurvivalTree<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match n {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => NodeDocRef::Internal {
                    id,
                    feature,
                    threshold: *threshold,
                    left: *left,
                    right: *right,
                },
                Node::Leaf(l) => NodeDocRef::Leaf {
                    id,
                    leaf: true,
                    times: &l.times,
                    chf: &l.chf,
                    surv: l.surv.as_deref(),
                    n: l.n_samples,
                },
            })
            .collect();
        TreeDocRef {
            origin_site: &self.origin_site,
            train_size: self.train_size,
            nodes,
        }
        .serialize(s)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for SurvivalTree<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = TreeDoc::<S>::deserialize(d)?;
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (pos, nd) in doc.nodes.into_iter().enumerate() {
            let (id, node) = match nd {
                NodeDoc::Leaf {
                    id,
                    leaf,
                    times,
                    chf,
                    surv,
                    n,
                } => {
                    if !leaf {
                        return Err(D::Error::custom(format!("node {id}: `leaf` must be true")));
                    }
                    (
                        id,
                        Node::Leaf(Leaf {
                            times,
                            chf,
                            surv,
                            n_samples: n,
                        }),
                    )
                }
                NodeDoc::Internal {
                    id,
                    feature,
                    threshold,
                    left,
                    right,
                } => (
                    id,
                    Node::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                    },
                ),
            };
            if id != pos {
                return Err(D::Error::custom(format!("node at position {pos} has id {id}")));
            }
            nodes.push(node);
        }
        SurvivalTree::from_nodes(nodes, doc.origin_site, doc.train_size).map_err(D::Error::custom)
    }
}

fn bad(msg: String) -> Error {
    Error::InvalidTree(msg)
}

/// Checks the binary-tree shape and the monotonicity of every leaf estimate.
pub(super) fn validate_nodes<S: Scalar>(nodes: &[Node<S>]) -> Result<()> {
    if nodes.is_empty() {
        return Err(bad("tree has no nodes".into()));
    }
    let mut parents = vec![0usize; nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        match node {
            Node::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if feature.is_empty() {
                    return Err(bad(format!("node {i}: empty feature name")));
                }
                if !threshold.is_finite() {
                    return Err(bad(format!("node {i}: non-finite threshold")));
                }
                for &c in [left, right] {
                    // children always follow their parent, which rules out cycles
                    if c <= i || c >= nodes.len() {
                        return Err(bad(format!("node {i}: child {c} out of order or range")));
                    }
                    parents[c] += 1;
                }
                if left == right {
                    return Err(bad(format!("node {i}: identical children")));
                }
            }
            Node::Leaf(l) => validate_leaf(i, l)?,
        }
    }
    if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
        return Err(bad("nodes do not form a single binary tree rooted at 0".into()));
    }
    Ok(())
}

fn validate_leaf<S: Scalar>(i: usize, l: &Leaf<S>) -> Result<()> {
    if l.n_samples == 0 {
        return Err(bad(format!("leaf {i}: zero samples")));
    }
    if l.chf.len() != l.times.len() {
        return Err(bad(format!("leaf {i}: chf length differs from times")));
    }
    if l.times.iter().any(|t| !t.is_finite()) || l.times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(format!("leaf {i}: times not strictly increasing")));
    }
    if l.chf.iter().any(|h| !h.is_finite() || *h < S::zero()) || l.chf.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad(format!("leaf {i}: chf not non-decreasing")));
    }
    if let Some(surv) = &l.surv {
        if surv.len() != l.times.len() {
            return Err(bad(format!("leaf {i}: surv length differs from times")));
        }
        if surv.iter().any(|s| !(*s >= S::zero() && *s <= S::one())) || surv.windows(2).any(|w| w[0] < w[1]) {
            return Err(bad(format!("leaf {i}: surv not non-increasing in [0, 1]")));
        }
    }
    Ok(())
}
