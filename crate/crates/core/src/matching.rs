//! Architectural layer signatures, share groups and savings bounds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::catalog::{workload_param_bytes, Bytes, Catalog, LayerDescriptor, LayerType, ModelDescriptor, WorkloadSpec};
use crate::error::{CatalogError, MatchError};

/// Identity of a layer's architecture, independent of weights and position.
///
/// Equality and ordering use the canonical text; the 64-bit hash is a stable
/// digest of that text used for display and tie-breaking.
#[derive(Clone)]
pub struct LayerSignature {
    canonical: Arc<str>,
    hash: u64,
}

impl LayerSignature {
    pub fn of(layer: &LayerDescriptor) -> Self {
        let mut text = layer.layer_type.to_string();
        text.push('|');
        let parts: Vec<String> = layer
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", v.canonical()))
            .collect();
        text.push_str(&parts.join(";"));
        Self::from_canonical(text)
    }

    fn from_canonical(text: String) -> Self {
        let digest = Sha256::digest(text.as_bytes());
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        LayerSignature {
            canonical: text.into(),
            hash: u64::from_be_bytes(first),
        }
    }

    pub fn hash64(&self) -> u64 {
        self.hash
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn short(&self) -> String {
        format!("{:016x}", self.hash)
    }
}

pub fn signature(layer: &LayerDescriptor) -> LayerSignature {
    LayerSignature::of(layer)
}

impl PartialEq for LayerSignature {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for LayerSignature {}

impl Hash for LayerSignature {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl Ord for LayerSignature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hash
            .cmp(&other.hash)
            .then_with(|| self.canonical.cmp(&other.canonical))
    }
}

impl PartialOrd for LayerSignature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for LayerSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.short(), self.canonical)
    }
}

impl Serialize for LayerSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for LayerSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Ok(Self::from_canonical(text))
    }
}

/// One layer inside one query's model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Appearance {
    pub query_id: String,
    pub position: usize,
}

/// A group is the k-th occurrence of a signature in every query that has at
/// least k+1 occurrences of it. Repeated blocks inside one model therefore
/// pair up position by position with the other models rather than collapse
/// onto a single weight copy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub signature: LayerSignature,
    pub occurrence: usize,
}

impl GroupKey {
    pub fn id(&self) -> String {
        format!("{}.{}", self.signature.short(), self.occurrence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareGroup {
    pub key: GroupKey,
    pub layer_type: LayerType,
    /// Sorted by query registration order.
    pub appearances: Vec<Appearance>,
    pub per_appearance_bytes: Bytes,
    pub total_bytes: Bytes,
    pub reclaimable_bytes: Bytes,
}

impl ShareGroup {
    pub fn id(&self) -> String {
        self.key.id()
    }

    pub fn size(&self) -> usize {
        self.appearances.len()
    }
}

/// Ordering used by the merging heuristic: heaviest total first.
pub fn group_order(a: &ShareGroup, b: &ShareGroup) -> Ordering {
    b.total_bytes
        .cmp(&a.total_bytes)
        .then_with(|| b.per_appearance_bytes.cmp(&a.per_appearance_bytes))
        .then_with(|| a.key.signature.hash64().cmp(&b.key.signature.hash64()))
        .then_with(|| a.key.cmp(&b.key))
}

/// Signatures of every layer of a model, in position order.
pub fn model_signatures(m: &ModelDescriptor) -> Vec<LayerSignature> {
    m.layers.iter().map(LayerSignature::of).collect()
}

/// Count of each signature in a model together with its per-layer bytes.
pub fn signature_profile(m: &ModelDescriptor) -> BTreeMap<LayerSignature, (usize, Bytes)> {
    let mut out: BTreeMap<LayerSignature, (usize, Bytes)> = BTreeMap::new();
    for layer in &m.layers {
        let e = out.entry(LayerSignature::of(layer)).or_insert((0, layer.param_bytes));
        e.0 += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overlap {
    pub model_a: String,
    pub model_b: String,
    pub shared_layers: usize,
    pub layers_a: usize,
    pub layers_b: usize,
    pub fraction: f64,
    pub by_type: BTreeMap<String, usize>,
}

/// Shared layer count between two models, matching repeated signatures up to
/// the smaller multiplicity.
pub fn pairwise_overlap(a: &ModelDescriptor, b: &ModelDescriptor) -> Overlap {
    let pa = signature_profile(a);
    let pb = signature_profile(b);
    let mut types: BTreeMap<LayerSignature, &LayerType> = BTreeMap::new();
    for layer in &a.layers {
        types.entry(LayerSignature::of(layer)).or_insert(&layer.layer_type);
    }
    let mut shared = 0;
    let mut by_type: BTreeMap<String, usize> = BTreeMap::new();
    for (sig, (ca, _)) in &pa {
        if let Some((cb, _)) = pb.get(sig) {
            let n = (*ca).min(*cb);
            shared += n;
            *by_type.entry(types[sig].label().to_string()).or_default() += n;
        }
    }
    let smaller = a.layers.len().min(b.layers.len());
    Overlap {
        model_a: a.model_id.clone(),
        model_b: b.model_id.clone(),
        shared_layers: shared,
        layers_a: a.layers.len(),
        layers_b: b.layers.len(),
        fraction: if smaller == 0 { 0.0 } else { shared as f64 / smaller as f64 },
        by_type,
    }
}

/// Every share group of a workload, heaviest first.
pub fn enumerate_groups(w: &WorkloadSpec, catalog: &Catalog) -> Result<Vec<ShareGroup>, CatalogError> {
    let mut sig_cache: BTreeMap<&str, Vec<LayerSignature>> = BTreeMap::new();
    let mut groups: BTreeMap<GroupKey, (LayerType, Bytes, Vec<Appearance>)> = BTreeMap::new();
    for q in &w.queries {
        let model = catalog.get(&q.model_id)?;
        let sigs = sig_cache
            .entry(model.model_id.as_str())
            .or_insert_with(|| model_signatures(model));
        let mut seen: BTreeMap<&LayerSignature, usize> = BTreeMap::new();
        for (layer, sig) in model.layers.iter().zip(sigs.iter()) {
            let k = seen.entry(sig).or_insert(0);
            let key = GroupKey {
                signature: sig.clone(),
                occurrence: *k,
            };
            *k += 1;
            groups
                .entry(key)
                .or_insert_with(|| (layer.layer_type.clone(), layer.param_bytes, Vec::new()))
                .2
                .push(Appearance {
                    query_id: q.query_id.clone(),
                    position: layer.position,
                });
        }
    }
    let mut out: Vec<ShareGroup> = groups
        .into_iter()
        .filter(|(_, (_, _, apps))| apps.len() >= 2)
        .map(|(key, (layer_type, bytes, appearances))| {
            let n = appearances.len() as Bytes;
            ShareGroup {
                key,
                layer_type,
                appearances,
                per_appearance_bytes: bytes,
                total_bytes: bytes * n,
                reclaimable_bytes: bytes * (n - 1),
            }
        })
        .collect();
    out.sort_by(group_order);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub bytes: Bytes,
    pub fraction: f64,
}

impl Savings {
    pub fn new(bytes: Bytes, total: Bytes) -> Self {
        Savings {
            bytes,
            fraction: if total == 0 { 0.0 } else { bytes as f64 / total as f64 },
        }
    }
}

/// Savings when every group is fully shared.
pub fn optimal_savings(w: &WorkloadSpec, catalog: &Catalog) -> Result<Savings, CatalogError> {
    let groups = enumerate_groups(w, catalog)?;
    let bytes = groups.iter().map(|g| g.reclaimable_bytes).sum();
    Ok(Savings::new(bytes, workload_param_bytes(w, catalog)?))
}

/// Savings from sharing only common frozen prefixes. Models missing from
/// `frozen_prefix` keep nothing frozen.
pub fn stem_share_savings(
    w: &WorkloadSpec,
    catalog: &Catalog,
    frozen_prefix: &BTreeMap<String, usize>,
) -> Result<Bytes, MatchError> {
    #[derive(Default)]
    struct Node {
        count: u64,
        bytes: Bytes,
        children: BTreeMap<LayerSignature, Node>,
    }
    fn total(node: &Node) -> Bytes {
        node.children
            .values()
            .map(|c| c.bytes * (c.count - 1) + total(c))
            .sum()
    }
    let mut root = Node::default();
    for q in &w.queries {
        let model = catalog.get(&q.model_id)?;
        let prefix = frozen_prefix.get(&model.model_id).copied().unwrap_or(0);
        if prefix > model.layers.len() {
            return Err(MatchError::PrefixTooLong {
                model: model.model_id.clone(),
                prefix,
                layers: model.layers.len(),
            });
        }
        let mut node = &mut root;
        for layer in &model.layers[..prefix] {
            node = node.children.entry(LayerSignature::of(layer)).or_default();
            node.count += 1;
            node.bytes = layer.param_bytes;
        }
    }
    Ok(total(&root))
}

/// Points (layer index fraction, cumulative memory fraction) for layers in
/// position order. A model without parameter bytes yields the diagonal.
pub fn memory_cdf(m: &ModelDescriptor) -> Vec<(f64, f64)> {
    let n = m.layers.len();
    let total = m.param_bytes();
    let mut acc = 0;
    m.layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            acc += l.param_bytes;
            let x = (i + 1) as f64 / n as f64;
            let y = if total == 0 { x } else { acc as f64 / total as f64 };
            (x, y)
        })
        .collect()
}

/// Fraction of parameter bytes held by the heaviest `ceil(fraction * n)` layers.
pub fn top_layer_share(m: &ModelDescriptor, fraction: f64) -> f64 {
    let total = m.param_bytes();
    if total == 0 || m.layers.is_empty() {
        return 0.0;
    }
    let k = ((fraction * m.layers.len() as f64).ceil() as usize).clamp(1, m.layers.len());
    let mut bytes: Vec<Bytes> = m.layers.iter().map(|l| l.param_bytes).collect();
    bytes.sort_unstable_by(|a, b| b.cmp(a));
    bytes[..k].iter().sum::<Bytes>() as f64 / total as f64
}

/// Optimal savings over a multiset of models given by signature profiles,
/// without building a workload. Used for scoring many candidates.
pub fn optimal_savings_of_profiles(profiles: &[&BTreeMap<LayerSignature, (usize, Bytes)>]) -> Savings {
    let mut max_mult: BTreeMap<&LayerSignature, (usize, Bytes)> = BTreeMap::new();
    let mut total = 0;
    for p in profiles {
        for (sig, &(count, bytes)) in p.iter() {
            total += bytes * count as Bytes;
            let e = max_mult.entry(sig).or_insert((0, bytes));
            e.0 = e.0.max(count);
        }
    }
    let kept: Bytes = max_mult.values().map(|&(c, b)| b * c as Bytes).sum();
    Savings::new(total - kept, total)
}
