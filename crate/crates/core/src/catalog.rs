//! Model and workload descriptors plus byte-level memory accounting.
//!
//! Descriptors are parsed into raw serde shapes first and then validated, so
//! every schema violation can name the model and layer position it came from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

/// Byte counts are exact integers everywhere.
pub type Bytes = u64;

/// Default fixed overhead reserved by the serving framework.
pub const DEFAULT_FRAMEWORK_RESERVE: Bytes = 800_000_000;

/// Divisor used when reporting byte counts in GB.
pub const GB: f64 = 1e9;

pub fn to_gb(bytes: Bytes) -> f64 {
    bytes as f64 / GB
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerType {
    Convolutional,
    Linear,
    BatchNorm,
    Other(String),
}

impl LayerType {
    /// Attribute names a layer of this type must define, or `None` when any set is accepted.
    pub fn required_params(&self) -> Option<&'static [&'static str]> {
        match self {
            LayerType::Convolutional => Some(&[
                "bias",
                "dilation",
                "groups",
                "in_channels",
                "kernel_size",
                "out_channels",
                "padding",
                "stride",
            ]),
            LayerType::Linear => Some(&["bias", "in_features", "out_features"]),
            LayerType::BatchNorm => Some(&["affine", "eps", "momentum", "num_features"]),
            LayerType::Other(_) => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            LayerType::Convolutional => "convolutional",
            LayerType::Linear => "linear",
            LayerType::BatchNorm => "batch_norm",
            LayerType::Other(name) => name,
        }
    }
}

impl fmt::Display for LayerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerType::Other(name) => write!(f, "other({name})"),
            t => f.write_str(t.label()),
        }
    }
}

/// A defining attribute value: a scalar or a tuple of integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Tuple(Vec<i64>),
    Text(String),
}

impl ParamValue {
    /// Stable textual form used for signature hashing.
    pub fn canonical(&self) -> String {
        match self {
            ParamValue::Bool(b) => format!("b:{b}"),
            ParamValue::Int(i) => format!("i:{i}"),
            ParamValue::Float(x) => format!("f:{x:?}"),
            ParamValue::Tuple(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("t:({})", parts.join(","))
            }
            ParamValue::Text(s) => format!("s:{s:?}"),
        }
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<(i64, i64)> for ParamValue {
    fn from(v: (i64, i64)) -> Self {
        ParamValue::Tuple(vec![v.0, v.1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub layer_type: LayerType,
    pub params: BTreeMap<String, ParamValue>,
    pub param_bytes: Bytes,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub run_memory_bytes: Bytes,
    pub inference_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model_id: String,
    pub family: String,
    pub layers: Vec<LayerDescriptor>,
    pub load_time_ms: f64,
    pub run_profile: BTreeMap<u32, RunPoint>,
    pub base_accuracy: f64,
}

impl ModelDescriptor {
    pub fn param_bytes(&self) -> Bytes {
        self.layers.iter().map(|l| l.param_bytes).sum()
    }

    pub fn run_point(&self, batch: u32) -> Result<&RunPoint, CatalogError> {
        self.run_profile
            .get(&batch)
            .ok_or_else(|| CatalogError::MissingBatch {
                model: self.model_id.clone(),
                batch,
            })
    }

    /// Activation bytes needed on top of the parameters while running at `batch`.
    pub fn run_delta(&self, batch: u32) -> Result<Bytes, CatalogError> {
        let point = self.run_point(batch)?;
        Ok(point.run_memory_bytes.saturating_sub(self.param_bytes()))
    }

    pub fn batch_sizes(&self) -> impl Iterator<Item = u32> + '_ {
        self.run_profile.keys().copied()
    }
}

/// Immutable set of model descriptors keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    models: BTreeMap<String, ModelDescriptor>,
}

impl Catalog {
    pub fn from_models(models: Vec<ModelDescriptor>) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for model in models {
            validate_model(&model)?;
            let id = model.model_id.clone();
            if map.insert(id.clone(), model).is_some() {
                return Err(CatalogError::Invalid {
                    model: id,
                    position: None,
                    invariant: "model_id is unique within the catalog".into(),
                });
            }
        }
        Ok(Catalog { models: map })
    }

    pub fn get(&self, model_id: &str) -> Result<&ModelDescriptor, CatalogError> {
        self.models
            .get(model_id)
            .ok_or_else(|| CatalogError::UnknownModel(model_id.to_string()))
    }

    /// Models in ascending `model_id` order.
    pub fn models(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.models.values()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            models: self.models.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }
}

#[derive(Serialize)]
struct CatalogFile {
    models: Vec<ModelDescriptor>,
}

#[derive(Deserialize)]
struct RawCatalog {
    models: Vec<RawModel>,
}

#[derive(Deserialize)]
struct RawModel {
    model_id: String,
    family: String,
    layers: Vec<RawLayer>,
    load_time_ms: f64,
    run_profile: BTreeMap<u32, RawRunPoint>,
    base_accuracy: f64,
}

#[derive(Deserialize)]
struct RawLayer {
    layer_type: LayerType,
    params: BTreeMap<String, ParamValue>,
    param_bytes: i64,
    position: i64,
}

#[derive(Deserialize)]
struct RawRunPoint {
    run_memory_bytes: i64,
    inference_time_ms: f64,
}

pub fn parse_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_catalog_str(&text)
}

pub fn parse_catalog_str(text: &str) -> Result<Catalog, CatalogError> {
    let raw: RawCatalog =
        serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
    let mut models = Vec::with_capacity(raw.models.len());
    for m in raw.models {
        models.push(convert_model(m)?);
    }
    Catalog::from_models(models)
}

fn convert_model(raw: RawModel) -> Result<ModelDescriptor, CatalogError> {
    let invalid = |position: Option<usize>, invariant: &str| CatalogError::Invalid {
        model: raw.model_id.clone(),
        position,
        invariant: invariant.to_string(),
    };
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (index, l) in raw.layers.into_iter().enumerate() {
        if l.param_bytes < 0 {
            return Err(invalid(Some(index), "param_bytes >= 0"));
        }
        if l.position < 0 {
            return Err(invalid(Some(index), "position >= 0"));
        }
        layers.push(LayerDescriptor {
            layer_type: l.layer_type,
            params: l.params,
            param_bytes: l.param_bytes as Bytes,
            position: l.position as usize,
        });
    }
    let mut run_profile = BTreeMap::new();
    for (batch, p) in raw.run_profile {
        if p.run_memory_bytes < 0 {
            return Err(invalid(None, "run_memory_bytes >= 0"));
        }
        run_profile.insert(
            batch,
            RunPoint {
                run_memory_bytes: p.run_memory_bytes as Bytes,
                inference_time_ms: p.inference_time_ms,
            },
        );
    }
    Ok(ModelDescriptor {
        model_id: raw.model_id,
        family: raw.family,
        layers,
        load_time_ms: raw.load_time_ms,
        run_profile,
        base_accuracy: raw.base_accuracy,
    })
}

/// Checks every descriptor invariant, reporting the first violation.
pub fn validate_model(m: &ModelDescriptor) -> Result<(), CatalogError> {
    let invalid = |position: Option<usize>, invariant: String| CatalogError::Invalid {
        model: m.model_id.clone(),
        position,
        invariant,
    };
    if m.model_id.is_empty() {
        return Err(invalid(None, "model_id is non-empty".into()));
    }
    for (index, layer) in m.layers.iter().enumerate() {
        if layer.position != index {
            return Err(invalid(
                Some(layer.position),
                format!("layer positions are 0..n in order (found {} at index {index})", layer.position),
            ));
        }
        if let Some(required) = layer.layer_type.required_params() {
            let keys: Vec<&str> = layer.params.keys().map(String::as_str).collect();
            if keys != required {
                return Err(invalid(
                    Some(index),
                    format!(
                        "params of a {} layer are exactly {{{}}} (found {{{}}})",
                        layer.layer_type,
                        required.join(", "),
                        keys.join(", ")
                    ),
                ));
            }
        }
    }
    if !(m.load_time_ms.is_finite() && m.load_time_ms >= 0.0) {
        return Err(invalid(None, "load_time_ms is finite and >= 0".into()));
    }
    if !(0.0..=1.0).contains(&m.base_accuracy) {
        return Err(invalid(None, "base_accuracy in [0, 1]".into()));
    }
    if m.run_profile.is_empty() {
        return Err(invalid(None, "run_profile has at least one batch size".into()));
    }
    let params = m.param_bytes();
    let mut prev: Option<(u32, &RunPoint)> = None;
    for (&batch, point) in &m.run_profile {
        if batch == 0 {
            return Err(invalid(None, "batch sizes are >= 1".into()));
        }
        if !(point.inference_time_ms.is_finite() && point.inference_time_ms > 0.0) {
            return Err(invalid(None, format!("inference_time_ms > 0 at batch {batch}")));
        }
        if point.run_memory_bytes < params {
            return Err(invalid(
                None,
                format!("param bytes {params} <= run_memory_bytes at batch {batch}"),
            ));
        }
        if let Some((pb, pp)) = prev {
            if point.run_memory_bytes < pp.run_memory_bytes {
                return Err(invalid(
                    None,
                    format!("run_memory non-decreasing in batch size ({pb} -> {batch})"),
                ));
            }
            if point.inference_time_ms < pp.inference_time_ms {
                return Err(invalid(
                    None,
                    format!("inference_time non-decreasing in batch size ({pb} -> {batch})"),
                ));
            }
        }
        prev = Some((batch, point));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub query_id: String,
    pub model_id: String,
    pub feed_id: String,
    pub objects: BTreeSet<String>,
    pub accuracy_target: f64,
    pub fps: f64,
    pub sla_ms: f64,
    /// Scene label of the feed, used only by knob-aware difficulty models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub workload_id: String,
    pub queries: Vec<QuerySpec>,
    pub framework_reserve_bytes: Bytes,
}

impl WorkloadSpec {
    pub fn validate(&self, catalog: &Catalog) -> Result<(), CatalogError> {
        if self.queries.is_empty() {
            return Err(CatalogError::Workload {
                workload: self.workload_id.clone(),
                message: "a workload has at least one query".into(),
            });
        }
        let mut ids = BTreeSet::new();
        for q in &self.queries {
            catalog.get(&q.model_id)?;
            let bad = |message: &str| CatalogError::Workload {
                workload: self.workload_id.clone(),
                message: format!("query {}: {message}", q.query_id),
            };
            if !ids.insert(q.query_id.as_str()) {
                return Err(bad("query_id is unique"));
            }
            if !(q.accuracy_target > 0.0 && q.accuracy_target <= 1.0) {
                return Err(bad("accuracy_target in (0, 1]"));
            }
            if !(q.fps.is_finite() && q.fps > 0.0) {
                return Err(bad("fps > 0"));
            }
            if !(q.sla_ms.is_finite() && q.sla_ms > 0.0) {
                return Err(bad("sla_ms > 0"));
            }
        }
        Ok(())
    }

    pub fn query(&self, query_id: &str) -> Option<&QuerySpec> {
        self.queries.iter().find(|q| q.query_id == query_id)
    }
}

/// Values applied to workload rows that leave a column out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadDefaults {
    pub accuracy_target: f64,
    pub fps: f64,
    pub sla_ms: f64,
    pub framework_reserve_bytes: Bytes,
}

impl Default for WorkloadDefaults {
    fn default() -> Self {
        WorkloadDefaults {
            accuracy_target: 0.95,
            fps: 30.0,
            sla_ms: 100.0,
            framework_reserve_bytes: DEFAULT_FRAMEWORK_RESERVE,
        }
    }
}

#[derive(Debug, Deserialize)]
struct WorkloadRow {
    model: String,
    feed: String,
    objects: String,
    accuracy_target: Option<f64>,
    fps: Option<f64>,
    sla_ms: Option<f64>,
    scene: Option<String>,
}

/// Reads a workload table with columns `model,feed,objects` and optional
/// `accuracy_target,fps,sla_ms,scene`. Objects are separated by commas or semicolons.
pub fn parse_workload(
    path: impl AsRef<Path>,
    defaults: &WorkloadDefaults,
) -> Result<WorkloadSpec, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "workload".into());
    parse_workload_str(&id, &text, defaults)
}

pub fn parse_workload_str(
    workload_id: &str,
    text: &str,
    defaults: &WorkloadDefaults,
) -> Result<WorkloadSpec, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut queries = Vec::new();
    for (index, row) in reader.deserialize::<WorkloadRow>().enumerate() {
        let row = row.map_err(|e| CatalogError::Workload {
            workload: workload_id.to_string(),
            message: format!("row {}: {e}", index + 1),
        })?;
        let objects = row
            .objects
            .split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        queries.push(QuerySpec {
            query_id: format!("q{index:02}-{}", row.model),
            model_id: row.model,
            feed_id: row.feed,
            objects,
            accuracy_target: row.accuracy_target.unwrap_or(defaults.accuracy_target),
            fps: row.fps.unwrap_or(defaults.fps),
            sla_ms: row.sla_ms.unwrap_or(defaults.sla_ms),
            scene: row.scene.filter(|s| !s.is_empty()),
        });
    }
    Ok(WorkloadSpec {
        workload_id: workload_id.to_string(),
        queries,
        framework_reserve_bytes: defaults.framework_reserve_bytes,
    })
}

pub fn workload_to_csv(w: &WorkloadSpec) -> String {
    let mut out = String::from("model,feed,objects,accuracy_target,fps,sla_ms\n");
    for q in &w.queries {
        let objects: Vec<&str> = q.objects.iter().map(String::as_str).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            q.model_id,
            q.feed_id,
            objects.join(";"),
            q.accuracy_target,
            q.fps,
            q.sla_ms
        ));
    }
    out
}

/// Total parameter bytes with one copy per query.
pub fn workload_param_bytes(w: &WorkloadSpec, catalog: &Catalog) -> Result<Bytes, CatalogError> {
    let mut total = 0;
    for q in &w.queries {
        total += catalog.get(&q.model_id)?.param_bytes();
    }
    Ok(total)
}

/// The three simulated memory budgets plus the no-swap reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySettings {
    pub min: Bytes,
    pub pct50: Bytes,
    pub pct75: Bytes,
    pub no_swap: Bytes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryLevel {
    Min,
    Pct50,
    Pct75,
    NoSwap,
}

impl MemoryLevel {
    pub const SIMULATED: [MemoryLevel; 3] = [MemoryLevel::Min, MemoryLevel::Pct50, MemoryLevel::Pct75];

    pub fn label(self) -> &'static str {
        match self {
            MemoryLevel::Min => "min",
            MemoryLevel::Pct50 => "50",
            MemoryLevel::Pct75 => "75",
            MemoryLevel::NoSwap => "no_swap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min" => Some(MemoryLevel::Min),
            "50" | "pct50" => Some(MemoryLevel::Pct50),
            "75" | "pct75" => Some(MemoryLevel::Pct75),
            "no_swap" | "noswap" | "100" => Some(MemoryLevel::NoSwap),
            _ => None,
        }
    }
}

impl MemorySettings {
    pub fn get(&self, level: MemoryLevel) -> Bytes {
        match level {
            MemoryLevel::Min => self.min,
            MemoryLevel::Pct50 => self.pct50,
            MemoryLevel::Pct75 => self.pct75,
            MemoryLevel::NoSwap => self.no_swap,
        }
    }
}

/// Memory budgets for a workload. `batch_of` maps a query id to its batch
/// size for the no-swap run delta.
///
/// The 50% and 75% settings sit that far along the way from `min` to
/// `no_swap`, which keeps every setting at least `min`.
pub fn memory_settings(
    w: &WorkloadSpec,
    catalog: &Catalog,
    batch_of: &dyn Fn(&str) -> u32,
) -> Result<MemorySettings, CatalogError> {
    let reserve = w.framework_reserve_bytes;
    let mut largest_bs1 = 0;
    let mut params = 0;
    let mut worst_delta = 0;
    for q in &w.queries {
        let m = catalog.get(&q.model_id)?;
        largest_bs1 = largest_bs1.max(m.run_point(1)?.run_memory_bytes);
        params += m.param_bytes();
        worst_delta = worst_delta.max(m.run_delta(batch_of(&q.query_id))?);
    }
    let min = reserve + largest_bs1;
    let no_swap = (reserve + params + worst_delta).max(min);
    let span = no_swap - min;
    Ok(MemorySettings {
        min,
        pct50: min + span / 2,
        pct75: min + span * 3 / 4,
        no_swap,
    })
}
