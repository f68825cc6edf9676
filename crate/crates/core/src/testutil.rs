//! Toy descriptors shared by unit tests.

use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::{
    Bytes, LayerDescriptor, LayerType, ModelDescriptor, ParamValue, QuerySpec, RunPoint, WorkloadSpec,
};

pub fn blob(position: usize, tag: &str, bytes: Bytes) -> LayerDescriptor {
    let mut params = BTreeMap::new();
    params.insert("tag".to_string(), ParamValue::Text(tag.to_string()));
    LayerDescriptor {
        layer_type: LayerType::Other("blob".into()),
        params,
        param_bytes: bytes,
        position,
    }
}

/// A model whose layers are `(tag, bytes)`; equal tags share a signature.
/// `runs` holds (batch, activation bytes, inference ms).
pub fn model(id: &str, layers: &[(&str, Bytes)], load_ms: f64, runs: &[(u32, Bytes, f64)]) -> ModelDescriptor {
    let params: Bytes = layers.iter().map(|l| l.1).sum();
    ModelDescriptor {
        model_id: id.into(),
        family: "toy".into(),
        layers: layers.iter().enumerate().map(|(i, (t, b))| blob(i, t, *b)).collect(),
        load_time_ms: load_ms,
        run_profile: runs
            .iter()
            .map(|&(b, delta, ms)| {
                (
                    b,
                    RunPoint {
                        run_memory_bytes: params + delta,
                        inference_time_ms: ms,
                    },
                )
            })
            .collect(),
        base_accuracy: 0.9,
    }
}

pub fn query(i: usize, model: &str, fps: f64, sla: f64) -> QuerySpec {
    QuerySpec {
        query_id: format!("q{i:02}-{model}"),
        model_id: model.into(),
        feed_id: format!("feed{i}"),
        objects: BTreeSet::from(["car".to_string()]),
        accuracy_target: 0.95,
        fps,
        sla_ms: sla,
        scene: None,
    }
}

pub fn workload(queries: Vec<QuerySpec>, reserve: Bytes) -> WorkloadSpec {
    WorkloadSpec {
        workload_id: "toy".into(),
        queries,
        framework_reserve_bytes: reserve,
    }
}
