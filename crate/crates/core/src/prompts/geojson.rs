//! Prompt plans as GeoJSON FeatureCollections.
//!
//! Each point becomes a Point feature at its pixel-center world coordinate.
//! Properties carry `label`, `batch`, `index` and the exact pixel `col`/`row`
//! so a plan can be read back without inverting the geotransform. Plan-level
//! metadata lives in a foreign `prompt_plan` member.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Label, PromptPlan, PromptPoint, SamplerConfig};
use crate::error::{Error, Result};
use crate::geo::{CrsId, GeoTransform};

#[derive(Serialize, Deserialize)]
struct PlanMeta {
    seed: u64,
    width: usize,
    height: usize,
    n_batches: usize,
    config: SamplerConfig,
    #[serde(default)]
    warnings: Vec<String>,
}

pub fn plan_to_geojson(plan: &PromptPlan, gt: &GeoTransform, crs: CrsId) -> Value {
    let features: Vec<Value> = plan
        .batches
        .iter()
        .enumerate()
        .flat_map(|(b, batch)| {
            batch.iter().map(move |p| {
                let (x, y) = gt.pixel_to_world(p.col as f64, p.row as f64);
                json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [x, y] },
                    "properties": {
                        "label": p.label,
                        "batch": b,
                        "index": p.index,
                        "col": p.col,
                        "row": p.row,
                    }
                })
            })
        })
        .collect();
    let meta = PlanMeta {
        seed: plan.seed,
        width: plan.width,
        height: plan.height,
        n_batches: plan.batches.len(),
        config: plan.config.clone(),
        warnings: plan.warnings.clone(),
    };
    json!({
        "type": "FeatureCollection",
        "crs": { "type": "name", "properties": { "name": format!("urn:ogc:def:crs:EPSG::{}", crs.code()) } },
        "prompt_plan": meta,
        "features": features,
    })
}

pub fn plan_from_geojson(doc: &Value) -> Result<PromptPlan> {
    let bad = |m: &str| Error::PromptFile(m.to_string());
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("not a FeatureCollection"));
    }
    let meta: PlanMeta = serde_json::from_value(
        doc.get("prompt_plan")
            .cloned()
            .ok_or_else(|| bad("missing prompt_plan member"))?,
    )
    .map_err(|e| bad(&format!("prompt_plan: {e}")))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing features"))?;

    let mut batches = vec![Vec::new(); meta.n_batches];
    for f in features {
        let props = f.get("properties").ok_or_else(|| bad("feature without properties"))?;
        let get_u = |k: &str| -> Result<u64> {
            props
                .get(k)
                .and_then(Value::as_u64)
                .ok_or_else(|| bad(&format!("feature property {k} missing or not an integer")))
        };
        let label: Label = serde_json::from_value(props.get("label").cloned().unwrap_or(Value::Null))
            .map_err(|e| bad(&format!("label: {e}")))?;
        let batch = get_u("batch")? as usize;
        let point = PromptPoint {
            col: get_u("col")? as u32,
            row: get_u("row")? as u32,
            label,
            index: get_u("index")? as u32,
        };
        if point.col as usize >= meta.width || point.row as usize >= meta.height {
            return Err(bad(&format!("point {point:?} outside {}x{} grid", meta.width, meta.height)));
        }
        batches
            .get_mut(batch)
            .ok_or_else(|| bad(&format!("batch {batch} out of range")))?
            .push(point);
    }
    Ok(PromptPlan {
        batches,
        seed: meta.seed,
        config: meta.config,
        width: meta.width,
        height: meta.height,
        warnings: meta.warnings,
    })
}

pub fn write_plan(path: impl AsRef<Path>, plan: &PromptPlan, gt: &GeoTransform, crs: CrsId) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&plan_to_geojson(plan, gt, crs))
        .map_err(|e| Error::Report(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan(path: impl AsRef<Path>) -> Result<PromptPlan> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::PromptFile(format!("{}: {e}", path.display())))?;
    plan_from_geojson(&doc)
}
