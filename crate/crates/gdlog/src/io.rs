//! File formats: schemas and probabilistic tables as JSON, instances as
//! JSON or CSV.
//!
//! Instance JSON maps relation names to arrays of rows keyed by attribute
//! name: `{"Temp": [{"room": 4108, "time": "t1", "celsius": 20.2}]}`.
//! A CSV file holds one relation, named by the file stem, with the header
//! naming attributes in any order; repeated rows raise the multiplicity in
//! bag mode. A probabilistic table file holds one object per relation (or an
//! array of them): `{"relation": "Temp", "rows": [{"exists_p": 0.3,
//! "cells": [{"const": 4108}, {"dist": "normal", "params": {"mean": 20.2,
//! "var": 0.1}}]}]}`; `exists_p` defaults to 1.

use std::fs;
use std::path::Path;

use serde_json::Value as Json;

use crate::dist::DistSpec;
use crate::fact::{make_fact, Instance, InstanceMode};
use crate::mc::{ProbCell, ProbRow, ProbTable, TableRelation};
use crate::schema::{RelationSchema, Schema, SchemaError};
use crate::value::{AttrType, Value};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
    #[error("{path}: {source}")]
    Schema { path: String, source: SchemaError },
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

fn format_err(path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), detail: detail.into() }
}

pub fn load_schema(path: &Path) -> Result<Schema, IoError> {
    let text = read(path)?;
    let parsed: Schema = serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
    Schema::new(parsed.relations)
        .map_err(|source| IoError::Schema { path: path.display().to_string(), source })
}

fn value_from_json(ty: AttrType, v: &Json) -> Result<Value, String> {
    match ty {
        AttrType::Real => match v.as_f64() {
            Some(x) => Value::real(x).map_err(|e| e.to_string()),
            None => Err(format!("expected a number, got {v}")),
        },
        AttrType::Integer => match v.as_i64() {
            Some(i) => Ok(Value::Integer(i)),
            None => Err(format!("expected an integer, got {v}")),
        },
        AttrType::String => match v.as_str() {
            Some(s) => Ok(Value::String(s.to_string())),
            None => Err(format!("expected a string, got {v}")),
        },
        AttrType::Boolean => match v.as_bool() {
            Some(b) => Ok(Value::Boolean(b)),
            None => Err(format!("expected a boolean, got {v}")),
        },
    }
}

fn row_from_json(
    rel: &RelationSchema,
    row: &Json,
    path: &Path,
) -> Result<Vec<Value>, IoError> {
    let obj = row
        .as_object()
        .ok_or_else(|| format_err(path, format!("row of {} is not an object", rel.name)))?;
    for key in obj.keys() {
        if rel.attr_index(key).is_none() {
            return Err(format_err(
                path,
                format!("relation {} has no attribute {key}", rel.name),
            ));
        }
    }
    let mut values = Vec::with_capacity(rel.arity());
    for attr in &rel.attrs {
        let cell = obj.get(&attr.name).ok_or_else(|| {
            format_err(path, format!("row of {} is missing attribute {}", rel.name, attr.name))
        })?;
        let v = value_from_json(attr.ty, cell).map_err(|detail| {
            format_err(path, format!("{}.{}: {detail}", rel.name, attr.name))
        })?;
        values.push(v);
    }
    Ok(values)
}

pub fn load_instance_json(
    path: &Path,
    schema: &Schema,
    mode: InstanceMode,
) -> Result<Instance, IoError> {
    let text = read(path)?;
    let json: Json = serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
    let obj = json
        .as_object()
        .ok_or_else(|| format_err(path, "expected an object keyed by relation name"))?;
    let mut instance = match mode {
        InstanceMode::Bag => Instance::bag(),
        InstanceMode::Set => Instance::set(),
    };
    for (rel_name, rows) in obj {
        let rel = schema
            .require_relation(rel_name)
            .map_err(|source| IoError::Schema { path: path.display().to_string(), source })?;
        let rows = rows
            .as_array()
            .ok_or_else(|| format_err(path, format!("{rel_name} is not an array of rows")))?;
        for row in rows {
            let values = row_from_json(rel, row, path)?;
            let fact = make_fact(schema, rel_name, values)
                .map_err(|source| IoError::Schema { path: path.display().to_string(), source })?;
            instance.insert(fact);
        }
    }
    Ok(instance)
}

fn parse_csv_cell(ty: AttrType, text: &str) -> Result<Value, String> {
    match ty {
        AttrType::Real => text
            .trim()
            .parse::<f64>()
            .map_err(|e| e.to_string())
            .and_then(|x| Value::real(x).map_err(|e| e.to_string())),
        AttrType::Integer => {
            text.trim().parse::<i64>().map(Value::Integer).map_err(|e| e.to_string())
        }
        AttrType::String => Ok(Value::String(text.to_string())),
        AttrType::Boolean => match text.trim() {
            "true" => Ok(Value::Boolean(true)),
            "false" => Ok(Value::Boolean(false)),
            other => Err(format!("expected true or false, got {other}")),
        },
    }
}

/// Loads one relation from a CSV file named after it; repeated rows
/// accumulate multiplicity.
pub fn load_instance_csv(path: &Path, schema: &Schema) -> Result<Instance, IoError> {
    let rel_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| format_err(path, "cannot derive a relation name from the file name"))?
        .to_string();
    let rel = schema
        .require_relation(&rel_name)
        .map_err(|source| IoError::Schema { path: path.display().to_string(), source })?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
    let headers = reader
        .headers()
        .map_err(|source| IoError::Csv { path: path.display().to_string(), source })?
        .clone();
    let mut columns = Vec::with_capacity(rel.arity());
    for attr in &rel.attrs {
        let idx = headers
            .iter()
            .position(|h| h == attr.name)
            .ok_or_else(|| format_err(path, format!("missing column {}", attr.name)))?;
        columns.push(idx);
    }
    if headers.len() != rel.arity() {
        return Err(format_err(
            path,
            format!("expected {} columns, got {}", rel.arity(), headers.len()),
        ));
    }

    let mut instance = Instance::bag();
    for record in reader.records() {
        let record =
            record.map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
        let mut values = Vec::with_capacity(rel.arity());
        for (attr, &col) in rel.attrs.iter().zip(&columns) {
            let text = record.get(col).unwrap_or("");
            let v = parse_csv_cell(attr.ty, text)
                .map_err(|detail| format_err(path, format!("column {}: {detail}", attr.name)))?;
            values.push(v);
        }
        let fact = make_fact(schema, &rel_name, values)
            .map_err(|source| IoError::Schema { path: path.display().to_string(), source })?;
        instance.insert(fact);
    }
    Ok(instance)
}

/// Loads input facts from a JSON file, a CSV file, or a directory of CSV
/// files.
pub fn load_edb(path: &Path, schema: &Schema) -> Result<Instance, IoError> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|source| IoError::Read { path: path.display().to_string(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("csv"))
            .collect();
        files.sort();
        let mut instance = Instance::bag();
        for file in files {
            for (fact, count) in load_instance_csv(&file, schema)?.iter_counted() {
                for _ in 0..count {
                    instance.insert(fact.clone());
                }
            }
        }
        return Ok(instance);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_instance_csv(path, schema),
        _ => load_instance_json(path, schema, InstanceMode::Bag),
    }
}

fn dist_from_json(path: &Path, cell: &Json) -> Result<ProbCell, IoError> {
    let obj = cell.as_object().unwrap();
    let name = obj
        .get("dist")
        .and_then(|v| v.as_str())
        .ok_or_else(|| format_err(path, "dist must be a distribution name"))?;
    let params_json = obj
        .get("params")
        .and_then(|v| v.as_object())
        .ok_or_else(|| format_err(path, format!("{name} needs a params object")))?;

    let json_number = |key: &str, v: &Json| -> Result<Value, IoError> {
        if let Some(i) = v.as_i64() {
            Ok(Value::Integer(i))
        } else if let Some(x) = v.as_f64() {
            Value::real(x).map_err(|e| format_err(path, format!("{name}.{key}: {e}")))
        } else {
            Err(format_err(path, format!("{name}.{key} must be a number, got {v}")))
        }
    };

    if name == "discrete" {
        let list = |key: &str| -> Result<Vec<Json>, IoError> {
            params_json
                .get(key)
                .and_then(|v| v.as_array())
                .cloned()
                .ok_or_else(|| format_err(path, format!("discrete needs a {key} array")))
        };
        let mut values = Vec::new();
        for v in list("values")? {
            let val = if let Some(i) = v.as_i64() {
                Value::Integer(i)
            } else if let Some(x) = v.as_f64() {
                Value::real(x).map_err(|e| format_err(path, format!("discrete value: {e}")))?
            } else if let Some(s) = v.as_str() {
                Value::String(s.to_string())
            } else if let Some(b) = v.as_bool() {
                Value::Boolean(b)
            } else {
                return Err(format_err(path, format!("unsupported discrete value {v}")));
            };
            values.push(val);
        }
        let mut weights = Vec::new();
        for w in list("weights")? {
            match w.as_f64() {
                Some(x) => weights.push(x),
                None => {
                    return Err(format_err(path, format!("discrete weight {w} is not a number")))
                }
            }
        }
        let extra: Vec<&String> =
            params_json.keys().filter(|k| *k != "values" && *k != "weights").collect();
        if !extra.is_empty() {
            return Err(format_err(path, format!("unexpected discrete parameter {}", extra[0])));
        }
        return Ok(ProbCell::Dist {
            spec: DistSpec::Discrete { values, weights },
            params: vec![],
        });
    }

    let spec = DistSpec::family_from_name(name)
        .ok_or_else(|| format_err(path, format!("unknown distribution {name}")))?;
    let mut params = Vec::new();
    for want in spec.param_names() {
        let v = params_json
            .get(*want)
            .ok_or_else(|| format_err(path, format!("{name} is missing parameter {want}")))?;
        params.push(json_number(want, v)?);
    }
    if params_json.len() != spec.param_names().len() {
        let extra = params_json
            .keys()
            .find(|k| !spec.param_names().contains(&k.as_str()))
            .cloned()
            .unwrap_or_default();
        return Err(format_err(path, format!("unexpected parameter {extra} for {name}")));
    }
    Ok(ProbCell::Dist { spec, params })
}

fn cell_from_json(path: &Path, cell: &Json) -> Result<ProbCell, IoError> {
    let obj = cell
        .as_object()
        .ok_or_else(|| format_err(path, format!("cell {cell} is not an object")))?;
    if obj.contains_key("const") {
        let v = &obj["const"];
        let value = if let Some(i) = v.as_i64() {
            Value::Integer(i)
        } else if let Some(x) = v.as_f64() {
            Value::real(x).map_err(|e| format_err(path, format!("const cell: {e}")))?
        } else if let Some(s) = v.as_str() {
            Value::String(s.to_string())
        } else if let Some(b) = v.as_bool() {
            Value::Boolean(b)
        } else {
            return Err(format_err(path, format!("unsupported const cell {v}")));
        };
        Ok(ProbCell::Const(value))
    } else if obj.contains_key("dist") {
        dist_from_json(path, cell)
    } else {
        Err(format_err(path, format!("cell {cell} has neither const nor dist")))
    }
}

fn table_relation_from_json(path: &Path, json: &Json) -> Result<TableRelation, IoError> {
    let obj = json
        .as_object()
        .ok_or_else(|| format_err(path, "expected a table object"))?;
    let relation = obj
        .get("relation")
        .and_then(|v| v.as_str())
        .ok_or_else(|| format_err(path, "table needs a relation name"))?
        .to_string();
    let rows_json = obj
        .get("rows")
        .and_then(|v| v.as_array())
        .ok_or_else(|| format_err(path, format!("table {relation} needs a rows array")))?;
    let mut rows = Vec::with_capacity(rows_json.len());
    for row in rows_json {
        let row_obj = row
            .as_object()
            .ok_or_else(|| format_err(path, format!("row {row} is not an object")))?;
        let exists_p = match row_obj.get("exists_p") {
            None => 1.0,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| format_err(path, format!("exists_p {v} is not a number")))?,
        };
        let cells_json = row_obj
            .get("cells")
            .and_then(|v| v.as_array())
            .ok_or_else(|| format_err(path, "row needs a cells array"))?;
        let mut cells = Vec::with_capacity(cells_json.len());
        for cell in cells_json {
            cells.push(cell_from_json(path, cell)?);
        }
        rows.push(ProbRow { exists_p, cells });
    }
    Ok(TableRelation { relation, rows })
}

/// Loads a probabilistic table file: one relation object or an array of
/// them. Schema checking happens when the table is attached to a source.
pub fn load_table(path: &Path) -> Result<ProbTable, IoError> {
    let text = read(path)?;
    let json: Json = serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
    let mut table = ProbTable::default();
    match &json {
        Json::Array(items) => {
            for item in items {
                table.relations.push(table_relation_from_json(path, item)?);
            }
        }
        _ => table.relations.push(table_relation_from_json(path, &json)?),
    }
    Ok(table)
}

/// Renders an instance as the same JSON shape `load_instance_json` reads.
/// Rows with multiplicity appear once per occurrence.
pub fn instance_to_json(instance: &Instance, schema: &Schema) -> Json {
    let mut relations = serde_json::Map::new();
    for (fact, count) in instance.iter_counted() {
        let rows = relations
            .entry(fact.relation.clone())
            .or_insert_with(|| Json::Array(vec![]));
        let row = match schema.relation(&fact.relation) {
            Some(rel) => {
                let mut obj = serde_json::Map::new();
                for (attr, v) in rel.attrs.iter().zip(&fact.values) {
                    obj.insert(attr.name.clone(), serde_json::to_value(v).unwrap());
                }
                Json::Object(obj)
            }
            None => Json::Array(
                fact.values.iter().map(|v| serde_json::to_value(v).unwrap()).collect(),
            ),
        };
        if let Json::Array(arr) = rows {
            for _ in 0..count {
                arr.push(row.clone());
            }
        }
    }
    Json::Object(relations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::RelationKind;
    use std::io::Write;

    fn temp_schema_json() -> &'static str {
        r#"{
          "relations": [
            {"name": "Temp", "kind": "extensional", "attrs": [
              {"name": "room", "type": "integer"},
              {"name": "time", "type": "string"},
              {"name": "celsius", "type": "real"}
            ]},
            {"name": "AvTemp", "kind": "intensional", "attrs": [
              {"name": "room", "type": "integer"},
              {"name": "avg", "type": "real"}
            ]}
          ]
        }"#
    }

    fn write_temp(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("gdlog-io-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn schema_round_trip() {
        let dir = tmpdir("schema");
        let path = write_temp(&dir, "schema.json", temp_schema_json());
        let schema = load_schema(&path).unwrap();
        assert_eq!(schema.relations.len(), 2);
        assert_eq!(schema.relations[0].kind, RelationKind::Extensional);
        assert_eq!(schema.relations[0].attrs[2].ty, AttrType::Real);
    }

    #[test]
    fn duplicate_relation_in_schema_rejected() {
        let dir = tmpdir("schema-dup");
        let path = write_temp(
            &dir,
            "bad.json",
            r#"{"relations": [
                {"name": "R", "kind": "extensional", "attrs": [{"name": "a", "type": "real"}]},
                {"name": "R", "kind": "extensional", "attrs": [{"name": "a", "type": "real"}]}
            ]}"#,
        );
        let err = load_schema(&path).unwrap_err();
        assert!(matches!(err, IoError::Schema { .. }));
    }

    #[test]
    fn instance_json_round_trip() {
        let dir = tmpdir("inst");
        let schema_path = write_temp(&dir, "schema.json", temp_schema_json());
        let schema = load_schema(&schema_path).unwrap();
        let path = write_temp(
            &dir,
            "edb.json",
            r#"{"Temp": [
                {"room": 4108, "time": "t1", "celsius": 20.2},
                {"room": 4108, "time": "t1", "celsius": 20.2},
                {"room": 4109, "time": "t2", "celsius": 22}
            ]}"#,
        );
        let instance = load_instance_json(&path, &schema, InstanceMode::Bag).unwrap();
        assert_eq!(instance.total_count(), 3);
        assert_eq!(instance.support_size(), 2);

        let json = instance_to_json(&instance, &schema);
        let rows = json["Temp"].as_array().unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2]["celsius"], serde_json::json!(22.0));
    }

    #[test]
    fn instance_json_type_errors_are_positioned() {
        let dir = tmpdir("inst-bad");
        let schema_path = write_temp(&dir, "schema.json", temp_schema_json());
        let schema = load_schema(&schema_path).unwrap();
        let path = write_temp(&dir, "bad.json", r#"{"Temp": [{"room": "x", "time": "t", "celsius": 1}]}"#);
        let err = load_instance_json(&path, &schema, InstanceMode::Bag).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Temp.room"), "message was: {msg}");
    }

    #[test]
    fn csv_loads_by_header_name() {
        let dir = tmpdir("csv");
        let schema_path = write_temp(&dir, "schema.json", temp_schema_json());
        let schema = load_schema(&schema_path).unwrap();
        let path = write_temp(
            &dir,
            "Temp.csv",
            "time,room,celsius\nt1,4108,20.2\nt1,4108,20.2\nt2,4109,22\n",
        );
        let instance = load_instance_csv(&path, &schema).unwrap();
        assert_eq!(instance.total_count(), 3);
        assert_eq!(instance.support_size(), 2);
    }

    #[test]
    fn csv_missing_column_reported() {
        let dir = tmpdir("csv-bad");
        let schema_path = write_temp(&dir, "schema.json", temp_schema_json());
        let schema = load_schema(&schema_path).unwrap();
        let path = write_temp(&dir, "Temp.csv", "room,time\n4108,t1\n");
        let err = load_instance_csv(&path, &schema).unwrap_err();
        assert!(err.to_string().contains("celsius"));
    }

    #[test]
    fn table_json_accepts_object_or_array() {
        let dir = tmpdir("table");
        let single = write_temp(
            &dir,
            "one.json",
            r#"{"relation": "Temp", "rows": [
                {"cells": [{"const": 4108}, {"const": "t1"},
                           {"dist": "normal", "params": {"mean": 20.2, "var": 0.1}}]},
                {"exists_p": 0.3,
                 "cells": [{"const": 4109}, {"const": "t2"}, {"const": 22.0}]}
            ]}"#,
        );
        let table = load_table(&single).unwrap();
        assert_eq!(table.relations.len(), 1);
        assert_eq!(table.relations[0].rows.len(), 2);
        assert_eq!(table.relations[0].rows[0].exists_p, 1.0);
        assert_eq!(table.relations[0].rows[1].exists_p, 0.3);
        assert!(matches!(
            table.relations[0].rows[0].cells[2],
            ProbCell::Dist { spec: DistSpec::Normal, .. }
        ));

        let multi = write_temp(
            &dir,
            "two.json",
            r#"[{"relation": "Temp", "rows": []}, {"relation": "AvTemp", "rows": []}]"#,
        );
        let table = load_table(&multi).unwrap();
        assert_eq!(table.relations.len(), 2);
    }

    #[test]
    fn table_json_rejects_unknown_parameter() {
        let dir = tmpdir("table-bad");
        let path = write_temp(
            &dir,
            "bad.json",
            r#"{"relation": "Temp", "rows": [
                {"cells": [{"dist": "normal", "params": {"mean": 1, "sd": 2}}]}
            ]}"#,
        );
        let err = load_table(&path).unwrap_err();
        assert!(err.to_string().contains("var"), "message was: {err}");
    }

    #[test]
    fn discrete_table_cell_parses() {
        let dir = tmpdir("table-discrete");
        let path = write_temp(
            &dir,
            "d.json",
            r#"{"relation": "R", "rows": [
                {"cells": [{"dist": "discrete",
                            "params": {"values": ["a", "b"], "weights": [0.4, 0.6]}}]}
            ]}"#,
        );
        let table = load_table(&path).unwrap();
        match &table.relations[0].rows[0].cells[0] {
            ProbCell::Dist { spec: DistSpec::Discrete { values, weights }, .. } => {
                assert_eq!(values.len(), 2);
                assert_eq!(weights, &[0.4, 0.6]);
            }
            other => panic!("unexpected cell {other:?}"),
        }
    }
}
