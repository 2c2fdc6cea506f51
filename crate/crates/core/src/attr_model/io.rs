//! CSV and JSON formats for schemas, tables, annotations and features.
//!
//! * distribution CSV: `category,attribute,value,probability`, one row per
//!   (category, attribute, value); absent values carry weight 0.
//! * binary-label CSV: `category,a_1,...,a_L` with cells in `{0,1}`.
//! * annotation CSV: `instance,category,a_1,...,a_L` with value labels.
//! * features CSV: `instance,category,f_1,...,f_L` with scores in `[0,1]`.
//! * schema JSON: `{"attributes":[{"id":..,"values":[..]}]}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    renormalize, Attribute, AttributeSchema, AttributeTable, CategoryProfile, FeatureRecord,
    InstanceAnnotation,
};
use crate::error::{Result, TadError};

/// On-disk layout of an attribute table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    DistributionCsv,
    BinaryLabelCsv,
}

impl std::str::FromStr for TableFormat {
    type Err = TadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution-csv" | "distribution" => Ok(TableFormat::DistributionCsv),
            "binary-label-csv" | "binary" => Ok(TableFormat::BinaryLabelCsv),
            other => Err(TadError::validation(format!("unknown table format '{other}'"))),
        }
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_err(err: csv::Error) -> TadError {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    TadError::parse(line, err.to_string())
}

fn records<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<(usize, csv::StringRecord)>> {
    rdr.records()
        .map(|r| {
            let rec = r.map_err(csv_err)?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            Ok((line, rec))
        })
        .collect()
}

fn expect_header(header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = header.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(TadError::parse(
            1,
            format!("expected header starting with {}", expected.join(",")),
        ));
    }
    Ok(())
}

/// Reads a table from a file; the pool tag is the file stem.
pub fn load_attribute_table(
    path: impl AsRef<Path>,
    format: TableFormat,
    schema: Option<&AttributeSchema>,
) -> Result<AttributeTable> {
    let path = path.as_ref();
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = File::open(path)?;
    let table = match format {
        TableFormat::DistributionCsv => read_distribution_csv(file, schema)?,
        TableFormat::BinaryLabelCsv => read_binary_label_csv(file)?,
    };
    Ok(table.with_pool_tag(tag))
}

pub fn save_attribute_table(
    table: &AttributeTable,
    path: impl AsRef<Path>,
    format: TableFormat,
) -> Result<()> {
    let mut file = File::create(path)?;
    match format {
        TableFormat::DistributionCsv => write_distribution_csv(table, &mut file),
        TableFormat::BinaryLabelCsv => write_binary_label_csv(table, &mut file),
    }
}

/// Parses a distribution CSV. Without a schema, attributes and values are
/// taken in order of first appearance.
pub fn read_distribution_csv<R: Read>(
    input: R,
    schema: Option<&AttributeSchema>,
) -> Result<AttributeTable> {
    let mut rdr = reader(input);
    expect_header(
        rdr.headers().map_err(csv_err)?,
        &["category", "attribute", "value", "probability"],
    )?;
    let rows = records(&mut rdr)?;

    struct Row<'a> {
        line: usize,
        category: &'a str,
        attribute: &'a str,
        value: &'a str,
        weight: f64,
    }
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        if rec.len() != 4 {
            return Err(TadError::parse(*line, format!("expected 4 fields, got {}", rec.len())));
        }
        let weight: f64 = rec[3]
            .parse()
            .map_err(|_| TadError::parse(*line, format!("bad probability '{}'", &rec[3])))?;
        parsed.push(Row {
            line: *line,
            category: rec.get(0).unwrap(),
            attribute: rec.get(1).unwrap(),
            value: rec.get(2).unwrap(),
            weight,
        });
    }

    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let mut attrs: Vec<Attribute> = Vec::new();
            for row in &parsed {
                let slot = match attrs.iter().position(|a| a.id == row.attribute) {
                    Some(i) => i,
                    None => {
                        attrs.push(Attribute {
                            id: row.attribute.to_string(),
                            values: Vec::new(),
                        });
                        attrs.len() - 1
                    }
                };
                if !attrs[slot].values.iter().any(|v| v == row.value) {
                    attrs[slot].values.push(row.value.to_string());
                }
            }
            AttributeSchema::new(attrs)?
        }
    };

    let cards = schema.cardinalities();
    let mut order: Vec<CategoryProfile> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut seen: Vec<Vec<Vec<bool>>> = Vec::new();
    for row in &parsed {
        let l = schema.attribute_index(row.attribute).ok_or_else(|| {
            TadError::parse(row.line, format!("unknown attribute '{}'", row.attribute))
        })?;
        let v = schema.value_index(l, row.value).ok_or_else(|| {
            TadError::parse(
                row.line,
                format!("unknown value '{}' for attribute '{}'", row.value, row.attribute),
            )
        })?;
        let idx = *slot.entry(row.category).or_insert_with(|| {
            order.push(CategoryProfile {
                category_id: row.category.to_string(),
                distributions: cards.iter().map(|&c| vec![0.0; c]).collect(),
            });
            seen.push(cards.iter().map(|&c| vec![false; c]).collect());
            order.len() - 1
        });
        if seen[idx][l][v] {
            return Err(TadError::validation(format!(
                "line {}: duplicate entry for category '{}', attribute '{}', value '{}'",
                row.line, row.category, row.attribute, row.value
            )));
        }
        seen[idx][l][v] = true;
        order[idx].distributions[l][v] = row.weight;
    }
    for profile in &mut order {
        for (attr, dist) in schema.attributes().iter().zip(profile.distributions.iter_mut()) {
            renormalize(dist).map_err(|msg| {
                TadError::validation(format!(
                    "category '{}', attribute '{}': {msg}",
                    profile.category_id, attr.id
                ))
            })?;
        }
    }
    AttributeTable::new(schema, order, "")
}

/// Parses a binary-label CSV into degenerate distributions.
pub fn read_binary_label_csv<R: Read>(input: R) -> Result<AttributeTable> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    expect_header(&header, &["category"])?;
    let attrs: Vec<Attribute> = header
        .iter()
        .skip(1)
        .map(|id| Attribute {
            id: id.to_string(),
            values: vec!["0".into(), "1".into()],
        })
        .collect();
    let schema = AttributeSchema::new(attrs)?;
    let mut profiles = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, rec) in records(&mut rdr)? {
        let category = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(TadError::parse(line, format!("label '{other}' not in {{0,1}}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(category.clone()) {
            return Err(TadError::validation(format!(
                "line {line}: duplicate category '{category}'"
            )));
        }
        profiles.push(CategoryProfile::degenerate(category, &schema, &values)?);
    }
    AttributeTable::new(schema, profiles, "")
}

pub fn write_distribution_csv<W: Write>(table: &AttributeTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "attribute", "value", "probability"])?;
    for p in table.profiles() {
        for (attr, dist) in table.schema().attributes().iter().zip(&p.distributions) {
            for (value, weight) in attr.values.iter().zip(dist) {
                w.write_record([
                    p.category_id.as_str(),
                    attr.id.as_str(),
                    value.as_str(),
                    &weight.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes degenerate binary profiles; errors if any row is not degenerate.
pub fn write_binary_label_csv<W: Write>(table: &AttributeTable, out: W) -> Result<()> {
    if !table.schema().is_binary() {
        return Err(TadError::validation("binary-label output needs a binary schema"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["category".to_string()];
    header.extend(table.schema().attributes().iter().map(|a| a.id.clone()));
    w.write_record(&header)?;
    for p in table.profiles() {
        let mut row = vec![p.category_id.clone()];
        for (attr, dist) in table.schema().attributes().iter().zip(&p.distributions) {
            let label = match dist.as_slice() {
                [a, b] if *a == 1.0 && *b == 0.0 => &attr.values[0],
                [a, b] if *a == 0.0 && *b == 1.0 => &attr.values[1],
                _ => {
                    return Err(TadError::validation(format!(
                        "category '{}' is not degenerate on '{}'",
                        p.category_id, attr.id
                    )))
                }
            };
            row.push(label.clone());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<AttributeSchema> {
    AttributeSchema::from_json(&std::fs::read_to_string(path)?)
}

pub fn read_annotations_csv<R: Read>(
    input: R,
    schema: &AttributeSchema,
) -> Result<Vec<InstanceAnnotation>> {
    let mut rdr = reader(input);
    expect_header(rdr.headers().map_err(csv_err)?, &["instance", "category"])?;
    records(&mut rdr)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != schema.len() + 2 {
                return Err(TadError::parse(
                    line,
                    format!("expected {} fields, got {}", schema.len() + 2, rec.len()),
                ));
            }
            let values = rec
                .iter()
                .skip(2)
                .enumerate()
                .map(|(l, cell)| {
                    schema.value_index(l, cell).ok_or_else(|| {
                        TadError::parse(
                            line,
                            format!("value '{cell}' not in attribute '{}'", schema.attributes()[l].id),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(InstanceAnnotation {
                instance_id: rec[0].to_string(),
                category_id: rec[1].to_string(),
                values,
            })
        })
        .collect()
}

pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<FeatureRecord>> {
    let mut rdr = reader(input);
    expect_header(rdr.headers().map_err(csv_err)?, &["instance", "category"])?;
    records(&mut rdr)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() < 3 {
                return Err(TadError::parse(line, "features row needs at least one score"));
            }
            let scores = rec
                .iter()
                .skip(2)
                .map(|cell| {
                    let s: f64 = cell
                        .parse()
                        .map_err(|_| TadError::parse(line, format!("bad score '{cell}'")))?;
                    if !(0.0..=1.0).contains(&s) {
                        return Err(TadError::parse(line, format!("score {s} outside [0, 1]")));
                    }
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureRecord {
                instance_id: rec[0].to_string(),
                category_id: rec[1].to_string(),
                scores,
            })
        })
        .collect()
}

pub fn write_features_csv<W: Write>(records: &[FeatureRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let width = records.first().map_or(0, |r| r.scores.len());
    let mut header = vec!["instance".to_string(), "category".to_string()];
    header.extend((1..=width).map(|l| format!("f_{l}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.instance_id.clone(), r.category_id.clone()];
        row.extend(r.scores.iter().map(|s| s.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_row_becomes_degenerate() {
        let t = read_binary_label_csv("category,a_1,a_2\ncatA,1,0\n".as_bytes()).unwrap();
        let p = t.profile("catA").unwrap();
        assert_eq!(p.distributions, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn near_normalized_weights_are_renormalized() {
        let csv = "category,attribute,value,probability\nc,x,0,0.5000000001\nc,x,1,0.4999999999\n";
        let t = read_distribution_csv(csv.as_bytes(), None).unwrap();
        let d = &t.profile("c").unwrap().distributions[0];
        assert!((d[0] - 0.5).abs() < 1e-9 && (d[1] - 0.5).abs() < 1e-9);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overweight_row_is_rejected() {
        let csv = "category,attribute,value,probability\nc,x,0,0.7\nc,x,1,0.7\n";
        assert!(matches!(
            read_distribution_csv(csv.as_bytes(), None),
            Err(TadError::Validation(_))
        ));
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let csv = "category,attribute,value,probability\nc,x,0,0.5\nc,x,1,abc\n";
        match read_distribution_csv(csv.as_bytes(), None) {
            Err(TadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let csv = "category,a_1\nc,1\nd,2\n";
        match read_binary_label_csv(csv.as_bytes()) {
            Err(TadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let csv = "category,a_1\nc,1\nd,1,1\n";
        assert!(matches!(read_binary_label_csv(csv.as_bytes()), Err(TadError::Parse { .. })));
    }

    #[test]
    fn duplicate_category_rejected() {
        let csv = "category,a_1\nc,1\nc,0\n";
        assert!(matches!(read_binary_label_csv(csv.as_bytes()), Err(TadError::Validation(_))));
        let csv = "category,attribute,value,probability\nc,x,0,0.5\nc,x,0,0.5\n";
        assert!(matches!(
            read_distribution_csv(csv.as_bytes(), None),
            Err(TadError::Validation(_))
        ));
    }

    #[test]
    fn schema_fills_missing_values_with_zero() {
        let schema = AttributeSchema::binary(1).unwrap();
        let csv = "category,attribute,value,probability\nc,a_1,1,1.0\n";
        let t = read_distribution_csv(csv.as_bytes(), Some(&schema)).unwrap();
        assert_eq!(t.profile("c").unwrap().distributions[0], vec![0.0, 1.0]);
        let csv = "category,attribute,value,probability\nc,a_9,1,1.0\n";
        assert!(read_distribution_csv(csv.as_bytes(), Some(&schema)).is_err());
    }

    #[test]
    fn annotations_and_features_parse() {
        let schema = AttributeSchema::binary(2).unwrap();
        let anns =
            read_annotations_csv("instance,category,a_1,a_2\ni1,A,1,0\n".as_bytes(), &schema).unwrap();
        assert_eq!(anns[0].values, vec![1, 0]);
        assert!(read_annotations_csv("instance,category,a_1,a_2\ni1,A,2,0\n".as_bytes(), &schema).is_err());
        let feats = read_features_csv("instance,category,f_1,f_2\ni1,A,0.25,1\n".as_bytes()).unwrap();
        assert_eq!(feats[0].scores, vec![0.25, 1.0]);
        assert!(read_features_csv("instance,category,f_1\ni1,A,1.5\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_writer_round_trips() {
        let csv = "category,a_1,a_2\ncatA,1,0\ncatB,0,0\n";
        let t = read_binary_label_csv(csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_binary_label_csv(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), csv);
    }
}
