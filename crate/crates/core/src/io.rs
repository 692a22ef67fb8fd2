//! File formats: CSV ingestion of sensor data (wide and long layouts),
//! real-valued inputs for fusion, and the JSON/CSV shapes of entropy
//! vectors, matroid candidates, and fusion weights.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{quantize_readings, AlphabetSpec, SensorMatrix};
use crate::empirical::{EntropyKind, EntropyVector};
use crate::error::{Error, Result};
use crate::polymatroid::MatroidCandidate;
use crate::subset::SubsetMask;

/// Sensor-data CSV layout, detected from the header row.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CsvLayout {
    /// `t,s1,s2,...,sK`: one row per time step, integer symbols.
    Wide,
    /// `epoch,sensor_id,value`: real values in [0, 1], quantized on load.
    Long,
}

/// Options for loading sensor CSVs.
#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Quantization bins for long-layout real values.
    pub bins: u64,
    /// Alphabet size for wide-layout symbols; inferred as `max + 1` when absent.
    pub alpha: Option<u64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            bins: 2,
            alpha: None,
        }
    }
}

fn detect_layout(headers: &csv::StringRecord) -> Result<CsvLayout> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    if names == ["epoch", "sensor_id", "value"] {
        return Ok(CsvLayout::Long);
    }
    if names.len() >= 2
        && names[0] == "t"
        && names[1..]
            .iter()
            .enumerate()
            .all(|(i, h)| *h == format!("s{}", i + 1))
    {
        return Ok(CsvLayout::Wide);
    }
    Err(Error::CsvLayout {
        detail: format!(
            "expected `t,s1,..,sK` or `epoch,sensor_id,value`, found `{}`",
            names.join(",")
        ),
    })
}

/// Loads a sensor matrix from either CSV layout, auto-detected by header.
pub fn load_matrix_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<SensorMatrix> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    match detect_layout(&headers)? {
        CsvLayout::Wide => load_wide(csv_reader, options),
        CsvLayout::Long => load_long(csv_reader, options),
    }
}

fn parse_symbol(field: &str, row: usize, col: usize) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::CsvLayout {
        detail: format!("row {row}, column {col}: `{field}` is not a symbol"),
    })
}

fn load_wide<R: Read>(mut reader: csv::Reader<R>, options: &LoadOptions) -> Result<SensorMatrix> {
    let k = reader.headers()?.len() - 1;
    let mut rows: Vec<Vec<u64>> = vec![Vec::new(); k];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != k + 1 {
            return Err(Error::CsvLayout {
                detail: format!("row {line} has {} fields, expected {}", record.len(), k + 1),
            });
        }
        for sensor in 0..k {
            rows[sensor].push(parse_symbol(&record[sensor + 1], line, sensor + 1)?);
        }
    }
    if rows.iter().any(|r| r.is_empty()) {
        return Err(Error::EmptyInput);
    }
    let alpha = match options.alpha {
        Some(size) => AlphabetSpec::new(size)?,
        None => {
            let max = rows.iter().flatten().copied().max().unwrap_or(0);
            AlphabetSpec::new(max + 1)?
        }
    };
    SensorMatrix::new(rows, alpha)
}

fn load_long<R: Read>(mut reader: csv::Reader<R>, options: &LoadOptions) -> Result<SensorMatrix> {
    // Epochs keep file order; every epoch must report every sensor once.
    let mut epoch_order: Vec<String> = Vec::new();
    let mut per_epoch: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::CsvLayout {
                detail: format!("row {line} has {} fields, expected 3", record.len()),
            });
        }
        let epoch = record[0].trim().to_string();
        let sensor_id = record[1].trim().parse::<u64>().map_err(|_| Error::CsvLayout {
            detail: format!("row {line}: sensor_id `{}` is not an integer", &record[1]),
        })?;
        let value = record[2].trim().parse::<f64>().map_err(|_| Error::CsvLayout {
            detail: format!("row {line}: value `{}` is not a number", &record[2]),
        })?;
        let slot = per_epoch.entry(epoch.clone()).or_insert_with(|| {
            epoch_order.push(epoch.clone());
            BTreeMap::new()
        });
        if slot.insert(sensor_id, value).is_some() {
            return Err(Error::CsvLayout {
                detail: format!("row {line}: sensor {sensor_id} repeats within epoch `{epoch}`"),
            });
        }
    }
    if epoch_order.is_empty() {
        return Err(Error::EmptyInput);
    }

    let sensor_ids: Vec<u64> = per_epoch[&epoch_order[0]].keys().copied().collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(epoch_order.len()); sensor_ids.len()];
    for epoch in &epoch_order {
        let readings = &per_epoch[epoch];
        if readings.len() != sensor_ids.len()
            || !sensor_ids.iter().all(|id| readings.contains_key(id))
        {
            return Err(Error::CsvLayout {
                detail: format!(
                    "epoch `{epoch}` reports {} sensors, expected the {} of the first epoch \
                     (inputs must be pre-aligned)",
                    readings.len(),
                    sensor_ids.len()
                ),
            });
        }
        for (slot, id) in columns.iter_mut().zip(&sensor_ids) {
            slot.push(readings[id]);
        }
    }

    let rows: Result<Vec<Vec<u64>>> = columns
        .iter()
        .map(|values| quantize_readings(values, options.bins))
        .collect();
    SensorMatrix::new(rows?, AlphabetSpec::new(options.bins)?)
}

/// Writes a matrix in the wide layout consumed by `load_matrix_csv`.
pub fn write_matrix_csv<W: Write>(writer: W, matrix: &SensorMatrix) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=matrix.num_sensors()).map(|i| format!("s{i}")));
    csv_writer.write_record(&header)?;
    for t in 0..matrix.num_steps() {
        let mut record = vec![t.to_string()];
        record.extend((0..matrix.num_sensors()).map(|s| matrix.symbol(s, t).to_string()));
        csv_writer.write_record(&record)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Loads a wide CSV of real-valued outputs in [0, 1] (fusion inputs):
/// header `t,s1,..,sK`, one column per base sensor.
pub fn load_real_matrix_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    if detect_layout(&headers)? != CsvLayout::Wide {
        return Err(Error::CsvLayout {
            detail: "fusion inputs use the wide layout `t,s1,..,sK`".into(),
        });
    }
    let k = headers.len() - 1;
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (line, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != k + 1 {
            return Err(Error::CsvLayout {
                detail: format!("row {line} has {} fields, expected {}", record.len(), k + 1),
            });
        }
        for sensor in 0..k {
            let value = record[sensor + 1]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::CsvLayout {
                    detail: format!("row {line}: `{}` is not a number", &record[sensor + 1]),
                })?;
            rows[sensor].push(value);
        }
    }
    if rows.iter().any(|r| r.is_empty()) {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}

/// Loads a binary truth sequence from a CSV with header `t,x`.
pub fn load_truth_csv<R: Read>(reader: R) -> Result<Vec<u8>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    if names != ["t", "x"] {
        return Err(Error::CsvLayout {
            detail: format!("expected truth header `t,x`, found `{}`", names.join(",")),
        });
    }
    let mut truth = Vec::new();
    for (line, record) in csv_reader.records().enumerate() {
        let record = record?;
        let value = record
            .get(1)
            .and_then(|f| f.trim().parse::<u64>().ok())
            .ok_or_else(|| Error::CsvLayout {
                detail: format!("row {line}: truth value must be 0 or 1"),
            })?;
        if value > 1 {
            return Err(Error::TruthNotBinary { step: line, value });
        }
        truth.push(value as u8);
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(truth)
}

/// Writes a truth sequence in the `t,x` layout.
pub fn write_truth_csv<W: Write>(writer: W, truth: &[u8]) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["t", "x"])?;
    for (t, &x) in truth.iter().enumerate() {
        csv_writer.write_record([t.to_string(), x.to_string()])?;
    }
    csv_writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EntropyVectorJson {
    k: u32,
    kind: EntropyKind,
    values: BTreeMap<String, f64>,
}

/// Serializes an entropy vector as
/// `{ "k": K, "kind": "...", "values": { "<mask as decimal>": bits } }`.
pub fn entropy_vector_to_json(vector: &EntropyVector) -> serde_json::Value {
    let values: BTreeMap<String, f64> = vector
        .evaluated()
        .map(|(mask, bits)| (mask.bits().to_string(), bits))
        .collect();
    serde_json::to_value(EntropyVectorJson {
        k: vector.num_sensors(),
        kind: vector.kind(),
        values,
    })
    .expect("entropy vector serialization cannot fail")
}

pub fn entropy_vector_from_json(json: &serde_json::Value) -> Result<EntropyVector> {
    let parsed: EntropyVectorJson = serde_json::from_value(json.clone())?;
    let mut vector = EntropyVector::new(parsed.k, parsed.kind);
    for (mask_text, bits) in parsed.values {
        let mask = mask_text.parse::<u64>().map_err(|_| Error::CsvLayout {
            detail: format!("`{mask_text}` is not a decimal subset mask"),
        })?;
        vector.insert(SubsetMask::from_bits(mask), bits)?;
    }
    Ok(vector)
}

/// Writes `mask,members,entropy_bits` rows in ascending mask order.
pub fn write_entropy_csv<W: Write>(writer: W, vector: &EntropyVector) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["mask", "members", "entropy_bits"])?;
    for (mask, bits) in vector.evaluated() {
        csv_writer.write_record([
            mask.bits().to_string(),
            mask.label().replace('+', " "),
            bits.to_string(),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Writes `mask,rank` rows of a rounded matroid candidate.
pub fn write_matroid_csv<W: Write>(writer: W, candidate: &MatroidCandidate) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["mask", "rank"])?;
    for (mask, rank) in candidate.ranks.evaluated() {
        csv_writer.write_record([mask.bits().to_string(), (rank.round() as u64).to_string()])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Writes the `(n + 1) x M` weight history with header `t,w1,..,wM`.
pub fn write_weights_csv<W: Write>(writer: W, history: &[Vec<f64>]) -> Result<()> {
    if history.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=history[0].len()).map(|j| format!("w{j}")));
    csv_writer.write_record(&header)?;
    for (t, row) in history.iter().enumerate() {
        let mut record = vec![t.to_string()];
        record.extend(row.iter().map(f64::to_string));
        csv_writer.write_record(&record)?;
    }
    csv_writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::empirical_entropy_vector;

    #[test]
    fn wide_roundtrip() {
        let matrix = SensorMatrix::new(
            vec![vec![0, 1, 2, 1], vec![2, 2, 0, 1]],
            AlphabetSpec::new(3).unwrap(),
        )
        .unwrap();
        let mut buffer = Vec::new();
        write_matrix_csv(&mut buffer, &matrix).unwrap();
        let text = String::from_utf8(buffer.clone()).unwrap();
        assert!(text.starts_with("t,s1,s2\n0,0,2\n"));
        let back = load_matrix_csv(buffer.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(back, matrix);
    }

    #[test]
    fn wide_alpha_inference_and_override() {
        let csv = "t,s1\n0,0\n1,3\n";
        let inferred = load_matrix_csv(csv.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(inferred.alphabet().size(), 4);

        let forced = load_matrix_csv(
            csv.as_bytes(),
            &LoadOptions {
                bins: 2,
                alpha: Some(8),
            },
        )
        .unwrap();
        assert_eq!(forced.alphabet().size(), 8);

        let too_small = load_matrix_csv(
            csv.as_bytes(),
            &LoadOptions {
                bins: 2,
                alpha: Some(2),
            },
        );
        assert!(matches!(too_small, Err(Error::SymbolOutOfRange { .. })));
    }

    #[test]
    fn long_layout_quantizes() {
        let csv = "epoch,sensor_id,value\n\
                   e1,1,0.1\ne1,2,0.9\n\
                   e2,1,0.6\ne2,2,0.2\n";
        let matrix = load_matrix_csv(csv.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(matrix.num_sensors(), 2);
        assert_eq!(matrix.row(0), &[0, 1]);
        assert_eq!(matrix.row(1), &[1, 0]);
        assert_eq!(matrix.alphabet().size(), 2);
    }

    #[test]
    fn long_layout_rejects_misaligned_epochs() {
        let csv = "epoch,sensor_id,value\ne1,1,0.1\ne1,2,0.9\ne2,1,0.6\n";
        assert!(matches!(
            load_matrix_csv(csv.as_bytes(), &LoadOptions::default()),
            Err(Error::CsvLayout { .. })
        ));
    }

    #[test]
    fn empty_and_malformed_inputs() {
        assert!(matches!(
            load_matrix_csv("".as_bytes(), &LoadOptions::default()),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            load_matrix_csv("t,s1\n".as_bytes(), &LoadOptions::default()),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            load_matrix_csv("a,b\n1,2\n".as_bytes(), &LoadOptions::default()),
            Err(Error::CsvLayout { .. })
        ));
        assert!(matches!(
            load_matrix_csv("t,s1\n0,x\n".as_bytes(), &LoadOptions::default()),
            Err(Error::CsvLayout { .. })
        ));
    }

    #[test]
    fn truth_csv_roundtrip_and_validation() {
        let mut buffer = Vec::new();
        write_truth_csv(&mut buffer, &[1, 0, 1]).unwrap();
        assert_eq!(load_truth_csv(buffer.as_slice()).unwrap(), vec![1, 0, 1]);
        assert!(matches!(
            load_truth_csv("t,x\n0,2\n".as_bytes()),
            Err(Error::TruthNotBinary { step: 0, value: 2 })
        ));
    }

    #[test]
    fn real_matrix_values() {
        let csv = "t,s1,s2\n0,0.25,1.0\n1,0.75,0.0\n";
        let rows = load_real_matrix_csv(csv.as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![0.25, 0.75], vec![1.0, 0.0]]);
    }

    #[test]
    fn entropy_vector_json_roundtrip() {
        let matrix = SensorMatrix::new(
            vec![vec![0, 1, 0, 1], vec![0, 0, 1, 1]],
            AlphabetSpec::binary(),
        )
        .unwrap();
        let vector = empirical_entropy_vector(&matrix, None).unwrap();
        let json = entropy_vector_to_json(&vector);
        assert_eq!(json["k"], 2);
        assert_eq!(json["kind"], "empirical-first-order");
        assert_eq!(json["values"]["3"], 2.0);
        let back = entropy_vector_from_json(&json).unwrap();
        assert_eq!(back, vector);
    }

    #[test]
    fn entropy_csv_rows() {
        let matrix = SensorMatrix::new(vec![vec![0, 1], vec![0, 1]], AlphabetSpec::binary()).unwrap();
        let vector = empirical_entropy_vector(&matrix, None).unwrap();
        let mut buffer = Vec::new();
        write_entropy_csv(&mut buffer, &vector).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "mask,members,entropy_bits\n1,s1,1\n2,s2,1\n3,s1 s2,1\n"
        );
    }

    #[test]
    fn weights_csv_shape() {
        let history = vec![vec![0.5, 0.5], vec![0.25, 0.75]];
        let mut buffer = Vec::new();
        write_weights_csv(&mut buffer, &history).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "t,w1,w2\n0,0.5,0.5\n1,0.25,0.75\n");
    }

    #[test]
    fn matroid_csv_rows() {
        use crate::polymatroid::{round_to_matroid, RoundingOutcome};
        let matrix = SensorMatrix::new(vec![vec![0, 1], vec![1, 0]], AlphabetSpec::binary()).unwrap();
        let vector = empirical_entropy_vector(&matrix, None).unwrap();
        let RoundingOutcome::Matroid(candidate) = round_to_matroid(&vector, 1.0).unwrap() else {
            panic!("expected a matroid");
        };
        let mut buffer = Vec::new();
        write_matroid_csv(&mut buffer, &candidate).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "mask,rank\n1,1\n2,1\n3,1\n");
    }
}
