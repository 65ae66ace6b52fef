//! CSV persistence: `y,stratum,weight` rows plus a JSON sidecar holding the
//! population size, observation space and (for synthetic samples) the design.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ObservationSpace, PopulationSpec, Record, SurveySample};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    population_size: u64,
    space: ObservationSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<PopulationSpec>,
}

#[derive(Deserialize)]
struct Row {
    y: f64,
    stratum: u32,
    weight: f64,
}

/// `sample.csv` → `sample.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn save_sample(path: &Path, sample: &SurveySample) -> Result<()> {
    sample.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "y,stratum,weight")?;
        // `Display` for f64 prints the shortest string that parses back exactly
        for (r, w) in sample.records.iter().zip(&sample.weights) {
            writeln!(out, "{},{},{}", r.y, r.stratum, w)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let meta = Sidecar {
        population_size: sample.population_size,
        space: sample.space,
        design: sample.design.clone(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn load_sample(path: &Path) -> Result<SurveySample> {
    let side = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: side.clone(),
        line: e.line() as u64,
        msg: e.to_string(),
    })?;

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["y", "stratum", "weight"] {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            msg: format!("expected header `y,stratum,weight`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    let mut weights = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        records.push(Record { y: row.y, stratum: row.stratum });
        weights.push(row.weight);
    }
    let sample = SurveySample {
        space: meta.space,
        records,
        weights,
        population_size: meta.population_size,
        design: meta.design,
    };
    sample.validate()?;
    Ok(sample)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_owned(),
        line,
        msg: e.to_string(),
    }
}
