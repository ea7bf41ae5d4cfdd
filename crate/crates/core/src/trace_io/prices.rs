use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::Catalog;
use crate::error::{Error, Result};
use crate::market::PriceTrace;

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    timestamp: f64,
    instance_type: String,
    price: f64,
}

/// Spot price traces indexed like the catalog; types that are not spot
/// eligible have no trace.
pub type PriceTraces = Vec<Option<PriceTrace>>;

/// Loads a long-format `timestamp,instance_type,price` CSV file. Every
/// spot-eligible catalog type must appear; samples of one type must be in
/// strictly increasing time order.
pub fn load_price_traces(path: impl AsRef<Path>, catalog: &Catalog) -> Result<PriceTraces> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    price_traces_from_reader(file, path, catalog)
}

pub fn price_traces_from_reader<R: Read>(reader: R, origin: &Path, catalog: &Catalog) -> Result<PriceTraces> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); catalog.len()];
    for (row, rec) in rdr.deserialize::<Row>().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::validation(origin, line, e.to_string()))?;
        let ty = catalog
            .lookup(&rec.instance_type)
            .map_err(|_| Error::validation(origin, line, format!("unknown instance type `{}`", rec.instance_type)))?;
        if !catalog.get(ty).spot_eligible {
            return Err(Error::validation(
                origin,
                line,
                format!("`{}` is not spot eligible", rec.instance_type),
            ));
        }
        if !(rec.price > 0.0 && rec.price.is_finite()) {
            return Err(Error::validation(
                origin,
                line,
                format!("price {} is not positive", rec.price),
            ));
        }
        if !rec.timestamp.is_finite() {
            return Err(Error::validation(origin, line, "timestamp is not finite"));
        }
        let list = &mut samples[ty.index()];
        if let Some(&(prev, _)) = list.last() {
            if rec.timestamp == prev {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("duplicate timestamp {} for `{}`", rec.timestamp, rec.instance_type),
                ));
            }
            if rec.timestamp < prev {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("timestamps for `{}` are not sorted", rec.instance_type),
                ));
            }
        }
        list.push((rec.timestamp, rec.price));
    }
    let mut out = Vec::with_capacity(catalog.len());
    for ((ty, t), s) in catalog.iter().zip(samples) {
        if !t.spot_eligible {
            out.push(None);
            continue;
        }
        if s.is_empty() {
            return Err(Error::validation(
                origin,
                1,
                format!("no price samples for spot type `{}`", catalog.name(ty)),
            ));
        }
        out.push(Some(PriceTrace::new(t.name.clone(), s)?));
    }
    Ok(out)
}

/// Writes traces in the loader's format, ordered by time and then by
/// catalog order.
pub fn write_price_traces<W: Write>(traces: &[Option<PriceTrace>], writer: W) -> std::io::Result<()> {
    let mut rows: BTreeMap<(u64, usize), (&str, f64)> = BTreeMap::new();
    for (i, tr) in traces.iter().enumerate() {
        let Some(tr) = tr else { continue };
        for &(t, p) in &tr.samples {
            rows.insert((ordered_bits(t), i), (&tr.instance_type, p));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    for ((bits, _), (name, price)) in rows {
        w.serialize(Row {
            timestamp: from_ordered_bits(bits),
            instance_type: name.to_string(),
            price,
        })?;
    }
    w.flush()
}

// Order-preserving map from f64 to u64.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    if b >> 63 == 1 {
        f64::from_bits(b & !(1 << 63))
    } else {
        f64::from_bits(!b)
    }
}
