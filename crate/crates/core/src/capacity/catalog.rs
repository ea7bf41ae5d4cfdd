use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResourceVector;
use crate::error::{Error, Result};

/// Index of an instance type inside its [`Catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypeIdx(pub u16);

impl TypeIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub name: String,
    /// Nominal capacity.
    pub capacity: ResourceVector,
    /// Currency per hour.
    pub on_demand_price: f64,
    pub spot_eligible: bool,
}

impl InstanceType {
    pub fn new(name: impl Into<String>, capacity: ResourceVector, on_demand_price: f64) -> Self {
        InstanceType {
            name: name.into(),
            capacity,
            on_demand_price,
            spot_eligible: true,
        }
    }
}

impl fmt::Display for InstanceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The set of instance types an experiment may use. Types are kept in the
/// order they were given; [`TypeIdx`] values index into that order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    types: Vec<InstanceType>,
    by_name: BTreeMap<String, TypeIdx>,
}

#[derive(Debug, Deserialize, Serialize)]
struct CatalogRecord {
    name: String,
    cpu_ecu: f64,
    memory_gib: f64,
    network_mbps: f64,
    disk_mbps: f64,
    on_demand_price: f64,
    #[serde(default)]
    spot_eligible: Option<bool>,
}

impl Catalog {
    pub fn new(types: Vec<InstanceType>) -> Result<Self> {
        if types.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument("catalog too large".into()));
        }
        let mut by_name = BTreeMap::new();
        for (i, t) in types.iter().enumerate() {
            if !t.capacity.all_positive() {
                return Err(Error::InvalidConfig(format!(
                    "instance type `{}` has a non-positive capacity {}",
                    t.name, t.capacity
                )));
            }
            if !(t.on_demand_price > 0.0 && t.on_demand_price.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "instance type `{}` has a non-positive on-demand price",
                    t.name
                )));
            }
            if by_name.insert(t.name.clone(), TypeIdx(i as u16)).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate instance type `{}`", t.name)));
            }
        }
        Ok(Catalog { types, by_name })
    }

    /// Loads a catalog file. See the file formats chapter of the guide for the column layout.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut types: Vec<InstanceType> = Vec::new();
        let mut seen = BTreeMap::new();
        for (row, rec) in rdr.deserialize::<CatalogRecord>().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::validation(origin, line, e.to_string()))?;
            let capacity = ResourceVector::new(rec.cpu_ecu, rec.memory_gib, rec.network_mbps, rec.disk_mbps);
            if !capacity.all_positive() {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("`{}` has a non-positive capacity", rec.name),
                ));
            }
            if !(rec.on_demand_price > 0.0) {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("`{}` has a non-positive on-demand price", rec.name),
                ));
            }
            if let Some(first) = seen.insert(rec.name.clone(), line) {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("duplicate instance type `{}` (first defined on line {first})", rec.name),
                ));
            }
            types.push(InstanceType {
                name: rec.name,
                capacity,
                on_demand_price: rec.on_demand_price,
                spot_eligible: rec.spot_eligible.unwrap_or(true),
            });
        }
        if types.is_empty() {
            return Err(Error::validation(origin, 1, "catalog is empty"));
        }
        Catalog::new(types)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for t in &self.types {
            let [cpu, mem, net, disk] = t.capacity.0;
            w.serialize(CatalogRecord {
                name: t.name.clone(),
                cpu_ecu: cpu,
                memory_gib: mem,
                network_mbps: net,
                disk_mbps: disk,
                on_demand_price: t.on_demand_price,
                spot_eligible: Some(t.spot_eligible),
            })?;
        }
        w.flush()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, idx: TypeIdx) -> &InstanceType {
        &self.types[idx.index()]
    }

    pub fn lookup(&self, name: &str) -> Result<TypeIdx> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn name(&self, idx: TypeIdx) -> &str {
        &self.types[idx.index()].name
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypeIdx, &InstanceType)> {
        self.types.iter().enumerate().map(|(i, t)| (TypeIdx(i as u16), t))
    }

    pub fn spot_types(&self) -> impl Iterator<Item = TypeIdx> + '_ {
        self.iter().filter(|(_, t)| t.spot_eligible).map(|(i, _)| i)
    }
}
