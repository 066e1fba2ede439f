use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an attribute in its [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrId(pub usize);

impl std::fmt::Display for AttrId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// What to do with a numeric cell that falls outside every bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutOfRange {
    #[default]
    ClampToEdgeBin,
    RejectRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BinningKind {
    /// `edges[i] <= x < edges[i + 1]` maps to domain index `i`.
    NumericRanges {
        edges: Vec<f64>,
    },
    /// Raw cell value to domain label.
    CategoryMap {
        map: BTreeMap<String, String>,
    },
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningRule {
    #[serde(flatten)]
    pub kind: BinningKind,
    #[serde(default)]
    pub out_of_range: OutOfRange,
}

impl BinningRule {
    pub fn numeric(edges: Vec<f64>, out_of_range: OutOfRange) -> Self {
        Self {
            kind: BinningKind::NumericRanges { edges },
            out_of_range,
        }
    }
}

/// Outcome of binning a single cell.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Binned {
    Index(u32),
    Rejected,
    Unparsable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub domain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<BinningRule>,
}

impl AttributeDef {
    pub fn categorical(name: impl Into<String>, domain: &[&str]) -> Self {
        Self {
            name: name.into(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            binning: None,
        }
    }

    pub fn domain_size(&self) -> usize {
        self.domain.len()
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.domain
            .iter()
            .position(|d| d == label)
            .map(|i| i as u32)
    }

    pub(crate) fn bin(&self, cell: &str) -> Binned {
        let cell = cell.trim();
        let Some(rule) = &self.binning else {
            return self.index_of(cell).map_or(Binned::Rejected, Binned::Index);
        };
        match &rule.kind {
            BinningKind::Identity => self.index_of(cell).map_or(Binned::Rejected, Binned::Index),
            BinningKind::CategoryMap { map } => match map.get(cell) {
                Some(bucket) => self
                    .index_of(bucket)
                    .map_or(Binned::Rejected, Binned::Index),
                None => Binned::Rejected,
            },
            BinningKind::NumericRanges { edges } => {
                let x: f64 = match cell.parse() {
                    Ok(x) if f64::is_nan(x) => {
                        return Binned::Unparsable(format!("`{cell}` is NaN"))
                    }
                    Ok(x) => x,
                    Err(_) => return Binned::Unparsable(format!("`{cell}` is not a number")),
                };
                let bins = edges.len() - 1;
                if x < edges[0] || x >= edges[bins] {
                    return match rule.out_of_range {
                        OutOfRange::RejectRow => Binned::Rejected,
                        OutOfRange::ClampToEdgeBin if x < edges[0] => Binned::Index(0),
                        OutOfRange::ClampToEdgeBin => Binned::Index((bins - 1) as u32),
                    };
                }
                // first edge strictly greater than x, minus one
                let upper = edges.partition_point(|e| *e <= x);
                Binned::Index((upper - 1) as u32)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::InvalidSchema(format!(
                "attribute `{}`: {msg}",
                self.name
            )))
        };
        if self.domain.is_empty() {
            return fail("domain is empty".into());
        }
        if self.domain.len() > u32::MAX as usize {
            return fail("domain too large".into());
        }
        let mut seen = HashSet::new();
        for label in &self.domain {
            if !seen.insert(label) {
                return fail(format!("duplicate domain label `{label}`"));
            }
        }
        match self.binning.as_ref().map(|b| &b.kind) {
            Some(BinningKind::NumericRanges { edges }) => {
                if edges.len() != self.domain.len() + 1 {
                    return fail(format!(
                        "{} edges cannot define {} bins",
                        edges.len(),
                        self.domain.len()
                    ));
                }
                if edges.iter().any(|e| !e.is_finite()) {
                    return fail("bin edges must be finite".into());
                }
                if edges.windows(2).any(|w| w[0] >= w[1]) {
                    return fail("bin edges must be strictly increasing".into());
                }
            }
            Some(BinningKind::CategoryMap { map }) => {
                if let Some((raw, bucket)) = map.iter().find(|(_, b)| self.index_of(b).is_none()) {
                    return fail(format!("`{raw}` maps to undeclared bucket `{bucket}`"));
                }
            }
            Some(BinningKind::Identity) | None => {}
        }
        Ok(())
    }
}

/// Ordered attribute list with declared (never inferred) domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    attributes: Vec<AttributeDef>,
    #[serde(skip)]
    by_name: HashMap<String, AttrId>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    attributes: Vec<AttributeDef>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.attributes)
    }
}

impl From<Schema> for RawSchema {
    fn from(s: Schema) -> Self {
        RawSchema {
            attributes: s.attributes,
        }
    }
}

impl Schema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::InvalidSchema("no attributes declared".into()));
        }
        let mut by_name = HashMap::new();
        for (i, attr) in attributes.iter().enumerate() {
            attr.validate()?;
            if by_name.insert(attr.name.clone(), AttrId(i)).is_some() {
                return Err(Error::InvalidSchema(format!(
                    "duplicate attribute name `{}`",
                    attr.name
                )));
            }
        }
        Ok(Self {
            attributes,
            by_name,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attr_ids(&self) -> impl Iterator<Item = AttrId> + '_ {
        (0..self.attributes.len()).map(AttrId)
    }

    pub fn attribute(&self, id: AttrId) -> Result<&AttributeDef> {
        self.attributes
            .get(id.0)
            .ok_or_else(|| Error::UnknownAttribute(id.to_string()))
    }

    pub fn id_of(&self, name: &str) -> Result<AttrId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn domain_size(&self, id: AttrId) -> Result<usize> {
        Ok(self.attribute(id)?.domain_size())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn age() -> AttributeDef {
        AttributeDef {
            name: "age".into(),
            domain: vec!["[50,60)".into(), "[60,70)".into(), "[70,80)".into()],
            binning: Some(BinningRule::numeric(
                vec![50.0, 60.0, 70.0, 80.0],
                OutOfRange::ClampToEdgeBin,
            )),
        }
    }

    #[test]
    fn numeric_cell_lands_in_its_range() {
        let a = age();
        assert_eq!(a.bin("63"), Binned::Index(1));
        assert_eq!(a.bin("60"), Binned::Index(1));
        assert_eq!(a.bin("59.99"), Binned::Index(0));
        assert_eq!(a.domain[1], "[60,70)");
    }

    #[test]
    fn clamp_and_reject_policies() {
        let mut a = age();
        assert_eq!(a.bin("12"), Binned::Index(0));
        assert_eq!(a.bin("80"), Binned::Index(2));
        assert_eq!(a.bin("1000"), Binned::Index(2));
        a.binning.as_mut().unwrap().out_of_range = OutOfRange::RejectRow;
        assert_eq!(a.bin("12"), Binned::Rejected);
        assert_eq!(a.bin("80"), Binned::Rejected);
        assert!(matches!(a.bin("abc"), Binned::Unparsable(_)));
    }

    #[test]
    fn category_map() {
        let mut map = BTreeMap::new();
        map.insert("Circulatory".to_string(), "other".to_string());
        map.insert("Diabetes".to_string(), "diabetes".to_string());
        let a = AttributeDef {
            name: "diag".into(),
            domain: vec!["diabetes".into(), "other".into()],
            binning: Some(BinningRule {
                kind: BinningKind::CategoryMap { map },
                out_of_range: OutOfRange::RejectRow,
            }),
        };
        assert_eq!(a.bin("Circulatory"), Binned::Index(1));
        assert_eq!(a.bin("Injury"), Binned::Rejected);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_bad_schemas() {
        let dup = vec![
            AttributeDef::categorical("a", &["x"]),
            AttributeDef::categorical("a", &["y"]),
        ];
        assert!(Schema::new(dup).is_err());
        assert!(Schema::new(vec![AttributeDef::categorical("a", &[])]).is_err());
        assert!(Schema::new(vec![AttributeDef::categorical("a", &["x", "x"])]).is_err());
        let mut bad_edges = age();
        bad_edges.binning = Some(BinningRule::numeric(
            vec![50.0, 70.0, 60.0, 80.0],
            OutOfRange::ClampToEdgeBin,
        ));
        assert!(Schema::new(vec![bad_edges]).is_err());
        let mut few_edges = age();
        few_edges.binning = Some(BinningRule::numeric(
            vec![50.0, 60.0],
            OutOfRange::ClampToEdgeBin,
        ));
        assert!(Schema::new(vec![few_edges]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"attributes":[
            {"name":"age","domain":["[50,60)","[60,70)","[70,80)"],
             "binning":{"kind":"numeric-ranges","edges":[50,60,70,80],"out_of_range":"reject-row"}},
            {"name":"gender","domain":["Female","Male"]}
        ]}"#;
        let schema = Schema::from_json_str(json).unwrap();
        assert_eq!(schema.len(), 2);
        assert_eq!(schema.id_of("gender").unwrap(), AttrId(1));
        let back = Schema::from_json_str(&serde_json::to_string(&schema).unwrap()).unwrap();
        assert_eq!(back, schema);
    }
}
