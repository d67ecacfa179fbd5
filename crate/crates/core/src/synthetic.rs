//! Planted hub/periphery territories for testing and demos.
//!
//! Each unit is a hub with probability `hub_share`. Hubs draw territorial
//! attributes from urban-leaning distributions and indicators shifted by
//! `signal` in the favourable direction; peripheral units the reverse. The
//! observed class is the planted one, flipped with probability `label_noise`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::config::{GroupConfig, InputConfig, RunConfig};
use crate::error::Error;
use crate::indices::{Direction, IndicatorSpec, IndicatorTable, Polarity};
use crate::io::{fmt_f64, Roster};
use crate::map::square_feature;
use crate::network::{AttributeProfile, ATTRIBUTE_COLUMNS};
use crate::sampler::SpinConfiguration;
use crate::seed;

/// Indicator name, polarity and thematic group of the synthetic table.
pub const INDICATORS: [(&str, i64, &str); 19] = [
    ("elderly_share", -1, "demographic"),
    ("youth_share", 1, "demographic"),
    ("families_with_minors", 1, "demographic"),
    ("elderly_living_alone", -1, "demographic"),
    ("neet_share", -1, "education"),
    ("graduate_share", 1, "education"),
    ("diploma_share", 1, "education"),
    ("log_median_income", 1, "income"),
    ("working_poor_share", -1, "income"),
    ("precarious_jobs", -1, "employment"),
    ("employment_rate", 1, "employment"),
    ("low_work_intensity", -1, "employment"),
    ("attraction_index", 1, "attractiveness"),
    ("self_containment", 1, "attractiveness"),
    ("commuting_balance", 1, "attractiveness"),
    ("static_residents", -1, "mobility"),
    ("internal_movers", -1, "mobility"),
    ("outbound_movers", 1, "mobility"),
    ("inbound_movers", 1, "mobility"),
];

pub fn indicator_specs() -> Vec<IndicatorSpec> {
    INDICATORS
        .iter()
        .map(|&(name, pol, group)| IndicatorSpec {
            name: name.into(),
            polarity: Polarity::try_from(pol).expect("static polarity"),
            group: group.into(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_units: usize,
    pub hub_share: f64,
    /// Separation of hub and peripheral indicator means, in noise units.
    pub signal: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_units: 966, hub_share: 0.4, signal: 1.0, label_noise: 0.03, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub unit_ids: Vec<String>,
    pub specs: Vec<IndicatorSpec>,
    /// Row-major `n_units x 19` indicator values.
    pub values: Vec<f64>,
    pub profiles: Vec<AttributeProfile>,
    /// Observed labels, after noise.
    pub classes: Vec<i8>,
    /// Planted labels.
    pub planted: Vec<i8>,
}

fn categorical(rng: &mut impl rand::Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = seed::rng(spec.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let specs = indicator_specs();
    let groups: Vec<&str> = INDICATORS.iter().map(|t| t.2).collect();
    let mut unit_ids = Vec::with_capacity(spec.n_units);
    let mut values = Vec::with_capacity(spec.n_units * specs.len());
    let mut profiles = Vec::with_capacity(spec.n_units);
    let mut classes = Vec::with_capacity(spec.n_units);
    let mut planted = Vec::with_capacity(spec.n_units);

    for u in 0..spec.n_units {
        let hub = rng.random::<f64>() < spec.hub_share;
        let (alt, pop, sup, coast, urb): (&[f64], &[f64], &[f64], f64, &[f64]) = if hub {
            (&[0.6, 0.3, 0.1], &[0.15, 0.6, 0.25], &[0.1, 0.5, 0.4], 0.2, &[0.4, 0.5, 0.1])
        } else {
            (&[0.3, 0.4, 0.3], &[0.85, 0.15, 0.0], &[0.3, 0.5, 0.2], 0.1, &[0.02, 0.28, 0.7])
        };
        let codes = [
            categorical(&mut rng, alt) as i64 + 1,
            categorical(&mut rng, pop) as i64 + 1,
            categorical(&mut rng, sup) as i64 + 1,
            i64::from(rng.random::<f64>() < coast),
            categorical(&mut rng, urb) as i64 + 1,
        ];
        profiles.push(AttributeProfile::from_codes(u, codes).expect("codes in domain"));

        let latent = spec.signal * if hub { 1.0 } else { -1.0 } + noise.sample(&mut rng);
        let mut group_level = Vec::new();
        for (k, s) in specs.iter().enumerate() {
            if k == 0 || groups[k] != groups[k - 1] {
                group_level.push(latent + 0.7 * noise.sample(&mut rng));
            }
            let g = *group_level.last().expect("group started");
            let x = 50.0 + 5.0 * s.polarity.sign() * (g + 0.7 * noise.sample(&mut rng));
            values.push(x);
        }

        let s: i8 = if hub { 1 } else { -1 };
        planted.push(s);
        classes.push(if rng.random::<f64>() < spec.label_noise { -s } else { s });
        unit_ids.push(format!("U{u:04}"));
    }
    SyntheticData { unit_ids, specs, values, profiles, classes, planted }
}

impl SyntheticData {
    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    /// The same data as [`crate::io::ingest`] would return for the written table.
    pub fn roster(&self) -> Roster {
        let values = DMatrix::from_row_slice(self.n_units(), self.specs.len(), &self.values);
        Roster {
            table: IndicatorTable::new(self.unit_ids.clone(), values, self.specs.clone()).expect("well-formed table"),
            profiles: self.profiles.clone(),
            reference: SpinConfiguration::new(self.classes.clone()).expect("valid spins"),
        }
    }

    pub fn write_units_csv(&self, path: &Path) -> Result<(), Error> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::format(path, e);
        let mut header = vec!["unit_id".to_string()];
        header.extend(self.specs.iter().map(|s| s.name.clone()));
        header.extend(ATTRIBUTE_COLUMNS.iter().map(|c| c.to_string()));
        header.push("CLASS".into());
        w.write_record(&header).map_err(err)?;
        let p = self.specs.len();
        for (u, id) in self.unit_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.values[u * p..(u + 1) * p].iter().map(|&v| fmt_f64(v)));
            row.extend(self.profiles[u].codes().iter().map(|c| c.to_string()));
            row.push(self.classes[u].to_string());
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Square cells laid out on a near-square grid.
    pub fn geometry(&self) -> Value {
        let cols = (self.n_units() as f64).sqrt().ceil().max(1.0) as usize;
        let side = 0.05;
        let features: Vec<Value> = self
            .unit_ids
            .iter()
            .enumerate()
            .map(|(k, id)| {
                let (x, y) = ((k % cols) as f64, (k / cols) as f64);
                square_feature(id, 12.0 + x * side, 42.0 + y * side, side, "unit_id")
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }

    /// A run configuration over files named relative to `base_dir`.
    pub fn config(&self, base_dir: &Path, units: &str, geometry: Option<&str>) -> RunConfig {
        let mut groups: Vec<GroupConfig> = Vec::new();
        for s in &self.specs {
            if !groups.iter().any(|g| g.name == s.group) {
                groups.push(GroupConfig { name: s.group.clone(), direction: Direction::Positive });
            }
        }
        RunConfig {
            seed: 0,
            input: InputConfig {
                units: units.into(),
                geometry: geometry.map(PathBuf::from),
                class_column: "CLASS".into(),
                geometry_id_property: "unit_id".into(),
            },
            indicators: self.specs.clone(),
            groups,
            field: Default::default(),
            graph: Default::default(),
            schedule: Default::default(),
            chain: Default::default(),
            replicates: Default::default(),
            diagnostics: Default::default(),
            conformal: Default::default(),
            output: Default::default(),
            base_dir: base_dir.to_path_buf(),
        }
    }

    /// Writes `units.csv`, `geometry.geojson` and `config.toml` into `dir`
    /// and returns the config path.
    pub fn write_all(&self, dir: &Path) -> Result<PathBuf, Error> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_units_csv(&dir.join("units.csv"))?;
        crate::io::write_json(&dir.join("geometry.geojson"), &self.geometry())?;
        let cfg = self.config(dir, "units.csv", Some("geometry.geojson"));
        let path = dir.join("config.toml");
        std::fs::write(&path, cfg.to_toml_string()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
