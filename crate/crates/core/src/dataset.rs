//! Battery-cycle datasets: CSV ingestion, synthetic fixtures, partitioning.
//!
//! The on-disk schema is one aggregate row per (battery, cycle) with the
//! exact, order-sensitive header
//!
//! ```text
//! Cycle,Time Measured(Sec),Voltage Measured(V),Current Measured,Temperature Measured,Capacity(Ah),SampleId
//! ```
//!
//! Dialect: comma separator, `.` decimal point, UTF-8, LF or CRLF line ends,
//! header row mandatory, scientific notation accepted in numeric cells.
//! Duplicate (battery, cycle) pairs are rejected.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// The required header columns, in order.
pub const CSV_HEADER: [&str; 7] = [
    "Cycle",
    "Time Measured(Sec)",
    "Voltage Measured(V)",
    "Current Measured",
    "Temperature Measured",
    "Capacity(Ah)",
    "SampleId",
];

/// One per-cycle measurement row.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    /// Cycle index, starting at 0.
    pub cycle: u32,
    /// Duration of the discharge sample, seconds. Strictly positive.
    pub time_s: f64,
    /// Measured voltage, volts.
    pub voltage_v: f64,
    /// Measured current, amperes (negative = discharge).
    pub current_a: f64,
    /// Measured temperature, degrees Celsius.
    pub temp_c: f64,
    /// Delivered capacity, ampere-hours. Strictly positive.
    pub capacity_ah: f64,
    /// Battery tag, e.g. `B0005`.
    pub battery_id: String,
}

/// Records grouped contiguously per battery, cycles strictly increasing
/// within each group. Group order is first appearance in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryDataset {
    records: Vec<CycleRecord>,
    /// Provenance: file path or `"synthetic"`.
    pub source: String,
}

/// Parametric capacity-fade generator for tests and desk-scale runs.
#[derive(Debug, Clone)]
pub struct FadeModel {
    /// Initial capacity, Ah. Strictly positive.
    pub c0_ah: f64,
    /// Per-cycle fade fraction in [0, 1).
    pub rate: f64,
    /// Gaussian noise standard deviation, Ah.
    pub noise_sigma: f64,
    pub shape: FadeShape,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadeShape {
    /// `c(k) = c0 * (1 - rate * k)`
    Linear,
    /// `c(k) = c0 * (1 - rate)^k`
    Exponential,
}

impl FadeModel {
    fn validate(&self) -> Result<()> {
        if !(self.c0_ah > 0.0) {
            return Err(Error::invalid(format!(
                "fade model c0_ah must be > 0, got {}",
                self.c0_ah
            )));
        }
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::invalid(format!(
                "fade rate must be in [0, 1), got {}",
                self.rate
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::invalid(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Noise-free capacity at cycle `k`.
    pub fn capacity_at(&self, k: u32) -> f64 {
        match self.shape {
            FadeShape::Linear => self.c0_ah * (1.0 - self.rate * k as f64),
            FadeShape::Exponential => self.c0_ah * (1.0 - self.rate).powi(k as i32),
        }
    }
}

impl BatteryDataset {
    /// Normalize a record soup into a dataset: group by battery in first
    /// appearance order, sort each group by cycle, reject duplicates.
    pub fn from_records(records: Vec<CycleRecord>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if records.is_empty() {
            return Err(Error::EmptyInput(format!("no records ({source})")));
        }
        let mut order: Vec<String> = Vec::new();
        for r in &records {
            if !order.iter().any(|id| id == &r.battery_id) {
                order.push(r.battery_id.clone());
            }
        }
        let mut grouped = Vec::with_capacity(records.len());
        for id in &order {
            let mut group: Vec<CycleRecord> = records
                .iter()
                .filter(|r| &r.battery_id == id)
                .cloned()
                .collect();
            group.sort_by_key(|r| r.cycle);
            for pair in group.windows(2) {
                if pair[0].cycle == pair[1].cycle {
                    return Err(Error::DuplicateCycle {
                        battery_id: id.clone(),
                        cycle: pair[0].cycle,
                    });
                }
            }
            grouped.extend(group);
        }
        Ok(BatteryDataset {
            records: grouped,
            source,
        })
    }

    pub fn records(&self) -> &[CycleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Battery ids in group order.
    pub fn battery_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.records {
            if ids.last() != Some(&r.battery_id.as_str()) {
                ids.push(&r.battery_id);
            }
        }
        ids
    }

    /// All records of one battery, cycle ascending.
    pub fn battery(&self, id: &str) -> Vec<&CycleRecord> {
        self.records.iter().filter(|r| r.battery_id == id).collect()
    }

    /// Serialize back to the canonical CSV schema. Floats are written with
    /// the shortest decimal that round-trips, so parse(to_csv(ds)) == ds.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&CSV_HEADER.join(","));
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.cycle, r.time_s, r.voltage_v, r.current_a, r.temp_c, r.capacity_ah, r.battery_id
            ));
        }
        out
    }
}

/// Parse battery-cycle CSV text into a dataset.
///
/// Errors name the offending header column, or the (row, column) of the
/// first bad cell; a file without data rows is an empty-input error.
pub fn parse_battery_csv(text: &str, source: impl Into<String>) -> Result<BatteryDataset> {
    let source = source.into();
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));

    let header = lines
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::EmptyInput(format!("no header row ({source})")))?;
    let header_cells: Vec<&str> = header.split(',').map(str::trim).collect();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        match header_cells.get(i) {
            Some(cell) if cell == expected => {}
            _ => {
                return Err(Error::Schema {
                    column: (*expected).to_string(),
                    expected: CSV_HEADER.join(","),
                })
            }
        }
    }
    if header_cells.len() > CSV_HEADER.len() {
        return Err(Error::Schema {
            column: header_cells[CSV_HEADER.len()].to_string(),
            expected: CSV_HEADER.join(","),
        });
    }

    let mut records = Vec::new();
    let mut row_no = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        row_no += 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                row: row_no,
                column: "(row)".to_string(),
                message: format!("expected {} fields, got {}", CSV_HEADER.len(), cells.len()),
            });
        }
        let cycle: u32 = cells[0].parse().map_err(|_| Error::Parse {
            row: row_no,
            column: CSV_HEADER[0].to_string(),
            message: format!("`{}` is not a non-negative integer", cells[0]),
        })?;
        let mut floats = [0.0f64; 5];
        for (slot, col) in floats.iter_mut().zip(1..=5) {
            let cell = cells[col];
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: CSV_HEADER[col].to_string(),
                message: format!("`{cell}` is not a decimal number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: CSV_HEADER[col].to_string(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            *slot = value;
        }
        let battery_id = cells[6].to_string();
        if battery_id.is_empty() {
            return Err(Error::Parse {
                row: row_no,
                column: CSV_HEADER[6].to_string(),
                message: "battery id is empty".to_string(),
            });
        }
        let record = CycleRecord {
            cycle,
            time_s: floats[0],
            voltage_v: floats[1],
            current_a: floats[2],
            temp_c: floats[3],
            capacity_ah: floats[4],
            battery_id,
        };
        if !(record.time_s > 0.0) {
            return Err(Error::Parse {
                row: row_no,
                column: CSV_HEADER[1].to_string(),
                message: format!("time must be > 0, got {}", record.time_s),
            });
        }
        if !(record.capacity_ah > 0.0) {
            return Err(Error::Parse {
                row: row_no,
                column: CSV_HEADER[5].to_string(),
                message: format!("capacity must be > 0, got {}", record.capacity_ah),
            });
        }
        records.push(record);
    }

    if records.is_empty() {
        return Err(Error::EmptyInput(format!("no data rows ({source})")));
    }
    BatteryDataset::from_records(records, source)
}

/// Generate a seeded artificial degradation series.
///
/// Capacity follows the fade model plus Gaussian noise, clamped strictly
/// above zero. Voltage, current and temperature sit at fixed plausible
/// constants (3.2 V, -2.0 A, 35 degC) with small seeded jitter; discharge
/// time shrinks in proportion to remaining capacity.
pub fn synthesize_fade_series(
    model: &FadeModel,
    n_cycles: u32,
    battery_id: &str,
) -> Result<BatteryDataset> {
    model.validate()?;
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles must be >= 1"));
    }
    let mut rng = Rng::seed_from_u64(model.seed);
    let mut records = Vec::with_capacity(n_cycles as usize);
    for k in 0..n_cycles {
        let capacity = (model.capacity_at(k) + rng.normal(0.0, model.noise_sigma)).max(1e-9);
        records.push(CycleRecord {
            cycle: k,
            time_s: (3600.0 * capacity / model.c0_ah + rng.normal(0.0, 5.0)).max(1.0),
            voltage_v: 3.2 + rng.normal(0.0, 0.02),
            current_a: -2.0 + rng.normal(0.0, 0.01),
            temp_c: 35.0 + rng.normal(0.0, 0.5),
            capacity_ah: capacity,
            battery_id: battery_id.to_string(),
        });
    }
    BatteryDataset::from_records(records, "synthetic")
}

/// Split a dataset into the batteries named in `ids` and the remainder.
/// Record order is preserved on both sides.
pub fn partition_by_battery(
    ds: &BatteryDataset,
    ids: &[&str],
) -> Result<(BatteryDataset, BatteryDataset)> {
    let available = ds.battery_ids();
    for id in ids {
        if !available.contains(id) {
            return Err(Error::UnknownBattery {
                requested: (*id).to_string(),
                available: available.iter().map(|s| s.to_string()).collect(),
            });
        }
    }
    let mut selected = Vec::new();
    let mut rest = Vec::new();
    for r in ds.records() {
        if ids.contains(&r.battery_id.as_str()) {
            selected.push(r.clone());
        } else {
            rest.push(r.clone());
        }
    }
    let selected = BatteryDataset {
        records: selected,
        source: ds.source.clone(),
    };
    let rest = BatteryDataset {
        records: rest,
        source: ds.source.clone(),
    };
    Ok((selected, rest))
}
