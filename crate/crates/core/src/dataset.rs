//! Ingestion of floating-car logs into day tensors.
//!
//! A [`DayTensor`] holds `n` days × `p` sections × `T+1` slots of speeds
//! with a presence mask. Logs are binned into half-open slots
//! `[start, start + slot_minutes)`, averaged per cell, imputed from a
//! reference subset's per-(section, slot) means, and split into
//! contiguous train / validation / test runs of whole days.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("no history for section `{section}` at slot {slot}")]
    NoHistory { section: String, slot: usize },
    #[error("too few days: {0}")]
    TooFewDays(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid slot spec: {0}")]
    InvalidSlotSpec(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    fn parse(row: usize, column: &str, message: impl Into<String>) -> Self {
        DatasetError::Parse {
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        let row = e
            .position()
            .map(|p| p.line().saturating_sub(1) as usize)
            .unwrap_or(0);
        DatasetError::parse(row, "", e.to_string())
    }
}

/// One probe-vehicle observation with its road section already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLog {
    pub vehicle_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub section_id: String,
    /// km/h
    pub speed: f64,
}

/// Header names of the four raw-log columns.
#[derive(Debug, Clone)]
pub struct ColumnMapping {
    pub vehicle_id: String,
    pub timestamp: String,
    pub section_id: String,
    pub speed: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            vehicle_id: "vehicle_id".into(),
            timestamp: "timestamp".into(),
            section_id: "section_id".into(),
            speed: "speed".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimestampFormat {
    Epoch,
    Iso,
}

fn parse_iso(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

/// Parses a raw-log CSV. The timestamp column is either integer epoch
/// seconds or ISO-8601; the format is detected on the first data row and
/// must stay the same for the whole file.
pub fn parse_raw_logs<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
) -> Result<Vec<RawLog>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let (iv, it, is, isp) = (
        find(&mapping.vehicle_id)?,
        find(&mapping.timestamp)?,
        find(&mapping.section_id)?,
        find(&mapping.speed)?,
    );

    let mut format = None;
    let mut logs = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| DatasetError::parse(row, "", e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");

        let ts_raw = field(it);
        let fmt = *format.get_or_insert(if ts_raw.parse::<i64>().is_ok() {
            TimestampFormat::Epoch
        } else {
            TimestampFormat::Iso
        });
        let timestamp = match fmt {
            TimestampFormat::Epoch => ts_raw.parse::<i64>().ok(),
            TimestampFormat::Iso => parse_iso(ts_raw),
        }
        .ok_or_else(|| {
            DatasetError::parse(row, &mapping.timestamp, format!("bad timestamp `{ts_raw}`"))
        })?;

        let speed_raw = field(isp);
        let speed: f64 = speed_raw.parse().map_err(|_| {
            DatasetError::parse(row, &mapping.speed, format!("bad speed `{speed_raw}`"))
        })?;
        if !speed.is_finite() || speed < 0.0 {
            return Err(DatasetError::parse(
                row,
                &mapping.speed,
                format!("speed must be finite and non-negative, got {speed}"),
            ));
        }
        let section_id = field(is).to_string();
        if section_id.is_empty() {
            return Err(DatasetError::parse(
                row,
                &mapping.section_id,
                "empty section id",
            ));
        }
        logs.push(RawLog {
            vehicle_id: field(iv).to_string(),
            timestamp,
            section_id,
            speed,
        });
    }
    Ok(logs)
}

/// Reads a section universe: one id per line, blank lines skipped, an
/// optional `section_id` header line ignored.
pub fn read_section_list<R: Read>(mut reader: R) -> Result<Vec<String>, DatasetError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let id = line.trim();
        if id.is_empty() || (i == 0 && id == "section_id") {
            continue;
        }
        out.push(id.to_string());
    }
    let unique: BTreeSet<_> = out.iter().collect();
    if unique.len() != out.len() {
        return Err(DatasetError::InvalidTensor("duplicate section ids".into()));
    }
    Ok(out)
}

/// Daily observation window cut into equal slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSpec {
    pub day_start: NaiveTime,
    pub day_end: NaiveTime,
    pub slot_minutes: u32,
    /// Offset of the local zone from UTC; logs are binned in local time.
    pub utc_offset_minutes: i32,
}

impl SlotSpec {
    pub fn new(
        day_start: NaiveTime,
        day_end: NaiveTime,
        slot_minutes: u32,
    ) -> Result<Self, DatasetError> {
        let spec = Self {
            day_start,
            day_end,
            slot_minutes,
            utc_offset_minutes: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_utc_offset(mut self, minutes: i32) -> Self {
        self.utc_offset_minutes = minutes;
        self
    }

    fn window_seconds(&self) -> i64 {
        (self.day_end.num_seconds_from_midnight() as i64)
            - (self.day_start.num_seconds_from_midnight() as i64)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if self.slot_minutes == 0 {
            return Err(DatasetError::InvalidSlotSpec(
                "slot_minutes must be positive".into(),
            ));
        }
        let window = self.window_seconds();
        let slot = self.slot_minutes as i64 * 60;
        if window <= 0 || window % slot != 0 {
            return Err(DatasetError::InvalidSlotSpec(format!(
                "{} minute slots do not divide the window {}..{}",
                self.slot_minutes, self.day_start, self.day_end
            )));
        }
        if window / slot < 2 {
            return Err(DatasetError::InvalidSlotSpec(
                "need at least two slots".into(),
            ));
        }
        Ok(())
    }

    /// Number of slots per day, `T + 1`.
    pub fn slot_count(&self) -> usize {
        (self.window_seconds() / (self.slot_minutes as i64 * 60)) as usize
    }

    /// Local day and slot index of a timestamp, if inside the window.
    pub fn locate(&self, timestamp: i64) -> Option<(NaiveDate, usize)> {
        let local = DateTime::from_timestamp(timestamp + self.utc_offset_minutes as i64 * 60, 0)?
            .naive_utc();
        let secs = local.time().num_seconds_from_midnight() as i64;
        let offset = secs - self.day_start.num_seconds_from_midnight() as i64;
        if offset < 0 || offset >= self.window_seconds() {
            return None;
        }
        Some((
            local.date(),
            (offset / (self.slot_minutes as i64 * 60)) as usize,
        ))
    }
}

/// `n` days × `p` sections × `slots` speeds with a presence mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTensor {
    days: Vec<NaiveDate>,
    sections: Vec<String>,
    slots: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl DayTensor {
    /// `values` and `mask` are laid out day-major, then section, then slot.
    /// Missing cells may hold any value; it is replaced by NaN.
    pub fn new(
        days: Vec<NaiveDate>,
        sections: Vec<String>,
        slots: usize,
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self, DatasetError> {
        let len = days.len() * sections.len() * slots;
        if values.len() != len || mask.len() != len {
            return Err(DatasetError::ShapeMismatch(format!(
                "expected {len} cells, got {} values and {} mask flags",
                values.len(),
                mask.len()
            )));
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DatasetError::InvalidTensor(
                "day identifiers must be strictly increasing".into(),
            ));
        }
        for (v, &present) in values.iter_mut().zip(&mask) {
            if present {
                if !v.is_finite() {
                    return Err(DatasetError::InvalidTensor(
                        "non-finite present value".into(),
                    ));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            days,
            sections,
            slots,
            values,
            mask,
        })
    }

    /// Fully observed tensor from one `p × slots` matrix per day.
    pub fn from_day_matrices(
        days: Vec<NaiveDate>,
        sections: Vec<String>,
        matrices: &[DMatrix<f64>],
    ) -> Result<Self, DatasetError> {
        let p = sections.len();
        let slots = matrices.first().map(|m| m.ncols()).unwrap_or(0);
        if matrices.len() != days.len() {
            return Err(DatasetError::ShapeMismatch(
                "one matrix per day required".into(),
            ));
        }
        let mut values = Vec::with_capacity(days.len() * p * slots);
        for m in matrices {
            if m.nrows() != p || m.ncols() != slots {
                return Err(DatasetError::ShapeMismatch(format!(
                    "day matrix is {}x{}, expected {p}x{slots}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for k in 0..p {
                for t in 0..slots {
                    values.push(m[(k, t)]);
                }
            }
        }
        let mask = vec![true; values.len()];
        Self::new(days, sections, slots, values, mask)
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn sections(&self) -> &[String] {
        &self.sections
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    /// `T + 1`.
    pub fn n_slots(&self) -> usize {
        self.slots
    }

    fn index(&self, day: usize, section: usize, slot: usize) -> usize {
        (day * self.sections.len() + section) * self.slots + slot
    }

    pub fn value(&self, day: usize, section: usize, slot: usize) -> Option<f64> {
        let i = self.index(day, section, slot);
        self.mask[i].then_some(self.values[i])
    }

    /// Raw cell value; NaN when missing.
    pub fn raw(&self, day: usize, section: usize, slot: usize) -> f64 {
        self.values[self.index(day, section, slot)]
    }

    pub fn is_present(&self, day: usize, section: usize, slot: usize) -> bool {
        self.mask[self.index(day, section, slot)]
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// `p × slots` matrix of one day; missing cells are NaN.
    pub fn day_matrix(&self, day: usize) -> DMatrix<f64> {
        let (p, s) = (self.sections.len(), self.slots);
        DMatrix::from_fn(p, s, |k, t| self.values[self.index(day, k, t)])
    }

    pub fn day_matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.n_days()).map(|i| self.day_matrix(i)).collect()
    }

    /// Days `range` as a new tensor.
    pub fn select_days(&self, range: std::ops::Range<usize>) -> DayTensor {
        let stride = self.sections.len() * self.slots;
        DayTensor {
            days: self.days[range.clone()].to_vec(),
            sections: self.sections.clone(),
            slots: self.slots,
            values: self.values[range.start * stride..range.end * stride].to_vec(),
            mask: self.mask[range.start * stride..range.end * stride].to_vec(),
        }
    }

    /// Days at arbitrary (sorted) indices.
    pub fn select_day_indices(&self, indices: &[usize]) -> DayTensor {
        let stride = self.sections.len() * self.slots;
        let mut values = Vec::with_capacity(indices.len() * stride);
        let mut mask = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            values.extend_from_slice(&self.values[i * stride..(i + 1) * stride]);
            mask.extend_from_slice(&self.mask[i * stride..(i + 1) * stride]);
        }
        DayTensor {
            days: indices.iter().map(|&i| self.days[i]).collect(),
            sections: self.sections.clone(),
            slots: self.slots,
            values,
            mask,
        }
    }

    /// Concatenates tensors with identical sections and slots; days must
    /// remain strictly increasing.
    pub fn concat(parts: &[&DayTensor]) -> Result<DayTensor, DatasetError> {
        let first = parts
            .first()
            .ok_or_else(|| DatasetError::ShapeMismatch("nothing to concatenate".into()))?;
        let mut days = Vec::new();
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for part in parts {
            if part.sections != first.sections || part.slots != first.slots {
                return Err(DatasetError::ShapeMismatch(
                    "sections or slots differ between parts".into(),
                ));
            }
            days.extend_from_slice(&part.days);
            values.extend_from_slice(&part.values);
            mask.extend_from_slice(&part.mask);
        }
        DayTensor::new(days, first.sections.clone(), first.slots, values, mask)
    }
}

/// Bins logs into slots and averages per (day, section, slot). Logs outside
/// the daily window are ignored; cells without logs are missing.
pub fn aggregate(
    logs: &[RawLog],
    spec: &SlotSpec,
    sections: &[String],
) -> Result<DayTensor, DatasetError> {
    spec.validate()?;
    let section_index: HashMap<&str, usize> = sections
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut located = Vec::with_capacity(logs.len());
    let mut dates = BTreeSet::new();
    for log in logs {
        let k = *section_index
            .get(log.section_id.as_str())
            .ok_or_else(|| DatasetError::UnknownSection(log.section_id.clone()))?;
        if let Some((date, slot)) = spec.locate(log.timestamp) {
            dates.insert(date);
            located.push((date, k, slot, log.speed));
        }
    }
    let days: Vec<NaiveDate> = dates.into_iter().collect();
    let day_index: HashMap<NaiveDate, usize> =
        days.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let (p, s) = (sections.len(), spec.slot_count());
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); days.len() * p * s];
    for (date, k, slot, speed) in located {
        cells[(day_index[&date] * p + k) * s + slot].push(speed);
    }
    let mut values = Vec::with_capacity(cells.len());
    let mut mask = Vec::with_capacity(cells.len());
    for mut cell in cells {
        if cell.is_empty() {
            values.push(f64::NAN);
            mask.push(false);
        } else {
            // Sorted summation makes the mean independent of log order.
            cell.sort_by(f64::total_cmp);
            values.push(cell.iter().sum::<f64>() / cell.len() as f64);
            mask.push(true);
        }
    }
    DayTensor::new(days, sections.to_vec(), s, values, mask)
}

/// Fills missing cells with the mean of present `reference` cells at the
/// same (section, slot). Averages come from present reference cells only.
pub fn impute_historical(
    tensor: &DayTensor,
    reference: &DayTensor,
) -> Result<DayTensor, DatasetError> {
    if tensor.sections != reference.sections || tensor.slots != reference.slots {
        return Err(DatasetError::ShapeMismatch(
            "reference must have the same sections and slots".into(),
        ));
    }
    let (p, s) = (tensor.n_sections(), tensor.n_slots());
    let mut sums = vec![0.0; p * s];
    let mut counts = vec![0usize; p * s];
    for i in 0..reference.n_days() {
        for k in 0..p {
            for t in 0..s {
                if let Some(v) = reference.value(i, k, t) {
                    sums[k * s + t] += v;
                    counts[k * s + t] += 1;
                }
            }
        }
    }
    let mut out = tensor.clone();
    for i in 0..tensor.n_days() {
        for k in 0..p {
            for t in 0..s {
                let idx = out.index(i, k, t);
                if out.mask[idx] {
                    continue;
                }
                let c = counts[k * s + t];
                if c == 0 {
                    return Err(DatasetError::NoHistory {
                        section: tensor.sections[k].clone(),
                        slot: t,
                    });
                }
                out.values[idx] = sums[k * s + t] / c as f64;
                out.mask[idx] = true;
            }
        }
    }
    Ok(out)
}

/// Fractions of days for the three contiguous subsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.63,
            validation: 0.27,
            test: 0.10,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, DatasetError> {
        for (name, f) in [("train", train), ("validation", validation), ("test", test)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(DatasetError::InvalidSplit(format!(
                    "{name} fraction {f} not in (0,1)"
                )));
            }
        }
        if (train + validation + test - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit("fractions must sum to 1".into()));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    /// Subset sizes for `n` days: validation and test are rounded to the
    /// nearest integer, train takes the remainder.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize), DatasetError> {
        if n < 3 {
            return Err(DatasetError::TooFewDays(format!(
                "{n} days, need at least 3"
            )));
        }
        let val = (self.validation * n as f64).round() as usize;
        let test = (self.test * n as f64).round() as usize;
        let train = n.saturating_sub(val + test);
        if train == 0 || val == 0 || test == 0 {
            return Err(DatasetError::TooFewDays(format!(
                "{n} days give an empty subset ({train}/{val}/{test})"
            )));
        }
        Ok((train, val, test))
    }
}

/// Splits into chronological train → validation → test runs.
pub fn split_days(
    tensor: &DayTensor,
    spec: &SplitSpec,
) -> Result<(DayTensor, DayTensor, DayTensor), DatasetError> {
    let (train, val, _) = spec.sizes(tensor.n_days())?;
    let n = tensor.n_days();
    Ok((
        tensor.select_days(0..train),
        tensor.select_days(train..train + val),
        tensor.select_days(train + val..n),
    ))
}

/// Writes the `day,slot,<sections...>` CSV, one row per (day, slot);
/// missing cells are empty fields. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn save_days<W: Write>(tensor: &DayTensor, writer: W) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["day".to_string(), "slot".to_string()];
    header.extend(tensor.sections.iter().cloned());
    wtr.write_record(&header).map_err(csv_io)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..tensor.n_days() {
        for t in 0..tensor.slots {
            row.clear();
            row.push(tensor.days[i].format("%Y-%m-%d").to_string());
            row.push(t.to_string());
            for k in 0..tensor.n_sections() {
                row.push(match tensor.value(i, k, t) {
                    Some(v) => format!("{v:?}"),
                    None => String::new(),
                });
            }
            wtr.write_record(&row).map_err(csv_io)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::parse(0, "", format!("{other:?}")),
    }
}

/// Reads the format written by [`save_days`].
pub fn load_days<R: Read>(reader: R) -> Result<DayTensor, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(DatasetError::parse(0, "", "empty file")),
    };
    if header.len() < 3 || &header[0] != "day" || &header[1] != "slot" {
        return Err(DatasetError::parse(
            0,
            "",
            "header must start with `day,slot,`",
        ));
    }
    let sections: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let p = sections.len();

    let mut rows: Vec<(NaiveDate, usize, Vec<Option<f64>>)> = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != p + 2 {
            return Err(DatasetError::ShapeMismatch(format!(
                "row {row} has {} fields, header has {}",
                rec.len(),
                p + 2
            )));
        }
        let day = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| DatasetError::parse(row, "day", e.to_string()))?;
        let slot: usize = rec[1]
            .parse()
            .map_err(|_| DatasetError::parse(row, "slot", format!("bad slot `{}`", &rec[1])))?;
        let mut vals = Vec::with_capacity(p);
        for (k, field) in rec.iter().skip(2).enumerate() {
            if field.is_empty() {
                vals.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    DatasetError::parse(row, &sections[k], format!("bad value `{field}`"))
                })?;
                vals.push(Some(v));
            }
        }
        rows.push((day, slot, vals));
    }
    if rows.is_empty() {
        return Err(DatasetError::parse(0, "", "no data rows"));
    }

    let slots = rows.iter().map(|r| r.1).max().unwrap() + 1;
    if !rows.len().is_multiple_of(slots) {
        return Err(DatasetError::ShapeMismatch(format!(
            "{} rows is not a whole number of {slots}-slot days",
            rows.len()
        )));
    }
    let n = rows.len() / slots;
    let mut days = Vec::with_capacity(n);
    let mut values = vec![0.0; n * p * slots];
    let mut mask = vec![false; n * p * slots];
    for (r, (day, slot, vals)) in rows.into_iter().enumerate() {
        let (i, t) = (r / slots, r % slots);
        if slot != t {
            return Err(DatasetError::ShapeMismatch(format!(
                "row {} has slot {slot}, expected {t} (rows must be sorted by day, slot)",
                r + 1
            )));
        }
        if t == 0 {
            days.push(day);
        } else if days[i] != day {
            return Err(DatasetError::ShapeMismatch(format!(
                "row {} changes day inside a day block",
                r + 1
            )));
        }
        for (k, v) in vals.into_iter().enumerate() {
            let idx = (i * p + k) * slots + t;
            if let Some(v) = v {
                values[idx] = v;
                mask[idx] = true;
            }
        }
    }
    DayTensor::new(days, sections, slots, values, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn window() -> SlotSpec {
        SlotSpec::new(
            NaiveTime::from_hms_opt(15, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(20, 0, 0).unwrap(),
            15,
        )
        .unwrap()
    }

    fn epoch(date: &str, h: u32, m: u32, s: u32) -> i64 {
        d(date).and_hms_opt(h, m, s).unwrap().and_utc().timestamp()
    }

    #[test]
    fn parse_one_row() {
        let csv = "vehicle_id,timestamp,section_id,speed\nv1,1543590000,s1,42.5\n";
        let logs = parse_raw_logs(csv.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(logs.len(), 1);
        assert_eq!(logs[0].speed, 42.5);
        assert_eq!(logs[0].timestamp, 1543590000);
    }

    #[test]
    fn parse_empty_body() {
        let csv = "vehicle_id,timestamp,section_id,speed\n";
        assert!(parse_raw_logs(csv.as_bytes(), &ColumnMapping::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parse_bad_speed_names_row() {
        let csv = "vehicle_id,timestamp,section_id,speed\nv1,1543590000,s1,abc\n";
        match parse_raw_logs(csv.as_bytes(), &ColumnMapping::default()) {
            Err(DatasetError::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "speed");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_missing_column() {
        let csv = "vehicle_id,timestamp,speed\n";
        assert!(matches!(
            parse_raw_logs(csv.as_bytes(), &ColumnMapping::default()),
            Err(DatasetError::MissingColumn(c)) if c == "section_id"
        ));
    }

    #[test]
    fn parse_iso_timestamps_and_mixed_formats() {
        let csv = "vehicle_id,timestamp,section_id,speed\nv,2018-12-03T15:00:00Z,s,1\nv,2018-12-03 15:01:00,s,2\n";
        let logs = parse_raw_logs(csv.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(logs[1].timestamp - logs[0].timestamp, 60);
        let mixed =
            "vehicle_id,timestamp,section_id,speed\nv,2018-12-03T15:00:00Z,s,1\nv,1543590000,s,2\n";
        assert!(matches!(
            parse_raw_logs(mixed.as_bytes(), &ColumnMapping::default()),
            Err(DatasetError::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn negative_speed_rejected() {
        let csv = "vehicle_id,timestamp,section_id,speed\nv,10,s,-1\n";
        assert!(parse_raw_logs(csv.as_bytes(), &ColumnMapping::default()).is_err());
    }

    fn log(ts: i64, section: &str, speed: f64) -> RawLog {
        RawLog {
            vehicle_id: "v".into(),
            timestamp: ts,
            section_id: section.into(),
            speed,
        }
    }

    #[test]
    fn aggregate_mean_and_missing() {
        let sections = vec!["a".to_string(), "b".to_string()];
        let logs = vec![
            log(epoch("2018-12-03", 15, 1, 0), "a", 40.0),
            log(epoch("2018-12-03", 15, 14, 59), "a", 60.0),
        ];
        let t = aggregate(&logs, &window(), &sections).unwrap();
        assert_eq!(t.n_days(), 1);
        assert_eq!(t.n_slots(), 20);
        assert_eq!(t.value(0, 0, 0), Some(50.0));
        assert_eq!(t.value(0, 1, 0), None);
        assert_eq!(t.value(0, 0, 1), None);
    }

    #[test]
    fn slot_boundary_goes_to_later_slot() {
        let sections = vec!["a".to_string()];
        let logs = vec![log(epoch("2018-12-03", 15, 15, 0), "a", 30.0)];
        let t = aggregate(&logs, &window(), &sections).unwrap();
        assert_eq!(t.value(0, 0, 0), None);
        assert_eq!(t.value(0, 0, 1), Some(30.0));
        // 20:00 is outside the half-open window.
        let late = vec![log(epoch("2018-12-03", 20, 0, 0), "a", 30.0)];
        assert_eq!(aggregate(&late, &window(), &sections).unwrap().n_days(), 0);
    }

    #[test]
    fn aggregate_one_log_per_slot_matches_replay() {
        let sections = vec!["a".to_string()];
        let mut logs = Vec::new();
        for j in 0..20u32 {
            let minute = 15 * j + 7;
            logs.push(log(
                epoch("2018-12-04", 15 + minute / 60, minute % 60, 0),
                "a",
                10.0 + j as f64,
            ));
        }
        let t = aggregate(&logs, &window(), &sections).unwrap();
        // Replay: slot = (minutes since 15:00) / 15.
        for l in &logs {
            let minutes = (l.timestamp - epoch("2018-12-04", 15, 0, 0)) / 60;
            let slot = (minutes / 15) as usize;
            assert_eq!(t.value(0, 0, slot), Some(l.speed));
        }
        assert!(t.is_complete());
    }

    #[test]
    fn aggregate_unknown_section() {
        let logs = vec![log(epoch("2018-12-03", 15, 1, 0), "zz", 40.0)];
        assert!(matches!(
            aggregate(&logs, &window(), &["a".to_string()]),
            Err(DatasetError::UnknownSection(s)) if s == "zz"
        ));
    }

    #[test]
    fn utc_offset_shifts_binning() {
        let spec = window().with_utc_offset(60);
        // 14:05 UTC is 15:05 local.
        let logs = vec![log(epoch("2018-12-03", 14, 5, 0), "a", 40.0)];
        let t = aggregate(&logs, &spec, &["a".to_string()]).unwrap();
        assert_eq!(t.value(0, 0, 0), Some(40.0));
    }

    #[test]
    fn slot_spec_validation() {
        let t = |h, m| NaiveTime::from_hms_opt(h, m, 0).unwrap();
        assert!(SlotSpec::new(t(15, 0), t(20, 0), 7).is_err());
        assert!(SlotSpec::new(t(15, 0), t(15, 15), 15).is_err());
        assert!(SlotSpec::new(t(15, 0), t(14, 0), 15).is_err());
        assert_eq!(
            SlotSpec::new(t(15, 0), t(20, 0), 15).unwrap().slot_count(),
            20
        );
    }

    fn tensor(days: usize, vals: &[Option<f64>]) -> DayTensor {
        let ds = (0..days)
            .map(|i| d("2020-01-01") + chrono::Days::new(i as u64))
            .collect();
        let slots = vals.len() / days;
        DayTensor::new(
            ds,
            vec!["a".into()],
            slots,
            vals.iter().map(|v| v.unwrap_or(0.0)).collect(),
            vals.iter().map(|v| v.is_some()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn impute_mean_of_reference() {
        let reference = tensor(2, &[Some(50.0), Some(1.0), Some(60.0), Some(1.0)]);
        let target = tensor(1, &[None, Some(3.0)]);
        let out = impute_historical(&target, &reference).unwrap();
        assert_eq!(out.value(0, 0, 0), Some(55.0));
        assert_eq!(out.value(0, 0, 1), Some(3.0));
        assert!(out.is_complete());
    }

    #[test]
    fn impute_full_tensor_is_identity() {
        let t = tensor(2, &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
        assert_eq!(impute_historical(&t, &t).unwrap(), t);
    }

    #[test]
    fn impute_without_history_fails() {
        let t = tensor(2, &[None, Some(2.0), None, Some(4.0)]);
        assert!(matches!(
            impute_historical(&t, &t),
            Err(DatasetError::NoHistory { slot: 0, .. })
        ));
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::default();
        assert_eq!(spec.sizes(144).unwrap(), (91, 39, 14));
        let third = 1.0 / 3.0;
        let spec = SplitSpec::new(third, third, 1.0 - 2.0 * third).unwrap();
        assert_eq!(spec.sizes(3).unwrap(), (1, 1, 1));
        assert!(matches!(spec.sizes(2), Err(DatasetError::TooFewDays(_))));
        assert!(SplitSpec::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn split_is_chronological_partition() {
        let t = tensor(10, &(0..20).map(|v| Some(v as f64)).collect::<Vec<_>>());
        let (a, b, c) = split_days(&t, &SplitSpec::default()).unwrap();
        let mut all = a.days().to_vec();
        all.extend_from_slice(b.days());
        all.extend_from_slice(c.days());
        assert_eq!(all, t.days());
        assert_eq!((a.n_days(), b.n_days(), c.n_days()), (6, 3, 1));
    }

    #[test]
    fn save_load_roundtrip() {
        let t = tensor(2, &[Some(0.1), None, Some(1e-300), Some(72.12345678901234)]);
        let mut buf = Vec::new();
        save_days(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("day,slot,a\n2020-01-01,0,0.1\n2020-01-01,1,\n"));
        let back = load_days(buf.as_slice()).unwrap();
        assert_eq!(back.days(), t.days());
        assert_eq!(back.sections(), t.sections());
        for i in 0..2 {
            for s in 0..2 {
                assert_eq!(back.value(i, 0, s), t.value(i, 0, s));
            }
        }
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_days("".as_bytes()),
            Err(DatasetError::Parse { .. })
        ));
        let bad = "day,slot,a,b\n2020-01-01,0,1\n";
        assert!(matches!(
            load_days(bad.as_bytes()),
            Err(DatasetError::ShapeMismatch(_))
        ));
        let unsorted = "day,slot,a\n2020-01-01,1,1\n2020-01-01,0,1\n";
        assert!(matches!(
            load_days(unsorted.as_bytes()),
            Err(DatasetError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn tensor_rejects_unsorted_days() {
        let r = DayTensor::new(
            vec![d("2020-01-02"), d("2020-01-01")],
            vec!["a".into()],
            1,
            vec![1.0, 2.0],
            vec![true, true],
        );
        assert!(r.is_err());
    }
}
