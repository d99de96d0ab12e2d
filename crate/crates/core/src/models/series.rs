use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Observations at strictly increasing times, with the known initial latent
/// state `x0` sitting at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    x0: f64,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, x0: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        if times.is_empty() {
            return Err(Error::EmptyInput("time series"));
        }
        if !x0.is_finite() || times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite time series entry".into()));
        }
        if times[0] <= 0.0 {
            return Err(Error::InvalidParameter(
                "first observation time must be after the initial state at t = 0".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(Self { times, values, x0 })
    }

    /// Observations at integer times `1..=values.len()`.
    pub fn unit_spaced(values: Vec<f64>, x0: f64) -> Result<Self> {
        let times = (1..=values.len()).map(|t| t as f64).collect();
        Self::new(times, values, x0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Gap between observation `t` and its predecessor (the initial state for `t = 0`).
    pub fn interval(&self, t: usize) -> f64 {
        if t == 0 {
            self.times[0]
        } else {
            self.times[t] - self.times[t - 1]
        }
    }

    /// Writes the two-column `time,value` CSV. `x0` is not part of the file.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time", "value"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, x0: f64) -> Result<Self, ReadSeriesError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(ReadSeriesError::Format(format!("expected 2 columns, found {}", rec.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| ReadSeriesError::Format(format!("{s:?}: {e}")));
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        Ok(Self::new(times, values, x0)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadSeriesError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed time series: {0}")]
    Format(String),
    #[error(transparent)]
    Invalid(#[from] Error),
}
