//! Time series of spreading observables and their ensemble reduction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fraction of the chain, at each end, treated as the boundary zone.
pub const DEFAULT_BOUNDARY_GUARD: f64 = 0.2;
/// Default boundary-zone weight above which a record is flagged.
pub const DEFAULT_GUARD_THRESHOLD: f64 = 1e-3;

/// Observables of one pure state or one density matrix at one record time.
/// Positions are measured from the initial site.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Snapshot {
    pub first_moment: f64,
    pub second_moment: f64,
    pub return_probability: f64,
    pub boundary_weight: f64,
    pub purity: Option<f64>,
}

/// Geometry used to turn populations into a [`Snapshot`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub origin: usize,
    pub lattice_constant: f64,
    /// Sites `[0, edge)` and `[n − edge, n)` form the boundary zone.
    pub edge: usize,
}

impl Probe {
    pub fn new(n: usize, origin: usize, lattice_constant: f64, guard: f64) -> Self {
        Probe {
            origin,
            lattice_constant,
            edge: ((guard * n as f64).round() as usize).min(n / 2),
        }
    }

    /// Populations indexed by site; only `range` may be non-zero.
    pub fn measure(&self, populations: impl Iterator<Item = (usize, f64)>, n: usize) -> Snapshot {
        let mut s = Snapshot::default();
        for (i, p) in populations {
            let x = (i as f64 - self.origin as f64) * self.lattice_constant;
            s.first_moment += p * x;
            s.second_moment += p * x * x;
            if i == self.origin {
                s.return_probability = p;
            }
            if i < self.edge || i >= n - self.edge {
                s.boundary_weight += p;
            }
        }
        s
    }
}

/// Running sums over trajectories (or density-matrix realizations) on a
/// shared time grid. Merging accumulators is exact and order-independent
/// up to floating-point summation order.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesAccumulator {
    times: Vec<f64>,
    count: usize,
    m1: Vec<f64>,
    m2: Vec<f64>,
    m1_sq: Vec<f64>,
    m2_sq: Vec<f64>,
    m1_m2: Vec<f64>,
    p00: Vec<f64>,
    boundary: Vec<f64>,
    purity: Option<Vec<f64>>,
    populations: Option<Vec<Vec<f64>>>,
}

impl SeriesAccumulator {
    pub fn new(times: Vec<f64>, with_purity: bool, population_sites: Option<usize>) -> Self {
        let r = times.len();
        SeriesAccumulator {
            count: 0,
            m1: vec![0.0; r],
            m2: vec![0.0; r],
            m1_sq: vec![0.0; r],
            m2_sq: vec![0.0; r],
            m1_m2: vec![0.0; r],
            p00: vec![0.0; r],
            boundary: vec![0.0; r],
            purity: with_purity.then(|| vec![0.0; r]),
            populations: population_sites.map(|n| vec![vec![0.0; n]; r]),
            times,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn tracks_populations(&self) -> bool {
        self.populations.is_some()
    }

    /// Adds one member's snapshots (and optionally per-record populations).
    pub fn add(&mut self, snapshots: &[Snapshot], populations: Option<&[Vec<f64>]>) {
        assert_eq!(snapshots.len(), self.times.len(), "record count mismatch");
        for (r, s) in snapshots.iter().enumerate() {
            self.m1[r] += s.first_moment;
            self.m2[r] += s.second_moment;
            self.m1_sq[r] += s.first_moment * s.first_moment;
            self.m2_sq[r] += s.second_moment * s.second_moment;
            self.m1_m2[r] += s.first_moment * s.second_moment;
            self.p00[r] += s.return_probability;
            self.boundary[r] += s.boundary_weight;
            if let Some(p) = &mut self.purity {
                p[r] += s.purity.unwrap_or(f64::NAN);
            }
        }
        if let (Some(acc), Some(pops)) = (&mut self.populations, populations) {
            for (a, p) in acc.iter_mut().zip(pops) {
                for (x, y) in a.iter_mut().zip(p) {
                    *x += y;
                }
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SeriesAccumulator) -> Result<()> {
        let same_grid = self.times.len() == other.times.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        if !same_grid {
            return Err(Error::invalid("times", "cannot merge series on different grids"));
        }
        if self.purity.is_some() != other.purity.is_some()
            || self.populations.is_some() != other.populations.is_some()
        {
            return Err(Error::invalid("series", "cannot merge series with different fields"));
        }
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.m1, &other.m1);
        add(&mut self.m2, &other.m2);
        add(&mut self.m1_sq, &other.m1_sq);
        add(&mut self.m2_sq, &other.m2_sq);
        add(&mut self.m1_m2, &other.m1_m2);
        add(&mut self.p00, &other.p00);
        add(&mut self.boundary, &other.boundary);
        if let (Some(a), Some(b)) = (&mut self.purity, &other.purity) {
            add(a, b);
        }
        if let (Some(a), Some(b)) = (&mut self.populations, &other.populations) {
            a.iter_mut().zip(b).for_each(|(x, y)| add(x, y));
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self, guard_threshold: f64) -> ObservableSeries {
        let n = self.count.max(1) as f64;
        let r = self.times.len();
        let mut variance = Vec::with_capacity(r);
        let mut stderr = Vec::with_capacity(r);
        for k in 0..r {
            let mean1 = self.m1[k] / n;
            let mean2 = self.m2[k] / n;
            variance.push((mean2 - mean1 * mean1).max(0.0));
            // delta method: σ² = ⟨m2⟩ − ⟨m1⟩², gradient (1, −2⟨m1⟩)
            let var1 = self.m1_sq[k] / n - mean1 * mean1;
            let var2 = self.m2_sq[k] / n - mean2 * mean2;
            let cov = self.m1_m2[k] / n - mean1 * mean2;
            let spread = var2 + 4.0 * mean1 * mean1 * var1 - 4.0 * mean1 * cov;
            stderr.push(if self.count > 1 {
                (spread.max(0.0) * n / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            });
        }
        let boundary_weight: Vec<f64> = self.boundary.iter().map(|b| b / n).collect();
        ObservableSeries {
            times: self.times.clone(),
            variance,
            variance_stderr: stderr,
            return_probability: self.p00.iter().map(|p| p / n).collect(),
            purity: self.purity.as_ref().map(|p| p.iter().map(|x| x / n).collect()),
            boundary_flag: boundary_weight.iter().map(|&w| w > guard_threshold).collect(),
            boundary_weight,
            populations: self
                .populations
                .as_ref()
                .map(|p| p.iter().map(|row| row.iter().map(|x| x / n).collect()).collect()),
            samples: self.count,
        }
    }
}

/// Ensemble-averaged observables on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    /// σ²(t) of the averaged population profile.
    pub variance: Vec<f64>,
    pub variance_stderr: Vec<f64>,
    /// Population of the initial site.
    pub return_probability: Vec<f64>,
    /// Tr ρ² or the echo estimate M, when tracked.
    pub purity: Option<Vec<f64>>,
    pub boundary_weight: Vec<f64>,
    pub boundary_flag: Vec<bool>,
    pub populations: Option<Vec<Vec<f64>>>,
    /// Trajectories or realizations averaged.
    pub samples: usize,
}

pub const SERIES_CSV_HEADER: [&str; 6] = ["t", "sigma2", "sigma2_stderr", "p00", "purity", "boundary_flag"];

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the first boundary-flagged record.
    pub fn first_flagged_time(&self) -> Option<f64> {
        self.boundary_flag
            .iter()
            .position(|&f| f)
            .map(|i| self.times[i])
    }

    /// Records up to (excluding) the first flagged one.
    pub fn unflagged_len(&self) -> usize {
        self.boundary_flag
            .iter()
            .position(|&f| f)
            .unwrap_or(self.len())
    }

    /// Columns `t, sigma2, sigma2_stderr, p00, purity, boundary_flag`;
    /// purity is empty when untracked.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SERIES_CSV_HEADER)?;
        for k in 0..self.len() {
            let purity = self
                .purity
                .as_ref()
                .map_or(String::new(), |p| fmt_f64(p[k]));
            w.write_record(&[
                fmt_f64(self.times[k]),
                fmt_f64(self.variance[k]),
                fmt_f64(self.variance_stderr[k]),
                fmt_f64(self.return_probability[k]),
                purity,
                (self.boundary_flag[k] as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back what [`ObservableSeries::write_csv`] wrote.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut s = ObservableSeries {
            times: vec![],
            variance: vec![],
            variance_stderr: vec![],
            return_probability: vec![],
            purity: None,
            boundary_weight: vec![],
            boundary_flag: vec![],
            populations: None,
            samples: 0,
        };
        let mut purity = Vec::new();
        for row in r.records() {
            let row = row?;
            let num = |i: usize| -> Result<f64> {
                row.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::invalid("csv", format!("column {i}: {e}")))
            };
            s.times.push(num(0)?);
            s.variance.push(num(1)?);
            s.variance_stderr.push(num(2)?);
            s.return_probability.push(num(3)?);
            if row.get(4).is_some_and(|v| !v.is_empty()) {
                purity.push(num(4)?);
            }
            s.boundary_flag.push(row.get(5) == Some("1"));
            s.boundary_weight.push(f64::NAN);
        }
        if !purity.is_empty() {
            s.purity = Some(purity);
        }
        Ok(s)
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(m1: f64, m2: f64) -> Snapshot {
        Snapshot {
            first_moment: m1,
            second_moment: m2,
            ..Default::default()
        }
    }

    #[test]
    fn variance_is_of_the_mixture() {
        let mut acc = SeriesAccumulator::new(vec![0.0], false, None);
        // two members centred at ±1 with zero own width
        acc.add(&[snap(1.0, 1.0)], None);
        acc.add(&[snap(-1.0, 1.0)], None);
        let s = acc.finish(1e-3);
        assert_eq!(s.variance[0], 1.0);
    }

    #[test]
    fn merge_equals_sequential_add() {
        let data = [snap(0.1, 2.0), snap(-0.3, 1.5), snap(0.7, 3.0), snap(0.0, 0.2)];
        let mut all = SeriesAccumulator::new(vec![1.0], false, None);
        for d in &data {
            all.add(&[*d], None);
        }
        let mut a = SeriesAccumulator::new(vec![1.0], false, None);
        let mut b = a.clone();
        a.add(&[data[0]], None);
        a.add(&[data[1]], None);
        b.add(&[data[2]], None);
        b.add(&[data[3]], None);
        a.merge(&b).unwrap();
        let (x, y) = (a.finish(1e-3), all.finish(1e-3));
        assert!((x.variance[0] - y.variance[0]).abs() < 1e-15);
        assert!((x.variance_stderr[0] - y.variance_stderr[0]).abs() < 1e-15);
        assert!(a.merge(&SeriesAccumulator::new(vec![2.0], false, None)).is_err());
    }

    #[test]
    fn stderr_matches_direct_estimate() {
        // centred members: σ² stderr reduces to the scatter of m2
        let m2 = [1.0, 2.0, 4.0, 5.0];
        let mut acc = SeriesAccumulator::new(vec![0.0], false, None);
        for &v in &m2 {
            acc.add(&[snap(0.0, v)], None);
        }
        let s = acc.finish(1e-3);
        let mean = 3.0;
        let sd = (m2.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();
        assert!((s.variance_stderr[0] - sd / 2.0).abs() < 1e-14);
    }

    #[test]
    fn probe_edges() {
        let probe = Probe::new(10, 5, 1.0, 0.2);
        let pops = [0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        let s = probe.measure(pops.iter().copied().enumerate(), 10);
        assert_eq!(s.boundary_weight, 0.5);
        assert_eq!(s.return_probability, 0.5);
        assert_eq!(s.first_moment, -2.5);
        assert_eq!(s.second_moment, 12.5);
    }

    #[test]
    fn csv_round_trip() {
        let mut acc = SeriesAccumulator::new(vec![0.0, 0.5], true, None);
        let mut a = snap(0.0, 0.0);
        a.purity = Some(1.0);
        a.return_probability = 1.0;
        let mut b = snap(0.1, 0.3333333333333333);
        b.purity = Some(0.9);
        b.return_probability = 0.7;
        acc.add(&[a, b], None);
        let s = acc.finish(1e-3);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ObservableSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, s.times);
        assert_eq!(back.variance, s.variance);
        assert_eq!(back.purity, s.purity);
        assert_eq!(back.boundary_flag, s.boundary_flag);
    }
}
