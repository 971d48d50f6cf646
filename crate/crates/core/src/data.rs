//! Trial data and the summary layer: arm means, effect estimates, variances,
//! Z statistics and one-sided p-values.

use crate::stats::normal_sf;
use std::collections::HashSet;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Experimental,
}

impl Arm {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }

    pub fn from_index(c: usize) -> Option<Arm> {
        match c {
            0 => Some(Arm::Control),
            1 => Some(Arm::Experimental),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatientRecord {
    /// 0-based group index.
    pub group: usize,
    pub arm: Arm,
    pub primary: bool,
    pub auxiliary: bool,
    pub enroll_order: u64,
    /// False while the primary outcome is still pending at an interim look.
    pub primary_observed: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("patient with enroll_order {enroll_order} has group {group} but K = {k_count}")]
    GroupOutOfRange {
        enroll_order: u64,
        group: usize,
        k_count: usize,
    },
    #[error("duplicate enroll_order {0}")]
    DuplicateEnrollOrder(u64),
    #[error("need n_primary <= m_enrolled <= {total}, got n_primary = {n_primary}, m_enrolled = {m_enrolled}")]
    BadStage {
        n_primary: usize,
        m_enrolled: usize,
        total: usize,
    },
    #[error("stage schedule must be strictly increasing and within the dataset: {0:?}")]
    BadSchedule(Vec<usize>),
    #[error("K must be at least 1")]
    NoGroups,
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-group failure when a summary cannot be formed.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SummaryError {
    #[error("group {group} has no primary-observed patients in arm {arm:?}")]
    EmptyArm { group: usize, arm: Arm },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    patients: Vec<PatientRecord>,
    k_count: usize,
    stage_schedule: Option<Vec<usize>>,
}

impl TrialDataset {
    pub fn new(patients: Vec<PatientRecord>, k_count: usize) -> Result<Self, DataError> {
        if k_count == 0 {
            return Err(DataError::NoGroups);
        }
        for p in &patients {
            if p.group >= k_count {
                return Err(DataError::GroupOutOfRange {
                    enroll_order: p.enroll_order,
                    group: p.group,
                    k_count,
                });
            }
        }
        let increasing = patients
            .windows(2)
            .all(|w| w[0].enroll_order < w[1].enroll_order);
        if !increasing {
            let mut seen = HashSet::with_capacity(patients.len());
            for p in &patients {
                if !seen.insert(p.enroll_order) {
                    return Err(DataError::DuplicateEnrollOrder(p.enroll_order));
                }
            }
        }
        Ok(Self {
            patients,
            k_count,
            stage_schedule: None,
        })
    }

    pub fn with_stage_schedule(mut self, schedule: Vec<usize>) -> Result<Self, DataError> {
        let ok = !schedule.is_empty()
            && schedule.windows(2).all(|w| w[0] < w[1])
            && schedule[0] > 0
            && *schedule.last().unwrap() <= self.patients.len();
        if !ok {
            return Err(DataError::BadSchedule(schedule));
        }
        self.stage_schedule = Some(schedule);
        Ok(self)
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    pub fn stage_schedule(&self) -> Option<&[usize]> {
        self.stage_schedule.as_deref()
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn primary_observed_count(&self) -> usize {
        self.patients.iter().filter(|p| p.primary_observed).count()
    }

    fn by_enrollment(&self) -> Vec<PatientRecord> {
        let mut v = self.patients.clone();
        v.sort_by_key(|p| p.enroll_order);
        v
    }

    /// Data as seen at a look where the first `n_primary` patients have
    /// primary outcomes and `m_enrolled` have auxiliary outcomes.
    pub fn restrict_to_stage(&self, n_primary: usize, m_enrolled: usize) -> Result<Self, DataError> {
        if n_primary > m_enrolled || m_enrolled > self.patients.len() {
            return Err(DataError::BadStage {
                n_primary,
                m_enrolled,
                total: self.patients.len(),
            });
        }
        let mut v = self.by_enrollment();
        v.truncate(m_enrolled);
        for p in v.iter_mut().skip(n_primary) {
            p.primary_observed = false;
        }
        Ok(Self {
            patients: v,
            k_count: self.k_count,
            stage_schedule: None,
        })
    }

    /// Dataset in which the auxiliary outcome plays the role of the primary
    /// one (observed for every enrolled patient).
    pub fn auxiliary_as_primary(&self) -> Self {
        let patients = self
            .patients
            .iter()
            .map(|p| PatientRecord {
                primary: p.auxiliary,
                primary_observed: true,
                ..*p
            })
            .collect();
        Self {
            patients,
            k_count: self.k_count,
            stage_schedule: self.stage_schedule.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| DataError::Csv(e.to_string());
        wr.write_record([
            "group",
            "arm",
            "primary",
            "auxiliary",
            "enroll_order",
            "primary_observed",
        ])
        .map_err(err)?;
        let b = |x: bool| if x { "1" } else { "0" };
        for p in &self.patients {
            wr.write_record([
                p.group.to_string().as_str(),
                &p.arm.index().to_string(),
                b(p.primary),
                b(p.auxiliary),
                &p.enroll_order.to_string(),
                b(p.primary_observed),
            ])
            .map_err(err)?;
        }
        wr.flush().map_err(|e| DataError::Csv(e.to_string()))
    }

    /// Reads the columnar CSV. `k_count` defaults to 1 + the largest group seen.
    pub fn read_csv<R: Read>(r: R, k_count: Option<usize>) -> Result<Self, DataError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| DataError::Csv(format!("missing column {name}")))
        };
        let (ig, ia, iy, is, io, iobs) = (
            col("group")?,
            col("arm")?,
            col("primary")?,
            col("auxiliary")?,
            col("enroll_order")?,
            col("primary_observed")?,
        );
        let mut patients = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            let int = |i: usize| -> Result<u64, DataError> {
                field(i)
                    .parse::<u64>()
                    .map_err(|_| DataError::Csv(format!("row {}: bad integer {:?}", line + 1, field(i))))
            };
            let bit = |i: usize| -> Result<bool, DataError> {
                match field(i) {
                    "0" | "false" => Ok(false),
                    "1" | "true" => Ok(true),
                    other => Err(DataError::Csv(format!("row {}: expected 0/1, got {other:?}", line + 1))),
                }
            };
            let arm = Arm::from_index(int(ia)? as usize)
                .ok_or_else(|| DataError::Csv(format!("row {}: arm must be 0 or 1", line + 1)))?;
            patients.push(PatientRecord {
                group: int(ig)? as usize,
                arm,
                primary: bit(iy)?,
                auxiliary: bit(is)?,
                enroll_order: int(io)?,
                primary_observed: bit(iobs)?,
            });
        }
        let k = k_count.unwrap_or_else(|| patients.iter().map(|p| p.group + 1).max().unwrap_or(1));
        Self::new(patients, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: usize,
    pub n0: usize,
    pub n1: usize,
    pub ybar_diff: f64,
    pub sbar_diff: f64,
    pub var_hat: f64,
    pub z: f64,
    pub pvalue: f64,
}

/// Sufficient counts for one arm of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArmCounts {
    /// primary-observed patients and their successes
    pub n_primary: u32,
    pub y: u32,
    /// all patients (auxiliary observed) and their auxiliary successes
    pub n_aux: u32,
    pub s: u32,
    /// among primary-observed: auxiliary successes and joint successes
    pub s_primary: u32,
    pub ys: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupCounts {
    pub arms: [ArmCounts; 2],
}

impl GroupCounts {
    #[inline]
    pub fn add(&mut self, arm: Arm, y: Option<bool>, s: bool) {
        let a = &mut self.arms[arm.index()];
        a.n_aux += 1;
        a.s += s as u32;
        if let Some(y) = y {
            a.n_primary += 1;
            a.y += y as u32;
            a.s_primary += s as u32;
            a.ys += (y && s) as u32;
        }
    }

    pub fn summary(&self, group: usize) -> Result<GroupSummary, SummaryError> {
        for arm in [Arm::Control, Arm::Experimental] {
            if self.arms[arm.index()].n_primary == 0 {
                return Err(SummaryError::EmptyArm { group, arm });
            }
        }
        let [c0, c1] = self.arms;
        let (ybar_diff, var_hat, z, pvalue) =
            z_statistic(c0.y, c0.n_primary, c1.y, c1.n_primary);
        let sbar = |a: &ArmCounts| a.s as f64 / a.n_aux as f64;
        Ok(GroupSummary {
            group,
            n0: c0.n_primary as usize,
            n1: c1.n_primary as usize,
            ybar_diff,
            sbar_diff: sbar(&c1) - sbar(&c0),
            var_hat,
            z,
            pvalue,
        })
    }

    /// Plug-in covariance of (S̄, Ȳ) for this group, binomial within each arm,
    /// including the sample cross-covariance. Returns None on an empty arm.
    pub fn covariance_sy(&self) -> Option<[[f64; 2]; 2]> {
        let mut v_s = 0.0;
        let mut c_sy = 0.0;
        for a in &self.arms {
            if a.n_primary == 0 {
                return None;
            }
            let ps = a.s as f64 / a.n_aux as f64;
            v_s += ps * (1.0 - ps) / a.n_aux as f64;
            let n = a.n_primary as f64;
            let cov = a.ys as f64 / n - (a.y as f64 / n) * (a.s_primary as f64 / n);
            c_sy += cov / a.n_aux as f64;
        }
        let [c0, c1] = self.arms;
        let (_, v_y, _, _) = z_statistic(c0.y, c0.n_primary, c1.y, c1.n_primary);
        Some([[v_s, c_sy], [c_sy, v_y]])
    }
}

/// Difference-in-proportions Z test: returns (difference, variance, z, p-value).
///
/// Unpooled binomial variance; when it is exactly zero the continuity-corrected
/// proportions (x + 0.5)/(n + 1) are used in the variance only.
pub fn z_statistic(y0: u32, n0: u32, y1: u32, n1: u32) -> (f64, f64, f64, f64) {
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let p0 = y0 as f64 / n0f;
    let p1 = y1 as f64 / n1f;
    let diff = p1 - p0;
    let mut var = p1 * (1.0 - p1) / n1f + p0 * (1.0 - p0) / n0f;
    if var <= 0.0 {
        let q0 = (y0 as f64 + 0.5) / (n0f + 1.0);
        let q1 = (y1 as f64 + 0.5) / (n1f + 1.0);
        var = q1 * (1.0 - q1) / n1f + q0 * (1.0 - q0) / n0f;
    }
    let z = diff / var.sqrt();
    (diff, var, z, normal_sf(z))
}

pub fn group_counts(data: &TrialDataset) -> Vec<GroupCounts> {
    let mut out = vec![GroupCounts::default(); data.k_count()];
    for p in data.patients() {
        out[p.group].add(p.arm, p.primary_observed.then_some(p.primary), p.auxiliary);
    }
    out
}

/// One summary per group; a group lacking an arm yields `Err(EmptyArm)`
/// without affecting the others.
pub fn compute_summaries(data: &TrialDataset) -> Vec<Result<GroupSummary, SummaryError>> {
    group_counts(data)
        .iter()
        .enumerate()
        .map(|(k, c)| c.summary(k))
        .collect()
}

/// Summaries in which the auxiliary outcome is tested in place of the primary.
pub fn compute_auxiliary_summaries(data: &TrialDataset) -> Vec<Result<GroupSummary, SummaryError>> {
    compute_summaries(&data.auxiliary_as_primary())
}
