//! Operating characteristics: per (scenario, method) tallies over replicates.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Tally {
    Multitest {
        /// Rejections of H0,k per group.
        rejections: Vec<usize>,
        /// Groups with no primary effect.
        null_groups: Vec<bool>,
        /// Replicates with at least one false rejection.
        any_false: usize,
        /// Replicates with at least one rejection among groups 2..K.
        any_rest: usize,
    },
    Sequential {
        /// Efficacy stops per look.
        efficacy: Vec<usize>,
        /// Futility stops per look.
        futility: Vec<usize>,
        n_sum: u64,
        n_sumsq: u64,
        /// Replicates with a sampler convergence warning at some interim.
        flagged: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub scenario: String,
    pub odds_ratio: Option<f64>,
    pub method: String,
    /// Successful replicates.
    pub replicates: usize,
    pub failed: usize,
    pub tally: Tally,
}

/// Proportion and its binomial standard error.
pub fn proportion(count: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = count as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

impl MethodResult {
    /// Rejection proportion of H0,k.
    pub fn reject(&self, k: usize) -> f64 {
        match &self.tally {
            Tally::Multitest { rejections, .. } => proportion(rejections[k], self.replicates).0,
            Tally::Sequential { .. } => panic!("per-group rejections are not defined for sequential results"),
        }
    }

    pub fn fwer(&self) -> f64 {
        match &self.tally {
            Tally::Multitest { any_false, .. } => proportion(*any_false, self.replicates).0,
            Tally::Sequential { .. } => panic!("FWER is not defined for sequential results"),
        }
    }

    pub fn any_rest(&self) -> f64 {
        match &self.tally {
            Tally::Multitest { any_rest, .. } => proportion(*any_rest, self.replicates).0,
            Tally::Sequential { .. } => panic!("not a multitest result"),
        }
    }

    fn seq(&self) -> (&[usize], &[usize], u64, u64) {
        match &self.tally {
            Tally::Sequential {
                efficacy,
                futility,
                n_sum,
                n_sumsq,
                ..
            } => (efficacy, futility, *n_sum, *n_sumsq),
            Tally::Multitest { .. } => panic!("not a sequential result"),
        }
    }

    /// Total rejection proportion (power or type-I error).
    pub fn power(&self) -> f64 {
        proportion(self.seq().0.iter().sum(), self.replicates).0
    }

    /// Rejections before the final look.
    pub fn interim(&self) -> f64 {
        let e = self.seq().0;
        proportion(e[..e.len() - 1].iter().sum(), self.replicates).0
    }

    pub fn final_look(&self) -> f64 {
        let e = self.seq().0;
        proportion(e[e.len() - 1], self.replicates).0
    }

    pub fn futility_interim(&self) -> f64 {
        let f = self.seq().1;
        proportion(f.iter().sum(), self.replicates).0
    }

    /// Expected sample size and its standard error.
    pub fn expected_n(&self) -> (f64, f64) {
        let (_, _, s, ss) = self.seq();
        let n = self.replicates as f64;
        let m = s as f64 / n;
        let var = if self.replicates > 1 {
            ((ss as f64 - n * m * m) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        (m, (var / n).sqrt())
    }

    /// Long-format metrics: (name, count, value, se). Counts are exact, so
    /// the rows are lossless.
    pub fn metrics(&self) -> Vec<(String, Option<u64>, f64, f64)> {
        let n = self.replicates;
        let row = |name: String, c: usize| {
            let (p, se) = proportion(c, n);
            (name, Some(c as u64), p, se)
        };
        match &self.tally {
            Tally::Multitest {
                rejections,
                any_false,
                any_rest,
                ..
            } => {
                let mut v: Vec<_> = rejections.iter().enumerate().map(|(k, &c)| row(format!("reject_g{}", k + 1), c)).collect();
                v.push(row("fwer".into(), *any_false));
                v.push(row("any_reject_g2plus".into(), *any_rest));
                v
            }
            Tally::Sequential {
                efficacy,
                futility,
                flagged,
                ..
            } => {
                let mut v = vec![row("reject".into(), efficacy.iter().sum())];
                v.extend(efficacy.iter().enumerate().map(|(t, &c)| row(format!("efficacy_look{}", t + 1), c)));
                v.extend(futility.iter().enumerate().map(|(t, &c)| row(format!("futility_look{}", t + 1), c)));
                v.push(row("sampler_flagged".into(), *flagged));
                let (m, se) = self.expected_n();
                let (_, _, s, _) = self.seq();
                v.push(("expected_n".into(), Some(s), m, se));
                v
            }
        }
    }
}

/// All results of one experiment, in simulation order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct OperatingCharacteristics {
    pub results: Vec<MethodResult>,
}

impl OperatingCharacteristics {
    pub fn find(&self, scenario: &str, odds_ratio: Option<f64>, method: &str) -> Option<&MethodResult> {
        self.results
            .iter()
            .find(|r| r.scenario == scenario && r.odds_ratio == odds_ratio && r.method == method)
    }

    pub fn failed(&self) -> usize {
        self.results.iter().map(|r| r.failed).sum()
    }

    pub fn attempted(&self) -> usize {
        self.results.iter().map(|r| r.failed + r.replicates).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(eff: Vec<usize>, fut: Vec<usize>, ns: &[u64]) -> MethodResult {
        MethodResult {
            scenario: "1".into(),
            odds_ratio: Some(1.0),
            method: "Primary-Only".into(),
            replicates: ns.len(),
            failed: 0,
            tally: Tally::Sequential {
                efficacy: eff,
                futility: fut,
                n_sum: ns.iter().sum(),
                n_sumsq: ns.iter().map(|n| n * n).sum(),
                flagged: 0,
            },
        }
    }

    #[test]
    fn interim_and_final_add_up() {
        let r = seq(vec![3, 2], vec![1, 0], &[100, 100, 100, 100, 200, 200, 200, 200, 200, 200]);
        assert!((r.interim() + r.final_look() - r.power()).abs() < 1e-12);
        assert_eq!(r.power(), 0.5);
        assert_eq!(r.expected_n().0, 160.0);
    }

    #[test]
    fn expected_n_standard_error() {
        // values 100 ×4, 200 ×6: sample variance = 10/9 · 0.24 · 100²
        let r = seq(vec![0, 0], vec![4, 0], &[100, 100, 100, 100, 200, 200, 200, 200, 200, 200]);
        let var = 0.24 * 100.0f64.powi(2) * 10.0 / 9.0;
        assert!((r.expected_n().1 - (var / 10.0).sqrt()).abs() < 1e-9);
        assert_eq!(r.futility_interim(), 0.4);
    }
}
