//! Exact enumeration of all deterministic tests for a single patient with
//! binary (Y, S), independent outcomes with success probabilities (θY, θS).
//!
//! H0: θY ≤ θ0. Prior: θY ~ U(0,1), θS = 1{θY > θ0}. Utility: +1 for a correct
//! rejection, −λ for a false one.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleRow {
    pub index: usize,
    /// Decision on each data point, indexed `[y][s]`.
    pub rejects: [[bool; 2]; 2],
    pub label: String,
    pub uses_auxiliary: bool,
    /// sup over θY ≤ θ0 and all θS of pr(reject).
    pub max_type1: f64,
    pub level_alpha: bool,
    pub expected_utility: f64,
}

fn label(r: &[[bool; 2]; 2]) -> String {
    let set = |y: usize, s: usize| r[y][s];
    let known: [(&str, [[bool; 2]; 2]); 6] = [
        ("0", [[false, false], [false, false]]),
        ("1", [[true, true], [true, true]]),
        ("Y", [[false, false], [true, true]]),
        ("1-Y", [[true, true], [false, false]]),
        ("S", [[false, true], [false, true]]),
        ("1-S", [[true, false], [true, false]]),
    ];
    if let Some((l, _)) = known.iter().find(|(_, t)| t == r) {
        return l.to_string();
    }
    let term = |y: usize, s: usize| {
        let a = if y == 1 { "Y" } else { "(1-Y)" };
        let b = if s == 1 { "S" } else { "(1-S)" };
        format!("{a}*{b}")
    };
    let mut parts = Vec::new();
    for y in (0..2).rev() {
        for s in (0..2).rev() {
            if set(y, s) {
                parts.push(term(y, s));
            }
        }
    }
    parts.join(" + ")
}

/// All 16 decision functions with their size and expected utility, using
/// closed-form integrals over the uniform prior.
pub fn enumerate_stylized(lambda: f64, alpha: f64, theta0: f64) -> Vec<ExampleRow> {
    // ∫ θ and ∫ (1 − θ) over the null and alternative ranges of θY
    let alt_t = (1.0 - theta0 * theta0) / 2.0;
    let alt_1mt = (1.0 - theta0) - alt_t;
    let null_t = theta0 * theta0 / 2.0;
    let null_1mt = theta0 - null_t;
    (0..16usize)
        .map(|index| {
            // bit (2y + s) of the index is the decision on (y, s)
            let mut r = [[false; 2]; 2];
            for y in 0..2 {
                for s in 0..2 {
                    r[y][s] = index >> (2 * y + s) & 1 == 1;
                }
            }
            let f = |y: usize, s: usize| r[y][s] as u8 as f64;
            // rejection probability is multilinear in (θY, θS): its sup over the
            // null box is attained at a vertex
            let mut max_type1: f64 = 0.0;
            for ty in [0.0, theta0] {
                for ts in [0.0, 1.0] {
                    let mut p = 0.0;
                    for y in 0..2 {
                        for s in 0..2 {
                            let py = if y == 1 { ty } else { 1.0 - ty };
                            let ps = if s == 1 { ts } else { 1.0 - ts };
                            p += f(y, s) * py * ps;
                        }
                    }
                    max_type1 = max_type1.max(p);
                }
            }
            // θS = 1 on the alternative, 0 on the null
            let expected_utility =
                f(1, 1) * alt_t + f(0, 1) * alt_1mt - lambda * (f(1, 0) * null_t + f(0, 0) * null_1mt);
            ExampleRow {
                index,
                rejects: r,
                label: label(&r),
                uses_auxiliary: r[0][0] != r[0][1] || r[1][0] != r[1][1],
                max_type1,
                level_alpha: max_type1 <= alpha + 1e-12,
                expected_utility,
            }
        })
        .collect()
}

/// The example with λ = 100, α = 0.05 and θ0 = 0.05.
pub fn enumerate_single_patient_example() -> Vec<ExampleRow> {
    enumerate_stylized(100.0, 0.05, 0.05)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(rows: &'a [ExampleRow], l: &str) -> &'a ExampleRow {
        rows.iter().find(|r| r.label == l).unwrap()
    }

    #[test]
    fn reference_utilities() {
        let rows = enumerate_single_patient_example();
        assert_eq!(rows.len(), 16);
        assert!((find(&rows, "Y").expected_utility - 0.37375).abs() < 1e-10);
        assert!((find(&rows, "Y*S").expected_utility - 0.49875).abs() < 1e-10);
        assert!((find(&rows, "Y*(1-S)").expected_utility + 0.125).abs() < 1e-10);
        assert_eq!(find(&rows, "0").expected_utility, 0.0);
        let valid: Vec<&str> = rows.iter().filter(|r| r.level_alpha).map(|r| r.label.as_str()).collect();
        assert_eq!(valid.len(), 4);
        for l in ["0", "Y", "Y*S", "Y*(1-S)"] {
            assert!(valid.contains(&l), "{l} should be level-alpha");
        }
        assert!(!find(&rows, "Y").uses_auxiliary);
        assert!(find(&rows, "Y*S").uses_auxiliary);
    }

    #[test]
    fn utilities_match_numerical_integration() {
        // midpoint rule over θY, independent of the closed form
        let rows = enumerate_stylized(100.0, 0.05, 0.05);
        let n = 200_000;
        for r in &rows {
            let mut acc = 0.0;
            for i in 0..n {
                let t = (i as f64 + 0.5) / n as f64;
                let ts: f64 = if t > 0.05 { 1.0 } else { 0.0 };
                let mut p = 0.0;
                for y in 0..2 {
                    for s in 0..2 {
                        if r.rejects[y][s] {
                            p += (if y == 1 { t } else { 1.0 - t }) * (if s == 1 { ts } else { 1.0 - ts });
                        }
                    }
                }
                acc += if t > 0.05 { p } else { -100.0 * p };
            }
            assert!((acc / n as f64 - r.expected_utility).abs() < 1e-6, "{}", r.label);
        }
    }
}
