//! Regularity of a kernel family via difference constraints.
//!
//! A family with exponent matrix Q is regular when every interaction cycle
//! i_1→…→i_n→i_1 has geometric mean (q_{i1i2}⋯q_{ini1})^{1/n} ≥ d. Taking logs,
//! that is the absence of negative cycles for edge weights w_ij = ln q_ij − ln d,
//! and the feasible potentials x solve x_j − x_i ≤ w_ij. Bellman–Ford from a
//! virtual source with zero edges to every node finds either the potentials
//! or a negative cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityProblem {
    pub d: f64,
    #[serde(alias = "Q")]
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Node sequence i_1, …, i_n of a cycle with geometric mean below d
    /// (0-based; the closing edge back to i_1 is implied).
    pub witness_cycle: Option<Vec<usize>>,
    pub c: Option<Vec<f64>>,
    pub mu: Option<f64>,
    #[serde(rename = "P")]
    pub p: Option<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub x: Option<Vec<f64>>,
}

impl RegularityProblem {
    pub fn new(d: f64, q: Vec<Vec<f64>>) -> Self {
        RegularityProblem { d, q }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Invalid("Q must be non-empty".into()));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::Invalid(format!("dimension must be positive, got {}", self.d)));
        }
        for row in &self.q {
            if row.len() != n {
                return Err(Error::Invalid("Q must be square".into()));
            }
            if row.iter().any(|&v| !(v > 1.0 && v.is_finite())) {
                return Err(Error::Invalid("every q_ij must lie in (1, ∞)".into()));
            }
        }
        Ok(())
    }
}

pub fn build_weights(prob: &RegularityProblem) -> Vec<Vec<f64>> {
    let ld = prob.d.ln();
    prob.q.iter().map(|row| row.iter().map(|&v| v.ln() - ld).collect()).collect()
}

pub fn is_regular(prob: &RegularityProblem) -> RegularityReport {
    let n = prob.n();
    let w = build_weights(prob);
    // Source edges have weight 0, so after the first relaxation every
    // distance is ≤ 0; start there directly.
    let mut dist = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last_relaxed = None;
    // |V| = n + 1, so n passes settle every shortest path; pass n+1 detects cycles.
    for _ in 0..=n {
        last_relaxed = None;
        for i in 0..n {
            for j in 0..n {
                let cand = dist[i] + w[i][j];
                if cand < dist[j] {
                    dist[j] = cand;
                    pred[j] = Some(i);
                    last_relaxed = Some(j);
                }
            }
        }
        if last_relaxed.is_none() {
            break;
        }
    }

    match last_relaxed {
        None => {
            let c = dist.iter().map(|&x| (-x).exp()).collect();
            RegularityReport { regular: true, witness_cycle: None, c: Some(c), mu: None, p: None, w, x: Some(dist) }
        }
        Some(mut v) => {
            // Walking back n steps lands inside the cycle.
            for _ in 0..n {
                v = pred[v].expect("relaxed node has a predecessor");
            }
            let start = v;
            let mut cycle = vec![start];
            let mut u = pred[start].unwrap();
            while u != start {
                cycle.push(u);
                u = pred[u].unwrap();
            }
            cycle.reverse();
            RegularityReport { regular: false, witness_cycle: Some(cycle), c: None, mu: None, p: None, w, x: None }
        }
    }
}

/// Minimal μ and P = (μc − 2)/d + 1 meeting p_j ≥ max(2, max_i q_ij′).
pub fn synthesize_p(report: &RegularityReport, prob: &RegularityProblem) -> Result<(f64, Vec<f64>)> {
    if !report.regular {
        return Err(Error::NotRegular(report.witness_cycle.clone().unwrap_or_default()));
    }
    let c = report.c.as_ref().ok_or_else(|| Error::Invalid("regular report without c".into()))?;
    let n = prob.n();
    let d = prob.d;
    let mut mu = 0.0f64;
    for j in 0..n {
        let b = (0..n).map(|i| conjugate(prob.q[i][j])).fold(2.0, f64::max);
        mu = mu.max((d * (b - 1.0) + 2.0) / c[j]);
    }
    let p = c.iter().map(|&cj| (mu * cj - 2.0) / d + 1.0).collect();
    Ok((mu, p))
}

/// Run the analysis and fill in μ and P when the family is regular.
pub fn analyze(prob: &RegularityProblem) -> Result<RegularityReport> {
    prob.validate()?;
    let mut r = is_regular(prob);
    if r.regular {
        let (mu, p) = synthesize_p(&r, prob)?;
        r.mu = Some(mu);
        r.p = Some(p);
    }
    Ok(r)
}

pub fn conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

/// All simple cycles (self-loops included), each listed once starting from
/// its smallest index, with its geometric mean.
pub fn enumerate_simple_cycles(prob: &RegularityProblem) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = prob.n();
    if n > 10 {
        return Err(Error::TooLarge(n));
    }
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for s in 0..n {
        path.clear();
        path.push(s);
        used[s] = true;
        extend(prob, s, &mut path, &mut used, &mut out);
        used[s] = false;
    }
    Ok(out)
}

fn extend(
    prob: &RegularityProblem,
    start: usize,
    path: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    // close the cycle
    let mut logsum = 0.0;
    for k in 0..path.len() {
        let a = path[k];
        let b = if k + 1 < path.len() { path[k + 1] } else { start };
        logsum += prob.q[a][b].ln();
    }
    out.push((path.clone(), (logsum / path.len() as f64).exp()));
    for next in start + 1..prob.n() {
        if !used[next] {
            used[next] = true;
            path.push(next);
            extend(prob, start, path, used, out);
            path.pop();
            used[next] = false;
        }
    }
}

/// Brute-force verdict: every simple cycle has log-mean ≥ ln d.
pub fn regular_by_enumeration(prob: &RegularityProblem) -> Result<bool> {
    let w = build_weights(prob);
    let cycles = enumerate_simple_cycles(prob)?;
    Ok(cycles.iter().all(|(cyc, _)| cycle_weight(&w, cyc) >= 0.0))
}

/// Σ w along the closed cycle.
pub fn cycle_weight(w: &[Vec<f64>], cycle: &[usize]) -> f64 {
    (0..cycle.len()).map(|k| w[cycle[k]][cycle[(k + 1) % cycle.len()]]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(d: f64, q: &[&[f64]]) -> RegularityProblem {
        RegularityProblem::new(d, q.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn weights() {
        let w = build_weights(&prob(2.0, &[&[2.0, 2.0], &[2.0, 2.0]]));
        assert!(w.iter().flatten().all(|&v| v == 0.0));
        let w = build_weights(&prob(2.0, &[&[4.0]]));
        assert!((w[0][0] - 2f64.ln()).abs() < 1e-15);
        let w = build_weights(&prob(2.0, &[&[4.0, 1.5], &[3.0, 4.0]]));
        assert!((w[0][1] - (-0.2877)).abs() < 1e-4 && (w[1][0] - 0.4055).abs() < 1e-4);
    }

    #[test]
    fn regular_two_species() {
        let p = prob(2.0, &[&[4.0, 1.5], &[3.0, 4.0]]);
        let r = analyze(&p).unwrap();
        assert!(r.regular);
        let c = r.c.as_ref().unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 4.0 / 3.0).abs() < 1e-14);
        assert!((r.mu.unwrap() - 4.5).abs() < 1e-13);
        let pp = r.p.unwrap();
        assert!((pp[0] - 2.25).abs() < 1e-13 && (pp[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn irregular_two_species() {
        let p = prob(2.0, &[&[4.0, 1.5], &[1.5, 4.0]]);
        let r = is_regular(&p);
        assert!(!r.regular);
        let mut cyc = r.witness_cycle.clone().unwrap();
        cyc.sort();
        assert_eq!(cyc, vec![0, 1]);
        assert!(cycle_weight(&r.w, r.witness_cycle.as_ref().unwrap()) < 0.0);
        assert!(matches!(synthesize_p(&r, &p), Err(Error::NotRegular(_))));
    }

    #[test]
    fn one_dimensional_is_always_regular() {
        let r = analyze(&prob(1.0, &[&[1.01]])).unwrap();
        assert!(r.regular);
        let r = analyze(&prob(1.0, &[&[2.0]])).unwrap();
        assert!((r.mu.unwrap() - 3.0).abs() < 1e-14);
        assert!((r.p.unwrap()[0] - 2.0).abs() < 1e-14);
        let r = analyze(&prob(1.0, &[&[3.0, 3.0], &[3.0, 3.0]])).unwrap();
        assert!((r.mu.unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(r.p.unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn tie_is_regular() {
        // 1→2→1 has geometric mean exactly d
        let r = is_regular(&prob(2.0, &[&[3.0, 2.0], &[2.0, 3.0]]));
        assert!(r.regular);
    }

    #[test]
    fn cycle_counts() {
        let q3 = vec![vec![2.0; 3]; 3];
        assert_eq!(enumerate_simple_cycles(&RegularityProblem::new(1.0, q3)).unwrap().len(), 8);
        let c2 = enumerate_simple_cycles(&prob(1.0, &[&[2.0, 3.0], &[12.0, 5.0]])).unwrap();
        assert_eq!(c2.len(), 3);
        assert!(c2.iter().any(|(c, m)| c == &vec![0, 1] && (m - 6.0).abs() < 1e-12));
        let c1 = enumerate_simple_cycles(&prob(1.0, &[&[7.0]])).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].0, vec![0]);
        assert!((c1[0].1 - 7.0).abs() < 1e-14);
        assert!(matches!(
            enumerate_simple_cycles(&RegularityProblem::new(1.0, vec![vec![2.0; 11]; 11])),
            Err(Error::TooLarge(11))
        ));
    }
}
