//! Parity-check matrices: file format, validation, and the shipped
//! constructions (progressive-edge-growth regular codes and systematic
//! repeat-accumulate codes).
//!
//! File format: line 1 is `n m_checks`; each following line lists the
//! 0-based column indices of one check.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("column {0} participates in no check")]
    EmptyColumn(usize),
    #[error("check {check} references column {col} out of range (n = {n})")]
    IndexOutOfRange { check: usize, col: usize, n: usize },
    #[error("check {check} lists column {col} twice")]
    DuplicateIndex { check: usize, col: usize },
    #[error("code must have 0 < m_checks < n, got n = {n}, m_checks = {m}")]
    DegenerateRate { n: usize, m: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Sparse binary parity-check matrix in row-index form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    m_checks: usize,
    /// For each check, the sorted column indices with a 1.
    checks: Vec<Vec<u32>>,
    /// For each column, the checks it participates in.
    var_adj: Vec<Vec<u32>>,
}

impl LdpcCode {
    pub fn from_checks(n: usize, checks: Vec<Vec<u32>>) -> Result<Self, CodeError> {
        let m_checks = checks.len();
        if m_checks == 0 || m_checks >= n {
            return Err(CodeError::DegenerateRate { n, m: m_checks });
        }
        let mut var_adj = vec![Vec::new(); n];
        let mut checks = checks;
        for (ci, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(CodeError::DuplicateIndex { check: ci, col: w[0] as usize });
                }
            }
            for &col in row.iter() {
                if col as usize >= n {
                    return Err(CodeError::IndexOutOfRange { check: ci, col: col as usize, n });
                }
                var_adj[col as usize].push(ci as u32);
            }
        }
        if let Some(col) = var_adj.iter().position(|adj| adj.is_empty()) {
            return Err(CodeError::EmptyColumn(col));
        }
        Ok(Self { n, m_checks, checks, var_adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_checks(&self) -> usize {
        self.m_checks
    }

    /// `(n - m_checks) / n`.
    pub fn rate(&self) -> f64 {
        (self.n - self.m_checks) as f64 / self.n as f64
    }

    pub fn check(&self, c: usize) -> &[u32] {
        &self.checks[c]
    }

    pub fn var_checks(&self, v: usize) -> &[u32] {
        &self.var_adj[v]
    }

    pub fn num_edges(&self) -> usize {
        self.checks.iter().map(|c| c.len()).sum()
    }

    /// Syndrome `H * bits` over GF(2); `bits` are 0/1 bytes of length `n`.
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        assert_eq!(bits.len(), self.n, "bit vector length mismatch");
        self.checks
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c as usize] & 1)))
            .collect()
    }

    pub fn parse_str(text: &str) -> Result<Self, CodeError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (lno, header) = lines
            .next()
            .ok_or_else(|| CodeError::Parse { line: 1, msg: "empty file".into() })?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CodeError::Parse { line: lno + 1, msg: "expected n".into() })?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CodeError::Parse { line: lno + 1, msg: "expected m_checks".into() })?;
        let mut checks = Vec::with_capacity(m);
        for (lno, line) in lines {
            let row: Result<Vec<u32>, _> = line.split_whitespace().map(|t| t.parse()).collect();
            let row = row.map_err(|e| CodeError::Parse {
                line: lno + 1,
                msg: format!("bad index: {e}"),
            })?;
            checks.push(row);
        }
        if checks.len() != m {
            return Err(CodeError::Parse {
                line: 1,
                msg: format!("header says {m} checks, found {}", checks.len()),
            });
        }
        Self::from_checks(n, checks)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, CodeError> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Serialises in the file format; inverse of [`LdpcCode::parse_str`].
    pub fn to_file_string(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.m_checks);
        for row in &self.checks {
            let mut first = true;
            for &c in row {
                if !first {
                    out.push(' ');
                }
                out.push_str(&c.to_string());
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Progressive-edge-growth construction of a `(dv, dc)`-regular code.
///
/// For each variable in turn, edges attach to the check that is farthest in
/// the current graph (maximising local girth), preferring low-degree checks
/// and never exceeding degree `dc`. Ties break by a seeded draw, so the
/// construction is deterministic in `seed`.
pub fn peg_regular(n: usize, dv: usize, dc: usize, seed: u64) -> LdpcCode {
    assert!(n * dv % dc == 0, "n*dv must be divisible by dc");
    let m = n * dv / dc;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut checks: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut var_adj: Vec<Vec<u32>> = vec![Vec::new(); n];

    // scratch for BFS
    let mut reached = vec![false; m];
    let mut var_seen = vec![false; n];

    for v in 0..n {
        for _edge in 0..dv {
            let candidates: Vec<usize> = if var_adj[v].is_empty() {
                (0..m).filter(|&c| checks[c].len() < dc).collect()
            } else {
                // BFS from v through the bipartite graph
                reached.iter_mut().for_each(|r| *r = false);
                var_seen.iter_mut().for_each(|r| *r = false);
                var_seen[v] = true;
                let mut frontier: Vec<u32> = var_adj[v].clone();
                for &c in &frontier {
                    reached[c as usize] = true;
                }
                let mut n_reached = frontier.len();
                let mut last_layer: Vec<usize> = frontier.iter().map(|&c| c as usize).collect();
                while n_reached < m {
                    let mut next: Vec<u32> = Vec::new();
                    for &c in &frontier {
                        for &u in &checks[c as usize] {
                            if !var_seen[u as usize] {
                                var_seen[u as usize] = true;
                                for &c2 in &var_adj[u as usize] {
                                    if !reached[c2 as usize] {
                                        reached[c2 as usize] = true;
                                        next.push(c2);
                                    }
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    n_reached += next.len();
                    last_layer = next.iter().map(|&c| c as usize).collect();
                    frontier = next;
                }
                if n_reached < m {
                    // checks outside the neighbourhood: ideal candidates
                    (0..m).filter(|&c| !reached[c] && checks[c].len() < dc).collect()
                } else {
                    // whole graph reached: take the farthest layer
                    last_layer.into_iter().filter(|&c| checks[c].len() < dc).collect()
                }
            };
            let candidates = if candidates.is_empty() {
                // capacity fallback; happens only near the end of filling
                (0..m)
                    .filter(|&c| checks[c].len() < dc && !var_adj[v].contains(&(c as u32)))
                    .collect()
            } else {
                candidates
            };
            let min_deg = candidates.iter().map(|&c| checks[c].len()).min().expect("capacity");
            let best: Vec<usize> =
                candidates.into_iter().filter(|&c| checks[c].len() == min_deg).collect();
            let pick = best[rng.random_range(0..best.len())];
            checks[pick].push(v as u32);
            var_adj[v].push(pick as u32);
        }
    }
    LdpcCode::from_checks(n, checks).expect("PEG output is well-formed")
}

/// Systematic repeat-accumulate code of rate `1/(1+q)`.
///
/// Information columns `0..k_info` each repeat into `q` distinct checks
/// through a seeded permutation (one information edge per check); parity
/// columns form the accumulator chain `p_{t-1} + p_t`. Check `t` is
/// `u_{pi(t)} + p_{t-1} + p_t = 0`.
pub fn systematic_ra(k_info: usize, q: usize, seed: u64) -> LdpcCode {
    assert!(q >= 2, "repeat factor must be at least 2");
    let m = q * k_info;
    let n = k_info + m;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut assignment: Vec<u32> = (0..k_info as u32).flat_map(|u| std::iter::repeat_n(u, q)).collect();
    assignment.shuffle(&mut rng);

    let mut checks: Vec<Vec<u32>> = Vec::with_capacity(m);
    for (t, &u) in assignment.iter().enumerate() {
        let mut row = vec![u];
        let p = (k_info + t) as u32;
        if t > 0 {
            row.push(p - 1);
        }
        row.push(p);
        checks.push(row);
    }
    LdpcCode::from_checks(n, checks).expect("RA output is well-formed")
}
