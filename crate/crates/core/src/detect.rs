//! Change-point scan over a round ledger.
//!
//! After round r completes, the scan asks whether any arm's gap
//! estimate moved more than noise allows between two disjoint windows
//! of the current episode. Window endpoints range over [rho, r] (rho =
//! episode start); a window (u, v) covers data rounds u..v-1, and the
//! earlier window must end before the later one begins. The test for an
//! ordered pair of windows is
//!
//!   |est(u, v) - est(u2, v2)|
//!       >= 2 est(u, v) + 2 sqrt(2 L / min(n, n2)) + 2 B*
//!
//! with L = ln(2 K T^3) and n, n2 the pull counts of the scanned arm in
//! each window. Windows where the arm was never pulled, or where no
//! comparator stayed persistent, are skipped.
//!
//! Endpoint selection is either exhaustive (every round in [rho, r]) or
//! a geometric grid {rho + ceil(base^i)} plus {rho, r-1, r}; the grid
//! keeps the per-round scan polylogarithmic. The exhaustive scan checks
//! all ordered pairs via rolling prefix structures keyed by pull count
//! (the pair test splits into two one-sided comparisons, each monotone
//! in one window's statistics); when it reports a hit, the lexicographic
//! scan recomputes the first witnessing quadruple.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{BoundContext, EpisodeLedger};
use crate::trace::DetectionEvent;

/// Which window endpoints the per-round scan considers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Every round of the episode is an endpoint. Quadratically many
    /// windows per round; intended for small horizons and as the
    /// reference the grid is checked against.
    Exhaustive,
    /// Endpoints rho + ceil(base^i), plus rho, r-1, and r.
    Grid { base: f64 },
}

impl Default for ScanMode {
    fn default() -> Self {
        ScanMode::Grid { base: 2.0 }
    }
}

impl ScanMode {
    pub fn validate(&self) -> Result<()> {
        if let ScanMode::Grid { base } = self {
            if !(base.is_finite() && *base > 1.0) {
                return Err(Error::invalid(format!(
                    "grid base must be finite and greater than 1, got {base}"
                )));
            }
        }
        Ok(())
    }
}

/// One scannable window for one arm.
#[derive(Clone, Copy, Debug)]
struct Win {
    u: usize,
    v: usize,
    n: u32,
    a: f64,
}

/// Endpoints in [rho, r] for the given mode, ascending and deduplicated.
fn scan_endpoints(rho: usize, r: usize, mode: ScanMode) -> Vec<usize> {
    let mut e = vec![rho];
    match mode {
        ScanMode::Exhaustive => e.extend(rho + 1..=r),
        ScanMode::Grid { base } => {
            if r > rho {
                let span = (r - rho) as f64;
                let mut i = 0;
                loop {
                    let step = base.powi(i).ceil();
                    if step >= span {
                        break;
                    }
                    e.push(rho + step as usize);
                    i += 1;
                }
                if r - 1 > rho {
                    e.push(r - 1);
                }
                e.push(r);
            }
        }
    }
    e.sort_unstable();
    e.dedup();
    e
}

/// Builds the valid windows of arm k over the endpoint list, in
/// lexicographic (u, v) order.
fn build_windows(ledger: &EpisodeLedger, k: usize, endpoints: &[usize]) -> Vec<Win> {
    let arms = ledger.arms();
    let mut wins = Vec::new();
    for (i, &u) in endpoints.iter().enumerate() {
        for &v in &endpoints[i + 1..] {
            let n = ledger.win_pulls(k, u, v);
            if n == 0 {
                continue;
            }
            let mut best: Option<f64> = None;
            for kp in 0..arms {
                if !ledger.is_persistent(kp, u, v) {
                    continue;
                }
                let val = ledger.win_diff(k, kp, u, v) / n as f64;
                if best.is_none_or(|b| val > b) {
                    best = Some(val);
                }
            }
            if let Some(a) = best {
                wins.push(Win { u, v, n, a });
            }
        }
    }
    wins
}

/// A firing witness: the (u, v, u2, v2) window quadruple, both window
/// estimates, and the threshold the pair had to clear.
type Firing = ((usize, usize, usize, usize), f64, f64, f64);

/// Finds the lexicographically first ordered window pair whose estimates
/// diverge past the threshold. Returns the quadruple with both
/// estimates and the pair's threshold.
fn find_first_firing(wins: &[Win], log_term: f64, b_star: f64) -> Option<Firing> {
    let thr2 = 2.0 * b_star;
    for p in wins {
        let start = wins.partition_point(|w| w.u < p.v);
        for q in &wins[start..] {
            let m = p.n.min(q.n) as f64;
            let rad = 2.0 * (2.0 * log_term / m).sqrt();
            let thr = rad + thr2;
            if q.a - 3.0 * p.a >= thr || -p.a - q.a >= thr {
                return Some(((p.u, p.v, q.u, q.v), p.a, q.a, 2.0 * p.a + thr));
            }
        }
    }
    None
}

/// Prefix-max Fenwick tree over pull counts.
struct MaxTree {
    size: usize,
    data: Vec<f64>,
}

impl MaxTree {
    fn new(size: usize) -> Self {
        MaxTree {
            size,
            data: vec![f64::NEG_INFINITY; size + 1],
        }
    }

    fn update(&mut self, mut i: usize, v: f64) {
        while i <= self.size {
            if v > self.data[i] {
                self.data[i] = v;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Max over indices 1..=i.
    fn query(&self, mut i: usize) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        i = i.min(self.size);
        while i > 0 {
            acc = acc.max(self.data[i]);
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Exhaustive-mode fired check: scans all ordered window pairs in
/// O(W log W) by splitting the pair condition on which window has the
/// smaller pull count and maintaining running extrema keyed by count.
fn fired(wins: &[Win], log_term: f64, b_star: f64) -> bool {
    if wins.is_empty() {
        return false;
    }
    let max_n = wins.iter().map(|w| w.n).max().expect("nonempty") as usize;
    let rad = |n: u32| 2.0 * (2.0 * log_term / n as f64).sqrt();
    let thr2 = 2.0 * b_star;

    // Earlier windows enter the pool once their v is at or before the
    // candidate's u; order both sides accordingly.
    let mut by_v: Vec<usize> = (0..wins.len()).collect();
    by_v.sort_unstable_by_key(|&i| wins[i].v);

    // max over pool of -3a - rad(n) and of -a - rad(n), prefix in n;
    // max over pool of -a, suffix in n (stored reversed).
    let mut t_c1 = MaxTree::new(max_n);
    let mut t_c2 = MaxTree::new(max_n);
    let mut t_neg_a = MaxTree::new(max_n);
    let flip = |n: usize| max_n + 1 - n;

    let mut inserted = 0;
    for q in wins {
        while inserted < by_v.len() && wins[by_v[inserted]].v <= q.u {
            let p = &wins[by_v[inserted]];
            let n = p.n as usize;
            t_c1.update(n, -3.0 * p.a - rad(p.n));
            t_c2.update(n, -p.a - rad(p.n));
            t_neg_a.update(flip(n), -p.a);
            inserted += 1;
        }
        // Smaller-count side is the earlier window p.
        if q.a + t_c1.query(q.n as usize) >= thr2 {
            return true;
        }
        if -q.a + t_c2.query(q.n as usize) >= thr2 {
            return true;
        }
        // Smaller-count side is q itself.
        if (q.n as usize) < max_n {
            let neg_min_a = t_neg_a.query(flip(q.n as usize + 1));
            if neg_min_a > f64::NEG_INFINITY {
                let r_q = rad(q.n);
                if q.a - r_q + 3.0 * neg_min_a >= thr2 {
                    return true;
                }
                if -q.a - r_q + neg_min_a >= thr2 {
                    return true;
                }
            }
        }
    }
    false
}

/// Scans for a change at the end of round r (which must be the latest
/// recorded round). Returns the first detection in (arm, window
/// quadruple) lexicographic order, or None.
pub fn cp_detect(
    ledger: &EpisodeLedger,
    ctx: &BoundContext,
    mode: ScanMode,
    r: usize,
) -> Result<Option<DetectionEvent>> {
    mode.validate()?;
    if r == 0 || r != ledger.current_round() {
        return Err(Error::invalid(format!(
            "scan runs at the latest recorded round {}, got {r}",
            ledger.current_round()
        )));
    }
    let rho = ledger.episode_start();
    let endpoints = scan_endpoints(rho, r, mode);
    if endpoints.len() < 3 {
        return Ok(None);
    }
    for k in 0..ledger.arms() {
        let wins = build_windows(ledger, k, &endpoints);
        let hit = match mode {
            ScanMode::Grid { .. } => find_first_firing(&wins, ctx.log_term, ctx.b_star),
            ScanMode::Exhaustive => {
                if fired(&wins, ctx.log_term, ctx.b_star) {
                    // The split-form check and the direct scan can
                    // disagree only on exact floating-point boundaries;
                    // the direct scan is authoritative.
                    find_first_firing(&wins, ctx.log_term, ctx.b_star)
                } else {
                    None
                }
            }
        };
        if let Some((windows, first_estimate, second_estimate, threshold)) = hit {
            let time = ledger.round_start_time(r + 1)? - 1;
            return Ok(Some(DetectionEvent {
                round: r,
                time,
                arm: k,
                windows,
                first_estimate,
                second_estimate,
                threshold,
            }));
        }
    }
    Ok(None)
}
