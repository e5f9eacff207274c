//! Run traces: everything one simulated run produced, in replayable
//! detail, with JSON-lines persistence.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// One pull as the policy experienced it, plus the oracle gap that was
/// paid for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullRecord {
    pub time: u64,
    pub round: usize,
    pub arm: usize,
    /// The observation shown to the policy.
    pub value: f64,
    /// The oracle shortfall of the pulled arm at this step.
    pub gap: f64,
}

/// A change detection: the round it fired on, the step it was raised at,
/// the arm and window quadruple that witnessed it, and the two estimates
/// against the threshold they had to clear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub round: usize,
    pub time: u64,
    pub arm: usize,
    /// (u, v, u2, v2): the earlier window covers rounds u..v-1, the
    /// later one u2..v2-1.
    pub windows: (usize, usize, usize, usize),
    pub first_estimate: f64,
    pub second_estimate: f64,
    /// |first - second| had to reach this value.
    pub threshold: f64,
}

/// Where an episode began.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpan {
    pub index: usize,
    pub start_round: usize,
    pub start_time: u64,
}

/// Complete record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub policy: String,
    pub seed: u64,
    pub arms: usize,
    pub horizon: u64,
    /// Content hash of the environment the run was driven by.
    pub env_hash: u64,
    /// Policy parameters, echoed for reproducibility.
    pub params: serde_json::Value,
    /// First time step the run covered (1 for full runs).
    pub start_time: u64,
    /// Last time step the run covered.
    pub end_time: u64,
    pub rounds: usize,
    pub forced_progress_rounds: u64,
    pub total_regret: f64,
    pub episodes: Vec<EpisodeSpan>,
    pub detections: Vec<DetectionEvent>,
    pub pulls: Vec<PullRecord>,
}

impl RunTrace {
    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    /// Cumulative regret after each pull, compensated the same way the
    /// run loop accumulates the total, so the last point equals
    /// `total_regret` exactly.
    pub fn cumulative_regret(&self) -> Vec<(u64, f64)> {
        let mut acc = CompensatedSum::new();
        self.pulls
            .iter()
            .map(|p| {
                acc.add(p.gap);
                (p.time, acc.value())
            })
            .collect()
    }

    /// Writes the trace as JSON lines: a header object (the trace with
    /// pulls elided), then one line per pull.
    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        let header = RunTrace {
            pulls: Vec::new(),
            ..self.clone()
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for p in &self.pulls {
            writeln!(w, "{}", serde_json::to_string(p)?)?;
        }
        Ok(())
    }

    /// Reads a trace written by [`RunTrace::write_jsonl`].
    pub fn read_jsonl(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty trace stream"))??;
        let mut trace: RunTrace = serde_json::from_str(&header)?;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trace.pulls.push(serde_json::from_str(&line)?);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> RunTrace {
        RunTrace {
            policy: "test".into(),
            seed: 7,
            arms: 2,
            horizon: 4,
            env_hash: 99,
            params: serde_json::json!({"m": 1}),
            start_time: 1,
            end_time: 4,
            rounds: 2,
            forced_progress_rounds: 0,
            total_regret: 0.6,
            episodes: vec![EpisodeSpan {
                index: 1,
                start_round: 1,
                start_time: 1,
            }],
            detections: vec![],
            pulls: vec![
                PullRecord {
                    time: 1,
                    round: 1,
                    arm: 0,
                    value: 1.0,
                    gap: 0.0,
                },
                PullRecord {
                    time: 2,
                    round: 1,
                    arm: 1,
                    value: 0.0,
                    gap: 0.3,
                },
                PullRecord {
                    time: 3,
                    round: 2,
                    arm: 0,
                    value: 1.0,
                    gap: 0.0,
                },
                PullRecord {
                    time: 4,
                    round: 2,
                    arm: 1,
                    value: 1.0,
                    gap: 0.3,
                },
            ],
        }
    }

    #[test]
    fn cumulative_regret_ends_at_the_total() {
        let trace = sample_trace();
        let series = trace.cumulative_regret();
        assert_eq!(series.len(), 4);
        assert_eq!(series[0], (1, 0.0));
        assert_eq!(series.last().unwrap().0, 4);
        assert_eq!(series.last().unwrap().1, 0.6);
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        let back = RunTrace::read_jsonl(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(trace, back);
    }
}
