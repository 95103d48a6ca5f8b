use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector2;

use super::{initial_belief, local_update, BroadcastPayload, EngineConfig, LocalInput};
use crate::csvfmt::{check_header, fmt_f64, parse};
use crate::error::{Error, Result};
use crate::netmodel::{NodeId, ScenarioTimeline};
use crate::projection::{GaussianBelief, PredictionMoments};

/// Observer of everything that crosses an agent boundary.
pub trait TraceSink {
    fn on_payload(&mut self, _payload: &BroadcastPayload) {}
    fn on_prediction(&mut self, _record: &PredictionRecord) {}
    fn on_belief(&mut self, _record: &BeliefRecord) {}
}

/// Discards everything.
impl TraceSink for () {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub time_index: usize,
    pub agent: NodeId,
    pub prediction: PredictionMoments,
    pub previous_final: GaussianBelief,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefRecord {
    pub time_index: usize,
    pub iteration: usize,
    pub agent: NodeId,
    pub belief: GaussianBelief,
}

/// In-memory trace of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recording {
    pub payloads: Vec<BroadcastPayload>,
    pub predictions: Vec<PredictionRecord>,
    pub beliefs: Vec<BeliefRecord>,
}

impl TraceSink for Recording {
    fn on_payload(&mut self, payload: &BroadcastPayload) {
        self.payloads.push(*payload);
    }
    fn on_prediction(&mut self, record: &PredictionRecord) {
        self.predictions.push(*record);
    }
    fn on_belief(&mut self, record: &BeliefRecord) {
        self.beliefs.push(*record);
    }
}

pub const PAYLOAD_HEADER: [&str; 6] = ["n", "t", "sender", "mu_px", "mu_py", "c_p"];

pub fn write_payload_trace(payloads: &[BroadcastPayload], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PAYLOAD_HEADER)?;
    for p in payloads {
        w.write_record([
            p.time_index.to_string(),
            p.iteration.to_string(),
            p.sender.0.to_string(),
            fmt_f64(p.mu_p.x),
            fmt_f64(p.mu_p.y),
            fmt_f64(p.c_p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_payload_trace(path: &Path) -> Result<Vec<BroadcastPayload>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(&mut r, &PAYLOAD_HEADER, path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != PAYLOAD_HEADER.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                reason: format!("expected 6 fields, got {}", rec.len()),
            });
        }
        out.push(BroadcastPayload {
            time_index: parse(&rec, 0, path)?,
            iteration: parse(&rec, 1, path)?,
            sender: NodeId(parse(&rec, 2, path)?),
            mu_p: Vector2::new(parse(&rec, 3, path)?, parse(&rec, 4, path)?),
            c_p: parse(&rec, 5, path)?,
        });
    }
    Ok(out)
}

/// Recomputes every recorded belief with isolated [`local_update`] calls fed
/// only by the agent's prediction inputs, its own measurements and the
/// recorded payloads of its neighbors. A failed solve keeps the previous
/// round's belief, as in the engine.
pub fn replay(recording: &Recording, timeline: &ScenarioTimeline, cfg: &EngineConfig) -> Result<Vec<BeliefRecord>> {
    let sigma_w = timeline.config.sigma_w;
    let mut payloads: BTreeMap<(usize, usize, NodeId), BroadcastPayload> = BTreeMap::new();
    for p in &recording.payloads {
        payloads.insert((p.time_index, p.iteration, p.sender), *p);
    }
    let predictions: BTreeMap<(usize, NodeId), &PredictionRecord> =
        recording.predictions.iter().map(|r| ((r.time_index, r.agent), r)).collect();

    let mut current: BTreeMap<(usize, NodeId), GaussianBelief> = BTreeMap::new();
    let mut out = Vec::with_capacity(recording.beliefs.len());
    for rec in &recording.beliefs {
        let (n, t, k) = (rec.time_index, rec.iteration, rec.agent);
        let pred = predictions.get(&(n, k)).ok_or(Error::EmptyData(n))?;
        let snapshot = timeline.snapshot(n)?;
        let inbox: Vec<BroadcastPayload> =
            snapshot.neighbors(k).iter().filter_map(|l| payloads.get(&(n, t, *l)).copied()).collect();
        let measurements = timeline.local_measurements(k, n);
        let input = LocalInput {
            agent: k,
            time_index: n,
            iteration: t,
            prediction: &pred.prediction,
            previous_final: &pred.previous_final,
            measurements: &measurements,
            inbox: &inbox,
            sigma_w,
        };
        let belief = match local_update(&input, cfg) {
            Ok(sol) => sol.belief,
            Err(_) => *current.get(&(n, k)).unwrap_or(&initial_belief(&pred.prediction)),
        };
        current.insert((n, k), belief);
        out.push(BeliefRecord { time_index: n, iteration: t, agent: k, belief });
    }
    Ok(out)
}
