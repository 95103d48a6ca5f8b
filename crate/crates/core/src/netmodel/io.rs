//! Plain-text timeline bundle: `config.toml` plus one CSV each for nodes,
//! edges, states and measurements.
//!
//! ```text
//! nodes.csv         n,node_id,kind,x,y                 (x,y empty for agents)
//! edges.csv         n,observer,target,kind             (kind: agent_agent | agent_anchor)
//! states.csv        n,agent,px,py,vx,vy,noise_x,noise_y (velocity/noise empty when absent)
//! measurements.csv  n,observer,target,distance,noise
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use nalgebra::Vector2;

use super::{AgentState, Measurement, NetworkSnapshot, NodeId, ScenarioConfig, ScenarioTimeline};
use crate::csvfmt::{check_header, field, fmt_f64, fmt_opt, parse, parse_opt};
use crate::error::{Error, Result};

pub const TIMELINE_FILES: [&str; 5] = ["config.toml", "nodes.csv", "edges.csv", "states.csv", "measurements.csv"];

const NODES_HEADER: [&str; 5] = ["n", "node_id", "kind", "x", "y"];
const EDGES_HEADER: [&str; 4] = ["n", "observer", "target", "kind"];
const STATES_HEADER: [&str; 8] = ["n", "agent", "px", "py", "vx", "vy", "noise_x", "noise_y"];
const MEAS_HEADER: [&str; 5] = ["n", "observer", "target", "distance", "noise"];

pub fn write_timeline(timeline: &ScenarioTimeline, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), toml::to_string(&timeline.config)?)?;

    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))?;
    w.write_record(NODES_HEADER)?;
    for snap in &timeline.snapshots {
        let n = snap.time_index.to_string();
        for k in &snap.agents {
            w.write_record([n.as_str(), &k.to_string(), "agent", "", ""])?;
        }
        for (a, p) in &snap.anchors {
            w.write_record([n.as_str(), &a.to_string(), "anchor", &fmt_f64(p.x), &fmt_f64(p.y)])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("edges.csv"))?;
    w.write_record(EDGES_HEADER)?;
    for snap in &timeline.snapshots {
        let n = snap.time_index.to_string();
        for (k, l) in &snap.agent_edges {
            w.write_record([n.as_str(), &k.to_string(), &l.to_string(), "agent_agent"])?;
        }
        for (k, l) in &snap.agent_anchor_edges {
            w.write_record([n.as_str(), &k.to_string(), &l.to_string(), "agent_anchor"])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("states.csv"))?;
    w.write_record(STATES_HEADER)?;
    for (n, states) in timeline.true_states.iter().enumerate() {
        for (k, s) in states {
            let noise = timeline.driving_noise.get(n).and_then(|m| m.get(k));
            w.write_record([
                n.to_string(),
                k.to_string(),
                fmt_f64(s.position.x),
                fmt_f64(s.position.y),
                fmt_opt(s.velocity.map(|v| v.x)),
                fmt_opt(s.velocity.map(|v| v.y)),
                fmt_opt(noise.map(|v| v.x)),
                fmt_opt(noise.map(|v| v.y)),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("measurements.csv"))?;
    w.write_record(MEAS_HEADER)?;
    for ms in &timeline.measurements {
        for m in ms {
            w.write_record([
                m.time_index.to_string(),
                m.observer.to_string(),
                m.target.to_string(),
                fmt_f64(m.value),
                fmt_f64(m.noise),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeline(dir: &Path) -> Result<ScenarioTimeline> {
    let config: ScenarioConfig = toml::from_str(&fs::read_to_string(dir.join("config.toml"))?)?;
    let n_total = config.n_steps + 1;
    let mut snapshots: Vec<NetworkSnapshot> =
        (0..n_total).map(|n| NetworkSnapshot { time_index: n, ..Default::default() }).collect();
    let mut true_states = vec![BTreeMap::new(); n_total];
    let mut driving_noise = vec![BTreeMap::new(); n_total];
    let mut measurements = vec![Vec::new(); n_total];

    let index = |n: usize, path: &Path| -> Result<usize> {
        if n < n_total {
            Ok(n)
        } else {
            Err(Error::Parse { path: path.to_owned(), reason: format!("time index {n} beyond N") })
        }
    };

    let path = dir.join("nodes.csv");
    let mut r = open(&path)?;
    check_header(&mut r, &NODES_HEADER, &path)?;
    for rec in r.records() {
        let rec = rec?;
        let n = index(parse(&rec, 0, &path)?, &path)?;
        let id = NodeId(parse(&rec, 1, &path)?);
        match field(&rec, 2, &path)? {
            "agent" => {
                snapshots[n].agents.insert(id);
            }
            "anchor" => {
                let p = Vector2::new(parse(&rec, 3, &path)?, parse(&rec, 4, &path)?);
                snapshots[n].anchors.insert(id, p);
            }
            other => return Err(Error::Parse { path, reason: format!("unknown node kind {other:?}") }),
        }
    }

    let path = dir.join("edges.csv");
    let mut r = open(&path)?;
    check_header(&mut r, &EDGES_HEADER, &path)?;
    for rec in r.records() {
        let rec = rec?;
        let n = index(parse(&rec, 0, &path)?, &path)?;
        let edge = (NodeId(parse(&rec, 1, &path)?), NodeId(parse(&rec, 2, &path)?));
        match field(&rec, 3, &path)? {
            "agent_agent" => snapshots[n].agent_edges.insert(edge),
            "agent_anchor" => snapshots[n].agent_anchor_edges.insert(edge),
            other => return Err(Error::Parse { path, reason: format!("unknown edge kind {other:?}") }),
        };
    }

    let path = dir.join("states.csv");
    let mut r = open(&path)?;
    check_header(&mut r, &STATES_HEADER, &path)?;
    for rec in r.records() {
        let rec = rec?;
        let n = index(parse(&rec, 0, &path)?, &path)?;
        let k = NodeId(parse(&rec, 1, &path)?);
        let position = Vector2::new(parse(&rec, 2, &path)?, parse(&rec, 3, &path)?);
        let velocity = match (parse_opt(&rec, 4, &path)?, parse_opt(&rec, 5, &path)?) {
            (Some(x), Some(y)) => Some(Vector2::new(x, y)),
            _ => None,
        };
        true_states[n].insert(k, AgentState { position, velocity });
        if let (Some(x), Some(y)) = (parse_opt(&rec, 6, &path)?, parse_opt(&rec, 7, &path)?) {
            driving_noise[n].insert(k, Vector2::new(x, y));
        }
    }

    let path = dir.join("measurements.csv");
    let mut r = open(&path)?;
    check_header(&mut r, &MEAS_HEADER, &path)?;
    for rec in r.records() {
        let rec = rec?;
        let n = index(parse(&rec, 0, &path)?, &path)?;
        measurements[n].push(Measurement {
            observer: NodeId(parse(&rec, 1, &path)?),
            target: NodeId(parse(&rec, 2, &path)?),
            value: parse(&rec, 3, &path)?,
            noise: parse(&rec, 4, &path)?,
            time_index: n,
        });
    }

    for snap in &snapshots {
        snap.validate()?;
    }
    Ok(ScenarioTimeline { config, snapshots, true_states, driving_noise, measurements })
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::Reader::from_path(path)?)
}
