use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use crate::losses::LossComponents;
use crate::minidoom::EventCounts;

pub const LOG_HEADER: &str = "global_step,worker,episode,kills,deaths,objects,reward,loss_pi,loss_v,loss_vr,loss_rp,loss_pc";

/// One finished episode of one worker, with the loss components of the update that ended it.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub global_step: u64,
    pub worker: usize,
    pub episode: u64,
    pub kills: u32,
    pub deaths: u32,
    pub objects: u32,
    pub reward: f64,
    pub losses: LossComponents,
}

impl LogRow {
    pub fn csv(&self) -> String {
        let l = &self.losses;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.global_step,
            self.worker,
            self.episode,
            self.kills,
            self.deaths,
            self.objects,
            self.reward,
            l.policy,
            l.value,
            l.value_replay,
            l.reward_prediction,
            l.pixel_control
        )
    }
}

struct Inner {
    rows: Vec<LogRow>,
    out: Option<BufWriter<File>>,
}

/// Shared training log. Rows are appended under one lock, stamped with the global step
/// read inside that lock, so the step column never decreases.
pub struct TrainLog {
    inner: Mutex<Inner>,
}

impl TrainLog {
    pub fn in_memory() -> TrainLog {
        TrainLog { inner: Mutex::new(Inner { rows: Vec::new(), out: None }) }
    }

    pub fn to_file(path: &Path) -> io::Result<TrainLog> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{LOG_HEADER}")?;
        out.flush()?;
        Ok(TrainLog { inner: Mutex::new(Inner { rows: Vec::new(), out: Some(out) }) })
    }

    pub fn record(
        &self,
        global_step: impl FnOnce() -> u64,
        worker: usize,
        episode: u64,
        events: &EventCounts,
        reward: f64,
        losses: LossComponents,
    ) -> io::Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let row = LogRow {
            global_step: global_step(),
            worker,
            episode,
            kills: events.kill,
            deaths: events.death,
            objects: events.object_gathered,
            reward,
            losses,
        };
        if let Some(out) = inner.out.as_mut() {
            writeln!(out, "{}", row.csv())?;
            out.flush()?;
        }
        inner.rows.push(row);
        Ok(())
    }

    pub fn into_rows(self) -> Vec<LogRow> {
        self.inner.into_inner().unwrap().rows
    }
}

pub fn parse_log_line(line: &str) -> Option<LogRow> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 12 {
        return None;
    }
    let num = |i: usize| f[i].parse::<f64>().ok();
    Some(LogRow {
        global_step: f[0].parse().ok()?,
        worker: f[1].parse().ok()?,
        episode: f[2].parse().ok()?,
        kills: f[3].parse().ok()?,
        deaths: f[4].parse().ok()?,
        objects: f[5].parse().ok()?,
        reward: num(6)?,
        losses: LossComponents {
            policy: num(7)?,
            value: num(8)?,
            value_replay: num(9)?,
            reward_prediction: num(10)?,
            pixel_control: num(11)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let row = LogRow {
            global_step: 40,
            worker: 1,
            episode: 2,
            kills: 3,
            deaths: 1,
            objects: 0,
            reward: -0.08,
            losses: LossComponents { policy: 0.1, value: 0.2, value_replay: 0.0, reward_prediction: 1.0986, pixel_control: 1e-5 },
        };
        assert_eq!(parse_log_line(&row.csv()), Some(row));
        assert_eq!(LOG_HEADER.split(',').count(), 12);
    }
}
