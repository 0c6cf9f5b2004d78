//! Worker-local experience replay: a ring buffer of transitions with a uniform sequence
//! sampler and a class-balanced reward-prediction sampler.

use std::collections::VecDeque;

use rand::Rng;

use crate::losses::RewardClass;
use crate::minidoom::Observation;
use crate::netcore::RP_FRAMES;

pub const DEFAULT_CAPACITY: usize = 2000;

/// `observation` is the frame the action was chosen from; `reward` and `done` are the
/// outcome of that action.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("replay warm-up: no valid {length}-step window among {size} transitions")]
    WarmUpSequence { length: usize, size: usize },
    #[error("replay warm-up: no {0}-reward transition with a complete frame window")]
    WarmUpClass(&'static str),
    #[error("invalid replay request: {0}")]
    InvalidRequest(&'static str),
}

impl ReplayError {
    pub fn is_warm_up(&self) -> bool {
        matches!(self, ReplayError::WarmUpSequence { .. } | ReplayError::WarmUpClass(_))
    }
}

/// A reward-prediction training example: three frames, oldest first, ending at the
/// transition whose reward sign is the label.
#[derive(Clone, Debug, PartialEq)]
pub struct RpSample {
    pub frames: [Observation; RP_FRAMES],
    pub reward: f64,
    pub class: RewardClass,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
    evicted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: VecDeque::with_capacity(capacity), capacity, evicted: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
            self.evicted += 1;
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Starts whose window has no done flag before its last element.
    fn valid_starts(&self, length: usize) -> Vec<usize> {
        if length == 0 || self.items.len() < length {
            return Vec::new();
        }
        // done_before[i] = number of done flags among items[..i]
        let mut done_before = Vec::with_capacity(self.items.len() + 1);
        done_before.push(0usize);
        for t in &self.items {
            done_before.push(done_before.last().unwrap() + t.done as usize);
        }
        (0..=self.items.len() - length).filter(|&s| done_before[s + length - 1] == done_before[s]).collect()
    }

    /// `length` consecutive transitions with the start drawn uniformly over windows that
    /// do not cross an episode end (a done flag may only sit on the last element).
    pub fn sample_uniform_sequence<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
    ) -> Result<Vec<Transition>, ReplayError> {
        if length == 0 {
            return Err(ReplayError::InvalidRequest("sequence length 0"));
        }
        let starts = self.valid_starts(length);
        if starts.is_empty() {
            return Err(ReplayError::WarmUpSequence { length, size: self.items.len() });
        }
        let s = starts[rng.random_range(0..starts.len())];
        Ok(self.items.range(s..s + length).cloned().collect())
    }

    /// Like [`sample_uniform_sequence`](Self::sample_uniform_sequence) but only over windows
    /// whose successor frame is known: either the window ends in a done flag (bootstrap
    /// `None`) or the next transition is stored (bootstrap `Some(its observation)`).
    pub fn sample_bootstrapped_sequence<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
    ) -> Result<(Vec<Transition>, Option<Observation>), ReplayError> {
        if length == 0 {
            return Err(ReplayError::InvalidRequest("sequence length 0"));
        }
        let n = self.items.len();
        let starts: Vec<usize> = self
            .valid_starts(length)
            .into_iter()
            .filter(|&s| self.items[s + length - 1].done || s + length < n)
            .collect();
        if starts.is_empty() {
            return Err(ReplayError::WarmUpSequence { length, size: n });
        }
        let s = starts[rng.random_range(0..starts.len())];
        let seq: Vec<Transition> = self.items.range(s..s + length).cloned().collect();
        let boot = if seq[length - 1].done { None } else { Some(self.items[s + length].observation.clone()) };
        Ok((seq, boot))
    }

    fn is_episode_start(&self, i: usize) -> bool {
        if i == 0 {
            self.evicted == 0
        } else {
            self.items[i - 1].done
        }
    }

    /// Whether the frames ending at `i` are all stored or padded.
    fn has_window(&self, i: usize) -> bool {
        (0..RP_FRAMES - 1).any(|k| k <= i && self.is_episode_start(i - k)) || i + 1 >= RP_FRAMES
    }

    /// Frames ending at `i`, oldest first, with blank frames before an episode start.
    /// `None` when a needed predecessor has been evicted.
    fn window(&self, i: usize) -> Option<[Observation; RP_FRAMES]> {
        let end = &self.items[i].observation;
        let blank = Observation::zeros(end.height, end.width);
        let mut frames = vec![end.clone()];
        let mut cur = i;
        let mut padding = false;
        while frames.len() < RP_FRAMES {
            if padding || self.is_episode_start(cur) {
                padding = true;
                frames.push(blank.clone());
            } else if cur == 0 {
                return None;
            } else {
                cur -= 1;
                frames.push(self.items[cur].observation.clone());
            }
        }
        frames.reverse();
        frames.try_into().ok()
    }

    /// `ceil(batch/2)` zero-reward and `floor(batch/2)` nonzero-reward endpoints, each drawn
    /// uniformly (with replacement) from the eligible transitions of its class.
    pub fn sample_rp_batch<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<RpSample>, ReplayError> {
        if batch == 0 {
            return Err(ReplayError::InvalidRequest("batch size 0"));
        }
        let (mut zero, mut nonzero) = (Vec::new(), Vec::new());
        for (i, t) in self.items.iter().enumerate() {
            if !self.has_window(i) {
                continue;
            }
            if t.reward == 0.0 {
                zero.push(i);
            } else {
                nonzero.push(i);
            }
        }
        if zero.is_empty() {
            return Err(ReplayError::WarmUpClass("zero"));
        }
        if nonzero.is_empty() {
            return Err(ReplayError::WarmUpClass("nonzero"));
        }
        let mut out = Vec::with_capacity(batch);
        for (pool, count) in [(&zero, batch.div_ceil(2)), (&nonzero, batch / 2)] {
            for _ in 0..count {
                let i = pool[rng.random_range(0..pool.len())];
                let t = &self.items[i];
                out.push(RpSample { frames: self.window(i).unwrap(), reward: t.reward, class: RewardClass::of(t.reward) });
            }
        }
        Ok(out)
    }
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        ReplayBuffer::new(DEFAULT_CAPACITY)
    }
}
