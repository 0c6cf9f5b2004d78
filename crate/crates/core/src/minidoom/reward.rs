use std::fmt;

/// Per-tick tally of the five shaped-reward events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct EventCounts {
    pub kill: u32,
    pub death: u32,
    pub missed_shot: u32,
    pub lost_health: u32,
    pub object_gathered: u32,
}

impl EventCounts {
    pub fn is_empty(&self) -> bool {
        *self == EventCounts::default()
    }

    pub fn add(&mut self, other: &EventCounts) {
        self.kill += other.kill;
        self.death += other.death;
        self.missed_shot += other.missed_shot;
        self.lost_health += other.lost_health;
        self.object_gathered += other.object_gathered;
    }
}

impl fmt::Display for EventCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, n) in [
            ("kill", self.kill),
            ("death", self.death),
            ("missed_shot", self.missed_shot),
            ("lost_health", self.lost_health),
            ("object_gathered", self.object_gathered),
        ] {
            if n == 1 {
                parts.push(name.to_string());
            } else if n > 1 {
                parts.push(format!("{name}x{n}"));
            }
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// Reward weight of each event for one agent role.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardProfile {
    pub kill: f64,
    pub death: f64,
    pub missed_shot: f64,
    pub lost_health: f64,
    pub object_gathered: f64,
}

impl RewardProfile {
    pub const ACTION: RewardProfile = RewardProfile {
        kill: 1.0,
        death: -1.0,
        missed_shot: -0.02,
        lost_health: -0.06,
        object_gathered: 0.3,
    };

    pub const NAVIGATION: RewardProfile = RewardProfile {
        kill: 0.0,
        death: -1.0,
        missed_shot: 0.0,
        lost_health: -0.1,
        object_gathered: 0.5,
    };

    /// Dot product of event counts and weights.
    pub fn reward(&self, e: &EventCounts) -> f64 {
        e.kill as f64 * self.kill
            + e.death as f64 * self.death
            + e.missed_shot as f64 * self.missed_shot
            + e.lost_health as f64 * self.lost_health
            + e.object_gathered as f64 * self.object_gathered
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_events_zero_reward() {
        let e = EventCounts::default();
        assert_eq!(RewardProfile::ACTION.reward(&e), 0.0);
        assert_eq!(RewardProfile::NAVIGATION.reward(&e), 0.0);
    }

    #[test]
    fn display() {
        let e = EventCounts { missed_shot: 1, lost_health: 2, ..Default::default() };
        assert_eq!(e.to_string(), "missed_shot+lost_healthx2");
        assert_eq!(EventCounts::default().to_string(), "-");
    }
}
