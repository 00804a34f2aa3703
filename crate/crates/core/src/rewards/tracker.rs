use serde::{Deserialize, Serialize};

/// Contact history needed by the contact and airtime terms.
///
/// Updated once per control step with the contact flags at that step.
/// Airtime counts whole control periods spent off the ground; the value
/// reported at touchdown is the airtime accumulated up to the previous step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactTracker {
    last_single_contact_time: Option<f64>,
    airtime: [f64; 2],
    contact: [bool; 2],
    touchdown: [bool; 2],
    touchdown_airtime: [f64; 2],
    time: Option<f64>,
}

impl ContactTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Start of an episode: no touchdown is reported for feet already on the ground.
    pub fn reset(&mut self, contact: [bool; 2], now: f64) {
        *self = Self {
            contact,
            time: Some(now),
            ..Self::default()
        };
        if contact[0] != contact[1] {
            self.last_single_contact_time = Some(now);
        }
    }

    pub fn update(&mut self, contact: [bool; 2], now: f64) {
        let dt = self.time.map_or(0.0, |t| (now - t).max(0.0));
        for f in 0..2 {
            self.touchdown[f] = contact[f] && !self.contact[f];
            if contact[f] {
                self.touchdown_airtime[f] = if self.touchdown[f] {
                    self.airtime[f]
                } else {
                    0.0
                };
                self.airtime[f] = 0.0;
            } else {
                self.touchdown_airtime[f] = 0.0;
                self.airtime[f] += dt;
            }
        }
        if contact[0] != contact[1] {
            self.last_single_contact_time = Some(now);
        }
        self.contact = contact;
        self.time = Some(now);
    }

    pub fn last_single_contact_time(&self) -> Option<f64> {
        self.last_single_contact_time
    }

    pub fn airtime(&self) -> [f64; 2] {
        self.airtime
    }

    pub fn contact(&self) -> [bool; 2] {
        self.contact
    }

    pub fn touchdown(&self) -> [bool; 2] {
        self.touchdown
    }

    /// Airtime that ended with this step's touchdown (0 for feet without one).
    pub fn touchdown_airtime(&self) -> [f64; 2] {
        self.touchdown_airtime
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    /// True if exactly one foot touched the ground at some step in `[now - window, now]`.
    pub fn single_contact_within(&self, now: f64, window: f64) -> bool {
        // slack absorbs rounding of accumulated control-step times
        self.last_single_contact_time
            .is_some_and(|t| t <= now + 1e-9 && t >= now - window - 1e-9)
    }

    /// Left/right swapped copy.
    pub fn mirrored(&self) -> Self {
        let sw = |a: [f64; 2]| [a[1], a[0]];
        let swb = |a: [bool; 2]| [a[1], a[0]];
        Self {
            last_single_contact_time: self.last_single_contact_time,
            airtime: sw(self.airtime),
            contact: swb(self.contact),
            touchdown: swb(self.touchdown),
            touchdown_airtime: sw(self.touchdown_airtime),
            time: self.time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_resets_on_contact_and_reports_at_touchdown() {
        let mut t = ContactTracker::new();
        t.reset([true, true], 0.0);
        let dt = 0.02;
        let mut now = 0.0;
        // lift the left foot for 20 steps
        for _ in 0..20 {
            now += dt;
            t.update([false, true], now);
            assert!(!t.touchdown()[0]);
        }
        assert!((t.airtime()[0] - 0.4).abs() < 1e-12);
        now += dt;
        t.update([true, true], now);
        assert!(t.touchdown()[0] && !t.touchdown()[1]);
        assert!((t.touchdown_airtime()[0] - 0.4).abs() < 1e-12);
        assert_eq!(t.airtime()[0], 0.0);
        now += dt;
        t.update([true, true], now);
        assert!(!t.touchdown()[0]);
        assert_eq!(t.touchdown_airtime()[0], 0.0);
    }

    #[test]
    fn no_touchdown_at_reset() {
        let mut t = ContactTracker::new();
        t.reset([true, true], 0.0);
        t.update([true, true], 0.02);
        assert_eq!(t.touchdown(), [false, false]);
        assert_eq!(t.last_single_contact_time(), None);
    }
}
