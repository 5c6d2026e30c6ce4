//! Hour-of-day demand curve for organic traffic.
//!
//! Piecewise-linear: a flat night trough on [1, 7) at `night_attenuation`,
//! full demand at the midday (12h) and evening (20h) peaks, linear ramps
//! between, wrapping continuously across midnight.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Demand weight for an hour-of-day in [0, 24); other values wrap.
pub fn diurnal_intensity(hour: f64, night_attenuation: f64) -> f64 {
    let a = night_attenuation;
    let h = hour.rem_euclid(24.0);
    if h < 1.0 {
        // Tail of the evening ramp-down, which runs 20h..25h in unwrapped time.
        1.0 - (1.0 - a) * (h + 4.0) / 5.0
    } else if h < 7.0 {
        a
    } else if h < 12.0 {
        a + (1.0 - a) * (h - 7.0) / 5.0
    } else if h < 20.0 {
        1.0
    } else {
        1.0 - (1.0 - a) * (h - 20.0) / 5.0
    }
}

/// Inverse-CDF sampler over the curve; draws an hour-of-day in [0, 24).
pub struct HourSampler {
    bounds: [f64; 6],
    values: [f64; 6],
    cumulative: [f64; 6],
}

impl HourSampler {
    pub fn new(night_attenuation: f64) -> Self {
        let bounds = [0.0, 1.0, 7.0, 12.0, 20.0, 24.0];
        let mut values = [0.0; 6];
        for (i, b) in bounds.iter().enumerate() {
            values[i] = diurnal_intensity(*b, night_attenuation);
        }
        // values[5] describes the right edge at 24h == 0h.
        values[5] = values[0];
        let mut cumulative = [0.0; 6];
        for i in 1..6 {
            let seg = (values[i - 1] + values[i]) / 2.0 * (bounds[i] - bounds[i - 1]);
            cumulative[i] = cumulative[i - 1] + seg;
        }
        HourSampler { bounds, values, cumulative }
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative[5]
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen::<f64>() * self.total_mass();
        let mut seg = 1;
        while seg < 5 && u >= self.cumulative[seg] {
            seg += 1;
        }
        let s = u - self.cumulative[seg - 1];
        let (h0, h1) = (self.bounds[seg - 1], self.bounds[seg]);
        let (y0, y1) = (self.values[seg - 1], self.values[seg]);
        let width = h1 - h0;
        let h = if (y1 - y0).abs() < 1e-12 {
            h0 + s / y0
        } else {
            let slope = (y1 - y0) / width;
            h0 + (-y0 + (y0 * y0 + 2.0 * s * slope).sqrt()) / slope
        };
        h.clamp(h0, h1.min(24.0 - f64::EPSILON))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn trough_and_peaks() {
        assert_eq!(diurnal_intensity(3.0, 0.2), 0.2);
        assert_eq!(diurnal_intensity(12.0, 0.2), 1.0);
        assert_eq!(diurnal_intensity(20.0, 0.2), 1.0);
        assert_eq!(diurnal_intensity(15.5, 0.2), 1.0);
    }

    #[test]
    fn wraps_continuously_at_midnight() {
        let before = diurnal_intensity(23.999, 0.2);
        let after = diurnal_intensity(0.001, 0.2);
        assert!((before - after).abs() < 1e-3, "{before} vs {after}");
        assert!((diurnal_intensity(24.0, 0.2) - diurnal_intensity(0.0, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn night_mean_below_day_mean() {
        let night: f64 = (0..600).map(|i| diurnal_intensity(1.0 + 6.0 * i as f64 / 600.0, 0.2)).sum::<f64>() / 600.0;
        let day: f64 = (0..1500).map(|i| diurnal_intensity(8.0 + 15.0 * i as f64 / 1500.0, 0.2)).sum::<f64>() / 1500.0;
        assert!(night < day);
    }

    #[test]
    fn sampler_matches_curve_mass() {
        let sampler = HourSampler::new(0.2);
        let mut rng = stream_rng(7, Stream::LegitTraffic);
        let n = 200_000;
        let mut trough = 0u32;
        for _ in 0..n {
            let h = sampler.sample(&mut rng);
            assert!((0.0..24.0).contains(&h));
            if (1.0..7.0).contains(&h) {
                trough += 1;
            }
        }
        // Closed form: trough mass 6a over total 15.2 when a = 0.2.
        let expect = 6.0 * 0.2 / sampler.total_mass();
        let got = f64::from(trough) / f64::from(n);
        assert!((got - expect).abs() < 0.01, "expected ~{expect}, got {got}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let sampler = HourSampler::new(0.2);
        let a: Vec<f64> = {
            let mut rng = stream_rng(3, Stream::Bots);
            (0..16).map(|_| sampler.sample(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = stream_rng(3, Stream::Bots);
            (0..16).map(|_| sampler.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }
}
