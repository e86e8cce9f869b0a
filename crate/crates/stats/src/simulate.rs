//! Synthetic trial data.
//!
//! [`simulate_trial`] produces a full dataset whose group means and SDs follow
//! the published pilot summaries; [`simulate_vas_lmm`] draws daily ratings
//! from a random-intercept model with known parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Group, Participant, ScaleResponse, Timepoint, TrialDataset, VasRecord};
use crate::lmm::LongRecord;
use crate::scales::PSS10_REVERSED;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

const fn ms(mean: f64, sd: f64) -> MeanSd {
    MeanSd { mean, sd }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmCalibration {
    pub age: MeanSd,
    pub pss_t0: MeanSd,
    pub pss_t2: MeanSd,
    /// Expected VAS on day 1 and day 14; days in between are linear.
    pub vas_day1: f64,
    pub vas_day14: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intervention: ArmCalibration,
    pub control: ArmCalibration,
    /// Correlation between a person's T0 and T2 PSS-10 totals.
    pub pss_rho: f64,
    pub vas_sigma_u: f64,
    pub vas_sigma_e: f64,
    pub n_per_group: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            intervention: ArmCalibration {
                age: ms(21.9, 1.79),
                pss_t0: ms(28.9, 3.25),
                pss_t2: ms(25.8, 2.44),
                vas_day1: 8.3,
                vas_day14: 5.1,
            },
            control: ArmCalibration {
                age: ms(21.8, 1.98),
                pss_t0: ms(29.2, 3.97),
                pss_t2: ms(28.6, 3.24),
                vas_day1: 8.4,
                vas_day14: 6.5,
            },
            pss_rho: 0.6,
            vas_sigma_u: 0.5,
            vas_sigma_e: 0.4,
            n_per_group: 10,
        }
    }
}

/// Mean SUS item contributions (0–4) and their SDs, items 1..10.
pub const SUS_CONTRIBUTIONS: [MeanSd; 10] = [
    ms(3.8, 0.63),
    ms(2.2, 0.79),
    ms(3.7, 0.67),
    ms(1.6, 0.70),
    ms(3.6, 0.52),
    ms(1.9, 0.74),
    ms(3.0, 0.82),
    ms(1.5, 0.53),
    ms(3.3, 0.95),
    ms(1.6, 0.52),
];

/// PAESIS item means and SDs, items 1..5.
pub const PAESIS_ITEMS: [MeanSd; 5] = [ms(4.0, 0.82), ms(3.5, 0.53), ms(4.4, 0.52), ms(3.7, 0.67), ms(2.9, 0.74)];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn likert(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: i32, hi: i32) -> i32 {
    ((mean + sd * normal(rng)).round() as i32).clamp(lo, hi)
}

/// Raw PSS-10 item values whose scored total is exactly `total` (0–40).
pub fn pss_items_for_total(total: i32, rng: &mut ChaCha8Rng) -> Vec<i32> {
    let total = total.clamp(0, 40);
    let mut scored = vec![total / 10; 10];
    let mut order: Vec<usize> = (0..10).collect();
    order.shuffle(rng);
    for &i in order.iter().take((total % 10) as usize) {
        scored[i] += 1;
    }
    // spread the responses without changing the sum
    for _ in 0..10 {
        let (a, b) = (rng.random_range(0..10), rng.random_range(0..10));
        if a != b && scored[a] < 4 && scored[b] > 0 {
            scored[a] += 1;
            scored[b] -= 1;
        }
    }
    scored
        .iter()
        .enumerate()
        .map(|(i, &s)| if PSS10_REVERSED.contains(&(i + 1)) { 4 - s } else { s })
        .collect()
}

fn response(id: &str, timepoint: Timepoint, instrument: &str, items: Vec<i32>) -> ScaleResponse {
    ScaleResponse {
        id: id.to_string(),
        timepoint,
        instrument: instrument.to_string(),
        items,
    }
}

/// A complete calibrated dataset: demographics, PSS-10 and CERQ at T0/T2,
/// 14 days of VAS, and GEQ-Core, SUS and PAESIS for the intervention arm.
pub fn simulate_trial(cal: &Calibration, seed: u64) -> TrialDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = TrialDataset::default();
    let rho = cal.pss_rho.clamp(-1.0, 1.0);
    for (g, arm) in [(Group::Intervention, &cal.intervention), (Group::Control, &cal.control)] {
        for k in 0..cal.n_per_group {
            let id = format!("{}{:02}", if g == Group::Intervention { "I" } else { "C" }, k + 1);
            ds.participants.push(Participant {
                id: id.clone(),
                group: g,
                age: (arm.age.mean + arm.age.sd * normal(&mut rng)).round(),
                gender: if k % 2 == 0 { "male" } else { "female" }.to_string(),
            });

            let z0 = normal(&mut rng);
            let z2 = rho * z0 + (1.0 - rho * rho).sqrt() * normal(&mut rng);
            let t0 = (arm.pss_t0.mean + arm.pss_t0.sd * z0).round() as i32;
            let t2 = (arm.pss_t2.mean + arm.pss_t2.sd * z2).round() as i32;
            ds.scale_responses
                .push(response(&id, Timepoint::T0, "pss10", pss_items_for_total(t0, &mut rng)));
            ds.scale_responses
                .push(response(&id, Timepoint::T2, "pss10", pss_items_for_total(t2, &mut rng)));

            // CERQ: a person-level tendency per subscale; the intervention arm
            // drifts towards adaptive strategies at T2
            let mut t0_items = Vec::with_capacity(36);
            let mut t2_items = Vec::with_capacity(36);
            for block in 0..9 {
                let adaptive = (1..=6).contains(&block);
                let base = 2.8 + 0.5 * normal(&mut rng);
                let shift = match (g, adaptive) {
                    (Group::Intervention, true) => 0.3,
                    (Group::Intervention, false) => -0.3,
                    _ => 0.0,
                };
                for _ in 0..4 {
                    t0_items.push(likert(&mut rng, base, 0.7, 1, 5));
                    t2_items.push(likert(&mut rng, base + shift, 0.7, 1, 5));
                }
            }
            ds.scale_responses.push(response(&id, Timepoint::T0, "cerq", t0_items));
            ds.scale_responses.push(response(&id, Timepoint::T2, "cerq", t2_items));

            let u = cal.vas_sigma_u * normal(&mut rng);
            for day in 1..=14u32 {
                let expected = arm.vas_day1 + (arm.vas_day14 - arm.vas_day1) * f64::from(day - 1) / 13.0;
                let v = expected + u + cal.vas_sigma_e * normal(&mut rng);
                ds.vas_records.push(VasRecord {
                    id: id.clone(),
                    day,
                    vas: ((v * 10.0).round() / 10.0).clamp(0.0, 10.0),
                });
            }

            if g == Group::Intervention {
                let geq: Vec<i32> = (0..33).map(|_| likert(&mut rng, 2.2, 1.0, 0, 4)).collect();
                ds.scale_responses.push(response(&id, Timepoint::T2, "geq_core", geq));
                let sus: Vec<i32> = SUS_CONTRIBUTIONS
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let contrib = likert(&mut rng, c.mean, c.sd, 0, 4);
                        if i % 2 == 0 {
                            contrib + 1
                        } else {
                            5 - contrib
                        }
                    })
                    .collect();
                ds.scale_responses.push(response(&id, Timepoint::T2, "sus", sus));
                let person = 0.5 * normal(&mut rng);
                let paesis: Vec<i32> = PAESIS_ITEMS
                    .iter()
                    .map(|m| likert(&mut rng, m.mean + person, m.sd * 0.8, 1, 5))
                    .collect();
                ds.scale_responses.push(response(&id, Timepoint::T2, "paesis", paesis));
            }
        }
    }
    ds
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasModel {
    /// Intercept, group, day, group × day.
    pub beta: [f64; 4],
    pub sigma_u: f64,
    pub sigma_e: f64,
    pub persons_per_group: usize,
    pub days: u32,
}

impl Default for VasModel {
    fn default() -> Self {
        VasModel {
            beta: [8.4, 0.1, -0.13, -0.12],
            sigma_u: 0.5,
            sigma_e: 0.4,
            persons_per_group: 10,
            days: 14,
        }
    }
}

/// Unrounded, unclamped draws from the random-intercept model.
pub fn simulate_vas_lmm(model: &VasModel, seed: u64) -> Vec<LongRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.sigma_e.max(0.0)).expect("finite sd");
    let re = Normal::new(0.0, model.sigma_u.max(0.0)).expect("finite sd");
    let [b0, b1, b2, b3] = model.beta;
    let mut out = Vec::new();
    for person in 0..2 * model.persons_per_group {
        let group = if person < model.persons_per_group { 1.0 } else { 0.0 };
        let u = re.sample(&mut rng);
        for day in 1..=model.days {
            let d = f64::from(day);
            out.push(LongRecord {
                id: format!("p{person:03}"),
                group,
                day: d,
                y: b0 + b1 * group + b2 * d + b3 * group * d + u + noise.sample(&mut rng),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::score_pss10;

    #[test]
    fn pss_items_hit_the_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for total in 0..=40 {
            assert_eq!(score_pss10(&pss_items_for_total(total, &mut rng)).unwrap(), f64::from(total));
        }
    }

    #[test]
    fn trial_is_deterministic_and_valid() {
        let a = simulate_trial(&Calibration::default(), 3);
        assert_eq!(a, simulate_trial(&Calibration::default(), 3));
        assert_eq!(a.participants.len(), 20);
        assert_eq!(a.vas_records.len(), 280);
    }
}
