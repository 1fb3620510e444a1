//! Per-track appearance memory: a bounded feature bank matched by minimum
//! cosine distance, or a single exponentially averaged vector.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mot_io::Detection;

pub const DEFAULT_BANK_SIZE: usize = 100;
pub const DEFAULT_EMA_ALPHA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppearanceMode {
    Bank,
    Ema,
}

/// Result of folding one observation into an EMA state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmaOutcome {
    Initialized,
    Updated,
    /// The blend had (near) zero norm; the previous vector was kept.
    DegenerateKept,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceState {
    mode: AppearanceMode,
    bank: VecDeque<Vec<f32>>,
    capacity: usize,
    ema: Option<Vec<f32>>,
    alpha: f64,
}

pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    (1.0 - dot).clamp(0.0, 2.0)
}

/// `alpha * prev + (1 - alpha) * f` before normalisation.
pub fn ema_blend(prev: &[f32], f: &[f32], alpha: f64) -> Vec<f64> {
    prev.iter()
        .zip(f)
        .map(|(&p, &x)| alpha * p as f64 + (1.0 - alpha) * x as f64)
        .collect()
}

impl AppearanceState {
    pub fn bank(capacity: usize) -> Self {
        Self {
            mode: AppearanceMode::Bank,
            bank: VecDeque::with_capacity(capacity.min(DEFAULT_BANK_SIZE)),
            capacity: capacity.max(1),
            ema: None,
            alpha: DEFAULT_EMA_ALPHA,
        }
    }

    pub fn ema(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("EMA momentum must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            mode: AppearanceMode::Ema,
            bank: VecDeque::new(),
            capacity: 0,
            ema: None,
            alpha,
        })
    }

    pub fn mode(&self) -> AppearanceMode {
        self.mode
    }

    pub fn bank_vectors(&self) -> impl Iterator<Item = &[f32]> {
        self.bank.iter().map(Vec::as_slice)
    }

    pub fn ema_vector(&self) -> Option<&[f32]> {
        self.ema.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        match self.mode {
            AppearanceMode::Bank => self.bank.is_empty(),
            AppearanceMode::Ema => self.ema.is_none(),
        }
    }

    /// Appends to the bank, evicting the oldest entry beyond capacity.
    pub fn push_bank(&mut self, embedding: &[f32]) -> Result<()> {
        if self.mode != AppearanceMode::Bank {
            return Err(Error::State("push_bank on an EMA appearance state".into()));
        }
        if self.bank.len() == self.capacity {
            self.bank.pop_front();
        }
        self.bank.push_back(embedding.to_vec());
        Ok(())
    }

    /// Smallest cosine distance between the embedding and any banked vector.
    pub fn bank_distance(&self, embedding: &[f32]) -> Result<f64> {
        if self.mode != AppearanceMode::Bank {
            return Err(Error::State("bank_distance on an EMA appearance state".into()));
        }
        self.bank
            .iter()
            .map(|v| cosine_distance(v, embedding))
            .min_by(f64::total_cmp)
            .ok_or_else(|| Error::State("feature bank is empty".into()))
    }

    pub fn ema_update(&mut self, embedding: &[f32]) -> Result<EmaOutcome> {
        if self.mode != AppearanceMode::Ema {
            return Err(Error::State("ema_update on a bank appearance state".into()));
        }
        let Some(prev) = &self.ema else {
            self.ema = Some(embedding.to_vec());
            return Ok(EmaOutcome::Initialized);
        };
        let blend = ema_blend(prev, embedding, self.alpha);
        let norm = blend.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Ok(EmaOutcome::DegenerateKept);
        }
        self.ema = Some(blend.iter().map(|v| (v / norm) as f32).collect());
        Ok(EmaOutcome::Updated)
    }

    /// Folds a matched detection's embedding into the state.
    pub fn observe(&mut self, embedding: &[f32]) -> Result<()> {
        match self.mode {
            AppearanceMode::Bank => self.push_bank(embedding),
            AppearanceMode::Ema => self.ema_update(embedding).map(|_| ()),
        }
    }

    pub fn distance(&self, embedding: &[f32]) -> Result<f64> {
        match self.mode {
            AppearanceMode::Bank => self.bank_distance(embedding),
            AppearanceMode::Ema => self
                .ema
                .as_deref()
                .map(|e| cosine_distance(e, embedding))
                .ok_or_else(|| Error::State("EMA state has no vector yet".into())),
        }
    }
}

/// Appearance cost `A_a`, one row per track and one column per detection.
pub fn appearance_cost_matrix(
    tracks: &[&AppearanceState],
    detections: &[Detection],
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(tracks.len(), detections.len());
    for (j, det) in detections.iter().enumerate() {
        let emb = det.embedding.as_deref().ok_or(Error::MissingEmbedding {
            frame: det.frame,
            index: det.source_index,
        })?;
        for (i, t) in tracks.iter().enumerate() {
            out[(i, j)] = t.distance(emb)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
        let v: Vec<f32> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        crate::mot_io::normalize_embedding(&v).unwrap()
    }

    #[test]
    fn bank_distance_cases() {
        let mut s = AppearanceState::bank(100);
        assert!(matches!(s.bank_distance(&[1.0, 0.0]), Err(Error::State(_))));
        s.push_bank(&[1.0, 0.0]).unwrap();
        assert_eq!(s.bank_distance(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(s.bank_distance(&[0.0, 1.0]).unwrap(), 1.0);
        s.push_bank(&[0.0, 1.0]).unwrap();
        assert_eq!(s.bank_distance(&[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn bank_is_bounded() {
        let mut s = AppearanceState::bank(3);
        for i in 0..5 {
            s.push_bank(&[i as f32, 1.0]).unwrap();
        }
        let firsts: Vec<f32> = s.bank_vectors().map(|v| v[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn ema_cases() {
        assert_eq!(ema_blend(&[1.0, 0.0], &[0.0, 1.0], 0.9), vec![0.9, 0.09999999999999998]);

        let mut s = AppearanceState::ema(0.9).unwrap();
        assert_eq!(s.ema_update(&[1.0, 0.0]).unwrap(), EmaOutcome::Initialized);
        assert_eq!(s.ema_update(&[0.0, 1.0]).unwrap(), EmaOutcome::Updated);
        let e = s.ema_vector().unwrap();
        let n = (0.81f64 + 0.01).sqrt();
        assert!((e[0] as f64 - 0.9 / n).abs() < 1e-6 && (e[1] as f64 - 0.1 / n).abs() < 1e-6);

        let mut keep = AppearanceState::ema(1.0).unwrap();
        keep.ema_update(&[1.0, 0.0]).unwrap();
        keep.ema_update(&[0.0, 1.0]).unwrap();
        assert_eq!(keep.ema_vector().unwrap(), &[1.0, 0.0]);

        let mut replace = AppearanceState::ema(0.0).unwrap();
        replace.ema_update(&[1.0, 0.0]).unwrap();
        replace.ema_update(&[0.0, 1.0]).unwrap();
        assert_eq!(replace.ema_vector().unwrap(), &[0.0, 1.0]);

        let mut anti = AppearanceState::ema(0.5).unwrap();
        anti.ema_update(&[1.0, 0.0]).unwrap();
        assert_eq!(anti.ema_update(&[-1.0, 0.0]).unwrap(), EmaOutcome::DegenerateKept);
        assert_eq!(anti.ema_vector().unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn ema_is_scale_insensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = unit(&mut rng, 8);
        let b = unit(&mut rng, 8);
        let scaled: Vec<f32> = b.iter().map(|v| v * 3.0).collect();
        let mut s1 = AppearanceState::ema(0.9).unwrap();
        let mut s2 = s1.clone();
        s1.ema_update(&a).unwrap();
        s2.ema_update(&a).unwrap();
        s1.ema_update(&b).unwrap();
        s2.ema_update(&crate::mot_io::normalize_embedding(&scaled).unwrap())
            .unwrap();
        for (x, y) in s1.ema_vector().unwrap().iter().zip(s2.ema_vector().unwrap()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn cost_matrix_shapes_and_values() {
        let mut s = AppearanceState::ema(0.9).unwrap();
        s.ema_update(&[1.0, 0.0]).unwrap();
        let dets = vec![
            Detection::new(1, BBox::new(0.0, 0.0, 1.0, 1.0), 0.9).with_embedding(vec![1.0, 0.0]),
            Detection::new(1, BBox::new(0.0, 0.0, 1.0, 1.0), 0.9).with_embedding(vec![0.0, 1.0]),
        ];
        let m = appearance_cost_matrix(&[&s], &dets).unwrap();
        assert_eq!((m[(0, 0)], m[(0, 1)]), (0.0, 1.0));

        let empty = appearance_cost_matrix(&[], &dets).unwrap();
        assert_eq!(empty.shape(), (0, 2));

        let bare = vec![Detection::new(1, BBox::new(0.0, 0.0, 1.0, 1.0), 0.9)];
        assert!(matches!(
            appearance_cost_matrix(&[&s], &bare),
            Err(Error::MissingEmbedding { .. })
        ));
    }

    #[test]
    fn bank_holding_ema_vector_matches_ema_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut ema = AppearanceState::ema(0.9).unwrap();
            ema.ema_update(&unit(&mut rng, 16)).unwrap();
            ema.ema_update(&unit(&mut rng, 16)).unwrap();
            let mut bank = AppearanceState::bank(100);
            bank.push_bank(ema.ema_vector().unwrap()).unwrap();
            let dets: Vec<Detection> = (0..4)
                .map(|_| {
                    Detection::new(1, BBox::new(0.0, 0.0, 1.0, 1.0), 0.9)
                        .with_embedding(unit(&mut rng, 16))
                })
                .collect();
            let a = appearance_cost_matrix(&[&ema], &dets).unwrap();
            let b = appearance_cost_matrix(&[&bank], &dets).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|v| (0.0..=2.0).contains(v)));
        }
    }

    #[test]
    fn adding_to_bank_never_increases_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = AppearanceState::bank(100);
        let q = unit(&mut rng, 8);
        s.push_bank(&unit(&mut rng, 8)).unwrap();
        let mut prev = s.bank_distance(&q).unwrap();
        for _ in 0..30 {
            s.push_bank(&unit(&mut rng, 8)).unwrap();
            let d = s.bank_distance(&q).unwrap();
            assert!(d <= prev);
            prev = d;
        }
    }
}
