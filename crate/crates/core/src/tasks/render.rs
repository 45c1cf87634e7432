use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: usize,
    pub pattern: Vec<u32>,
    pub name_token: u32,
}

pub fn hamming(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Draws base patterns by rejection sampling so every pair differs in at
/// least `t_img / 2` positions.
pub fn generate_classes(vocab: &Vocabulary, t_img: usize, seed: u64) -> Result<Vec<ClassSpec>> {
    if t_img == 0 {
        return Err(Error::Config("t_img must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = t_img.div_ceil(2);
    let mut classes: Vec<ClassSpec> = Vec::with_capacity(vocab.n_classes);
    let mut attempts = 0usize;
    while classes.len() < vocab.n_classes {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Config(format!(
                "could not draw {} patterns with Hamming margin {margin}",
                vocab.n_classes
            )));
        }
        let pattern: Vec<u32> = (0..t_img)
            .map(|_| rng.gen_range(0..vocab.n_image_codes as u32))
            .collect();
        if classes.iter().all(|c| hamming(&c.pattern, &pattern) >= margin) {
            let id = classes.len();
            classes.push(ClassSpec {
                id,
                pattern,
                name_token: vocab.class_token(id),
            });
        }
    }
    Ok(classes)
}

/// Each position keeps the base code with probability `1 - noise_eps`, else
/// takes a uniformly random code.
pub fn render_image(class: &ClassSpec, noise_eps: f64, n_image_codes: usize, seed: u64) -> Result<Vec<u32>> {
    if !(0.0..0.5).contains(&noise_eps) {
        return Err(Error::InvalidInput(format!(
            "noise_eps {noise_eps} outside [0, 0.5)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(class
        .pattern
        .iter()
        .map(|&code| {
            if rng.gen::<f64>() < noise_eps {
                rng.gen_range(0..n_image_codes as u32)
            } else {
                code
            }
        })
        .collect())
}
