//! Least-squares adversarial, cycle-consistency and identity losses.
//!
//! Expectations are batch means and every reduction is a per-element mean,
//! so loss magnitudes do not depend on resolution.

use serde::{Deserialize, Serialize};

use super::LossWeights;
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

fn non_empty<T: Real>(t: &Tensor<T>, what: &'static str) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Empty(what));
    }
    Ok(())
}

fn same_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `mean((x − target)²)` and its gradient w.r.t. `x`.
pub(crate) fn squared_error_to<T: Real>(x: &Tensor<T>, target: f64) -> (f64, Tensor<T>) {
    let n = x.len() as f64;
    let t = T::of(target);
    let scale = T::of(2.0 / n);
    let grad = x.map(|v| scale * (v - t));
    let sum: f64 = x
        .data
        .iter()
        .map(|&v| {
            let d = v.as_f64() - target;
            d * d
        })
        .sum();
    (sum / n, grad)
}

/// `mean|pred − target|` and its gradient w.r.t. `pred` (subgradient 0 at ties).
pub(crate) fn l1_to<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> (f64, Tensor<T>) {
    let n = pred.len() as f64;
    let step = T::of(1.0 / n);
    let mut sum = 0.0;
    let mut grad = Tensor::zeros(pred.n, pred.c, pred.h, pred.w);
    for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p.as_f64() - t.as_f64();
        sum += d.abs();
        *g = if p > t {
            step
        } else if p < t {
            -step
        } else {
            T::zero()
        };
    }
    (sum / n, grad)
}

/// Discriminator side: `mean((D(real) − 1)²) + mean(D(fake)²)`.
///
/// No ½ factor. Zero exactly when every real score is 1 and every fake
/// score is 0.
pub fn adversarial_loss_discriminator<T: Real>(real_scores: &Tensor<T>, fake_scores: &Tensor<T>) -> Result<f64> {
    non_empty(real_scores, "real score batch")?;
    non_empty(fake_scores, "fake score batch")?;
    Ok(squared_error_to(real_scores, 1.0).0 + squared_error_to(fake_scores, 0.0).0)
}

/// Generator side: `mean((D(G(x)) − 1)²)`.
pub fn adversarial_loss_generator<T: Real>(fake_scores: &Tensor<T>) -> Result<f64> {
    non_empty(fake_scores, "fake score batch")?;
    Ok(squared_error_to(fake_scores, 1.0).0)
}

/// `mean|rec_a − a| + mean|rec_b − b|`.
pub fn cycle_loss<T: Real>(a: &Tensor<T>, rec_a: &Tensor<T>, b: &Tensor<T>, rec_b: &Tensor<T>) -> Result<f64> {
    same_shape(a, rec_a, "cycle reconstruction of A")?;
    same_shape(b, rec_b, "cycle reconstruction of B")?;
    non_empty(a, "domain A batch")?;
    non_empty(b, "domain B batch")?;
    Ok(l1_to(rec_a, a).0 + l1_to(rec_b, b).0)
}

/// `mean|G_AB(b) − b| + mean|G_BA(a) − a|`, with `idt_a = G_BA(a)` and
/// `idt_b = G_AB(b)`.
pub fn identity_loss<T: Real>(a: &Tensor<T>, idt_a: &Tensor<T>, b: &Tensor<T>, idt_b: &Tensor<T>) -> Result<f64> {
    same_shape(a, idt_a, "identity mapping of A")?;
    same_shape(b, idt_b, "identity mapping of B")?;
    non_empty(a, "domain A batch")?;
    non_empty(b, "domain B batch")?;
    Ok(l1_to(idt_b, b).0 + l1_to(idt_a, a).0)
}

/// Unweighted terms of the generator objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLossParts {
    /// Adversarial term of G_AB against D_B.
    pub adv_ab: f64,
    /// Adversarial term of G_BA against D_A.
    pub adv_ba: f64,
    pub cycle: f64,
    pub identity: f64,
}

/// `λ_adv·(adv_ab + adv_ba) + λ_cyc·cycle + λ_idt·identity`.
pub fn total_generator_objective(parts: &GeneratorLossParts, weights: &LossWeights) -> Result<f64> {
    for (term, v) in [
        ("adv_ab", parts.adv_ab),
        ("adv_ba", parts.adv_ba),
        ("cycle", parts.cycle),
        ("identity", parts.identity),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { term: term.into() });
        }
    }
    weights.validate()?;
    Ok(weights.lambda_adv * (parts.adv_ab + parts.adv_ba)
        + weights.lambda_cyc * parts.cycle
        + weights.lambda_idt * parts.identity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.len(), 1, 1, 1, v.to_vec())
    }

    #[test]
    fn discriminator_examples() {
        assert_eq!(adversarial_loss_discriminator(&t(&[1.0, 1.0]), &t(&[0.0])).unwrap(), 0.0);
        assert!((adversarial_loss_discriminator(&t(&[0.5]), &t(&[0.5])).unwrap() - 0.5).abs() < 1e-12);
        assert!((adversarial_loss_discriminator(&t(&[1.0, 0.0]), &t(&[0.0])).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn generator_examples() {
        assert_eq!(adversarial_loss_generator(&t(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(adversarial_loss_generator(&t(&[0.0])).unwrap(), 1.0);
        assert!((adversarial_loss_generator(&t(&[0.25, 0.75])).unwrap() - 0.3125).abs() < 1e-12);
    }

    #[test]
    fn empty_batches_are_errors() {
        let empty = Tensor::<f64>::zeros(0, 1, 1, 1);
        assert!(adversarial_loss_discriminator(&empty, &t(&[0.0])).is_err());
        assert!(adversarial_loss_discriminator(&t(&[0.0]), &empty).is_err());
        assert!(adversarial_loss_generator(&empty).is_err());
    }

    #[test]
    fn cycle_and_identity_examples() {
        let a = Tensor::<f64>::zeros(1, 3, 2, 2);
        let rec_a = Tensor::full(1, 3, 2, 2, 0.1);
        assert_eq!(cycle_loss(&a, &a, &a, &a).unwrap(), 0.0);
        assert!((cycle_loss(&a, &rec_a, &a, &a).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(
            cycle_loss(&a, &rec_a, &rec_a, &a).unwrap(),
            cycle_loss(&rec_a, &a, &a, &rec_a).unwrap()
        );

        let b = Tensor::full(1, 3, 2, 2, 0.5);
        let idt_b = Tensor::full(1, 3, 2, 2, 0.4);
        assert!((identity_loss(&a, &a, &b, &idt_b).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(identity_loss(&a, &a, &b, &b).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Tensor::<f64>::zeros(1, 3, 2, 2);
        let other = Tensor::<f64>::zeros(1, 3, 2, 4);
        assert!(matches!(cycle_loss(&a, &other, &a, &a), Err(Error::Shape(_))));
        assert!(matches!(identity_loss(&a, &a, &a, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn composite_examples() {
        let w = LossWeights::default();
        assert_eq!(total_generator_objective(&GeneratorLossParts::default(), &w).unwrap(), 0.0);
        let parts = GeneratorLossParts {
            adv_ab: 0.1,
            adv_ba: 0.1,
            cycle: 0.2,
            identity: 0.05,
        };
        assert!((total_generator_objective(&parts, &w).unwrap() - 2.45).abs() < 1e-12);
        let adv_only = LossWeights {
            lambda_cyc: 0.0,
            lambda_idt: 0.0,
            ..w
        };
        assert!((total_generator_objective(&parts, &adv_only).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_finite_part_names_the_term() {
        let parts = GeneratorLossParts {
            cycle: f64::NAN,
            ..Default::default()
        };
        match total_generator_objective(&parts, &LossWeights::default()) {
            Err(Error::NonFinite { term }) => assert_eq!(term, "cycle"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradients_match_closed_form() {
        let x = t(&[0.25, 0.75]);
        let (v, g) = squared_error_to(&x, 1.0);
        assert!((v - 0.3125).abs() < 1e-12);
        assert_eq!(g.data, vec![-0.75, -0.25]);
        let (l, gl) = l1_to(&t(&[0.5, -1.0, 2.0]), &t(&[0.5, 0.0, 0.0]));
        assert!((l - 1.0).abs() < 1e-12);
        assert_eq!(gl.data, vec![0.0, -1.0 / 3.0, 1.0 / 3.0]);
    }
}
