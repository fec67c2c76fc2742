use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::losses::{l1_to, squared_error_to};
use super::networks::{build_discriminator, build_generator, check_discriminator_input, check_generator_input};
use super::{total_generator_objective, GeneratorLossParts, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{Network, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Uninformative (artifact-degraded) frames.
    A,
    /// Informative frames.
    B,
}

/// G_AB, G_BA, D_A, D_B.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleGan<T> {
    pub g_ab: Network<T>,
    pub g_ba: Network<T>,
    pub d_a: Network<T>,
    pub d_b: Network<T>,
    pub config: TrainConfig,
}

/// Generator objective with gradients for both generators.
#[derive(Debug, Clone)]
pub struct GeneratorGradients<T> {
    pub parts: GeneratorLossParts,
    pub total: f64,
    pub grads_ab: Vec<T>,
    pub grads_ba: Vec<T>,
    /// G_AB(a), fed to the D_B update.
    pub fake_b: Tensor<T>,
    /// G_BA(b), fed to the D_A update.
    pub fake_a: Tensor<T>,
}

fn scaled<T: Real>(mut t: Tensor<T>, s: f64) -> Tensor<T> {
    let s = T::of(s);
    for v in &mut t.data {
        *v *= s;
    }
    t
}

fn add_into<T: Real>(acc: &mut Tensor<T>, other: &Tensor<T>) {
    for (a, &b) in acc.data.iter_mut().zip(&other.data) {
        *a += b;
    }
}

impl<T: Real> CycleGan<T> {
    /// Fresh networks with N(0, init_std) weights drawn from `seed`.
    pub fn new(config: TrainConfig, seed: u64) -> Result<Self> {
        config.generator.validate()?;
        config.discriminator.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = config.init_std;
        Ok(Self {
            g_ab: build_generator(&config.generator, &mut rng, std),
            g_ba: build_generator(&config.generator, &mut rng, std),
            d_a: build_discriminator(&config.discriminator, &mut rng, std),
            d_b: build_discriminator(&config.discriminator, &mut rng, std),
            config,
        })
    }

    pub fn generator(&self, towards: Domain) -> &Network<T> {
        match towards {
            Domain::B => &self.g_ab,
            Domain::A => &self.g_ba,
        }
    }

    pub fn discriminator(&self, of: Domain) -> &Network<T> {
        match of {
            Domain::A => &self.d_a,
            Domain::B => &self.d_b,
        }
    }

    fn check_batches(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
        check_generator_input(a)?;
        check_generator_input(b)?;
        check_discriminator_input(&self.config.discriminator, a)?;
        check_discriminator_input(&self.config.discriminator, b)?;
        if [a.c, a.h, a.w] != [b.c, b.h, b.w] {
            return Err(Error::Shape(format!(
                "domain batches differ in image shape: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(())
    }

    /// Evaluates the generator objective without gradients.
    pub fn generator_objective(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<(GeneratorLossParts, f64)> {
        self.check_batches(a, b)?;
        let w = self.config.weights;
        let fake_b = self.g_ab.forward(a)?;
        let fake_a = self.g_ba.forward(b)?;
        let rec_a = self.g_ba.forward(&fake_b)?;
        let rec_b = self.g_ab.forward(&fake_a)?;
        let mut parts = GeneratorLossParts {
            adv_ab: squared_error_to(&self.d_b.forward(&fake_b)?, 1.0).0,
            adv_ba: squared_error_to(&self.d_a.forward(&fake_a)?, 1.0).0,
            cycle: l1_to(&rec_a, a).0 + l1_to(&rec_b, b).0,
            identity: 0.0,
        };
        if w.lambda_idt > 0.0 {
            parts.identity = l1_to(&self.g_ab.forward(b)?, b).0 + l1_to(&self.g_ba.forward(a)?, a).0;
        }
        let total = total_generator_objective(&parts, &w)?;
        Ok((parts, total))
    }

    /// Forward and backward pass of the generator objective with the
    /// discriminators held fixed. The identity term is skipped (and
    /// reported as 0) when its weight is 0.
    pub fn generator_gradients(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<GeneratorGradients<T>> {
        self.check_batches(a, b)?;
        let w = self.config.weights;

        let (fake_b, tape_fake_b) = self.g_ab.forward_traced(a)?;
        let (rec_a, tape_rec_a) = self.g_ba.forward_traced(&fake_b)?;
        let (fake_a, tape_fake_a) = self.g_ba.forward_traced(b)?;
        let (rec_b, tape_rec_b) = self.g_ab.forward_traced(&fake_a)?;
        let (score_fb, tape_score_fb) = self.d_b.forward_traced(&fake_b)?;
        let (score_fa, tape_score_fa) = self.d_a.forward_traced(&fake_a)?;

        let (adv_ab, g_score_fb) = squared_error_to(&score_fb, 1.0);
        let (adv_ba, g_score_fa) = squared_error_to(&score_fa, 1.0);
        let (cyc_a, g_rec_a) = l1_to(&rec_a, a);
        let (cyc_b, g_rec_b) = l1_to(&rec_b, b);

        let mut parts = GeneratorLossParts {
            adv_ab,
            adv_ba,
            cycle: cyc_a + cyc_b,
            identity: 0.0,
        };
        let identity = if w.lambda_idt > 0.0 {
            let (idt_b, tape_idt_b) = self.g_ab.forward_traced(b)?;
            let (idt_a, tape_idt_a) = self.g_ba.forward_traced(a)?;
            let (l_b, g_b) = l1_to(&idt_b, b);
            let (l_a, g_a) = l1_to(&idt_a, a);
            parts.identity = l_a + l_b;
            Some((tape_idt_b, g_b, tape_idt_a, g_a))
        } else {
            None
        };
        let total = total_generator_objective(&parts, &w)?;

        let mut grads_ab = self.g_ab.zero_grads();
        let mut grads_ba = self.g_ba.zero_grads();
        let mut discard_b = self.d_b.zero_grads();
        let mut discard_a = self.d_a.zero_grads();

        // d total / d fake_b: adversarial path through D_B plus cycle path through G_BA
        let mut d_fake_b = self.d_b.backward(tape_score_fb, scaled(g_score_fb, w.lambda_adv), &mut discard_b);
        let via_rec_a = self.g_ba.backward(tape_rec_a, scaled(g_rec_a, w.lambda_cyc), &mut grads_ba);
        add_into(&mut d_fake_b, &via_rec_a);
        self.g_ab.backward(tape_fake_b, d_fake_b, &mut grads_ab);

        let mut d_fake_a = self.d_a.backward(tape_score_fa, scaled(g_score_fa, w.lambda_adv), &mut discard_a);
        let via_rec_b = self.g_ab.backward(tape_rec_b, scaled(g_rec_b, w.lambda_cyc), &mut grads_ab);
        add_into(&mut d_fake_a, &via_rec_b);
        self.g_ba.backward(tape_fake_a, d_fake_a, &mut grads_ba);

        if let Some((tape_idt_b, g_b, tape_idt_a, g_a)) = identity {
            self.g_ab.backward(tape_idt_b, scaled(g_b, w.lambda_idt), &mut grads_ab);
            self.g_ba.backward(tape_idt_a, scaled(g_a, w.lambda_idt), &mut grads_ba);
        }

        Ok(GeneratorGradients {
            parts,
            total,
            grads_ab,
            grads_ba,
            fake_b,
            fake_a,
        })
    }

    /// Least-squares discriminator loss of D_`of` on `real` vs `fake`, with
    /// gradients w.r.t. that discriminator's parameters.
    pub fn discriminator_gradients(&self, of: Domain, real: &Tensor<T>, fake: &Tensor<T>) -> Result<(f64, Vec<T>)> {
        let net = self.discriminator(of);
        check_discriminator_input(&self.config.discriminator, real)?;
        check_discriminator_input(&self.config.discriminator, fake)?;
        let (score_real, tape_real) = net.forward_traced(real)?;
        let (score_fake, tape_fake) = net.forward_traced(fake)?;
        let (l_real, g_real) = squared_error_to(&score_real, 1.0);
        let (l_fake, g_fake) = squared_error_to(&score_fake, 0.0);
        let loss = l_real + l_fake;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                term: format!("discriminator {of:?}"),
            });
        }
        let mut grads = net.zero_grads();
        net.backward(tape_real, g_real, &mut grads);
        net.backward(tape_fake, g_fake, &mut grads);
        Ok((loss, grads))
    }

    /// Discriminator loss without gradients.
    pub fn discriminator_loss(&self, of: Domain, real: &Tensor<T>, fake: &Tensor<T>) -> Result<f64> {
        let net = self.discriminator(of);
        check_discriminator_input(&self.config.discriminator, real)?;
        check_discriminator_input(&self.config.discriminator, fake)?;
        super::adversarial_loss_discriminator(&net.forward(real)?, &net.forward(fake)?)
    }
}
