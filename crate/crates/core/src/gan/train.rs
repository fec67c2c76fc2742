use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::{self, CheckpointManifest, LossMeans, PoolState};
use super::model::{CycleGan, Domain};
use super::pool::ImagePool;
use super::{config_hash, TrainConfig};
use crate::degrade::derive_seed;
use crate::error::{Error, Result};
use crate::imaging::seeded_permutation;
use crate::nn::{Adam, Network, Real, Tensor};

/// Losses observed in one optimisation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: u64,
    pub adv_ab: f64,
    pub adv_ba: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total_g: f64,
    pub d_a: f64,
    pub d_b: f64,
}

impl LossRecord {
    fn means(records: &[LossRecord]) -> LossMeans {
        let n = records.len().max(1) as f64;
        let mut m = LossMeans::default();
        for r in records {
            m.adv_ab += r.adv_ab;
            m.adv_ba += r.adv_ba;
            m.cycle += r.cycle;
            m.identity += r.identity;
            m.total_g += r.total_g;
            m.d_a += r.d_a;
            m.d_b += r.d_b;
        }
        LossMeans {
            adv_ab: m.adv_ab / n,
            adv_ba: m.adv_ba / n,
            cycle: m.cycle / n,
            identity: m.identity / n,
            total_g: m.total_g / n,
            d_a: m.d_a / n,
            d_b: m.d_b / n,
        }
    }
}

/// Model plus everything else that must be restored to resume bit-exactly:
/// optimiser moments, pool contents and generator positions, counters.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: CycleGan<T>,
    opt_g_ab: Adam<T>,
    opt_g_ba: Adam<T>,
    opt_d_a: Adam<T>,
    opt_d_b: Adam<T>,
    pool_a: ImagePool<T>,
    pool_b: ImagePool<T>,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub seed: u64,
    /// Hash stamped on checkpoints and compared on resume.
    pub config_hash: String,
    /// Per-epoch loss means of every completed epoch.
    pub history: Vec<LossMeans>,
}

const NET_FILES: [&str; 4] = ["g_ab", "g_ba", "d_a", "d_b"];

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let model = CycleGan::new(config, derive_seed(seed, "init"))?;
        Ok(Self::from_model(model, seed, config_hash(&config)))
    }

    /// Wraps existing networks with fresh optimiser and pool state.
    pub fn from_model(model: CycleGan<T>, seed: u64, config_hash: String) -> Self {
        let c = model.config;
        Self {
            opt_g_ab: Adam::new(c.adam, model.g_ab.n_params()),
            opt_g_ba: Adam::new(c.adam, model.g_ba.n_params()),
            opt_d_a: Adam::new(c.adam, model.d_a.n_params()),
            opt_d_b: Adam::new(c.adam, model.d_b.n_params()),
            pool_a: ImagePool::new(c.pool, derive_seed(seed, "pool_a")),
            pool_b: ImagePool::new(c.pool, derive_seed(seed, "pool_b")),
            model,
            epoch: 0,
            step: 0,
            seed,
            config_hash,
            history: Vec::new(),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.model.config
    }

    /// Generator update, then D_B and D_A updates on pool-drawn fakes.
    ///
    /// The fakes shown to the discriminators are the ones produced before the
    /// generator update.
    pub fn train_step(&mut self, a: &Tensor<T>, b: &Tensor<T>, lr_scale: f64) -> Result<LossRecord> {
        let g = self.model.generator_gradients(a, b)?;
        self.opt_g_ab.update(self.model.g_ab.params_mut(), &g.grads_ab, lr_scale);
        self.opt_g_ba.update(self.model.g_ba.params_mut(), &g.grads_ba, lr_scale);

        let fake_b = self.pool_b.query(&g.fake_b);
        let (d_b, grads) = self.model.discriminator_gradients(Domain::B, b, &fake_b)?;
        self.opt_d_b.update(self.model.d_b.params_mut(), &grads, lr_scale);

        let fake_a = self.pool_a.query(&g.fake_a);
        let (d_a, grads) = self.model.discriminator_gradients(Domain::A, a, &fake_a)?;
        self.opt_d_a.update(self.model.d_a.params_mut(), &grads, lr_scale);

        for (net, name) in [
            (&self.model.g_ab, "G_AB parameters"),
            (&self.model.g_ba, "G_BA parameters"),
            (&self.model.d_a, "D_A parameters"),
            (&self.model.d_b, "D_B parameters"),
        ] {
            if !net.params().iter().all(|p| p.is_finite()) {
                return Err(Error::NonFinite { term: name.into() });
            }
        }

        self.step += 1;
        Ok(LossRecord {
            epoch: self.epoch,
            step: self.step,
            adv_ab: g.parts.adv_ab,
            adv_ba: g.parts.adv_ba,
            cycle: g.parts.cycle,
            identity: g.parts.identity,
            total_g: g.total,
            d_a,
            d_b,
        })
    }

    /// Batches of one epoch: each domain is visited in its own seeded order,
    /// the shorter one wrapping around, for `ceil(max(|A|, |B|) / batch)`
    /// steps.
    fn epoch_batches(&self, n_a: usize, n_b: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let bs = self.config().batch_size;
        let perm_a = seeded_permutation(n_a, derive_seed(self.seed, &format!("epoch{}/A", self.epoch)));
        let perm_b = seeded_permutation(n_b, derive_seed(self.seed, &format!("epoch{}/B", self.epoch)));
        let steps = n_a.max(n_b).div_ceil(bs);
        (0..steps)
            .map(|s| {
                let ia = (0..bs).map(|k| perm_a[(s * bs + k) % n_a]).collect();
                let ib = (0..bs).map(|k| perm_b[(s * bs + k) % n_b]).collect();
                (ia, ib)
            })
            .collect()
    }

    /// Runs one epoch over single-image tensors of each domain.
    pub fn run_epoch(
        &mut self,
        a: &[Tensor<T>],
        b: &[Tensor<T>],
        mut on_step: impl FnMut(&LossRecord),
    ) -> Result<Vec<LossRecord>> {
        if a.is_empty() {
            return Err(Error::Empty("domain A training images"));
        }
        if b.is_empty() {
            return Err(Error::Empty("domain B training images"));
        }
        let lr_scale = self.config().lr_scale(self.epoch);
        let mut records = Vec::new();
        for (ia, ib) in self.epoch_batches(a.len(), b.len()) {
            let batch_a = Tensor::stack(&ia.iter().map(|&i| a[i].clone()).collect::<Vec<_>>());
            let batch_b = Tensor::stack(&ib.iter().map(|&i| b[i].clone()).collect::<Vec<_>>());
            let r = self.train_step(&batch_a, &batch_b, lr_scale)?;
            on_step(&r);
            records.push(r);
        }
        self.history.push(LossRecord::means(&records));
        self.epoch += 1;
        Ok(records)
    }

    /// Trains until `config.epochs` epochs are complete, writing a
    /// checkpoint under `checkpoint_root` after each one when given.
    pub fn fit(
        &mut self,
        a: &[Tensor<T>],
        b: &[Tensor<T>],
        checkpoint_root: Option<&Path>,
        mut on_step: impl FnMut(&LossRecord),
    ) -> Result<Vec<LossRecord>> {
        let mut all = Vec::new();
        while self.epoch < self.config().epochs {
            all.extend(self.run_epoch(a, b, &mut on_step)?);
            if let Some(root) = checkpoint_root {
                self.save_checkpoint(&checkpoint::epoch_dir(root, self.epoch))?;
            }
        }
        Ok(all)
    }

    fn networks(&self) -> [&Network<T>; 4] {
        [&self.model.g_ab, &self.model.g_ba, &self.model.d_a, &self.model.d_b]
    }

    fn optimisers(&self) -> [&Adam<T>; 4] {
        [&self.opt_g_ab, &self.opt_g_ba, &self.opt_d_a, &self.opt_d_b]
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (net, name) in self.networks().into_iter().zip(NET_FILES) {
            checkpoint::write_blob(&dir.join(format!("{name}.bin")), net.params())?;
        }
        for (opt, name) in self.optimisers().into_iter().zip(NET_FILES) {
            let mut mv = opt.m.clone();
            mv.extend_from_slice(&opt.v);
            checkpoint::write_blob(&dir.join(format!("adam_{name}.bin")), &mv)?;
        }
        let pool_state = |pool: &ImagePool<T>, file: &str| -> Result<PoolState> {
            let flat: Vec<T> = pool.stored().iter().flat_map(|t| t.data.iter().copied()).collect();
            checkpoint::write_blob(&dir.join(file), &flat)?;
            let shape = pool.stored().first().map_or([0; 3], |t| [t.c, t.h, t.w]);
            Ok(PoolState {
                len: pool.len(),
                image_shape: shape,
                rng: pool.rng_state(),
            })
        };
        let manifest = CheckpointManifest {
            epoch: self.epoch,
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            loss_means: self.history.last().copied().unwrap_or_default(),
            history: self.history.clone(),
            dtype: T::DTYPE.into(),
            step: self.step,
            adam_steps: self.optimisers().map(|o| o.step),
            pool_a: pool_state(&self.pool_a, "pool_a.bin")?,
            pool_b: pool_state(&self.pool_b, "pool_b.bin")?,
            config: self.model.config,
        };
        manifest.save(dir)
    }

    /// Restores a checkpoint. When `expected_hash` is given, a checkpoint
    /// stamped with a different configuration hash is rejected.
    pub fn load_checkpoint(dir: &Path, expected_hash: Option<&str>) -> Result<Self> {
        let m = CheckpointManifest::load(dir)?;
        if m.dtype != T::DTYPE {
            return Err(Error::Mismatch(format!(
                "checkpoint {} holds {} weights, expected {}",
                dir.display(),
                m.dtype,
                T::DTYPE
            )));
        }
        if let Some(h) = expected_hash {
            if h != m.config_hash {
                return Err(Error::Mismatch(format!(
                    "checkpoint {} was written under config {}, current config is {h}",
                    dir.display(),
                    m.config_hash
                )));
            }
        }
        let mut model = CycleGan::<T>::new(m.config, 0)?;
        let mut trainer_nets = [&mut model.g_ab, &mut model.g_ba, &mut model.d_a, &mut model.d_b];
        for (net, name) in trainer_nets.iter_mut().zip(NET_FILES) {
            let path = dir.join(format!("{name}.bin"));
            net.set_params(checkpoint::read_blob(&path)?)
                .map_err(|e| Error::format(&path, e))?;
        }
        let mut t = Self::from_model(model, m.seed, m.config_hash.clone());
        let opts = [&mut t.opt_g_ab, &mut t.opt_g_ba, &mut t.opt_d_a, &mut t.opt_d_b];
        for ((opt, name), step) in opts.into_iter().zip(NET_FILES).zip(m.adam_steps) {
            let path = dir.join(format!("adam_{name}.bin"));
            let mv: Vec<T> = checkpoint::read_blob(&path)?;
            let n = opt.m.len();
            if mv.len() != 2 * n {
                return Err(Error::format(&path, format!("expected {} moments, found {}", 2 * n, mv.len())));
            }
            opt.m = mv[..n].to_vec();
            opt.v = mv[n..].to_vec();
            opt.step = step;
        }
        let restore_pool = |state: &PoolState, file: &str| -> Result<ImagePool<T>> {
            let path = dir.join(file);
            let flat: Vec<T> = checkpoint::read_blob(&path)?;
            let [c, h, w] = state.image_shape;
            let per = c * h * w;
            if flat.len() != state.len * per {
                return Err(Error::format(&path, "pool size disagrees with manifest"));
            }
            let images = (0..state.len)
                .map(|i| Tensor::from_vec(1, c, h, w, flat[i * per..(i + 1) * per].to_vec()))
                .collect();
            let rng = state
                .rng
                .restore()
                .ok_or_else(|| Error::format(dir.join(checkpoint::CHECKPOINT_MANIFEST), "bad pool rng position"))?;
            Ok(ImagePool::from_parts(m.config.pool, images, rng))
        };
        t.pool_a = restore_pool(&m.pool_a, "pool_a.bin")?;
        t.pool_b = restore_pool(&m.pool_b, "pool_b.bin")?;
        t.epoch = m.epoch;
        t.step = m.step;
        t.history = m.history;
        Ok(t)
    }

    /// Continues from the newest checkpoint under `root`, if any.
    pub fn resume_latest(root: &Path, expected_hash: Option<&str>) -> Result<Option<(Self, PathBuf)>> {
        match checkpoint::latest_checkpoint(root)? {
            Some(dir) => Ok(Some((Self::load_checkpoint(&dir, expected_hash)?, dir))),
            None => Ok(None),
        }
    }
}
